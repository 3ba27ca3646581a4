//! Command implementations behind the `stegcmdp` binary.
//!
//! Each `cmd_*` function is pure over its inputs and returns the artifact it
//! would print; [`run`] adds argument parsing and file IO.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use stegcmdp::closed_form::thresholds_of;
use stegcmdp::codec::{embed, extract, BitStream, ChainProvider};
use stegcmdp::oracle::{grid_search, kkt_verify};
use stegcmdp::simulator::{analytic_value, estimate_discounted, Quantity};
use stegcmdp::{canonicalize, optimal_policy, sweep, ChainParams, PolicySolution, State};

/// Column order of sweep CSV files.
pub const SWEEP_HEADER: [&str; 8] = ["b", "a0", "a1", "d0", "d1", "reward_bits", "cost", "regime"];
/// Bits of framing ahead of the payload: 32-bit payload length, then CRC-32.
pub const FRAME_HEADER_BITS: usize = 64;
pub const DEFAULT_STEPS: usize = 101;
pub const DEFAULT_GRID_STEP: f64 = 1e-3;
pub const DEFAULT_ROLLOUTS: usize = 100_000;
/// Automatic token counts double up to this bound.
pub const MAX_AUTO_TOKENS: usize = 1 << 24;

/// Flat JSON config shared by every command.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub p0: f64,
    pub p1: f64,
    pub init0: f64,
    pub gamma: f64,
    pub b: Option<f64>,
    pub b_min: Option<f64>,
    pub b_max: Option<f64>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

/// Bad input from the caller, reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| usage(format!("invalid config: {e}")))?;
        config.params()?;
        if let Some(b) = config.b {
            if !(b.is_finite() && b >= 0.0) {
                return Err(usage(format!("b must be a finite number >= 0, got {b}")));
            }
        }
        if let Some(steps) = config.steps {
            if steps < 2 {
                return Err(usage(format!("steps must be at least 2, got {steps}")));
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn params(&self) -> anyhow::Result<ChainParams> {
        ChainParams::new(self.p0, self.p1, self.init0, self.gamma).map_err(|e| usage(format!("invalid config: {e}")))
    }

    pub fn budget(&self) -> anyhow::Result<f64> {
        self.b.ok_or_else(|| usage("config needs a budget `b` for this command"))
    }
}

/// Rounds to 12 significant digits so printed values are stable across
/// platforms and summation orders.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn num(x: f64) -> Value {
    json!(round12(x))
}

fn solution_record(params: &ChainParams, sol: &PolicySolution) -> Value {
    let thresholds = sol
        .thresholds
        .map(|th| json!({ "b_low": num(th.b_low), "b_high": num(th.b_high) }))
        .unwrap_or(Value::Null);
    json!({
        "p0": params.p0(),
        "p1": params.p1(),
        "init0": params.init0(),
        "gamma": params.gamma(),
        "b": sol.budget,
        "a0": num(sol.policy.a0()),
        "a1": num(sol.policy.a1()),
        "d0": num(sol.occupancy.d0),
        "d1": num(sol.occupancy.d1),
        "regime": sol.regime.map(|r| r.to_string()),
        "thresholds": thresholds,
        "shape": sol.shape,
        "swapped": sol.swapped,
        "method": sol.method,
        "reward_bits": num(sol.reward),
        "cost": num(sol.cost),
    })
}

pub fn cmd_solve(config: &RunConfig) -> anyhow::Result<Value> {
    let params = config.params()?;
    let sol = optimal_policy(&params, config.budget()?)?;
    Ok(solution_record(&params, &sol))
}

/// Sweep rows as CSV text with a header line.
pub fn cmd_sweep(config: &RunConfig) -> anyhow::Result<String> {
    let params = config.params()?;
    let b_min = config.b_min.unwrap_or(0.0);
    let b_max = match config.b_max {
        Some(b) => b,
        None => default_b_max(&params),
    };
    if !(b_min.is_finite() && b_max.is_finite() && 0.0 <= b_min && b_min <= b_max) {
        return Err(usage(format!("sweep range needs 0 <= b_min <= b_max, got [{b_min}, {b_max}]")));
    }
    let rows = sweep(&params, b_min, b_max, config.steps.unwrap_or(DEFAULT_STEPS))?;
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(SWEEP_HEADER)?;
    for sol in &rows {
        let regime = sol.regime.map(|r| r.to_string()).unwrap_or_else(|| sol.method.to_string());
        out.write_record([
            round12(sol.budget).to_string(),
            round12(sol.policy.a0()).to_string(),
            round12(sol.policy.a1()).to_string(),
            round12(sol.occupancy.d0).to_string(),
            round12(sol.occupancy.d1).to_string(),
            round12(sol.reward).to_string(),
            round12(sol.cost).to_string(),
            regime,
        ])?;
    }
    Ok(String::from_utf8(out.into_inner()?)?)
}

/// A quarter past the saturation budget, or past the cost of the uniform
/// policy when the shape has no thresholds.
fn default_b_max(params: &ChainParams) -> f64 {
    let top = match thresholds_of(&canonicalize(params).params) {
        Ok(th) => th.b_high,
        Err(_) => stegcmdp::cost_of(&stegcmdp::Policy::uniform(), params),
    };
    (1.25 * top).max(1e-3)
}

pub fn cmd_oracle(config: &RunConfig, grid_step: f64) -> anyhow::Result<Value> {
    let params = config.params()?;
    let b = config.budget()?;
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(usage(format!("--grid-step must be in (0, 1], got {grid_step}")));
    }
    let grid = grid_search(&params, b, grid_step)?;
    let sol = optimal_policy(&params, b)?;
    Ok(json!({
        "b": b,
        "grid_step": grid_step,
        "a0": num(grid.policy.a0()),
        "a1": num(grid.policy.a1()),
        "reward_bits": num(grid.reward),
        "cost": num(grid.cost),
        "closed_form_reward_bits": num(sol.reward),
        "reward_gap": num(sol.reward - grid.reward),
    }))
}

/// KKT report for the solved policy, with `passed` deciding the exit status.
/// Shapes without a closed form have no certificate and fail.
pub fn cmd_verify(config: &RunConfig) -> anyhow::Result<(bool, Value)> {
    let params = config.params()?;
    let b = config.budget()?;
    let form = canonicalize(&params);
    let sol = optimal_policy(&params, b)?;
    if sol.regime.is_none() {
        let record = json!({
            "passed": false,
            "shape": sol.shape,
            "method": sol.method,
            "failures": [format!("no KKT certificate for shape {}", sol.shape)],
        });
        return Ok((false, record));
    }
    let report = kkt_verify(&form.params, b, &form.to_canonical(&sol.policy));
    Ok((report.passed, round_floats(serde_json::to_value(&report)?)))
}

fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => num(n.as_f64().unwrap_or_default()),
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

/// Monte-Carlo estimates of reward, cost and state-0 visitation for the
/// solved policy, next to their analytic values.
pub fn cmd_simulate(config: &RunConfig, rollouts: usize, seed: u64) -> anyhow::Result<Value> {
    let params = config.params()?;
    let sol = optimal_policy(&params, config.budget()?)?;
    let mut estimates = serde_json::Map::new();
    for (name, kind) in [
        ("reward_bits", Quantity::Reward),
        ("cost", Quantity::Cost),
        ("d0", Quantity::Visitation(State::Zero)),
    ] {
        let est = estimate_discounted(&params, &sol.policy, kind, rollouts, seed)?;
        let analytic = analytic_value(&params, &sol.policy, kind);
        estimates.insert(
            name.into(),
            json!({
                "mean": num(est.mean),
                "stderr": num(est.stderr),
                "analytic": num(analytic),
                "z_score": num(if est.stderr > 0.0 { (est.mean - analytic) / est.stderr } else { 0.0 }),
                "n_rollouts": est.n_rollouts,
                "horizon": est.horizon,
                "seed": est.seed,
            }),
        );
    }
    Ok(json!({
        "a0": num(sol.policy.a0()),
        "a1": num(sol.policy.a1()),
        "estimates": estimates,
    }))
}

/// Prepends the payload length in bits and the CRC-32 of its bytes.
pub fn frame(payload: &BitStream) -> anyhow::Result<BitStream> {
    let len = u32::try_from(payload.len()).context("message longer than 2^32 bits")?;
    let crc = crc32fast::hash(payload.as_bytes());
    let mut bytes = Vec::with_capacity(8 + payload.as_bytes().len());
    bytes.extend(len.to_be_bytes());
    bytes.extend(crc.to_be_bytes());
    bytes.extend(payload.as_bytes());
    Ok(BitStream::with_len(&bytes, FRAME_HEADER_BITS + payload.len())?)
}

/// Inverse of [`frame`] over a possibly longer bit prefix.
pub fn unframe(bits: &BitStream) -> anyhow::Result<BitStream> {
    if bits.len() < FRAME_HEADER_BITS {
        bail!("tokens carry only {} bits, fewer than the {FRAME_HEADER_BITS}-bit header", bits.len());
    }
    let word = |at: usize| (at..at + 32).fold(0u32, |acc, i| (acc << 1) | u32::from(bits.get(i).unwrap_or(false)));
    let len = word(0) as usize;
    let crc = word(32);
    let available = bits.len() - FRAME_HEADER_BITS;
    if available < len {
        bail!("message truncated: tokens carry {available} of {len} payload bits");
    }
    let payload = BitStream::from_bits(bits.iter().skip(FRAME_HEADER_BITS).take(len));
    let actual = crc32fast::hash(payload.as_bytes());
    if actual != crc {
        bail!("checksum mismatch (stored {crc:08x}, computed {actual:08x}); was extract given the embed config?");
    }
    Ok(payload)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedRecord {
    pub tokens: Vec<usize>,
    /// Framed bits carried by the tokens, header included.
    pub consumed: usize,
    pub framed_bits: usize,
    pub tail_seed: u64,
}

/// Embeds the framed message with the chain provider of the solved policy.
/// Without `n_tokens`, the count doubles until the whole frame fits.
pub fn cmd_embed(
    config: &RunConfig,
    message: &BitStream,
    n_tokens: Option<usize>,
    seed: u64,
) -> anyhow::Result<EmbedRecord> {
    let params = config.params()?;
    let sol = optimal_policy(&params, config.budget()?)?;
    let provider = ChainProvider::new(sol.policy, &params);
    let framed = frame(message)?;
    let out = match n_tokens {
        Some(0) => return Err(usage("--n-tokens must be at least 1")),
        Some(n) => embed(&framed, &provider, n, seed)?,
        None => {
            let mut n = framed.len().max(64);
            loop {
                let out = embed(&framed, &provider, n, seed)?;
                if out.consumed >= framed.len() {
                    break out;
                }
                if n >= MAX_AUTO_TOKENS {
                    bail!(
                        "policy ({}, {}) carries only {} of {} bits in {n} tokens",
                        sol.policy.a0(),
                        sol.policy.a1(),
                        out.consumed,
                        framed.len()
                    );
                }
                n *= 2;
            }
        }
    };
    Ok(EmbedRecord {
        tokens: out.tokens,
        consumed: out.consumed,
        framed_bits: framed.len(),
        tail_seed: seed,
    })
}

pub fn cmd_extract(config: &RunConfig, tokens: &[usize]) -> anyhow::Result<BitStream> {
    let params = config.params()?;
    let sol = optimal_policy(&params, config.budget()?)?;
    let provider = ChainProvider::new(sol.policy, &params);
    let bits = extract(tokens, &provider)?;
    unframe(&bits)
}

pub fn format_tokens(tokens: &[usize]) -> String {
    tokens.iter().map(|t| format!("{t}\n")).collect()
}

pub fn parse_tokens(text: &str) -> anyhow::Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            line.trim()
                .parse()
                .map_err(|e| usage(format!("token file line {}: {e}", i + 1)))
        })
        .collect()
}

#[derive(Debug, Parser)]
#[command(name = "stegcmdp", version, about = "Budgeted replacement policies for two-state token chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; overrides the config's `output`. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal policy for the config's budget.
    Solve(Common),
    /// CSV of optimal policies over [b_min, b_max].
    Sweep(Common),
    /// Grid-search maximizer, compared with the closed form.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
    },
    /// KKT certificate of the solved policy; exits 1 when it fails.
    Verify(Common),
    /// Monte-Carlo estimates for the solved policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_ROLLOUTS)]
        rollouts: usize,
        /// Defaults to the config's seed, then 0.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Hide a message file in a token sequence.
    Embed {
        #[command(flatten)]
        common: Common,
        /// Raw message bytes, read MSB-first.
        #[arg(long)]
        message: PathBuf,
        /// Message length in bits; defaults to 8 per byte.
        #[arg(long)]
        bits: Option<usize>,
        /// Token count; by default just enough for the whole message.
        #[arg(long)]
        n_tokens: Option<usize>,
        /// Padding-tail seed. Defaults to the config's seed, then 0.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recover a message from a token file.
    Extract {
        #[command(flatten)]
        common: Common,
        /// One token id per line.
        #[arg(long)]
        tokens: PathBuf,
    },
}

fn write_output(config: &RunConfig, out: &Option<PathBuf>, bytes: &[u8]) -> anyhow::Result<()> {
    match out.as_ref().or(config.output.as_ref()) {
        Some(path) => fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> anyhow::Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    Ok(text.into_bytes())
}

/// Runs one command; returns whether it succeeded in the command's own sense
/// (only `verify` can return `false`).
pub fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Solve(c) => {
            let config = RunConfig::load(&c.config)?;
            write_output(&config, &c.out, &pretty(&cmd_solve(&config)?)?)?;
        }
        Command::Sweep(c) => {
            let config = RunConfig::load(&c.config)?;
            write_output(&config, &c.out, cmd_sweep(&config)?.as_bytes())?;
        }
        Command::Oracle { common: c, grid_step } => {
            let config = RunConfig::load(&c.config)?;
            write_output(&config, &c.out, &pretty(&cmd_oracle(&config, grid_step)?)?)?;
        }
        Command::Verify(c) => {
            let config = RunConfig::load(&c.config)?;
            let (passed, report) = cmd_verify(&config)?;
            write_output(&config, &c.out, &pretty(&report)?)?;
            return Ok(passed);
        }
        Command::Simulate { common: c, rollouts, seed } => {
            let config = RunConfig::load(&c.config)?;
            let seed = seed.or(config.seed).unwrap_or(0);
            write_output(&config, &c.out, &pretty(&cmd_simulate(&config, rollouts, seed)?)?)?;
        }
        Command::Embed { common: c, message, bits, n_tokens, seed } => {
            let config = RunConfig::load(&c.config)?;
            let bytes = fs::read(&message).map_err(|e| usage(format!("cannot read message {}: {e}", message.display())))?;
            let payload = match bits {
                Some(n) => BitStream::with_len(&bytes, n).map_err(|e| usage(format!("--bits: {e}")))?,
                None => BitStream::from_bytes(&bytes),
            };
            let seed = seed.or(config.seed).unwrap_or(0);
            let record = cmd_embed(&config, &payload, n_tokens, seed)?;
            if record.consumed < record.framed_bits {
                eprintln!(
                    "warning: {} tokens carry {} of {} framed bits; extract will report truncation",
                    record.tokens.len(),
                    record.consumed,
                    record.framed_bits
                );
            }
            write_output(&config, &c.out, format_tokens(&record.tokens).as_bytes())?;
        }
        Command::Extract { common: c, tokens } => {
            let config = RunConfig::load(&c.config)?;
            let text = fs::read_to_string(&tokens)
                .map_err(|e| usage(format!("cannot read tokens {}: {e}", tokens.display())))?;
            let payload = cmd_extract(&config, &parse_tokens(&text)?)?;
            write_output(&config, &c.out, payload.as_bytes())?;
        }
    }
    Ok(true)
}

/// Parses `args` and runs. Exit status 2 marks usage errors, 1 any other
/// failure including a failed certificate.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<UsageError>().is_some() { 2 } else { 1 })
        }
    }
}
