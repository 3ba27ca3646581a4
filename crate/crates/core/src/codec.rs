//! Arithmetic-coding embedding: the message bits are read as the binary
//! expansion of a point in `[0, 1)`, and each token is the cell of the
//! provider's CDF that contains that point. Decoding replays the interval
//! narrowing from the tokens and reads off the bits the final interval pins
//! down.
//!
//! Registers hold 62-bit fractions so that `range * q` fits in `u128` for
//! cumulative probabilities `q` in Q64 fixed point.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{entropy_bits, ChainParams, Policy, State};

pub const PRECISION: u32 = 62;
const FULL: u64 = 1 << PRECISION;
const HALF: u64 = FULL >> 1;
const QUARTER: u64 = FULL >> 2;
/// Allowed deviation of a provider vector's sum from 1.
pub const PROVIDER_SUM_TOL: f64 = 1e-9;

/// Bits stored MSB-first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitStream {
    bytes: Vec<u8>,
    len: usize,
}

impl BitStream {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every bit of `bytes`.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self {
            bytes: bytes.to_vec(),
            len: bytes.len() * 8,
        }
    }

    /// The first `len` bits of `bytes`.
    pub fn with_len(bytes: &[u8], len: usize) -> Result<Self> {
        if len > bytes.len() * 8 {
            return Err(Error::InvalidParams(format!(
                "bit count {len} exceeds {} available bits",
                bytes.len() * 8
            )));
        }
        let mut out = Self {
            bytes: bytes[..len.div_ceil(8)].to_vec(),
            len,
        };
        out.clear_padding();
        Ok(out)
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut out = Self::new();
        for b in bits {
            out.push(b);
        }
        out
    }

    fn clear_padding(&mut self) {
        let used = self.len % 8;
        if used != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= 0xFFu8 << (8 - used);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            let last = self.bytes.len() - 1;
            self.bytes[last] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        (i < self.len).then(|| self.bytes[i / 8] & (0x80 >> (i % 8)) != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.bytes[i / 8] & (0x80 >> (i % 8)) != 0)
    }

    /// Backing bytes; bits past `len` in the last byte are zero.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn prefix(&self, n: usize) -> BitStream {
        let n = n.min(self.len);
        Self::with_len(&self.bytes, n).expect("prefix length is in range")
    }

    pub fn starts_with(&self, other: &BitStream) -> bool {
        other.len <= self.len && self.prefix(other.len) == *other
    }
}

impl fmt::Display for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitStream {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidParams(format!("'{other}' is not a bit"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bits)
    }
}

/// `[lo, hi)` with `lo = 0.b1...bL` and `hi = lo + 2^-L`. Exact in `f64`
/// up to 53 bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DyadicInterval {
    pub lo: f64,
    pub hi: f64,
    pub bits: usize,
}

pub fn bits_to_interval(bits: &BitStream) -> DyadicInterval {
    let mut lo = 0.0;
    let mut scale = 1.0;
    for b in bits.iter() {
        scale *= 0.5;
        if b {
            lo += scale;
        }
    }
    DyadicInterval {
        lo,
        hi: lo + scale,
        bits: bits.len(),
    }
}

/// Next-token distributions over `0..k`, a deterministic function of the
/// tokens emitted so far.
pub trait DistributionProvider {
    fn distribution(&self, history: &[usize]) -> Vec<f64>;
}

impl<F: Fn(&[usize]) -> Vec<f64>> DistributionProvider for F {
    fn distribution(&self, history: &[usize]) -> Vec<f64> {
        self(history)
    }
}

/// The same distribution at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedProvider(pub Vec<f64>);

impl DistributionProvider for FixedProvider {
    fn distribution(&self, _history: &[usize]) -> Vec<f64> {
        self.0.clone()
    }
}

/// Binary provider driven by a policy: the current state is the last token,
/// and state `s` emits token 0 with probability `a_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainProvider {
    pub policy: Policy,
    pub initial: State,
}

impl ChainProvider {
    /// Starts in the more likely initial state (state 0 on ties), so both
    /// ends derive the same start from the shared instance.
    pub fn new(policy: Policy, params: &ChainParams) -> Self {
        let initial = if params.init0() >= params.init1() {
            State::Zero
        } else {
            State::One
        };
        Self { policy, initial }
    }
}

impl DistributionProvider for ChainProvider {
    fn distribution(&self, history: &[usize]) -> Vec<f64> {
        let state = match history.last() {
            None => self.initial,
            Some(0) => State::Zero,
            Some(_) => State::One,
        };
        let a = self.policy.a(state);
        vec![a, 1.0 - a]
    }
}

fn validated(probs: Vec<f64>) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::Provider("empty distribution".into()));
    }
    if let Some(bad) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::Provider(format!("invalid probability {bad}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROVIDER_SUM_TOL {
        return Err(Error::Provider(format!("probabilities sum to {total}")));
    }
    Ok(probs)
}

/// How a renormalization step rescaled the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shift {
    /// Interval in the lower half; the next bit is 0 and `pending` 1s follow.
    Lower { pending: u64 },
    /// Interval in the upper half; the next bit is 1 and `pending` 0s follow.
    Upper { pending: u64 },
    /// Interval straddles the midpoint inside the middle half.
    Middle,
}

/// Coder registers: `[low, high]` inclusive, in units of `2^-62` of the
/// current window, plus the count of straddling rescales awaiting a bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IntervalState {
    low: u64,
    high: u64,
    pending: u64,
    shifts: u64,
}

impl Default for IntervalState {
    fn default() -> Self {
        Self::new()
    }
}

impl IntervalState {
    pub fn new() -> Self {
        Self {
            low: 0,
            high: FULL - 1,
            pending: 0,
            shifts: 0,
        }
    }

    pub fn low(&self) -> u64 {
        self.low
    }

    pub fn high(&self) -> u64 {
        self.high
    }

    pub fn pending(&self) -> u64 {
        self.pending
    }

    /// Number of leading message bits fixed by the interval so far.
    pub fn determined(&self) -> u64 {
        self.shifts - self.pending
    }

    /// Cell boundaries `b_0 = low <= ... <= b_k = high + 1`; cell `j` is
    /// `[b_j, b_{j+1})`. Rounding down keeps cells disjoint and covering.
    pub fn cells(&self, probs: &[f64]) -> Result<Vec<u64>> {
        let range = (self.high - self.low + 1) as u128;
        let total: f64 = probs.iter().sum();
        let scale = 2f64.powi(64);
        // The last positive cell absorbs rounding slack so zero-probability
        // tokens never get width.
        let last_positive = probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1);
        let mut bounds = Vec::with_capacity(probs.len() + 1);
        bounds.push(self.low);
        let mut cum = 0.0;
        for (j, &p) in probs.iter().enumerate() {
            cum += p;
            let prev = *bounds.last().expect("nonempty");
            let bound = if j >= last_positive {
                self.high + 1
            } else if p == 0.0 {
                prev
            } else {
                let q = ((cum / total) * scale).min(scale) as u128;
                (self.low + ((range * q) >> 64) as u64).max(prev)
            };
            if bound == prev && p > 0.0 {
                return Err(Error::Precision(format!(
                    "token {j} with probability {p:e} gets an empty cell in a range of {range}"
                )));
            }
            bounds.push(bound);
        }
        Ok(bounds)
    }

    fn select(&mut self, bounds: &[u64], token: usize) {
        self.low = bounds[token];
        self.high = bounds[token + 1] - 1;
    }

    /// Rescales until the interval straddles the midpoint and is wider than
    /// a quarter, reporting each rescale.
    pub fn renormalize(&mut self, mut on_shift: impl FnMut(Shift)) {
        loop {
            let shift = if self.high < HALF {
                let s = Shift::Lower { pending: self.pending };
                self.pending = 0;
                s
            } else if self.low >= HALF {
                let s = Shift::Upper { pending: self.pending };
                self.low -= HALF;
                self.high -= HALF;
                self.pending = 0;
                s
            } else if self.low >= QUARTER && self.high < HALF + QUARTER {
                self.low -= QUARTER;
                self.high -= QUARTER;
                self.pending += 1;
                Shift::Middle
            } else {
                break;
            };
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.shifts += 1;
            on_shift(shift);
        }
    }
}

/// Message bits followed by a seeded uniform tail.
struct PaddedBits<'a> {
    message: &'a BitStream,
    next: usize,
    tail: ChaCha8Rng,
    word: u64,
    left: u32,
}

impl<'a> PaddedBits<'a> {
    fn new(message: &'a BitStream, seed: u64) -> Self {
        Self {
            message,
            next: 0,
            tail: ChaCha8Rng::seed_from_u64(seed),
            word: 0,
            left: 0,
        }
    }

    fn next_bit(&mut self) -> u64 {
        let bit = match self.message.get(self.next) {
            Some(b) => b,
            None => {
                if self.left == 0 {
                    self.word = self.tail.next_u64();
                    self.left = 64;
                }
                self.left -= 1;
                (self.word >> self.left) & 1 == 1
            }
        };
        self.next += 1;
        bit as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbedOutput {
    pub tokens: Vec<usize>,
    /// Message bits fixed by the token sequence; never above the message length.
    pub consumed: usize,
    /// All bits fixed by the tokens, counting the padding tail.
    pub determined: usize,
    /// Seed of the tail that pads the message point.
    pub tail_seed: u64,
}

/// Emits `n` tokens carrying `bits`. Past the end of the message the point
/// continues with uniform bits from `tail_seed`.
pub fn embed<P: DistributionProvider + ?Sized>(
    bits: &BitStream,
    provider: &P,
    n: usize,
    tail_seed: u64,
) -> Result<EmbedOutput> {
    if n == 0 {
        return Err(Error::InvalidParams("token count must be at least 1".into()));
    }
    let mut source = PaddedBits::new(bits, tail_seed);
    let mut value: u64 = 0;
    for _ in 0..PRECISION {
        value = (value << 1) | source.next_bit();
    }
    let mut state = IntervalState::new();
    let mut tokens = Vec::with_capacity(n);
    for _ in 0..n {
        let probs = validated(provider.distribution(&tokens))?;
        let bounds = state.cells(&probs)?;
        // The last boundary is high + 1 > value, so a cell always matches.
        let token = bounds[1..].partition_point(|&bound| bound <= value);
        state.select(&bounds, token);
        tokens.push(token);
        state.renormalize(|shift| {
            let offset = match shift {
                Shift::Lower { .. } => 0,
                Shift::Upper { .. } => HALF,
                Shift::Middle => QUARTER,
            };
            value = ((value - offset) << 1) | source.next_bit();
        });
    }
    let determined = state.determined() as usize;
    Ok(EmbedOutput {
        tokens,
        consumed: determined.min(bits.len()),
        determined,
        tail_seed,
    })
}

/// Replays the interval narrowing for `tokens` and returns every bit the
/// final interval determines. This is a prefix of the message followed by
/// its padding tail, and it covers at least the `consumed` message bits.
pub fn extract<P: DistributionProvider + ?Sized>(tokens: &[usize], provider: &P) -> Result<BitStream> {
    let mut state = IntervalState::new();
    let mut out = BitStream::new();
    for (t, &token) in tokens.iter().enumerate() {
        let probs = validated(provider.distribution(&tokens[..t]))?;
        if token >= probs.len() {
            return Err(Error::Decode(format!(
                "token {token} at position {t} is outside the alphabet of size {}",
                probs.len()
            )));
        }
        let bounds = state.cells(&probs)?;
        if bounds[token] == bounds[token + 1] {
            return Err(Error::Decode(format!(
                "token {token} at position {t} has probability zero"
            )));
        }
        state.select(&bounds, token);
        state.renormalize(|shift| {
            let (bit, pending) = match shift {
                Shift::Lower { pending } => (false, pending),
                Shift::Upper { pending } => (true, pending),
                Shift::Middle => return,
            };
            out.push(bit);
            for _ in 0..pending {
                out.push(!bit);
            }
        });
    }
    Ok(out)
}

/// Long-run entropy per token of the chain a policy induces.
pub fn stationary_entropy_rate(policy: &Policy) -> f64 {
    let (a0, a1) = (policy.a0(), policy.a1());
    let denom = 1.0 - a0 + a1;
    if denom <= 0.0 {
        // a0 = 1 and a1 = 0: both states are deterministic.
        return 0.0;
    }
    let pi0 = a1 / denom;
    pi0 * entropy_bits(a0) + (1.0 - pi0) * entropy_bits(a1)
}

/// Bits per token embedded over `n` tokens of the policy's chain, using
/// uniform message bits drawn from `seed`.
pub fn measure_rate(policy: &Policy, params: &ChainParams, n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bytes = vec![0u8; (n + 64).div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    let message = BitStream::from_bytes(&bytes);
    let provider = ChainProvider::new(*policy, params);
    let out = embed(&message, &provider, n, seed.wrapping_add(1))?;
    Ok(out.consumed as f64 / n as f64)
}
