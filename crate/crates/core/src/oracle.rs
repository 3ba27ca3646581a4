//! Independent checks of the closed form: two brute-force maximizers, mixed
//! policies with their collapse to a deterministic pair, and a KKT
//! certificate checker.

use rayon::prelude::*;
use serde::Serialize;

use crate::closed_form::{thresholds_of, Regime};
use crate::error::{check_probability, Error, Result};
use crate::model::{
    canonicalize, cost_of, entropy_bits, entropy_nats, occupancy_of, reward_of, visitation0,
    ChainParams, Occupancy, Policy, Shape, State, SUM_TOL,
};

/// Refinement rounds applied by [`grid_search`].
pub const REFINE_ROUNDS: usize = 2;
/// Each refinement covers `+-HALF_WINDOW` coarse steps at a tenth of the step.
const HALF_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleResult {
    pub policy: Policy,
    /// Bits.
    pub reward: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    reward: f64,
    cost: f64,
    a0: f64,
    a1: f64,
}

impl Candidate {
    /// Larger reward wins; ties go to the lexicographically smaller pair.
    fn beats(&self, other: &Candidate) -> bool {
        if self.reward != other.reward {
            return self.reward > other.reward;
        }
        (self.a0, self.a1) < (other.a0, other.a1)
    }

    fn best(self, other: Candidate) -> Candidate {
        if other.beats(&self) {
            other
        } else {
            self
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * (i as f64 / last) })
        .collect()
}

fn evaluate_grid(params: &ChainParams, b: f64, axis0: &[f64], axis1: &[f64], seed: Candidate) -> Candidate {
    let h1: Vec<f64> = axis1.iter().map(|&a| entropy_bits(a)).collect();
    let t1: Vec<f64> = axis1.iter().map(|&a| 2.0 * (a - params.p1()).abs()).collect();
    axis0
        .par_iter()
        .map(|&a0| {
            let h0 = entropy_bits(a0);
            let t0 = 2.0 * (a0 - params.p0()).abs();
            let mut row: Option<Candidate> = None;
            for (j, &a1) in axis1.iter().enumerate() {
                let d0 = visitation0(a0, a1, params);
                let d1 = 1.0 - d0;
                let cost = d0 * t0 + d1 * t1[j];
                if cost > b {
                    continue;
                }
                let reward = d0 * h0 + d1 * h1[j];
                if row.is_none_or(|r| reward > r.reward) {
                    row = Some(Candidate { reward, cost, a0, a1 });
                }
            }
            row
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(seed, Candidate::best)
}

fn window(center: f64, step: f64) -> Vec<f64> {
    let fine = step / 10.0;
    (0..=2 * HALF_WINDOW)
        .map(|k| center + (k as f64 - HALF_WINDOW as f64) * fine)
        .filter(|a| (0.0..=1.0).contains(a))
        .collect()
}

/// Exhaustive search of `[0, 1]^2` on a grid of `points` values per axis,
/// followed by `rounds` rounds of 10x refinement around the incumbent.
/// The identity policy seeds the incumbent so `b = 0` is always feasible.
pub fn grid_search_points(params: &ChainParams, b: f64, points: usize, rounds: usize) -> OracleResult {
    let points = points.max(2);
    let identity = Policy::identity(params);
    let seed = Candidate {
        reward: reward_of(&identity, params),
        cost: 0.0,
        a0: identity.a0(),
        a1: identity.a1(),
    };
    let axis = linspace(0.0, 1.0, points);
    let mut best = evaluate_grid(params, b, &axis, &axis, seed);
    let mut step = 1.0 / (points - 1) as f64;
    for _ in 0..rounds {
        let a0s = window(best.a0, step);
        let a1s = window(best.a1, step);
        best = evaluate_grid(params, b, &a0s, &a1s, best);
        step /= 10.0;
    }
    let policy = Policy::new(best.a0, best.a1).expect("grid points lie in [0, 1]");
    OracleResult {
        policy,
        reward: best.reward,
        cost: best.cost,
    }
}

/// Grid maximizer of the reward subject to `cost <= b` with spacing `step`.
pub fn grid_search(params: &ChainParams, b: f64, step: f64) -> Result<OracleResult> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Domain {
            what: "step",
            value: step,
            domain: "(0, 1]",
        });
    }
    let points = (1.0 / step).round() as usize + 1;
    Ok(grid_search_points(params, b, points, REFINE_ROUNDS))
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// The convexified problem in the variables `x_s = a_s d_s`, where
/// `d0 = d0_gamma + gamma (x0 + x1)` makes every constraint linear or
/// convex and the objective concave.
struct Convexified<'a> {
    params: &'a ChainParams,
    b: f64,
}

impl Convexified<'_> {
    fn visitation(&self, x0: f64, x1: f64) -> (f64, f64) {
        let d0 = self.params.discounted_init0() + self.params.gamma() * (x0 + x1);
        (d0, 1.0 - d0)
    }

    fn objective(&self, x0: f64, x1: f64) -> f64 {
        let (d0, d1) = self.visitation(x0, x1);
        let term = |x: f64, d: f64| if d > 0.0 { d * entropy_bits((x / d).clamp(0.0, 1.0)) } else { 0.0 };
        term(x0, d0) + term(x1, d1)
    }

    fn spend(&self, x0: f64, x1: f64) -> f64 {
        let (d0, d1) = self.visitation(x0, x1);
        2.0 * (x0 - self.params.p0() * d0).abs() + 2.0 * (x1 - self.params.p1() * d1).abs()
    }

    /// Largest reachable `x0`, attained by the policy `(1, 1)`.
    fn x0_max(&self) -> f64 {
        self.params.discounted_init0() + self.params.gamma()
    }

    /// Range of `x1` allowed by `0 <= x_s <= d_s` at a given `x0`.
    fn x1_box(&self, x0: f64) -> Option<(f64, f64)> {
        let g = self.params.gamma();
        let d = self.params.discounted_init0();
        let lo = if g > 0.0 {
            (((1.0 - g) * x0 - d) / g).max(0.0)
        } else if x0 <= d {
            0.0
        } else {
            return None;
        };
        let hi = (1.0 - d - g * x0) / (1.0 + g);
        (lo <= hi).then_some((lo, hi))
    }

    /// Feasible `x1` interval at `x0` and the spend-minimizing point inside it.
    fn x1_feasible(&self, x0: f64) -> Option<(f64, f64)> {
        let (lo, hi) = self.x1_box(x0)?;
        let g = self.params.gamma();
        let d = self.params.discounted_init0();
        let (p0, p1) = (self.params.p0(), self.params.p1());
        // The spend is piecewise linear and convex in x1; its minimum sits at
        // a kink or an end of the box.
        let mut points = vec![lo, hi, p1 * (1.0 - d - g * x0) / (1.0 + p1 * g)];
        if p0 * g > 0.0 {
            points.push((x0 * (1.0 - p0 * g) - p0 * d) / (p0 * g));
        }
        let (argmin, min) = points
            .into_iter()
            .map(|x| x.clamp(lo, hi))
            .map(|x| (x, self.spend(x0, x)))
            .fold((lo, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
        if min > self.b {
            return None;
        }
        let ok = |x: f64| self.spend(x0, x) <= self.b;
        let left = if ok(lo) { lo } else { last_inside(ok, argmin, lo) };
        let right = if ok(hi) { hi } else { last_inside(ok, argmin, hi) };
        Some((left, right))
    }

    fn inner(&self, x0: f64) -> Option<(f64, f64)> {
        let (lo, hi) = self.x1_feasible(x0)?;
        let (x1, value) = golden_max(|x1| self.objective(x0, x1), lo, hi);
        Some((x1, value))
    }

    fn feasible(&self, x0: f64) -> bool {
        self.x1_feasible(x0).is_some()
    }

    fn edge(&self, inside: f64, outside: f64) -> f64 {
        last_inside(|x0| self.feasible(x0), inside, outside)
    }
}

/// Bisects between a point satisfying `ok` and one that does not, returning
/// the last point known to satisfy it.
fn last_inside<F: Fn(f64) -> bool>(ok: F, mut inside: f64, mut outside: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if ok(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Nested golden-section search on the convexified problem. Accurate to
/// roughly `1e-8` in each action, far finer than any practical grid.
pub fn convex_search(params: &ChainParams, b: f64) -> OracleResult {
    let problem = Convexified { params, b };
    let identity = Policy::identity(params);
    let start = occupancy_of(&identity, params).x0;
    let x_max = problem.x0_max();
    let lo = if problem.feasible(0.0) { 0.0 } else { problem.edge(start, 0.0) };
    let hi = if problem.feasible(x_max) { x_max } else { problem.edge(start, x_max) };
    let (x0, _) = golden_max(
        |x0| problem.inner(x0).map_or(f64::NEG_INFINITY, |(_, v)| v),
        lo,
        hi,
    );
    let Some((x1, _)) = problem.inner(x0) else {
        return OracleResult {
            policy: identity,
            reward: reward_of(&identity, params),
            cost: 0.0,
        };
    };
    let (d0, d1) = problem.visitation(x0, x1);
    let a0 = if d0 > 0.0 { x0 / d0 } else { params.p0() };
    let a1 = if d1 > 0.0 { x1 / d1 } else { params.p1() };
    let policy = Policy::from_solver(a0, a1).expect("convexified search stays in the box");
    let found = OracleResult {
        policy,
        reward: reward_of(&policy, params),
        cost: cost_of(&policy, params),
    };
    let fallback = OracleResult {
        policy: identity,
        reward: reward_of(&identity, params),
        cost: 0.0,
    };
    if found.cost <= b + 1e-12 && found.reward >= fallback.reward {
        found
    } else {
        fallback
    }
}

/// One support point of a mixed policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub action: f64,
    pub weight: f64,
}

/// A stochastic policy with finite support at each state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedPolicy {
    atoms: [Vec<Atom>; 2],
}

impl MixedPolicy {
    /// Builds a mixture from `(action, weight)` pairs per state.
    pub fn new(state0: Vec<(f64, f64)>, state1: Vec<(f64, f64)>) -> Result<Self> {
        let build = |pairs: Vec<(f64, f64)>, s: State| -> Result<Vec<Atom>> {
            if pairs.is_empty() {
                return Err(Error::InvalidParams(format!("state {s} has no atoms")));
            }
            let mut total = 0.0;
            let mut atoms = Vec::with_capacity(pairs.len());
            for (action, weight) in pairs {
                check_probability("action", action)?;
                if !(weight.is_finite() && weight >= 0.0) {
                    return Err(Error::Domain {
                        what: "weight",
                        value: weight,
                        domain: "[0, inf)",
                    });
                }
                total += weight;
                atoms.push(Atom { action, weight });
            }
            if (total - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidParams(format!(
                    "state {s} weights sum to {total}, not 1"
                )));
            }
            Ok(atoms)
        };
        Ok(Self {
            atoms: [build(state0, State::Zero)?, build(state1, State::One)?],
        })
    }

    pub fn from_policy(policy: &Policy) -> Self {
        Self {
            atoms: State::ALL.map(|s| {
                vec![Atom {
                    action: policy.a(s),
                    weight: 1.0,
                }]
            }),
        }
    }

    pub fn atoms(&self, s: State) -> &[Atom] {
        &self.atoms[s.index()]
    }

    fn mean(&self, s: State) -> f64 {
        self.atoms(s).iter().map(|at| at.weight * at.action).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixedEvaluation {
    /// Bits.
    pub reward: f64,
    pub cost: f64,
    pub occupancy: Occupancy,
}

/// Reward and cost of a mixed policy. The visitation depends on the
/// actions only through their per-state means.
pub fn evaluate_mixed(mp: &MixedPolicy, params: &ChainParams) -> MixedEvaluation {
    let mean = collapse(mp);
    let occ = occupancy_of(&mean, params);
    let mut reward = 0.0;
    let mut cost = 0.0;
    for s in State::ALL {
        let p = params.p(s);
        let (h, tv) = mp.atoms(s).iter().fold((0.0, 0.0), |(h, tv), at| {
            (h + at.weight * entropy_bits(at.action), tv + at.weight * 2.0 * (at.action - p).abs())
        });
        reward += occ.d(s) * h;
        cost += occ.d(s) * tv;
    }
    MixedEvaluation {
        reward,
        cost,
        occupancy: occ,
    }
}

/// The deterministic policy playing each state's mean action.
pub fn collapse(mp: &MixedPolicy) -> Policy {
    Policy::from_solver(mp.mean(State::Zero), mp.mean(State::One))
        .expect("weighted means of probabilities are probabilities")
}

/// `L(a) = ln((1 - a) / a)`.
fn log_odds(a: f64) -> f64 {
    ((1.0 - a) / a).ln()
}

/// The helper expressions `(z0, z1)` in natural log. Multiplying by `M`
/// gives `alpha_s - beta_s` at any stationary point.
pub fn z_funcs(a0: f64, a1: f64, params: &ChainParams) -> Result<(f64, f64)> {
    for (what, a) in [("a0", a0), ("a1", a1)] {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Domain {
                what,
                value: a,
                domain: "(0, 1)",
            });
        }
    }
    Ok(z_raw(a0, a1, params))
}

fn z_raw(a0: f64, a1: f64, params: &ChainParams) -> (f64, f64) {
    let g = params.gamma();
    let (l0, l1) = (log_odds(a0), log_odds(a1));
    let shared = g * ((1.0 - a0) / (1.0 - a1)).ln();
    let z0 = (-1.0 - g * params.p1()) * l0 + g * params.p1() * l1 + shared;
    let z1 = -g * params.p0() * l0 + (-1.0 + g * params.p0()) * l1 + shared;
    (z0, z1)
}

pub const KKT_RESIDUAL_TOL: f64 = 1e-6;
pub const KKT_DUAL_TOL: f64 = 1e-9;
pub const KKT_CS_TOL: f64 = 1e-8;
pub const KKT_PRIMAL_TOL: f64 = 1e-9;
/// `|x_s - d_s p_s|` above this counts as a moved state.
const MOVE_TOL: f64 = 1e-13;

/// Multipliers and checks for one candidate optimum. Index `s` of each
/// pair refers to state `s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    pub regime: Option<Regime>,
    pub lambda: f64,
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub omega: [f64; 2],
    pub nu: [f64; 2],
    pub mu: [f64; 2],
    pub c: [f64; 2],
    pub z: [f64; 2],
    pub x: [f64; 2],
    pub d: [f64; 2],
    /// Partial derivatives of the Lagrangian in `x0, x1, d0, d1, c0, c1`.
    pub stationarity: [f64; 6],
    /// Amount by which each primal constraint is violated (0 when satisfied).
    pub primal_violation: Vec<f64>,
    pub primal_feasible: bool,
    pub dual_feasible: bool,
    pub complementary_slackness: Vec<f64>,
    pub max_violation: f64,
    pub failures: Vec<String>,
    pub passed: bool,
}

impl KktReport {
    fn rejected(reason: String) -> Self {
        Self {
            regime: None,
            lambda: f64::NAN,
            alpha: [f64::NAN; 2],
            beta: [f64::NAN; 2],
            omega: [f64::NAN; 2],
            nu: [0.0; 2],
            mu: [0.0; 2],
            c: [f64::NAN; 2],
            z: [f64::NAN; 2],
            x: [f64::NAN; 2],
            d: [f64::NAN; 2],
            stationarity: [f64::NAN; 6],
            primal_violation: Vec::new(),
            primal_feasible: false,
            dual_feasible: false,
            complementary_slackness: Vec::new(),
            max_violation: f64::INFINITY,
            failures: vec![reason],
            passed: false,
        }
    }
}

/// Reconstructs primal and dual variables for `policy` on a canonical
/// attracted or oscillatory instance and checks every KKT condition of the
/// convexified problem.
///
/// Multipliers follow one rule in all regimes: `alpha_s - beta_s = M z_s`
/// is forced by stationarity and `alpha_s + beta_s = lambda`. A state that
/// moved below (above) its `p_s` keeps only `alpha_s` (`beta_s`); a state
/// left at `p_s` splits `lambda` between the two. `lambda` vanishes when
/// the budget is slack and is otherwise read off the moved states.
pub fn kkt_verify(params: &ChainParams, b: f64, policy: &Policy) -> KktReport {
    let form = canonicalize(params);
    if form.swapped {
        return KktReport::rejected("instance is not canonical".into());
    }
    if form.shape == Shape::StickyMixed {
        return KktReport::rejected("STICKY_MIXED instances have no certificate tables".into());
    }
    let (a0, a1) = (policy.a0(), policy.a1());
    if !(a0 > 0.0 && a0 < 1.0 && a1 > 0.0 && a1 < 1.0) {
        return KktReport::rejected(format!(
            "actions ({a0}, {a1}) touch the boundary where the bound multipliers are active"
        ));
    }
    let regime = thresholds_of(params).ok().map(|th| {
        if b >= th.b_high {
            Regime::R3
        } else if b >= th.b_low {
            Regime::R2
        } else {
            Regime::R1
        }
    });

    let g = params.gamma();
    let p = [params.p0(), params.p1()];
    let a = [a0, a1];
    let occ = occupancy_of(policy, params);
    let d = [occ.d0, occ.d1];
    let x = [occ.x0, occ.x1];
    let gap = [x[0] - d[0] * p[0], x[1] - d[1] * p[1]];
    let c = [gap[0].abs(), gap[1].abs()];
    let (z0, z1) = z_raw(a0, a1, params);
    let m = params.m_factor();
    let delta = [m * z0, m * z1];
    let l = [log_odds(a0), log_odds(a1)];

    let moved: Vec<usize> = (0..2).filter(|&s| c[s] > MOVE_TOL).collect();
    // +1 when the state moved down (alpha side), -1 when it moved up.
    let side = |s: usize| if gap[s] < 0.0 { 1.0 } else { -1.0 };
    let slack = 0.5 * b - (c[0] + c[1]);
    let lambda = if slack > 1e-10 {
        0.0
    } else if !moved.is_empty() {
        moved.iter().map(|&s| side(s) * delta[s]).sum::<f64>() / moved.len() as f64
    } else {
        delta[0].abs().max(delta[1].abs())
    };

    let mut alpha = [0.0; 2];
    let mut beta = [0.0; 2];
    for s in 0..2 {
        if moved.contains(&s) {
            if side(s) > 0.0 {
                alpha[s] = lambda;
            } else {
                beta[s] = lambda;
            }
        } else {
            alpha[s] = 0.5 * (lambda + delta[s]);
            beta[s] = 0.5 * (lambda - delta[s]);
        }
    }
    let nu = [0.0; 2];
    let mu = [0.0; 2];
    let omega1 = -(1.0 - a1).ln() - alpha[1] * p[1] + beta[1] * p[1];
    let omega0 = if g > 0.0 {
        (-l[0] - alpha[0] + beta[0]) / g
    } else {
        // The x-equations lose omega0; the d0-equation pins it instead.
        -(1.0 - a0).ln() - (alpha[0] - beta[0]) * p[0] - omega1
    };
    let omega = [omega0, omega1];

    let d_partial = |s: usize| -entropy_nats(a[s]) + a[s] * l[s] + (alpha[s] - beta[s]) * p[s];
    let stationarity = [
        -l[0] - alpha[0] + beta[0] - g * omega0 - nu[0] + mu[0],
        -l[1] - alpha[1] + beta[1] - g * omega0 - nu[1] + mu[1],
        d_partial(0) + omega0 + omega1 - mu[0],
        d_partial(1) + omega1 - mu[1],
        lambda - alpha[0] - beta[0],
        lambda - alpha[1] - beta[1],
    ];

    let flow = d[0] - params.discounted_init0() - g * (x[0] + x[1]);
    let norm = d[0] + d[1] - 1.0;
    let budget_excess = c[0] + c[1] - 0.5 * b;
    let lower = [-c[0] - gap[0], -c[1] - gap[1]];
    let upper = [gap[0] - c[0], gap[1] - c[1]];
    let primal_violation = vec![
        budget_excess.max(0.0),
        lower[0].max(0.0),
        lower[1].max(0.0),
        upper[0].max(0.0),
        upper[1].max(0.0),
        flow.abs(),
        norm.abs(),
        (-x[0]).max(0.0),
        (-x[1]).max(0.0),
        (x[0] - d[0]).max(0.0),
        (x[1] - d[1]).max(0.0),
    ];
    let complementary_slackness = vec![
        lambda * budget_excess,
        alpha[0] * lower[0],
        alpha[1] * lower[1],
        beta[0] * upper[0],
        beta[1] * upper[1],
        omega0 * flow,
        omega1 * norm,
        nu[0] * x[0],
        nu[1] * x[1],
        mu[0] * (x[0] - d[0]),
        mu[1] * (x[1] - d[1]),
    ];
    let duals = [lambda, alpha[0], alpha[1], beta[0], beta[1], nu[0], nu[1], mu[0], mu[1]];

    let mut failures = Vec::new();
    let worst_stationarity = stationarity.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if worst_stationarity.is_nan() || worst_stationarity >= KKT_RESIDUAL_TOL {
        failures.push(format!("stationarity residual {worst_stationarity:e}"));
    }
    let worst_primal = primal_violation.iter().fold(0.0f64, |m, v| m.max(*v));
    let primal_feasible = worst_primal <= KKT_PRIMAL_TOL;
    if !primal_feasible {
        failures.push(format!("primal violation {worst_primal:e}"));
    }
    let most_negative = duals.iter().fold(0.0f64, |m, v| m.max(-v));
    let dual_feasible = duals.iter().all(|v| *v >= -KKT_DUAL_TOL);
    if !dual_feasible {
        failures.push(format!("negative multiplier {:e}", -most_negative));
    }
    let worst_cs = complementary_slackness.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if worst_cs.is_nan() || worst_cs >= KKT_CS_TOL {
        failures.push(format!("complementary slackness {worst_cs:e}"));
    }
    let max_violation = [worst_stationarity, worst_primal, most_negative, worst_cs]
        .into_iter()
        .fold(0.0f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) });

    KktReport {
        regime,
        lambda,
        alpha,
        beta,
        omega,
        nu,
        mu,
        c,
        z: [z0, z1],
        x,
        d,
        stationarity,
        primal_violation,
        primal_feasible,
        dual_feasible,
        complementary_slackness,
        max_violation,
        passed: failures.is_empty(),
        failures,
    }
}
