//! Closed-form optimal policies for the covered shapes.
//!
//! For `p0, p1 >= 1/2` (attracted) and `p1 >= 1/2 > p0` (oscillatory) the
//! optimum has three budget regimes:
//!
//! * `R1`, `b < b_low`: the state whose transition is farther from `1/2`
//!   moves toward `1/2`; the other keeps its original probability.
//! * `R2`, `b_low <= b < b_high`: both states move. Attracted instances
//!   merge to a common `a`; oscillatory ones solve the coupled system
//!   `Phi+(a0) = Phi-(a1)`, `m(a0, a1) = b/2`.
//! * `R3`, `b >= b_high`: the uniform policy `(1/2, 1/2)`.
//!
//! Everything else (sticky-mixed instances, `p0 > 1/2 > p1`) goes to the
//! grid oracle, polished by the convexified search. The log base used for `Phi` does not change any root, so
//! [`LogBase`] only exists to make that checkable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    canonicalize, cost_of, occupancy_of, reward_of, uncanonicalize, visitation0, ChainParams,
    Occupancy, Policy, Shape, State,
};
use crate::oracle;
use crate::roots::bisect;

/// Clamp applied to arguments of `Phi` inside the solvers.
pub const PHI_EPS: f64 = 1e-12;
/// Residual bound asserted on the coupled regime-2 system.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Slack allowed between the returned cost and the budget.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Grid points per axis and refinement rounds of the sticky-mixed fallback.
pub const FALLBACK_GRID_POINTS: usize = 2001;
pub const FALLBACK_REFINE_ROUNDS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn unit(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    R1,
    R2,
    R3,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::R1 => "R1",
            Regime::R2 => "R2",
            Regime::R3 => "R3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    ClosedForm,
    OracleFallback,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "CLOSED_FORM",
            Method::OracleFallback => "ORACLE_FALLBACK",
        })
    }
}

/// Units of the logarithms inside `Phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    Nats,
    Bits,
}

impl LogBase {
    fn per_nat(self) -> f64 {
        match self {
            LogBase::Nats => 1.0,
            LogBase::Bits => 1.0 / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveOptions {
    pub log_base: LogBase,
}

/// Regime boundaries of a canonical instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub b_low: f64,
    pub b_high: f64,
    pub shape: Shape,
    /// The state that moves alone in regime 1.
    pub first_mover: State,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicySolution {
    pub policy: Policy,
    pub occupancy: Occupancy,
    /// `None` only for sticky-mixed instances below the uniform-policy cost.
    pub regime: Option<Regime>,
    /// `None` for sticky-mixed instances.
    pub thresholds: Option<Thresholds>,
    pub method: Method,
    pub shape: Shape,
    pub swapped: bool,
    pub budget: f64,
    /// Bits.
    pub reward: f64,
    pub cost: f64,
}

/// Which state moves first: `One` when `|1/2 - p1| >= |1/2 - p0|`.
fn first_mover(params: &ChainParams) -> State {
    if (0.5 - params.p1()).abs() >= (0.5 - params.p0()).abs() {
        State::One
    } else {
        State::Zero
    }
}

/// Action that spends exactly `b` on one state while the other keeps its
/// original probability. `eta(Zero, Minus)` and `eta(One, Minus)` move toward
/// `1/2` from above, `eta(Zero, Plus)` from below.
pub fn eta(state: State, sign: Sign, b: f64, params: &ChainParams) -> Result<f64> {
    let g = params.gamma();
    let d = params.discounted_init0();
    let (p0, p1) = (params.p0(), params.p1());
    let s = sign.unit();
    let half = 0.5 * b;
    let (num, den) = match state {
        State::Zero => {
            let inflow = d + g * p1;
            (half * (1.0 + g * p1) + s * p0 * inflow, s * inflow + g * half)
        }
        State::One => {
            let outflow = 1.0 - g * p0 - d;
            (half * (1.0 - g * p0) + s * p1 * outflow, s * outflow - g * half)
        }
    };
    if den.abs() < 1e-15 || !den.is_finite() {
        return Err(Error::Singular(format!(
            "eta({state}, {sign:?}) denominator vanishes at b = {b}"
        )));
    }
    Ok(num / den)
}

fn check_canonical(params: &ChainParams) -> Result<Shape> {
    let form = canonicalize(params);
    if form.swapped {
        return Err(Error::Precondition(format!(
            "instance p0 = {}, p1 = {} is not canonical; relabel it first",
            params.p0(),
            params.p1()
        )));
    }
    Ok(form.shape)
}

/// Regime boundaries of a canonical attracted or oscillatory instance.
pub fn thresholds_of(params: &ChainParams) -> Result<Thresholds> {
    thresholds_in(params, LogBase::Nats)
}

fn thresholds_in(params: &ChainParams, base: LogBase) -> Result<Thresholds> {
    let shape = check_canonical(params)?;
    let g = params.gamma();
    let d = params.discounted_init0();
    let (p0, p1) = (params.p0(), params.p1());
    let mover = first_mover(params);
    let (b_low, b_high) = match shape {
        Shape::Attracted => {
            let b_low = 2.0 * f64::max((1.0 - g * p0 - d) * (p1 - p0), (d + g * p1) * (p0 - p1));
            let b_high = (2.0 * d + g) * (p0 - p1) + 2.0 * p1 - 1.0;
            (b_low, b_high)
        }
        Shape::Oscillatory => {
            let phi = PhiPair::new(params, base);
            // Exactly one of the two unit-step terms is active; ties go to
            // the state-1 branch like the regime-1 split.
            let b_low = match mover {
                State::One => {
                    let psi1 = phi.psi1()?;
                    2.0 * (1.0 - g * p0 - d) / (1.0 - g * p0 + g * psi1) * (p1 - psi1)
                }
                State::Zero => {
                    let psi0 = phi.psi0()?;
                    2.0 * (d + g * p1) / (1.0 - g * psi0 + g * p1) * (psi0 - p0)
                }
            };
            let b_high = (2.0 * d + g) * (1.0 - p0 - p1) + 2.0 * p1 - 1.0;
            (b_low, b_high)
        }
        Shape::StickyMixed => return Err(Error::UnsupportedShape(shape)),
    };
    Ok(Thresholds {
        b_low: b_low.max(0.0),
        b_high: b_high.max(0.0),
        shape,
        first_mover: mover,
    })
}

/// `Phi+-(a) = (+-1 + gamma p0 + gamma p1) log((1-a)/a) - 2 gamma log(1-a)`, natural log.
pub fn phi(sign: Sign, a: f64, params: &ChainParams) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain {
            what: "a",
            value: a,
            domain: "(0, 1)",
        });
    }
    Ok(phi_raw(sign, a, params))
}

fn phi_raw(sign: Sign, a: f64, params: &ChainParams) -> f64 {
    let g = params.gamma();
    let coeff = sign.unit() + g * params.p0() + g * params.p1();
    coeff * ((1.0 - a) / a).ln() - 2.0 * g * (1.0 - a).ln()
}

/// `Phi` evaluation with the solver's endpoint guard and log base.
#[derive(Clone, Copy)]
struct PhiPair<'a> {
    params: &'a ChainParams,
    scale: f64,
}

impl<'a> PhiPair<'a> {
    fn new(params: &'a ChainParams, base: LogBase) -> Self {
        Self {
            params,
            scale: base.per_nat(),
        }
    }

    fn eval(&self, sign: Sign, a: f64) -> Result<f64> {
        if !(-1e-9..=1.0 + 1e-9).contains(&a) {
            return Err(Error::Domain {
                what: "Phi argument",
                value: a,
                domain: "[0, 1]",
            });
        }
        let a = a.clamp(PHI_EPS, 1.0 - PHI_EPS);
        Ok(self.scale * phi_raw(sign, a, self.params))
    }

    fn plus(&self, a: f64) -> Result<f64> {
        self.eval(Sign::Plus, a)
    }

    fn minus(&self, a: f64) -> Result<f64> {
        self.eval(Sign::Minus, a)
    }

    /// Inverse of the increasing branch `Phi-` on `[1/2, 1 - eps]`.
    fn invert_minus(&self, y: f64) -> Result<f64> {
        let (lo, hi) = (0.5, 1.0 - PHI_EPS);
        let (ylo, yhi) = (self.minus(lo)?, self.minus(hi)?);
        if !(y >= ylo && y <= yhi) {
            return Err(Error::Bracket {
                target: y,
                lo: ylo,
                hi: yhi,
            });
        }
        bisect(|a| self.scale * phi_raw(Sign::Minus, a, self.params) - y, lo, hi)
    }

    /// Inverse of the decreasing branch `Phi+` on `[eps, 1/2]`.
    fn invert_plus(&self, y: f64) -> Result<f64> {
        let (lo, hi) = (PHI_EPS, 0.5);
        let (ylo, yhi) = (self.plus(hi)?, self.plus(lo)?);
        if !(y >= ylo && y <= yhi) {
            return Err(Error::Bracket {
                target: y,
                lo: ylo,
                hi: yhi,
            });
        }
        bisect(|a| self.scale * phi_raw(Sign::Plus, a, self.params) - y, lo, hi)
    }

    /// Root of `Phi-(a1) = Phi+(p0)` on `[1/2, p1]`.
    fn psi1(&self) -> Result<f64> {
        let p1 = self.params.p1();
        let a = self.invert_minus(self.plus(self.params.p0())?)?;
        if a > p1 + 1e-9 {
            return Err(Error::Precondition(format!(
                "psi1 = {a} lies above p1 = {p1}; state 1 is not the first mover"
            )));
        }
        Ok(a.min(p1).max(0.5))
    }

    /// Root of `Phi+(a0) = Phi-(p1)` on `[p0, 1/2]`.
    fn psi0(&self) -> Result<f64> {
        let p0 = self.params.p0();
        let a = self.invert_plus(self.minus(self.params.p1())?)?;
        if a < p0 - 1e-9 {
            return Err(Error::Precondition(format!(
                "psi0 = {a} lies below p0 = {p0}; state 0 is not the first mover"
            )));
        }
        Ok(a.max(p0).min(0.5))
    }
}

/// Inverse of `Phi-` on `[1/2, 1)`.
pub fn invert_phi_minus(y: f64, params: &ChainParams) -> Result<f64> {
    PhiPair::new(params, LogBase::Nats).invert_minus(y)
}

/// Inverse of `Phi+` on `(0, 1/2]`.
pub fn invert_phi_plus(y: f64, params: &ChainParams) -> Result<f64> {
    PhiPair::new(params, LogBase::Nats).invert_plus(y)
}

fn require_oscillatory(params: &ChainParams) -> Result<()> {
    match check_canonical(params)? {
        Shape::Oscillatory => Ok(()),
        other => Err(Error::Precondition(format!(
            "expected an OSCILLATORY instance, got {other}"
        ))),
    }
}

/// `psi0`: the state-0 action where regime 1 ends when state 0 moves first.
pub fn psi0(params: &ChainParams) -> Result<f64> {
    require_oscillatory(params)?;
    PhiPair::new(params, LogBase::Nats).psi0()
}

/// `psi1`: the state-1 action where regime 1 ends when state 1 moves first.
pub fn psi1(params: &ChainParams) -> Result<f64> {
    require_oscillatory(params)?;
    PhiPair::new(params, LogBase::Nats).psi1()
}

/// Half the TV cost of a policy that raises `a0` above `p0` and lowers `a1`
/// below `p1`: `d0 (a0 - p0) + d1 (p1 - a1)`.
pub fn m_gap(a0: f64, a1: f64, params: &ChainParams) -> f64 {
    let d0 = visitation0(a0, a1, params);
    d0 * (a0 - params.p0()) + (1.0 - d0) * (params.p1() - a1)
}

/// The unique point of the regime-2 system of an oscillatory instance.
pub fn solve_regime2_opposite(b: f64, params: &ChainParams) -> Result<Policy> {
    require_oscillatory(params)?;
    let th = thresholds_in(params, LogBase::Nats)?;
    regime2_opposite(b, params, &th, LogBase::Nats)
}

fn regime2_opposite(b: f64, params: &ChainParams, th: &Thresholds, base: LogBase) -> Result<Policy> {
    if b < th.b_low - 1e-12 || b > th.b_high + 1e-12 {
        return Err(Error::Precondition(format!(
            "budget {b} outside regime 2 [{}, {}]",
            th.b_low, th.b_high
        )));
    }
    let phi = PhiPair::new(params, base);
    let lo = match th.first_mover {
        State::One => params.p0(),
        State::Zero => phi.psi0()?,
    };
    let hi = 0.5;
    let partner = |a0: f64| -> Result<f64> {
        let a1 = phi.invert_minus(phi.plus(a0)?)?;
        Ok(a1.min(params.p1()))
    };
    let gap = |a0: f64| match partner(a0) {
        Ok(a1) => m_gap(a0, a1, params) - 0.5 * b,
        Err(_) => f64::NAN,
    };

    let (glo, ghi) = (gap(lo), gap(hi));
    let a0 = if glo <= 0.0 && ghi >= 0.0 {
        bisect(gap, lo, hi)?
    } else {
        // Round-off at the regime ends can spoil the endpoint signs.
        scan_then_bisect(&gap, lo, hi)?
    };
    let a1 = partner(a0)?;

    let nat = PhiPair::new(params, LogBase::Nats);
    let phi_res = (nat.plus(a0)? - nat.minus(a1)?).abs();
    let m_res = (m_gap(a0, a1, params) - 0.5 * b).abs();
    if !(phi_res <= RESIDUAL_TOL && m_res <= RESIDUAL_TOL) {
        return Err(Error::Convergence(format!(
            "regime-2 system at b = {b}: a0 = {a0}, a1 = {a1}, |Phi+ - Phi-| = {phi_res:e}, |m - b/2| = {m_res:e}"
        )));
    }
    Policy::from_solver(a0, a1)
}

fn scan_then_bisect<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<f64> {
    const POINTS: usize = 10_000;
    let at = |i: usize| lo + (hi - lo) * i as f64 / (POINTS - 1) as f64;
    let mut best = (f64::INFINITY, lo);
    let mut prev = (at(0), f(at(0)));
    for i in 1..POINTS {
        let x = at(i);
        let fx = f(x);
        if prev.1.abs() < best.0 {
            best = (prev.1.abs(), prev.0);
        }
        if prev.1.is_finite() && fx.is_finite() && prev.1.signum() != fx.signum() {
            return bisect(f, prev.0, x);
        }
        prev = (x, fx);
    }
    if prev.1.abs() < best.0 {
        best = (prev.1.abs(), prev.0);
    }
    if best.0 <= RESIDUAL_TOL {
        Ok(best.1)
    } else {
        Err(Error::Convergence(format!(
            "no sign change on [{lo}, {hi}]; smallest |residual| {:e} at {}",
            best.0, best.1
        )))
    }
}

/// Closed-form policy on a canonical, covered instance.
fn closed_form_policy(
    params: &ChainParams,
    b: f64,
    th: &Thresholds,
    base: LogBase,
) -> Result<(Policy, Regime)> {
    let (p0, p1) = (params.p0(), params.p1());
    if b >= th.b_high {
        return Ok((Policy::uniform(), Regime::R3));
    }
    if b == 0.0 {
        // Every formula reduces to the identity here; skip their round-off.
        let regime = if th.b_low > 0.0 { Regime::R1 } else { Regime::R2 };
        return Ok((Policy::identity(params), regime));
    }
    if b >= th.b_low {
        let policy = match th.shape {
            Shape::Attracted => {
                // Tight budget with a0 = a1 = a: the visitation is then
                // d0 = d + gamma a, and d0 (p0 - a) + d1 (p1 - a) = b/2 is
                // linear in a.
                let d = params.discounted_init0();
                let a = params.m_factor() * (d * p0 + (1.0 - d) * p1 - 0.5 * b);
                let a = a.clamp(0.5, p0.min(p1));
                Policy::from_solver(a, a)?
            }
            Shape::Oscillatory => regime2_opposite(b, params, th, base)?,
            Shape::StickyMixed => return Err(Error::UnsupportedShape(th.shape)),
        };
        return Ok((policy, Regime::R2));
    }
    let policy = match (th.shape, th.first_mover) {
        (_, State::One) => Policy::from_solver(p0, eta(State::One, Sign::Minus, b, params)?)?,
        (Shape::Attracted, State::Zero) => {
            Policy::from_solver(eta(State::Zero, Sign::Minus, b, params)?, p1)?
        }
        (_, State::Zero) => Policy::from_solver(eta(State::Zero, Sign::Plus, b, params)?, p1)?,
    };
    Ok((policy, Regime::R1))
}

/// Optimal policy for budget `b`.
pub fn optimal_policy(params: &ChainParams, b: f64) -> Result<PolicySolution> {
    optimal_policy_with(params, b, SolveOptions::default())
}

pub fn optimal_policy_with(
    params: &ChainParams,
    b: f64,
    opts: SolveOptions,
) -> Result<PolicySolution> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::Domain {
            what: "b",
            value: b,
            domain: "[0, inf)",
        });
    }
    let form = canonicalize(params);
    let (canon_policy, regime, thresholds, method) = match form.shape {
        Shape::Attracted | Shape::Oscillatory => {
            let th = thresholds_in(&form.params, opts.log_base)?;
            let (pol, regime) = closed_form_policy(&form.params, b, &th, opts.log_base)?;
            (pol, Some(regime), Some(th), Method::ClosedForm)
        }
        Shape::StickyMixed => {
            let uniform = Policy::uniform();
            if cost_of(&uniform, &form.params) <= b {
                (uniform, Some(Regime::R3), None, Method::OracleFallback)
            } else {
                let grid = oracle::grid_search_points(
                    &form.params,
                    b,
                    FALLBACK_GRID_POINTS,
                    FALLBACK_REFINE_ROUNDS,
                );
                // The grid stops at a 1e-5 spacing; the convexified search
                // resolves the optimum to round-off when it agrees.
                let polished = oracle::convex_search(&form.params, b);
                let found = if polished.cost <= b + 1e-12 && polished.reward > grid.reward {
                    polished
                } else {
                    grid
                };
                (found.policy, None, None, Method::OracleFallback)
            }
        }
    };
    let policy = uncanonicalize(&canon_policy, &form);
    let cost = cost_of(&policy, params);
    if cost > b + FEASIBILITY_TOL {
        return Err(Error::Infeasible { cost, budget: b });
    }
    Ok(PolicySolution {
        policy,
        occupancy: occupancy_of(&policy, params),
        regime,
        thresholds,
        method,
        shape: form.shape,
        swapped: form.swapped,
        budget: b,
        reward: reward_of(&policy, params),
        cost,
    })
}

/// Solutions on `steps` evenly spaced budgets in `[b_min, b_max]`, plus the
/// regime thresholds that fall inside, in ascending order of budget.
pub fn sweep(params: &ChainParams, b_min: f64, b_max: f64, steps: usize) -> Result<Vec<PolicySolution>> {
    if !(b_min.is_finite() && b_max.is_finite() && 0.0 <= b_min && b_min <= b_max) {
        return Err(Error::InvalidParams(format!(
            "sweep range [{b_min}, {b_max}] must satisfy 0 <= b_min <= b_max"
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidParams(format!("sweep needs at least 2 steps, got {steps}")));
    }
    let last = (steps - 1) as f64;
    let mut budgets: Vec<f64> = (0..steps)
        .map(|i| if i + 1 == steps { b_max } else { b_min + (b_max - b_min) * (i as f64 / last) })
        .collect();
    let form = canonicalize(params);
    if let Ok(th) = thresholds_of(&form.params) {
        budgets.extend([th.b_low, th.b_high].into_iter().filter(|b| (b_min..=b_max).contains(b)));
    }
    budgets.sort_by(f64::total_cmp);
    budgets.dedup();
    budgets
        .into_par_iter()
        .map(|b| optimal_policy(params, b))
        .collect()
}
