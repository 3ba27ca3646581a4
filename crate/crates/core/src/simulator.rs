//! Monte-Carlo estimates of normalized discounted quantities of the chain.
//!
//! Rollout `i` draws from ChaCha8 stream `i` of the given seed, so results
//! do not depend on scheduling; per-rollout values are summed in index order
//! with compensation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{entropy_bits, occupancy_of, reward_of, cost_of, ChainParams, Policy, State};

/// Bound on the discounted mass dropped by truncating a rollout.
pub const TRUNCATION_TOL: f64 = 1e-6;
pub const MIN_ROLLOUTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Quantity {
    /// Entropy of the next-token distribution, in bits.
    Reward,
    /// TV distance `2|a_s - p_s|`.
    Cost,
    /// Indicator of being in the given state.
    Visitation(State),
}

impl Quantity {
    fn max_value(self) -> f64 {
        match self {
            Quantity::Cost => 2.0,
            Quantity::Reward | Quantity::Visitation(_) => 1.0,
        }
    }

    fn per_state(self, params: &ChainParams, policy: &Policy) -> [f64; 2] {
        State::ALL.map(|s| match self {
            Quantity::Reward => entropy_bits(policy.a(s)),
            Quantity::Cost => 2.0 * (policy.a(s) - params.p(s)).abs(),
            Quantity::Visitation(target) => f64::from(u8::from(s == target)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateReport {
    /// Estimate of `(1 - gamma) E[sum_t gamma^t f(S_t)]`.
    pub mean: f64,
    pub stderr: f64,
    pub n_rollouts: usize,
    pub horizon: usize,
    pub seed: u64,
}

/// Smallest `h` with `gamma^h * f_max < TRUNCATION_TOL`; 1 when `gamma = 0`.
pub fn horizon_for(gamma: f64, f_max: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    let h = ((TRUNCATION_TOL / f_max).ln() / gamma.ln()).floor() as usize + 1;
    let mut h = h.max(1);
    // Guard the floor against round-off in the logarithms.
    while gamma.powi(h as i32) * f_max >= TRUNCATION_TOL {
        h += 1;
    }
    h
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn walk(params: &ChainParams, policy: &Policy, horizon: usize, rng: &mut ChaCha8Rng, mut visit: impl FnMut(usize, State)) {
    let mut state = if rng.random::<f64>() < params.init0() {
        State::Zero
    } else {
        State::One
    };
    for t in 0..horizon {
        visit(t, state);
        state = if rng.random::<f64>() < policy.a(state) {
            State::Zero
        } else {
            State::One
        };
    }
}

/// States `S_0, ..., S_{horizon-1}` of one trajectory.
pub fn rollout(params: &ChainParams, policy: &Policy, horizon: usize, seed: u64) -> Result<Vec<State>> {
    if horizon == 0 {
        return Err(Error::InvalidParams("horizon must be at least 1".into()));
    }
    let mut states = Vec::with_capacity(horizon);
    walk(params, policy, horizon, &mut stream(seed, 0), |_, s| states.push(s));
    Ok(states)
}

#[derive(Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Discounted estimate with the truncation horizon chosen from `gamma`.
pub fn estimate_discounted(
    params: &ChainParams,
    policy: &Policy,
    kind: Quantity,
    n_rollouts: usize,
    seed: u64,
) -> Result<EstimateReport> {
    let horizon = horizon_for(params.gamma(), kind.max_value());
    estimate_with_horizon(params, policy, kind, n_rollouts, seed, horizon)
}

pub fn estimate_with_horizon(
    params: &ChainParams,
    policy: &Policy,
    kind: Quantity,
    n_rollouts: usize,
    seed: u64,
    horizon: usize,
) -> Result<EstimateReport> {
    if n_rollouts < MIN_ROLLOUTS {
        return Err(Error::InvalidParams(format!(
            "need at least {MIN_ROLLOUTS} rollouts, got {n_rollouts}"
        )));
    }
    if horizon == 0 {
        return Err(Error::InvalidParams("horizon must be at least 1".into()));
    }
    let g = params.gamma();
    let f = kind.per_state(params, policy);
    let values: Vec<f64> = (0..n_rollouts as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let mut total = 0.0;
            let mut weight = 1.0;
            walk(params, policy, horizon, &mut rng, |_, s| {
                total += weight * f[s.index()];
                weight *= g;
            });
            (1.0 - g) * total
        })
        .collect();

    let n = n_rollouts as f64;
    let mut sum = Kahan::default();
    values.iter().for_each(|&v| sum.add(v));
    let mean = sum.sum / n;
    let mut squares = Kahan::default();
    values.iter().for_each(|&v| squares.add((v - mean) * (v - mean)));
    let variance = squares.sum / (n - 1.0);
    Ok(EstimateReport {
        mean,
        stderr: (variance / n).sqrt(),
        n_rollouts,
        horizon,
        seed,
    })
}

/// The value [`estimate_discounted`] targets, from the occupancy formulas.
pub fn analytic_value(params: &ChainParams, policy: &Policy, kind: Quantity) -> f64 {
    match kind {
        Quantity::Reward => reward_of(policy, params),
        Quantity::Cost => cost_of(policy, params),
        Quantity::Visitation(s) => occupancy_of(policy, params).d(s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(p0: f64, p1: f64, init0: f64, gamma: f64) -> ChainParams {
        ChainParams::new(p0, p1, init0, gamma).unwrap()
    }

    #[test]
    fn absorbing_policies() {
        let params = inst(0.7, 0.9, 0.5, 0.9);
        let states = rollout(&params, &Policy::new(1.0, 1.0).unwrap(), 50, 3).unwrap();
        assert!(states[1..].iter().all(|&s| s == State::Zero));
        let states = rollout(&params, &Policy::new(0.0, 0.0).unwrap(), 50, 3).unwrap();
        assert!(states[1..].iter().all(|&s| s == State::One));
        assert!(rollout(&params, &Policy::uniform(), 0, 3).is_err());
    }

    #[test]
    fn rollouts_are_reproducible() {
        let params = inst(0.7, 0.9, 0.5, 0.9);
        let a = rollout(&params, &Policy::uniform(), 200, 42).unwrap();
        let b = rollout(&params, &Policy::uniform(), 200, 42).unwrap();
        let c = rollout(&params, &Policy::uniform(), 200, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn horizon_bounds_truncation() {
        assert_eq!(horizon_for(0.0, 1.0), 1);
        for &g in &[0.5, 0.9, 0.99] {
            for f_max in [1.0, 2.0] {
                let h = horizon_for(g, f_max);
                assert!(g.powi(h as i32) * f_max < TRUNCATION_TOL);
                assert!(g.powi(h as i32 - 1) * f_max >= TRUNCATION_TOL);
            }
        }
    }

    #[test]
    fn uniform_visitation_anchor() {
        let params = inst(0.7, 0.9, 0.8, 0.9);
        let est = estimate_discounted(&params, &Policy::uniform(), Quantity::Visitation(State::Zero), 20_000, 9)
            .unwrap();
        assert!((est.mean - 0.53).abs() < 3.0 * est.stderr + 1e-6, "{est:?}");
    }

    #[test]
    fn one_step_case() {
        let params = inst(0.7, 0.9, 0.3, 0.0);
        let policy = Policy::new(0.5, 0.6).unwrap();
        let est = estimate_discounted(&params, &policy, Quantity::Cost, 10_000, 1).unwrap();
        assert_eq!(est.horizon, 1);
        let exact = 0.3 * 0.4 + 0.7 * 0.6;
        assert!((exact - analytic_value(&params, &policy, Quantity::Cost)).abs() < 1e-15);
        assert!((est.mean - exact).abs() < 3.0 * est.stderr);
    }

    #[test]
    fn deterministic_aggregation() {
        let params = inst(0.6, 0.8, 0.5, 0.7);
        let pol = Policy::new(0.55, 0.65).unwrap();
        let a = estimate_discounted(&params, &pol, Quantity::Reward, 1000, 5).unwrap();
        let b = estimate_discounted(&params, &pol, Quantity::Reward, 1000, 5).unwrap();
        assert_eq!(a, b);
        assert!(estimate_discounted(&params, &pol, Quantity::Reward, 10, 5).is_err());
    }
}
