use proptest::prelude::*;

use stegcmdp::closed_form::{
    optimal_policy, optimal_policy_with, thresholds_of, LogBase, Method, Regime, SolveOptions,
    FEASIBILITY_TOL,
};
use stegcmdp::codec::{embed, extract, BitStream, ChainProvider, FixedProvider};
use stegcmdp::model::{
    binary_entropy, canonicalize, cost_of, occupancy_of, relabel, reward_of, uncanonicalize,
    ChainParams, Policy, Shape, State,
};
use stegcmdp::oracle::{collapse, convex_search, evaluate_mixed, kkt_verify, z_funcs, MixedPolicy};
use stegcmdp::simulator::{estimate_discounted, estimate_with_horizon, horizon_for, Quantity};

fn params() -> impl Strategy<Value = ChainParams> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..0.99f64)
        .prop_map(|(p0, p1, init0, g)| ChainParams::new(p0, p1, init0, g).unwrap())
}

/// Covered instances with probabilities away from 0 and 1, where the
/// certificate tables apply.
fn interior_params() -> impl Strategy<Value = ChainParams> {
    (0.02..0.98f64, 0.02..0.98f64, 0.0..=1.0f64, 0.0..0.99f64)
        .prop_map(|(p0, p1, init0, g)| ChainParams::new(p0, p1, init0, g).unwrap())
        .prop_filter("covered shape", |p| canonicalize(p).shape != Shape::StickyMixed)
}

fn policy() -> impl Strategy<Value = Policy> {
    (0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(a0, a1)| Policy::new(a0, a1).unwrap())
}

fn atoms() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..=1.0f64, 0.01..1.0f64), 1..4).prop_map(|raw| {
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        raw.into_iter().map(|(a, w)| (a, w / total)).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn occupancy_invariants(params in params(), policy in policy()) {
        let occ = occupancy_of(&policy, &params);
        prop_assert!((occ.d0 + occ.d1 - 1.0).abs() <= 1e-12);
        prop_assert!(occ.flow_residual(&params).abs() <= 1e-12);
        prop_assert!(occ.x0 >= 0.0 && occ.x0 <= occ.d0 + 1e-15);
        prop_assert!(occ.x1 >= 0.0 && occ.x1 <= occ.d1 + 1e-15);
    }

    #[test]
    fn relabel_preserves_reward_and_cost(params in params(), policy in policy()) {
        let form = canonicalize(&params);
        let canon = form.to_canonical(&policy);
        let back = uncanonicalize(&canon, &form);
        prop_assert!((reward_of(&back, &params) - reward_of(&canon, &form.params)).abs() <= 1e-12);
        prop_assert!((cost_of(&back, &params) - cost_of(&canon, &form.params)).abs() <= 1e-12);
        let twice = relabel(&relabel(&params));
        prop_assert!((twice.p0() - params.p0()).abs() <= 1e-15);
        prop_assert_eq!(form.original(), params);
    }

    #[test]
    fn entropy_is_concave(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let mid = binary_entropy(0.5 * (a + b)).unwrap();
        let chord = 0.5 * (binary_entropy(a).unwrap() + binary_entropy(b).unwrap());
        prop_assert!(mid >= chord - 1e-15);
    }

    #[test]
    fn solutions_are_feasible_and_tight(params in params(), b in 0.0..1.5f64) {
        let sol = optimal_policy(&params, b).unwrap();
        prop_assert!(sol.cost <= b + FEASIBILITY_TOL);
        if let (Method::ClosedForm, Some(th)) = (sol.method, sol.thresholds) {
            if b < th.b_high {
                prop_assert!((sol.cost - b).abs() <= 1e-8, "cost {} vs b {}", sol.cost, b);
            } else {
                prop_assert_eq!(sol.policy, Policy::uniform());
            }
        }
    }

    #[test]
    fn thresholds_are_ordered(params in params()) {
        let form = canonicalize(&params);
        if let Ok(th) = thresholds_of(&form.params) {
            prop_assert!(0.0 <= th.b_low && th.b_low <= th.b_high + 1e-12, "{:?}", th);
        }
    }

    #[test]
    fn closed_form_is_optimal(params in interior_params(), b in 0.0..1.2f64) {
        let sol = optimal_policy(&params, b).unwrap();
        let oracle = convex_search(&params, b);
        prop_assert!(oracle.reward <= sol.reward + 1e-9, "oracle {} vs closed form {}", oracle.reward, sol.reward);
    }

    #[test]
    fn regime_boundaries_glue(params in interior_params()) {
        let form = canonicalize(&params);
        let th = thresholds_of(&form.params).unwrap();
        for at in [th.b_low, th.b_high] {
            let lo = optimal_policy(&params, (at - 1e-6).max(0.0)).unwrap().policy;
            let hi = optimal_policy(&params, at + 1e-6).unwrap().policy;
            prop_assert!((lo.a0() - hi.a0()).abs() <= 1e-4);
            prop_assert!((lo.a1() - hi.a1()).abs() <= 1e-4);
        }
    }

    #[test]
    fn saturation_is_monotone(params in interior_params()) {
        let th = thresholds_of(&canonicalize(&params).params).unwrap();
        let top = 1.1 * th.b_high + 1e-3;
        let mut prev: Option<(Policy, f64)> = None;
        for k in 0..=60 {
            let b = top * k as f64 / 60.0;
            let sol = optimal_policy(&params, b).unwrap();
            if let Some((p, r)) = prev {
                prop_assert!((sol.policy.a0() - 0.5).abs() <= (p.a0() - 0.5).abs() + 1e-12);
                prop_assert!((sol.policy.a1() - 0.5).abs() <= (p.a1() - 0.5).abs() + 1e-12);
                prop_assert!(sol.reward >= r - 1e-12);
            }
            prev = Some((sol.policy, sol.reward));
        }
    }

    #[test]
    fn log_base_invariance(params in params(), b in 0.0..1.2f64) {
        let shape = canonicalize(&params).shape;
        prop_assume!(shape != Shape::StickyMixed);
        let nats = optimal_policy(&params, b).unwrap();
        let bits = optimal_policy_with(&params, b, SolveOptions { log_base: LogBase::Bits }).unwrap();
        prop_assert!((nats.policy.a0() - bits.policy.a0()).abs() <= 1e-12);
        prop_assert!((nats.policy.a1() - bits.policy.a1()).abs() <= 1e-12);
    }

    #[test]
    fn kkt_certifies_closed_form(params in interior_params(), b in 0.0..1.2f64) {
        let form = canonicalize(&params);
        let sol = optimal_policy(&params, b).unwrap();
        let report = kkt_verify(&form.params, b, &form.to_canonical(&sol.policy));
        prop_assert!(report.passed, "{:?} regime {:?}", report.failures, sol.regime);
        if sol.regime == Some(Regime::R3) && b > sol.thresholds.unwrap().b_high {
            prop_assert_eq!(report.lambda, 0.0);
        }
    }

    #[test]
    fn collapse_dominates(params in params(), s0 in atoms(), s1 in atoms()) {
        let mp = MixedPolicy::new(s0, s1).unwrap();
        let ev = evaluate_mixed(&mp, &params);
        let det = collapse(&mp);
        prop_assert!(ev.reward <= reward_of(&det, &params) + 1e-12);
        prop_assert!(ev.cost >= cost_of(&det, &params) - 1e-12);
    }

    #[test]
    fn z_slopes_match_finite_differences(params in params(), a0 in 0.05..0.95f64, a1 in 0.05..0.95f64) {
        let h = 1e-6;
        let g = params.gamma();
        let fd = (z_funcs(a0, a1 + h, &params).unwrap().1 - z_funcs(a0, a1 - h, &params).unwrap().1) / (2.0 * h);
        let exact = (1.0 - g * params.p0() + g * a1) / ((1.0 - a1) * a1);
        prop_assert!(((fd - exact) / exact).abs() <= 1e-4);
        prop_assert!(fd > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn codec_roundtrip(
        bytes in prop::collection::vec(any::<u8>(), 0..48),
        a0 in 0.01..0.99f64,
        a1 in 0.01..0.99f64,
        n in 1usize..600,
        seed in any::<u64>(),
    ) {
        let params = ChainParams::new(0.5, 0.5, 0.5, 0.5).unwrap();
        let provider = ChainProvider::new(Policy::new(a0, a1).unwrap(), &params);
        let message = BitStream::from_bytes(&bytes);
        let out = embed(&message, &provider, n, seed).unwrap();
        prop_assert_eq!(out.tokens.len(), n);
        let back = extract(&out.tokens, &provider).unwrap();
        prop_assert_eq!(back.len(), out.determined);
        prop_assert!(back.starts_with(&message.prefix(out.consumed)));
    }

    #[test]
    fn uniform_provider_copies_bits(bytes in prop::collection::vec(any::<u8>(), 1..32)) {
        let message = BitStream::from_bytes(&bytes);
        let uniform = FixedProvider(vec![0.5, 0.5]);
        let out = embed(&message, &uniform, message.len(), 0).unwrap();
        let tokens: Vec<usize> = message.iter().map(usize::from).collect();
        prop_assert_eq!(&out.tokens, &tokens);
        prop_assert_eq!(extract(&out.tokens, &uniform).unwrap(), message);
    }
}

#[test]
fn stderr_halves_when_rollouts_quadruple() {
    let params = ChainParams::new(0.6, 0.3, 0.4, 0.8).unwrap();
    let policy = Policy::new(0.55, 0.7).unwrap();
    for kind in [Quantity::Reward, Quantity::Cost, Quantity::Visitation(State::One)] {
        let small = estimate_discounted(&params, &policy, kind, 10_000, 17).unwrap();
        let large = estimate_discounted(&params, &policy, kind, 40_000, 17).unwrap();
        let ratio = small.stderr / large.stderr;
        assert!((ratio - 2.0).abs() <= 0.4, "{kind:?}: ratio {ratio}");
    }
}

#[test]
fn truncation_horizon_is_long_enough() {
    let params = ChainParams::new(0.6, 0.3, 0.4, 0.9).unwrap();
    let policy = Policy::new(0.55, 0.7).unwrap();
    let h = horizon_for(params.gamma(), 2.0);
    let short = estimate_with_horizon(&params, &policy, Quantity::Cost, 2000, 3, h).unwrap();
    let long = estimate_with_horizon(&params, &policy, Quantity::Cost, 2000, 3, 2 * h).unwrap();
    assert!((short.mean - long.mean).abs() <= 1e-5);
}
