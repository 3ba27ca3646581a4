//! Problem instance, policies, discounted occupancy and the reward/cost
//! functionals of the two-state chain.
//!
//! State `s` emits token `0` with probability `p_s` under the original
//! model; a policy replaces that with `a_s`. Rewards are binary entropies
//! in bits, costs are total-variation distances `2|a_s - p_s|`, and both are
//! averaged under the normalized discounted visitation `(d0, d1)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

/// Tolerance used for normalization checks on occupancies and mixtures.
pub const SUM_TOL: f64 = 1e-12;

/// One of the two chain states. Token `0` leads to state `0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum State {
    Zero,
    One,
}

impl State {
    pub const ALL: [State; 2] = [State::Zero, State::One];

    pub fn index(self) -> usize {
        match self {
            State::Zero => 0,
            State::One => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<State> {
        match i {
            0 => Some(State::Zero),
            1 => Some(State::One),
            _ => None,
        }
    }

    pub fn other(self) -> State {
        match self {
            State::Zero => State::One,
            State::One => State::Zero,
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// A two-state instance: `p0 = P(next = 0 | state 0)`, `p1 = P(next = 0 | state 1)`,
/// initial mass `init0` on state 0 and discount `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainParams {
    p0: f64,
    p1: f64,
    init0: f64,
    gamma: f64,
}

impl ChainParams {
    pub fn new(p0: f64, p1: f64, init0: f64, gamma: f64) -> Result<Self> {
        check_probability("p0", p0)?;
        check_probability("p1", p1)?;
        check_probability("init0", init0)?;
        if !(gamma.is_finite() && (0.0..1.0).contains(&gamma)) {
            return Err(Error::Domain {
                what: "gamma",
                value: gamma,
                domain: "[0, 1)",
            });
        }
        Ok(Self {
            p0,
            p1,
            init0,
            gamma,
        })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p(&self, s: State) -> f64 {
        match s {
            State::Zero => self.p0,
            State::One => self.p1,
        }
    }

    pub fn init0(&self) -> f64 {
        self.init0
    }

    pub fn init1(&self) -> f64 {
        1.0 - self.init0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Discounted initial mass `(1 - gamma) * init0`.
    pub fn discounted_init0(&self) -> f64 {
        (1.0 - self.gamma) * self.init0
    }

    /// `1 / (1 - gamma*p0 + gamma*p1)`.
    pub fn m_factor(&self) -> f64 {
        1.0 / (1.0 - self.gamma * self.p0 + self.gamma * self.p1)
    }
}

impl<'de> Deserialize<'de> for ChainParams {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            p0: f64,
            p1: f64,
            init0: f64,
            gamma: f64,
        }
        let r = Raw::deserialize(de)?;
        ChainParams::new(r.p0, r.p1, r.init0, r.gamma).map_err(serde::de::Error::custom)
    }
}

/// A deterministic replacement policy: at state `s` emit token `0` with
/// probability `a_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Policy {
    a0: f64,
    a1: f64,
}

impl Policy {
    pub fn new(a0: f64, a1: f64) -> Result<Self> {
        check_probability("a0", a0)?;
        check_probability("a1", a1)?;
        Ok(Self { a0, a1 })
    }

    /// The policy that keeps the original transition probabilities.
    pub fn identity(params: &ChainParams) -> Self {
        Self {
            a0: params.p0,
            a1: params.p1,
        }
    }

    pub fn uniform() -> Self {
        Self { a0: 0.5, a1: 0.5 }
    }

    /// Builds a policy from solver output, absorbing round-off of at most
    /// `1e-9` outside `[0, 1]`.
    pub(crate) fn from_solver(a0: f64, a1: f64) -> Result<Self> {
        let fix = |what, v: f64| {
            if v.is_finite() && (-1e-9..=1.0 + 1e-9).contains(&v) {
                Ok(v.clamp(0.0, 1.0))
            } else {
                Err(Error::Domain {
                    what,
                    value: v,
                    domain: "[0, 1]",
                })
            }
        };
        Ok(Self {
            a0: fix("a0", a0)?,
            a1: fix("a1", a1)?,
        })
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a(&self, s: State) -> f64 {
        match s {
            State::Zero => self.a0,
            State::One => self.a1,
        }
    }
}

/// Discounted, normalized state visitation of a policy together with the
/// products `x_s = a_s * d_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub d0: f64,
    pub d1: f64,
    pub x0: f64,
    pub x1: f64,
}

impl Occupancy {
    pub fn d(&self, s: State) -> f64 {
        match s {
            State::Zero => self.d0,
            State::One => self.d1,
        }
    }

    pub fn x(&self, s: State) -> f64 {
        match s {
            State::Zero => self.x0,
            State::One => self.x1,
        }
    }

    /// Residual of the state-0 flow equation `d0 - gamma*(x0 + x1) - (1-gamma)*init0`.
    pub fn flow_residual(&self, params: &ChainParams) -> f64 {
        self.d0 - params.gamma * (self.x0 + self.x1) - params.discounted_init0()
    }
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(a: f64) -> Result<f64> {
    check_probability("a", a)?;
    Ok(entropy_bits(a))
}

/// Binary entropy in nats.
pub fn binary_entropy_nats(a: f64) -> Result<f64> {
    check_probability("a", a)?;
    Ok(entropy_nats(a))
}

pub(crate) fn entropy_nats(a: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    term(a) + term(1.0 - a)
}

pub(crate) fn entropy_bits(a: f64) -> f64 {
    entropy_nats(a) / std::f64::consts::LN_2
}

/// Total-variation distance between `(a, 1-a)` and `(p, 1-p)`.
pub fn tv_cost(a: f64, p: f64) -> Result<f64> {
    check_probability("a", a)?;
    check_probability("p", p)?;
    Ok(2.0 * (a - p).abs())
}

/// Visitation of state 0 for raw actions; shared by the oracle grid loops.
#[inline]
pub(crate) fn visitation0(a0: f64, a1: f64, params: &ChainParams) -> f64 {
    let g = params.gamma;
    (params.discounted_init0() + g * a1) / (1.0 - g * a0 + g * a1)
}

pub fn occupancy_of(policy: &Policy, params: &ChainParams) -> Occupancy {
    let d0 = visitation0(policy.a0, policy.a1, params);
    let d1 = 1.0 - d0;
    Occupancy {
        d0,
        d1,
        x0: policy.a0 * d0,
        x1: policy.a1 * d1,
    }
}

/// Normalized discounted entropy `d0 H(a0) + d1 H(a1)` in bits.
pub fn reward_of(policy: &Policy, params: &ChainParams) -> f64 {
    let occ = occupancy_of(policy, params);
    occ.d0 * entropy_bits(policy.a0) + occ.d1 * entropy_bits(policy.a1)
}

/// Normalized discounted TV cost `d0 TV(a0, p0) + d1 TV(a1, p1)`.
pub fn cost_of(policy: &Policy, params: &ChainParams) -> f64 {
    let occ = occupancy_of(policy, params);
    occ.d0 * 2.0 * (policy.a0 - params.p0).abs() + occ.d1 * 2.0 * (policy.a1 - params.p1).abs()
}

/// Where the transition probabilities sit relative to one half after
/// relabeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Shape {
    /// Both `p0, p1 >= 1/2`.
    Attracted,
    /// `p1 >= 1/2 > p0`.
    Oscillatory,
    /// `p0 > 1/2 > p1`; relabeling maps this shape onto itself.
    StickyMixed,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Attracted => "ATTRACTED",
            Shape::Oscillatory => "OSCILLATORY",
            Shape::StickyMixed => "STICKY_MIXED",
        })
    }
}

/// An instance after optional 0 <-> 1 relabeling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CanonicalForm {
    pub params: ChainParams,
    pub swapped: bool,
    pub shape: Shape,
    original: ChainParams,
}

impl CanonicalForm {
    /// The instance before relabeling, bit-for-bit.
    pub fn original(&self) -> ChainParams {
        self.original
    }

    /// Maps a policy on the original instance to the relabeled one.
    pub fn to_canonical(&self, policy: &Policy) -> Policy {
        if self.swapped {
            swap_policy(policy)
        } else {
            *policy
        }
    }
}

/// Renames the states of an instance: `p0' = 1 - p1`, `p1' = 1 - p0`,
/// `init0' = 1 - init0`.
pub fn relabel(params: &ChainParams) -> ChainParams {
    ChainParams {
        p0: 1.0 - params.p1,
        p1: 1.0 - params.p0,
        init0: 1.0 - params.init0,
        gamma: params.gamma,
    }
}

fn swap_policy(policy: &Policy) -> Policy {
    Policy {
        a0: 1.0 - policy.a1,
        a1: 1.0 - policy.a0,
    }
}

fn classify(params: &ChainParams) -> Shape {
    let (p0, p1) = (params.p0, params.p1);
    if p0 >= 0.5 && p1 >= 0.5 {
        Shape::Attracted
    } else if p1 >= 0.5 && p0 < 0.5 {
        Shape::Oscillatory
    } else {
        Shape::StickyMixed
    }
}

/// Relabels the instance when that turns it into a shape with a closed form.
pub fn canonicalize(params: &ChainParams) -> CanonicalForm {
    let both_low = params.p0 <= 0.5 && params.p1 <= 0.5;
    let both_high = params.p0 >= 0.5 && params.p1 >= 0.5;
    let swapped = both_low && !both_high;
    let canon = if swapped { relabel(params) } else { *params };
    CanonicalForm {
        params: canon,
        swapped,
        shape: classify(&canon),
        original: *params,
    }
}

/// Maps a policy computed on the canonical instance back to the original
/// state names.
pub fn uncanonicalize(policy: &Policy, form: &CanonicalForm) -> Policy {
    if form.swapped {
        swap_policy(policy)
    } else {
        *policy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(p0: f64, p1: f64, init0: f64, gamma: f64) -> ChainParams {
        ChainParams::new(p0, p1, init0, gamma).unwrap()
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // -0.25 log2 0.25 - 0.75 log2 0.75, evaluated to 16 digits offline.
        assert!((binary_entropy(0.25).unwrap() - 0.811_278_124_459_132_8).abs() < 1e-15);
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn tv_values() {
        assert_eq!(tv_cost(0.7, 0.7).unwrap(), 0.0);
        assert!((tv_cost(0.3, 0.7).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(tv_cost(0.0, 1.0).unwrap(), 2.0);
        assert!(tv_cost(0.3, 1.2).is_err());
    }

    #[test]
    fn construction_rejects_bad_values() {
        assert!(ChainParams::new(1.1, 0.5, 0.5, 0.5).is_err());
        assert!(ChainParams::new(0.5, 0.5, -0.1, 0.5).is_err());
        assert!(ChainParams::new(0.5, 0.5, 0.5, 1.0).is_err());
        assert!(ChainParams::new(0.5, 0.5, 0.5, -0.2).is_err());
        assert!(Policy::new(0.2, 1.0001).is_err());
    }

    #[test]
    fn occupancy_closed_forms() {
        let params = inst(0.7, 0.9, 0.8, 0.9);
        let occ = occupancy_of(&Policy::uniform(), &params);
        assert!((occ.d0 - 0.53).abs() < 1e-12);
        assert!((occ.d0 + occ.d1 - 1.0).abs() < SUM_TOL);
        assert!(occ.flow_residual(&params).abs() < 1e-12);

        let myopic = inst(0.3, 0.6, 0.35, 0.0);
        let occ = occupancy_of(&Policy::new(0.1, 0.9).unwrap(), &myopic);
        assert!((occ.d0 - 0.35).abs() < 1e-15);

        let occ = occupancy_of(&Policy::new(1.0, 0.0).unwrap(), &params);
        assert!((occ.d0 - 0.08 / 0.1).abs() < 1e-12);
    }

    #[test]
    fn reward_and_cost_anchors() {
        let params = inst(0.7, 0.9, 0.8, 0.9);
        assert!((reward_of(&Policy::uniform(), &params) - 1.0).abs() < 1e-15);
        assert_eq!(reward_of(&Policy::new(1.0, 0.0).unwrap(), &params), 0.0);
        assert_eq!(cost_of(&Policy::identity(&params), &params), 0.0);
        // 0.53 * 2 * 0.2 + 0.47 * 2 * 0.4
        assert!((cost_of(&Policy::uniform(), &params) - 0.588).abs() < 1e-12);

        let myopic = inst(0.7, 0.2, 0.3, 0.0);
        let pol = Policy::new(0.4, 0.9).unwrap();
        let want = 0.3 * 2.0 * 0.3 + 0.7 * 2.0 * 0.7;
        assert!((cost_of(&pol, &myopic) - want).abs() < 1e-12);
    }

    #[test]
    fn canonical_shapes() {
        let f = canonicalize(&inst(0.3, 0.4, 0.8, 0.9));
        assert!(f.swapped);
        assert!((f.params.p0() - 0.6).abs() < 1e-15);
        assert!((f.params.p1() - 0.7).abs() < 1e-15);
        assert!((f.params.init0() - 0.2).abs() < 1e-15);
        assert_eq!(f.shape, Shape::Attracted);

        let f = canonicalize(&inst(0.2, 0.9, 0.8, 0.9));
        assert!(!f.swapped);
        assert_eq!(f.shape, Shape::Oscillatory);

        let sticky = inst(0.8, 0.3, 0.5, 0.9);
        let f = canonicalize(&sticky);
        assert_eq!(f.shape, Shape::StickyMixed);
        // Neither labeling of the relabel group reaches a covered shape.
        for candidate in [sticky, relabel(&sticky)] {
            let (p0, p1) = (candidate.p0(), candidate.p1());
            assert!(!(p0 >= 0.5 && p1 >= 0.5));
            assert!(!(p1 >= 0.5 && p0 < 0.5));
        }
        assert!((relabel(&sticky).p0() - 0.7).abs() < 1e-15);
        assert!((relabel(&sticky).p1() - 0.2).abs() < 1e-15);
        assert_eq!(f.original(), sticky);
    }

    #[test]
    fn boundary_shapes() {
        assert_eq!(canonicalize(&inst(0.5, 0.5, 0.5, 0.5)).shape, Shape::Attracted);
        assert!(!canonicalize(&inst(0.5, 0.5, 0.5, 0.5)).swapped);
        let f = canonicalize(&inst(0.5, 0.2, 0.5, 0.5));
        assert!(f.swapped);
        assert_eq!(f.shape, Shape::Attracted);
        assert_eq!(canonicalize(&inst(0.2, 0.5, 0.5, 0.5)).shape, Shape::Attracted);
    }
}
