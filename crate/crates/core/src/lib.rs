//! Optimal replacement distributions for relatively-secure steganography on
//! a two-state token chain.
//!
//! A policy `(a0, a1)` replaces the model's next-token probabilities
//! `(p0, p1)`. The embedding capacity is the discounted entropy of the
//! replaced distributions, paid for with a discounted total-variation budget
//! `b`. [`closed_form::optimal_policy`] returns the optimum;
//! [`oracle`] re-derives it independently, [`codec`] embeds bits with it and
//! [`simulator`] checks the analytic quantities by Monte Carlo.

pub mod closed_form;
pub mod codec;
pub mod error;
pub mod model;
pub mod oracle;
pub mod roots;
pub mod simulator;

pub use closed_form::{optimal_policy, sweep, Method, PolicySolution, Regime, Thresholds};
pub use error::{Error, Result};
pub use model::{
    binary_entropy, canonicalize, cost_of, occupancy_of, reward_of, tv_cost, uncanonicalize,
    CanonicalForm, ChainParams, Occupancy, Policy, Shape, State,
};
