use thiserror::Error;

/// Errors raised by the solver, oracles, codec and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid instance: {0}")]
    InvalidParams(String),

    #[error("singular instance: {0}")]
    Singular(String),

    #[error("target {target} is not bracketed by [{lo}, {hi}]")]
    Bracket { target: f64, lo: f64, hi: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("shape {0} has no closed-form solution")]
    UnsupportedShape(crate::model::Shape),

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("solution is infeasible: cost {cost} exceeds budget {budget}")]
    Infeasible { cost: f64, budget: f64 },

    #[error("provider error: {0}")]
    Provider(String),

    #[error("precision error: {0}")]
    Precision(String),

    #[error("decode error: {0}")]
    Decode(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_probability(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain {
            what,
            value,
            domain: "[0, 1]",
        })
    }
}
