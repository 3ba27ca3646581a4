//! Python bindings. Instances and policies are immutable value objects;
//! every core error surfaces as `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use stegcmdp::closed_form::thresholds_of;
use stegcmdp::codec::{self, BitStream, ChainProvider};
use stegcmdp::oracle;
use stegcmdp::simulator::{self, Quantity};
use stegcmdp::State;

fn py_err(e: stegcmdp::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "ChainParams", frozen, eq, from_py_object)]
#[derive(Clone, Copy, PartialEq)]
pub struct PyChainParams(pub stegcmdp::ChainParams);

#[pymethods]
impl PyChainParams {
    #[new]
    fn new(p0: f64, p1: f64, init0: f64, gamma: f64) -> PyResult<Self> {
        stegcmdp::ChainParams::new(p0, p1, init0, gamma).map(Self).map_err(py_err)
    }

    #[getter]
    fn p0(&self) -> f64 {
        self.0.p0()
    }

    #[getter]
    fn p1(&self) -> f64 {
        self.0.p1()
    }

    #[getter]
    fn init0(&self) -> f64 {
        self.0.init0()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    /// "ATTRACTED", "OSCILLATORY" or "STICKY_MIXED", after relabeling.
    #[getter]
    fn shape(&self) -> String {
        shape_name(stegcmdp::canonicalize(&self.0).shape)
    }

    /// `(b_low, b_high)` for the shapes with a closed form, else `None`.
    fn thresholds(&self) -> Option<(f64, f64)> {
        thresholds_of(&stegcmdp::canonicalize(&self.0).params)
            .ok()
            .map(|th| (th.b_low, th.b_high))
    }

    fn __repr__(&self) -> String {
        format!(
            "ChainParams(p0={}, p1={}, init0={}, gamma={})",
            self.0.p0(),
            self.0.p1(),
            self.0.init0(),
            self.0.gamma()
        )
    }
}

#[pyclass(name = "Policy", frozen, eq, from_py_object)]
#[derive(Clone, Copy, PartialEq)]
pub struct PyPolicy(pub stegcmdp::Policy);

#[pymethods]
impl PyPolicy {
    #[new]
    fn new(a0: f64, a1: f64) -> PyResult<Self> {
        stegcmdp::Policy::new(a0, a1).map(Self).map_err(py_err)
    }

    #[getter]
    fn a0(&self) -> f64 {
        self.0.a0()
    }

    #[getter]
    fn a1(&self) -> f64 {
        self.0.a1()
    }

    /// Discounted entropy in bits.
    fn reward(&self, params: &PyChainParams) -> f64 {
        stegcmdp::reward_of(&self.0, &params.0)
    }

    /// Discounted total-variation cost.
    fn cost(&self, params: &PyChainParams) -> f64 {
        stegcmdp::cost_of(&self.0, &params.0)
    }

    /// `(d0, d1)`.
    fn occupancy(&self, params: &PyChainParams) -> (f64, f64) {
        let occ = stegcmdp::occupancy_of(&self.0, &params.0);
        (occ.d0, occ.d1)
    }

    fn __repr__(&self) -> String {
        format!("Policy(a0={}, a1={})", self.0.a0(), self.0.a1())
    }
}

fn shape_name(shape: stegcmdp::Shape) -> String {
    match shape {
        stegcmdp::Shape::Attracted => "ATTRACTED",
        stegcmdp::Shape::Oscillatory => "OSCILLATORY",
        stegcmdp::Shape::StickyMixed => "STICKY_MIXED",
    }
    .into()
}

#[pyclass(name = "PolicySolution", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PySolution(pub stegcmdp::PolicySolution);

#[pymethods]
impl PySolution {
    #[getter]
    fn policy(&self) -> PyPolicy {
        PyPolicy(self.0.policy)
    }

    #[getter]
    fn a0(&self) -> f64 {
        self.0.policy.a0()
    }

    #[getter]
    fn a1(&self) -> f64 {
        self.0.policy.a1()
    }

    #[getter]
    fn d0(&self) -> f64 {
        self.0.occupancy.d0
    }

    #[getter]
    fn d1(&self) -> f64 {
        self.0.occupancy.d1
    }

    /// "R1", "R2", "R3", or `None` for the fallback.
    #[getter]
    fn regime(&self) -> Option<String> {
        self.0.regime.map(|r| r.to_string())
    }

    #[getter]
    fn thresholds(&self) -> Option<(f64, f64)> {
        self.0.thresholds.map(|th| (th.b_low, th.b_high))
    }

    #[getter]
    fn method(&self) -> String {
        self.0.method.to_string()
    }

    #[getter]
    fn shape(&self) -> String {
        shape_name(self.0.shape)
    }

    #[getter]
    fn swapped(&self) -> bool {
        self.0.swapped
    }

    #[getter]
    fn budget(&self) -> f64 {
        self.0.budget
    }

    /// Bits.
    #[getter]
    fn reward(&self) -> f64 {
        self.0.reward
    }

    #[getter]
    fn cost(&self) -> f64 {
        self.0.cost
    }

    fn __repr__(&self) -> String {
        format!(
            "PolicySolution(a0={}, a1={}, regime={}, method={}, reward={}, cost={})",
            self.0.policy.a0(),
            self.0.policy.a1(),
            self.0.regime.map_or("None".into(), |r| r.to_string()),
            self.0.method,
            self.0.reward,
            self.0.cost
        )
    }
}

#[pyfunction]
fn optimal_policy(params: &PyChainParams, b: f64) -> PyResult<PySolution> {
    stegcmdp::optimal_policy(&params.0, b).map(PySolution).map_err(py_err)
}

#[pyfunction]
fn sweep(params: &PyChainParams, b_min: f64, b_max: f64, steps: usize) -> PyResult<Vec<PySolution>> {
    stegcmdp::sweep(&params.0, b_min, b_max, steps)
        .map(|rows| rows.into_iter().map(PySolution).collect())
        .map_err(py_err)
}

/// Grid maximizer: `(policy, reward_bits, cost)`.
#[pyfunction]
#[pyo3(signature = (params, b, step = 1e-3))]
fn grid_search(params: &PyChainParams, b: f64, step: f64) -> PyResult<(PyPolicy, f64, f64)> {
    let r = oracle::grid_search(&params.0, b, step).map_err(py_err)?;
    Ok((PyPolicy(r.policy), r.reward, r.cost))
}

/// KKT check of `policy` on the relabeled instance: `(passed, failures)`.
#[pyfunction]
fn kkt_verify(params: &PyChainParams, b: f64, policy: &PyPolicy) -> (bool, Vec<String>) {
    let form = stegcmdp::canonicalize(&params.0);
    let report = oracle::kkt_verify(&form.params, b, &form.to_canonical(&policy.0));
    (report.passed, report.failures)
}

/// Monte-Carlo `(mean, stderr)` of "reward", "cost", "d0" or "d1".
#[pyfunction]
fn estimate(params: &PyChainParams, policy: &PyPolicy, quantity: &str, n_rollouts: usize, seed: u64) -> PyResult<(f64, f64)> {
    let kind = match quantity {
        "reward" => Quantity::Reward,
        "cost" => Quantity::Cost,
        "d0" => Quantity::Visitation(State::Zero),
        "d1" => Quantity::Visitation(State::One),
        other => return Err(PyValueError::new_err(format!("unknown quantity {other:?}"))),
    };
    let r = simulator::estimate_discounted(&params.0, &policy.0, kind, n_rollouts, seed).map_err(py_err)?;
    Ok((r.mean, r.stderr))
}

/// Embeds the first `n_bits` of `message` (all of it by default) in `n`
/// tokens: `(tokens, consumed)`.
#[pyfunction]
#[pyo3(signature = (message, policy, params, n, seed = 0, n_bits = None))]
fn embed(
    message: &[u8],
    policy: &PyPolicy,
    params: &PyChainParams,
    n: usize,
    seed: u64,
    n_bits: Option<usize>,
) -> PyResult<(Vec<usize>, usize)> {
    let bits = match n_bits {
        Some(len) => BitStream::with_len(message, len).map_err(py_err)?,
        None => BitStream::from_bytes(message),
    };
    let provider = ChainProvider::new(policy.0, &params.0);
    let out = codec::embed(&bits, &provider, n, seed).map_err(py_err)?;
    Ok((out.tokens, out.consumed))
}

/// Every bit the tokens determine, as `(bytes, n_bits)`; padding tail included.
#[pyfunction]
fn extract(tokens: Vec<usize>, policy: &PyPolicy, params: &PyChainParams) -> PyResult<(Vec<u8>, usize)> {
    let provider = ChainProvider::new(policy.0, &params.0);
    let bits = codec::extract(&tokens, &provider).map_err(py_err)?;
    Ok((bits.as_bytes().to_vec(), bits.len()))
}

#[pymodule(name = "stegcmdp")]
pub fn stegcmdp_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChainParams>()?;
    m.add_class::<PyPolicy>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(optimal_policy, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(grid_search, m)?)?;
    m.add_function(wrap_pyfunction!(kkt_verify, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    Ok(())
}
