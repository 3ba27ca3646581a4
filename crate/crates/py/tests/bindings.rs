use pyo3::prelude::*;
use pyo3::types::PyDict;

#[test]
fn module_runs_in_embedded_interpreter() {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(stegcmdp_py::stegcmdp_module)(py);
        let locals = PyDict::new(py);
        locals.set_item("stegcmdp", module).unwrap();
        py.run(
            cr#"
params = stegcmdp.ChainParams(0.2, 0.9, 0.8, 0.9)
assert params.shape == "OSCILLATORY"
sol = stegcmdp.optimal_policy(params, 0.3)
assert sol.a0 > 0.2 and sol.a1 < 0.9
assert stegcmdp.kkt_verify(params, 0.3, sol.policy)[0]
tokens, consumed = stegcmdp.embed(b"\xa5", sol.policy, params, 64, n_bits=5)
assert consumed == 5
bits, n = stegcmdp.extract(tokens, sol.policy, params)
assert bits[0] >> 3 == 0xa5 >> 3
try:
    stegcmdp.estimate(params, sol.policy, "entropy", 1000, 0)
    raise AssertionError("unknown quantity accepted")
except ValueError:
    pass
"#,
            None,
            Some(&locals),
        )
        .unwrap();
    });
}
