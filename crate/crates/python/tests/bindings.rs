use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module(code: &std::ffi::CStr) {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(mwfpi::mwfpi)(py);
        let globals = PyDict::new(py);
        globals.set_item("mwfpi", module).unwrap();
        if let Err(e) = py.run(code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn model_and_sensing_functions() {
    with_module(
        c"
import math
m = mwfpi.Model(gravity_m_s2=1e-3)
assert m.gravity_m_s2 == 1e-3
m.gravity_m_s2 = 0.0
r = m.reduced()
assert abs(r['stiffness'] - 1.019) < 1e-3
assert abs(mwfpi.epsilon_fw() - 1.5974) < 1e-3
w = mwfpi.bragg_rabi(1e-32, 1e-35, 1.4431609e-25, 1.6e7)
assert w > 0
tau = m.transmission_spectrum([0.05, 0.2])
assert all(0 <= t <= 1 for t in tau)
d = mwfpi.rel_uncertainty_minus([[-.1]*3, [0.]*3, [.1]*3], [[1.]*3]*3, [-1., 0., 1.], [.3, .5, .7])
assert math.isnan(d[1][0]) and abs(d[2][0] - math.sqrt(0.99) / 0.1) < 1e-12
",
    );
}

#[test]
fn errors_map_to_python_exceptions() {
    with_module(
        c"
for bad in (lambda: mwfpi.Model(barrier_height_J=-1.0),
            lambda: mwfpi.Model().resonances(theta=1.0),
            lambda: mwfpi.run_scenario('nope')):
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError('expected ValueError')
try:
    mwfpi.Model().triangular_levels(1)
except RuntimeError:
    pass
else:
    raise AssertionError('g = 0 has no bound states')
",
    );
}
