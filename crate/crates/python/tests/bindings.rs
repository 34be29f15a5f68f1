use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::sync::Once;

use isotau_py::isotau_py;

static INIT: Once = Once::new();

fn run(code: &std::ffi::CStr) {
    INIT.call_once(|| {
        pyo3::append_to_inittab!(isotau_py);
        Python::initialize();
    });
    Python::attach(|py| {
        let globals = PyDict::new(py);
        if let Err(e) = py.run(code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn model_eta_matches_closed_form() {
    run(c"
import isotau_py as m
pii = m.Model('pii')
x = pii.sample(3)
a, b = pii.eta(x), pii.eta_closed_form(x)
assert max(abs(p - q) for r, s in zip(a, b) for p, q in zip(r, s)) < 1e-9
assert pii.closedness(x) < 1e-8
assert len(pii.chart_labels) == 4
");
}

#[test]
fn scalar_model_and_quadrature() {
    run(c"
import isotau_py as m
s = m.ScalarModel.sample(3, 4)
assert max(abs(p - q) for p, q in zip(s.omega(), s.omega_quadrature())) < 1e-8
closed, quad, routes = m.star_integral(4, 1)
assert abs(closed - quad) < 1e-10 and all(abs(r - closed) < 1e-10 for r in routes)
assert max(m.lemma_check(3, 2)) < 1e-6
");
}

#[test]
fn errors_become_value_errors() {
    run(c"
import isotau_py as m
try:
    m.Model('nope')
    raise AssertionError('expected ValueError')
except ValueError:
    pass
");
}
