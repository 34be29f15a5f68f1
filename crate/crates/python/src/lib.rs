//! Python bindings for `isotau`.

use isotau::linalg::{Analytic, TwoForm, TwoFormField};
use isotau::models::pii::{pii_eta_closed_form, PiiSliceEta};
use isotau::models::pvi::pvi_eta_closed_form;
use isotau::models::{
    fuchsian_eta_closed_form, sample_rng, ChartModel, FuchsianCharVarModel, Pii, PiiSlice, Pvi, ScalarFuchsianModel,
};
use isotau::quadrature::{
    lemma_cases, lemma_iterated_integral_check, scalar_omega_quadrature_all, star_integral_J, StarConfig,
};
use isotau::vertex::{check_eta_closed, eta_total, ContourGraphModel};
use isotau::C64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: isotau::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(f: &TwoForm) -> Vec<Vec<C64>> {
    f.to_matrix()
}

#[derive(Clone)]
enum Kind {
    Pii,
    PiiSlice,
    Pvi(FuchsianCharVarModel),
    Fuchsian(FuchsianCharVarModel),
}

/// One of the shipped monodromy models: "pii", "pii-slice", "pvi", "three-pole", "twisted-pair".
#[pyclass(name = "Model", module = "isotau_py", frozen)]
struct PyModel {
    kind: Kind,
    name: String,
}

impl PyModel {
    fn chart(&self) -> &dyn ChartModel {
        match &self.kind {
            Kind::Pii => &Pii,
            Kind::PiiSlice => &PiiSlice,
            Kind::Pvi(m) | Kind::Fuchsian(m) => m,
        }
    }

    fn graph(&self) -> isotau::Result<ContourGraphModel> {
        match &self.kind {
            Kind::Pii => Ok(Pii.contour_graph()),
            Kind::PiiSlice => Ok(PiiSlice.contour_graph()),
            Kind::Pvi(m) | Kind::Fuchsian(m) => m.contour_graph(),
        }
    }
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        let kind = match name {
            "pii" => Kind::Pii,
            "pii-slice" => Kind::PiiSlice,
            "pvi" => Kind::Pvi(Pvi.model()),
            "three-pole" | "fuchsian" => Kind::Fuchsian(FuchsianCharVarModel::three_pole()),
            "twisted-pair" => Kind::Fuchsian(FuchsianCharVarModel::twisted_pair()),
            other => return Err(PyValueError::new_err(format!("unknown model '{other}'"))),
        };
        Ok(PyModel {
            kind,
            name: name.to_string(),
        })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.name
    }

    #[getter]
    fn chart_labels(&self) -> Vec<String> {
        self.chart().chart_labels()
    }

    /// Seeded admissible chart point.
    #[pyo3(signature = (seed = 0))]
    fn sample(&self, seed: u64) -> PyResult<Vec<C64>> {
        self.chart().sample(&mut sample_rng(seed)).map_err(py_err)
    }

    fn check_admissible(&self, point: Vec<C64>) -> PyResult<()> {
        self.chart().check_admissible(&point).map_err(py_err)
    }

    /// Vertex curvature summed over the contour graph, as an antisymmetric matrix.
    fn eta(&self, point: Vec<C64>) -> PyResult<Vec<Vec<C64>>> {
        let graph = self.graph().map_err(py_err)?;
        eta_total(&graph, &point).map(|f| matrix(&f)).map_err(py_err)
    }

    fn eta_closed_form(&self, point: Vec<C64>) -> PyResult<Vec<Vec<C64>>> {
        let f = match &self.kind {
            Kind::Pii => pii_eta_closed_form(&point),
            Kind::PiiSlice => Analytic(PiiSliceEta).eval(&point),
            Kind::Pvi(_) => pvi_eta_closed_form(&point),
            Kind::Fuchsian(m) => fuchsian_eta_closed_form(m, &point),
        };
        f.map(|f| matrix(&f)).map_err(py_err)
    }

    /// Largest coefficient of d(eta) at the point.
    fn closedness(&self, point: Vec<C64>) -> PyResult<f64> {
        let graph = self.graph().map_err(py_err)?;
        check_eta_closed(&graph, &point).map_err(py_err)
    }

    fn constraint_residual(&self, point: Vec<C64>) -> PyResult<f64> {
        match &self.kind {
            Kind::Pii => Pii.constraint_residual(&point),
            Kind::PiiSlice => PiiSlice.constraint_residual(&point),
            Kind::Pvi(m) | Kind::Fuchsian(m) => m.monodromy_residual(&point),
        }
        .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Model('{}')", self.name)
    }
}

/// Scalar Fuchsian model with explicit tau function.
#[pyclass(name = "ScalarModel", module = "isotau_py", frozen)]
struct PyScalarModel {
    inner: ScalarFuchsianModel,
}

#[pymethods]
impl PyScalarModel {
    #[new]
    fn new(a: Vec<C64>, theta: Vec<C64>, z0: C64, radii: Vec<f64>, psi: Vec<f64>) -> PyResult<Self> {
        ScalarFuchsianModel::new(a, theta, z0, radii, psi)
            .map(|inner| PyScalarModel { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (n = 3, seed = 0))]
    fn sample(n: usize, seed: u64) -> PyResult<Self> {
        ScalarFuchsianModel::sample(n, &mut sample_rng(seed))
            .map(|inner| PyScalarModel { inner })
            .map_err(py_err)
    }

    #[getter]
    fn point(&self) -> Vec<C64> {
        self.inner.point()
    }

    #[getter]
    fn chart_labels(&self) -> Vec<String> {
        self.inner.chart_labels()
    }

    fn tau(&self) -> PyResult<C64> {
        self.inner.tau(&self.inner.point()).map_err(py_err)
    }

    fn dlog_tau(&self) -> PyResult<Vec<C64>> {
        self.inner.dlog_tau(&self.inner.point()).map_err(py_err)
    }

    fn omega(&self) -> PyResult<Vec<C64>> {
        self.inner.omega_closed_form(&self.inner.point()).map_err(py_err)
    }

    fn omega_quadrature(&self) -> PyResult<Vec<C64>> {
        scalar_omega_quadrature_all(&self.inner).map_err(py_err)
    }

    fn correction(&self) -> Vec<C64> {
        self.inner.correction(&self.inner.point())
    }

    fn eta(&self) -> PyResult<Vec<Vec<C64>>> {
        eta_total(&self.inner.contour_graph(), &self.inner.point())
            .map(|f| matrix(&f))
            .map_err(py_err)
    }

    fn eta_expected(&self) -> Vec<Vec<C64>> {
        matrix(&self.inner.eta_expected(&self.inner.point()))
    }
}

/// Star integral: returns (closed form, quadrature, c-route values).
#[pyfunction]
#[pyo3(signature = (n = 3, seed = 0))]
fn star_integral(n: usize, seed: u64) -> PyResult<(C64, C64, Vec<C64>)> {
    let cfg = StarConfig::random(n, &mut sample_rng(seed)).map_err(py_err)?;
    let j = star_integral_J(&cfg, &cfg.default_c_placements()).map_err(py_err)?;
    Ok((j.closed_form, j.ray_quadrature, j.c_route.iter().map(|(_, v)| *v).collect()))
}

/// Iterated-integral identity residuals for seeded kernels.
#[pyfunction]
#[pyo3(signature = (count = 10, seed = 0))]
fn lemma_check(count: usize, seed: u64) -> PyResult<Vec<f64>> {
    let cases = lemma_cases(&mut sample_rng(seed), count).map_err(py_err)?;
    cases
        .iter()
        .map(|c| lemma_iterated_integral_check(c.kernel.as_ref(), &c.arc).map(|r| r.diff))
        .collect::<isotau::Result<_>>()
        .map_err(py_err)
}

/// Run a CLI command (arguments without the program name); returns the JSON report.
#[pyfunction]
fn run(args: Vec<String>) -> PyResult<String> {
    isotau::cli::run_args(args).map(|r| r.to_json()).map_err(py_err)
}

#[pymodule]
pub fn isotau_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyScalarModel>()?;
    m.add_function(wrap_pyfunction!(star_integral, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_check, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
