//! Python bindings: discretizations, trained models, single solves and sweeps.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use rbws::bench::{self, ExperimentConfig, Model};
use rbws::grid_fem::{self, ParamPoint, ProblemId, ProblemSpec};
use rbws::krylov::SolveReport;
use rbws::multigrid::{HighFidelity, MgConfig};
use rbws::warmstart::{self, MethodConfig, MethodId, TrainedModels};

fn to_py(e: rbws::Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn points(values: Vec<Vec<f64>>) -> Vec<ParamPoint> {
    values.into_iter().map(ParamPoint::new).collect()
}

/// Grid hierarchy and assembly for one benchmark problem.
#[pyclass(frozen, name = "Discretization")]
pub struct PyDiscretization {
    inner: grid_fem::Discretization,
}

impl PyDiscretization {
    pub fn build(problem: &str, levels: usize, base_cells: usize) -> rbws::Result<Self> {
        let id: ProblemId = problem.parse()?;
        Ok(Self { inner: grid_fem::Discretization::build(ProblemSpec::from_id(id), levels, base_cells)? })
    }

    fn high_fidelity(&self) -> HighFidelity<'_> {
        HighFidelity::new(&self.inner, MgConfig::default(), 1e-14, 100)
    }
}

#[pymethods]
impl PyDiscretization {
    #[new]
    #[pyo3(signature = (problem = "example-1", levels = 3, base_cells = 4))]
    fn new(problem: &str, levels: usize, base_cells: usize) -> PyResult<Self> {
        Self::build(problem, levels, base_cells).map_err(to_py)
    }

    #[getter]
    fn n_free(&self) -> usize {
        self.inner.n_free()
    }

    #[getter]
    fn bounds(&self) -> Vec<(f64, f64)> {
        self.inner.spec().bounds.clone()
    }

    /// Latin hypercube sample of the parameter box.
    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let spec = self.inner.spec();
        let pts = bench::lhs_sample(spec.param_dim(), n, &spec.bounds, seed).map_err(to_py)?;
        Ok(pts.into_iter().map(|p| p.0).collect())
    }

    /// Right-hand side and matrix in triplet form `(rows, cols, values, rhs)`.
    fn assemble(&self, mu: Vec<f64>) -> PyResult<(Vec<usize>, Vec<usize>, Vec<f64>, Vec<f64>)> {
        let sys = self.inner.assemble(&ParamPoint::new(mu)).map_err(to_py)?;
        let (mut r, mut c, mut v) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..sys.matrix.nrows() {
            let (cols, vals) = sys.matrix.row(i);
            r.extend(std::iter::repeat_n(i, cols.len()));
            c.extend_from_slice(cols);
            v.extend_from_slice(vals);
        }
        Ok((r, c, v, sys.rhs))
    }

    /// Solves at `mu` with one method; RB methods need the matching model.
    #[pyo3(signature = (mu, method = "mgcg", delta = 1e-8, max_iter = 40, rb_dim = None, l1roc = None, msrb = None))]
    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        mu: Vec<f64>,
        method: &str,
        delta: f64,
        max_iter: usize,
        rb_dim: Option<usize>,
        l1roc: Option<PyRef<'_, PyL1roc>>,
        msrb: Option<PyRef<'_, PyMsrb>>,
    ) -> PyResult<(Vec<f64>, PyReport)> {
        let models = TrainedModels { l1roc: l1roc.map(|m| m.inner.clone()), msrb: msrb.map(|m| m.inner.clone()), ..Default::default() };
        solve(&self.inner, mu, method, delta, max_iter, rb_dim, &models).map_err(to_py)
    }
}

/// Shared by the binding and its tests.
pub fn solve(
    disc: &grid_fem::Discretization,
    mu: Vec<f64>,
    method: &str,
    delta: f64,
    max_iter: usize,
    rb_dim: Option<usize>,
    models: &TrainedModels,
) -> rbws::Result<(Vec<f64>, PyReport)> {
    let method: MethodId = method.parse()?;
    let n = rb_dim.unwrap_or_else(|| models.l1roc.as_ref().map(|m| m.len()).or(models.msrb.as_ref().map(|h| h.rb_dim())).unwrap_or(0));
    let cfg = MethodConfig::standard(method, n, delta, max_iter);
    let sys = disc.assemble(&ParamPoint::new(mu))?;
    let (x, report) = warmstart::rbi_pcg_solve(&sys.matrix, &sys.rhs, disc, &cfg, models)?;
    Ok((x, PyReport { inner: report }))
}

/// Convergence record of one solve.
#[pyclass(frozen, name = "SolveReport")]
pub struct PyReport {
    inner: SolveReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn history(&self) -> Vec<f64> {
        self.inner.history.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn true_residual(&self) -> f64 {
        self.inner.true_residual
    }

    #[getter]
    fn wall_time(&self) -> f64 {
        self.inner.wall_time
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.method.clone()
    }

    fn __repr__(&self) -> String {
        let converged = if self.inner.converged { "True" } else { "False" };
        format!("SolveReport({}, iterations={}, converged={converged})", self.inner.method, self.inner.iterations)
    }
}

/// L1ROC reduced model, used for the RBI-MGCG initial guess.
#[pyclass(frozen, name = "L1rocModel")]
pub struct PyL1roc {
    inner: rbws::reduced_basis::L1rocModel,
}

#[pymethods]
impl PyL1roc {
    #[staticmethod]
    #[pyo3(signature = (disc, train, n, seed = 2024))]
    fn train(disc: PyRef<'_, PyDiscretization>, train: Vec<Vec<f64>>, n: usize, seed: u64) -> PyResult<Self> {
        let inner = rbws::reduced_basis::l1roc_offline(&points(train), n, seed, &disc.high_fidelity()).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        match bench::load_model(&path).map_err(to_py)? {
            Model::L1roc(inner) => Ok(Self { inner }),
            other => Err(PyValueError::new_err(format!("{} holds a {:?} model", path.display(), other.kind()))),
        }
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        bench::save_model(&Model::L1roc(self.inner.clone()), &path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn saturated(&self) -> bool {
        self.inner.saturated()
    }

    #[getter]
    fn offline_times(&self) -> Vec<f64> {
        self.inner.offline_times().to_vec()
    }

    /// Online solution at `mu`.
    fn online(&self, disc: PyRef<'_, PyDiscretization>, mu: Vec<f64>) -> PyResult<Vec<f64>> {
        let sys = disc.inner.assemble(&ParamPoint::new(mu)).map_err(to_py)?;
        Ok(self.inner.online(&sys.matrix, &sys.rhs).map_err(to_py)?.solution)
    }

    /// Worst relative residual over `params` for each basis size in `ns`.
    fn accuracy_curve(&self, disc: PyRef<'_, PyDiscretization>, params: Vec<Vec<f64>>, ns: Vec<usize>) -> PyResult<Vec<(usize, f64)>> {
        bench::rb_accuracy_curve(&self.inner, &disc.inner, &points(params), &ns).map_err(to_py)
    }
}

/// Iteration-indexed MSRB spaces, used by RBI-MSRBCG.
#[pyclass(frozen, name = "MsrbHierarchy")]
pub struct PyMsrb {
    inner: rbws::msrb::MsrbHierarchy,
}

#[pymethods]
impl PyMsrb {
    #[staticmethod]
    #[pyo3(signature = (disc, train, n, k_max = 8))]
    fn train(disc: PyRef<'_, PyDiscretization>, train: Vec<Vec<f64>>, n: usize, k_max: usize) -> PyResult<Self> {
        let t = rbws::msrb::msrb_train(&points(train), n, k_max, &disc.high_fidelity()).map_err(to_py)?;
        Ok(Self { inner: t.hierarchy })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        match bench::load_model(&path).map_err(to_py)? {
            Model::Msrb(inner) => Ok(Self { inner }),
            other => Err(PyValueError::new_err(format!("{} holds a {:?} model", path.display(), other.kind()))),
        }
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        bench::save_model(&Model::Msrb(self.inner.clone()), &path).map_err(to_py)
    }

    #[getter]
    fn rb_dim(&self) -> usize {
        self.inner.rb_dim()
    }

    #[getter]
    fn k_max(&self) -> usize {
        self.inner.k_max()
    }
}

/// Runs a sweep from TOML text and returns `(summary_csv, summary_json)`.
pub fn sweep_toml(text: &str) -> rbws::Result<(String, String)> {
    let cfg = ExperimentConfig::from_toml(text)?;
    let report = bench::run_experiment(&cfg)?;
    Ok((report.summary_csv(), report.json()))
}

#[pyfunction]
#[pyo3(name = "sweep")]
fn py_sweep(config_toml: &str) -> PyResult<(String, String)> {
    sweep_toml(config_toml).map_err(to_py)
}

#[pyfunction]
fn lhs_sample(p: usize, n: usize, bounds: Vec<(f64, f64)>, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    Ok(bench::lhs_sample(p, n, &bounds, seed).map_err(to_py)?.into_iter().map(|x| x.0).collect())
}

#[pymodule]
fn rbws_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDiscretization>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyL1roc>()?;
    m.add_class::<PyMsrb>()?;
    m.add_function(wrap_pyfunction!(py_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(lhs_sample, m)?)?;
    Ok(())
}
