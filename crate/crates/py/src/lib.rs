//! Python bindings: kernels, designs, estimates, sensitivity constants,
//! bounds and experiments. Structured results come back as plain dicts.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use ustat_core::bounds::{self, BoundGrid, BoundInput, BoundKind, CompleteB};
use ustat_core::design::{
    complete_design, design_stats, expected_stats, load_design, partition_design, random_design, save_design,
    DesignScalars, DesignSpec,
};
use ustat_core::distribution::{distribution_by_name, Dataset};
use ustat_core::estimator::estimate_incomplete;
use ustat_core::experiments::{self, resolve_profile, ExperimentConfig, ExperimentKind, ProfileChoice};
use ustat_core::kernel::kernel_by_name;
use ustat_core::rng::seeded;
use ustat_core::sensitivity::{generic_worst_case, worst_case_profile, Provenance, SensitivityProfile};
use ustat_core::{Design, Error, Kernel};

create_exception!(ustat, ValidityError, PyException, "A bound's validity precondition does not hold.");

fn py_err(e: Error) -> PyErr {
    match e {
        Error::ValidityFlag(_) => ValidityError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parsed<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

/// Serializable value -> Python object, via JSON.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Kernel", module = "ustat", frozen)]
struct PyKernel(Kernel);

#[pymethods]
impl PyKernel {
    /// Built-in kernel by name; `name@unit` maps its range onto `[0, 1]`.
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        kernel_by_name(name).map(PyKernel).map_err(py_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.0.degree()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn range(&self) -> (f64, f64) {
        let r = self.0.range();
        (r.lo, r.hi)
    }

    #[getter]
    fn symmetric(&self) -> bool {
        self.0.is_symmetric()
    }

    /// Kernel value on `degree` points, each a list of `dim` floats.
    fn __call__(&self, points: Vec<Vec<f64>>) -> PyResult<f64> {
        let args: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
        self.0.evaluate(&args).map_err(py_err)
    }

    fn to_unit_interval(&self) -> PyKernel {
        PyKernel(self.0.to_unit_interval())
    }

    /// Stored (possibly rescaled) value back on the kernel's natural scale.
    fn to_natural(&self, value: f64) -> f64 {
        self.0.to_natural(value)
    }

    fn __repr__(&self) -> String {
        format!("Kernel('{}', degree={}, dim={})", self.0.name(), self.0.degree(), self.0.dim())
    }
}

#[pyclass(name = "Design", module = "ustat", frozen)]
struct PyDesign(Design);

#[pymethods]
impl PyDesign {
    /// Design from 1-based subsets.
    #[new]
    fn new(n: usize, m: usize, subsets: Vec<Vec<usize>>) -> PyResult<Self> {
        Design::from_subsets(n, m, &subsets).map(PyDesign).map_err(py_err)
    }

    #[staticmethod]
    fn complete(n: usize, m: usize) -> PyResult<Self> {
        complete_design(n, m).map(PyDesign).map_err(py_err)
    }

    #[staticmethod]
    fn partition(n: usize, m: usize) -> PyResult<Self> {
        partition_design(n, m).map(PyDesign).map_err(py_err)
    }

    /// `M` subsets drawn uniformly with replacement.
    #[staticmethod]
    #[pyo3(name = "random")]
    fn random_(n: usize, m: usize, big_m: usize, seed: u64) -> PyResult<Self> {
        random_design(n, m, big_m, seed).map(PyDesign).map_err(py_err)
    }

    /// `complete`, `partition`, `random:M:seed` or `file:<path>`.
    #[staticmethod]
    #[pyo3(signature = (spec, n, m, big_m=None, seed=0))]
    fn from_spec(spec: &str, n: usize, m: usize, big_m: Option<usize>, seed: u64) -> PyResult<Self> {
        parsed::<DesignSpec>(spec)?.build(n, m, big_m, seed).map(PyDesign).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        load_design(&path).map(PyDesign).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_design(&self.0, &path).map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// 1-based subsets.
    fn subsets(&self) -> Vec<Vec<usize>> {
        self.0.subsets()
    }

    /// `(A, B, C)`.
    fn scalars(&self) -> (f64, f64, f64) {
        let s = design_stats(&self.0);
        (s.a, s.b, s.c)
    }

    /// `A`, `B`, `C`, every `R_k` and the nonzero `R_kl` as `(k, l, count)`.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let s = design_stats(&self.0);
        let pairs: Vec<(usize, usize, u64)> = s.r_pair.iter().map(|(&(k, l), &c)| (k, l, c)).collect();
        to_py(
            py,
            &serde_json::json!({"n": s.n, "m": s.m, "M": s.m_total, "A": s.a, "B": s.b, "C": s.c, "R": s.r, "R_pairs": pairs}),
        )
    }

    fn __repr__(&self) -> String {
        format!("Design(n={}, m={}, M={}, origin={})", self.0.n(), self.0.m(), self.0.len(), self.0.origin())
    }
}

/// `E[A]`, `E[B]` and their upper bounds for `M` uniformly drawn subsets.
#[pyfunction]
fn expected_design_stats(py: Python<'_>, n: usize, m: usize, big_m: usize) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &expected_stats(n, m, big_m).map_err(py_err)?)
}

fn dataset(data: &Bound<'_, PyAny>) -> PyResult<Dataset> {
    if let Ok(xs) = data.extract::<Vec<f64>>() {
        return Dataset::from_scalars(&xs).map_err(py_err);
    }
    let rows: Vec<Vec<f64>> = data.extract()?;
    let dim = rows.first().map_or(1, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(PyValueError::new_err("all points must have the same dimension"));
    }
    Dataset::new(dim, rows.concat()).map_err(py_err)
}

/// Incomplete U-statistic of `kernel` on `data` (floats or lists of floats).
#[pyfunction]
fn estimate(kernel: &PyKernel, data: &Bound<'_, PyAny>, design: &PyDesign) -> PyResult<f64> {
    Ok(estimate_incomplete(&kernel.0, &dataset(data)?, &design.0).map_err(py_err)?.value)
}

/// `n` points from a built-in distribution.
#[pyfunction]
fn sample(distribution: &str, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let d = distribution_by_name(distribution).map_err(py_err)?;
    let data = d.sample_dataset(&mut seeded(seed), n);
    Ok((0..data.len()).map(|i| data.point(i).to_vec()).collect())
}

/// Sensitivity constants; `method` is exact, auto, mc or worst-case. `auto`
/// returns certified values.
#[pyfunction]
#[pyo3(signature = (kernel, distribution, method="auto", seed=0))]
fn sensitivity<'py>(
    py: Python<'py>,
    kernel: &PyKernel,
    distribution: &str,
    method: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let dist = distribution_by_name(distribution).map_err(py_err)?;
    let choice: ProfileChoice = parsed(method)?;
    let kernel = kernel.0.clone();
    let p = py.detach(move || resolve_profile(&kernel, &dist, choice, seed)).map_err(py_err)?;
    to_py(py, &p)
}

fn supplied(sigma1: Option<f64>, sigma_m: Option<f64>, beta: Option<f64>, gamma: Option<f64>) -> Option<SensitivityProfile> {
    if sigma1.is_none() && sigma_m.is_none() && beta.is_none() && gamma.is_none() {
        return None;
    }
    let w = generic_worst_case();
    let p = SensitivityProfile::from_values(
        sigma1.unwrap_or(w.sigma1_sq.value),
        sigma_m.unwrap_or(w.sigma_m_sq.value),
        beta.unwrap_or(w.beta.value),
        gamma.unwrap_or(w.gamma.value),
        Provenance::Supplied,
    );
    Some(p)
}

/// Evaluates one bound and returns its report. Constants come from
/// `kernel`/`distribution`, from `sigma1`/`sigma_m`/`beta`/`gamma`, or default
/// to the worst case. Raises `ValidityError` when a validity flag fails,
/// unless `force=True`.
#[pyfunction]
#[pyo3(signature = (
    which, *, n=None, m=None, big_m=None, t=None, delta=None, delta2=None, design=None,
    kernel=None, distribution=None, profile="auto", sigma1=None, sigma_m=None, beta=None, gamma=None,
    var_u=None, u=None, relaxed_b=false, force=false, seed=0
))]
#[allow(clippy::too_many_arguments)]
fn bound<'py>(
    py: Python<'py>,
    which: &str,
    n: Option<usize>,
    m: Option<usize>,
    big_m: Option<usize>,
    t: Option<f64>,
    delta: Option<f64>,
    delta2: Option<f64>,
    design: Option<&PyDesign>,
    kernel: Option<&PyKernel>,
    distribution: Option<&str>,
    profile: &str,
    sigma1: Option<f64>,
    sigma_m: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    var_u: Option<f64>,
    u: Option<f64>,
    relaxed_b: bool,
    force: bool,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let kind: BoundKind = parsed(which)?;
    let choice: ProfileChoice = parsed(profile)?;
    let prof = match (kernel, distribution) {
        (Some(k), Some(d)) => resolve_profile(&k.0, &distribution_by_name(d).map_err(py_err)?, choice, seed).map_err(py_err)?,
        (Some(k), None) if choice == ProfileChoice::WorstCase => worst_case_profile(&k.0),
        (Some(_), None) => return Err(PyValueError::new_err("kernel needs a distribution unless profile='worst-case'")),
        (None, _) => supplied(sigma1, sigma_m, beta, gamma).unwrap_or_else(generic_worst_case),
    };
    let stats: Option<DesignScalars> = design.map(|d| design_stats(&d.0).scalars());
    let input = BoundInput {
        n: n.or(design.map(|d| d.0.n())),
        m: m.or(design.map(|d| d.0.m())).or(kernel.map(|k| k.0.degree())),
        big_m: big_m.or(design.map(|d| d.0.len())),
        t,
        delta,
        delta2,
        stats,
        profile: Some(prof),
        var_u,
        u,
        complete_b: if relaxed_b { CompleteB::Relaxed } else { CompleteB::Exact },
    };
    let report = bounds::evaluate(kind, &input).map_err(py_err)?;
    if !report.is_valid() && !force {
        let failed: Vec<String> = report.flags.iter().filter(|f| !f.ok).map(|f| format!("{} ({})", f.name, f.detail)).collect();
        return Err(ValidityError::new_err(failed.join(", ")));
    }
    to_py(py, &report)
}

/// Bound comparison table over a grid (`"default"` or e.g.
/// `"m=2..4; n=10,100; t=0.01:1:3; sigma1=0"`).
#[pyfunction]
#[pyo3(signature = (grid="default"))]
fn compare<'py>(py: Python<'py>, grid: &str) -> PyResult<Bound<'py, PyAny>> {
    let grid: BoundGrid = parsed(grid)?;
    to_py(py, &bounds::compare_grid(&grid).map_err(py_err)?)
}

/// Runs an experiment. `config` maps config-file keys to values; unset keys
/// keep their defaults. Returns `{kind, seed, config, rows, notes, all_pass}`;
/// with `out`, also writes the CSV and its JSON sidecar.
#[pyfunction]
#[pyo3(signature = (kind, config=None, threads=0, out=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    kind: &str,
    config: Option<std::collections::BTreeMap<String, String>>,
    threads: usize,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = ExperimentConfig::new(parsed::<ExperimentKind>(kind)?);
    for (k, v) in config.unwrap_or_default() {
        cfg.set(&k, &v).map_err(py_err)?;
    }
    let output = py.detach(|| experiments::run_with_threads(&cfg, threads)).map_err(py_err)?;
    if let Some(path) = &out {
        output.save(path).map_err(py_err)?;
    }
    let result = to_py(py, &output)?;
    result.set_item("all_pass", output.all_pass())?;
    Ok(result)
}

#[pymodule]
fn ustat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyDesign>()?;
    m.add_function(wrap_pyfunction!(expected_design_stats, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(bound, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("ValidityError", m.py().get_type::<ValidityError>())?;
    Ok(())
}
