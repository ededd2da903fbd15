//! Python bindings: lattices, problem setup, the outer solver and sweeps.

use std::path::PathBuf;

use hartree_core::cli::{self, Overrides, RunConfig};
use hartree_core::mss::{self, InitMode};
use hartree_core::observables::{self, EnergyBreakdown};
use hartree_core::{Error, FieldVector, HartreeSystem, MssOptions};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        Error::PowerMethodNonConvergence { .. }
        | Error::MssNonConvergence { .. }
        | Error::Internal(_) => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

#[pyclass(name = "Lattice", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyLattice(hartree_core::Lattice);

#[pymethods]
impl PyLattice {
    #[new]
    fn new(side_length: f64, nodes: usize) -> PyResult<Self> {
        hartree_core::Lattice::new(side_length, nodes)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    #[getter]
    fn interior_per_side(&self) -> usize {
        self.0.interior_per_side()
    }

    #[getter]
    fn interior_count(&self) -> usize {
        self.0.interior_count()
    }

    fn tau(&self, m1: usize, m2: usize) -> PyResult<usize> {
        self.0.tau(m1, m2).map_err(to_py)
    }

    fn tau_inv(&self, j: usize) -> PyResult<(usize, usize)> {
        self.0.tau_inv(j).map_err(to_py)
    }

    fn node_position(&self, j: usize) -> PyResult<(f64, f64)> {
        self.0.node_position(j).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Lattice(side_length={}, nodes={})",
            self.0.side_length(),
            self.0.nodes_per_side()
        )
    }
}

/// Converged ground-state pair at one interaction strength.
#[pyclass(name = "Solution", frozen)]
struct PySolution {
    #[pyo3(get)]
    kappa: f64,
    #[pyo3(get)]
    mu: (f64, f64),
    #[pyo3(get)]
    residuals: (f64, f64),
    #[pyo3(get)]
    outer_iterations: usize,
    #[pyo3(get)]
    pm_iterations: usize,
    #[pyo3(get)]
    d0: f64,
    #[pyo3(get)]
    total_energy: f64,
    #[pyo3(get)]
    decoupled_energy: f64,
    #[pyo3(get)]
    overlap: f64,
    fields: [FieldVector; 2],
}

#[pymethods]
impl PySolution {
    /// Nodal coefficients of component `alpha` (1 or 2).
    fn field(&self, alpha: usize) -> PyResult<Vec<f64>> {
        self.component(alpha).map(|f| f.values().to_vec())
    }

    /// `|z|^2` at every interior node of component `alpha` (1 or 2).
    fn density(&self, alpha: usize) -> PyResult<Vec<f64>> {
        self.component(alpha)
            .map(|f| f.values().iter().map(|v| v * v).collect())
    }

    fn mass(&self, alpha: usize) -> PyResult<f64> {
        self.component(alpha).map(FieldVector::mass)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(kappa={}, mu=({:.6}, {:.6}), d0={:.6e}, outer_iterations={})",
            self.kappa, self.mu.0, self.mu.1, self.d0, self.outer_iterations
        )
    }
}

impl PySolution {
    fn component(&self, alpha: usize) -> PyResult<&FieldVector> {
        match alpha {
            1 | 2 => Ok(&self.fields[alpha - 1]),
            _ => Err(PyValueError::new_err("component index must be 1 or 2")),
        }
    }

    fn build(system: &HartreeSystem, solution: mss::MssSolution) -> PyResult<Self> {
        let energy = EnergyBreakdown::evaluate(system, &solution.state.fields).map_err(to_py)?;
        let st = &solution.state;
        Ok(Self {
            kappa: system.couplings().cross_coupling,
            mu: (st.mu[0], st.mu[1]),
            residuals: (st.residuals[0], st.residuals[1]),
            outer_iterations: solution.history.outer_iterations(),
            pm_iterations: solution.history.pm_iterations(),
            d0: energy.d0_cross,
            total_energy: energy.total,
            decoupled_energy: energy.decoupled,
            overlap: observables::overlap(&st.fields[0], &st.fields[1]),
            fields: st.fields.clone(),
        })
    }
}

/// Problem instance built from config text (`key = value` lines).
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    config: RunConfig,
    system: HartreeSystem,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (config = ""))]
    fn new(config: &str) -> PyResult<Self> {
        let config = RunConfig::from_text(config, &Overrides::default()).map_err(to_py)?;
        let system = config.system().map_err(to_py)?;
        Ok(Self { config, system })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let config = cli::parse_config(&path, &Overrides::default()).map_err(to_py)?;
        let system = config.system().map_err(to_py)?;
        Ok(Self { config, system })
    }

    #[getter]
    fn lattice(&self) -> PyLattice {
        PyLattice(*self.system.lattice())
    }

    #[getter]
    fn kappas(&self) -> Vec<f64> {
        self.config.kappas.clone()
    }

    /// Solves at one interaction strength from a uniform, gaussian or
    /// `from-file:<path>` start.
    #[pyo3(signature = (kappa, init = "uniform"))]
    fn solve(&self, py: Python<'_>, kappa: f64, init: &str) -> PyResult<PySolution> {
        let mode = parse_mode(init)?;
        let options = self.options();
        let system = self.system.with_kappa(kappa).map_err(to_py)?;
        let solution = py
            .detach(|| {
                let initial = mss::initial_state(&system, &mode)?;
                mss::mss_solve(initial, &system, &options)
            })
            .map_err(to_py)?;
        PySolution::build(&system, solution)
    }

    /// Warm-started sweep over `kappas` (the configured list by default).
    #[pyo3(signature = (kappas = None, init = "uniform"))]
    fn sweep(
        &self,
        py: Python<'_>,
        kappas: Option<Vec<f64>>,
        init: &str,
    ) -> PyResult<Vec<PySolution>> {
        let kappas = kappas.unwrap_or_else(|| self.config.kappas.clone());
        if kappas.is_empty() {
            return Err(PyValueError::new_err("kappa list is empty"));
        }
        let mode = parse_mode(init)?;
        let options = self.options();
        let outcome = py
            .detach(|| {
                let initial = mss::initial_state(&self.system, &mode)?;
                cli::sweep(&self.system, &kappas, &options, initial)
            })
            .map_err(to_py)?;
        if let Some((_, err)) = outcome.failure {
            return Err(to_py(err));
        }
        outcome
            .points
            .into_iter()
            .map(|p| {
                let system = self.system.with_kappa(p.record.kappa).map_err(to_py)?;
                PySolution::build(&system, p.solution)
            })
            .collect()
    }

    fn config_text(&self) -> String {
        self.config.to_text()
    }
}

impl PyProblem {
    fn options(&self) -> MssOptions {
        self.config.mss_options()
    }
}

fn parse_mode(init: &str) -> PyResult<InitMode> {
    cli::parse_init(init)
        .ok_or_else(|| PyValueError::new_err("init must be uniform, gaussian or from-file:<path>"))
}

/// Runs the configured sweep and writes every output file; returns the exit status.
#[pyfunction]
#[pyo3(signature = (config_path, out = None, kappa = None))]
fn run_sweep(
    py: Python<'_>,
    config_path: PathBuf,
    out: Option<String>,
    kappa: Option<String>,
) -> PyResult<i32> {
    let overrides = Overrides {
        out,
        kappa,
        ..Overrides::default()
    };
    let config = cli::parse_config(&config_path, &overrides).map_err(to_py)?;
    let (status, _) = py.detach(|| cli::run_sweep(&config)).map_err(to_py)?;
    Ok(status as i32)
}

#[pymodule]
fn hartree(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLattice>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
