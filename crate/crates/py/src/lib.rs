//! Python bindings: parameters, grid, base flow, initial data, simulation
//! runs and diagnostics.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use couette::baseflow::{build_base_flow, steady_residual};
use couette::checkpoint::{read_checkpoint, write_checkpoint};
use couette::diagnostics::{relative_entropy, EnergyReport};
use couette::experiments::fit_loglog_slope;
use couette::grid::{self, Grid};
use couette::params::build_params;
use couette::solver::{
    make_initial_data, run, Amplitudes, PerturbationState, Scheme, SolverConfig,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

#[pyclass(name = "PhysicalParams", from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: couette::PhysicalParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (gamma=1.4, mach=0.08451542547285166, reynolds=1.0, prandtl=0.72, visc_ratio=0.3333333333333333, chi=1.0))]
    fn new(
        gamma: f64,
        mach: f64,
        reynolds: f64,
        prandtl: f64,
        visc_ratio: f64,
        chi: f64,
    ) -> PyResult<Self> {
        Ok(PyParams {
            inner: build_params(gamma, mach, reynolds, prandtl, visc_ratio, chi)
                .map_err(value_err)?,
        })
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn mu_prime(&self) -> f64 {
        self.inner.mu_prime
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn cp(&self) -> f64 {
        self.inner.cp
    }

    fn __repr__(&self) -> String {
        format!(
            "PhysicalParams(gamma={}, mach={}, reynolds={}, prandtl={}, visc_ratio={}, chi={})",
            self.inner.gamma,
            self.inner.mach,
            self.inner.reynolds,
            self.inner.prandtl,
            self.inner.visc_ratio,
            self.inner.chi
        )
    }
}

#[pyclass(name = "Grid", from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(n1: usize, n2: usize) -> PyResult<Self> {
        Ok(PyGrid {
            inner: Grid::new(n1, n2).map_err(value_err)?,
        })
    }

    #[getter]
    fn n1(&self) -> usize {
        self.inner.n1()
    }

    #[getter]
    fn n2(&self) -> usize {
        self.inner.n2()
    }

    fn __repr__(&self) -> String {
        format!("Grid({}x{})", self.inner.n1(), self.inner.n2())
    }
}

#[pyclass(name = "PerturbationState")]
struct PyState {
    inner: PerturbationState,
}

#[pymethods]
impl PyState {
    #[getter]
    fn time(&self) -> f64 {
        self.inner.time
    }

    /// (n1, n2+1) nested lists of the requested field samples.
    fn field(&self, name: &str) -> PyResult<Vec<Vec<f64>>> {
        let f = match name {
            "phi" => &self.inner.phi,
            "psi1" => &self.inner.psi1,
            "psi2" => &self.inner.psi2,
            "theta" => &self.inner.theta,
            _ => return Err(value_err("field must be phi, psi1, psi2 or theta")),
        };
        let g = self.inner.grid();
        Ok((0..g.n1())
            .map(|i| (0..=g.n2()).map(|j| f.get(i, j)).collect())
            .collect())
    }

    fn l2_norms(&self) -> (f64, f64, f64) {
        let psi = (grid::l2_norm(&self.inner.psi1).powi(2)
            + grid::l2_norm(&self.inner.psi2).powi(2))
        .sqrt();
        (
            grid::l2_norm(&self.inner.phi),
            psi,
            grid::l2_norm(&self.inner.theta),
        )
    }

    fn mass(&self) -> f64 {
        grid::integrate(&self.inner.phi)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        write_checkpoint(&self.inner, std::path::Path::new(path)).map_err(runtime_err)
    }
}

#[pyfunction]
fn load_state(path: &str) -> PyResult<PyState> {
    Ok(PyState {
        inner: read_checkpoint(std::path::Path::new(path)).map_err(runtime_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (params, grid, a_phi=1.0, a_psi=1.0, a_theta=1.0))]
fn initial_data(
    params: &PyParams,
    grid: &PyGrid,
    a_phi: f64,
    a_psi: f64,
    a_theta: f64,
) -> PyState {
    PyState {
        inner: make_initial_data(
            &params.inner,
            &grid.inner,
            Amplitudes::new(a_phi, a_psi, a_theta),
        ),
    }
}

#[pyfunction]
fn baseflow_profiles<'py>(
    py: Python<'py>,
    params: &PyParams,
    grid: &PyGrid,
) -> PyResult<Bound<'py, PyDict>> {
    let base = build_base_flow(&params.inner, &grid.inner).map_err(value_err)?;
    let d = PyDict::new(py);
    let x2: Vec<f64> = (0..=grid.inner.n2()).map(|j| grid.inner.x2(j)).collect();
    d.set_item("x2", x2)?;
    d.set_item("rho_t", base.rho_t)?;
    d.set_item("u1_t", base.u1_t)?;
    d.set_item("temp_t", base.temp_t)?;
    d.set_item("dtemp_t", base.dtemp_t)?;
    Ok(d)
}

#[pyfunction]
fn steady_residuals(params: &PyParams, grid: &PyGrid) -> PyResult<(f64, f64, f64, f64)> {
    let base = build_base_flow(&params.inner, &grid.inner).map_err(value_err)?;
    let r = steady_residual(&base, &params.inner, &grid.inner);
    Ok((r.mass, r.mom1, r.mom2, r.energy))
}

#[pyfunction]
fn entropy(params: &PyParams, state: &PyState) -> PyResult<f64> {
    let grid = state.inner.grid().clone();
    let base = build_base_flow(&params.inner, &grid).map_err(value_err)?;
    relative_entropy(&state.inner, &base, &params.inner, &grid).map_err(runtime_err)
}

fn report_dict<'py>(py: Python<'py>, r: &EnergyReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("time", r.time)?;
    d.set_item("l2_phi", r.l2_phi)?;
    d.set_item("l2_psi", r.l2_psi)?;
    d.set_item("l2_theta", r.l2_theta)?;
    d.set_item("linf_phi", r.linf_phi)?;
    d.set_item("linf_psi", r.linf_psi)?;
    d.set_item("linf_theta", r.linf_theta)?;
    d.set_item("entropy", r.entropy)?;
    d.set_item("n_func", r.n_func)?;
    d.set_item("mass", r.mass)?;
    d.set_item("gap_rho", r.gap_rho)?;
    d.set_item("gap_u", r.gap_u)?;
    d.set_item("gap_temp", r.gap_temp)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (params, grid, initial, dt, t_end, scheme="imex_cnab", dealias=true, diag_stride=25, linearized=false))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    params: &PyParams,
    grid: &PyGrid,
    initial: &PyState,
    dt: f64,
    t_end: f64,
    scheme: &str,
    dealias: bool,
    diag_stride: usize,
    linearized: bool,
) -> PyResult<(PyState, Vec<Bound<'py, PyDict>>)> {
    let scheme = match scheme {
        "imex_cnab" => Scheme::ImexCnab,
        "explicit_rk4" => Scheme::ExplicitRk4,
        _ => return Err(value_err("scheme must be imex_cnab or explicit_rk4")),
    };
    let config = SolverConfig {
        dt,
        t_end,
        scheme,
        dealias_on: dealias,
        diag_stride,
        linearized,
        ..SolverConfig::default()
    };
    let mut reports = Vec::new();
    let out = run(
        &config,
        &params.inner,
        &grid.inner,
        PerturbationState {
            phi: initial.inner.phi.clone(),
            psi1: initial.inner.psi1.clone(),
            psi2: initial.inner.psi2.clone(),
            theta: initial.inner.theta.clone(),
            time: initial.inner.time,
        },
        &mut |r| reports.push(r.clone()),
    )
    .map_err(runtime_err)?;
    let dicts = reports
        .iter()
        .map(|r| report_dict(py, r))
        .collect::<PyResult<Vec<_>>>()?;
    Ok((PyState { inner: out.state }, dicts))
}

#[pyfunction]
fn loglog_slope(points: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let fit = fit_loglog_slope(&points).map_err(value_err)?;
    Ok((fit.slope, fit.intercept, fit.max_residual))
}

#[pymodule]
fn couette_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(initial_data, m)?)?;
    m.add_function(wrap_pyfunction!(baseflow_profiles, m)?)?;
    m.add_function(wrap_pyfunction!(steady_residuals, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(loglog_slope, m)?)?;
    m.add_function(wrap_pyfunction!(load_state, m)?)?;
    Ok(())
}
