//! Time evolution of the perturbation (phi, psi, theta) around the Couette
//! base state: IMEX treatment of the eps^-2-stiff acoustic coupling and
//! implicit diffusion, plus an explicit RK4 reference integrator.

mod blocktri;
mod imex;
mod initial;
mod rk4;
mod run;
mod tendency;

pub use imex::{step_imex, ImexStepper};
pub use initial::{compatibility_wall_report, make_initial_data, Amplitudes, CompatibilityReport};
pub use rk4::{cfl_bounds, step_explicit_rk4, step_rk4_unchecked};
pub use run::{run, run_collect, RunOutput};
pub use tendency::{apply_implicit, tendency, tendency_rate, TendencyOpts};

use thiserror::Error;

use crate::grid::{Grid, ScalarField};

/// Perturbation fields at one time level.
#[derive(Debug, Clone)]
pub struct PerturbationState {
    /// Density perturbation phi = rho - rho~. No wall condition.
    pub phi: ScalarField,
    /// Velocity perturbation psi = u - u~; vanishes at both walls.
    pub psi1: ScalarField,
    pub psi2: ScalarField,
    /// Temperature perturbation theta = T - T~; vanishes at both walls.
    pub theta: ScalarField,
    pub time: f64,
}

impl PerturbationState {
    pub fn zeros(grid: &Grid) -> Self {
        PerturbationState {
            phi: ScalarField::zeros(grid),
            psi1: ScalarField::zeros(grid),
            psi2: ScalarField::zeros(grid),
            theta: ScalarField::zeros(grid),
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    /// Max absolute wall-row value over psi and theta.
    pub fn wall_violation(&self) -> f64 {
        let grid = self.grid();
        let n2 = grid.n2();
        let mut m: f64 = 0.0;
        for f in [&self.psi1, &self.psi2, &self.theta] {
            for i in 0..grid.n1() {
                m = m.max(f.get(i, 0).abs()).max(f.get(i, n2).abs());
            }
        }
        m
    }
}

/// Time derivatives of the perturbation fields. Wall rows are the raw
/// one-sided-stencil values; they vanish (to truncation level) exactly when
/// the data satisfies the compatibility conditions.
#[derive(Debug, Clone)]
pub struct Tendency {
    pub dphi: ScalarField,
    pub dpsi1: ScalarField,
    pub dpsi2: ScalarField,
    pub dtheta: ScalarField,
}

impl Tendency {
    pub fn zeros(grid: &Grid) -> Self {
        Tendency {
            dphi: ScalarField::zeros(grid),
            dpsi1: ScalarField::zeros(grid),
            dpsi2: ScalarField::zeros(grid),
            dtheta: ScalarField::zeros(grid),
        }
    }

    /// Zeroes the psi/theta wall rows (the Dirichlet-constrained dofs).
    pub fn pin_walls(&mut self) {
        let n2 = self.dphi.grid().n2();
        let n1 = self.dphi.grid().n1();
        for f in [&mut self.dpsi1, &mut self.dpsi2, &mut self.dtheta] {
            for i in 0..n1 {
                f.set(i, 0, 0.0);
                f.set(i, n2, 0.0);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ImexCnab,
    ExplicitRk4,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ImexCnab => "imex_cnab",
            Scheme::ExplicitRk4 => "explicit_rk4",
        }
    }
}

/// Time-integration settings for one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub dealias_on: bool,
    /// Steps between diagnostic records.
    pub diag_stride: usize,
    /// Acoustic CFL constant c_a: explicit steps require dt <= c_a*eps*dx2.
    pub cfl_acoustic: f64,
    /// Viscous CFL constant c_v: explicit steps require dt <= c_v*Re*dx2^2.
    pub cfl_viscous: f64,
    /// Evolve only the base-flow linearization (no quadratic terms).
    pub linearized: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 2e-3,
            t_end: 5.0,
            scheme: Scheme::ImexCnab,
            dealias_on: true,
            diag_stride: 25,
            cfl_acoustic: 0.5,
            cfl_viscous: 0.2,
            linearized: false,
        }
    }
}

impl SolverConfig {
    pub fn tendency_opts(&self) -> TendencyOpts {
        TendencyOpts {
            dealias: self.dealias_on,
            linearized: self.linearized,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt > 0.0) {
            return Err(SolverError::BadConfig("dt must be positive"));
        }
        if self.t_end < 0.0 || (self.t_end > 0.0 && self.t_end < self.dt) {
            return Err(SolverError::BadConfig("t_end must be 0 or >= dt"));
        }
        if self.diag_stride == 0 {
            return Err(SolverError::BadConfig("diag_stride must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error("positivity violation: {field} <= 0 at node ({i},{j}), value {value:.6e}")]
    Positivity {
        field: &'static str,
        i: usize,
        j: usize,
        value: f64,
    },
    #[error(
        "dt = {dt:.3e} violates explicit stability: acoustic bound {acoustic:.3e}, viscous bound {viscous:.3e}"
    )]
    Cfl {
        dt: f64,
        acoustic: f64,
        viscous: f64,
    },
    #[error("singular implicit block at Fourier mode {mode}, node {node}")]
    SingularBlock { mode: usize, node: usize },
    #[error("invalid solver configuration: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    BaseFlow(#[from] crate::baseflow::BaseFlowError),
    #[error("aborted at step {step} (t = {time:.6}): {cause}")]
    Aborted {
        step: usize,
        time: f64,
        #[source]
        cause: Box<SolverError>,
    },
    #[error("diagnostics failure: {0}")]
    Diagnostics(String),
}
