//! Classical explicit RK4 reference integrator with CFL guards.

use crate::baseflow::BaseFlow;
use crate::grid::Grid;
use crate::params::PhysicalParams;
use crate::solver::tendency::{tendency, TendencyOpts};
use crate::solver::{PerturbationState, SolverError, Tendency};

/// (acoustic, viscous) step-size bounds: c_a*eps*dx2 and c_v*Re*dx2^2.
pub fn cfl_bounds(params: &PhysicalParams, grid: &Grid, c_a: f64, c_v: f64) -> (f64, f64) {
    let dx2 = grid.dx2();
    (c_a * params.eps * dx2, c_v * params.reynolds * dx2 * dx2)
}

fn add_scaled_pinned(state: &PerturbationState, k: &Tendency, c: f64) -> PerturbationState {
    let mut s = state.clone();
    let grid = state.grid();
    let n2 = grid.n2();
    s.phi.axpy(c, &k.dphi);
    s.psi1.axpy(c, &k.dpsi1);
    s.psi2.axpy(c, &k.dpsi2);
    s.theta.axpy(c, &k.dtheta);
    // Dirichlet dofs are held at zero, matching the implicit elimination.
    for f in [&mut s.psi1, &mut s.psi2, &mut s.theta] {
        for i in 0..grid.n1() {
            f.set(i, 0, 0.0);
            f.set(i, n2, 0.0);
        }
    }
    s
}

/// One classical four-stage explicit step. Refuses dt above either CFL bound.
pub fn step_explicit_rk4(
    state: &PerturbationState,
    base: &BaseFlow,
    params: &PhysicalParams,
    grid: &Grid,
    dt: f64,
    opts: &TendencyOpts,
    c_a: f64,
    c_v: f64,
) -> Result<PerturbationState, SolverError> {
    let (acoustic, viscous) = cfl_bounds(params, grid, c_a, c_v);
    if dt > acoustic || dt > viscous {
        return Err(SolverError::Cfl {
            dt,
            acoustic,
            viscous,
        });
    }
    step_rk4_unchecked(state, base, params, grid, dt, opts)
}

/// RK4 step without the CFL guard (stability benchmarks drive dt past it).
pub fn step_rk4_unchecked(
    state: &PerturbationState,
    base: &BaseFlow,
    params: &PhysicalParams,
    grid: &Grid,
    dt: f64,
    opts: &TendencyOpts,
) -> Result<PerturbationState, SolverError> {
    let k1 = tendency(state, base, params, grid, opts)?;
    let s2 = add_scaled_pinned(state, &k1, 0.5 * dt);
    let k2 = tendency(&s2, base, params, grid, opts)?;
    let s3 = add_scaled_pinned(state, &k2, 0.5 * dt);
    let k3 = tendency(&s3, base, params, grid, opts)?;
    let s4 = add_scaled_pinned(state, &k3, dt);
    let k4 = tendency(&s4, base, params, grid, opts)?;

    let mut incr = k1;
    incr.dphi.axpy(2.0, &k2.dphi);
    incr.dpsi1.axpy(2.0, &k2.dpsi1);
    incr.dpsi2.axpy(2.0, &k2.dpsi2);
    incr.dtheta.axpy(2.0, &k2.dtheta);
    incr.dphi.axpy(2.0, &k3.dphi);
    incr.dpsi1.axpy(2.0, &k3.dpsi1);
    incr.dpsi2.axpy(2.0, &k3.dpsi2);
    incr.dtheta.axpy(2.0, &k3.dtheta);
    incr.dphi.axpy(1.0, &k4.dphi);
    incr.dpsi1.axpy(1.0, &k4.dpsi1);
    incr.dpsi2.axpy(1.0, &k4.dpsi2);
    incr.dtheta.axpy(1.0, &k4.dtheta);

    let mut next = add_scaled_pinned(state, &incr, dt / 6.0);
    next.time = state.time + dt;
    for i in 0..grid.n1() {
        for j in 0..=grid.n2() {
            let rho = base.rho_t[j] + next.phi.get(i, j);
            if rho <= 0.0 {
                return Err(SolverError::Positivity {
                    field: "density",
                    i,
                    j,
                    value: rho,
                });
            }
            let t = base.temp_t[j] + next.theta.get(i, j);
            if t <= 0.0 {
                return Err(SolverError::Positivity {
                    field: "temperature",
                    i,
                    j,
                    value: t,
                });
            }
        }
    }
    Ok(next)
}
