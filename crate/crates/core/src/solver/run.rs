//! Simulation driver: steps the chosen integrator and feeds diagnostics to a
//! consumer at the configured cadence.

use crate::baseflow::build_base_flow;
use crate::diagnostics::{report, EnergyAccumulator, EnergyReport};
use crate::grid::Grid;
use crate::params::PhysicalParams;
use crate::solver::rk4::step_explicit_rk4;
use crate::solver::tendency::{tendency, tendency_rate};
use crate::solver::{ImexStepper, PerturbationState, Scheme, SolverConfig, SolverError};

#[derive(Debug)]
pub struct RunOutput {
    pub state: PerturbationState,
    pub steps: usize,
    pub records: usize,
}

/// Runs one simulation. Emits a diagnostic record at t = 0, every
/// `diag_stride` steps, and at the final step; returns the final state.
/// Abort signals carry the step index and time.
pub fn run(
    config: &SolverConfig,
    params: &PhysicalParams,
    grid: &Grid,
    initial: PerturbationState,
    sink: &mut dyn FnMut(&EnergyReport),
) -> Result<RunOutput, SolverError> {
    config.validate()?;
    let base = build_base_flow(params, grid)?;
    let opts = config.tendency_opts();
    let mut acc = EnergyAccumulator::new();

    let record = |state: &PerturbationState,
                  acc: &mut EnergyAccumulator|
     -> Result<EnergyReport, SolverError> {
        let tend = tendency(state, &base, params, grid, &opts)?;
        let rate = tendency_rate(state, &tend, &base, params, grid, &opts)?;
        report(state, &tend, &rate, &base, params, grid, acc)
            .map_err(|e| SolverError::Diagnostics(e.to_string()))
    };

    let n_steps = if config.t_end == 0.0 {
        0
    } else {
        (config.t_end / config.dt).round().max(1.0) as usize
    };

    let r0 = record(&initial, &mut acc)?;
    sink(&r0);
    let mut records = 1;

    let mut stepper = match config.scheme {
        Scheme::ImexCnab => Some(ImexStepper::new(grid, &base, params, config.dt, opts)?),
        Scheme::ExplicitRk4 => None,
    };

    let mut state = initial;
    for step in 1..=n_steps {
        let attach = |cause: SolverError, time: f64| SolverError::Aborted {
            step,
            time,
            cause: Box::new(cause),
        };
        state = match stepper.as_mut() {
            Some(s) => s.step(&state).map_err(|e| attach(e, state.time))?,
            None => step_explicit_rk4(
                &state,
                &base,
                params,
                grid,
                config.dt,
                &opts,
                config.cfl_acoustic,
                config.cfl_viscous,
            )
            .map_err(|e| attach(e, state.time))?,
        };
        if step % config.diag_stride == 0 || step == n_steps {
            let r = record(&state, &mut acc).map_err(|e| attach(e, state.time))?;
            sink(&r);
            records += 1;
        }
    }
    Ok(RunOutput {
        state,
        steps: n_steps,
        records,
    })
}

/// Convenience wrapper collecting the records into a vector.
pub fn run_collect(
    config: &SolverConfig,
    params: &PhysicalParams,
    grid: &Grid,
    initial: PerturbationState,
) -> Result<(RunOutput, Vec<EnergyReport>), SolverError> {
    let mut reports = Vec::new();
    let out = run(config, params, grid, initial, &mut |r| {
        reports.push(r.clone())
    })?;
    Ok((out, reports))
}
