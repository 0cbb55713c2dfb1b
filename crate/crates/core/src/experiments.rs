//! Multi-run studies: the low-Mach eps-sweep, the stability/decay study and
//! the acoustic stiffness benchmark.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::diagnostics::EnergyReport;
use crate::grid::{self, Grid};
use crate::params::{build_params, ParamError, PhysicalParams};
use crate::solver::{
    make_initial_data, run_collect, step_rk4_unchecked, Amplitudes, ImexStepper,
    PerturbationState, SolverConfig, SolverError, TendencyOpts,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("epsilon sweep requires chi = 1 in the template (got {0})")]
    ChiNotOne(f64),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("eps values must be strictly decreasing and lie in (0, 0.5]")]
    BadEpsList,
    #[error("log-log fit requires strictly positive data")]
    NonPositiveData,
    #[error("run at eps = {eps} aborted: {source}")]
    RunFailed {
        eps: f64,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Ordinary least squares on (ln x, ln y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit, ExperimentError> {
    if points.len() < 2 {
        return Err(ExperimentError::TooFewPoints {
            need: 2,
            got: points.len(),
        });
    }
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(ExperimentError::NonPositiveData);
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let max_residual = points
        .iter()
        .map(|&(x, y)| (y.ln() - (intercept + slope * x.ln())).abs())
        .fold(0.0f64, f64::max);
    Ok(SlopeFit {
        slope,
        intercept,
        max_residual,
    })
}

/// One row of the eps-sweep table: sup-in-time gaps and norms plus runtime.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub sup_gap_rho: f64,
    pub sup_gap_u: f64,
    pub sup_gap_temp: f64,
    pub sup_phi: f64,
    pub sup_psi: f64,
    pub sup_theta: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub slope_rho: Option<SlopeFit>,
    pub slope_u: Option<SlopeFit>,
    pub slope_temp: Option<SlopeFit>,
}

impl SweepTable {
    /// Bitwise equality of everything except the wall-clock column.
    pub fn same_results(&self, other: &SweepTable) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.eps.to_bits() == b.eps.to_bits()
                    && a.sup_gap_rho.to_bits() == b.sup_gap_rho.to_bits()
                    && a.sup_gap_u.to_bits() == b.sup_gap_u.to_bits()
                    && a.sup_gap_temp.to_bits() == b.sup_gap_temp.to_bits()
                    && a.sup_phi.to_bits() == b.sup_phi.to_bits()
                    && a.sup_psi.to_bits() == b.sup_psi.to_bits()
                    && a.sup_theta.to_bits() == b.sup_theta.to_bits()
            })
    }
}

fn params_for_eps(template: &PhysicalParams, eps: f64) -> Result<PhysicalParams, ParamError> {
    build_params(
        template.gamma,
        eps / template.gamma.sqrt(),
        template.reynolds,
        template.prandtl,
        template.visc_ratio,
        template.chi,
    )
}

fn validate_eps_list(eps_list: &[f64], need: usize) -> Result<(), ExperimentError> {
    if eps_list.len() < need {
        return Err(ExperimentError::TooFewPoints {
            need,
            got: eps_list.len(),
        });
    }
    let decreasing = eps_list.windows(2).all(|w| w[0] > w[1]);
    let in_range = eps_list.iter().all(|&e| e > 0.0 && e <= 0.5);
    if !decreasing || !in_range {
        return Err(ExperimentError::BadEpsList);
    }
    Ok(())
}

fn sweep_run_one(
    template: &PhysicalParams,
    grid: &Grid,
    config: &SolverConfig,
    amplitudes: Amplitudes,
    eps: f64,
) -> Result<SweepRow, ExperimentError> {
    let started = Instant::now();
    let params = params_for_eps(template, eps)?;
    let initial = make_initial_data(&params, grid, amplitudes);
    let (_, reports) = run_collect(config, &params, grid, initial)
        .map_err(|source| ExperimentError::RunFailed { eps, source })?;
    let sup = |f: fn(&EnergyReport) -> f64| reports.iter().map(f).fold(0.0f64, f64::max);
    Ok(SweepRow {
        eps: params.eps,
        sup_gap_rho: sup(|r| r.gap_rho),
        sup_gap_u: sup(|r| r.gap_u),
        sup_gap_temp: sup(|r| r.gap_temp),
        sup_phi: sup(|r| r.l2_phi),
        sup_psi: sup(|r| r.l2_psi),
        sup_theta: sup(|r| r.l2_theta),
        runtime_s: started.elapsed().as_secs_f64(),
    })
}

/// Runs the low-Mach sweep: one simulation per eps with con3-scaled data,
/// sup-in-time gaps, and fitted log-log slopes. Rows are assembled in the
/// declared eps order whether or not the runs execute concurrently.
pub fn epsilon_sweep(
    eps_list: &[f64],
    template: &PhysicalParams,
    grid: &Grid,
    config: &SolverConfig,
    amplitudes: Amplitudes,
    parallel: bool,
) -> Result<SweepTable, ExperimentError> {
    if template.chi != 1.0 {
        return Err(ExperimentError::ChiNotOne(template.chi));
    }
    validate_eps_list(eps_list, 3)?;
    let rows: Result<Vec<SweepRow>, ExperimentError> = if parallel {
        eps_list
            .par_iter()
            .map(|&e| sweep_run_one(template, grid, config, amplitudes, e))
            .collect()
    } else {
        eps_list
            .iter()
            .map(|&e| sweep_run_one(template, grid, config, amplitudes, e))
            .collect()
    };
    let rows = rows?;
    let fit = |get: fn(&SweepRow) -> f64| -> Option<SlopeFit> {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, get(r))).collect();
        if pts.iter().any(|&(_, y)| y <= 0.0) {
            None
        } else {
            fit_loglog_slope(&pts).ok()
        }
    };
    Ok(SweepTable {
        slope_rho: fit(|r| r.sup_gap_rho),
        slope_u: fit(|r| r.sup_gap_u),
        slope_temp: fit(|r| r.sup_gap_temp),
        rows,
    })
}

pub const SWEEP_CSV_HEADER: &str = "eps,sup_gap_rho,sup_gap_u,sup_gap_temp,runtime_s";

pub fn write_sweep_csv(table: &SweepTable, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.eps, r.sup_gap_rho, r.sup_gap_u, r.sup_gap_temp, r.runtime_s
        )?;
    }
    Ok(())
}

/// One-line summary with the fitted slopes and residuals.
pub fn write_sweep_summary(table: &SweepTable, out: &mut dyn Write) -> std::io::Result<()> {
    let fmt = |f: &Option<SlopeFit>| match f {
        Some(s) => format!("{:.6} (residual {:.3e})", s.slope, s.max_residual),
        None => "n/a".to_string(),
    };
    writeln!(
        out,
        "slope_rho = {} slope_u = {} slope_temp = {}",
        fmt(&table.slope_rho),
        fmt(&table.slope_u),
        fmt(&table.slope_temp)
    )
}

/// Summary of one decay run.
#[derive(Debug, Clone)]
pub struct DecaySummary {
    pub initial_weighted: f64,
    pub final_weighted: f64,
    pub time_to_tenth: Option<f64>,
    /// Fraction of consecutive entropy records that do not increase.
    pub monotonicity: f64,
    /// Same, counted from the 10th record on.
    pub monotonicity_after_10: f64,
    pub linf_initial: f64,
    pub linf_final: f64,
    pub reports: Vec<EnergyReport>,
}

fn weighted_norm(r: &EnergyReport, params: &PhysicalParams) -> f64 {
    let ie2 = params.inv_eps2();
    (ie2 * r.l2_phi * r.l2_phi + r.l2_psi * r.l2_psi + ie2 * r.l2_theta * r.l2_theta).sqrt()
}

fn monotone_fraction(entropies: &[f64]) -> f64 {
    if entropies.len() < 2 {
        return 1.0;
    }
    let decreasing = entropies.windows(2).filter(|w| w[1] <= w[0]).count();
    decreasing as f64 / (entropies.len() - 1) as f64
}

/// Runs one simulation from the standard initial data and summarizes decay.
pub fn decay_study(
    params: &PhysicalParams,
    grid: &Grid,
    config: &SolverConfig,
    amplitudes: Amplitudes,
) -> Result<DecaySummary, ExperimentError> {
    let initial = make_initial_data(params, grid, amplitudes);
    let (_, reports) = run_collect(config, params, grid, initial).map_err(|source| {
        ExperimentError::RunFailed {
            eps: params.eps,
            source,
        }
    })?;
    let initial_weighted = weighted_norm(&reports[0], params);
    let final_weighted = weighted_norm(reports.last().unwrap(), params);
    let time_to_tenth = reports
        .iter()
        .find(|r| weighted_norm(r, params) <= 0.1 * initial_weighted)
        .map(|r| r.time);
    let entropies: Vec<f64> = reports.iter().map(|r| r.entropy).collect();
    let linf = |r: &EnergyReport| r.linf_phi.max(r.linf_psi).max(r.linf_theta);
    Ok(DecaySummary {
        initial_weighted,
        final_weighted,
        time_to_tenth,
        monotonicity: monotone_fraction(&entropies),
        monotonicity_after_10: monotone_fraction(&entropies[entropies.len().min(10)..]),
        linf_initial: linf(&reports[0]),
        linf_final: linf(reports.last().unwrap()),
        reports,
    })
}

#[derive(Debug, Clone)]
pub struct StiffnessRow {
    pub eps: f64,
    /// Largest stable explicit-RK4 step on the 200-step linear run.
    pub dt_star: f64,
    /// The IMEX step it is compared against (10 * eps * dx2).
    pub imex_dt: f64,
    pub imex_stable: bool,
    pub imex_seconds_per_step: f64,
}

#[derive(Debug, Clone)]
pub struct StiffnessTable {
    pub rows: Vec<StiffnessRow>,
    pub exponent: SlopeFit,
}

fn state_weighted_norm(s: &PerturbationState, params: &PhysicalParams) -> f64 {
    let ie2 = params.inv_eps2();
    (ie2 * grid::l2_norm(&s.phi).powi(2)
        + grid::l2_norm(&s.psi1).powi(2)
        + grid::l2_norm(&s.psi2).powi(2)
        + ie2 * grid::l2_norm(&s.theta).powi(2))
    .sqrt()
}

const BENCH_STEPS: usize = 200;
const GROWTH_LIMIT: f64 = 10.0;

/// 200 linearized RK4 steps at `dt`; stable means no 10x norm growth.
fn rk4_linear_stable(
    initial: &PerturbationState,
    params: &PhysicalParams,
    grid_: &Grid,
    dt: f64,
) -> bool {
    let base = match crate::baseflow::build_base_flow(params, grid_) {
        Ok(b) => b,
        Err(_) => return false,
    };
    let opts = TendencyOpts {
        dealias: true,
        linearized: true,
    };
    let norm0 = state_weighted_norm(initial, params);
    let mut s = initial.clone();
    for _ in 0..BENCH_STEPS {
        s = match step_rk4_unchecked(&s, &base, params, grid_, dt, &opts) {
            Ok(next) => next,
            Err(_) => return false,
        };
        let n = state_weighted_norm(&s, params);
        if !n.is_finite() || n > GROWTH_LIMIT * norm0 {
            return false;
        }
    }
    true
}

/// Bisects the largest stable explicit-RK4 step for the 200-step linear run
/// at one eps.
pub fn explicit_stability_threshold(
    template: &PhysicalParams,
    grid_: &Grid,
    eps: f64,
    amplitudes: Amplitudes,
) -> Result<f64, ExperimentError> {
    let params = params_for_eps(template, eps)?;
    let initial = make_initial_data(&params, grid_, amplitudes);
    let scale = eps * grid_.dx2();
    let mut lo = 0.05 * scale;
    let mut hi = 8.0 * scale;
    let mut guard = 0;
    while !rk4_linear_stable(&initial, &params, grid_, lo) && guard < 8 {
        lo *= 0.5;
        guard += 1;
    }
    guard = 0;
    while rk4_linear_stable(&initial, &params, grid_, hi) && guard < 8 {
        hi *= 2.0;
        guard += 1;
    }
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        if rk4_linear_stable(&initial, &params, grid_, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Measures the largest stable explicit step per eps by bisection, and the
/// IMEX behaviour at dt = 10 * eps * dx2 on the same linear runs.
pub fn stiffness_benchmark(
    template: &PhysicalParams,
    grid_: &Grid,
    eps_list: &[f64],
    amplitudes: Amplitudes,
) -> Result<StiffnessTable, ExperimentError> {
    validate_eps_list(eps_list, 3)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let params = params_for_eps(template, eps)?;
        let initial = make_initial_data(&params, grid_, amplitudes);
        let scale = eps * grid_.dx2();
        let dt_star = explicit_stability_threshold(template, grid_, eps, amplitudes)?;

        // IMEX at ten times the acoustic scale.
        let imex_dt = 10.0 * scale;
        let base = crate::baseflow::build_base_flow(&params, grid_)
            .map_err(SolverError::from)?;
        let opts = TendencyOpts {
            dealias: true,
            linearized: true,
        };
        let mut stepper = ImexStepper::new(grid_, &base, &params, imex_dt, opts)?;
        let norm0 = state_weighted_norm(&initial, &params);
        let mut s = initial.clone();
        let mut imex_stable = true;
        let started = Instant::now();
        for _ in 0..BENCH_STEPS {
            s = match stepper.step(&s) {
                Ok(next) => next,
                Err(_) => {
                    imex_stable = false;
                    break;
                }
            };
            let n = state_weighted_norm(&s, &params);
            if !n.is_finite() || n > GROWTH_LIMIT * norm0 {
                imex_stable = false;
                break;
            }
        }
        let imex_seconds_per_step = started.elapsed().as_secs_f64() / BENCH_STEPS as f64;
        rows.push(StiffnessRow {
            eps: params.eps,
            dt_star,
            imex_dt,
            imex_stable,
            imex_seconds_per_step,
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.dt_star)).collect();
    let exponent = fit_loglog_slope(&pts)?;
    Ok(StiffnessTable { rows, exponent })
}

pub const STIFFNESS_CSV_HEADER: &str = "eps,dt_star,imex_dt,imex_stable,imex_s_per_step";

pub fn write_stiffness_csv(table: &StiffnessTable, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{STIFFNESS_CSV_HEADER}")?;
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.eps, r.dt_star, r.imex_dt, r.imex_stable, r.imex_seconds_per_step
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_fit_recovers_exact_powers() {
        let fit = fit_loglog_slope(&[(1.0, 1.0), (0.5, 0.25), (0.25, 0.0625)]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12, "slope={}", fit.slope);
        assert!(fit.max_residual < 1e-12);
    }

    #[test]
    fn loglog_fit_constant_has_zero_slope() {
        let fit = fit_loglog_slope(&[(1.0, 3.0), (0.5, 3.0), (0.25, 3.0)]).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn loglog_fit_linear_two_points() {
        let fit = fit_loglog_slope(&[(2.0, 6.0), (1.0, 3.0)]).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
        assert!(fit.max_residual < 1e-12);
    }

    #[test]
    fn loglog_fit_rejects_bad_input() {
        assert!(matches!(
            fit_loglog_slope(&[(1.0, 1.0)]),
            Err(ExperimentError::TooFewPoints { .. })
        ));
        assert!(matches!(
            fit_loglog_slope(&[(1.0, 1.0), (0.5, -2.0)]),
            Err(ExperimentError::NonPositiveData)
        ));
    }

    #[test]
    fn eps_list_validation() {
        let p = crate::params::build_params(1.4, 0.1, 1.0, 0.72, 1.0 / 3.0, 1.0).unwrap();
        let g = Grid::new(8, 8).unwrap();
        let cfg = SolverConfig {
            t_end: 0.0,
            ..SolverConfig::default()
        };
        // chi != 1 rejected
        let p_chi = crate::params::build_params(1.4, 0.1, 1.0, 0.72, 1.0 / 3.0, 1.01).unwrap();
        assert!(matches!(
            epsilon_sweep(&[0.2, 0.1, 0.05], &p_chi, &g, &cfg, Amplitudes::unit(), false),
            Err(ExperimentError::ChiNotOne(_))
        ));
        assert!(matches!(
            epsilon_sweep(&[0.2, 0.1], &p, &g, &cfg, Amplitudes::unit(), false),
            Err(ExperimentError::TooFewPoints { .. })
        ));
        assert!(matches!(
            epsilon_sweep(&[0.1, 0.2, 0.05], &p, &g, &cfg, Amplitudes::unit(), false),
            Err(ExperimentError::BadEpsList)
        ));
        assert!(matches!(
            epsilon_sweep(&[0.7, 0.2, 0.1], &p, &g, &cfg, Amplitudes::unit(), false),
            Err(ExperimentError::BadEpsList)
        ));
    }

    #[test]
    fn zero_amplitude_sweep_reduces_to_base_gaps() {
        // t_end = 0: sups are the initial gaps; rho/temp slopes are the pure
        // eps^2 base-profile scaling, u-gap is identically zero.
        let p = crate::params::build_params(1.4, 0.1, 1.0, 0.72, 1.0 / 3.0, 1.0).unwrap();
        let g = Grid::new(16, 16).unwrap();
        let cfg = SolverConfig {
            t_end: 0.0,
            ..SolverConfig::default()
        };
        let table = epsilon_sweep(
            &[0.2, 0.1, 0.05],
            &p,
            &g,
            &cfg,
            Amplitudes::new(0.0, 0.0, 0.0),
            false,
        )
        .unwrap();
        assert!(table.slope_u.is_none());
        for r in &table.rows {
            assert_eq!(r.sup_gap_u, 0.0);
        }
        let st = table.slope_temp.unwrap();
        assert!((st.slope - 2.0).abs() < 1e-10, "temp slope {}", st.slope);
        let sr = table.slope_rho.unwrap();
        assert!((sr.slope - 2.0).abs() < 1e-2, "rho slope {}", sr.slope);
    }
}
