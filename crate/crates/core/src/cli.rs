//! Command-line entry points: run, sweep, baseflow, check.
//!
//! Exit status 0 on success, 1 on verification/run failure, 2 on usage or
//! configuration errors.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::baseflow::{build_base_flow, steady_residual};
use crate::checkpoint::write_checkpoint;
use crate::config::{parse_config_with_overrides, RunConfig, SweepKind};
use crate::diagnostics::{relative_entropy, write_csv};
use crate::experiments::{
    decay_study, epsilon_sweep, stiffness_benchmark, write_stiffness_csv, write_sweep_csv,
    write_sweep_summary,
};
use crate::grid::{self, Grid, ScalarField};
use crate::params::build_params;
use crate::solver::{make_initial_data, run, Amplitudes, ImexStepper, PerturbationState};

#[derive(Parser)]
#[command(name = "couette", version, about = "Compressible Couette-flow perturbation simulator")]
struct Cli {
    /// Configuration file (key = value lines); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Targeted overrides, e.g. --set solver.dt=1e-3 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one simulation: CSV diagnostics plus a terminal summary.
    Run,
    /// Execute the configured multi-run experiment (epsilon sweep or
    /// stiffness benchmark).
    Sweep,
    /// Dump the Couette base-flow profiles as CSV on stdout.
    Baseflow,
    /// Run the built-in verification suite.
    Check,
}

pub fn cli_main(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap renders its own usage/help text.
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    let text = match &cli.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read config {}: {e}", path.display());
                return 2;
            }
        },
        None => String::new(),
    };
    let (config, log) = match parse_config_with_overrides(&text, &cli.set) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    for line in &log {
        println!("config: {line}");
    }
    match cli.command {
        Command::Run => cmd_run(&config),
        Command::Sweep => cmd_sweep(&config),
        Command::Baseflow => cmd_baseflow(&config),
        Command::Check => cmd_check(&config),
    }
}

fn cmd_run(cfg: &RunConfig) -> i32 {
    let (params, grid) = match (cfg.params(), cfg.grid()) {
        (Ok(p), Ok(g)) => (p, g),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let initial = make_initial_data(&params, &grid, cfg.amplitudes);
    let mut reports = Vec::new();
    let out = match run(&cfg.solver, &params, &grid, initial, &mut |r| {
        reports.push(r.clone())
    }) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("run aborted: {e}");
            return 1;
        }
    };
    if let Err(e) = fs::create_dir_all(&cfg.output_dir) {
        eprintln!("cannot create output dir: {e}");
        return 1;
    }
    let csv_path = cfg.output_dir.join("diagnostics.csv");
    let mut buf = Vec::new();
    if write_csv(&reports, &mut buf).is_err() {
        eprintln!("cannot serialize diagnostics");
        return 1;
    }
    if let Err(e) = fs::write(&csv_path, &buf) {
        eprintln!("cannot write {}: {e}", csv_path.display());
        return 1;
    }
    let ckpt_path = cfg.output_dir.join("final.ckpt");
    if let Err(e) = write_checkpoint(&out.state, &ckpt_path) {
        eprintln!("cannot write checkpoint: {e}");
        return 1;
    }
    let first = reports.first().unwrap();
    let last = reports.last().unwrap();
    println!(
        "run complete: {} steps to t = {}, {} records -> {}",
        out.steps,
        out.state.time,
        reports.len(),
        csv_path.display()
    );
    println!(
        "  |phi| {:.6e} -> {:.6e}   |psi| {:.6e} -> {:.6e}   |theta| {:.6e} -> {:.6e}",
        first.l2_phi, last.l2_phi, first.l2_psi, last.l2_psi, first.l2_theta, last.l2_theta
    );
    println!(
        "  entropy {:.6e} -> {:.6e}   mass drift {:.3e}",
        first.entropy,
        last.entropy,
        (last.mass - first.mass).abs()
    );
    0
}

fn cmd_sweep(cfg: &RunConfig) -> i32 {
    let grid = match cfg.grid() {
        Ok(g) => g,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    if let Err(e) = fs::create_dir_all(&cfg.output_dir) {
        eprintln!("cannot create output dir: {e}");
        return 1;
    }
    match cfg.sweep_kind {
        SweepKind::Epsilon => {
            let template = match cfg.params() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return 2;
                }
            };
            let table = match epsilon_sweep(
                &cfg.eps_list,
                &template,
                &grid,
                &cfg.solver,
                cfg.amplitudes,
                cfg.sweep_parallel,
            ) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("sweep failed: {e}");
                    return 1;
                }
            };
            let mut csv = Vec::new();
            let mut summary = Vec::new();
            if write_sweep_csv(&table, &mut csv).is_err()
                || write_sweep_summary(&table, &mut summary).is_err()
            {
                eprintln!("cannot serialize sweep output");
                return 1;
            }
            let csv_path = cfg.output_dir.join("sweep.csv");
            let sum_path = cfg.output_dir.join("sweep_summary.txt");
            if fs::write(&csv_path, &csv).is_err() || fs::write(&sum_path, &summary).is_err() {
                eprintln!("cannot write sweep output files");
                return 1;
            }
            print!("{}", String::from_utf8_lossy(&summary));
            println!("sweep table -> {}", csv_path.display());
            0
        }
        SweepKind::Stiffness => {
            let template = match build_params(
                cfg.gamma,
                cfg.mach,
                cfg.stiffness_reynolds,
                cfg.prandtl,
                cfg.visc_ratio,
                cfg.chi,
            ) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return 2;
                }
            };
            let table =
                match stiffness_benchmark(&template, &grid, &cfg.eps_list, cfg.amplitudes) {
                    Ok(t) => t,
                    Err(e) => {
                        eprintln!("stiffness benchmark failed: {e}");
                        return 1;
                    }
                };
            let mut csv = Vec::new();
            if write_stiffness_csv(&table, &mut csv).is_err() {
                eprintln!("cannot serialize benchmark output");
                return 1;
            }
            let csv_path = cfg.output_dir.join("stiffness.csv");
            if fs::write(&csv_path, &csv).is_err() {
                eprintln!("cannot write {}", csv_path.display());
                return 1;
            }
            println!(
                "explicit dt* exponent in eps: {:.4} (residual {:.3e})",
                table.exponent.slope, table.exponent.max_residual
            );
            for r in &table.rows {
                println!(
                    "  eps {:.4}: dt* = {:.4e}, imex at {:.4e} stable = {} ({:.2e} s/step)",
                    r.eps, r.dt_star, r.imex_dt, r.imex_stable, r.imex_seconds_per_step
                );
            }
            println!("benchmark table -> {}", csv_path.display());
            0
        }
    }
}

fn cmd_baseflow(cfg: &RunConfig) -> i32 {
    let (params, grid) = match (cfg.params(), cfg.grid()) {
        (Ok(p), Ok(g)) => (p, g),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let base = match build_base_flow(&params, &grid) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("base flow error: {e}");
            return 1;
        }
    };
    println!("x2,rho_t,u1_t,temp_t,dtemp_t");
    for j in 0..=grid.n2() {
        println!(
            "{},{},{},{},{}",
            grid.x2(j),
            base.rho_t[j],
            base.u1_t[j],
            base.temp_t[j],
            base.dtemp_t[j]
        );
    }
    0
}

fn cmd_check(cfg: &RunConfig) -> i32 {
    let mut failures = 0usize;
    let mut item = |name: &str, pass: bool, detail: String| {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failures += 1;
        }
    };
    let params = match cfg.params() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };

    // Steady-state residuals on two resolutions.
    for n2 in [16usize, 64] {
        let g = Grid::new(64, n2).unwrap();
        let b = build_base_flow(&params, &g).unwrap();
        let r = steady_residual(&b, &params, &g);
        item(
            &format!("steady residual n2={n2}"),
            r.max() <= 1e-11,
            format!("max component {:.3e} (tolerance 1e-11)", r.max()),
        );
    }

    // Operator checks.
    {
        let g = Grid::new(32, 32).unwrap();
        let f = ScalarField::from_fn(&g, |x1, x2| x1.sin() * (1.0 + x2 * x2));
        let want = ScalarField::from_fn(&g, |x1, x2| x1.cos() * (1.0 + x2 * x2));
        let err = grid::linf_norm(&grid::ddx1(&f).sub(&want));
        item(
            "ddx1 exact on resolved modes",
            err <= 1e-12,
            format!("max error {err:.3e}"),
        );
        let derr = |n2: usize| {
            let g = Grid::new(8, n2).unwrap();
            let f = ScalarField::from_fn(&g, |_, x2| grid::sin_pi(x2));
            let want = ScalarField::from_fn(&g, |_, x2| std::f64::consts::PI * grid::cos_pi(x2));
            grid::linf_norm(&grid::ddx2(&f).sub(&want))
        };
        let ratio = derr(32) / derr(64);
        item(
            "ddx2 second order",
            (3.5..=4.5).contains(&ratio),
            format!("two-grid error ratio {ratio:.3}"),
        );
        let defect = |n2: usize| {
            let g = Grid::new(8, n2).unwrap();
            let f = ScalarField::from_fn(&g, |_, x2| grid::sin_pi(x2) * (0.7 + x2));
            let h = ScalarField::from_fn(&g, |_, x2| (1.0 + x2).exp());
            (grid::integrate(&f.mul(&grid::ddx2(&h))) + grid::integrate(&h.mul(&grid::ddx2(&f))))
                .abs()
        };
        let order = (defect(32) / defect(64)).log2();
        item(
            "integration-by-parts defect order",
            (1.5..=2.5).contains(&order),
            format!("measured order {order:.3}"),
        );
        let high = ScalarField::from_fn(&g, |x1, _| (12.0 * x1).cos());
        let killed = grid::linf_norm(&grid::dealias(&high));
        item(
            "dealias removes modes above the cutoff",
            killed <= 1e-13,
            format!("residual {killed:.3e}"),
        );
    }

    // Entropy comparability at small amplitude.
    {
        let g = Grid::new(32, 32).unwrap();
        let b = build_base_flow(&params, &g).unwrap();
        let s = make_initial_data(&params, &g, Amplitudes::unit().scaled(1e-3));
        let eta = relative_entropy(&s, &b, &params, &g).unwrap();
        let l2sq = |f: &ScalarField| grid::integrate(&f.mul(f));
        let q = 0.5 * l2sq(&s.phi)
            + 0.5 * params.eps2() * (l2sq(&s.psi1) + l2sq(&s.psi2))
            + 0.5 / (params.gamma - 1.0) * l2sq(&s.theta);
        let ratio = eta / q;
        item(
            "entropy comparability (amplitude 1e-3)",
            (ratio - 1.0).abs() <= 0.05,
            format!("eta/Q = {ratio:.4}"),
        );
    }

    // Mass-conservation smoke run.
    {
        let g = Grid::new(32, 32).unwrap();
        let mut solver = cfg.solver.clone();
        solver.t_end = 0.5;
        solver.dt = 2e-3;
        solver.scheme = crate::solver::Scheme::ImexCnab;
        match decay_study(&params, &g, &solver, Amplitudes::unit()) {
            Ok(summary) => {
                let drift = (summary.reports.last().unwrap().mass
                    - summary.reports[0].mass)
                    .abs();
                let phi0 = summary.reports[0].l2_phi;
                item(
                    "mass conservation smoke run",
                    drift <= 1e-6 * phi0,
                    format!("drift {:.3e} vs budget {:.3e}", drift, 1e-6 * phi0),
                );
            }
            Err(e) => item("mass conservation smoke run", false, format!("{e}")),
        }
    }

    // Zero perturbation is a solver fixed point.
    {
        let g = Grid::new(16, 16).unwrap();
        let b = build_base_flow(&params, &g).unwrap();
        match ImexStepper::new(&g, &b, &params, 2e-3, cfg.solver.tendency_opts()) {
            Ok(mut stepper) => {
                let mut s = PerturbationState::zeros(&g);
                let mut ok = true;
                for _ in 0..100 {
                    match stepper.step(&s) {
                        Ok(next) => s = next,
                        Err(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
                let norm = grid::linf_norm(&s.phi)
                    .max(grid::linf_norm(&s.psi1))
                    .max(grid::linf_norm(&s.psi2))
                    .max(grid::linf_norm(&s.theta));
                item(
                    "zero perturbation fixed point",
                    ok && norm <= 1e-12,
                    format!("final max norm {norm:.3e}"),
                );
            }
            Err(e) => item("zero perturbation fixed point", false, format!("{e}")),
        }
    }

    if failures == 0 {
        println!("all checks passed");
        0
    } else {
        println!("{failures} check(s) failed");
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(args: &[&str]) -> Vec<String> {
        std::iter::once("couette")
            .chain(args.iter().copied())
            .map(String::from)
            .collect()
    }

    #[test]
    fn unknown_subcommand_exits_2() {
        assert_eq!(cli_main(&argv(&["wibble"])), 2);
    }

    #[test]
    fn bad_config_key_exits_2() {
        assert_eq!(cli_main(&argv(&["run", "--set", "physics.gamma=1.0"])), 2);
    }

    #[test]
    fn baseflow_dumps_profiles() {
        assert_eq!(cli_main(&argv(&["baseflow", "--set", "grid.n2=8"])), 0);
    }

    #[test]
    fn zero_length_run_emits_single_record() {
        let dir = tempfile::tempdir().unwrap();
        let out = format!("output.dir={}", dir.path().join("o").display());
        assert_eq!(
            cli_main(&argv(&[
                "run",
                "--set",
                "solver.t_end=0",
                "--set",
                "grid.n1=16",
                "--set",
                "grid.n2=16",
                "--set",
                &out,
            ])),
            0
        );
        let csv = std::fs::read_to_string(dir.path().join("o").join("diagnostics.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2); // header + one record
    }
}
