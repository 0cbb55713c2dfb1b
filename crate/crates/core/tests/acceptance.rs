//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Defaults throughout: grid 64x64, gamma = 1.4, Pr = 0.72, nu'/nu = 1/3,
//! Re = 1, chi = 1, eps = 0.1 unless stated.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::sync::LazyLock;

use couette::baseflow::{build_base_flow, steady_residual};
use couette::checkpoint::{read_checkpoint, write_checkpoint};
use couette::diagnostics::relative_entropy;
use couette::experiments::{
    decay_study, epsilon_sweep, stiffness_benchmark, DecaySummary, StiffnessTable, SweepTable,
};
use couette::grid::{self, Grid, ScalarField};
use couette::params::{build_params, PhysicalParams};
use couette::solver::{
    compatibility_wall_report, make_initial_data, step_explicit_rk4, step_imex, Amplitudes,
    ImexStepper, PerturbationState, SolverConfig, TendencyOpts,
};

const SWEEP_EPS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

fn default_params() -> PhysicalParams {
    let gamma: f64 = 1.4;
    build_params(gamma, 0.1 / gamma.sqrt(), 1.0, 0.72, 1.0 / 3.0, 1.0).unwrap()
}

fn params_eps_re(eps: f64, re: f64) -> PhysicalParams {
    let gamma: f64 = 1.4;
    build_params(gamma, eps / gamma.sqrt(), re, 0.72, 1.0 / 3.0, 1.0).unwrap()
}

fn acceptance_grid() -> Grid {
    Grid::new(64, 64).unwrap()
}

struct DecayArtifacts {
    summary: DecaySummary,
}

/// The criterion-3/6 decay run: eps = 0.1, amplitudes 1, t_end = 5, dt = 2e-3.
static DECAY: LazyLock<DecayArtifacts> = LazyLock::new(|| {
    let params = default_params();
    let grid = acceptance_grid();
    let config = SolverConfig::default();
    let summary = decay_study(&params, &grid, &config, Amplitudes::unit())
        .expect("acceptance decay run must complete");
    DecayArtifacts { summary }
});

/// The criterion-7 sweep: eps in {0.2, 0.1, 0.05, 0.025} on the shared grid.
static SWEEP: LazyLock<SweepTable> = LazyLock::new(|| {
    let template = default_params();
    let grid = acceptance_grid();
    let config = SolverConfig::default();
    epsilon_sweep(
        &SWEEP_EPS,
        &template,
        &grid,
        &config,
        Amplitudes::unit(),
        false,
    )
    .expect("acceptance sweep must complete")
});

/// The criterion-8 benchmark: linear 200-step runs at Re = 300 on 32x32,
/// where the acoustic limit, not the viscous one, binds the explicit step.
static STIFFNESS: LazyLock<StiffnessTable> = LazyLock::new(|| {
    let template = params_eps_re(0.1, 300.0);
    let grid = Grid::new(32, 32).unwrap();
    stiffness_benchmark(&template, &grid, &SWEEP_EPS, Amplitudes::unit())
        .expect("stiffness benchmark must complete")
});

#[test]
fn criterion_01_steady_state_exactness() {
    let params = default_params();
    let mut worst: f64 = 0.0;
    for n2 in [16usize, 64] {
        let grid = Grid::new(64, n2).unwrap();
        let base = build_base_flow(&params, &grid).unwrap();
        let r = steady_residual(&base, &params, &grid);
        worst = worst.max(r.max());
        assert!(
            r.max() <= 1e-11,
            "n2={n2}: residual {:.3e} exceeds 1e-11",
            r.max()
        );
    }
    // Zero perturbation preserved by 1000 imex steps.
    let grid = acceptance_grid();
    let base = build_base_flow(&params, &grid).unwrap();
    let mut stepper =
        ImexStepper::new(&grid, &base, &params, 2e-3, TendencyOpts::default()).unwrap();
    let mut state = PerturbationState::zeros(&grid);
    for _ in 0..1000 {
        state = stepper.step(&state).unwrap();
    }
    let final_norm = grid::linf_norm(&state.phi)
        .max(grid::linf_norm(&state.psi1))
        .max(grid::linf_norm(&state.psi2))
        .max(grid::linf_norm(&state.theta));
    assert!(final_norm <= 1e-10, "zero state drifted to {final_norm:e}");
    println!(
        "criterion 1: PASS - steady residual max {worst:.3e} (<= 1e-11), zero state after 1000 imex steps {final_norm:.3e} (<= 1e-10)"
    );
}

#[test]
fn criterion_02_operator_order() {
    // ddx2 two-grid error ratio on sin(pi x2).
    let derr = |n2: usize| {
        let g = Grid::new(8, n2).unwrap();
        let f = ScalarField::from_fn(&g, |_, x2| grid::sin_pi(x2));
        let want = ScalarField::from_fn(&g, |_, x2| std::f64::consts::PI * grid::cos_pi(x2));
        grid::linf_norm(&grid::ddx2(&f).sub(&want))
    };
    let ratio = derr(32) / derr(64);
    assert!(
        (3.5..=4.5).contains(&ratio),
        "ddx2 two-grid ratio {ratio} outside 4 +- 0.5"
    );

    // ddx1 exact on resolved modes.
    let g = Grid::new(64, 16).unwrap();
    let f = ScalarField::from_fn(&g, |x1, x2| (3.0 * x1).sin() * (1.0 + x2));
    let want = ScalarField::from_fn(&g, |x1, x2| 3.0 * (3.0 * x1).cos() * (1.0 + x2));
    let err = grid::linf_norm(&grid::ddx1(&f).sub(&want)) / grid::linf_norm(&want);
    assert!(err <= 1e-12, "ddx1 error {err:e}");

    // Integration-by-parts defect decays at order 2 (one factor vanishes at
    // the walls, so the analytic boundary term is zero and only the stencil
    // truncation remains; with both factors vanishing the discrete defect is
    // exactly zero by telescoping).
    let defect = |n2: usize| {
        let g = Grid::new(8, n2).unwrap();
        let f = ScalarField::from_fn(&g, |_, x2| grid::sin_pi(x2) * (0.7 + x2));
        let h = ScalarField::from_fn(&g, |_, x2| (1.0 + x2).exp());
        (grid::integrate(&f.mul(&grid::ddx2(&h))) + grid::integrate(&h.mul(&grid::ddx2(&f))))
            .abs()
    };
    let order = (defect(32) / defect(64)).log2();
    assert!(
        (1.5..=2.5).contains(&order),
        "integration-by-parts defect order {order} outside 2 +- 0.5"
    );
    println!(
        "criterion 2: PASS - ddx2 ratio {ratio:.3}, ddx1 error {err:.2e}, ibp defect order {order:.3}"
    );
}

#[test]
fn criterion_03_mass_conservation() {
    let reports = &DECAY.summary.reports;
    let phi0 = reports[0].l2_phi;
    let drift = reports
        .iter()
        .map(|r| (r.mass - reports[0].mass).abs())
        .fold(0.0f64, f64::max);
    assert!(
        drift <= 1e-6 * phi0,
        "mass drift {drift:.3e} exceeds 1e-6 * |phi0| = {:.3e}",
        1e-6 * phi0
    );
    println!(
        "criterion 3: PASS - max mass drift {drift:.3e} vs budget {:.3e}",
        1e-6 * phi0
    );
}

#[test]
fn criterion_04_compatibility_construction() {
    let params = default_params();
    let grid = acceptance_grid();
    let r = compatibility_wall_report(&params, &grid, Amplitudes::unit()).unwrap();
    assert!(r.interior_max > 0.0);
    assert!(
        r.wall_max <= 1e-10 * r.interior_max,
        "wall trace {:.3e} exceeds 1e-10 x interior {:.3e}",
        r.wall_max,
        r.interior_max
    );
    println!(
        "criterion 4: PASS - analytic wall trace {:.3e} vs interior {:.3e} (discrete stencils give {:.3e}/{:.3e})",
        r.wall_max, r.interior_max, r.discrete_wall_max, r.discrete_interior_max
    );
}

#[test]
fn criterion_05_entropy_comparability() {
    let params = default_params();
    let grid = Grid::new(32, 32).unwrap();
    let base = build_base_flow(&params, &grid).unwrap();
    let l2sq = |f: &ScalarField| grid::integrate(&f.mul(f));
    let ratio_at = |amp: f64| {
        let s = make_initial_data(&params, &grid, Amplitudes::unit().scaled(amp));
        let eta = relative_entropy(&s, &base, &params, &grid).unwrap();
        let q = 0.5 * l2sq(&s.phi)
            + 0.5 * params.eps2() * (l2sq(&s.psi1) + l2sq(&s.psi2))
            + 0.5 / (params.gamma - 1.0) * l2sq(&s.theta);
        eta / q
    };
    let small = ratio_at(1e-3);
    assert!(
        (small - 1.0).abs() <= 0.05,
        "amplitude 1e-3: eta/Q = {small}"
    );
    let medium = ratio_at(1e-2);
    assert!(
        (0.5..=2.0).contains(&medium),
        "amplitude 1e-2: eta/Q = {medium}"
    );
    println!("criterion 5: PASS - eta/Q = {small:.4} at 1e-3, {medium:.4} at 1e-2");
}

#[test]
fn criterion_06_nonlinear_stability_decay() {
    let s = &DECAY.summary;
    let ratio = s.final_weighted / s.initial_weighted;
    assert!(ratio <= 0.1, "weighted norm ratio {ratio}");
    assert!(
        s.monotonicity_after_10 >= 0.98,
        "entropy monotonicity {} after 10th record",
        s.monotonicity_after_10
    );
    let linf_ratio = s.linf_final / s.linf_initial;
    assert!(linf_ratio <= 0.05, "Linf ratio {linf_ratio}");
    println!(
        "criterion 6: PASS - weighted decay {ratio:.3e}, entropy monotonicity {:.4}, Linf ratio {linf_ratio:.3e}",
        s.monotonicity_after_10
    );
}

#[test]
fn criterion_07_low_mach_convergence() {
    let table = &SWEEP;
    let rho = table.slope_rho.expect("rho gaps positive");
    let u = table.slope_u.expect("u gaps positive");
    let temp = table.slope_temp.expect("temp gaps positive");
    for (name, fit, lo, hi) in [
        ("rho", &rho, 1.7, 2.3),
        ("temp", &temp, 1.7, 2.3),
        ("u", &u, 0.7, 1.3),
    ] {
        assert!(
            fit.slope >= lo && fit.slope <= hi,
            "slope_{name} = {} outside [{lo}, {hi}]",
            fit.slope
        );
        assert!(
            fit.max_residual <= 0.15,
            "slope_{name} residual {} exceeds 0.15",
            fit.max_residual
        );
    }
    println!(
        "criterion 7: PASS - slope_rho {:.4}, slope_u {:.4}, slope_temp {:.4}, max residual {:.2e}",
        rho.slope,
        u.slope,
        temp.slope,
        rho.max_residual.max(u.max_residual).max(temp.max_residual)
    );
}

#[test]
fn criterion_08_eps_uniform_integrator_stability() {
    let table = &STIFFNESS;
    for row in &table.rows {
        assert!(
            row.imex_stable,
            "imex unstable at eps = {} with dt = 10*eps*dx2 = {:.3e}",
            row.eps, row.imex_dt
        );
    }
    let exp = table.exponent.slope;
    assert!(
        (0.8..=1.2).contains(&exp),
        "explicit dt* exponent {exp} outside 1 +- 0.2"
    );
    println!(
        "criterion 8: PASS - imex stable at dt = 10*eps*dx2 for all sweep eps, explicit dt* exponent {exp:.4}"
    );
}

#[test]
fn criterion_09_cross_integrator_agreement() {
    let params = default_params();
    let grid = Grid::new(32, 32).unwrap();
    let base = build_base_flow(&params, &grid).unwrap();
    let initial = make_initial_data(&params, &grid, Amplitudes::unit());
    let opts = TendencyOpts::default();
    let diff = |dt: f64| {
        let a = step_imex(&initial, &base, &params, &grid, dt, opts).unwrap();
        let b = step_explicit_rk4(&initial, &base, &params, &grid, dt, &opts, 0.5, 0.2).unwrap();
        (grid::l2_norm(&a.phi.sub(&b.phi)).powi(2)
            + grid::l2_norm(&a.psi1.sub(&b.psi1)).powi(2)
            + grid::l2_norm(&a.psi2.sub(&b.psi2)).powi(2)
            + grid::l2_norm(&a.theta.sub(&b.theta)).powi(2))
        .sqrt()
    };
    let dt0 = 1.6e-4; // under both CFL bounds on this grid
    let (d0, d1, d2) = (diff(dt0), diff(dt0 / 2.0), diff(dt0 / 4.0));
    let order1 = (d0 / d1).log2();
    let order2 = (d1 / d2).log2();
    assert!(
        order1 >= 1.8 && order2 >= 1.8,
        "one-step difference orders {order1:.3}, {order2:.3} below 1.8"
    );
    println!(
        "criterion 9: PASS - one-step imex-vs-rk4 difference orders {order1:.3}, {order2:.3} under dt-halving"
    );
}

#[test]
fn criterion_10_determinism_and_persistence() {
    // Sweep tables bitwise reproducible: rerun and serial-vs-parallel.
    let template = default_params();
    let grid = Grid::new(32, 32).unwrap();
    let config = SolverConfig {
        t_end: 0.2,
        ..SolverConfig::default()
    };
    let eps = [0.2, 0.1, 0.05];
    let amp = Amplitudes::unit();
    let serial_a = epsilon_sweep(&eps, &template, &grid, &config, amp, false).unwrap();
    let serial_b = epsilon_sweep(&eps, &template, &grid, &config, amp, false).unwrap();
    let parallel = epsilon_sweep(&eps, &template, &grid, &config, amp, true).unwrap();
    assert!(
        serial_a.same_results(&serial_b),
        "rerun produced different table"
    );
    assert!(
        serial_a.same_results(&parallel),
        "parallel table differs from serial"
    );

    // Checkpoint round trip is bitwise exact.
    let params = default_params();
    let mut state = make_initial_data(&params, &grid, amp);
    state.time = 1.03125;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.ckpt");
    write_checkpoint(&state, &path).unwrap();
    let back = read_checkpoint(&path).unwrap();
    assert_eq!(back.time.to_bits(), state.time.to_bits());
    for (a, b) in [
        (&back.phi, &state.phi),
        (&back.psi1, &state.psi1),
        (&back.psi2, &state.psi2),
        (&back.theta, &state.theta),
    ] {
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
    println!(
        "criterion 10: PASS - sweep tables bitwise reproducible (rerun and parallel), checkpoint round-trip bitwise exact"
    );
}
