//! Crank-Nicolson / Adams-Bashforth-2 IMEX stepping.
//!
//! The implicit operator block-diagonalizes over x1 Fourier modes; each mode
//! couples the unknowns (phi, psi1, psi2, theta) along x2 through a 4x4
//! block-tridiagonal system. Dirichlet rows for psi and theta are eliminated
//! (identity rows with zero right-hand side), and the continuity row keeps
//! the telescoping flux closure at the walls.

use num_complex::Complex64;

use crate::baseflow::BaseFlow;
use crate::grid::{Grid, ScalarField};
use crate::params::PhysicalParams;
use crate::solver::blocktri::{BlockTriLu, BlockTriMatrix, BS};
use crate::solver::tendency::{apply_implicit, tendency, TendencyOpts};
use crate::solver::{PerturbationState, SolverError, Tendency};

pub struct ImexStepper {
    grid: Grid,
    base: BaseFlow,
    params: PhysicalParams,
    opts: TendencyOpts,
    dt: f64,
    lu_boot: Vec<BlockTriLu>,
    lu_cn: Vec<BlockTriLu>,
    prev_explicit: Option<Tendency>,
}

/// Implicit operator blocks for one Fourier mode.
fn mode_operator(
    k_mode: usize,
    grid: &Grid,
    base: &BaseFlow,
    params: &PhysicalParams,
) -> BlockTriMatrix {
    let n2 = grid.n2();
    let n = n2 + 1;
    let h = grid.dx2();
    let nyquist = grid.n1() / 2;
    // First-derivative factor ik; zero at the Nyquist mode (the ddx1
    // convention). The spectral second derivative keeps -k^2 everywhere.
    let ik = if k_mode == nyquist {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, k_mode as f64)
    };
    let k2 = (k_mode * k_mode) as f64;
    let inv_eps2 = params.inv_eps2();
    let mu = params.mu;
    let mu_b = params.mu + params.mu_prime;
    let gm1 = params.gamma - 1.0;
    let kappa = params.kappa;
    let rho = &base.rho_t;
    let temp = &base.temp_t;

    let mut m = BlockTriMatrix::zeros(n);
    let re = |x: f64| Complex64::new(x, 0.0);

    let u1 = &base.u1_t;
    let du1 = &base.du1_t;
    let dtemp = &base.dtemp_t;

    for j in 0..n {
        let irho = 1.0 / rho[j];
        // Continuity: -[ik rho~ psi1 + d2_flux(rho~ psi2) + ik x2 phi].
        m.b[j][0][1] = -ik * rho[j];
        m.b[j][0][0] += -ik * u1[j];
        if j == 0 {
            m.c[j][0][2] += re(-rho[1] / h);
            m.b[j][0][2] += re(rho[0] / h);
        } else if j == n2 {
            m.b[j][0][2] += re(-rho[n2] / h);
            m.a[j][0][2] += re(rho[n2 - 1] / h);
        } else {
            m.c[j][0][2] += re(-rho[j + 1] / (2.0 * h));
            m.a[j][0][2] += re(rho[j - 1] / (2.0 * h));
        }
        if j == 0 || j == n2 {
            // psi1, psi2, theta rows stay zero: Dirichlet elimination.
            continue;
        }

        // Momentum x1: [-eps^-2 ik (T~ phi + rho~ theta) + mu lap psi1
        //               + (mu+mu') ik (ik psi1 + D2 psi2)] / rho~
        //              - ik x2 psi1 - du1~ psi2.
        m.b[j][1][0] += -ik * (inv_eps2 * temp[j] * irho);
        m.b[j][1][3] += -ik * inv_eps2;
        m.b[j][1][1] += re(mu * (-k2 - 2.0 / (h * h)) * irho) + ik * ik * (mu_b * irho);
        m.b[j][1][1] += -ik * u1[j];
        m.b[j][1][2] += re(-du1[j]);
        m.a[j][1][1] += re(mu / (h * h) * irho);
        m.c[j][1][1] += re(mu / (h * h) * irho);
        m.c[j][1][2] += ik * (mu_b / (2.0 * h) * irho);
        m.a[j][1][2] += -ik * (mu_b / (2.0 * h) * irho);

        // Momentum x2: [-eps^-2 D2(T~ phi + rho~ theta) + mu lap psi2
        //               + (mu+mu')(ik D2 psi1 + D'' psi2)] / rho~ - ik x2 psi2.
        m.c[j][2][0] += re(-inv_eps2 * temp[j + 1] / (2.0 * h) * irho);
        m.a[j][2][0] += re(inv_eps2 * temp[j - 1] / (2.0 * h) * irho);
        m.c[j][2][3] += re(-inv_eps2 * rho[j + 1] / (2.0 * h) * irho);
        m.a[j][2][3] += re(inv_eps2 * rho[j - 1] / (2.0 * h) * irho);
        m.b[j][2][2] += re((mu * (-k2 - 2.0 / (h * h)) - 2.0 * mu_b / (h * h)) * irho);
        m.b[j][2][2] += -ik * u1[j];
        m.a[j][2][2] += re((mu + mu_b) / (h * h) * irho);
        m.c[j][2][2] += re((mu + mu_b) / (h * h) * irho);
        m.c[j][2][1] += ik * (mu_b / (2.0 * h) * irho);
        m.a[j][2][1] += -ik * (mu_b / (2.0 * h) * irho);

        // Energy: -(gamma-1) T~ (ik psi1 + D2 psi2)
        //         + (gamma-1) kappa lap theta / rho~
        //         - ik x2 theta - dT~ psi2
        //         + (gamma-1) eps^2 2 mu du1~ (D2 psi1 + ik psi2) / rho~.
        m.b[j][3][1] += -ik * (gm1 * temp[j]);
        m.c[j][3][2] += re(-gm1 * temp[j] / (2.0 * h));
        m.a[j][3][2] += re(gm1 * temp[j] / (2.0 * h));
        m.b[j][3][3] += re(gm1 * kappa * (-k2 - 2.0 / (h * h)) * irho);
        m.b[j][3][3] += -ik * u1[j];
        m.b[j][3][2] += re(-dtemp[j]);
        m.a[j][3][3] += re(gm1 * kappa / (h * h) * irho);
        m.c[j][3][3] += re(gm1 * kappa / (h * h) * irho);
        let heat = gm1 * params.eps2() * 2.0 * mu * du1[j] * irho;
        m.c[j][3][1] += re(heat / (2.0 * h));
        m.a[j][3][1] += re(-heat / (2.0 * h));
        m.b[j][3][2] += ik * heat;
    }
    m
}

/// M = I - alpha L for one mode.
fn cn_matrix(l: &BlockTriMatrix, alpha: f64) -> BlockTriMatrix {
    let mut m = BlockTriMatrix::zeros(l.n);
    let a = Complex64::new(alpha, 0.0);
    for j in 0..l.n {
        for r in 0..BS {
            for c in 0..BS {
                m.a[j][r][c] = -a * l.a[j][r][c];
                m.b[j][r][c] = -a * l.b[j][r][c];
                m.c[j][r][c] = -a * l.c[j][r][c];
            }
            m.b[j][r][r] += Complex64::new(1.0, 0.0);
        }
    }
    m
}

fn factor_all(
    grid: &Grid,
    base: &BaseFlow,
    params: &PhysicalParams,
    alpha: f64,
) -> Result<Vec<BlockTriLu>, SolverError> {
    (0..=grid.n1() / 2)
        .map(|m| {
            let l = mode_operator(m, grid, base, params);
            BlockTriLu::factor(&cn_matrix(&l, alpha))
                .map_err(|node| SolverError::SingularBlock { mode: m, node })
        })
        .collect()
}

fn forward_line_fft(grid: &Grid, fields: [&ScalarField; 4]) -> Vec<Vec<Complex64>> {
    let n1 = grid.n1();
    let n2 = grid.n2();
    let stride = n2 + 1;
    let fft = grid.fft_forward().clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex64::new(0.0, 0.0); n1];
    fields
        .iter()
        .map(|f| {
            let mut spec = vec![Complex64::new(0.0, 0.0); n1 * stride];
            for j in 0..stride {
                for i in 0..n1 {
                    line[i] = Complex64::new(f.values()[i * stride + j], 0.0);
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for m in 0..n1 {
                    spec[j * n1 + m] = line[m];
                }
            }
            spec
        })
        .collect()
}

fn inverse_line_fft(grid: &Grid, spec: &[Vec<Complex64>]) -> Vec<ScalarField> {
    let n1 = grid.n1();
    let n2 = grid.n2();
    let stride = n2 + 1;
    let inv = grid.fft_inverse().clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); inv.get_inplace_scratch_len()];
    let mut line = vec![Complex64::new(0.0, 0.0); n1];
    let scale = 1.0 / n1 as f64;
    spec.iter()
        .map(|s| {
            let mut f = ScalarField::zeros(grid);
            for j in 0..stride {
                line.copy_from_slice(&s[j * n1..(j + 1) * n1]);
                inv.process_with_scratch(&mut line, &mut scratch);
                for i in 0..n1 {
                    f.values_mut()[i * stride + j] = line[i].re * scale;
                }
            }
            f
        })
        .collect()
}

impl ImexStepper {
    pub fn new(
        grid: &Grid,
        base: &BaseFlow,
        params: &PhysicalParams,
        dt: f64,
        opts: TendencyOpts,
    ) -> Result<Self, SolverError> {
        if !(dt > 0.0) {
            return Err(SolverError::BadConfig("dt must be positive"));
        }
        Ok(ImexStepper {
            grid: grid.clone(),
            base: base.clone(),
            params: *params,
            opts,
            dt,
            lu_boot: factor_all(grid, base, params, dt)?,
            lu_cn: factor_all(grid, base, params, dt / 2.0)?,
            prev_explicit: None,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Forgets the multistep history; the next step bootstraps again.
    pub fn reset_history(&mut self) {
        self.prev_explicit = None;
    }

    /// Advances one step. The first call bootstraps the Adams-Bashforth
    /// history with an implicit-Euler / explicit-Euler predictor.
    pub fn step(&mut self, state: &PerturbationState) -> Result<PerturbationState, SolverError> {
        let g = tendency(state, &self.base, &self.params, &self.grid, &self.opts)?;
        let lx = apply_implicit(state, &self.base, &self.params, &self.grid);
        let mut e = Tendency {
            dphi: g.dphi.sub(&lx.dphi),
            dpsi1: g.dpsi1.sub(&lx.dpsi1),
            dpsi2: g.dpsi2.sub(&lx.dpsi2),
            dtheta: g.dtheta.sub(&lx.dtheta),
        };
        e.pin_walls();

        let dt = self.dt;
        let bootstrap = self.prev_explicit.is_none();
        let mut rhs: Vec<ScalarField> = Vec::with_capacity(4);
        {
            let fields = [&state.phi, &state.psi1, &state.psi2, &state.theta];
            let lvals = [&lx.dphi, &lx.dpsi1, &lx.dpsi2, &lx.dtheta];
            let evals = [&e.dphi, &e.dpsi1, &e.dpsi2, &e.dtheta];
            for c in 0..4 {
                let mut r = (*fields[c]).clone();
                if bootstrap {
                    r.axpy(dt, evals[c]);
                } else {
                    let prev = self.prev_explicit.as_ref().unwrap();
                    let pvals = [&prev.dphi, &prev.dpsi1, &prev.dpsi2, &prev.dtheta];
                    r.axpy(dt / 2.0, lvals[c]);
                    r.axpy(1.5 * dt, evals[c]);
                    r.axpy(-0.5 * dt, pvals[c]);
                }
                rhs.push(r);
            }
        }
        // Dirichlet right-hand sides.
        let n2 = self.grid.n2();
        for r in rhs.iter_mut().skip(1) {
            for i in 0..self.grid.n1() {
                r.set(i, 0, 0.0);
                r.set(i, n2, 0.0);
            }
        }

        let lus = if bootstrap { &self.lu_boot } else { &self.lu_cn };
        let spec = forward_line_fft(&self.grid, [&rhs[0], &rhs[1], &rhs[2], &rhs[3]]);
        let n1 = self.grid.n1();
        let stride = n2 + 1;
        let cut = self.grid.dealias_cut();
        let mut out: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n1 * stride]; 4];
        let mut vec_rhs = vec![Complex64::new(0.0, 0.0); stride * BS];
        for m in 0..=n1 / 2 {
            if self.opts.dealias && (m as i64) > cut {
                continue; // bins stay zero
            }
            for j in 0..stride {
                for c in 0..4 {
                    vec_rhs[j * BS + c] = spec[c][j * n1 + m];
                }
            }
            lus[m].solve(&mut vec_rhs);
            for j in 0..stride {
                for c in 0..4 {
                    let v = vec_rhs[j * BS + c];
                    out[c][j * n1 + m] = v;
                    if m != 0 && m != n1 / 2 {
                        out[c][j * n1 + (n1 - m)] = v.conj();
                    }
                }
            }
        }
        let mut fields = inverse_line_fft(&self.grid, &out);
        // Dirichlet rows are eliminated, not penalized: snap them exactly.
        for f in fields.iter_mut().skip(1) {
            for i in 0..self.grid.n1() {
                f.set(i, 0, 0.0);
                f.set(i, n2, 0.0);
            }
        }
        let theta = fields.pop().unwrap();
        let psi2 = fields.pop().unwrap();
        let psi1 = fields.pop().unwrap();
        let phi = fields.pop().unwrap();
        let next = PerturbationState {
            phi,
            psi1,
            psi2,
            theta,
            time: state.time + dt,
        };
        // Positivity after the step.
        for i in 0..self.grid.n1() {
            for j in 0..=n2 {
                let rho = self.base.rho_t[j] + next.phi.get(i, j);
                if rho <= 0.0 {
                    return Err(SolverError::Positivity {
                        field: "density",
                        i,
                        j,
                        value: rho,
                    });
                }
                let t = self.base.temp_t[j] + next.theta.get(i, j);
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
        self.prev_explicit = Some(e);
        Ok(next)
    }
}

/// One bootstrapped IMEX step (implicit-Euler / explicit-Euler predictor).
pub fn step_imex(
    state: &PerturbationState,
    base: &BaseFlow,
    params: &PhysicalParams,
    grid: &Grid,
    dt: f64,
    opts: TendencyOpts,
) -> Result<PerturbationState, SolverError> {
    let mut stepper = ImexStepper::new(grid, base, params, dt, opts)?;
    stepper.step(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseflow::build_base_flow;
    use crate::grid;
    use crate::params::build_params;

    #[test]
    fn zero_state_is_a_fixed_point_of_the_imex_step() {
        let p = build_params(1.4, 0.1, 1.0, 0.72, 1.0 / 3.0, 1.0).unwrap();
        let g = Grid::new(16, 16).unwrap();
        let b = build_base_flow(&p, &g).unwrap();
        let mut stepper = ImexStepper::new(&g, &b, &p, 1e-2, TendencyOpts::default()).unwrap();
        let mut s = PerturbationState::zeros(&g);
        for _ in 0..20 {
            s = stepper.step(&s).unwrap();
        }
        for f in [&s.phi, &s.psi1, &s.psi2, &s.theta] {
            assert!(grid::linf_norm(f) <= 1e-13, "norm={:e}", grid::linf_norm(f));
        }
        assert!((s.time - 0.2).abs() < 1e-12);
    }

    #[test]
    fn implicit_matrix_matches_physical_apply() {
        // L applied through the mode matrices must agree with apply_implicit.
        let p = build_params(1.4, 0.2, 2.0, 0.72, 1.0 / 3.0, 0.97).unwrap();
        let g = Grid::new(16, 16).unwrap();
        let b = build_base_flow(&p, &g).unwrap();
        let mut s = PerturbationState::zeros(&g);
        s.phi = ScalarField::from_fn(&g, |x1, x2| (2.0 * x1).cos() * (0.3 + x2 * x2));
        s.psi1 = ScalarField::from_fn(&g, |x1, x2| {
            x1.sin() * grid::sin_pi(x2) * grid::sin_pi(x2)
        });
        s.psi2 = ScalarField::from_fn(&g, |x1, x2| (3.0 * x1).cos() * grid::sin_pi(x2).powi(3));
        s.theta = ScalarField::from_fn(&g, |x1, x2| x1.cos() * grid::sin_pi(x2));
        let want = apply_implicit(&s, &b, &p, &g);

        let spec = forward_line_fft(&g, [&s.phi, &s.psi1, &s.psi2, &s.theta]);
        let n1 = g.n1();
        let stride = g.n2() + 1;
        let mut out: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n1 * stride]; 4];
        for m in 0..=n1 / 2 {
            let l = mode_operator(m, &g, &b, &p);
            // y = L x per mode
            let mut x = vec![Complex64::new(0.0, 0.0); stride * BS];
            for j in 0..stride {
                for c in 0..4 {
                    x[j * BS + c] = spec[c][j * n1 + m];
                }
            }
            for j in 0..stride {
                for r in 0..4 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for c in 0..4 {
                        acc += l.b[j][r][c] * x[j * BS + c];
                        if j > 0 {
                            acc += l.a[j][r][c] * x[(j - 1) * BS + c];
                        }
                        if j + 1 < stride {
                            acc += l.c[j][r][c] * x[(j + 1) * BS + c];
                        }
                    }
                    out[r][j * n1 + m] = acc;
                    if m != 0 && m != n1 / 2 {
                        out[r][j * n1 + (n1 - m)] = acc.conj();
                    }
                }
            }
        }
        let got = inverse_line_fft(&g, &out);
        for (gf, wf) in got.iter().zip([&want.dphi, &want.dpsi1, &want.dpsi2, &want.dtheta]) {
            let scale = grid::linf_norm(wf).max(1.0);
            let err = grid::linf_norm(&gf.sub(wf));
            assert!(err < 1e-9 * scale, "err={err:e} scale={scale:e}");
        }
    }
}
