//! Discrete right-hand sides of the perturbation system.
//!
//! Continuity is evaluated in conservative flux form -div(rho u - rho~ u~)
//! (equivalent analytically since div(rho~ u~) = 0), with the telescoping
//! x2 closure, so the discrete mass integral is conserved identically.
//! Momentum and energy are divided by rho pointwise: tendencies are for psi
//! and theta directly.

use crate::baseflow::BaseFlow;
use crate::grid::{self, Grid, ScalarField};
use crate::params::PhysicalParams;
use crate::solver::{PerturbationState, SolverError, Tendency};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TendencyOpts {
    pub dealias: bool,
    pub linearized: bool,
}

impl Default for TendencyOpts {
    fn default() -> Self {
        TendencyOpts {
            dealias: true,
            linearized: false,
        }
    }
}

fn check_positivity(
    state: &PerturbationState,
    base: &BaseFlow,
    grid: &Grid,
) -> Result<(), SolverError> {
    for i in 0..grid.n1() {
        for j in 0..=grid.n2() {
            let rho = base.rho_t[j] + state.phi.get(i, j);
            if rho <= 0.0 {
                return Err(SolverError::Positivity {
                    field: "density",
                    i,
                    j,
                    value: rho,
                });
            }
            let temp = base.temp_t[j] + state.theta.get(i, j);
            if temp <= 0.0 {
                return Err(SolverError::Positivity {
                    field: "temperature",
                    i,
                    j,
                    value: temp,
                });
            }
        }
    }
    Ok(())
}

/// Dealiased pointwise product of two perturbation fields.
fn mul_d(a: &ScalarField, b: &ScalarField, dealias: bool) -> ScalarField {
    let p = a.mul(b);
    if dealias {
        grid::dealias(&p)
    } else {
        p
    }
}

fn maybe_dealias(f: ScalarField, dealias: bool) -> ScalarField {
    if dealias {
        grid::dealias(&f)
    } else {
        f
    }
}

/// Full discrete right-hand side of the perturbation system.
pub fn tendency(
    state: &PerturbationState,
    base: &BaseFlow,
    params: &PhysicalParams,
    grid_: &Grid,
    opts: &TendencyOpts,
) -> Result<Tendency, SolverError> {
    check_positivity(state, base, grid_)?;
    if opts.linearized {
        return Ok(tendency_linear(state, base, params));
    }
    let da = opts.dealias;
    let phi = &state.phi;
    let psi1 = &state.psi1;
    let psi2 = &state.psi2;
    let theta = &state.theta;

    // Continuity: dphi = -div(rho~ psi + phi u~ + phi psi).
    let f1 = psi1
        .mul_profile(&base.rho_t)
        .add(&phi.mul_profile(&base.u1_t))
        .add(&mul_d(phi, psi1, da));
    let f2 = psi2.mul_profile(&base.rho_t).add(&mul_d(phi, psi2, da));
    let dphi = grid::ddx1(&f1).add(&grid::ddx2_flux(&f2)).scaled(-1.0);

    let rho = ScalarField::from_profile(grid_, &base.rho_t).add(phi);
    let d1psi1 = grid::ddx1(psi1);
    let d2psi1 = grid::ddx2(psi1);
    let d1psi2 = grid::ddx1(psi2);
    let d2psi2 = grid::ddx2(psi2);
    let div_psi = d1psi1.add(&d2psi2);

    // advect(f) = u . grad f with u = (x2 + psi1, psi2).
    let advect = |d1f: &ScalarField, d2f: &ScalarField| {
        d1f.mul_profile(&base.u1_t)
            .add(&mul_d(psi1, d1f, da))
            .add(&mul_d(psi2, d2f, da))
    };

    // Pressure perturbation delta P = T~ phi + rho~ theta + phi theta.
    let delta_p = phi
        .mul_profile(&base.temp_t)
        .add(&theta.mul_profile(&base.rho_t))
        .add(&mul_d(phi, theta, da));

    let lap = |f: &ScalarField| grid::d2dx1(f).add(&grid::d2dx2(f));
    let inv_eps2 = params.inv_eps2();
    let mu = params.mu;
    let mu_b = params.mu + params.mu_prime;

    // Momentum, x1 component.
    let adv1 = advect(&d1psi1, &d2psi1).add(&psi2.mul_profile(&base.du1_t));
    let rho_adv1 = adv1.mul_profile(&base.rho_t).add(&mul_d(phi, &adv1, da));
    let mut m1 = rho_adv1.scaled(-1.0);
    m1.axpy(-inv_eps2, &grid::ddx1(&delta_p));
    m1.axpy(mu, &lap(psi1));
    m1.axpy(mu_b, &grid::ddx1(&div_psi));
    let dpsi1 = maybe_dealias(m1.div(&rho), da);

    // Momentum, x2 component. grad(div psi) in x2 uses ddx2(ddx1 psi1) +
    // d2dx2(psi2), matching the implicit operator stencils.
    let adv2 = advect(&d1psi2, &d2psi2);
    let rho_adv2 = adv2.mul_profile(&base.rho_t).add(&mul_d(phi, &adv2, da));
    let mut m2 = rho_adv2.scaled(-1.0);
    m2.axpy(-inv_eps2, &grid::ddx2(&delta_p));
    m2.axpy(mu, &lap(psi2));
    m2.axpy(mu_b, &grid::ddx2(&d1psi1).add(&grid::d2dx2(psi2)));
    let dpsi2 = maybe_dealias(m2.div(&rho), da);

    // Energy. T div psi keeps the base and perturbation parts separate so the
    // base part does not pass through dealiasing.
    let d1theta = grid::ddx1(theta);
    let d2theta = grid::ddx2(theta);
    let adv_t = advect(&d1theta, &d2theta).add(&psi2.mul_profile(&base.dtemp_t));
    let t_div = div_psi
        .mul_profile(&base.temp_t)
        .add(&mul_d(theta, &div_psi, da));
    // Viscous heating 2 mu |D(psi)|^2 + 4 mu D(u~):D(psi) + mu'(div psi)^2.
    let d12 = d2psi1.add(&d1psi2).scaled(0.5);
    let mut heating = mul_d(&d1psi1, &d1psi1, da)
        .add(&mul_d(&d12, &d12, da).scaled(2.0))
        .add(&mul_d(&d2psi2, &d2psi2, da))
        .scaled(2.0 * mu);
    heating.axpy(4.0 * mu, &d12.mul_profile(&base.du1_t));
    heating.axpy(params.mu_prime, &mul_d(&div_psi, &div_psi, da));

    let gm1 = params.gamma - 1.0;
    let mut bracket = lap(theta).scaled(params.kappa);
    bracket.axpy(params.eps2(), &heating);
    let mut dtheta = adv_t.scaled(-1.0);
    dtheta.axpy(-gm1, &t_div);
    dtheta.axpy(gm1, &maybe_dealias(bracket.div(&rho), da));

    Ok(Tendency {
        dphi,
        dpsi1,
        dpsi2,
        dtheta,
    })
}

/// Applies the implicit operator L: the full constant-in-x1-coefficient
/// linearization about the base flow. Beyond the stiff pressure coupling,
/// the flux-form div(rho~ psi), the (gamma-1) T~ div psi energy coupling and
/// the viscous/conductive terms, L carries the base advection x2*d1, the
/// shear couplings psi2*du1~ and psi2*dT~, and the linear part of the
/// viscous heating: with the base advection explicit, the Adams-Bashforth
/// extrapolation goes unstable on the weakly damped acoustic modes once
/// their Crank-Nicolson rotation per step reaches order one, exactly the
/// dt ~ 10*eps*dx2 regime the integrator must survive.
/// psi/theta wall rows are zero (those dofs are Dirichlet-eliminated).
pub fn apply_implicit(
    state: &PerturbationState,
    base: &BaseFlow,
    params: &PhysicalParams,
    grid_: &Grid,
) -> Tendency {
    let mut t = linear_rhs(state, base, params);
    let n2 = grid_.n2();
    for f in [&mut t.dpsi1, &mut t.dpsi2, &mut t.dtheta] {
        for i in 0..grid_.n1() {
            f.set(i, 0, 0.0);
            f.set(i, n2, 0.0);
        }
    }
    t
}

/// Base-flow linearization of the full right-hand side, wall rows included.
fn linear_rhs(state: &PerturbationState, base: &BaseFlow, params: &PhysicalParams) -> Tendency {
    let phi = &state.phi;
    let psi1 = &state.psi1;
    let psi2 = &state.psi2;
    let theta = &state.theta;
    let inv_rho: Vec<f64> = base.rho_t.iter().map(|r| 1.0 / r).collect();
    let gm1 = params.gamma - 1.0;

    // Continuity: -div(rho~ psi) - d1(x2 phi).
    let dphi = grid::ddx1(&psi1.mul_profile(&base.rho_t))
        .add(&grid::ddx2_flux(&psi2.mul_profile(&base.rho_t)))
        .add(&grid::ddx1(&phi.mul_profile(&base.u1_t)))
        .scaled(-1.0);

    let delta_p = phi
        .mul_profile(&base.temp_t)
        .add(&theta.mul_profile(&base.rho_t));
    let d1psi1 = grid::ddx1(psi1);
    let div_psi = d1psi1.add(&grid::ddx2(psi2));
    let lap = |f: &ScalarField| grid::d2dx1(f).add(&grid::d2dx2(f));
    let inv_eps2 = params.inv_eps2();
    let mu = params.mu;
    let mu_b = params.mu + params.mu_prime;

    let mut m1 = grid::ddx1(&delta_p).scaled(-inv_eps2);
    m1.axpy(mu, &lap(psi1));
    m1.axpy(mu_b, &grid::ddx1(&div_psi));
    let mut dpsi1 = m1.mul_profile(&inv_rho);
    dpsi1.axpy(-1.0, &d1psi1.mul_profile(&base.u1_t));
    dpsi1.axpy(-1.0, &psi2.mul_profile(&base.du1_t));

    let mut m2 = grid::ddx2(&delta_p).scaled(-inv_eps2);
    m2.axpy(mu, &lap(psi2));
    m2.axpy(mu_b, &grid::ddx2(&d1psi1).add(&grid::d2dx2(psi2)));
    let mut dpsi2 = m2.mul_profile(&inv_rho);
    dpsi2.axpy(-1.0, &grid::ddx1(psi2).mul_profile(&base.u1_t));

    let mut dtheta = div_psi.mul_profile(&base.temp_t).scaled(-gm1);
    dtheta.axpy(gm1 * params.kappa, &lap(theta).mul_profile(&inv_rho));
    dtheta.axpy(-1.0, &grid::ddx1(theta).mul_profile(&base.u1_t));
    dtheta.axpy(-1.0, &psi2.mul_profile(&base.dtemp_t));
    // Linear part of the viscous heating: 4 mu D(u~):D(psi).
    let d12 = grid::ddx2(psi1).add(&grid::ddx1(psi2)).scaled(0.5);
    dtheta.axpy(
        gm1 * params.eps2() * 4.0 * mu,
        &d12.mul_profile(&base.du1_t).mul_profile(&inv_rho),
    );

    Tendency {
        dphi,
        dpsi1,
        dpsi2,
        dtheta,
    }
}

fn tendency_linear(
    state: &PerturbationState,
    base: &BaseFlow,
    params: &PhysicalParams,
) -> Tendency {
    linear_rhs(state, base, params)
}

/// Second time derivative of the state, as the directional derivative of the
/// tendency along itself (a pure function of the snapshot; no history).
pub fn tendency_rate(
    state: &PerturbationState,
    tend: &Tendency,
    base: &BaseFlow,
    params: &PhysicalParams,
    grid_: &Grid,
    opts: &TendencyOpts,
) -> Result<Tendency, SolverError> {
    let scale_state = grid::linf_norm(&state.phi)
        .max(grid::linf_norm(&state.psi1))
        .max(grid::linf_norm(&state.psi2))
        .max(grid::linf_norm(&state.theta));
    let scale_tend = grid::linf_norm(&tend.dphi)
        .max(grid::linf_norm(&tend.dpsi1))
        .max(grid::linf_norm(&tend.dpsi2))
        .max(grid::linf_norm(&tend.dtheta));
    if scale_tend == 0.0 {
        return Ok(Tendency::zeros(grid_));
    }
    let h = 1e-6 * (1.0 + scale_state) / scale_tend;
    let mut dir = tend.clone();
    dir.pin_walls();
    let shifted = |sign: f64| {
        let mut s = state.clone();
        s.phi.axpy(sign * h, &dir.dphi);
        s.psi1.axpy(sign * h, &dir.dpsi1);
        s.psi2.axpy(sign * h, &dir.dpsi2);
        s.theta.axpy(sign * h, &dir.dtheta);
        s
    };
    let gp = tendency(&shifted(1.0), base, params, grid_, opts)?;
    let gm = tendency(&shifted(-1.0), base, params, grid_, opts)?;
    let half_inv = 0.5 / h;
    Ok(Tendency {
        dphi: gp.dphi.sub(&gm.dphi).scaled(half_inv),
        dpsi1: gp.dpsi1.sub(&gm.dpsi1).scaled(half_inv),
        dpsi2: gp.dpsi2.sub(&gm.dpsi2).scaled(half_inv),
        dtheta: gp.dtheta.sub(&gm.dtheta).scaled(half_inv),
    })
}
