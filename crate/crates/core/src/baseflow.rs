//! The exact non-dimensional Couette steady state and its discrete residual.

use thiserror::Error;

use crate::grid::{self, Grid, ScalarField};
use crate::params::PhysicalParams;

/// Couette base-state profiles sampled on the x2 nodes. Derivative profiles
/// hold the analytic derivatives, not stencil approximations, so they add no
/// O(dx2^2) noise to the perturbation right-hand side.
#[derive(Debug, Clone)]
pub struct BaseFlow {
    /// rho~(x2) = 1 / T~(x2).
    pub rho_t: Vec<f64>,
    /// u~1(x2) = x2.
    pub u1_t: Vec<f64>,
    /// T~(x2) = chi + (1-chi) x2 - (eps^2 Pr / (2 C_p)) (x2^2 - x2).
    pub temp_t: Vec<f64>,
    /// d u~1 / d x2 = 1.
    pub du1_t: Vec<f64>,
    /// d T~ / d x2, analytic.
    pub dtemp_t: Vec<f64>,
    /// d^2 T~ / d x2^2 = -eps^2 Pr / C_p, constant.
    pub d2temp_t: f64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BaseFlowError {
    #[error("base temperature not positive at node {node} (T~ = {value})")]
    NonPositiveTemperature { node: usize, value: f64 },
}

/// L2 norms of the four discrete steady-equation residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyResidual {
    pub mass: f64,
    pub mom1: f64,
    pub mom2: f64,
    pub energy: f64,
}

impl SteadyResidual {
    pub fn max(&self) -> f64 {
        self.mass.max(self.mom1).max(self.mom2).max(self.energy)
    }
}

/// Samples the analytic Couette profiles at the grid nodes.
pub fn build_base_flow(params: &PhysicalParams, grid: &Grid) -> Result<BaseFlow, BaseFlowError> {
    let n2 = grid.n2();
    let c = params.eps2() * params.prandtl / (2.0 * params.cp);
    let mut rho_t = Vec::with_capacity(n2 + 1);
    let mut u1_t = Vec::with_capacity(n2 + 1);
    let mut temp_t = Vec::with_capacity(n2 + 1);
    let mut dtemp_t = Vec::with_capacity(n2 + 1);
    for j in 0..=n2 {
        let x2 = grid.x2(j);
        let q = x2 * x2 - x2;
        // Written so both wall values are exact: T~(0) = chi, T~(1) = 1.
        let t = 1.0 + (params.chi - 1.0) * (1.0 - x2) - c * q;
        if t <= 0.0 {
            return Err(BaseFlowError::NonPositiveTemperature { node: j, value: t });
        }
        temp_t.push(t);
        rho_t.push(1.0 / t);
        u1_t.push(x2);
        dtemp_t.push((1.0 - params.chi) - c * (2.0 * x2 - 1.0));
    }
    Ok(BaseFlow {
        rho_t,
        u1_t,
        temp_t,
        du1_t: vec![1.0; n2 + 1],
        dtemp_t,
        d2temp_t: -2.0 * c,
    })
}

impl BaseFlow {
    pub fn min_temp(&self) -> f64 {
        self.temp_t.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn min_rho(&self) -> f64 {
        self.rho_t.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Substitutes the base flow into the discrete non-dimensional system and
/// returns the L2 norms of the four equation residuals.
pub fn steady_residual(base: &BaseFlow, params: &PhysicalParams, grid: &Grid) -> SteadyResidual {
    let rho = ScalarField::from_profile(grid, &base.rho_t);
    let u1 = ScalarField::from_profile(grid, &base.u1_t);
    let u2 = ScalarField::zeros(grid);
    let temp = ScalarField::from_profile(grid, &base.temp_t);
    // Steady pressure p1 = 1: stencils applied to the exact constant vanish
    // identically, which is the content of the r_mom2 check.
    let pressure = ScalarField::from_fn(grid, |_, _| 1.0);

    // Mass: div(rho u), with the same flux divergence the solver uses.
    let r_mass = grid::ddx1(&rho.mul(&u1)).add(&grid::ddx2_flux(&rho.mul(&u2)));

    let div_u = grid::ddx1(&u1).add(&grid::ddx2(&u2));
    let lap = |f: &ScalarField| grid::d2dx1(f).add(&grid::d2dx2(f));

    // Momentum: rho (u . grad u) + eps^-2 grad P - mu lap u - (mu+mu') grad div u.
    let adv1 = u1.mul(&grid::ddx1(&u1)).add(&u2.mul(&grid::ddx2(&u1)));
    let adv2 = u1.mul(&grid::ddx1(&u2)).add(&u2.mul(&grid::ddx2(&u2)));
    let inv_eps2 = params.inv_eps2();
    let mut r_mom1 = rho.mul(&adv1);
    r_mom1.axpy(inv_eps2, &grid::ddx1(&pressure));
    r_mom1.axpy(-params.mu, &lap(&u1));
    r_mom1.axpy(-(params.mu + params.mu_prime), &grid::ddx1(&div_u));
    let mut r_mom2 = rho.mul(&adv2);
    r_mom2.axpy(inv_eps2, &grid::ddx2(&pressure));
    r_mom2.axpy(-params.mu, &lap(&u2));
    r_mom2.axpy(-(params.mu + params.mu_prime), &grid::ddx2(&div_u));

    // Energy: rho/(gamma-1) u . grad T + P div u - kappa lap T - eps^2 Phi_v.
    // The conduction term is evaluated through the profile decomposition
    // T~ = [linear] - c*q so that the stencil acts on the exact quadratic
    // instead of on samples of size ~1 (same operator, less rounding).
    let c = params.eps2() * params.prandtl / (2.0 * params.cp);
    let qfield = ScalarField::from_fn(grid, |_, x2| x2 * x2 - x2);
    let linear = ScalarField::from_fn(grid, |_, x2| 1.0 + (params.chi - 1.0) * (1.0 - x2));
    let d2t = grid::d2dx2(&linear).add(&grid::d2dx2(&qfield).scaled(-c));
    let lap_t = grid::d2dx1(&temp).add(&d2t);

    let d11 = grid::ddx1(&u1);
    let d22 = grid::ddx2(&u2);
    let d12 = grid::ddx2(&u1).add(&grid::ddx1(&u2)).scaled(0.5);
    let dsq = d11.mul(&d11).add(&d12.mul(&d12).scaled(2.0)).add(&d22.mul(&d22));
    let adv_t = u1.mul(&grid::ddx1(&temp)).add(&u2.mul(&grid::ddx2(&temp)));
    let mut r_energy = rho.mul(&adv_t).scaled(1.0 / (params.gamma - 1.0));
    r_energy = r_energy.add(&pressure.mul(&div_u));
    r_energy.axpy(-params.kappa, &lap_t);
    r_energy.axpy(-params.eps2() * 2.0 * params.mu, &dsq);
    r_energy.axpy(-params.eps2() * params.mu_prime, &div_u.mul(&div_u));

    SteadyResidual {
        mass: grid::l2_norm(&r_mass),
        mom1: grid::l2_norm(&r_mom1),
        mom2: grid::l2_norm(&r_mom2),
        energy: grid::l2_norm(&r_energy),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::build_params;
    use approx::assert_relative_eq;

    fn defaults() -> PhysicalParams {
        build_params(1.4, 0.1, 1.0, 0.72, 1.0 / 3.0, 1.0).unwrap()
    }

    #[test]
    fn wall_values_are_exact() {
        for chi in [1.0, 0.95, 1.05] {
            let p = build_params(1.4, 0.1, 1.0, 0.72, 1.0 / 3.0, chi).unwrap();
            let g = Grid::new(8, 16).unwrap();
            let b = build_base_flow(&p, &g).unwrap();
            assert_eq!(b.temp_t[0], chi);
            assert_eq!(b.temp_t[16], 1.0);
        }
    }

    #[test]
    fn midpoint_matches_closed_form() {
        let p = defaults();
        let g = Grid::new(8, 16).unwrap();
        let b = build_base_flow(&p, &g).unwrap();
        let want = 1.0 + p.eps2() * p.prandtl / (8.0 * p.cp);
        assert_relative_eq!(b.temp_t[8], want, max_relative = 1e-15);
    }

    #[test]
    fn pressure_is_one_at_every_node() {
        let p = build_params(1.4, 0.2, 2.0, 0.72, 1.0 / 3.0, 0.94).unwrap();
        let g = Grid::new(8, 32).unwrap();
        let b = build_base_flow(&p, &g).unwrap();
        for j in 0..=32 {
            assert!((b.rho_t[j] * b.temp_t[j] - 1.0).abs() <= 2.0 * f64::EPSILON);
        }
    }

    #[test]
    fn profiles_stay_above_three_quarters_at_defaults() {
        let p = defaults();
        let g = Grid::new(8, 64).unwrap();
        let b = build_base_flow(&p, &g).unwrap();
        assert!(b.min_temp() > 0.75);
        assert!(b.min_rho() > 0.75);
        let linf = b
            .temp_t
            .iter()
            .map(|t| (t - 1.0).abs())
            .fold(0.0f64, f64::max);
        let bound = (1.0 - p.chi).abs() + p.eps2() * p.prandtl / (8.0 * p.cp);
        assert!(linf <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn rejects_non_positive_temperature() {
        // chi <= 0 cannot come out of build_params; force it to hit the guard.
        let mut p = defaults();
        p.chi = -3.0;
        let g = Grid::new(8, 16).unwrap();
        assert!(matches!(
            build_base_flow(&p, &g),
            Err(BaseFlowError::NonPositiveTemperature { .. })
        ));
    }

    #[test]
    fn steady_residuals_vanish_on_all_acceptance_grids() {
        let p = defaults();
        for n2 in [8usize, 16, 64] {
            let g = Grid::new(16, n2).unwrap();
            let b = build_base_flow(&p, &g).unwrap();
            let r = steady_residual(&b, &p, &g);
            println!("n2={n2}: mass={:.3e} mom1={:.3e} mom2={:.3e} energy={:.3e}", r.mass, r.mom1, r.mom2, r.energy);
            assert!(r.mass < 1e-12, "mass={:e}", r.mass);
            assert!(r.mom1 < 1e-12, "mom1={:e}", r.mom1);
            assert!(r.mom2 < 1e-12, "mom2={:e}", r.mom2);
            assert!(r.energy < 1e-12, "energy={:e}", r.energy);
        }
    }

    #[test]
    fn steady_residuals_vanish_off_default_chi() {
        let p = build_params(1.4, 0.1, 1.0, 0.72, 1.0 / 3.0, 0.96).unwrap();
        let g = Grid::new(16, 32).unwrap();
        let b = build_base_flow(&p, &g).unwrap();
        let r = steady_residual(&b, &p, &g);
        assert!(r.max() < 1e-11, "max residual {:e}", r.max());
    }
}
