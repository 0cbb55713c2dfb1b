//! Physical parameters and the derived non-dimensional coefficients.

use thiserror::Error;

/// Validated physical parameters of the channel flow, together with every
/// derived non-dimensional coefficient the equations use.
///
/// The derived fields satisfy `eps^2 = gamma * mach^2` and the balance
/// identity `kappa * prandtl / cp == mu`, which is what makes the Couette
/// energy budget close exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Ratio of specific heats, > 1.
    pub gamma: f64,
    /// Mach number built from the top-wall speed and temperature.
    pub mach: f64,
    /// Reynolds number.
    pub reynolds: f64,
    /// Prandtl number.
    pub prandtl: f64,
    /// Second-to-first viscosity ratio nu'/nu.
    pub visc_ratio: f64,
    /// Wall temperature ratio chi = T_bottom / T_top.
    pub chi: f64,
    /// eps = sqrt(gamma) * mach; scales the pressure gradient as eps^-2.
    pub eps: f64,
    /// mu = 1 / Re.
    pub mu: f64,
    /// mu' = (nu'/nu) * mu.
    pub mu_prime: f64,
    /// kappa = C_p / (Re * Pr).
    pub kappa: f64,
    /// C_p = gamma / (gamma - 1), with gas constant R = 1.
    pub cp: f64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParamError {
    #[error("gamma must exceed 1 (got {0})")]
    Gamma(f64),
    #[error("mach must be positive (got {0})")]
    Mach(f64),
    #[error("reynolds must be positive (got {0})")]
    Reynolds(f64),
    #[error("prandtl must be positive (got {0})")]
    Prandtl(f64),
    #[error("chi must be positive (got {0})")]
    Chi(f64),
    #[error("mu + mu' must be positive (got {0})")]
    BulkViscosity(f64),
    #[error("parameter {0} is not finite")]
    NotFinite(&'static str),
}

/// Validates the raw inputs and populates all derived coefficients.
pub fn build_params(
    gamma: f64,
    mach: f64,
    reynolds: f64,
    prandtl: f64,
    visc_ratio: f64,
    chi: f64,
) -> Result<PhysicalParams, ParamError> {
    for (name, v) in [
        ("gamma", gamma),
        ("mach", mach),
        ("reynolds", reynolds),
        ("prandtl", prandtl),
        ("visc_ratio", visc_ratio),
        ("chi", chi),
    ] {
        if !v.is_finite() {
            return Err(ParamError::NotFinite(name));
        }
    }
    if gamma <= 1.0 {
        return Err(ParamError::Gamma(gamma));
    }
    if mach <= 0.0 {
        return Err(ParamError::Mach(mach));
    }
    if reynolds <= 0.0 {
        return Err(ParamError::Reynolds(reynolds));
    }
    if prandtl <= 0.0 {
        return Err(ParamError::Prandtl(prandtl));
    }
    if chi <= 0.0 {
        return Err(ParamError::Chi(chi));
    }
    let mu = 1.0 / reynolds;
    let mu_prime = visc_ratio * mu;
    if mu + mu_prime <= 0.0 {
        return Err(ParamError::BulkViscosity(mu + mu_prime));
    }
    let cp = gamma / (gamma - 1.0);
    Ok(PhysicalParams {
        gamma,
        mach,
        reynolds,
        prandtl,
        visc_ratio,
        chi,
        eps: gamma.sqrt() * mach,
        mu,
        mu_prime,
        kappa: cp / (reynolds * prandtl),
        cp,
    })
}

impl PhysicalParams {
    /// eps^-2, the stiff pressure-gradient prefactor.
    pub fn inv_eps2(&self) -> f64 {
        1.0 / (self.eps * self.eps)
    }

    pub fn eps2(&self) -> f64 {
        self.eps * self.eps
    }
}
