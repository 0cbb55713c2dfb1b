//! Tensor-product grid on S^1 x (0,1) with derivative operators, quadrature
//! and Sobolev norms.
//!
//! x1 is periodic over [0, 2*pi) with Fourier-collocation derivatives; x2 is
//! wall-bounded with second-order finite differences (one-sided at walls).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GridError {
    #[error("n1 must be even and >= 8 (got {0})")]
    BadN1(usize),
    #[error("n2 must be >= 8 (got {0})")]
    BadN2(usize),
    #[error("derivative order {0} exceeds 3")]
    DerivOrder(usize),
}

struct GridInner {
    n1: usize,
    n2: usize,
    dx1: f64,
    dx2: f64,
    x1: Vec<f64>,
    x2: Vec<f64>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

/// Grid handle; cheap to clone and share across tasks.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid({}x{})", self.inner.n1, self.inner.n2)
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.n1 == other.inner.n1 && self.inner.n2 == other.inner.n2
    }
}

impl Grid {
    /// Builds a grid with `n1` periodic nodes in x1 and `n2` intervals in x2
    /// (nodes j = 0..=n2, walls included).
    pub fn new(n1: usize, n2: usize) -> Result<Grid, GridError> {
        if n1 < 8 || n1 % 2 != 0 {
            return Err(GridError::BadN1(n1));
        }
        if n2 < 8 {
            return Err(GridError::BadN2(n2));
        }
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(n1);
        let fft_inv = planner.plan_fft_inverse(n1);
        let x1 = (0..n1).map(|i| 2.0 * PI * i as f64 / n1 as f64).collect();
        let x2 = (0..=n2).map(|j| j as f64 / n2 as f64).collect();
        Ok(Grid {
            inner: Arc::new(GridInner {
                n1,
                n2,
                dx1: 2.0 * PI / n1 as f64,
                dx2: 1.0 / n2 as f64,
                x1,
                x2,
                fft_fwd,
                fft_inv,
            }),
        })
    }

    pub fn n1(&self) -> usize {
        self.inner.n1
    }

    pub fn n2(&self) -> usize {
        self.inner.n2
    }

    pub fn dx1(&self) -> f64 {
        self.inner.dx1
    }

    pub fn dx2(&self) -> f64 {
        self.inner.dx2
    }

    pub fn x1(&self, i: usize) -> f64 {
        self.inner.x1[i]
    }

    pub fn x2(&self, j: usize) -> f64 {
        self.inner.x2[j]
    }

    /// Highest Fourier mode kept by the 2/3 rule.
    pub fn dealias_cut(&self) -> i64 {
        (self.inner.n1 / 3) as i64
    }

    /// Signed wavenumber of FFT bin `m`; the Nyquist bin maps to n1/2.
    pub fn wavenumber(&self, m: usize) -> i64 {
        let n1 = self.inner.n1 as i64;
        let m = m as i64;
        if m <= n1 / 2 {
            m
        } else {
            m - n1
        }
    }

    pub(crate) fn fft_forward(&self) -> &Arc<dyn Fft<f64>> {
        &self.inner.fft_fwd
    }

    pub(crate) fn fft_inverse(&self) -> &Arc<dyn Fft<f64>> {
        &self.inner.fft_inv
    }
}

/// Real scalar samples on a [`Grid`], indexed by (i = x1 node, j = x2 node).
/// Storage is row-major with i outer and j inner.
#[derive(Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({:?})", self.grid)
    }
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.n1() * (grid.n2() + 1)],
        }
    }

    /// Samples `f(x1, x2)` at every node.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = ScalarField::zeros(grid);
        for i in 0..grid.n1() {
            for j in 0..=grid.n2() {
                out.values[i * (grid.n2() + 1) + j] = f(grid.x1(i), grid.x2(j));
            }
        }
        out
    }

    /// Broadcasts an x2 profile (length n2+1) across all x1 nodes.
    pub fn from_profile(grid: &Grid, profile: &[f64]) -> Self {
        assert_eq!(profile.len(), grid.n2() + 1, "profile length mismatch");
        let mut out = ScalarField::zeros(grid);
        for i in 0..grid.n1() {
            out.values[i * (grid.n2() + 1)..(i + 1) * (grid.n2() + 1)].copy_from_slice(profile);
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.grid.n2() + 1) + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.values[k] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn assert_same_grid(&self, other: &ScalarField) {
        assert!(self.grid == other.grid, "field shape mismatch");
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= c;
        }
        out
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.assert_same_grid(other);
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.assert_same_grid(other);
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a -= b;
        }
        out
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.assert_same_grid(other);
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a *= b;
        }
        out
    }

    pub fn axpy(&mut self, c: f64, other: &ScalarField) {
        self.assert_same_grid(other);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    /// Multiplies each x2 level by `profile[j]`.
    pub fn mul_profile(&self, profile: &[f64]) -> ScalarField {
        assert_eq!(profile.len(), self.grid.n2() + 1, "profile length mismatch");
        let mut out = self.clone();
        let stride = self.grid.n2() + 1;
        for i in 0..self.grid.n1() {
            for j in 0..stride {
                out.values[i * stride + j] *= profile[j];
            }
        }
        out
    }

    /// Divides each sample by `other` pointwise.
    pub fn div(&self, other: &ScalarField) -> ScalarField {
        self.assert_same_grid(other);
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a /= b;
        }
        out
    }
}

/// Applies `op(k, coeff)` to the x1 spectrum of `f`, line by line in j.
fn spectral_map(f: &ScalarField, op: impl Fn(i64, Complex64) -> Complex64) -> ScalarField {
    let grid = f.grid();
    let n1 = grid.n1();
    let n2 = grid.n2();
    let stride = n2 + 1;
    let fwd = grid.fft_forward().clone();
    let inv = grid.fft_inverse().clone();
    let mut line = vec![Complex64::new(0.0, 0.0); n1];
    let scratch_len = fwd
        .get_inplace_scratch_len()
        .max(inv.get_inplace_scratch_len());
    let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
    let mut out = ScalarField::zeros(grid);
    let scale = 1.0 / n1 as f64;
    for j in 0..stride {
        for i in 0..n1 {
            line[i] = Complex64::new(f.values[i * stride + j], 0.0);
        }
        fwd.process_with_scratch(&mut line, &mut scratch);
        for (m, c) in line.iter_mut().enumerate() {
            *c = op(grid.wavenumber(m), *c);
        }
        inv.process_with_scratch(&mut line, &mut scratch);
        for i in 0..n1 {
            out.values[i * stride + j] = line[i].re * scale;
        }
    }
    out
}

/// Fourier-collocation x1 derivative; the Nyquist mode derivative is zero.
pub fn ddx1(f: &ScalarField) -> ScalarField {
    let nyquist = (f.grid().n1() / 2) as i64;
    spectral_map(f, |k, c| {
        if k == nyquist {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k as f64) * c
        }
    })
}

/// Spectral second x1 derivative (-k^2, including the Nyquist mode).
pub fn d2dx1(f: &ScalarField) -> ScalarField {
    spectral_map(f, |k, c| c * (-((k * k) as f64)))
}

/// Zeroes the x1 modes above the 2/3-rule cutoff.
pub fn dealias(f: &ScalarField) -> ScalarField {
    let cut = f.grid().dealias_cut();
    spectral_map(f, |k, c| {
        if k.abs() > cut {
            Complex64::new(0.0, 0.0)
        } else {
            c
        }
    })
}

/// Second-order x2 derivative: central interior, one-sided 3-point at walls.
pub fn ddx2(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let n2 = grid.n2();
    let stride = n2 + 1;
    let h2 = 2.0 * grid.dx2();
    let mut out = ScalarField::zeros(grid);
    for i in 0..grid.n1() {
        let row = &f.values[i * stride..(i + 1) * stride];
        let orow = &mut out.values[i * stride..(i + 1) * stride];
        orow[0] = (-3.0 * row[0] + 4.0 * row[1] - row[2]) / h2;
        for j in 1..n2 {
            orow[j] = (row[j + 1] - row[j - 1]) / h2;
        }
        orow[n2] = (3.0 * row[n2] - 4.0 * row[n2 - 1] + row[n2 - 2]) / h2;
    }
    out
}

/// Second x2 derivative: 3-point central interior, 4-point one-sided at walls
/// (exact on cubics everywhere).
pub fn d2dx2(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let n2 = grid.n2();
    let stride = n2 + 1;
    let hh = grid.dx2() * grid.dx2();
    let mut out = ScalarField::zeros(grid);
    for i in 0..grid.n1() {
        let row = &f.values[i * stride..(i + 1) * stride];
        let orow = &mut out.values[i * stride..(i + 1) * stride];
        orow[0] = (2.0 * row[0] - 5.0 * row[1] + 4.0 * row[2] - row[3]) / hh;
        for j in 1..n2 {
            orow[j] = (row[j + 1] - 2.0 * row[j] + row[j - 1]) / hh;
        }
        orow[n2] = (2.0 * row[n2] - 5.0 * row[n2 - 1] + 4.0 * row[n2 - 2] - row[n2 - 3]) / hh;
    }
    out
}

/// x2 flux divergence with the telescoping wall closure: central interior,
/// (f1-f0)/h at the walls. Under the trapezoid quadrature the weighted sum of
/// the output is exactly `f[n2] - f[0]`, so fluxes vanishing at both walls
/// contribute zero discrete mass, identically.
pub fn ddx2_flux(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let n2 = grid.n2();
    let stride = n2 + 1;
    let h = grid.dx2();
    let h2 = 2.0 * h;
    let mut out = ScalarField::zeros(grid);
    for i in 0..grid.n1() {
        let row = &f.values[i * stride..(i + 1) * stride];
        let orow = &mut out.values[i * stride..(i + 1) * stride];
        orow[0] = (row[1] - row[0]) / h;
        for j in 1..n2 {
            orow[j] = (row[j + 1] - row[j - 1]) / h2;
        }
        orow[n2] = (row[n2] - row[n2 - 1]) / h;
    }
    out
}

/// Rectangle rule in x1 times trapezoid rule in x2.
pub fn integrate(f: &ScalarField) -> f64 {
    let grid = f.grid();
    let n2 = grid.n2();
    let stride = n2 + 1;
    let mut total = 0.0;
    for i in 0..grid.n1() {
        let row = &f.values[i * stride..(i + 1) * stride];
        let mut s = 0.5 * (row[0] + row[n2]);
        for j in 1..n2 {
            s += row[j];
        }
        total += s;
    }
    total * grid.dx1() * grid.dx2()
}

/// L2 norm over the domain.
pub fn l2_norm(f: &ScalarField) -> f64 {
    integrate(&f.mul(f)).max(0.0).sqrt()
}

/// Sobolev H^k norm, k <= 3: sum over multi-indices (a,b) with a+b <= k of
/// the squared L2 norm of d1^a d2^b f, one term per multi-index. Derivatives
/// are composed as ddx1 first, then ddx2.
pub fn sobolev_norm(f: &ScalarField, k: usize) -> Result<f64, GridError> {
    if k > 3 {
        return Err(GridError::DerivOrder(k));
    }
    let mut sum = 0.0;
    // d1^a applied first, then d2^b on top.
    let mut d1 = f.clone();
    for a in 0..=k {
        if a > 0 {
            d1 = ddx1(&d1);
        }
        let mut d12 = d1.clone();
        for b in 0..=(k - a) {
            if b > 0 {
                d12 = ddx2(&d12);
            }
            sum += integrate(&d12.mul(&d12));
        }
    }
    Ok(sum.max(0.0).sqrt())
}

/// Maximum absolute sample.
pub fn linf_norm(f: &ScalarField) -> f64 {
    f.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// sin(pi*x) evaluated so both walls give exactly zero.
pub fn sin_pi(x: f64) -> f64 {
    if x <= 0.5 {
        (PI * x).sin()
    } else {
        (PI * (1.0 - x)).sin()
    }
}

/// cos(pi*x), antisymmetric about x = 1/2.
pub fn cos_pi(x: f64) -> f64 {
    if x <= 0.5 {
        (PI * x).cos()
    } else {
        -(PI * (1.0 - x)).cos()
    }
}
