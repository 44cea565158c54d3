//! Real, three-component vector fields stored by Fourier coefficients.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::GridSpec;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// A real vector field on the torus, held as `3 × n³` Fourier coefficients in
/// component-major, row-major wavevector order.
///
/// The mean mode is kept at zero and the coefficients satisfy
/// `û(-ξ) = conj(û(ξ))`. The `divergence_free` flag records whether the
/// field is known to satisfy `ξ·û(ξ) = 0`.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
    divergence_free: bool,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        SpectralField { grid, coeffs: vec![ZERO; 3 * grid.len()], divergence_free: true }
    }

    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<Complex64>, divergence_free: bool) -> Result<Self> {
        if coeffs.len() != 3 * grid.len() {
            return Err(Error::Argument(format!(
                "expected {} coefficients, got {}",
                3 * grid.len(),
                coeffs.len()
            )));
        }
        Ok(SpectralField { grid, coeffs, divergence_free })
    }

    /// Builds a field from physical samples of the three components.
    pub fn from_physical(grid: GridSpec, comps: [&[f64]; 3]) -> Result<Self> {
        let n = grid.n();
        for c in comps {
            if c.len() != grid.len() {
                return Err(Error::Argument("physical component has wrong length".into()));
            }
        }
        let (a, b) = fft::forward_pair(comps[0], comps[1], n);
        let c = fft::forward_real(comps[2], n);
        let mut coeffs = Vec::with_capacity(3 * grid.len());
        coeffs.extend_from_slice(&a);
        coeffs.extend_from_slice(&b);
        coeffs.extend_from_slice(&c);
        let mut f = SpectralField { grid, coeffs, divergence_free: false };
        f.symmetrize();
        Ok(f)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let m = self.grid.len();
        &self.coeffs[c * m..(c + 1) * m]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let m = self.grid.len();
        &mut self.coeffs[c * m..(c + 1) * m]
    }

    /// The three components of mode `idx`.
    #[inline]
    pub fn mode(&self, idx: usize) -> [Complex64; 3] {
        let m = self.grid.len();
        [self.coeffs[idx], self.coeffs[m + idx], self.coeffs[2 * m + idx]]
    }

    #[inline]
    pub fn set_mode(&mut self, idx: usize, v: [Complex64; 3]) {
        let m = self.grid.len();
        self.coeffs[idx] = v[0];
        self.coeffs[m + idx] = v[1];
        self.coeffs[2 * m + idx] = v[2];
    }

    pub fn is_divergence_free(&self) -> bool {
        self.divergence_free
    }

    pub fn set_divergence_free(&mut self, flag: bool) {
        self.divergence_free = flag;
    }

    /// Re-grids the same coefficient array onto another grid with the same
    /// number of points (used by the dyadic scaling between tori).
    pub fn with_grid(mut self, grid: GridSpec) -> Result<Self> {
        if grid.n() != self.grid.n() {
            return Err(Error::GridMismatch("point counts differ".into()));
        }
        self.grid = grid;
        Ok(self)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn scale(&mut self, a: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        debug_assert!(self.grid.same_as(&other.grid));
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
        self.divergence_free &= other.divergence_free;
    }

    /// Euclidean norm of the coefficient array.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `L²` norm over the torus, by Parseval.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Real `L²` inner product over the torus.
    pub fn l2_inner(&self, other: &SpectralField) -> f64 {
        self.grid.volume()
            * self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a * b.conj()).re).sum::<f64>()
    }

    /// `‖∇u‖²_{L²}`.
    pub fn gradient_l2_sq(&self) -> f64 {
        let m = self.grid.len();
        let modes = self.grid.modes();
        let xi2 = &modes.xi2;
        let mut s = 0.0;
        for c in 0..3 {
            for idx in 0..m {
                s += xi2[idx] * self.coeffs[c * m + idx].norm_sqr();
            }
        }
        self.grid.volume() * s
    }

    pub fn mean_mode(&self) -> [Complex64; 3] {
        self.mode(0)
    }

    /// Largest violation of `û(-ξ) = conj(û(ξ))`, relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.max_coeff();
        if scale == 0.0 {
            return 0.0;
        }
        let m = self.grid.len();
        let modes = self.grid.modes();
        let mut worst: f64 = 0.0;
        for c in 0..3 {
            for idx in 0..m {
                let j = modes.conj[idx];
                let d = (self.coeffs[c * m + j] - self.coeffs[c * m + idx].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst / scale
    }

    /// Largest `|ξ̂·û(ξ)|` over nonzero modes, relative to the largest coefficient.
    pub fn divergence_defect(&self) -> f64 {
        let scale = self.max_coeff();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        let modes = self.grid.modes();
        for idx in 1..self.grid.len() {
            let xi = modes.xi[idx];
            let r = modes.xi2[idx].sqrt();
            let u = self.mode(idx);
            let d = (u[0] * xi[0] + u[1] * xi[1] + u[2] * xi[2]).norm() / r;
            worst = worst.max(d);
        }
        worst / scale
    }

    /// Enforces Hermitian symmetry and zeroes the mean and Nyquist modes.
    pub fn symmetrize(&mut self) {
        let m = self.grid.len();
        let modes = self.grid.modes();
        for c in 0..3 {
            let comp = &mut self.coeffs[c * m..(c + 1) * m];
            for idx in 0..m {
                let j = modes.conj[idx];
                if j < idx {
                    continue;
                }
                if self.grid.is_nyquist(idx) || idx == 0 {
                    comp[idx] = ZERO;
                    comp[j] = ZERO;
                    continue;
                }
                let v = (comp[idx] + comp[j].conj()) * 0.5;
                comp[idx] = v;
                comp[j] = v.conj();
            }
        }
    }

    /// Multiplies every mode by `f(|ξ|²)`.
    pub fn apply_radial(&mut self, f: impl Fn(f64) -> f64) {
        let modes = self.grid.modes();
        let m = self.grid.len();
        let mult: Vec<f64> = modes.xi2.iter().map(|&x| f(x)).collect();
        for c in 0..3 {
            for (v, w) in self.coeffs[c * m..(c + 1) * m].iter_mut().zip(&mult) {
                *v *= *w;
            }
        }
    }

    /// Multiplies every mode by a precomputed per-mode real factor.
    pub fn apply_multiplier(&mut self, mult: &[f64]) {
        let m = self.grid.len();
        assert_eq!(mult.len(), m);
        for c in 0..3 {
            for (v, w) in self.coeffs[c * m..(c + 1) * m].iter_mut().zip(mult) {
                *v *= *w;
            }
        }
    }

    pub fn multiplied(&self, mult: &[f64]) -> Self {
        let mut out = self.clone();
        out.apply_multiplier(mult);
        out
    }

    /// Physical samples of the three components.
    pub fn to_physical(&self) -> [Vec<f64>; 3] {
        let n = self.grid.n();
        let (a, b) = fft::inverse_pair(self.component(0), self.component(1), n);
        let c = fft::inverse_real(self.component(2), n);
        [a, b, c]
    }

    /// Physical samples of two fields with three complex transforms.
    pub fn to_physical_pair(u: &SpectralField, v: &SpectralField) -> ([Vec<f64>; 3], [Vec<f64>; 3]) {
        let n = u.grid.n();
        let (su, sv) = (u.max_coeff(), v.max_coeff());
        if su == 0.0 || sv == 0.0 {
            // keeps the zero field exactly zero in physical space
            let zero = || [vec![0.0; u.grid.len()], vec![0.0; u.grid.len()], vec![0.0; u.grid.len()]];
            let pu = if su == 0.0 { zero() } else { u.to_physical() };
            let pv = if sv == 0.0 { zero() } else { v.to_physical() };
            return (pu, pv);
        }
        if su == sv {
            let (u0, u1) = fft::inverse_pair(u.component(0), u.component(1), n);
            let (u2, v0) = fft::inverse_pair(u.component(2), v.component(0), n);
            let (v1, v2) = fft::inverse_pair(v.component(1), v.component(2), n);
            return ([u0, u1, u2], [v0, v1, v2]);
        }
        // the shared transform is done at unit scale so neither field loses
        // relative precision to the other
        let r = su / sv;
        let v2s: Vec<Complex64> = v.component(0).iter().map(|c| c * r).collect();
        let (u0, u1) = fft::inverse_pair(u.component(0), u.component(1), n);
        let (u2, mut v0) = fft::inverse_pair(u.component(2), &v2s, n);
        v0.iter_mut().for_each(|x| *x /= r);
        let (v1, v2) = fft::inverse_pair(v.component(1), v.component(2), n);
        ([u0, u1, u2], [v0, v1, v2])
    }

    /// Pointwise Euclidean magnitude `|u(x)|` on the grid.
    pub fn magnitude(&self) -> Vec<f64> {
        let [a, b, c] = self.to_physical();
        a.iter().zip(&b).zip(&c).map(|((x, y), z)| (x * x + y * y + z * z).sqrt()).collect()
    }

    /// Relative coefficient-space distance `‖self - other‖ / ‖other‖`.
    pub fn rel_distance(&self, other: &SpectralField) -> f64 {
        let d = (self - other).coeff_norm();
        let r = other.coeff_norm();
        if r == 0.0 {
            d
        } else {
            d / r
        }
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&SpectralField> for SpectralField {
    fn sub_assign(&mut self, rhs: &SpectralField) {
        self.axpy(-1.0, rhs);
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, a: f64) -> SpectralField {
        self.scaled(a)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scaled(-1.0)
    }
}
