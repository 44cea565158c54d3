//! Leray projection onto divergence-free fields.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;

/// `û(ξ) ↦ û(ξ) - ξ (ξ·û(ξ)) / |ξ|²`; the mean mode is left alone.
pub fn leray_project(u: &SpectralField) -> SpectralField {
    let mut out = u.clone();
    leray_in_place(&mut out);
    out
}

pub fn leray_in_place(u: &mut SpectralField) {
    let g = *u.grid();
    let m = g.len();
    let modes = g.modes();
    let c = u.coeffs_mut();
    for idx in 1..m {
        let (a, b, z) = (c[idx], c[m + idx], c[2 * m + idx]);
        if a.re == 0.0 && a.im == 0.0 && b.re == 0.0 && b.im == 0.0 && z.re == 0.0 && z.im == 0.0 {
            continue;
        }
        let xi = modes.xi[idx];
        let d = (a * xi[0] + b * xi[1] + z * xi[2]) / modes.xi2[idx];
        c[idx] -= d * xi[0];
        c[m + idx] -= d * xi[1];
        c[2 * m + idx] -= d * xi[2];
    }
    u.set_divergence_free(true);
}

/// Fourier coefficients of `∇·u`.
pub fn divergence(u: &SpectralField) -> Vec<Complex64> {
    let g = u.grid();
    let i = Complex64::new(0.0, 1.0);
    (0..g.len())
        .map(|idx| {
            let xi = g.wavevector(idx);
            let v = u.mode(idx);
            i * (v[0] * xi[0] + v[1] * xi[1] + v[2] * xi[2])
        })
        .collect()
}

/// `∇g` from the Fourier coefficients of a real scalar `g`.
pub fn gradient_field(grid: GridSpec, g: &[Complex64]) -> Result<SpectralField> {
    if g.len() != grid.len() {
        return Err(Error::Argument("scalar has wrong length".into()));
    }
    let i = Complex64::new(0.0, 1.0);
    let mut out = SpectralField::zeros(grid);
    for idx in 0..grid.len() {
        let xi = grid.wavevector(idx);
        let v = i * g[idx];
        out.set_mode(idx, [v * xi[0], v * xi[1], v * xi[2]]);
    }
    out.set_divergence_free(false);
    Ok(out)
}
