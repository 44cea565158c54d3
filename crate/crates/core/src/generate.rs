//! Deterministic initial data: random band-limited fields, Taylor-Green-type
//! vortices and single-shell fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::leray::leray_in_place;

/// Real field with `û(k) = a`, `û(-k) = conj(a)`, not projected.
pub fn mode_pair(grid: GridSpec, k: [i64; 3], a: [Complex64; 3]) -> Result<SpectralField> {
    let h = (grid.n() / 2) as i64;
    if k.iter().any(|c| c.abs() >= h) || k == [0, 0, 0] {
        return Err(Error::Argument(format!("mode {k:?} not representable")));
    }
    let idx = grid.flat(grid.index_of(k[0]), grid.index_of(k[1]), grid.index_of(k[2]));
    let mut u = SpectralField::zeros(grid);
    u.set_divergence_free(false);
    u.set_mode(idx, a);
    u.set_mode(grid.conjugate_index(idx), [a[0].conj(), a[1].conj(), a[2].conj()]);
    Ok(u)
}

/// Random divergence-free field with modes in `xi_lo ≤ |ξ| ≤ xi_hi`, unit
/// coefficient norm scaled by `amplitude`.
///
/// Modes are drawn in lexicographic order of the integer wavevector box, so
/// the same seed gives the same function on every grid that resolves the band.
pub fn random_bandlimited(grid: GridSpec, xi_lo: f64, xi_hi: f64, amplitude: f64, seed: u64) -> Result<SpectralField> {
    let k0 = grid.fundamental();
    if !(xi_lo >= 0.0 && xi_hi > xi_lo) {
        return Err(Error::Argument(format!("bad band [{xi_lo}, {xi_hi}]")));
    }
    let kmax = (xi_hi / k0 + 1e-9).floor() as i64;
    if kmax >= (grid.n() / 2) as i64 {
        return Err(Error::Argument(format!("band edge {xi_hi} at or past Nyquist {}", grid.nyquist())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = SpectralField::zeros(grid);
    let (lo2, hi2) = ((xi_lo / k0).powi(2) - 1e-9, (xi_hi / k0).powi(2) + 1e-9);
    for a in -kmax..=kmax {
        for b in -kmax..=kmax {
            for c in -kmax..=kmax {
                let r2 = (a * a + b * b + c * c) as f64;
                if r2 == 0.0 || r2 < lo2 || r2 > hi2 {
                    continue;
                }
                let mut v = [Complex64::new(0.0, 0.0); 3];
                for z in v.iter_mut() {
                    *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
                let idx = grid.flat(grid.index_of(a), grid.index_of(b), grid.index_of(c));
                u.set_mode(idx, v);
            }
        }
    }
    u.symmetrize();
    leray_in_place(&mut u);
    let norm = u.coeff_norm();
    if norm == 0.0 {
        return Err(Error::Argument(format!("band [{xi_lo}, {xi_hi}] holds no lattice modes")));
    }
    u.scale(amplitude / norm);
    Ok(u)
}

/// `A (sin kx cos ky cos kz, -cos kx sin ky cos kz, 0)` for integer `k`.
pub fn taylor_green_like(grid: GridSpec, k: i64, amplitude: f64) -> Result<SpectralField> {
    if k <= 0 || k >= (grid.n() / 2) as i64 {
        return Err(Error::Argument(format!("Taylor-Green wavenumber {k} out of range")));
    }
    let n = grid.n();
    let h = grid.spacing() * grid.fundamental() * k as f64;
    let mut u0 = vec![0.0; grid.len()];
    let mut u1 = vec![0.0; grid.len()];
    for a in 0..n {
        let (sx, cx) = (a as f64 * h).sin_cos();
        for b in 0..n {
            let (sy, cy) = (b as f64 * h).sin_cos();
            for c in 0..n {
                let cz = (c as f64 * h).cos();
                let idx = grid.flat(a, b, c);
                u0[idx] = amplitude * sx * cy * cz;
                u1[idx] = -amplitude * cx * sy * cz;
            }
        }
    }
    let zero = vec![0.0; grid.len()];
    let mut u = SpectralField::from_physical(grid, [&u0, &u1, &zero])?;
    leray_in_place(&mut u);
    Ok(u)
}

/// Curl of a Gaussian stream function `exp(-|x|²/2w²)(1, 1, 1)` centred at the
/// origin, truncated to `|k| ≤ k_max` lattice units; unit coefficient norm
/// scaled by `amplitude`.
pub fn localized_bump(grid: GridSpec, width: f64, k_max: i64, amplitude: f64) -> Result<SpectralField> {
    if !(width > 0.0) || k_max < 1 || k_max >= (grid.n() / 2) as i64 {
        return Err(Error::Argument(format!("bad bump parameters width {width}, k_max {k_max}")));
    }
    let k0 = grid.fundamental();
    let mut u = SpectralField::zeros(grid);
    let i = Complex64::new(0.0, 1.0);
    for a in -k_max..=k_max {
        for b in -k_max..=k_max {
            for c in -k_max..=k_max {
                let r2 = a * a + b * b + c * c;
                if r2 == 0 || r2 > k_max * k_max {
                    continue;
                }
                let xi = [a as f64 * k0, b as f64 * k0, c as f64 * k0];
                let psi = (-0.5 * (r2 as f64) * k0 * k0 * width * width).exp();
                // i ξ × (1, 1, 1) ψ̂
                let cross = [xi[1] - xi[2], xi[2] - xi[0], xi[0] - xi[1]];
                let idx = grid.flat(grid.index_of(a), grid.index_of(b), grid.index_of(c));
                u.set_mode(idx, cross.map(|x| i * (x * psi)));
            }
        }
    }
    let norm = u.coeff_norm();
    u.scale(amplitude / norm);
    u.set_divergence_free(true);
    Ok(u)
}

/// Divergence-free field whose modes all lie on the sphere `|ξ| = 2^{j0+1}`,
/// hence inside block `j0` alone. Random phases from `seed`; unit coefficient
/// norm scaled by `amplitude`.
pub fn shell_bump(grid: GridSpec, j0: i32, amplitude: f64, seed: u64) -> Result<SpectralField> {
    if j0 < grid.j_min() || j0 > grid.j_max() {
        return Err(Error::Argument(format!("shell {j0} outside resolved range")));
    }
    let r = 2f64.powi(j0 + 1) / grid.fundamental();
    let ri = r.round() as i64;
    if (r - ri as f64).abs() > 1e-9 || ri < 1 {
        return Err(Error::Argument(format!("no lattice modes on the sphere of shell {j0}")));
    }
    let mut u = random_sphere(grid, ri, seed)?;
    let norm = u.coeff_norm();
    if norm == 0.0 {
        return Err(Error::Argument(format!("shell {j0} sphere holds no lattice modes")));
    }
    u.scale(amplitude / norm);
    Ok(u)
}

fn random_sphere(grid: GridSpec, r: i64, seed: u64) -> Result<SpectralField> {
    if r >= (grid.n() / 2) as i64 {
        return Err(Error::Argument("sphere reaches Nyquist".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = SpectralField::zeros(grid);
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                if a * a + b * b + c * c != r * r {
                    continue;
                }
                let mut v = [Complex64::new(0.0, 0.0); 3];
                for z in v.iter_mut() {
                    *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
                let idx = grid.flat(grid.index_of(a), grid.index_of(b), grid.index_of(c));
                u.set_mode(idx, v);
            }
        }
    }
    u.symmetrize();
    leray_in_place(&mut u);
    Ok(u)
}
