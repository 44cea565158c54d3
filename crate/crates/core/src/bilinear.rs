//! The Duhamel bilinear form
//! `B(u, v)(t) = -∫₀ᵗ e^{(t-t')Δ} P∇·(u ⊗_σ v)(t') dt'` and the forced heat
//! integral `H(g)(t) = ∫₀ᵗ e^{(t-t')Δ} P g(t') dt'`.
//!
//! Time integration is the exponential trapezoid rule: the heat kernel is
//! applied exactly per mode and the source is interpolated linearly on each
//! step, so with `a = |ξ|²` and `z = a h`
//!
//! ```text
//! F_n = e^{-z} F_{n-1} + h (φ₁(z) - φ₂(z)) G_{n-1} + h φ₂(z) G_n
//! φ₁(z) = (1 - e^{-z}) / z,   φ₂(z) = (z - 1 + e^{-z}) / z²
//! ```

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::leray::leray_in_place;
use crate::spaces::Trajectory;

/// Per-mode step weights for one step length.
pub struct StepWeights {
    pub decay: Vec<f64>,
    pub w_prev: Vec<f64>,
    pub w_next: Vec<f64>,
}

fn phi12(z: f64) -> (f64, f64) {
    if z < 1e-3 {
        let p1 = 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0;
        let p2 = 0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0;
        (p1, p2)
    } else {
        let e = (-z).exp();
        ((1.0 - e) / z, (z - 1.0 + e) / (z * z))
    }
}

/// Cached weights for grid `g` and step `h`.
pub fn step_weights(g: &GridSpec, h: f64) -> Arc<StepWeights> {
    type Key = (usize, u64, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<StepWeights>>>> = OnceLock::new();
    let key = (g.n(), g.period().to_bits(), h.to_bits());
    let mut map = CACHE.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap();
    if map.len() > 64 {
        map.clear();
    }
    map.entry(key)
        .or_insert_with(|| {
            let xi2 = g.xi_squared();
            let mut decay = Vec::with_capacity(xi2.len());
            let mut w_prev = Vec::with_capacity(xi2.len());
            let mut w_next = Vec::with_capacity(xi2.len());
            for a in xi2 {
                let z = a * h;
                let (p1, p2) = phi12(z);
                decay.push((-z).exp());
                w_prev.push(h * (p1 - p2));
                w_next.push(h * p2);
            }
            Arc::new(StepWeights { decay, w_prev, w_next })
        })
        .clone()
}

/// `-P∇·(u ⊗_σ v)` with the product formed on the grid and truncated by the
/// spherical 2/3 rule.
pub fn nonlinear_term(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    let g = *u.grid();
    g.check_same(v.grid())?;
    let n = g.n();
    let m = g.len();
    let same = std::ptr::eq(u, v) || u.coeffs() == v.coeffs();
    let (pu, pv) = if same {
        let p = u.to_physical();
        (p.clone(), p)
    } else {
        SpectralField::to_physical_pair(u, v)
    };
    let sym = |l: usize, j: usize, x: usize| 0.5 * (pu[l][x] * pv[j][x] + pv[l][x] * pu[j][x]);
    // symmetric tensor entries packed two per complex array: (00, 11), (22, 01), (02, 12)
    const PACK: [[(usize, usize); 2]; 3] = [[(0, 0), (1, 1)], [(2, 2), (0, 1)], [(0, 2), (1, 2)]];
    let plan = fft::plan(n);
    let packed: Vec<Vec<Complex64>> = PACK
        .par_iter()
        .map(|pair| {
            let [(a, b), (c, d)] = *pair;
            let mut z: Vec<Complex64> = (0..m).map(|x| Complex64::new(sym(a, b, x), sym(c, d, x))).collect();
            plan.forward(&mut z);
            z
        })
        .collect();
    let modes = g.modes();
    let mut out = SpectralField::zeros(g);
    let half = Complex64::new(0.5, 0.0);
    let neg_half_i = Complex64::new(0.0, -0.5);
    let neg_i = Complex64::new(0.0, -1.0);
    let oc = out.coeffs_mut();
    for &idx in &modes.dealiased {
        if idx == 0 {
            continue;
        }
        let cj = modes.conj[idx];
        let mut t = [Complex64::new(0.0, 0.0); 6];
        for (k, z) in packed.iter().enumerate() {
            let (zk, zc) = (z[idx], z[cj].conj());
            t[2 * k] = half * (zk + zc);
            t[2 * k + 1] = neg_half_i * (zk - zc);
        }
        // t = [T00, T11, T22, T01, T02, T12]
        let xi = modes.xi[idx];
        let d0 = neg_i * (t[0] * xi[0] + t[3] * xi[1] + t[4] * xi[2]);
        let d1 = neg_i * (t[3] * xi[0] + t[1] * xi[1] + t[5] * xi[2]);
        let d2 = neg_i * (t[4] * xi[0] + t[5] * xi[1] + t[2] * xi[2]);
        let proj = (d0 * xi[0] + d1 * xi[1] + d2 * xi[2]) / modes.xi2[idx];
        oc[idx] = d0 - proj * xi[0];
        oc[m + idx] = d1 - proj * xi[1];
        oc[2 * m + idx] = d2 - proj * xi[2];
    }
    Ok(out)
}

/// `t ↦ ∫₀ᵗ e^{(t-t')Δ} g(t') dt'` by the exponential trapezoid rule, with the
/// source produced lazily by `source(i)` for sample `i`.
pub fn duhamel_with<F>(grid: GridSpec, times: &[f64], source: F) -> Result<Trajectory>
where
    F: Fn(usize) -> Result<SpectralField> + Sync,
{
    let sources: Vec<SpectralField> = (0..times.len()).into_par_iter().map(&source).collect::<Result<_>>()?;
    duhamel_from_sources(grid, times, &sources)
}

fn duhamel_from_sources(grid: GridSpec, times: &[f64], sources: &[SpectralField]) -> Result<Trajectory> {
    let m = grid.len();
    let mut snaps = Vec::with_capacity(times.len());
    snaps.push(SpectralField::zeros(grid));
    for i in 1..times.len() {
        let w = step_weights(&grid, times[i] - times[i - 1]);
        let prev = &snaps[i - 1];
        let (ga, gb) = (&sources[i - 1], &sources[i]);
        let mut next = SpectralField::zeros(grid);
        {
            let (pc, ac, bc) = (prev.coeffs(), ga.coeffs(), gb.coeffs());
            let out = next.coeffs_mut();
            for c in 0..3 {
                for k in 0..m {
                    let x = c * m + k;
                    out[x] = pc[x] * w.decay[k] + ac[x] * w.w_prev[k] + bc[x] * w.w_next[k];
                }
            }
        }
        next.set_divergence_free(prev.is_divergence_free() && ga.is_divergence_free() && gb.is_divergence_free());
        snaps.push(next);
    }
    Trajectory::new(times.to_vec(), snaps)
}

/// `∫₀ᵗ e^{(t-t')Δ} g(t') dt'` without projection.
pub fn duhamel(g: &Trajectory) -> Result<Trajectory> {
    duhamel_from_sources(*g.grid(), g.times(), g.snapshots())
}

/// `B(u, v)` over the common time grid of `u` and `v`.
pub fn bilinear(u: &Trajectory, v: &Trajectory) -> Result<Trajectory> {
    u.check_compatible(v)
        .map_err(|e| Error::Argument(format!("bilinear form needs matching trajectories: {e}")))?;
    let same = std::ptr::eq(u, v);
    duhamel_with(*u.grid(), u.times(), |i| {
        if same {
            nonlinear_term(u.at(i), u.at(i))
        } else {
            nonlinear_term(u.at(i), v.at(i))
        }
    })
}

/// `H(g) = ∫₀ᵗ e^{(t-t')Δ} P g(t') dt'`.
pub fn heat_source(g: &Trajectory) -> Result<Trajectory> {
    duhamel_with(*g.grid(), g.times(), |i| {
        let mut f = g.at(i).clone();
        leray_in_place(&mut f);
        Ok(f)
    })
}

/// `Σ_k c_k B(u_k, v_k)` with one time recurrence.
pub fn bilinear_sum(terms: &[(f64, &Trajectory, &Trajectory)]) -> Result<Trajectory> {
    let first = terms.first().ok_or_else(|| Error::Argument("empty bilinear sum".into()))?;
    for (_, u, v) in terms {
        first.1.check_compatible(u)?;
        u.check_compatible(v)?;
    }
    duhamel_with(*first.1.grid(), first.1.times(), |i| {
        let mut acc = SpectralField::zeros(*first.1.grid());
        for (c, u, v) in terms {
            acc.axpy(*c, &nonlinear_term(u.at(i), v.at(i))?);
        }
        Ok(acc)
    })
}
