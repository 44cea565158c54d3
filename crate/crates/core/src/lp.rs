//! Littlewood-Paley blocks on the torus.
//!
//! The cutoff is the radial function
//!
//! ```text
//! φ̂(r) = 1                          r ≤ 1
//!       = f(2 - r) / (f(2 - r) + f(r - 1))   1 < r < 2,   f(x) = exp(-1/x)
//!       = 0                          r ≥ 2
//! ```
//!
//! and `Δ_j = S_{j+1} - S_j` with `S_j` the multiplier `φ̂(|ξ| / 2^j)`. Block
//! `j` is supported in `2^j < |ξ| < 2^(j+2)`; a mode at exactly `|ξ| = 2^(j+1)`
//! belongs to block `j` alone.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;

fn smooth_step_tail(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// The radial cutoff `φ̂(r)`.
pub fn cutoff(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let a = smooth_step_tail(2.0 - r);
        let b = smooth_step_tail(r - 1.0);
        a / (a + b)
    }
}

/// Symbol of `S_j` at radius `r`.
pub fn low_pass_symbol(j: i32, r: f64) -> f64 {
    cutoff(r * 2f64.powi(-j))
}

/// Symbol of `Δ_j` at radius `r`.
pub fn block_symbol(j: i32, r: f64) -> f64 {
    low_pass_symbol(j + 1, r) - low_pass_symbol(j, r)
}

type Key = (usize, u64, i32, i32);

fn key(g: &GridSpec) -> Key {
    (g.n(), g.period().to_bits(), g.j_min(), g.j_max())
}

/// Nonzero entries `(flat index, weight)` of each block multiplier,
/// `[j - j_min]`, cached per grid.
pub fn block_supports(grid: &GridSpec) -> Arc<Vec<Vec<(usize, f64)>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Vec<Vec<(usize, f64)>>>>>> = OnceLock::new();
    let mut map = CACHE.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap();
    map.entry(key(grid))
        .or_insert_with(|| {
            let modes = grid.modes();
            let v = grid
                .shells()
                .map(|j| {
                    modes
                        .xi2
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != 0 && !grid.is_nyquist(i))
                        .map(|(i, &x2)| (i, block_symbol(j, x2.sqrt())))
                        .filter(|&(_, w)| w != 0.0)
                        .collect()
                })
                .collect();
            Arc::new(v)
        })
        .clone()
}

/// `Δ_j u`; zero for shells outside the resolved range.
pub fn block(u: &SpectralField, j: i32) -> SpectralField {
    let g = *u.grid();
    let mut out = SpectralField::zeros(g);
    out.set_divergence_free(u.is_divergence_free());
    if j < g.j_min() || j > g.j_max() {
        return out;
    }
    let supports = block_supports(&g);
    let m = g.len();
    let (src, dst) = (u.coeffs(), out.coeffs_mut());
    for &(i, w) in &supports[(j - g.j_min()) as usize] {
        for c in 0..3 {
            dst[c * m + i] = src[c * m + i] * w;
        }
    }
    out
}

/// `S_j u`, the sum of all resolved blocks below `j`.
pub fn low_pass(u: &SpectralField, j: i32) -> SpectralField {
    let mut out = u.clone();
    out.apply_radial(|x2| low_pass_symbol(j, x2.sqrt()));
    out
}

/// The family `{Δ_j u}` over the resolved shells.
#[derive(Debug, Clone)]
pub struct LPBlockSet {
    j_min: i32,
    blocks: Vec<SpectralField>,
}

impl LPBlockSet {
    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_min + self.blocks.len() as i32 - 1
    }

    pub fn get(&self, j: i32) -> Option<&SpectralField> {
        if j < self.j_min {
            return None;
        }
        self.blocks.get((j - self.j_min) as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, &SpectralField)> {
        self.blocks.iter().enumerate().map(move |(i, b)| (self.j_min + i as i32, b))
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `Σ_j Δ_j u`.
    pub fn reconstruct(&self) -> SpectralField {
        let mut out = SpectralField::zeros(*self.blocks[0].grid());
        for b in &self.blocks {
            out += b;
        }
        out
    }
}

pub fn lp_decompose(u: &SpectralField) -> Result<LPBlockSet> {
    let g = *u.grid();
    if g.n_shells() < 4 {
        return Err(Error::Config("fewer than four resolved shells".into()));
    }
    let blocks = g.shells().map(|j| block(u, j)).collect();
    Ok(LPBlockSet { j_min: g.j_min(), blocks })
}
