//! Lebesgue and homogeneous Besov norms on the grid.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::lp;

/// Critical regularity `s_p = -1 + 3/p`.
pub fn critical_s(p: f64) -> f64 {
    -1.0 + 3.0 / p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovIndex {
    pub s: f64,
    pub p: f64,
    pub q: f64,
}

impl BesovIndex {
    pub fn new(s: f64, p: f64, q: f64) -> Result<Self> {
        if !(p >= 1.0) || !(q >= 1.0) || !s.is_finite() {
            return Err(Error::Argument(format!("bad Besov index ({s}, {p}, {q})")));
        }
        Ok(BesovIndex { s, p, q })
    }

    /// `Ḃ^{s_p}_{p,q}`.
    pub fn critical(p: f64, q: f64) -> Result<Self> {
        Self::new(critical_s(p), p, q)
    }
}

/// Sum with pairwise splitting; deterministic and a little more accurate than a fold.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// `ℓ^q` norm of a finite sequence; `q = ∞` is the max.
pub fn lq_norm(v: &[f64], q: f64) -> f64 {
    let m = v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if q.is_infinite() || m == 0.0 {
        return m;
    }
    let s: Vec<f64> = v.iter().map(|x| (x.abs() / m).powf(q)).collect();
    m * pairwise_sum(&s).powf(1.0 / q)
}

/// `L^p` norm of a nonnegative density sampled on the grid (rectangle rule).
/// For `p = ∞` this is the grid max, which can undershoot the true supremum.
pub fn lp_of_magnitude(mag: &[f64], grid: &GridSpec, p: f64) -> f64 {
    let m = mag.iter().fold(0.0f64, |a, &b| a.max(b));
    if p.is_infinite() || m == 0.0 {
        return m;
    }
    let inv = 1.0 / m;
    let pi = p as i32;
    let partials: Vec<f64> = if pi as f64 == p {
        mag.chunks(256).map(|c| c.iter().map(|x| (x * inv).powi(pi)).sum()).collect()
    } else {
        mag.chunks(256).map(|c| c.iter().map(|x| (x * inv).powf(p)).sum()).collect()
    };
    m * (pairwise_sum(&partials) * grid.cell_volume()).powf(1.0 / p)
}

fn magnitude(x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
    x.iter().zip(y).zip(z).map(|((a, b), c)| (a * a + b * b + c * c).sqrt()).collect()
}

/// `‖u‖_{L^p}` of the Euclidean magnitude.
pub fn lp_norm(u: &SpectralField, p: f64) -> f64 {
    let [x, y, z] = u.to_physical();
    lp_of_magnitude(&magnitude(&x, &y, &z), u.grid(), p)
}

/// `L^p` norms `[field][exponent]` of several fields. Fields are taken in
/// pairs so that three complex transforms serve six real components.
pub fn lp_norms_many(fields: &[&SpectralField], ps: &[f64]) -> Vec<Vec<f64>> {
    if fields.is_empty() {
        return Vec::new();
    }
    let grid = *fields[0].grid();
    let plan = fft::plan(grid.n());
    let m = grid.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut buf = vec![zero; m];
    let mut mag_a = vec![0.0; m];
    let mut mag_b = vec![0.0; m];
    let mut out = Vec::with_capacity(fields.len());
    // each field is normalized before packing so a small field sharing a
    // transform with a large one keeps its relative precision
    let unit = |f: &SpectralField| {
        let m = f.max_coeff();
        if m > 0.0 {
            m
        } else {
            1.0
        }
    };
    let pack = |buf: &mut Vec<Complex64>, x: &[Complex64], sx: f64, y: Option<(&[Complex64], f64)>| {
        match y {
            Some((y, sy)) => {
                for ((z, a), b) in buf.iter_mut().zip(x).zip(y) {
                    *z = Complex64::new(a.re * sx - b.im * sy, a.im * sx + b.re * sy);
                }
            }
            None => {
                for (z, a) in buf.iter_mut().zip(x) {
                    *z = a * sx;
                }
            }
        }
        plan.inverse(buf);
    };
    let finish = |mag: &mut [f64], scale: f64| -> Vec<f64> {
        mag.iter_mut().for_each(|v| *v = v.sqrt());
        ps.iter().map(|&p| scale * lp_of_magnitude(mag, &grid, p)).collect()
    };
    for pair in fields.chunks(2) {
        let f = pair[0];
        let uf = unit(f);
        pack(&mut buf, f.component(0), 1.0 / uf, Some((f.component(1), 1.0 / uf)));
        for (mg, z) in mag_a.iter_mut().zip(&buf) {
            *mg = z.re * z.re + z.im * z.im;
        }
        if pair.len() == 2 {
            let g = pair[1];
            let ug = unit(g);
            pack(&mut buf, g.component(0), 1.0 / ug, Some((g.component(1), 1.0 / ug)));
            for (mg, z) in mag_b.iter_mut().zip(&buf) {
                *mg = z.re * z.re + z.im * z.im;
            }
            pack(&mut buf, f.component(2), 1.0 / uf, Some((g.component(2), 1.0 / ug)));
            for ((ma, mb), z) in mag_a.iter_mut().zip(mag_b.iter_mut()).zip(&buf) {
                *ma += z.re * z.re;
                *mb += z.im * z.im;
            }
            out.push(finish(&mut mag_a, uf));
            out.push(finish(&mut mag_b, ug));
        } else {
            pack(&mut buf, f.component(2), 1.0 / uf, None);
            for (ma, z) in mag_a.iter_mut().zip(&buf) {
                *ma += z.re * z.re;
            }
            out.push(finish(&mut mag_a, uf));
        }
    }
    out
}

/// `‖Δ_j u‖_{L^p}` for each resolved shell `j`, indexed from `j_min`, for every `p` in `ps`:
/// `out[j - j_min][k]` belongs to `ps[k]`.
pub fn block_lp_norms(u: &SpectralField, ps: &[f64]) -> Vec<Vec<f64>> {
    let blocks: Vec<SpectralField> = u.grid().shells().map(|j| lp::block(u, j)).collect();
    let refs: Vec<&SpectralField> = blocks.iter().collect();
    lp_norms_many(&refs, ps)
}

/// Besov norm from precomputed block norms `norms[j - j_min]`.
pub fn besov_from_blocks(norms: &[f64], j_min: i32, s: f64, q: f64) -> f64 {
    let w: Vec<f64> = norms
        .iter()
        .enumerate()
        .map(|(i, &v)| 2f64.powf((j_min + i as i32) as f64 * s) * v)
        .collect();
    lq_norm(&w, q)
}

/// `‖(2^{js}‖Δ_j u‖_{L^p})_j‖_{ℓ^q}` over the resolved shells.
pub fn besov_norm(u: &SpectralField, idx: BesovIndex) -> f64 {
    let norms: Vec<f64> = block_lp_norms(u, &[idx.p]).into_iter().map(|v| v[0]).collect();
    besov_from_blocks(&norms, u.grid().j_min(), idx.s, idx.q)
}

/// Several Besov norms with one block decomposition.
pub fn besov_norms(u: &SpectralField, idx: &[BesovIndex]) -> Vec<f64> {
    let ps: Vec<f64> = idx.iter().map(|i| i.p).collect();
    let table = block_lp_norms(u, &ps);
    idx.iter()
        .enumerate()
        .map(|(k, i)| {
            let col: Vec<f64> = table.iter().map(|row| row[k]).collect();
            besov_from_blocks(&col, u.grid().j_min(), i.s, i.q)
        })
        .collect()
}

/// Result of a Bernstein-type embedding comparison.
#[derive(Debug, Clone, Copy)]
pub struct BernsteinReport {
    pub lower: f64,
    pub upper: f64,
    /// `‖u‖_{Ḃ^{s-3(1/p1-1/p2)}_{p2,q}} / ‖u‖_{Ḃ^s_{p1,q}}`, zero for the zero field.
    pub ratio: f64,
}

/// Compares `Ḃ^s_{p1,q}` against the embedded `Ḃ^{s-3(1/p1-1/p2)}_{p2,q}`.
pub fn bernstein_check(u: &SpectralField, s: f64, p1: f64, p2: f64, q: f64) -> Result<BernsteinReport> {
    if !(p2 >= p1) {
        return Err(Error::Argument(format!("need p1 ≤ p2, got {p1}, {p2}")));
    }
    let lo = BesovIndex::new(s, p1, q)?;
    let hi = BesovIndex::new(s - 3.0 * (1.0 / p1 - 1.0 / p2), p2, q)?;
    let v = besov_norms(u, &[lo, hi]);
    let ratio = if v[0] == 0.0 { 0.0 } else { v[1] / v[0] };
    Ok(BernsteinReport { lower: v[0], upper: v[1], ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lq_edge_cases() {
        assert_eq!(lq_norm(&[3.0, 4.0], 2.0), 5.0);
        assert_eq!(lq_norm(&[3.0, -4.0], f64::INFINITY), 4.0);
        assert_eq!(lq_norm(&[0.0, 0.0], 1.0), 0.0);
    }

    #[test]
    fn pairwise_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert!((pairwise_sum(&v) - v.iter().sum::<f64>()).abs() < 1e-12);
    }
}
