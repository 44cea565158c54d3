//! Bony's decomposition of products and empirical constants for the product
//! laws and the bilinear Kato bound.
//!
//! Products of vector fields are taken componentwise, `(fg)_i = f_i g_i`,
//! formed on the grid and truncated to the spherical 2/3 set. The block
//! family is extended by one index below `j_min` holding `S_{j_min}`, mean
//! included, so that every field is exactly the sum of its blocks.

use std::fmt::Write as _;
use std::io::Write;

use crate::besov::{besov_norm, BesovIndex};
use crate::bilinear::bilinear;
use crate::error::{Error, Result};
use crate::fft;
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::lp;
use crate::spaces::{kato_norm, Trajectory};

/// `fg = T_f g + T_g f + R(f, g)`.
#[derive(Debug, Clone)]
pub struct BonyTriple {
    /// `T_f g = Σ_j S_{j−2}f · Δ_j g`
    pub low_high: SpectralField,
    /// `T_g f`
    pub high_low: SpectralField,
    /// `R(f, g) = Σ_{|j−j'|≤1} Δ_j f · Δ_{j'} g`
    pub high_high: SpectralField,
}

impl BonyTriple {
    pub fn sum(&self) -> SpectralField {
        let mut s = self.low_high.clone();
        s += &self.high_low;
        s += &self.high_high;
        s
    }
}

type Physical = [Vec<f64>; 3];

fn dealiased_forward(grid: GridSpec, x: &Physical) -> Result<SpectralField> {
    let n = grid.n();
    let (a, b) = fft::forward_pair(&x[0], &x[1], n);
    let c = fft::forward_real(&x[2], n);
    let m = grid.len();
    let mut coeffs = Vec::with_capacity(3 * m);
    coeffs.extend_from_slice(&a);
    coeffs.extend_from_slice(&b);
    coeffs.extend_from_slice(&c);
    let mask = grid.dealias_mask();
    for comp in 0..3 {
        for (k, keep) in mask.iter().enumerate() {
            if !keep {
                coeffs[comp * m + k] = Default::default();
            }
        }
    }
    SpectralField::from_coeffs(grid, coeffs, false)
}

fn zeros(m: usize) -> Physical {
    [vec![0.0; m], vec![0.0; m], vec![0.0; m]]
}

/// `acc += a ⊙ b`
fn add_product(acc: &mut Physical, a: &Physical, b: &Physical) {
    for c in 0..3 {
        for ((z, x), y) in acc[c].iter_mut().zip(&a[c]).zip(&b[c]) {
            *z += x * y;
        }
    }
}

fn add_into(acc: &mut Physical, a: &Physical) {
    for c in 0..3 {
        for (z, x) in acc[c].iter_mut().zip(&a[c]) {
            *z += x;
        }
    }
}

/// Physical samples of the extended blocks, lowest first.
fn extended_blocks(u: &SpectralField) -> Vec<Physical> {
    let g = u.grid();
    let mut out = vec![lp::low_pass(u, g.j_min()).to_physical()];
    out.extend(g.shells().map(|j| lp::block(u, j).to_physical()));
    out
}

fn prefix_sums(blocks: &[Physical], m: usize) -> Vec<Physical> {
    let mut acc = zeros(m);
    blocks
        .iter()
        .map(|b| {
            add_into(&mut acc, b);
            acc.clone()
        })
        .collect()
}

/// `T_f g` assembled from block tables.
fn paraproduct_phys(sf: &[Physical], bg: &[Physical], m: usize) -> Physical {
    let mut acc = zeros(m);
    for k in 2..bg.len() {
        add_product(&mut acc, &sf[k - 2], &bg[k]);
    }
    acc
}

/// Dealiased componentwise product `fg`.
pub fn product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    f.grid().check_same(g.grid())?;
    let (pf, pg) = SpectralField::to_physical_pair(f, g);
    let mut acc = zeros(f.grid().len());
    add_product(&mut acc, &pf, &pg);
    dealiased_forward(*f.grid(), &acc)
}

pub fn bony_decompose(f: &SpectralField, g: &SpectralField) -> Result<BonyTriple> {
    f.grid().check_same(g.grid())?;
    let grid = *f.grid();
    let m = grid.len();
    let (bf, bg) = (extended_blocks(f), extended_blocks(g));
    let (sf, sg) = (prefix_sums(&bf, m), prefix_sums(&bg, m));
    let low_high = paraproduct_phys(&sf, &bg, m);
    let high_low = paraproduct_phys(&sg, &bf, m);
    let mut rem = zeros(m);
    let k = bf.len();
    for a in 0..k {
        let mut near = bg[a].clone();
        if a > 0 {
            add_into(&mut near, &bg[a - 1]);
        }
        if a + 1 < k {
            add_into(&mut near, &bg[a + 1]);
        }
        add_product(&mut rem, &bf[a], &near);
    }
    Ok(BonyTriple {
        low_high: dealiased_forward(grid, &low_high)?,
        high_low: dealiased_forward(grid, &high_low)?,
        high_high: dealiased_forward(grid, &rem)?,
    })
}

/// The single paraproduct piece `S_{j−2}f · Δ_j g`, dealiased.
pub fn paraproduct_piece(f: &SpectralField, g: &SpectralField, j: i32) -> Result<SpectralField> {
    f.grid().check_same(g.grid())?;
    let grid = *f.grid();
    if j < grid.j_min() - 1 || j > grid.j_max() {
        return Err(Error::Argument(format!("block index {j} outside the resolved range")));
    }
    // blocks up to j − 2 sum to S_{j−1}; the lowest extended block is S_{j_min}
    let low = if j - 1 >= grid.j_min() { lp::low_pass(f, j - 1) } else { SpectralField::zeros(grid) };
    let high = if j < grid.j_min() { lp::low_pass(g, grid.j_min()) } else { lp::block(g, j) };
    let mut acc = zeros(grid.len());
    let (pl, pb) = SpectralField::to_physical_pair(&low, &high);
    add_product(&mut acc, &pl, &pb);
    dealiased_forward(grid, &acc)
}

/// Exponents of one product law: `f ∈ Ḃ^s_{p,q}`, `g ∈ Ḃ^t_{p',q'}`, result
/// in `Ḃ^{s+t}_{p̄,q̄}` with `1/p̄ = 1/p + 1/p'` and `1/q̄ = 1/q + 1/q'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductExponents {
    pub s: f64,
    pub t: f64,
    pub p: f64,
    pub p_prime: f64,
    pub q: f64,
    pub q_prime: f64,
}

fn harmonic(a: f64, b: f64) -> f64 {
    1.0 / (1.0 / a + 1.0 / b)
}

impl ProductExponents {
    pub fn bar_p(&self) -> f64 {
        harmonic(self.p, self.p_prime)
    }

    pub fn bar_q(&self) -> f64 {
        harmonic(self.q, self.q_prime)
    }

    fn check_ranges(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("p'", self.p_prime), ("q", self.q), ("q'", self.q_prime)] {
            if !(v >= 1.0) {
                return Err(Error::Argument(format!("{name} = {v} must be ≥ 1")));
            }
        }
        if self.bar_p() < 1.0 || self.bar_q() < 1.0 {
            return Err(Error::Argument(format!(
                "1/p + 1/p' and 1/q + 1/q' must not exceed 1 (p̄ = {}, q̄ = {})",
                self.bar_p(),
                self.bar_q()
            )));
        }
        Ok(())
    }

    fn tag(&self) -> String {
        format!(
            "s={};t={};p={};p'={};q={};q'={}",
            self.s, self.t, self.p, self.p_prime, self.q, self.q_prime
        )
    }
}

/// One row of a constant sweep: `lhs ≤ C · rhs` with `ratio = lhs / rhs`.
#[derive(Debug, Clone)]
pub struct EstimateRow {
    pub check_id: String,
    /// `name=value` pairs separated by `;`.
    pub exponents: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl EstimateRow {
    fn new(check_id: &str, exponents: String, lhs: f64, rhs: f64) -> Self {
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
        EstimateRow { check_id: check_id.into(), exponents, lhs, rhs, ratio }
    }
}

/// Both product laws for one pair: the low-high paraproduct with
/// `law_t.s < 0` and the remainder with `law_r.s + law_r.t > 0`.
pub fn product_estimate_check(
    f: &SpectralField,
    g: &SpectralField,
    law_t: ProductExponents,
    law_r: ProductExponents,
) -> Result<[EstimateRow; 2]> {
    law_t.check_ranges()?;
    law_r.check_ranges()?;
    if !(law_t.s < 0.0) {
        return Err(Error::Argument(format!("paraproduct law needs s < 0, got {}", law_t.s)));
    }
    if !(law_r.s + law_r.t > 0.0) {
        return Err(Error::Argument(format!("remainder law needs s + t > 0, got {}", law_r.s + law_r.t)));
    }
    let bony = bony_decompose(f, g)?;
    let row = |id: &str, law: &ProductExponents, piece: &SpectralField| -> Result<EstimateRow> {
        let lhs = besov_norm(piece, BesovIndex::new(law.s + law.t, law.bar_p(), law.bar_q())?);
        let rhs = besov_norm(f, BesovIndex::new(law.s, law.p, law.q)?)
            * besov_norm(g, BesovIndex::new(law.t, law.p_prime, law.q_prime)?);
        Ok(EstimateRow::new(id, law.tag(), lhs, rhs))
    };
    Ok([row("paraproduct", &law_t, &bony.low_high)?, row("remainder", &law_r, &bony.high_high)?])
}

/// `(p, q, r)` of the bilinear Kato bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KatoExponents {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl KatoExponents {
    /// `(1/p + 1/q)⁻¹ + (1/3 + 1/r − 1/p − 1/q)⁻¹`
    pub fn blowup_factor(&self) -> f64 {
        let a = 1.0 / self.p + 1.0 / self.q;
        1.0 / a + 1.0 / (1.0 / 3.0 + 1.0 / self.r - a)
    }

    pub fn validate(&self) -> Result<()> {
        let a = 1.0 / self.p + 1.0 / self.q;
        let inv_r = 1.0 / self.r;
        if !(self.p > 3.0 && self.q > 3.0 && self.r > 3.0) {
            return Err(Error::Argument(format!(
                "Kato exponents must exceed 3, got ({}, {}, {})",
                self.p, self.q, self.r
            )));
        }
        if !(a > 0.0 && a < 1.0 / 3.0 + inv_r && inv_r <= a && a <= 1.0) {
            return Err(Error::Argument(format!(
                "exponents (p, q, r) = ({}, {}, {}) outside the admissible window",
                self.p, self.q, self.r
            )));
        }
        Ok(())
    }
}

/// `‖B(f, g)‖_{𝒦_r(T)}` against `[(1/p+1/q)⁻¹ + (1/3+1/r−1/p−1/q)⁻¹] ‖f‖_{𝒦_p}‖g‖_{𝒦_q}`;
/// the ratio is the empirical constant.
pub fn bilinear_kato_check(f: &Trajectory, g: &Trajectory, exps: KatoExponents, t_end: f64) -> Result<EstimateRow> {
    exps.validate()?;
    f.check_compatible(g)?;
    let tag = format!("p={};q={};r={}", exps.p, exps.q, exps.r);
    let (kf, kg) = (kato_norm(f, exps.p, t_end, 0)?, kato_norm(g, exps.q, t_end, 0)?);
    if kf == 0.0 || kg == 0.0 {
        return Ok(EstimateRow::new("bilinear_kato", tag, 0.0, 0.0));
    }
    let b = bilinear(f, g)?;
    let lhs = kato_norm(&b, exps.r, t_end, 0)?;
    Ok(EstimateRow::new("bilinear_kato", tag, lhs, exps.blowup_factor() * kf * kg))
}

#[derive(Debug, Clone, Default)]
pub struct EstimateReport {
    pub rows: Vec<EstimateRow>,
}

pub const ESTIMATE_REPORT_HEADER: &str = "check_id,exponents,lhs,rhs,ratio";

impl EstimateReport {
    pub fn push(&mut self, row: EstimateRow) {
        self.rows.push(row);
    }

    /// Largest ratio among rows with the given id.
    pub fn max_ratio(&self, check_id: &str) -> f64 {
        self.rows.iter().filter(|r| r.check_id == check_id).map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(ESTIMATE_REPORT_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:e},{:e},{:e}", r.check_id, r.exponents, r.lhs, r.rhs, r.ratio);
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::random_bandlimited;
    use rustfft::num_complex::Complex64;

    fn grid() -> GridSpec {
        GridSpec::new(16).unwrap()
    }

    #[test]
    fn reconstruction_is_exact() {
        let g = grid();
        let f = random_bandlimited(g, 1.0, 5.0, 1.0, 1).unwrap();
        let h = random_bandlimited(g, 1.0, 5.0, 1.0, 2).unwrap();
        let b = bony_decompose(&f, &h).unwrap();
        assert!(b.sum().rel_distance(&product(&f, &h).unwrap()) < 1e-12);
    }

    #[test]
    fn constant_factor_only_feeds_the_paraproduct() {
        let g = grid();
        let mut f = SpectralField::zeros(g);
        f.set_mode(0, [Complex64::new(1.5, 0.0), Complex64::new(-0.5, 0.0), Complex64::new(2.0, 0.0)]);
        let h = random_bandlimited(g, 2.5, 5.0, 1.0, 3).unwrap();
        let b = bony_decompose(&f, &h).unwrap();
        assert!(b.high_low.max_coeff() < 1e-15 && b.high_high.max_coeff() < 1e-15);
        assert!(b.low_high.rel_distance(&product(&f, &h).unwrap()) < 1e-13);
    }

    #[test]
    fn exponent_guards() {
        let law = ProductExponents { s: -0.5, t: 1.0, p: 4.0, p_prime: 4.0, q: f64::INFINITY, q_prime: 2.0 };
        let f = random_bandlimited(grid(), 1.0, 3.0, 1.0, 1).unwrap();
        assert!(product_estimate_check(&f, &f, law, law).is_ok());
        assert!(product_estimate_check(&f, &f, ProductExponents { s: 0.5, ..law }, law).is_err());
        assert!(product_estimate_check(&f, &f, law, ProductExponents { t: 0.4, ..law }).is_err());
        assert!(product_estimate_check(&f, &f, ProductExponents { p: 1.2, ..law }, law).is_err());
        assert!(KatoExponents { p: 6.0, q: 6.0, r: 6.0 }.validate().is_ok());
        assert!(KatoExponents { p: 4.0, q: 4.0, r: 6.0 }.validate().is_err());
        assert!(KatoExponents { p: 6.0, q: 6.0, r: 2.0 }.validate().is_err());
    }

    #[test]
    fn zero_factor_gives_zero_rows() {
        let g = grid();
        let z = SpectralField::zeros(g);
        let h = random_bandlimited(g, 1.0, 3.0, 1.0, 4).unwrap();
        let law = ProductExponents { s: -0.5, t: 1.0, p: 4.0, p_prime: 4.0, q: f64::INFINITY, q_prime: 2.0 };
        let rows = product_estimate_check(&z, &h, law, law).unwrap();
        assert!(rows.iter().all(|r| r.lhs == 0.0 && r.rhs == 0.0));
    }
}
