//! Periodic grid description and wavevector bookkeeping.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::RangeInclusive;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// An `n × n × n` periodic grid on a cube of side `period`, together with the
/// range of dyadic shells `[j_min, j_max]` that the Littlewood-Paley machinery
/// resolves.
///
/// Shell `j` is the annulus `2^j ≤ |ξ| ≤ 2^(j+2)` of physical wavenumbers. The
/// default range is chosen so that every nonzero lattice mode below Nyquist
/// is covered by the partition of unity: `j_min = ⌊log2 k₀⌋ - 1` where
/// `k₀ = 2π / period`, and `j_max = ⌊log2 k_nyq⌋ - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    period: f64,
    j_min: i32,
    j_max: i32,
}

impl GridSpec {
    /// Grid on the standard `2π`-torus with the default shell range.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_period(n, 2.0 * PI)
    }

    pub fn with_period(n: usize, period: f64) -> Result<Self> {
        check_n(n)?;
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        let k0 = 2.0 * PI / period;
        let nyq = k0 * (n / 2) as f64;
        let j_min = (k0.log2() + 1e-9).floor() as i32 - 1;
        let j_max = (nyq.log2() + 1e-9).floor() as i32 - 1;
        Self::with_shells(n, period, j_min, j_max)
    }

    pub fn with_shells(n: usize, period: f64, j_min: i32, j_max: i32) -> Result<Self> {
        check_n(n)?;
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        if j_max - j_min < 3 {
            return Err(Error::Config(format!(
                "need at least four resolved shells, got [{j_min}, {j_max}]"
            )));
        }
        let g = GridSpec { n, period, j_min, j_max };
        if 2f64.powi(j_max + 1) > g.nyquist() * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "shell {j_max} reaches past the Nyquist wavenumber {}",
                g.nyquist()
            )));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn shells(&self) -> RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    pub fn n_shells(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    /// Number of grid points `n³`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Smallest nonzero wavenumber `2π / period`.
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn nyquist(&self) -> f64 {
        self.fundamental() * (self.n / 2) as f64
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn volume(&self) -> f64 {
        self.period.powi(3)
    }

    /// Signed integer wavenumber of a 1D index (Nyquist maps to `-n/2`).
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// 1D index of a signed integer wavenumber.
    #[inline]
    pub fn index_of(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    #[inline]
    pub fn flat(&self, i0: usize, i1: usize, i2: usize) -> usize {
        (i0 * self.n + i1) * self.n + i2
    }

    #[inline]
    pub fn unflat(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    /// Integer wavevector of a flat index.
    #[inline]
    pub fn int_wavevector(&self, idx: usize) -> [i64; 3] {
        let (a, b, c) = self.unflat(idx);
        [self.wavenumber(a), self.wavenumber(b), self.wavenumber(c)]
    }

    /// Physical wavevector `ξ = k₀ k` of a flat index.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let k = self.int_wavevector(idx);
        let k0 = self.fundamental();
        [k0 * k[0] as f64, k0 * k[1] as f64, k0 * k[2] as f64]
    }

    /// Flat index of `-k`.
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.n;
        let (a, b, c) = self.unflat(idx);
        self.flat((n - a) % n, (n - b) % n, (n - c) % n)
    }

    /// True when any component sits on the Nyquist plane; these modes are kept at zero.
    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let h = self.n / 2;
        let (a, b, c) = self.unflat(idx);
        a == h || b == h || c == h
    }

    /// Squared physical wavenumbers `|ξ|²` for every flat index.
    pub fn xi_squared(&self) -> Vec<f64> {
        self.modes().xi2.clone()
    }

    /// Shared per-mode tables for this lattice.
    pub fn modes(&self) -> Arc<ModeTable> {
        type Key = (usize, u64);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<ModeTable>>>> = OnceLock::new();
        let mut map = CACHE.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap();
        map.entry((self.n, self.period.to_bits())).or_insert_with(|| Arc::new(ModeTable::new(self))).clone()
    }

    /// Modes kept by the spherical 2/3 rule: `|k| ≤ n/3` in lattice units.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let cut = self.n as f64 / 3.0;
        (0..self.len())
            .map(|idx| {
                let k = self.int_wavevector(idx);
                let r2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
                !self.is_nyquist(idx) && r2 <= cut * cut
            })
            .collect()
    }

    /// Physical radius below which products are alias-free.
    pub fn dealias_radius(&self) -> f64 {
        self.fundamental() * self.n as f64 / 3.0
    }

    /// Same lattice and shells.
    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.n == other.n
            && self.j_min == other.j_min
            && self.j_max == other.j_max
            && (self.period - other.period).abs() <= 1e-12 * self.period
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Wavevectors, conjugate indices and the dealiased index set of a lattice.
#[derive(Debug)]
pub struct ModeTable {
    pub xi: Vec<[f64; 3]>,
    pub xi2: Vec<f64>,
    pub conj: Vec<usize>,
    /// Flat indices kept by the spherical 2/3 rule, ascending.
    pub dealiased: Vec<usize>,
}

impl ModeTable {
    fn new(g: &GridSpec) -> Self {
        let xi: Vec<[f64; 3]> = (0..g.len()).map(|i| g.wavevector(i)).collect();
        let xi2 = xi.iter().map(|x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).collect();
        let conj = (0..g.len()).map(|i| g.conjugate_index(i)).collect();
        let dealiased = g.dealias_mask().iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect();
        ModeTable { xi, xi2, conj, dealiased }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 16 || !n.is_power_of_two() {
        return Err(Error::Config(format!(
            "n_points must be a power of two ≥ 16, got {n}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shells_cover_lattice() {
        let g = GridSpec::new(32).unwrap();
        assert_eq!((g.j_min(), g.j_max()), (-1, 3));
        assert_eq!(g.nyquist(), 16.0);
        let g = GridSpec::new(64).unwrap();
        assert_eq!((g.j_min(), g.j_max()), (-1, 4));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(8).is_err());
        assert!(GridSpec::new(24).is_err());
        assert!(GridSpec::with_shells(32, 2.0 * PI, 0, 4).is_err());
        assert!(GridSpec::with_shells(32, 2.0 * PI, 1, 3).is_err());
    }

    #[test]
    fn shorter_period_shifts_shells() {
        let g = GridSpec::with_period(32, PI).unwrap();
        assert_eq!((g.j_min(), g.j_max()), (0, 4));
    }

    #[test]
    fn conjugate_index_negates() {
        let g = GridSpec::new(16).unwrap();
        for idx in [0, 1, 17, 300, 4095] {
            let k = g.int_wavevector(idx);
            let c = g.int_wavevector(g.conjugate_index(idx));
            if !g.is_nyquist(idx) {
                assert_eq!(c, [-k[0], -k[1], -k[2]]);
            }
        }
    }
}
