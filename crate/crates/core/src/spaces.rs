//! Space-time norms over trajectories: Lebesgue-in-time Besov norms,
//! Chemin-Lerner norms, the scaling-invariant `𝓛^{a:b}_{p,q}` family and
//! Kato norms.
//!
//! Everything is derived from a per-trajectory table of block `L^p` norms,
//! so one decomposition serves many norms.

use std::fmt::Write as _;
use std::io::Write;

use crate::besov::{besov_from_blocks, block_lp_norms, critical_s, lp_norms_many, lq_norm, BesovIndex};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::heat::heat_multiplier;

const TIME_EPS: f64 = 1e-12;

/// A field sampled on a strictly increasing time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: GridSpec,
    times: Vec<f64>,
    snapshots: Vec<SpectralField>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, snapshots: Vec<SpectralField>) -> Result<Self> {
        if times.is_empty() || times.len() != snapshots.len() {
            return Err(Error::Argument("times and snapshots must be nonempty and aligned".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument("times must be strictly increasing".into()));
        }
        let grid = *snapshots[0].grid();
        for s in &snapshots[1..] {
            grid.check_same(s.grid())?;
        }
        Ok(Trajectory { grid, times, snapshots })
    }

    pub fn uniform_times(dt: f64, n_steps: usize) -> Vec<f64> {
        (0..=n_steps).map(|i| i as f64 * dt).collect()
    }

    pub fn zeros(grid: GridSpec, times: Vec<f64>) -> Result<Self> {
        let snaps = vec![SpectralField::zeros(grid); times.len()];
        Self::new(times, snaps)
    }

    pub fn constant(u: &SpectralField, times: Vec<f64>) -> Result<Self> {
        let snaps = vec![u.clone(); times.len()];
        Self::new(times, snaps)
    }

    /// `t ↦ e^{tΔ}u₀`.
    pub fn heat(u0: &SpectralField, times: Vec<f64>) -> Result<Self> {
        let g = *u0.grid();
        let snaps = times
            .iter()
            .map(|&t| {
                if t < 0.0 {
                    return Err(Error::Argument("negative time".into()));
                }
                Ok(u0.multiplied(&heat_multiplier(&g, t)))
            })
            .collect::<Result<_>>()?;
        Self::new(times, snaps)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[SpectralField] {
        &self.snapshots
    }

    pub fn snapshots_mut(&mut self) -> &mut [SpectralField] {
        &mut self.snapshots
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn at(&self, i: usize) -> &SpectralField {
        &self.snapshots[i]
    }

    pub fn last(&self) -> &SpectralField {
        self.snapshots.last().unwrap()
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Uniform step, or `None` when the grid is not uniform.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let h = self.times[1] - self.times[0];
        let ok = self.times.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
        ok.then_some(h)
    }

    pub fn check_compatible(&self, other: &Trajectory) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.times.len() != other.times.len()
            || self.times.iter().zip(&other.times).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()))
        {
            return Err(Error::Argument("trajectories live on different time grids".into()));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Trajectory {
        Trajectory { grid: self.grid, times: self.times.clone(), snapshots: self.snapshots.iter().map(f).collect() }
    }

    pub fn scaled(&self, a: f64) -> Trajectory {
        self.map(|u| u.scaled(a))
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Trajectory) {
        debug_assert!(self.check_compatible(other).is_ok());
        for (x, y) in self.snapshots.iter_mut().zip(&other.snapshots) {
            x.axpy(a, y);
        }
    }

    pub fn add(&self, other: &Trajectory) -> Trajectory {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Trajectory) -> Trajectory {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Samples `[i0, i1]` inclusive.
    pub fn window(&self, i0: usize, i1: usize) -> Result<Trajectory> {
        if i0 > i1 || i1 >= self.len() {
            return Err(Error::Argument(format!("bad sample window [{i0}, {i1}]")));
        }
        Trajectory::new(self.times[i0..=i1].to_vec(), self.snapshots[i0..=i1].to_vec())
    }

    /// Largest coefficient-space distance over time, relative to the largest norm of `other`.
    pub fn rel_distance(&self, other: &Trajectory) -> f64 {
        let d = self
            .snapshots
            .iter()
            .zip(&other.snapshots)
            .map(|(a, b)| (a - b).coeff_norm())
            .fold(0.0, f64::max);
        let r = other.snapshots.iter().map(|b| b.coeff_norm()).fold(0.0, f64::max);
        if r == 0.0 {
            d
        } else {
            d / r
        }
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.snapshots.iter().map(|u| u.coeff_norm()).fold(0.0, f64::max)
    }
}

/// Block `L^p` norms `[time][shell][exponent]` of one trajectory.
#[derive(Debug, Clone)]
pub struct BlockTable {
    times: Vec<f64>,
    j_min: i32,
    ps: Vec<f64>,
    table: Vec<Vec<Vec<f64>>>,
}

impl BlockTable {
    pub fn new(traj: &Trajectory, ps: &[f64]) -> Self {
        let table = traj.snapshots.iter().map(|u| block_lp_norms(u, ps)).collect();
        BlockTable { times: traj.times.clone(), j_min: traj.grid.j_min(), ps: ps.to_vec(), table }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn column(&self, p: f64) -> Result<usize> {
        self.ps
            .iter()
            .position(|&x| x == p || (x.is_infinite() && p.is_infinite()))
            .ok_or_else(|| Error::Argument(format!("block table holds no p = {p}")))
    }

    fn sample_range(&self, t1: f64, t2: f64) -> Result<(usize, usize)> {
        let tol = TIME_EPS * (1.0 + t2.abs());
        let (first, last) = (self.times[0], *self.times.last().unwrap());
        if t1 > t2 || t1 < first - tol || t2 > last + tol {
            return Err(Error::Argument(format!(
                "interval [{t1}, {t2}] outside trajectory range [{first}, {last}]"
            )));
        }
        let i0 = self.times.iter().position(|&t| t >= t1 - tol).unwrap();
        let i1 = self.times.iter().rposition(|&t| t <= t2 + tol).unwrap();
        if i0 > i1 {
            return Err(Error::Argument(format!("no samples in [{t1}, {t2}]")));
        }
        Ok((i0, i1))
    }

    /// Besov norm of each sample.
    pub fn besov_series(&self, idx: BesovIndex) -> Result<Vec<f64>> {
        let c = self.column(idx.p)?;
        Ok(self
            .table
            .iter()
            .map(|row| {
                let col: Vec<f64> = row.iter().map(|v| v[c]).collect();
                besov_from_blocks(&col, self.j_min, idx.s, idx.q)
            })
            .collect())
    }

    /// `‖2^{js}‖Δ_j u‖_{L^ρ([t1,t2]; L^p)}‖_{ℓ^q}`.
    pub fn chemin_lerner(&self, idx: BesovIndex, rho: f64, t1: f64, t2: f64) -> Result<f64> {
        let c = self.column(idx.p)?;
        let (i0, i1) = self.sample_range(t1, t2)?;
        let n_shells = self.table[0].len();
        let per_shell: Vec<f64> = (0..n_shells)
            .map(|k| {
                let series: Vec<f64> = (i0..=i1).map(|i| self.table[i][k][c]).collect();
                let w = 2f64.powf((self.j_min + k as i32) as f64 * idx.s);
                w * time_norm(&self.times[i0..=i1], &series, rho)
            })
            .collect();
        Ok(lq_norm(&per_shell, idx.q))
    }

    /// `‖ ‖u(t)‖_{Ḃ^s_{p,q}} ‖_{L^ρ([t1,t2])}`.
    pub fn lebesgue(&self, idx: BesovIndex, rho: f64, t1: f64, t2: f64) -> Result<f64> {
        let (i0, i1) = self.sample_range(t1, t2)?;
        let series = self.besov_series(idx)?;
        Ok(time_norm(&self.times[i0..=i1], &series[i0..=i1], rho))
    }

    /// `𝓛^{a:b}_{p,q}(t1,t2)`: the larger endpoint norm, `r ∈ {a, b}` with regularity `s_p + 2/r`.
    pub fn script(&self, a: f64, b: f64, p: f64, q: f64, t1: f64, t2: f64) -> Result<f64> {
        if !(1.0 <= a && a <= b) {
            return Err(Error::Argument(format!("need 1 ≤ a ≤ b, got a = {a}, b = {b}")));
        }
        let mut best: f64 = 0.0;
        for r in [a, b] {
            let idx = BesovIndex::new(critical_s(p) + 2.0 / r, p, q)?;
            best = best.max(self.chemin_lerner(idx, r, t1, t2)?);
            if a == b {
                break;
            }
        }
        Ok(best)
    }

    /// Running `𝓛^{a:b}_{p,q}(0, t_i)` for every sample.
    pub fn running_script(&self, a: f64, b: f64, p: f64, q: f64) -> Result<Vec<f64>> {
        let t0 = self.times[0];
        self.times.iter().map(|&t| self.script(a, b, p, q, t0, t)).collect()
    }
}

/// `L^ρ` norm in time of nonnegative samples: composite trapezoid of `f^ρ`
/// for finite `ρ`, max for `ρ = ∞`.
pub fn time_norm(times: &[f64], f: &[f64], rho: f64) -> f64 {
    let m = f.iter().fold(0.0f64, |a, &b| a.max(b));
    if rho.is_infinite() || m == 0.0 {
        return m;
    }
    let g: Vec<f64> = f.iter().map(|v| (v / m).powf(rho)).collect();
    let integral: f64 = times.windows(2).zip(g.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum();
    m * integral.powf(1.0 / rho)
}

/// Which space-time norm to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Lebesgue { rho: f64 },
    CheminLerner { rho: f64 },
    Script { a: f64, b: f64 },
    Kato,
    Kato1,
}

impl NormKind {
    pub fn tag(&self) -> &'static str {
        match self {
            NormKind::Lebesgue { .. } => "lebesgue",
            NormKind::CheminLerner { .. } => "chemin_lerner",
            NormKind::Script { .. } => "script",
            NormKind::Kato => "kato",
            NormKind::Kato1 => "kato1",
        }
    }

    fn exponents(&self) -> (f64, f64) {
        match *self {
            NormKind::Lebesgue { rho } | NormKind::CheminLerner { rho } => (rho, rho),
            NormKind::Script { a, b } => (a, b),
            NormKind::Kato | NormKind::Kato1 => (f64::NAN, f64::NAN),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeNormSpec {
    pub kind: NormKind,
    /// Spatial index; for `Script` only `p, q` are used and for Kato norms only `p`.
    pub besov: BesovIndex,
    pub interval: (f64, f64),
}

impl SpaceTimeNormSpec {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.kind.exponents();
        match self.kind {
            NormKind::Lebesgue { rho } | NormKind::CheminLerner { rho } if !(rho >= 1.0) => {
                return Err(Error::Argument(format!("time exponent must be ≥ 1, got {rho}")))
            }
            NormKind::Script { .. } if !(1.0 <= a && a <= b) => {
                return Err(Error::Argument(format!("need 1 ≤ a ≤ b, got a = {a}, b = {b}")))
            }
            NormKind::Kato | NormKind::Kato1 if !(self.besov.p > 3.0) => {
                return Err(Error::Argument(format!("Kato norms need q > 3, got {}", self.besov.p)))
            }
            _ => {}
        }
        if self.interval.0 > self.interval.1 {
            return Err(Error::Argument("reversed time interval".into()));
        }
        Ok(())
    }
}

pub fn evaluate(traj: &Trajectory, spec: &SpaceTimeNormSpec) -> Result<f64> {
    spec.validate()?;
    let (t1, t2) = spec.interval;
    let b = spec.besov;
    match spec.kind {
        NormKind::Kato => kato_norm_on(traj, b.p, t1, t2, 0),
        NormKind::Kato1 => kato_norm_on(traj, b.p, t1, t2, 1),
        kind => {
            let table = BlockTable::new(traj, &[b.p]);
            match kind {
                NormKind::Lebesgue { rho } => table.lebesgue(b, rho, t1, t2),
                NormKind::CheminLerner { rho } => table.chemin_lerner(b, rho, t1, t2),
                NormKind::Script { a, b: bb } => table.script(a, bb, b.p, b.q, t1, t2),
                _ => unreachable!(),
            }
        }
    }
}

pub fn chemin_lerner_norm(traj: &Trajectory, idx: BesovIndex, rho: f64, t1: f64, t2: f64) -> Result<f64> {
    evaluate(traj, &SpaceTimeNormSpec { kind: NormKind::CheminLerner { rho }, besov: idx, interval: (t1, t2) })
}

/// `𝓛^{a:b}_{p,q}(0, T)` with `p, q` taken from `idx_base`.
pub fn script_norm(traj: &Trajectory, a: f64, b: f64, idx_base: BesovIndex, t_end: f64) -> Result<f64> {
    let t0 = traj.times()[0];
    evaluate(traj, &SpaceTimeNormSpec { kind: NormKind::Script { a, b }, besov: idx_base, interval: (t0, t_end) })
}

/// Kato norm over `(0, T]`; samples at `t = 0` are skipped.
///
/// Order 0 is `sup t^{-s_q/2}‖u(t)‖_{L^q}`, order 1 is `sup t^{1/2-s_q/2}‖u(t)‖_{Ḃ¹_{q,∞}}`.
pub fn kato_norm(traj: &Trajectory, q: f64, t_end: f64, order: u8) -> Result<f64> {
    kato_norm_on(traj, q, 0.0, t_end, order)
}

fn kato_norm_on(traj: &Trajectory, q: f64, t1: f64, t2: f64, order: u8) -> Result<f64> {
    if !(q > 3.0) {
        return Err(Error::Argument(format!("Kato norms need q > 3, got {q}")));
    }
    if t2 > traj.end_time() * (1.0 + TIME_EPS) + TIME_EPS {
        return Err(Error::Argument(format!("time {t2} past trajectory end {}", traj.end_time())));
    }
    let sq = critical_s(q);
    let picks: Vec<usize> = (0..traj.len())
        .filter(|&i| {
            let t = traj.times[i];
            t > 0.0 && t >= t1 - TIME_EPS && t <= t2 * (1.0 + TIME_EPS) + TIME_EPS
        })
        .collect();
    let values: Vec<f64> = match order {
        0 => {
            let refs: Vec<&SpectralField> = picks.iter().map(|&i| &traj.snapshots[i]).collect();
            lp_norms_many(&refs, &[q])
                .into_iter()
                .zip(&picks)
                .map(|(n, &i)| traj.times[i].powf(-sq / 2.0) * n[0])
                .collect()
        }
        1 => {
            let idx = BesovIndex::new(1.0, q, f64::INFINITY)?;
            picks
                .iter()
                .map(|&i| {
                    let b = crate::besov::besov_norm(&traj.snapshots[i], idx);
                    traj.times[i].powf(0.5 - sq / 2.0) * b
                })
                .collect()
        }
        o => return Err(Error::Argument(format!("Kato order must be 0 or 1, got {o}"))),
    };
    Ok(values.into_iter().fold(0.0, f64::max))
}

/// The four norms of the embedding chain
/// `L^{ρ1}Ḃ ⊂ 𝓛^{ρ1}Ḃ`, `𝓛^{ρ2}Ḃ ⊂ L^{ρ2}Ḃ` and the Hölder link between the
/// two Chemin-Lerner norms.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddingChain {
    pub lebesgue_rho1: f64,
    pub chemin_lerner_rho1: f64,
    pub chemin_lerner_rho2: f64,
    pub lebesgue_rho2: f64,
    /// `|I|^{1/ρ1 - 1/ρ2}`, the factor with `𝓛^{ρ1} ≤ factor · 𝓛^{ρ2}`.
    pub holder_factor: f64,
    pub holds: bool,
}

pub fn embedding_chain_check(
    traj: &Trajectory,
    rho1: f64,
    rho2: f64,
    idx: BesovIndex,
    t1: f64,
    t2: f64,
) -> Result<EmbeddingChain> {
    let q = idx.q;
    if !(1.0 <= rho1 && rho1 <= q && q <= rho2) {
        return Err(Error::Argument(format!("need 1 ≤ ρ1 ≤ q ≤ ρ2, got {rho1}, {q}, {rho2}")));
    }
    let table = BlockTable::new(traj, &[idx.p]);
    let l1 = table.lebesgue(idx, rho1, t1, t2)?;
    let c1 = table.chemin_lerner(idx, rho1, t1, t2)?;
    let c2 = table.chemin_lerner(idx, rho2, t1, t2)?;
    let l2 = table.lebesgue(idx, rho2, t1, t2)?;
    let factor = (t2 - t1).powf(1.0 / rho1 - if rho2.is_infinite() { 0.0 } else { 1.0 / rho2 });
    let slack = 1.0 + 1e-9;
    let holds = c1 <= l1 * slack && c1 <= factor * c2 * slack && l2 <= c2 * slack;
    Ok(EmbeddingChain {
        lebesgue_rho1: l1,
        chemin_lerner_rho1: c1,
        chemin_lerner_rho2: c2,
        lebesgue_rho2: l2,
        holder_factor: factor,
        holds,
    })
}

/// One row of a norm report.
#[derive(Debug, Clone, PartialEq)]
pub struct NormRow {
    pub kind: String,
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub t1: f64,
    pub t2: f64,
    pub value: f64,
}

impl NormRow {
    pub fn from_spec(spec: &SpaceTimeNormSpec, value: f64) -> Self {
        let (a, b) = spec.kind.exponents();
        NormRow {
            kind: spec.kind.tag().to_string(),
            a,
            b,
            s: spec.besov.s,
            p: spec.besov.p,
            q: spec.besov.q,
            t1: spec.interval.0,
            t2: spec.interval.1,
            value,
        }
    }

    /// A purely spatial Besov norm.
    pub fn besov(idx: BesovIndex, t: f64, value: f64) -> Self {
        NormRow { kind: "besov".into(), a: f64::NAN, b: f64::NAN, s: idx.s, p: idx.p, q: idx.q, t1: t, t2: t, value }
    }
}

#[derive(Debug, Clone, Default)]
pub struct NormReport {
    pub rows: Vec<NormRow>,
}

pub const NORM_REPORT_HEADER: &str = "norm_kind,a,b,s,p,q,t1,t2,value";

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:e}")
    }
}

impl NormReport {
    pub fn push(&mut self, row: NormRow) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(NORM_REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.kind,
                fmt_num(r.a),
                fmt_num(r.b),
                fmt_num(r.s),
                fmt_num(r.p),
                fmt_num(r.q),
                fmt_num(r.t1),
                fmt_num(r.t2),
                fmt_num(r.value)
            );
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Parses a number written by the report writers (`inf`, empty for not-applicable).
pub fn parse_num(s: &str) -> Option<f64> {
    match s.trim() {
        "" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}
