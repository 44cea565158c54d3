//! Mild solutions by Picard iteration over a whole time window, with critical
//! norm monitoring.

use std::fmt::Write as _;
use std::io::Write;

use crate::besov::{besov_norm, critical_s, BesovIndex};
use crate::bilinear::{bilinear, bilinear_sum, heat_source};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::generate;
use crate::grid::GridSpec;
use crate::spaces::{BlockTable, Trajectory};

/// Product truncation rule. Only the spherical 2/3 rule is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dealias {
    #[default]
    TwoThirdsSpherical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub picard_tol: f64,
    pub max_picard_iters: usize,
    /// Small-data threshold in `Ḃ^{s_p}_{p,p}`; see [`calibrate_c0`].
    pub c0_estimate: Option<f64>,
    pub dealias: Dealias,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1.0 / 64.0,
            n_steps: 64,
            picard_tol: 1e-8,
            max_picard_iters: 40,
            c0_estimate: None,
            dealias: Dealias::TwoThirdsSpherical,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be positive".into()));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::Config(format!("picard_tol must be positive, got {}", self.picard_tol)));
        }
        if self.max_picard_iters == 0 {
            return Err(Error::Config("max_picard_iters must be positive".into()));
        }
        if let Some(c0) = self.c0_estimate {
            if !(c0 > 0.0) {
                return Err(Error::Config(format!("c0_estimate must be positive, got {c0}")));
            }
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        Trajectory::uniform_times(self.dt, self.n_steps)
    }

    pub fn end_time(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Decaying,
    Growing,
    PicardDiverged,
}

impl Classification {
    pub fn tag(&self) -> &'static str {
        match self {
            Classification::Decaying => "decaying",
            Classification::Growing => "growing",
            Classification::PicardDiverged => "picard_diverged",
        }
    }
}

/// Critical-norm monitoring along a trajectory.
#[derive(Debug, Clone)]
pub struct BlowupReport {
    pub times: Vec<f64>,
    /// `‖u(t)‖_{Ḃ^{s_p}_{p,q}}`
    pub besov_norm: Vec<f64>,
    /// `‖u‖_{𝓛^{1:∞}_{p,q}(0,t)}`
    pub running_script_norm: Vec<f64>,
    pub classification: Classification,
}

/// Running-norm growth factor above which a converged run is called growing.
pub const GROWTH_FACTOR: f64 = 10.0;

impl BlowupReport {
    pub fn monitor(traj: &Trajectory, idx: BesovIndex, converged: bool) -> Result<Self> {
        let table = BlockTable::new(traj, &[idx.p]);
        let crit = BesovIndex::new(critical_s(idx.p), idx.p, idx.q)?;
        let besov = table.besov_series(crit)?;
        let running = table.running_script(1.0, f64::INFINITY, idx.p, idx.q)?;
        let classification = if !converged {
            Classification::PicardDiverged
        } else if besov.last().unwrap() < &besov[0] || besov[0] == 0.0 {
            Classification::Decaying
        } else {
            Classification::Growing
        };
        Ok(BlowupReport { times: traj.times().to_vec(), besov_norm: besov, running_script_norm: running, classification })
    }

    /// Report for a run whose iterates are no longer finite.
    pub fn diverged(times: &[f64]) -> Self {
        BlowupReport {
            times: times.to_vec(),
            besov_norm: vec![f64::NAN; times.len()],
            running_script_norm: vec![f64::NAN; times.len()],
            classification: Classification::PicardDiverged,
        }
    }

    /// Largest ratio of the running norm to its initial value.
    pub fn running_growth(&self) -> f64 {
        let r0 = self.running_script_norm[0];
        let last = *self.running_script_norm.last().unwrap();
        if r0 > 0.0 {
            last / r0
        } else {
            f64::NAN
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,besov_norm,running_script_norm,classification\n");
        for i in 0..self.times.len() {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{}",
                self.times[i],
                self.besov_norm[i],
                self.running_script_norm[i],
                self.classification.tag()
            );
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    /// Last iterate; the converged solution when `converged`.
    pub trajectory: Trajectory,
    pub report: BlowupReport,
    /// Relative `𝓛^{1:∞}_p` distance between consecutive iterates.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl PicardOutcome {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }
}

/// Residual above which the iteration is abandoned as divergent.
const BLOWOUT: f64 = 1e6;

/// Drives `u ← base + step(u)` until the relative `𝓛^{1:∞}_p` change drops
/// below `tol`.
fn picard_loop<F>(base: &Trajectory, cfg: &SolverConfig, p: f64, step: F) -> Result<(Trajectory, Vec<f64>, bool)>
where
    F: Fn(&Trajectory) -> Result<Trajectory>,
{
    let t_end = base.end_time();
    let t0 = base.times()[0];
    let script = |tr: &Trajectory| -> Result<f64> {
        BlockTable::new(tr, &[p]).script(1.0, f64::INFINITY, p, p, t0, t_end)
    };
    let mut u = base.clone();
    let mut residuals = Vec::new();
    // The denominator is refreshed while the iterates still move by more
    // than 0.1% of it; afterwards it is exact to that level.
    let mut denom: Option<f64> = None;
    for _ in 0..cfg.max_picard_iters {
        let mut next = step(&u)?;
        next.axpy(1.0, base);
        let delta = next.sub(&u);
        let num = script(&delta)?;
        if !num.is_finite() {
            residuals.push(f64::INFINITY);
            return Ok((u, residuals, false));
        }
        let d = match denom {
            Some(d) if num <= 1e-3 * d => d,
            _ => {
                let d = script(&next)?;
                denom = Some(d);
                d
            }
        };
        let r = if d > 0.0 { num / d } else { 0.0 };
        residuals.push(r);
        u = next;
        if r <= cfg.picard_tol {
            return Ok((u, residuals, true));
        }
        let k = residuals.len();
        let growing = k >= 4 && residuals[k - 3..].windows(2).all(|w| w[1] > w[0]) && r > 1e-2;
        if r > BLOWOUT || growing {
            return Ok((u, residuals, false));
        }
    }
    Ok((u, residuals, false))
}

/// Picard iteration for `u = e^{tΔ}u₀ + B(u, u)` on `[0, n_steps·dt]`, monitored in `idx`.
pub fn picard_solve(u0: &SpectralField, cfg: &SolverConfig, idx: BesovIndex) -> Result<PicardOutcome> {
    cfg.validate()?;
    if u0.mean_mode().iter().any(|c| c.norm() > 0.0) {
        return Err(Error::Argument("initial datum must have zero mean".into()));
    }
    let u_lin = Trajectory::heat(u0, cfg.times())?;
    let (u, residuals, converged) = picard_loop(&u_lin, cfg, idx.p, |u| bilinear(u, u))?;
    finish(u, residuals, converged, idx)
}

fn finish(u: Trajectory, residuals: Vec<f64>, converged: bool, idx: BesovIndex) -> Result<PicardOutcome> {
    let finite = u.snapshots().iter().all(|s| s.coeffs().iter().all(|c| c.re.is_finite() && c.im.is_finite()));
    let report = if finite {
        BlowupReport::monitor(&u, idx, converged)?
    } else {
        BlowupReport::diverged(u.times())
    };
    Ok(PicardOutcome { trajectory: u, report, residuals, converged })
}

/// Solves `w = e^{tΔ}w₀ + B(w, w) + 2B(v₁ + v₂, w) + H(f₁ + f₂)`; with
/// `linear` the quadratic term `B(w, w)` is dropped.
#[allow(clippy::too_many_arguments)]
pub fn solve_perturbed(
    w0: &SpectralField,
    v1: &Trajectory,
    v2: &Trajectory,
    f1: &Trajectory,
    f2: &Trajectory,
    cfg: &SolverConfig,
    idx: BesovIndex,
    linear: bool,
) -> Result<PicardOutcome> {
    cfg.validate()?;
    let times = cfg.times();
    let lin = Trajectory::heat(w0, times)?;
    for t in [v1, v2, f1, f2] {
        lin.check_compatible(t)?;
    }
    let drift = v1.add(v2);
    let mut base = heat_source(&f1.add(f2))?;
    base.axpy(1.0, &lin);
    let drift_zero = drift.snapshots().iter().all(|s| s.is_zero());
    let (u, residuals, converged) = picard_loop(&base, cfg, idx.p, |w| {
        let mut terms: Vec<(f64, &Trajectory, &Trajectory)> = Vec::new();
        if !linear {
            terms.push((1.0, w, w));
        }
        if !drift_zero {
            terms.push((2.0, &drift, w));
        }
        if terms.is_empty() {
            Trajectory::zeros(*w.grid(), w.times().to_vec())
        } else {
            bilinear_sum(&terms)
        }
    })?;
    finish(u, residuals, converged, idx)
}

/// `λu(λx)` with `λ = 2^m`, realized on the torus of period `L/λ` so that
/// every shell moves up by `m` together with the grid.
pub fn scaling_transform(u0: &SpectralField, m: i32) -> Result<SpectralField> {
    if m == 0 {
        return Ok(u0.clone());
    }
    if m.abs() > 30 {
        return Err(Error::Argument(format!("scaling exponent {m} out of range")));
    }
    let g = u0.grid();
    let lambda = 2f64.powi(m);
    let grid = GridSpec::with_shells(g.n(), g.period() / lambda, g.j_min() + m, g.j_max() + m)?;
    let flag = u0.is_divergence_free();
    let mut out = u0.scaled(lambda).with_grid(grid)?;
    out.set_divergence_free(flag);
    Ok(out)
}

/// `λu(λ²t, λx)` on the correspondingly rescaled torus and time grid.
pub fn scale_trajectory(traj: &Trajectory, m: i32) -> Result<Trajectory> {
    let lambda = 2f64.powi(m);
    let snaps = traj.snapshots().iter().map(|u| scaling_transform(u, m)).collect::<Result<_>>()?;
    Trajectory::new(traj.times().iter().map(|t| t / (lambda * lambda)).collect(), snaps)
}

/// Per-step check of `d/dt ½‖u‖² + ‖∇u‖² = 0`: for each interior sample the
/// energy change over `[t_{i-1}, t_{i+1}]` is compared with Simpson's rule
/// for the dissipation. Returns relative defects.
pub fn energy_defects(traj: &Trajectory) -> Vec<f64> {
    let e: Vec<f64> = traj.snapshots().iter().map(|u| 0.5 * u.l2_norm().powi(2)).collect();
    let d: Vec<f64> = traj.snapshots().iter().map(|u| u.gradient_l2_sq()).collect();
    let t = traj.times();
    (1..t.len().saturating_sub(1))
        .map(|i| {
            let h = 0.5 * (t[i + 1] - t[i - 1]);
            let diss = h / 3.0 * (d[i - 1] + 4.0 * d[i] + d[i + 1]);
            let change = e[i + 1] - e[i - 1];
            if diss == 0.0 {
                change.abs()
            } else {
                (change + diss).abs() / diss
            }
        })
        .collect()
}

/// Seed of the canonical datum used for small-data calibration.
pub const CANONICAL_SEED: u64 = 0x5eed;

/// Unit-coefficient-norm datum with modes in `1 ≤ |ξ|/k₀ ≤ 4`.
pub fn canonical_datum(grid: GridSpec) -> Result<SpectralField> {
    let k0 = grid.fundamental();
    generate::random_bandlimited(grid, k0, 4.0 * k0, 1.0, CANONICAL_SEED)
}

/// Outcome of the small-data calibration.
#[derive(Debug, Clone, Copy)]
pub struct Calibration {
    /// Largest converging amplitude of the canonical datum found.
    pub threshold_amplitude: f64,
    /// `Ḃ^{s_p}_{p,p}` norm at the threshold amplitude.
    pub threshold_norm: f64,
    /// Half of `threshold_norm`.
    pub c0: f64,
}

/// Bisects the amplitude of the canonical datum between convergence and
/// non-convergence of Picard within `cfg.max_picard_iters`; `c0` is half the
/// critical norm at the threshold.
pub fn calibrate_c0(grid: GridSpec, cfg: &SolverConfig, p: f64, bisection_steps: usize) -> Result<Calibration> {
    let idx = BesovIndex::critical(p, p)?;
    let unit = canonical_datum(grid)?;
    let unit_norm = besov_norm(&unit, idx);
    let converges = |amp: f64| -> Result<bool> { Ok(picard_solve(&unit.scaled(amp), cfg, idx)?.converged) };
    // bracket in factors of two
    let mut lo = 1.0 / unit_norm;
    let mut hi;
    if converges(lo)? {
        hi = 2.0 * lo;
        while converges(hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > 1e6 / unit_norm {
                return Err(Error::Iteration { step: 0, reason: "no divergence found while bracketing".into() });
            }
        }
    } else {
        hi = lo;
        lo *= 0.5;
        while !converges(lo)? {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-6 / unit_norm {
                return Err(Error::Iteration { step: 0, reason: "no convergence found while bracketing".into() });
            }
        }
    }
    for _ in 0..bisection_steps {
        let mid = (lo * hi).sqrt();
        if converges(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let threshold_norm = lo * unit_norm;
    Ok(Calibration { threshold_amplitude: lo, threshold_norm, c0: 0.5 * threshold_norm })
}

/// Rescales `u` to have `Ḃ^{s_p}_{p,p}` norm `target`.
pub fn with_critical_norm(u: &SpectralField, p: f64, target: f64) -> Result<SpectralField> {
    let n = besov_norm(u, BesovIndex::critical(p, p)?);
    if n == 0.0 {
        return Err(Error::Argument("cannot rescale the zero field".into()));
    }
    Ok(u.scaled(target / n))
}
