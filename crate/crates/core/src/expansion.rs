//! Multilinear Duhamel expansions of a mild solution, the linearized
//! operators `L[v]w = w - 2B(v, w)` and `K[v] = L[v]⁻¹`, and the iterations
//! built from them.

use rayon::prelude::*;

use crate::besov::{critical_s, lp_norms_many, BesovIndex};
use crate::bilinear::{bilinear, bilinear_sum, nonlinear_term, step_weights};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::solver::{picard_solve, SolverConfig};
use crate::spaces::{time_norm, BlockTable, Trajectory};

/// `𝓛^{1:∞}_p` norm over the whole trajectory.
pub fn script_1_inf(tr: &Trajectory, p: f64) -> Result<f64> {
    let t = tr.times();
    BlockTable::new(tr, &[p]).script(1.0, f64::INFINITY, p, p, t[0], t[t.len() - 1])
}

#[derive(Debug, Clone)]
pub struct ExpansionResult {
    pub terms: Vec<Trajectory>,
    pub tail: Trajectory,
    /// `‖u − Σ terms − tail‖` in `𝓛^{1:∞}_p`.
    pub residual: f64,
    /// `‖u‖` in the same norm.
    pub reference: f64,
    pub p: f64,
}

impl ExpansionResult {
    pub fn relative_residual(&self) -> f64 {
        if self.reference > 0.0 {
            self.residual / self.reference
        } else {
            self.residual
        }
    }

    fn assemble(u: &Trajectory, terms: Vec<Trajectory>, tail: Trajectory, p: f64) -> Result<Self> {
        let mut defect = u.sub(&tail);
        for t in &terms {
            defect.axpy(-1.0, t);
        }
        Ok(ExpansionResult { residual: script_1_inf(&defect, p)?, reference: script_1_inf(u, p)?, terms, tail, p })
    }
}

/// Splits `u = H_N + Z_N` where `H_N` collects the multilinear terms in
/// `u_L = e^{tΔ}u₀` of order below `N` and `Z_N` the remainder, written with
/// `u` and `u_L`. `terms` holds the pieces of `H_N` by order.
pub fn duhamel_expand(u: &Trajectory, u0: &SpectralField, order: usize, p: f64) -> Result<ExpansionResult> {
    if !(2..=4).contains(&order) {
        return Err(Error::Argument(format!("expansion order {order} not in 2..=4")));
    }
    if !(p > 3.0 * (order as f64 - 1.0)) {
        return Err(Error::Argument(format!("order {order} needs p > {}, got {p}", 3 * (order - 1))));
    }
    u.grid().check_same(u0.grid())?;
    let ul = Trajectory::heat(u0, u.times().to_vec())?;
    let b = bilinear(u, u)?;
    let (terms, tail) = match order {
        2 => (vec![ul.clone()], b),
        3 => {
            let bll = bilinear(&ul, &ul)?;
            let z3 = bilinear_sum(&[(2.0, &ul, &b), (1.0, &b, &b)])?;
            (vec![ul.clone(), bll], z3)
        }
        _ => {
            let bll = bilinear(&ul, &ul)?;
            let z3 = bilinear_sum(&[(2.0, &ul, &b), (1.0, &b, &b)])?;
            let third = bilinear(&ul, &bll)?.scaled(2.0);
            let z4 = bilinear_sum(&[(2.0, &ul, &z3), (1.0, &b, &b)])?;
            (vec![ul.clone(), bll, third], z4)
        }
    };
    ExpansionResult::assemble(u, terms, tail, p)
}

/// The drift `v` of `L[v]` and `K[v]`, with the initial time partition used
/// when inverting.
#[derive(Debug, Clone)]
pub struct OperatorHandle {
    drift: Trajectory,
    slab_splits: Vec<usize>,
}

/// Slab refinement stops at this many slabs.
pub const MAX_SLABS: usize = 64;

impl OperatorHandle {
    pub fn new(drift: Trajectory) -> Result<Self> {
        Self::with_slabs(drift, 1)
    }

    /// Starts inversion from `count` nearly equal slabs.
    pub fn with_slabs(drift: Trajectory, count: usize) -> Result<Self> {
        let finite = drift.snapshots().iter().all(|s| s.coeffs().iter().all(|c| c.re.is_finite() && c.im.is_finite()));
        if !finite {
            return Err(Error::Argument("drift is not finite".into()));
        }
        let steps = drift.len() - 1;
        let count = count.clamp(1, steps.max(1));
        let mut splits: Vec<usize> = (0..=count).map(|i| i * steps / count).collect();
        splits.dedup();
        Ok(OperatorHandle { drift, slab_splits: splits })
    }

    pub fn drift(&self) -> &Trajectory {
        &self.drift
    }

    /// Sample indices bounding the slabs, from `0` to the last sample.
    pub fn slab_splits(&self) -> &[usize] {
        &self.slab_splits
    }

    fn drift_is_zero(&self) -> bool {
        self.drift.snapshots().iter().all(|s| s.is_zero())
    }
}

/// `L[v]w = w − 2B(v, w)`.
pub fn apply_l(h: &OperatorHandle, w: &Trajectory) -> Result<Trajectory> {
    h.drift.check_compatible(w)?;
    if h.drift_is_zero() {
        return Ok(w.clone());
    }
    let mut out = bilinear(&h.drift, w)?.scaled(-2.0);
    out.axpy(1.0, w);
    Ok(out)
}

/// Diagnostics of one inversion.
#[derive(Debug, Clone)]
pub struct InversionStats {
    pub slabs: Vec<usize>,
    /// Fixed-point sweeps plus Krylov iterations, summed over slabs.
    pub sweeps: usize,
    /// Largest observed contraction ratio on the accepted partition.
    pub worst_ratio: f64,
}

/// `K[v]z`: solves `w − 2B(v, w) = z` to relative tolerance `tol`.
pub fn invert_k(h: &OperatorHandle, z: &Trajectory, tol: f64) -> Result<Trajectory> {
    invert_k_stats(h, z, tol).map(|(w, _)| w)
}

const CONTRACTION: f64 = 0.5;
const MAX_SWEEPS: usize = 200;

pub fn invert_k_stats(h: &OperatorHandle, z: &Trajectory, tol: f64) -> Result<(Trajectory, InversionStats)> {
    h.drift.check_compatible(z)?;
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let scale = z.max_coeff_norm();
    if h.drift_is_zero() || scale == 0.0 {
        let stats = InversionStats { slabs: h.slab_splits.clone(), sweeps: 0, worst_ratio: 0.0 };
        return Ok((z.clone(), stats));
    }
    let mut splits = h.slab_splits.clone();
    loop {
        if let Some((w, sweeps, worst)) = solve_on_slabs(&h.drift, z, &splits, tol * scale)? {
            return Ok((w, InversionStats { slabs: splits, sweeps, worst_ratio: worst }));
        }
        let refined = refine(&splits);
        if refined.len() == splits.len() || refined.len() - 1 > MAX_SLABS {
            return Err(Error::Inversion(format!(
                "no convergent slab solve with {} slabs",
                splits.len() - 1
            )));
        }
        splits = refined;
    }
}

fn refine(splits: &[usize]) -> Vec<usize> {
    let mut out = vec![splits[0]];
    for w in splits.windows(2) {
        if w[1] - w[0] >= 2 {
            out.push((w[0] + w[1]) / 2);
        }
        out.push(w[1]);
    }
    out
}

/// One application of `w ↦ z + 2B(v, w)` on the samples `a+1..=b`, starting
/// from the Duhamel state `carried` at sample `a` and the source `n_start`
/// there. `None` for `z`, `carried` or `n_start` means zero, which gives the
/// linear part of the map. Returns the new samples and the state at `b`.
#[allow(clippy::too_many_arguments)]
fn slab_sweep(
    v: &Trajectory,
    z: Option<&Trajectory>,
    carried: Option<&SpectralField>,
    n_start: Option<&SpectralField>,
    a: usize,
    w: &[SpectralField],
) -> Result<(Vec<SpectralField>, SpectralField)> {
    let g = *v.grid();
    let times = v.times();
    let m = g.len();
    let b = a + w.len();
    let ns: Vec<SpectralField> =
        ((a + 1)..=b).into_par_iter().map(|i| nonlinear_term(v.at(i), &w[i - a - 1])).collect::<Result<_>>()?;
    let zero = SpectralField::zeros(g);
    let mut state = carried.cloned().unwrap_or_else(|| zero.clone());
    let mut out = Vec::with_capacity(w.len());
    for i in (a + 1)..=b {
        let wt = step_weights(&g, times[i] - times[i - 1]);
        let na = if i == a + 1 { n_start.unwrap_or(&zero) } else { &ns[i - a - 2] };
        let nb = &ns[i - a - 1];
        let mut next = SpectralField::zeros(g);
        {
            let (sc, ac, bc) = (state.coeffs(), na.coeffs(), nb.coeffs());
            let o = next.coeffs_mut();
            for c in 0..3 {
                for q in 0..m {
                    let x = c * m + q;
                    o[x] = sc[x] * wt.decay[q] + ac[x] * wt.w_prev[q] + bc[x] * wt.w_next[q];
                }
            }
        }
        let mut wi = match z {
            Some(z) => z.at(i).clone(),
            None => SpectralField::zeros(g),
        };
        wi.axpy(2.0, &next);
        out.push(wi);
        state = next;
    }
    Ok((out, state))
}

fn max_delta(a: &[SpectralField], b: &[SpectralField]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).coeff_norm()).fold(0.0, f64::max)
}

fn dot(a: &[SpectralField], b: &[SpectralField]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.coeffs().iter().zip(y.coeffs()).map(|(p, q)| p.re * q.re + p.im * q.im).sum::<f64>())
        .sum()
}

fn axpy_all(y: &mut [SpectralField], alpha: f64, x: &[SpectralField]) {
    for (a, b) in y.iter_mut().zip(x) {
        a.axpy(alpha, b);
    }
}

/// Slabs up to this many steps fall back to GMRES when the fixed point stalls.
const KRYLOV_MAX_STEPS: usize = 8;
const KRYLOV_RESTART: usize = 30;
const KRYLOV_MAX_ITERS: usize = 300;

/// Restarted GMRES for `(I − T)w = rhs` on one slab, `T` the linear part of
/// [`slab_sweep`], with the real inner product on coefficients. Stops when
/// the residual norm drops below `tol`; `None` if it never does.
fn slab_gmres(
    v: &Trajectory,
    a: usize,
    rhs: &[SpectralField],
    x0: Vec<SpectralField>,
    tol: f64,
) -> Result<Option<(Vec<SpectralField>, usize)>> {
    let apply = |y: &[SpectralField]| -> Result<Vec<SpectralField>> {
        let (ty, _) = slab_sweep(v, None, None, None, a, y)?;
        Ok(y.iter().zip(&ty).map(|(p, q)| p - q).collect())
    };
    let mut x = x0;
    let mut iters = 0;
    while iters < KRYLOV_MAX_ITERS {
        let ax = apply(&x)?;
        let mut r: Vec<SpectralField> = rhs.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = dot(&r, &r).sqrt();
        if !beta.is_finite() {
            return Ok(None);
        }
        if beta <= tol {
            return Ok(Some((x, iters)));
        }
        r.iter_mut().for_each(|f| f.scale(1.0 / beta));
        let mut basis = vec![r];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn) = (Vec::new(), Vec::new());
        let mut gvec = vec![beta];
        let mut res = beta;
        while basis.len() <= KRYLOV_RESTART && iters < KRYLOV_MAX_ITERS && res > tol {
            let mut wv = apply(basis.last().unwrap())?;
            iters += 1;
            let mut col = Vec::with_capacity(basis.len() + 1);
            for q in &basis {
                let hij = dot(&wv, q);
                axpy_all(&mut wv, -hij, q);
                col.push(hij);
            }
            let hn = dot(&wv, &wv).sqrt();
            col.push(hn);
            for (i, (c, s)) in cs.iter().zip(&sn).enumerate() {
                let (p, q) = (col[i], col[i + 1]);
                col[i] = c * p + s * q;
                col[i + 1] = -s * p + c * q;
            }
            let k = col.len() - 2;
            let d = col[k].hypot(col[k + 1]);
            let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (col[k] / d, col[k + 1] / d) };
            col[k] = d;
            col[k + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            gvec.push(-s * gvec[k]);
            gvec[k] *= c;
            res = gvec[k + 1].abs();
            hess.push(col);
            if hn == 0.0 || !hn.is_finite() {
                break;
            }
            wv.iter_mut().for_each(|f| f.scale(1.0 / hn));
            basis.push(wv);
        }
        // back substitution on the triangular factor
        let k = hess.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = gvec[i];
            for (j, yj) in y.iter().enumerate().take(k).skip(i + 1) {
                acc -= hess[j][i] * yj;
            }
            y[i] = acc / hess[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            axpy_all(&mut x, *yi, &basis[i]);
        }
    }
    let ax = apply(&x)?;
    let r: Vec<SpectralField> = rhs.iter().zip(&ax).map(|(p, q)| p - q).collect();
    Ok((dot(&r, &r).sqrt() <= tol).then_some((x, iters)))
}

/// Slab-by-slab solve with the Duhamel state carried across slab
/// boundaries, so the result solves the same discrete equation as a global
/// iteration. Each slab runs the fixed point; short slabs on which it stalls
/// switch to GMRES. `None` when some slab fails both ways.
fn solve_on_slabs(
    v: &Trajectory,
    z: &Trajectory,
    splits: &[usize],
    tol_abs: f64,
) -> Result<Option<(Trajectory, usize, f64)>> {
    let g = *z.grid();
    let times = z.times();
    let mut w: Vec<SpectralField> = z.snapshots().to_vec();
    let mut carried = SpectralField::zeros(g);
    let mut n_start = nonlinear_term(v.at(0), &w[0])?;
    let mut sweeps = 0;
    let mut worst: f64 = 0.0;
    for s in splits.windows(2) {
        let (a, b) = (s[0], s[1]);
        let mut prev_delta = f64::INFINITY;
        let mut k = 0;
        let mut slab = w[a + 1..=b].to_vec();
        let state = loop {
            let (next, state) = slab_sweep(v, Some(z), Some(&carried), Some(&n_start), a, &slab)?;
            let delta = max_delta(&next, &slab);
            slab = next;
            sweeps += 1;
            k += 1;
            let ratio = delta / prev_delta;
            if k >= 3 {
                worst = worst.max(ratio);
            }
            if delta <= tol_abs {
                break state;
            }
            if !delta.is_finite() || (k >= 3 && ratio > CONTRACTION) || k >= MAX_SWEEPS {
                if b - a > KRYLOV_MAX_STEPS {
                    return Ok(None);
                }
                let (affine, _) = slab_sweep(v, Some(z), Some(&carried), Some(&n_start), a, &vec![SpectralField::zeros(g); b - a])?;
                let x0 = if delta.is_finite() { slab.clone() } else { z.snapshots()[a + 1..=b].to_vec() };
                match slab_gmres(v, a, &affine, x0, tol_abs)? {
                    Some((x, iters)) => {
                        sweeps += iters;
                        let (next, state) = slab_sweep(v, Some(z), Some(&carried), Some(&n_start), a, &x)?;
                        slab = next;
                        break state;
                    }
                    None => return Ok(None),
                }
            }
            prev_delta = delta;
        };
        w.splice(a + 1..=b, slab);
        carried = state;
        n_start = nonlinear_term(v.at(b), &w[b])?;
    }
    let mut out = Trajectory::new(times.to_vec(), w)?;
    let div = v.snapshots().iter().all(|s| s.is_divergence_free()) && z.snapshots().iter().all(|s| s.is_divergence_free());
    for s in out.snapshots_mut() {
        s.set_divergence_free(div);
    }
    Ok(Some((out, sweeps, worst)))
}

/// `p = 3·2^k − 2`.
pub fn iteration_exponent(k: u32) -> f64 {
    3.0 * 2f64.powi(k as i32) - 2.0
}

/// Relative tolerance of the inversions inside [`expand_solution`].
pub const EXPANSION_TOL: f64 = 1e-12;

/// Solves for `u` at `p = 3·2^k − 2` and splits it as
/// `u = Σ_{n≤k} u_{L,n} + w_k`.
pub fn expand_solution(u0: &SpectralField, k: u32, cfg: &SolverConfig) -> Result<ExpansionResult> {
    let p = check_k(k)?;
    let sol = picard_solve(u0, cfg, BesovIndex::critical(p, p)?)?;
    if !sol.converged {
        return Err(Error::Iteration { step: sol.iterations(), reason: "Picard iteration did not converge".into() });
    }
    expand_trajectory(&sol.trajectory, u0, k, EXPANSION_TOL)
}

fn check_k(k: u32) -> Result<f64> {
    if !(1..=4).contains(&k) {
        return Err(Error::Argument(format!("iteration depth k = {k} not in 1..=4")));
    }
    Ok(iteration_exponent(k))
}

/// The split of [`expand_solution`] for an already computed solution `u`.
///
/// With `U_n = Σ_{j≤n} u_{L,j}`: `u_{L,n+1} = K[U_n]B(u_{L,n}, u_{L,n})` and
/// `w_{n+1} = K[U_n]B(w_n, w_n)`, starting from `w_0 = u − u_{L,0}`.
pub fn expand_trajectory(u: &Trajectory, u0: &SpectralField, k: u32, tol: f64) -> Result<ExpansionResult> {
    let p = check_k(k)?;
    u.grid().check_same(u0.grid())?;
    let mut terms = vec![Trajectory::heat(u0, u.times().to_vec())?];
    let mut w = u.sub(&terms[0]);
    let mut drift = terms[0].clone();
    for _ in 0..k {
        let h = OperatorHandle::new(drift.clone())?;
        let last = terms.last().unwrap();
        let next = invert_k(&h, &bilinear(last, last)?, tol)?;
        w = invert_k(&h, &bilinear(&w, &w)?, tol)?;
        drift.axpy(1.0, &next);
        terms.push(next);
    }
    ExpansionResult::assemble(u, terms, w, p)
}

/// `‖u_{L,n}‖` in `𝓛^{1:∞}_{p/2ⁿ}` for each term.
pub fn term_norms(res: &ExpansionResult) -> Result<Vec<f64>> {
    res.terms
        .iter()
        .enumerate()
        .map(|(n, t)| script_1_inf(t, res.p / 2f64.powi(n as i32)))
        .collect()
}

/// Sup-in-time `Ḃ^{s}_{r,∞}` norm of `w` with `r = 6p/(2p+1)` at the critical `s`.
pub fn regularity_norm(w: &Trajectory, p: f64) -> Result<f64> {
    let r = 6.0 * p / (2.0 * p + 1.0);
    let idx = BesovIndex::new(critical_s(r), r, f64::INFINITY)?;
    let t = w.times();
    BlockTable::new(w, &[r]).chemin_lerner(idx, f64::INFINITY, t[0], t[t.len() - 1])
}

/// One step of [`simple_iteration`].
#[derive(Debug, Clone)]
pub struct SimpleStep {
    pub v: Trajectory,
    pub w: Trajectory,
    /// `‖u − ṽ_j − w̃_j‖ / ‖u‖` in `𝓛^{1:∞}_p`, with `u = ṽ₀ + w̃₀`.
    pub identity_defect: f64,
    /// `sup_t ‖ṽ_j(t)‖_{L^p}` over the second half of the time grid.
    pub v_sup_lp: f64,
    /// `‖w̃_j‖_{L³_{t,x}}`.
    pub w_l3: f64,
}

/// Defect at which [`simple_iteration`] gives up.
pub const IDENTITY_BLOWOUT: f64 = 1e-4;

/// `ṽ_{j+1} = e^{tΔ}u₀ + B(ṽ_j, ṽ_j) + 2B(ṽ_j, w̃_j)`, `w̃_{j+1} = B(w̃_j, w̃_j)`.
pub fn simple_iteration(
    u0: &SpectralField,
    v0: &Trajectory,
    w0: &Trajectory,
    j_steps: usize,
    p: f64,
) -> Result<Vec<SimpleStep>> {
    v0.check_compatible(w0)?;
    u0.grid().check_same(v0.grid())?;
    let u = v0.add(w0);
    let u_norm = script_1_inf(&u, p)?;
    let ul = Trajectory::heat(u0, u.times().to_vec())?;
    let half = u.len() / 2;
    let (mut v, mut w) = (v0.clone(), w0.clone());
    let mut out = Vec::with_capacity(j_steps);
    for j in 1..=j_steps {
        let w_zero = w.snapshots().iter().all(|s| s.is_zero());
        let mut vn = if w_zero { bilinear(&v, &v)? } else { bilinear_sum(&[(1.0, &v, &v), (2.0, &v, &w)])? };
        vn.axpy(1.0, &ul);
        let wn = if w_zero { w.clone() } else { bilinear(&w, &w)? };
        v = vn;
        w = wn;
        let mut d = u.sub(&v);
        d.axpy(-1.0, &w);
        let dn = script_1_inf(&d, p)?;
        let defect = if u_norm > 0.0 { dn / u_norm } else { dn };
        if !(defect <= IDENTITY_BLOWOUT) {
            return Err(Error::Iteration { step: j, reason: format!("decomposition defect {defect:e}") });
        }
        let vl: Vec<f64> = lp_norms_many(&v.snapshots()[half..].iter().collect::<Vec<_>>(), &[p]).iter().map(|r| r[0]).collect();
        let wl: Vec<f64> = lp_norms_many(&w.snapshots().iter().collect::<Vec<_>>(), &[3.0]).iter().map(|r| r[0]).collect();
        out.push(SimpleStep {
            identity_defect: defect,
            v_sup_lp: vl.iter().cloned().fold(0.0, f64::max),
            w_l3: time_norm(w.times(), &wl, 3.0),
            v: v.clone(),
            w: w.clone(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::random_bandlimited;
    use crate::grid::GridSpec;

    fn small_setup() -> (SpectralField, Trajectory) {
        let g = GridSpec::new(16).unwrap();
        let u0 = random_bandlimited(g, 1.0, 3.0, 0.3, 3).unwrap();
        let tr = Trajectory::heat(&u0, Trajectory::uniform_times(1.0 / 64.0, 8)).unwrap();
        (u0, tr)
    }

    #[test]
    fn order_and_exponent_guards() {
        let (u0, tr) = small_setup();
        assert!(duhamel_expand(&tr, &u0, 1, 10.0).is_err());
        assert!(duhamel_expand(&tr, &u0, 5, 20.0).is_err());
        assert!(duhamel_expand(&tr, &u0, 3, 6.0).is_err());
        assert!(duhamel_expand(&tr, &u0, 4, 9.0).is_err());
        assert_eq!(iteration_exponent(2), 10.0);
        assert!(check_k(0).is_err());
    }

    #[test]
    fn zero_drift_operators_are_identity() {
        let (_, tr) = small_setup();
        let h = OperatorHandle::new(Trajectory::zeros(*tr.grid(), tr.times().to_vec()).unwrap()).unwrap();
        let l = apply_l(&h, &tr).unwrap();
        assert_eq!(l.rel_distance(&tr), 0.0);
        let k = invert_k(&h, &tr, 1e-12).unwrap();
        assert_eq!(k.rel_distance(&tr), 0.0);
    }

    #[test]
    fn slab_refinement_halves() {
        assert_eq!(refine(&[0, 8]), vec![0, 4, 8]);
        assert_eq!(refine(&[0, 1, 3]), vec![0, 1, 2, 3]);
        let (_, tr) = small_setup();
        let h = OperatorHandle::with_slabs(tr, 3).unwrap();
        assert_eq!(h.slab_splits(), &[0, 2, 5, 8]);
    }
}
