//! The heat semigroup `e^{τΔ}` and the heat-flow characterization of
//! negative-regularity Besov norms.

use crate::besov::{self, lp_norms_many};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::GridSpec;
use crate::lp;

pub fn heat_multiplier(grid: &GridSpec, tau: f64) -> Vec<f64> {
    grid.xi_squared().into_iter().map(|x2| (-tau * x2).exp()).collect()
}

/// `e^{τΔ}u`, exact per mode.
pub fn heat_flow(u: &SpectralField, tau: f64) -> Result<SpectralField> {
    if !(tau >= 0.0) {
        return Err(Error::Argument(format!("heat time must be nonnegative, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(u.clone());
    }
    let mut out = u.clone();
    out.apply_radial(|x2| (-tau * x2).exp());
    Ok(out)
}

/// Log-spaced heat times (ratio 2) spanning two shells beyond either end of
/// the resolved range.
pub fn default_heat_times(grid: &GridSpec) -> Vec<f64> {
    let lo = -2 * (grid.j_max() + 3);
    let hi = -2 * (grid.j_min() - 2);
    (lo..=hi).map(|e| 2f64.powi(e)).collect()
}

/// `sup_τ τ^{-s/2} ‖e^{τΔ}u‖_{L^p}` over the sampled `taus`; requires `s < 0`.
pub fn heat_besov_norm(u: &SpectralField, s: f64, p: f64, taus: &[f64]) -> Result<f64> {
    if !(s < 0.0) {
        return Err(Error::Argument(format!("heat characterization needs s < 0, got {s}")));
    }
    let flows: Vec<SpectralField> = taus.iter().map(|&t| heat_flow(u, t)).collect::<Result<_>>()?;
    let refs: Vec<&SpectralField> = flows.iter().collect();
    let norms = lp_norms_many(&refs, &[p]);
    Ok(taus
        .iter()
        .zip(&norms)
        .map(|(t, n)| t.powf(-s / 2.0) * n[0])
        .fold(0.0, f64::max))
}

/// Short-time decay rate of a single block for the chosen cutoff, assuming a
/// spectrally flat field: the mean of `|ξ|² / 2^{2j}` over the annulus, weighted
/// by the squared block symbol and the shell measure `r²`.
pub fn theoretical_block_rate() -> f64 {
    let m = 20000;
    let (a, b) = (1.0, 4.0);
    let h = (b - a) / m as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..m {
        let r = a + (i as f64 + 0.5) * h;
        let w = lp::block_symbol(0, r).powi(2) * r * r;
        num += w * r * r;
        den += w;
    }
    num / den
}

/// Fitted per-shell decay rates `c_j` from `‖Δ_j e^{tΔ}u‖_{L^p} ≈ e^{-c t 4^j}‖Δ_j u‖_{L^p}`
/// at short times `t = x / 4^j`, `x ∈ scaled_times`, by least squares through the
/// origin in `log`. Shells where `u` has no content give `None`.
pub fn fit_block_decay(u: &SpectralField, p: f64, scaled_times: &[f64]) -> Vec<Option<f64>> {
    let g = *u.grid();
    g.shells()
        .map(|j| {
            let b = lp::block(u, j);
            let scale = 4f64.powi(j);
            let mut fields = vec![b.clone()];
            for &x in scaled_times {
                let mut f = b.clone();
                f.apply_radial(|x2| (-x / scale * x2).exp());
                fields.push(f);
            }
            let refs: Vec<&SpectralField> = fields.iter().collect();
            let norms: Vec<f64> = lp_norms_many(&refs, &[p]).into_iter().map(|v| v[0]).collect();
            if norms[0] <= 1e-300 {
                return None;
            }
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (x, n) in scaled_times.iter().zip(&norms[1..]) {
                let y = -(n / norms[0]).ln();
                sxy += x * y;
                sxx += x * x;
            }
            Some(sxy / sxx)
        })
        .collect()
}

/// Two-sided comparison of the heat-flow and block definitions of `Ḃ^s_{p,∞}`.
pub fn heat_characterization_ratio(u: &SpectralField, s: f64, p: f64) -> Result<f64> {
    let taus = default_heat_times(u.grid());
    let heat = heat_besov_norm(u, s, p, &taus)?;
    let block = besov::besov_norm(u, besov::BesovIndex::new(s, p, f64::INFINITY)?);
    Ok(if block == 0.0 { 0.0 } else { heat / block })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theoretical_rate_is_inside_annulus() {
        let c = theoretical_block_rate();
        assert!(c > 1.0 && c < 16.0, "{c}");
    }

    #[test]
    fn rejects_negative_time() {
        let g = GridSpec::new(16).unwrap();
        assert!(heat_flow(&SpectralField::zeros(g), -1.0).is_err());
    }
}
