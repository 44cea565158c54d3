use std::f64::consts::PI;

use bnslab::besov::{bernstein_check, critical_s, lp_norm};
use bnslab::generate::{mode_pair, random_bandlimited, shell_bump};
use bnslab::heat::{heat_characterization_ratio, heat_flow};
use bnslab::leray::{divergence, gradient_field, leray_project};
use bnslab::lp::{block, low_pass};
use bnslab::solver::scaling_transform;
use bnslab::{besov_norm, lp_decompose, BesovIndex, Complex64, GridSpec, SpectralField};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// cutoff written out again, kept apart from the library copy
fn phi(r: f64) -> f64 {
    let f = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        f(2.0 - r) / (f(2.0 - r) + f(r - 1.0))
    }
}

/// Samples the field on the grid by summing its nonzero modes directly.
fn direct_samples(u: &SpectralField) -> [Vec<f64>; 3] {
    let g = u.grid();
    let n = g.n();
    let modes: Vec<(usize, [Complex64; 3])> =
        (0..g.len()).map(|i| (i, u.mode(i))).filter(|(_, v)| v.iter().any(|z| z.norm() > 0.0)).collect();
    let mut out = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
    for x in 0..g.len() {
        let (a, b, cc) = g.unflat(x);
        for (idx, v) in &modes {
            let k = g.int_wavevector(*idx);
            let ph = 2.0 * PI * (k[0] * a as i64 + k[1] * b as i64 + k[2] * cc as i64) as f64 / n as f64;
            let e = c(ph.cos(), ph.sin());
            for comp in 0..3 {
                out[comp][x] += (v[comp] * e).re;
            }
        }
    }
    out
}

fn quadrature_lp(u: &SpectralField, p: f64) -> f64 {
    let s = direct_samples(u);
    let g = u.grid();
    let dv = g.cell_volume();
    (0..g.len())
        .map(|x| (s[0][x].powi(2) + s[1][x].powi(2) + s[2][x].powi(2)).sqrt().powf(p) * dv)
        .sum::<f64>()
        .powf(1.0 / p)
}

fn grid32() -> GridSpec {
    GridSpec::new(32).unwrap()
}

#[test]
fn zero_field_has_zero_blocks_and_norms() {
    let g = grid32();
    let z = SpectralField::zeros(g);
    let set = lp_decompose(&z).unwrap();
    assert!(set.iter().all(|(_, b)| b.is_zero()));
    assert_eq!(besov_norm(&z, BesovIndex::critical(4.0, 2.0).unwrap()), 0.0);
    assert_eq!(bernstein_check(&z, -0.5, 4.0, 8.0, 2.0).unwrap().ratio, 0.0);
}

#[test]
fn single_mode_hits_exactly_the_covering_blocks() {
    let g = grid32();
    // |ξ| = 3 = 1.5·2¹ lies in the annuli of blocks 0 and 1 only
    let u = mode_pair(g, [3, 0, 0], [c(0.0, 0.0), c(1.0, 0.5), c(0.0, 0.0)]).unwrap();
    let idx = g.flat(3, 0, 0);
    for j in g.shells() {
        let b = block(&u, j);
        let expected = phi(3.0 / 2f64.powi(j + 1)) - phi(3.0 / 2f64.powi(j));
        let inside = 2f64.powi(j) < 3.0 && 3.0 < 2f64.powi(j + 2);
        assert_eq!(!b.is_zero(), inside, "block {j}");
        assert!((b.mode(idx)[1] - c(1.0, 0.5) * expected).norm() < 1e-15, "block {j}");
    }
}

#[test]
fn two_scale_field_is_reconstructed() {
    let g = grid32();
    let mut u = mode_pair(g, [0, 2, 0], [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.3)]).unwrap();
    u += &mode_pair(g, [12, 0, 1], [c(0.0, 0.0), c(0.7, -0.1), c(0.0, 0.0)]).unwrap();
    let rec = lp_decompose(&u).unwrap().reconstruct();
    assert!(rec.rel_distance(&u) <= 1e-10);
}

#[test]
fn low_pass_keeps_everything_below_the_cut() {
    let g = grid32();
    let u = random_bandlimited(g, 1.0, 2.0, 1.0, 9).unwrap();
    assert!(low_pass(&u, 1).rel_distance(&u) < 1e-15);
    assert!(low_pass(&u, -1).is_zero());
}

#[test]
fn single_shell_besov_norm_is_one_weighted_lp_norm() {
    let g = grid32();
    for (j0, p) in [(0, 4.0), (1, 3.0), (2, 10.0)] {
        let u = shell_bump(g, j0, 1.0, 7).unwrap();
        let lp = quadrature_lp(&u, p);
        assert!((lp_norm(&u, p) - lp).abs() <= 1e-10 * lp);
        let s = critical_s(p);
        for q in [1.0, 2.0, f64::INFINITY] {
            let b = besov_norm(&u, BesovIndex::new(s, p, q).unwrap());
            assert!((b - 2f64.powf(j0 as f64 * s) * lp).abs() <= 1e-10 * b, "j0={j0} p={p} q={q}");
        }
    }
}

#[test]
fn bernstein_ratio_on_a_single_shell() {
    let g = grid32();
    let (j0, p1, p2) = (1, 4.0, 12.0);
    let u = shell_bump(g, j0, 1.0, 3).unwrap();
    let rep = bernstein_check(&u, -0.25, p1, p2, 2.0).unwrap();
    let expected = 2f64.powf(-(j0 as f64) * 3.0 * (1.0 / p1 - 1.0 / p2)) * quadrature_lp(&u, p2) / quadrature_lp(&u, p1);
    assert!((rep.ratio - expected).abs() <= 1e-10 * expected);
}

#[test]
fn besov_norm_is_invariant_under_dyadic_scaling() {
    let g = grid32();
    let u = random_bandlimited(g, 1.0, 6.0, 1.0, 11).unwrap();
    for p in [4.0, 10.0] {
        let idx = BesovIndex::critical(p, p).unwrap();
        let base = besov_norm(&u, idx);
        for m in [1, 2, -1] {
            let v = scaling_transform(&u, m).unwrap();
            assert!((besov_norm(&v, idx) - base).abs() <= 1e-6 * base, "p={p} m={m}");
        }
    }
}

#[test]
fn heat_flow_multiplies_each_mode() {
    let g = grid32();
    let a = [c(0.0, 0.0), c(0.0, 0.0), c(0.4, 0.2)];
    let u = mode_pair(g, [1, 2, 0], a).unwrap();
    assert_eq!(heat_flow(&u, 0.0).unwrap().coeffs(), u.coeffs());
    let h = heat_flow(&u, 1.0).unwrap();
    let idx = g.flat(1, 2, 0);
    assert!((h.mode(idx)[2] - a[2] * (-5.0f64).exp()).norm() < 1e-16);
}

#[test]
fn heat_characterization_is_two_sided() {
    let g = grid32();
    for seed in 0..10 {
        let u = random_bandlimited(g, 1.0, 8.0, 1.0, seed).unwrap();
        let r = heat_characterization_ratio(&u, critical_s(6.0), 6.0).unwrap();
        assert!(r > 0.1 && r < 10.0, "seed {seed}: {r}");
    }
    assert_eq!(heat_characterization_ratio(&SpectralField::zeros(g), -0.5, 6.0).unwrap(), 0.0);
}

#[test]
fn leray_removes_gradients_and_divergence() {
    let g = grid32();
    let mut scalar = vec![c(0.0, 0.0); g.len()];
    for (k, v) in [([1i64, 2, 0], c(0.3, 0.1)), ([0, 3, 1], c(-0.2, 0.5))] {
        let i = g.flat(g.index_of(k[0]), g.index_of(k[1]), g.index_of(k[2]));
        scalar[i] = v;
        scalar[g.conjugate_index(i)] = v.conj();
    }
    let grad = gradient_field(g, &scalar).unwrap();
    assert!(leray_project(&grad).coeff_norm() <= 1e-15 * grad.coeff_norm());

    let mut raw = mode_pair(g, [2, 1, 1], [c(1.0, 0.0), c(0.0, 1.0), c(0.5, 0.5)]).unwrap();
    raw += &grad;
    let p = leray_project(&raw);
    let div = divergence(&p).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(div <= 1e-12 * p.max_coeff());
    assert!(leray_project(&p).rel_distance(&p) <= 1e-15);
}

#[test]
fn generators_are_deterministic_and_homogeneous() {
    let g = grid32();
    let a = random_bandlimited(g, 1.0, 5.0, 1.0, 42).unwrap();
    let b = random_bandlimited(g, 1.0, 5.0, 1.0, 42).unwrap();
    assert_eq!(a.coeffs(), b.coeffs());
    assert!(a.divergence_defect() <= 1e-12 && a.hermitian_defect() <= 1e-15);
    let idx = BesovIndex::critical(6.0, 3.0).unwrap();
    let base = besov_norm(&a, idx);
    for alpha in [0.25, 3.0] {
        let s = random_bandlimited(g, 1.0, 5.0, alpha, 42).unwrap();
        assert!((besov_norm(&s, idx) - alpha * base).abs() <= 1e-12 * alpha * base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn blocks_reconstruct_and_stay_real(seed in 0u64..10_000, lo in 1.0f64..4.0, width in 0.5f64..8.0) {
        let g = GridSpec::new(16).unwrap();
        let hi = (lo + width).min(7.0);
        prop_assume!(hi > lo + 0.2);
        let u = random_bandlimited(g, lo, hi, 1.0, seed).unwrap();
        let set = lp_decompose(&u).unwrap();
        prop_assert!(set.reconstruct().rel_distance(&u) <= 1e-10);
        for (_, b) in set.iter() {
            prop_assert!(b.hermitian_defect() <= 1e-15);
        }
    }

    #[test]
    fn besov_norm_is_absolutely_homogeneous(seed in 0u64..10_000, alpha in -5.0f64..5.0, p in 3.5f64..12.0) {
        let g = GridSpec::new(16).unwrap();
        let u = random_bandlimited(g, 1.0, 6.0, 1.0, seed).unwrap();
        let idx = BesovIndex::critical(p, 2.0).unwrap();
        let a = besov_norm(&u.scaled(alpha), idx);
        let b = alpha.abs() * besov_norm(&u, idx);
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
    }

    #[test]
    fn leray_is_idempotent(seed in 0u64..10_000) {
        let g = GridSpec::new(16).unwrap();
        let mut u = mode_pair(g, [1, 0, 2], [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        u += &random_bandlimited(g, 1.0, 5.0, 1.0, seed).unwrap();
        let p = leray_project(&u);
        prop_assert!(leray_project(&p).rel_distance(&p) <= 1e-14);
    }
}
