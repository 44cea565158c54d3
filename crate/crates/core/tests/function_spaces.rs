use bnslab::besov::{critical_s, lp_norm};
use bnslab::generate::{random_bandlimited, shell_bump};
use bnslab::solver::scale_trajectory;
use bnslab::spaces::{
    chemin_lerner_norm, embedding_chain_check, evaluate, kato_norm, script_norm, NormKind, SpaceTimeNormSpec,
    Trajectory,
};
use bnslab::{besov_norm, BesovIndex, GridSpec, SpectralField};
use proptest::prelude::*;

fn grid() -> GridSpec {
    GridSpec::new(16).unwrap()
}

#[test]
fn constant_trajectory_reduces_to_the_snapshot_norm() {
    let g = grid();
    let u = shell_bump(g, 1, 1.0, 5).unwrap();
    let idx = BesovIndex::new(-0.4, 5.0, 2.0).unwrap();
    let tr = Trajectory::constant(&u, Trajectory::uniform_times(0.1, 10)).unwrap();
    let b = besov_norm(&u, idx);
    let sup = chemin_lerner_norm(&tr, idx, f64::INFINITY, 0.0, 1.0).unwrap();
    assert!((sup - b).abs() <= 1e-12 * b);
    let l1 = chemin_lerner_norm(&tr, idx, 1.0, 0.0, 1.0).unwrap();
    assert!((l1 - b).abs() <= 1e-12 * b);
    let l1_half = chemin_lerner_norm(&tr, idx, 1.0, 0.0, 0.5).unwrap();
    assert!((l1_half - 0.5 * b).abs() <= 1e-12 * b);
}

#[test]
fn heat_trajectory_on_one_sphere_matches_the_closed_form_integral() {
    let g = grid();
    let (j0, p) = (1, 6.0);
    let u0 = shell_bump(g, j0, 1.0, 2).unwrap();
    let t_end = 0.25;
    let tr = Trajectory::heat(&u0, Trajectory::uniform_times(t_end / 256.0, 256)).unwrap();
    let s = critical_s(p) + 2.0;
    let v = chemin_lerner_norm(&tr, BesovIndex::new(s, p, 1.0).unwrap(), 1.0, 0.0, t_end).unwrap();
    // every mode sits at |ξ| = 2^{j0+1}, so ‖Δ_{j0}u(t)‖ = e^{-c t}‖u₀‖ with c = 4^{j0+1}
    let c = 4f64.powi(j0 + 1);
    let exact = 2f64.powf(j0 as f64 * s) * lp_norm(&u0, p) * (1.0 - (-c * t_end).exp()) / c;
    assert!((v - exact).abs() <= 1e-3 * exact, "{v} vs {exact}");
}

#[test]
fn degenerate_script_range_is_chemin_lerner() {
    let g = grid();
    let u0 = random_bandlimited(g, 1.0, 6.0, 1.0, 3).unwrap();
    let tr = Trajectory::heat(&u0, Trajectory::uniform_times(1.0 / 32.0, 16)).unwrap();
    let p = 5.0;
    for rho in [1.0, 2.0, 4.0] {
        let spec = SpaceTimeNormSpec {
            kind: NormKind::Script { a: rho, b: rho },
            besov: BesovIndex::new(0.0, p, p).unwrap(),
            interval: (0.0, 0.5),
        };
        let script = evaluate(&tr, &spec).unwrap();
        let cl = chemin_lerner_norm(&tr, BesovIndex::new(critical_s(p) + 2.0 / rho, p, p).unwrap(), rho, 0.0, 0.5).unwrap();
        assert!((script - cl).abs() <= 1e-14 * cl);
    }
}

#[test]
fn zero_trajectory_has_zero_norms() {
    let g = grid();
    let tr = Trajectory::zeros(g, Trajectory::uniform_times(0.1, 4)).unwrap();
    let idx = BesovIndex::critical(6.0, 2.0).unwrap();
    assert_eq!(script_norm(&tr, 1.0, f64::INFINITY, idx, 0.4).unwrap(), 0.0);
    assert_eq!(kato_norm(&tr, 6.0, 0.4, 0).unwrap(), 0.0);
    assert_eq!(kato_norm(&tr, 6.0, 0.4, 1).unwrap(), 0.0);
}

#[test]
fn script_norm_is_scale_invariant() {
    let g = grid();
    let u0 = random_bandlimited(g, 1.0, 5.0, 1.0, 8).unwrap();
    let tr = Trajectory::heat(&u0, Trajectory::uniform_times(1.0 / 64.0, 32)).unwrap();
    for p in [4.0, 10.0] {
        let idx = BesovIndex::critical(p, p).unwrap();
        let base = script_norm(&tr, 1.0, f64::INFINITY, idx, tr.end_time()).unwrap();
        for m in [1, -1] {
            let s = scale_trajectory(&tr, m).unwrap();
            let v = script_norm(&s, 1.0, f64::INFINITY, idx, s.end_time()).unwrap();
            assert!((v - base).abs() <= 1e-6 * base, "p={p} m={m}: {v} vs {base}");
        }
    }
}

#[test]
fn kato_norm_of_heat_flow_is_comparable_to_the_besov_norm() {
    let g = grid();
    let q = 6.0;
    let times: Vec<f64> = std::iter::once(0.0).chain((-14..=2).map(|e| 2f64.powf(e as f64 / 2.0))).collect();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for seed in 0..20 {
        let u0 = random_bandlimited(g, 1.0, 7.0, 1.0, seed).unwrap();
        let tr = Trajectory::heat(&u0, times.clone()).unwrap();
        let k = kato_norm(&tr, q, tr.end_time(), 0).unwrap();
        let b = besov_norm(&u0, BesovIndex::new(critical_s(q), q, f64::INFINITY).unwrap());
        lo = lo.min(k / b);
        hi = hi.max(k / b);
    }
    assert!(hi / lo <= 10.0 && lo > 0.1 && hi < 10.0, "ratios in [{lo}, {hi}]");
}

#[test]
fn single_shell_chemin_lerner_equals_lebesgue() {
    let g = grid();
    let u0 = shell_bump(g, 0, 1.0, 1).unwrap();
    let tr = Trajectory::heat(&u0, Trajectory::uniform_times(1.0 / 16.0, 8)).unwrap();
    let idx = BesovIndex::new(-0.5, 4.0, 3.0).unwrap();
    let c = embedding_chain_check(&tr, 2.0, 5.0, idx, 0.0, 0.5).unwrap();
    assert!(c.holds);
    assert!((c.chemin_lerner_rho1 - c.lebesgue_rho1).abs() <= 1e-14 * c.lebesgue_rho1);
    assert!((c.chemin_lerner_rho2 - c.lebesgue_rho2).abs() <= 1e-14 * c.lebesgue_rho2);
}

#[test]
fn rejects_bad_exponents() {
    let g = grid();
    let tr = Trajectory::zeros(g, Trajectory::uniform_times(0.1, 4)).unwrap();
    let idx = BesovIndex::new(0.0, 4.0, 3.0).unwrap();
    assert!(embedding_chain_check(&tr, 4.0, 5.0, idx, 0.0, 0.4).is_err());
    assert!(script_norm(&tr, 2.0, 1.0, idx, 0.4).is_err());
    assert!(kato_norm(&tr, 3.0, 0.4, 0).is_err());
}

fn random_trajectory(g: GridSpec, seed: u64, k: usize) -> Trajectory {
    let snaps: Vec<SpectralField> =
        (0..k).map(|i| random_bandlimited(g, 1.0, 7.0, 1.0 + i as f64 * 0.1, seed * 97 + i as u64).unwrap()).collect();
    Trajectory::new(Trajectory::uniform_times(0.125, k - 1), snaps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn embedding_chain_holds(seed in 0u64..1000, s in -1.0f64..1.0) {
        let tr = random_trajectory(grid(), seed, 8);
        let idx = BesovIndex::new(s, 4.0, 5.0).unwrap();
        let c = embedding_chain_check(&tr, 1.0, f64::INFINITY, idx, 0.0, tr.end_time()).unwrap();
        prop_assert!(c.holds, "{:?}", c);
    }

    #[test]
    fn script_norm_is_homogeneous(seed in 0u64..1000, alpha in 0.01f64..100.0) {
        let tr = random_trajectory(grid(), seed, 5);
        let idx = BesovIndex::critical(6.0, 6.0).unwrap();
        let a = script_norm(&tr.scaled(alpha), 1.0, f64::INFINITY, idx, tr.end_time()).unwrap();
        let b = alpha * script_norm(&tr, 1.0, f64::INFINITY, idx, tr.end_time()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b);
    }
}
