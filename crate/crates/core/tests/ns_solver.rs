use bnslab::bilinear::{bilinear, heat_source, nonlinear_term};
use bnslab::expansion::script_1_inf;
use bnslab::generate::{mode_pair, random_bandlimited, taylor_green_like};
use bnslab::solver::{
    calibrate_c0, energy_defects, picard_solve, scale_trajectory, scaling_transform, solve_perturbed,
    with_critical_norm, Classification, SolverConfig, GROWTH_FACTOR,
};
use bnslab::spaces::Trajectory;
use bnslab::{BesovIndex, Complex64, GridSpec, SpectralField};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn grid() -> GridSpec {
    GridSpec::new(16).unwrap()
}

/// `B(u_L, u_L)` for a heat-evolved datum with few modes: every pair of modes
/// `(k, l)` feeds `ξ = k + l` with the source `e^{-(|k|²+|l|²)s}`, whose
/// Duhamel integral against `e^{-|ξ|²(t-s)}` is done in closed form.
fn triad_oracle(u0: &SpectralField, t: f64) -> SpectralField {
    let g = *u0.grid();
    let modes: Vec<([i64; 3], [Complex64; 3])> = (0..g.len())
        .filter(|&i| u0.mode(i).iter().any(|z| z.norm() > 0.0))
        .map(|i| (g.int_wavevector(i), u0.mode(i)))
        .collect();
    let k0 = g.fundamental();
    let mut out = SpectralField::zeros(g);
    for (k, a) in &modes {
        for (l, b) in &modes {
            let xi_i = [k[0] + l[0], k[1] + l[1], k[2] + l[2]];
            if xi_i == [0, 0, 0] {
                continue;
            }
            let xi = [k0 * xi_i[0] as f64, k0 * xi_i[1] as f64, k0 * xi_i[2] as f64];
            let x2 = xi.iter().map(|v| v * v).sum::<f64>();
            let sq = |v: &[i64; 3]| k0 * k0 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) as f64;
            let beta = sq(k) + sq(l);
            let integral = if (x2 - beta).abs() < 1e-12 {
                t * (-beta * t).exp()
            } else {
                ((-beta * t).exp() - (-x2 * t).exp()) / (x2 - beta)
            };
            // -i a (b·ξ), then projected
            let bx = b[0] * xi[0] + b[1] * xi[1] + b[2] * xi[2];
            let mut v = [a[0] * bx, a[1] * bx, a[2] * bx].map(|z| c(0.0, -1.0) * z * integral);
            let d = (v[0] * xi[0] + v[1] * xi[1] + v[2] * xi[2]) / x2;
            for (comp, vc) in v.iter_mut().enumerate() {
                *vc -= d * xi[comp];
            }
            let idx = g.flat(g.index_of(xi_i[0]), g.index_of(xi_i[1]), g.index_of(xi_i[2]));
            let cur = out.mode(idx);
            out.set_mode(idx, [cur[0] + v[0], cur[1] + v[1], cur[2] + v[2]]);
        }
    }
    out
}

fn two_mode_datum(g: GridSpec) -> SpectralField {
    let mut u0 = mode_pair(g, [1, 0, 0], [c(0.0, 0.0), c(0.5, 0.2), c(0.0, -0.3)]).unwrap();
    u0 += &mode_pair(g, [0, 1, 1], [c(0.4, 0.0), c(0.0, 0.25), c(0.0, -0.25)]).unwrap();
    u0
}

#[test]
fn bilinear_form_matches_the_closed_form_triads() {
    let g = grid();
    let u0 = two_mode_datum(g);
    // dt halved twice from 1/64
    let tr = Trajectory::heat(&u0, Trajectory::uniform_times(1.0 / 256.0, 64)).unwrap();
    let b = bilinear(&tr, &tr).unwrap();
    let mut worst: f64 = 0.0;
    for (i, &t) in tr.times().iter().enumerate().skip(1) {
        let exact = triad_oracle(&u0, t);
        worst = worst.max(b.at(i).rel_distance(&exact));
    }
    assert!(worst <= 1e-4, "worst relative error {worst}");
}

#[test]
fn bilinear_form_is_symmetric_and_vanishes_on_zero() {
    let g = grid();
    let times = Trajectory::uniform_times(1.0 / 64.0, 8);
    let u = Trajectory::heat(&random_bandlimited(g, 1.0, 5.0, 1.0, 1).unwrap(), times.clone()).unwrap();
    let v = Trajectory::heat(&random_bandlimited(g, 1.0, 5.0, 3.0, 2).unwrap(), times.clone()).unwrap();
    let z = Trajectory::zeros(g, times).unwrap();
    assert!(bilinear(&z, &v).unwrap().snapshots().iter().all(|s| s.is_zero()));
    let (uv, vu) = (bilinear(&u, &v).unwrap(), bilinear(&v, &u).unwrap());
    assert!(uv.rel_distance(&vu) <= 1e-14);
    assert!(nonlinear_term(u.at(3), v.at(3)).unwrap().divergence_defect() <= 1e-12);
}

#[test]
fn unperturbed_problem_reduces_to_picard() {
    let g = grid();
    let cfg = SolverConfig { n_steps: 16, ..Default::default() };
    let idx = BesovIndex::critical(6.0, 6.0).unwrap();
    let u0 = random_bandlimited(g, 1.0, 4.0, 0.5, 4).unwrap();
    let z = Trajectory::zeros(g, cfg.times()).unwrap();
    let a = picard_solve(&u0, &cfg, idx).unwrap();
    let b = solve_perturbed(&u0, &z, &z, &z, &z, &cfg, idx, false).unwrap();
    assert!(a.converged && b.converged);
    assert!(b.trajectory.rel_distance(&a.trajectory) <= 1e-12);
}

#[test]
fn small_forcing_reproduces_the_bilinear_form() {
    let g = grid();
    let cfg = SolverConfig { n_steps: 16, picard_tol: 1e-12, ..Default::default() };
    let idx = BesovIndex::critical(6.0, 6.0).unwrap();
    let times = cfg.times();
    let a = Trajectory::heat(&random_bandlimited(g, 1.0, 4.0, 0.02, 5).unwrap(), times.clone()).unwrap();
    let b = Trajectory::heat(&random_bandlimited(g, 1.0, 4.0, 0.02, 6).unwrap(), times.clone()).unwrap();
    let f = Trajectory::new(
        times.clone(),
        (0..times.len()).map(|i| nonlinear_term(a.at(i), b.at(i)).unwrap()).collect(),
    )
    .unwrap();
    let z = Trajectory::zeros(g, times).unwrap();
    let w = solve_perturbed(&SpectralField::zeros(g), &z, &z, &f, &z, &cfg, idx, false).unwrap();
    let bab = bilinear(&a, &b).unwrap();
    let err = script_1_inf(&w.trajectory.sub(&bab), 6.0).unwrap() / script_1_inf(&bab, 6.0).unwrap();
    assert!(w.converged && err <= 1e-2, "{err}");
}

#[test]
fn linear_solve_inverts_the_drift_operator() {
    let g = grid();
    let cfg = SolverConfig { n_steps: 16, picard_tol: 1e-12, ..Default::default() };
    let q = 8.0;
    let idx = BesovIndex::critical(q, q).unwrap();
    let times = cfg.times();
    let f = Trajectory::constant(&random_bandlimited(g, 1.0, 4.0, 0.1, 7).unwrap(), times.clone()).unwrap();
    let hf = heat_source(&f).unwrap();
    let z = Trajectory::zeros(g, times.clone()).unwrap();
    let v0 = random_bandlimited(g, 1.0, 3.0, 1.0, 8).unwrap();
    for amp in [0.0, 1.0, 2.0] {
        let v = Trajectory::heat(&v0.scaled(amp), times.clone()).unwrap();
        let out = solve_perturbed(&SpectralField::zeros(g), &v, &z, &f, &z, &cfg, idx, true).unwrap();
        assert!(out.converged);
        let w = &out.trajectory;
        // w − 2B(v, w) = H(f)
        let mut lhs = bilinear(&v, w).unwrap().scaled(-2.0);
        lhs.axpy(1.0, w);
        assert!(lhs.rel_distance(&hf) <= 1e-9, "amp {amp}");
        let gain = script_1_inf(w, q / 2.0).unwrap() / script_1_inf(&hf, q / 2.0).unwrap();
        assert!(gain.is_finite() && (amp > 0.0 || (gain - 1.0).abs() < 1e-12));
    }
}

#[test]
fn solver_commutes_with_dyadic_scaling() {
    let g = grid();
    let cfg = SolverConfig { n_steps: 16, picard_tol: 1e-12, ..Default::default() };
    let idx = BesovIndex::critical(6.0, 6.0).unwrap();
    let u0 = random_bandlimited(g, 1.0, 4.0, 1.0, 9).unwrap();
    let base = picard_solve(&u0, &cfg, idx).unwrap();
    let scaled_cfg = SolverConfig { dt: cfg.dt / 4.0, ..cfg.clone() };
    let direct = picard_solve(&scaling_transform(&u0, 1).unwrap(), &scaled_cfg, idx).unwrap();
    let mapped = scale_trajectory(&base.trajectory, 1).unwrap();
    assert!(base.converged && direct.converged);
    assert!(direct.trajectory.rel_distance(&mapped) <= 1e-4);
}

#[test]
fn energy_balance_holds_per_step() {
    let g = grid();
    let cfg = SolverConfig { n_steps: 32, dt: 1.0 / 128.0, picard_tol: 1e-12, ..Default::default() };
    let u0 = random_bandlimited(g, 1.0, 3.0, 2.0, 10).unwrap();
    let out = picard_solve(&u0, &cfg, BesovIndex::critical(6.0, 6.0).unwrap()).unwrap();
    assert!(out.converged);
    let worst = energy_defects(&out.trajectory).into_iter().fold(0.0, f64::max);
    assert!(worst <= 1e-2, "{worst}");
}

#[test]
fn calibrated_small_data_decay_and_large_data_do_not() {
    let g = grid();
    let cfg = SolverConfig { n_steps: 16, dt: 1.0 / 16.0, ..Default::default() };
    let p = 6.0;
    let idx = BesovIndex::critical(p, p).unwrap();
    let cal = calibrate_c0(g, &cfg, p, 1).unwrap();
    let small = with_critical_norm(&random_bandlimited(g, 1.0, 4.0, 1.0, 11).unwrap(), p, 0.5 * cal.c0).unwrap();
    let out = picard_solve(&small, &cfg, idx).unwrap();
    assert!(out.converged);
    assert_eq!(out.report.classification, Classification::Decaying);
    let large = with_critical_norm(&taylor_green_like(g, 1, 1.0).unwrap(), p, 50.0 * cal.c0).unwrap();
    let out = picard_solve(&large, &cfg, idx).unwrap();
    let c = out.report.classification;
    assert!(c == Classification::PicardDiverged || out.report.running_growth() >= GROWTH_FACTOR, "{c:?}");
}
