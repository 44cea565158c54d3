use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use bnslab::besov::{critical_s, lp_norm};
use bnslab::snapshot;
use bnslab::{besov_norm, BesovIndex};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bnslab"));
    c.env_remove("BNSLAB_THREADS");
    c
}

struct Case {
    dir: tempfile::TempDir,
}

impl Case {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("scenario.toml"), config).unwrap();
        Case { dir }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, cmd: &str, out: &str, extra: &[&str]) -> (i32, String) {
        let o = bin()
            .arg(cmd)
            .arg("--config")
            .arg(self.dir.path().join("scenario.toml"))
            .arg("--out")
            .arg(self.out(out))
            .args(extra)
            .output()
            .unwrap();
        (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stderr).into_owned())
    }
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn manifest(dir: &Path) -> toml::Table {
    read(&dir.join("manifest.toml")).parse().unwrap()
}

/// Column `name` of a comma-separated report.
fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let c = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(c).unwrap().to_string()).collect()
}

const SMALL: &str = r#"
seed = 11
[grid]
n = 16
[solver]
dt = 0.03125
n_steps = 16
p = 10.0
"#;

#[test]
fn generated_fields_are_reproducible() {
    let case = Case::new(&format!("{SMALL}\n[field]\nsource = \"random_bandlimited\"\nxi_lo = 1.0\nxi_hi = 4.0\n"));
    assert_eq!(case.run("generate-field", "a", &[]).0, 0);
    assert_eq!(case.run("generate-field", "b", &[]).0, 0);
    let (a, b) = (fs::read(case.out("a/field.bnsf")).unwrap(), fs::read(case.out("b/field.bnsf")).unwrap());
    assert_eq!(a, b);
    assert_eq!(case.run("generate-field", "c", &["--seed", "12"]).0, 0);
    assert_ne!(fs::read(case.out("c/field.bnsf")).unwrap(), a);

    let m = manifest(&case.out("a"));
    assert_eq!(m["command"].as_str(), Some("generate-field"));
    assert_eq!(m["seed"].as_integer(), Some(11));
    assert!(m["config_hash"].as_str().unwrap().starts_with("sha256:"));
    assert_eq!(m["code_version"].as_str(), Some(env!("CARGO_PKG_VERSION")));
    let u = snapshot::load(case.out("a/field.bnsf")).unwrap();
    assert!(u.divergence_defect() <= 1e-12);
    assert!(u.mean_mode().iter().all(|c| c.norm() == 0.0));
}

#[test]
fn shell_bump_snapshot_has_the_single_shell_norm() {
    let case = Case::new(&format!("{SMALL}\n[field]\nsource = \"shell_bump\"\nj0 = 1\n"));
    assert_eq!(case.run("generate-field", "o", &[]).0, 0);
    let u = snapshot::load(case.out("o/field.bnsf")).unwrap();
    let p = 4.0;
    let b = besov_norm(&u, BesovIndex::critical(p, 2.0).unwrap());
    let expect = 2f64.powf(critical_s(p)) * lp_norm(&u, p);
    assert!((b - expect).abs() <= 1e-12 * expect);
}

#[test]
fn norms_scale_linearly_with_amplitude() {
    let table = "[norms]\nbesov = [{ s = -0.25, p = 4.0, q = 2.0 }]\nchemin_lerner = [{ s = 0.0, p = 4.0, q = 2.0, rho = 2.0 }]\nscript = [{ a = 1.0, b = inf, p = 10.0, q = 10.0 }]\nkato = [{ q = 6.0 }, { q = 6.0, order = 1 }]\n";
    let field = |amp: f64| format!("[field]\nsource = \"random_bandlimited\"\nxi_lo = 1.0\nxi_hi = 5.0\namplitude = {amp}\n");
    let one = Case::new(&format!("{SMALL}\n{table}\n{}", field(1.0)));
    let three = Case::new(&format!("{SMALL}\n{table}\n{}", field(3.0)));
    assert_eq!(one.run("norms", "o", &[]).0, 0);
    assert_eq!(three.run("norms", "o", &[]).0, 0);
    let (a, b) = (read(&one.out("o/norms.csv")), read(&three.out("o/norms.csv")));
    let kinds = column(&a, "norm_kind");
    assert_eq!(kinds, ["besov", "chemin_lerner", "script", "kato", "kato1"]);
    for (x, y) in column(&a, "value").iter().zip(column(&b, "value")) {
        let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
        assert!(x > 0.0 && (y - 3.0 * x).abs() <= 1e-12 * y, "{x} {y}");
    }
}

#[test]
fn schema_violations_exit_with_two() {
    let case = Case::new(&format!("{SMALL}\ncolour = 3\n"));
    let (code, err) = case.run("norms", "o", &[]);
    assert_eq!(code, 2, "{err}");
    let case = Case::new("[grid]\nn = 16\n[solver]\ndt = -1.0\n");
    assert_eq!(case.run("solve", "o", &[]).0, 2);
    // a valid file whose command needs a missing table
    let case = Case::new(SMALL);
    assert_eq!(case.run("solve", "o", &[]).0, 2);
    let report: toml::Table = read(&case.out("o/error.toml")).parse().unwrap();
    assert_eq!(report["exit_code"].as_integer(), Some(2));
    assert_eq!(report["kind"].as_str(), Some("config"));
}

#[test]
fn bad_thread_variable_is_a_config_error() {
    let case = Case::new(&format!("{SMALL}\n[field]\nsource = \"shell_bump\"\nj0 = 0\n"));
    let o = bin()
        .args(["generate-field", "--config"])
        .arg(case.dir.path().join("scenario.toml"))
        .arg("--out")
        .arg(case.out("o"))
        .env("BNSLAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(case.run("generate-field", "t", &["--threads", "1"]).0, 0);
    assert_eq!(manifest(&case.out("t"))["threads"].as_integer(), Some(1));
}

#[test]
fn small_datum_decays_and_reruns_agree() {
    let cfg = format!(
        "{SMALL}\n[field]\nsource = \"random_bandlimited\"\nxi_lo = 1.0\nxi_hi = 4.0\ncritical_norm = 1.0\n[output]\nsnapshot_stride = 4\n"
    );
    let case = Case::new(&cfg);
    assert_eq!(case.run("solve", "a", &[]).0, 0);
    assert_eq!(case.run("solve", "b", &[]).0, 0);
    let csv = read(&case.out("a/blowup.csv"));
    assert_eq!(csv, read(&case.out("b/blowup.csv")));
    assert_eq!(column(&csv, "classification")[0], "decaying");
    let norms: Vec<f64> = column(&csv, "besov_norm").iter().map(|x| x.parse().unwrap()).collect();
    let knee = norms.iter().enumerate().fold(0, |k, (i, x)| if *x > norms[k] { i } else { k });
    assert!(norms[knee..].windows(2).all(|w| w[1] <= w[0]));
    let times = read(&case.out("a/trajectory/times.csv"));
    assert_eq!(times.lines().count(), 1 + 5);
    assert!(case.out("a/trajectory/t00016.bnsf").exists());
    assert_eq!(manifest(&case.out("a"))["summary"]["classification"].as_str(), Some("decaying"));
}

#[test]
fn divergent_solve_exits_with_three() {
    let cfg = format!(
        "{SMALL}\nmax_picard_iters = 6\n[field]\nsource = \"taylor_green_like\"\nk = 1\ncritical_norm = 500.0\n"
    );
    let case = Case::new(&cfg);
    let (code, err) = case.run("solve", "o", &[]);
    assert_eq!(code, 3, "{err}");
    let report: toml::Table = read(&case.out("o/error.toml")).parse().unwrap();
    assert_eq!(report["kind"].as_str(), Some("numerical"));
    assert_eq!(manifest(&case.out("o"))["status"].as_str(), Some("failed"));
    assert!(case.out("o/blowup.csv").exists());
}

#[test]
fn expansion_at_k2_has_a_small_residual() {
    let cfg = format!(
        "{SMALL}\n[field]\nsource = \"random_bandlimited\"\nxi_lo = 1.0\nxi_hi = 4.0\ncritical_norm = 1.0\n[expand]\nk = 2\n[output]\nsnapshot_stride = 0\n"
    );
    let case = Case::new(&cfg);
    let (code, err) = case.run("expand", "o", &[]);
    assert_eq!(code, 0, "{err}");
    let csv = read(&case.out("o/expansion.csv"));
    let rows = column(&csv, "row");
    let vals = column(&csv, "value");
    let rel: f64 = vals[rows.iter().position(|r| r == "relative_residual").unwrap()].parse().unwrap();
    assert!(rel <= 1e-8, "{rel}");
    assert!(rows.iter().any(|r| r == "u_L2"));
}

#[test]
fn iterate_reports_every_step() {
    let cfg = format!(
        "{SMALL}\n[field]\nsource = \"random_bandlimited\"\nxi_lo = 1.0\nxi_hi = 4.0\ncritical_norm = 1.0\n[iterate]\nsteps = 2\n"
    );
    let case = Case::new(&cfg);
    assert_eq!(case.run("iterate", "o", &[]).0, 0);
    let defects: Vec<f64> = column(&read(&case.out("o/iterate.csv")), "identity_defect").iter().map(|x| x.parse().unwrap()).collect();
    assert_eq!(defects.len(), 2);
    assert!(defects.iter().all(|d| *d <= 1e-6));
}

#[test]
fn planted_profiles_are_reported_and_recovered() {
    let cfg = format!(
        r#"{SMALL}
[profiles]
q = 6.0
extract = true
[[profiles.profile]]
field = {{ source = "localized_bump", width = 0.5, k_max = 6 }}
schedule = [[0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]
[[profiles.profile]]
field = {{ source = "random_bandlimited", xi_lo = 1.0, xi_hi = 1.8, amplitude = 0.5 }}
schedule = [[0, 8, 8, 8], [-1, 8, 8, 8], [-1, 4, 8, 12]]
"#
    );
    let case = Case::new(&cfg);
    let (code, err) = case.run("profiles", "o", &[]);
    assert_eq!(code, 0, "{err}");
    let csv = read(&case.out("o/profiles.csv"));
    assert_eq!(column(&csv, "n"), ["0", "1", "2"]);
    let planted: toml::Table = read(&case.out("o/planted/profiles.toml")).parse().unwrap();
    assert_eq!(planted["profiles"].as_array().unwrap().len(), 2);
    assert!(manifest(&case.out("o"))["summary"]["extracted_profiles"].as_integer().unwrap() >= 1);

    let off_grid = cfg.replace("[-1, 4, 8, 12]", "[-1, 4, 8, 16]");
    assert_eq!(Case::new(&off_grid).run("profiles", "o", &[]).0, 2);
    let moved = cfg.replacen("[[0, 0, 0, 0], [0, 0, 0, 0]", "[[0, 0, 0, 0], [0, 2, 0, 0]", 1);
    assert_eq!(Case::new(&moved).run("profiles", "o", &[]).0, 2);
    let ragged = cfg.replace(", [-1, 4, 8, 12]]", "]");
    assert_eq!(Case::new(&ragged).run("profiles", "o", &[]).0, 2);
}

#[test]
fn estimate_report_has_all_checks() {
    let case = Case::new(&format!("{SMALL}\n[estimates]\npairs = 2\n"));
    assert_eq!(case.run("verify-estimates", "o", &[]).0, 0);
    let csv = read(&case.out("o/estimates.csv"));
    assert_eq!(column(&csv, "check_id"), ["paraproduct", "remainder", "bilinear_kato", "paraproduct", "remainder", "bilinear_kato"]);
    for r in column(&csv, "ratio") {
        let r: f64 = r.parse().unwrap();
        assert!(r.is_finite() && r > 0.0);
    }
}
