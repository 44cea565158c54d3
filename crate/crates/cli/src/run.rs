//! The pipelines behind each command, and the artifact directory they fill.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bnslab::expansion::{expand_solution, iteration_exponent, regularity_norm, simple_iteration, term_norms};
use bnslab::generate::{localized_bump, random_bandlimited, shell_bump, taylor_green_like};
use bnslab::paraproduct::{bilinear_kato_check, product_estimate_check, EstimateReport, KatoExponents};
use bnslab::profiles::{evolve_decomposition, extract_profiles, pythagorean_check, synthesize, ExtractParams, ProfileReport, ProfileSet};
use bnslab::snapshot;
use bnslab::solver::{picard_solve, with_critical_norm, PicardOutcome};
use bnslab::spaces::{evaluate, NormKind, NormReport, NormRow, SpaceTimeNormSpec, Trajectory};
use bnslab::{besov_norm, BesovIndex, GridSpec, SpectralField};
use serde::Serialize;

use crate::config::{Config, FieldCfg, FieldSource, TrajectorySource};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Norms,
    Solve,
    Expand,
    Iterate,
    Profiles,
    VerifyEstimates,
    GenerateField,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Norms => "norms",
            Command::Solve => "solve",
            Command::Expand => "expand",
            Command::Iterate => "iterate",
            Command::Profiles => "profiles",
            Command::VerifyEstimates => "verify-estimates",
            Command::GenerateField => "generate-field",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub path: String,
    pub kind: String,
}

/// Output directory plus the record of what went into it.
pub struct Run {
    pub out: PathBuf,
    pub artifacts: Vec<Artifact>,
    pub summary: toml::Table,
    stride: usize,
}

impl Run {
    pub fn new(out: PathBuf, stride: usize) -> Result<Self, CliError> {
        fs::create_dir_all(&out).map_err(|e| CliError::io(format!("cannot create {}: {e}", out.display())))?;
        Ok(Run { out, artifacts: Vec::new(), summary: toml::Table::new(), stride })
    }

    fn record(&mut self, rel: &str, kind: &str) -> PathBuf {
        self.artifacts.push(Artifact { path: rel.to_string(), kind: kind.to_string() });
        self.out.join(rel)
    }

    pub fn write_text(&mut self, rel: &str, kind: &str, text: &str) -> Result<(), CliError> {
        let path = self.record(rel, kind);
        fs::write(&path, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
    }

    pub fn write_field(&mut self, rel: &str, kind: &str, u: &SpectralField) -> Result<(), CliError> {
        if let Some(parent) = Path::new(rel).parent() {
            fs::create_dir_all(self.out.join(parent))?;
        }
        let path = self.record(rel, kind);
        Ok(snapshot::save(path, u)?)
    }

    /// One snapshot per kept time index plus `times.csv`.
    pub fn write_trajectory(&mut self, dir: &str, kind: &str, tr: &Trajectory) -> Result<(), CliError> {
        if self.stride == 0 {
            return Ok(());
        }
        fs::create_dir_all(self.out.join(dir))?;
        let mut times = String::from("index,t\n");
        for (i, (t, u)) in tr.times().iter().zip(tr.snapshots()).enumerate() {
            if i % self.stride != 0 && i + 1 != tr.len() {
                continue;
            }
            snapshot::save(self.out.join(dir).join(format!("t{i:05}.bnsf")), u)?;
            let _ = writeln!(times, "{i},{t:e}");
        }
        fs::write(self.out.join(dir).join("times.csv"), times)?;
        self.artifacts.push(Artifact { path: dir.to_string(), kind: kind.to_string() });
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.summary.insert(key.to_string(), value.into());
    }
}

pub struct Scenario<'a> {
    pub cfg: &'a Config,
    pub grid: GridSpec,
    pub seed: u64,
    /// Directory relative paths in the config are resolved against.
    pub base: PathBuf,
}

impl Scenario<'_> {
    pub fn field(&self, f: &FieldCfg) -> Result<SpectralField, CliError> {
        let g = self.grid;
        let seed = self.seed.wrapping_add(f.seed_offset);
        let amp = f.amplitude.unwrap_or(1.0);
        let u = match f.source {
            FieldSource::File => {
                let path = self.base.join(f.path.as_ref().expect("validated"));
                let u = snapshot::load(&path)?;
                if !u.grid().same_as(&g) {
                    return Err(CliError::config(format!("{} is not on the configured grid", path.display())));
                }
                u.scaled(amp)
            }
            FieldSource::RandomBandlimited => random_bandlimited(g, f.xi_lo.unwrap(), f.xi_hi.unwrap(), amp, seed)?,
            FieldSource::TaylorGreenLike => taylor_green_like(g, f.k.unwrap(), amp)?,
            FieldSource::ShellBump => shell_bump(g, f.j0.unwrap(), amp, seed)?,
            FieldSource::LocalizedBump => localized_bump(g, f.width.unwrap(), f.k_max.unwrap(), amp)?,
        };
        match f.critical_norm {
            Some(c) => Ok(with_critical_norm(&u, self.cfg.solver.p, c)?),
            None => Ok(u),
        }
    }

    fn datum(&self) -> Result<SpectralField, CliError> {
        self.field(self.cfg.require_field()?)
    }

    fn solve(&self, u0: &SpectralField) -> Result<PicardOutcome, CliError> {
        Ok(picard_solve(u0, &self.cfg.solver(), self.cfg.critical_index())?)
    }

    fn solve_converged(&self, u0: &SpectralField) -> Result<PicardOutcome, CliError> {
        let out = self.solve(u0)?;
        if !out.converged {
            return Err(CliError::numerical(format!(
                "picard_diverged: no convergence after {} iterations ({})",
                out.iterations(),
                out.report.classification.tag()
            )));
        }
        Ok(out)
    }
}

pub fn run(cmd: Command, sc: &Scenario, run: &mut Run) -> Result<(), CliError> {
    match cmd {
        Command::Norms => norms(sc, run),
        Command::Solve => solve(sc, run),
        Command::Expand => expand(sc, run),
        Command::Iterate => iterate(sc, run),
        Command::Profiles => profiles(sc, run),
        Command::VerifyEstimates => estimates(sc, run),
        Command::GenerateField => generate(sc, run),
    }
}

fn norms(sc: &Scenario, run: &mut Run) -> Result<(), CliError> {
    let nc = &sc.cfg.norms;
    let u0 = sc.datum()?;
    let mut report = NormReport::default();
    for b in &nc.besov {
        let idx = BesovIndex::new(b.s, b.p, b.q)?;
        report.push(NormRow::besov(idx, 0.0, besov_norm(&u0, idx)));
    }
    let needs_time = !(nc.chemin_lerner.is_empty() && nc.script.is_empty() && nc.kato.is_empty());
    if needs_time {
        let tr = match nc.trajectory {
            TrajectorySource::Heat => Trajectory::heat(&u0, sc.cfg.solver().times())?,
            TrajectorySource::Solution => sc.solve_converged(&u0)?.trajectory,
        };
        let interval = (0.0, tr.end_time());
        let mut specs = Vec::new();
        for c in &nc.chemin_lerner {
            specs.push(SpaceTimeNormSpec { kind: NormKind::CheminLerner { rho: c.rho }, besov: BesovIndex::new(c.s, c.p, c.q)?, interval });
        }
        for s in &nc.script {
            specs.push(SpaceTimeNormSpec { kind: NormKind::Script { a: s.a, b: s.b }, besov: BesovIndex::new(0.0, s.p, s.q)?, interval });
        }
        for k in &nc.kato {
            let kind = if k.order == 0 { NormKind::Kato } else { NormKind::Kato1 };
            specs.push(SpaceTimeNormSpec { kind, besov: BesovIndex::new(0.0, k.q, f64::INFINITY)?, interval });
        }
        for spec in &specs {
            report.push(NormRow::from_spec(spec, evaluate(&tr, spec)?));
        }
    }
    run.note("rows", report.rows.len() as i64);
    run.write_text("norms.csv", "norm_report", &report.to_csv())
}

fn solve(sc: &Scenario, run: &mut Run) -> Result<(), CliError> {
    let u0 = sc.datum()?;
    let out = sc.solve(&u0)?;
    run.note("converged", out.converged);
    run.note("iterations", out.iterations() as i64);
    run.note("classification", out.report.classification.tag());
    if let Some(r) = out.residuals.last() {
        run.note("final_residual", *r);
    }
    run.write_text("blowup.csv", "blowup_report", &out.report.to_csv())?;
    let residuals: String =
        out.residuals.iter().enumerate().fold(String::from("iteration,residual\n"), |mut s, (i, r)| {
            let _ = writeln!(s, "{},{r:e}", i + 1);
            s
        });
    run.write_text("picard.csv", "picard_residuals", &residuals)?;
    if !out.converged {
        return Err(CliError::numerical(format!("picard_diverged after {} iterations", out.iterations())));
    }
    run.write_trajectory("trajectory", "trajectory", &out.trajectory)
}

fn expand(sc: &Scenario, run: &mut Run) -> Result<(), CliError> {
    let k = sc.cfg.expand.k;
    let u0 = sc.datum()?;
    let res = expand_solution(&u0, k, &sc.cfg.solver())?;
    let p = iteration_exponent(k);
    let norms = term_norms(&res)?;
    let mut csv = String::from("row,p,value\n");
    let _ = writeln!(csv, "residual,{p},{:e}", res.residual);
    let _ = writeln!(csv, "relative_residual,{p},{:e}", res.relative_residual());
    for (n, v) in norms.iter().enumerate() {
        let _ = writeln!(csv, "u_L{n},{},{v:e}", p / 2f64.powi(n as i32));
    }
    let reg = regularity_norm(&res.tail, p)?;
    let _ = writeln!(csv, "w_{k}_regularity,{p},{reg:e}");
    run.note("k", k as i64);
    run.note("p", p);
    run.note("relative_residual", res.relative_residual());
    let mut dirs = Vec::new();
    for (n, t) in res.terms.iter().enumerate() {
        let d = format!("terms/u_L{n}");
        run.write_trajectory(&d, "expansion_term", t)?;
        dirs.push(toml::Value::from(d));
    }
    run.write_trajectory(&format!("terms/w_{k}"), "expansion_remainder", &res.tail)?;
    run.note("term_dirs", toml::Value::Array(dirs));
    run.write_text("expansion.csv", "expansion_report", &csv)
}

fn iterate(sc: &Scenario, run: &mut Run) -> Result<(), CliError> {
    let p = sc.cfg.solver.p;
    let u0 = sc.datum()?;
    let u = sc.solve_converged(&u0)?.trajectory;
    let ul = Trajectory::heat(&u0, u.times().to_vec())?;
    let w0 = u.sub(&ul);
    let steps = simple_iteration(&u0, &ul, &w0, sc.cfg.iterate.steps, p)?;
    let mut csv = String::from("j,identity_defect,v_sup_lp,w_l3\n");
    for (j, s) in steps.iter().enumerate() {
        let _ = writeln!(csv, "{},{:e},{:e},{:e}", j + 1, s.identity_defect, s.v_sup_lp, s.w_l3);
    }
    run.note("steps", steps.len() as i64);
    run.write_text("iterate.csv", "iteration_report", &csv)
}

#[derive(Serialize)]
struct ProfileManifest {
    q: f64,
    complete: bool,
    profiles: Vec<String>,
    /// `[m, x0, x1, x2]` per sequence index.
    schedules: Vec<Vec<[i64; 4]>>,
    remainders: Vec<String>,
}

fn write_profile_set(run: &mut Run, dir: &str, ps: &ProfileSet, q: f64) -> Result<(), CliError> {
    let mut files = Vec::new();
    for (j, p) in ps.profiles.iter().enumerate() {
        let rel = format!("{dir}/phi_{j}.bnsf");
        run.write_field(&rel, "profile", p)?;
        files.push(rel);
    }
    let mut remainders = Vec::new();
    for ((n, jc), psi) in &ps.remainders {
        let rel = format!("{dir}/psi_n{n}_J{jc}.bnsf");
        run.write_field(&rel, "remainder", psi)?;
        remainders.push(rel);
    }
    let schedules = ps
        .schedules
        .iter()
        .map(|s| s.iter().map(|c| [c.log2_lambda as i64, c.core[0] as i64, c.core[1] as i64, c.core[2] as i64]).collect())
        .collect();
    let m = ProfileManifest { q, complete: ps.complete, profiles: files, schedules, remainders };
    let text = toml::to_string(&m).map_err(|e| CliError::io(e.to_string()))?;
    run.write_text(&format!("{dir}/profiles.toml"), "profile_manifest", &text)
}

fn profiles(sc: &Scenario, run: &mut Run) -> Result<(), CliError> {
    let pc = sc.cfg.profiles.as_ref().ok_or_else(|| CliError::config("this command needs a [profiles] table"))?;
    let fields = pc.profile.iter().map(|p| sc.field(&p.field)).collect::<Result<Vec<_>, _>>()?;
    let ps = ProfileSet::new(fields, pc.schedules())?;
    let j_count = ps.len();
    let len = ps.indices();
    let seq: Vec<SpectralField> = (0..len).map(|n| synthesize(&ps, n, j_count)).collect::<Result<_, _>>()?;
    write_profile_set(run, "planted", &ps, pc.q)?;
    for (n, f) in seq.iter().enumerate() {
        run.write_field(&format!("sequence/f_{n}.bnsf"), "sequence_element", f)?;
    }
    let rows = pythagorean_check(&ps, &seq, &(0..len).collect::<Vec<_>>(), pc.q)?;
    let mut report = ProfileReport::default();
    for r in &rows {
        let r_norm = if pc.evolve { Some(evolve_decomposition(&ps, &sc.cfg.solver(), r.n, j_count, pc.q)?.r_norm) } else { None };
        report.push(r.n, r.j_count, Some(r.epsilon), r.cross_term_max, r_norm);
    }
    run.write_text("profiles.csv", "profile_report", &report.to_csv())?;
    if let Some(last) = rows.last() {
        run.note("final_relative_epsilon", last.relative());
    }
    if pc.extract {
        let found = extract_profiles(&seq, ExtractParams { q: pc.q, ..Default::default() })?;
        run.note("extracted_profiles", found.len() as i64);
        run.note("extraction_complete", found.complete);
        if !found.is_empty() {
            write_profile_set(run, "extracted", &found, pc.q)?;
        }
    }
    Ok(())
}

fn estimates(sc: &Scenario, run: &mut Run) -> Result<(), CliError> {
    let ec = &sc.cfg.estimates;
    let g = sc.grid;
    let times = sc.cfg.solver().times();
    let kato = KatoExponents { p: ec.kato.p, q: ec.kato.q, r: ec.kato.r };
    let mut report = EstimateReport::default();
    for i in 0..ec.pairs as u64 {
        let f = random_bandlimited(g, ec.xi_lo, ec.xi_hi, 1.0, sc.seed.wrapping_add(2 * i))?;
        let h = random_bandlimited(g, ec.xi_lo, ec.xi_hi, 1.0, sc.seed.wrapping_add(2 * i + 1))?;
        for row in product_estimate_check(&f, &h, ec.paraproduct.into(), ec.remainder.into())? {
            report.push(row);
        }
        let (a, b) = (Trajectory::heat(&f, times.clone())?, Trajectory::heat(&h, times.clone())?);
        report.push(bilinear_kato_check(&a, &b, kato, a.end_time())?);
    }
    for id in ["paraproduct", "remainder", "bilinear_kato"] {
        run.note(&format!("max_ratio_{id}"), report.max_ratio(id));
    }
    run.write_text("estimates.csv", "estimate_report", &report.to_csv())
}

fn generate(sc: &Scenario, run: &mut Run) -> Result<(), CliError> {
    let u = sc.datum()?;
    run.note("critical_norm", besov_norm(&u, sc.cfg.critical_index()));
    run.note("divergence_defect", u.divergence_defect());
    run.write_field("field.bnsf", "snapshot", &u)
}
