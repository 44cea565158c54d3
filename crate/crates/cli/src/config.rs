//! Scenario files. Every table rejects unknown keys; `validate` checks the
//! ranges before any computation starts.

use std::path::{Path, PathBuf};

use bnslab::paraproduct::{KatoExponents, ProductExponents};
use bnslab::profiles::ScaleCore;
use bnslab::solver::SolverConfig;
use bnslab::{BesovIndex, GridSpec};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub grid: GridCfg,
    #[serde(default)]
    pub solver: SolverCfg,
    pub field: Option<FieldCfg>,
    #[serde(default)]
    pub norms: NormsCfg,
    #[serde(default)]
    pub expand: ExpandCfg,
    #[serde(default)]
    pub iterate: IterateCfg,
    pub profiles: Option<ProfilesCfg>,
    #[serde(default)]
    pub estimates: EstimatesCfg,
    #[serde(default)]
    pub output: OutputCfg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCfg {
    pub n: usize,
    pub period: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverCfg {
    pub dt: f64,
    pub n_steps: usize,
    pub picard_tol: f64,
    pub max_picard_iters: usize,
    pub c0_estimate: Option<f64>,
    /// Critical exponent used for monitoring and residuals.
    pub p: f64,
}

impl Default for SolverCfg {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverCfg {
            dt: d.dt,
            n_steps: d.n_steps,
            picard_tol: d.picard_tol,
            max_picard_iters: d.max_picard_iters,
            c0_estimate: None,
            p: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    File,
    RandomBandlimited,
    TaylorGreenLike,
    ShellBump,
    LocalizedBump,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldCfg {
    pub source: FieldSource,
    pub path: Option<PathBuf>,
    pub xi_lo: Option<f64>,
    pub xi_hi: Option<f64>,
    pub amplitude: Option<f64>,
    pub k: Option<i64>,
    pub j0: Option<i32>,
    pub width: Option<f64>,
    pub k_max: Option<i64>,
    /// Rescale to this `Ḃ^{s_p}_{p,p}` norm, `p` from `[solver]`.
    pub critical_norm: Option<f64>,
    /// Offset added to the scenario seed for this field.
    #[serde(default)]
    pub seed_offset: u64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesovCfg {
    pub s: f64,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheminLernerCfg {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptCfg {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KatoCfg {
    pub q: f64,
    #[serde(default)]
    pub order: u8,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    /// `e^{tΔ}u₀` on the solver time grid.
    #[default]
    Heat,
    /// The mild solution from `u₀`.
    Solution,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormsCfg {
    pub besov: Vec<BesovCfg>,
    pub chemin_lerner: Vec<CheminLernerCfg>,
    pub script: Vec<ScriptCfg>,
    pub kato: Vec<KatoCfg>,
    pub trajectory: TrajectorySource,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpandCfg {
    pub k: u32,
}

impl Default for ExpandCfg {
    fn default() -> Self {
        ExpandCfg { k: 2 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IterateCfg {
    pub steps: usize,
}

impl Default for IterateCfg {
    fn default() -> Self {
        IterateCfg { steps: 3 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileCfg {
    pub field: FieldCfg,
    /// One `[m, x0, x1, x2]` per sequence index: `λ = 2^m`, core at grid index `x`.
    pub schedule: Vec<[i64; 4]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesCfg {
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub evolve: bool,
    #[serde(default)]
    pub extract: bool,
    pub profile: Vec<ProfileCfg>,
}

fn default_q() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawCfg {
    pub s: f64,
    pub t: f64,
    pub p: f64,
    pub p_prime: f64,
    pub q: f64,
    pub q_prime: f64,
}

impl From<LawCfg> for ProductExponents {
    fn from(l: LawCfg) -> Self {
        ProductExponents { s: l.s, t: l.t, p: l.p, p_prime: l.p_prime, q: l.q, q_prime: l.q_prime }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KatoLawCfg {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatesCfg {
    pub pairs: usize,
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub paraproduct: LawCfg,
    pub remainder: LawCfg,
    pub kato: KatoLawCfg,
}

impl Default for EstimatesCfg {
    fn default() -> Self {
        let s = bnslab::besov::critical_s(6.0);
        EstimatesCfg {
            pairs: 4,
            xi_lo: 1.0,
            xi_hi: 5.0,
            paraproduct: LawCfg { s, t: 1.0 - 0.5 * s, p: 6.0, p_prime: 6.0, q: 2.0, q_prime: 2.0 },
            remainder: LawCfg { s: 0.5, t: s + 0.1, p: 6.0, p_prime: 6.0, q: 2.0, q_prime: 2.0 },
            kato: KatoLawCfg { p: 6.0, q: 6.0, r: 6.0 },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputCfg {
    pub dir: PathBuf,
    /// Write every `stride`-th trajectory snapshot; `0` writes none.
    pub snapshot_stride: usize,
}

impl Default for OutputCfg {
    fn default() -> Self {
        OutputCfg { dir: PathBuf::from("bnslab-out"), snapshot_stride: 1 }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::config(msg)
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| bad(format!("schema violation: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|_| bad("config is not UTF-8"))?;
        Ok((Self::parse(text)?, bytes))
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        let g = match self.grid.period {
            Some(l) => GridSpec::with_period(self.grid.n, l),
            None => GridSpec::new(self.grid.n),
        };
        g.map_err(|e| bad(e.to_string()))
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            dt: self.solver.dt,
            n_steps: self.solver.n_steps,
            picard_tol: self.solver.picard_tol,
            max_picard_iters: self.solver.max_picard_iters,
            c0_estimate: self.solver.c0_estimate,
            ..Default::default()
        }
    }

    pub fn critical_index(&self) -> BesovIndex {
        BesovIndex::critical(self.solver.p, self.solver.p).expect("validated")
    }

    /// Range checks that need no computation.
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid()?;
        self.solver().validate().map_err(|e| bad(e.to_string()))?;
        if !(self.solver.p > 3.0) {
            return Err(bad(format!("solver.p must exceed 3, got {}", self.solver.p)));
        }
        if let Some(f) = &self.field {
            f.validate("field")?;
        }
        for b in &self.norms.besov {
            BesovIndex::new(b.s, b.p, b.q).map_err(|e| bad(format!("norms.besov: {e}")))?;
        }
        for c in &self.norms.chemin_lerner {
            BesovIndex::new(c.s, c.p, c.q).map_err(|e| bad(format!("norms.chemin_lerner: {e}")))?;
            if !(c.rho >= 1.0) {
                return Err(bad(format!("norms.chemin_lerner: rho must be ≥ 1, got {}", c.rho)));
            }
        }
        for s in &self.norms.script {
            BesovIndex::new(0.0, s.p, s.q).map_err(|e| bad(format!("norms.script: {e}")))?;
            if !(1.0 <= s.a && s.a <= s.b) {
                return Err(bad(format!("norms.script: need 1 ≤ a ≤ b, got a = {}, b = {}", s.a, s.b)));
            }
        }
        for k in &self.norms.kato {
            if !(k.q > 3.0) || k.order > 1 {
                return Err(bad(format!("norms.kato: need q > 3 and order 0 or 1, got q = {}, order {}", k.q, k.order)));
            }
        }
        if !(1..=4).contains(&self.expand.k) {
            return Err(bad(format!("expand.k must be in 1..=4, got {}", self.expand.k)));
        }
        if self.iterate.steps == 0 {
            return Err(bad("iterate.steps must be positive"));
        }
        if let Some(p) = &self.profiles {
            p.validate(self.grid.n)?;
        }
        let e = &self.estimates;
        if e.pairs == 0 || !(e.xi_lo > 0.0 && e.xi_hi > e.xi_lo) {
            return Err(bad("estimates: need pairs > 0 and 0 < xi_lo < xi_hi"));
        }
        KatoExponents { p: e.kato.p, q: e.kato.q, r: e.kato.r }.validate().map_err(|e| bad(format!("estimates.kato: {e}")))?;
        Ok(())
    }

    pub fn require_field(&self) -> Result<&FieldCfg, CliError> {
        self.field.as_ref().ok_or_else(|| bad("this command needs a [field] table"))
    }
}

impl FieldCfg {
    fn validate(&self, at: &str) -> Result<(), CliError> {
        let need = |name: &str, present: bool| -> Result<(), CliError> {
            if present {
                Ok(())
            } else {
                Err(bad(format!("{at}: source {:?} needs `{name}`", self.source)))
            }
        };
        match self.source {
            FieldSource::File => need("path", self.path.is_some())?,
            FieldSource::RandomBandlimited => {
                need("xi_lo", self.xi_lo.is_some())?;
                need("xi_hi", self.xi_hi.is_some())?;
            }
            FieldSource::TaylorGreenLike => need("k", self.k.is_some())?,
            FieldSource::ShellBump => need("j0", self.j0.is_some())?,
            FieldSource::LocalizedBump => {
                need("width", self.width.is_some())?;
                need("k_max", self.k_max.is_some())?;
            }
        }
        if let Some(a) = self.amplitude {
            if !a.is_finite() {
                return Err(bad(format!("{at}: amplitude must be finite")));
            }
        }
        if let Some(c) = self.critical_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(bad(format!("{at}: critical_norm must be positive")));
            }
        }
        Ok(())
    }
}

impl ProfilesCfg {
    fn validate(&self, n: usize) -> Result<(), CliError> {
        if self.profile.is_empty() {
            return Err(bad("profiles: need at least one [[profiles.profile]]"));
        }
        if !(self.q > 3.0) {
            return Err(bad(format!("profiles.q must exceed 3, got {}", self.q)));
        }
        let len = self.profile[0].schedule.len();
        for (j, p) in self.profile.iter().enumerate() {
            p.field.validate(&format!("profiles.profile[{j}].field"))?;
            if p.schedule.len() != len || len == 0 {
                return Err(bad("profiles: every schedule needs the same nonzero length"));
            }
            for e in &p.schedule {
                if e[1..].iter().any(|&x| x < 0 || x as usize >= n) || e[0].abs() > 30 {
                    return Err(bad(format!("profiles.profile[{j}]: schedule entry {e:?} off the grid")));
                }
            }
        }
        Ok(())
    }

    pub fn schedules(&self) -> Vec<Vec<ScaleCore>> {
        self.profile
            .iter()
            .map(|p| {
                p.schedule.iter().map(|e| ScaleCore::new(e[0] as i32, [e[1] as usize, e[2] as usize, e[3] as usize])).collect()
            })
            .collect()
    }
}
