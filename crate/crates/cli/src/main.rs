mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use config::Config;
use error::CliError;
use run::{Artifact, Command, Run, Scenario};

#[derive(Parser)]
#[command(name = "bnslab", version, about = "Critical Besov norms, mild Navier-Stokes solutions and profile decompositions on the 3D torus")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Besov, Chemin-Lerner, script and Kato norms of a datum
    Norms(Common),
    /// Picard solve with blow-up monitoring
    Solve(Common),
    /// Iterated Duhamel split of the solution
    Expand(Common),
    /// Simple iteration on the smooth and rough parts
    Iterate(Common),
    /// Planted profiles: synthesis, orthogonality, evolution, extraction
    Profiles(Common),
    /// Empirical constants of the product and bilinear estimates
    VerifyEstimates(Common),
    /// Write the configured field as a snapshot
    GenerateField(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to BNSLAB_THREADS
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `output.dir`
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    status: &'a str,
    config_hash: String,
    seed: u64,
    code_version: &'a str,
    threads: usize,
    artifacts: &'a [Artifact],
    summary: &'a toml::Table,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    kind: &'a str,
    exit_code: u8,
    message: &'a str,
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("BNSLAB_THREADS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::config(format!("BNSLAB_THREADS={v} is not a count"))),
        Err(_) => Ok(None),
    }
}

fn write_toml<T: Serialize>(path: PathBuf, value: &T) -> Result<(), CliError> {
    let text = toml::to_string(value).map_err(|e| CliError::io(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn execute(cmd: Command, args: &Common) -> Result<(), CliError> {
    if let Some(n) = thread_count(args.threads)? {
        if n == 0 {
            return Err(CliError::config("thread count must be positive"));
        }
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (cfg, bytes) = Config::load(&args.config)?;
    cfg.validate()?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let out_dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
    let sc = Scenario { cfg: &cfg, grid: cfg.grid()?, seed, base };
    let mut out = Run::new(out_dir, cfg.output.snapshot_stride)?;
    let result = run::run(cmd, &sc, &mut out);
    let manifest = Manifest {
        command: cmd.name(),
        status: if result.is_ok() { "ok" } else { "failed" },
        config_hash: format!("sha256:{:x}", Sha256::digest(&bytes)),
        seed,
        code_version: env!("CARGO_PKG_VERSION"),
        threads: rayon::current_num_threads(),
        artifacts: &out.artifacts,
        summary: &out.summary,
    };
    write_toml(out.out.join("manifest.toml"), &manifest)?;
    if let Err(e) = &result {
        write_toml(out.out.join("error.toml"), &ErrorReport { kind: e.kind, exit_code: e.code, message: &e.message })?;
    }
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Cmd::Norms(a) => (Command::Norms, a),
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Expand(a) => (Command::Expand, a),
        Cmd::Iterate(a) => (Command::Iterate, a),
        Cmd::Profiles(a) => (Command::Profiles, a),
        Cmd::VerifyEstimates(a) => (Command::VerifyEstimates, a),
        Cmd::GenerateField(a) => (Command::GenerateField, a),
    };
    match execute(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bnslab: {e}");
            ExitCode::from(e.code)
        }
    }
}
