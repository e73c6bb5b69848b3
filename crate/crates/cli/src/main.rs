//! `tomolab` command-line interface.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use tomolab::bench::{
    aggregate_csv, plot_data, run_basis_sweep, run_table, sweep_values, trials_csv, with_jobs, ExperimentConfig,
    PovmSpec, SweepRange, SweepResult,
};
use tomolab::io::write_atomic;
use tomolab::povm::{build_named, certify_ic, load_povm, save_povm, CertifyOptions, Povm};
use tomolab::simulate::{fit_tof, TofSignal, TofTemplates};
use tomolab::Error;

const SEED_ENV: &str = "TOMOLAB_SEED";

#[derive(Parser)]
#[command(name = "tomolab", version, about = "Quantum state tomography workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a built-in POVM and write it as JSON.
    PovmBuild {
        #[arg(long)]
        povm: String,
        #[arg(long)]
        dim: usize,
        /// Output file (default: <out-dir>/<povm>_d<dim>.json).
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Validate a POVM and report its informational-completeness diagnostics.
    PovmCheck {
        #[arg(long, conflicts_with = "povm")]
        file: Option<PathBuf>,
        #[arg(long, requires = "dim")]
        povm: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        /// States for the noiseless reconstruction check (0 skips it).
        #[arg(long, default_value_t = 50)]
        n_states: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tomography of every configured POVM on a shared set of test states.
    QstRun(RunArgs),
    /// Tomography with the first N settings of a family of bases.
    QstSweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        povm: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Fit template weights to a time-of-flight signal (CSV time_ms,amplitude).
    TofFit {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    n_states: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn env_seed() -> Result<Option<u64>, Error> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidInput(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Config from file (if any) with flag overrides; flag > config > default,
/// where the default seed comes from the environment.
fn resolve_config(args: &RunArgs, fallback: impl FnOnce() -> ExperimentConfig) -> Result<ExperimentConfig, Error> {
    let (mut cfg, seed_in_file) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
            let has_seed = value.get("seed").is_some();
            (ExperimentConfig::from_json(&text)?, has_seed)
        }
        None => (fallback(), false),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    } else if !seed_in_file {
        cfg.seed = env_seed()?.unwrap_or(0);
    }
    if let Some(n) = args.n_states {
        cfg.n_states = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config_sha256: String,
    outputs: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_manifest(dir: &Path, command: &str, cfg: &ExperimentConfig, outputs: &[PathBuf]) -> Result<PathBuf, Error> {
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config_sha256: sha256_hex(cfg.to_json()?.as_bytes()),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let path = dir.join("manifest.json");
    write_atomic(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Output path: flag directory wins, then the config's path, then the
/// default directory `out`.
fn output_path(out_dir: Option<&Path>, configured: Option<&PathBuf>, name: &str) -> PathBuf {
    match (out_dir, configured) {
        (Some(dir), _) => dir.join(name),
        (None, Some(p)) => p.clone(),
        (None, None) => Path::new("out").join(name),
    }
}

fn write_outputs(
    command: &str,
    cfg: &ExperimentConfig,
    args: &RunArgs,
    result: &SweepResult,
    names: (&str, &str),
    plot: Option<&str>,
) -> Result<(), Error> {
    let o = &cfg.outputs;
    let mut written = vec![
        (output_path(args.out_dir.as_deref(), o.trials_csv.as_ref(), names.0), trials_csv(&result.trials)?),
        (output_path(args.out_dir.as_deref(), o.aggregate_csv.as_ref(), names.1), aggregate_csv(&result.rows)?),
    ];
    if let Some(name) = plot {
        written.push((output_path(args.out_dir.as_deref(), o.plot_data.as_ref(), name), plot_data(&result.rows)?));
    }
    for (path, text) in &written {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            ensure_dir(parent)?;
        }
        write_atomic(path, text.as_bytes())?;
    }
    let manifest_dir = written[1].0.parent().map(Path::to_path_buf).unwrap_or_default();
    let paths: Vec<PathBuf> = written.into_iter().map(|(p, _)| p).collect();
    write_manifest(&manifest_dir, command, cfg, &paths)?;
    for row in &result.rows {
        println!(
            "{:<10} {:<8} d={:<3} N={:<3} mean={:.6} std={:.6} n={}",
            row.povm, row.ic_class, row.d, row.n_settings_used, row.mean_infidelity, row.std_infidelity, row.n_states
        );
    }
    let failed = result.trials.iter().filter(|t| t.failed()).count();
    if failed > 0 {
        return Err(Error::Numerical(format!("{failed} trial(s) failed to produce an estimate")));
    }
    Ok(())
}

fn povm_from_args(file: Option<&Path>, name: Option<&str>, dim: Option<usize>) -> Result<Povm, Error> {
    match (file, name, dim) {
        (Some(f), _, _) => load_povm(f),
        (None, Some(n), Some(d)) => build_named(n, d),
        _ => Err(Error::InvalidInput("give --file, or --povm with --dim".into())),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::PovmBuild { povm, dim, file, out_dir } => {
            let p = build_named(&povm, dim)?;
            let path = file.unwrap_or_else(|| out_dir.join(format!("{}_d{dim}.json", p.name)));
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                ensure_dir(parent)?;
            }
            save_povm(&p, &path)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::PovmCheck { file, povm, dim, n_states, seed } => {
            let p = povm_from_args(file.as_deref(), povm.as_deref(), dim)?;
            if let Some(d) = dim.filter(|&d| d != p.dim()) {
                return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
            }
            let seed = match seed {
                Some(s) => s,
                None => env_seed()?.unwrap_or(0),
            };
            let report = certify_ic(&p, &CertifyOptions { strict_states: n_states, seed, ..Default::default() });
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.claim_consistent() {
                eprintln!("warning: claimed class {} is not supported by the diagnostics", report.claim);
            }
            Ok(())
        }
        Command::QstRun(args) => {
            let cfg = resolve_config(&args, || ExperimentConfig::new(16, &["mub", "gmb", "5gmb", "5mub", "4gmb"]))?;
            let result = with_jobs(args.jobs, || run_table(&cfg))??;
            write_outputs("qst-run", &cfg, &args, &result, ("trials.csv", "aggregate.csv"), None)
        }
        Command::QstSweep { run: args, povm, dim, n_max } => {
            let mut cfg = resolve_config(&args, || ExperimentConfig::new(dim.unwrap_or(16), &[]))?;
            if let Some(d) = dim {
                cfg.dim = d;
            }
            let mut range = cfg.sweep.clone().unwrap_or(SweepRange {
                povm: PovmSpec::Name("mub".into()),
                n_min: 1,
                n_max: None,
            });
            if let Some(name) = povm {
                range.povm = PovmSpec::Name(name);
            }
            if n_max.is_some() {
                range.n_max = n_max;
            }
            cfg.sweep = Some(range.clone());
            cfg.validate()?;
            let values = sweep_values(&range, cfg.dim)?;
            let result = with_jobs(args.jobs, || run_basis_sweep(&cfg, &range.povm, &values))??;
            let base = match &range.povm {
                PovmSpec::Name(n) => n.clone(),
                PovmSpec::File { file } => file.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into()),
            };
            let plot = format!("sweep_{base}_d{}.csv", cfg.dim);
            write_outputs("qst-sweep", &cfg, &args, &result, ("sweep_trials.csv", "sweep_aggregate.csv"), Some(&plot))
        }
        Command::TofFit { file, out_dir } => {
            let text = std::fs::read_to_string(&file)?;
            let signal = TofSignal::from_csv(&text, TofTemplates::default_layout())?;
            let fit = fit_tof(&signal)?;
            let json = serde_json::to_string_pretty(&fit)?;
            if let Some(dir) = out_dir {
                ensure_dir(&dir)?;
                write_atomic(&dir.join("tof_fit.json"), json.as_bytes())?;
            }
            println!("{json}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
