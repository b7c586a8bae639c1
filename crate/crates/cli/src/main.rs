use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use orthodyn::analysis::summary_table;
use orthodyn_cli::config::ExperimentConfig;
use orthodyn_cli::manifest::{digest_file, sha256_hex, Manifest};
use orthodyn_cli::run::{run_compare, run_simulate, run_spectral, run_sweep, Outcome};
use orthodyn_cli::{presets, CliError};

/// Langevin dynamics with velocity-orthogonal noise: simulation, spectral
/// solution and their comparison.
///
/// Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
/// 3 runtime error.
#[derive(Parser)]
#[command(name = "orthodyn", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate an ensemble and check its speed modulus.
    Simulate(Common),
    /// Solve the mode equation, reconstruct densities, run spectral sweeps.
    Spectral(Common),
    /// Compare an ensemble with spectral or closed-form predictions.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Ensemble file to compare; simulated from the config if absent.
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Density or ensemble file to compare against.
        #[arg(long)]
        prediction: Option<PathBuf>,
    },
    /// Monte-Carlo sweep over the small parameter of a [regime] section.
    Sweep(Common),
    /// List the built-in presets.
    PresetList {
        /// Print the TOML of one preset instead.
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Config file (TOML), or a manifest.json from an earlier run.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name (see preset-list).
    #[arg(long)]
    preset: Option<String>,
    /// Override the ensemble seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of trajectories.
    #[arg(long)]
    n_traj: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(p), _) if p.extension().is_some_and(|e| e == "json") => {
            let m = Manifest::read(p)?;
            ExperimentConfig::from_toml(&m.config, &format!("{} (embedded config)", p.display()))?
        }
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(name)) => presets::load(name)?,
        (None, None) => return Err(CliError::Config("one of --config or --preset is required".into())),
    };
    if let Some(s) = common.seed {
        cfg.ensemble.seed = s;
    }
    if let Some(n) = common.n_traj {
        cfg.ensemble.n_traj = n;
    }
    cfg.validate().map_err(|(s, k, m)| CliError::Config(format!("{s}.{k}: {m}")))?;
    Ok(cfg)
}

fn execute(cmd: &str, common: &Common, inputs: &[&Path], f: impl FnOnce(&ExperimentConfig, &Path) -> Result<Outcome, CliError>) -> Result<bool, CliError> {
    let cfg = load(common)?;
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    std::fs::create_dir_all(&common.out)?;
    let outcome = f(&cfg, &common.out)?;

    let config = cfg.to_toml();
    let manifest = Manifest {
        tool: "orthodyn".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.into(),
        preset: common.preset.clone(),
        seed: cfg.ensemble.seed,
        config_sha256: sha256_hex(config.as_bytes()),
        config,
        inputs: inputs.iter().map(|p| digest_file(p)).collect::<Result<_, _>>()?,
        outputs: outcome.files.iter().map(|p| digest_file(p)).collect::<Result<_, _>>()?,
    };
    manifest.write(&common.out)?;

    if !outcome.reports.is_empty() {
        print!("{}", summary_table(&outcome.reports));
    }
    eprintln!("wrote {} file(s) and manifest.json to {}", outcome.files.len(), common.out.display());
    Ok(outcome.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Simulate(c) => execute("simulate", c, &[], run_simulate),
        Cmd::Spectral(c) => execute("spectral", c, &[], run_spectral),
        Cmd::Sweep(c) => execute("sweep", c, &[], run_sweep),
        Cmd::Compare { common, ensemble, prediction } => {
            let inputs: Vec<&Path> = ensemble.iter().chain(prediction.iter()).map(|p| p.as_path()).collect();
            execute("compare", common, &inputs, |cfg, out| run_compare(cfg, ensemble.as_deref(), prediction.as_deref(), out))
        }
        Cmd::PresetList { show } => match show {
            Some(name) => presets::find(name).map(|p| {
                print!("{}", p.text);
                true
            }),
            None => {
                for p in presets::PRESETS {
                    let desc = presets::load(p.name).map(|c| c.experiment.description).unwrap_or_default();
                    println!("{:<18} {:<9} {desc}", p.name, p.command);
                }
                Ok(true)
            }
        },
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("orthodyn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
