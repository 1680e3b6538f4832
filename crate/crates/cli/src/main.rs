use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sarpnp_cli::commands::{self, OutputLayout};
use sarpnp_cli::{CliError, CliResult, ExperimentConfig, Method, Preset};

#[derive(Parser)]
#[command(name = "sarpnp", version, about = "Phaseless SAR imaging experiments")]
struct Cli {
    /// Log progress (-v) or per-epoch detail (-vv) to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON overrides merged over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,
    /// Overrides the dataset and training seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Sum gradients in a fixed order so training is bit-reproducible.
    #[arg(long)]
    deterministic: bool,
}

impl Common {
    fn load(&self) -> CliResult<ExperimentConfig> {
        let mut config = ExperimentConfig::load(self.preset, self.config.as_deref())?;
        if let Some(seed) = self.seed {
            config.seed = seed;
            config.network.training.seed = seed;
        }
        if self.deterministic {
            config.network.training.deterministic = true;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate training and test datasets.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Dataset file; defaults to `<output_dir>/dataset.sarp`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the unrolled network on a dataset split.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
        /// Model file; defaults to `<output_dir>/model.sarp`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Loss history; defaults to `<out>.history.json`.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Reconstruct test splits and write metrics and images.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: Method,
        /// Trained model; required by `pnp` only.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        /// Splits to reconstruct; all but `train` by default.
        #[arg(long = "split")]
        splits: Vec<String>,
        /// Output directory; defaults to `<output_dir>/<method>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-sample perturbation diagnostics on ground-truth scenes.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long = "split")]
        splits: Vec<String>,
        /// Defaults to `<output_dir>/diagnostics.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        })
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { common, out } => {
            let config = common.load()?;
            let out = out.unwrap_or_else(|| config.output_dir.join("dataset.sarp"));
            let sim = commands::simulate(&config)?;
            println!("{}", sim.summary_line());
            commands::write_datasets(&out, &sim.splits)?;
            log::info!("wrote {}", out.display());
        }
        Command::Train {
            common,
            dataset,
            split,
            out,
            history,
        } => {
            let config = common.load()?;
            require_file(&dataset)?;
            let out = out.unwrap_or_else(|| config.output_dir.join("model.sarp"));
            let history_path = history.unwrap_or_else(|| {
                let mut p = out.clone().into_os_string();
                p.push(".history.json");
                p.into()
            });
            let splits = commands::read_datasets(&dataset)?;
            let setup = commands::setup_for(&splits)?;
            let (_, ds) = commands::select_splits(&splits, &[split])?[0];
            let (model, history) = commands::train(&config, &setup, ds, |_| {});
            commands::write_json(&history_path, &history)?;
            commands::write_model(&out, &model?)?;
            println!("trained {} epochs; model written to {}", history.epochs.len(), out.display());
        }
        Command::Reconstruct {
            common,
            method,
            model,
            dataset,
            splits,
            out,
        } => {
            let config = common.load()?;
            require_file(&dataset)?;
            if let Some(m) = &model {
                require_file(m)?;
            }
            let out = out.unwrap_or_else(|| config.output_dir.join(method.name()));
            let model = model.as_deref().map(commands::read_model).transpose()?;
            let all = commands::read_datasets(&dataset)?;
            let setup = commands::setup_for(&all)?;
            let selected = commands::select_splits(&all, &splits)?;
            let evaluation = commands::evaluate(method, &config, &setup, &selected, model.as_ref())?;
            commands::write_evaluation(&OutputLayout { dir: out.clone() }, &evaluation, &setup, &selected)?;
            for s in &evaluation.report.splits {
                println!(
                    "{} {}: mean MSE {:.6e}, median {:.6e} over {} samples",
                    method.name(),
                    s.split,
                    s.mse_summary.mean,
                    s.mse_summary.median,
                    s.count
                );
            }
        }
        Command::Diagnose {
            common,
            dataset,
            splits,
            out,
        } => {
            let config = common.load()?;
            require_file(&dataset)?;
            let out = out.unwrap_or_else(|| config.output_dir.join("diagnostics.json"));
            let all = commands::read_datasets(&dataset)?;
            let setup = commands::setup_for(&all)?;
            let selected = commands::select_splits(&all, &splits)?;
            let report = commands::diagnose(&setup, &selected, config.seed)?;
            commands::write_json(&out, &report)?;
            for s in &report.splits {
                println!(
                    "{}: mean delta {:.6e}, max identity residual {:.3e}",
                    s.split, s.delta.mean, s.max_residual
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
