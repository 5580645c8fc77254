//! `sirtnet` command-line driver.
//!
//! Exit codes: 0 on success, 1 when a command fails at runtime, 2 for usage
//! and configuration errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;

pub const DATA_DIR_ENV: &str = "SIRTNET_DATA_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "sirtnet",
    version,
    about = "SIRT reconstruction regularised by MSD networks"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON run configuration; built-in defaults are used when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Base directory for datasets, checkpoints and reports [default: config
    /// `data_dir`, then $SIRTNET_DATA_DIR, then ./data].
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Override the root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-sample work.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// More log output (repeat for debug).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Fbp,
    Sirt,
    Cgls,
    Pipeline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fbp => "fbp",
            Method::Sirt => "sirt",
            Method::Cgls => "cgls",
            Method::Pipeline => "sirt+dnn",
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate random ellipse phantoms and build the dataset.
    Phantoms {
        /// Override the number of train/validation phantoms.
        #[arg(long)]
        count: Option<usize>,
        /// Override the number of held-out test phantoms.
        #[arg(long)]
        test_count: Option<usize>,
    },
    /// Forward project one image into a low-dose sinogram.
    Simulate {
        /// Raw `.f32` image with sidecar, or a PGM; resampled to the grid size.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Add Poisson noise at this incident intensity.
        #[arg(long)]
        i0: Option<f64>,
        /// Attenuation scale for the noise [default: 4 / max of the sinogram].
        #[arg(long, requires = "i0")]
        mu_scale: Option<f64>,
    },
    /// Train the pipeline networks on the dataset, resuming an interrupted run.
    Train {
        /// Override the number of networks.
        #[arg(long)]
        max_net: Option<usize>,
        /// Override the epochs per network.
        #[arg(long)]
        max_epochs: Option<usize>,
    },
    /// Reconstruct one sinogram.
    Reconstruct {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Iterations for sirt and cgls [default: from the config].
        #[arg(long)]
        iters: Option<usize>,
        /// Pipeline checkpoint directory [default: the configured checkpoint path].
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Write every pipeline block output into this directory.
        #[arg(long)]
        intermediates: Option<PathBuf>,
        /// Also write a 16-bit PGM preview.
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// Score methods on the test set in image and sinogram space.
    Evaluate {
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Method::Fbp, Method::Sirt, Method::Cgls, Method::Pipeline])]
        methods: Vec<Method>,
        /// Skip the noise sweep.
        #[arg(long)]
        no_sweep: bool,
    },
    /// Image-space scores on the test set under Poisson noise, one report per intensity.
    SweepNoise {
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Method::Fbp, Method::Sirt, Method::Cgls, Method::Pipeline])]
        methods: Vec<Method>,
        /// Override the configured intensities.
        #[arg(long, value_delimiter = ',')]
        i0: Option<Vec<f64>>,
    },
    /// Describe a `.msd` model file or a pipeline checkpoint directory.
    InspectCheckpoint { path: PathBuf },
}

/// Failure classes that map to distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<sirtnet::Error> for CliError {
    fn from(e: sirtnet::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn config_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Config(e.into())
}

fn load_config(global: &GlobalArgs) -> CliResult<RunConfig> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path).map_err(config_err)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &global.data_dir {
        config.data_dir = Some(dir.clone());
    } else if config.data_dir.is_none() {
        config.data_dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
    }
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run(cli: Cli) -> CliResult {
    if cli.global.threads == 0 {
        return Err(config_err(anyhow::anyhow!("--threads must be at least 1")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build_global()
        .map_err(|e| CliError::Runtime(e.into()))?;
    if let Command::InspectCheckpoint { path } = &cli.command {
        return commands::inspect_checkpoint(path);
    }

    let mut config = load_config(&cli.global)?;
    match cli.command {
        Command::Phantoms { count, test_count } => {
            if let Some(c) = count {
                config.phantoms.count = c;
            }
            if let Some(c) = test_count {
                config.phantoms.test_count = c;
            }
            config.validate().map_err(config_err)?;
            commands::phantoms(&config)
        }
        Command::Simulate {
            input,
            output,
            i0,
            mu_scale,
        } => {
            config.validate().map_err(config_err)?;
            commands::simulate(&config, &input, &output, i0, mu_scale)
        }
        Command::Train {
            max_net,
            max_epochs,
        } => {
            if let Some(m) = max_net {
                config.pipeline.max_net = m;
            }
            if let Some(e) = max_epochs {
                config.pipeline.max_epochs = e;
            }
            config.validate().map_err(config_err)?;
            commands::train(&config)
        }
        Command::Reconstruct {
            method,
            input,
            output,
            iters,
            checkpoint,
            intermediates,
            pgm,
        } => {
            config.validate().map_err(config_err)?;
            commands::reconstruct(
                &config,
                commands::ReconstructArgs {
                    method,
                    input,
                    output,
                    iters,
                    checkpoint,
                    intermediates,
                    pgm,
                },
            )
        }
        Command::Evaluate { methods, no_sweep } => {
            config.validate().map_err(config_err)?;
            commands::evaluate(&config, &methods, !no_sweep)
        }
        Command::SweepNoise { methods, i0 } => {
            if let Some(levels) = i0 {
                config.noise.sweep_i0 = levels;
            }
            config.validate().map_err(config_err)?;
            commands::sweep_noise(&config, &methods)
        }
        Command::InspectCheckpoint { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
