use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use langevin_cli::{
    emit_csv, preset_names, run_task, write_csv, CliError, CliResult, ExperimentConfig, Task,
};

#[derive(Parser)]
#[command(
    name = "langevin",
    version,
    about = "Annealed Langevin samplers for linear inverse problems"
)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// CSV destination; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Named hyperparameter preset applied on top of the config.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Write 0 for wall time so output is byte-reproducible.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Symbol error rate versus SNR.
    DetectSweep,
    /// Long-run moments on a quadratic target.
    StationaryTest,
    /// Gaussian channel estimation against the analytic MMSE estimator.
    ChannelToy,
    /// Exactness of the friction and auxiliary-variable substeps.
    FdtTest,
    /// Show presets.
    Preset {
        #[arg(long)]
        list: bool,
        /// Print the resolved config of one preset.
        name: Option<String>,
    },
}

fn load(common: &Common, task: Task) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = &common.preset {
        cfg.apply_preset(p)?;
    }
    cfg.task = task;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if common.no_timing {
        cfg.timing = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let task = match cli.command {
        Command::DetectSweep => Task::DetectSweep,
        Command::StationaryTest => Task::StationaryTest,
        Command::ChannelToy => Task::ChannelToy,
        Command::FdtTest => Task::FdtTest,
        Command::Preset { list, name } => {
            if let Some(name) = name {
                let mut cfg = ExperimentConfig::default();
                cfg.apply_preset(&name)?;
                write!(std::io::stdout(), "{}", cfg.to_toml_string())?;
            } else if list || cli.common.preset.is_none() {
                let mut out = std::io::stdout().lock();
                for p in preset_names() {
                    writeln!(out, "{p}")?;
                }
            }
            return Ok(());
        }
    };
    let cfg = load(&cli.common, task)?;
    log::info!("running {} with seed {}", cfg.task, cfg.seed);
    let rows = run_task(&cfg)?;
    match &cfg.out {
        Some(path) => emit_csv(&rows, path)?,
        None => write_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
