mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::{Analysis, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "windlasso", version, about = "Joint wind speed and power forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration; defaults are used for anything it leaves out.
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read a raw CSV, validate it and write a regular 10-minute panel.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Write periodograms, seasonal profiles, design layouts and basis tables.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',')]
        what: Option<Vec<Analysis>>,
    },
    /// Simulate a synthetic panel from a built-in scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        turbines: Option<usize>,
        #[arg(long)]
        rows: Option<usize>,
    },
    /// Fit the joint model and save it.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Point and bootstrap forecasts from a saved model.
    Forecast {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long)]
        origin_row: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Rolling-origin evaluation of the lasso model and benchmarks.
    Backtest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] windlasso::Error),
    #[error("{0}")]
    Config(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(windlasso::Error::Io(e))
    }
}

impl CliError {
    fn class(&self) -> (&'static str, u8) {
        use windlasso::ErrorKind;
        match self {
            CliError::Config(_) => ("config", 3),
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => ("config", 3),
                ErrorKind::Io => ("io", 4),
                ErrorKind::Data => ("data", 5),
                ErrorKind::Numerical => ("numerical", 6),
            },
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            RunConfig::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out_dir {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common) = match &cli.command {
        Command::Ingest { common, .. } => ("ingest", common),
        Command::Analyze { common, .. } => ("analyze", common),
        Command::Simulate { common, .. } => ("simulate", common),
        Command::Fit { common, .. } => ("fit", common),
        Command::Forecast { common, .. } => ("forecast", common),
        Command::Backtest { common, .. } => ("backtest", common),
    };
    let mut cfg = load_config(common)?;
    match cli.command {
        Command::Ingest { input, .. } => {
            if input.is_some() {
                cfg.ingest.input = input;
            }
        }
        Command::Analyze { panel, what, .. } => {
            if panel.is_some() {
                cfg.analyze.panel = panel;
            }
            if let Some(w) = what {
                cfg.analyze.what = w;
            }
        }
        Command::Simulate { scenario, turbines, rows, .. } => {
            cfg.simulate.scenario = scenario.unwrap_or(cfg.simulate.scenario);
            cfg.simulate.turbines = turbines.unwrap_or(cfg.simulate.turbines);
            cfg.simulate.rows = rows.unwrap_or(cfg.simulate.rows);
        }
        Command::Fit { panel, .. } => {
            if panel.is_some() {
                cfg.fit.panel = panel;
            }
        }
        Command::Forecast { model, panel, origin_row, horizon, paths, .. } => {
            if model.is_some() {
                cfg.forecast.model = model;
            }
            if panel.is_some() {
                cfg.forecast.panel = panel;
            }
            if origin_row.is_some() {
                cfg.forecast.origin_row = origin_row;
                cfg.forecast.origin_time = None;
            }
            cfg.forecast.horizon = horizon.unwrap_or(cfg.forecast.horizon);
            cfg.forecast.n_paths = paths.unwrap_or(cfg.forecast.n_paths);
        }
        Command::Backtest { panel, models, .. } => {
            if panel.is_some() {
                cfg.backtest.panel = panel;
            }
            if let Some(m) = models {
                cfg.backtest.models = m;
            }
        }
    }
    cfg.resolve_paths();
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out(&format!("{name}.effective.toml")), cfg.to_toml())?;
    match name {
        "ingest" => commands::ingest(&cfg),
        "analyze" => commands::analyze(&cfg),
        "simulate" => commands::simulate(&cfg),
        "fit" => commands::fit(&cfg),
        "forecast" => commands::forecast(&cfg),
        _ => commands::backtest(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = e.class();
            let msg = e.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
            eprintln!("error[{kind}]: {msg}");
            ExitCode::from(code)
        }
    }
}
