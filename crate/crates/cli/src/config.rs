use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use windlasso::benchmarks::{DEFAULT_CENSORING, DEFAULT_MAX_ORDER};
use windlasso::eval::RefitPolicy;
use windlasso::model::ModelConfig;
use windlasso::panel::PanelSchema;

pub const PANEL_FILE: &str = "panel.csv";
pub const MODEL_FILE: &str = "model.txt";
pub const FORECAST_FILE: &str = "forecast.csv";
pub const BACKTEST_DIR: &str = "backtest";
/// Run configuration written by `simulate` with the scenario's fitting setup.
pub const SCENARIO_CONFIG_FILE: &str = "scenario.toml";

/// Everything a run depends on. Every key has a default; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub out_dir: PathBuf,
    pub schema: PanelSchema,
    pub ingest: IngestConfig,
    pub analyze: AnalyzeConfig,
    pub simulate: SimulateConfig,
    pub fit: FitConfig,
    pub forecast: ForecastConfig,
    pub backtest: BacktestConfig,
    pub model: ModelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            workers: 0,
            out_dir: PathBuf::from("out"),
            schema: PanelSchema::default(),
            ingest: IngestConfig::default(),
            analyze: AnalyzeConfig::default(),
            simulate: SimulateConfig::default(),
            fit: FitConfig::default(),
            forecast: ForecastConfig::default(),
            backtest: BacktestConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub input: Option<PathBuf>,
    /// Linearly interpolate missing rows.
    pub fill_gaps: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig { input: None, fill_gaps: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    Periodogram,
    Profiles,
    Design,
    Basis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub panel: Option<PathBuf>,
    pub what: Vec<Analysis>,
    /// Odd smoothing span of the periodogram.
    pub span: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            panel: None,
            what: vec![Analysis::Periodogram, Analysis::Profiles, Analysis::Design, Analysis::Basis],
            span: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: String,
    pub turbines: usize,
    pub rows: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { scenario: "periodic".into(), turbines: 2, rows: 60_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub panel: Option<PathBuf>,
    /// Fit on the first `rows` rows only.
    pub rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub model: Option<PathBuf>,
    pub panel: Option<PathBuf>,
    /// Origin as a panel row; defaults to the last row.
    pub origin_row: Option<usize>,
    /// Origin as a timestamp; exclusive with `origin_row`.
    pub origin_time: Option<String>,
    pub horizon: usize,
    /// Bootstrap paths; 0 gives point forecasts only.
    pub n_paths: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig { model: None, panel: None, origin_row: None, origin_time: None, horizon: 288, n_paths: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub panel: Option<PathBuf>,
    pub n_origins: usize,
    /// Horizons `1..=max_horizon` are evaluated.
    pub max_horizon: usize,
    pub in_sample: usize,
    /// Model ids: `lasso` and the benchmark ids.
    pub models: Vec<String>,
    pub refit: RefitPolicy,
    pub max_order: usize,
    pub censoring: (f64, f64),
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            panel: None,
            n_origins: 1000,
            max_horizon: 288,
            in_sample: 52_830,
            models: vec!["lasso".into(), "persistence".into()],
            refit: RefitPolicy::PerOrigin,
            max_order: DEFAULT_MAX_ORDER,
            censoring: DEFAULT_CENSORING,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    fn default_path(&self, explicit: &Option<PathBuf>, file: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out_dir.join(file))
    }

    /// Replaces every unset input path by its default location in `out_dir`.
    pub fn resolve_paths(&mut self) {
        let panel = |c: &Self, p: &Option<PathBuf>| Some(c.default_path(p, PANEL_FILE));
        self.analyze.panel = panel(self, &self.analyze.panel);
        self.fit.panel = panel(self, &self.fit.panel);
        self.forecast.panel = panel(self, &self.forecast.panel);
        self.backtest.panel = panel(self, &self.backtest.panel);
        self.forecast.model = Some(self.default_path(&self.forecast.model, MODEL_FILE));
    }

    pub fn out(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }
}

pub fn path_or<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, windlasso::Error> {
    p.as_deref().ok_or_else(|| windlasso::Error::Config(format!("no {what} path configured")))
}
