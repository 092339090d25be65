use super::metrics::{error_density, linear_grid, mae_standard_deviation, mean, silverman_bandwidth};
use crate::benchmarks::{fit_benchmark, BenchmarkKind, BenchmarkOptions, PowerForecaster};
use crate::error::{Error, Result};
use crate::forecast::{point_forecast, point_forecast_from};
use crate::model::{filter_panel, fit_joint_model, FilteredState, FittedJointModel, ModelConfig};
use crate::panel::TurbinePanel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const LASSO_ID: &str = "lasso";
pub const DENSITY_HORIZONS: [usize; 4] = [1, 24, 144, 288];
pub const SUMMARY_HORIZONS: [usize; 7] = [1, 6, 24, 48, 72, 144, 288];
const DENSITY_POINTS: usize = 512;

/// When models are re-estimated during a backtest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefitPolicy {
    /// On the `in_sample` rows ending at each origin.
    PerOrigin,
    /// Once, on the first `in_sample` rows; origins all lie after them.
    Once,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Lasso(Box<ModelConfig>),
    Benchmark(BenchmarkKind),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Lasso(_) => LASSO_ID,
            ModelSpec::Benchmark(k) => k.id(),
        }
    }

    /// Parses a model id; `lasso` takes `config`.
    pub fn from_id(id: &str, config: &ModelConfig) -> Result<Self> {
        if id == LASSO_ID {
            Ok(ModelSpec::Lasso(Box::new(config.clone())))
        } else {
            Ok(ModelSpec::Benchmark(id.parse()?))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestSpec {
    pub n_origins: usize,
    pub horizons: Vec<usize>,
    /// Rows available for estimation before each origin.
    pub in_sample: usize,
    pub seed: u64,
    pub models: Vec<ModelSpec>,
    pub refit: RefitPolicy,
    pub benchmark: BenchmarkOptions,
    pub density_horizons: Vec<usize>,
    pub summary_horizons: Vec<usize>,
}

impl Default for BacktestSpec {
    fn default() -> Self {
        BacktestSpec {
            n_origins: 1000,
            horizons: (1..=288).collect(),
            in_sample: 52_830,
            seed: 0,
            models: vec![ModelSpec::Lasso(Box::default()), ModelSpec::Benchmark(BenchmarkKind::Persistence)],
            refit: RefitPolicy::PerOrigin,
            benchmark: BenchmarkOptions::default(),
            density_horizons: DENSITY_HORIZONS.to_vec(),
            summary_horizons: SUMMARY_HORIZONS.to_vec(),
        }
    }
}

impl BacktestSpec {
    pub fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config("horizons must be non-empty and >= 1".into()));
        }
        let mut h = self.horizons.clone();
        h.sort_unstable();
        h.dedup();
        if h.len() != self.horizons.len() {
            return Err(Error::Config("duplicate horizons".into()));
        }
        if self.n_origins == 0 || self.in_sample == 0 {
            return Err(Error::Config("n_origins and in_sample must be >= 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models to backtest".into()));
        }
        let mut names: Vec<&str> = self.models.iter().map(ModelSpec::name).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("a model is listed twice".into()));
        }
        Ok(())
    }
}

/// Origins drawn uniformly without replacement, each with `in_sample` rows
/// up to and including it and `max_horizon` rows after it. Sorted.
pub fn sample_origins(n_rows: usize, spec: &BacktestSpec) -> Result<Vec<usize>> {
    let lo = spec.in_sample - 1;
    let last = n_rows.checked_sub(1 + spec.max_horizon());
    let available = match last {
        Some(hi) if hi >= lo => hi - lo + 1,
        _ => 0,
    };
    if available < spec.n_origins {
        return Err(Error::InsufficientHistory {
            required: spec.in_sample + spec.max_horizon() + spec.n_origins - 1,
            available: n_rows,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut o: Vec<usize> = rand::seq::index::sample(&mut rng, available, spec.n_origins).into_iter().map(|j| lo + j).collect();
    o.sort_unstable();
    Ok(o)
}

/// Point power forecasts from a fitted joint model. A state filtered once up
/// to the last origin serves every earlier origin of the same panel.
pub struct LassoForecaster {
    model: FittedJointModel,
    state: Option<FilteredState>,
}

impl LassoForecaster {
    pub fn new(model: FittedJointModel) -> Self {
        LassoForecaster { model, state: None }
    }

    /// Filters `panel` through row `upto` in advance.
    pub fn prepared(model: FittedJointModel, panel: &TurbinePanel, upto: usize) -> Result<Self> {
        let state = filter_panel(&model, panel, upto)?;
        Ok(LassoForecaster { model, state: Some(state) })
    }

    pub fn model(&self) -> &FittedJointModel {
        &self.model
    }
}

impl PowerForecaster for LassoForecaster {
    fn name(&self) -> &str {
        LASSO_ID
    }

    fn forecast_power(&self, panel: &TurbinePanel, origin: usize, horizons: &[usize]) -> Result<Vec<Vec<f64>>> {
        let max_h = horizons.iter().copied().max().unwrap_or(1);
        if horizons.contains(&0) {
            return Err(Error::Parameter("horizons must be >= 1".into()));
        }
        let usable = self.state.as_ref().filter(|s| {
            s.local(origin).map(|o| s.window.timestamps[o] == panel.timestamps()[origin]).unwrap_or(false)
        });
        let r = match usable {
            Some(s) => point_forecast_from(&self.model, s, origin, max_h)?,
            None => point_forecast(&self.model, panel, origin, max_h)?,
        };
        Ok(horizons.iter().map(|&k| r.power_point[k - 1].clone()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub origin: usize,
    pub message: String,
}

/// Errors of one model over the origins where it produced a forecast.
#[derive(Debug, Clone)]
pub struct ModelReport {
    pub name: String,
    /// Origins with a forecast, in increasing order.
    pub origins: Vec<usize>,
    /// `actual - forecast`, indexed `[horizon index][turbine][origin index]`.
    pub errors: Vec<Vec<Vec<f64>>>,
    pub failures: Vec<Failure>,
    pub fit_seconds: f64,
    pub forecast_seconds: f64,
}

impl ModelReport {
    fn abs(&self, hk: usize, i: usize) -> Vec<f64> {
        self.errors[hk][i].iter().map(|e| e.abs()).collect()
    }

    /// Turbine-mean absolute error per origin.
    fn pooled_abs(&self, hk: usize) -> Vec<f64> {
        let d = self.errors[hk].len();
        (0..self.origins.len())
            .map(|j| (0..d).map(|i| self.errors[hk][i][j].abs()).sum::<f64>() / d as f64)
            .collect()
    }

    pub fn mae(&self, hk: usize, i: usize) -> f64 {
        mean(&self.abs(hk, i))
    }

    pub fn sd(&self, hk: usize, i: usize) -> f64 {
        mae_standard_deviation(&self.abs(hk, i))
    }

    /// Mean over turbines of the per-turbine MAE.
    pub fn mae_k(&self, hk: usize) -> f64 {
        let d = self.errors[hk].len();
        (0..d).map(|i| self.mae(hk, i)).sum::<f64>() / d as f64
    }

    pub fn sd_k(&self, hk: usize) -> f64 {
        mae_standard_deviation(&self.pooled_abs(hk))
    }
}

#[derive(Debug, Clone)]
pub struct BacktestReport {
    pub horizons: Vec<usize>,
    pub origins: Vec<usize>,
    pub origin_timestamps: Vec<i64>,
    pub labels: Vec<String>,
    pub density_horizons: Vec<usize>,
    pub summary_horizons: Vec<usize>,
    pub models: Vec<ModelReport>,
}

/// Per-origin output of one model: forecasts or the failure message.
type OriginResult = std::result::Result<Vec<Vec<f64>>, String>;

fn score(
    name: &str,
    panel: &TurbinePanel,
    origins: &[usize],
    horizons: &[usize],
    results: Vec<OriginResult>,
    fit_seconds: f64,
    forecast_seconds: f64,
) -> ModelReport {
    let d = panel.d();
    let mut rep = ModelReport {
        name: name.to_string(),
        origins: Vec::new(),
        errors: vec![vec![Vec::new(); d]; horizons.len()],
        failures: Vec::new(),
        fit_seconds,
        forecast_seconds,
    };
    for (&o, r) in origins.iter().zip(results) {
        let f = match r {
            Ok(f) => f,
            Err(message) => {
                rep.failures.push(Failure { origin: o, message });
                continue;
            }
        };
        if let Some(bad) = f.iter().flatten().find(|v| !v.is_finite()) {
            rep.failures.push(Failure { origin: o, message: format!("non-finite forecast {bad}") });
            continue;
        }
        rep.origins.push(o);
        for (hk, &k) in horizons.iter().enumerate() {
            for i in 0..d {
                rep.errors[hk][i].push(panel.power(i)[o + k] - f[hk][i]);
            }
        }
    }
    if !rep.failures.is_empty() {
        log::warn!("{name}: {} of {} origins failed and are excluded", rep.failures.len(), origins.len());
    }
    rep
}

fn fit_model(spec: &ModelSpec, bt: &BacktestSpec, panel: &TurbinePanel, rows: std::ops::Range<usize>, upto: Option<usize>) -> Result<Box<dyn PowerForecaster>> {
    match spec {
        ModelSpec::Lasso(config) => {
            let model = fit_joint_model(&panel.slice(rows)?, config)?;
            Ok(match upto {
                Some(u) => Box::new(LassoForecaster::prepared(model, panel, u)?),
                None => Box::new(LassoForecaster::new(model)),
            })
        }
        ModelSpec::Benchmark(kind) => Ok(Box::new(fit_benchmark(*kind, panel, rows, &bt.horizons, &bt.benchmark)?)),
    }
}

fn run_model(spec: &ModelSpec, bt: &BacktestSpec, panel: &TurbinePanel, origins: &[usize]) -> Result<ModelReport> {
    let name = spec.name();
    match bt.refit {
        RefitPolicy::Once => {
            let t0 = Instant::now();
            let last = *origins.last().expect("origins are non-empty");
            let fitted = fit_model(spec, bt, panel, 0..bt.in_sample, Some(last))?;
            let fit_seconds = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let results: Vec<OriginResult> = origins
                .par_iter()
                .map(|&o| fitted.forecast_power(panel, o, &bt.horizons).map_err(|e| e.to_string()))
                .collect();
            Ok(score(name, panel, origins, &bt.horizons, results, fit_seconds, t1.elapsed().as_secs_f64()))
        }
        RefitPolicy::PerOrigin => {
            let timed: Vec<(OriginResult, f64, f64)> = origins
                .par_iter()
                .map(|&o| {
                    let t0 = Instant::now();
                    let fitted = fit_model(spec, bt, panel, o + 1 - bt.in_sample..o + 1, None);
                    let fit_s = t0.elapsed().as_secs_f64();
                    let t1 = Instant::now();
                    let r = fitted.and_then(|f| f.forecast_power(panel, o, &bt.horizons)).map_err(|e| e.to_string());
                    (r, fit_s, t1.elapsed().as_secs_f64())
                })
                .collect();
            let fit_seconds = timed.iter().map(|t| t.1).sum();
            let forecast_seconds = timed.iter().map(|t| t.2).sum();
            let results = timed.into_iter().map(|t| t.0).collect();
            Ok(score(name, panel, origins, &bt.horizons, results, fit_seconds, forecast_seconds))
        }
    }
}

/// Rolling-origin evaluation of every model in `spec` on shared origins.
/// Persistence is always included since DMAE is relative to it.
pub fn run_backtest(panel: &TurbinePanel, spec: &BacktestSpec) -> Result<BacktestReport> {
    spec.validate()?;
    if !panel.is_complete() {
        return Err(Error::Schema("panel has missing values; fill gaps before backtesting".into()));
    }
    let origins = sample_origins(panel.n(), spec)?;
    let mut models = spec.models.clone();
    if !models.iter().any(|m| *m == ModelSpec::Benchmark(BenchmarkKind::Persistence)) {
        models.push(ModelSpec::Benchmark(BenchmarkKind::Persistence));
    }
    let mut reports = Vec::with_capacity(models.len());
    for m in &models {
        log::info!("backtesting {} on {} origins", m.name(), origins.len());
        let rep = run_model(m, spec, panel, &origins)?;
        if rep.origins.is_empty() {
            let first = rep.failures.first().map(|f| f.message.clone()).unwrap_or_default();
            return Err(Error::Model(format!("{} failed at every origin: {first}", m.name())));
        }
        reports.push(rep);
    }
    Ok(BacktestReport {
        horizons: spec.horizons.clone(),
        origin_timestamps: origins.iter().map(|&o| panel.timestamps()[o]).collect(),
        origins,
        labels: panel.labels().to_vec(),
        density_horizons: spec.density_horizons.iter().copied().filter(|k| spec.horizons.contains(k)).collect(),
        summary_horizons: spec.summary_horizons.iter().copied().filter(|k| spec.horizons.contains(k)).collect(),
        models: reports,
    })
}

impl BacktestReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.name == name)
    }

    fn horizon_index(&self, k: usize) -> Option<usize> {
        self.horizons.iter().position(|&h| h == k)
    }

    /// `MAE_k` for every horizon.
    pub fn mae_k(&self, name: &str) -> Result<Vec<f64>> {
        let m = self.model(name).ok_or_else(|| Error::Parameter(format!("no model '{name}' in report")))?;
        Ok((0..self.horizons.len()).map(|hk| m.mae_k(hk)).collect())
    }

    /// `MAE_k` minus the persistence `MAE_k`.
    pub fn dmae(&self, name: &str) -> Result<Vec<f64>> {
        super::metrics::dmae(&self.mae_k(name)?, &self.mae_k(BenchmarkKind::Persistence.id())?)
    }

    pub fn write_mae_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "turbine", "k", "mae", "sd", "n"])?;
        for m in &self.models {
            let n = m.origins.len().to_string();
            for (hk, k) in self.horizons.iter().enumerate() {
                for (i, label) in self.labels.iter().enumerate() {
                    let rec = [m.name.clone(), label.clone(), k.to_string(), m.mae(hk, i).to_string(), m.sd(hk, i).to_string(), n.clone()];
                    w.write_record(&rec)?;
                }
                let rec = [m.name.clone(), "mean".into(), k.to_string(), m.mae_k(hk).to_string(), m.sd_k(hk).to_string(), n.clone()];
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_dmae_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "k", "mae", "dmae"])?;
        for m in &self.models {
            let mae = self.mae_k(&m.name)?;
            let dmae = self.dmae(&m.name)?;
            for (hk, k) in self.horizons.iter().enumerate() {
                w.write_record([m.name.clone(), k.to_string(), mae[hk].to_string(), dmae[hk].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Kernel densities of the horizon-`k` errors pooled over turbines, one
    /// column per model on a shared grid.
    pub fn error_densities(&self, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let hk = self.horizon_index(k).ok_or_else(|| Error::Parameter(format!("horizon {k} not in report")))?;
        let pooled: Vec<Vec<f64>> = self.models.iter().map(|m| m.errors[hk].concat()).collect();
        let bw: Vec<f64> = pooled.iter().map(|e| silverman_bandwidth(e)).collect();
        let hmax = bw.iter().copied().fold(0.0, f64::max);
        let lo = pooled.iter().flatten().copied().fold(f64::INFINITY, f64::min) - 4.0 * hmax;
        let hi = pooled.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * hmax;
        let grid = linear_grid(lo, hi, DENSITY_POINTS);
        let dens = pooled.iter().zip(&bw).map(|(e, &h)| error_density(e, &grid, h)).collect::<Result<_>>()?;
        Ok((grid, dens))
    }

    pub fn write_density_csv<W: Write>(&self, k: usize, out: W) -> Result<()> {
        let (grid, dens) = self.error_densities(k)?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["error".to_string()];
        header.extend(self.models.iter().map(|m| m.name.clone()));
        w.write_record(&header)?;
        for (g, x) in grid.iter().enumerate() {
            let mut rec = vec![x.to_string()];
            rec.extend(dens.iter().map(|d| d[g].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Models by summary horizon, each cell `MAE (SD)`; `*` marks cells whose
    /// MAE lies within two of their standard deviations of the best at that horizon.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["model".to_string()];
        header.extend(self.summary_horizons.iter().map(|k| format!("k={k}")));
        w.write_record(&header)?;
        let idx: Vec<usize> = self.summary_horizons.iter().filter_map(|&k| self.horizon_index(k)).collect();
        let best: Vec<f64> = idx
            .iter()
            .map(|&hk| self.models.iter().map(|m| m.mae_k(hk)).fold(f64::INFINITY, f64::min))
            .collect();
        for m in &self.models {
            let mut rec = vec![m.name.clone()];
            for (&hk, b) in idx.iter().zip(&best) {
                let (v, s) = (m.mae_k(hk), m.sd_k(hk));
                let mark = if v - b <= 2.0 * s { "*" } else { "" };
                rec.push(format!("{v:.2} ({s:.2}){mark}"));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_failures_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "origin", "message"])?;
        for m in &self.models {
            for f in &m.failures {
                w.write_record([m.name.clone(), f.origin.to_string(), f.message.clone()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Origins used, with their timestamps.
    pub fn write_origins_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "timestamp"])?;
        for (o, ts) in self.origins.iter().zip(&self.origin_timestamps) {
            w.write_record([o.to_string(), ts.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Fit and forecast wall times; the only output that varies between identical runs.
    pub fn timing_text(&self) -> String {
        let mut s = String::new();
        for m in &self.models {
            s.push_str(&format!(
                "{}: fit {:.3} s, forecast {:.3} s, {} origins ok, {} failed\n",
                m.name,
                m.fit_seconds,
                m.forecast_seconds,
                m.origins.len(),
                m.failures.len()
            ));
        }
        s
    }

    /// Writes every report file into `dir` and returns their paths.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut open = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
            let p = dir.join(name);
            let f = std::fs::File::create(&p)?;
            written.push(p);
            Ok(std::io::BufWriter::new(f))
        };
        self.write_mae_csv(open("mae.csv")?)?;
        self.write_dmae_csv(open("dmae.csv")?)?;
        self.write_summary_csv(open("summary.csv")?)?;
        self.write_failures_csv(open("failures.csv")?)?;
        self.write_origins_csv(open("origins.csv")?)?;
        for &k in &self.density_horizons {
            self.write_density_csv(k, open(&format!("density_{k}.csv"))?)?;
        }
        open("timing.txt")?.write_all(self.timing_text().as_bytes())?;
        Ok(written)
    }
}
