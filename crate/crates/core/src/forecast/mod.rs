//! Multi-step point and bootstrap forecasts, and synthetic data generation.

mod simulate;

pub use simulate::{simulate_synthetic, simulate_synthetic_from, SIMULATION_START};

use crate::error::{Error, Result};
use crate::model::{filter_panel, step, FilteredState, FittedJointModel, Shock, Window};
use crate::panel::TurbinePanel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::{Read, Write};

pub const N_QUANTILES: usize = 99;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    Speed,
    Power,
}

impl Variable {
    pub fn tag(self) -> &'static str {
        match self {
            Variable::Speed => "speed",
            Variable::Power => "power",
        }
    }
}

/// Forecasts for horizons `1..=horizon` from one origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    /// Panel row of the origin.
    pub origin: usize,
    pub origin_ts: i64,
    pub horizon: usize,
    pub labels: Vec<String>,
    /// Indexed `[h - 1][turbine]`.
    pub speed_point: Vec<Vec<f64>>,
    pub power_point: Vec<Vec<f64>>,
    /// Percentiles 1..=99, flattened `[(h - 1) * d + turbine] * 99 + (q - 1)`;
    /// empty for point-only results.
    pub speed_quantiles: Vec<f64>,
    pub power_quantiles: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
}

impl ForecastResult {
    pub fn d(&self) -> usize {
        self.labels.len()
    }

    pub fn has_quantiles(&self) -> bool {
        !self.speed_quantiles.is_empty()
    }

    pub fn point(&self, var: Variable, h: usize, i: usize) -> f64 {
        match var {
            Variable::Speed => self.speed_point[h - 1][i],
            Variable::Power => self.power_point[h - 1][i],
        }
    }

    /// The 99 percentiles at horizon `h` (1-based) for turbine `i`.
    pub fn quantiles(&self, var: Variable, h: usize, i: usize) -> &[f64] {
        let q = match var {
            Variable::Speed => &self.speed_quantiles,
            Variable::Power => &self.power_quantiles,
        };
        let at = ((h - 1) * self.d() + i) * N_QUANTILES;
        &q[at..at + N_QUANTILES]
    }

    /// CSV with columns `origin_ts,horizon,turbine,variable,point,p01..p99`.
    pub fn write_csv<W: Write>(&self, out: W, header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        if header {
            let mut h: Vec<String> = ["origin_ts", "horizon", "turbine", "variable", "point"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            h.extend((1..=N_QUANTILES).map(|q| format!("p{q:02}")));
            w.write_record(&h)?;
        }
        for h in 1..=self.horizon {
            for i in 0..self.d() {
                for var in [Variable::Speed, Variable::Power] {
                    let mut rec = vec![
                        self.origin_ts.to_string(),
                        h.to_string(),
                        self.labels[i].clone(),
                        var.tag().to_string(),
                        self.point(var, h, i).to_string(),
                    ];
                    if self.has_quantiles() {
                        rec.extend(self.quantiles(var, h, i).iter().map(|v| v.to_string()));
                    } else {
                        rec.extend(std::iter::repeat_n(String::new(), N_QUANTILES));
                    }
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One row of a forecast CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub origin_ts: i64,
    pub horizon: usize,
    pub turbine: String,
    pub variable: String,
    pub point: f64,
    pub quantiles: Option<Vec<f64>>,
}

/// Reads a forecast CSV written by [`ForecastResult::write_csv`].
pub fn read_forecast_csv<R: Read>(input: R) -> Result<Vec<ForecastRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        let bad = |m: &str| Error::Parse { row, message: m.to_string() };
        if rec.len() != 5 + N_QUANTILES {
            return Err(bad("wrong number of columns"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
        let quantiles = if rec[5].is_empty() {
            None
        } else {
            Some((5..5 + N_QUANTILES).map(|c| num(&rec[c])).collect::<Result<Vec<_>>>()?)
        };
        out.push(ForecastRecord {
            origin_ts: rec[0].parse().map_err(|_| bad("bad origin_ts"))?,
            horizon: rec[1].parse().map_err(|_| bad("bad horizon"))?,
            turbine: rec[2].to_string(),
            variable: rec[3].to_string(),
            point: num(&rec[4])?,
            quantiles,
        });
    }
    Ok(out)
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::Parameter("horizon must be >= 1".into()));
    }
    Ok(())
}

/// Plug-in recursion with zero future shocks from an already filtered state.
pub fn point_forecast_from(
    model: &FittedJointModel,
    state: &FilteredState,
    origin: usize,
    horizon: usize,
) -> Result<ForecastResult> {
    check_horizon(horizon)?;
    let (mut w, o) = state.forecast_window(model, origin, horizon)?;
    for t in o + 1..w.len() {
        step(&model.turbines, &mut w, t, Shock::Zero);
    }
    let d = model.d();
    let grab = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (1..=horizon).map(|h| (0..d).map(|i| m[i][o + h]).collect()).collect()
    };
    let result = ForecastResult {
        origin,
        origin_ts: w.timestamps[o],
        horizon,
        labels: model.labels.clone(),
        speed_point: grab(&w.speed),
        power_point: grab(&w.power),
        speed_quantiles: Vec::new(),
        power_quantiles: Vec::new(),
        n_paths: 0,
        seed: 0,
    };
    check_finite(&result)?;
    Ok(result)
}

/// Plug-in point forecast from panel row `origin`; rows after `origin` are never read.
pub fn point_forecast(
    model: &FittedJointModel,
    panel: &TurbinePanel,
    origin: usize,
    horizon: usize,
) -> Result<ForecastResult> {
    let state = filter_panel(model, panel, origin)?;
    point_forecast_from(model, &state, origin, horizon)
}

fn check_finite(r: &ForecastResult) -> Result<()> {
    let finite = r
        .speed_point
        .iter()
        .chain(&r.power_point)
        .flatten()
        .chain(&r.speed_quantiles)
        .chain(&r.power_quantiles)
        .all(|v| v.is_finite());
    if finite {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("forecast from origin {}", r.origin_ts)))
    }
}

/// Simulates one bootstrap path; returns `[h][speed d.., power d..]` flattened.
fn bootstrap_path(model: &FittedJointModel, base: &Window, o: usize, seed: u64, path: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    let mut w = base.clone();
    let d = model.d();
    let pool = &model.pool;
    let mut out = Vec::with_capacity((w.len() - o - 1) * 2 * d);
    for t in o + 1..w.len() {
        let row = rng.random_range(0..pool.len());
        step(
            &model.turbines,
            &mut w,
            t,
            Shock::Standardized { speed: &pool.speed[row], power: &pool.power[row] },
        );
        out.extend((0..d).map(|i| w.speed[i][t]));
        out.extend((0..d).map(|i| w.power[i][t]));
    }
    out
}

/// Order statistic at rank `ceil(q n / 100)` for each percentile `q`.
fn percentiles(sorted: &[f64]) -> impl Iterator<Item = f64> + '_ {
    let n = sorted.len();
    (1..=N_QUANTILES).map(move |q| {
        let rank = (q * n).div_ceil(100).max(1);
        sorted[rank - 1]
    })
}

/// Residual bootstrap: `n_paths` joint paths driven by whole cross-sectional
/// rows of standardized in-sample residuals. The point forecast is the path
/// mean. Results depend only on `seed`, never on the thread count.
pub fn bootstrap_forecast_from(
    model: &FittedJointModel,
    state: &FilteredState,
    origin: usize,
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<ForecastResult> {
    check_horizon(horizon)?;
    if n_paths == 0 {
        return Err(Error::Parameter("n_paths must be >= 1".into()));
    }
    if n_paths < 100 {
        log::warn!("only {n_paths} bootstrap paths; percentiles will be coarse");
    }
    if model.pool.is_empty() {
        return Err(Error::Model("empty standardized residual pool".into()));
    }
    let (base, o) = state.forecast_window(model, origin, horizon)?;
    let paths: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| bootstrap_path(model, &base, o, seed, p))
        .collect();
    let d = model.d();
    let mut speed_point = vec![vec![0.0; d]; horizon];
    let mut power_point = vec![vec![0.0; d]; horizon];
    let mut speed_q = Vec::with_capacity(horizon * d * N_QUANTILES);
    let mut power_q = Vec::with_capacity(horizon * d * N_QUANTILES);
    let mut buf = vec![0.0; n_paths];
    for h in 0..horizon {
        for (var, point, q) in [(0, &mut speed_point, &mut speed_q), (1, &mut power_point, &mut power_q)] {
            for i in 0..d {
                let col = h * 2 * d + var * d + i;
                for (b, p) in buf.iter_mut().zip(&paths) {
                    *b = p[col];
                }
                point[h][i] = buf.iter().sum::<f64>() / n_paths as f64;
                buf.sort_unstable_by(f64::total_cmp);
                q.extend(percentiles(&buf));
            }
        }
    }
    let result = ForecastResult {
        origin,
        origin_ts: base.timestamps[o],
        horizon,
        labels: model.labels.clone(),
        speed_point,
        power_point,
        speed_quantiles: speed_q,
        power_quantiles: power_q,
        n_paths,
        seed,
    };
    check_finite(&result)?;
    Ok(result)
}

pub fn bootstrap_forecast(
    model: &FittedJointModel,
    panel: &TurbinePanel,
    origin: usize,
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<ForecastResult> {
    let state = filter_panel(model, panel, origin)?;
    bootstrap_forecast_from(model, &state, origin, horizon, n_paths, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_ranks() {
        let v: Vec<f64> = (1..=200).map(f64::from).collect();
        let q: Vec<f64> = percentiles(&v).collect();
        assert_eq!(q[0], 2.0);
        assert_eq!(q[49], 100.0);
        assert_eq!(q[98], 198.0);
        let one = [5.0];
        assert!(percentiles(&one).all(|x| x == 5.0));
    }
}
