//! Reference forecasters for turbine power.

mod arma;
mod var;
mod wppt;

pub use arma::{fit_arma11_mle, ArmaFit};
pub use var::{fit_ar_yule_walker, fit_var_yule_walker, VarFit};
pub use wppt::{
    censored_mean, fit_gwppt, fit_wppt, gwppt_forecast, wppt_forecast, wppt_regressors, GwpptFit, WpptFit,
    N_WPPT_TERMS, WPPT_TERMS,
};

use crate::error::{Error, Result};
use crate::panel::TurbinePanel;
use rayon::prelude::*;
use std::ops::Range;
use std::str::FromStr;

/// Default upper limit for the autoregressive order search.
pub const DEFAULT_MAX_ORDER: usize = 12;

/// Default censoring bounds in kW.
pub const DEFAULT_CENSORING: (f64, f64) = (0.0, 1500.0);

/// Anything that produces power forecasts for every turbine from an origin row.
/// Implementations read only rows up to and including the origin.
pub trait PowerForecaster: Send + Sync {
    fn name(&self) -> &str;

    /// Forecasts at each of `horizons`, indexed `[horizon index][turbine]`.
    fn forecast_power(&self, panel: &TurbinePanel, origin: usize, horizons: &[usize]) -> Result<Vec<Vec<f64>>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchmarkKind {
    Persistence,
    Ar,
    Bvar,
    Var,
    Arma11,
    Wppt,
    Gwppt,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 7] = [
        BenchmarkKind::Persistence,
        BenchmarkKind::Ar,
        BenchmarkKind::Bvar,
        BenchmarkKind::Var,
        BenchmarkKind::Arma11,
        BenchmarkKind::Wppt,
        BenchmarkKind::Gwppt,
    ];

    pub fn id(self) -> &'static str {
        match self {
            BenchmarkKind::Persistence => "persistence",
            BenchmarkKind::Ar => "ar",
            BenchmarkKind::Bvar => "bvar",
            BenchmarkKind::Var => "var",
            BenchmarkKind::Arma11 => "arma11",
            BenchmarkKind::Wppt => "wppt",
            BenchmarkKind::Gwppt => "gwppt",
        }
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BenchmarkKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown benchmark '{s}'")))
    }
}

/// Fitted coefficients of one benchmark, per turbine where it applies.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchmarkFit {
    Persistence,
    /// Univariate autoregression on each turbine's power.
    Ar(Vec<VarFit>),
    /// Bivariate (speed, power) autoregression per turbine.
    Bvar(Vec<VarFit>),
    /// One autoregression over all speeds followed by all powers.
    Var(VarFit),
    Arma11(Vec<ArmaFit>),
    /// `[turbine][horizon index]`.
    Wppt(Vec<Vec<WpptFit>>),
    Gwppt(Vec<Vec<GwpptFit>>),
}

impl BenchmarkFit {
    pub fn kind(&self) -> BenchmarkKind {
        match self {
            BenchmarkFit::Persistence => BenchmarkKind::Persistence,
            BenchmarkFit::Ar(_) => BenchmarkKind::Ar,
            BenchmarkFit::Bvar(_) => BenchmarkKind::Bvar,
            BenchmarkFit::Var(_) => BenchmarkKind::Var,
            BenchmarkFit::Arma11(_) => BenchmarkKind::Arma11,
            BenchmarkFit::Wppt(_) => BenchmarkKind::Wppt,
            BenchmarkFit::Gwppt(_) => BenchmarkKind::Gwppt,
        }
    }
}

/// Options shared by the benchmark fitters.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOptions {
    pub max_order: usize,
    pub censoring: (f64, f64),
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions { max_order: DEFAULT_MAX_ORDER, censoring: DEFAULT_CENSORING }
    }
}

/// `P_origin` repeated for every horizon.
pub fn persistence_forecast(panel: &TurbinePanel, origin: usize, horizons: &[usize]) -> Result<Vec<Vec<f64>>> {
    if origin >= panel.n() {
        return Err(Error::Index { index: origin, max: panel.n() });
    }
    let row: Vec<f64> = (0..panel.d()).map(|i| panel.power(i)[origin]).collect();
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("power at origin row {origin}")));
    }
    Ok(vec![row; horizons.len()])
}

/// A fitted benchmark ready to forecast at the horizons it was fitted for.
#[derive(Debug, Clone)]
pub struct FittedBenchmark {
    pub fit: BenchmarkFit,
    /// Horizons with a direct fit (WPPT and GWPPT only).
    pub horizons: Vec<usize>,
    /// First row the fit used; recursive forecasts rebuild state from here.
    pub start: usize,
}

fn missing_in(panel: &TurbinePanel, rows: &Range<usize>) -> bool {
    (0..panel.d()).any(|i| {
        panel.speed_missing(i)[rows.clone()].iter().any(|&m| m) || panel.power_missing(i)[rows.clone()].iter().any(|&m| m)
    })
}

/// Fits benchmark `kind` on panel `rows`. Direct (per-horizon) benchmarks
/// are fitted for each of `horizons`.
pub fn fit_benchmark(
    kind: BenchmarkKind,
    panel: &TurbinePanel,
    rows: Range<usize>,
    horizons: &[usize],
    options: &BenchmarkOptions,
) -> Result<FittedBenchmark> {
    if rows.end > panel.n() || rows.is_empty() {
        return Err(Error::Index { index: rows.end, max: panel.n() });
    }
    if kind != BenchmarkKind::Persistence && missing_in(panel, &rows) {
        return Err(Error::Schema(format!("benchmark '{}' needs complete data in the fitting rows", kind.id())));
    }
    let d = panel.d();
    let power = |i: usize| &panel.power(i)[rows.clone()];
    let speed = |i: usize| &panel.speed(i)[rows.clone()];
    let fit = match kind {
        BenchmarkKind::Persistence => BenchmarkFit::Persistence,
        BenchmarkKind::Ar => BenchmarkFit::Ar(
            (0..d).into_par_iter().map(|i| fit_ar_yule_walker(power(i), options.max_order)).collect::<Result<_>>()?,
        ),
        BenchmarkKind::Bvar => BenchmarkFit::Bvar(
            (0..d)
                .into_par_iter()
                .map(|i| fit_var_yule_walker(&[speed(i), power(i)], options.max_order))
                .collect::<Result<_>>()?,
        ),
        BenchmarkKind::Var => {
            let series: Vec<&[f64]> = (0..d).map(speed).chain((0..d).map(power)).collect();
            BenchmarkFit::Var(fit_var_yule_walker(&series, options.max_order)?)
        }
        BenchmarkKind::Arma11 => {
            BenchmarkFit::Arma11((0..d).into_par_iter().map(|i| fit_arma11_mle(power(i))).collect::<Result<_>>()?)
        }
        BenchmarkKind::Wppt => BenchmarkFit::Wppt(
            (0..d)
                .map(|i| horizons.par_iter().map(|&k| fit_wppt(panel, i, k, rows.clone())).collect::<Result<_>>())
                .collect::<Result<_>>()?,
        ),
        BenchmarkKind::Gwppt => {
            let (l, u) = options.censoring;
            BenchmarkFit::Gwppt(
                (0..d)
                    .map(|i| horizons.par_iter().map(|&k| fit_gwppt(panel, i, k, rows.clone(), l, u)).collect::<Result<_>>())
                    .collect::<Result<_>>()?,
            )
        }
    };
    Ok(FittedBenchmark { fit, horizons: horizons.to_vec(), start: rows.start })
}

impl FittedBenchmark {
    fn direct_index(&self, k: usize) -> Result<usize> {
        self.horizons
            .iter()
            .position(|&h| h == k)
            .ok_or_else(|| Error::Parameter(format!("{} was not fitted for horizon {k}", self.fit.kind().id())))
    }

    fn history<'a>(&self, s: &'a [f64], origin: usize) -> &'a [f64] {
        &s[self.start.min(origin)..=origin]
    }
}

impl PowerForecaster for FittedBenchmark {
    fn name(&self) -> &str {
        self.fit.kind().id()
    }

    fn forecast_power(&self, panel: &TurbinePanel, origin: usize, horizons: &[usize]) -> Result<Vec<Vec<f64>>> {
        if origin >= panel.n() {
            return Err(Error::Index { index: origin, max: panel.n() });
        }
        let d = panel.d();
        let max_h = horizons.iter().copied().max().unwrap_or(0);
        let pick = |path: Vec<Vec<f64>>| -> Vec<Vec<f64>> { horizons.iter().map(|&k| path[k - 1].clone()).collect() };
        if horizons.contains(&0) {
            return Err(Error::Parameter("horizons must be >= 1".into()));
        }
        let out = match &self.fit {
            BenchmarkFit::Persistence => persistence_forecast(panel, origin, horizons)?,
            BenchmarkFit::Ar(fits) => {
                let mut path = vec![vec![0.0; d]; max_h];
                for (i, f) in fits.iter().enumerate() {
                    for (h, v) in f.forecast(&[self.history(panel.power(i), origin)], max_h)?.into_iter().enumerate() {
                        path[h][i] = v[0];
                    }
                }
                pick(path)
            }
            BenchmarkFit::Bvar(fits) => {
                let mut path = vec![vec![0.0; d]; max_h];
                for (i, f) in fits.iter().enumerate() {
                    let hist = [self.history(panel.speed(i), origin), self.history(panel.power(i), origin)];
                    for (h, v) in f.forecast(&hist, max_h)?.into_iter().enumerate() {
                        path[h][i] = v[1];
                    }
                }
                pick(path)
            }
            BenchmarkFit::Var(f) => {
                let hist: Vec<&[f64]> = (0..d)
                    .map(|i| self.history(panel.speed(i), origin))
                    .chain((0..d).map(|i| self.history(panel.power(i), origin)))
                    .collect();
                pick(f.forecast(&hist, max_h)?.into_iter().map(|v| v[d..].to_vec()).collect())
            }
            BenchmarkFit::Arma11(fits) => {
                let mut path = vec![vec![0.0; d]; max_h];
                for (i, f) in fits.iter().enumerate() {
                    for (h, v) in f.forecast(self.history(panel.power(i), origin), max_h)?.into_iter().enumerate() {
                        path[h][i] = v;
                    }
                }
                pick(path)
            }
            BenchmarkFit::Wppt(fits) => {
                let mut out = vec![vec![0.0; d]; horizons.len()];
                for (hi, &k) in horizons.iter().enumerate() {
                    let j = self.direct_index(k)?;
                    for (i, f) in fits.iter().enumerate() {
                        out[hi][i] = wppt_forecast(&f[j], panel, origin)?;
                    }
                }
                out
            }
            BenchmarkFit::Gwppt(fits) => {
                let mut out = vec![vec![0.0; d]; horizons.len()];
                for (hi, &k) in horizons.iter().enumerate() {
                    let j = self.direct_index(k)?;
                    for (i, f) in fits.iter().enumerate() {
                        out[hi][i] = gwppt_forecast(&f[j], panel, origin)?;
                    }
                }
                out
            }
        };
        if let Some(v) = out.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} forecast at origin {origin}: {v}", self.name())));
        }
        Ok(out)
    }
}
