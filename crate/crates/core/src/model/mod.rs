//! Iteratively re-weighted lasso estimation of the joint speed/power model.

mod io;
mod recursion;

pub use io::{read_model, write_model, MODEL_HEADER};
pub use recursion::{filter_panel, predict, FilteredState, Shock, Window};
pub(crate) use recursion::step;

use crate::basis::{interaction_basis, BSplineSpec, BasisKind, BasisSet};
use crate::error::{Error, Result};
use crate::features::{
    build_design, column_layout, ColumnMeta, Equation, IndexSets, RegressorSource, SeriesSource,
    ThresholdPolicy, ThresholdSet,
};
use crate::lasso::{LassoProblem, LassoSettings};
use crate::panel::{CalendarIndex, TurbinePanel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub sets: IndexSets,
    pub thresholds: ThresholdPolicy,
    pub diurnal: BSplineSpec,
    pub annual: BSplineSpec,
    /// Number of mean/volatility passes.
    pub max_iterations: usize,
    pub lasso: LassoSettings,
    /// Volatility floor as a fraction of the median positive fitted value.
    pub vol_floor_fraction: f64,
    /// Rows required after the lag trim.
    pub min_sample: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            sets: IndexSets::default(),
            thresholds: ThresholdPolicy::Deciles,
            diurnal: BSplineSpec::diurnal(),
            annual: BSplineSpec::annual(),
            max_iterations: 2,
            lasso: LassoSettings::default(),
            vol_floor_fraction: 1e-3,
            min_sample: 5000,
        }
    }
}

impl ModelConfig {
    pub fn validate(&mut self) -> Result<()> {
        self.sets.validate()?;
        self.lasso.validate()?;
        self.diurnal.validate_strict()?;
        self.annual.validate()?;
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if !(self.vol_floor_fraction > 0.0 && self.vol_floor_fraction < 1.0) {
            return Err(Error::Config(format!(
                "vol_floor_fraction {} outside (0, 1)",
                self.vol_floor_fraction
            )));
        }
        Ok(())
    }

    /// Whether any coefficient is time-varying.
    pub fn uses_basis(&self) -> bool {
        let s = &self.sets;
        s.varying_intercept
            || [
                &s.speed_ar, &s.speed_ma, &s.power_ar, &s.power_speed, &s.power_ma,
                &s.power_speed_ma, &s.speed_arch, &s.speed_garch, &s.power_arch,
                &s.power_garch, &s.power_speed_arch, &s.power_speed_garch,
            ]
            .iter()
            .any(|f| !f.varying_own.is_empty() || !f.varying_cross.is_empty())
    }

    /// Mean (cumulative) and volatility (plain) interaction bases at `timestamps`.
    pub fn basis_sets(&self, timestamps: &[i64]) -> Result<(BasisSet, BasisSet)> {
        if !self.uses_basis() {
            return Ok((BasisSet::empty(BasisKind::Cumulative), BasisSet::empty(BasisKind::Plain)));
        }
        let cal = CalendarIndex::from_timestamps(timestamps);
        Ok((
            interaction_basis(&cal, &self.diurnal, &self.annual, BasisKind::Cumulative)?,
            interaction_basis(&cal, &self.diurnal, &self.annual, BasisKind::Plain)?,
        ))
    }

    fn constant_basis_column(&self, eq: Equation) -> usize {
        if eq.is_mean() {
            self.diurnal.n_basis * self.annual.n_basis - 1
        } else {
            0
        }
    }
}

/// One nonzero coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub meta: ColumnMeta,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquationFit {
    pub equation: Equation,
    pub turbine: usize,
    pub terms: Vec<Term>,
    /// Lower bound applied to volatility predictions; 0 for mean equations.
    pub floor: f64,
    pub lambda: f64,
    pub bic: f64,
    /// Candidate columns after pruning.
    pub n_candidates: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    /// Volatility equation not estimated because the residuals are all zero;
    /// the volatility is then the constant 1.
    pub skipped: bool,
}

impl EquationFit {
    /// An equation given directly by its terms, e.g. a simulation truth.
    pub fn from_terms(equation: Equation, turbine: usize, terms: Vec<Term>, floor: f64) -> Self {
        Self {
            equation,
            turbine,
            terms,
            floor,
            lambda: 0.0,
            bic: f64::NAN,
            n_candidates: 0,
            converged: true,
            kkt_residual: 0.0,
            skipped: false,
        }
    }

    fn constant_one(equation: Equation, turbine: usize) -> Self {
        let meta = ColumnMeta {
            family: equation.intercept(),
            source: turbine,
            lag: 0,
            threshold: f64::NEG_INFINITY,
            basis: None,
        };
        Self { skipped: true, ..Self::from_terms(equation, turbine, vec![Term { meta, coef: 1.0 }], 1.0) }
    }

    pub fn df(&self) -> usize {
        self.terms.len()
    }

    /// Prediction at row `t`, floored for volatility equations.
    #[inline]
    pub fn evaluate<S: RegressorSource + ?Sized>(&self, src: &S, t: usize) -> f64 {
        let v = predict(&self.terms, src, t);
        if self.equation.is_mean() {
            v
        } else {
            v.max(self.floor)
        }
    }
}

/// The four fitted equations of one turbine.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbineFit {
    pub speed_mean: EquationFit,
    pub power_mean: EquationFit,
    pub speed_vol: EquationFit,
    pub power_vol: EquationFit,
}

impl TurbineFit {
    pub fn get(&self, eq: Equation) -> &EquationFit {
        match eq {
            Equation::SpeedMean => &self.speed_mean,
            Equation::PowerMean => &self.power_mean,
            Equation::SpeedVol => &self.speed_vol,
            Equation::PowerVol => &self.power_vol,
        }
    }

    pub fn max_lag(&self) -> usize {
        Equation::ALL
            .iter()
            .flat_map(|&e| self.get(e).terms.iter().map(|t| t.meta.lag))
            .max()
            .unwrap_or(0)
    }
}

/// Final rows of the estimation sample, enough to start recursions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub timestamps: Vec<i64>,
    /// Indexed `[turbine][row]`.
    pub speed: Vec<Vec<f64>>,
    pub power: Vec<Vec<f64>>,
    pub speed_resid: Vec<Vec<f64>>,
    pub power_resid: Vec<Vec<f64>>,
    pub speed_vol: Vec<Vec<f64>>,
    /// Cube-root scale.
    pub power_vol: Vec<Vec<f64>>,
}

impl History {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Standardized in-sample residuals, one row per time step with all turbines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResidualPool {
    /// `e / sigma`, indexed `[row][turbine]`.
    pub speed: Vec<Vec<f64>>,
    /// Power residual over the cubed cube-root volatility proxy.
    pub power: Vec<Vec<f64>>,
}

impl ResidualPool {
    pub fn len(&self) -> usize {
        self.speed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed.is_empty()
    }
}

/// Full-sample residuals and volatility proxies, kept only in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct InSample {
    pub row_start: usize,
    pub speed_resid: Vec<Vec<f64>>,
    pub power_resid: Vec<Vec<f64>>,
    pub speed_vol: Vec<Vec<f64>>,
    pub power_vol: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedJointModel {
    pub config: ModelConfig,
    pub labels: Vec<String>,
    pub thresholds: ThresholdSet,
    /// Rows dropped for lags at the start of the sample.
    pub trim: usize,
    pub turbines: Vec<TurbineFit>,
    pub history: History,
    pub pool: ResidualPool,
    /// Mean in-sample `(speed, power)` volatility proxy per turbine.
    pub vol_levels: Vec<(f64, f64)>,
    pub sample_start: i64,
    pub sample_end: i64,
    /// Not serialized.
    pub in_sample: Option<InSample>,
}

impl FittedJointModel {
    pub fn d(&self) -> usize {
        self.turbines.len()
    }

    /// Rows of history a recursion needs.
    pub fn lookback(&self) -> usize {
        self.turbines.iter().map(TurbineFit::max_lag).max().unwrap_or(0).max(self.trim).max(1)
    }

    /// Copy without the in-memory sample state.
    pub fn without_in_sample(&self) -> Self {
        Self { in_sample: None, ..self.clone() }
    }
}

/// `response - design * coefficients`.
pub fn compute_residuals(design: &crate::features::DesignMatrix, coefficients: &[f64]) -> Result<Vec<f64>> {
    design.residuals(coefficients)
}

/// Floors fitted volatilities at `fraction * median(positive fitted)`.
/// Returns the proxies and the floor.
pub fn volatility_proxy(fitted: &[f64], fraction: f64) -> Result<(Vec<f64>, f64)> {
    let mut pos: Vec<f64> = fitted.iter().copied().filter(|v| *v > 0.0).collect();
    if pos.is_empty() {
        return Err(Error::DegenerateVolatility("no positive fitted volatility".into()));
    }
    pos.sort_unstable_by(f64::total_cmp);
    let k = pos.len();
    let median = if k % 2 == 1 { pos[k / 2] } else { 0.5 * (pos[k / 2 - 1] + pos[k / 2]) };
    let floor = fraction * median;
    Ok((fitted.iter().map(|v| v.max(floor)).collect(), floor))
}

fn normalized_weights(proxy: &[f64], power: i32) -> Result<Vec<f64>> {
    let w: Vec<f64> = proxy.iter().map(|v| v.powi(power)).collect();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::NonFinite("heteroscedasticity weights".into()));
    }
    Ok(w.iter().map(|v| v / mean).collect())
}

struct Proxies {
    eps: Vec<Vec<f64>>,
    epsp: Vec<Vec<f64>>,
    sig: Vec<Vec<f64>>,
    vsig: Vec<Vec<f64>>,
}

fn fit_equation(
    eq: Equation,
    i: usize,
    src: &SeriesSource<'_>,
    config: &ModelConfig,
    thresholds: &ThresholdSet,
    rows: std::ops::Range<usize>,
    weights: Option<Vec<f64>>,
) -> Result<EquationFit> {
    let nb = if eq.is_mean() { src.mean_basis.n_cols() } else { src.var_basis.n_cols() };
    let d = src.speed.len();
    let layout = column_layout(eq, i, d, &config.sets, thresholds, nb);
    let mut design = build_design(eq, i, src, layout, rows)?;
    design.drop_duplicate_columns();
    if design.n_cols() >= design.n_rows() {
        return Err(Error::RankDeficient(format!(
            "{eq} for turbine {i}: {} columns for {} rows",
            design.n_cols(),
            design.n_rows()
        )));
    }
    let constant = config.constant_basis_column(eq);
    let cols: Vec<&[f64]> = design.columns().collect();
    let mut prob = LassoProblem::new(cols, &design.response)?.nonnegative(!eq.is_mean());
    for (c, m) in design.meta.iter().enumerate() {
        if m.family.is_intercept() && (m.basis.is_none() || m.basis == Some(constant)) {
            prob = prob.unpenalized(c)?;
        }
    }
    if let Some(w) = weights {
        prob = prob.with_weights(w)?;
    }
    let fit = prob.fit_path_bic(&config.lasso)?;
    let terms = design
        .meta
        .iter()
        .zip(&fit.coefficients)
        .filter(|(_, b)| **b != 0.0)
        .map(|(m, b)| Term { meta: *m, coef: *b })
        .collect();
    log::debug!("{eq} turbine {i}: {} of {} columns, lambda {}", fit.df[fit.selected], design.n_cols(), fit.lambda);
    Ok(EquationFit {
        equation: eq,
        turbine: i,
        terms,
        floor: 0.0,
        lambda: fit.lambda,
        bic: fit.bic[fit.selected],
        n_candidates: design.n_cols(),
        converged: fit.converged,
        kkt_residual: fit.kkt_residual,
        skipped: false,
    })
}

/// Fits the volatility equation and returns it with its floored in-sample proxy
/// over `rows` (empty for skipped equations, which use the constant 1).
fn fit_vol(
    eq: Equation,
    i: usize,
    src: &SeriesSource<'_>,
    config: &ModelConfig,
    rows: std::ops::Range<usize>,
) -> Result<(EquationFit, Vec<f64>)> {
    let resid = if eq == Equation::SpeedVol { &src.speed_resid[i] } else { &src.power_resid[i] };
    if resid[rows.clone()].iter().all(|&e| e == 0.0) {
        log::warn!("{eq} for turbine {i}: residuals are exactly zero, volatility fixed at 1");
        return Ok((EquationFit::constant_one(eq, i), vec![1.0; rows.len()]));
    }
    let none = ThresholdSet::none(src.speed.len());
    let mut fit = fit_equation(eq, i, src, config, &none, rows.clone(), None)?;
    let fitted: Vec<f64> = rows.map(|t| predict(&fit.terms, src, t)).collect();
    let (proxy, floor) = volatility_proxy(&fitted, config.vol_floor_fraction)?;
    fit.floor = floor;
    Ok((fit, proxy))
}

/// Runs the iteratively re-weighted estimation on a gap-free panel.
pub fn fit_joint_model(panel: &TurbinePanel, config: &ModelConfig) -> Result<FittedJointModel> {
    let mut config = config.clone();
    config.validate()?;
    if !panel.is_complete() {
        return Err(Error::Schema("panel has missing values; fill gaps before fitting".into()));
    }
    let (n, d) = (panel.n(), panel.d());
    let trim = config.sets.max_lag();
    if n < trim + config.min_sample.max(1) {
        return Err(Error::InsufficientHistory { required: trim + config.min_sample.max(1), available: n });
    }
    let eff = trim..n;
    let speed = panel.speed_all().to_vec();
    let power = panel.power_all().to_vec();
    let (mb, vb) = config.basis_sets(panel.timestamps())?;
    let sw: Vec<&[f64]> = speed.iter().map(|s| &s[eff.clone()]).collect();
    let pw: Vec<&[f64]> = power.iter().map(|s| &s[eff.clone()]).collect();
    let thresholds = ThresholdSet::from_policy(&config.thresholds, &sw, &pw)?;

    let ones = vec![vec![1.0; n]; d];
    let mut state = Proxies { eps: ones.clone(), epsp: ones.clone(), sig: ones.clone(), vsig: ones };
    let mut turbines = Vec::new();
    for k in 1..=config.max_iterations {
        log::info!("estimation pass {k} of {}", config.max_iterations);
        let src = SeriesSource {
            speed: &speed,
            power: &power,
            speed_resid: &state.eps,
            power_resid: &state.epsp,
            speed_vol: &state.sig,
            power_vol: &state.vsig,
            mean_basis: &mb,
            var_basis: &vb,
        };
        let means: Vec<(EquationFit, EquationFit)> = (0..d)
            .into_par_iter()
            .map(|i| {
                let (wm, wp) = if k > 1 {
                    (
                        Some(normalized_weights(&state.sig[i][eff.clone()], -2)?),
                        Some(normalized_weights(&state.vsig[i][eff.clone()], -6)?),
                    )
                } else {
                    (None, None)
                };
                let s = fit_equation(Equation::SpeedMean, i, &src, &config, &thresholds, eff.clone(), wm)?;
                let p = fit_equation(Equation::PowerMean, i, &src, &config, &thresholds, eff.clone(), wp)?;
                Ok((s, p))
            })
            .collect::<Result<_>>()?;
        let mut eps = vec![vec![0.0; n]; d];
        let mut epsp = vec![vec![0.0; n]; d];
        for i in 0..d {
            for t in eff.clone() {
                eps[i][t] = speed[i][t] - means[i].0.evaluate(&src, t);
                epsp[i][t] = power[i][t] - means[i].1.evaluate(&src, t);
            }
        }
        let vsrc = SeriesSource { speed_resid: &eps, power_resid: &epsp, ..src };
        let vols: Vec<((EquationFit, Vec<f64>), (EquationFit, Vec<f64>))> = (0..d)
            .into_par_iter()
            .map(|i| {
                Ok((
                    fit_vol(Equation::SpeedVol, i, &vsrc, &config, eff.clone())?,
                    fit_vol(Equation::PowerVol, i, &vsrc, &config, eff.clone())?,
                ))
            })
            .collect::<Result<_>>()?;
        let mut sig = vec![vec![0.0; n]; d];
        let mut vsig = vec![vec![0.0; n]; d];
        turbines.clear();
        for (i, ((sm, pm), ((sv, sp), (pv, pp)))) in means.into_iter().zip(vols).enumerate() {
            for (target, proxy) in [(&mut sig[i], &sp), (&mut vsig[i], &pp)] {
                let level = proxy.iter().sum::<f64>() / proxy.len() as f64;
                target[..trim].iter_mut().for_each(|v| *v = level);
                target[trim..].copy_from_slice(proxy);
            }
            turbines.push(TurbineFit { speed_mean: sm, power_mean: pm, speed_vol: sv, power_vol: pv });
        }
        state = Proxies { eps, epsp, sig, vsig };
    }

    let lookback = trim.max(1);
    let tail = n - lookback..n;
    let cut = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> { m.iter().map(|s| s[tail.clone()].to_vec()).collect() };
    let history = History {
        timestamps: panel.timestamps()[tail.clone()].to_vec(),
        speed: cut(&speed),
        power: cut(&power),
        speed_resid: cut(&state.eps),
        power_resid: cut(&state.epsp),
        speed_vol: cut(&state.sig),
        power_vol: cut(&state.vsig),
    };
    let pool = ResidualPool {
        speed: eff.clone().map(|t| (0..d).map(|i| state.eps[i][t] / state.sig[i][t]).collect()).collect(),
        power: eff
            .clone()
            .map(|t| (0..d).map(|i| state.epsp[i][t] / state.vsig[i][t].powi(3)).collect())
            .collect(),
    };
    let level = |m: &Vec<f64>| m[eff.clone()].iter().sum::<f64>() / eff.len() as f64;
    let vol_levels = (0..d).map(|i| (level(&state.sig[i]), level(&state.vsig[i]))).collect();
    Ok(FittedJointModel {
        config,
        labels: panel.labels().to_vec(),
        thresholds,
        trim,
        turbines,
        history,
        pool,
        vol_levels,
        sample_start: panel.timestamps()[0],
        sample_end: panel.timestamps()[n - 1],
        in_sample: Some(InSample {
            row_start: trim,
            speed_resid: state.eps,
            power_resid: state.epsp,
            speed_vol: state.sig,
            power_vol: state.vsig,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volatility_proxy_examples() {
        let (v, floor) = volatility_proxy(&[1.0, 2.0, 0.0], 0.01).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 0.015]);
        assert_eq!(floor, 0.015);
        let (v, _) = volatility_proxy(&[3.0; 5], 0.5).unwrap();
        assert_eq!(v, vec![3.0; 5]);
        assert!(matches!(volatility_proxy(&[0.0, -1.0], 0.1), Err(Error::DegenerateVolatility(_))));
    }

    #[test]
    fn weights_normalized() {
        let w = normalized_weights(&[1.0, 2.0, 4.0], -2).unwrap();
        assert!((w.iter().sum::<f64>() / 3.0 - 1.0).abs() < 1e-15);
        assert!((w[0] / w[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut c = ModelConfig::default();
        c.validate().unwrap();
        assert!(c.uses_basis());
        c.max_iterations = 0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig { vol_floor_fraction: 1.0, ..ModelConfig::default() };
        assert!(c.validate().is_err());
        let c = ModelConfig { sets: IndexSets::default().constant_coefficients(), ..ModelConfig::default() };
        assert!(!c.uses_basis());
        let (m, v) = c.basis_sets(&[0, 600]).unwrap();
        assert_eq!((m.n_cols(), v.n_cols()), (0, 0));
    }
}
