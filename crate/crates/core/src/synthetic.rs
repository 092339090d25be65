//! Ground-truth models for synthetic panels.

use crate::error::Result;
use crate::features::{ColumnMeta, Equation, FamilySpec, Family, IndexSets, ThresholdPolicy};
use crate::forecast::simulate_synthetic;
use crate::model::{EquationFit, ModelConfig, Term, TurbineFit};
use crate::panel::TurbinePanel;

/// A known model plus the configuration used to fit it back.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    /// Fitting configuration; also supplies the basis specs of the truth.
    pub config: ModelConfig,
    pub truth: Vec<TurbineFit>,
}

impl Scenario {
    pub fn simulate(&self, n: usize, seed: u64) -> Result<TurbinePanel> {
        simulate_synthetic(&self.config, &self.truth, n, seed)
    }

    pub fn by_name(name: &str, d: usize) -> Option<Self> {
        match name {
            "threshold-ar" => Some(threshold_ar()),
            "periodic" => Some(periodic(d)),
            _ => None,
        }
    }
}

pub const SCENARIOS: [&str; 2] = ["threshold-ar", "periodic"];

/// Builds one term of a truth equation.
pub fn term(family: Family, source: usize, lag: usize, threshold: f64, basis: Option<usize>, coef: f64) -> Term {
    Term { meta: ColumnMeta { family, source, lag, threshold, basis }, coef }
}

fn linear(family: Family, source: usize, lag: usize, coef: f64) -> Term {
    term(family, source, lag, f64::NEG_INFINITY, None, coef)
}

fn turbine(i: usize, eqs: [Vec<Term>; 4]) -> TurbineFit {
    let [sm, pm, sv, pv] = eqs;
    TurbineFit {
        speed_mean: EquationFit::from_terms(Equation::SpeedMean, i, sm, 0.0),
        power_mean: EquationFit::from_terms(Equation::PowerMean, i, pm, 0.0),
        speed_vol: EquationFit::from_terms(Equation::SpeedVol, i, sv, 0.0),
        power_vol: EquationFit::from_terms(Equation::PowerVol, i, pv, 0.0),
    }
}

/// Threshold speed for [`threshold_ar`].
pub const RECOVERY_THRESHOLD: f64 = 1.0;

/// Two turbines, each with a threshold AR(1) speed mean (intercept, linear
/// lag 1, lag 1 thresholded at 1) and an asymmetric ARCH(1) speed volatility.
/// Power is a noisy linear function of speed.
pub fn threshold_ar() -> Scenario {
    use Family::*;
    let c = RECOVERY_THRESHOLD;
    let params = [(0.3, 0.6, 0.2, 0.4, 0.2, 0.3), (0.4, 0.5, 0.2, 0.5, 0.3, 0.15)];
    let truth = params
        .iter()
        .enumerate()
        .map(|(i, &(mu, ar, thr, a0, ap, an))| {
            turbine(
                i,
                [
                    vec![
                        linear(SpeedIntercept, i, 0, mu),
                        linear(SpeedAr, i, 1, ar),
                        term(SpeedAr, i, 1, c, None, thr),
                    ],
                    vec![linear(PowerIntercept, i, 0, 50.0), linear(PowerSpeed, i, 0, 100.0)],
                    vec![
                        linear(SpeedVolIntercept, i, 0, a0),
                        linear(SpeedArchPos, i, 1, ap),
                        linear(SpeedArchNeg, i, 1, an),
                    ],
                    vec![linear(PowerVolIntercept, i, 0, 2.0)],
                ],
            )
        })
        .collect();
    let mut sets = IndexSets::empty();
    sets.speed_ar = FamilySpec::new(vec![1, 2], vec![1]).with_thresholds(vec![1]);
    sets.speed_arch = FamilySpec::new(vec![1, 2], vec![1]);
    sets.power_speed = FamilySpec::new(vec![0], vec![]);
    sets.power_ar = FamilySpec::new(vec![1], vec![]);
    let config = ModelConfig {
        sets,
        thresholds: ThresholdPolicy::Fixed { speed: vec![c], power: vec![] },
        ..ModelConfig::default()
    };
    Scenario { name: "threshold-ar", config, truth }
}

/// Speed thresholds of the piecewise-linear power curve in [`periodic`].
pub const POWER_CURVE: [(f64, f64); 3] = [(3.0, 60.0), (8.0, 120.0), (13.0, -180.0)];
pub const POWER_CURVE_INTERCEPT: f64 = 1200.0;

/// Power curve of [`periodic`]: 0 below 3 m/s, 1200 kW above 13 m/s.
pub fn power_curve(w: f64) -> f64 {
    POWER_CURVE_INTERCEPT + POWER_CURVE.iter().map(|&(c, b)| b * w.max(c)).sum::<f64>()
}

/// `d` coupled turbines with a diurnal speed level, diurnal and ARCH speed
/// volatility, and power given by a piecewise-linear curve of current speed.
pub fn periodic(d: usize) -> Scenario {
    use Family::*;
    let config = ModelConfig { sets: periodic_sets(), ..ModelConfig::default() };
    let nd = config.diurnal.n_basis;
    let na = config.annual.n_basis;
    let constant = nd * na - 1;
    // Cumulative column (last annual, diurnal 6): a smooth daytime step.
    let daytime = (na - 1) * nd + 5;
    // Plain columns (l1, 7) for every annual l1 sum to the diurnal bump 7.
    let bump: Vec<usize> = (0..na).map(|l1| l1 * nd + 6).collect();
    let truth = (0..d)
        .map(|i| {
            let mut sm = vec![
                term(SpeedIntercept, i, 0, f64::NEG_INFINITY, Some(constant), 0.7),
                term(SpeedIntercept, i, 0, f64::NEG_INFINITY, Some(daytime), 0.3),
                linear(SpeedAr, i, 1, 0.83),
                linear(SpeedAr, i, 2, 0.05),
            ];
            if d > 1 {
                sm.push(linear(SpeedAr, (i + 1) % d, 1, 0.02));
            }
            let mut pm = vec![linear(PowerIntercept, i, 0, POWER_CURVE_INTERCEPT)];
            pm.extend(POWER_CURVE.iter().map(|&(c, b)| term(PowerSpeed, i, 0, c, None, b)));
            let mut sv = vec![term(SpeedVolIntercept, i, 0, f64::NEG_INFINITY, Some(0), 0.3)];
            sv.extend(bump.iter().map(|&l| term(SpeedVolIntercept, i, 0, f64::NEG_INFINITY, Some(l), 0.4)));
            sv.push(linear(SpeedArchPos, i, 1, 0.1));
            sv.push(linear(SpeedArchNeg, i, 1, 0.1));
            let pv = vec![linear(PowerVolIntercept, i, 0, 1.5), linear(PowerArchNeg, i, 1, 0.1)];
            turbine(i, [sm, pm, sv, pv])
        })
        .collect();
    Scenario { name: "periodic", config, truth }
}

fn periodic_sets() -> IndexSets {
    let mut sets = IndexSets::empty();
    sets.varying_intercept = true;
    sets.speed_ar = FamilySpec::new(vec![1, 2, 3], vec![1]);
    sets.power_speed = FamilySpec::new(vec![0], vec![]).with_thresholds(vec![0]);
    sets.power_ar = FamilySpec::new(vec![1], vec![]);
    sets.speed_arch = FamilySpec::new(vec![1, 2], vec![]);
    sets.power_arch = FamilySpec::new(vec![1], vec![]);
    sets.power_speed_arch = FamilySpec::new(vec![1], vec![]);
    sets
}

/// Agreement between truth and fitted speed equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recovery {
    /// Share of true nonzero coefficients fitted with the same sign.
    pub sign_agreement: f64,
    /// Root mean squared coefficient error over the union of the true and
    /// fitted supports.
    pub rmse: f64,
    pub n_true: usize,
    pub n_union: usize,
}

/// Compares speed mean and speed volatility equations. Volatility
/// equations are fitted to absolute residuals, so true volatility
/// coefficients are scaled by `E|Z| = sqrt(2/pi)` of the Gaussian innovation.
pub fn speed_recovery(truth: &[TurbineFit], fitted: &[TurbineFit]) -> Recovery {
    let scale = (2.0 / std::f64::consts::PI).sqrt();
    let (mut agree, mut n_true, mut sq, mut n_union) = (0usize, 0usize, 0.0, 0usize);
    for (t, f) in truth.iter().zip(fitted) {
        for (eq, s) in [(Equation::SpeedMean, 1.0), (Equation::SpeedVol, scale)] {
            let (te, fe) = (&t.get(eq).terms, &f.get(eq).terms);
            let find = |terms: &[Term], m: &ColumnMeta| {
                terms.iter().find(|x| x.meta.key() == m.key()).map_or(0.0, |x| x.coef)
            };
            for x in te {
                let est = find(fe, &x.meta);
                let truth = s * x.coef;
                n_true += 1;
                if est != 0.0 && est.signum() == truth.signum() {
                    agree += 1;
                }
                sq += (est - truth).powi(2);
                n_union += 1;
            }
            for x in fe.iter().filter(|x| find(te, &x.meta) == 0.0) {
                sq += x.coef.powi(2);
                n_union += 1;
            }
        }
    }
    Recovery {
        sign_agreement: agree as f64 / n_true.max(1) as f64,
        rmse: (sq / n_union.max(1) as f64).sqrt(),
        n_true,
        n_union,
    }
}
