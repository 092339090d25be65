//! Regression designs for the four model equations.
//!
//! Every design column is described by a [`ColumnMeta`] that can rebuild the
//! regressor value at any time index from a [`RegressorSource`]. Fitting and
//! forecasting both evaluate regressors through the same metadata, so fitted
//! values and recursions agree bit for bit.

mod design;
mod sets;
mod thresholds;

pub use design::{
    build_design, build_power_mean_design, build_power_vol_design, build_speed_mean_design,
    build_speed_vol_design, column_layout, write_layout_csv, DesignMatrix, SeriesSource,
};
pub use sets::{FamilySpec, IndexSets};
pub use thresholds::{compute_thresholds, ThresholdPolicy, ThresholdSet};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// `max{x, c}`; with `c = -inf` this is `x`.
#[inline]
pub fn threshold_regressor(x: f64, c: f64) -> f64 {
    if x >= c {
        x
    } else {
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    SpeedMean,
    PowerMean,
    SpeedVol,
    PowerVol,
}

impl Equation {
    pub const ALL: [Equation; 4] = [
        Equation::SpeedMean,
        Equation::PowerMean,
        Equation::SpeedVol,
        Equation::PowerVol,
    ];

    pub fn is_mean(self) -> bool {
        matches!(self, Equation::SpeedMean | Equation::PowerMean)
    }

    pub fn tag(self) -> &'static str {
        match self {
            Equation::SpeedMean => "speed_mean",
            Equation::PowerMean => "power_mean",
            Equation::SpeedVol => "speed_vol",
            Equation::PowerVol => "power_vol",
        }
    }

    /// Regression response at row `t` for turbine `i`.
    ///
    /// Volatility equations regress `|e|` (speed) and `|e|^(1/3)` (power).
    #[inline]
    pub fn response<S: RegressorSource + ?Sized>(self, src: &S, i: usize, t: usize) -> f64 {
        match self {
            Equation::SpeedMean => src.speed(i, t),
            Equation::PowerMean => src.power(i, t),
            Equation::SpeedVol => src.speed_resid(i, t).abs(),
            Equation::PowerVol => src.power_resid(i, t).abs().cbrt(),
        }
    }

    pub fn intercept(self) -> Family {
        match self {
            Equation::SpeedMean => Family::SpeedIntercept,
            Equation::PowerMean => Family::PowerIntercept,
            Equation::SpeedVol => Family::SpeedVolIntercept,
            Equation::PowerVol => Family::PowerVolIntercept,
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Coefficient families, one per sum in the model equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    SpeedIntercept,
    /// Thresholded lagged speed in the speed mean.
    SpeedAr,
    /// Lagged speed residuals in the speed mean.
    SpeedMa,
    PowerIntercept,
    /// Thresholded lagged power in the power mean.
    PowerAr,
    /// Thresholded current and lagged speed in the power mean.
    PowerSpeed,
    /// Lagged power residuals in the power mean.
    PowerMa,
    /// Current and lagged speed residuals in the power mean.
    PowerSpeedMa,
    SpeedVolIntercept,
    SpeedArchPos,
    SpeedArchNeg,
    SpeedGarch,
    PowerVolIntercept,
    PowerArchPos,
    PowerArchNeg,
    PowerGarch,
    PowerSpeedArchPos,
    PowerSpeedArchNeg,
    PowerSpeedGarch,
}

const FAMILY_TAGS: [(Family, &str); 19] = [
    (Family::SpeedIntercept, "speed_intercept"),
    (Family::SpeedAr, "speed_ar"),
    (Family::SpeedMa, "speed_ma"),
    (Family::PowerIntercept, "power_intercept"),
    (Family::PowerAr, "power_ar"),
    (Family::PowerSpeed, "power_speed"),
    (Family::PowerMa, "power_ma"),
    (Family::PowerSpeedMa, "power_speed_ma"),
    (Family::SpeedVolIntercept, "speed_vol_intercept"),
    (Family::SpeedArchPos, "speed_arch_pos"),
    (Family::SpeedArchNeg, "speed_arch_neg"),
    (Family::SpeedGarch, "speed_garch"),
    (Family::PowerVolIntercept, "power_vol_intercept"),
    (Family::PowerArchPos, "power_arch_pos"),
    (Family::PowerArchNeg, "power_arch_neg"),
    (Family::PowerGarch, "power_garch"),
    (Family::PowerSpeedArchPos, "power_speed_arch_pos"),
    (Family::PowerSpeedArchNeg, "power_speed_arch_neg"),
    (Family::PowerSpeedGarch, "power_speed_garch"),
];

impl Family {
    pub fn tag(self) -> &'static str {
        FAMILY_TAGS.iter().find(|(f, _)| *f == self).map(|(_, s)| *s).unwrap()
    }

    pub fn equation(self) -> Equation {
        use Family::*;
        match self {
            SpeedIntercept | SpeedAr | SpeedMa => Equation::SpeedMean,
            PowerIntercept | PowerAr | PowerSpeed | PowerMa | PowerSpeedMa => Equation::PowerMean,
            SpeedVolIntercept | SpeedArchPos | SpeedArchNeg | SpeedGarch => Equation::SpeedVol,
            _ => Equation::PowerVol,
        }
    }

    pub fn is_intercept(self) -> bool {
        matches!(
            self,
            Family::SpeedIntercept
                | Family::PowerIntercept
                | Family::SpeedVolIntercept
                | Family::PowerVolIntercept
        )
    }

    /// Whether the regressor reads residual or volatility proxies, which
    /// change between estimation iterations.
    pub fn uses_proxy(self) -> bool {
        use Family::*;
        !matches!(
            self,
            SpeedIntercept | SpeedAr | PowerIntercept | PowerAr | PowerSpeed
                | SpeedVolIntercept | PowerVolIntercept
        )
    }

    /// Raw regressor (before basis expansion) for source series `j`, lag `k`.
    #[inline]
    fn raw<S: RegressorSource + ?Sized>(self, src: &S, j: usize, t: usize, k: usize, c: f64) -> f64 {
        use Family::*;
        let s = t - k;
        match self {
            SpeedIntercept | PowerIntercept | SpeedVolIntercept | PowerVolIntercept => 1.0,
            SpeedAr | PowerSpeed => threshold_regressor(src.speed(j, s), c),
            PowerAr => threshold_regressor(src.power(j, s), c),
            SpeedMa | PowerSpeedMa => src.speed_resid(j, s),
            PowerMa => src.power_resid(j, s),
            SpeedArchPos => src.speed_resid(j, s).max(0.0),
            SpeedArchNeg => (-src.speed_resid(j, s)).max(0.0),
            SpeedGarch => src.speed_vol(j, s),
            PowerArchPos => src.power_resid(j, s).max(0.0).cbrt(),
            PowerArchNeg => (-src.power_resid(j, s)).max(0.0).cbrt(),
            PowerGarch => src.power_vol(j, s),
            PowerSpeedArchPos => src.speed_resid(j, s).max(0.0).cbrt(),
            PowerSpeedArchNeg => (-src.speed_resid(j, s)).max(0.0).cbrt(),
            PowerSpeedGarch => src.speed_vol(j, s).cbrt(),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FAMILY_TAGS
            .iter()
            .find(|(_, tag)| *tag == s)
            .map(|(f, _)| *f)
            .ok_or_else(|| Error::Parameter(format!("unknown coefficient family `{s}`")))
    }
}

/// Read access to every series a regressor can depend on, indexed by
/// turbine and absolute row.
pub trait RegressorSource {
    fn speed(&self, j: usize, t: usize) -> f64;
    fn power(&self, j: usize, t: usize) -> f64;
    fn speed_resid(&self, j: usize, t: usize) -> f64;
    fn power_resid(&self, j: usize, t: usize) -> f64;
    /// Speed volatility proxy `sigma`.
    fn speed_vol(&self, j: usize, t: usize) -> f64;
    /// Power volatility proxy on the cube-root scale.
    fn power_vol(&self, j: usize, t: usize) -> f64;
    /// Cumulative interaction basis used by the mean equations.
    fn mean_basis(&self, l: usize, t: usize) -> f64;
    /// Plain interaction basis used by the volatility equations.
    fn var_basis(&self, l: usize, t: usize) -> f64;
}

/// Identity of one design column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnMeta {
    pub family: Family,
    /// Source turbine `j` of the regressor (the equation's own turbine for intercepts).
    pub source: usize,
    pub lag: usize,
    /// `-inf` for the linear term.
    pub threshold: f64,
    /// Basis column multiplying the regressor, for time-varying coefficients.
    pub basis: Option<usize>,
}

impl ColumnMeta {
    pub fn is_time_varying(&self) -> bool {
        self.basis.is_some()
    }

    /// Regressor value at row `t`.
    #[inline]
    pub fn value<S: RegressorSource + ?Sized>(&self, src: &S, t: usize) -> f64 {
        let raw = self.family.raw(src, self.source, t, self.lag, self.threshold);
        match self.basis {
            None => raw,
            Some(l) => {
                let b = if self.family.equation().is_mean() {
                    src.mean_basis(l, t)
                } else {
                    src.var_basis(l, t)
                };
                raw * b
            }
        }
    }

    /// Identity key for equality checks that treats thresholds bitwise.
    pub fn key(&self) -> (Family, usize, usize, u64, Option<usize>) {
        (self.family, self.source, self.lag, self.threshold.to_bits(), self.basis)
    }
}
