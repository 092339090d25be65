use super::Family;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Lag configuration of one coefficient family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FamilySpec {
    /// Lags with the equation's own turbine as source (`j = i`).
    pub own: Vec<usize>,
    /// Lags for every other turbine (`j != i`).
    pub cross: Vec<usize>,
    /// Lags whose regressor is expanded over the threshold set.
    pub threshold_lags: Vec<usize>,
    /// Own-source lags with time-varying coefficients.
    pub varying_own: Vec<usize>,
    /// Cross-source lags with time-varying coefficients.
    pub varying_cross: Vec<usize>,
}

fn range(lo: usize, hi: usize) -> Vec<usize> {
    (lo..=hi).collect()
}

fn long(lo: usize) -> Vec<usize> {
    let mut v = range(lo, 40);
    v.extend(140..=150);
    v
}

impl FamilySpec {
    pub fn new(own: Vec<usize>, cross: Vec<usize>) -> Self {
        Self { own, cross, ..Self::default() }
    }

    pub fn with_thresholds(mut self, lags: Vec<usize>) -> Self {
        self.threshold_lags = lags;
        self
    }

    pub fn with_varying(mut self, own: Vec<usize>, cross: Vec<usize>) -> Self {
        self.varying_own = own;
        self.varying_cross = cross;
        self
    }

    pub fn lags(&self, own: bool) -> &[usize] {
        if own {
            &self.own
        } else {
            &self.cross
        }
    }

    pub fn is_varying(&self, own: bool, lag: usize) -> bool {
        if own {
            self.varying_own.contains(&lag)
        } else {
            self.varying_cross.contains(&lag)
        }
    }

    pub fn max_lag(&self) -> usize {
        self.own.iter().chain(&self.cross).copied().max().unwrap_or(0)
    }

    fn normalize(&mut self) {
        for v in [
            &mut self.own,
            &mut self.cross,
            &mut self.threshold_lags,
            &mut self.varying_own,
            &mut self.varying_cross,
        ] {
            v.sort_unstable();
            v.dedup();
        }
    }

    fn truncate(&mut self, max_lag: usize) {
        for v in [
            &mut self.own,
            &mut self.cross,
            &mut self.threshold_lags,
            &mut self.varying_own,
            &mut self.varying_cross,
        ] {
            v.retain(|&k| k <= max_lag);
        }
    }
}

/// Lag sets for every family of the four equations.
///
/// The default reproduces the full specification: long own-lag sets
/// `1..=40, 140..=150` (`0..=40, 140..=150` for contemporaneous speed in the
/// power mean), short sets `1..=6` (`0..=6` where a contemporaneous term is
/// allowed), thresholds on lags 1 and 2 (plus lag 0 for speed in the power
/// mean), and time-varying coefficients on lags 1 and 2 (plus lag 0 where
/// present).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexSets {
    pub varying_intercept: bool,
    pub speed_ar: FamilySpec,
    pub speed_ma: FamilySpec,
    pub power_ar: FamilySpec,
    pub power_speed: FamilySpec,
    pub power_ma: FamilySpec,
    pub power_speed_ma: FamilySpec,
    pub speed_arch: FamilySpec,
    pub speed_garch: FamilySpec,
    pub power_arch: FamilySpec,
    pub power_garch: FamilySpec,
    pub power_speed_arch: FamilySpec,
    pub power_speed_garch: FamilySpec,
}

impl Default for IndexSets {
    fn default() -> Self {
        let short = || range(1, 6);
        let short0 = || range(0, 6);
        let tv = || vec![1, 2];
        let tv0 = || vec![0, 1, 2];
        Self {
            varying_intercept: true,
            speed_ar: FamilySpec::new(long(1), short())
                .with_thresholds(vec![1, 2])
                .with_varying(tv(), tv()),
            speed_ma: FamilySpec::new(short(), short()).with_varying(tv(), vec![]),
            power_ar: FamilySpec::new(long(1), short())
                .with_thresholds(vec![1, 2])
                .with_varying(tv(), tv()),
            power_speed: FamilySpec::new(long(0), short0())
                .with_thresholds(tv0())
                .with_varying(tv0(), tv0()),
            power_ma: FamilySpec::new(short(), short()).with_varying(tv(), tv()),
            power_speed_ma: FamilySpec::new(short0(), short0()).with_varying(tv0(), tv0()),
            speed_arch: FamilySpec::new(long(1), short()).with_varying(tv(), tv()),
            speed_garch: FamilySpec::new(short(), short()).with_varying(tv(), tv()),
            power_arch: FamilySpec::new(long(1), short()).with_varying(tv(), tv()),
            power_garch: FamilySpec::new(short(), short()).with_varying(tv(), tv()),
            power_speed_arch: FamilySpec::new(long(1), short()).with_varying(tv(), tv()),
            power_speed_garch: FamilySpec::new(short(), short()).with_varying(tv(), tv()),
        }
    }
}

impl IndexSets {
    /// No lags at all: every equation is intercept-only.
    pub fn empty() -> Self {
        Self {
            varying_intercept: false,
            speed_ar: FamilySpec::default(),
            speed_ma: FamilySpec::default(),
            power_ar: FamilySpec::default(),
            power_speed: FamilySpec::default(),
            power_ma: FamilySpec::default(),
            power_speed_ma: FamilySpec::default(),
            speed_arch: FamilySpec::default(),
            speed_garch: FamilySpec::default(),
            power_arch: FamilySpec::default(),
            power_garch: FamilySpec::default(),
            power_speed_arch: FamilySpec::default(),
            power_speed_garch: FamilySpec::default(),
        }
    }

    /// Drops all time variation, including the intercept's.
    pub fn constant_coefficients(mut self) -> Self {
        self.varying_intercept = false;
        for spec in self.specs_mut() {
            spec.varying_own.clear();
            spec.varying_cross.clear();
        }
        self
    }

    /// Removes every lag above `max_lag`.
    pub fn truncated(mut self, max_lag: usize) -> Self {
        for spec in self.specs_mut() {
            spec.truncate(max_lag);
        }
        self
    }

    /// Removes all threshold expansions.
    pub fn linear(mut self) -> Self {
        for spec in self.specs_mut() {
            spec.threshold_lags.clear();
        }
        self
    }

    pub fn spec(&self, family: Family) -> Option<&FamilySpec> {
        use Family::*;
        Some(match family {
            SpeedAr => &self.speed_ar,
            SpeedMa => &self.speed_ma,
            PowerAr => &self.power_ar,
            PowerSpeed => &self.power_speed,
            PowerMa => &self.power_ma,
            PowerSpeedMa => &self.power_speed_ma,
            SpeedArchPos | SpeedArchNeg => &self.speed_arch,
            SpeedGarch => &self.speed_garch,
            PowerArchPos | PowerArchNeg => &self.power_arch,
            PowerGarch => &self.power_garch,
            PowerSpeedArchPos | PowerSpeedArchNeg => &self.power_speed_arch,
            PowerSpeedGarch => &self.power_speed_garch,
            SpeedIntercept | PowerIntercept | SpeedVolIntercept | PowerVolIntercept => return None,
        })
    }

    fn specs_mut(&mut self) -> [&mut FamilySpec; 12] {
        [
            &mut self.speed_ar,
            &mut self.speed_ma,
            &mut self.power_ar,
            &mut self.power_speed,
            &mut self.power_ma,
            &mut self.power_speed_ma,
            &mut self.speed_arch,
            &mut self.speed_garch,
            &mut self.power_arch,
            &mut self.power_garch,
            &mut self.power_speed_arch,
            &mut self.power_speed_garch,
        ]
    }

    fn specs(&self) -> [(&'static str, &FamilySpec); 12] {
        [
            ("speed_ar", &self.speed_ar),
            ("speed_ma", &self.speed_ma),
            ("power_ar", &self.power_ar),
            ("power_speed", &self.power_speed),
            ("power_ma", &self.power_ma),
            ("power_speed_ma", &self.power_speed_ma),
            ("speed_arch", &self.speed_arch),
            ("speed_garch", &self.speed_garch),
            ("power_arch", &self.power_arch),
            ("power_garch", &self.power_garch),
            ("power_speed_arch", &self.power_speed_arch),
            ("power_speed_garch", &self.power_speed_garch),
        ]
    }

    /// Largest lag across all families; rows before it are trimmed.
    pub fn max_lag(&self) -> usize {
        self.specs().iter().map(|(_, s)| s.max_lag()).max().unwrap_or(0)
    }

    /// Sorts and dedups every list, then checks that only the contemporaneous
    /// power-mean families use lag 0.
    pub fn validate(&mut self) -> Result<()> {
        for spec in self.specs_mut() {
            spec.normalize();
        }
        for (name, spec) in self.specs() {
            let allows_zero = matches!(name, "power_speed" | "power_speed_ma");
            if !allows_zero && spec.own.iter().chain(&spec.cross).any(|&k| k == 0) {
                return Err(Error::Config(format!("lag 0 not allowed in `{name}`")));
            }
        }
        Ok(())
    }
}
