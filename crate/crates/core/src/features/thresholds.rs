use super::Family;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Deciles `0.1, ..., 0.9` by linear interpolation between order statistics
/// (type 7), sorted and deduplicated.
pub fn compute_thresholds(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 10 {
        return Err(Error::InsufficientHistory { required: 10, available: series.len() });
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("threshold input".into()));
    }
    let mut sorted = series.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let mut out: Vec<f64> = (1..=9)
        .map(|q| {
            let h = (n - 1) as f64 * q as f64 / 10.0;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        })
        .collect();
    out.dedup();
    if out.len() < 9 {
        log::warn!("deciles collapse to {} distinct threshold(s)", out.len());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ThresholdPolicy {
    /// In-sample deciles of each thresholded series.
    #[default]
    Deciles,
    /// The same user-supplied values for every turbine.
    Fixed { speed: Vec<f64>, power: Vec<f64> },
    /// Linear terms only.
    None,
}

/// Finite thresholds per turbine; the linear term (`-inf`) is implicit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThresholdSet {
    pub speed: Vec<Vec<f64>>,
    pub power: Vec<Vec<f64>>,
}

impl ThresholdSet {
    pub fn none(d: usize) -> Self {
        Self { speed: vec![Vec::new(); d], power: vec![Vec::new(); d] }
    }

    /// Thresholds for `speed[i]` / `power[i]`, each a series over the estimation sample.
    pub fn from_policy(policy: &ThresholdPolicy, speed: &[&[f64]], power: &[&[f64]]) -> Result<Self> {
        let d = speed.len();
        Ok(match policy {
            ThresholdPolicy::None => Self::none(d),
            ThresholdPolicy::Fixed { speed: s, power: p } => {
                let clean = |v: &Vec<f64>| -> Result<Vec<f64>> {
                    let mut v = v.clone();
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Config("fixed thresholds must be finite".into()));
                    }
                    v.sort_unstable_by(f64::total_cmp);
                    v.dedup();
                    Ok(v)
                };
                Self { speed: vec![clean(s)?; d], power: vec![clean(p)?; d] }
            }
            ThresholdPolicy::Deciles => Self {
                speed: speed.iter().map(|s| compute_thresholds(s)).collect::<Result<_>>()?,
                power: power.iter().map(|s| compute_thresholds(s)).collect::<Result<_>>()?,
            },
        })
    }

    /// Finite thresholds applied to the regressor of `family` with source `j`.
    pub fn for_family(&self, family: Family, j: usize) -> &[f64] {
        match family {
            Family::SpeedAr | Family::PowerSpeed => &self.speed[j],
            Family::PowerAr => &self.power[j],
            _ => &[],
        }
    }
}
