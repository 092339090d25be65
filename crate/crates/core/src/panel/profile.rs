use super::{TurbinePanel, DIURNAL_STEPS};
use crate::error::{Error, Result};
use chrono::{DateTime, Datelike};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    Speed,
    Power,
}

impl Variable {
    pub fn as_str(self) -> &'static str {
        match self {
            Variable::Speed => "speed",
            Variable::Power => "power",
        }
    }
}

/// Calendar range `[start, end)` of (month, day) pairs; wraps over new year when `end <= start`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Season {
    pub name: String,
    pub start: (u32, u32),
    pub end: (u32, u32),
}

impl Season {
    fn contains(&self, md: (u32, u32)) -> bool {
        if self.start < self.end {
            md >= self.start && md < self.end
        } else {
            md >= self.start || md < self.end
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeasonPartition {
    pub seasons: Vec<Season>,
}

impl Default for SeasonPartition {
    /// Meteorological seasons.
    fn default() -> Self {
        let s = |name: &str, start, end| Season { name: name.into(), start, end };
        Self {
            seasons: vec![
                s("winter", (12, 1), (3, 1)),
                s("spring", (3, 1), (6, 1)),
                s("summer", (6, 1), (9, 1)),
                s("autumn", (9, 1), (12, 1)),
            ],
        }
    }
}

impl SeasonPartition {
    pub fn season_of(&self, ts: i64) -> Option<usize> {
        let dt = DateTime::from_timestamp(ts, 0)?;
        let md = (dt.month(), dt.day());
        self.seasons.iter().position(|s| s.contains(md))
    }
}

/// Daily mean curves: `means[season][variable][turbine][tod]`, variable 0 = speed, 1 = power.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalProfile {
    pub seasons: Vec<String>,
    pub labels: Vec<String>,
    pub means: Vec<[Vec<Vec<f64>>; 2]>,
}

impl SeasonalProfile {
    pub fn curve(&self, season: usize, variable: Variable, turbine: usize) -> &[f64] {
        let v = match variable {
            Variable::Speed => 0,
            Variable::Power => 1,
        };
        &self.means[season][v][turbine]
    }

    /// Rows `(season, tod, turbine, variable, mean)` in a fixed order.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["season", "tod", "turbine", "variable", "mean"])?;
        for (s, name) in self.seasons.iter().enumerate() {
            for tod in 0..DIURNAL_STEPS {
                for (i, label) in self.labels.iter().enumerate() {
                    for var in [Variable::Speed, Variable::Power] {
                        let m = self.curve(s, var, i)[tod];
                        w.write_record([
                            name.clone(),
                            tod.to_string(),
                            label.clone(),
                            var.as_str().to_string(),
                            m.to_string(),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-season mean of each series at each time of day, over observed cells.
pub fn seasonal_mean_profile(panel: &TurbinePanel, partition: &SeasonPartition) -> Result<SeasonalProfile> {
    let ns = partition.seasons.len();
    let d = panel.d();
    if panel.n() < 52_560 {
        log::warn!("panel shorter than one year; some season buckets may be thin");
    }
    let cal = panel.calendar();
    let season: Vec<Option<usize>> = panel.timestamps().iter().map(|&t| partition.season_of(t)).collect();
    let mut means = Vec::with_capacity(ns);
    for s in 0..ns {
        let mut pair: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
        for (v, slot) in pair.iter_mut().enumerate() {
            for i in 0..d {
                let (values, missing) = if v == 0 {
                    (panel.speed(i), panel.speed_missing(i))
                } else {
                    (panel.power(i), panel.power_missing(i))
                };
                let mut sum = vec![0.0; DIURNAL_STEPS];
                let mut count = vec![0usize; DIURNAL_STEPS];
                for t in 0..panel.n() {
                    if season[t] == Some(s) && !missing[t] {
                        let tod = cal.time_of_day[t] as usize;
                        sum[tod] += values[t];
                        count[tod] += 1;
                    }
                }
                if let Some(tod) = count.iter().position(|&c| c == 0) {
                    return Err(Error::EmptySeason(format!(
                        "{} (time of day {tod})",
                        partition.seasons[s].name
                    )));
                }
                slot.push(sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect());
            }
        }
        means.push(pair);
    }
    Ok(SeasonalProfile {
        seasons: partition.seasons.iter().map(|s| s.name.clone()).collect(),
        labels: panel.labels().to_vec(),
        means,
    })
}
