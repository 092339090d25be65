//! Turbine panel: aligned 10-minute wind speed and power series for a park.

mod io;
mod profile;
mod spectrum;

pub use io::{load_panel, parse_timestamp, PanelSchema};
pub use profile::{seasonal_mean_profile, Season, SeasonPartition, SeasonalProfile, Variable};
pub use spectrum::{smoothed_periodogram, Ordinate};

use crate::error::{Error, Result};
use std::ops::Range;

/// Sampling step of every panel, in seconds.
pub const STEP_SECONDS: i64 = 600;
/// Steps per day at 10-minute resolution.
pub const DIURNAL_STEPS: usize = 144;
/// Steps per year (365.24 days).
pub const ANNUAL_STEPS: f64 = 52_594.56;
/// Observed extremes of turbine power in kW.
pub const DEFAULT_POWER_RANGE: (f64, f64) = (-19.0, 1542.0);

/// Aligned multivariate panel of `d` turbines over `n` rows.
///
/// Series are stored column-major (one `Vec` per turbine). Missing cells hold
/// `NaN` and are flagged in the matching mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbinePanel {
    timestamps: Vec<i64>,
    labels: Vec<String>,
    speed: Vec<Vec<f64>>,
    power: Vec<Vec<f64>>,
    speed_missing: Vec<Vec<bool>>,
    power_missing: Vec<Vec<bool>>,
    power_range: (f64, f64),
}

impl TurbinePanel {
    /// Builds a panel; non-finite entries are treated as missing.
    pub fn new(
        timestamps: Vec<i64>,
        labels: Vec<String>,
        speed: Vec<Vec<f64>>,
        power: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = timestamps.len();
        let d = labels.len();
        if d == 0 {
            return Err(Error::Schema("panel needs at least one turbine".into()));
        }
        if speed.len() != d || power.len() != d {
            return Err(Error::Schema(format!(
                "{d} labels but {} speed and {} power series",
                speed.len(),
                power.len()
            )));
        }
        for s in speed.iter().chain(power.iter()) {
            if s.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: s.len() });
            }
        }
        for (row, w) in timestamps.windows(2).enumerate() {
            if w[1] - w[0] != STEP_SECONDS {
                return Err(Error::Schema(format!(
                    "non-constant sampling step {} s between rows {} and {}",
                    w[1] - w[0],
                    row,
                    row + 1
                )));
            }
        }
        let mask = |v: &Vec<Vec<f64>>| -> Vec<Vec<bool>> {
            v.iter().map(|s| s.iter().map(|x| !x.is_finite()).collect()).collect()
        };
        let speed_missing = mask(&speed);
        let power_missing = mask(&power);
        let speed = speed
            .into_iter()
            .map(|s| s.into_iter().map(|x| if x.is_finite() { x } else { f64::NAN }).collect())
            .collect();
        let power = power
            .into_iter()
            .map(|s| s.into_iter().map(|x| if x.is_finite() { x } else { f64::NAN }).collect())
            .collect();
        let panel = Self {
            timestamps,
            labels,
            speed,
            power,
            speed_missing,
            power_missing,
            power_range: DEFAULT_POWER_RANGE,
        };
        panel.warn_out_of_range();
        Ok(panel)
    }

    pub fn with_power_range(mut self, range: (f64, f64)) -> Self {
        self.power_range = range;
        self.warn_out_of_range();
        self
    }

    fn warn_out_of_range(&self) {
        let (lo, hi) = self.power_range;
        for (i, label) in self.labels.iter().enumerate() {
            let neg = self.speed[i].iter().filter(|&&w| w < 0.0).count();
            if neg > 0 {
                log::warn!("turbine {label}: {neg} negative wind speed readings");
            }
            let out = self.power[i].iter().filter(|&&p| p < lo || p > hi).count();
            if out > 0 {
                log::warn!("turbine {label}: {out} power readings outside [{lo}, {hi}] kW");
            }
        }
    }

    pub fn n(&self) -> usize {
        self.timestamps.len()
    }

    pub fn d(&self) -> usize {
        self.labels.len()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn speed(&self, turbine: usize) -> &[f64] {
        &self.speed[turbine]
    }

    pub fn power(&self, turbine: usize) -> &[f64] {
        &self.power[turbine]
    }

    pub fn speed_all(&self) -> &[Vec<f64>] {
        &self.speed
    }

    pub fn power_all(&self) -> &[Vec<f64>] {
        &self.power
    }

    pub fn speed_missing(&self, turbine: usize) -> &[bool] {
        &self.speed_missing[turbine]
    }

    pub fn power_missing(&self, turbine: usize) -> &[bool] {
        &self.power_missing[turbine]
    }

    pub fn power_range(&self) -> (f64, f64) {
        self.power_range
    }

    pub fn missing_count(&self) -> usize {
        self.speed_missing
            .iter()
            .chain(self.power_missing.iter())
            .map(|m| m.iter().filter(|&&x| x).count())
            .sum()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_count() == 0
    }

    /// Row holding timestamp `ts`, if inside the panel.
    pub fn row_of(&self, ts: i64) -> Option<usize> {
        let first = *self.timestamps.first()?;
        let offset = ts - first;
        if offset < 0 || offset % STEP_SECONDS != 0 {
            return None;
        }
        let row = (offset / STEP_SECONDS) as usize;
        (row < self.n()).then_some(row)
    }

    /// Sub-panel over a row range.
    pub fn slice(&self, rows: Range<usize>) -> Result<Self> {
        if rows.start >= rows.end || rows.end > self.n() {
            return Err(Error::Parameter(format!(
                "row range {rows:?} invalid for panel of {} rows",
                self.n()
            )));
        }
        let cut = |v: &Vec<Vec<f64>>| v.iter().map(|s| s[rows.clone()].to_vec()).collect();
        let cut_mask = |v: &Vec<Vec<bool>>| v.iter().map(|s| s[rows.clone()].to_vec()).collect();
        Ok(Self {
            timestamps: self.timestamps[rows.clone()].to_vec(),
            labels: self.labels.clone(),
            speed: cut(&self.speed),
            power: cut(&self.power),
            speed_missing: cut_mask(&self.speed_missing),
            power_missing: cut_mask(&self.power_missing),
            power_range: self.power_range,
        })
    }

    pub fn calendar(&self) -> CalendarIndex {
        CalendarIndex::from_timestamps(&self.timestamps)
    }

    /// Writes the panel as CSV with epoch-second timestamps; missing cells are empty.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["timestamp".to_string()];
        for l in &self.labels {
            header.push(format!("{l}_speed"));
            header.push(format!("{l}_power"));
        }
        w.write_record(&header)?;
        let cell = |x: f64| if x.is_finite() { format!("{x}") } else { String::new() };
        for t in 0..self.n() {
            let mut rec = vec![self.timestamps[t].to_string()];
            for i in 0..self.d() {
                rec.push(cell(self.speed[i][t]));
                rec.push(cell(self.power[i][t]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Linear interpolation of every missing run, per series.
///
/// Leading and trailing runs take the nearest observed value. Observed
/// entries are copied bit-exactly.
pub fn fill_gaps_linear(panel: &TurbinePanel) -> Result<TurbinePanel> {
    let mut out = panel.clone();
    for i in 0..panel.d() {
        let label = &panel.labels[i];
        fill_series(&mut out.speed[i], &panel.speed_missing[i])
            .ok_or_else(|| Error::UnrecoverableSeries(format!("{label}_speed")))?;
        fill_series(&mut out.power[i], &panel.power_missing[i])
            .ok_or_else(|| Error::UnrecoverableSeries(format!("{label}_power")))?;
        out.speed_missing[i].iter_mut().for_each(|m| *m = false);
        out.power_missing[i].iter_mut().for_each(|m| *m = false);
    }
    let longest = longest_missing_run(panel);
    if longest > 0 {
        log::info!(
            "filled {} missing cells, longest run {longest}",
            panel.missing_count()
        );
    }
    Ok(out)
}

fn fill_series(values: &mut [f64], missing: &[bool]) -> Option<()> {
    let observed: Vec<usize> = (0..values.len()).filter(|&t| !missing[t]).collect();
    let (&first, &last) = (observed.first()?, observed.last()?);
    let lead = values[first];
    values[..first].iter_mut().for_each(|v| *v = lead);
    let trail = values[last];
    values[last + 1..].iter_mut().for_each(|v| *v = trail);
    for w in observed.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < 2 {
            continue;
        }
        let (va, vb) = (values[a], values[b]);
        let span = (b - a) as f64;
        for t in a + 1..b {
            values[t] = va + (vb - va) * ((t - a) as f64 / span);
        }
    }
    Some(())
}

/// Length of the longest run of consecutive missing cells in any series.
pub fn longest_missing_run(panel: &TurbinePanel) -> usize {
    panel
        .speed_missing
        .iter()
        .chain(panel.power_missing.iter())
        .map(|m| {
            let mut best = 0;
            let mut cur = 0;
            for &x in m {
                cur = if x { cur + 1 } else { 0 };
                best = best.max(cur);
            }
            best
        })
        .max()
        .unwrap_or(0)
}

/// Calendar position of each row.
///
/// Time of day is anchored at UTC midnight of the data clock; time of year
/// counts 10-minute steps since the Unix epoch, wrapped at [`ANNUAL_STEPS`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalendarIndex {
    pub time_of_day: Vec<u16>,
    pub time_of_year: Vec<f64>,
}

impl CalendarIndex {
    pub fn from_timestamps(ts: &[i64]) -> Self {
        let (time_of_day, time_of_year) = ts.iter().map(|&t| calendar_position(t)).unzip();
        Self { time_of_day, time_of_year }
    }

    pub fn len(&self) -> usize {
        self.time_of_day.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_of_day.is_empty()
    }
}

/// (time of day in 0..144, time of year in [0, ANNUAL_STEPS)) for an epoch timestamp.
pub fn calendar_position(ts: i64) -> (u16, f64) {
    let tod = (ts.rem_euclid(86_400) / STEP_SECONDS) as u16;
    let toy = (ts as f64 / STEP_SECONDS as f64).rem_euclid(ANNUAL_STEPS);
    (tod, toy)
}
