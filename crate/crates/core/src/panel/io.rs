use super::{TurbinePanel, DEFAULT_POWER_RANGE, STEP_SECONDS};
use crate::error::{Error, Result};
use chrono::{DateTime, NaiveDateTime};
use std::path::Path;

/// Column mapping for panel CSV files.
///
/// Each turbine `<label>` contributes a `<label>_speed` and a `<label>_power`
/// column. With `turbines = None` the labels are inferred from the header.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelSchema {
    pub timestamp_column: String,
    pub turbines: Option<Vec<String>>,
    pub power_range: (f64, f64),
}

impl Default for PanelSchema {
    fn default() -> Self {
        Self {
            timestamp_column: "timestamp".into(),
            turbines: None,
            power_range: DEFAULT_POWER_RANGE,
        }
    }
}

impl PanelSchema {
    fn resolve(&self, header: &csv::StringRecord) -> Result<(usize, Vec<(String, usize, usize)>)> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let ts_col = find(&self.timestamp_column).ok_or_else(|| {
            Error::Schema(format!("missing timestamp column `{}`", self.timestamp_column))
        })?;
        let labels: Vec<String> = match &self.turbines {
            Some(l) => l.clone(),
            None => header
                .iter()
                .filter_map(|h| h.trim().strip_suffix("_speed").map(str::to_string))
                .collect(),
        };
        if labels.is_empty() {
            return Err(Error::Schema("no `<label>_speed` columns found".into()));
        }
        let mut cols = Vec::with_capacity(labels.len());
        for l in labels {
            let s = find(&format!("{l}_speed"))
                .ok_or_else(|| Error::Schema(format!("missing column `{l}_speed`")))?;
            let p = find(&format!("{l}_power"))
                .ok_or_else(|| Error::Schema(format!("missing column `{l}_power`")))?;
            cols.push((l, s, p));
        }
        Ok((ts_col, cols))
    }
}

/// Parses ISO-8601 (with or without offset, naive read as UTC) or integer epoch seconds.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|dt| dt.and_utc().timestamp())
}

/// Reads a panel CSV.
///
/// Rows are sorted by timestamp (with a warning when the file was out of
/// order). Timestamp gaps that are whole multiples of 600 s become fully
/// missing rows; any other spacing is a schema error.
pub fn load_panel(path: impl AsRef<Path>, schema: &PanelSchema) -> Result<TurbinePanel> {
    let file = std::fs::File::open(path.as_ref())?;
    read_panel(file, schema)
}

pub(crate) fn read_panel<R: std::io::Read>(input: R, schema: &PanelSchema) -> Result<TurbinePanel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    let (ts_col, cols) = schema.resolve(&header)?;
    let d = cols.len();

    let mut rows: Vec<(i64, Vec<f64>)> = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2;
        let rec = rec?;
        let field = |c: usize| -> Result<&str> {
            rec.get(c).ok_or_else(|| Error::Parse {
                row: line,
                message: format!("expected at least {} fields", c + 1),
            })
        };
        let raw_ts = field(ts_col)?;
        let ts = parse_timestamp(raw_ts).ok_or_else(|| Error::Parse {
            row: line,
            message: format!("bad timestamp `{raw_ts}`"),
        })?;
        let mut values = Vec::with_capacity(2 * d);
        for (label, s, p) in &cols {
            for (c, kind) in [(*s, "speed"), (*p, "power")] {
                let cell = field(c)?.trim();
                let v = if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                    f64::NAN
                } else {
                    cell.parse::<f64>().map_err(|_| Error::Parse {
                        row: line,
                        message: format!("bad {kind} value `{cell}` for turbine {label}"),
                    })?
                };
                values.push(v);
            }
        }
        rows.push((ts, values));
    }
    if rows.is_empty() {
        return Err(Error::Schema("panel file has no data rows".into()));
    }
    if rows.windows(2).any(|w| w[1].0 < w[0].0) {
        log::warn!("timestamps out of order; rows re-sorted");
        rows.sort_by_key(|r| r.0);
    }
    if let Some(w) = rows.windows(2).find(|w| w[1].0 == w[0].0) {
        return Err(Error::Schema(format!("duplicate timestamp {}", w[0].0)));
    }

    let start = rows[0].0;
    let end = rows[rows.len() - 1].0;
    for w in rows.windows(2) {
        let gap = w[1].0 - w[0].0;
        if gap % STEP_SECONDS != 0 {
            return Err(Error::Schema(format!(
                "sampling step {gap} s at timestamp {} is not a multiple of {STEP_SECONDS} s",
                w[0].0
            )));
        }
    }
    let n = ((end - start) / STEP_SECONDS) as usize + 1;
    if n > rows.len() {
        log::warn!("{} timestamps absent; inserted as missing rows", n - rows.len());
    }
    let timestamps: Vec<i64> = (0..n as i64).map(|k| start + k * STEP_SECONDS).collect();
    let mut speed = vec![vec![f64::NAN; n]; d];
    let mut power = vec![vec![f64::NAN; n]; d];
    for (ts, values) in rows {
        let t = ((ts - start) / STEP_SECONDS) as usize;
        for i in 0..d {
            speed[i][t] = values[2 * i];
            power[i][t] = values[2 * i + 1];
        }
    }
    let labels = cols.into_iter().map(|(l, _, _)| l).collect();
    Ok(TurbinePanel::new(timestamps, labels, speed, power)?.with_power_range(schema.power_range))
}
