//! Plain-text model files.
//!
//! ```text
//! windlasso-model v1
//! [meta]
//! config <json>
//! labels <json>
//! trim <rows>
//! sample <first timestamp> <last timestamp>
//! level <turbine> <speed vol level> <power vol level>
//! [thresholds]
//! speed <turbine> <values...>
//! power <turbine> <values...>
//! [equations]
//! equation <eq> <turbine> <floor> <lambda> <bic> <candidates> <converged> <kkt> <skipped>
//! term <family> <source> <lag> <threshold> <basis|-> <coef>
//! [history]
//! row <timestamp> then per turbine: speed power speed_resid power_resid speed_vol power_vol
//! [pool]
//! z <speed z per turbine> <power z per turbine>
//! end
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a written
//! model reproduces it exactly.

use super::{EquationFit, FittedJointModel, History, ModelConfig, ResidualPool, Term, TurbineFit};
use crate::error::{Error, Result};
use crate::features::{ColumnMeta, Equation, Family, ThresholdSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

pub const MODEL_HEADER: &str = "windlasso-model v1";

fn join(v: &[f64]) -> String {
    let mut s = String::new();
    for (k, x) in v.iter().enumerate() {
        if k > 0 {
            s.push(' ');
        }
        write!(s, "{x}").unwrap();
    }
    s
}

pub fn write_model<W: Write>(model: &FittedJointModel, mut out: W) -> Result<()> {
    let d = model.d();
    let json = |e: serde_json::Error| Error::Model(e.to_string());
    writeln!(out, "{MODEL_HEADER}")?;
    writeln!(out, "[meta]")?;
    writeln!(out, "config {}", serde_json::to_string(&model.config).map_err(json)?)?;
    writeln!(out, "labels {}", serde_json::to_string(&model.labels).map_err(json)?)?;
    writeln!(out, "trim {}", model.trim)?;
    writeln!(out, "sample {} {}", model.sample_start, model.sample_end)?;
    for (i, (s, p)) in model.vol_levels.iter().enumerate() {
        writeln!(out, "level {i} {s} {p}")?;
    }
    writeln!(out, "[thresholds]")?;
    for i in 0..d {
        writeln!(out, "speed {i} {}", join(&model.thresholds.speed[i]))?;
        writeln!(out, "power {i} {}", join(&model.thresholds.power[i]))?;
    }
    writeln!(out, "[equations]")?;
    for tf in &model.turbines {
        for eq in Equation::ALL {
            let f = tf.get(eq);
            writeln!(
                out,
                "equation {} {} {} {} {} {} {} {} {}",
                eq.tag(),
                f.turbine,
                f.floor,
                f.lambda,
                f.bic,
                f.n_candidates,
                f.converged,
                f.kkt_residual,
                f.skipped
            )?;
            for t in &f.terms {
                let basis = t.meta.basis.map_or("-".to_string(), |b| b.to_string());
                writeln!(
                    out,
                    "term {} {} {} {} {} {}",
                    t.meta.family.tag(),
                    t.meta.source,
                    t.meta.lag,
                    t.meta.threshold,
                    basis,
                    t.coef
                )?;
            }
        }
    }
    writeln!(out, "[history]")?;
    let h = &model.history;
    for r in 0..h.len() {
        let mut line = format!("row {}", h.timestamps[r]);
        for i in 0..d {
            for v in [
                h.speed[i][r],
                h.power[i][r],
                h.speed_resid[i][r],
                h.power_resid[i][r],
                h.speed_vol[i][r],
                h.power_vol[i][r],
            ] {
                write!(line, " {v}").unwrap();
            }
        }
        writeln!(out, "{line}")?;
    }
    writeln!(out, "[pool]")?;
    for (s, p) in model.pool.speed.iter().zip(&model.pool.power) {
        writeln!(out, "z {} {}", join(s), join(p))?;
    }
    writeln!(out, "end")?;
    out.flush()?;
    Ok(())
}

struct Cursor<'a> {
    line: usize,
    fields: std::str::SplitWhitespace<'a>,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::ModelFormat { line: self.line, message: message.into() }
    }

    fn next<T: FromStr>(&mut self, what: &str) -> Result<T> {
        let tok = self.fields.next().ok_or_else(|| self.err(format!("missing {what}")))?;
        tok.parse().map_err(|_| self.err(format!("bad {what} `{tok}`")))
    }

    fn rest_f64(&mut self) -> Result<Vec<f64>> {
        let line = self.line;
        self.fields
            .by_ref()
            .map(|tok| tok.parse::<f64>().map_err(|_| Error::ModelFormat { line, message: format!("bad number `{tok}`") }))
            .collect()
    }

    fn done(&mut self) -> Result<()> {
        match self.fields.next() {
            None => Ok(()),
            Some(tok) => Err(self.err(format!("unexpected `{tok}`"))),
        }
    }
}

pub fn read_model<R: BufRead>(input: R) -> Result<FittedJointModel> {
    let mut lines = input.lines().enumerate();
    let fmt = |line: usize, m: &str| Error::ModelFormat { line, message: m.to_string() };
    match lines.next() {
        Some((_, Ok(h))) if h.trim_end() == MODEL_HEADER => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => return Err(fmt(1, "missing `windlasso-model v1` header")),
    }
    let mut section = String::new();
    let mut config: Option<ModelConfig> = None;
    let mut labels: Option<Vec<String>> = None;
    let mut trim = None;
    let mut sample = None;
    let mut levels = Vec::new();
    let mut th_speed = Vec::new();
    let mut th_power = Vec::new();
    let mut fits: Vec<EquationFit> = Vec::new();
    let mut rows: Vec<(i64, Vec<f64>)> = Vec::new();
    let mut pool: Vec<Vec<f64>> = Vec::new();
    let mut ended = false;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if ended {
            return Err(fmt(line_no, "content after `end`"));
        }
        if text.starts_with('[') {
            section = text.to_string();
            continue;
        }
        if text == "end" {
            ended = true;
            continue;
        }
        let (key, rest) = text.split_once(' ').unwrap_or((text, ""));
        let mut cur = Cursor { line: line_no, fields: rest.split_whitespace() };
        match (section.as_str(), key) {
            ("[meta]", "config") => {
                config = Some(serde_json::from_str(rest).map_err(|e| fmt(line_no, &e.to_string()))?)
            }
            ("[meta]", "labels") => {
                labels = Some(serde_json::from_str(rest).map_err(|e| fmt(line_no, &e.to_string()))?)
            }
            ("[meta]", "trim") => {
                trim = Some(cur.next::<usize>("trim")?);
                cur.done()?;
            }
            ("[meta]", "sample") => {
                sample = Some((cur.next::<i64>("start")?, cur.next::<i64>("end")?));
                cur.done()?;
            }
            ("[meta]", "level") => {
                let i: usize = cur.next("turbine")?;
                if i != levels.len() {
                    return Err(cur.err("levels out of order"));
                }
                levels.push((cur.next("speed level")?, cur.next("power level")?));
                cur.done()?;
            }
            ("[thresholds]", "speed" | "power") => {
                let i: usize = cur.next("turbine")?;
                let target = if key == "speed" { &mut th_speed } else { &mut th_power };
                if i != target.len() {
                    return Err(cur.err("thresholds out of order"));
                }
                target.push(cur.rest_f64()?);
            }
            ("[equations]", "equation") => {
                let tag: String = cur.next("equation")?;
                let eq = Equation::ALL
                    .into_iter()
                    .find(|e| e.tag() == tag)
                    .ok_or_else(|| cur.err(format!("unknown equation `{tag}`")))?;
                let fit = EquationFit {
                    equation: eq,
                    turbine: cur.next("turbine")?,
                    terms: Vec::new(),
                    floor: cur.next("floor")?,
                    lambda: cur.next("lambda")?,
                    bic: cur.next("bic")?,
                    n_candidates: cur.next("candidates")?,
                    converged: cur.next("converged")?,
                    kkt_residual: cur.next("kkt")?,
                    skipped: cur.next("skipped")?,
                };
                cur.done()?;
                fits.push(fit);
            }
            ("[equations]", "term") => {
                let family: Family = cur.next::<String>("family")?.parse().map_err(|e: Error| cur.err(e.to_string()))?;
                let source = cur.next("source")?;
                let lag = cur.next("lag")?;
                let threshold = cur.next("threshold")?;
                let basis_tok: String = cur.next("basis")?;
                let basis = if basis_tok == "-" {
                    None
                } else {
                    Some(basis_tok.parse().map_err(|_| cur.err(format!("bad basis `{basis_tok}`")))?)
                };
                let coef = cur.next("coefficient")?;
                cur.done()?;
                let fit = fits.last_mut().ok_or_else(|| cur.err("term before equation"))?;
                if family.equation() != fit.equation {
                    return Err(cur.err(format!("{family} term in {} block", fit.equation)));
                }
                fit.terms.push(Term { meta: ColumnMeta { family, source, lag, threshold, basis }, coef });
            }
            ("[history]", "row") => {
                let ts = cur.next("timestamp")?;
                rows.push((ts, cur.rest_f64()?));
            }
            ("[pool]", "z") => pool.push(cur.rest_f64()?),
            _ => return Err(fmt(line_no, &format!("unexpected `{key}` in section {section}"))),
        }
    }
    if !ended {
        return Err(fmt(0, "truncated model file (no `end`)"));
    }
    let config = config.ok_or_else(|| fmt(0, "missing config"))?;
    let labels = labels.ok_or_else(|| fmt(0, "missing labels"))?;
    let d = labels.len();
    let trim = trim.ok_or_else(|| fmt(0, "missing trim"))?;
    let (sample_start, sample_end) = sample.ok_or_else(|| fmt(0, "missing sample"))?;
    if levels.len() != d || th_speed.len() != d || th_power.len() != d || fits.len() != 4 * d {
        return Err(fmt(0, "section sizes do not match the turbine count"));
    }
    let mut turbines = Vec::with_capacity(d);
    let mut it = fits.into_iter();
    for i in 0..d {
        let mut next = |eq: Equation| -> Result<EquationFit> {
            let f = it.next().unwrap();
            if f.equation != eq || f.turbine != i {
                return Err(fmt(0, &format!("expected {eq} for turbine {i}")));
            }
            Ok(f)
        };
        turbines.push(TurbineFit {
            speed_mean: next(Equation::SpeedMean)?,
            power_mean: next(Equation::PowerMean)?,
            speed_vol: next(Equation::SpeedVol)?,
            power_vol: next(Equation::PowerVol)?,
        });
    }
    let mut history = History {
        timestamps: Vec::with_capacity(rows.len()),
        speed: vec![Vec::new(); d],
        power: vec![Vec::new(); d],
        speed_resid: vec![Vec::new(); d],
        power_resid: vec![Vec::new(); d],
        speed_vol: vec![Vec::new(); d],
        power_vol: vec![Vec::new(); d],
    };
    for (ts, vals) in rows {
        if vals.len() != 6 * d {
            return Err(fmt(0, "history row has the wrong width"));
        }
        history.timestamps.push(ts);
        for i in 0..d {
            let v = &vals[6 * i..6 * i + 6];
            history.speed[i].push(v[0]);
            history.power[i].push(v[1]);
            history.speed_resid[i].push(v[2]);
            history.power_resid[i].push(v[3]);
            history.speed_vol[i].push(v[4]);
            history.power_vol[i].push(v[5]);
        }
    }
    let mut res = ResidualPool::default();
    for row in pool {
        if row.len() != 2 * d {
            return Err(fmt(0, "pool row has the wrong width"));
        }
        res.speed.push(row[..d].to_vec());
        res.power.push(row[d..].to_vec());
    }
    Ok(FittedJointModel {
        config,
        labels,
        thresholds: ThresholdSet { speed: th_speed, power: th_power },
        trim,
        turbines,
        history,
        pool: res,
        vol_levels: levels,
        sample_start,
        sample_end,
        in_sample: None,
    })
}

impl FittedJointModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        write_model(self, std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        read_model(std::io::BufReader::new(f))
    }
}
