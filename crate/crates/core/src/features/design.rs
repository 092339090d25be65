use super::{ColumnMeta, Equation, Family, IndexSets, RegressorSource, ThresholdSet};
use crate::basis::BasisSet;
use crate::error::{Error, Result};
use rayon::prelude::*;
use std::collections::HashMap;
use std::ops::Range;

/// Full-length series for every turbine, indexed `[turbine][row]`, plus the
/// two basis sets evaluated on the same rows.
#[derive(Debug, Clone, Copy)]
pub struct SeriesSource<'a> {
    pub speed: &'a [Vec<f64>],
    pub power: &'a [Vec<f64>],
    pub speed_resid: &'a [Vec<f64>],
    pub power_resid: &'a [Vec<f64>],
    pub speed_vol: &'a [Vec<f64>],
    pub power_vol: &'a [Vec<f64>],
    pub mean_basis: &'a BasisSet,
    pub var_basis: &'a BasisSet,
}

impl RegressorSource for SeriesSource<'_> {
    #[inline]
    fn speed(&self, j: usize, t: usize) -> f64 {
        self.speed[j][t]
    }
    #[inline]
    fn power(&self, j: usize, t: usize) -> f64 {
        self.power[j][t]
    }
    #[inline]
    fn speed_resid(&self, j: usize, t: usize) -> f64 {
        self.speed_resid[j][t]
    }
    #[inline]
    fn power_resid(&self, j: usize, t: usize) -> f64 {
        self.power_resid[j][t]
    }
    #[inline]
    fn speed_vol(&self, j: usize, t: usize) -> f64 {
        self.speed_vol[j][t]
    }
    #[inline]
    fn power_vol(&self, j: usize, t: usize) -> f64 {
        self.power_vol[j][t]
    }
    #[inline]
    fn mean_basis(&self, l: usize, t: usize) -> f64 {
        self.mean_basis.get(t, l)
    }
    #[inline]
    fn var_basis(&self, l: usize, t: usize) -> f64 {
        self.var_basis.get(t, l)
    }
}

impl SeriesSource<'_> {
    fn len(&self) -> usize {
        self.speed.first().map_or(0, Vec::len)
    }
}

/// Regressor matrix (column-major) with its response and column metadata.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub equation: Equation,
    pub turbine: usize,
    /// First source row; design row `r` corresponds to source row `row_start + r`.
    pub row_start: usize,
    pub meta: Vec<ColumnMeta>,
    pub response: Vec<f64>,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_cols(&self) -> usize {
        self.meta.len()
    }

    pub fn column(&self, c: usize) -> &[f64] {
        let m = self.n_rows();
        &self.data[c * m..(c + 1) * m]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_rows().max(1)).take(self.n_cols())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.n_rows() + r]
    }

    /// Removes columns that are bitwise copies of an earlier column and
    /// returns how many were dropped.
    pub fn drop_duplicate_columns(&mut self) -> usize {
        let m = self.n_rows();
        let mut seen: HashMap<u64, Vec<usize>> = HashMap::new();
        let mut keep = Vec::with_capacity(self.n_cols());
        for c in 0..self.n_cols() {
            let col = self.column(c);
            let h = col.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
                (h ^ v.to_bits()).wrapping_mul(0x0100_0000_01b3)
            });
            let bucket = seen.entry(h).or_default();
            if bucket.iter().any(|&k| self.column(k) == col) {
                continue;
            }
            bucket.push(c);
            keep.push(c);
        }
        let dropped = self.n_cols() - keep.len();
        if dropped > 0 {
            let mut data = Vec::with_capacity(keep.len() * m);
            for &c in &keep {
                data.extend_from_slice(self.column(c));
            }
            self.meta = keep.iter().map(|&c| self.meta[c]).collect();
            self.data = data;
        }
        dropped
    }

    /// `response - X b` on the design rows.
    pub fn residuals(&self, coefficients: &[f64]) -> Result<Vec<f64>> {
        if coefficients.len() != self.n_cols() {
            return Err(Error::LengthMismatch { expected: self.n_cols(), got: coefficients.len() });
        }
        let mut r = self.response.clone();
        for (c, &b) in coefficients.iter().enumerate() {
            if b != 0.0 {
                for (ri, x) in r.iter_mut().zip(self.column(c)) {
                    *ri -= b * x;
                }
            }
        }
        Ok(r)
    }
}

fn families(eq: Equation) -> &'static [Family] {
    use Family::*;
    match eq {
        Equation::SpeedMean => &[SpeedAr, SpeedMa],
        Equation::PowerMean => &[PowerAr, PowerSpeed, PowerMa, PowerSpeedMa],
        Equation::SpeedVol => &[SpeedArchPos, SpeedArchNeg, SpeedGarch],
        Equation::PowerVol => &[
            PowerArchPos,
            PowerArchNeg,
            PowerGarch,
            PowerSpeedArchPos,
            PowerSpeedArchNeg,
            PowerSpeedGarch,
        ],
    }
}

/// Every candidate column of equation `eq` for turbine `i`, before any
/// data-dependent pruning. `n_basis` is the column count of the basis set
/// the equation uses (cumulative for means, plain for volatilities).
pub fn column_layout(
    eq: Equation,
    i: usize,
    d: usize,
    sets: &IndexSets,
    thresholds: &ThresholdSet,
    n_basis: usize,
) -> Vec<ColumnMeta> {
    let mut out = Vec::new();
    let linear = f64::NEG_INFINITY;
    let intercept = eq.intercept();
    if sets.varying_intercept && n_basis > 0 {
        for l in 0..n_basis {
            out.push(ColumnMeta { family: intercept, source: i, lag: 0, threshold: linear, basis: Some(l) });
        }
    } else {
        out.push(ColumnMeta { family: intercept, source: i, lag: 0, threshold: linear, basis: None });
    }
    for &family in families(eq) {
        let spec = sets.spec(family).expect("non-intercept family");
        for j in 0..d {
            let own = j == i;
            for &k in spec.lags(own) {
                let mut cs = vec![linear];
                if spec.threshold_lags.contains(&k) {
                    cs.extend_from_slice(thresholds.for_family(family, j));
                }
                let varying = spec.is_varying(own, k) && n_basis > 0;
                for &c in &cs {
                    if varying {
                        for l in 0..n_basis {
                            out.push(ColumnMeta { family, source: j, lag: k, threshold: c, basis: Some(l) });
                        }
                    } else {
                        out.push(ColumnMeta { family, source: j, lag: k, threshold: c, basis: None });
                    }
                }
            }
        }
    }
    out
}

/// Evaluates `layout` on `rows` and drops columns that are zero on every row.
pub fn build_design<S: RegressorSource + Sync>(
    eq: Equation,
    i: usize,
    src: &S,
    layout: Vec<ColumnMeta>,
    rows: Range<usize>,
) -> Result<DesignMatrix> {
    let max_lag = layout.iter().map(|c| c.lag).max().unwrap_or(0);
    if rows.start < max_lag {
        return Err(Error::InsufficientHistory { required: max_lag, available: rows.start });
    }
    let m = rows.len();
    if m == 0 {
        return Err(Error::InsufficientHistory { required: rows.start + 1, available: rows.start });
    }
    let response: Vec<f64> = rows.clone().map(|t| eq.response(src, i, t)).collect();
    let mut data = vec![0.0; m * layout.len()];
    let nonzero: Vec<bool> = data
        .par_chunks_mut(m)
        .zip(layout.par_iter())
        .map(|(col, meta)| {
            let mut any = false;
            for (x, t) in col.iter_mut().zip(rows.clone()) {
                *x = meta.value(src, t);
                any |= *x != 0.0;
            }
            any
        })
        .collect();
    let mut design = DesignMatrix { equation: eq, turbine: i, row_start: rows.start, meta: layout, response, data };
    if nonzero.iter().any(|&nz| !nz) {
        let keep: Vec<usize> = (0..nonzero.len()).filter(|&c| nonzero[c]).collect();
        let mut data = Vec::with_capacity(keep.len() * m);
        for &c in &keep {
            data.extend_from_slice(design.column(c));
        }
        design.meta = keep.iter().map(|&c| design.meta[c]).collect();
        design.data = data;
    }
    if design.response.iter().chain(&design.data).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{eq} design for turbine {i}")));
    }
    Ok(design)
}

fn check_source(src: &SeriesSource<'_>) -> Result<()> {
    let n = src.len();
    let d = src.speed.len();
    for block in [src.power, src.speed_resid, src.power_resid, src.speed_vol, src.power_vol] {
        if block.len() != d {
            return Err(Error::LengthMismatch { expected: d, got: block.len() });
        }
    }
    for v in src
        .speed
        .iter()
        .chain(src.power)
        .chain(src.speed_resid)
        .chain(src.power_resid)
        .chain(src.speed_vol)
        .chain(src.power_vol)
    {
        if v.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: v.len() });
        }
    }
    for b in [src.mean_basis, src.var_basis] {
        if b.n_cols() > 0 && b.n_rows() != n {
            return Err(Error::LengthMismatch { expected: n, got: b.n_rows() });
        }
    }
    Ok(())
}

fn build(
    eq: Equation,
    src: &SeriesSource<'_>,
    i: usize,
    sets: &IndexSets,
    thresholds: &ThresholdSet,
    trim: usize,
) -> Result<DesignMatrix> {
    check_source(src)?;
    let n = src.len();
    if trim < sets.max_lag() {
        return Err(Error::Parameter(format!("trim {trim} below the largest lag {}", sets.max_lag())));
    }
    if n <= trim {
        return Err(Error::InsufficientHistory { required: trim + 1, available: n });
    }
    let nb = if eq.is_mean() { src.mean_basis.n_cols() } else { src.var_basis.n_cols() };
    let layout = column_layout(eq, i, src.speed.len(), sets, thresholds, nb);
    build_design(eq, i, src, layout, trim..n)
}

/// Speed mean design: intercept, thresholded speed lags, speed-residual lags.
pub fn build_speed_mean_design(
    src: &SeriesSource<'_>,
    i: usize,
    sets: &IndexSets,
    thresholds: &ThresholdSet,
    trim: usize,
) -> Result<DesignMatrix> {
    build(Equation::SpeedMean, src, i, sets, thresholds, trim)
}

/// Power mean design: intercept, thresholded power lags, thresholded current
/// and lagged speed, power-residual and speed-residual lags.
pub fn build_power_mean_design(
    src: &SeriesSource<'_>,
    i: usize,
    sets: &IndexSets,
    thresholds: &ThresholdSet,
    trim: usize,
) -> Result<DesignMatrix> {
    build(Equation::PowerMean, src, i, sets, thresholds, trim)
}

/// Speed volatility design with response `|e|`.
pub fn build_speed_vol_design(
    src: &SeriesSource<'_>,
    i: usize,
    sets: &IndexSets,
    trim: usize,
) -> Result<DesignMatrix> {
    build(Equation::SpeedVol, src, i, sets, &ThresholdSet::none(src.speed.len()), trim)
}

/// Power volatility design with response `|e|^(1/3)`; all regressors on the cube-root scale.
pub fn build_power_vol_design(
    src: &SeriesSource<'_>,
    i: usize,
    sets: &IndexSets,
    trim: usize,
) -> Result<DesignMatrix> {
    build(Equation::PowerVol, src, i, sets, &ThresholdSet::none(src.speed.len()), trim)
}

/// Column metadata as CSV: `family,i,j,lag,threshold,basis,tv`.
pub fn write_layout_csv<W: std::io::Write>(out: W, turbine: usize, meta: &[ColumnMeta]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "i", "j", "lag", "threshold", "basis", "tv"])?;
    for c in meta {
        let basis = c.basis.map(|b| b.to_string()).unwrap_or_default();
        w.write_record([
            c.family.tag().to_string(),
            turbine.to_string(),
            c.source.to_string(),
            c.lag.to_string(),
            c.threshold.to_string(),
            basis,
            c.is_time_varying().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{interaction_basis, BSplineSpec, BasisKind};
    use crate::features::{FamilySpec, ThresholdPolicy};
    use crate::panel::CalendarIndex;

    struct Data {
        speed: Vec<Vec<f64>>,
        power: Vec<Vec<f64>>,
        sr: Vec<Vec<f64>>,
        pr: Vec<Vec<f64>>,
        sv: Vec<Vec<f64>>,
        pv: Vec<Vec<f64>>,
        mb: BasisSet,
        vb: BasisSet,
    }

    impl Data {
        fn new(d: usize, n: usize) -> Self {
            let f = |a: f64, b: f64| -> Vec<Vec<f64>> {
                (0..d)
                    .map(|i| (0..n).map(|t| a + b * ((t * 37 + i * 11) % 23) as f64).collect())
                    .collect()
            };
            let ts: Vec<i64> = (0..n as i64).map(|t| 1_288_569_600 + 600 * t).collect();
            let cal = CalendarIndex::from_timestamps(&ts);
            let (dd, aa) = (BSplineSpec::diurnal(), BSplineSpec::annual());
            Self {
                speed: f(1.0, 0.5),
                power: f(-5.0, 40.0),
                sr: f(-1.1, 0.1),
                pr: f(-60.0, 5.0),
                sv: f(0.5, 0.1),
                pv: f(1.0, 0.2),
                mb: interaction_basis(&cal, &dd, &aa, BasisKind::Cumulative).unwrap(),
                vb: interaction_basis(&cal, &dd, &aa, BasisKind::Plain).unwrap(),
            }
        }
        fn src(&self) -> SeriesSource<'_> {
            SeriesSource {
                speed: &self.speed,
                power: &self.power,
                speed_resid: &self.sr,
                power_resid: &self.pr,
                speed_vol: &self.sv,
                power_vol: &self.pv,
                mean_basis: &self.mb,
                var_basis: &self.vb,
            }
        }
    }

    fn only(f: impl FnOnce(&mut IndexSets)) -> IndexSets {
        let mut s = IndexSets::empty();
        f(&mut s);
        s
    }

    #[test]
    fn ar1_design() {
        let data = Data::new(1, 60);
        let sets = only(|s| s.speed_ar = FamilySpec::new(vec![1], vec![]));
        let x = build_speed_mean_design(&data.src(), 0, &sets, &ThresholdSet::none(1), 1).unwrap();
        assert_eq!(x.n_cols(), 2);
        assert_eq!(x.n_rows(), 59);
        for r in 0..x.n_rows() {
            assert_eq!(x.get(r, 0), 1.0);
            assert_eq!(x.get(r, 1), data.speed[0][r]);
            assert_eq!(x.response[r], data.speed[0][r + 1]);
        }
    }

    #[test]
    fn varying_lag_expands_to_48() {
        let data = Data::new(1, 200);
        let mut sets = only(|s| s.speed_ar = FamilySpec::new(vec![1], vec![]).with_varying(vec![1], vec![]));
        let x = build_speed_mean_design(&data.src(), 0, &sets, &ThresholdSet::none(1), 1).unwrap();
        assert_eq!(x.n_cols(), 1 + 48);
        sets.varying_intercept = true;
        let x = build_speed_mean_design(&data.src(), 0, &sets, &ThresholdSet::none(1), 1).unwrap();
        assert_eq!(x.n_cols(), 48 + 48);
        assert!(x.meta[..48].iter().all(|m| m.family == Family::SpeedIntercept));
        // Cumulative last column is the constant one.
        assert!((0..x.n_rows()).all(|r| (x.get(r, 47) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn thresholds_expand_columns() {
        let data = Data::new(1, 300);
        let sets = only(|s| s.speed_ar = FamilySpec::new(vec![1], vec![]).with_thresholds(vec![1]));
        let speed: Vec<&[f64]> = data.speed.iter().map(|v| v.as_slice()).collect();
        let power: Vec<&[f64]> = data.power.iter().map(|v| v.as_slice()).collect();
        let th = ThresholdSet::from_policy(&ThresholdPolicy::Deciles, &speed, &power).unwrap();
        let layout = column_layout(Equation::SpeedMean, 0, 1, &sets, &th, 0);
        let n_c = 1 + th.speed[0].len();
        assert_eq!(layout.len(), 1 + n_c);
        assert!(layout[1].threshold == f64::NEG_INFINITY);
        let x = build_speed_mean_design(&data.src(), 0, &sets, &th, 1).unwrap();
        for (c, m) in x.meta.iter().enumerate().skip(1) {
            for r in 0..x.n_rows() {
                assert_eq!(x.get(r, c), data.speed[0][r].max(m.threshold));
            }
        }
    }

    #[test]
    fn power_mean_has_contemporaneous_speed_and_speed_mean_has_no_power() {
        let data = Data::new(2, 100);
        let sets = IndexSets::default().truncated(6).constant_coefficients();
        let th = ThresholdSet::none(2);
        let p = build_power_mean_design(&data.src(), 1, &sets, &th, 6).unwrap();
        assert!(p.meta.iter().any(|m| m.family == Family::PowerSpeed && m.lag == 0 && m.source == 1));
        assert!(p.meta.iter().any(|m| m.family == Family::PowerSpeedMa && m.lag == 0));
        let w = build_speed_mean_design(&data.src(), 1, &sets, &th, 6).unwrap();
        assert!(w.meta.iter().all(|m| m.family.equation() == Equation::SpeedMean));
        assert!(w.meta.iter().all(|m| m.family != Family::SpeedMa || m.lag > 0));
        assert!(w.meta.iter().all(|m| m.lag > 0 || m.family.is_intercept()));
    }

    #[test]
    fn threshold_power_curve_design() {
        let data = Data::new(1, 50);
        let sets = only(|s| {
            s.power_speed = FamilySpec::new(vec![0], vec![]).with_thresholds(vec![0]);
        });
        let th = ThresholdSet::from_policy(
            &ThresholdPolicy::Fixed { speed: (0..=16).map(f64::from).collect(), power: vec![] },
            &[&data.speed[0]],
            &[&data.power[0]],
        )
        .unwrap();
        let x = build_power_mean_design(&data.src(), 0, &sets, &th, 0).unwrap();
        assert_eq!(x.n_cols(), 1 + 1 + 17);
        for r in 0..x.n_rows() {
            for c in 0..=16 {
                assert_eq!(x.get(r, 2 + c), data.speed[0][r].max(c as f64));
            }
        }
    }

    #[test]
    fn sign_split_and_cube_roots() {
        let mut data = Data::new(1, 10);
        data.sr[0][3] = -2.0;
        data.sr[0][4] = 0.0;
        data.pr[0][3] = -8.0;
        let sets = only(|s| {
            s.speed_arch = FamilySpec::new(vec![1], vec![]);
            s.power_arch = FamilySpec::new(vec![1], vec![]);
        });
        let v = build_speed_vol_design(&data.src(), 0, &sets, 1).unwrap();
        assert_eq!(v.n_cols(), 3);
        assert_eq!((v.get(3, 1), v.get(3, 2)), (0.0, 2.0));
        assert_eq!((v.get(4, 1), v.get(4, 2)), (0.0, 0.0));
        assert_eq!(v.response[2], 2.0);
        let u = build_power_vol_design(&data.src(), 0, &sets, 1).unwrap();
        assert_eq!(u.get(3, 2), 2.0);
        assert_eq!(u.get(3, 1), 0.0);
        assert_eq!(u.response[2], 2.0);
    }

    #[test]
    fn ones_proxies_give_constant_columns_and_power_vol_reads_speed_vol() {
        let mut data = Data::new(2, 40);
        for v in data.sv.iter_mut().chain(data.pv.iter_mut()) {
            v.iter_mut().for_each(|x| *x = 1.0);
        }
        let sets = IndexSets::default().truncated(3).constant_coefficients();
        let u = build_power_vol_design(&data.src(), 0, &sets, 3).unwrap();
        let mut saw_speed_garch = false;
        for (c, m) in u.meta.iter().enumerate() {
            if matches!(m.family, Family::PowerGarch | Family::PowerSpeedGarch) {
                assert!(u.column(c).iter().all(|&x| x == 1.0));
            }
            saw_speed_garch |= m.family == Family::PowerSpeedGarch;
        }
        assert!(saw_speed_garch);
        let mut u2 = u.clone();
        let dropped = u2.drop_duplicate_columns();
        // Every constant proxy column duplicates the intercept.
        let constant = u.meta.iter().filter(|m| matches!(m.family, Family::PowerGarch | Family::PowerSpeedGarch)).count();
        assert_eq!(dropped, constant);
    }

    #[test]
    fn metadata_reproduces_columns() {
        let data = Data::new(2, 400);
        let sets = IndexSets::default().truncated(8);
        let speed: Vec<&[f64]> = data.speed.iter().map(|v| v.as_slice()).collect();
        let power: Vec<&[f64]> = data.power.iter().map(|v| v.as_slice()).collect();
        let th = ThresholdSet::from_policy(&ThresholdPolicy::Deciles, &speed, &power).unwrap();
        let src = data.src();
        for eq in Equation::ALL {
            let x = build(eq, &src, 1, &sets, &th, 8).unwrap();
            for (c, m) in x.meta.iter().enumerate() {
                for r in (0..x.n_rows()).step_by(17) {
                    assert_eq!(m.value(&src, r + 8).to_bits(), x.get(r, c).to_bits());
                }
            }
        }
    }

    #[test]
    fn no_lookahead_except_contemporaneous_speed() {
        let data = Data::new(2, 300);
        let sets = IndexSets::default().truncated(6);
        let th = ThresholdSet::none(2);
        let t = 150;
        for eq in Equation::ALL {
            let base = build(eq, &data.src(), 0, &sets, &th, 6).unwrap();
            let mut pert = Data::new(2, 300);
            for v in pert
                .speed
                .iter_mut()
                .chain(pert.power.iter_mut())
                .chain(pert.sr.iter_mut())
                .chain(pert.pr.iter_mut())
                .chain(pert.sv.iter_mut())
                .chain(pert.pv.iter_mut())
            {
                v[t..].iter_mut().for_each(|x| *x += 3.0);
            }
            let moved = build(eq, &pert.src(), 0, &sets, &th, 6).unwrap();
            let r = t - 6;
            for (c, m) in base.meta.iter().enumerate() {
                let same = base.get(r, c) == moved.get(r, c);
                let contemporaneous = m.lag == 0 && !m.family.is_intercept();
                assert!(same || contemporaneous, "{eq} {:?}", m);
                if contemporaneous && m.family == Family::PowerSpeed {
                    assert!(!same);
                }
            }
        }
    }

    #[test]
    fn linear_thresholds_equal_plain_varma() {
        let data = Data::new(2, 200);
        let sets = IndexSets::default().truncated(4);
        let x = build_speed_mean_design(&data.src(), 0, &sets, &ThresholdSet::none(2), 4).unwrap();
        assert!(x.meta.iter().all(|m| m.threshold == f64::NEG_INFINITY));
        let linear = sets.clone().linear();
        let speed: Vec<&[f64]> = data.speed.iter().map(|v| v.as_slice()).collect();
        let th = ThresholdSet::from_policy(&ThresholdPolicy::Deciles, &speed, &speed).unwrap();
        let y = build_speed_mean_design(&data.src(), 0, &linear, &th, 4).unwrap();
        assert_eq!(x.meta.len(), y.meta.len());
        assert!(x.columns().zip(y.columns()).all(|(a, b)| a == b));
    }

    #[test]
    fn zero_columns_dropped_and_history_checked() {
        let mut data = Data::new(1, 30);
        data.sr[0].iter_mut().for_each(|x| *x = 0.0);
        let sets = only(|s| s.speed_ma = FamilySpec::new(vec![1, 2], vec![]));
        let x = build_speed_mean_design(&data.src(), 0, &sets, &ThresholdSet::none(1), 2).unwrap();
        assert_eq!(x.n_cols(), 1);
        assert!(matches!(
            build_speed_mean_design(&data.src(), 0, &sets, &ThresholdSet::none(1), 40),
            Err(Error::InsufficientHistory { .. })
        ));
        assert!(build_speed_mean_design(&data.src(), 0, &sets, &ThresholdSet::none(1), 1).is_err());
    }

    #[test]
    fn layout_csv() {
        let sets = only(|s| s.speed_ar = FamilySpec::new(vec![1], vec![]));
        let layout = column_layout(Equation::SpeedMean, 0, 1, &sets, &ThresholdSet::none(1), 0);
        let mut buf = Vec::new();
        write_layout_csv(&mut buf, 0, &layout).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert!(s.contains("speed_ar,0,0,1,-inf,,false"));
    }
}
