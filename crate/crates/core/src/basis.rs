//! Periodic cubic B-spline bases for time-varying coefficients.
//!
//! A base B-spline of odd degree `H` with equidistant knots of spacing `h`,
//! centred at zero, is wrapped with period `S`. Basis function `j` is the
//! wrapped function shifted by `(j - 1) h`, giving `N = S / h` functions that
//! sum to one everywhere. Cumulative bases are running sums over `j`, so the
//! last cumulative function is the constant one.

use crate::error::{Error, Result};
use crate::panel::{CalendarIndex, ANNUAL_STEPS, DIURNAL_STEPS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BSplineSpec {
    pub degree: usize,
    pub season_length: f64,
    pub n_basis: usize,
}

impl BSplineSpec {
    pub fn new(degree: usize, season_length: f64, n_basis: usize) -> Result<Self> {
        let spec = Self { degree, season_length, n_basis };
        spec.validate()?;
        Ok(spec)
    }

    /// 12 cubic functions over one day, 12 steps apart.
    pub fn diurnal() -> Self {
        Self { degree: 3, season_length: DIURNAL_STEPS as f64, n_basis: 12 }
    }

    /// 4 cubic functions over one year, 13148.64 steps apart.
    pub fn annual() -> Self {
        Self { degree: 3, season_length: ANNUAL_STEPS, n_basis: 4 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree % 2 == 0 {
            return Err(Error::Parameter(format!("degree must be odd, got {}", self.degree)));
        }
        if self.n_basis == 0 {
            return Err(Error::Parameter("n_basis must be >= 1".into()));
        }
        if !(self.season_length.is_finite() && self.season_length > 0.0) {
            return Err(Error::Parameter(format!("bad season length {}", self.season_length)));
        }
        Ok(())
    }

    /// Additionally requires knot spacing `h >= H + 1`.
    pub fn validate_strict(&self) -> Result<()> {
        self.validate()?;
        if self.spacing() < (self.degree + 1) as f64 {
            return Err(Error::Parameter(format!(
                "knot spacing {} below degree + 1 = {}",
                self.spacing(),
                self.degree + 1
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.season_length / self.n_basis as f64
    }

    /// The `H + 2` knots of the base function, centred at zero.
    pub fn knots(&self) -> Vec<f64> {
        let h = self.spacing();
        let half = (self.degree + 1) as f64 / 2.0;
        (0..self.degree + 2).map(|i| (i as f64 - half) * h).collect()
    }
}

/// Single B-spline of degree `degree` on `degree + 2` strictly increasing knots.
pub fn bspline_eval(t: f64, knots: &[f64], degree: usize) -> Result<f64> {
    if knots.len() != degree + 2 {
        return Err(Error::Parameter(format!(
            "degree {degree} needs {} knots, got {}",
            degree + 2,
            knots.len()
        )));
    }
    if knots.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Parameter("knots must be strictly increasing".into()));
    }
    Ok(bspline_unchecked(t, knots, degree))
}

fn bspline_unchecked(t: f64, k: &[f64], degree: usize) -> f64 {
    if t < k[0] || t >= k[degree + 1] {
        return 0.0;
    }
    let mut n = [0.0f64; 16];
    debug_assert!(degree < 16);
    for i in 0..=degree {
        n[i] = if k[i] <= t && t < k[i + 1] { 1.0 } else { 0.0 };
    }
    for p in 1..=degree {
        for i in 0..=degree - p {
            let left = (t - k[i]) / (k[i + p] - k[i]) * n[i];
            let right = (k[i + p + 1] - t) / (k[i + p + 1] - k[i + 1]) * n[i + 1];
            n[i] = left + right;
        }
    }
    n[0]
}

/// Periodic basis function `j` (1-based) at time `t`.
pub fn periodic_basis(t: f64, spec: &BSplineSpec, j: usize) -> Result<f64> {
    if j == 0 || j > spec.n_basis {
        return Err(Error::Index { index: j, max: spec.n_basis });
    }
    let knots = spec.knots();
    Ok(periodic_unchecked(t, spec, &knots, j))
}

fn periodic_unchecked(t: f64, spec: &BSplineSpec, knots: &[f64], j: usize) -> f64 {
    let s = spec.season_length;
    let shifted = (t - (j - 1) as f64 * spec.spacing()).rem_euclid(s);
    let (lo, hi) = (knots[0], knots[knots.len() - 1]);
    // Every period shift whose support can contain `shifted`.
    let k_min = ((shifted - hi) / s).floor() as i64;
    let k_max = ((shifted - lo) / s).ceil() as i64;
    (k_min..=k_max)
        .map(|k| bspline_unchecked(shifted - k as f64 * s, knots, spec.degree))
        .sum()
}

/// All `N` periodic basis values at `t`.
pub fn periodic_row(t: f64, spec: &BSplineSpec) -> Vec<f64> {
    let knots = spec.knots();
    (1..=spec.n_basis).map(|j| periodic_unchecked(t, spec, &knots, j)).collect()
}

fn cumulate(row: &mut [f64]) {
    for l in 1..row.len() {
        row[l] += row[l - 1];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Plain,
    Cumulative,
}

/// Basis evaluations over a sequence of times, `n_rows x n_cols`, stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub kind: BasisKind,
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    /// `(annual index, diurnal index)`, 1-based, for interaction sets.
    pub pairs: Vec<(usize, usize)>,
    /// Column that is identically constant, if any.
    pub constant_column: Option<usize>,
}

impl BasisSet {
    /// A set without columns, for models without time-varying coefficients.
    pub fn empty(kind: BasisKind) -> Self {
        Self { kind, n_rows: 0, n_cols: 0, values: Vec::new(), pairs: Vec::new(), constant_column: None }
    }

    fn from_rows(
        kind: BasisKind,
        n_cols: usize,
        rows: Vec<f64>,
        pairs: Vec<(usize, usize)>,
        constant_column: Option<usize>,
    ) -> Self {
        let n_rows = rows.len() / n_cols;
        let mut values = vec![0.0; rows.len()];
        for (r, row) in rows.chunks_exact(n_cols).enumerate() {
            for (c, v) in row.iter().enumerate() {
                values[c * n_rows + r] = *v;
            }
        }
        Self { kind, n_rows, n_cols, values, pairs, constant_column }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[col * self.n_rows + row]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.n_cols).map(|c| self.get(row, c)).collect()
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.values[col * self.n_rows..(col + 1) * self.n_rows]
    }

    /// CSV dump: one header row, then one row per time step.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = if self.pairs.is_empty() {
            (1..=self.n_cols).map(|l| format!("b{l}")).collect()
        } else {
            self.pairs.iter().map(|(a, d)| format!("a{a}_d{d}")).collect()
        };
        w.write_record(&header)?;
        for r in 0..self.n_rows() {
            w.write_record(self.row(r).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Plain periodic basis of one season over `times`.
pub fn plain_basis(spec: &BSplineSpec, times: &[f64]) -> Result<BasisSet> {
    spec.validate()?;
    let values = times.iter().flat_map(|&t| periodic_row(t, spec)).collect();
    Ok(BasisSet::from_rows(BasisKind::Plain, spec.n_basis, values, Vec::new(), None))
}

/// Cumulative periodic basis of one season over `times`; the last column is constant.
pub fn cumulative_basis(spec: &BSplineSpec, times: &[f64]) -> Result<BasisSet> {
    spec.validate()?;
    let mut values = Vec::with_capacity(times.len() * spec.n_basis);
    for &t in times {
        let mut row = periodic_row(t, spec);
        cumulate(&mut row);
        values.extend(row);
    }
    Ok(BasisSet::from_rows(BasisKind::Cumulative, spec.n_basis, values, Vec::new(), Some(spec.n_basis - 1)))
}

/// Products of annual and diurnal basis functions, one column per
/// `(annual l1, diurnal l2)` pair with column index `(l1 - 1) * N_diurnal + (l2 - 1)`.
///
/// The cumulative kind multiplies cumulative bases (its last column is
/// constant). The plain kind multiplies plain bases and replaces pair (1, 1)
/// by the constant 1.
pub fn interaction_basis(
    calendar: &CalendarIndex,
    diurnal: &BSplineSpec,
    annual: &BSplineSpec,
    kind: BasisKind,
) -> Result<BasisSet> {
    diurnal.validate()?;
    annual.validate()?;
    let (nd, na) = (diurnal.n_basis, annual.n_basis);
    let dk = diurnal.knots();
    let ak = annual.knots();
    // Diurnal positions are integers in 0..144; memoise their rows.
    let mut diurnal_rows: Vec<Option<Vec<f64>>> = vec![None; DIURNAL_STEPS];
    let mut values = Vec::with_capacity(calendar.len() * nd * na);
    for (tod, &toy) in calendar.time_of_day.iter().zip(&calendar.time_of_year) {
        let slot = &mut diurnal_rows[*tod as usize % DIURNAL_STEPS];
        let drow = slot.get_or_insert_with(|| {
            let mut r: Vec<f64> = (1..=nd)
                .map(|j| periodic_unchecked(*tod as f64, diurnal, &dk, j))
                .collect();
            if kind == BasisKind::Cumulative {
                cumulate(&mut r);
            }
            r
        });
        let mut arow: Vec<f64> = (1..=na).map(|j| periodic_unchecked(toy, annual, &ak, j)).collect();
        if kind == BasisKind::Cumulative {
            cumulate(&mut arow);
        }
        for (l1, a) in arow.iter().enumerate() {
            for (l2, dv) in drow.iter().enumerate() {
                let v = if kind == BasisKind::Plain && l1 == 0 && l2 == 0 {
                    1.0
                } else {
                    a * dv
                };
                values.push(v);
            }
        }
    }
    let pairs = (1..=na).flat_map(|a| (1..=nd).map(move |d| (a, d))).collect();
    let constant_column = Some(match kind {
        BasisKind::Plain => 0,
        BasisKind::Cumulative => na * nd - 1,
    });
    Ok(BasisSet::from_rows(kind, na * nd, values, pairs, constant_column))
}
