use super::{FittedJointModel, ModelConfig, Term, TurbineFit};
use crate::basis::{BasisKind, BasisSet};
use crate::error::{Error, Result};
use crate::features::RegressorSource;
use crate::panel::{TurbinePanel, STEP_SECONDS};

/// Linear predictor `sum coef * regressor` in term order.
#[inline]
pub fn predict<S: RegressorSource + ?Sized>(terms: &[Term], src: &S, t: usize) -> f64 {
    let mut acc = 0.0;
    for term in terms {
        acc += term.coef * term.meta.value(src, t);
    }
    acc
}

/// Contiguous block of rows holding every series the recursions read and write.
#[derive(Debug, Clone)]
pub struct Window {
    pub timestamps: Vec<i64>,
    /// Indexed `[turbine][row]`.
    pub speed: Vec<Vec<f64>>,
    pub power: Vec<Vec<f64>>,
    pub speed_resid: Vec<Vec<f64>>,
    pub power_resid: Vec<Vec<f64>>,
    pub speed_vol: Vec<Vec<f64>>,
    pub power_vol: Vec<Vec<f64>>,
    pub mean_basis: BasisSet,
    pub var_basis: BasisSet,
}

impl RegressorSource for Window {
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

impl Window {
    /// Zero-filled window over `timestamps` for `d` turbines, without bases.
    pub fn zeros(timestamps: Vec<i64>, d: usize) -> Self {
        let n = timestamps.len();
        let z = vec![vec![0.0; n]; d];
        Self {
            timestamps,
            speed: z.clone(),
            power: z.clone(),
            speed_resid: z.clone(),
            power_resid: z.clone(),
            speed_vol: z.clone(),
            power_vol: z,
            mean_basis: BasisSet::empty(BasisKind::Cumulative),
            var_basis: BasisSet::empty(BasisKind::Plain),
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn d(&self) -> usize {
        self.speed.len()
    }

    /// Evaluates the model's bases at the window's timestamps.
    pub fn attach_basis(&mut self, config: &ModelConfig) -> Result<()> {
        let (m, v) = config.basis_sets(&self.timestamps)?;
        self.mean_basis = m;
        self.var_basis = v;
        Ok(())
    }

    fn series_mut(&mut self) -> [&mut Vec<Vec<f64>>; 6] {
        [
            &mut self.speed,
            &mut self.power,
            &mut self.speed_resid,
            &mut self.power_resid,
            &mut self.speed_vol,
            &mut self.power_vol,
        ]
    }

    fn series(&self) -> [&Vec<Vec<f64>>; 6] {
        [&self.speed, &self.power, &self.speed_resid, &self.power_resid, &self.speed_vol, &self.power_vol]
    }
}

/// How the innovations at a step are obtained.
#[derive(Debug, Clone, Copy)]
pub enum Shock<'a> {
    /// Residuals implied by the speed and power already stored at the row.
    Observed,
    /// No innovation: the row takes the conditional mean.
    Zero,
    /// Standardized draws per turbine, scaled by the current volatilities
    /// (`sigma` for speed, the cubed cube-root proxy for power).
    Standardized { speed: &'a [f64], power: &'a [f64] },
}

/// Advances all recursions at row `t`: volatilities first (they use lags
/// only), then every speed, then every power value.
pub(crate) fn step(turbines: &[TurbineFit], w: &mut Window, t: usize, shock: Shock<'_>) {
    for (i, fit) in turbines.iter().enumerate() {
        let s = fit.speed_vol.evaluate(w, t);
        let p = fit.power_vol.evaluate(w, t);
        w.speed_vol[i][t] = s;
        w.power_vol[i][t] = p;
    }
    for (i, fit) in turbines.iter().enumerate() {
        let m = fit.speed_mean.evaluate(w, t);
        match shock {
            Shock::Observed => w.speed_resid[i][t] = w.speed[i][t] - m,
            Shock::Zero => {
                w.speed[i][t] = m;
                w.speed_resid[i][t] = 0.0;
            }
            Shock::Standardized { speed, .. } => {
                let e = w.speed_vol[i][t] * speed[i];
                w.speed_resid[i][t] = e;
                w.speed[i][t] = m + e;
            }
        }
    }
    for (i, fit) in turbines.iter().enumerate() {
        let m = fit.power_mean.evaluate(w, t);
        match shock {
            Shock::Observed => w.power_resid[i][t] = w.power[i][t] - m,
            Shock::Zero => {
                w.power[i][t] = m;
                w.power_resid[i][t] = 0.0;
            }
            Shock::Standardized { power, .. } => {
                let e = w.power_vol[i][t].powi(3) * power[i];
                w.power_resid[i][t] = e;
                w.power[i][t] = m + e;
            }
        }
    }
}

/// Model state filtered through observed panel rows.
#[derive(Debug, Clone)]
pub struct FilteredState {
    pub window: Window,
    /// Window index of panel row `r` is `r + offset`.
    offset: isize,
    /// First panel row usable as a forecast origin.
    pub valid_from: usize,
    /// Last filtered panel row.
    pub upto: usize,
}

impl FilteredState {
    pub fn local(&self, row: usize) -> Result<usize> {
        if row < self.valid_from || row > self.upto {
            return Err(Error::Parameter(format!(
                "origin row {row} outside filtered range {}..={}",
                self.valid_from, self.upto
            )));
        }
        Ok((row as isize + self.offset) as usize)
    }

    /// Window holding the `lookback` rows up to `origin` followed by
    /// `horizon` empty future rows. Returns it with the index of the origin.
    pub fn forecast_window(&self, model: &FittedJointModel, origin: usize, horizon: usize) -> Result<(Window, usize)> {
        let o = self.local(origin)?;
        let lb = model.lookback();
        if o + 1 < lb {
            return Err(Error::InsufficientHistory { required: lb, available: o + 1 });
        }
        let start = o + 1 - lb;
        let origin_ts = self.window.timestamps[o];
        let mut ts = self.window.timestamps[start..=o].to_vec();
        ts.extend((1..=horizon as i64).map(|h| origin_ts + h * STEP_SECONDS));
        let mut w = Window::zeros(ts, model.d());
        let src = self.window.series();
        for (dst, s) in w.series_mut().into_iter().zip(src) {
            for (dv, sv) in dst.iter_mut().zip(s) {
                dv[..lb].copy_from_slice(&sv[start..=o]);
            }
        }
        w.attach_basis(&model.config)?;
        Ok((w, lb - 1))
    }
}

/// Filters the fitted recursions through panel rows up to and including `upto`.
///
/// If the panel contains the end of the estimation sample, or starts right
/// after it, the stored history seeds the recursions. Otherwise the first
/// `lookback` panel rows serve as warm-up with zero residuals and
/// volatilities at their in-sample means.
pub fn filter_panel(model: &FittedJointModel, panel: &TurbinePanel, upto: usize) -> Result<FilteredState> {
    let d = model.d();
    if panel.d() != d {
        return Err(Error::Schema(format!("panel has {} turbines, model has {d}", panel.d())));
    }
    if upto >= panel.n() {
        return Err(Error::Index { index: upto, max: panel.n() });
    }
    for i in 0..d {
        if panel.speed_missing(i)[..=upto].iter().chain(&panel.power_missing(i)[..=upto]).any(|&m| m) {
            return Err(Error::Schema("panel has missing values; fill gaps before forecasting".into()));
        }
    }
    let hist = &model.history;
    let h = hist.len();
    let lb = model.lookback();
    let ts = panel.timestamps();
    let end_row = panel.row_of(model.sample_end).filter(|&r| r <= upto && h > 0);
    let (first_panel_row, offset, valid_from, prepend) = if let Some(r) = end_row {
        (r + 1, h as isize - 1 - r as isize, r, true)
    } else if h > 0 && ts[0] == model.sample_end + STEP_SECONDS {
        (0, h as isize, 0, true)
    } else {
        log::info!("model history not aligned with panel; warming up on the first {lb} rows");
        if upto < lb {
            return Err(Error::InsufficientHistory { required: lb + 1, available: upto + 1 });
        }
        (0, 0, lb, false)
    };
    let mut stamps = if prepend { hist.timestamps.clone() } else { Vec::new() };
    stamps.extend_from_slice(&ts[first_panel_row..=upto]);
    let mut w = Window::zeros(stamps, d);
    let lead = if prepend { h } else { 0 };
    for i in 0..d {
        if prepend {
            w.speed[i][..h].copy_from_slice(&hist.speed[i]);
            w.power[i][..h].copy_from_slice(&hist.power[i]);
            w.speed_resid[i][..h].copy_from_slice(&hist.speed_resid[i]);
            w.power_resid[i][..h].copy_from_slice(&hist.power_resid[i]);
            w.speed_vol[i][..h].copy_from_slice(&hist.speed_vol[i]);
            w.power_vol[i][..h].copy_from_slice(&hist.power_vol[i]);
        }
        w.speed[i][lead..].copy_from_slice(&panel.speed(i)[first_panel_row..=upto]);
        w.power[i][lead..].copy_from_slice(&panel.power(i)[first_panel_row..=upto]);
    }
    let start = if prepend {
        h
    } else {
        for i in 0..d {
            let (sl, pl) = model.vol_levels[i];
            w.speed_vol[i][..lb].iter_mut().for_each(|v| *v = sl);
            w.power_vol[i][..lb].iter_mut().for_each(|v| *v = pl);
        }
        lb
    };
    w.attach_basis(&model.config)?;
    for t in start..w.len() {
        step(&model.turbines, &mut w, t, Shock::Observed);
    }
    Ok(FilteredState { window: w, offset, valid_from, upto })
}
