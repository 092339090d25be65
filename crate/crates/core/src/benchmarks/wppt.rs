use crate::error::{Error, Result};
use crate::panel::{calendar_position, TurbinePanel, STEP_SECONDS};
use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};
use std::ops::Range;

pub const N_WPPT_TERMS: usize = 9;

/// Names of the regressors, in coefficient order.
pub const WPPT_TERMS: [&str; N_WPPT_TERMS] = ["m", "a1", "a2", "b1", "b2", "d1c", "d2c", "d1s", "d2s"];

/// Intercept, `P_t`, `P_{t-1}`, future speed and its square, and two
/// diurnal harmonics of the target time of day `tod` (10-minute units).
pub fn wppt_regressors(p_t: f64, p_prev: f64, speed: f64, tod: f64) -> [f64; N_WPPT_TERMS] {
    let a = 2.0 * PI * tod / 144.0;
    [1.0, p_t, p_prev, speed, speed * speed, a.cos(), (2.0 * a).cos(), a.sin(), (2.0 * a).sin()]
}

/// Time of day of row `t + k`.
fn target_tod(panel: &TurbinePanel, t: usize, k: usize) -> f64 {
    calendar_position(panel.timestamps()[t] + k as i64 * STEP_SECONDS).0 as f64
}

/// Regressors at origin `t` for horizon `k`, with the future speed taken
/// as the speed observed at the origin.
fn origin_regressors(panel: &TurbinePanel, i: usize, t: usize, k: usize) -> [f64; N_WPPT_TERMS] {
    let p = panel.power(i);
    wppt_regressors(p[t], p[t - 1], panel.speed(i)[t], target_tod(panel, t, k))
}

/// Origins usable for fitting horizon `k` on `rows`.
fn origins(rows: &Range<usize>, k: usize) -> Result<Range<usize>> {
    let lo = rows.start + 1;
    let hi = rows.end.saturating_sub(k);
    if hi <= lo + N_WPPT_TERMS {
        return Err(Error::InsufficientHistory { required: N_WPPT_TERMS + k + 2, available: rows.len() });
    }
    Ok(lo..hi)
}

fn check(panel: &TurbinePanel, i: usize, rows: &Range<usize>, k: usize) -> Result<()> {
    if i >= panel.d() {
        return Err(Error::Index { index: i, max: panel.d() });
    }
    if k == 0 {
        return Err(Error::Parameter("horizon must be >= 1".into()));
    }
    if rows.end > panel.n() {
        return Err(Error::Index { index: rows.end, max: panel.n() });
    }
    let gap = |m: &[bool]| m[rows.clone()].iter().any(|&x| x);
    if gap(panel.speed_missing(i)) || gap(panel.power_missing(i)) {
        return Err(Error::Schema(format!("turbine {i} has missing values in the fitting rows")));
    }
    Ok(())
}

/// Direct per-horizon dynamic regression fitted by least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct WpptFit {
    pub turbine: usize,
    pub horizon: usize,
    pub coef: [f64; N_WPPT_TERMS],
    /// Residual standard deviation.
    pub sigma: f64,
}

impl WpptFit {
    pub fn predict(&self, x: &[f64; N_WPPT_TERMS]) -> f64 {
        self.coef.iter().zip(x).map(|(b, v)| b * v).sum()
    }
}

fn design(panel: &TurbinePanel, i: usize, k: usize, origins: &Range<usize>) -> (DMatrix<f64>, DVector<f64>) {
    let m = origins.len();
    let mut x = DMatrix::<f64>::zeros(m, N_WPPT_TERMS);
    let mut y = DVector::<f64>::zeros(m);
    for (r, t) in origins.clone().enumerate() {
        let row = origin_regressors(panel, i, t, k);
        for (c, v) in row.iter().enumerate() {
            x[(r, c)] = *v;
        }
        y[r] = panel.power(i)[t + k];
    }
    (x, y)
}

fn ols(x: &DMatrix<f64>, y: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficient(format!("{what}: singular values {smin:e} / {smax:e}")));
    }
    svd.solve(y, 0.0).map_err(|e| Error::RankDeficient(format!("{what}: {e}")))
}

/// Least squares fit of the horizon-`k` regression for turbine `i` on panel `rows`.
pub fn fit_wppt(panel: &TurbinePanel, i: usize, k: usize, rows: Range<usize>) -> Result<WpptFit> {
    check(panel, i, &rows, k)?;
    let o = origins(&rows, k)?;
    let (x, y) = design(panel, i, k, &o);
    let b = ols(&x, &y, &format!("WPPT turbine {i} horizon {k}"))?;
    let resid = &y - &x * &b;
    let sigma = (resid.norm_squared() / (y.len() - N_WPPT_TERMS) as f64).sqrt();
    let mut coef = [0.0; N_WPPT_TERMS];
    coef.copy_from_slice(b.as_slice());
    Ok(WpptFit { turbine: i, horizon: k, coef, sigma })
}

/// Forecast of `P_{origin + k}` with persistence as the future speed.
pub fn wppt_forecast(fit: &WpptFit, panel: &TurbinePanel, origin: usize) -> Result<f64> {
    if origin == 0 || origin >= panel.n() {
        return Err(Error::Index { index: origin, max: panel.n() });
    }
    Ok(fit.predict(&origin_regressors(panel, fit.turbine, origin, fit.horizon)))
}

fn std_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn std_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `ln Phi(x)`, accurate far into the lower tail.
fn log_cdf(x: f64) -> f64 {
    if x > -30.0 {
        std_cdf(x).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Inverse Mills ratio `phi(x) / Phi(x)`.
fn mills(x: f64) -> f64 {
    (-0.5 * x * x - 0.5 * (2.0 * PI).ln() - log_cdf(x)).exp()
}

/// Mean of `min(max(P* + sigma Z, l), u)` for standard normal `Z`:
/// `(Phi(f2) - Phi(f1)) P* + (phi(f1) - phi(f2)) sigma + u (1 - Phi(f2)) + l Phi(f1)`
/// with `f1 = (l - P*) / sigma`, `f2 = (u - P*) / sigma`. For `sigma -> 0`
/// this tends to `P*` clamped to `[l, u]`.
pub fn censored_mean(p_star: f64, sigma: f64, l: f64, u: f64) -> f64 {
    if !(sigma > 1e-12 * (u - l).abs().max(1.0)) {
        return p_star.clamp(l, u);
    }
    let f1 = (l - p_star) / sigma;
    let f2 = (u - p_star) / sigma;
    let v = (std_cdf(f2) - std_cdf(f1)) * p_star + (std_pdf(f1) - std_pdf(f2)) * sigma + u * (1.0 - std_cdf(f2)) + l * std_cdf(f1);
    v.clamp(l, u)
}

/// Two-sided censored (Tobit) regression on the WPPT regressors.
#[derive(Debug, Clone, PartialEq)]
pub struct GwpptFit {
    pub turbine: usize,
    pub horizon: usize,
    pub coef: [f64; N_WPPT_TERMS],
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
    pub loglik: f64,
    pub converged: bool,
}

impl GwpptFit {
    /// Latent mean `P*`.
    pub fn latent(&self, x: &[f64; N_WPPT_TERMS]) -> f64 {
        self.coef.iter().zip(x).map(|(b, v)| b * v).sum()
    }

    pub fn predict(&self, x: &[f64; N_WPPT_TERMS]) -> f64 {
        censored_mean(self.latent(x), self.sigma, self.lower, self.upper)
    }
}

/// Tobit negative log-likelihood on standardized regressors; parameters
/// are the coefficients followed by `ln sigma`.
struct Tobit {
    x: DMatrix<f64>,
    y: Vec<f64>,
    l: f64,
    u: f64,
}

impl Tobit {
    fn eval(&self, p: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let k = self.x.ncols();
        let beta = DVector::from_column_slice(&p[..k]);
        let ls = p[k];
        let s = ls.exp();
        let eta = &self.x * &beta;
        let mut nll = 0.0;
        let mut g_eta = vec![0.0; self.y.len()];
        let mut g_ls = 0.0;
        for (t, (&y, &e)) in self.y.iter().zip(eta.iter()).enumerate() {
            if y <= self.l {
                let a = (self.l - e) / s;
                nll -= log_cdf(a);
                let lam = mills(a);
                g_eta[t] = lam / s;
                g_ls += a * lam;
            } else if y >= self.u {
                let b = (self.u - e) / s;
                nll -= log_cdf(-b);
                let lam = mills(-b);
                g_eta[t] = -lam / s;
                g_ls -= b * lam;
            } else {
                let z = (y - e) / s;
                nll += 0.5 * z * z + ls + 0.5 * (2.0 * PI).ln();
                g_eta[t] = -z / s;
                g_ls += 1.0 - z * z;
            }
        }
        if let Some(g) = grad {
            let ge = self.x.tr_mul(&DVector::from_vec(g_eta));
            g[..k].copy_from_slice(ge.as_slice());
            g[k] = g_ls;
        }
        nll
    }
}

impl CostFunction for Tobit {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(p, None))
    }
}

impl Gradient for Tobit {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;
    fn gradient(&self, p: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let mut g = vec![0.0; p.len()];
        self.eval(p, Some(&mut g));
        Ok(g)
    }
}

/// Maximum likelihood fit with observations at or beyond `l`/`u` treated as
/// censored there. Starts from least squares; the optimization runs on
/// standardized regressors and response.
pub fn fit_gwppt(panel: &TurbinePanel, i: usize, k: usize, rows: Range<usize>, l: f64, u: f64) -> Result<GwpptFit> {
    if !(l < u) {
        return Err(Error::Parameter(format!("censoring bounds need l < u, got [{l}, {u}]")));
    }
    check(panel, i, &rows, k)?;
    let o = origins(&rows, k)?;
    let (x, y) = design(panel, i, k, &o);
    let what = format!("GWPPT turbine {i} horizon {k}");
    let start = ols(&x, &y, &what)?;
    let m = y.len();

    // Standardize: column c becomes (x_c - mu_c) / s_c, response y / sy.
    let mut mu = vec![0.0; N_WPPT_TERMS];
    let mut sc = vec![1.0; N_WPPT_TERMS];
    for c in 1..N_WPPT_TERMS {
        let col = x.column(c);
        mu[c] = col.mean();
        let sd = (col.iter().map(|v| (v - mu[c]).powi(2)).sum::<f64>() / m as f64).sqrt();
        sc[c] = if sd > 0.0 { sd } else { 1.0 };
    }
    let ym = y.mean();
    let sy = (y.iter().map(|v| (v - ym).powi(2)).sum::<f64>() / m as f64).sqrt().max(1e-12);
    let xs = DMatrix::from_fn(m, N_WPPT_TERMS, |r, c| if c == 0 { 1.0 } else { (x[(r, c)] - mu[c]) / sc[c] });
    let ys: Vec<f64> = y.iter().map(|v| v / sy).collect();
    // Least squares start, mapped to the standardized scale.
    let mut init = vec![0.0; N_WPPT_TERMS + 1];
    init[0] = (start[0] + (1..N_WPPT_TERMS).map(|c| start[c] * mu[c]).sum::<f64>()) / sy;
    for c in 1..N_WPPT_TERMS {
        init[c] = start[c] * sc[c] / sy;
    }
    let resid = &y - &x * &start;
    init[N_WPPT_TERMS] = ((resid.norm_squared() / m as f64).sqrt() / sy).max(1e-6).ln();

    let problem = Tobit { x: xs, y: ys, l: l / sy, u: u / sy };
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), 10)
        .with_tolerance_grad(1e-8)
        .and_then(|s| s.with_tolerance_cost(1e-14))
        .map_err(|e| Error::Model(format!("{what}: optimizer setup: {e}")))?;
    let max_iters = 1000;
    let res = Executor::new(problem, solver)
        .configure(|state| state.param(init).max_iters(max_iters))
        .run()
        .map_err(|e| Error::Model(format!("{what}: optimizer: {e}")))?;
    let state = res.state();
    let p = state.get_best_param().cloned().ok_or_else(|| Error::Model(format!("{what}: no parameters")))?;
    let converged = state.get_iter() < max_iters;
    if !converged {
        log::warn!("{what}: likelihood maximization did not converge");
    }
    let nll = state.get_best_cost();
    let mut coef = [0.0; N_WPPT_TERMS];
    for c in 1..N_WPPT_TERMS {
        coef[c] = p[c] * sy / sc[c];
    }
    coef[0] = p[0] * sy - (1..N_WPPT_TERMS).map(|c| coef[c] * mu[c]).sum::<f64>();
    let sigma = p[N_WPPT_TERMS].exp() * sy;
    if !(sigma.is_finite() && sigma > 0.0) || coef.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what}: estimates")));
    }
    // Interior densities were evaluated on the y / sy scale.
    let n_interior = y.iter().filter(|&&v| v > l && v < u).count() as f64;
    let loglik = -nll - n_interior * sy.ln();
    Ok(GwpptFit { turbine: i, horizon: k, coef, sigma, lower: l, upper: u, loglik, converged })
}

/// Censored-mean forecast of `P_{origin + k}` with persistence as the future speed.
pub fn gwppt_forecast(fit: &GwpptFit, panel: &TurbinePanel, origin: usize) -> Result<f64> {
    if origin == 0 || origin >= panel.n() {
        return Err(Error::Index { index: origin, max: panel.n() });
    }
    Ok(fit.predict(&origin_regressors(panel, fit.turbine, origin, fit.horizon)))
}
