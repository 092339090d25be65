//! Weighted lasso by coordinate descent with BIC tuning.
//!
//! The objective for raw coefficients `b` is
//!
//! ```text
//! sum_t w_t (y_t - x_t' b)^2 + lambda * sum_{j penalized} s_j |b_j|
//! ```
//!
//! with `s_j^2 = sum_t (w_t / mean(w)) x_tj^2`. The penalty therefore acts on
//! standardized coefficients `s_j b_j`, and rescaling all weights by `c`
//! rescales the objective, `lambda_max` and the whole grid by `c`.
//! For a column with `s_j = 1` the objective reduces to the textbook form
//! `||y - Xb||_W^2 + lambda |b|`.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LassoSettings {
    pub n_lambda: usize,
    pub lambda_ratio: f64,
    /// Convergence tolerance on standardized coefficient changes; KKT
    /// conditions are enforced to `10 * tol`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoSettings {
    fn default() -> Self {
        Self { n_lambda: 100, lambda_ratio: 1e-4, tol: 1e-7, max_sweeps: 10_000 }
    }
}

impl LassoSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_lambda < 2 {
            return Err(Error::Parameter("n_lambda must be >= 2".into()));
        }
        if !(self.lambda_ratio > 0.0 && self.lambda_ratio < 1.0) {
            return Err(Error::Parameter(format!("lambda_ratio {} outside (0, 1)", self.lambda_ratio)));
        }
        if !(self.tol > 0.0) || self.max_sweeps == 0 {
            return Err(Error::Parameter("tol must be > 0 and max_sweeps >= 1".into()));
        }
        Ok(())
    }
}

/// `sign(z) * max(|z| - g, 0)`, never returning `-0.0`.
#[inline]
pub fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct LassoProblem<'a> {
    y: &'a [f64],
    x: Vec<&'a [f64]>,
    weights: Option<Vec<f64>>,
    nonnegative: bool,
    penalize: Vec<bool>,
}

/// Result of one coordinate-descent solve.
#[derive(Debug, Clone)]
pub struct Descent {
    pub coefficients: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub monotonicity_violations: usize,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone)]
pub struct LassoFit {
    /// Descending grid.
    pub lambdas: Vec<f64>,
    /// Raw-scale coefficients per grid point.
    pub path: Vec<Vec<f64>>,
    pub bic: Vec<f64>,
    pub df: Vec<usize>,
    pub sweeps: Vec<usize>,
    pub selected: usize,
    pub lambda: f64,
    pub coefficients: Vec<f64>,
    /// Objective at the selected solution and at zero coefficients, same lambda.
    pub objective: f64,
    pub initial_objective: f64,
    pub converged: bool,
    pub monotonicity_violations: usize,
    /// Largest KKT violation along the path, standardized scale.
    pub kkt_residual: f64,
    /// The selected model fits the response exactly (BIC is `-inf`).
    pub perfect_fit: bool,
}

impl<'a> LassoProblem<'a> {
    pub fn new(columns: Vec<&'a [f64]>, response: &'a [f64]) -> Result<Self> {
        let m = response.len();
        if m == 0 || columns.is_empty() {
            return Err(Error::Parameter("lasso needs m > 0 and p >= 1".into()));
        }
        for c in &columns {
            if c.len() != m {
                return Err(Error::LengthMismatch { expected: m, got: c.len() });
            }
        }
        if response.iter().any(|v| !v.is_finite()) || columns.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("lasso input".into()));
        }
        let p = columns.len();
        Ok(Self { y: response, x: columns, weights: None, nonnegative: false, penalize: vec![true; p] })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.y.len() {
            return Err(Error::LengthMismatch { expected: self.y.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::NonFinite("weights must be positive and finite".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn nonnegative(mut self, flag: bool) -> Self {
        self.nonnegative = flag;
        self
    }

    /// Exempts column `c` from the penalty.
    pub fn unpenalized(mut self, c: usize) -> Result<Self> {
        if c >= self.p() {
            return Err(Error::Index { index: c, max: self.p() });
        }
        self.penalize[c] = false;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.len()
    }

    fn w(&self, t: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[t])
    }

    fn mean_weight(&self) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w.iter().sum::<f64>() / w.len() as f64)
    }

    /// Penalty scales `s_j`.
    pub fn penalty_scales(&self) -> Vec<f64> {
        let wbar = self.mean_weight();
        self.x
            .iter()
            .map(|x| {
                let ss: f64 = match &self.weights {
                    None => x.iter().map(|v| v * v).sum(),
                    Some(w) => x.iter().zip(w).map(|(v, w)| w / wbar * v * v).sum(),
                };
                ss.sqrt()
            })
            .collect()
    }

    pub fn residuals(&self, b: &[f64]) -> Vec<f64> {
        let mut r = self.y.to_vec();
        for (x, &bj) in self.x.iter().zip(b) {
            if bj != 0.0 {
                for (ri, xi) in r.iter_mut().zip(*x) {
                    *ri -= bj * xi;
                }
            }
        }
        r
    }

    pub fn weighted_rss(&self, b: &[f64]) -> f64 {
        self.residuals(b).iter().enumerate().map(|(t, r)| self.w(t) * r * r).sum()
    }

    pub fn objective(&self, b: &[f64], lambda: f64) -> f64 {
        let s = self.penalty_scales();
        let pen: f64 = (0..self.p()).filter(|&j| self.penalize[j]).map(|j| s[j] * b[j].abs()).sum();
        self.weighted_rss(b) + lambda * pen
    }

    /// `m ln(RSS_w / m) + df ln m`; `-inf` when the fit is exact.
    pub fn weighted_bic(&self, b: &[f64]) -> f64 {
        bic(self.m(), b, self.weighted_rss(b))
    }

    /// Smallest lambda at which every penalized coefficient is zero, given
    /// the unpenalized columns at their optimum.
    pub fn lambda_max(&self) -> Result<f64> {
        if self.y.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateGrid("response is identically zero".into()));
        }
        let mut solver = Solver::new(self);
        solver.fit_unpenalized(1e-13, 100_000);
        Ok(solver.lambda_max_raw())
    }

    /// `count` log-spaced values from `lambda_max` down to `lambda_max * ratio`.
    pub fn lambda_grid(&self, count: usize, ratio: f64) -> Result<Vec<f64>> {
        LassoSettings { n_lambda: count, lambda_ratio: ratio, ..LassoSettings::default() }.validate()?;
        let lmax = self.lambda_max()?;
        Ok(log_grid(lmax, count, ratio))
    }

    /// Standardized KKT violation of raw coefficients `b` at `lambda`.
    pub fn kkt_residual(&self, b: &[f64], lambda: f64) -> f64 {
        let mut solver = Solver::new(self);
        solver.load(b);
        solver.kkt(solver.internal_lambda(lambda))
    }

    /// Coordinate descent at a single `lambda` from a warm start.
    pub fn coordinate_descent(&self, lambda: f64, warm: &[f64], tol: f64, max_sweeps: usize) -> Result<Descent> {
        if warm.len() != self.p() {
            return Err(Error::LengthMismatch { expected: self.p(), got: warm.len() });
        }
        if !(lambda >= 0.0) {
            return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
        }
        let mut solver = Solver::new(self);
        if solver.nu == 0.0 {
            return Ok(Descent {
                coefficients: vec![0.0; self.p()],
                sweeps: 0,
                converged: true,
                monotonicity_violations: 0,
                kkt_residual: 0.0,
            });
        }
        solver.load(warm);
        if self.nonnegative {
            solver.project_nonnegative();
        }
        let lam = solver.internal_lambda(lambda);
        let out = solver.solve(lam, tol, max_sweeps);
        if !out.converged {
            log::warn!("coordinate descent hit {max_sweeps} sweeps at lambda {lambda}");
        }
        Ok(Descent { coefficients: solver.coefficients(), ..out })
    }

    /// Warm-started path over the default-style grid with BIC selection
    /// (ties go to the larger lambda).
    pub fn fit_path_bic(&self, settings: &LassoSettings) -> Result<LassoFit> {
        settings.validate()?;
        if self.y.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateGrid("response is identically zero".into()));
        }
        let mut solver = Solver::new(self);
        let (ret, violations) = solver.fit_unpenalized(settings.tol * 1e-3, settings.max_sweeps);
        let lmax = solver.lambda_max_raw();
        let lambdas = if lmax > 0.0 {
            log_grid(lmax, settings.n_lambda, settings.lambda_ratio)
        } else {
            vec![0.0]
        };
        let mut fit = LassoFit {
            lambdas: Vec::with_capacity(lambdas.len()),
            path: Vec::new(),
            bic: Vec::new(),
            df: Vec::new(),
            sweeps: Vec::new(),
            selected: 0,
            lambda: 0.0,
            coefficients: Vec::new(),
            objective: 0.0,
            initial_objective: 0.0,
            converged: ret,
            monotonicity_violations: violations,
            kkt_residual: 0.0,
            perfect_fit: false,
        };
        for &lambda in &lambdas {
            let lam = solver.internal_lambda(lambda);
            let out = solver.solve(lam, settings.tol, settings.max_sweeps);
            let b = solver.coefficients();
            fit.converged &= out.converged;
            fit.monotonicity_violations += out.monotonicity_violations;
            fit.kkt_residual = fit.kkt_residual.max(out.kkt_residual);
            // The maintained RSS loses relative accuracy near an exact fit.
            let scaled = solver.rss();
            let rss = if scaled < 1e-6 {
                self.weighted_rss(&b)
            } else {
                solver.wbar * solver.nu * solver.nu * scaled
            };
            fit.bic.push(bic(self.m(), &b, rss));
            fit.df.push(b.iter().filter(|v| **v != 0.0).count());
            fit.sweeps.push(out.sweeps);
            fit.lambdas.push(lambda);
            fit.path.push(b);
        }
        if !fit.converged {
            log::warn!("lasso path did not fully converge within {} sweeps", settings.max_sweeps);
        }
        let mut best = 0;
        for k in 1..fit.bic.len() {
            if fit.bic[k] < fit.bic[best] {
                best = k;
            }
        }
        fit.selected = best;
        fit.lambda = fit.lambdas[best];
        fit.coefficients = fit.path[best].clone();
        fit.objective = self.objective(&fit.coefficients, fit.lambda);
        fit.initial_objective = self.objective(&vec![0.0; self.p()], fit.lambda);
        fit.perfect_fit = fit.bic[best] == f64::NEG_INFINITY;
        if fit.perfect_fit {
            log::warn!("lasso response fitted exactly; BIC is -inf");
        }
        Ok(fit)
    }
}

fn bic(m: usize, b: &[f64], rss: f64) -> f64 {
    let m = m as f64;
    let df = b.iter().filter(|v| **v != 0.0).count() as f64;
    if rss <= 0.0 {
        return f64::NEG_INFINITY;
    }
    m * (rss / m).ln() + df * m.ln()
}

fn log_grid(lmax: f64, count: usize, ratio: f64) -> Vec<f64> {
    let (hi, lo) = (lmax.ln(), (lmax * ratio).ln());
    (0..count)
        .map(|k| {
            if k == 0 {
                lmax
            } else if k == count - 1 {
                lmax * ratio
            } else {
                (hi + (lo - hi) * k as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Coordinate descent state on the standardized, response-scaled problem,
/// using covariance updates: the gradient is maintained from Gram columns,
/// computed once for each column the first time it enters the model.
struct Solver<'p, 'a> {
    prob: &'p LassoProblem<'a>,
    /// Weights divided by their mean; `None` for unit weights.
    v: Option<Vec<f64>>,
    wbar: f64,
    /// `sqrt(sum v y^2)`.
    nu: f64,
    s: Vec<f64>,
    inv_s: Vec<f64>,
    gamma: Vec<f64>,
    /// Standardized columns against the scaled response.
    c: Vec<f64>,
    /// Current gradient half, `c - G gamma`.
    g: Vec<f64>,
    gram: Vec<Option<Vec<f64>>>,
}

/// Objective increases below this (the scaled total sum of squares is 1)
/// are rounding noise, not monotonicity violations.
const OBJECTIVE_NOISE: f64 = 1e-12;

impl<'p, 'a> Solver<'p, 'a> {
    fn new(prob: &'p LassoProblem<'a>) -> Self {
        let wbar = prob.mean_weight();
        let v = prob.weights.as_ref().map(|w| w.iter().map(|x| x / wbar).collect::<Vec<f64>>());
        let nu = match &v {
            None => prob.y.iter().map(|y| y * y).sum::<f64>().sqrt(),
            Some(v) => prob.y.iter().zip(v).map(|(y, v)| v * y * y).sum::<f64>().sqrt(),
        };
        let s = prob.penalty_scales();
        let inv_s: Vec<f64> = s.iter().map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 }).collect();
        let c: Vec<f64> = if nu > 0.0 {
            (0..prob.p())
                .into_par_iter()
                .map(|j| inv_s[j] * dot(prob.x[j], prob.y, v.as_deref()) / nu)
                .collect()
        } else {
            vec![0.0; prob.p()]
        };
        let p = prob.p();
        Self { prob, v, wbar, nu, s, inv_s, gamma: vec![0.0; p], g: c.clone(), c, gram: vec![None; p] }
    }

    fn internal_lambda(&self, lambda: f64) -> f64 {
        if self.nu > 0.0 {
            lambda / (self.wbar * self.nu)
        } else {
            0.0
        }
    }

    fn ensure_gram(&mut self, j: usize) {
        if self.gram[j].is_some() {
            return;
        }
        let xj = self.prob.x[j];
        let (x, inv_s, v, gram) = (&self.prob.x, &self.inv_s, self.v.as_deref(), &self.gram);
        let col = (0..x.len())
            .into_par_iter()
            .map(|k| match &gram[k] {
                Some(known) => known[j],
                None if inv_s[k] == 0.0 => 0.0,
                None => inv_s[k] * inv_s[j] * dot(x[k], xj, v),
            })
            .collect();
        self.gram[j] = Some(col);
    }

    fn set(&mut self, j: usize, new: f64) {
        let delta = new - self.gamma[j];
        if delta == 0.0 {
            return;
        }
        self.ensure_gram(j);
        let col = self.gram[j].as_ref().expect("gram column");
        for (g, gk) in self.g.iter_mut().zip(col) {
            *g -= gk * delta;
        }
        self.gamma[j] = new;
    }

    fn load(&mut self, b: &[f64]) {
        if self.nu == 0.0 {
            return;
        }
        for j in 0..self.gamma.len() {
            let target = if self.s[j] > 0.0 { b[j] * self.s[j] / self.nu } else { 0.0 };
            self.set(j, target);
        }
        self.refresh_gradient();
    }

    fn project_nonnegative(&mut self) {
        for j in 0..self.gamma.len() {
            if !(self.gamma[j] > 0.0) && self.gamma[j] != 0.0 {
                self.set(j, 0.0);
            }
        }
        self.refresh_gradient();
    }

    /// Recomputes `g` exactly from the cached Gram columns.
    fn refresh_gradient(&mut self) {
        self.g.copy_from_slice(&self.c);
        for (k, &gk) in self.gamma.iter().enumerate() {
            if gk != 0.0 {
                let col = self.gram[k].as_ref().expect("gram column of an active coefficient");
                for (g, v) in self.g.iter_mut().zip(col) {
                    *g -= v * gk;
                }
            }
        }
    }

    fn coefficients(&self) -> Vec<f64> {
        self.gamma
            .iter()
            .zip(&self.inv_s)
            .map(|(g, is)| if *g == 0.0 { 0.0 } else { g * self.nu * is })
            .collect()
    }

    /// Scaled weighted residual sum of squares, `1 - gamma'(c + g)`.
    fn rss(&self) -> f64 {
        if self.nu == 0.0 {
            return 0.0;
        }
        let fitted: f64 = self
            .gamma
            .iter()
            .enumerate()
            .filter(|(_, g)| **g != 0.0)
            .map(|(j, g)| g * (self.c[j] + self.g[j]))
            .sum();
        1.0 - fitted
    }

    fn objective(&self, lam: f64) -> f64 {
        let pen: f64 = self
            .gamma
            .iter()
            .zip(&self.prob.penalize)
            .filter(|(_, p)| **p)
            .map(|(g, _)| g.abs())
            .sum();
        self.rss() + lam * pen
    }

    fn update(&mut self, j: usize, lam: f64) -> f64 {
        if self.s[j] == 0.0 {
            return 0.0;
        }
        let old = self.gamma[j];
        let rho = self.g[j] + old;
        let mut new = if self.prob.penalize[j] { soft_threshold(rho, lam / 2.0) } else { rho };
        if self.prob.nonnegative && !(new > 0.0) {
            new = 0.0;
        }
        self.set(j, new);
        (new - old).abs()
    }

    fn sweep(&mut self, coords: &[usize], lam: f64) -> f64 {
        let mut max = 0.0f64;
        for &j in coords {
            max = max.max(self.update(j, lam));
        }
        max
    }

    fn kkt(&self, lam: f64) -> f64 {
        let half = lam / 2.0;
        (0..self.gamma.len())
            .filter(|&j| self.s[j] > 0.0)
            .map(|j| {
                let g = self.g[j];
                let gam = self.gamma[j];
                if !self.prob.penalize[j] {
                    if self.prob.nonnegative && gam == 0.0 {
                        g.max(0.0)
                    } else {
                        g.abs()
                    }
                } else if gam != 0.0 {
                    (g - gam.signum() * half).abs()
                } else if self.prob.nonnegative {
                    (g - half).max(0.0)
                } else {
                    (g.abs() - half).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    fn violated(&self, lam: f64, prev: &mut f64, violations: &mut usize) {
        let obj = self.objective(lam);
        if obj > *prev + OBJECTIVE_NOISE + 1e-10 * prev.abs() {
            *violations += 1;
        }
        *prev = obj;
    }

    /// Solves with every penalized coefficient held at zero; returns
    /// `(converged, monotonicity violations)`.
    fn fit_unpenalized(&mut self, tol: f64, max_sweeps: usize) -> (bool, usize) {
        let coords: Vec<usize> = (0..self.gamma.len()).filter(|&j| !self.prob.penalize[j]).collect();
        if coords.is_empty() || self.nu == 0.0 {
            return (true, 0);
        }
        let mut prev = self.objective(0.0);
        let mut violations = 0;
        for _ in 0..max_sweeps {
            let chg = self.sweep(&coords, 0.0);
            self.violated(0.0, &mut prev, &mut violations);
            if chg < tol {
                self.refresh_gradient();
                return (true, violations);
            }
            if self.refine(&coords, 0.0) {
                prev = self.objective(0.0);
            }
        }
        self.refresh_gradient();
        (false, violations)
    }

    fn lambda_max_raw(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.gamma.len() {
            if !self.prob.penalize[j] || self.s[j] == 0.0 {
                continue;
            }
            let g = if self.prob.nonnegative { self.g[j].max(0.0) } else { self.g[j].abs() };
            best = best.max(g);
        }
        // Back to the raw scale: lambda = 2 * wbar * nu * g.
        2.0 * self.wbar * self.nu * best
    }

    /// Newton step on the active set with the current signs. When a
    /// coefficient would cross zero (or leave the feasible region) the step
    /// stops where the first one reaches zero and that coefficient is set to
    /// zero exactly; the objective is quadratic along the segment and
    /// decreasing towards the full step. Kept only if the objective does not
    /// increase.
    fn refine(&mut self, active: &[usize], lam: f64) -> bool {
        let a: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&j| self.s[j] > 0.0 && (self.gamma[j] != 0.0 || !self.prob.penalize[j]))
            .collect();
        let k = a.len();
        if k == 0 || k > 400 {
            return false;
        }
        for &j in &a {
            self.ensure_gram(j);
        }
        let gram = DMatrix::<f64>::from_fn(k, k, |p, q| self.gram[a[q]].as_ref().expect("gram column")[a[p]]);
        let rhs = DVector::from_iterator(
            k,
            a.iter().map(|&j| {
                let pen = if self.prob.penalize[j] { self.gamma[j].signum() * lam / 2.0 } else { 0.0 };
                self.g[j] - pen
            }),
        );
        let Some(chol) = gram.cholesky() else {
            return false;
        };
        let delta = chol.solve(&rhs);
        if delta.iter().any(|d| !d.is_finite()) {
            return false;
        }
        // Largest step keeping every sign-constrained coefficient on its side.
        let mut step = 1.0f64;
        let mut blocking = None;
        for (p, &j) in a.iter().enumerate() {
            let old = self.gamma[j];
            let constrained = self.prob.penalize[j] || self.prob.nonnegative;
            if constrained && old != 0.0 && (old + delta[p]) * old <= 0.0 {
                let t = -old / delta[p];
                if t < step {
                    step = t;
                    blocking = Some(p);
                }
            }
        }
        if step <= 0.0 {
            return false;
        }
        let before = self.objective(lam);
        let saved_gamma = self.gamma.clone();
        let saved_g = self.g.clone();
        for (p, &j) in a.iter().enumerate() {
            let new = if blocking == Some(p) { 0.0 } else { self.gamma[j] + step * delta[p] };
            self.set(j, new);
        }
        self.refresh_gradient();
        if self.objective(lam) > before {
            self.gamma = saved_gamma;
            self.g = saved_g;
            return false;
        }
        true
    }

    fn solve(&mut self, lam: f64, tol: f64, max_sweeps: usize) -> Descent {
        let p = self.gamma.len();
        let all: Vec<usize> = (0..p).collect();
        let kkt_target = 10.0 * tol;
        let mut sweeps = 0;
        let mut violations = 0;
        let mut prev = self.objective(lam);
        let mut converged = false;
        let mut kkt = f64::INFINITY;
        while sweeps < max_sweeps {
            let chg = self.sweep(&all, lam);
            sweeps += 1;
            self.violated(lam, &mut prev, &mut violations);
            if chg < tol {
                self.refresh_gradient();
                kkt = self.kkt(lam);
                if kkt <= kkt_target {
                    converged = true;
                    break;
                }
            }
            let active: Vec<usize> = (0..p).filter(|&j| self.gamma[j] != 0.0).collect();
            let mut inner = 0;
            while sweeps < max_sweeps {
                let chg = self.sweep(&active, lam);
                sweeps += 1;
                inner += 1;
                self.violated(lam, &mut prev, &mut violations);
                if chg < tol {
                    break;
                }
                if inner % 50 == 0 && self.refine(&active, lam) {
                    prev = self.objective(lam);
                }
            }
            if self.refine(&active, lam) {
                prev = self.objective(lam);
            }
        }
        self.refresh_gradient();
        if !converged {
            kkt = self.kkt(lam);
            converged = kkt <= kkt_target;
        }
        Descent { coefficients: Vec::new(), sweeps, converged, monotonicity_violations: violations, kkt_residual: kkt }
    }
}

/// Weighted inner product with independent partial sums, so the loop
/// vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64], w: Option<&[f64]>) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0f64; LANES];
    let n = a.len().min(b.len());
    let split = n - n % LANES;
    let (a, b) = (&a[..n], &b[..n]);
    match w {
        None => {
            for (ca, cb) in a[..split].chunks_exact(LANES).zip(b[..split].chunks_exact(LANES)) {
                for k in 0..LANES {
                    acc[k] += ca[k] * cb[k];
                }
            }
            acc.iter().sum::<f64>() + (split..n).map(|t| a[t] * b[t]).sum::<f64>()
        }
        Some(w) => {
            let w = &w[..n];
            for ((ca, cb), cw) in a[..split]
                .chunks_exact(LANES)
                .zip(b[..split].chunks_exact(LANES))
                .zip(w[..split].chunks_exact(LANES))
            {
                for k in 0..LANES {
                    acc[k] += cw[k] * ca[k] * cb[k];
                }
            }
            acc.iter().sum::<f64>() + (split..n).map(|t| w[t] * a[t] * b[t]).sum::<f64>()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_problem(rng: &mut ChaCha8Rng, m: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..p).map(|_| (0..m).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let y: Vec<f64> = (0..m)
            .map(|t| x.iter().enumerate().map(|(j, c)| c[t] * (j as f64 - 1.5)).sum::<f64>() + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..3.0)).collect();
        (x, y, w)
    }

    fn wls(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
        let p = x.len();
        let a = DMatrix::from_fn(p, p, |i, j| (0..y.len()).map(|t| w[t] * x[i][t] * x[j][t]).sum());
        let b = DVector::from_fn(p, |i, _| (0..y.len()).map(|t| w[t] * x[i][t] * y[t]).sum());
        a.lu().solve(&b).unwrap().iter().copied().collect()
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert!(soft_threshold(-0.5, 1.0).is_sign_positive());
        assert_eq!(soft_threshold(-2.5, 0.0), -2.5);
    }

    #[test]
    fn lambda_zero_matches_weighted_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, y, w) = random_problem(&mut rng, 5, 3);
        let cols: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
        let prob = LassoProblem::new(cols, &y).unwrap().with_weights(w.clone()).unwrap();
        let d = prob.coordinate_descent(0.0, &[0.0; 3], 1e-10, 100_000).unwrap();
        let b = wls(&x, &y, &w);
        for (a, e) in d.coefficients.iter().zip(&b) {
            assert!((a - e).abs() < 1e-6, "{a} vs {e}");
        }
        assert_eq!(d.monotonicity_violations, 0);
    }

    #[test]
    fn one_dimensional_closed_form_and_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, y, w) = random_problem(&mut rng, 40, 1);
        let prob = LassoProblem::new(vec![&x[0]], &y).unwrap().with_weights(w.clone()).unwrap();
        let s = prob.penalty_scales()[0];
        let xwy: f64 = (0..40).map(|t| w[t] * x[0][t] * y[t]).sum();
        let xwx: f64 = (0..40).map(|t| w[t] * x[0][t] * x[0][t]).sum();
        for lambda in [0.0, 1.0, 10.0, 50.0] {
            let b = prob.coordinate_descent(lambda, &[0.0], 1e-12, 1000).unwrap().coefficients[0];
            let closed = soft_threshold(xwy, lambda * s / 2.0) / xwx;
            assert!((b - closed).abs() < 1e-9);
            let (mut best, mut arg) = (f64::INFINITY, 0.0);
            for k in -40_000..=40_000 {
                let c = k as f64 * 1e-4;
                let o = prob.objective(&[c], lambda);
                if o < best {
                    best = o;
                    arg = c;
                }
            }
            assert!((b - arg).abs() < 1e-4);
        }
        let lmax = prob.lambda_max().unwrap();
        assert!((lmax - 2.0 * xwy.abs() / s).abs() < 1e-9 * lmax);
        let at = prob.coordinate_descent(lmax * (1.0 + 1e-12), &[0.0], 1e-12, 100).unwrap();
        assert_eq!(at.coefficients[0], 0.0);
    }

    #[test]
    fn standardized_column_lambda_max() {
        // Unit weighted norm column: s = 1 and lambda_max = 2 |x'Wy|.
        let x = vec![0.6, 0.8, 0.0];
        let y = vec![1.0, 2.0, 3.0];
        let prob = LassoProblem::new(vec![&x], &y).unwrap();
        assert!((prob.penalty_scales()[0] - 1.0).abs() < 1e-15);
        assert!((prob.lambda_max().unwrap() - 2.0 * 2.2).abs() < 1e-12);
    }

    #[test]
    fn grid_shape_and_weight_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x, y, w) = random_problem(&mut rng, 30, 4);
        let cols: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
        let p1 = LassoProblem::new(cols.clone(), &y).unwrap().with_weights(w.clone()).unwrap();
        let g = p1.lambda_grid(2, 0.01).unwrap();
        assert_eq!(g.len(), 2);
        assert!((g[1] - g[0] * 0.01).abs() < 1e-12 * g[0]);
        let p3 = LassoProblem::new(cols, &y).unwrap().with_weights(w.iter().map(|v| v * 7.0).collect()).unwrap();
        assert!((p3.lambda_max().unwrap() - 7.0 * p1.lambda_max().unwrap()).abs() < 1e-9 * p1.lambda_max().unwrap());
        let zero = vec![0.0; 30];
        assert!(matches!(
            LassoProblem::new(vec![&x[0]], &zero).unwrap().lambda_grid(10, 0.1),
            Err(Error::DegenerateGrid(_))
        ));
        assert!(p1.lambda_grid(1, 0.1).is_err());
        assert!(p1.lambda_grid(5, 1.5).is_err());
    }

    #[test]
    fn nonnegative_constraint_binds_exactly() {
        let x: Vec<f64> = (0..20).map(|t| t as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v + 1.0).collect();
        let prob = LassoProblem::new(vec![&x], &y).unwrap().nonnegative(true);
        let d = prob.coordinate_descent(0.0, &[5.0], 1e-10, 100).unwrap();
        assert_eq!(d.coefficients[0].to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn unpenalized_column_and_lambda_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mut x, y, _) = random_problem(&mut rng, 60, 3);
        x[0] = vec![1.0; 60];
        let y: Vec<f64> = y.iter().map(|v| v + 10.0).collect();
        let cols: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
        let prob = LassoProblem::new(cols, &y).unwrap().unpenalized(0).unwrap();
        let lmax = prob.lambda_max().unwrap();
        let d = prob.coordinate_descent(lmax * 1.000001, &[0.0; 3], 1e-12, 10_000).unwrap();
        assert_eq!(&d.coefficients[1..], &[0.0, 0.0]);
        let mean = y.iter().sum::<f64>() / 60.0;
        assert!((d.coefficients[0] - mean).abs() < 1e-8);
        let d = prob.coordinate_descent(lmax * 0.9, &[0.0; 3], 1e-12, 10_000).unwrap();
        assert!(d.coefficients[1..].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn bic_formula() {
        let y = vec![1.0, -1.0, 2.0, -2.0];
        let x = vec![0.0, 0.0, 0.0, 1.0];
        let prob = LassoProblem::new(vec![&x], &y).unwrap();
        let m = 4.0f64;
        assert!((prob.weighted_bic(&[0.0]) - m * (10.0 / m).ln()).abs() < 1e-12);
        // Useless coefficient on a column that never moves the fit.
        let z = vec![0.0; 4];
        let prob2 = LassoProblem::new(vec![&x, &z], &y).unwrap();
        assert!((prob2.weighted_bic(&[0.0, 3.0]) - prob2.weighted_bic(&[0.0, 0.0]) - m.ln()).abs() < 1e-12);
        let exact = LassoProblem::new(vec![&y], &y).unwrap();
        assert_eq!(exact.weighted_bic(&[1.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn path_selects_true_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 400;
        let x: Vec<Vec<f64>> = (0..10).map(|_| (0..m).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let y: Vec<f64> = (0..m).map(|t| 2.0 * x[3][t] + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let cols: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
        let fit = LassoProblem::new(cols, &y).unwrap().fit_path_bic(&LassoSettings::default()).unwrap();
        let support: Vec<usize> = (0..10).filter(|&j| fit.coefficients[j] != 0.0).collect();
        assert_eq!(support, vec![3]);
        assert!(fit.converged);
        assert_eq!(fit.monotonicity_violations, 0);
        assert!(fit.objective <= fit.initial_objective);
        assert!(fit.kkt_residual <= 1e-6);
    }

    #[test]
    fn pure_noise_selects_empty_model() {
        let mut hits = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let m = 300;
            let x: Vec<Vec<f64>> = (0..8).map(|_| (0..m).map(|_| rng.sample(StandardNormal)).collect()).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            let cols: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
            let fit = LassoProblem::new(cols, &y).unwrap().fit_path_bic(&LassoSettings::default()).unwrap();
            hits += fit.coefficients.iter().all(|v| *v == 0.0) as usize;
        }
        assert!(hits >= 17, "empty model in {hits}/20 runs");
    }

    #[test]
    fn warm_and_cold_starts_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (x, y, w) = random_problem(&mut rng, 80, 6);
        let cols: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
        let prob = LassoProblem::new(cols, &y).unwrap().with_weights(w).unwrap();
        let settings = LassoSettings { n_lambda: 20, tol: 1e-13, ..LassoSettings::default() };
        let fit = prob.fit_path_bic(&settings).unwrap();
        for (lambda, warm) in fit.lambdas.iter().zip(&fit.path) {
            let cold = prob.coordinate_descent(*lambda, &[0.0; 6], 1e-13, 100_000).unwrap();
            for (a, b) in warm.iter().zip(&cold.coefficients) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn constant_response_with_intercept_is_perfect_fit() {
        let one = vec![1.0; 50];
        let x: Vec<f64> = (0..50).map(|t| (t % 7) as f64).collect();
        let y = vec![4.0; 50];
        let prob = LassoProblem::new(vec![&one, &x], &y).unwrap().unpenalized(0).unwrap();
        let fit = prob.fit_path_bic(&LassoSettings::default()).unwrap();
        assert!(fit.perfect_fit);
        assert!((fit.coefficients[0] - 4.0).abs() < 1e-12);
        assert_eq!(fit.coefficients[1], 0.0);
    }

    #[test]
    fn correlated_design_converges() {
        // Threshold-style columns max(x, c) are strongly collinear.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = 2000;
        let base: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..15.0)).collect();
        let mut x: Vec<Vec<f64>> = vec![vec![1.0; m]];
        for c in 0..10 {
            x.push(base.iter().map(|v| v.max(c as f64 * 1.5)).collect());
        }
        let y: Vec<f64> = base
            .iter()
            .map(|v| 3.0 * v - 2.0 * v.max(6.0) + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let cols: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
        let prob = LassoProblem::new(cols, &y).unwrap().unpenalized(0).unwrap();
        let fit = prob.fit_path_bic(&LassoSettings::default()).unwrap();
        assert!(fit.converged, "sweeps {:?}", fit.sweeps);
        assert_eq!(fit.monotonicity_violations, 0);
        assert!(fit.kkt_residual <= 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn replicated_rows_leave_ls_solution(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, y, w) = random_problem(&mut rng, 12, 3);
            let cols: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
            let a = LassoProblem::new(cols, &y).unwrap().with_weights(w.clone()).unwrap()
                .coordinate_descent(0.0, &[0.0; 3], 1e-12, 100_000).unwrap();
            let x2: Vec<Vec<f64>> = x.iter().map(|c| c.iter().chain(c).copied().collect()).collect();
            let y2: Vec<f64> = y.iter().chain(&y).copied().collect();
            let w2: Vec<f64> = w.iter().chain(&w).copied().collect();
            let cols2: Vec<&[f64]> = x2.iter().map(|c| c.as_slice()).collect();
            let b = LassoProblem::new(cols2, &y2).unwrap().with_weights(w2).unwrap()
                .coordinate_descent(0.0, &[0.0; 3], 1e-12, 100_000).unwrap();
            for (u, v) in a.coefficients.iter().zip(&b.coefficients) {
                prop_assert!((u - v).abs() < 1e-7);
            }
        }

        #[test]
        fn nonnegative_fits_have_no_negative_bits(seed in 0u64..1000, frac in 0.01f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, y, _) = random_problem(&mut rng, 40, 5);
            let cols: Vec<&[f64]> = x.iter().map(|c| c.as_slice()).collect();
            let prob = LassoProblem::new(cols, &y).unwrap().nonnegative(true);
            let lmax = prob.lambda_max().unwrap();
            let d = prob.coordinate_descent(lmax * frac, &[0.0; 5], 1e-9, 100_000).unwrap();
            prop_assert!(d.coefficients.iter().all(|v| v.is_sign_positive()));
            prop_assert!(d.kkt_residual <= 1e-8);
            prop_assert_eq!(d.monotonicity_violations, 0);
        }
    }
}
