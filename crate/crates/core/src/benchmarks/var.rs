use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Vector autoregression `x_t - mu = sum_j A_j (x_{t-j} - mu) + e_t`
/// estimated from the Yule-Walker equations.
#[derive(Debug, Clone, PartialEq)]
pub struct VarFit {
    pub order: usize,
    pub mean: Vec<f64>,
    /// `A_1 .. A_order`, each `k x k`.
    pub coefs: Vec<DMatrix<f64>>,
    /// Innovation covariance at the selected order.
    pub sigma: DMatrix<f64>,
    /// AIC for orders `0..=max_order`.
    pub aic: Vec<f64>,
    /// A ridge was added to a singular autocovariance system.
    pub regularized: bool,
}

const RIDGE: f64 = 1e-10;

/// Univariate autoregression; see [`fit_var_yule_walker`].
pub fn fit_ar_yule_walker(series: &[f64], max_order: usize) -> Result<VarFit> {
    fit_var_yule_walker(&[series], max_order)
}

/// Yule-Walker fit at the AIC-minimizing order in `0..=max_order`, using
/// biased sample autocovariances (which keeps the solution stationary).
pub fn fit_var_yule_walker(series: &[&[f64]], max_order: usize) -> Result<VarFit> {
    let k = series.len();
    if k == 0 {
        return Err(Error::Parameter("VAR needs at least one series".into()));
    }
    if max_order == 0 {
        return Err(Error::Parameter("max_order must be >= 1".into()));
    }
    let n = series[0].len();
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::LengthMismatch { expected: n, got: series.iter().map(|s| s.len()).find(|&l| l != n).unwrap_or(n) });
    }
    if n <= 2 * max_order + 1 {
        return Err(Error::InsufficientHistory { required: 2 * max_order + 2, available: n });
    }
    if series.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("autoregression input".into()));
    }
    let mean: Vec<f64> = series.iter().map(|s| s.iter().sum::<f64>() / n as f64).collect();
    let centred: Vec<Vec<f64>> = series.iter().zip(&mean).map(|(s, m)| s.iter().map(|v| v - m).collect()).collect();
    let gamma: Vec<DMatrix<f64>> = (0..=max_order).map(|h| autocovariance(&centred, h)).collect();
    let gamma_at = |h: isize| -> DMatrix<f64> {
        if h >= 0 {
            gamma[h as usize].clone()
        } else {
            gamma[(-h) as usize].transpose()
        }
    };

    let mut regularized = false;
    let mut aic = Vec::with_capacity(max_order + 1);
    let mut fits: Vec<(Vec<DMatrix<f64>>, DMatrix<f64>)> = Vec::with_capacity(max_order + 1);
    let nf = n as f64;
    let (s0, reg0) = log_det(&gamma[0]);
    regularized |= reg0;
    aic.push(nf * s0);
    fits.push((Vec::new(), gamma[0].clone()));
    for p in 1..=max_order {
        let dim = k * p;
        let mut r = DMatrix::<f64>::zeros(dim, dim);
        for j in 0..p {
            for h in 0..p {
                r.view_mut((j * k, h * k), (k, k)).copy_from(&gamma_at(h as isize - j as isize));
            }
        }
        let mut rhs = DMatrix::<f64>::zeros(dim, k);
        for h in 0..p {
            rhs.view_mut((h * k, 0), (k, k)).copy_from(&gamma[h + 1].transpose());
        }
        let (x, reg) = solve_spd(r, rhs);
        regularized |= reg;
        let coefs: Vec<DMatrix<f64>> = (0..p).map(|j| x.view((j * k, 0), (k, k)).transpose()).collect();
        let mut sigma = gamma[0].clone();
        for (j, a) in coefs.iter().enumerate() {
            sigma -= a * gamma[j + 1].transpose();
        }
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        let (ld, reg) = log_det(&sigma);
        regularized |= reg;
        aic.push(nf * ld + 2.0 * (p * k * k) as f64);
        fits.push((coefs, sigma));
    }
    if regularized {
        log::warn!("singular autocovariance system regularized with ridge {RIDGE}");
    }
    let mut order = 0;
    for p in 1..aic.len() {
        if aic[p] < aic[order] {
            order = p;
        }
    }
    let (coefs, sigma) = fits.swap_remove(order);
    Ok(VarFit { order, mean, coefs, sigma, aic, regularized })
}

/// `Gamma(h)[a][b] = (1/n) sum_t x_a[t] x_b[t - h]` of centred series.
fn autocovariance(x: &[Vec<f64>], h: usize) -> DMatrix<f64> {
    let k = x.len();
    let n = x[0].len();
    DMatrix::from_fn(k, k, |a, b| {
        x[a][h..].iter().zip(&x[b][..n - h]).map(|(u, v)| u * v).sum::<f64>() / n as f64
    })
}

fn regular_cholesky(m: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = m.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let chol = m.clone().cholesky()?;
    let l = chol.l_dirty();
    let min_pivot = (0..m.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if scale > 0.0 && min_pivot > 1e-12 * scale {
        Some(chol)
    } else {
        None
    }
}

fn ridged(m: &DMatrix<f64>) -> DMatrix<f64> {
    let scale = m.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
    m + DMatrix::identity(m.nrows(), m.ncols()) * (RIDGE * scale)
}

fn solve_spd(r: DMatrix<f64>, rhs: DMatrix<f64>) -> (DMatrix<f64>, bool) {
    if let Some(chol) = regular_cholesky(&r) {
        return (chol.solve(&rhs), false);
    }
    let r = ridged(&r);
    match r.clone().cholesky() {
        Some(chol) => (chol.solve(&rhs), true),
        None => (r.lu().solve(&rhs).unwrap_or_else(|| DMatrix::zeros(rhs.nrows(), rhs.ncols())), true),
    }
}

/// `ln det` of a covariance matrix, with a ridge when it is singular.
fn log_det(m: &DMatrix<f64>) -> (f64, bool) {
    let (chol, reg) = match regular_cholesky(m) {
        Some(c) => (Some(c), false),
        None => (ridged(m).cholesky(), true),
    };
    match chol {
        Some(c) => (2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>(), reg),
        None => (f64::NEG_INFINITY, true),
    }
}

impl VarFit {
    pub fn k(&self) -> usize {
        self.mean.len()
    }

    /// Companion matrix of the centred recursion (`k*order` square).
    pub fn companion(&self) -> DMatrix<f64> {
        let k = self.k();
        let p = self.order.max(1);
        let mut c = DMatrix::<f64>::zeros(k * p, k * p);
        for (j, a) in self.coefs.iter().enumerate() {
            c.view_mut((0, j * k), (k, k)).copy_from(a);
        }
        for j in 1..p {
            c.view_mut((j * k, (j - 1) * k), (k, k)).fill_with_identity();
        }
        c
    }

    pub fn spectral_radius(&self) -> f64 {
        if self.order == 0 {
            return 0.0;
        }
        self.companion()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Forecasts for horizons `1..=horizon`, `[h - 1][series]`, from series
    /// whose last element is the origin.
    pub fn forecast(&self, history: &[&[f64]], horizon: usize) -> Result<Vec<Vec<f64>>> {
        let k = self.k();
        if history.len() != k {
            return Err(Error::LengthMismatch { expected: k, got: history.len() });
        }
        let p = self.order;
        if history.iter().any(|s| s.len() < p.max(1)) {
            return Err(Error::InsufficientHistory { required: p.max(1), available: history.iter().map(|s| s.len()).min().unwrap_or(0) });
        }
        // Most recent first.
        let mut lags: Vec<DVector<f64>> = (0..p)
            .map(|j| DVector::from_iterator(k, history.iter().zip(&self.mean).map(|(s, m)| s[s.len() - 1 - j] - m)))
            .collect();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let mut next = DVector::<f64>::zeros(k);
            for (a, x) in self.coefs.iter().zip(&lags) {
                next += a * x;
            }
            out.push(next.iter().zip(&self.mean).map(|(v, m)| v + m).collect());
            if p > 0 {
                lags.pop();
                lags.insert(0, next);
            }
        }
        Ok(out)
    }
}
