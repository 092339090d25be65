use crate::error::{Error, Result};
use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;

/// ARMA(1,1) `x_t = c + phi x_{t-1} + theta e_{t-1} + e_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmaFit {
    pub phi: f64,
    pub theta: f64,
    pub intercept: f64,
    pub sigma2: f64,
    /// Concentrated conditional log-likelihood.
    pub loglik: f64,
    /// An estimate ended within 1e-3 of the unit bound.
    pub boundary: bool,
    pub converged: bool,
}

/// Residuals with `e_0 = 0` for intercept `c`.
fn residuals(x: &[f64], c: f64, phi: f64, theta: f64) -> Vec<f64> {
    let mut e = vec![0.0; x.len()];
    for t in 1..x.len() {
        e[t] = x[t] - c - phi * x[t - 1] - theta * e[t - 1];
    }
    e
}

/// Intercept minimizing the conditional sum of squares, and that sum.
/// The residuals are affine in `c`: `e_t(c) = e_t(0) - c g_t`.
fn profile(x: &[f64], phi: f64, theta: f64) -> (f64, f64) {
    let (mut e0, mut g) = (0.0, 0.0);
    let (mut eg, mut gg, mut ee) = (0.0, 0.0, 0.0);
    for t in 1..x.len() {
        e0 = x[t] - phi * x[t - 1] - theta * e0;
        g = 1.0 - theta * g;
        eg += e0 * g;
        gg += g * g;
        ee += e0 * e0;
    }
    let c = eg / gg;
    (c, (ee - c * eg).max(0.0))
}

struct Concentrated<'a> {
    x: &'a [f64],
}

impl Concentrated<'_> {
    /// Negative concentrated log-likelihood per observation, in the
    /// unbounded parameters `(atanh phi, atanh theta)`.
    fn value(&self, p: &[f64]) -> f64 {
        let (phi, theta) = (p[0].tanh(), p[1].tanh());
        let m = (self.x.len() - 1) as f64;
        let (_, rss) = profile(self.x, phi, theta);
        0.5 * (rss / m).ln()
    }
}

impl CostFunction for Concentrated<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.value(p))
    }
}

impl Gradient for Concentrated<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;
    fn gradient(&self, p: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let h = 1e-6;
        Ok((0..2)
            .map(|i| {
                let (mut a, mut b) = (p.clone(), p.clone());
                a[i] += h;
                b[i] -= h;
                (self.value(&a) - self.value(&b)) / (2.0 * h)
            })
            .collect())
    }
}

/// Conditional Gaussian maximum likelihood (zero initial innovation) with
/// the intercept and variance profiled out; `(phi, theta)` are searched
/// over the open square `(-1, 1)^2` by L-BFGS on a `tanh` scale.
pub fn fit_arma11_mle(series: &[f64]) -> Result<ArmaFit> {
    let n = series.len();
    if n < 100 {
        return Err(Error::InsufficientHistory { required: 100, available: n });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ARMA input".into()));
    }
    if series.iter().all(|&v| v == series[0]) {
        return Err(Error::Parameter("ARMA(1,1) on a constant series".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for t in 1..n {
        num += (series[t] - mean) * (series[t - 1] - mean);
        den += (series[t - 1] - mean).powi(2);
    }
    let r1 = (num / den).clamp(-0.95, 0.95);
    let problem = Concentrated { x: series };
    let init = vec![r1.atanh(), 0.0];
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), 7)
        .with_tolerance_grad(1e-9)
        .and_then(|s| s.with_tolerance_cost(1e-14))
        .map_err(|e| Error::Model(format!("ARMA optimizer setup: {e}")))?;
    let res = Executor::new(problem, solver)
        .configure(|state| state.param(init).max_iters(500))
        .run()
        .map_err(|e| Error::Model(format!("ARMA optimizer: {e}")))?;
    let state = res.state();
    let best = state.get_best_param().cloned().ok_or_else(|| Error::Model("ARMA optimizer returned no parameters".into()))?;
    let converged = state.get_termination_status().terminated() && state.get_iter() < 500;
    let (phi, theta) = (best[0].tanh(), best[1].tanh());
    let (c, rss) = profile(series, phi, theta);
    let m = (n - 1) as f64;
    let sigma2 = rss / m;
    let loglik = -0.5 * m * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let boundary = phi.abs() > 0.999 || theta.abs() > 0.999;
    if boundary {
        log::warn!("ARMA(1,1) estimate on the boundary: phi {phi}, theta {theta}");
    }
    Ok(ArmaFit { phi, theta, intercept: c, sigma2, loglik, boundary, converged })
}

impl ArmaFit {
    /// Forecasts for horizons `1..=horizon` from the last element of
    /// `history`, rebuilding the innovations over the whole history.
    pub fn forecast(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
        if history.is_empty() {
            return Err(Error::InsufficientHistory { required: 1, available: 0 });
        }
        let e = residuals(history, self.intercept, self.phi, self.theta);
        let last = history.len() - 1;
        let mut out = Vec::with_capacity(horizon);
        let mut prev = self.intercept + self.phi * history[last] + self.theta * e[last];
        for _ in 0..horizon {
            out.push(prev);
            prev = self.intercept + self.phi * prev;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn arma(n: usize, c: f64, phi: f64, theta: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut x, mut e) = (c / (1.0 - phi), 0.0);
        let mut out = Vec::with_capacity(n);
        for t in 0..n + 200 {
            let z: f64 = StandardNormal.sample(&mut rng);
            x = c + phi * x + theta * e + z;
            e = z;
            if t >= 200 {
                out.push(x);
            }
        }
        out
    }

    #[test]
    fn recovers_arma11() {
        let x = arma(50_000, 1.0, 0.7, 0.3, 11);
        let fit = fit_arma11_mle(&x).unwrap();
        assert!((fit.phi - 0.7).abs() < 0.03, "{fit:?}");
        assert!((fit.theta - 0.3).abs() < 0.03, "{fit:?}");
        assert!((fit.intercept - 1.0).abs() < 0.1);
        assert!((fit.sigma2 - 1.0).abs() < 0.05);
        assert!(!fit.boundary);
    }

    #[test]
    fn theta_zero_matches_ar1() {
        let x = arma(20_000, 0.5, 0.6, 0.0, 12);
        let fit = fit_arma11_mle(&x).unwrap();
        let ar = crate::benchmarks::fit_ar_yule_walker(&x, 1).unwrap();
        assert!(fit.theta.abs() < 0.03);
        assert!((fit.phi - ar.coefs[0][(0, 0)]).abs() < 0.02);
    }

    #[test]
    fn profile_matches_direct_residuals() {
        let x = arma(500, 0.3, 0.5, -0.2, 13);
        let (c, rss) = profile(&x, 0.5, -0.2);
        let e = residuals(&x, c, 0.5, -0.2);
        let direct: f64 = e[1..].iter().map(|v| v * v).sum();
        assert!((rss - direct).abs() < 1e-8 * direct);
        // Perturbing c raises the sum.
        let worse: f64 = residuals(&x, c + 0.01, 0.5, -0.2)[1..].iter().map(|v| v * v).sum();
        assert!(worse > direct);
    }

    #[test]
    fn forecast_recursion() {
        let fit = ArmaFit { phi: 0.5, theta: 0.0, intercept: 1.0, sigma2: 1.0, loglik: 0.0, boundary: false, converged: true };
        let f = fit.forecast(&[2.0, 4.0], 3).unwrap();
        assert_eq!(f, vec![3.0, 2.5, 2.25]);
    }

    #[test]
    fn errors() {
        assert!(fit_arma11_mle(&[1.0; 50]).is_err());
        assert!(fit_arma11_mle(&[1.0; 500]).is_err());
    }
}
