use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Mean absolute error between aligned forecasts and actuals.
pub fn mae(forecasts: &[f64], actuals: &[f64]) -> Result<f64> {
    Ok(mean(&abs_errors(forecasts, actuals)?))
}

/// `|actual - forecast|`, erroring on length mismatch or non-finite input.
pub fn abs_errors(forecasts: &[f64], actuals: &[f64]) -> Result<Vec<f64>> {
    if forecasts.len() != actuals.len() {
        return Err(Error::LengthMismatch { expected: actuals.len(), got: forecasts.len() });
    }
    if forecasts.is_empty() {
        return Err(Error::Parameter("no forecasts to score".into()));
    }
    forecasts
        .iter()
        .zip(actuals)
        .enumerate()
        .map(|(j, (f, a))| {
            if f.is_finite() && a.is_finite() {
                Ok((a - f).abs())
            } else {
                Err(Error::NonFinite(format!("forecast/actual pair {j}: {f} / {a}")))
            }
        })
        .collect()
}

/// Per-horizon difference to the persistence MAE.
pub fn dmae(mae_k: &[f64], persistence_k: &[f64]) -> Result<Vec<f64>> {
    if mae_k.len() != persistence_k.len() {
        return Err(Error::LengthMismatch { expected: persistence_k.len(), got: mae_k.len() });
    }
    Ok(mae_k.iter().zip(persistence_k).map(|(a, b)| a - b).collect())
}

/// Standard error of the mean absolute error: sample SD of the errors over `sqrt(N)`.
pub fn mae_standard_deviation(abs_errors: &[f64]) -> f64 {
    let n = abs_errors.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(abs_errors);
    let var = abs_errors.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Gaussian kernel density estimate of `errors` evaluated at `grid`.
pub fn error_density(errors: &[f64], grid: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    if errors.is_empty() {
        return Err(Error::Parameter("no errors for the density estimate".into()));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::Parameter(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let norm = 1.0 / (errors.len() as f64 * bandwidth * (2.0 * PI).sqrt());
    Ok(grid
        .iter()
        .map(|&x| {
            errors
                .iter()
                .map(|e| {
                    let u = (x - e) / bandwidth;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect())
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR / 1.34) n^(-1/5)`, with a
/// small positive fallback for degenerate samples.
pub fn silverman_bandwidth(errors: &[f64]) -> f64 {
    let n = errors.len();
    if n < 2 {
        return 1.0;
    }
    let m = mean(errors);
    let sd = (errors.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut s = errors.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let q = |p: f64| s[((p * (n - 1) as f64).round() as usize).min(n - 1)];
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    if h > 0.0 {
        h
    } else {
        1e-3 * m.abs().max(1.0)
    }
}

/// `n` evenly spaced points from `lo` to `hi`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn mae_basics() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(), 3.0);
        assert!(mae(&[f64::NAN], &[1.0]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dmae_basics() {
        let p = [3.0, 4.0];
        assert_eq!(dmae(&p, &p).unwrap(), vec![0.0, 0.0]);
        assert_eq!(dmae(&[1.0, 0.0], &[5.0, 4.0]).unwrap(), vec![-4.0, -4.0]);
    }

    #[test]
    fn standard_error() {
        assert_eq!(mae_standard_deviation(&[2.0; 10]), 0.0);
        // Errors {0, 2}: sample SD sqrt(2), over sqrt(2) gives 1.
        assert!((mae_standard_deviation(&[0.0, 2.0]) - 1.0).abs() < 1e-15);
        let e = [0.3, 1.7, 2.2, 0.1];
        let scaled: Vec<f64> = e.iter().map(|v| 5.0 * v).collect();
        assert!((mae_standard_deviation(&scaled) - 5.0 * mae_standard_deviation(&e)).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_one_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let h = silverman_bandwidth(&e);
        let grid = linear_grid(-8.0, 8.0, 1601);
        let f = error_density(&e, &grid, h).unwrap();
        let step = grid[1] - grid[0];
        let integral = f.iter().sum::<f64>() * step;
        assert!((integral - 1.0).abs() < 1e-3, "{integral}");
        for (a, b) in f.iter().zip(f.iter().rev()).take(800) {
            assert!((a - b).abs() < 0.03, "{a} vs {b}");
        }
    }

    #[test]
    fn point_mass_peaks_at_value() {
        let grid = linear_grid(-5.0, 5.0, 101);
        let f = error_density(&[1.5; 50], &grid, 0.2).unwrap();
        let best = f.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((grid[best] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn wide_bandwidth_flattens() {
        let grid = linear_grid(-1.0, 1.0, 21);
        let f = error_density(&[-0.5, 0.0, 0.7], &grid, 1e6).unwrap();
        let (lo, hi) = f.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!((hi - lo) / hi < 1e-9);
    }

    proptest! {
        #[test]
        fn dmae_differences_are_additive(a in prop::collection::vec(0.0..100.0f64, 5), b in prop::collection::vec(0.0..100.0f64, 5), p in prop::collection::vec(0.0..100.0f64, 5)) {
            let da = dmae(&a, &p).unwrap();
            let db = dmae(&b, &p).unwrap();
            for j in 0..5 {
                prop_assert!(((da[j] - db[j]) - (a[j] - b[j])).abs() < 1e-9);
            }
        }

        #[test]
        fn mae_is_nonnegative_and_shift_invariant(f in prop::collection::vec(-1e3..1e3f64, 1..40), c in -1e3..1e3f64) {
            let a: Vec<f64> = f.iter().map(|v| v * 0.5 + 3.0).collect();
            let m = mae(&f, &a).unwrap();
            prop_assert!(m >= 0.0);
            let fs: Vec<f64> = f.iter().map(|v| v + c).collect();
            let as_: Vec<f64> = a.iter().map(|v| v + c).collect();
            prop_assert!((mae(&fs, &as_).unwrap() - m).abs() < 1e-9 * m.max(1.0));
        }
    }
}
