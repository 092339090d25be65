use crate::error::{Error, Result};
use rustfft::{num_complex::Complex, FftPlanner};

/// One smoothed periodogram ordinate; `frequency` is in cycles per time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ordinate {
    pub frequency: f64,
    pub density: f64,
}

/// Raw periodogram `|X_k|^2 / n` of the mean-centred series at Fourier
/// frequencies `k/n`, `k = 1..=n/2`, smoothed by a centred moving average of
/// odd width `span` with triangular weights (renormalised where the window is
/// truncated at the ends). A pure spectral line therefore keeps a unique peak.
///
/// With this scaling `(1/n) * sum_{k=1}^{n-1} I_k` equals the (biased) sample
/// variance.
pub fn smoothed_periodogram(series: &[f64], span: usize) -> Result<Vec<Ordinate>> {
    if span < 1 || span % 2 == 0 {
        return Err(Error::Parameter(format!("span must be odd and >= 1, got {span}")));
    }
    let n = series.len();
    if n < 2 * span || n < 2 {
        return Err(Error::Parameter(format!(
            "series of length {n} too short for span {span}"
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("periodogram input".into()));
    }
    let raw = raw_periodogram(series);
    let half = span / 2;
    let m = raw.len();
    let out = (0..m)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(m);
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (j, v) in raw.iter().enumerate().take(hi).skip(lo) {
                let w = (half + 1 - j.abs_diff(k)) as f64;
                acc += w * v;
                wsum += w;
            }
            let density = acc / wsum;
            Ordinate {
                frequency: (k + 1) as f64 / n as f64,
                density,
            }
        })
        .collect();
    Ok(out)
}

/// Unsmoothed ordinates for `k = 1..=n/2`.
pub(crate) fn raw_periodogram(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let constant = series.iter().all(|&x| x == series[0]);
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|&x| Complex::new(if constant { 0.0 } else { x - mean }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[1..=n / 2].iter().map(|c| c.norm_sqr() / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    #[test]
    fn sinusoid_peaks_at_its_frequency() {
        let n = 14_400;
        let x: Vec<f64> = (0..n).map(|t| (2.0 * PI * t as f64 / 144.0).sin()).collect();
        for span in [1, 3, 7, 21] {
            let s = smoothed_periodogram(&x, span).unwrap();
            let best = s
                .iter()
                .max_by(|a, b| a.density.total_cmp(&b.density))
                .unwrap();
            // 14400 / 144 = 100 cycles: the peak sits exactly on k = 100.
            assert_eq!(best.frequency, 100.0 / 14_400.0, "span {span}");
        }
    }

    #[test]
    fn constant_series_is_flat_zero() {
        let s = smoothed_periodogram(&[0.1; 64], 5).unwrap();
        assert!(s.iter().all(|o| o.density == 0.0));
    }

    #[test]
    fn white_noise_is_flat_and_integrates_to_variance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 14_400;
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let raw = raw_periodogram(&x);
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        // Parseval over k = 1..n-1 using the symmetry I_k = I_{n-k}; n is even.
        let total = 2.0 * raw[..raw.len() - 1].iter().sum::<f64>() + raw[raw.len() - 1];
        assert!((total / n as f64 - var).abs() < 1e-9);

        let s = smoothed_periodogram(&x, 101).unwrap();
        let max = s.iter().map(|o| o.density).fold(f64::MIN, f64::max);
        let min = s.iter().map(|o| o.density).fold(f64::MAX, f64::min);
        assert!(max / min < 6.0, "ratio {}", max / min);
    }

    #[test]
    fn shift_invariant() {
        let x: Vec<f64> = (0..200).map(|t| ((t * 7919) % 97) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 1000.0).collect();
        let a = smoothed_periodogram(&x, 5).unwrap();
        let b = smoothed_periodogram(&y, 5).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p.density - q.density).abs() <= 1e-9 * p.density.max(1.0));
        }
    }

    #[test]
    fn parameter_errors() {
        assert!(smoothed_periodogram(&[1.0; 10], 0).is_err());
        assert!(smoothed_periodogram(&[1.0; 10], 4).is_err());
        assert!(smoothed_periodogram(&[1.0; 10], 7).is_err());
    }
}
