use windlasso::error::ErrorKind;
use windlasso::features::{Equation, Family};
use windlasso::forecast::{bootstrap_forecast, point_forecast, simulate_synthetic};
use windlasso::model::{fit_joint_model, write_model, EquationFit, TurbineFit};
use windlasso::synthetic::{power_curve, term, threshold_ar};

fn linear(family: Family, lag: usize, coef: f64) -> windlasso::model::Term {
    term(family, 0, lag, f64::NEG_INFINITY, None, coef)
}

fn ar1_truth(phi: f64) -> Vec<TurbineFit> {
    use Family::*;
    vec![TurbineFit {
        speed_mean: EquationFit::from_terms(Equation::SpeedMean, 0, vec![linear(SpeedAr, 1, phi)], 0.0),
        power_mean: EquationFit::from_terms(Equation::PowerMean, 0, vec![linear(PowerSpeed, 0, 1.0)], 0.0),
        speed_vol: EquationFit::from_terms(Equation::SpeedVol, 0, vec![linear(SpeedVolIntercept, 0, 1.0)], 0.0),
        power_vol: EquationFit::from_terms(Equation::PowerVol, 0, vec![linear(PowerVolIntercept, 0, 1.0)], 0.0),
    }]
}

fn moments(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let cov = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / n;
    (mean, var, cov / var)
}

#[test]
fn simulated_ar1_has_theoretical_moments() {
    let phi = 0.9;
    let config = threshold_ar().config;
    let panel = simulate_synthetic(&config, &ar1_truth(phi), 50_000, 11).unwrap();
    let (mean, var, acf1) = moments(panel.speed(0));
    let var_theory = 1.0 / (1.0 - phi * phi);
    assert!(mean.abs() < 0.15, "mean {mean}");
    assert!((var / var_theory - 1.0).abs() < 0.1, "variance {var} vs {var_theory}");
    assert!((acf1 - phi).abs() < 0.01, "lag-1 autocorrelation {acf1}");
    // Power = current speed + unit noise.
    let diff: Vec<f64> = panel.power(0).iter().zip(panel.speed(0)).map(|(p, w)| p - w).collect();
    let (m, v, _) = moments(&diff);
    assert!(m.abs() < 0.03 && (v - 1.0).abs() < 0.05, "power noise mean {m} variance {v}");
}

#[test]
fn same_seed_same_panel() {
    let s = threshold_ar();
    let a = s.simulate(3000, 4).unwrap();
    let b = s.simulate(3000, 4).unwrap();
    let c = s.simulate(3000, 5).unwrap();
    assert_eq!(a.speed_all(), b.speed_all());
    assert_eq!(a.power_all(), b.power_all());
    assert_ne!(a.speed_all(), c.speed_all());
}

#[test]
fn fitting_is_deterministic() {
    let s = threshold_ar();
    let panel = s.simulate(6000, 2).unwrap();
    let text = |_| {
        let mut buf = Vec::new();
        write_model(&fit_joint_model(&panel, &s.config).unwrap(), &mut buf).unwrap();
        buf
    };
    assert_eq!(text(0), text(1));
}

#[test]
fn forecasts_never_read_past_the_origin() {
    let s = threshold_ar();
    let panel = s.simulate(8000, 3).unwrap();
    let model = fit_joint_model(&panel.slice(0..6000).unwrap(), &s.config).unwrap();
    let origin = 7000;
    let truncated = panel.slice(0..origin + 1).unwrap();
    let a = point_forecast(&model, &panel, origin, 144).unwrap();
    let b = point_forecast(&model, &truncated, origin, 144).unwrap();
    assert_eq!(a.speed_point, b.speed_point);
    assert_eq!(a.power_point, b.power_point);
    let a = bootstrap_forecast(&model, &panel, origin, 24, 200, 9).unwrap();
    let b = bootstrap_forecast(&model, &truncated, origin, 24, 200, 9).unwrap();
    assert_eq!(a.speed_quantiles, b.speed_quantiles);
    assert_eq!(a.power_quantiles, b.power_quantiles);
}

#[test]
fn bootstrap_depends_on_seed_only() {
    let s = threshold_ar();
    let panel = s.simulate(6000, 6).unwrap();
    let model = fit_joint_model(&panel, &s.config).unwrap();
    let o = panel.n() - 1;
    let a = bootstrap_forecast(&model, &panel, o, 12, 150, 1).unwrap();
    let b = bootstrap_forecast(&model, &panel, o, 12, 150, 1).unwrap();
    let c = bootstrap_forecast(&model, &panel, o, 12, 150, 2).unwrap();
    assert_eq!(a.power_quantiles, b.power_quantiles);
    assert_ne!(a.power_quantiles, c.power_quantiles);
}

#[test]
fn point_forecast_reverts_to_the_stationary_mean() {
    let s = threshold_ar();
    let panel = s.simulate(20_000, 8).unwrap();
    let model = fit_joint_model(&panel, &s.config).unwrap();
    let f = point_forecast(&model, &panel, panel.n() - 1, 288).unwrap();
    for i in 0..2 {
        let (mean, var, _) = moments(panel.speed(i));
        let far = f.speed_point[287][i];
        // The zero-shock path settles at a fixed point near, not exactly at,
        // the mean of the nonlinear process.
        assert!((far - mean).abs() < var.sqrt(), "turbine {i}: {far} vs mean {mean}");
        assert!((f.speed_point[287][i] - f.speed_point[286][i]).abs() < 1e-6);
    }
}

#[test]
fn empty_residual_pool_is_a_numerical_error() {
    let s = threshold_ar();
    let panel = s.simulate(6000, 1).unwrap();
    let mut model = fit_joint_model(&panel, &s.config).unwrap();
    model.pool.speed.clear();
    model.pool.power.clear();
    let o = panel.n() - 1;
    let err = bootstrap_forecast(&model, &panel, o, 6, 100, 0).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Numerical);
    assert!(point_forecast(&model, &panel, o, 6).is_ok());
}

#[test]
fn insufficient_history_is_rejected() {
    let s = threshold_ar();
    let panel = s.simulate(6000, 1).unwrap();
    let model = fit_joint_model(&panel, &s.config).unwrap();
    let err = point_forecast(&model, &panel, 0, 6).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn periodic_power_follows_the_curve() {
    let s = windlasso::synthetic::periodic(2);
    let panel = s.simulate(5000, 3).unwrap();
    for i in 0..2 {
        let resid: Vec<f64> =
            panel.speed(i).iter().zip(panel.power(i)).map(|(w, p)| p - power_curve(*w)).collect();
        let (m, v, _) = moments(&resid);
        let (_, pv, _) = moments(panel.power(i));
        assert!(m.abs() < 0.1 * pv.sqrt() && v < 0.2 * pv, "turbine {i}: mean {m}, variance {v} of {pv}");
    }
}
