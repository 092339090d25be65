use crate::error::{Error, Result};
use crate::model::{step, ModelConfig, Shock, TurbineFit, Window};
use crate::panel::{TurbinePanel, STEP_SECONDS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// First retained timestamp of simulated panels (2010-11-01 00:00 UTC).
pub const SIMULATION_START: i64 = 1_288_569_600;

const BURN_IN: usize = 1000;

/// Simulates `n` rows from the recursions given by `truth` with Gaussian
/// standardized innovations, discarding a burn-in of 1000 rows.
pub fn simulate_synthetic(config: &ModelConfig, truth: &[TurbineFit], n: usize, seed: u64) -> Result<TurbinePanel> {
    simulate_synthetic_from(config, truth, n, seed, SIMULATION_START)
}

/// As [`simulate_synthetic`] with the first retained row at `start_ts`.
///
/// Recursions start flat: speed, power and residuals 0, volatilities 1.
pub fn simulate_synthetic_from(
    config: &ModelConfig,
    truth: &[TurbineFit],
    n: usize,
    seed: u64,
    start_ts: i64,
) -> Result<TurbinePanel> {
    let d = truth.len();
    if d == 0 || n == 0 {
        return Err(Error::Parameter("simulation needs at least one turbine and one row".into()));
    }
    let lead = truth.iter().map(TurbineFit::max_lag).max().unwrap_or(0).max(1);
    let total = lead + BURN_IN + n;
    let first = start_ts - ((lead + BURN_IN) as i64) * STEP_SECONDS;
    let ts: Vec<i64> = (0..total as i64).map(|k| first + k * STEP_SECONDS).collect();
    let mut w = Window::zeros(ts, d);
    for i in 0..d {
        w.speed_vol[i][..lead].iter_mut().for_each(|v| *v = 1.0);
        w.power_vol[i][..lead].iter_mut().for_each(|v| *v = 1.0);
    }
    w.attach_basis(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut zs = vec![0.0; d];
    let mut zp = vec![0.0; d];
    for t in lead..total {
        for i in 0..d {
            zs[i] = StandardNormal.sample(&mut rng);
            zp[i] = StandardNormal.sample(&mut rng);
        }
        step(truth, &mut w, t, Shock::Standardized { speed: &zs, power: &zp });
        for i in 0..d {
            for v in [w.speed[i][t], w.power[i][t], w.speed_vol[i][t], w.power_vol[i][t]] {
                if !(v.abs() <= 1e9) {
                    return Err(Error::Unstable { row: t - lead, value: v });
                }
            }
        }
    }
    let keep = lead + BURN_IN..total;
    let labels = (1..=d).map(|i| format!("t{i}")).collect();
    let cut = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> { m.iter().map(|s| s[keep.clone()].to_vec()).collect() };
    TurbinePanel::new(w.timestamps[keep.clone()].to_vec(), labels, cut(&w.speed), cut(&w.power))
}
