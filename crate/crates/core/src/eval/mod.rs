//! Rolling-origin backtests and forecast error metrics.

mod backtest;
mod metrics;

pub use backtest::{
    run_backtest, sample_origins, BacktestReport, BacktestSpec, Failure, LassoForecaster, ModelReport, ModelSpec,
    RefitPolicy, DENSITY_HORIZONS, LASSO_ID, SUMMARY_HORIZONS,
};
pub use metrics::{abs_errors, dmae, error_density, linear_grid, mae, mae_standard_deviation, silverman_bandwidth};
