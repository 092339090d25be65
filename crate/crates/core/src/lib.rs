//! Regularised threshold VARMA-TGARCH models for multi-turbine wind speed and
//! power forecasting, with benchmarks and evaluation tooling.

pub mod basis;
pub mod benchmarks;
pub mod error;
pub mod eval;
pub mod features;
pub mod forecast;
pub mod lasso;
pub mod model;
pub mod panel;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
pub use panel::TurbinePanel;
