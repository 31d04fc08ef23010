//! Time-varying vector autoregression with multivariate stochastic
//! volatility.
//!
//! The coefficient matrix follows a random walk and the observation
//! covariance a discounted inverse-Wishart evolution. Both are tracked in
//! closed form by a conjugate filter ([`filter`]), which feeds multi-step
//! Student t forecasts ([`forecast`]), sequential Bayes factors and
//! likelihood-based order selection ([`selection`]) and minimum-variance
//! portfolio backtests ([`portfolio`]). [`simulate`] draws data from the
//! generative model.

// `!(x > 0.0)` style checks deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod filter;
pub mod forecast;
pub mod linalg;
pub mod model;
pub mod portfolio;
pub mod selection;
pub mod series;
pub mod simulate;
pub mod student_t;

pub use error::{Result, TvvarError};
pub use filter::{run_filter, run_filter_with, update, FilterOptions, FilterRun, PosteriorState, StepDiagnostics};
pub use forecast::{forecast, forecast_with, FitMetrics, ForecastResult, HorizonDiscount};
pub use model::{build_design, default_prior, Discount, ModelConfig, Prior};
pub use series::{load_csv, save_csv, CsvOptions, SeriesFrame};
