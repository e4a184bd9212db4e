//! Numerical laboratory for operational-risk models whose bank-level loss
//! statistics stay fixed as the number of risk cells `N` grows.
//!
//! Cell losses are random exponentials `Y_i = exp(mu_N + t_N X_i)`; the
//! parameter schedules `mu_N`, `t_N` keep the expected bank loss constant.
//! The crate covers the closed-form regime algebra ([`invariance`]), the
//! totally skewed stable laws that appear as fluctuation limits
//! ([`stable_law`]), the latent severity families ([`severity`]) and
//! replication-parallel Monte Carlo studies ([`montecarlo`]).

pub mod error;
pub mod invariance;
pub mod montecarlo;
pub mod quadrature;
pub mod rng;
pub mod severity;
mod solve;
pub mod stable_law;
pub mod stats;

pub use error::{Error, Result};
pub use invariance::{ModelPoint, RegimeReport, Schedule, ScheduleMode};
pub use montecarlo::{Engine, ModelSpec, SimEstimate};
pub use rng::RandomStream;
pub use severity::SeverityFamily;
pub use stable_law::{ParamConvention, StableDist};
