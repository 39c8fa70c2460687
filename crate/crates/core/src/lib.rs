//! Joint pricing and staffing of a GI/GI/1 queue by online stochastic
//! gradient descent with infinitesimal-perturbation-analysis gradients.
//!
//! The controller alternates short simulation cycles with projected gradient
//! steps on `(mu, p)`; see [`controller::Controller`]. Closed-form references
//! for Poisson-arrival queues live in [`oracles`], and [`regret`] measures how
//! much the learning costs relative to running the optimal policy throughout.

// `!(x > 0.0)` is the house idiom for "positive and not NaN".
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controller;
pub mod distributions;
pub mod error;
pub mod gradient;
pub mod market;
pub mod oracles;
pub mod queue;
pub mod regret;

pub use controller::{Controller, Mode, Schedule, Trajectory};
pub use error::{Error, Result};
pub use market::{FeasibleBox, MarketModel, Policy};
pub use queue::QueueSpec;
