//! Randomized one-coordinate IPA gradient estimator.
//!
//! The partial derivatives of the objective depend on the queue only through
//! `E[W] + E[X]`:
//!
//! ```text
//! df/dp  = -lambda(p) - p lambda'(p) + h0 lambda'(p) (E[W] + E[X] + 1/mu)
//! df/dmu =  c'(mu) - h0 (lambda(p) / mu) (E[W] + E[X] + 1/mu)
//! ```
//!
//! Each cycle estimates `E[W] + E[X]` by the average over the tail of the
//! cycle (customers `n > floor(xi d_k)`) and fills one coordinate, chosen by a
//! fair coin.

use crate::distributions::RandomStream;
use crate::error::{Error, Result};
use crate::market::{MarketModel, Policy};
use crate::queue::CycleRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    Mu,
    Price,
}

/// Which coordinates the coin may select.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoinRule {
    Fair,
    Always(Coordinate),
}

impl CoinRule {
    pub fn flip(self, stream: &mut RandomStream) -> Coordinate {
        match self {
            CoinRule::Always(c) => c,
            CoinRule::Fair => {
                if stream.uniform() < 0.5 {
                    Coordinate::Price
                } else {
                    Coordinate::Mu
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientEstimate {
    /// Component along `mu`.
    pub h_mu: f64,
    /// Component along `p`.
    pub h_p: f64,
    pub coordinate: Coordinate,
    /// Tail average of `X_n + W_n`.
    pub tail_mean: f64,
}

/// Mean of `X_n + W_n` over `n > floor(xi d_k)`, normalized by the window size.
pub fn tail_mean(record: &CycleRecord, xi: f64) -> Result<f64> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::invalid(
            "xi",
            format!("must lie in (0, 1) (got {xi})"),
        ));
    }
    let d = record.waits.len();
    let start = (xi * d as f64).floor() as usize;
    if start >= d {
        return Err(Error::EmptyTailWindow { d_k: d, xi });
    }
    let sum: f64 = record.waits[start..]
        .iter()
        .zip(&record.busy_ages[start..])
        .map(|(w, x)| w + x)
        .sum();
    Ok(sum / (d - start) as f64)
}

/// `df/dp` given an estimate of `E[W] + E[X]`.
pub fn price_partial(model: &MarketModel, x: &Policy, w_plus_x: f64) -> f64 {
    let lambda = model.rate(x.p);
    let slope = model.rate_slope(x.p);
    -lambda - x.p * slope + model.h0() * slope * (w_plus_x + 1.0 / x.mu)
}

/// `df/dmu` given an estimate of `E[W] + E[X]`.
pub fn mu_partial(model: &MarketModel, x: &Policy, w_plus_x: f64) -> f64 {
    let lambda = model.rate(x.p);
    model.staffing_slope(x.mu) - model.h0() * (lambda / x.mu) * (w_plus_x + 1.0 / x.mu)
}

/// One-coordinate gradient estimate from a finished cycle.
pub fn estimate_gradient(
    model: &MarketModel,
    record: &CycleRecord,
    xi: f64,
    coin: CoinRule,
    coin_stream: &mut RandomStream,
) -> Result<GradientEstimate> {
    let x = record.policy;
    let tail = tail_mean(record, xi)?;
    let coordinate = coin.flip(coin_stream);
    let (h_mu, h_p) = match coordinate {
        Coordinate::Price => (0.0, price_partial(model, &x, tail)),
        Coordinate::Mu => (mu_partial(model, &x, tail), 0.0),
    };
    Ok(GradientEstimate {
        h_mu,
        h_p,
        coordinate,
        tail_mean: tail,
    })
}

/// Exact gradient `(df/dmu, df/dp)` at supplied steady-state means.
pub fn steady_partials_oracle(
    model: &MarketModel,
    x: &Policy,
    mean_w: f64,
    mean_x: f64,
) -> [f64; 2] {
    let s = mean_w + mean_x;
    [mu_partial(model, x, s), price_partial(model, x, s)]
}
