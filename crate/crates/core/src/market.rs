//! Economic primitives: demand, staffing cost, the feasible box and the
//! steady-state objective `f(mu, p) = h0 E[Q] + c(mu) - p lambda(p)`.

use std::fmt;
use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};

/// The decision pair: service rate `mu` and price `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    pub mu: f64,
    pub p: f64,
}

impl Policy {
    pub fn new(mu: f64, p: f64) -> Self {
        Self { mu, p }
    }

    pub fn is_finite(&self) -> bool {
        self.mu.is_finite() && self.p.is_finite()
    }

    pub fn distance(&self, other: &Policy) -> f64 {
        (self.mu - other.mu).hypot(self.p - other.p)
    }
}

/// `[mu_lo, mu_hi] x [p_lo, p_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleBox {
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub p_lo: f64,
    pub p_hi: f64,
}

impl FeasibleBox {
    pub fn new(mu_lo: f64, mu_hi: f64, p_lo: f64, p_hi: f64) -> Result<Self> {
        let finite = [mu_lo, mu_hi, p_lo, p_hi].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("box", "bounds must be finite"));
        }
        if !(mu_lo > 0.0 && mu_lo < mu_hi) {
            return Err(Error::invalid(
                "box.mu_lo",
                format!("need 0 < mu_lo < mu_hi (got {mu_lo}, {mu_hi})"),
            ));
        }
        if !(p_lo > 0.0 && p_lo < p_hi) {
            return Err(Error::invalid(
                "box.p_lo",
                format!("need 0 < p_lo < p_hi (got {p_lo}, {p_hi})"),
            ));
        }
        Ok(Self {
            mu_lo,
            mu_hi,
            p_lo,
            p_hi,
        })
    }

    pub fn contains(&self, x: &Policy) -> bool {
        (self.mu_lo..=self.mu_hi).contains(&x.mu) && (self.p_lo..=self.p_hi).contains(&x.p)
    }

    /// Euclidean projection, i.e. a componentwise clamp.
    pub fn project(&self, raw: Policy) -> Policy {
        Policy {
            mu: raw.mu.clamp(self.mu_lo, self.mu_hi),
            p: raw.p.clamp(self.p_lo, self.p_hi),
        }
    }
}

/// Free-function form of [`FeasibleBox::project`].
pub fn project(bounds: &FeasibleBox, raw: Policy) -> Policy {
    bounds.project(raw)
}

/// Arrival rate as a function of price, with its analytic derivative.
pub trait DemandCurve: fmt::Debug + Send + Sync {
    fn rate(&self, price: f64) -> f64;
    fn slope(&self, price: f64) -> f64;
}

/// Staffing cost rate as a function of service rate, with its analytic derivative.
pub trait CostCurve: fmt::Debug + Send + Sync {
    fn cost(&self, mu: f64) -> f64;
    fn slope(&self, mu: f64) -> f64;
}

/// `M0 exp(a - p) / (1 + exp(a - p))`.
pub fn logistic_demand(p: f64, market_size: f64, a: f64) -> f64 {
    market_size / (1.0 + (p - a).exp())
}

/// `-M0 exp(a - p) / (1 + exp(a - p))^2`.
pub fn logistic_demand_slope(p: f64, market_size: f64, a: f64) -> f64 {
    let share = 1.0 / (1.0 + (p - a).exp());
    -market_size * share * (1.0 - share)
}

pub fn quadratic_cost(mu: f64, c0: f64) -> f64 {
    c0 * mu * mu
}

pub fn quadratic_cost_slope(mu: f64, c0: f64) -> f64 {
    2.0 * c0 * mu
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticDemand {
    pub market_size: f64,
    pub a: f64,
}

impl LogisticDemand {
    pub fn new(market_size: f64, a: f64) -> Result<Self> {
        if !(market_size > 0.0 && market_size.is_finite()) {
            return Err(Error::invalid(
                "demand.M0",
                format!("must be positive (got {market_size})"),
            ));
        }
        if !a.is_finite() {
            return Err(Error::invalid("demand.a", "must be finite"));
        }
        Ok(Self { market_size, a })
    }
}

impl DemandCurve for LogisticDemand {
    fn rate(&self, price: f64) -> f64 {
        logistic_demand(price, self.market_size, self.a)
    }
    fn slope(&self, price: f64) -> f64 {
        logistic_demand_slope(price, self.market_size, self.a)
    }
}

/// Price-insensitive demand, used for staffing-only problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDemand {
    pub rate: f64,
}

impl DemandCurve for ConstantDemand {
    fn rate(&self, _price: f64) -> f64 {
        self.rate
    }
    fn slope(&self, _price: f64) -> f64 {
        0.0
    }
}

/// `c0 mu^2`. `c0 = 0` drops staffing cost entirely (pricing-only problems).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCost {
    pub c0: f64,
}

impl CostCurve for QuadraticCost {
    fn cost(&self, mu: f64) -> f64 {
        quadratic_cost(mu, self.c0)
    }
    fn slope(&self, mu: f64) -> f64 {
        quadratic_cost_slope(mu, self.c0)
    }
}

/// `c0 mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCost {
    pub c0: f64,
}

impl CostCurve for LinearCost {
    fn cost(&self, mu: f64) -> f64 {
        self.c0 * mu
    }
    fn slope(&self, _mu: f64) -> f64 {
        self.c0
    }
}

/// Per-unit-scale cost of a system `scale` times larger: `c(s mu) / s`.
#[derive(Debug, Clone)]
pub struct RescaledCost {
    pub inner: Arc<dyn CostCurve>,
    pub scale: f64,
}

impl CostCurve for RescaledCost {
    fn cost(&self, mu: f64) -> f64 {
        self.inner.cost(self.scale * mu) / self.scale
    }
    fn slope(&self, mu: f64) -> f64 {
        self.inner.slope(self.scale * mu)
    }
}

const MONOTONE_GRID: usize = 257;

/// Immutable market description shared by every replication.
#[derive(Debug, Clone)]
pub struct MarketModel {
    demand: Arc<dyn DemandCurve>,
    cost: Arc<dyn CostCurve>,
    h0: f64,
    bounds: FeasibleBox,
}

impl MarketModel {
    pub fn new(
        demand: Arc<dyn DemandCurve>,
        cost: Arc<dyn CostCurve>,
        h0: f64,
        bounds: FeasibleBox,
    ) -> Result<Self> {
        if !(h0 >= 0.0 && h0.is_finite()) {
            return Err(Error::invalid(
                "h0",
                format!("must be non-negative (got {h0})"),
            ));
        }
        let model = Self {
            demand,
            cost,
            h0,
            bounds,
        };
        model.check_monotone()?;
        if !model.uniformly_stable() {
            warn!(
                "box is not uniformly stable: lambda(p_lo) = {:.4} >= mu_lo = {:.4}",
                model.rate(bounds.p_lo),
                bounds.mu_lo
            );
        }
        Ok(model)
    }

    fn check_monotone(&self) -> Result<()> {
        let b = &self.bounds;
        let step =
            |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (MONOTONE_GRID - 1) as f64;
        for i in 1..MONOTONE_GRID {
            let (p0, p1) = (step(b.p_lo, b.p_hi, i - 1), step(b.p_lo, b.p_hi, i));
            let (l0, l1) = (self.demand.rate(p0), self.demand.rate(p1));
            if !(l0.is_finite() && l1.is_finite() && l0 >= 0.0) || l1 > l0 {
                return Err(Error::invalid(
                    "demand",
                    format!("must be non-increasing and non-negative near p = {p1}"),
                ));
            }
            let (m0, m1) = (step(b.mu_lo, b.mu_hi, i - 1), step(b.mu_lo, b.mu_hi, i));
            let (c0, c1) = (self.cost.cost(m0), self.cost.cost(m1));
            if !(c0.is_finite() && c1.is_finite()) || c1 < c0 {
                return Err(Error::invalid(
                    "cost",
                    format!("must be non-decreasing near mu = {m1}"),
                ));
            }
        }
        Ok(())
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn bounds(&self) -> &FeasibleBox {
        &self.bounds
    }

    pub fn demand(&self) -> &Arc<dyn DemandCurve> {
        &self.demand
    }

    pub fn cost_curve(&self) -> &Arc<dyn CostCurve> {
        &self.cost
    }

    pub fn rate(&self, p: f64) -> f64 {
        self.demand.rate(p)
    }

    pub fn rate_slope(&self, p: f64) -> f64 {
        self.demand.slope(p)
    }

    pub fn staffing_cost(&self, mu: f64) -> f64 {
        self.cost.cost(mu)
    }

    pub fn staffing_slope(&self, mu: f64) -> f64 {
        self.cost.slope(mu)
    }

    pub fn utilization(&self, x: &Policy) -> f64 {
        self.rate(x.p) / x.mu
    }

    /// `lambda(p_lo) < mu_lo`: every feasible policy gives a stable queue.
    pub fn uniformly_stable(&self) -> bool {
        self.rate(self.bounds.p_lo) < self.bounds.mu_lo
    }

    pub fn project(&self, raw: Policy) -> Policy {
        self.bounds.project(raw)
    }

    /// Objective from the mean queueing delay, via Little's law.
    pub fn objective_via_waiting(&self, x: &Policy, mean_wait: f64) -> f64 {
        let lambda = self.rate(x.p);
        self.h0 * lambda * (mean_wait + 1.0 / x.mu) + self.staffing_cost(x.mu) - x.p * lambda
    }

    /// Objective from the mean number in system.
    pub fn objective_via_queue(&self, x: &Policy, mean_in_system: f64) -> f64 {
        self.h0 * mean_in_system + self.staffing_cost(x.mu) - x.p * self.rate(x.p)
    }

    /// The same market `scale` times larger, in per-unit coordinates.
    ///
    /// A system with demand `s lambda(p)`, capacity `s mu` and cost `c(s mu)`
    /// is, after dividing time by `s` and money by `s`, this model with cost
    /// `c(s mu) / s` and holding cost `h0 / s`; demand and box are unchanged.
    pub fn rescaled(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(
                "scale",
                format!("must be positive (got {scale})"),
            ));
        }
        Ok(Self {
            demand: Arc::clone(&self.demand),
            cost: Arc::new(RescaledCost {
                inner: Arc::clone(&self.cost),
                scale,
            }),
            h0: self.h0 / scale,
            bounds: self.bounds,
        })
    }
}
