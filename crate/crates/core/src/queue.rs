//! One operational cycle of the controlled GI/GI/1 queue.
//!
//! A cycle starts when the last customer of the previous cycle ("customer 0")
//! enters service and ends when the `d_k`-th customer of this cycle enters
//! service. Customer `n` arrives `tau_n` after customer `n - 1`, where
//! `tau_n = U_n / lambda_{k-1}` for `n <= q_k` (the leftovers, who arrived
//! under the previous price) and `U_n / lambda_k` afterwards. Waiting times
//! follow Lindley's recursion
//!
//! ```text
//! W_n = (W_{n-1} + V_n / mu_k - tau_n)^+
//! X_n = (X_{n-1} + tau_n) 1{W_n > 0}
//! ```
//!
//! where `V_n / mu_k` is the service received by customer `n - 1` and `X_n` is
//! the busy age seen by customer `n` on arrival.

use crate::distributions::{RandomStream, UnitVariateSpec};
use crate::error::{Error, Result};
use crate::market::{MarketModel, Policy};

/// Laws of the unit interarrival (`U`) and service (`V`) variates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSpec {
    pub arrival: UnitVariateSpec,
    pub service: UnitVariateSpec,
}

impl QueueSpec {
    pub fn markovian() -> Self {
        Self {
            arrival: UnitVariateSpec::exponential(),
            service: UnitVariateSpec::exponential(),
        }
    }
}

/// Mutable streams a cycle consumes.
pub struct CycleStreams<'a> {
    pub arrivals: &'a mut RandomStream,
    pub services: &'a mut RandomStream,
}

/// Everything carried from one cycle into the next.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleState {
    /// Waiting time of customer 0.
    pub w0: f64,
    /// Busy age seen by customer 0.
    pub x0: f64,
    /// Customers in system when the cycle starts, including customer 0.
    pub q_carry: usize,
    /// Unit interarrival variates already drawn while counting leftovers.
    /// They are consumed first, as `U_1, U_2, ...` of the next cycle.
    pub pending: Vec<f64>,
    pub prev_policy: Policy,
    /// `lambda(p_{k-1})`.
    pub prev_rate: f64,
}

impl CycleState {
    /// Empty system; the previous policy is taken to be `policy` itself.
    pub fn empty(model: &MarketModel, policy: Policy) -> Self {
        Self {
            w0: 0.0,
            x0: 0.0,
            q_carry: 1,
            pending: Vec::new(),
            prev_policy: policy,
            prev_rate: model.rate(policy.p),
        }
    }

    /// State after `customers` arrivals at a fixed `policy`, started empty.
    pub fn warmed(
        model: &MarketModel,
        queue: &QueueSpec,
        policy: Policy,
        customers: usize,
        streams: CycleStreams<'_>,
    ) -> Result<Self> {
        let start = Self::empty(model, policy);
        if customers == 0 {
            return Ok(start);
        }
        Ok(run_cycle(model, queue, policy, customers, &start, streams)?.next_state)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w0 >= 0.0 && self.x0 >= 0.0 && self.w0.is_finite() && self.x0.is_finite()) {
            return Err(Error::invalid(
                "state",
                "w0 and x0 must be finite and non-negative",
            ));
        }
        if self.q_carry < 1 {
            return Err(Error::invalid("state.q_carry", "must be at least 1"));
        }
        if !(self.prev_rate > 0.0) {
            return Err(Error::NoArrivals {
                price: self.prev_policy.p,
            });
        }
        Ok(())
    }
}

/// Per-cycle trace. All vectors are indexed by customer `n = 1..=d_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub waits: Vec<f64>,
    pub busy_ages: Vec<f64>,
    /// Service time entering the `n`-th Lindley step, i.e. the service
    /// received by customer `n - 1` (entry 0 is customer 0's service).
    pub services: Vec<f64>,
    pub interarrivals: Vec<f64>,
    pub q_k: usize,
    /// Clock time from customer 0's service start to customer `d_k`'s.
    pub t_k: f64,
    pub d_k: usize,
    /// Fees, holding cost `h0 (W_n + S)` and staffing cost `c(mu_k) t_k`.
    pub cost: f64,
    pub policy: Policy,
    pub prev_policy: Policy,
    pub w0: f64,
    pub x0: f64,
    pub next_state: CycleState,
}

impl CycleRecord {
    /// Fee paid by customer `n` (1-based).
    pub fn price_paid(&self, n: usize) -> f64 {
        if n <= self.q_k {
            self.prev_policy.p
        } else {
            self.policy.p
        }
    }
}

/// Count customers in system when customer 0 enters service.
///
/// Draws unit interarrivals from `draw_unit` (scaled by `1 / rate_prev`) until
/// their running sum exceeds `w0`. All drawn variates, including the one that
/// overshoots, are returned for reuse so that no variate is discarded.
pub fn leftover_count(
    w0: f64,
    rate_prev: f64,
    mut draw_unit: impl FnMut() -> f64,
) -> (usize, Vec<f64>) {
    let mut drawn = Vec::new();
    let mut elapsed = 0.0;
    loop {
        let u = draw_unit();
        drawn.push(u);
        elapsed += u / rate_prev;
        if elapsed > w0 {
            return (drawn.len(), drawn);
        }
    }
}

/// Simulate one cycle of `d_k` service starts under `policy`.
pub fn run_cycle(
    model: &MarketModel,
    queue: &QueueSpec,
    policy: Policy,
    d_k: usize,
    state: &CycleState,
    streams: CycleStreams<'_>,
) -> Result<CycleRecord> {
    if d_k < 1 {
        return Err(Error::invalid("d_k", "cycle length must be at least 1"));
    }
    if !(policy.mu > 0.0 && policy.is_finite()) {
        return Err(Error::invalid(
            "policy.mu",
            format!("must be positive (got {})", policy.mu),
        ));
    }
    state.validate()?;
    let rate = model.rate(policy.p);
    if !(rate > 0.0) {
        return Err(Error::NoArrivals { price: policy.p });
    }
    let CycleStreams { arrivals, services } = streams;
    let h0 = model.h0();
    let q_k = state.q_carry;
    let mut pending = state.pending.iter().copied();

    let mut waits = Vec::with_capacity(d_k);
    let mut busy_ages = Vec::with_capacity(d_k);
    let mut service_log = Vec::with_capacity(d_k);
    let mut interarrivals = Vec::with_capacity(d_k);

    let (mut w, mut x) = (state.w0, state.x0);
    let mut arrival_clock = 0.0;
    let mut cost = 0.0;
    for n in 1..=d_k {
        let service = queue.service.draw(services) / policy.mu;
        let u = pending
            .next()
            .unwrap_or_else(|| queue.arrival.draw(arrivals));
        let (lambda, fee) = if n <= q_k {
            (state.prev_rate, state.prev_policy.p)
        } else {
            (rate, policy.p)
        };
        let tau = u / lambda;
        w = (w + service - tau).max(0.0);
        x = if w > 0.0 { x + tau } else { 0.0 };
        arrival_clock += tau;
        cost += h0 * (w + service) - fee;
        waits.push(w);
        busy_ages.push(x);
        service_log.push(service);
        interarrivals.push(tau);
    }
    let t_k = arrival_clock + w - state.w0;
    cost += model.staffing_cost(policy.mu) * t_k;

    // Leftover variates not consumed this cycle (q_k > d_k) come first.
    let mut unused = pending.collect::<Vec<_>>().into_iter();
    let (q_next, pending_next) = leftover_count(w, rate, || {
        unused
            .next()
            .unwrap_or_else(|| queue.arrival.draw(arrivals))
    });

    Ok(CycleRecord {
        waits,
        busy_ages,
        services: service_log,
        interarrivals,
        q_k,
        t_k,
        d_k,
        cost,
        policy,
        prev_policy: state.prev_policy,
        w0: state.w0,
        x0: state.x0,
        next_state: CycleState {
            w0: w,
            x0: x,
            q_carry: q_next,
            pending: pending_next,
            prev_policy: policy,
            prev_rate: rate,
        },
    })
}
