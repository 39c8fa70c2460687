//! Online projected SGD over operational cycles.
//!
//! For `k = 1..=L`: run a cycle of `D_k = ceil(d0 + d_log ln k)` service
//! starts at `x_k`, form the one-coordinate estimate `H_k`, and set
//! `x_{k+1} = proj(x_k - (eta0 / k) H_k)`. Queue state, including leftover
//! customers who arrived under the previous price, carries across cycles.

use crate::distributions::{stream_id, Purpose, RandomStream, ReplicationStreams};
use crate::error::{Error, Result};
use crate::gradient::{estimate_gradient, CoinRule, Coordinate, GradientEstimate};
use crate::market::{MarketModel, Policy};
use crate::queue::{run_cycle, CycleRecord, CycleState, CycleStreams, QueueSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// `eta0 / k`.
    #[default]
    Harmonic,
    /// `eta0` every cycle. Not convergent; kept as a negative control.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub d0: f64,
    pub d_log: f64,
    pub eta0: f64,
    pub xi: f64,
    pub cycles: usize,
    pub step_rule: StepRule,
}

impl Schedule {
    pub fn new(d0: f64, d_log: f64, eta0: f64, xi: f64, cycles: usize) -> Result<Self> {
        if !(d0 >= 1.0 && d0.is_finite()) {
            return Err(Error::invalid(
                "schedule.d0",
                format!("must be >= 1 (got {d0})"),
            ));
        }
        if !(d_log >= 0.0 && d_log.is_finite()) {
            return Err(Error::invalid(
                "schedule.d_log",
                format!("must be >= 0 (got {d_log})"),
            ));
        }
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::invalid(
                "schedule.eta0",
                format!("must be positive (got {eta0})"),
            ));
        }
        if !(xi > 0.0 && xi < 1.0) {
            return Err(Error::invalid(
                "schedule.xi",
                format!("must lie in (0, 1) (got {xi})"),
            ));
        }
        if cycles < 1 {
            return Err(Error::invalid("schedule.cycles", "must be at least 1"));
        }
        Ok(Self {
            d0,
            d_log,
            eta0,
            xi,
            cycles,
            step_rule: StepRule::Harmonic,
        })
    }

    pub fn with_step_rule(self, step_rule: StepRule) -> Self {
        Self { step_rule, ..self }
    }

    /// `D_k` for 1-based `k`.
    pub fn cycle_length(&self, k: usize) -> usize {
        (self.d0 + self.d_log * (k as f64).ln()).ceil() as usize
    }

    pub fn step_size(&self, k: usize) -> f64 {
        match self.step_rule {
            StepRule::Harmonic => self.eta0 / k as f64,
            StepRule::Constant => self.eta0,
        }
    }

    /// Same step sizes, cycle lengths multiplied by `factor`.
    pub fn with_length_factor(&self, factor: f64) -> Self {
        Self {
            d0: self.d0 * factor,
            d_log: self.d_log * factor,
            ..*self
        }
    }
}

/// Which decision coordinates are learned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Joint,
    /// Price held at its initial value.
    FreezePrice,
    /// Service rate held at its initial value.
    FreezeMu,
    /// Nothing learned; the initial policy is run throughout. Used as a
    /// common-random-numbers baseline.
    Fixed,
}

/// Mode that never updates `coordinate`.
pub fn freeze(coordinate: Coordinate) -> Mode {
    match coordinate {
        Coordinate::Price => Mode::FreezePrice,
        Coordinate::Mu => Mode::FreezeMu,
    }
}

impl Mode {
    pub fn coin(self) -> CoinRule {
        match self {
            Mode::Joint | Mode::Fixed => CoinRule::Fair,
            Mode::FreezePrice => CoinRule::Always(Coordinate::Mu),
            Mode::FreezeMu => CoinRule::Always(Coordinate::Price),
        }
    }
}

/// One row of a controller run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSummary {
    pub cycle: usize,
    pub policy: Policy,
    pub gradient: GradientEstimate,
    pub d_k: usize,
    pub t_k: f64,
    pub cost: f64,
    /// Cumulative customers that entered service through this cycle.
    pub served: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub cycles: Vec<CycleSummary>,
    /// Policy after the final update.
    pub final_policy: Option<Policy>,
}

impl Trajectory {
    /// Mean policy over 1-based cycles `from..=to` (clipped to the run).
    pub fn mean_policy(&self, from: usize, to: usize) -> Policy {
        let rows: Vec<_> = self
            .cycles
            .iter()
            .filter(|c| c.cycle >= from && c.cycle <= to)
            .collect();
        let n = rows.len().max(1) as f64;
        Policy::new(
            rows.iter().map(|c| c.policy.mu).sum::<f64>() / n,
            rows.iter().map(|c| c.policy.p).sum::<f64>() / n,
        )
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub model: MarketModel,
    pub queue: QueueSpec,
    pub schedule: Schedule,
    pub mode: Mode,
    /// Customers simulated at the initial policy before cycle 1.
    pub warm_start: usize,
}

impl Controller {
    pub fn new(model: MarketModel, queue: QueueSpec, schedule: Schedule, mode: Mode) -> Self {
        Self {
            model,
            queue,
            schedule,
            mode,
            warm_start: 0,
        }
    }

    pub fn with_warm_start(mut self, customers: usize) -> Self {
        self.warm_start = customers;
        self
    }

    /// Run replication `replication` of the experiment seeded by `seed`.
    pub fn run(&self, initial: Policy, seed: u64, replication: u64) -> Result<Trajectory> {
        self.run_observed(initial, seed, replication, |_, _| {})
    }

    /// As [`Controller::run`], handing every cycle record to `observe`.
    pub fn run_observed(
        &self,
        initial: Policy,
        seed: u64,
        replication: u64,
        mut observe: impl FnMut(usize, &CycleRecord),
    ) -> Result<Trajectory> {
        if !initial.is_finite() {
            return Err(Error::NonFinitePolicy {
                cycle: 0,
                mu: initial.mu,
                p: initial.p,
            });
        }
        let mut streams = ReplicationStreams::new(seed, replication);
        let mut x = self.model.project(initial);
        let mut state = if self.warm_start > 0 {
            let mut aux = RandomStream::new(seed, stream_id(replication, Purpose::WarmupArrivals));
            let mut aux_services =
                RandomStream::new(seed, stream_id(replication, Purpose::WarmupServices));
            CycleState::warmed(
                &self.model,
                &self.queue,
                x,
                self.warm_start,
                CycleStreams {
                    arrivals: &mut aux,
                    services: &mut aux_services,
                },
            )?
        } else {
            CycleState::empty(&self.model, x)
        };
        let coin = self.mode.coin();
        let mut served = 0u64;
        let mut rows = Vec::with_capacity(self.schedule.cycles);
        for k in 1..=self.schedule.cycles {
            let d_k = self.schedule.cycle_length(k);
            let record = run_cycle(
                &self.model,
                &self.queue,
                x,
                d_k,
                &state,
                CycleStreams {
                    arrivals: &mut streams.arrivals,
                    services: &mut streams.services,
                },
            )?;
            let gradient = estimate_gradient(
                &self.model,
                &record,
                self.schedule.xi,
                coin,
                &mut streams.coin,
            )?;
            served += d_k as u64;
            rows.push(CycleSummary {
                cycle: k,
                policy: x,
                gradient,
                d_k,
                t_k: record.t_k,
                cost: record.cost,
                served,
            });
            observe(k, &record);

            let eta = self.schedule.step_size(k);
            let mut next = self.model.project(Policy::new(
                x.mu - eta * gradient.h_mu,
                x.p - eta * gradient.h_p,
            ));
            match self.mode {
                Mode::FreezeMu => next.mu = x.mu,
                Mode::FreezePrice => next.p = x.p,
                Mode::Fixed => next = x,
                Mode::Joint => {}
            }
            if !next.is_finite() {
                return Err(Error::NonFinitePolicy {
                    cycle: k,
                    mu: next.mu,
                    p: next.p,
                });
            }
            state = record.next_state;
            x = next;
        }
        Ok(Trajectory {
            cycles: rows,
            final_policy: Some(x),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{FeasibleBox, LogisticDemand, QuadraticCost};
    use std::sync::Arc;

    fn controller(mode: Mode) -> Controller {
        let model = MarketModel::new(
            Arc::new(LogisticDemand::new(10.0, 4.1).unwrap()),
            Arc::new(QuadraticCost { c0: 0.1 }),
            1.0,
            FeasibleBox::new(6.5, 20.0, 3.6, 10.0).unwrap(),
        )
        .unwrap();
        Controller::new(
            model,
            QueueSpec::markovian(),
            Schedule::new(10.0, 10.0, 1.0, 0.5, 60).unwrap(),
            mode,
        )
    }

    #[test]
    fn cycle_lengths_use_natural_log_and_round_up() {
        let s = Schedule::new(10.0, 10.0, 1.0, 0.5, 10).unwrap();
        assert_eq!(s.cycle_length(1), 10);
        assert_eq!(s.cycle_length(2), 17); // 10 + 6.93
        assert_eq!(s.cycle_length(500), 73); // 10 + 62.15
        assert_eq!(
            Schedule::new(2.5, 0.0, 1.0, 0.5, 1)
                .unwrap()
                .cycle_length(1),
            3
        );
        assert!((s.step_size(4) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn step_rules() {
        let s = Schedule::new(10.0, 10.0, 2.0, 0.5, 10).unwrap();
        assert_eq!(s.step_size(4), 0.5);
        assert_eq!(s.with_step_rule(StepRule::Constant).step_size(4), 2.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::new(0.5, 1.0, 1.0, 0.5, 1).is_err());
        assert!(Schedule::new(1.0, -1.0, 1.0, 0.5, 1).is_err());
        assert!(Schedule::new(1.0, 1.0, 0.0, 0.5, 1).is_err());
        assert!(Schedule::new(1.0, 1.0, 1.0, 1.0, 1).is_err());
        assert!(Schedule::new(1.0, 1.0, 1.0, 0.5, 0).is_err());
    }

    #[test]
    fn frozen_coordinates_stay_fixed() {
        let x1 = Policy::new(12.0, 7.5);
        let t = controller(freeze(Coordinate::Mu)).run(x1, 3, 0).unwrap();
        assert!(t.cycles.iter().all(|c| c.policy.mu == 12.0));
        assert!(t.cycles.iter().any(|c| c.policy.p != 7.5));
        let t = controller(freeze(Coordinate::Price)).run(x1, 3, 0).unwrap();
        assert!(t.cycles.iter().all(|c| c.policy.p == 7.5));
        assert!(t.cycles.iter().any(|c| c.policy.mu != 12.0));
        let t = controller(Mode::Joint).run(x1, 3, 0).unwrap();
        assert!(t.cycles.iter().any(|c| c.policy.p != 7.5));
        assert!(t.cycles.iter().any(|c| c.policy.mu != 12.0));
    }

    #[test]
    fn iterates_feasible_and_served_increasing() {
        let c = controller(Mode::Joint);
        let t = c.run(Policy::new(30.0, 0.5), 9, 0).unwrap();
        let mut last = 0;
        for row in &t.cycles {
            assert!(c.model.bounds().contains(&row.policy));
            assert!(row.served > last);
            last = row.served;
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let c = controller(Mode::Joint);
        let a = c.run(Policy::new(12.0, 7.5), 1, 4).unwrap();
        let b = c.run(Policy::new(12.0, 7.5), 1, 4).unwrap();
        assert_eq!(a, b);
        let other = c.run(Policy::new(12.0, 7.5), 1, 5).unwrap();
        assert_ne!(a, other);
    }
}
