//! TOML experiment files.
//!
//! ```toml
//! h0 = 1.0
//! [demand]
//! family = "logistic"   # or "constant" with `rate`
//! M0 = 10.0
//! a = 4.1
//! [cost]
//! family = "quadratic"  # or "linear"
//! c0 = 0.1
//! [box]
//! mu_lo = 6.5
//! mu_hi = 20.0
//! p_lo = 3.6
//! p_hi = 8.0
//! [distributions.arrival]
//! family = "exponential"
//! [distributions.service]
//! family = "hyperexp2"
//! scv = 8.0
//! [schedule]
//! d0 = 10.0
//! d_log = 10.0
//! eta0 = 1.0
//! xi = 0.5
//! cycles = 500
//! step = "harmonic"     # eta0 / k; "constant" for a negative control
//! [initial]
//! mu = 12.0
//! p = 7.5
//! [mode]
//! freeze = "none"       # "mu", "price" or "both"
//! [run]
//! replications = 500
//! seed = 1
//! warm_start = 0        # customers simulated at the initial policy first
//! [regret]
//! estimator = "pinned"  # or "raw"
//! baseline_warm_start = 100000
//! decompose = false
//! # optimum = { mu = 14.0, p = 3.5, value = -17.0 }  # when no closed form
//! [sweep]
//! scales = [10.0, 100.0, 1000.0]
//! base_size = 10.0
//! [output]
//! dir = "out"
//! trace = false
//! ```
//!
//! Everything is validated by [`ExperimentConfig::build`] before any
//! simulation starts; errors name the offending key.

use std::path::PathBuf;
use std::sync::Arc;

use serde::Deserialize;

use crate::controller::{Controller, Mode, Schedule, StepRule};
use crate::distributions::{make_spec, Family, UnitVariateSpec};
use crate::error::{Error, Result};
use crate::market::{
    ConstantDemand, CostCurve, DemandCurve, FeasibleBox, LinearCost, LogisticDemand, MarketModel,
    Policy, QuadraticCost,
};
use crate::oracles::SteadyModel;
use crate::queue::QueueSpec;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub h0: f64,
    pub demand: DemandConfig,
    pub cost: CostConfig,
    #[serde(rename = "box")]
    pub bounds: BoxConfig,
    #[serde(default)]
    pub distributions: DistributionsConfig,
    pub schedule: ScheduleConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub regret: RegretConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum DemandFamily {
    Logistic,
    Constant,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DemandConfig {
    pub family: DemandFamily,
    #[serde(rename = "M0")]
    pub market_size: Option<f64>,
    pub a: Option<f64>,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum CostFamily {
    Quadratic,
    Linear,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub family: CostFamily,
    pub c0: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub p_lo: f64,
    pub p_hi: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VariateConfig {
    pub family: Family,
    pub scv: Option<f64>,
    pub phases: Option<u32>,
}

impl Default for VariateConfig {
    fn default() -> Self {
        Self {
            family: Family::Exponential,
            scv: None,
            phases: None,
        }
    }
}

impl VariateConfig {
    fn build(&self, block: &str) -> Result<UnitVariateSpec> {
        make_spec(self.family, self.scv.unwrap_or(f64::NAN), self.phases)
            .map_err(|e| prefixed(block, e))
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DistributionsConfig {
    #[serde(default)]
    pub arrival: VariateConfig,
    #[serde(default)]
    pub service: VariateConfig,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub d0: f64,
    pub d_log: f64,
    pub eta0: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    pub cycles: usize,
    #[serde(default)]
    pub step: StepConfig,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum StepConfig {
    #[default]
    Harmonic,
    Constant,
}

fn default_xi() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub mu: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Freeze {
    #[default]
    None,
    Mu,
    Price,
    /// Hold the initial policy throughout (a control run).
    Both,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    #[serde(default)]
    pub freeze: Freeze,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Customers simulated at the initial policy before cycle 1.
    #[serde(default)]
    pub warm_start: usize,
    /// First and last cycle of the reporting window (1-based, inclusive).
    pub average_from: Option<usize>,
    pub average_to: Option<usize>,
}

fn default_replications() -> usize {
    500
}

fn default_seed() -> u64 {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            replications: default_replications(),
            seed: default_seed(),
            warm_start: 0,
            average_from: None,
            average_to: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub scales: Vec<f64>,
    /// Market size the `[demand]` block describes.
    pub base_size: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RegretConfig {
    #[serde(default)]
    pub decompose: bool,
    #[serde(default)]
    pub estimator: EstimatorKind,
    /// Stationary warm-up of the pinned baseline, in customers.
    #[serde(default = "default_baseline_warm_start")]
    pub baseline_warm_start: usize,
    /// Trusted optimum for queues without a closed form.
    pub optimum: Option<OptimumConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OptimumConfig {
    pub mu: f64,
    pub p: f64,
    /// Long-run cost rate `f(mu, p)`.
    pub value: f64,
}

impl Default for RegretConfig {
    fn default() -> Self {
        Self {
            decompose: false,
            estimator: EstimatorKind::default(),
            baseline_warm_start: default_baseline_warm_start(),
            optimum: None,
        }
    }
}

fn default_baseline_warm_start() -> usize {
    100_000
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Raw,
    /// Net of the optimal policy run on the same streams.
    #[default]
    Pinned,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Also write the per-customer trace of replication 0.
    #[serde(default)]
    pub trace: bool,
}

/// Validated, ready-to-run experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub controller: Controller,
    pub initial: Policy,
    pub replications: usize,
    pub seed: u64,
    /// Closed form for the configured queue, when one exists.
    pub steady: Option<SteadyModel>,
    pub window: (usize, usize),
    pub sweep: Option<SweepConfig>,
    pub regret: RegretConfig,
    pub output_dir: Option<PathBuf>,
    pub trace: bool,
}

fn prefixed(block: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::InvalidParameter {
            field: format!("{block}.{field}"),
            reason,
        },
        other => other,
    }
}

fn required(value: Option<f64>, field: &str) -> Result<f64> {
    value.ok_or_else(|| Error::invalid(field, "missing"))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn build(&self) -> Result<Experiment> {
        let demand: Arc<dyn DemandCurve> = match self.demand.family {
            DemandFamily::Logistic => Arc::new(LogisticDemand::new(
                required(self.demand.market_size, "demand.M0")?,
                required(self.demand.a, "demand.a")?,
            )?),
            DemandFamily::Constant => {
                let rate = required(self.demand.rate, "demand.rate")?;
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::invalid(
                        "demand.rate",
                        format!("must be positive (got {rate})"),
                    ));
                }
                Arc::new(ConstantDemand { rate })
            }
        };
        let c0 = self.cost.c0;
        if !(c0 >= 0.0 && c0.is_finite()) {
            return Err(Error::invalid(
                "cost.c0",
                format!("must be non-negative (got {c0})"),
            ));
        }
        let cost: Arc<dyn CostCurve> = match self.cost.family {
            CostFamily::Quadratic => Arc::new(QuadraticCost { c0 }),
            CostFamily::Linear => Arc::new(LinearCost { c0 }),
        };
        let b = &self.bounds;
        let bounds =
            FeasibleBox::new(b.mu_lo, b.mu_hi, b.p_lo, b.p_hi).map_err(|e| prefixed("box", e))?;
        let model = MarketModel::new(demand, cost, self.h0, bounds)?;

        let queue = QueueSpec {
            arrival: self.distributions.arrival.build("distributions.arrival")?,
            service: self.distributions.service.build("distributions.service")?,
        };
        let s = &self.schedule;
        let schedule =
            Schedule::new(s.d0, s.d_log, s.eta0, s.xi, s.cycles)?.with_step_rule(match s.step {
                StepConfig::Harmonic => StepRule::Harmonic,
                StepConfig::Constant => StepRule::Constant,
            });
        let initial = Policy::new(self.initial.mu, self.initial.p);
        if !initial.is_finite() {
            return Err(Error::invalid("initial", "mu and p must be finite"));
        }
        let mode = match self.mode.freeze {
            Freeze::None => Mode::Joint,
            Freeze::Mu => Mode::FreezeMu,
            Freeze::Price => Mode::FreezePrice,
            Freeze::Both => Mode::Fixed,
        };
        if self.run.replications < 1 {
            return Err(Error::invalid("run.replications", "must be at least 1"));
        }
        let default_window = crate::regret::averaging_window(s.cycles);
        let window = (
            self.run.average_from.unwrap_or(default_window.0),
            self.run
                .average_to
                .unwrap_or(default_window.1)
                .min(s.cycles),
        );
        if window.0 < 1 || window.0 > window.1 {
            return Err(Error::invalid(
                "run.average_from",
                format!(
                    "window {}..={} is empty for {} cycles",
                    window.0, window.1, s.cycles
                ),
            ));
        }
        if let Some(o) = &self.regret.optimum {
            if !(o.mu > 0.0 && o.p.is_finite() && o.value.is_finite()) {
                return Err(Error::invalid(
                    "regret.optimum",
                    "needs positive mu and finite p, value",
                ));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.scales.is_empty() || sw.scales.iter().any(|n| !(*n > 0.0 && n.is_finite())) {
                return Err(Error::invalid(
                    "sweep.scales",
                    "must be a non-empty list of positive sizes",
                ));
            }
            if !(sw.base_size > 0.0 && sw.base_size.is_finite()) {
                return Err(Error::invalid("sweep.base_size", "must be positive"));
            }
        }
        Ok(Experiment {
            controller: Controller::new(model, queue, schedule, mode)
                .with_warm_start(self.run.warm_start),
            initial,
            replications: self.run.replications,
            seed: self.run.seed,
            steady: SteadyModel::for_queue(&queue),
            window,
            sweep: self.sweep.clone(),
            regret: self.regret.clone(),
            output_dir: self.output.dir.clone(),
            trace: self.output.trace,
        })
    }
}
