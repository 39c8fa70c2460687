//! Monte Carlo regret, its decomposition, and the heavy-traffic sweep.
//!
//! Cumulative regret after cycle `L` is `R(L) = sum_k (cost_k - f* T_k)`; it
//! is estimated by averaging independent replications and regressed as
//! `sqrt(R) = c ln(M_L) + d` over checkpoints past a burn-in prefix.
//!
//! The raw average is dominated by queueing noise at a few hundred
//! replications. [`RegretEstimator::PinnedBaseline`] subtracts, replication by
//! replication, the regret of the optimal policy run from a stationary start
//! on the same random streams. That baseline has zero mean regret, so the
//! estimate stays unbiased while most of the shared noise cancels.

use rayon::prelude::*;

use crate::controller::{Controller, Mode, Trajectory};
use crate::error::{Error, Result};
use crate::market::Policy;
use crate::oracles::{analytic_objective, SteadyModel};

/// Fraction of leading checkpoints left out of the regression.
pub const FIT_BURN_IN: f64 = 0.2;

/// Run `replications` independent controller runs in parallel, in index order.
pub fn run_replications(
    controller: &Controller,
    initial: Policy,
    seed: u64,
    replications: usize,
) -> Result<Vec<Trajectory>> {
    (0..replications as u64)
        .into_par_iter()
        .map(|r| controller.run(initial, seed, r))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub cycle: usize,
    pub m_l: u64,
    pub mean: f64,
    pub se: f64,
}

impl Checkpoint {
    /// `sqrt` of the mean, clamped at zero.
    pub fn sqrt_regret(&self) -> f64 {
        self.mean.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LineFit {
        slope,
        intercept,
        r2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub checkpoints: Vec<Checkpoint>,
    pub fit: LineFit,
    /// Index of the first checkpoint used in the fit.
    pub fit_from: usize,
    pub replications: usize,
}

fn mean_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Average per-replication cumulative series at every cycle end.
fn checkpoints(series: &[Vec<f64>], served: &[u64]) -> Vec<Checkpoint> {
    let reps = series.len();
    (0..served.len())
        .map(|k| {
            let (mean, se) = mean_se(series.iter().map(|s| s[k]), reps);
            Checkpoint {
                cycle: k + 1,
                m_l: served[k],
                mean,
                se,
            }
        })
        .collect()
}

fn cumulative(values: impl Iterator<Item = f64>) -> Vec<f64> {
    values
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegretEstimator {
    /// Plain average of `sum (cost_k - f* T_k)`.
    Raw,
    /// Raw regret minus that of `optimum` held fixed on the same streams,
    /// after `warm_start` customers of stationary warm-up.
    PinnedBaseline { optimum: Policy, warm_start: usize },
}

/// Runs of `optimum` held fixed, paired with the learner's replications.
///
/// Cycle lengths follow the learner's schedule, and replication `r` draws from
/// the same streams as the learner's replication `r`.
pub fn baseline_runs(
    controller: &Controller,
    optimum: Policy,
    warm_start: usize,
    seed: u64,
    replications: usize,
) -> Result<Vec<Trajectory>> {
    let mut pinned = controller.clone().with_warm_start(warm_start);
    pinned.mode = Mode::Fixed;
    run_replications(&pinned, optimum, seed, replications)
}

fn check_pairing(trajectories: &[Trajectory], baseline: Option<&[Trajectory]>) -> Result<()> {
    if trajectories.len() < 2 {
        return Err(Error::invalid(
            "replications",
            "need at least 2 to estimate a standard error",
        ));
    }
    if let Some(b) = baseline {
        let paired = b.len() == trajectories.len()
            && b.iter()
                .zip(trajectories)
                .all(|(x, y)| x.cycles.len() == y.cycles.len());
        if !paired {
            return Err(Error::invalid(
                "baseline",
                "must have one run per replication with the same cycle count",
            ));
        }
    }
    Ok(())
}

fn regret_series(t: &Trajectory, optimal_value: f64) -> Vec<f64> {
    cumulative(t.cycles.iter().map(|c| c.cost - optimal_value * c.t_k))
}

fn subtract(mut a: Vec<f64>, b: &[f64]) -> Vec<f64> {
    a.iter_mut().zip(b).for_each(|(x, y)| *x -= y);
    a
}

/// Regret report over already-simulated trajectories, optionally net of a
/// paired baseline from [`baseline_runs`].
pub fn regret_from_trajectories(
    trajectories: &[Trajectory],
    baseline: Option<&[Trajectory]>,
    optimal_value: f64,
) -> Result<RegretReport> {
    check_pairing(trajectories, baseline)?;
    let served: Vec<u64> = trajectories[0].cycles.iter().map(|c| c.served).collect();
    let series: Vec<Vec<f64>> = trajectories
        .iter()
        .enumerate()
        .map(|(r, t)| {
            let raw = regret_series(t, optimal_value);
            match baseline {
                Some(b) => subtract(raw, &regret_series(&b[r], optimal_value)),
                None => raw,
            }
        })
        .collect();
    let points = checkpoints(&series, &served);
    let fit_from = ((points.len() as f64) * FIT_BURN_IN).floor() as usize;
    let tail = &points[fit_from.min(points.len().saturating_sub(2))..];
    let x: Vec<f64> = tail.iter().map(|c| (c.m_l as f64).ln()).collect();
    let y: Vec<f64> = tail.iter().map(Checkpoint::sqrt_regret).collect();
    Ok(RegretReport {
        fit: least_squares(&x, &y),
        fit_from,
        checkpoints: points,
        replications: trajectories.len(),
    })
}

/// Simulate `replications` runs and estimate cumulative regret against `optimal_value`.
pub fn estimate_regret(
    controller: &Controller,
    initial: Policy,
    optimal_value: f64,
    replications: usize,
    seed: u64,
    estimator: RegretEstimator,
) -> Result<RegretReport> {
    if replications < 2 {
        return Err(Error::invalid(
            "replications",
            "need at least 2 to estimate a standard error",
        ));
    }
    let runs = run_replications(controller, initial, seed, replications)?;
    match estimator {
        RegretEstimator::Raw => regret_from_trajectories(&runs, None, optimal_value),
        RegretEstimator::PinnedBaseline {
            optimum,
            warm_start,
        } => {
            let base = baseline_runs(controller, optimum, warm_start, seed, replications)?;
            regret_from_trajectories(&runs, Some(&base), optimal_value)
        }
    }
}

/// Cumulative transient (`r1`) and suboptimality (`r2`) regret.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// `sum (cost_k - f(x_k) T_k)`, net of the baseline's regret when one is
    /// given (all of the baseline's regret is transient).
    pub r1: Vec<Checkpoint>,
    /// `sum (f(x_k) - f*) T_k`.
    pub r2: Vec<Checkpoint>,
}

pub fn decompose_regret(
    trajectories: &[Trajectory],
    baseline: Option<&[Trajectory]>,
    controller: &Controller,
    steady: Option<SteadyModel>,
    optimal_value: f64,
) -> Result<Decomposition> {
    let steady = steady.ok_or(Error::OracleRequired)?;
    check_pairing(trajectories, baseline)?;
    let served: Vec<u64> = trajectories[0].cycles.iter().map(|c| c.served).collect();
    let mut r1 = Vec::with_capacity(trajectories.len());
    let mut r2 = Vec::with_capacity(trajectories.len());
    for (r, t) in trajectories.iter().enumerate() {
        let f_k = t
            .cycles
            .iter()
            .map(|c| analytic_objective(&controller.model, steady, &c.policy))
            .collect::<Result<Vec<_>>>()?;
        let transient = cumulative(t.cycles.iter().zip(&f_k).map(|(c, f)| c.cost - f * c.t_k));
        r1.push(match baseline {
            Some(b) => subtract(transient, &regret_series(&b[r], optimal_value)),
            None => transient,
        });
        r2.push(cumulative(
            t.cycles
                .iter()
                .zip(&f_k)
                .map(|(c, f)| (f - optimal_value) * c.t_k),
        ));
    }
    Ok(Decomposition {
        r1: checkpoints(&r1, &served),
        r2: checkpoints(&r2, &served),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n: f64,
    pub p_n: f64,
    /// Service rate in units of the base market (`mu_n / s`).
    pub mu_n_over_n: f64,
    pub rho_n: f64,
}

/// Cycles averaged for a run of `cycles`: 300..=500 when available, else the
/// final 40%.
pub fn averaging_window(cycles: usize) -> (usize, usize) {
    if cycles >= 500 {
        (300, 500)
    } else {
        let from = ((cycles as f64) * 0.6).floor() as usize + 1;
        (from.min(cycles), cycles)
    }
}

/// Learn the policy for each market size `n` in `scales`.
///
/// `base` describes the market of size `base_size`. Size `n` is simulated in
/// the base market's normalized coordinates (`s = n / base_size`, service rate
/// `mu_n / s`, holding cost `h0 / s`, staffing cost `c(s mu) / s`), which is
/// the same queue run `s` times faster. Cycle lengths are multiplied by `n`.
#[allow(clippy::too_many_arguments)]
pub fn heavy_traffic_sweep(
    base: &Controller,
    base_size: f64,
    scales: &[f64],
    initial: Policy,
    replications: usize,
    seed: u64,
    window: Option<(usize, usize)>,
) -> Result<Vec<SweepRow>> {
    if replications < 1 {
        return Err(Error::invalid("replications", "must be at least 1"));
    }
    let (from, to) = window.unwrap_or_else(|| averaging_window(base.schedule.cycles));
    scales
        .iter()
        .map(|&n| {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::invalid(
                    "sweep.scales",
                    format!("must be positive (got {n})"),
                ));
            }
            let s = n / base_size;
            let mut controller = base.clone();
            controller.model = base.model.rescaled(s)?;
            controller.schedule = base.schedule.with_length_factor(n);
            let runs = run_replications(&controller, initial, seed, replications)?;
            let means: Vec<Policy> = runs.iter().map(|t| t.mean_policy(from, to)).collect();
            let k = means.len() as f64;
            let mu = means.iter().map(|x| x.mu).sum::<f64>() / k;
            let p = means.iter().map(|x| x.p).sum::<f64>() / k;
            Ok(SweepRow {
                n,
                p_n: p,
                mu_n_over_n: mu,
                rho_n: controller.model.utilization(&Policy::new(mu, p)),
            })
        })
        .collect()
}
