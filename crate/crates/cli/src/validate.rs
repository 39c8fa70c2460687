//! Oracle cross-checks printed as `check=<name> status=pass|fail
//! measured=<x> tolerance=<t>` lines.

use std::sync::Arc;

use queue_pricing::distributions::{make_spec, Family, RandomStream};
use queue_pricing::gradient::{mu_partial, price_partial, steady_partials_oracle, tail_mean};
use queue_pricing::market::{FeasibleBox, LogisticDemand, MarketModel, Policy, QuadraticCost};
use queue_pricing::oracles::{fd_gradient, mg1_steady, mm1_steady, simulate_steady, SteadyModel};
use queue_pricing::queue::{run_cycle, CycleState, CycleStreams, QueueSpec};
use queue_pricing::Result;

use crate::Failure;

struct Outcome {
    name: &'static str,
    measured: f64,
    tolerance: f64,
    /// Pass when `measured <= tolerance`.
    pass: bool,
}

fn model() -> MarketModel {
    MarketModel::new(
        Arc::new(LogisticDemand::new(10.0, 4.1).expect("valid demand")),
        Arc::new(QuadraticCost { c0: 0.1 }),
        1.0,
        FeasibleBox::new(6.5, 20.0, 3.6, 8.0).expect("valid box"),
    )
    .expect("valid model")
}

/// Price at which the logistic demand above equals `lambda`.
fn price_for_rate(lambda: f64) -> f64 {
    4.1 + (10.0 / lambda - 1.0).ln()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn outcome(name: &'static str, measured: f64, tolerance: f64) -> Outcome {
    Outcome {
        name,
        measured,
        tolerance,
        pass: measured <= tolerance,
    }
}

fn pair(seed: u64, id: u64) -> (RandomStream, RandomStream) {
    (
        RandomStream::new(seed, 2 * id),
        RandomStream::new(seed, 2 * id + 1),
    )
}

/// Closed-form IPA partials against central differences of the M/M/1 objective.
fn ipa_closed_form() -> Result<Outcome> {
    let m = model();
    let mut worst = 0.0f64;
    for mu in [8.0, 12.0, 16.0] {
        for rho in [0.3, 0.6] {
            let x = Policy::new(mu, price_for_rate(rho * mu));
            let s = mm1_steady(m.rate(x.p), mu)?;
            let ipa = steady_partials_oracle(&m, &x, s.mean_w, s.mean_x);
            let fd = fd_gradient(&m, SteadyModel::Mm1, &x, 1e-4)?;
            worst = worst.max(rel(ipa[0], fd[0])).max(rel(ipa[1], fd[1]));
        }
    }
    Ok(outcome("ipa_closed_form_vs_fd", worst, 1e-4))
}

/// Simulated IPA gradient at (10, 4.1) against finite differences.
fn ipa_simulated(seed: u64) -> Result<Outcome> {
    let m = model();
    let x = Policy::new(10.0, 4.1);
    let queue = QueueSpec::markovian();
    let fd = fd_gradient(&m, SteadyModel::Mm1, &x, 1e-4)?;
    let cycles = 20;
    let (mut h_mu, mut h_p) = (0.0, 0.0);
    for r in 0..cycles {
        let (mut a, mut v) = pair(seed, r);
        let start = CycleState::warmed(
            &m,
            &queue,
            x,
            100_000,
            CycleStreams {
                arrivals: &mut a,
                services: &mut v,
            },
        )?;
        let rec = run_cycle(
            &m,
            &queue,
            x,
            100_000,
            &start,
            CycleStreams {
                arrivals: &mut a,
                services: &mut v,
            },
        )?;
        let tail = tail_mean(&rec, 0.5)?;
        h_mu += mu_partial(&m, &x, tail);
        h_p += price_partial(&m, &x, tail);
    }
    let n = cycles as f64;
    Ok(outcome(
        "ipa_simulated_vs_fd",
        rel(h_mu / n, fd[0]).max(rel(h_p / n, fd[1])),
        0.02,
    ))
}

/// Simulated M/H2/1 at rho = 0.5, scv = 2 against Pollaczek-Khinchine, in SEs.
fn pk_vs_simulation(seed: u64) -> Result<Outcome> {
    let m = model();
    let service = make_spec(Family::HyperExp2, 2.0, None)?;
    let queue = QueueSpec {
        service,
        ..QueueSpec::markovian()
    };
    let mu = 10.0;
    let x = Policy::new(mu, price_for_rate(0.5 * mu));
    let (mut a, mut v) = pair(seed, 1_000);
    let est = simulate_steady(
        &m,
        &queue,
        x,
        100_000,
        1_000_000,
        CycleStreams {
            arrivals: &mut a,
            services: &mut v,
        },
    )?;
    let exact = mg1_steady(m.rate(x.p), mu, 2.0)?;
    let z = ((est.mean_w - exact.mean_w).abs() / est.se_w)
        .max((est.mean_x - exact.mean_x).abs() / est.se_x);
    Ok(outcome("pk_vs_simulation_se", z, 3.0))
}

/// Paths from different initial workloads on shared variates coincide after
/// the upper one first empties. Measures the largest post-collapse gap.
fn coupling_collapse(seed: u64) -> Result<Outcome> {
    let m = model();
    let x = Policy::new(10.0, price_for_rate(7.0));
    let queue = QueueSpec::markovian();
    let mut gap = 0.0f64;
    let mut collapsed = 0;
    for r in 0..20 {
        let run = |w0: f64| {
            let mut s = CycleState::empty(&m, x);
            s.w0 = w0;
            s.x0 = w0;
            let (mut a, mut v) = pair(seed, 2_000 + r);
            run_cycle(
                &m,
                &queue,
                x,
                2_000,
                &s,
                CycleStreams {
                    arrivals: &mut a,
                    services: &mut v,
                },
            )
        };
        let (lo, hi) = (run(0.3)?, run(4.0)?);
        if let Some(first) = hi.waits.iter().position(|w| *w == 0.0) {
            collapsed += 1;
            for n in first..hi.waits.len() {
                gap = gap
                    .max((hi.waits[n] - lo.waits[n]).abs())
                    .max((hi.busy_ages[n] - lo.busy_ages[n]).abs());
            }
        }
    }
    if collapsed == 0 {
        gap = f64::INFINITY;
    }
    Ok(outcome("coupling_collapse_gap", gap, 0.0))
}

pub fn run(seed: u64) -> std::result::Result<(), Failure> {
    let checks = [
        ipa_closed_form()?,
        ipa_simulated(seed)?,
        pk_vs_simulation(seed)?,
        coupling_collapse(seed)?,
    ];
    for c in &checks {
        println!(
            "check={} status={} measured={:e} tolerance={:e}",
            c.name,
            if c.pass { "pass" } else { "fail" },
            c.measured,
            c.tolerance
        );
    }
    match checks.iter().filter(|c| !c.pass).count() {
        0 => Ok(()),
        n => Err(Failure::ChecksFailed(n)),
    }
}
