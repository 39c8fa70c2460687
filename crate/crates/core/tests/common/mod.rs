//! Fixtures and property checks shared by the integration tests and the
//! acceptance harness. Each check returns a one-line detail on success and a
//! description of the first violation on failure.

#![allow(dead_code)]

use std::sync::Arc;

use queue_pricing::distributions::{make_spec, Family, RandomStream, UnitVariateSpec};
use queue_pricing::market::{
    ConstantDemand, CostCurve, FeasibleBox, LinearCost, LogisticDemand, MarketModel, Policy,
    QuadraticCost,
};
use queue_pricing::oracles::{mg1_steady, simulate_path, simulate_steady};
use queue_pricing::queue::{run_cycle, CycleRecord, CycleState, CycleStreams, QueueSpec};

pub type Check = Result<String, String>;

pub fn logistic_model(cost: Arc<dyn CostCurve>, bounds: FeasibleBox) -> MarketModel {
    MarketModel::new(
        Arc::new(LogisticDemand::new(10.0, 4.1).unwrap()),
        cost,
        1.0,
        bounds,
    )
    .unwrap()
}

/// Joint M/M/1 benchmark economics, uniformly stable box.
pub fn joint_model() -> MarketModel {
    logistic_model(
        Arc::new(QuadraticCost { c0: 0.1 }),
        FeasibleBox::new(6.5, 20.0, 3.6, 8.0).unwrap(),
    )
}

/// Pricing-only: staffing cost dropped, `mu` frozen by the caller.
pub fn pricing_model() -> MarketModel {
    logistic_model(
        Arc::new(QuadraticCost { c0: 0.0 }),
        FeasibleBox::new(1.0, 20.0, 0.5, 10.0).unwrap(),
    )
}

/// Staffing-only: price-insensitive demand.
pub fn staffing_model(c0: f64) -> MarketModel {
    MarketModel::new(
        Arc::new(ConstantDemand { rate: 6.385 }),
        Arc::new(QuadraticCost { c0 }),
        1.0,
        FeasibleBox::new(7.0, 20.0, 0.5, 10.0).unwrap(),
    )
    .unwrap()
}

/// Phase-type service experiments: linear staffing cost.
pub fn mg1_model() -> MarketModel {
    logistic_model(
        Arc::new(LinearCost { c0: 0.2 }),
        FeasibleBox::new(8.0, 30.0, 3.0, 10.0).unwrap(),
    )
}

/// Overload experiment: box wide enough to start at `rho = 2.55`, same price
/// cap as the joint benchmark.
pub fn overload_model() -> MarketModel {
    logistic_model(
        Arc::new(QuadraticCost { c0: 0.1 }),
        FeasibleBox::new(1.0, 20.0, 2.5, 8.0).unwrap(),
    )
}

pub fn service(family: Family, scv: f64, phases: Option<u32>) -> UnitVariateSpec {
    make_spec(family, scv, phases).unwrap()
}

pub fn mg1_queue(service: UnitVariateSpec) -> QueueSpec {
    QueueSpec {
        arrival: UnitVariateSpec::exponential(),
        service,
    }
}

/// Price at which the logistic benchmark demand equals `lambda`.
pub fn price_for_rate(lambda: f64) -> f64 {
    4.1 + (10.0 / lambda - 1.0).ln()
}

pub fn streams(seed: u64) -> (RandomStream, RandomStream) {
    (RandomStream::new(seed, 0), RandomStream::new(seed, 1))
}

pub fn cycle_from(
    model: &MarketModel,
    queue: &QueueSpec,
    policy: Policy,
    d_k: usize,
    state: &CycleState,
    seed: u64,
) -> CycleRecord {
    let (mut a, mut s) = streams(seed);
    run_cycle(
        model,
        queue,
        policy,
        d_k,
        state,
        CycleStreams {
            arrivals: &mut a,
            services: &mut s,
        },
    )
    .unwrap()
}

fn state_with(model: &MarketModel, policy: Policy, w0: f64, x0: f64) -> CycleState {
    let mut s = CycleState::empty(model, policy);
    s.w0 = w0;
    s.x0 = x0;
    s
}

/// Two cycles sharing every variate but started from different `w0` agree
/// exactly once the upper path has emptied.
pub fn coupling_collapse(seeds: u64) -> Check {
    let model = joint_model();
    let policy = Policy::new(10.0, price_for_rate(7.0));
    let mut collapsed = 0;
    for seed in 0..seeds {
        let lo = cycle_from(
            &model,
            &QueueSpec::markovian(),
            policy,
            2000,
            &state_with(&model, policy, 0.3, 0.1),
            seed,
        );
        let hi = cycle_from(
            &model,
            &QueueSpec::markovian(),
            policy,
            2000,
            &state_with(&model, policy, 4.0, 2.0),
            seed,
        );
        let Some(first_zero) = hi.waits.iter().position(|w| *w == 0.0) else {
            continue;
        };
        collapsed += 1;
        for n in first_zero..hi.waits.len() {
            if hi.waits[n] != lo.waits[n] || hi.busy_ages[n] != lo.busy_ages[n] {
                return Err(format!(
                    "seed {seed}: paths differ at n = {} after collapse at {}",
                    n + 1,
                    first_zero + 1
                ));
            }
        }
    }
    if collapsed == 0 {
        return Err("upper path never emptied".into());
    }
    Ok(format!(
        "{collapsed}/{seeds} coupled pairs identical after first idle"
    ))
}

/// `w0' >= w0` implies `W'_n >= W_n` under shared variates.
pub fn lindley_monotone(seeds: u64) -> Check {
    let model = joint_model();
    let policy = Policy::new(8.0, price_for_rate(7.5));
    let mut compared = 0usize;
    for seed in 0..seeds {
        let w0 = 0.5 * (seed % 7) as f64;
        let a = cycle_from(
            &model,
            &QueueSpec::markovian(),
            policy,
            500,
            &state_with(&model, policy, w0, 0.0),
            seed,
        );
        let b = cycle_from(
            &model,
            &QueueSpec::markovian(),
            policy,
            500,
            &state_with(&model, policy, w0 + 1.5, 0.0),
            seed,
        );
        for (n, (x, y)) in a.waits.iter().zip(&b.waits).enumerate() {
            if y < x {
                return Err(format!(
                    "seed {seed}: W'_{} = {y} < W_{} = {x}",
                    n + 1,
                    n + 1
                ));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} ordered pairs"))
}

/// `X_n > 0` implies `X_n - X_{n-1} = tau_n`; and `X_n = 0` exactly when `W_n = 0`.
pub fn busy_age_identity(seeds: u64) -> Check {
    let model = joint_model();
    let policy = Policy::new(9.0, price_for_rate(6.0));
    for seed in 0..seeds {
        let rec = cycle_from(
            &model,
            &QueueSpec::markovian(),
            policy,
            1000,
            &state_with(&model, policy, 1.0, 0.7),
            seed,
        );
        let mut prev = rec.x0;
        for n in 0..rec.d_k {
            let (x, w, tau) = (rec.busy_ages[n], rec.waits[n], rec.interarrivals[n]);
            if (x == 0.0) != (w == 0.0) {
                return Err(format!("seed {seed}, n = {}: X = {x}, W = {w}", n + 1));
            }
            if x > 0.0 && ((x - prev) - tau).abs() > 1e-12 * (1.0 + x) {
                return Err(format!(
                    "seed {seed}, n = {}: increment {} != tau {tau}",
                    n + 1,
                    x - prev
                ));
            }
            prev = x;
        }
    }
    Ok(format!("{seeds} cycles of 1000 customers"))
}

/// Replays a cycle with an explicit FIFO server clock and compares waits and
/// `t_k` against the record.
pub fn clock_time_identity(seeds: u64) -> Check {
    let model = joint_model();
    let queue = mg1_queue(service(Family::HyperExp2, 4.0, None));
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let policy = Policy::new(9.0, price_for_rate(6.5));
        let prev = Policy::new(9.0, price_for_rate(4.0));
        // Leftovers at a different rate exercise the split.
        let mut state = state_with(&model, prev, 2.0, 1.0);
        state.prev_rate = model.rate(prev.p);
        state.q_carry = 1 + (seed as usize % 9);
        let rec = cycle_from(&model, &queue, policy, 300, &state, seed);
        // Customer 0 arrived at -w0 and starts service at time 0.
        let mut arrival = -rec.w0;
        let mut departure = rec.services[0];
        let mut start = 0.0;
        for n in 1..=rec.d_k {
            arrival += rec.interarrivals[n - 1];
            start = f64::max(arrival, departure);
            let wait = start - arrival;
            worst = worst.max((wait - rec.waits[n - 1]).abs());
            if n < rec.d_k {
                departure = start + rec.services[n];
            }
        }
        let sum_tau: f64 = rec.interarrivals.iter().sum();
        let err_direct = (rec.t_k - (sum_tau + rec.waits[rec.d_k - 1] - rec.w0)).abs();
        let err_clock = (rec.t_k - start).abs();
        worst = worst.max(err_direct).max(err_clock);
        if worst > 1e-9 {
            return Err(format!("seed {seed}: discrepancy {worst:e}"));
        }
    }
    Ok(format!("max discrepancy {worst:.1e} over {seeds} cycles"))
}

/// `simulate_steady` agrees with P-K (waits and busy ages) within 3 SE.
pub fn pk_agreement(samples: usize) -> Check {
    let laws = [
        ("M", service(Family::Exponential, f64::NAN, None)),
        ("H2(2)", service(Family::HyperExp2, 2.0, None)),
        ("H2(8)", service(Family::HyperExp2, 8.0, None)),
        ("E2", service(Family::Erlang, f64::NAN, Some(2))),
        ("E8", service(Family::Erlang, f64::NAN, Some(8))),
    ];
    let model = joint_model();
    let mu = 10.0;
    let mut worst = 0.0f64;
    for (i, (name, law)) in laws.iter().enumerate() {
        for (j, rho) in [0.3, 0.5, 0.7].into_iter().enumerate() {
            let lambda = rho * mu;
            let policy = Policy::new(mu, price_for_rate(lambda));
            let (mut a, mut s) = streams(1000 + (i * 10 + j) as u64);
            let est = simulate_steady(
                &model,
                &mg1_queue(*law),
                policy,
                samples / 10,
                samples,
                CycleStreams {
                    arrivals: &mut a,
                    services: &mut s,
                },
            )
            .unwrap();
            let exact = mg1_steady(model.rate(policy.p), mu, law.scv()).unwrap();
            let zw = (est.mean_w - exact.mean_w).abs() / est.se_w;
            let zx = (est.mean_x - exact.mean_x).abs() / est.se_x;
            worst = worst.max(zw).max(zx);
            if zw > 3.0 || zx > 3.0 {
                return Err(format!(
                    "{name} rho {rho}: W {:.5} vs {:.5} ({zw:.2} SE), X {:.5} vs {:.5} ({zx:.2} SE)",
                    est.mean_w, exact.mean_w, est.mean_x, exact.mean_x
                ));
            }
        }
    }
    Ok(format!("15 cases, worst |z| = {worst:.2}"))
}

/// Under common random numbers `mean |W(mu) - W(mu + delta)| / delta` stays
/// roughly constant as `delta` halves.
pub fn crn_lipschitz(customers: usize) -> Check {
    let model = joint_model();
    let p = price_for_rate(5.0);
    let path = |mu: f64| {
        let (mut a, mut s) = streams(77);
        let mut out = Vec::with_capacity(customers);
        simulate_path(
            &model,
            &QueueSpec::markovian(),
            Policy::new(mu, p),
            customers,
            CycleStreams {
                arrivals: &mut a,
                services: &mut s,
            },
            |_, w, _| out.push(w),
        )
        .unwrap();
        out
    };
    let base = path(10.0);
    let ratios: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&delta| {
            let other = path(10.0 + delta);
            base.iter()
                .zip(&other)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / customers as f64
                / delta
        })
        .collect();
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    if !(lo > 0.0 && hi / lo < 1.25) {
        return Err(format!("ratios {ratios:?} not stable"));
    }
    Ok(format!(
        "mean|dW|/delta = {:.4}, {:.4}, {:.4}",
        ratios[0], ratios[1], ratios[2]
    ))
}

/// Projection onto the box is idempotent and nonexpansive.
pub fn projection_properties(points: usize) -> Check {
    let b = FeasibleBox::new(6.5, 20.0, 3.6, 10.0).unwrap();
    let mut rng = RandomStream::new(5, 9);
    let mut draw = || Policy::new(40.0 * rng.uniform() - 10.0, 30.0 * rng.uniform() - 10.0);
    for _ in 0..points {
        let (x, y) = (draw(), draw());
        let (px, py) = (b.project(x), b.project(y));
        if b.project(px) != px || !b.contains(&px) {
            return Err(format!("not idempotent at {x:?}"));
        }
        if px.distance(&py) > x.distance(&y) + 1e-12 {
            return Err(format!("expands {x:?}, {y:?}"));
        }
    }
    Ok(format!("{points} random pairs"))
}
