use log::info;
use queue_pricing::config::EstimatorKind;
use queue_pricing::oracles::{optimize_analytic, Optimum};
use queue_pricing::regret::{
    baseline_runs, decompose_regret, heavy_traffic_sweep, regret_from_trajectories,
    run_replications,
};
use queue_pricing::{Error, Policy};

use crate::output::{self, TraceWriter};
use crate::{Failure, Run};

const OPTIMIZER_GRID: usize = 200;
const OPTIMIZER_TOL: f64 = 1e-6;

fn window_mean(runs: &[queue_pricing::Trajectory], (from, to): (usize, usize)) -> Policy {
    let n = runs.len() as f64;
    let (mu, p) = runs
        .iter()
        .map(|t| t.mean_policy(from, to))
        .fold((0.0, 0.0), |acc, x| (acc.0 + x.mu, acc.1 + x.p));
    Policy::new(mu / n, p / n)
}

/// Closed-form optimum in the run's mode, when the queue has one.
fn oracle_optimum(run: &Run) -> queue_pricing::Result<Option<Optimum>> {
    let e = &run.experiment;
    match e.steady {
        Some(steady) => Ok(Some(optimize_analytic(
            &e.controller.model,
            steady,
            e.controller.mode,
            e.initial,
            OPTIMIZER_GRID,
            OPTIMIZER_TOL,
        )?)),
        None => Ok(None),
    }
}

pub fn optimize(run: &Run) -> Result<(), Failure> {
    let e = &run.experiment;
    info!("running {} replications", e.replications);
    let runs = run_replications(&e.controller, e.initial, e.seed, e.replications)?;
    let path = output::write_trajectory(&run.out, &runs)?;
    println!("wrote {}", path.display());
    if e.trace {
        let mut trace = TraceWriter::create(&run.out)?;
        let mut failed = None;
        e.controller.run_observed(e.initial, e.seed, 0, |k, rec| {
            if failed.is_none() {
                failed = trace.cycle(k, rec).err();
            }
        })?;
        if let Some(f) = failed {
            return Err(f);
        }
        println!("wrote {}", trace.finish()?.display());
    }

    let x = window_mean(&runs, e.window);
    println!(
        "cycles {}-{} mean over {} replications: mu = {:.4}, p = {:.4}, rho = {:.4}",
        e.window.0,
        e.window.1,
        runs.len(),
        x.mu,
        x.p,
        e.controller.model.utilization(&x)
    );
    if let Some(opt) = oracle_optimum(run)? {
        println!(
            "oracle optimum: mu* = {:.4}, p* = {:.4}, f* = {:.4}; distance = {:.4} (mu {:+.2}%, p {:+.2}%)",
            opt.policy.mu,
            opt.policy.p,
            opt.value,
            x.distance(&opt.policy),
            100.0 * (x.mu / opt.policy.mu - 1.0),
            100.0 * (x.p / opt.policy.p - 1.0)
        );
    }
    Ok(())
}

pub fn regret(run: &Run) -> Result<(), Failure> {
    let e = &run.experiment;
    if e.replications < 2 {
        return Err(Error::invalid("run.replications", "regret needs at least 2").into());
    }
    if e.regret.decompose && e.steady.is_none() {
        return Err(Error::OracleRequired.into());
    }
    let (optimum, value) = match (e.regret.optimum, oracle_optimum(run)?) {
        (Some(o), _) => (Policy::new(o.mu, o.p), o.value),
        (None, Some(o)) => (o.policy, o.value),
        (None, None) => {
            return Err(Error::invalid(
                "regret.optimum",
                "required when the queue has no closed form",
            )
            .into())
        }
    };
    println!(
        "optimum: mu* = {:.4}, p* = {:.4}, f* = {:.6}",
        optimum.mu, optimum.p, value
    );

    let runs = run_replications(&e.controller, e.initial, e.seed, e.replications)?;
    let baseline = match e.regret.estimator {
        EstimatorKind::Raw => None,
        EstimatorKind::Pinned => Some(baseline_runs(
            &e.controller,
            optimum,
            e.regret.baseline_warm_start,
            e.seed,
            e.replications,
        )?),
    };
    let report = regret_from_trajectories(&runs, baseline.as_deref(), value)?;
    for p in output::write_regret(&run.out, &report)? {
        println!("wrote {}", p.display());
    }
    if e.regret.decompose {
        let d = decompose_regret(&runs, baseline.as_deref(), &e.controller, e.steady, value)?;
        println!(
            "wrote {}",
            output::write_decomposition(&run.out, &d)?.display()
        );
    }
    let last = report.checkpoints.last().expect("at least one cycle");
    println!(
        "sqrt(R) = {:.4} ln(M_L) + {:.4}, R2 = {:.4} (fit over checkpoints {}..={}); R(L) = {:.3} +/- {:.3}",
        report.fit.slope,
        report.fit.intercept,
        report.fit.r2,
        report.fit_from + 1,
        report.checkpoints.len(),
        last.mean,
        last.se
    );
    Ok(())
}

pub fn sweep(run: &Run) -> Result<(), Failure> {
    let e = &run.experiment;
    let sweep = e
        .sweep
        .as_ref()
        .ok_or_else(|| Error::invalid("sweep", "the config has no [sweep] block"))?;
    let rows = heavy_traffic_sweep(
        &e.controller,
        sweep.base_size,
        &sweep.scales,
        e.initial,
        e.replications,
        e.seed,
        Some(e.window),
    )?;
    println!("wrote {}", output::write_sweep(&run.out, &rows)?.display());
    for r in &rows {
        println!(
            "n = {}: p = {:.4}, mu/s = {:.4}, rho = {:.4}",
            r.n, r.p_n, r.mu_n_over_n, r.rho_n
        );
    }
    Ok(())
}
