//! Ground truth for tests and experiments: closed-form M/M/1 and M/G/1
//! steady states, the exact optimizer of the analytic objective, central
//! finite differences, and long-run Lindley simulation.

use crate::controller::Mode;
use crate::error::{Error, Result};
use crate::market::{MarketModel, Policy};
use crate::queue::{CycleStreams, QueueSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateSummary {
    pub mean_w: f64,
    pub mean_x: f64,
    pub mean_q_system: f64,
    pub rho: f64,
}

fn check_rates(lambda: f64, mu: f64) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(
            "lambda",
            format!("must be finite and non-negative (got {lambda})"),
        ));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid("mu", format!("must be positive (got {mu})")));
    }
    let rho = lambda / mu;
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    Ok(rho)
}

/// Pollaczek-Khinchine with unit-mean service law of squared CV `scv`.
///
/// `E[X]` follows from `E[X] = -mu dE[W]/dmu - E[W]`, which for P-K gives
/// `lambda (1 + scv) / (2 (mu - lambda)^2)`.
pub fn mg1_steady(lambda: f64, mu: f64, scv: f64) -> Result<SteadyStateSummary> {
    if !(scv >= 0.0 && scv.is_finite()) {
        return Err(Error::invalid(
            "scv",
            format!("must be finite and non-negative (got {scv})"),
        ));
    }
    let rho = check_rates(lambda, mu)?;
    let mean_w = lambda * (1.0 + scv) / (2.0 * mu * (mu - lambda));
    let mean_x = lambda * (1.0 + scv) / (2.0 * (mu - lambda).powi(2));
    Ok(SteadyStateSummary {
        mean_w,
        mean_x,
        mean_q_system: lambda * mean_w + rho,
        rho,
    })
}

pub fn mm1_steady(lambda: f64, mu: f64) -> Result<SteadyStateSummary> {
    let rho = check_rates(lambda, mu)?;
    let mean_w = lambda / (mu * (mu - lambda));
    Ok(SteadyStateSummary {
        mean_w,
        mean_x: lambda / (mu - lambda).powi(2),
        mean_q_system: rho / (1.0 - rho),
        rho,
    })
}

/// Which closed form supplies steady-state means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SteadyModel {
    Mm1,
    /// Poisson arrivals, general service with the given squared CV.
    Mg1 {
        scv: f64,
    },
}

impl SteadyModel {
    /// Closed form matching `queue`, if one exists (Poisson arrivals only).
    pub fn for_queue(queue: &QueueSpec) -> Option<Self> {
        use crate::distributions::Family;
        if queue.arrival.family() != Family::Exponential {
            return None;
        }
        Some(match queue.service.family() {
            Family::Exponential => SteadyModel::Mm1,
            _ => SteadyModel::Mg1 {
                scv: queue.service.scv(),
            },
        })
    }

    pub fn summary(self, lambda: f64, mu: f64) -> Result<SteadyStateSummary> {
        match self {
            SteadyModel::Mm1 => mm1_steady(lambda, mu),
            SteadyModel::Mg1 { scv } => mg1_steady(lambda, mu, scv),
        }
    }
}

/// `f(mu, p)` from the closed form; `Unstable` when `lambda(p) >= mu`.
pub fn analytic_objective(model: &MarketModel, steady: SteadyModel, x: &Policy) -> Result<f64> {
    let s = steady.summary(model.rate(x.p), x.mu)?;
    Ok(model.objective_via_waiting(x, s.mean_w))
}

/// Central differences of the analytic objective, ordered `[d/dmu, d/dp]`.
pub fn fd_gradient(
    model: &MarketModel,
    steady: SteadyModel,
    x: &Policy,
    step: f64,
) -> Result<[f64; 2]> {
    let f = |mu: f64, p: f64| analytic_objective(model, steady, &Policy::new(mu, p));
    let d_mu = (f(x.mu + step, x.p)? - f(x.mu - step, x.p)?) / (2.0 * step);
    let d_p = (f(x.mu, x.p + step)? - f(x.mu, x.p - step)?) / (2.0 * step);
    Ok([d_mu, d_p])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub policy: Policy,
    pub value: f64,
    pub rho: f64,
}

/// Minimize the analytic objective over the model's box.
///
/// A `grid x grid` stability-filtered search seeds a Nelder-Mead refinement
/// that stops once the simplex is within `tol` of its best vertex. In a frozen
/// mode the fixed coordinate is taken from `anchor` and only the live one is
/// searched.
pub fn optimize_analytic(
    model: &MarketModel,
    steady: SteadyModel,
    mode: Mode,
    anchor: Policy,
    grid: usize,
    tol: f64,
) -> Result<Optimum> {
    if grid < 2 {
        return Err(Error::invalid("grid", "need at least 2 points per axis"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let b = *model.bounds();
    let anchor = b.project(anchor);
    let (mu_axis, p_axis) = match mode {
        Mode::Joint => (true, true),
        Mode::FreezeMu => (false, true),
        Mode::FreezePrice => (true, false),
        Mode::Fixed => {
            let value = analytic_objective(model, steady, &anchor)?;
            return Ok(Optimum {
                policy: anchor,
                value,
                rho: model.utilization(&anchor),
            });
        }
    };
    // Coordinates searched, in box-normalized units.
    let to_policy = |z: &[f64]| {
        let mut it = z.iter();
        let mu = if mu_axis {
            b.mu_lo + it.next().unwrap() * (b.mu_hi - b.mu_lo)
        } else {
            anchor.mu
        };
        let p = if p_axis {
            b.p_lo + it.next().unwrap() * (b.p_hi - b.p_lo)
        } else {
            anchor.p
        };
        Policy::new(mu, p)
    };
    let objective = |z: &[f64]| {
        if z.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return f64::INFINITY;
        }
        analytic_objective(model, steady, &to_policy(z)).unwrap_or(f64::INFINITY)
    };

    let dims = mu_axis as usize + p_axis as usize;
    let ticks: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let mut best = (f64::INFINITY, vec![0.0; dims]);
    let mut visit = |z: Vec<f64>| {
        let v = objective(&z);
        if v < best.0 {
            best = (v, z);
        }
    };
    if dims == 2 {
        for &a in &ticks {
            for &c in &ticks {
                visit(vec![a, c]);
            }
        }
    } else {
        for &a in &ticks {
            visit(vec![a]);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Unstable {
            rho: model.utilization(&to_policy(&best.1)),
        });
    }

    // Tolerance is on the policy, so rescale it to normalized units.
    let span = (b.mu_hi - b.mu_lo).max(b.p_hi - b.p_lo);
    let z_tol = tol / span;
    let step = 2.0 / (grid - 1) as f64;
    let mut z = nelder_mead(&objective, &best.1, step, z_tol);
    // A restart guards against premature simplex collapse.
    z = nelder_mead(&objective, &z, step / 4.0, z_tol);
    let policy = to_policy(&z);
    let value = objective(&z);
    let rho = model.utilization(&policy);
    if rho > 1.0 - 1e-6 {
        return Err(Error::StabilityBoundary { rho });
    }
    Ok(Optimum { policy, value, rho })
}

fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64, tol: f64) -> Vec<f64> {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = (0..=n)
        .map(|i| {
            let mut v = start.to_vec();
            if i > 0 {
                // Step inward when the start sits on the upper face.
                v[i - 1] += if v[i - 1] + step <= 1.0 { step } else { -step };
            }
            let fv = f(&v);
            (v, fv)
        })
        .collect();
    let centroid = |s: &[(Vec<f64>, f64)]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        for (v, _) in &s[..n] {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi / n as f64;
            }
        }
        c
    };
    let along = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(w).map(|(a, b)| a + t * (b - a)).collect()
    };

    for _ in 0..20_000 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if size < tol {
            break;
        }
        let c = centroid(&simplex);
        let worst = simplex[n].clone();
        let refl = along(&c, &worst.0, -1.0);
        let fr = f(&refl);
        if fr < simplex[0].1 {
            let exp = along(&c, &worst.0, -2.0);
            let fe = f(&exp);
            simplex[n] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (refl, fr);
        } else {
            let (con, fc) = if fr < worst.1 {
                let v = along(&c, &worst.0, -0.5);
                let fv = f(&v);
                (v, fv)
            } else {
                let v = along(&c, &worst.0, 0.5);
                let fv = f(&v);
                (v, fv)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (con, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let v = along(&best, &vertex.0, 0.5);
                    let fv = f(&v);
                    *vertex = (v, fv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0).0
}

/// Long-run estimate at a fixed policy, with batch-means standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyEstimate {
    pub mean_w: f64,
    pub mean_x: f64,
    pub se_w: f64,
    pub se_x: f64,
    /// Standard error of the mean of `W + X`.
    pub se_sum: f64,
    pub rho: f64,
    /// False when `rho >= 1`; the means then describe a transient only.
    pub stable: bool,
}

impl SteadyEstimate {
    /// Point estimates, with `mean_q_system` composed by Little's law.
    pub fn summary(&self, lambda: f64) -> SteadyStateSummary {
        SteadyStateSummary {
            mean_w: self.mean_w,
            mean_x: self.mean_x,
            mean_q_system: lambda * self.mean_w + self.rho,
            rho: self.rho,
        }
    }
}

/// Lindley + busy-age path from empty at a fixed policy.
///
/// `visit(n, W_n, X_n)` is called for `n = 1..=customers`. Service and
/// interarrival variates come from `streams` in the same order as in
/// [`crate::queue::run_cycle`], so two calls with equal streams share them.
pub fn simulate_path(
    model: &MarketModel,
    queue: &QueueSpec,
    policy: Policy,
    customers: usize,
    streams: CycleStreams<'_>,
    mut visit: impl FnMut(usize, f64, f64),
) -> Result<()> {
    let lambda = model.rate(policy.p);
    if !(lambda > 0.0) {
        return Err(Error::NoArrivals { price: policy.p });
    }
    if !(policy.mu > 0.0) {
        return Err(Error::invalid("policy.mu", "must be positive"));
    }
    let (mut w, mut x) = (0.0f64, 0.0f64);
    for n in 1..=customers {
        let service = queue.service.draw(streams.services) / policy.mu;
        let tau = queue.arrival.draw(streams.arrivals) / lambda;
        w = (w + service - tau).max(0.0);
        x = if w > 0.0 { x + tau } else { 0.0 };
        visit(n, w, x);
    }
    Ok(())
}

const BATCHES: usize = 50;

/// Simulate `warmup + samples` customers from empty and average the last
/// `samples`. Standard errors use 50 batch means.
pub fn simulate_steady(
    model: &MarketModel,
    queue: &QueueSpec,
    policy: Policy,
    warmup: usize,
    samples: usize,
    streams: CycleStreams<'_>,
) -> Result<SteadyEstimate> {
    if samples < BATCHES {
        return Err(Error::invalid(
            "samples",
            format!("need at least {BATCHES}"),
        ));
    }
    let batch_len = samples / BATCHES;
    let used = batch_len * BATCHES;
    let mut batch = [0.0f64; 3];
    let mut means: Vec<[f64; 3]> = Vec::with_capacity(BATCHES);
    simulate_path(model, queue, policy, warmup + used, streams, |n, w, x| {
        if n <= warmup {
            return;
        }
        batch[0] += w;
        batch[1] += x;
        batch[2] += w + x;
        if (n - warmup).is_multiple_of(batch_len) {
            means.push(batch.map(|s| s / batch_len as f64));
            batch = [0.0; 3];
        }
    })?;
    let stat = |i: usize| {
        let m = means.iter().map(|b| b[i]).sum::<f64>() / BATCHES as f64;
        let var = means.iter().map(|b| (b[i] - m).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
        (m, (var / BATCHES as f64).sqrt())
    };
    let (mean_w, se_w) = stat(0);
    let (mean_x, se_x) = stat(1);
    let (_, se_sum) = stat(2);
    let rho = model.utilization(&policy);
    Ok(SteadyEstimate {
        mean_w,
        mean_x,
        se_w,
        se_x,
        se_sum,
        rho,
        stable: rho < 1.0,
    })
}
