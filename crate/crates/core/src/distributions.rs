//! Unit-mean random variates for interarrival and service times.
//!
//! Interarrival and service times are modeled as `U_n / lambda` and `V_n / mu`
//! with `E[U] = E[V] = 1`. A [`UnitVariateSpec`] fixes the law of `U` (or `V`)
//! by family and squared coefficient of variation (SCV); a [`RandomStream`] is
//! a counter-based generator keyed by `(seed, stream_id)` so that every
//! replication and every purpose (arrivals, services, coordinate coin) owns an
//! independent, reproducible sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ERLANG_SCV_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Exponential,
    #[serde(alias = "h2")]
    HyperExp2,
    Erlang,
    Lognormal,
    /// Constant 1. Not part of the GI/GI/1 experiments; used for D/D/1 checks.
    Deterministic,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Exponential => "exponential",
            Family::HyperExp2 => "hyperexp2",
            Family::Erlang => "erlang",
            Family::Lognormal => "lognormal",
            Family::Deterministic => "deterministic",
        }
    }
}

/// Internal sampling parameters, resolved once at validation time.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Law {
    Exponential,
    /// Two-branch mixture: with probability `p1` an exponential of rate `rate1`.
    HyperExp2 {
        p1: f64,
        rate1: f64,
        rate2: f64,
    },
    Erlang {
        phases: u32,
    },
    Lognormal {
        location: f64,
        shape: f64,
    },
    Deterministic,
}

/// Validated law of a unit-mean positive random variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVariateSpec {
    family: Family,
    scv: f64,
    phases: u32,
    law: Law,
}

impl UnitVariateSpec {
    pub fn exponential() -> Self {
        make_spec(Family::Exponential, 1.0, None).expect("exponential spec is always valid")
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn scv(&self) -> f64 {
        self.scv
    }

    /// Number of phases; 1 for every family except Erlang.
    pub fn phases(&self) -> u32 {
        self.phases
    }

    /// Every implemented family is always mean 1.
    pub fn mean(&self) -> f64 {
        1.0
    }

    /// False for lognormal, whose moment generating function is infinite for
    /// every positive argument.
    pub fn is_light_tailed(&self) -> bool {
        self.family != Family::Lognormal
    }

    /// Mixing probability and branch rates of a hyperexponential spec.
    pub fn hyperexp_branches(&self) -> Option<(f64, f64, f64)> {
        match self.law {
            Law::HyperExp2 { p1, rate1, rate2 } => Some((p1, rate1, rate2)),
            _ => None,
        }
    }

    /// `(location, shape^2)` of a lognormal spec.
    pub fn lognormal_params(&self) -> Option<(f64, f64)> {
        match self.law {
            Law::Lognormal { location, shape } => Some((location, shape * shape)),
            _ => None,
        }
    }

    /// Draw one variate.
    pub fn draw(&self, stream: &mut RandomStream) -> f64 {
        draw(self, stream)
    }
}

/// Build and validate a unit-mean spec.
///
/// `scv` is ignored for the deterministic family. For Erlang, `phases` is
/// required and `scv` must equal `1/phases`; pass `f64::NAN` for `scv` to
/// derive it from `phases`.
pub fn make_spec(family: Family, scv: f64, phases: Option<u32>) -> Result<UnitVariateSpec> {
    let field = "scv";
    if family != Family::Deterministic && !scv.is_nan() && !(scv > 0.0 && scv.is_finite()) {
        return Err(Error::invalid(
            field,
            format!("must be positive and finite (got {scv})"),
        ));
    }
    let spec = match family {
        Family::Exponential => {
            if !scv.is_nan() && scv != 1.0 {
                return Err(Error::invalid(
                    field,
                    format!("exponential has scv 1 (got {scv})"),
                ));
            }
            UnitVariateSpec {
                family,
                scv: 1.0,
                phases: 1,
                law: Law::Exponential,
            }
        }
        Family::HyperExp2 => {
            if scv.is_nan() || scv <= 1.0 {
                return Err(Error::invalid(
                    field,
                    format!("hyperexp2 requires scv > 1 (got {scv})"),
                ));
            }
            // Balanced means: p1 / rate1 = (1 - p1) / rate2 = 1/2.
            let p1 = 0.5 * (1.0 + ((scv - 1.0) / (scv + 1.0)).sqrt());
            UnitVariateSpec {
                family,
                scv,
                phases: 2,
                law: Law::HyperExp2 {
                    p1,
                    rate1: 2.0 * p1,
                    rate2: 2.0 * (1.0 - p1),
                },
            }
        }
        Family::Erlang => {
            let n = match phases {
                Some(n) if n >= 1 => n,
                _ => return Err(Error::invalid("phases", "erlang requires phases >= 1")),
            };
            let implied = 1.0 / n as f64;
            if !scv.is_nan() && (scv - implied).abs() > ERLANG_SCV_TOL {
                return Err(Error::invalid(
                    field,
                    format!("erlang with {n} phases has scv {implied} (got {scv})"),
                ));
            }
            UnitVariateSpec {
                family,
                scv: implied,
                phases: n,
                law: Law::Erlang { phases: n },
            }
        }
        Family::Lognormal => {
            if scv.is_nan() {
                return Err(Error::invalid(field, "lognormal requires an scv"));
            }
            let shape2 = (1.0 + scv).ln();
            UnitVariateSpec {
                family,
                scv,
                phases: 1,
                law: Law::Lognormal {
                    location: -0.5 * shape2,
                    shape: shape2.sqrt(),
                },
            }
        }
        Family::Deterministic => UnitVariateSpec {
            family,
            scv: 0.0,
            phases: 1,
            law: Law::Deterministic,
        },
    };
    Ok(spec)
}

/// Counter-based generator keyed by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.rng)
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

/// What a stream is used for inside one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Arrivals = 0,
    Services = 1,
    CoordinateCoin = 2,
    /// Anything outside the controller loop (oracles, diagnostics).
    Auxiliary = 3,
    WarmupArrivals = 4,
    WarmupServices = 5,
}

/// Stream id for one `(replication, purpose)` pair.
pub fn stream_id(replication: u64, purpose: Purpose) -> u64 {
    (replication << 8) | purpose as u64
}

/// Per-replication bundle of independent streams.
#[derive(Debug, Clone)]
pub struct ReplicationStreams {
    pub arrivals: RandomStream,
    pub services: RandomStream,
    pub coin: RandomStream,
}

impl ReplicationStreams {
    pub fn new(seed: u64, replication: u64) -> Self {
        Self {
            arrivals: RandomStream::new(seed, stream_id(replication, Purpose::Arrivals)),
            services: RandomStream::new(seed, stream_id(replication, Purpose::Services)),
            coin: RandomStream::new(seed, stream_id(replication, Purpose::CoordinateCoin)),
        }
    }
}

/// Draw one unit-mean variate from `spec`.
pub fn draw(spec: &UnitVariateSpec, stream: &mut RandomStream) -> f64 {
    match spec.law {
        Law::Exponential => stream.exp1(),
        Law::HyperExp2 { p1, rate1, rate2 } => {
            let rate = if stream.uniform() < p1 { rate1 } else { rate2 };
            stream.exp1() / rate
        }
        Law::Erlang { phases } => {
            let sum: f64 = (0..phases).map(|_| stream.exp1()).sum();
            sum / phases as f64
        }
        Law::Lognormal { location, shape } => (location + shape * stream.normal()).exp(),
        Law::Deterministic => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(spec: &UnitVariateSpec, n: usize, seed: u64) -> (f64, f64) {
        let mut s = RandomStream::new(seed, 0);
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let x = spec.draw(&mut s);
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        (mean, var / (mean * mean))
    }

    #[test]
    fn rejects_invalid_scv() {
        assert!(make_spec(Family::Lognormal, 0.0, None).is_err());
        assert!(make_spec(Family::Lognormal, -1.0, None).is_err());
        assert!(make_spec(Family::HyperExp2, 1.0, None).is_err());
        assert!(make_spec(Family::HyperExp2, 0.5, None).is_err());
        assert!(make_spec(Family::Erlang, 0.3, Some(4)).is_err());
        assert!(make_spec(Family::Erlang, f64::NAN, None).is_err());
        assert!(make_spec(Family::Exponential, 2.0, None).is_err());
    }

    #[test]
    fn exponential_and_erlang_scv() {
        let e = make_spec(Family::Exponential, 1.0, None).unwrap();
        assert_eq!((e.mean(), e.scv()), (1.0, 1.0));
        let e8 = make_spec(Family::Erlang, f64::NAN, Some(8)).unwrap();
        assert_eq!(e8.scv(), 0.125);
        assert!(make_spec(Family::Erlang, 0.125, Some(8)).is_ok());
    }

    #[test]
    fn hyperexp_matches_balanced_means_solution() {
        // Independent route: balanced means forces p1 (1 - p1) = 1 / (2 (1 + c^2));
        // take the root above 1/2 by bisection.
        let c2 = 8.0;
        let target = 1.0 / (2.0 * (1.0 + c2));
        let (mut lo, mut hi) = (0.5, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * (1.0 - mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let spec = make_spec(Family::HyperExp2, c2, None).unwrap();
        let (p1, r1, r2) = spec.hyperexp_branches().unwrap();
        assert!((p1 - lo).abs() < 1e-12);
        assert!((p1 - 0.5 * (1.0 + (7.0f64 / 9.0).sqrt())).abs() < 1e-15);
        assert!((r1 - 2.0 * p1).abs() < 1e-15 && (r2 - 2.0 * (1.0 - p1)).abs() < 1e-15);

        let (mean, scv) = moments(&spec, 1_000_000, 11);
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!((scv - 8.0).abs() < 0.4, "scv {scv}");
    }

    #[test]
    fn lognormal_parameters_and_moments() {
        let spec = make_spec(Family::Lognormal, 2.0, None).unwrap();
        let (loc, shape2) = spec.lognormal_params().unwrap();
        assert!((shape2 - 3f64.ln()).abs() < 1e-15);
        assert!((loc + 0.5 * shape2).abs() < 1e-15);
        // Closed-form moments of the chosen parameters.
        let mean = (loc + 0.5 * shape2).exp();
        let scv = shape2.exp() - 1.0;
        assert!((mean - 1.0).abs() < 1e-14 && (scv - 2.0).abs() < 1e-12);
        let (m, c) = moments(&spec, 1_000_000, 12);
        assert!((m - 1.0).abs() < 0.01, "mean {m}");
        assert!((c - 2.0).abs() < 0.15, "scv {c}");
    }

    #[test]
    fn erlang_four_sample_scv() {
        let spec = make_spec(Family::Erlang, f64::NAN, Some(4)).unwrap();
        let (m, c) = moments(&spec, 1_000_000, 13);
        assert!((m - 1.0).abs() < 0.003, "mean {m}");
        assert!((c - 0.25).abs() < 0.005, "scv {c}");
    }

    #[test]
    fn sample_mean_within_five_standard_errors() {
        let n = 1_000_000;
        let specs = [
            make_spec(Family::Exponential, 1.0, None).unwrap(),
            make_spec(Family::HyperExp2, 2.0, None).unwrap(),
            make_spec(Family::HyperExp2, 8.0, None).unwrap(),
            make_spec(Family::Erlang, f64::NAN, Some(2)).unwrap(),
            make_spec(Family::Erlang, f64::NAN, Some(8)).unwrap(),
            make_spec(Family::Lognormal, 2.0, None).unwrap(),
        ];
        for (i, spec) in specs.iter().enumerate() {
            let (mean, scv) = moments(spec, n, 100 + i as u64);
            let bound = 5.0 * (scv / n as f64).sqrt();
            assert!(
                (mean - 1.0).abs() <= bound,
                "{:?}: mean {mean} bound {bound}",
                spec.family()
            );
        }
        let (mean, _) = moments(&specs[0], n, 7);
        assert!((mean - 1.0).abs() <= 0.005);
    }

    #[test]
    fn identical_keys_reproduce_sequences() {
        let spec = make_spec(Family::HyperExp2, 8.0, None).unwrap();
        let mut a = RandomStream::new(42, 3);
        let mut b = RandomStream::new(42, 3);
        let mut c = RandomStream::new(42, 4);
        let mut differs = false;
        for _ in 0..100_000 {
            let x = spec.draw(&mut a);
            assert_eq!(x.to_bits(), spec.draw(&mut b).to_bits());
            differs |= x != spec.draw(&mut c);
        }
        assert!(differs);
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let mut a = RandomStream::new(5, stream_id(0, Purpose::Arrivals));
        let mut b = RandomStream::new(5, stream_id(0, Purpose::Services));
        let n = 200_000;
        let mut sxy = 0.0;
        for _ in 0..n {
            sxy += (a.uniform() - 0.5) * (b.uniform() - 0.5);
        }
        // Correlation of independent uniforms has sd 1/sqrt(n).
        let corr = sxy / n as f64 * 12.0;
        assert!(corr.abs() < 5.0 / (n as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn light_tailed_mgf_is_finite_except_lognormal() {
        let eta = 0.1;
        for spec in [
            UnitVariateSpec::exponential(),
            make_spec(Family::HyperExp2, 8.0, None).unwrap(),
            make_spec(Family::Erlang, f64::NAN, Some(8)).unwrap(),
        ] {
            assert!(spec.is_light_tailed());
            let mut s = RandomStream::new(9, 0);
            let m: f64 = (0..100_000)
                .map(|_| (eta * spec.draw(&mut s)).exp())
                .sum::<f64>()
                / 1e5;
            assert!(m.is_finite() && m < 2.0, "{:?}: {m}", spec.family());
        }
        assert!(!make_spec(Family::Lognormal, 2.0, None)
            .unwrap()
            .is_light_tailed());
    }
}
