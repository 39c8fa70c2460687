//! Structural properties of the simulator under fixed seeds, plus randomized
//! invariants of a single cycle.

mod common;

use common::*;
use proptest::prelude::*;
use queue_pricing::distributions::Family;
use queue_pricing::market::Policy;
use queue_pricing::queue::{CycleState, QueueSpec};

fn pass(check: Check) {
    if let Err(e) = check {
        panic!("{e}");
    }
}

#[test]
fn coupled_paths_collapse() {
    pass(coupling_collapse(50));
}

#[test]
fn waits_are_monotone_in_initial_workload() {
    pass(lindley_monotone(50));
}

#[test]
fn projection_is_idempotent_and_nonexpansive() {
    pass(projection_properties(10_000));
}

#[test]
fn busy_age_matches_replayed_busy_periods() {
    pass(busy_age_identity(20));
}

#[test]
fn cycle_clock_matches_fifo_replay() {
    pass(clock_time_identity(50));
}

#[test]
fn simulation_matches_pollaczek_khinchine() {
    pass(pk_agreement(1_000_000));
}

#[test]
fn crn_sensitivity_is_bounded() {
    pass(crn_lipschitz(1_000_000));
}

fn queue_for(k: u8) -> QueueSpec {
    match k % 4 {
        0 => QueueSpec::markovian(),
        1 => mg1_queue(service(Family::HyperExp2, 4.0, None)),
        2 => mg1_queue(service(Family::Erlang, f64::NAN, Some(3))),
        _ => mg1_queue(service(Family::Lognormal, 2.0, None)),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cycle_invariants(
        mu in 6.5f64..20.0,
        p in 3.6f64..8.0,
        w0 in 0.0f64..3.0,
        d_k in 1usize..400,
        k in 0u8..4,
        seed in 0u64..1_000,
    ) {
        let model = joint_model();
        let policy = Policy::new(mu, p);
        let queue = queue_for(k);
        let mut state = CycleState::empty(&model, policy);
        state.w0 = w0;
        state.x0 = if w0 > 0.0 { w0 } else { 0.0 };
        let rec = cycle_from(&model, &queue, policy, d_k, &state, seed);

        prop_assert_eq!(rec.waits.len(), d_k);
        prop_assert_eq!(rec.busy_ages.len(), d_k);
        prop_assert!(rec.t_k >= 0.0 && rec.t_k.is_finite() && rec.cost.is_finite());
        let mut w_prev = rec.w0;
        for n in 0..d_k {
            let (w, x) = (rec.waits[n], rec.busy_ages[n]);
            prop_assert!(w >= 0.0 && x >= 0.0);
            prop_assert!(w > 0.0 || x == 0.0, "customer {} found the system empty but x = {}", n + 1, x);
            // One Lindley step from the previous wait.
            let expect = (w_prev + rec.services[n] - rec.interarrivals[n]).max(0.0);
            prop_assert!((w - expect).abs() <= 1e-9 * (1.0 + expect));
            w_prev = w;
        }
        for n in 1..=d_k {
            let fee = rec.price_paid(n);
            prop_assert!(fee == policy.p || (n <= rec.q_k && fee == rec.prev_policy.p));
        }
    }

    #[test]
    fn higher_start_never_lowers_waits(
        w0 in 0.0f64..2.0,
        bump in 0.0f64..2.0,
        seed in 0u64..1_000,
    ) {
        let model = joint_model();
        let policy = Policy::new(10.0, price_for_rate(7.0));
        let queue = QueueSpec::markovian();
        let state = |w: f64| {
            let mut s = CycleState::empty(&model, policy);
            s.w0 = w;
            s.x0 = w;
            s
        };
        let lo = cycle_from(&model, &queue, policy, 300, &state(w0), seed);
        let hi = cycle_from(&model, &queue, policy, 300, &state(w0 + bump), seed);
        for n in 0..300 {
            prop_assert!(hi.waits[n] + 1e-12 >= lo.waits[n]);
        }
    }
}
