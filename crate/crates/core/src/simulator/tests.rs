use std::f64::consts::E;

use proptest::prelude::*;

use super::*;
use crate::diagnostics::{ks_exp1, mean_var};
use crate::model::{angular_frequency, BaselineSpec, KernelSpec};

fn model(n: usize, mu: f64, decay: f64, weights: &[(usize, usize, f64)]) -> HawkesModel {
    let c = crate::model::tests_support::loose_constants();
    let mut m = HawkesModel::new(
        vec![BaselineSpec::constant(mu); n],
        KernelSpec::exponential(decay),
        c,
    )
    .unwrap();
    for &(i, j, w) in weights {
        m.set_weight(i, j, w).unwrap();
    }
    let c = m.infer_constants();
    m.set_constants(c);
    m
}

#[test]
fn intensity_without_history_is_baseline() {
    let m = model(2, 1.3, 1.0, &[(0, 1, 0.5)]);
    let log = EventLog::new(2, 10.0, vec![]).unwrap();
    assert_eq!(intensity(&m, &log, 0, 4.0).unwrap(), 1.3);
    assert!(intensity(&m, &log, 2, 4.0).is_err());
}

#[test]
fn intensity_single_source_event() {
    let m = model(2, 1.0, 1.0, &[(0, 1, 0.5)]);
    let log = EventLog::new(2, 10.0, vec![Event { time: 1.0, node: 1 }]).unwrap();
    let v = intensity(&m, &log, 0, 2.0).unwrap();
    assert!((v - (1.0 + 0.5 / E)).abs() < 1e-12);
    assert!((v - 1.18394).abs() < 1e-5);
}

#[test]
fn intensity_is_left_continuous_at_events() {
    let m = model(1, 1.0, 2.0, &[(0, 0, 1.0)]);
    let log = EventLog::new(1, 10.0, vec![Event { time: 3.0, node: 0 }]).unwrap();
    let before = intensity(&m, &log, 0, 3.0).unwrap();
    let after = intensity_after(&m, &log, 0, 3.0).unwrap();
    assert_eq!(before, 1.0);
    assert!((after - before - 1.0).abs() < 1e-12);
}

#[test]
fn simulation_is_deterministic() {
    let m = model(3, 0.7, 2.0, &[(0, 0, 0.6), (1, 0, 0.4), (2, 2, 0.5)]);
    let a = simulate(&m, 200.0, 99).unwrap();
    let b = simulate(&m, 200.0, 99).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_text(), b.to_text());
    let c = simulate(&m, 200.0, 100).unwrap();
    assert_ne!(a.events(), c.events());
}

#[test]
fn simulated_log_is_sorted_and_in_range() {
    let m = model(3, 1.0, 2.0, &[(0, 0, 0.6), (1, 0, 0.4), (2, 1, 0.3)]);
    let log = simulate(&m, 100.0, 3).unwrap();
    assert!(log.events().windows(2).all(|w| w[0].time < w[1].time));
    assert!(log
        .events()
        .iter()
        .all(|e| e.time >= 0.0 && e.time <= 100.0 && e.node < 3));
    assert_eq!(log.fingerprint, m.fingerprint());
}

#[test]
fn poisson_counts_when_unexcited() {
    let m = model(2, 2.0, 1.0, &[]);
    let log = simulate(&m, 1000.0, 5).unwrap();
    for c in log.counts() {
        // Poisson(2000): sd ≈ 44.7.
        assert!((c as f64 - 2000.0).abs() < 4.0 * 44.72, "count {c}");
    }
}

#[test]
fn sinusoidal_baseline_counts_match_integral() {
    let mut m = model(1, 2.0, 1.0, &[]);
    m.set_baseline(
        0,
        BaselineSpec::sinusoidal(2.0, 1.0, angular_frequency(1.0), 0.0),
    )
    .unwrap();
    let c = m.infer_constants();
    m.set_constants(c);
    let counts: Vec<f64> = (0..20)
        .map(|s| simulate(&m, 500.0, s).unwrap().count(0) as f64)
        .collect();
    let (mean, _) = mean_var(&counts);
    // Expected a·T = 1000 exactly; standard error of the mean ≈ sqrt(1000/20).
    assert!(
        (mean - 1000.0).abs() < 4.0 * (1000.0f64 / 20.0).sqrt(),
        "mean {mean}"
    );
}

#[test]
fn self_excited_mean_rate_matches_branching_formula() {
    let m = model(1, 1.0, 1.0, &[(0, 0, 0.5)]);
    let log = simulate(&m, 1000.0, 17).unwrap();
    let expected = 1000.0 / (1.0 - 0.5);
    let got = log.count(0) as f64;
    assert!(
        (got - expected).abs() < 0.05 * expected,
        "{got} vs {expected}"
    );
}

#[test]
fn jump_identity_holds_on_simulated_log() {
    let m = model(
        3,
        1.0,
        2.0,
        &[(0, 0, 0.6), (1, 0, 0.4), (2, 1, 0.3), (1, 1, 0.5)],
    );
    let log = simulate(&m, 30.0, 8).unwrap();
    for e in log.events() {
        for target in 0..3 {
            let w = m.weight(target, e.node);
            let jump = intensity_after(&m, &log, target, e.time).unwrap()
                - intensity(&m, &log, target, e.time).unwrap();
            assert!((jump - w).abs() < 1e-9, "jump {jump} vs w {w}");
        }
    }
}

#[test]
fn time_rescaled_gaps_are_unit_exponential() {
    let m = model(1, 1.0, 1.0, &[(0, 0, 0.5)]);
    let log = simulate(&m, 2500.0, 4).unwrap();
    let gaps = compensator_increments(&m, &log, 0).unwrap();
    assert!(gaps.len() > 4000);
    assert!(ks_exp1(&gaps).p_value > 0.01);
}

#[test]
fn time_rescaling_with_modulated_kernels_and_sinusoidal_baselines() {
    let mut m = model(2, 1.0, 2.0, &[(0, 0, 0.5), (1, 0, 0.4), (1, 1, 0.6)]);
    m.set_kernel(1, 0, KernelSpec::modulated(2.0, 0.8, 0.5))
        .unwrap();
    m.set_baseline(0, BaselineSpec::sinusoidal(1.0, 0.4, 1.0, 0.2))
        .unwrap();
    let c = m.infer_constants();
    m.set_constants(c);
    let log = simulate(&m, 1500.0, 21).unwrap();
    for node in 0..2 {
        let gaps = compensator_increments(&m, &log, node).unwrap();
        assert!(ks_exp1(&gaps).p_value > 0.001, "node {node}");
    }
}

#[test]
fn undersized_smoothness_constant_is_reported() {
    let mut m = model(1, 1.0, 1.0, &[]);
    m.set_baseline(0, BaselineSpec::sinusoidal(2.0, 1.9, 20.0, 0.0))
        .unwrap();
    let mut c = m.infer_constants();
    c.smoothness = 0.0;
    m.set_constants(c);
    let err = simulate_with(&m, 50.0, 1, &SimulationOptions { lookahead: 1.0 }).unwrap_err();
    assert!(matches!(err, Error::DominatingRate { .. }));
}

#[test]
fn max_trace_examples() {
    let m = model(2, 1.0, 2.0, &[(0, 0, 0.8), (1, 0, 0.5)]);
    let mut m2 = m.clone();
    m2.set_baseline(1, BaselineSpec::constant(1.7)).unwrap();
    let empty = EventLog::new(2, 10.0, vec![]).unwrap();
    let (sup, _) = max_intensity_trace(&m2, &empty, 0.5).unwrap();
    assert_eq!(sup, 1.7);
    let one = EventLog::new(2, 10.0, vec![Event { time: 2.0, node: 0 }]).unwrap();
    let (sup, at) = max_intensity_trace(&m, &one, 0.5).unwrap();
    assert_eq!(at, 2.0);
    assert!((sup - 1.8).abs() < 1e-12);
}

#[test]
fn prefix_state_matches_direct_intensity() {
    let mut m = model(2, 1.0, 2.0, &[(0, 0, 0.5), (0, 1, 0.3), (1, 0, 0.4)]);
    m.set_kernel(0, 1, KernelSpec::modulated(1.5, 0.5, 2.0))
        .unwrap();
    let log = simulate(&m, 50.0, 2).unwrap();
    let ex = Excitation::new(&m);
    for t in [0.5, 7.25, 33.0, 49.9] {
        let state = ex.state_at(log.events(), t);
        for i in 0..2 {
            let fast = m.baseline(i).eval(t) + ex.excitation(&state, i);
            let slow = intensity(&m, &log, i, t).unwrap();
            assert!((fast - slow).abs() < 1e-9, "t={t} i={i}: {fast} vs {slow}");
        }
    }
}

#[test]
fn log_file_rejects_unsorted_records() {
    let text = "# hawkes-events n=2 horizon=10 seed=1 fingerprint=-\n1.5 0\n1.0 1\n";
    assert!(matches!(
        EventLog::from_text(text),
        Err(Error::Parse { line: 3, .. })
    ));
    assert!(EventLog::from_text("0.1 0\n").is_err());
    let text = "# hawkes-events n=2 horizon=10 seed=1 fingerprint=-\n1.5 7\n";
    assert!(EventLog::from_text(text).is_err());
}

proptest! {
    #[test]
    fn log_file_round_trips_bit_exactly(
        raw in proptest::collection::vec((0.0f64..100.0, 0usize..4), 0..40),
        seed in any::<u64>(),
    ) {
        let events = raw.into_iter().map(|(time, node)| Event { time, node }).collect();
        let mut log = EventLog::new(4, 100.0, events).unwrap().with_provenance(seed, "abc123");
        log.events.dedup_by(|a, b| a.time == b.time && a.node == b.node);
        let back = EventLog::from_text(&log.to_text()).unwrap();
        prop_assert_eq!(&back, &log);
        for (a, b) in back.events().iter().zip(log.events()) {
            prop_assert_eq!(a.time.to_bits(), b.time.to_bits());
        }
    }
}
