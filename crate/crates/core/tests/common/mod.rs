#![allow(dead_code)]

use hawkes_core::{BaselineSpec, Event, EventLog, HawkesModel, KernelSpec, ModelConstants};
use rand::Rng;

pub fn loose() -> ModelConstants {
    ModelConstants {
        mu_min: 0.0,
        mu_max: f64::INFINITY,
        w_min: 0.0,
        w_max: f64::INFINITY,
        w_sep: 0.0,
        smoothness: 0.0,
        kernel_mass: f64::INFINITY,
        stability_margin: 0.0,
        max_degree: usize::MAX,
    }
}

/// Constant baselines, one exponential decay, weights `(target, source, w)`,
/// constants inferred from the parameters.
pub fn model(n: usize, mu: f64, decay: f64, weights: &[(usize, usize, f64)]) -> HawkesModel {
    let mut m = HawkesModel::new(
        vec![BaselineSpec::constant(mu); n],
        KernelSpec::exponential(decay),
        loose(),
    )
    .unwrap();
    for &(i, j, w) in weights {
        m.set_weight(i, j, w).unwrap();
    }
    let c = m.infer_constants();
    m.set_constants(c);
    m
}

/// Events of `node` in `[lo, hi)`, or `[lo, hi]` when `hi` reaches the horizon.
fn naive_count(log: &EventLog, node: usize, lo: f64, hi: f64) -> usize {
    log.events()
        .iter()
        .filter(|e| {
            e.node == node && e.time >= lo && (e.time < hi || (hi >= log.horizon && e.time <= hi))
        })
        .count()
}

/// `(D1, D2)` for the ordered pair `(i, j)` recounted from timestamps:
/// window `w` has bins starting at `(3w + b) ε`, `K = ⌊T / 3ε⌋` windows.
pub fn naive_pair(log: &EventLog, epsilon: f64, windows: usize, i: usize, j: usize) -> (i64, i64) {
    let (mut d1, mut d2) = (0i64, 0i64);
    for w in 0..windows {
        let one = |node: usize, b: usize| {
            let lo = (3 * w + b) as f64 * epsilon;
            let hi = (3 * w + b + 1) as f64 * epsilon;
            naive_count(log, node, lo, hi) == 1
        };
        let x = |a: bool| i64::from(a);
        d1 += x(one(i, 0) && one(j, 1)) - x(one(j, 0) && one(i, 1));
        d2 += x(one(i, 0) && one(i, 1) && one(j, 2)) - 2 * x(one(i, 0) && one(j, 1) && one(i, 2))
            + x(one(j, 0) && one(i, 1) && one(i, 2));
    }
    (d1, d2)
}

/// A small random log whose timestamps are dense enough to produce every
/// pattern. With `on_edges`, a third of the times sit exactly on bin edges or
/// at the horizon.
pub fn random_log<R: Rng>(
    rng: &mut R,
    n: usize,
    horizon: f64,
    epsilon: f64,
    on_edges: bool,
) -> EventLog {
    let len = rng.random_range(0..(6 * n * (horizon / epsilon) as usize / 4).max(1));
    let edges = (horizon / epsilon).round() as usize;
    let mut events: Vec<Event> = Vec::with_capacity(len);
    for _ in 0..len {
        let node = rng.random_range(0..n);
        let time = if on_edges && rng.random_bool(1.0 / 3.0) {
            (rng.random_range(0..=edges) as f64 * epsilon).min(horizon)
        } else {
            rng.random_range(0.0..horizon)
        };
        events.push(Event { time, node });
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.node.cmp(&b.node)));
    events.dedup();
    EventLog::new(n, horizon, events).unwrap()
}
