//! Exact sampling by thinning, intensity evaluation and event-log files.

mod excitation;
mod log_file;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::HawkesModel;
use crate::rng;

pub(crate) use excitation::{Excitation, ExcitationState};

/// A single event of `node` at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub node: usize,
}

/// Time-sorted events on `[0, horizon]` together with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub n: usize,
    pub horizon: f64,
    pub seed: u64,
    pub fingerprint: String,
    events: Vec<Event>,
}

fn event_order(a: &Event, b: &Event) -> std::cmp::Ordering {
    a.time.total_cmp(&b.time).then(a.node.cmp(&b.node))
}

impl EventLog {
    /// Builds a log, sorting events by time (ties by node).
    pub fn new(n: usize, horizon: f64, mut events: Vec<Event>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!(
                "horizon {horizon} must be positive and finite"
            )));
        }
        for e in &events {
            if e.node >= n {
                return Err(Error::NodeOutOfRange { node: e.node, n });
            }
            if !(e.time >= 0.0 && e.time <= horizon) {
                return Err(invalid(format!(
                    "event time {} outside [0, {horizon}]",
                    e.time
                )));
            }
        }
        events.sort_by(event_order);
        Ok(Self {
            n,
            horizon,
            seed: 0,
            fingerprint: String::new(),
            events,
        })
    }

    pub fn with_provenance(mut self, seed: u64, fingerprint: impl Into<String>) -> Self {
        self.seed = seed;
        self.fingerprint = fingerprint.into();
        self
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, node: usize) -> usize {
        self.events.iter().filter(|e| e.node == node).count()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n];
        for e in &self.events {
            c[e.node] += 1;
        }
        c
    }

    pub fn node_times(&self, node: usize) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.node == node)
            .map(|e| e.time)
            .collect()
    }

    /// Events strictly before `t`.
    pub fn prefix(&self, t: f64) -> &[Event] {
        let end = self.events.partition_point(|e| e.time < t);
        &self.events[..end]
    }

    /// The same log keeping only events of nodes for which `keep` holds.
    pub fn filter_nodes(&self, keep: impl Fn(usize) -> bool) -> Self {
        Self {
            n: self.n,
            horizon: self.horizon,
            seed: self.seed,
            fingerprint: self.fingerprint.clone(),
            events: self
                .events
                .iter()
                .filter(|e| keep(e.node))
                .copied()
                .collect(),
        }
    }

    /// Replaces all timestamps, re-sorting afterwards.
    pub(crate) fn map_times(&self, mut f: impl FnMut(&Event) -> f64) -> Self {
        let mut events: Vec<Event> = self
            .events
            .iter()
            .map(|e| Event {
                time: f(e),
                node: e.node,
            })
            .collect();
        events.sort_by(event_order);
        Self {
            events,
            ..self.clone()
        }
    }
}

/// Tunables for [`simulate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    /// Length of the window over which one dominating rate is used.
    pub lookahead: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self { lookahead: 0.1 }
    }
}

/// Candidate/acceptance counters from one run of the sampler.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ThinningStats {
    pub candidates: u64,
    pub accepted: u64,
    pub refreshes: u64,
}

/// Thinning sampler bound to one model.
pub(crate) struct Sampler<'m> {
    excitation: Excitation<'m>,
    growth: f64,
    lookahead: f64,
}

impl<'m> Sampler<'m> {
    pub(crate) fn new(model: &'m HawkesModel, opts: &SimulationOptions) -> Result<Self> {
        if !(opts.lookahead > 0.0 && opts.lookahead.is_finite()) {
            return Err(invalid(format!(
                "lookahead {} must be positive",
                opts.lookahead
            )));
        }
        let growth = (model.constants().smoothness * opts.lookahead).exp();
        Ok(Self {
            excitation: Excitation::new(model),
            growth,
            lookahead: opts.lookahead,
        })
    }

    pub(crate) fn excitation(&self) -> &Excitation<'m> {
        &self.excitation
    }

    /// Advances `state` from its current time to `until`, reporting each
    /// accepted event to `on_event`.
    ///
    /// Over `[t, t + lookahead]` without events, baselines grow by at most
    /// `exp(L · lookahead)` and excitation terms cannot grow, so
    /// `Σ μ_i(t) e^{L δ} + Σ (λ_i(t) - μ_i(t))` dominates the total rate.
    pub(crate) fn run<R: Rng>(
        &self,
        state: &mut ExcitationState,
        until: f64,
        rng: &mut R,
        rates: &mut Vec<f64>,
        mut on_event: impl FnMut(f64, usize),
    ) -> Result<ThinningStats> {
        let model = self.excitation.model();
        let n = model.node_count();
        rates.resize(n, 0.0);
        let mut stats = ThinningStats::default();
        let mut now = state.time();
        while now < until {
            let mut bound = 0.0;
            for i in 0..n {
                bound += model.baseline(i).eval(now) * self.growth
                    + self.excitation.excitation(state, i);
            }
            let window_end = now + self.lookahead;
            let wait: f64 = rng.sample::<f64, _>(Exp1) / bound;
            let candidate = now + wait;
            if candidate > window_end || !wait.is_finite() {
                if window_end >= until {
                    break;
                }
                self.excitation.advance(state, window_end);
                now = window_end;
                stats.refreshes += 1;
                continue;
            }
            if candidate > until {
                break;
            }
            stats.candidates += 1;
            self.excitation.advance(state, candidate);
            let mut total = 0.0;
            for (i, r) in rates.iter_mut().enumerate() {
                *r = model.baseline(i).eval(candidate) + self.excitation.excitation(state, i);
                total += *r;
            }
            if total > bound * (1.0 + 1e-12) {
                return Err(Error::DominatingRate {
                    time: candidate,
                    total,
                    bound,
                });
            }
            let ratio = total / bound;
            debug_assert!((0.0..=1.0 + 1e-12).contains(&ratio));
            let u: f64 = rng.random();
            if u * bound < total {
                let mut pick = u * bound;
                let mut node = n - 1;
                for (i, &r) in rates.iter().enumerate() {
                    if pick < r {
                        node = i;
                        break;
                    }
                    pick -= r;
                }
                self.excitation.record(state, candidate, node);
                on_event(candidate, node);
                stats.accepted += 1;
            }
            now = candidate;
        }
        if state.time() < until {
            self.excitation.advance(state, until);
        }
        Ok(stats)
    }
}

/// Samples the process on `[0, horizon]` with default options.
///
/// The model is expected to pass [`validate_model`](crate::model::validate_model);
/// a declared smoothness constant that is too small surfaces as
/// [`Error::DominatingRate`].
pub fn simulate(model: &HawkesModel, horizon: f64, seed: u64) -> Result<EventLog> {
    simulate_with(model, horizon, seed, &SimulationOptions::default()).map(|(log, _)| log)
}

pub fn simulate_with(
    model: &HawkesModel,
    horizon: f64,
    seed: u64,
    opts: &SimulationOptions,
) -> Result<(EventLog, ThinningStats)> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!(
            "horizon {horizon} must be positive and finite"
        )));
    }
    let sampler = Sampler::new(model, opts)?;
    let mut state = sampler.excitation().empty_state(0.0);
    let mut rng = rng::from_seed(seed);
    let mut events = Vec::new();
    let mut rates = Vec::new();
    let stats = sampler.run(&mut state, horizon, &mut rng, &mut rates, |time, node| {
        events.push(Event { time, node })
    })?;
    let log = EventLog {
        n: model.node_count(),
        horizon,
        seed,
        fingerprint: model.fingerprint(),
        events,
    };
    Ok((log, stats))
}

fn check_node(model: &HawkesModel, node: usize) -> Result<()> {
    if node >= model.node_count() {
        return Err(Error::NodeOutOfRange {
            node,
            n: model.node_count(),
        });
    }
    Ok(())
}

fn direct_intensity(model: &HawkesModel, events: &[Event], i: usize, t: f64) -> f64 {
    let excitation: f64 = events
        .iter()
        .map(|e| {
            let w = model.weight(i, e.node);
            if w == 0.0 {
                0.0
            } else {
                w * model.kernel(i, e.node).eval(t, e.time)
            }
        })
        .sum();
    model.baseline(i).eval(t) + excitation
}

/// `λ_i(t)` from strictly earlier events (the left limit at event instants).
pub fn intensity(model: &HawkesModel, log: &EventLog, i: usize, t: f64) -> Result<f64> {
    check_node(model, i)?;
    if !(t >= 0.0) {
        return Err(invalid(format!("intensity evaluated at negative time {t}")));
    }
    Ok(direct_intensity(model, log.prefix(t), i, t))
}

/// `λ_i(t⁺)`: like [`intensity`] but including events at exactly `t`.
pub fn intensity_after(model: &HawkesModel, log: &EventLog, i: usize, t: f64) -> Result<f64> {
    check_node(model, i)?;
    if !(t >= 0.0) {
        return Err(invalid(format!("intensity evaluated at negative time {t}")));
    }
    let end = log.events.partition_point(|e| e.time <= t);
    Ok(direct_intensity(model, &log.events[..end], i, t))
}

/// Supremum of `max_i λ_i` over the grid `0, step, …` and the instants
/// right after each event, with the time it is attained.
pub fn max_intensity_trace(
    model: &HawkesModel,
    log: &EventLog,
    grid_step: f64,
) -> Result<(f64, f64)> {
    if !(grid_step > 0.0) {
        return Err(invalid(format!("grid step {grid_step} must be positive")));
    }
    let ex = Excitation::new(model);
    let mut state = ex.empty_state(0.0);
    let n = model.node_count();
    let peak = |state: &ExcitationState, t: f64| {
        (0..n)
            .map(|i| model.baseline(i).eval(t) + ex.excitation(state, i))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut consider = |v: f64, t: f64| {
        if v > best.0 {
            best = (v, t);
        }
    };
    let grid_len = (log.horizon / grid_step).floor() as usize;
    let mut k = 0usize;
    for e in &log.events {
        while k <= grid_len && k as f64 * grid_step <= e.time {
            let g = k as f64 * grid_step;
            ex.advance(&mut state, g);
            consider(peak(&state, g), g);
            k += 1;
        }
        ex.advance(&mut state, e.time);
        ex.record(&mut state, e.time, e.node);
        consider(peak(&state, e.time), e.time);
    }
    while k <= grid_len {
        let g = k as f64 * grid_step;
        ex.advance(&mut state, g);
        consider(peak(&state, g), g);
        k += 1;
    }
    Ok(best)
}

/// Compensator increments `∫ λ_i dt` between consecutive events of node `i`
/// (the first increment starts at 0). Under a correct model these are i.i.d.
/// Exp(1).
pub fn compensator_increments(model: &HawkesModel, log: &EventLog, i: usize) -> Result<Vec<f64>> {
    check_node(model, i)?;
    let ex = Excitation::new(model);
    let mut state = ex.empty_state(0.0);
    let mut acc = 0.0;
    let mut out = Vec::new();
    let mut last = 0.0;
    for e in &log.events {
        acc += ex.integrate(&state, i, last, e.time);
        ex.advance(&mut state, e.time);
        ex.record(&mut state, e.time, e.node);
        last = e.time;
        if e.node == i {
            out.push(acc);
            acc = 0.0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
