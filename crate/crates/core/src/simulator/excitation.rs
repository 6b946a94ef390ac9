//! Incremental bookkeeping of the excitation part `λ_i(t) - μ_i(t)`.
//!
//! Shift-invariant exponential kernels are folded into one decaying
//! accumulator per `(target, decay rate)`, so an event costs O(out-degree)
//! and moving time forward costs O(accumulators). Modulated kernels keep the
//! source event times and rescan them, dropping events whose contribution has
//! fallen below `1e-12`.

use std::collections::{HashMap, VecDeque};

use super::Event;
use crate::model::{HawkesModel, KernelSpec};

/// `ln(1e12)`: kernel values `exp(-x)` below `1e-12` are dropped.
const SCAN_CUTOFF: f64 = 27.631_021_115_928_547;

struct ScanTerm {
    target: usize,
    weight: f64,
    kernel: KernelSpec,
    horizon: f64,
}

pub(crate) struct Excitation<'m> {
    model: &'m HawkesModel,
    slot_decay: Vec<f64>,
    slots_of_target: Vec<Vec<usize>>,
    jumps_of_source: Vec<Vec<(usize, f64)>>,
    scan_terms: Vec<ScanTerm>,
    scans_of_target: Vec<Vec<usize>>,
    scans_of_source: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub(crate) struct ExcitationState {
    time: f64,
    slots: Vec<f64>,
    scans: Vec<VecDeque<f64>>,
}

impl ExcitationState {
    pub(crate) fn time(&self) -> f64 {
        self.time
    }

    /// Overwrites `self` with `other`, reusing allocations.
    pub(crate) fn copy_from(&mut self, other: &Self) {
        self.time = other.time;
        self.slots.copy_from_slice(&other.slots);
        for (dst, src) in self.scans.iter_mut().zip(&other.scans) {
            dst.clear();
            dst.extend(src.iter().copied());
        }
    }
}

impl<'m> Excitation<'m> {
    pub(crate) fn new(model: &'m HawkesModel) -> Self {
        let n = model.node_count();
        let mut slot_index: HashMap<(usize, u64), usize> = HashMap::new();
        let mut slot_decay = Vec::new();
        let mut slots_of_target = vec![Vec::new(); n];
        let mut jumps_of_source = vec![Vec::new(); n];
        let mut scan_terms = Vec::new();
        let mut scans_of_target = vec![Vec::new(); n];
        let mut scans_of_source = vec![Vec::new(); n];
        for ((i, j), w) in model.nonzero_weights() {
            let kernel = *model.kernel(i, j);
            match kernel {
                KernelSpec::Exponential { decay } => {
                    let slot = *slot_index.entry((i, decay.to_bits())).or_insert_with(|| {
                        slot_decay.push(decay);
                        slots_of_target[i].push(slot_decay.len() - 1);
                        slot_decay.len() - 1
                    });
                    jumps_of_source[j].push((slot, w));
                }
                KernelSpec::ModulatedExponential { .. } => {
                    let idx = scan_terms.len();
                    scan_terms.push(ScanTerm {
                        target: i,
                        weight: w,
                        kernel,
                        horizon: SCAN_CUTOFF / kernel.min_decay(),
                    });
                    scans_of_target[i].push(idx);
                    scans_of_source[j].push(idx);
                }
            }
        }
        Self {
            model,
            slot_decay,
            slots_of_target,
            jumps_of_source,
            scan_terms,
            scans_of_target,
            scans_of_source,
        }
    }

    pub(crate) fn model(&self) -> &'m HawkesModel {
        self.model
    }

    pub(crate) fn empty_state(&self, time: f64) -> ExcitationState {
        ExcitationState {
            time,
            slots: vec![0.0; self.slot_decay.len()],
            scans: (0..self.scan_terms.len())
                .map(|_| VecDeque::new())
                .collect(),
        }
    }

    /// State at time `t` given the history `events` (only those before `t` are used).
    pub(crate) fn state_at(&self, events: &[Event], t: f64) -> ExcitationState {
        let mut state = self.empty_state(0.0);
        for e in events.iter().take_while(|e| e.time < t) {
            self.advance(&mut state, e.time);
            self.record(&mut state, e.time, e.node);
        }
        self.advance(&mut state, t);
        state
    }

    /// Moves the state forward to `t` with no events in between.
    #[inline]
    pub(crate) fn advance(&self, state: &mut ExcitationState, t: f64) {
        let dt = t - state.time;
        if dt <= 0.0 {
            return;
        }
        for (v, &beta) in state.slots.iter_mut().zip(&self.slot_decay) {
            if *v != 0.0 {
                *v *= (-beta * dt).exp();
            }
        }
        for (buf, term) in state.scans.iter_mut().zip(&self.scan_terms) {
            while buf.front().is_some_and(|&s| t - s > term.horizon) {
                buf.pop_front();
            }
        }
        state.time = t;
    }

    /// Applies the jumps caused by an event of `node` at the state's current time.
    #[inline]
    pub(crate) fn record(&self, state: &mut ExcitationState, t: f64, node: usize) {
        debug_assert_eq!(t, state.time);
        for &(slot, w) in &self.jumps_of_source[node] {
            state.slots[slot] += w;
        }
        for &idx in &self.scans_of_source[node] {
            state.scans[idx].push_back(t);
        }
    }

    /// `λ_i(t) - μ_i(t)` at the state's current time.
    #[inline]
    pub(crate) fn excitation(&self, state: &ExcitationState, i: usize) -> f64 {
        let mut sum = 0.0;
        for &slot in &self.slots_of_target[i] {
            sum += state.slots[slot];
        }
        for &idx in &self.scans_of_target[i] {
            let term = &self.scan_terms[idx];
            debug_assert_eq!(term.target, i);
            let t = state.time;
            sum += term.weight
                * state.scans[idx]
                    .iter()
                    .map(|&s| term.kernel.eval(t, s))
                    .sum::<f64>();
        }
        sum
    }

    /// `∫_a^b λ_i(u) du` assuming no events in `(a, b)`; the state must sit at `a`.
    pub(crate) fn integrate(&self, state: &ExcitationState, i: usize, a: f64, b: f64) -> f64 {
        debug_assert_eq!(a, state.time);
        let mut total = self.model.baseline(i).integral(a, b);
        for &slot in &self.slots_of_target[i] {
            let beta = self.slot_decay[slot];
            total += state.slots[slot] * -(-beta * (b - a)).exp_m1() / beta;
        }
        for &idx in &self.scans_of_target[i] {
            let term = &self.scan_terms[idx];
            total += term.weight
                * state.scans[idx]
                    .iter()
                    .map(|&s| term.kernel.time_integral(s, a, b))
                    .sum::<f64>();
        }
        total
    }
}
