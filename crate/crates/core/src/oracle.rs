//! Monte-Carlo checks of the short-window expansions behind the detector.
//!
//! Conditioning on the history up to `t` is realized by freezing an event
//! prefix and re-simulating many independent continuations over
//! `[t, t + kε)`, split into `k` bins of width `ε`. An indicator pattern such
//! as `iij` holds when node `i` has exactly one event in bin 0 and in bin 1
//! and node `j` has exactly one event in bin 2, the same rule the pair
//! statistics use.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::HawkesModel;
use crate::rng;
use crate::simulator::{EventLog, ExcitationState, Sampler, SimulationOptions};

/// Trials per independent random stream.
const CHUNK: u64 = 1 << 16;
/// Below this many trials the standard error cannot resolve the correction terms.
pub const MIN_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    Ij,
    Ji,
    Iij,
    Iji,
    Jii,
}

#[derive(Clone, Copy)]
enum Role {
    I,
    J,
}

impl Pattern {
    pub const ALL: [Pattern; 5] = [Self::Ij, Self::Ji, Self::Iij, Self::Iji, Self::Jii];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ij => "ij",
            Self::Ji => "ji",
            Self::Iij => "iij",
            Self::Iji => "iji",
            Self::Jii => "jii",
        }
    }

    /// Number of bins the pattern spans, which is also the power of `ε` in
    /// its leading-order probability.
    pub fn bins(self) -> usize {
        self.as_str().len()
    }

    fn roles(self) -> &'static [Role] {
        use Role::{I, J};
        match self {
            Self::Ij => &[I, J],
            Self::Ji => &[J, I],
            Self::Iij => &[I, I, J],
            Self::Iji => &[I, J, I],
            Self::Jii => &[J, I, I],
        }
    }

    fn holds(self, counts: &[[u32; 2]; 3]) -> bool {
        self.roles()
            .iter()
            .enumerate()
            .all(|(b, r)| counts[b][*r as usize] == 1)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownPattern(s.to_string()))
    }
}

/// `x_ij = λ_i (λ_j + w_ji)`.
pub fn predicted_pair(
    model: &HawkesModel,
    lambda_i: f64,
    lambda_j: f64,
    i: usize,
    j: usize,
) -> f64 {
    lambda_i * (lambda_j + model.weight(j, i))
}

/// Leading coefficient of a triple pattern probability.
///
/// * `jii`: `λ_j (λ_i + w_ij)(λ_i + w_ij + w_ii)`
/// * `iji`: `λ_i (λ_j + w_ji)(λ_i + w_ii + w_ij)`
/// * `iij`: `λ_i (λ_i + w_ii)(λ_j + 2 w_ji)`
pub fn predicted_triple(
    model: &HawkesModel,
    lambda_i: f64,
    lambda_j: f64,
    i: usize,
    j: usize,
    pattern: Pattern,
) -> Result<f64> {
    let (wii, wij, wji) = (model.weight(i, i), model.weight(i, j), model.weight(j, i));
    match pattern {
        Pattern::Jii => Ok(lambda_j * (lambda_i + wij) * (lambda_i + wij + wii)),
        Pattern::Iji => Ok(lambda_i * (lambda_j + wji) * (lambda_i + wii + wij)),
        Pattern::Iij => Ok(lambda_i * (lambda_i + wii) * (lambda_j + 2.0 * wji)),
        Pattern::Ij | Pattern::Ji => Err(Error::UnknownPattern(format!(
            "{pattern} is not a triple pattern"
        ))),
    }
}

/// Leading coefficient for any pattern: pairs scale with `ε²`, triples with `ε³`.
pub fn predicted(
    model: &HawkesModel,
    lambda_i: f64,
    lambda_j: f64,
    i: usize,
    j: usize,
    pattern: Pattern,
) -> f64 {
    match pattern {
        Pattern::Ij => predicted_pair(model, lambda_i, lambda_j, i, j),
        Pattern::Ji => predicted_pair(model, lambda_j, lambda_i, j, i),
        p => predicted_triple(model, lambda_i, lambda_j, i, j, p).expect("triple pattern"),
    }
}

/// `w_ji λ_i − w_ij λ_j`, the leading drift of `Δ1 / ε²`.
pub fn first_order_drift(
    model: &HawkesModel,
    lambda_i: f64,
    lambda_j: f64,
    i: usize,
    j: usize,
) -> f64 {
    model.weight(j, i) * lambda_i - model.weight(i, j) * lambda_j
}

/// `w_ij (w_ii + w_ij) λ_j − 2 w_ij w_ji λ_i`, the leading drift of `Δ2 / ε³`.
pub fn second_order_drift(
    model: &HawkesModel,
    lambda_i: f64,
    lambda_j: f64,
    i: usize,
    j: usize,
) -> f64 {
    let (wii, wij, wji) = (model.weight(i, i), model.weight(i, j), model.weight(j, i));
    wij * (wii + wij) * lambda_j - 2.0 * wij * wji * lambda_i
}

/// The 2×2 map from `(λ_i, λ_j)` to the two drifts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftMatrix {
    pub m: [[f64; 2]; 2],
    /// `m00 m11 − m01 m10`.
    pub det_direct: f64,
    /// `w_ij w_ji (w_ii − w_ij)`.
    pub det_factored: f64,
}

impl DriftMatrix {
    pub fn agrees(&self, tol: f64) -> bool {
        (self.det_direct - self.det_factored).abs() <= tol
    }

    pub fn apply(&self, lambda_i: f64, lambda_j: f64) -> [f64; 2] {
        let m = &self.m;
        [
            m[0][0] * lambda_i + m[0][1] * lambda_j,
            m[1][0] * lambda_i + m[1][1] * lambda_j,
        ]
    }
}

pub fn drift_matrix(model: &HawkesModel, i: usize, j: usize) -> Result<DriftMatrix> {
    let n = model.node_count();
    if i >= n || j >= n {
        return Err(Error::NodeOutOfRange { node: i.max(j), n });
    }
    let (wii, wij, wji) = (model.weight(i, i), model.weight(i, j), model.weight(j, i));
    let m = [[wji, -wij], [-2.0 * wij * wji, wij * (wii + wij)]];
    Ok(DriftMatrix {
        m,
        det_direct: m[0][0] * m[1][1] - m[0][1] * m[1][0],
        det_factored: wij * wji * (wii - wij),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationReport {
    pub pattern: Pattern,
    pub i: usize,
    pub j: usize,
    pub time: f64,
    pub epsilon: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// `ε^k x_pattern` with `k` the number of bins.
    pub predicted: f64,
    pub discrepancy: f64,
    pub trials: u64,
    /// `dΛ` entering the error envelope.
    pub scale: f64,
}

impl ExpectationReport {
    /// `sigmas · stderr + c (dΛε)^(k+1)`.
    pub fn envelope(&self, c: f64, sigmas: f64) -> f64 {
        sigmas * self.std_error
            + c * (self.scale * self.epsilon).powi(self.pattern.bins() as i32 + 1)
    }

    pub fn within(&self, c: f64, sigmas: f64) -> bool {
        self.discrepancy <= self.envelope(c, sigmas)
    }
}

/// A normalized Monte-Carlo estimate next to its closed-form prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub predicted: f64,
}

impl DriftEstimate {
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.predicted) / self.std_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftReport {
    pub i: usize,
    pub j: usize,
    pub time: f64,
    pub epsilon: f64,
    pub trials: u64,
    /// `E[Δ1] / ε²` against `w_ji λ_i − w_ij λ_j`.
    pub first: DriftEstimate,
    /// `E[Δ2] / ε³` against `w_ij (w_ii + w_ij) λ_j − 2 w_ij w_ji λ_i`.
    pub second: DriftEstimate,
}

/// Frozen history and the machinery to replay continuations from it.
struct Continuation<'m> {
    sampler: Sampler<'m>,
    start: ExcitationState,
    lambda: [f64; 2],
    nodes: [usize; 2],
    time: f64,
    epsilon: f64,
}

impl<'m> Continuation<'m> {
    fn new(
        model: &'m HawkesModel,
        prefix: &EventLog,
        t: f64,
        epsilon: f64,
        i: usize,
        j: usize,
    ) -> Result<Self> {
        let n = model.node_count();
        if prefix.n != n {
            return Err(invalid(format!(
                "prefix has {} nodes, model has {n}",
                prefix.n
            )));
        }
        for node in [i, j] {
            if node >= n {
                return Err(Error::NodeOutOfRange { node, n });
            }
        }
        if i == j {
            return Err(invalid("patterns need two distinct nodes"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("epsilon {epsilon} must be positive")));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("time {t} must be non-negative")));
        }
        let sampler = Sampler::new(model, &SimulationOptions::default())?;
        let start = sampler.excitation().state_at(prefix.prefix(t), t);
        let lambda =
            [i, j].map(|v| model.baseline(v).eval(t) + sampler.excitation().excitation(&start, v));
        Ok(Self {
            sampler,
            start,
            lambda,
            nodes: [i, j],
            time: t,
            epsilon,
        })
    }

    /// `dΛ` with `d` the largest row support and `Λ` the largest frozen rate
    /// plus the largest weight touching the pair.
    fn scale(&self, model: &HawkesModel) -> f64 {
        let d = (0..model.node_count())
            .map(|v| model.row(v).count())
            .max()
            .unwrap_or(0)
            .max(1);
        let [i, j] = self.nodes;
        let w = [(i, i), (i, j), (j, i), (j, j)]
            .iter()
            .map(|&(a, b)| model.weight(a, b))
            .fold(0.0, f64::max);
        d as f64 * (self.lambda[0].max(self.lambda[1]) + w)
    }

    /// Runs `trials` continuations of `bins · ε` and sums `f` and `f²` per component.
    fn moments(
        &self,
        bins: usize,
        trials: u64,
        seed: u64,
        f: impl Fn(&[[u32; 2]; 3]) -> [f64; 2] + Sync,
    ) -> Result<[[f64; 2]; 2]> {
        if trials < MIN_TRIALS {
            log::warn!(
                "{trials} trials leave a standard error too large to resolve the correction terms"
            );
        }
        let chunks = trials.div_ceil(CHUNK);
        let partial: Vec<[[f64; 2]; 2]> = (0..chunks)
            .into_par_iter()
            .map(|c| -> Result<[[f64; 2]; 2]> {
                let mut rng = rng::stream(seed, c);
                let count = CHUNK.min(trials - c * CHUNK);
                let mut state = self.start.clone();
                let mut rates = Vec::new();
                let until = self.time + bins as f64 * self.epsilon;
                let mut acc = [[0.0; 2]; 2];
                for _ in 0..count {
                    state.copy_from(&self.start);
                    let mut counts = [[0u32; 2]; 3];
                    self.sampler
                        .run(&mut state, until, &mut rng, &mut rates, |time, node| {
                            let slot = if node == self.nodes[0] {
                                0
                            } else if node == self.nodes[1] {
                                1
                            } else {
                                return;
                            };
                            let b = (((time - self.time) / self.epsilon) as usize).min(bins - 1);
                            counts[b][slot] += 1;
                        })?;
                    let v = f(&counts);
                    for k in 0..2 {
                        acc[0][k] += v[k];
                        acc[1][k] += v[k] * v[k];
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut total = [[0.0; 2]; 2];
        for p in partial {
            for r in 0..2 {
                for k in 0..2 {
                    total[r][k] += p[r][k];
                }
            }
        }
        Ok(total)
    }
}

fn mean_and_stderr(sum: f64, sum_sq: f64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let mean = sum / n;
    let var = if trials > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    (mean, (var / n).sqrt())
}

/// Estimates `P(pattern)` over `[t, t + kε)` given the events of `prefix`
/// strictly before `t`, against `ε^k x_pattern` at the frozen rates.
#[allow(clippy::too_many_arguments)]
pub fn mc_indicator(
    model: &HawkesModel,
    prefix: &EventLog,
    t: f64,
    epsilon: f64,
    pattern: Pattern,
    (i, j): (usize, usize),
    trials: u64,
    seed: u64,
) -> Result<ExpectationReport> {
    if trials == 0 {
        return Err(invalid("at least one trial is needed"));
    }
    let cont = Continuation::new(model, prefix, t, epsilon, i, j)?;
    let bins = pattern.bins();
    let [s, sq] = cont.moments(bins, trials, seed, |c| {
        [f64::from(u8::from(pattern.holds(c))), 0.0]
    })?;
    let (estimate, std_error) = mean_and_stderr(s[0], sq[0], trials);
    let predicted =
        epsilon.powi(bins as i32) * predicted(model, cont.lambda[0], cont.lambda[1], i, j, pattern);
    Ok(ExpectationReport {
        pattern,
        i,
        j,
        time: t,
        epsilon,
        estimate,
        std_error,
        predicted,
        discrepancy: (estimate - predicted).abs(),
        trials,
        scale: cont.scale(model),
    })
}

/// Estimates `E[Δ1] / ε²` and `E[Δ2] / ε³` from the same `3ε` continuations.
pub fn mc_delta_drift(
    model: &HawkesModel,
    prefix: &EventLog,
    t: f64,
    epsilon: f64,
    (i, j): (usize, usize),
    trials: u64,
    seed: u64,
) -> Result<DriftReport> {
    if trials == 0 {
        return Err(invalid("at least one trial is needed"));
    }
    let cont = Continuation::new(model, prefix, t, epsilon, i, j)?;
    let ind = |p: Pattern, c: &[[u32; 2]; 3]| f64::from(u8::from(p.holds(c)));
    let [s, sq] = cont.moments(3, trials, seed, |c| {
        [
            ind(Pattern::Ij, c) - ind(Pattern::Ji, c),
            ind(Pattern::Iij, c) - 2.0 * ind(Pattern::Iji, c) + ind(Pattern::Jii, c),
        ]
    })?;
    let (m1, e1) = mean_and_stderr(s[0], sq[0], trials);
    let (m2, e2) = mean_and_stderr(s[1], sq[1], trials);
    let (li, lj) = (cont.lambda[0], cont.lambda[1]);
    let e2p = epsilon * epsilon;
    let e3p = e2p * epsilon;
    Ok(DriftReport {
        i,
        j,
        time: t,
        epsilon,
        trials,
        first: DriftEstimate {
            estimate: m1 / e2p,
            std_error: e1 / e2p,
            predicted: first_order_drift(model, li, lj, i, j),
        },
        second: DriftEstimate {
            estimate: m2 / e3p,
            std_error: e2 / e3p,
            predicted: second_order_drift(model, li, lj, i, j),
        },
    })
}
