//! Seeded recovery trials, parameter sweeps and the max-rate check.
//!
//! Seeds: a trial seed `s` simulates with `child_seed(s, 0)` and calibrates
//! with `child_seed(s, 1)`. A sweep assigns `child_seed(root, k)` to seed
//! index `k`; random models are drawn from `child_seed(trial_seed, 2)`, so
//! cells that differ only in `T`, `ε` or `h` share models and trajectories.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{
    calibrate_threshold, detect, theorem_threshold_for, CalibrationOptions, DetectorConfig,
    ScoreTerms, ThresholdSource,
};
use crate::error::{invalid, Error, Result};
use crate::graph::DependencyGraph;
use crate::model::{validate_model, BaselineSpec, HawkesModel, KernelSpec, ModelConstants};
use crate::rng;
use crate::simulator::{max_intensity_trace, simulate};
use crate::statistics::{accumulate_all, bin_events};

/// Worker-count environment variable for sweeps.
pub const WORKERS_ENV: &str = "HAWKES_WORKERS";

/// Parameter ranges for [`random_model`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomModelRanges {
    pub mu_min: f64,
    pub mu_max: f64,
    /// Relative amplitude of a sinusoidal baseline modulation, in `[0, 1)`.
    pub modulation: f64,
    pub modulation_period: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub w_sep: f64,
    /// Width of the interval `w_ii` is drawn from, above `max_j w_ij + w_sep`.
    pub self_spread: f64,
    pub decay: f64,
    /// Largest per-row decay the stability rescaling may use.
    pub max_decay: f64,
    pub stability_margin: f64,
    /// Per-pair proposal probability; `None` uses `d / (n - 1)`.
    pub edge_probability: Option<f64>,
}

impl Default for RandomModelRanges {
    fn default() -> Self {
        Self {
            mu_min: 0.5,
            mu_max: 1.5,
            modulation: 0.0,
            modulation_period: 10.0,
            w_min: 0.3,
            w_max: 0.8,
            w_sep: 0.2,
            self_spread: 0.5,
            decay: 2.0,
            max_decay: 50.0,
            stability_margin: 0.1,
            edge_probability: None,
        }
    }
}

impl RandomModelRanges {
    fn check(&self) -> Result<()> {
        let ok = 0.0 < self.mu_min
            && self.mu_min <= self.mu_max
            && (0.0..1.0).contains(&self.modulation)
            && self.modulation_period > 0.0
            && 0.0 < self.w_min
            && self.w_min <= self.w_max
            && self.w_sep > 0.0
            && self.self_spread >= 0.0
            && 0.0 < self.decay
            && self.decay <= self.max_decay
            && 0.0 < self.stability_margin
            && self.stability_margin < 1.0
            && self
                .edge_probability
                .is_none_or(|p| (0.0..=1.0).contains(&p));
        if ok {
            Ok(())
        } else {
            Err(invalid(format!(
                "inconsistent random model ranges {self:?}"
            )))
        }
    }
}

/// Random sparse model satisfying every checked assumption.
///
/// 1. Pairs `(i, j)`, `i < j`, are proposed in lexicographic order with one
///    coin each; a proposal is kept only while both endpoints have degree `< d`.
/// 2. Per kept edge, the two directions get independent fair coins, redrawn
///    until at least one is set; set directions get `w ~ U[w_min, w_max]`.
/// 3. `w_ii ~ U[m_i + w_sep, m_i + w_sep + self_spread]` with `m_i` the row's
///    largest off-diagonal weight.
/// 4. Baselines `a ~ U[mu_min, mu_max]`, optionally `a (1 + m sin(2πt/P + θ))`.
/// 5. Rows whose load `Σ_j w_ij / β` exceeds `1 - η` get their own faster
///    decay `β_i = load_i β / (1 - η)`; weights are never rescaled, so the
///    range and separation constraints stay exact.
pub fn random_model(
    n: usize,
    d: usize,
    seed: u64,
    ranges: &RandomModelRanges,
) -> Result<HawkesModel> {
    if n < 2 || d == 0 || d >= n {
        return Err(invalid(format!(
            "random models need n >= 2 and 1 <= d < n, got n={n}, d={d}"
        )));
    }
    ranges.check()?;
    let eta = ranges.stability_margin;
    let floor_load = (ranges.w_sep + ranges.w_min + d as f64 * ranges.w_min) / ranges.max_decay;
    if floor_load > 1.0 - eta {
        return Err(Error::Infeasible(format!(
            "stability: even with decay {} a full row carries load {floor_load:.4} > 1 - eta = {}",
            ranges.max_decay,
            1.0 - eta
        )));
    }
    let mut rng = rng::from_seed(seed);
    let p = ranges.edge_probability.unwrap_or(d as f64 / (n - 1) as f64);

    let mut graph = DependencyGraph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let coin = rng.random_bool(p);
            if coin && graph.degree(i) < d && graph.degree(j) < d {
                graph.add_edge(i, j);
            }
        }
    }
    let mut weights = Vec::new();
    for (i, j) in graph.edges() {
        let (forward, backward) = loop {
            let f = rng.random_bool(0.5);
            let b = rng.random_bool(0.5);
            if f || b {
                break (f, b);
            }
        };
        // `forward`: i excites j, i.e. w_ji.
        if forward {
            weights.push((j, i, rng.random_range(ranges.w_min..=ranges.w_max)));
        }
        if backward {
            weights.push((i, j, rng.random_range(ranges.w_min..=ranges.w_max)));
        }
    }
    let mut row_max = vec![0.0f64; n];
    for &(i, _, w) in &weights {
        row_max[i] = row_max[i].max(w);
    }
    for (i, m) in row_max.iter().enumerate() {
        let lo = m + ranges.w_sep;
        weights.push((i, i, lo + ranges.self_spread * rng.random::<f64>()));
    }
    let baselines = (0..n)
        .map(|_| {
            let a = rng.random_range(ranges.mu_min..=ranges.mu_max);
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            if ranges.modulation > 0.0 {
                BaselineSpec::sinusoidal(
                    a,
                    a * ranges.modulation,
                    crate::model::angular_frequency(ranges.modulation_period),
                    theta,
                )
            } else {
                BaselineSpec::constant(a)
            }
        })
        .collect();

    let placeholder = ModelConstants {
        mu_min: 0.0,
        mu_max: 0.0,
        w_min: 0.0,
        w_max: 0.0,
        w_sep: 0.0,
        smoothness: 0.0,
        kernel_mass: 0.0,
        stability_margin: 0.0,
        max_degree: d,
    };
    let mut model = HawkesModel::new(
        baselines,
        KernelSpec::exponential(ranges.decay),
        placeholder,
    )?;
    for &(i, j, w) in &weights {
        model.set_weight(i, j, w)?;
    }
    // Slightly above the exact decay so the margin survives rounding.
    let target = (1.0 - eta) * (1.0 - 1e-9);
    for (i, load) in model.branching_row_sums().into_iter().enumerate() {
        if load > target {
            let decay = load * ranges.decay / target;
            if decay > ranges.max_decay {
                return Err(Error::Infeasible(format!(
                    "stability: row {i} needs decay {decay:.4} > max_decay {}",
                    ranges.max_decay
                )));
            }
            let cols: Vec<usize> = model.row(i).map(|(j, _)| j).collect();
            for j in cols {
                model.set_kernel(i, j, KernelSpec::exponential(decay))?;
            }
        }
    }
    let tight = model.infer_constants();
    model.set_constants(ModelConstants {
        w_min: ranges.w_min.min(tight.w_min),
        w_max: ranges.w_max.max(tight.w_max),
        w_sep: ranges.w_sep.min(tight.w_sep),
        stability_margin: eta.min(tight.stability_margin),
        max_degree: d,
        ..tight
    });
    let report = validate_model(&model, 0.05, 20.0);
    if !report.passed() {
        return Err(Error::Infeasible(format!(
            "generated model fails validation:\n{report}"
        )));
    }
    Ok(model)
}

/// A fixed-weight planted model on a ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub n: usize,
    pub weight: f64,
    pub self_weight: f64,
    pub baseline: f64,
    pub decay: f64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            n: 10,
            weight: 0.8,
            self_weight: 1.2,
            baseline: 1.0,
            decay: 2.0,
        }
    }
}

fn ring_source(a: usize, b: usize) -> (usize, usize) {
    match (a.is_multiple_of(2), b.is_multiple_of(2)) {
        (true, false) => (a, b),
        (false, true) => (b, a),
        _ => (a.min(b), a.max(b)),
    }
}

/// Ring `0 - 1 - … - (n-1) - 0` (degree 2 everywhere) with one excitation
/// direction per edge, from the even endpoint to the odd one. No directed
/// cycle passes through two nodes, so the process stays subcritical whenever
/// `self_weight / decay < 1`, even though the rows of the odd nodes may carry
/// a load above one.
pub fn planted_ring(spec: &PlantedSpec) -> Result<HawkesModel> {
    if spec.n < 3 {
        return Err(invalid("a ring needs at least three nodes"));
    }
    let mut model = planted_base(spec)?;
    for a in 0..spec.n {
        let (src, dst) = ring_source(a, (a + 1) % spec.n);
        model.set_weight(dst, src, spec.weight)?;
    }
    declare_tight(&mut model);
    Ok(model)
}

/// The ring of [`planted_ring`] with nodes 0 and 1 cut out and rejoined by a
/// symmetric edge `w_01 = w_10 = weight`. Rows 0 and 1 use `pair_decay`.
/// Both nodes share the same baseline, so the first-order drift of the pair
/// vanishes. Returns the model and the symmetric pair.
pub fn planted_confound(
    spec: &PlantedSpec,
    pair_decay: f64,
) -> Result<(HawkesModel, (usize, usize))> {
    if spec.n < 4 {
        return Err(invalid("the confound model needs at least four nodes"));
    }
    let mut model = planted_base(spec)?;
    for a in 2..spec.n - 1 {
        let (src, dst) = ring_source(a, a + 1);
        model.set_weight(dst, src, spec.weight)?;
    }
    model.set_weight(0, 1, spec.weight)?;
    model.set_weight(1, 0, spec.weight)?;
    for i in 0..2 {
        for j in 0..2 {
            model.set_kernel(i, j, KernelSpec::exponential(pair_decay))?;
        }
    }
    declare_tight(&mut model);
    Ok((model, (0, 1)))
}

/// The nodes of [`planted_ring`] with self-excitation only.
pub fn planted_null(spec: &PlantedSpec) -> Result<HawkesModel> {
    let mut model = planted_base(spec)?;
    declare_tight(&mut model);
    Ok(model)
}

fn planted_base(spec: &PlantedSpec) -> Result<HawkesModel> {
    let placeholder = ModelConstants {
        mu_min: 0.0,
        mu_max: 0.0,
        w_min: 0.0,
        w_max: 0.0,
        w_sep: 0.0,
        smoothness: 0.0,
        kernel_mass: 0.0,
        stability_margin: 0.0,
        max_degree: 0,
    };
    let mut model = HawkesModel::new(
        vec![BaselineSpec::constant(spec.baseline); spec.n],
        KernelSpec::exponential(spec.decay),
        placeholder,
    )?;
    for i in 0..spec.n {
        model.set_weight(i, i, spec.self_weight)?;
    }
    Ok(model)
}

fn declare_tight(model: &mut HawkesModel) {
    let c = model.infer_constants();
    model.set_constants(c);
}

/// How a trial picks its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    User(f64),
    /// From the model's declared constants.
    Theorem,
    /// From circular-shift surrogates of the trial's own log.
    Calibrated {
        surrogates: usize,
        quantile: f64,
    },
}

impl ThresholdRule {
    pub fn calibrated() -> Self {
        let d = CalibrationOptions::default();
        Self::Calibrated {
            surrogates: d.surrogates,
            quantile: d.quantile,
        }
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::User(h) => write!(f, "{h}"),
            Self::Theorem => f.write_str("theorem"),
            Self::Calibrated {
                surrogates,
                quantile,
            } => write!(f, "calibrated({surrogates},{quantile})"),
        }
    }
}

impl std::str::FromStr for ThresholdRule {
    type Err = Error;

    /// `theorem`, `calibrated`, or a positive number.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "theorem" => Ok(Self::Theorem),
            "calibrated" => Ok(Self::calibrated()),
            other => match other.parse::<f64>() {
                Ok(h) if h > 0.0 => Ok(Self::User(h)),
                _ => Err(invalid(format!(
                    "threshold must be `theorem`, `calibrated` or a positive number, got `{s}`"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub horizon: f64,
    pub epsilon: f64,
    pub threshold: ThresholdRule,
    pub terms: ScoreTerms,
    /// Grid step for the max-intensity trace; `None` skips it.
    pub trace_step: Option<f64>,
}

impl TrialConfig {
    pub fn new(horizon: f64, epsilon: f64, threshold: ThresholdRule) -> Self {
        Self {
            horizon,
            epsilon,
            threshold,
            terms: ScoreTerms::Full,
            trace_step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    pub fingerprint: String,
    pub config: DetectorConfig,
    pub precision: f64,
    pub recall: f64,
    pub exact: bool,
    pub false_positives: Vec<(usize, usize)>,
    pub false_negatives: Vec<(usize, usize)>,
    pub edges_true: usize,
    pub edges_found: usize,
    pub events: usize,
    pub sup_intensity: Option<f64>,
    pub estimate: DependencyGraph,
    pub wall_seconds: f64,
}

/// Precision and recall of `found` against `truth`; both are 1 when the
/// respective denominator is empty.
pub fn precision_recall(found: &DependencyGraph, truth: &DependencyGraph) -> (f64, f64) {
    let tp = found.intersection_count(truth) as f64;
    let precision = if found.edge_count() == 0 {
        1.0
    } else {
        tp / found.edge_count() as f64
    };
    let recall = if truth.edge_count() == 0 {
        1.0
    } else {
        tp / truth.edge_count() as f64
    };
    (precision, recall)
}

/// simulate → bin → accumulate → threshold → detect → compare.
pub fn run_trial(model: &HawkesModel, config: &TrialConfig, seed: u64) -> Result<TrialResult> {
    let start = Instant::now();
    let log = simulate(model, config.horizon, rng::child_seed(seed, 0))?;
    let stats = accumulate_all(&bin_events(&log, config.epsilon)?);
    let (h, source) = match config.threshold {
        ThresholdRule::User(h) => (h, ThresholdSource::User),
        ThresholdRule::Theorem => (theorem_threshold_for(model)?, ThresholdSource::Theorem),
        ThresholdRule::Calibrated {
            surrogates,
            quantile,
        } => {
            let opts = CalibrationOptions {
                surrogates,
                quantile,
                terms: config.terms,
            };
            let cal = calibrate_threshold(&log, config.epsilon, &opts, rng::child_seed(seed, 1))?;
            (cal.threshold, ThresholdSource::Calibrated)
        }
    };
    let detector =
        DetectorConfig::new(config.epsilon, config.horizon, h, source)?.with_terms(config.terms);
    let estimate = detect(&stats, &detector)?;
    let truth = model.true_graph();
    let (precision, recall) = precision_recall(&estimate, &truth);
    let sup_intensity = match config.trace_step {
        Some(step) => Some(max_intensity_trace(model, &log, step)?.0),
        None => None,
    };
    Ok(TrialResult {
        seed,
        fingerprint: model.fingerprint(),
        config: detector,
        precision,
        recall,
        exact: estimate == truth,
        false_positives: estimate.difference(&truth),
        false_negatives: truth.difference(&estimate),
        edges_true: truth.edge_count(),
        edges_found: estimate.edge_count(),
        events: log.len(),
        sup_intensity,
        estimate,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// `d² ln⁴(nT)`.
pub fn lemma2_bound(n: usize, d: usize, horizon: f64) -> f64 {
    (d * d) as f64 * (n as f64 * horizon).ln().powi(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxRateObservation {
    pub n: usize,
    pub d: usize,
    pub horizon: f64,
    pub sup_intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma2Report {
    pub trials: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    /// Largest `sup λ_max / (d² ln⁴(nT))`.
    pub max_ratio: f64,
}

pub fn lemma2_check(trials: &[MaxRateObservation]) -> Lemma2Report {
    let mut violations = 0;
    let mut max_ratio = 0.0f64;
    for t in trials {
        let bound = lemma2_bound(t.n, t.d, t.horizon);
        let ratio = t.sup_intensity / bound;
        if t.sup_intensity > bound {
            violations += 1;
        }
        max_ratio = max_ratio.max(ratio);
    }
    Lemma2Report {
        trials: trials.len(),
        violations,
        violation_fraction: if trials.is_empty() {
            0.0
        } else {
            violations as f64 / trials.len() as f64
        },
        max_ratio,
    }
}

/// Random models simulated to `horizon`, one per trial, with their observed
/// `sup_t max_i λ_i(t)` on a grid of `grid_step`.
pub fn max_rate_trials(
    n: usize,
    d: usize,
    horizon: f64,
    trials: usize,
    seed: u64,
    ranges: &RandomModelRanges,
    grid_step: f64,
) -> Result<Vec<MaxRateObservation>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let s = rng::child_seed(seed, k);
            let model = random_model(n, d, rng::child_seed(s, 2), ranges)?;
            let log = simulate(&model, horizon, rng::child_seed(s, 0))?;
            let (sup, _) = max_intensity_trace(&model, &log, grid_step)?;
            Ok(MaxRateObservation {
                n,
                d,
                horizon,
                sup_intensity: sup,
            })
        })
        .collect()
}

/// Axes of a sweep grid; cells are their cartesian product in field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub horizon: Vec<f64>,
    pub epsilon: Vec<f64>,
    /// `theorem`, `calibrated`, or a number.
    pub threshold: Vec<String>,
    /// `[w_min, w_max]` pairs.
    pub weights: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub root_seed: u64,
    pub seeds: usize,
    pub grid: SweepGrid,
    #[serde(default)]
    pub ranges: RandomModelRanges,
    #[serde(default)]
    pub terms: ScoreTerms,
    /// Grid step of the max-intensity trace; omitted skips it.
    #[serde(default)]
    pub trace_step: Option<f64>,
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| invalid(format!("sweep config: {e}")))?;
        c.cells()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn cells(&self) -> Result<Vec<SweepCell>> {
        let g = &self.grid;
        if [
            g.n.len(),
            g.d.len(),
            g.horizon.len(),
            g.epsilon.len(),
            g.threshold.len(),
            g.weights.len(),
        ]
        .contains(&0)
        {
            return Err(invalid("every sweep axis needs at least one value"));
        }
        let mut cells = Vec::new();
        for &n in &g.n {
            for &d in &g.d {
                for &horizon in &g.horizon {
                    for &epsilon in &g.epsilon {
                        for threshold in &g.threshold {
                            let rule: ThresholdRule = threshold.parse()?;
                            for &[w_lo, w_hi] in &g.weights {
                                cells.push(SweepCell {
                                    index: cells.len(),
                                    n,
                                    d,
                                    horizon,
                                    epsilon,
                                    rule,
                                    w_lo,
                                    w_hi,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub n: usize,
    pub d: usize,
    pub horizon: f64,
    pub epsilon: f64,
    pub rule: ThresholdRule,
    pub w_lo: f64,
    pub w_hi: f64,
}

/// One results-table row. Failed trials keep their cell and seed columns and
/// carry the message in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: usize,
    pub n: usize,
    pub d: usize,
    pub horizon: f64,
    pub epsilon: f64,
    pub threshold_rule: String,
    pub w_lo: f64,
    pub w_hi: f64,
    pub seed_index: usize,
    pub seed: u64,
    pub fingerprint: String,
    pub threshold: Option<f64>,
    pub edges_true: Option<usize>,
    pub edges_found: Option<usize>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub exact: Option<bool>,
    pub false_positives: String,
    pub false_negatives: String,
    pub sup_intensity: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub cell: usize,
    pub seed_index: usize,
    pub wall_seconds: f64,
}

fn edge_list(edges: &[(usize, usize)]) -> String {
    edges
        .iter()
        .map(|(i, j)| format!("{i}-{j}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn sweep_trial(config: &SweepConfig, cell: &SweepCell, seed_index: usize) -> (SweepRow, TimingRow) {
    let start = Instant::now();
    let seed = rng::child_seed(config.root_seed, seed_index as u64);
    let mut row = SweepRow {
        cell: cell.index,
        n: cell.n,
        d: cell.d,
        horizon: cell.horizon,
        epsilon: cell.epsilon,
        threshold_rule: cell.rule.to_string(),
        w_lo: cell.w_lo,
        w_hi: cell.w_hi,
        seed_index,
        seed,
        fingerprint: String::new(),
        threshold: None,
        edges_true: None,
        edges_found: None,
        precision: None,
        recall: None,
        exact: None,
        false_positives: String::new(),
        false_negatives: String::new(),
        sup_intensity: None,
        error: String::new(),
    };
    let ranges = RandomModelRanges {
        w_min: cell.w_lo,
        w_max: cell.w_hi,
        ..config.ranges
    };
    let trial = TrialConfig {
        horizon: cell.horizon,
        epsilon: cell.epsilon,
        threshold: cell.rule,
        terms: config.terms,
        trace_step: config.trace_step,
    };
    let outcome = random_model(cell.n, cell.d, rng::child_seed(seed, 2), &ranges)
        .and_then(|model| run_trial(&model, &trial, seed));
    match outcome {
        Ok(r) => {
            row.fingerprint = r.fingerprint;
            row.threshold = Some(r.config.threshold);
            row.edges_true = Some(r.edges_true);
            row.edges_found = Some(r.edges_found);
            row.precision = Some(r.precision);
            row.recall = Some(r.recall);
            row.exact = Some(r.exact);
            row.false_positives = edge_list(&r.false_positives);
            row.false_negatives = edge_list(&r.false_negatives);
            row.sup_intensity = r.sup_intensity;
        }
        Err(e) => row.error = e.to_string(),
    }
    let timing = TimingRow {
        cell: cell.index,
        seed_index,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    (row, timing)
}

fn cell_paths(out_dir: &Path, index: usize) -> (PathBuf, PathBuf, PathBuf) {
    let dir = out_dir.join("cells");
    (
        dir.join(format!("cell-{index:04}.csv")),
        dir.join(format!("cell-{index:04}.timing.csv")),
        dir.join(format!("cell-{index:04}.done")),
    )
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

/// Worker count from [`WORKERS_ENV`], defaulting to the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Cells computed in this call, as opposed to loaded from completion markers.
    pub computed_cells: Vec<usize>,
}

/// Runs every `(cell, seed)` trial of `config`, writing per-cell results and
/// a `.done` marker under `out_dir/cells`, then the merged
/// `out_dir/results.csv` and `out_dir/timings.csv`. Cells with a marker are
/// loaded instead of recomputed. Results do not depend on the worker count.
pub fn sweep(config: &SweepConfig, out_dir: &Path, workers: usize) -> Result<SweepOutcome> {
    let cells = config.cells()?;
    if config.seeds == 0 {
        return Err(invalid("a sweep needs at least one seed"));
    }
    fs::create_dir_all(out_dir.join("cells"))?;
    let pending: BTreeSet<usize> = cells
        .iter()
        .filter(|c| !cell_paths(out_dir, c.index).2.exists())
        .map(|c| c.index)
        .collect();
    let jobs: Vec<(usize, usize)> = pending
        .iter()
        .flat_map(|&c| (0..config.seeds).map(move |s| (c, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid(format!("worker pool: {e}")))?;
    let done: Vec<(SweepRow, TimingRow)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, s)| sweep_trial(config, &cells[c], s))
            .collect()
    });

    let mut iter = done.into_iter().peekable();
    for &c in &pending {
        let mut rows = Vec::new();
        let mut timings = Vec::new();
        while let Some((r, _)) = iter.peek() {
            if r.cell != c {
                break;
            }
            let (r, t) = iter.next().expect("peeked");
            rows.push(r);
            timings.push(t);
        }
        let (rows_path, timing_path, marker) = cell_paths(out_dir, c);
        write_rows(&rows_path, &rows)?;
        write_rows(&timing_path, &timings)?;
        fs::write(marker, b"")?;
    }

    let mut rows = Vec::new();
    let mut timings: Vec<TimingRow> = Vec::new();
    for c in &cells {
        let (rows_path, timing_path, _) = cell_paths(out_dir, c.index);
        rows.extend(read_rows::<SweepRow>(&rows_path)?);
        timings.extend(read_rows::<TimingRow>(&timing_path)?);
    }
    write_rows(&out_dir.join("results.csv"), &rows)?;
    write_rows(&out_dir.join("timings.csv"), &timings)?;
    Ok(SweepOutcome {
        rows,
        computed_cells: pending.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Assumption;

    #[test]
    fn random_models_satisfy_constraints() {
        for seed in 0..20 {
            let m = random_model(20, 3, seed, &RandomModelRanges::default()).unwrap();
            let r = validate_model(&m, 0.05, 20.0);
            assert!(r.passed(), "{r}");
            assert!(r.check(Assumption::Stability).value >= 0.1 - 1e-12);
            for i in 0..20 {
                assert!(m.row(i).filter(|&(j, _)| j != i).count() <= 3);
            }
            assert!((0..20).all(|v| m.true_graph().degree(v) <= 3));
        }
    }

    #[test]
    fn random_model_is_seed_deterministic() {
        let r = RandomModelRanges::default();
        assert_eq!(
            random_model(10, 2, 7, &r).unwrap(),
            random_model(10, 2, 7, &r).unwrap()
        );
        let small = random_model(2, 1, 3, &r).unwrap();
        assert!(small.true_graph().edge_count() <= 1);
    }

    #[test]
    fn random_model_rejects_bad_shapes() {
        let r = RandomModelRanges::default();
        assert!(random_model(1, 1, 0, &r).is_err());
        assert!(random_model(5, 5, 0, &r).is_err());
        assert!(random_model(5, 0, 0, &r).is_err());
        let tight = RandomModelRanges {
            max_decay: 2.0,
            w_min: 0.8,
            w_max: 0.9,
            ..r
        };
        assert!(matches!(
            random_model(10, 4, 0, &tight),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn planted_ring_shape() {
        let m = planted_ring(&PlantedSpec::default()).unwrap();
        let g = m.true_graph();
        assert_eq!(g.edge_count(), 10);
        assert!((0..10).all(|v| g.degree(v) == 2));
        // Even nodes only self-excite.
        assert_eq!(m.row(0).count(), 1);
        assert_eq!(m.weight(1, 0), 0.8);
        assert_eq!(m.weight(0, 1), 0.0);
    }

    #[test]
    fn confound_pair_is_symmetric_and_subcritical() {
        let (m, (i, j)) = planted_confound(&PlantedSpec::default(), 2.5).unwrap();
        assert_eq!(m.weight(i, j), m.weight(j, i));
        assert_eq!(m.baseline(i), m.baseline(j));
        let sums = m.branching_row_sums();
        assert!((sums[0] - 0.8).abs() < 1e-12 && (sums[1] - 0.8).abs() < 1e-12);
        let g = m.true_graph();
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.edge_count(), 1 + 7);
    }

    #[test]
    fn metrics_on_null_model() {
        let mut m = planted_ring(&PlantedSpec {
            n: 4,
            ..PlantedSpec::default()
        })
        .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    m.set_weight(i, j, 0.0).unwrap();
                }
            }
        }
        let cfg = TrialConfig::new(200.0, 0.05, ThresholdRule::User(1e9));
        let r = run_trial(&m, &cfg, 1).unwrap();
        assert!(r.exact);
        assert_eq!((r.precision, r.recall), (1.0, 1.0));
        assert!(r.false_positives.is_empty());
    }

    #[test]
    fn lemma2_examples() {
        assert!((lemma2_bound(20, 3, 100.0) - 9.0 * 2000f64.ln().powi(4)).abs() < 1e-9);
        let obs = [
            MaxRateObservation {
                n: 20,
                d: 3,
                horizon: 100.0,
                sup_intensity: 50.0,
            },
            MaxRateObservation {
                n: 2,
                d: 1,
                horizon: 10.0,
                sup_intensity: 1e6,
            },
        ];
        let r = lemma2_check(&obs);
        assert_eq!(r.violations, 1);
        assert_eq!(r.violation_fraction, 0.5);
        assert!(r.max_ratio > 1.0);
    }

    #[test]
    fn threshold_rules_parse() {
        assert_eq!(
            "theorem".parse::<ThresholdRule>().unwrap(),
            ThresholdRule::Theorem
        );
        assert_eq!(
            "0.5".parse::<ThresholdRule>().unwrap(),
            ThresholdRule::User(0.5)
        );
        assert!(matches!(
            "calibrated".parse::<ThresholdRule>().unwrap(),
            ThresholdRule::Calibrated { surrogates: 50, .. }
        ));
        assert!("-1".parse::<ThresholdRule>().is_err());
        assert!("maybe".parse::<ThresholdRule>().is_err());
    }
}
