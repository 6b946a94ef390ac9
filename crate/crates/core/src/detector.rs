//! Threshold test on the normalized pair statistics.
//!
//! For an ordered pair the score is `|D1| / (T ε) + |D2| / (T ε²)`; the
//! undirected edge `{i, j}` is reported when the score of either ordering
//! reaches the threshold `h`.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::DependencyGraph;
use crate::model::HawkesModel;
use crate::rng;
use crate::simulator::EventLog;
use crate::statistics::{accumulate_all, bin_events, AllPairStatistics, PairStatistics};

/// Where a threshold came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    Theorem,
    User,
    Calibrated,
}

impl fmt::Display for ThresholdSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Theorem => "theorem",
            Self::User => "user",
            Self::Calibrated => "calibrated",
        })
    }
}

/// Which terms enter the score. `FirstOrderOnly` is the pairwise-only ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreTerms {
    #[default]
    Full,
    FirstOrderOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub epsilon: f64,
    pub horizon: f64,
    pub threshold: f64,
    pub source: ThresholdSource,
    #[serde(default)]
    pub terms: ScoreTerms,
}

impl DetectorConfig {
    pub fn new(
        epsilon: f64,
        horizon: f64,
        threshold: f64,
        source: ThresholdSource,
    ) -> Result<Self> {
        let c = Self {
            epsilon,
            horizon,
            threshold,
            source,
            terms: ScoreTerms::Full,
        };
        c.check()?;
        Ok(c)
    }

    pub fn with_terms(mut self, terms: ScoreTerms) -> Self {
        self.terms = terms;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!(
                "epsilon {} must be positive",
                self.epsilon
            )));
        }
        if !(self.horizon >= 3.0 * self.epsilon * (1.0 - 1e-12) && self.horizon.is_finite()) {
            return Err(invalid(format!(
                "horizon {} must be at least 3 epsilon",
                self.horizon
            )));
        }
        if !(self.threshold > 0.0) {
            return Err(invalid(format!(
                "threshold {} must be positive",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// `|D1| / (T ε) + |D2| / (T ε²)`.
pub fn pair_score(stats: &PairStatistics) -> f64 {
    pair_score_with(stats, ScoreTerms::Full)
}

pub fn pair_score_with(stats: &PairStatistics, terms: ScoreTerms) -> f64 {
    let te = stats.horizon * stats.epsilon;
    let first = stats.d1.unsigned_abs() as f64 / te;
    match terms {
        ScoreTerms::Full => first + stats.d2.unsigned_abs() as f64 / (te * stats.epsilon),
        ScoreTerms::FirstOrderOnly => first,
    }
}

/// Larger of the two ordered-pair scores for `{i, j}`.
pub fn edge_score(stats: &AllPairStatistics, i: usize, j: usize, terms: ScoreTerms) -> f64 {
    pair_score_with(&stats.get(i, j), terms).max(pair_score_with(&stats.get(j, i), terms))
}

fn check_match(stats: &AllPairStatistics, config: &DetectorConfig) -> Result<()> {
    if stats.epsilon() != config.epsilon || stats.horizon() != config.horizon {
        return Err(Error::ConfigMismatch {
            stats_horizon: stats.horizon(),
            stats_epsilon: stats.epsilon(),
            config_horizon: config.horizon,
            config_epsilon: config.epsilon,
        });
    }
    Ok(())
}

/// Runs the threshold test over every unordered pair.
pub fn detect(stats: &AllPairStatistics, config: &DetectorConfig) -> Result<DependencyGraph> {
    detect_among(stats, config, 0..stats.node_count())
}

fn detect_among(
    stats: &AllPairStatistics,
    config: &DetectorConfig,
    nodes: impl IntoIterator<Item = usize>,
) -> Result<DependencyGraph> {
    config.check()?;
    check_match(stats, config)?;
    let nodes: Vec<usize> = nodes.into_iter().collect();
    let mut g = DependencyGraph::empty(stats.node_count());
    for (a, &i) in nodes.iter().enumerate() {
        for &j in &nodes[a + 1..] {
            if edge_score(stats, i, j, config.terms) >= config.threshold {
                g.add_edge(i, j);
            }
        }
    }
    Ok(g)
}

/// Bins, accumulates and detects in one call.
pub fn detect_log(log: &EventLog, config: &DetectorConfig) -> Result<DependencyGraph> {
    let grid = bin_events(log, config.epsilon)?;
    detect(&accumulate_all(&grid), config)
}

/// Detection using only the events of `observed` nodes. The result keeps the
/// original node labels and only contains edges within `observed`.
pub fn detect_subset(
    log: &EventLog,
    observed: &BTreeSet<usize>,
    config: &DetectorConfig,
) -> Result<DependencyGraph> {
    if observed.is_empty() {
        return Err(invalid("observed node set is empty"));
    }
    if let Some(&bad) = observed.iter().find(|&&v| v >= log.n) {
        return Err(Error::NodeOutOfRange {
            node: bad,
            n: log.n,
        });
    }
    let visible = log.filter_nodes(|v| observed.contains(&v));
    let grid = bin_events(&visible, config.epsilon)?;
    detect_among(&accumulate_all(&grid), config, observed.iter().copied())
}

/// `h = w_min · w_sep · μ_min / 8`.
pub fn theorem_threshold(w_min: f64, w_sep: f64, mu_min: f64) -> Result<f64> {
    if !(w_min > 0.0 && w_sep > 0.0 && mu_min > 0.0) {
        return Err(invalid("w_min, w_sep and mu_min must be positive"));
    }
    Ok(w_min * w_sep * mu_min / 8.0)
}

/// Threshold from a model's declared constants.
pub fn theorem_threshold_for(model: &HawkesModel) -> Result<f64> {
    let c = model.constants();
    theorem_threshold(c.w_min, c.w_sep, c.mu_min)
}

pub const SCHEDULE_ADVISORY: &str = "the asymptotic schedule T = ln(n)^100, eps = ln(n)^-17 exists to make \
     the recovery guarantee provable; it is astronomically long for any real n. Use a user-chosen or \
     calibrated configuration for practical runs.";

/// Horizon and bin width from the asymptotic recovery guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremSchedule {
    pub horizon: f64,
    pub epsilon: f64,
}

/// `(ln(n)^100, ln(n)^-17)`. Logs [`SCHEDULE_ADVISORY`] as a warning.
pub fn theorem_schedule(n: usize) -> Result<TheoremSchedule> {
    if n < 3 {
        return Err(invalid(format!(
            "schedule needs n >= 3 (ln n > 1), got {n}"
        )));
    }
    let ln = (n as f64).ln();
    log::warn!("{SCHEDULE_ADVISORY}");
    Ok(TheoremSchedule {
        horizon: ln.powi(100),
        epsilon: ln.powi(-17),
    })
}

/// Bin width keeping `(peak rate estimate) · ε` at `0.05`. The estimate is the
/// largest per-node mean event rate in the log.
pub fn practical_epsilon(log: &EventLog) -> f64 {
    let peak = log.counts().into_iter().max().unwrap_or(0) as f64 / log.horizon;
    if peak > 0.0 {
        0.05 / peak
    } else {
        log.horizon / 3.0
    }
}

/// Outcome of surrogate calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub threshold: f64,
    /// Pooled null scores, one per surrogate and unordered pair.
    pub null_scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub surrogates: usize,
    pub quantile: f64,
    pub terms: ScoreTerms,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            surrogates: 50,
            quantile: 0.99,
            terms: ScoreTerms::Full,
        }
    }
}

/// One surrogate: every node's events circularly shifted by an independent
/// uniform offset in `[0, T)`. Marginals are kept, cross-timing is destroyed.
pub fn circular_surrogate(log: &EventLog, seed: u64, index: u64) -> EventLog {
    let mut rng = rng::stream(seed, index);
    let horizon = log.horizon;
    let offsets: Vec<f64> = (0..log.n).map(|_| rng.random_range(0.0..horizon)).collect();
    log.map_times(|e| {
        let t = e.time + offsets[e.node];
        if t >= horizon {
            t - horizon
        } else {
            t
        }
    })
}

/// Threshold at the given quantile of surrogate edge scores.
///
/// Each null score is the larger of the two ordered-pair scores, the same
/// statistic [`detect`] compares against `h`.
pub fn calibrate_threshold(
    log: &EventLog,
    epsilon: f64,
    opts: &CalibrationOptions,
    seed: u64,
) -> Result<Calibration> {
    if opts.surrogates == 0 || !(opts.quantile > 0.0 && opts.quantile < 1.0) {
        return Err(invalid(
            "calibration needs at least one surrogate and a quantile in (0, 1)",
        ));
    }
    if log.n < 2 {
        return Err(invalid("calibration needs at least two nodes"));
    }
    let per_surrogate: Vec<Vec<f64>> = (0..opts.surrogates as u64)
        .into_par_iter()
        .map(|s| -> Result<Vec<f64>> {
            let surrogate = circular_surrogate(log, seed, s);
            let stats = accumulate_all(&bin_events(&surrogate, epsilon)?);
            let n = log.n;
            Ok((0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| edge_score(&stats, i, j, opts.terms))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut null_scores: Vec<f64> = per_surrogate.into_iter().flatten().collect();
    let mut sorted = null_scores.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = ((opts.quantile * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    // A zero quantile would make every pair an edge; fall back to the smallest positive score.
    let mut threshold = sorted[rank - 1];
    if threshold <= 0.0 {
        threshold = sorted
            .iter()
            .copied()
            .find(|&v| v > 0.0)
            .unwrap_or(f64::MIN_POSITIVE);
    }
    null_scores.shrink_to_fit();
    Ok(Calibration {
        threshold,
        null_scores,
    })
}

/// Calibrates `h` on the log itself and returns the resulting config.
pub fn calibrated_config(
    log: &EventLog,
    epsilon: f64,
    opts: &CalibrationOptions,
    seed: u64,
) -> Result<DetectorConfig> {
    let cal = calibrate_threshold(log, epsilon, opts, seed)?;
    Ok(DetectorConfig::new(
        epsilon,
        log.horizon,
        cal.threshold,
        ThresholdSource::Calibrated,
    )?
    .with_terms(opts.terms))
}

/// Graph file text: a `#` header with the configuration, then one `i j` line
/// per edge in lexicographic order.
pub fn graph_file(graph: &DependencyGraph, config: &DetectorConfig) -> String {
    let terms = match config.terms {
        ScoreTerms::Full => "full",
        ScoreTerms::FirstOrderOnly => "first_order_only",
    };
    format!(
        "# hawkes-graph n={} epsilon={} horizon={} threshold={} source={} terms={terms}\n{graph}",
        graph.node_count(),
        config.epsilon,
        config.horizon,
        config.threshold,
        config.source,
    )
}
