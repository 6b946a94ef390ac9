//! Hawkes model parameters: baselines, delay kernels, excitation weights and
//! the declared constants the detector and simulator rely on.
//!
//! The rate of node `i` is
//!
//! ```text
//! λ_i(t) = μ_i(t) + Σ_j w_ij Σ_{s ∈ events of j, s < t} φ_ij(t, s)
//! ```
//!
//! `w_ij` is the influence of `j`-events on the rate of `i` (row `i` is the
//! target, column `j` the source).

mod file;
mod validate;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::graph::DependencyGraph;
use crate::quad::adaptive_simpson;

pub use validate::{validate_model, Assumption, AssumptionCheck, GridPoint, ValidationReport};

/// Absolute tolerance used for quadrature of kernel integrals.
pub const QUAD_TOL: f64 = 1e-10;

/// Baseline rate family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BaselineSpec {
    Constant {
        level: f64,
    },
    /// `level + amplitude * sin(frequency * t + phase)`.
    Sinusoidal {
        level: f64,
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
}

impl BaselineSpec {
    pub fn constant(level: f64) -> Self {
        Self::Constant { level }
    }

    pub fn sinusoidal(level: f64, amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self::Sinusoidal {
            level,
            amplitude,
            frequency,
            phase,
        }
    }

    /// `μ(t)`, rejecting negative times.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid(format!("baseline evaluated at negative time {t}")));
        }
        Ok(self.eval(t))
    }

    #[inline]
    pub(crate) fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { level } => level,
            Self::Sinusoidal {
                level,
                amplitude,
                frequency,
                phase,
            } => level + amplitude * (frequency * t + phase).sin(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Sinusoidal {
                amplitude,
                frequency,
                phase,
                ..
            } => amplitude * frequency * (frequency * t + phase).cos(),
        }
    }

    /// `∫_a^b μ(t) dt`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            Self::Constant { level } => level * (b - a),
            Self::Sinusoidal {
                level,
                amplitude,
                frequency,
                phase,
            } => {
                if frequency == 0.0 {
                    return (level + amplitude * phase.sin()) * (b - a);
                }
                level * (b - a)
                    - amplitude / frequency
                        * ((frequency * b + phase).cos() - (frequency * a + phase).cos())
            }
        }
    }

    pub fn lower_bound(&self) -> f64 {
        match *self {
            Self::Constant { level } => level,
            Self::Sinusoidal {
                level, amplitude, ..
            } => level - amplitude.abs(),
        }
    }

    pub fn upper_bound(&self) -> f64 {
        match *self {
            Self::Constant { level } => level,
            Self::Sinusoidal {
                level, amplitude, ..
            } => level + amplitude.abs(),
        }
    }

    /// Analytic bound on `|μ'(t)| / μ(t)`.
    pub fn log_derivative_bound(&self) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Sinusoidal {
                amplitude,
                frequency,
                ..
            } => (amplitude * frequency).abs() / self.lower_bound(),
        }
    }

    fn check(&self) -> Result<()> {
        let finite = match *self {
            Self::Constant { level } => level.is_finite(),
            Self::Sinusoidal {
                level,
                amplitude,
                frequency,
                phase,
            } => {
                level.is_finite()
                    && amplitude.is_finite()
                    && frequency.is_finite()
                    && phase.is_finite()
            }
        };
        if !finite || self.lower_bound() < 0.0 {
            return Err(invalid(format!(
                "baseline {self:?} is not finite and non-negative"
            )));
        }
        Ok(())
    }
}

/// `μ(t)` for a baseline spec.
pub fn baseline_value(spec: &BaselineSpec, t: f64) -> Result<f64> {
    spec.value(t)
}

/// Delay kernel family. Both families have the form `φ(t, s) = exp(-β(s) (t - s))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    Exponential {
        decay: f64,
    },
    /// Decay rate `β(s) = base_decay + modulation * sin(frequency * s)`.
    ModulatedExponential {
        base_decay: f64,
        modulation: f64,
        frequency: f64,
    },
}

impl KernelSpec {
    pub fn exponential(decay: f64) -> Self {
        Self::Exponential { decay }
    }

    pub fn modulated(base_decay: f64, modulation: f64, frequency: f64) -> Self {
        Self::ModulatedExponential {
            base_decay,
            modulation,
            frequency,
        }
    }

    /// Decay rate of an excitation created at time `s`.
    #[inline]
    pub fn decay_at(&self, s: f64) -> f64 {
        match *self {
            Self::Exponential { decay } => decay,
            Self::ModulatedExponential {
                base_decay,
                modulation,
                frequency,
            } => base_decay + modulation * (frequency * s).sin(),
        }
    }

    pub fn min_decay(&self) -> f64 {
        match *self {
            Self::Exponential { decay } => decay,
            Self::ModulatedExponential {
                base_decay,
                modulation,
                ..
            } => base_decay - modulation.abs(),
        }
    }

    pub fn max_decay(&self) -> f64 {
        match *self {
            Self::Exponential { decay } => decay,
            Self::ModulatedExponential {
                base_decay,
                modulation,
                ..
            } => base_decay + modulation.abs(),
        }
    }

    /// Whether the decay rate is independent of the source time.
    pub fn is_shift_invariant(&self) -> bool {
        matches!(self, Self::Exponential { .. })
    }

    #[inline]
    pub(crate) fn eval(&self, t: f64, s: f64) -> f64 {
        (-self.decay_at(s) * (t - s)).exp()
    }

    /// `φ(t, s)` for `t ≥ s ≥ 0`.
    pub fn value(&self, t: f64, s: f64) -> Result<f64> {
        if !(s >= 0.0 && t >= s) {
            return Err(invalid(format!(
                "kernel needs t >= s >= 0, got t = {t}, s = {s}"
            )));
        }
        Ok(self.eval(t, s))
    }

    /// `∫_lower^t φ(t, x) dx`: closed form for the exponential family,
    /// adaptive quadrature otherwise.
    pub fn integral(&self, t: f64, lower: f64) -> Result<f64> {
        if !(lower >= 0.0 && t >= lower) {
            return Err(invalid(format!(
                "kernel integral needs 0 <= lower <= t, got [{lower}, {t}]"
            )));
        }
        Ok(self.integral_unchecked(t, lower))
    }

    pub(crate) fn integral_unchecked(&self, t: f64, lower: f64) -> f64 {
        match *self {
            Self::Exponential { decay } => {
                if t.is_infinite() {
                    1.0 / decay
                } else {
                    -(-decay * (t - lower)).exp_m1() / decay
                }
            }
            Self::ModulatedExponential { .. } => {
                if t.is_infinite() {
                    // The integrand vanishes except near t; not defined pointwise at infinity.
                    return 1.0 / self.min_decay();
                }
                // Contributions from x < t - 40/β_min are below e^-40 / β_min.
                let lo = lower.max(t - 40.0 / self.min_decay());
                adaptive_simpson(|x| self.eval(t, x), lo, t, QUAD_TOL)
            }
        }
    }

    /// `∫_a^b φ(u, s) du` over the first argument, for `s ≤ a ≤ b`.
    #[inline]
    pub fn time_integral(&self, s: f64, a: f64, b: f64) -> f64 {
        let beta = self.decay_at(s);
        ((-beta * (a - s)).exp() - (-beta * (b - s)).exp()) / beta
    }

    /// Upper bound on `∫_0^t φ(t, x) dx` over all `t`.
    pub fn mass_bound(&self) -> f64 {
        1.0 / self.min_decay()
    }

    fn check(&self) -> Result<()> {
        match *self {
            Self::Exponential { decay } if decay > 0.0 && decay.is_finite() => Ok(()),
            Self::ModulatedExponential {
                base_decay,
                modulation,
                frequency,
            } if base_decay.is_finite()
                && frequency.is_finite()
                && modulation.is_finite()
                && base_decay > modulation.abs() =>
            {
                Ok(())
            }
            _ => Err(invalid(format!(
                "kernel {self:?} must have a strictly positive decay rate"
            ))),
        }
    }
}

/// `φ(t, s)` for a kernel spec.
pub fn kernel_value(spec: &KernelSpec, t: f64, s: f64) -> Result<f64> {
    spec.value(t, s)
}

/// `∫_lower^t φ(t, x) dx` for a kernel spec.
pub fn kernel_integral(spec: &KernelSpec, t: f64, lower: f64) -> Result<f64> {
    spec.integral(t, lower)
}

/// Declared model constants. They are checked by [`validate_model`] and used
/// by the simulator (`smoothness`) and the detector (`w_min`, `w_sep`, `mu_min`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub mu_min: f64,
    pub mu_max: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub w_sep: f64,
    /// Bound `L` on the log-derivatives of baselines and kernels.
    pub smoothness: f64,
    /// Bound `Φ` on `∫_0^t φ_ij(t, x) dx`.
    pub kernel_mass: f64,
    /// Stability slack `η`: every row's integrated excitation stays below `1 - η`.
    pub stability_margin: f64,
    /// Maximum number of nonzero off-diagonal weights per row.
    pub max_degree: usize,
}

/// A multivariate Hawkes model with sparse weights.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesModel {
    n: usize,
    weights: BTreeMap<(usize, usize), f64>,
    baselines: Vec<BaselineSpec>,
    default_kernel: KernelSpec,
    kernel_overrides: BTreeMap<(usize, usize), KernelSpec>,
    constants: ModelConstants,
}

impl HawkesModel {
    /// A model with no excitation; add weights with [`set_weight`](Self::set_weight).
    pub fn new(
        baselines: Vec<BaselineSpec>,
        default_kernel: KernelSpec,
        constants: ModelConstants,
    ) -> Result<Self> {
        if baselines.is_empty() {
            return Err(invalid("a model needs at least one node"));
        }
        for b in &baselines {
            b.check()?;
        }
        default_kernel.check()?;
        Ok(Self {
            n: baselines.len(),
            weights: BTreeMap::new(),
            baselines,
            default_kernel,
            kernel_overrides: BTreeMap::new(),
            constants,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn constants(&self) -> &ModelConstants {
        &self.constants
    }

    pub fn set_constants(&mut self, constants: ModelConstants) {
        self.constants = constants;
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.n {
            return Err(Error::NodeOutOfRange { node, n: self.n });
        }
        Ok(())
    }

    /// Sets `w_ij`; a zero weight removes the entry.
    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        self.check_node(i)?;
        self.check_node(j)?;
        if !(w >= 0.0 && w.is_finite()) {
            return Err(invalid(format!(
                "weight w[{i}][{j}] = {w} must be finite and non-negative"
            )));
        }
        if w == 0.0 {
            self.weights.remove(&(i, j));
        } else {
            self.weights.insert((i, j), w);
        }
        Ok(())
    }

    pub fn set_kernel(&mut self, i: usize, j: usize, kernel: KernelSpec) -> Result<()> {
        self.check_node(i)?;
        self.check_node(j)?;
        kernel.check()?;
        if kernel == self.default_kernel {
            self.kernel_overrides.remove(&(i, j));
        } else {
            self.kernel_overrides.insert((i, j), kernel);
        }
        Ok(())
    }

    pub fn set_baseline(&mut self, i: usize, baseline: BaselineSpec) -> Result<()> {
        self.check_node(i)?;
        baseline.check()?;
        self.baselines[i] = baseline;
        Ok(())
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn kernel(&self, i: usize, j: usize) -> &KernelSpec {
        self.kernel_overrides
            .get(&(i, j))
            .unwrap_or(&self.default_kernel)
    }

    pub fn default_kernel(&self) -> &KernelSpec {
        &self.default_kernel
    }

    pub fn baseline(&self, i: usize) -> &BaselineSpec {
        &self.baselines[i]
    }

    pub fn baselines(&self) -> &[BaselineSpec] {
        &self.baselines
    }

    /// Nonzero weights as `((i, j), w_ij)` in lexicographic order.
    pub fn nonzero_weights(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.weights.iter().map(|(&k, &w)| (k, w))
    }

    /// Nonzero entries `(j, w_ij)` of row `i`, including the diagonal.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights
            .range((i, 0)..(i + 1, 0))
            .map(|(&(_, j), &w)| (j, w))
    }

    pub(crate) fn kernel_overrides(&self) -> &BTreeMap<(usize, usize), KernelSpec> {
        &self.kernel_overrides
    }

    /// Every distinct kernel spec in use (default first).
    pub fn distinct_kernels(&self) -> Vec<KernelSpec> {
        let mut out = vec![self.default_kernel];
        for k in self.kernel_overrides.values() {
            if !out.contains(k) {
                out.push(*k);
            }
        }
        out
    }

    /// Ground-truth dependency graph: `{i, j}` is an edge iff `w_ij > 0` or `w_ji > 0`.
    pub fn true_graph(&self) -> DependencyGraph {
        DependencyGraph::from_edges(self.n, self.weights.keys().filter(|(i, j)| i != j).copied())
    }

    /// Short content hash of the canonical model file.
    pub fn fingerprint(&self) -> String {
        let text = self.to_toml_string();
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }

    /// Largest baseline value over all nodes and times.
    pub fn max_baseline(&self) -> f64 {
        self.baselines
            .iter()
            .map(BaselineSpec::upper_bound)
            .fold(0.0, f64::max)
    }

    /// Tightest constants consistent with the model's own parameters.
    ///
    /// The smoothness constant gets 5% headroom over the analytic maximum so
    /// that the finite-difference check has room to pass.
    pub fn infer_constants(&self) -> ModelConstants {
        let n = self.n;
        let off: Vec<f64> = self
            .nonzero_weights()
            .filter(|((i, j), _)| i != j)
            .map(|(_, w)| w)
            .collect();
        let (w_min, w_max) = if off.is_empty() {
            (1.0, 1.0)
        } else {
            (
                off.iter().copied().fold(f64::INFINITY, f64::min),
                off.iter().copied().fold(0.0, f64::max),
            )
        };
        let mut w_sep = f64::INFINITY;
        let mut max_degree = 0;
        for i in 0..n {
            let row_off: Vec<f64> = self
                .row(i)
                .filter(|&(j, _)| j != i)
                .map(|(_, w)| w)
                .collect();
            max_degree = max_degree.max(row_off.len());
            let biggest = row_off.iter().copied().fold(0.0, f64::max);
            if n > 1 {
                w_sep = w_sep.min(self.weight(i, i) - biggest);
            }
        }
        if !w_sep.is_finite() {
            w_sep = self.weight(0, 0).max(f64::MIN_POSITIVE);
        }
        let kernels = self.distinct_kernels();
        let decay = kernels
            .iter()
            .map(KernelSpec::max_decay)
            .fold(0.0, f64::max);
        let drift = self
            .baselines
            .iter()
            .map(BaselineSpec::log_derivative_bound)
            .fold(0.0, f64::max);
        let kernel_mass = kernels
            .iter()
            .map(KernelSpec::mass_bound)
            .fold(0.0, f64::max);
        let load = self.branching_row_sums().into_iter().fold(0.0, f64::max);
        ModelConstants {
            mu_min: self
                .baselines
                .iter()
                .map(BaselineSpec::lower_bound)
                .fold(f64::INFINITY, f64::min),
            mu_max: self.max_baseline(),
            w_min,
            w_max,
            w_sep,
            smoothness: 1.05 * decay.max(drift),
            kernel_mass,
            stability_margin: 1.0 - load,
            max_degree,
        }
    }

    /// Stationary branching matrix row sums `Σ_j w_ij / β_min(ij)`.
    pub fn branching_row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .map(|(j, w)| w * self.kernel(i, j).mass_bound())
                    .sum()
            })
            .collect()
    }
}

/// `true_graph` as a free function.
pub fn true_graph(model: &HawkesModel) -> DependencyGraph {
    model.true_graph()
}

/// Angular frequency of a sinusoid with the given period.
pub fn angular_frequency(period: f64) -> f64 {
    2.0 * PI / period
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::ModelConstants;

    /// Placeholder constants for models that are re-declared with `infer_constants`.
    pub(crate) fn loose_constants() -> ModelConstants {
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
}
