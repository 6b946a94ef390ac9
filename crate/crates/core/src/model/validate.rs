//! Machine checks of the model assumptions on a finite time grid.

use std::fmt;

use serde::Serialize;

use super::{HawkesModel, KernelSpec};

/// Step used for central finite differences.
const FD_STEP: f64 = 1e-5;
/// Declared `L` must exceed the finite-difference estimate by this factor.
const SMOOTHNESS_SLACK: f64 = 1.01;
/// Offsets `t - s` at which kernel log-derivatives and monotonicity are probed.
const KERNEL_OFFSETS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Assumption {
    /// `μ_i(t) ≥ μ_min` (and `≤ μ_max`).
    BaselineFloor,
    /// `φ(s, s) = 1`, `φ(·, s)` non-negative and non-increasing.
    KernelShape,
    /// `∫_0^t φ_ij(t, x) dx ≤ Φ`.
    KernelMass,
    /// `Σ_j w_ij ∫_0^t φ_ij(t, x) dx ≤ 1 - η`.
    Stability,
    /// Log-derivatives of baselines and kernels bounded by `L`.
    Smoothness,
    /// Nonzero off-diagonal weights lie in `[w_min, w_max]`.
    WeightRange,
    /// `w_ii - w_ij ≥ w_sep` for `j ≠ i`.
    Separation,
    /// At most `d` nonzero off-diagonal weights per row.
    Sparsity,
}

impl Assumption {
    /// Number of the modelling assumption this check belongs to.
    pub fn number(self) -> u8 {
        match self {
            Self::BaselineFloor => 1,
            Self::KernelShape => 2,
            Self::KernelMass | Self::Stability => 3,
            Self::Smoothness => 4,
            Self::WeightRange | Self::Separation => 5,
            Self::Sparsity => 6,
        }
    }
}

/// Where a check attained its worst value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct GridPoint {
    pub node: Option<usize>,
    pub other: Option<usize>,
    /// `f64::INFINITY` marks the analytic `t → ∞` limit.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    /// The bound it is compared against.
    pub limit: f64,
    pub worst: GridPoint,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, assumption: Assumption) -> &AssumptionCheck {
        self.checks
            .iter()
            .find(|c| c.assumption == assumption)
            .expect("every assumption is checked")
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            write!(
                f,
                "A{} {:<16} {status}  value={:<12.6} limit={:<12.6}",
                c.assumption.number(),
                format!("{:?}", c.assumption),
                c.value,
                c.limit
            )?;
            if let Some(node) = c.worst.node {
                write!(f, " node={node}")?;
            }
            if let Some(other) = c.worst.other {
                write!(f, " other={other}")?;
            }
            if let Some(t) = c.worst.time {
                write!(f, " t={t}")?;
            }
            writeln!(f, "  {}", c.detail)?;
        }
        Ok(())
    }
}

fn grid(step: f64, horizon: f64) -> Vec<f64> {
    let count = (horizon / step).floor() as usize;
    let mut g: Vec<f64> = (0..=count).map(|k| k as f64 * step).collect();
    if g.last().is_some_and(|&t| t < horizon) {
        g.push(horizon);
    }
    g
}

/// Checks every assumption on the grid `0, step, 2·step, …, horizon`.
///
/// Violations are report entries, not errors.
pub fn validate_model(model: &HawkesModel, grid_step: f64, horizon: f64) -> ValidationReport {
    assert!(
        grid_step > 0.0 && horizon > 0.0,
        "grid_step and horizon must be positive"
    );
    let times = grid(grid_step, horizon);
    let kernels = model.distinct_kernels();
    let checks = vec![
        baseline_floor(model, &times),
        kernel_shape(&kernels, &times, grid_step),
        kernel_mass(model, &kernels, &times),
        stability(model, &kernels, &times),
        smoothness(model, &kernels, &times, grid_step),
        weight_range(model),
        separation(model),
        sparsity(model),
    ];
    ValidationReport { checks }
}

fn baseline_floor(model: &HawkesModel, times: &[f64]) -> AssumptionCheck {
    let c = model.constants();
    let mut worst = (f64::INFINITY, GridPoint::default());
    let mut peak = 0.0f64;
    for (i, b) in model.baselines().iter().enumerate() {
        let analytic = (b.lower_bound(), None);
        let on_grid =
            times
                .iter()
                .map(|&t| (b.eval(t), Some(t)))
                .fold(
                    (f64::INFINITY, None),
                    |acc, x| if x.0 < acc.0 { x } else { acc },
                );
        for (v, t) in [analytic, on_grid] {
            if v < worst.0 {
                worst = (
                    v,
                    GridPoint {
                        node: Some(i),
                        other: None,
                        time: t,
                    },
                );
            }
        }
        peak = peak.max(b.upper_bound());
    }
    let passed = worst.0 >= c.mu_min && c.mu_min > 0.0 && peak <= c.mu_max;
    AssumptionCheck {
        assumption: Assumption::BaselineFloor,
        passed,
        value: worst.0,
        limit: c.mu_min,
        worst: worst.1,
        detail: format!("max baseline {peak} vs declared mu_max {}", c.mu_max),
    }
}

fn kernel_shape(kernels: &[KernelSpec], times: &[f64], step: f64) -> AssumptionCheck {
    let mut diag_err = 0.0f64;
    let mut worst = GridPoint::default();
    let mut increase = 0.0f64;
    let mut negative = false;
    for k in kernels {
        for &s in times {
            let e = (k.eval(s, s) - 1.0).abs();
            if e > diag_err {
                diag_err = e;
                worst.time = Some(s);
            }
            let mut prev = 1.0;
            for m in 1..=KERNEL_OFFSETS {
                let v = k.eval(s + m as f64 * step, s);
                negative |= v < 0.0;
                if v - prev > increase {
                    increase = v - prev;
                    worst.time = Some(s);
                }
                prev = v;
            }
        }
    }
    let value = diag_err.max(increase);
    AssumptionCheck {
        assumption: Assumption::KernelShape,
        passed: value == 0.0 && !negative,
        value,
        limit: 0.0,
        worst,
        detail: format!("max |phi(s,s) - 1| = {diag_err:e}, max increase = {increase:e}"),
    }
}

/// `∫_0^t φ(t, x) dx` on the grid, plus the `t → ∞` limit for shift-invariant kernels.
fn mass_series(k: &KernelSpec, times: &[f64]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| (t, k.integral_unchecked(t, 0.0)))
        .collect();
    if k.is_shift_invariant() {
        out.push((f64::INFINITY, k.integral_unchecked(f64::INFINITY, 0.0)));
    }
    out
}

fn kernel_mass(model: &HawkesModel, kernels: &[KernelSpec], times: &[f64]) -> AssumptionCheck {
    let c = model.constants();
    let mut worst = (0.0f64, GridPoint::default());
    for k in kernels {
        for (t, v) in mass_series(k, times) {
            if v > worst.0 {
                worst = (
                    v,
                    GridPoint {
                        node: None,
                        other: None,
                        time: Some(t),
                    },
                );
            }
        }
    }
    AssumptionCheck {
        assumption: Assumption::KernelMass,
        passed: worst.0 <= c.kernel_mass,
        value: worst.0,
        limit: c.kernel_mass,
        worst: worst.1,
        detail: format!("{} distinct kernels", kernels.len()),
    }
}

fn stability(model: &HawkesModel, kernels: &[KernelSpec], times: &[f64]) -> AssumptionCheck {
    let c = model.constants();
    let series: Vec<Vec<(f64, f64)>> = kernels.iter().map(|k| mass_series(k, times)).collect();
    let kernel_index = |k: &KernelSpec| kernels.iter().position(|x| x == k).expect("kernel listed");
    let mut worst = (f64::NEG_INFINITY, GridPoint::default());
    for i in 0..model.node_count() {
        let entries: Vec<(f64, usize)> = model
            .row(i)
            .map(|(j, w)| (w, kernel_index(model.kernel(i, j))))
            .collect();
        if entries.is_empty() {
            if worst.0 < 0.0 {
                worst = (
                    0.0,
                    GridPoint {
                        node: Some(i),
                        other: None,
                        time: None,
                    },
                );
            }
            continue;
        }
        // Grid points are shared; the infinite limit exists only if every kernel in the row has one.
        let points = times.len()
            + usize::from(
                entries
                    .iter()
                    .all(|&(_, k)| kernels[k].is_shift_invariant()),
            );
        for p in 0..points {
            let sum: f64 = entries.iter().map(|&(w, k)| w * series[k][p].1).sum();
            // Ties go to the later grid point so saturated rows report the limit.
            if sum > worst.0 || (sum == worst.0 && worst.1.node == Some(i)) {
                worst = (
                    sum,
                    GridPoint {
                        node: Some(i),
                        other: None,
                        time: Some(series[entries[0].1][p].0),
                    },
                );
            }
        }
    }
    let margin = 1.0 - worst.0;
    AssumptionCheck {
        assumption: Assumption::Stability,
        passed: margin >= c.stability_margin && c.stability_margin > 0.0,
        value: margin,
        limit: c.stability_margin,
        worst: worst.1,
        detail: format!("max integrated row excitation {}", worst.0),
    }
}

fn smoothness(
    model: &HawkesModel,
    kernels: &[KernelSpec],
    times: &[f64],
    step: f64,
) -> AssumptionCheck {
    let c = model.constants();
    let h = FD_STEP;
    let mut est = (0.0f64, GridPoint::default());
    for (i, b) in model.baselines().iter().enumerate() {
        for &t in times {
            let d = (b.eval(t + h) - b.eval(t - h)) / (2.0 * h);
            let r = d.abs() / b.eval(t);
            if r > est.0 {
                est = (
                    r,
                    GridPoint {
                        node: Some(i),
                        other: None,
                        time: Some(t),
                    },
                );
            }
        }
    }
    for k in kernels {
        for &s in times {
            for m in 0..KERNEL_OFFSETS {
                let t = s + 2.0 * h + m as f64 * step;
                let d = (k.eval(t + h, s) - k.eval(t - h, s)) / (2.0 * h);
                let v = k.eval(t, s);
                if v <= 0.0 {
                    continue;
                }
                let r = d.abs() / v;
                if r > est.0 {
                    est = (
                        r,
                        GridPoint {
                            node: None,
                            other: None,
                            time: Some(s),
                        },
                    );
                }
            }
        }
    }
    AssumptionCheck {
        assumption: Assumption::Smoothness,
        passed: c.smoothness >= SMOOTHNESS_SLACK * est.0,
        value: est.0,
        limit: c.smoothness / SMOOTHNESS_SLACK,
        worst: est.1,
        detail: format!("declared L = {}", c.smoothness),
    }
}

fn weight_range(model: &HawkesModel) -> AssumptionCheck {
    let c = model.constants();
    let mut worst = (f64::INFINITY, GridPoint::default());
    for ((i, j), w) in model.nonzero_weights() {
        if i == j {
            continue;
        }
        let m = (w - c.w_min).min(c.w_max - w);
        if m < worst.0 {
            worst = (
                m,
                GridPoint {
                    node: Some(i),
                    other: Some(j),
                    time: None,
                },
            );
        }
    }
    let value = if worst.0.is_finite() { worst.0 } else { 0.0 };
    AssumptionCheck {
        assumption: Assumption::WeightRange,
        passed: value >= 0.0 && c.w_min > 0.0 && c.w_min <= c.w_max,
        value,
        limit: 0.0,
        worst: worst.1,
        detail: format!(
            "off-diagonal weights must lie in [{}, {}]",
            c.w_min, c.w_max
        ),
    }
}

fn separation(model: &HawkesModel) -> AssumptionCheck {
    let c = model.constants();
    let n = model.node_count();
    let mut worst = (f64::INFINITY, GridPoint::default());
    for i in 0..n {
        let diag = model.weight(i, i);
        let mut off: Vec<(usize, f64)> = model.row(i).filter(|&(j, _)| j != i).collect();
        if off.len() < n - 1 {
            // Some w_ij is zero; pick the first such j for reporting.
            let j0 = (0..n)
                .find(|&j| j != i && model.weight(i, j) == 0.0)
                .expect("a zero entry exists");
            off.push((j0, 0.0));
        }
        for (j, w) in off {
            let gap = diag - w;
            if gap < worst.0 {
                worst = (
                    gap,
                    GridPoint {
                        node: Some(i),
                        other: Some(j),
                        time: None,
                    },
                );
            }
        }
    }
    let value = if worst.0.is_finite() {
        worst.0
    } else {
        f64::INFINITY
    };
    AssumptionCheck {
        assumption: Assumption::Separation,
        passed: value >= c.w_sep && c.w_sep > 0.0,
        value,
        limit: c.w_sep,
        worst: worst.1,
        detail: "min over i != j of w_ii - w_ij".to_string(),
    }
}

fn sparsity(model: &HawkesModel) -> AssumptionCheck {
    let c = model.constants();
    let mut worst = (0usize, GridPoint::default());
    for i in 0..model.node_count() {
        let count = model.row(i).filter(|&(j, _)| j != i).count();
        if count > worst.0 {
            worst = (
                count,
                GridPoint {
                    node: Some(i),
                    other: None,
                    time: None,
                },
            );
        }
    }
    AssumptionCheck {
        assumption: Assumption::Sparsity,
        passed: worst.0 <= c.max_degree,
        value: worst.0 as f64,
        limit: c.max_degree as f64,
        worst: worst.1,
        detail: "nonzero off-diagonal weights per row".to_string(),
    }
}
