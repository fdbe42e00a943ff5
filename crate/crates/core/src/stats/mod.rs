//! Multi-seed statistics: means with uncertainties, Gaussian error
//! propagation, significance, convergence and stability estimators, the
//! training-cost model and the epoch-gain sum.

mod fit;
pub mod notation;

pub use fit::{apply_epoch_threshold, fit_quadratic, FitOptions, FitPoint, FitResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("no values to summarize")]
    Empty,
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("division by zero mean")]
    DivisionByZero,
    #[error("x grids differ between the two inputs")]
    GridMismatch,
    #[error("no scaling factor at or above the threshold {0}")]
    NothingAboveThreshold(f64),
    #[error("invalid effort inputs: {0}")]
    InvalidEffort(String),
    #[error("fit needs at least 3 distinct abscissae, got {0}")]
    Underdetermined(usize),
    #[error("design matrix is rank deficient")]
    RankDeficient,
}

/// Sample size and standard deviation behind a measured [`Summary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub n: usize,
    pub sigma: f64,
}

/// A mean with its uncertainty. Measured summaries carry their sample
/// statistics (`delta = sigma / sqrt(n)`); derived or published ones do not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<Sample>,
}

impl Summary {
    pub fn new(mean: f64, delta: f64) -> Self {
        Self {
            mean,
            delta,
            sample: None,
        }
    }

    pub fn exact(mean: f64) -> Self {
        Self::new(mean, 0.0)
    }

    pub fn relative_uncertainty(&self) -> f64 {
        self.delta / self.mean
    }
}

/// Mean and standard error with an `n - 1` sample deviation; `delta = 0` for one value.
pub fn summarize(values: &[f64]) -> Result<Summary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(bad));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sigma = if n > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Summary {
        mean,
        delta: sigma / (n as f64).sqrt(),
        sample: Some(Sample { n, sigma }),
    })
}

/// `a / b` with first-order Gaussian propagation of both uncertainties.
pub fn ratio_with_uncertainty(a: &Summary, b: &Summary) -> Result<Summary, StatsError> {
    if b.mean == 0.0 {
        return Err(StatsError::DivisionByZero);
    }
    let mean = a.mean / b.mean;
    let da = a.delta / b.mean;
    let db = a.mean * b.delta / (b.mean * b.mean);
    Ok(Summary::new(mean, da.hypot(db)))
}

/// One-standard-deviation significance of `a - b`.
pub fn is_significant(a: &Summary, b: &Summary) -> bool {
    (a.mean - b.mean).abs() > a.delta.hypot(b.delta)
}

/// Runs with a strictly positive f1 score.
pub fn convergence_count(f1_values: &[f64]) -> usize {
    f1_values.iter().filter(|&&f| f > 0.0).count()
}

/// Converged-run counts of every approach at one scaling factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub x: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    At(f64),
    Never,
}

impl Threshold {
    pub fn value(self) -> Option<f64> {
        match self {
            Threshold::At(x) => Some(x),
            Threshold::Never => None,
        }
    }
}

/// Smallest `x` such that every approach converged in all `n_runs` runs at
/// `x` and at every larger factor of the grid.
pub fn convergence_threshold(rows: &[ConvergenceRow], n_runs: usize) -> Threshold {
    let mut sorted: Vec<&ConvergenceRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut threshold = Threshold::Never;
    for row in sorted.iter().rev() {
        if row.counts.iter().all(|&c| c == n_runs) {
            threshold = Threshold::At(row.x);
        } else {
            break;
        }
    }
    threshold
}

/// Mean of `delta / mean` over the factors `x >= threshold`.
pub fn average_relative_uncertainty(
    summaries: &[(f64, Summary)],
    threshold: f64,
) -> Result<f64, StatsError> {
    let rel: Vec<f64> = summaries
        .iter()
        .filter(|(x, _)| *x >= threshold)
        .map(|(_, s)| {
            if s.mean == 0.0 {
                Err(StatsError::DivisionByZero)
            } else {
                Ok(s.relative_uncertainty())
            }
        })
        .collect::<Result<_, _>>()?;
    if rel.is_empty() {
        return Err(StatsError::NothingAboveThreshold(threshold));
    }
    Ok(rel.iter().sum::<f64>() / rel.len() as f64)
}

pub fn global_average_relative_uncertainty(per_corpus: &[f64]) -> Result<f64, StatsError> {
    if per_corpus.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(per_corpus.iter().sum::<f64>() / per_corpus.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortInputs {
    pub n_train: f64,
    pub n_val: f64,
    pub n_epochs_adaptive: f64,
    /// Epoch counts of every fixed-epoch run the adaptive run replaces.
    pub n_epochs_fixed: Vec<f64>,
    /// Cost of a backward pass in units of a forward pass.
    #[serde(default = "default_backward_factor")]
    pub backward_cost_factor: f64,
}

fn default_backward_factor() -> f64 {
    1.0
}

impl EffortInputs {
    pub fn new(n_train: f64, n_val: f64, n_epochs_adaptive: f64, n_epochs_fixed: Vec<f64>) -> Self {
        Self {
            n_train,
            n_val,
            n_epochs_adaptive,
            n_epochs_fixed,
            backward_cost_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effort {
    /// Adaptive-to-fixed cost ratio.
    pub ratio: f64,
    /// Validation overhead factor.
    pub alpha: f64,
}

/// Relative compute of one adaptive run against the summed fixed-epoch runs.
///
/// Training costs `(1 + k)` forward passes per sample (k = backward factor),
/// validation one; the adaptive run validates every epoch, so
/// `alpha = 1 + n_val / ((1 + k) n_train)` and `R = n_adap / sum(n_fixed) * alpha`.
pub fn effort_ratio(inputs: &EffortInputs) -> Result<Effort, StatsError> {
    let bad = |m: &str| Err(StatsError::InvalidEffort(m.to_string()));
    if !(inputs.n_train > 0.0) {
        return bad("n_train must be positive");
    }
    if !(inputs.n_val >= 0.0) {
        return bad("n_val must be non-negative");
    }
    if !(inputs.n_epochs_adaptive > 0.0) {
        return bad("adaptive epoch count must be positive");
    }
    if inputs.n_epochs_fixed.is_empty() || inputs.n_epochs_fixed.iter().any(|e| !(*e > 0.0)) {
        return bad("fixed epoch counts must be non-empty and positive");
    }
    if !(inputs.backward_cost_factor >= 0.0) {
        return bad("backward cost factor must be non-negative");
    }
    let alpha = 1.0 + inputs.n_val / ((1.0 + inputs.backward_cost_factor) * inputs.n_train);
    let fixed: f64 = inputs.n_epochs_fixed.iter().sum();
    Ok(Effort {
        ratio: inputs.n_epochs_adaptive / fixed * alpha,
        alpha,
    })
}

/// `sum_x x * (f1(x; p) - f1(x; p - 2))` over a shared x grid.
pub fn gain(at_p: &[(f64, f64)], at_p_minus_2: &[(f64, f64)]) -> Result<f64, StatsError> {
    if at_p.len() != at_p_minus_2.len() {
        return Err(StatsError::GridMismatch);
    }
    let mut a = at_p.to_vec();
    let mut b = at_p_minus_2.to_vec();
    a.sort_by(|l, r| l.0.total_cmp(&r.0));
    b.sort_by(|l, r| l.0.total_cmp(&r.0));
    a.iter()
        .zip(&b)
        .map(|(&(xa, fa), &(xb, fb))| {
            if xa == xb {
                Ok(xa * (fa - fb))
            } else {
                Err(StatsError::GridMismatch)
            }
        })
        .sum()
}
