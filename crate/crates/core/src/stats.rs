//! First and second moments of a modality, per-feature separability,
//! off-diagonal dominance and thin-shell summaries of centered norms.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{mean as mean_of, norm, variance};
use crate::store::EmbeddingSet;

/// Moment statistics of one modality. The covariance is the population
/// covariance (divides by `count`), so its trace equals the mean squared
/// centered norm.
#[derive(Debug, Clone, Serialize)]
pub struct ModalityStats {
    pub count: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    #[serde(skip)]
    pub cov: DMatrix<f64>,
    /// Mean of the centered norms `‖v − m‖`.
    pub mu_norm: f64,
    /// Population variance of the centered norms.
    pub var_norm: f64,
    /// `‖m‖ / ‖σ‖`.
    pub mean_sigma_ratio: f64,
}

impl ModalityStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self, feature: usize) -> f64 {
        self.cov[(feature, feature)]
    }

    pub fn trace(&self) -> f64 {
        self.cov.trace()
    }
}

fn require_samples(set: &EmbeddingSet, needed: usize) -> Result<()> {
    if set.count() < needed {
        return Err(Error::TooFewSamples {
            needed,
            found: set.count(),
        });
    }
    Ok(())
}

/// Rows minus the column mean, as a `count × dim` matrix.
pub(crate) fn centered_matrix(set: &EmbeddingSet, mean: &[f64]) -> DMatrix<f64> {
    let dim = set.dim();
    DMatrix::from_fn(set.count(), dim, |j, l| set.data()[j * dim + l] - mean[l])
}

/// Population covariance of `set` about `mean`.
pub(crate) fn covariance(set: &EmbeddingSet, mean: &[f64]) -> DMatrix<f64> {
    let centered = centered_matrix(set, mean);
    let mut cov = centered.tr_mul(&centered) / set.count() as f64;
    // gemm leaves asymmetry at rounding level
    let n = cov.nrows();
    for r in 0..n {
        for c in r + 1..n {
            let avg = 0.5 * (cov[(r, c)] + cov[(c, r)]);
            cov[(r, c)] = avg;
            cov[(c, r)] = avg;
        }
    }
    cov
}

fn centered_norms(set: &EmbeddingSet, mean: &[f64]) -> Vec<f64> {
    set.rows()
        .map(|row| {
            row.iter()
                .zip(mean)
                .map(|(v, m)| (v - m) * (v - m))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

pub fn compute_stats(set: &EmbeddingSet) -> Result<ModalityStats> {
    require_samples(set, 2)?;
    let m = set.mean();
    let cov = covariance(set, &m);
    let std: Vec<f64> = cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
    let norms = centered_norms(set, &m);
    let sigma = norm(&std);
    let mean_norm = norm(&m);
    let mean_sigma_ratio = if sigma > 0.0 {
        mean_norm / sigma
    } else if mean_norm > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(ModalityStats {
        count: set.count(),
        mu_norm: mean_of(&norms),
        var_norm: variance(&norms),
        mean: m,
        std,
        cov,
        mean_sigma_ratio,
    })
}

/// Per-feature separability scores and the features ordered by decreasing
/// score (ties toward the lower index).
#[derive(Debug, Clone, Serialize)]
pub struct Separability {
    pub scores: Vec<f64>,
    pub order: Vec<usize>,
}

/// `|m_i(ℓ) − m_t(ℓ)| / √(var_i(ℓ) + var_t(ℓ))` for every feature ℓ.
///
/// A zero pooled variance yields `+∞` when the means differ and `0` when they
/// coincide.
pub fn separability(stats_i: &ModalityStats, stats_t: &ModalityStats) -> Result<Separability> {
    if stats_i.dim() != stats_t.dim() {
        return Err(Error::DimMismatch {
            expected: stats_i.dim(),
            found: stats_t.dim(),
        });
    }
    let scores: Vec<f64> = (0..stats_i.dim())
        .map(|l| {
            let gap = (stats_i.mean[l] - stats_t.mean[l]).abs();
            let pooled = stats_i.variance(l) + stats_t.variance(l);
            if gap == 0.0 {
                0.0
            } else if pooled <= 0.0 {
                f64::INFINITY
            } else {
                gap / pooled.sqrt()
            }
        })
        .collect();
    let order = descending_order(&scores);
    Ok(Separability { scores, order })
}

/// Indices sorted by decreasing value; equal values keep index order.
pub(crate) fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Off-diagonal dominance of every covariance row:
/// `Σ_{k≠ℓ} |C_{ℓk}| / C_{ℓℓ}`.
pub fn odd(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !cov.is_square() {
        return Err(Error::Shape(format!("{}x{} matrix is not square", cov.nrows(), cov.ncols())));
    }
    let n = cov.nrows();
    let scale = cov.amax().max(f64::MIN_POSITIVE);
    for r in 0..n {
        for c in r + 1..n {
            if (cov[(r, c)] - cov[(c, r)]).abs() > 1e-9 * scale {
                return Err(Error::Shape(format!("matrix is not symmetric at ({r}, {c})")));
            }
        }
    }
    (0..n)
        .map(|l| {
            let diag = cov[(l, l)];
            if !(diag > 0.0) {
                return Err(Error::NonPositiveDiagonal { index: l, value: diag });
            }
            let off: f64 = (0..n).filter(|&k| k != l).map(|k| cov[(l, k)].abs()).sum();
            Ok(off / diag)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormSummary {
    pub mu_norm: f64,
    pub var_norm: f64,
    /// `√trace(C)` for centered norms, `√E‖v‖²` otherwise.
    pub sqrt_trace: f64,
    /// `|√(μ² + var) − μ| / μ`.
    pub rel_error: f64,
    /// Mean squared norm; equals `mu_norm² + var_norm` up to rounding.
    pub mean_sq_norm: f64,
    pub centered: bool,
}

/// `|√(μ² + var) − μ| / μ`: how far the mean norm is from the RMS norm.
/// Zero when `μ = 0`.
pub fn shell_rel_error(mu_norm: f64, var_norm: f64) -> f64 {
    if mu_norm > 0.0 {
        ((mu_norm * mu_norm + var_norm).sqrt() - mu_norm).abs() / mu_norm
    } else {
        0.0
    }
}

/// Norm statistics of mean-centered rows.
pub fn norm_summary(set: &EmbeddingSet) -> Result<NormSummary> {
    norm_summary_with(set, true)
}

/// Norm statistics; with `centered == false` the raw row norms are used.
pub fn norm_summary_with(set: &EmbeddingSet, centered: bool) -> Result<NormSummary> {
    require_samples(set, 2)?;
    let norms = if centered {
        centered_norms(set, &set.mean())
    } else {
        set.rows().map(norm).collect()
    };
    let mu_norm = mean_of(&norms);
    let var_norm = variance(&norms);
    let mean_sq_norm = norms.iter().map(|x| x * x).sum::<f64>() / norms.len() as f64;
    let sqrt_trace = if centered {
        // trace(C) as the sum of per-feature variances
        let m = set.mean();
        (0..set.dim())
            .map(|l| {
                let col = set.column(l);
                col.iter().map(|v| (v - m[l]) * (v - m[l])).sum::<f64>() / col.len() as f64
            })
            .sum::<f64>()
            .sqrt()
    } else {
        mean_sq_norm.sqrt()
    };
    Ok(NormSummary {
        mu_norm,
        var_norm,
        sqrt_trace,
        rel_error: shell_rel_error(mu_norm, var_norm),
        mean_sq_norm,
        centered,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThinShellReport {
    pub k: f64,
    pub mu_norm: f64,
    pub std_norm: f64,
    pub min_centered_norm: f64,
    pub max_centered_norm: f64,
    /// Fraction of centered norms within `mu_norm ± k·std_norm`, up to rounding.
    pub frac_within_k_sigma: f64,
    /// Fraction of centered norms below `mu_norm / 2`.
    pub mass_near_mean: f64,
}

pub fn thin_shell_report(set: &EmbeddingSet, k: f64) -> Result<ThinShellReport> {
    require_samples(set, 2)?;
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("k must be positive, got {k}")));
    }
    let norms = centered_norms(set, &set.mean());
    let mu = mean_of(&norms);
    let sd = variance(&norms).sqrt();
    let n = norms.len() as f64;
    let slack = 16.0 * f64::EPSILON * mu;
    let within = norms.iter().filter(|&&r| (r - mu).abs() <= k * sd + slack).count();
    let near = norms.iter().filter(|&&r| r < mu / 2.0).count();
    Ok(ThinShellReport {
        k,
        mu_norm: mu,
        std_norm: sd,
        min_centered_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
        max_centered_norm: norms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        frac_within_k_sigma: within as f64 / n,
        mass_near_mean: near as f64 / n,
    })
}
