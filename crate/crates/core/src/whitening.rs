//! Symmetric (ZCA) whitening `W = (Σ + εI)^{-1/2}` and thin-shell checks of
//! whitened norms against the chi distribution.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{mean, norm, variance};
use crate::stats::covariance;
use crate::store::{EmbeddingSet, Modality};

/// Relative eigenvalue floor used by [`fit_whitening_auto`].
pub const DEFAULT_RELATIVE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct WhiteningTransform {
    /// Symmetric positive definite `dim × dim` matrix.
    pub matrix: DMatrix<f64>,
    pub mean: Vec<f64>,
    /// Absolute ε added to every covariance eigenvalue.
    pub eigen_floor: f64,
}

impl WhiteningTransform {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Rows of `W` as an EMB1-ready set (modality `other`).
    pub fn matrix_as_set(&self) -> Result<EmbeddingSet> {
        let n = self.dim();
        let data: Vec<f64> = (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| self.matrix[(r, c)]).collect();
        EmbeddingSet::new(Modality::Other, n, data, None)
    }

    /// Rebuilds a transform from stored `W` rows plus its sidecar fields.
    pub fn from_parts(rows: &EmbeddingSet, mean: Vec<f64>, eigen_floor: f64) -> Result<Self> {
        let n = rows.dim();
        if rows.count() != n || mean.len() != n {
            return Err(Error::Shape(format!(
                "whitening matrix {}x{n} with mean of length {}",
                rows.count(),
                mean.len()
            )));
        }
        Ok(Self {
            matrix: DMatrix::from_row_slice(n, n, rows.data()),
            mean,
            eigen_floor,
        })
    }
}

/// Fits `W = Q·diag(1/√(λ + ε))·Qᵀ` from the population covariance
/// `Σ = QΛQᵀ`, with `ε = eigen_floor`.
pub fn fit_whitening(set: &EmbeddingSet, eigen_floor: f64) -> Result<WhiteningTransform> {
    fit(set, Floor::Absolute(eigen_floor))
}

/// [`fit_whitening`] with `ε = 1e-8 · max λ`.
pub fn fit_whitening_auto(set: &EmbeddingSet) -> Result<WhiteningTransform> {
    fit(set, Floor::Relative(DEFAULT_RELATIVE_FLOOR))
}

enum Floor {
    Absolute(f64),
    Relative(f64),
}

fn fit(set: &EmbeddingSet, floor: Floor) -> Result<WhiteningTransform> {
    if set.count() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: set.count(),
        });
    }
    if set.count() <= set.dim() {
        log::warn!(
            "whitening {} samples in {} dimensions: covariance is rank deficient",
            set.count(),
            set.dim()
        );
    }
    let m = set.mean();
    let cov = covariance(set, &m);
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("covariance has non-finite entries".into()));
    }
    if cov.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("covariance is identically zero".into()));
    }

    let eigen = SymmetricEigen::new(cov);
    let max_lambda = eigen.eigenvalues.max();
    let eps = match floor {
        Floor::Absolute(e) if e >= 0.0 && e.is_finite() => e,
        Floor::Absolute(e) => {
            return Err(Error::InvalidParameter(format!("eigen floor {e} must be nonnegative")))
        }
        Floor::Relative(r) => r * max_lambda,
    };

    let mut inv_sqrt = Vec::with_capacity(eigen.eigenvalues.len());
    for &lambda in eigen.eigenvalues.iter() {
        // tiny negative eigenvalues are rounding noise
        let regularized = lambda.max(0.0) + eps;
        if regularized <= 0.0 {
            return Err(Error::Singular(lambda));
        }
        inv_sqrt.push(1.0 / regularized.sqrt());
    }
    let q = &eigen.eigenvectors;
    let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |r, c| q[(r, c)] * inv_sqrt[c]);
    let w = &scaled * q.transpose();
    let matrix = (&w + w.transpose()) * 0.5;
    Ok(WhiteningTransform {
        matrix,
        mean: m,
        eigen_floor: eps,
    })
}

/// `v ↦ W(v − mean)` for every row; modality and ids are kept.
pub fn apply_whitening(t: &WhiteningTransform, set: &EmbeddingSet) -> Result<EmbeddingSet> {
    let n = t.dim();
    if set.dim() != n {
        return Err(Error::DimMismatch {
            expected: n,
            found: set.dim(),
        });
    }
    let centered = DMatrix::from_fn(set.count(), n, |j, l| set.data()[j * n + l] - t.mean[l]);
    // W is symmetric, so rows of (X − m)·W are W(v − m)
    let out = centered * &t.matrix;
    let mut data = Vec::with_capacity(set.count() * n);
    for j in 0..set.count() {
        data.extend(out.row(j).iter());
    }
    EmbeddingSet::new(set.modality(), n, data, set.ids().map(<[String]>::to_vec))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WhitenedNormCheck {
    pub mean_norm: f64,
    /// Population standard deviation of the row norms.
    pub std_norm: f64,
    /// `√(n − mean_norm²)`, or 0 when `mean_norm² > n`.
    pub predicted_std: f64,
    pub sqrt_n: f64,
    pub rel_err_mean: f64,
    /// `None` when `predicted_std` is 0.
    pub rel_err_std: Option<f64>,
    /// Set when `mean_norm² > n` forced `predicted_std` to 0.
    pub predicted_std_clamped: bool,
}

/// `√(n − mean_norm²)`, the norm std implied by `E‖y‖² = n`. The flag is
/// set when `mean_norm² > n` and the value is clamped to 0.
pub fn predicted_norm_std(n: usize, mean_norm: f64) -> (f64, bool) {
    let gap = n as f64 - mean_norm * mean_norm;
    (gap.max(0.0).sqrt(), gap < 0.0)
}

/// Compares norms of an already-whitened set with `E‖y‖ ≈ √n` and
/// `std‖y‖ = √(n − E²‖y‖)`.
pub fn whitened_norm_check(set: &EmbeddingSet) -> Result<WhitenedNormCheck> {
    let norms: Vec<f64> = set.rows().map(norm).collect();
    let n = set.dim() as f64;
    let mean_norm = mean(&norms);
    let std_norm = variance(&norms).sqrt();
    let (predicted_std, clamped) = predicted_norm_std(set.dim(), mean_norm);
    let sqrt_n = n.sqrt();
    Ok(WhitenedNormCheck {
        mean_norm,
        std_norm,
        predicted_std,
        sqrt_n,
        rel_err_mean: (mean_norm - sqrt_n).abs() / sqrt_n,
        rel_err_std: (predicted_std > 0.0).then(|| (std_norm - predicted_std).abs() / predicted_std),
        predicted_std_clamped: clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiReference {
    pub n: u64,
    /// `√2 · Γ((n+1)/2) / Γ(n/2)`.
    pub mean: f64,
    /// `√(n − mean²)`.
    pub std: f64,
}

/// Mean and standard deviation of the chi distribution with `n` degrees of
/// freedom, i.e. of `‖z‖` for `z ~ N(0, I_n)`.
pub fn chi_reference(n: u64) -> Result<ChiReference> {
    if n == 0 {
        return Err(Error::InvalidParameter("chi degrees of freedom must be positive".into()));
    }
    let half = n as f64 / 2.0;
    let mean = std::f64::consts::SQRT_2 * (ln_gamma(half + 0.5) - ln_gamma(half)).exp();
    let std = (n as f64 - mean * mean).max(0.0).sqrt();
    Ok(ChiReference { n, mean, std })
}

/// Large-`n` limit of the chi standard deviation, `1/√2`.
pub const CHI_STD_LIMIT: f64 = std::f64::consts::FRAC_1_SQRT_2;
