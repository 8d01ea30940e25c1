//! Conformity (mean cosine similarity of an instance to the rest of its set),
//! its affine estimate from the cosine to the modality mean, and the
//! image/text conformity-distribution KL sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{histogram_kl, shared_histograms};
use crate::linalg::{cosine, dot, mean, norm};
use crate::store::{EmbeddingSet, PairedEmbeddings, ShiftTarget};

/// Padding of the shared conformity histogram range, as a fraction of the
/// pooled span.
pub const SHARED_RANGE_PAD: f64 = 0.01;

fn unit_rows(set: &EmbeddingSet) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(set.data().len());
    for (j, row) in set.rows().enumerate() {
        let r = norm(row);
        if r == 0.0 {
            return Err(Error::ZeroNorm { row: j });
        }
        out.extend(row.iter().map(|v| v / r));
    }
    Ok(out)
}

/// `C(v_j) = mean_{k≠j} cos(v_j, v_k)`.
///
/// Computed as `v̂_j · (S − v̂_j) / (M − 1)` with `S` the sum of unit rows.
pub fn conformity(set: &EmbeddingSet) -> Result<Vec<f64>> {
    let m = set.count();
    if m < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: m });
    }
    let dim = set.dim();
    let unit = unit_rows(set)?;
    let mut total = vec![0.0; dim];
    for row in unit.chunks_exact(dim) {
        total.iter_mut().zip(row).for_each(|(s, v)| *s += v);
    }
    let denom = (m - 1) as f64;
    Ok(unit
        .par_chunks_exact(dim)
        .map(|u| ((dot(u, &total) - dot(u, u)) / denom).clamp(-1.0, 1.0))
        .collect())
}

/// `cos(mean, v_j)` for every row.
pub fn cosines_to_mean(set: &EmbeddingSet, mean: &[f64]) -> Result<Vec<f64>> {
    if mean.len() != set.dim() {
        return Err(Error::DimMismatch {
            expected: set.dim(),
            found: mean.len(),
        });
    }
    if norm(mean) == 0.0 {
        return Err(Error::Degenerate("mean vector is zero".into()));
    }
    set.rows()
        .enumerate()
        .map(|(j, v)| cosine(mean, v).ok_or(Error::ZeroNorm { row: j }))
        .collect()
}

/// `Ĉ(v_j) = a·cos(mean, v_j) + b`.
pub fn estimated_conformity(set: &EmbeddingSet, mean: &[f64], a: f64, b: f64) -> Result<Vec<f64>> {
    Ok(cosines_to_mean(set, mean)?
        .into_iter()
        .map(|c| a * c + b)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorFit {
    pub a: f64,
    pub b: f64,
    pub pearson_r: f64,
}

/// Least-squares fit `c ≈ a·cosines + b` and the Pearson correlation of the
/// two vectors. A constant `c` fits with `a = 0` and reports `r = 0`.
pub fn fit_estimator(c: &[f64], cosines: &[f64]) -> Result<EstimatorFit> {
    if c.len() != cosines.len() {
        return Err(Error::DimMismatch {
            expected: c.len(),
            found: cosines.len(),
        });
    }
    if c.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            found: c.len(),
        });
    }
    let mc = mean(c);
    let mx = mean(cosines);
    let sxx: f64 = cosines.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = c.iter().map(|y| (y - mc) * (y - mc)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("cosines are constant".into()));
    }
    let sxy: f64 = cosines.iter().zip(c).map(|(x, y)| (x - mx) * (y - mc)).sum();
    let a = sxy / sxx;
    let b = mc - a * mx;
    let pearson_r = if syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
    };
    Ok(EstimatorFit { a, b, pearson_r })
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: x.len(),
        });
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("pearson of a constant vector".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformityReport {
    pub conformity: Vec<f64>,
    pub cosines_to_mean: Vec<f64>,
    pub estimate: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub pearson_r: f64,
}

/// Conformity, cosines to the raw modality mean (self included), and the
/// estimate. With `coefficients = None` `(a, b)` are fitted by least squares;
/// otherwise the given pair is used and `pearson_r` still compares `C` with
/// the cosines.
pub fn conformity_report(set: &EmbeddingSet, coefficients: Option<(f64, f64)>) -> Result<ConformityReport> {
    let c = conformity(set)?;
    let cosines = cosines_to_mean(set, &set.mean())?;
    let fit = fit_estimator(&c, &cosines)?;
    let (a, b) = coefficients.unwrap_or((fit.a, fit.b));
    let estimate = cosines.iter().map(|x| a * x + b).collect();
    Ok(ConformityReport {
        conformity: c,
        cosines_to_mean: cosines,
        estimate,
        a,
        b,
        pearson_r: fit.pearson_r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlDirection {
    /// `KL(image ‖ text)`.
    ImageText,
    /// `KL(text ‖ image)`.
    TextImage,
}

impl KlDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            KlDirection::ImageText => "image-text",
            KlDirection::TextImage => "text-image",
        }
    }
}

impl std::str::FromStr for KlDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image-text" => Ok(KlDirection::ImageText),
            "text-image" => Ok(KlDirection::TextImage),
            other => Err(Error::InvalidParameter(format!("unknown KL direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlPoint {
    pub alpha: f64,
    pub kl: f64,
}

/// For each α, shifts the targeted modality by `−α·m` (means taken from the
/// unshifted pair), recomputes conformity of both modalities, histograms both
/// over a shared padded range and reports their KL divergence.
pub fn conformity_kl_sweep(
    pair: &PairedEmbeddings,
    alphas: &[f64],
    target: ShiftTarget,
    bins: usize,
    direction: KlDirection,
) -> Result<Vec<KlPoint>> {
    if bins < 10 {
        return Err(Error::InvalidParameter(format!("kl sweep needs at least 10 bins, got {bins}")));
    }
    let means = pair.means();
    alphas
        .par_iter()
        .map(|&alpha| {
            let shifted = pair.shifted(alpha, target, &means)?;
            let ci = conformity(shifted.images())?;
            let ct = conformity(shifted.texts())?;
            let (hi, ht) = shared_histograms(&ci, &ct, bins, SHARED_RANGE_PAD)?;
            let kl = match direction {
                KlDirection::ImageText => histogram_kl(&hi, &ht)?,
                KlDirection::TextImage => histogram_kl(&ht, &hi)?,
            };
            Ok(KlPoint { alpha, kl })
        })
        .collect()
}
