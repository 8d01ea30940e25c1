//! Seeded synthetic embeddings: shifted anisotropic Gaussian ellipsoids,
//! paired sets with planted false negatives, and the semantic-blur
//! demonstration.
//!
//! All randomness comes from [`NormalSource`], so every function here is a
//! pure function of its arguments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{histogram, Histogram};
use crate::linalg::{cosine, mean};
use crate::rng::NormalSource;
use crate::store::{pair, EmbeddingSet, Modality, PairedEmbeddings};

/// Latent jitter applied to planted duplicate concepts.
pub const DEFAULT_DUPLICATE_JITTER: f64 = 0.2;

/// Linear map applied to standard-normal draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Per-feature standard deviations.
    Diagonal(Vec<f64>),
    /// Full `dim × dim` factor `L`, row-major, so that `cov = L·Lᵀ`.
    Factor(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub count: usize,
    pub mean: Vec<f64>,
    pub scale: Scale,
    pub seed: u64,
    pub modality: Modality,
}

impl SyntheticSpec {
    /// Standard normal rows around `mean`.
    pub fn isotropic(mean: Vec<f64>, count: usize, seed: u64, modality: Modality) -> Self {
        let dim = mean.len();
        Self {
            dim,
            count,
            mean,
            scale: Scale::Diagonal(vec![1.0; dim]),
            seed,
            modality,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.count == 0 {
            return Err(Error::InvalidParameter("dim and count must be positive".into()));
        }
        if self.mean.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: self.mean.len(),
            });
        }
        if self.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("mean must be finite".into()));
        }
        match &self.scale {
            Scale::Diagonal(s) => {
                if s.len() != self.dim {
                    return Err(Error::DimMismatch {
                        expected: self.dim,
                        found: s.len(),
                    });
                }
                if s.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidParameter("scales must be finite and nonnegative".into()));
                }
            }
            Scale::Factor(rows) => {
                if rows.len() != self.dim || rows.iter().any(|r| r.len() != self.dim) {
                    return Err(Error::Shape(format!("factor must be {0}x{0}", self.dim)));
                }
                if rows.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("covariance factor has non-finite entries".into()));
                }
            }
        }
        Ok(())
    }

    /// `out = mean + L·z`.
    fn transform(&self, z: &[f64], out: &mut [f64]) {
        match &self.scale {
            Scale::Diagonal(s) => {
                for ((o, m), (s, z)) in out.iter_mut().zip(&self.mean).zip(s.iter().zip(z)) {
                    *o = m + s * z;
                }
            }
            Scale::Factor(rows) => {
                for ((o, m), row) in out.iter_mut().zip(&self.mean).zip(rows) {
                    *o = m + row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }
}

/// Draws `spec.count` rows `mean + L·z`, `z` iid standard normal, seeded by
/// `spec.seed`.
pub fn generate_gaussian(spec: &SyntheticSpec) -> Result<EmbeddingSet> {
    spec.validate()?;
    let mut src = NormalSource::new(spec.seed);
    let mut z = vec![0.0; spec.dim];
    let mut data = vec![0.0; spec.dim * spec.count];
    for row in data.chunks_exact_mut(spec.dim) {
        src.fill_normal(&mut z);
        spec.transform(&z, row);
    }
    EmbeddingSet::new(spec.modality, spec.dim, data, None)
}

/// Generates positive pairs sharing a latent per pair.
///
/// Pair `j` draws a latent `z_j`; each modality then gets
/// `mean + L·(coupling·z_j + √(1 − coupling²)·e)` with fresh noise `e`, so
/// `coupling = 1` aligns pairs perfectly and `0` makes them independent. The
/// last `duplicates` pairs reuse the latent of a uniformly chosen earlier pair
/// plus `N(0, jitter²)` noise, planting near-duplicate concepts (false
/// negatives) in the batch. Both specs' `count` must match; their seeds are
/// ignored in favour of `seed`.
pub fn generate_paired(
    spec_i: &SyntheticSpec,
    spec_t: &SyntheticSpec,
    coupling: f64,
    duplicates: usize,
    seed: u64,
) -> Result<PairedEmbeddings> {
    generate_paired_with_jitter(spec_i, spec_t, coupling, duplicates, DEFAULT_DUPLICATE_JITTER, seed)
}

pub fn generate_paired_with_jitter(
    spec_i: &SyntheticSpec,
    spec_t: &SyntheticSpec,
    coupling: f64,
    duplicates: usize,
    jitter: f64,
    seed: u64,
) -> Result<PairedEmbeddings> {
    spec_i.validate()?;
    spec_t.validate()?;
    if spec_i.dim != spec_t.dim {
        return Err(Error::DimMismatch {
            expected: spec_i.dim,
            found: spec_t.dim,
        });
    }
    if spec_i.count != spec_t.count {
        return Err(Error::CountMismatch {
            images: spec_i.count,
            texts: spec_t.count,
        });
    }
    if !(0.0..=1.0).contains(&coupling) {
        return Err(Error::InvalidParameter(format!("coupling {coupling} outside [0, 1]")));
    }
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::InvalidParameter(format!("jitter {jitter} must be nonnegative")));
    }
    let (dim, count) = (spec_i.dim, spec_i.count);
    if duplicates >= count {
        return Err(Error::InvalidParameter(format!(
            "duplicates ({duplicates}) must be below count ({count})"
        )));
    }
    let originals = count - duplicates;
    let residual = (1.0 - coupling * coupling).sqrt();

    let mut src = NormalSource::new(seed);
    let mut latents = vec![0.0; dim * count];
    let mut images = vec![0.0; dim * count];
    let mut texts = vec![0.0; dim * count];
    let mut ids = Vec::with_capacity(count);
    let mut noise = vec![0.0; dim];
    let mut mixed = vec![0.0; dim];
    for j in 0..count {
        if j < originals {
            src.fill_normal(&mut latents[j * dim..(j + 1) * dim]);
            ids.push(format!("p{j}"));
        } else {
            let k = src.below(originals);
            src.fill_normal(&mut noise);
            for l in 0..dim {
                latents[j * dim + l] = latents[k * dim + l] + jitter * noise[l];
            }
            ids.push(format!("p{j}-dup-p{k}"));
        }
        let z = &latents[j * dim..(j + 1) * dim];
        for (spec, out) in [(spec_i, &mut images), (spec_t, &mut texts)] {
            src.fill_normal(&mut noise);
            for l in 0..dim {
                mixed[l] = coupling * z[l] + residual * noise[l];
            }
            spec.transform(&mixed, &mut out[j * dim..(j + 1) * dim]);
        }
    }
    let images = EmbeddingSet::new(Modality::Image, dim, images, Some(ids.clone()))?;
    let texts = EmbeddingSet::new(Modality::Text, dim, texts, Some(ids))?;
    pair(images, texts)
}

#[derive(Debug, Clone, Serialize)]
pub struct BlurDemo {
    pub hist_mean_sim: Histogram,
    pub hist_far_sim: Histogram,
    /// Mean of `cos(m, v_j)` over all `j`.
    pub mean_of_mean_sim: f64,
    /// Mean of `cos(v_far, v_j)` over `j ≠ far`.
    pub mean_of_far_sim: f64,
    pub far_index: usize,
}

/// Draws `count` vectors from `N(center, I_n)` and compares the cosine
/// similarity population against the empirical mean with the population
/// against the vector least similar to that mean (self excluded).
pub fn blur_demo(n: usize, count: usize, center: &[f64], seed: u64, bins: usize) -> Result<BlurDemo> {
    if count < 3 {
        return Err(Error::TooFewSamples { needed: 3, found: count });
    }
    if center.len() != n {
        return Err(Error::DimMismatch {
            expected: n,
            found: center.len(),
        });
    }
    let set = generate_gaussian(&SyntheticSpec::isotropic(center.to_vec(), count, seed, Modality::Other))?;
    let m = set.mean();
    let to_mean = set
        .rows()
        .enumerate()
        .map(|(j, v)| cosine(&m, v).ok_or(Error::ZeroNorm { row: j }))
        .collect::<Result<Vec<_>>>()?;
    let far_index = to_mean
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(j, _)| j)
        .expect("count >= 3");
    let far = set.row(far_index);
    let to_far = set
        .rows()
        .enumerate()
        .filter(|&(j, _)| j != far_index)
        .map(|(j, v)| cosine(far, v).ok_or(Error::ZeroNorm { row: j }))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlurDemo {
        hist_mean_sim: histogram(&to_mean, bins, None)?,
        hist_far_sim: histogram(&to_far, bins, None)?,
        mean_of_mean_sim: mean(&to_mean),
        mean_of_far_sim: mean(&to_far),
        far_index,
    })
}

/// Large-`n` approximation of the mean cosine between `N(c, I_n)` draws and
/// their mean: `‖c‖ / √(‖c‖² + n)`.
pub fn mean_cosine_anchor(center: &[f64]) -> f64 {
    let c2: f64 = center.iter().map(|x| x * x).sum();
    c2.sqrt() / (c2 + center.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_scale_repeats_mean() {
        let spec = SyntheticSpec {
            dim: 3,
            count: 4,
            mean: vec![1.0, -2.0, 0.5],
            scale: Scale::Diagonal(vec![0.0; 3]),
            seed: 1,
            modality: Modality::Image,
        };
        let s = generate_gaussian(&spec).unwrap();
        assert!(s.rows().all(|r| r == [1.0, -2.0, 0.5]));
    }

    #[test]
    fn same_seed_bit_identical() {
        let spec = SyntheticSpec::isotropic(vec![0.0; 16], 50, 77, Modality::Text);
        let a = generate_gaussian(&spec).unwrap();
        let b = generate_gaussian(&spec).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = generate_gaussian(&SyntheticSpec { seed: 78, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn factor_scale_applies_matrix() {
        let spec = SyntheticSpec {
            dim: 2,
            count: 3,
            mean: vec![0.0, 0.0],
            scale: Scale::Factor(vec![vec![1.0, 0.0], vec![1.0, 0.0]]),
            seed: 4,
            modality: Modality::Other,
        };
        let s = generate_gaussian(&spec).unwrap();
        assert!(s.rows().all(|r| r[0] == r[1]));
    }

    #[test]
    fn invalid_specs() {
        let mut spec = SyntheticSpec::isotropic(vec![0.0; 2], 3, 0, Modality::Other);
        spec.scale = Scale::Factor(vec![vec![f64::NAN, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(generate_gaussian(&spec), Err(Error::InvalidParameter(_))));
        spec.scale = Scale::Diagonal(vec![1.0, -1.0]);
        assert!(generate_gaussian(&spec).is_err());
        spec.scale = Scale::Diagonal(vec![1.0]);
        assert!(matches!(generate_gaussian(&spec), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = SyntheticSpec {
            dim: 2,
            count: 3,
            mean: vec![1.0, 2.0],
            scale: Scale::Factor(vec![vec![1.0, 0.0], vec![0.5, 1.0]]),
            seed: 11,
            modality: Modality::Image,
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: SyntheticSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn paired_duplicates_are_labelled() {
        let si = SyntheticSpec::isotropic(vec![0.0; 4], 10, 0, Modality::Image);
        let st = SyntheticSpec { modality: Modality::Text, ..si.clone() };
        let p = generate_paired(&si, &st, 0.9, 3, 5).unwrap();
        let ids = p.images().ids().unwrap();
        assert_eq!(ids.iter().filter(|id| id.contains("-dup-")).count(), 3);
        assert!(ids[..7].iter().all(|id| !id.contains("-dup-")));
        assert!(matches!(generate_paired(&si, &st, 0.9, 10, 5), Err(Error::InvalidParameter(_))));
        assert!(matches!(generate_paired(&si, &st, 1.5, 0, 5), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn coupling_one_gives_identical_pairs_for_identical_specs() {
        let si = SyntheticSpec::isotropic(vec![0.0; 4], 10, 0, Modality::Image);
        let st = SyntheticSpec { modality: Modality::Text, ..si.clone() };
        let p = generate_paired(&si, &st, 1.0, 0, 5).unwrap();
        assert_eq!(p.images().data(), p.texts().data());
    }

    #[test]
    fn blur_demo_tiny() {
        let d = blur_demo(4, 3, &[0.0; 4], 1, 5).unwrap();
        assert_eq!(d.hist_mean_sim.total(), 3);
        assert_eq!(d.hist_far_sim.total(), 2);
        assert!(d.far_index < 3);
        assert!(matches!(blur_demo(4, 2, &[0.0; 4], 1, 5), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn anchor_value() {
        let mut c = vec![0.0; 512];
        c[..3].copy_from_slice(&[10.0, 5.0, 5.0]);
        assert!((mean_cosine_anchor(&c) - 150f64.sqrt() / 662f64.sqrt()).abs() < 1e-15);
    }
}
