//! Top separable features and a minimal linear SVM (Pegasos) for checking
//! that image and text embeddings are linearly separable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::rng::NormalSource;
use crate::stats::{descending_order, separability, ModalityStats};
use crate::store::EmbeddingSet;

pub const DEFAULT_LAMBDA: f64 = 1e-4;
pub const DEFAULT_EPOCHS: usize = 200;

/// Indices of the `k` largest scores, descending, ties toward the lower index.
pub fn top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(Error::InvalidParameter(format!(
            "k must lie in 1..={}, got {k}",
            scores.len()
        )));
    }
    let mut order = descending_order(scores);
    order.truncate(k);
    Ok(order)
}

pub fn top_separable_features(stats_i: &ModalityStats, stats_t: &ModalityStats, k: usize) -> Result<Vec<usize>> {
    top_k(&separability(stats_i, stats_t)?.scores, k)
}

/// Per-feature affine map `x ↦ (x − mean) / std` fitted on the training pool.
/// Constant features keep `std = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    fn fit(rows: &[&[f64]], width: usize) -> Self {
        let m = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for r in rows {
            mean.iter_mut().zip(r.iter()).for_each(|(s, v)| *s += v);
        }
        mean.iter_mut().for_each(|s| *s /= m);
        let mut var = vec![0.0; width];
        for r in rows {
            for l in 0..width {
                let d = r[l] - mean[l];
                var[l] += d * d;
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / m).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub feature_indices: Vec<usize>,
    pub standardization: Standardization,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Smallest `y·(w·x̃ + b)` over the training data, in standardized units.
    pub margin: f64,
    pub train_accuracy: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl LinearModel {
    pub fn width(&self) -> usize {
        self.weights.len()
    }

    /// `w·x̃ + b` for an already restricted feature row.
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, &self.standardization.apply(x)) + self.bias
    }

    /// Positive class iff the decision value is strictly positive.
    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }

    /// Restricts a full embedding row to the model's features.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.feature_indices.iter().map(|&l| full[l]).collect()
    }
}

fn check_width(rows: &[Vec<f64>], width: usize) -> Result<()> {
    for r in rows {
        if r.len() != width {
            return Err(Error::DimMismatch {
                expected: width,
                found: r.len(),
            });
        }
    }
    Ok(())
}

/// Trains a hinge-loss SVM with the Pegasos schedule `η_t = 1/(λt)`.
///
/// Each epoch visits all samples in an order shuffled from `seed`. The bias is
/// learned as the weight of a constant feature and is regularized with the
/// rest. Features are indexed `0..k`; see [`train_on_sets`] for embedding
/// columns.
pub fn train_linear(
    features_pos: &[Vec<f64>],
    features_neg: &[Vec<f64>],
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearModel> {
    if features_pos.is_empty() || features_neg.is_empty() {
        return Err(Error::Empty("both classes need at least one sample".into()));
    }
    let width = features_pos[0].len();
    if width == 0 {
        return Err(Error::InvalidParameter("feature width must be positive".into()));
    }
    check_width(features_pos, width)?;
    check_width(features_neg, width)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if epochs == 0 {
        return Err(Error::InvalidParameter("epochs must be positive".into()));
    }

    let pool: Vec<&[f64]> = features_pos
        .iter()
        .chain(features_neg)
        .map(|r| r.as_slice())
        .collect();
    let standardization = Standardization::fit(&pool, width);
    let samples: Vec<(Vec<f64>, f64)> = features_pos
        .iter()
        .map(|r| (r, 1.0))
        .chain(features_neg.iter().map(|r| (r, -1.0)))
        .map(|(r, y)| {
            let mut x = standardization.apply(r);
            x.push(1.0);
            (x, y)
        })
        .collect();

    let mut w = vec![0.0; width + 1];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = NormalSource::new(seed);
    let mut t = 0u64;
    for _ in 0..epochs {
        rng.shuffle(&mut order);
        for &j in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let (x, y) = &samples[j];
            let active = y * dot(&w, x) < 1.0;
            let decay = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= decay);
            if active {
                w.iter_mut().zip(x).for_each(|(v, xi)| *v += eta * y * xi);
            }
        }
    }

    let bias = w.pop().unwrap_or(0.0);
    let (mut margin, mut hits) = (f64::INFINITY, 0usize);
    for (x, y) in &samples {
        let f = y * (dot(&w, &x[..width]) + bias);
        margin = margin.min(f);
        if f > 0.0 {
            hits += 1;
        }
    }
    Ok(LinearModel {
        feature_indices: (0..width).collect(),
        standardization,
        weights: w,
        bias,
        margin,
        train_accuracy: hits as f64 / samples.len() as f64,
        lambda,
        epochs,
        seed,
    })
}

/// Counts with the positive class first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_neg: usize,
    pub false_pos: usize,
    pub true_neg: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: Confusion,
}

pub fn evaluate(model: &LinearModel, features_pos: &[Vec<f64>], features_neg: &[Vec<f64>]) -> Result<Evaluation> {
    check_width(features_pos, model.width())?;
    check_width(features_neg, model.width())?;
    let total = features_pos.len() + features_neg.len();
    if total == 0 {
        return Err(Error::Empty("nothing to evaluate".into()));
    }
    let true_pos = features_pos.iter().filter(|x| model.predict(x)).count();
    let false_pos = features_neg.iter().filter(|x| model.predict(x)).count();
    let confusion = Confusion {
        true_pos,
        false_neg: features_pos.len() - true_pos,
        false_pos,
        true_neg: features_neg.len() - false_pos,
    };
    Ok(Evaluation {
        accuracy: (confusion.true_pos + confusion.true_neg) as f64 / total as f64,
        confusion,
    })
}

/// Rows of `set` restricted to `indices`.
pub fn restrict_rows(set: &EmbeddingSet, indices: &[usize]) -> Result<Vec<Vec<f64>>> {
    if let Some(&bad) = indices.iter().find(|&&l| l >= set.dim()) {
        return Err(Error::InvalidParameter(format!(
            "feature index {bad} out of range for dimension {}",
            set.dim()
        )));
    }
    let mut seen = indices.to_vec();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("feature indices must be unique".into()));
    }
    Ok(set
        .rows()
        .map(|r| indices.iter().map(|&l| r[l]).collect())
        .collect())
}

/// Images are the positive class.
pub fn train_on_sets(
    images: &EmbeddingSet,
    texts: &EmbeddingSet,
    indices: &[usize],
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearModel> {
    let pos = restrict_rows(images, indices)?;
    let neg = restrict_rows(texts, indices)?;
    let mut model = train_linear(&pos, &neg, lambda, epochs, seed)?;
    model.feature_indices = indices.to_vec();
    Ok(model)
}

pub fn evaluate_on_sets(model: &LinearModel, images: &EmbeddingSet, texts: &EmbeddingSet) -> Result<Evaluation> {
    evaluate(
        model,
        &restrict_rows(images, &model.feature_indices)?,
        &restrict_rows(texts, &model.feature_indices)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_examples() {
        assert_eq!(top_k(&[0.1, 5.0, 2.0], 2).unwrap(), vec![1, 2]);
        assert_eq!(top_k(&[1.0; 3], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(top_k(&[1.0, f64::INFINITY, 3.0], 1).unwrap(), vec![1]);
        assert!(top_k(&[1.0], 0).is_err());
        assert!(top_k(&[1.0], 2).is_err());
    }

    #[test]
    fn one_dimensional_separable() {
        let pos = vec![vec![2.0], vec![3.0]];
        let neg = vec![vec![-2.0], vec![-3.0]];
        let m = train_linear(&pos, &neg, DEFAULT_LAMBDA, DEFAULT_EPOCHS, 0).unwrap();
        assert_eq!(m.train_accuracy, 1.0);
        assert!(m.margin > 0.0);
        assert_eq!(evaluate(&m, &pos, &neg).unwrap().accuracy, m.train_accuracy);
    }

    #[test]
    fn xor_is_not_separable() {
        let pos = vec![vec![1.0, 1.0], vec![-1.0, -1.0]];
        let neg = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let m = train_linear(&pos, &neg, DEFAULT_LAMBDA, DEFAULT_EPOCHS, 3).unwrap();
        assert!(m.train_accuracy < 1.0);
        assert!(m.margin <= 0.0);
    }

    #[test]
    fn identical_classes_report_nonpositive_margin() {
        let rows = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        let m = train_linear(&rows, &rows, DEFAULT_LAMBDA, 10, 0).unwrap();
        assert!(m.margin <= 0.0);
    }

    #[test]
    fn all_positive_model_on_balanced_data() {
        let m = LinearModel {
            feature_indices: vec![0],
            standardization: Standardization {
                mean: vec![0.0],
                std: vec![1.0],
            },
            weights: vec![0.0],
            bias: 1.0,
            margin: 0.0,
            train_accuracy: 0.0,
            lambda: DEFAULT_LAMBDA,
            epochs: 1,
            seed: 0,
        };
        let e = evaluate(&m, &[vec![1.0], vec![2.0]], &[vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(e.accuracy, 0.5);
        assert_eq!(
            e.confusion,
            Confusion {
                true_pos: 2,
                false_neg: 0,
                false_pos: 2,
                true_neg: 0
            }
        );
        assert!(matches!(evaluate(&m, &[vec![1.0, 2.0]], &[]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn deterministic_per_seed() {
        let pos = vec![vec![1.0, 0.3], vec![2.0, -0.1], vec![1.5, 0.8]];
        let neg = vec![vec![-1.0, 0.2], vec![-0.5, 0.1], vec![-2.0, -0.4]];
        let a = train_linear(&pos, &neg, 1e-3, 50, 11).unwrap();
        let b = train_linear(&pos, &neg, 1e-3, 50, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn restrict_validates_indices() {
        let s = EmbeddingSet::from_rows(crate::store::Modality::Image, &[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(restrict_rows(&s, &[2, 0]).unwrap(), vec![vec![3.0, 1.0]]);
        assert!(restrict_rows(&s, &[3]).is_err());
        assert!(restrict_rows(&s, &[1, 1]).is_err());
    }
}
