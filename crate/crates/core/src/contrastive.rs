//! NT-Xent (CLIP) loss on a paired batch, its alignment/uniformity
//! decomposition, the correct/misclassified split and α-shift sweeps.
//!
//! With unit rows, `S[j][k] = t̄_j · ī_k / τ` (text `j` against image `k`).
//! Instance `j` contributes `ℓ_j = −½(row_j + col_j)` where
//! `row_j = S[j][j] − LSE_k S[j][k]` and `col_j = S[j][j] − LSE_k S[k][j]`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::rng::NormalSource;
use crate::store::{EmbeddingSet, PairedEmbeddings, ShiftTarget};

/// Temperature matching a logit scale of 100.
pub const DEFAULT_TAU: f64 = 0.01;

/// Which top-1 retrievals must hit the positive for an instance to count
/// as correctly classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectnessRule {
    /// Text→image and image→text.
    #[default]
    Symmetric,
    TextToImage,
    ImageToText,
}

impl CorrectnessRule {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrectnessRule::Symmetric => "symmetric",
            CorrectnessRule::TextToImage => "text-to-image",
            CorrectnessRule::ImageToText => "image-to-text",
        }
    }
}

impl std::str::FromStr for CorrectnessRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(CorrectnessRule::Symmetric),
            "text-to-image" => Ok(CorrectnessRule::TextToImage),
            "image-to-text" => Ok(CorrectnessRule::ImageToText),
            other => Err(Error::InvalidParameter(format!("unknown correctness rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// `−mean_j S[j][j]`, the negated alignment term.
    pub alignment: f64,
    /// `mean_k ½(LSE_j S[j][k] + LSE_j S[k][j])`.
    pub uniformity: f64,
    /// Mean instance loss over correctly classified pairs, if any.
    pub loss_correct: Option<f64>,
    /// Mean instance loss over misclassified pairs, if any.
    pub loss_misclassified: Option<f64>,
    pub accuracy: f64,
    pub count: usize,
    pub tau: f64,
    pub alpha: f64,
    pub shift_target: Option<ShiftTarget>,
    pub rule: CorrectnessRule,
}

fn unit_matrix(set: &EmbeddingSet) -> Result<DMatrix<f64>> {
    let n = set.dim();
    let mut data = Vec::with_capacity(set.data().len());
    for (j, row) in set.rows().enumerate() {
        let r = norm(row);
        if r == 0.0 {
            return Err(Error::ZeroNorm { row: j });
        }
        data.extend(row.iter().map(|v| v / r));
    }
    Ok(DMatrix::from_row_slice(set.count(), n, &data))
}

/// Cosine matrix `C[j][k] = cos(text_j, image_k)`.
pub fn cosine_matrix(pair: &PairedEmbeddings) -> Result<DMatrix<f64>> {
    let t = unit_matrix(pair.texts())?;
    let i = unit_matrix(pair.images())?;
    Ok(t * i.transpose())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Index of the maximum, ties to the lowest index.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, v) in values.enumerate() {
        if v > best.1 {
            best = (k, v);
        }
    }
    best.0
}

fn classify_from(cos: &DMatrix<f64>, rule: CorrectnessRule) -> Vec<bool> {
    let m = cos.nrows();
    (0..m)
        .into_par_iter()
        .map(|j| {
            let t2i = || argmax(cos.row(j).iter().copied()) == j;
            let i2t = || argmax(cos.column(j).iter().copied()) == j;
            match rule {
                CorrectnessRule::Symmetric => t2i() && i2t(),
                CorrectnessRule::TextToImage => t2i(),
                CorrectnessRule::ImageToText => i2t(),
            }
        })
        .collect()
}

/// Marks pair `j` correct when the top-1 retrievals required by `rule` return
/// `j`. The temperature plays no role: it does not change any argmax.
pub fn classify_pairs(pair: &PairedEmbeddings, rule: CorrectnessRule) -> Result<Vec<bool>> {
    Ok(classify_from(&cosine_matrix(pair)?, rule))
}

/// Per-instance losses `ℓ_j` of the NT-Xent objective.
pub fn instance_losses(pair: &PairedEmbeddings, tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    let cos = cosine_matrix(pair)?;
    Ok(instance_losses_from(&cos, tau))
}

fn instance_losses_from(cos: &DMatrix<f64>, tau: f64) -> Vec<f64> {
    let m = cos.nrows();
    (0..m)
        .into_par_iter()
        .map(|j| {
            let diag = cos[(j, j)] / tau;
            let row = diag - log_sum_exp(cos.row(j).iter().map(|c| c / tau));
            let col = diag - log_sum_exp(cos.column(j).iter().map(|c| c / tau));
            -0.5 * (row + col)
        })
        .collect()
}

/// NT-Xent loss with the symmetric correctness rule.
pub fn clip_loss(pair: &PairedEmbeddings, tau: f64) -> Result<LossBreakdown> {
    clip_loss_with(pair, tau, CorrectnessRule::Symmetric)
}

pub fn clip_loss_with(pair: &PairedEmbeddings, tau: f64, rule: CorrectnessRule) -> Result<LossBreakdown> {
    check_tau(tau)?;
    let cos = cosine_matrix(pair)?;
    Ok(breakdown(&cos, tau, rule))
}

fn breakdown(cos: &DMatrix<f64>, tau: f64, rule: CorrectnessRule) -> LossBreakdown {
    let m = cos.nrows();
    let losses = instance_losses_from(cos, tau);
    let total = losses.iter().sum::<f64>() / m as f64;

    // alignment and uniformity accumulated separately from the instance terms
    let alignment = -(0..m).map(|j| cos[(j, j)] / tau).sum::<f64>() / m as f64;
    let uniformity = (0..m)
        .into_par_iter()
        .map(|k| {
            0.5 * log_sum_exp(cos.column(k).iter().map(|c| c / tau))
                + 0.5 * log_sum_exp(cos.row(k).iter().map(|c| c / tau))
        })
        .sum::<f64>()
        / m as f64;

    let correct = classify_from(cos, rule);
    let (mut sum_ok, mut n_ok, mut sum_bad, mut n_bad) = (0.0, 0usize, 0.0, 0usize);
    for (l, ok) in losses.iter().zip(&correct) {
        if *ok {
            sum_ok += l;
            n_ok += 1;
        } else {
            sum_bad += l;
            n_bad += 1;
        }
    }
    LossBreakdown {
        total,
        alignment,
        uniformity,
        loss_correct: (n_ok > 0).then(|| sum_ok / n_ok as f64),
        loss_misclassified: (n_bad > 0).then(|| sum_bad / n_bad as f64),
        accuracy: n_ok as f64 / m as f64,
        count: m,
        tau,
        alpha: 0.0,
        shift_target: None,
        rule,
    }
}

/// Averages breakdowns over seeded shuffled mini-batches of `batch_size`
/// pairs (the last batch may be smaller). Fields are weighted by batch size;
/// the partition losses by their own counts.
pub fn clip_loss_batched(
    pair: &PairedEmbeddings,
    tau: f64,
    rule: CorrectnessRule,
    batch_size: usize,
    seed: u64,
) -> Result<LossBreakdown> {
    check_tau(tau)?;
    if batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be positive".into()));
    }
    let m = pair.count();
    let mut order: Vec<usize> = (0..m).collect();
    NormalSource::new(seed).shuffle(&mut order);

    let mut acc = Accumulator::default();
    for chunk in order.chunks(batch_size) {
        let b = clip_loss_with(&pair.select(chunk)?, tau, rule)?;
        acc.add(&b);
    }
    Ok(acc.finish(m, tau, rule))
}

#[derive(Default)]
struct Accumulator {
    total: f64,
    alignment: f64,
    uniformity: f64,
    ok_sum: f64,
    ok_n: f64,
    bad_sum: f64,
    bad_n: f64,
}

impl Accumulator {
    fn add(&mut self, b: &LossBreakdown) {
        let w = b.count as f64;
        self.total += w * b.total;
        self.alignment += w * b.alignment;
        self.uniformity += w * b.uniformity;
        let n_ok = (b.accuracy * w).round();
        if let Some(l) = b.loss_correct {
            self.ok_sum += l * n_ok;
            self.ok_n += n_ok;
        }
        if let Some(l) = b.loss_misclassified {
            self.bad_sum += l * (w - n_ok);
            self.bad_n += w - n_ok;
        }
    }

    fn finish(self, m: usize, tau: f64, rule: CorrectnessRule) -> LossBreakdown {
        let w = m as f64;
        LossBreakdown {
            total: self.total / w,
            alignment: self.alignment / w,
            uniformity: self.uniformity / w,
            loss_correct: (self.ok_n > 0.0).then(|| self.ok_sum / self.ok_n),
            loss_misclassified: (self.bad_n > 0.0).then(|| self.bad_sum / self.bad_n),
            accuracy: self.ok_n / w,
            count: m,
            tau,
            alpha: 0.0,
            shift_target: None,
            rule,
        }
    }
}

/// Loss breakdown after shifting the targeted modality(ies) by `−α·m` for
/// each α. Modality means come from the unshifted pair.
pub fn alpha_sweep(
    pair: &PairedEmbeddings,
    alphas: &[f64],
    target: ShiftTarget,
    tau: f64,
    rule: CorrectnessRule,
) -> Result<Vec<LossBreakdown>> {
    check_tau(tau)?;
    let means = pair.means();
    alphas
        .iter()
        .map(|&alpha| {
            let shifted = pair.shifted(alpha, target, &means)?;
            let mut b = clip_loss_with(&shifted, tau, rule)?;
            b.alpha = alpha;
            b.shift_target = Some(target);
            Ok(b)
        })
        .collect()
}
