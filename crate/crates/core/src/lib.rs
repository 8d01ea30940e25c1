//! Geometry of raw (unnormalized) contrastive image/text embeddings.
//!
//! Embeddings are held as [`EmbeddingSet`]s in `f64`, read from and written to
//! the `EMB1` binary format. On top of that sit per-modality moments and
//! feature scores ([`stats`]), ZCA whitening and the chi reference
//! ([`whitening`]), conformity and its estimate ([`conformity`]), the NT-Xent
//! loss and its mean-shift sweeps ([`contrastive`]), a linear separability
//! check ([`classifier`]), (v)SLERP ([`interpolation`]) and seeded synthetic
//! data ([`synthetic`]).

pub mod classifier;
pub mod conformity;
pub mod contrastive;
pub mod error;
pub mod histogram;
pub mod interpolation;
pub mod linalg;
pub mod rng;
pub mod stats;
pub mod store;
pub mod synthetic;
pub mod whitening;

pub use classifier::{
    evaluate, evaluate_on_sets, top_separable_features, train_linear, train_on_sets, Confusion, Evaluation,
    LinearModel, Standardization,
};
pub use conformity::{
    conformity, conformity_kl_sweep, conformity_report, cosines_to_mean, estimated_conformity, fit_estimator,
    ConformityReport, EstimatorFit, KlDirection, KlPoint,
};
pub use contrastive::{
    alpha_sweep, classify_pairs, clip_loss, clip_loss_batched, clip_loss_with, CorrectnessRule, LossBreakdown,
};
pub use error::{Error, ErrorKind, Result};
pub use histogram::{histogram, histogram_kl, Histogram};
pub use interpolation::{slerp, vslerp};
pub use stats::{
    compute_stats, norm_summary, odd, separability, shell_rel_error, thin_shell_report, ModalityStats, NormSummary, Separability,
    ThinShellReport,
};
pub use store::{
    decode_emb, encode_emb, import_csv, load_emb, pair, save_emb, EmbeddingSet, Modality, PairedEmbeddings,
    ShiftTarget,
};
pub use synthetic::{blur_demo, generate_gaussian, generate_paired, BlurDemo, Scale, SyntheticSpec};
pub use whitening::{
    apply_whitening, chi_reference, fit_whitening, fit_whitening_auto, predicted_norm_std, whitened_norm_check, ChiReference,
    WhitenedNormCheck, WhiteningTransform,
};
