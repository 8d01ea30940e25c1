//! Seeded fixtures shared by the benchmarks.

use clipgeom_core::{generate_gaussian, generate_paired, EmbeddingSet, Modality, PairedEmbeddings, SyntheticSpec};

/// `count` rows of `N(mean, I)` with the mean on the first axis.
pub fn gaussian(dim: usize, count: usize, offset: f64, seed: u64) -> EmbeddingSet {
    let mut mean = vec![0.0; dim];
    mean[0] = offset;
    generate_gaussian(&SyntheticSpec::isotropic(mean, count, seed, Modality::Other)).expect("valid spec")
}

/// Image/text pairs with separated modality means and coupling 0.9.
pub fn paired(dim: usize, count: usize, seed: u64) -> PairedEmbeddings {
    let mut mi = vec![0.0; dim];
    mi[0] = 3.0;
    let mut mt = vec![0.0; dim];
    mt[1] = 3.0;
    generate_paired(
        &SyntheticSpec::isotropic(mi, count, seed, Modality::Image),
        &SyntheticSpec::isotropic(mt, count, seed, Modality::Text),
        0.9,
        0,
        seed,
    )
    .expect("valid spec")
}
