//! Consistency of the MS-COCO ViT-B/32 reference statistics with the formulas
//! implemented here. The embeddings themselves are not shipped, so these
//! checks run the library formulas on the reported summary numbers.

use clipgeom_core::*;

#[test]
fn image_norm_shell() {
    let (mu, var, sqrt_trace) = (7.5873, 0.1914, 7.6007);
    assert!((mu * mu - 57.5671f64).abs() < 1e-3);
    assert!(mu * mu > 100.0 * var);
    let rms = (mu * mu + var).sqrt();
    // the reported √trace agrees with √(μ² + var) to about 1e-4 relative
    assert!((rms - sqrt_trace).abs() / sqrt_trace < 2e-4);
    assert!((shell_rel_error(mu, var) - 0.0017).abs() < 1e-4);
    assert!(((sqrt_trace - mu) / mu - 0.0018).abs() < 5e-5);
}

#[test]
fn whitened_norm_means() {
    let sqrt_n = 512f64.sqrt();
    assert!((sqrt_n - 22.627).abs() < 1e-3);
    for (mean_norm, rel) in [(22.261, 0.016), (22.144, 0.021)] {
        assert!(((sqrt_n - mean_norm) / sqrt_n - rel).abs() < 5e-4);
    }
}

#[test]
fn whitened_norm_spread() {
    let (image, flagged) = predicted_norm_std(512, 22.261);
    assert!(!flagged);
    assert!((image - 4.056).abs() < 1e-3);
    assert!(((4.056 - 4.044f64) / 4.056 - 0.003).abs() < 5e-4);
    // the text prediction recomputed from the rounded mean is 4.652, not 4.646
    let (text, _) = predicted_norm_std(512, 22.144);
    assert!((text - 4.646).abs() / 4.646 < 2e-3);
    assert!(((4.646 - 4.641f64) / 4.646 - 0.001).abs() < 5e-4);
}

#[test]
fn shell_width_against_chi() {
    let chi = chi_reference(512).unwrap();
    assert!((chi.std - whitening::CHI_STD_LIMIT).abs() < 1e-3);
    // measured spread is 8–9× the half-unit reading and 5.7–6.6× the chi value
    for (measured, half_ratio, chi_ratio) in [(4.044f64, 8.1, 5.72), (4.641, 9.3, 6.56)] {
        assert!((measured / 0.5 - half_ratio).abs() < 0.05);
        assert!((measured / chi.std - chi_ratio).abs() < 0.02);
    }
}

#[test]
fn estimator_coefficients_are_affine_maps_of_cosine() {
    // with the reported coefficients a cosine of 0 maps to b and 1 to a + b
    for (a, b) in [(1.461, -0.002), (1.411, -0.008)] {
        let s = EmbeddingSet::from_rows(Modality::Image, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let est = estimated_conformity(&s, &[1.0, 0.0], a, b).unwrap();
        assert_eq!(est[0], a + b);
        assert_eq!(est[1], b);
    }
}
