use clipgeom_core::interpolation::{angle, slerp, vslerp};
use clipgeom_core::*;
use proptest::prelude::*;

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, dim).prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rows(count: std::ops::Range<usize>, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(vector(dim), count)
}

fn not_antipodal(a: &[f64], b: &[f64]) -> bool {
    angle(a, b).map(|w| w < std::f64::consts::PI - 1e-3).unwrap_or(false)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn slerp_endpoints_and_symmetry(a in vector(5), b in vector(5), t in 0.0f64..=1.0) {
        prop_assume!(not_antipodal(&a, &b));
        prop_assert_eq!(slerp(&a, &b, 0.0).unwrap(), a.clone());
        prop_assert_eq!(slerp(&a, &b, 1.0).unwrap(), b.clone());
        let fwd = slerp(&a, &b, t).unwrap();
        let back = slerp(&b, &a, 1.0 - t).unwrap();
        for (x, y) in fwd.iter().zip(&back) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn slerp_keeps_unit_norm(a in vector(8), b in vector(8), t in 0.0f64..=1.0) {
        prop_assume!(not_antipodal(&a, &b));
        let ua: Vec<f64> = a.iter().map(|x| x / norm(&a)).collect();
        let ub: Vec<f64> = b.iter().map(|x| x / norm(&b)).collect();
        prop_assert!((norm(&slerp(&ua, &ub, t).unwrap()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn vslerp_is_shifted_slerp(
        a in vector(4), b in vector(4), m in vector(4),
        t in 0.0f64..=1.0, alpha in -2.0f64..2.0,
    ) {
        let shift = |v: &[f64]| -> Vec<f64> { v.iter().zip(&m).map(|(x, c)| x - alpha * c).collect() };
        let (sa, sb) = (shift(&a), shift(&b));
        prop_assume!(norm(&sa) > 1e-3 && norm(&sb) > 1e-3 && not_antipodal(&sa, &sb));
        let v = vslerp(&a, &b, t, alpha, &m).unwrap();
        let s = slerp(&sa, &sb, t).unwrap();
        for ((x, y), c) in v.iter().zip(&s).zip(&m) {
            prop_assert!(((x - alpha * c) - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
        prop_assert_eq!(vslerp(&a, &b, 0.0, alpha, &m).unwrap(), a.clone());
        prop_assert_eq!(vslerp(&a, &b, 1.0, alpha, &m).unwrap(), b.clone());
        prop_assert_eq!(vslerp(&a, &b, t, 0.0, &m).unwrap(), slerp(&a, &b, t).unwrap());
    }

    #[test]
    fn conformity_in_range_and_scale_free(rs in rows(2..20, 3), j in 0usize..20, c in 0.01f64..100.0) {
        let set = EmbeddingSet::from_rows(Modality::Image, &rs).unwrap();
        let base = conformity(&set).unwrap();
        prop_assert!(base.iter().all(|v| (-1.0..=1.0).contains(v)));
        let j = j % rs.len();
        let mut scaled = rs.clone();
        scaled[j].iter_mut().for_each(|v| *v *= c);
        let other = conformity(&EmbeddingSet::from_rows(Modality::Image, &scaled).unwrap()).unwrap();
        for (x, y) in base.iter().zip(&other) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn report_estimate_is_exact_affine(rs in rows(3..30, 4)) {
        let set = EmbeddingSet::from_rows(Modality::Text, &rs).unwrap();
        prop_assume!(norm(&set.mean()) > 1e-6);
        if let Ok(r) = conformity_report(&set, None) {
            for j in 0..rs.len() {
                prop_assert_eq!(r.estimate[j], r.a * r.cosines_to_mean[j] + r.b);
                prop_assert!((-1.0..=1.0).contains(&r.cosines_to_mean[j]));
            }
            let resid: f64 = r.conformity.iter().zip(&r.cosines_to_mean)
                .map(|(c, x)| (c - r.a * x - r.b) * x).sum();
            prop_assert!(resid.abs() < 1e-9);
        }
    }

    #[test]
    fn loss_identity_and_tau_free_classification(
        ims in rows(2..24, 6), seed in any::<u64>(), tau in 0.005f64..2.0,
    ) {
        let mut src = rng::NormalSource::new(seed);
        let txs: Vec<Vec<f64>> = ims.iter().map(|r| r.iter().map(|x| x + src.normal()).collect()).collect();
        prop_assume!(txs.iter().all(|r| norm(r) > 1e-3));
        let p = pair(
            EmbeddingSet::from_rows(Modality::Image, &ims).unwrap(),
            EmbeddingSet::from_rows(Modality::Text, &txs).unwrap(),
        ).unwrap();
        let b = clip_loss(&p, tau).unwrap();
        prop_assert!(b.total >= 0.0);
        prop_assert!(((b.alignment + b.uniformity) - b.total).abs() <= 1e-9 * b.total.abs().max(1e-300) + 1e-12);
        let other = clip_loss(&p, tau * 3.0).unwrap();
        prop_assert_eq!(b.accuracy, other.accuracy);
    }

    #[test]
    fn prediction_ignores_positive_rescaling(
        w in prop::collection::vec(-3.0f64..3.0, 3), bias in -3.0f64..3.0,
        x in prop::collection::vec(-3.0f64..3.0, 3), c in 0.01f64..100.0,
    ) {
        let model = |w: Vec<f64>, b: f64| LinearModel {
            feature_indices: vec![0, 1, 2],
            standardization: Standardization { mean: vec![0.0; 3], std: vec![1.0; 3] },
            weights: w,
            bias: b,
            margin: 0.0,
            train_accuracy: 0.0,
            lambda: 1e-4,
            epochs: 1,
            seed: 0,
        };
        let a = model(w.clone(), bias);
        let b = model(w.iter().map(|v| v * c).collect(), bias * c);
        let d = a.decision(&x);
        prop_assume!(d.abs() > 1e-9);
        prop_assert_eq!(a.predict(&x), b.predict(&x));
    }

    #[test]
    fn histogram_masses_sum_to_one(values in prop::collection::vec(-50.0f64..50.0, 1..200), bins in 1usize..40) {
        let h = histogram(&values, bins, None).unwrap();
        prop_assert_eq!(h.total(), values.len() as u64);
        prop_assert!(h.edges().windows(2).all(|e| e[1] > e[0]));
        let area: f64 = h.edges().windows(2).zip(h.densities()).map(|(e, d)| (e[1] - e[0]) * d).sum();
        prop_assert!((area - 1.0).abs() < 1e-9);
        prop_assert!(histogram_kl(&h, &h).unwrap().abs() < 1e-9);
    }

    #[test]
    fn top_features_follow_scores(scores in prop::collection::vec(0.0f64..5.0, 1..30), k in 1usize..30) {
        let k = k.min(scores.len());
        let top = classifier::top_k(&scores, k).unwrap();
        prop_assert_eq!(top.len(), k);
        for w in top.windows(2) {
            prop_assert!(scores[w[0]] > scores[w[1]] || (scores[w[0]] == scores[w[1]] && w[0] < w[1]));
        }
        let cutoff = scores[top[k - 1]];
        for (l, s) in scores.iter().enumerate() {
            if !top.contains(&l) {
                prop_assert!(*s <= cutoff);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Separable with margin γ, radius R: the budget 10·(R/γ)² epochs reaches
    /// full training accuracy.
    #[test]
    fn pegasos_separates_within_budget(seed in any::<u64>(), gap in 1.0f64..3.0) {
        let mut src = rng::NormalSource::new(seed);
        let mut draw = |sign: f64| -> Vec<Vec<f64>> {
            (0..40).map(|_| {
                let u = src.uniform();
                let v = 2.0 * src.uniform() - 1.0;
                vec![sign * (gap + u), v]
            }).collect()
        };
        let pos = draw(1.0);
        let neg = draw(-1.0);
        let radius = pos.iter().chain(&neg).map(|r| norm(r)).fold(0.0, f64::max);
        let epochs = (10.0 * (radius / gap).powi(2)).ceil() as usize;
        let model = train_linear(&pos, &neg, 1e-4, epochs, seed).unwrap();
        prop_assert_eq!(model.train_accuracy, 1.0);
        prop_assert!(model.margin > 0.0);
        let again = train_linear(&pos, &neg, 1e-4, epochs, seed).unwrap();
        prop_assert_eq!(model, again);
    }
}
