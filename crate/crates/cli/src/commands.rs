use std::path::Path;

use clipgeom_core::classifier::{restrict_rows, top_k};
use clipgeom_core::histogram::shared_histograms;
use clipgeom_core::interpolation::{slerp, vslerp};
use clipgeom_core::linalg::{mean, norm, variance};
use clipgeom_core::rng::NormalSource;
use clipgeom_core::store::{encode_emb, import_csv};
use clipgeom_core::synthetic::{generate_paired_with_jitter, mean_cosine_anchor};
use clipgeom_core::whitening::{DEFAULT_RELATIVE_FLOOR, CHI_STD_LIMIT};
use clipgeom_core::*;
use serde_json::{json, Value};

use crate::args::*;
use crate::context::{parse_center, parse_grid, parse_indices, resolve, Context};
use crate::error::{CliError, CliResult};
use crate::output::{cell, csv_text, histogram_json, histogram_tsv, num, nums, opt_num, sibling, Artifact};

/// KL histogram range padding shared by feature-kl and kl-sweep.
const RANGE_PAD: f64 = clipgeom_core::conformity::SHARED_RANGE_PAD;

pub fn import_csv_cmd(a: &ImportCsv, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    ctx.read(&a.input)?;
    let modality: Modality = a.modality.parse()?;
    let set = import_csv(&a.input, modality, !a.no_header)?;
    Ok(vec![Artifact::raw(&a.out, encode_emb(&set)?)])
}

pub fn stats(a: &Stats, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let set = ctx.load(&a.input)?;
    let st = compute_stats(&set)?;
    let ns = norm_summary(&set)?;
    let mut body = json!({
        "modality": set.modality().as_str(),
        "count": st.count,
        "dim": st.dim(),
        "mean": nums(&st.mean),
        "std": nums(&st.std),
        "mu_norm": num(st.mu_norm),
        "var_norm": num(st.var_norm),
        "mean_sigma_ratio": num(st.mean_sigma_ratio),
        "mean_norm": num(norm(&st.mean)),
        "trace": num(st.trace()),
        "sqrt_trace": num(ns.sqrt_trace),
        "rel_error": num(ns.rel_error),
        "mean_sq_norm": num(ns.mean_sq_norm),
    });
    if a.covariance {
        let rows: Vec<Value> = (0..st.dim())
            .map(|r| nums(&st.cov.row(r).iter().copied().collect::<Vec<_>>()))
            .collect();
        body["covariance"] = Value::Array(rows);
    }
    Ok(vec![Artifact::report(&a.out, body, &a.out)])
}

pub fn sep(a: &Pair<SepExtra>, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let p = ctx.load_pair(&a.images, &a.texts)?;
    let si = compute_stats(p.images())?;
    let st = compute_stats(p.texts())?;
    let s = separability(&si, &st)?;
    let top: Vec<Value> = s
        .order
        .iter()
        .take(a.extra.top)
        .map(|&l| {
            json!({
                "feature": l,
                "score": num(s.scores[l]),
                "mean_image": num(si.mean[l]),
                "mean_text": num(st.mean[l]),
                "var_image": num(si.variance(l)),
                "var_text": num(st.variance(l)),
            })
        })
        .collect();
    let body = json!({"dim": si.dim(), "scores": nums(&s.scores), "order": s.order, "top": top});
    Ok(vec![Artifact::report(&a.out, body, &a.out)])
}

pub fn odd_cmd(a: &Odd, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let set = ctx.load(&a.input)?;
    let st = compute_stats(&set)?;
    let o = odd(&st.cov)?;
    let order = top_k(&o, o.len())?;
    let top: Vec<Value> = order
        .iter()
        .take(a.top)
        .map(|&l| json!({"feature": l, "odd": num(o[l])}))
        .collect();
    let body = json!({"dim": o.len(), "odd": nums(&o), "mean_odd": num(mean(&o)), "top": top});
    Ok(vec![Artifact::report(&a.out, body, &a.out)])
}

pub fn thin_shell(a: &ThinShell, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let set = ctx.load(&a.input)?;
    let r = thin_shell_report(&set, a.k)?;
    let ns = norm_summary(&set)?;
    let m = set.mean();
    let norms: Vec<f64> = set
        .rows()
        .map(|v| norm(&v.iter().zip(&m).map(|(x, c)| x - c).collect::<Vec<_>>()))
        .collect();
    let h = histogram(&norms, a.bins, None)?;
    let body = json!({
        "k": num(r.k),
        "mu_norm": num(r.mu_norm),
        "std_norm": num(r.std_norm),
        "var_norm": num(ns.var_norm),
        "sqrt_trace": num(ns.sqrt_trace),
        "rel_error": num(ns.rel_error),
        "min_centered_norm": num(r.min_centered_norm),
        "max_centered_norm": num(r.max_centered_norm),
        "frac_within_k_sigma": num(r.frac_within_k_sigma),
        "mass_near_mean": num(r.mass_near_mean),
        "near_mean_threshold": "mu_norm / 2",
        "histogram": histogram_json(&h),
    });
    Ok(vec![Artifact::report(&a.out, body, &a.out)])
}

pub fn feature_kl(a: &Pair<FeatureKlExtra>, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let p = ctx.load_pair(&a.images, &a.texts)?;
    let features = match &a.extra.features {
        Some(s) => parse_indices(s)?,
        None => (0..p.dim()).collect(),
    };
    if features.is_empty() {
        return Err(CliError::usage("no features selected"));
    }
    if let Some(&bad) = features.iter().find(|&&l| l >= p.dim()) {
        return Err(CliError::usage(format!("feature {bad} out of range for dimension {}", p.dim())));
    }
    let mut rows = Vec::with_capacity(features.len());
    let mut first = None;
    for &l in &features {
        let (hi, ht) = shared_histograms(&p.images().column(l), &p.texts().column(l), a.extra.bins, RANGE_PAD)?;
        rows.push(json!({
            "feature": l,
            "kl_image_text": num(histogram_kl(&hi, &ht)?),
            "kl_text_image": num(histogram_kl(&ht, &hi)?),
        }));
        if first.is_none() {
            first = Some((hi, ht));
        }
    }
    let body = json!({
        "bins": a.extra.bins,
        "range_pad_fraction": num(RANGE_PAD),
        "smoothing": num(histogram::KL_SMOOTHING),
        "features": rows,
    });
    let mut out = vec![Artifact::report(&a.out, body, &a.out)];
    if let (Some(path), Some((hi, ht))) = (&a.extra.hist_out, first) {
        let (di, dt) = (hi.densities(), ht.densities());
        let lines = (0..hi.bins()).map(|b| {
            vec![
                cell(Some(hi.edges()[b])),
                cell(Some(hi.edges()[b + 1])),
                hi.counts()[b].to_string(),
                ht.counts()[b].to_string(),
                cell(Some(di[b])),
                cell(Some(dt[b])),
            ]
        });
        let text = csv_text(
            &["edge_lo", "edge_hi", "count_image", "count_text", "density_image", "density_text"],
            lines,
            b'\t',
        );
        let text = format!("# feature: {}\n{text}", features[0]);
        out.push(Artifact::table(path, text, &a.out));
    }
    Ok(out)
}

fn fit(set: &EmbeddingSet, floor: Option<f64>) -> CliResult<WhiteningTransform> {
    Ok(match floor {
        Some(eps) => fit_whitening(set, eps)?,
        None => fit_whitening_auto(set)?,
    })
}

pub fn whiten(a: &Whiten, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let set = ctx.load(&a.input)?;
    let t = fit(&set, a.eigen_floor)?;
    let y = apply_whitening(&t, &set)?;
    let mut out = vec![Artifact::raw(&a.out, encode_emb(&y)?)];
    if let Some(path) = &a.transform_out {
        out.push(Artifact::raw(path, encode_emb(&t.matrix_as_set()?)?));
        let sidecar = json!({
            "dim": t.dim(),
            "mean": nums(&t.mean),
            "eigen_floor": num(t.eigen_floor),
            "eigen_floor_rule": if a.eigen_floor.is_some() { "absolute".to_string() } else { format!("{DEFAULT_RELATIVE_FLOOR:e} * max eigenvalue") },
        });
        out.push(Artifact::report(&sibling(path, ".json"), sidecar, &a.out));
    }
    Ok(out)
}

pub fn whiten_check(a: &WhitenCheck, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let mut set = ctx.load(&a.input)?;
    if a.fit {
        set = apply_whitening(&fit(&set, a.eigen_floor)?, &set)?;
    }
    let c = whitened_norm_check(&set)?;
    let chi = chi_reference(set.dim() as u64)?;
    let body = json!({
        "dim": set.dim(),
        "whitened_here": a.fit,
        "mean_norm": num(c.mean_norm),
        "std_norm": num(c.std_norm),
        "predicted_std": num(c.predicted_std),
        "predicted_std_clamped": c.predicted_std_clamped,
        "sqrt_n": num(c.sqrt_n),
        "rel_err_mean": num(c.rel_err_mean),
        "rel_err_std": opt_num(c.rel_err_std),
        "chi_mean": num(chi.mean),
        "chi_std": num(chi.std),
        "chi_std_limit": num(CHI_STD_LIMIT),
        "half_unit_std": num(0.5),
        "width_ratio_vs_chi": num(c.std_norm / chi.std),
        "width_ratio_vs_half": num(c.std_norm / 0.5),
    });
    Ok(vec![Artifact::report(&a.out, body, &a.out)])
}

pub fn chi_ref(a: &ChiRef, _ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let chi = chi_reference(a.n)?;
    let mut body = json!({
        "n": a.n,
        "mean": num(chi.mean),
        "std": num(chi.std),
        "sqrt_n": num((a.n as f64).sqrt()),
        "std_limit": num(CHI_STD_LIMIT),
        "half_unit_std": num(0.5),
    });
    if let Some(samples) = a.samples {
        if samples < 2 {
            return Err(CliError::usage("--samples must be at least 2"));
        }
        let mut src = NormalSource::new(a.seed);
        let mut z = vec![0.0; a.n as usize];
        let norms: Vec<f64> = (0..samples)
            .map(|_| {
                src.fill_normal(&mut z);
                norm(&z)
            })
            .collect();
        let (m, s) = (mean(&norms), variance(&norms).sqrt());
        body["monte_carlo"] = json!({
            "samples": samples,
            "seed": a.seed,
            "mean": num(m),
            "std": num(s),
            "rel_err_mean": num((m - chi.mean).abs() / chi.mean),
            "rel_err_std": num((s - chi.std).abs() / chi.std),
        });
    }
    Ok(vec![Artifact::report(&a.out, body, &a.out)])
}

fn summary(xs: &[f64]) -> Value {
    json!({
        "mean": num(mean(xs)),
        "std": num(variance(xs).sqrt()),
        "min": num(xs.iter().copied().fold(f64::INFINITY, f64::min)),
        "max": num(xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
    })
}

pub fn conformity_cmd(a: &Conformity, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let set = ctx.load(&a.input)?;
    let coefficients = a.a.zip(a.b);
    let r = conformity_report(&set, coefficients)?;
    let body = json!({
        "modality": set.modality().as_str(),
        "count": set.count(),
        "a": num(r.a),
        "b": num(r.b),
        "coefficients": if coefficients.is_some() { "given" } else { "least-squares" },
        "pearson_r": num(r.pearson_r),
        "conformity": summary(&r.conformity),
        "cosines_to_mean": summary(&r.cosines_to_mean),
        "estimate": summary(&r.estimate),
        "histogram": histogram_json(&histogram(&r.conformity, a.bins, None)?),
    });
    let mut out = vec![Artifact::report(&a.out, body, &a.out)];
    if let Some(path) = &a.instances_out {
        let ids = set.ids();
        let lines = (0..set.count()).map(|j| {
            vec![
                ids.map_or_else(|| j.to_string(), |ids| ids[j].clone()),
                cell(Some(r.conformity[j])),
                cell(Some(r.cosines_to_mean[j])),
                cell(Some(r.estimate[j])),
            ]
        });
        let text = csv_text(&["id", "C", "cos_to_mean", "C_hat"], lines, b'\t');
        out.push(Artifact::table(path, text, &a.out));
    }
    Ok(out)
}

pub fn fit_estimator_cmd(a: &SingleInput, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let set = ctx.load(&a.input)?;
    let c = conformity(&set)?;
    let cos = cosines_to_mean(&set, &set.mean())?;
    let f = fit_estimator(&c, &cos)?;
    let body = json!({
        "modality": set.modality().as_str(),
        "count": set.count(),
        "a": num(f.a),
        "b": num(f.b),
        "pearson_r": num(f.pearson_r),
    });
    Ok(vec![Artifact::report(&a.out, body, &a.out)])
}

pub fn kl_sweep(a: &Pair<KlSweepExtra>, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let p = ctx.load_pair(&a.images, &a.texts)?;
    let alphas = parse_grid(&a.extra.alphas)?;
    let target: ShiftTarget = a.extra.target.parse()?;
    let direction: KlDirection = a.extra.direction.parse()?;
    let sweep = conformity_kl_sweep(&p, &alphas, target, a.extra.bins, direction)?;
    let lines = sweep.iter().map(|pt| vec![cell(Some(pt.alpha)), cell(Some(pt.kl))]);
    let text = format!(
        "# direction: {}; target: {}; bins: {}; smoothing: {:e}\n{}",
        direction.as_str(),
        target.as_str(),
        a.extra.bins,
        histogram::KL_SMOOTHING,
        csv_text(&["alpha", "kl"], lines, b',')
    );
    Ok(vec![Artifact::table(&a.out, text, &a.out)])
}

fn breakdown_json(b: &LossBreakdown) -> Value {
    json!({
        "total": num(b.total),
        "alignment": num(b.alignment),
        "uniformity": num(b.uniformity),
        "loss_correct": opt_num(b.loss_correct),
        "loss_misclassified": opt_num(b.loss_misclassified),
        "accuracy": num(b.accuracy),
        "count": b.count,
        "tau": num(b.tau),
        "alpha": num(b.alpha),
        "shift_target": b.shift_target.map(|t| t.as_str()),
        "rule": b.rule.as_str(),
    })
}

pub fn loss(a: &Pair<LossExtra>, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let p = ctx.load_pair(&a.images, &a.texts)?;
    let e = &a.extra;
    let rule: CorrectnessRule = e.rule.parse()?;
    let target: ShiftTarget = e.target.parse()?;
    let shifted = p.shifted(e.alpha, target, &p.means())?;
    let mut b = match e.batch_size {
        Some(size) => clip_loss_batched(&shifted, e.tau, rule, size, e.seed)?,
        None => clip_loss_with(&shifted, e.tau, rule)?,
    };
    b.alpha = e.alpha;
    b.shift_target = Some(target);
    let mut body = breakdown_json(&b);
    body["batch_size"] = json!(e.batch_size.unwrap_or(p.count()));
    body["batch_seed"] = if e.batch_size.is_some() { json!(e.seed) } else { Value::Null };
    Ok(vec![Artifact::report(&a.out, body, &a.out)])
}

pub fn loss_sweep(a: &Pair<LossSweepExtra>, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let p = ctx.load_pair(&a.images, &a.texts)?;
    let e = &a.extra;
    let rule: CorrectnessRule = e.rule.parse()?;
    let target: ShiftTarget = e.target.parse()?;
    let alphas = parse_grid(&e.alphas)?;
    let sweep = alpha_sweep(&p, &alphas, target, e.tau, rule)?;
    let lines = sweep.iter().map(|b| {
        vec![
            cell(Some(b.alpha)),
            cell(Some(b.total)),
            cell(Some(b.alignment)),
            cell(Some(b.uniformity)),
            cell(b.loss_correct),
            cell(b.loss_misclassified),
            cell(Some(b.accuracy)),
        ]
    });
    let text = format!(
        "# tau: {}; target: {}; rule: {}; batch: all {} pairs\n{}",
        cell(Some(e.tau)),
        target.as_str(),
        rule.as_str(),
        p.count(),
        csv_text(
            &["alpha", "total", "alignment", "uniformity", "loss_correct", "loss_misclassified", "accuracy"],
            lines,
            b','
        )
    );
    Ok(vec![Artifact::table(&a.out, text, &a.out)])
}

pub fn classify(a: &Pair<RuleExtra>, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let p = ctx.load_pair(&a.images, &a.texts)?;
    let rule: CorrectnessRule = a.extra.rule.parse()?;
    let correct = classify_pairs(&p, rule)?;
    let n_ok = correct.iter().filter(|&&c| c).count();
    let label = |j: usize| -> Value {
        p.images()
            .ids()
            .map_or_else(|| json!(j), |ids| json!(ids[j]))
    };
    let missed: Vec<Value> = (0..correct.len()).filter(|&j| !correct[j]).map(label).collect();
    let body = json!({
        "rule": rule.as_str(),
        "count": correct.len(),
        "correct_count": n_ok,
        "accuracy": num(n_ok as f64 / correct.len() as f64),
        "correct": correct,
        "misclassified": missed,
    });
    Ok(vec![Artifact::report(&a.out, body, &a.out)])
}

pub fn top_features(a: &Pair<TopExtra>, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let p = ctx.load_pair(&a.images, &a.texts)?;
    let si = compute_stats(p.images())?;
    let st = compute_stats(p.texts())?;
    let top = top_separable_features(&si, &st, a.extra.k)?;
    let scores = separability(&si, &st)?.scores;
    let picked: Vec<f64> = top.iter().map(|&l| scores[l]).collect();
    let body = json!({"k": a.extra.k, "features": top, "scores": nums(&picked)});
    Ok(vec![Artifact::report(&a.out, body, &a.out)])
}

fn evaluation_json(e: &Evaluation) -> Value {
    json!({
        "accuracy": num(e.accuracy),
        "confusion": {
            "true_pos": e.confusion.true_pos,
            "false_neg": e.confusion.false_neg,
            "false_pos": e.confusion.false_pos,
            "true_neg": e.confusion.true_neg,
        },
    })
}

pub fn train_sep(a: &Pair<TrainExtra>, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let images = ctx.load(&a.images)?;
    let texts = ctx.load(&a.texts)?;
    let e = &a.extra;
    let features = match &e.features {
        Some(s) => parse_indices(s)?,
        None => top_separable_features(&compute_stats(&images)?, &compute_stats(&texts)?, e.k)?,
    };
    let model = train_on_sets(&images, &texts, &features, e.lambda, e.epochs, e.seed)?;
    let train = evaluate_on_sets(&model, &images, &texts)?;
    let test = match (&e.test_images, &e.test_texts) {
        (Some(ti), Some(tt)) => {
            let (ti, tt) = (ctx.load(ti)?, ctx.load(tt)?);
            Some(evaluate(
                &model,
                &restrict_rows(&ti, &model.feature_indices)?,
                &restrict_rows(&tt, &model.feature_indices)?,
            )?)
        }
        _ => None,
    };
    let body = json!({
        "positive_class": "image",
        "model": {
            "feature_indices": model.feature_indices,
            "weights": nums(&model.weights),
            "bias": num(model.bias),
            "margin": num(model.margin),
            "standardization": {
                "mean": nums(&model.standardization.mean),
                "std": nums(&model.standardization.std),
            },
            "lambda": num(model.lambda),
            "epochs": model.epochs,
            "seed": model.seed,
        },
        "train": evaluation_json(&train),
        "test": test.as_ref().map(evaluation_json),
    });
    Ok(vec![Artifact::report(&a.out, body, &a.out)])
}

fn interpolated_set(rows: Vec<Vec<f64>>, ids: Vec<String>, dim: usize) -> CliResult<EmbeddingSet> {
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(EmbeddingSet::new(Modality::Other, dim, data, Some(ids))?)
}

pub fn slerp_cmd(a: &Slerp, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let set = ctx.load(&a.input)?;
    let (ja, jb) = (resolve(&set, &a.a, &a.input)?, resolve(&set, &a.b, &a.input)?);
    let ts = parse_grid(&a.ts)?;
    let rows = ts
        .iter()
        .map(|&t| slerp(set.row(ja), set.row(jb), t))
        .collect::<Result<Vec<_>, _>>()?;
    let ids = ts.iter().map(|&t| format!("t={}", cell(Some(t)))).collect();
    Ok(vec![Artifact::raw(&a.out, encode_emb(&interpolated_set(rows, ids, set.dim())?)?)])
}

pub fn vslerp_cmd(a: &Vslerp, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let set = ctx.load(&a.input)?;
    let (ja, jb) = (resolve(&set, &a.a, &a.input)?, resolve(&set, &a.b, &a.input)?);
    let m = match &a.mean {
        Some(path) => {
            let ms = ctx.load(path)?;
            if ms.count() == 0 {
                return Err(CliError::input(format!("{} has no rows", path.display())));
            }
            ms.row(0).to_vec()
        }
        None => set.mean(),
    };
    let ts = parse_grid(&a.ts)?;
    let alphas = parse_grid(&a.alphas)?;
    let mut rows = Vec::with_capacity(ts.len() * alphas.len());
    let mut ids = Vec::with_capacity(rows.capacity());
    for &alpha in &alphas {
        for &t in &ts {
            rows.push(vslerp(set.row(ja), set.row(jb), t, alpha, &m)?);
            ids.push(format!("alpha={};t={}", cell(Some(alpha)), cell(Some(t))));
        }
    }
    Ok(vec![Artifact::raw(&a.out, encode_emb(&interpolated_set(rows, ids, set.dim())?)?)])
}

pub fn synth(a: &Synth, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let spec = match &a.spec {
        Some(path) => {
            let bytes = ctx.read(path)?;
            serde_json::from_slice::<SyntheticSpec>(&bytes)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        }
        None => SyntheticSpec {
            dim: a.dim,
            count: a.count,
            mean: parse_center(a.center.as_deref(), a.dim)?,
            scale: Scale::Diagonal(vec![a.scale; a.dim]),
            seed: a.seed,
            modality: a.modality.parse()?,
        },
    };
    let set = generate_gaussian(&spec)?;
    Ok(vec![Artifact::raw(&a.out, encode_emb(&set)?)])
}

pub fn synth_paired(a: &SynthPaired, _ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let spec = |center: Option<&str>, modality| -> CliResult<SyntheticSpec> {
        Ok(SyntheticSpec {
            dim: a.dim,
            count: a.count,
            mean: parse_center(center, a.dim)?,
            scale: Scale::Diagonal(vec![a.scale; a.dim]),
            seed: a.seed,
            modality,
        })
    };
    let p = generate_paired_with_jitter(
        &spec(a.image_center.as_deref(), Modality::Image)?,
        &spec(a.text_center.as_deref(), Modality::Text)?,
        a.coupling,
        a.duplicates,
        a.jitter,
        a.seed,
    )?;
    Ok(vec![
        Artifact::raw(&a.out, encode_emb(p.images())?),
        Artifact::raw(&a.texts_out, encode_emb(p.texts())?),
    ])
}

pub fn blur(a: &crate::args::BlurDemo, _ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    let center = parse_center(Some(&a.center), a.n)?;
    let d = blur_demo(a.n, a.count, &center, a.seed, a.bins)?;
    let body = json!({
        "n": a.n,
        "count": a.count,
        "seed": a.seed,
        "bins": a.bins,
        "center_norm": num(norm(&center)),
        "anchor_mean_sim": num(mean_cosine_anchor(&center)),
        "mean_of_mean_sim": num(d.mean_of_mean_sim),
        "mean_of_far_sim": num(d.mean_of_far_sim),
        "gap": num(d.mean_of_mean_sim - d.mean_of_far_sim),
        "far_index": d.far_index,
        "hist_mean_sim": histogram_json(&d.hist_mean_sim),
        "hist_far_sim": histogram_json(&d.hist_far_sim),
        "populations": {
            "mean_sim": "cos(m, v_j) over all j",
            "far_sim": "cos(v_far, v_j) over j != far",
        },
    });
    let mut out = vec![Artifact::report(&a.out, body, &a.out)];
    if let Some(path) = &a.hist_out {
        let text = format!(
            "# mean_sim\n{}# far_sim\n{}",
            histogram_tsv(&d.hist_mean_sim),
            histogram_tsv(&d.hist_far_sim)
        );
        out.push(Artifact::table(path, text, &a.out));
    }
    Ok(out)
}

/// Primary output path of a command; its manifest sits next to it.
pub fn primary_out(cmd: &Command) -> Option<&Path> {
    Some(match cmd {
        Command::ImportCsv(a) => &a.out,
        Command::Stats(a) => &a.out,
        Command::Sep(a) => &a.out,
        Command::Odd(a) => &a.out,
        Command::ThinShell(a) => &a.out,
        Command::FeatureKl(a) => &a.out,
        Command::Whiten(a) => &a.out,
        Command::WhitenCheck(a) => &a.out,
        Command::ChiRef(a) => &a.out,
        Command::Conformity(a) => &a.out,
        Command::FitEstimator(a) => &a.out,
        Command::KlSweep(a) => &a.out,
        Command::Loss(a) => &a.out,
        Command::LossSweep(a) => &a.out,
        Command::Classify(a) => &a.out,
        Command::TopFeatures(a) => &a.out,
        Command::TrainSep(a) => &a.out,
        Command::Slerp(a) => &a.out,
        Command::Vslerp(a) => &a.out,
        Command::Synth(a) => &a.out,
        Command::SynthPaired(a) => &a.out,
        Command::BlurDemo(a) => &a.out,
        Command::Replay(_) => return None,
    })
}

pub fn parameters(cmd: &Command) -> Value {
    let v = match cmd {
        Command::ImportCsv(a) => serde_json::to_value(a),
        Command::Stats(a) => serde_json::to_value(a),
        Command::Sep(a) => serde_json::to_value(a),
        Command::Odd(a) => serde_json::to_value(a),
        Command::ThinShell(a) => serde_json::to_value(a),
        Command::FeatureKl(a) => serde_json::to_value(a),
        Command::Whiten(a) => serde_json::to_value(a),
        Command::WhitenCheck(a) => serde_json::to_value(a),
        Command::ChiRef(a) => serde_json::to_value(a),
        Command::Conformity(a) => serde_json::to_value(a),
        Command::FitEstimator(a) => serde_json::to_value(a),
        Command::KlSweep(a) => serde_json::to_value(a),
        Command::Loss(a) => serde_json::to_value(a),
        Command::LossSweep(a) => serde_json::to_value(a),
        Command::Classify(a) => serde_json::to_value(a),
        Command::TopFeatures(a) => serde_json::to_value(a),
        Command::TrainSep(a) => serde_json::to_value(a),
        Command::Slerp(a) => serde_json::to_value(a),
        Command::Vslerp(a) => serde_json::to_value(a),
        Command::Synth(a) => serde_json::to_value(a),
        Command::SynthPaired(a) => serde_json::to_value(a),
        Command::BlurDemo(a) => serde_json::to_value(a),
        Command::Replay(a) => serde_json::to_value(a),
    };
    v.unwrap_or(Value::Null)
}

pub fn execute(cmd: &Command, ctx: &mut Context) -> CliResult<Vec<Artifact>> {
    match cmd {
        Command::ImportCsv(a) => import_csv_cmd(a, ctx),
        Command::Stats(a) => stats(a, ctx),
        Command::Sep(a) => sep(a, ctx),
        Command::Odd(a) => odd_cmd(a, ctx),
        Command::ThinShell(a) => thin_shell(a, ctx),
        Command::FeatureKl(a) => feature_kl(a, ctx),
        Command::Whiten(a) => whiten(a, ctx),
        Command::WhitenCheck(a) => whiten_check(a, ctx),
        Command::ChiRef(a) => chi_ref(a, ctx),
        Command::Conformity(a) => conformity_cmd(a, ctx),
        Command::FitEstimator(a) => fit_estimator_cmd(a, ctx),
        Command::KlSweep(a) => kl_sweep(a, ctx),
        Command::Loss(a) => loss(a, ctx),
        Command::LossSweep(a) => loss_sweep(a, ctx),
        Command::Classify(a) => classify(a, ctx),
        Command::TopFeatures(a) => top_features(a, ctx),
        Command::TrainSep(a) => train_sep(a, ctx),
        Command::Slerp(a) => slerp_cmd(a, ctx),
        Command::Vslerp(a) => vslerp_cmd(a, ctx),
        Command::Synth(a) => synth(a, ctx),
        Command::SynthPaired(a) => synth_paired(a, ctx),
        Command::BlurDemo(a) => blur(a, ctx),
        Command::Replay(_) => unreachable!("replay is dispatched by run"),
    }
}
