//! Uniform-width histograms and a smoothed histogram KL divergence.

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 100;

/// Additive smoothing applied to every bin mass before renormalizing.
pub const KL_SMOOTHING: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Probability mass per bin.
    pub fn masses(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Mass divided by bin width; integrates to one.
    pub fn densities(&self) -> Vec<f64> {
        self.masses()
            .iter()
            .zip(self.edges.windows(2))
            .map(|(m, e)| m / (e[1] - e[0]))
            .collect()
    }

    /// One line per bin: `edge_lo, edge_hi, count, density`, tab separated.
    pub fn to_tsv(&self, fmt: impl Fn(f64) -> String) -> String {
        let mut out = String::from("edge_lo\tedge_hi\tcount\tdensity\n");
        for ((e, c), d) in self.edges.windows(2).zip(&self.counts).zip(self.densities()) {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", fmt(e[0]), fmt(e[1]), c, fmt(d)));
        }
        out
    }
}

/// Bins `values` into `bins` uniform bins over `range`, or the data's min/max
/// when no range is given. Values outside an explicit range land in the end
/// bins.
///
/// If the data are constant and no range is given the range is widened to
/// `value ± 0.5`.
pub fn histogram(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::Empty("histogram of no values".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be at least 1".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("histogram values must be finite".into()));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidParameter(format!("histogram range ({lo}, {hi}) is empty")));
            }
            (lo, hi)
        }
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        }
    };

    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);

    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = ((v - lo) / width).floor();
        let idx = if idx < 0.0 { 0 } else { (idx as usize).min(bins - 1) };
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// `KL(p ‖ q)` over bin masses, each bin smoothed by [`KL_SMOOTHING`] before
/// renormalization. Both histograms must share identical edges.
pub fn histogram_kl(p: &Histogram, q: &Histogram) -> Result<f64> {
    if p.edges != q.edges {
        return Err(Error::EdgeMismatch);
    }
    if p.total() == 0 || q.total() == 0 {
        return Err(Error::Empty("KL of an empty histogram".into()));
    }
    let ps = smoothed(p);
    let qs = smoothed(q);
    let kl: f64 = ps
        .iter()
        .zip(&qs)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum();
    Ok(kl.max(0.0))
}

fn smoothed(h: &Histogram) -> Vec<f64> {
    let masses = h.masses();
    let z = 1.0 + KL_SMOOTHING * masses.len() as f64;
    masses.iter().map(|m| (m + KL_SMOOTHING) / z).collect()
}

/// Histograms of two populations over a shared range spanning both, padded
/// by `pad_fraction` of the span on each side.
pub fn shared_histograms(a: &[f64], b: &[f64], bins: usize, pad_fraction: f64) -> Result<(Histogram, Histogram)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("histogram of no values".into()));
    }
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let pad = if span > 0.0 { pad_fraction * span } else { 0.5 };
    let range = Some((lo - pad, hi + pad));
    Ok((histogram(a, bins, range)?, histogram(b, bins, range)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_value_single_bin() {
        let h = histogram(&[0.5], 1, Some((0.0, 1.0))).unwrap();
        assert_eq!(h.counts(), &[1]);
        assert_eq!(h.edges(), &[0.0, 1.0]);
    }

    #[test]
    fn two_bins() {
        let h = histogram(&[0.0, 1.0, 2.0, 3.0], 2, Some((0.0, 4.0))).unwrap();
        assert_eq!(h.counts(), &[2, 2]);
    }

    #[test]
    fn out_of_range_clipped_to_end_bins() {
        let h = histogram(&[-5.0, 0.25, 10.0], 2, Some((0.0, 1.0))).unwrap();
        assert_eq!(h.counts(), &[2, 1]);
    }

    #[test]
    fn default_range_includes_max() {
        let h = histogram(&[0.0, 1.0, 1.0], 4, None).unwrap();
        assert_eq!(h.counts(), &[1, 0, 0, 2]);
    }

    #[test]
    fn constant_data_widened() {
        let h = histogram(&[2.0, 2.0], 2, None).unwrap();
        assert_eq!(h.edges(), &[1.5, 2.0, 2.5]);
        assert_eq!(h.total(), 2);
    }

    #[test]
    fn errors() {
        assert!(matches!(histogram(&[], 3, None), Err(Error::Empty(_))));
        assert!(matches!(histogram(&[1.0], 3, Some((1.0, 1.0))), Err(Error::InvalidParameter(_))));
        assert!(matches!(histogram(&[1.0], 3, Some((2.0, 1.0))), Err(Error::InvalidParameter(_))));
        let a = histogram(&[1.0], 3, Some((0.0, 2.0))).unwrap();
        let b = histogram(&[1.0], 3, Some((0.0, 3.0))).unwrap();
        assert!(matches!(histogram_kl(&a, &b), Err(Error::EdgeMismatch)));
    }

    #[test]
    fn kl_of_identical_is_zero() {
        let h = histogram(&[0.1, 0.2, 0.2, 0.9], 5, Some((0.0, 1.0))).unwrap();
        assert!(histogram_kl(&h, &h).unwrap().abs() < 1e-9);
    }

    #[test]
    fn tsv_layout() {
        let h = histogram(&[0.5], 1, Some((0.0, 2.0))).unwrap();
        assert_eq!(h.to_tsv(|x| x.to_string()), "edge_lo\tedge_hi\tcount\tdensity\n0\t2\t1\t0.5\n");
    }

    proptest! {
        #[test]
        fn densities_integrate_to_one(values in prop::collection::vec(-100.0f64..100.0, 1..200), bins in 1usize..64) {
            let h = histogram(&values, bins, None).unwrap();
            let integral: f64 = h.densities().iter().zip(h.edges().windows(2)).map(|(d, e)| d * (e[1] - e[0])).sum();
            prop_assert!((integral - 1.0).abs() < 1e-9);
            prop_assert_eq!(h.total() as usize, values.len());
            prop_assert!(h.edges().windows(2).all(|e| e[0] < e[1]));
        }

        #[test]
        fn kl_nonnegative(a in prop::collection::vec(0.0f64..1.0, 1..100), b in prop::collection::vec(0.0f64..1.0, 1..100)) {
            let (ha, hb) = shared_histograms(&a, &b, 10, 0.01).unwrap();
            prop_assert!(histogram_kl(&ha, &hb).unwrap() >= 0.0);
            prop_assert!(histogram_kl(&ha, &ha).unwrap().abs() < 1e-9);
        }
    }
}
