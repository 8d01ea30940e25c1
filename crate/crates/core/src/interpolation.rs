//! SLERP between embedding vectors and its shifted variant vSLERP, which
//! interpolates on a sphere centered at `α·mean` instead of the origin.

use crate::error::{Error, Result};
use crate::linalg::norm;

/// Below this `sin Ω` the inputs count as parallel (or antipodal).
pub const PARALLEL_SIN: f64 = 1e-7;

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t must lie in [0, 1], got {t}")));
    }
    Ok(())
}

/// Angle between `a` and `b` as `2·atan2(‖â − b̂‖, ‖â + b̂‖)`, accurate near
/// 0 and π.
pub fn angle(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 {
        return Err(Error::ZeroNorm { row: 0 });
    }
    if nb == 0.0 {
        return Err(Error::ZeroNorm { row: 1 });
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Ok(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

/// `[sin((1−t)Ω)·a + sin(tΩ)·b] / sin Ω` on the raw vectors. Returns `a` and
/// `b` unchanged at `t = 0` and `t = 1`; near-parallel inputs use
/// `(1−t)a + tb`.
pub fn slerp(a: &[f64], b: &[f64], t: f64) -> Result<Vec<f64>> {
    check_t(t)?;
    let omega = angle(a, b)?;
    let s = omega.sin();
    if s < PARALLEL_SIN && omega > std::f64::consts::FRAC_PI_2 {
        return Err(Error::Antipodal);
    }
    if t == 0.0 {
        return Ok(a.to_vec());
    }
    if t == 1.0 {
        return Ok(b.to_vec());
    }
    if s < PARALLEL_SIN {
        return Ok(a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect());
    }
    let wa = ((1.0 - t) * omega).sin() / s;
    let wb = (t * omega).sin() / s;
    Ok(a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect())
}

/// `slerp(a − α·mean, b − α·mean, t) + α·mean`.
pub fn vslerp(a: &[f64], b: &[f64], t: f64, alpha: f64, mean: &[f64]) -> Result<Vec<f64>> {
    check_t(t)?;
    if mean.len() != a.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            found: mean.len(),
        });
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be finite, got {alpha}")));
    }
    let shift = |v: &[f64]| -> Vec<f64> { v.iter().zip(mean).map(|(x, m)| x - alpha * m).collect() };
    let path = slerp(&shift(a), &shift(b), t)?;
    if t == 0.0 {
        return Ok(a.to_vec());
    }
    if t == 1.0 {
        return Ok(b.to_vec());
    }
    Ok(path.iter().zip(mean).map(|(x, m)| x + alpha * m).collect())
}

/// One interpolated vector per `t`.
pub fn slerp_path(a: &[f64], b: &[f64], ts: &[f64]) -> Result<Vec<Vec<f64>>> {
    ts.iter().map(|&t| slerp(a, b, t)).collect()
}

/// One interpolated vector per `(α, t)`, α-major.
pub fn vslerp_grid(a: &[f64], b: &[f64], ts: &[f64], alphas: &[f64], mean: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(ts.len() * alphas.len());
    for &alpha in alphas {
        for &t in ts {
            out.push(vslerp(a, b, t, alpha, mean)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_exact() {
        let a = [0.3, -1.2, 4.0];
        let b = [2.0, 0.5, -0.1];
        assert_eq!(slerp(&a, &b, 0.0).unwrap(), a.to_vec());
        assert_eq!(slerp(&a, &b, 1.0).unwrap(), b.to_vec());
        let m = [1.0, 1.0, 1.0];
        assert_eq!(vslerp(&a, &b, 0.0, 1.7, &m).unwrap(), a.to_vec());
        assert_eq!(vslerp(&a, &b, 1.0, -1.3, &m).unwrap(), b.to_vec());
    }

    #[test]
    fn quarter_circle_midpoint() {
        let r = slerp(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 0.5).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r[0] - h).abs() < 1e-15 && (r[1] - h).abs() < 1e-15 && r[2] == 0.0);
    }

    #[test]
    fn parallel_falls_back_to_lerp() {
        let r = slerp(&[1.0, 0.0], &[2.0, 0.0], 0.25).unwrap();
        assert_eq!(r, vec![1.25, 0.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(slerp(&[1.0, 0.0], &[-1.0, 0.0], 0.5), Err(Error::Antipodal)));
        assert!(matches!(slerp(&[1.0, 0.0], &[-3.0, 0.0], 0.0), Err(Error::Antipodal)));
        assert!(matches!(slerp(&[0.0, 0.0], &[1.0, 0.0], 0.5), Err(Error::ZeroNorm { row: 0 })));
        assert!(matches!(slerp(&[1.0, 0.0], &[0.0, 1.0], 1.5), Err(Error::InvalidParameter(_))));
        assert!(matches!(slerp(&[1.0, 0.0], &[0.0, 1.0], f64::NAN), Err(Error::InvalidParameter(_))));
        // shifting by the mean collapses a onto the origin
        assert!(matches!(
            vslerp(&[1.0, 1.0], &[0.0, 1.0], 0.5, 1.0, &[1.0, 1.0]),
            Err(Error::ZeroNorm { row: 0 })
        ));
        assert!(matches!(
            vslerp(&[1.0, 1.0], &[0.0, 1.0], 0.5, 1.0, &[1.0]),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn vslerp_stays_on_shifted_sphere() {
        let m = [2.0, -1.0, 0.5];
        let alpha = 0.8;
        let r = 1.5;
        let a: Vec<f64> = [r, 0.0, 0.0].iter().zip(&m).map(|(x, c)| x + alpha * c).collect();
        let b: Vec<f64> = [0.0, 0.0, r].iter().zip(&m).map(|(x, c)| x + alpha * c).collect();
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let p = vslerp(&a, &b, t, alpha, &m).unwrap();
            let off: Vec<f64> = p.iter().zip(&m).map(|(x, c)| x - alpha * c).collect();
            assert!((norm(&off) - r).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_layout() {
        let g = vslerp_grid(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0], &[0.0, 0.5, 1.0], &[0.1, 0.1]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[2], vec![1.0, 0.0]);
        assert_eq!(g[5], vec![0.0, 1.0]);
    }
}
