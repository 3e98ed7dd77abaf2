//! Closed-form colourability thresholds and degree classification. Natural logs.

use serde::Serialize;

use crate::error::{Error, Result};

/// Above this degree the lift is a.a.s. not k-colourable.
pub fn u_threshold(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("u_k needs k >= 2, got {k}")));
    }
    let kf = k as f64;
    Ok(2.0 * kf.ln() / (kf.ln() - (kf - 1.0).ln()))
}

/// Below this degree the lift is a.a.s. k-colourable.
pub fn ell_threshold(k: usize) -> Result<f64> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!("l_k needs k >= 3, got {k}")));
    }
    Ok(2.0 * c_q(k)?)
}

/// The constant bounding c in the stochastic-matrix inequality; equals half of `ell_threshold`.
pub fn c_q(q: usize) -> Result<f64> {
    if q < 3 {
        return Err(Error::InvalidArgument(format!("c_q needs q >= 3, got {q}")));
    }
    let qf = q as f64;
    Ok((qf - 1.0).powi(3) / (qf * (qf - 2.0)) * (qf - 1.0).ln())
}

/// Smallest k with d < 2 k log k.
pub fn k_d(d: usize) -> usize {
    let df = d as f64;
    (2..).find(|&k| df < 2.0 * k as f64 * (k as f64).ln()).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WindowKind {
    /// chi = k a.a.s.
    OnePointK,
    /// chi in {k, k+1} a.a.s.
    TwoPoint,
    /// chi = k+1 a.a.s.
    OnePointKPlus1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowClassification {
    pub d: usize,
    pub k: usize,
    pub kind: WindowKind,
    pub bounds: (f64, f64),
}

impl WindowClassification {
    /// The possible chromatic numbers.
    pub fn values(&self) -> Vec<usize> {
        match self.kind {
            WindowKind::OnePointK => vec![self.k],
            WindowKind::TwoPoint => vec![self.k, self.k + 1],
            WindowKind::OnePointKPlus1 => vec![self.k + 1],
        }
    }
}

/// If d > (2k_d - 1) log k_d the window is the single point k_d + 1. Otherwise finds k
/// with d in [u_{k-1}, u_k): one point k below l_k, two points {k, k+1} from l_k on.
pub fn classify(d: usize) -> Result<WindowClassification> {
    if d < 3 {
        return Err(Error::InvalidArgument(format!("classify needs d >= 3, got {d}")));
    }
    let df = d as f64;
    let mut k = 3;
    while df >= u_threshold(k)? {
        k += 1;
    }
    let kd = k_d(d);
    let kdf = kd as f64;
    let cut = (2.0 * kdf - 1.0) * kdf.ln();
    if df > cut {
        return Ok(WindowClassification {
            d,
            k: kd,
            kind: WindowKind::OnePointKPlus1,
            bounds: (cut, 2.0 * kdf * kdf.ln()),
        });
    }
    let ell = ell_threshold(k)?;
    if df < ell {
        let lower_u = u_threshold(k - 1)?;
        return Ok(WindowClassification { d, k, kind: WindowKind::OnePointK, bounds: (lower_u, ell) });
    }
    let upper_u = u_threshold(k)?;
    Ok(WindowClassification { d, k, kind: WindowKind::TwoPoint, bounds: (ell, upper_u) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn u_values() {
        assert_abs_diff_eq!(u_threshold(2).unwrap(), 2.0, epsilon = 1e-12);
        let u3 = 2.0 * 3f64.ln() / (3f64.ln() - 2f64.ln());
        assert_abs_diff_eq!(u_threshold(3).unwrap(), u3, epsilon = 1e-12);
        assert_abs_diff_eq!(u_threshold(3).unwrap(), 5.419022582, epsilon = 1e-9);
        assert!(u_threshold(1).is_err());
    }

    #[test]
    fn ell_and_c_values() {
        assert_abs_diff_eq!(ell_threshold(3).unwrap(), 16.0 / 3.0 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(ell_threshold(3).unwrap(), 3.696_784_963, epsilon = 1e-9);
        assert_abs_diff_eq!(ell_threshold(4).unwrap(), 27.0 / 4.0 * 3f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(c_q(3).unwrap(), 8.0 / 3.0 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(c_q(4).unwrap(), 27.0 / 8.0 * 3f64.ln(), epsilon = 1e-12);
        assert!(ell_threshold(2).is_err());
        assert!(c_q(2).is_err());
    }

    #[test]
    fn k_d_values() {
        assert_eq!(k_d(3), 3);
        assert_eq!(k_d(6), 3);
        assert_eq!(k_d(7), 4);
    }

    #[test]
    fn classification_examples() {
        let c = classify(3).unwrap();
        assert_eq!((c.kind, c.k), (WindowKind::OnePointK, 3));
        let c = classify(5).unwrap();
        assert_eq!((c.kind, c.k), (WindowKind::TwoPoint, 3));
        assert_eq!(c.values(), vec![3, 4]);
        let c = classify(6).unwrap();
        assert_eq!((c.kind, c.values()), (WindowKind::OnePointKPlus1, vec![4]));
        assert!(classify(2).is_err());
    }

    #[test]
    fn threshold_interleaving() {
        for k in 3..=50 {
            let (u_prev, ell, u) = (u_threshold(k - 1).unwrap(), ell_threshold(k).unwrap(), u_threshold(k).unwrap());
            assert!(u_prev + 1e-9 < ell && ell + 1e-9 < u, "k = {k}");
            let kf = k as f64;
            assert!(u < (2.0 * kf - 1.0) * kf.ln());
            assert!(ell > 2.0 * (kf - 1.0) * (kf - 1.0).ln());
            assert_abs_diff_eq!(ell, 2.0 * c_q(k).unwrap(), epsilon = 1e-12);
        }
        assert!(u_threshold(2).unwrap() < 3.0 * 2f64.ln());
    }

    #[test]
    fn classify_is_total() {
        for d in 3..=10_000 {
            let c = classify(d).unwrap();
            let df = d as f64;
            assert!(c.bounds.0 <= df && df < c.bounds.1, "d = {d}: {c:?}");
            assert!(c.k >= 3);
            // the collapsed window must sit inside the u/l window for the same d
            let mut k = 3;
            while df >= u_threshold(k).unwrap() {
                k += 1;
            }
            let window: Vec<usize> = if df < ell_threshold(k).unwrap() { vec![k] } else { vec![k, k + 1] };
            for v in c.values() {
                assert!(window.contains(&v), "d = {d}: {c:?} vs {window:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn k_d_is_minimal(d in 3usize..100_000) {
            let k = k_d(d);
            let df = d as f64;
            prop_assert!(df < 2.0 * k as f64 * (k as f64).ln());
            prop_assert!(df >= 2.0 * (k - 1) as f64 * ((k - 1) as f64).ln());
        }
    }
}
