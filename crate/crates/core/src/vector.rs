//! Small dense-vector helpers shared by every stage.

use crate::error::{AlexError, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cosine similarity, clamped to `[-1, 1]` against rounding.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(AlexError::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(AlexError::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Cosine for vectors already known to share a dimension. Zero vectors score 0.
pub(crate) fn cosine_lenient(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let denom = norm(u) * norm(v);
    if denom == 0.0 {
        0.0
    } else {
        (dot(u, v) / denom).clamp(-1.0, 1.0)
    }
}

/// Scales `v` to unit length in place. Returns false for the zero vector.
pub fn normalize(v: &mut [f64]) -> bool {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

pub fn is_unit(v: &[f64], tol: f64) -> bool {
    (norm(v) - 1.0).abs() <= tol
}

pub(crate) fn mean_of<'a>(dim: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    let mut count = 0usize;
    for row in rows {
        acc.iter_mut().zip(row).for_each(|(a, x)| *a += x);
        count += 1;
    }
    if count > 0 {
        acc.iter_mut().for_each(|a| *a /= count as f64);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_identity_and_orthogonal() {
        let u = [0.3, -0.4, 1.2];
        assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_hand_value() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = cosine(&[1.0, 0.0], &[s, s]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(AlexError::ZeroVector)
        ));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(AlexError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cosine_is_clamped() {
        let u = [1e-3, 1e-3, 1e-3];
        let c = cosine(&u, &u).unwrap();
        assert!(c <= 1.0);
    }
}
