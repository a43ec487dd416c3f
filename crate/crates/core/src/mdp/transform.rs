//! Invertible value squashing used by the transformed operators and losses.

use crate::error::{Error, Result};

/// A monotone, invertible map applied to action values before they are stored.
///
/// The transformed operators are written against this trait so that the same
/// code path can be exercised with [`IdentityTransform`].
pub trait ValueTransform {
    fn apply(&self, z: f64) -> f64;
    fn invert(&self, z: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IdentityTransform;

impl ValueTransform for IdentityTransform {
    #[inline]
    fn apply(&self, z: f64) -> f64 {
        z
    }

    #[inline]
    fn invert(&self, z: f64) -> f64 {
        z
    }
}

/// `h(z) = sign(z)(sqrt(|z| + 1) - 1) + eps * z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquashTransform {
    epsilon: f64,
}

impl Default for SquashTransform {
    fn default() -> Self {
        Self { epsilon: Self::DEFAULT_EPSILON }
    }
}

impl SquashTransform {
    pub const DEFAULT_EPSILON: f64 = 1e-3;

    /// `epsilon = 0` is accepted here (the forward map is still defined) but
    /// every inverse evaluation will then fail.
    pub fn new(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::Domain(format!("squash epsilon must be finite and >= 0, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[inline]
    fn forward(&self, z: f64) -> f64 {
        let magnitude = (z.abs() + 1.0).sqrt() - 1.0;
        signum(z) * magnitude + self.epsilon * z
    }

    // Solves eps*s^2 + s - (1 + eps + |y|) = 0 for s = sqrt(|z| + 1) using the
    // rationalized root, which avoids cancellation when eps*|y| is small.
    #[inline]
    fn backward(&self, y: f64) -> f64 {
        let eps = self.epsilon;
        let c = 1.0 + eps + y.abs();
        let s = 2.0 * c / (1.0 + (1.0 + 4.0 * eps * c).sqrt());
        signum(y) * (s - 1.0) * (s + 1.0)
    }
}

impl ValueTransform for SquashTransform {
    #[inline]
    fn apply(&self, z: f64) -> f64 {
        self.forward(z)
    }

    #[inline]
    fn invert(&self, z: f64) -> f64 {
        self.backward(z)
    }
}

#[inline]
fn signum(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Checked forward squash.
pub fn h_apply(z: f64, t: &SquashTransform) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("h is undefined for non-finite input {z}")));
    }
    Ok(t.forward(z))
}

/// Checked inverse squash; the closed form needs `epsilon > 0`.
pub fn h_inverse(z: f64, t: &SquashTransform) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("h^-1 is undefined for non-finite input {z}")));
    }
    if t.epsilon == 0.0 {
        return Err(Error::DivisionByZero("closed-form inverse requires epsilon > 0".into()));
    }
    Ok(t.backward(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn h() -> SquashTransform {
        SquashTransform::default()
    }

    #[test]
    fn worked_values() {
        assert_eq!(h_apply(0.0, &h()).unwrap(), 0.0);
        assert!((h_apply(3.0, &h()).unwrap() - 1.003).abs() < 1e-15);
        assert!((h_apply(-3.0, &h()).unwrap() + 1.003).abs() < 1e-15);
        assert_eq!(h_inverse(0.0, &h()).unwrap(), 0.0);
        assert!((h_inverse(1.003, &h()).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn odd_symmetry() {
        for z in [0.5, 1.0, 7.25, 1e4] {
            assert_eq!(h().apply(-z), -h().apply(z));
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(h_apply(f64::NAN, &h()), Err(Error::Domain(_))));
        assert!(matches!(h_apply(f64::INFINITY, &h()), Err(Error::Domain(_))));
        let zero = SquashTransform::new(0.0).unwrap();
        assert!(matches!(h_inverse(1.0, &zero), Err(Error::DivisionByZero(_))));
        assert!(SquashTransform::new(-1.0).is_err());
    }

    #[test]
    fn random_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-100.0..100.0);
            let back = h_inverse(h_apply(x, &h()).unwrap(), &h()).unwrap();
            assert!((back - x).abs() <= 1e-9, "{x} -> {back}");
        }
    }

    #[test]
    fn round_trip_up_to_a_million() {
        let t = h();
        let mut worst: f64 = 0.0;
        for i in 0..=200_000 {
            let z = -1e6 + 1e6 * (i as f64) / 100_000.0;
            worst = worst.max((t.invert(t.apply(z)) - z).abs());
        }
        assert!(worst <= 1e-9, "worst round-trip error {worst:e}");
    }

    #[test]
    fn strictly_increasing_on_grid() {
        let t = h();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..10_000 {
            let z = -1e6 + 2e6 * (i as f64) / 9_999.0;
            let y = t.apply(z);
            assert!(y > prev);
            prev = y;
        }
    }
}
