//! Points of the extended complex plane and the chordal metric.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtPoint {
    Finite(Complex64),
    Infinity,
}

impl ExtPoint {
    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtPoint::Infinity)
    }

    pub fn finite(&self) -> Option<Complex64> {
        match *self {
            ExtPoint::Finite(z) => Some(z),
            ExtPoint::Infinity => None,
        }
    }

    /// `|z|`, infinite at the point at infinity.
    pub fn modulus(&self) -> f64 {
        self.finite().map_or(f64::INFINITY, |z| z.norm())
    }

    /// `-1/mu`, sending `mu = 0` to infinity.
    pub fn neg_reciprocal(mu: Complex64) -> Self {
        if mu.norm() == 0.0 {
            ExtPoint::Infinity
        } else {
            ExtPoint::Finite(-mu.inv())
        }
    }

    /// `(s - self)^{-1}`, which is `0` at infinity.
    pub fn pole_value(&self, s: f64) -> Option<Complex64> {
        match *self {
            ExtPoint::Infinity => Some(Complex64::new(0.0, 0.0)),
            ExtPoint::Finite(r) => {
                let d = Complex64::new(s, 0.0) - r;
                (d.norm() > 0.0).then(|| d.inv())
            }
        }
    }
}

/// Chordal distance `2|u - v| / sqrt((1 + |u|^2)(1 + |v|^2))` on the Riemann sphere
/// of diameter 2; the point at infinity is at distance `2 / sqrt(1 + |u|^2)` from `u`.
pub fn chordal_distance(a: ExtPoint, b: ExtPoint) -> f64 {
    match (a, b) {
        (ExtPoint::Infinity, ExtPoint::Infinity) => 0.0,
        (ExtPoint::Finite(u), ExtPoint::Infinity) | (ExtPoint::Infinity, ExtPoint::Finite(u)) => {
            2.0 / 1f64.hypot(u.norm())
        }
        (ExtPoint::Finite(u), ExtPoint::Finite(v)) => {
            2.0 * (u - v).norm() / 1f64.hypot(u.norm()) / 1f64.hypot(v.norm())
        }
    }
}

/// Largest pairwise chordal distance within a set of points.
pub fn chordal_diameter(points: &[ExtPoint]) -> f64 {
    let mut best = 0.0f64;
    for (i, &a) in points.iter().enumerate() {
        for &b in &points[i + 1..] {
            best = best.max(chordal_distance(a, b));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(re: f64, im: f64) -> ExtPoint {
        ExtPoint::Finite(Complex64::new(re, im))
    }

    #[test]
    fn antipodes_are_at_distance_two() {
        assert!((chordal_distance(pt(0.0, 0.0), ExtPoint::Infinity) - 2.0).abs() < 1e-15);
        assert!((chordal_distance(pt(1.0, 0.0), pt(-1.0, 0.0)) - 2.0).abs() < 1e-15);
        assert_eq!(
            chordal_distance(ExtPoint::Infinity, ExtPoint::Infinity),
            0.0
        );
    }

    #[test]
    fn large_points_approach_infinity() {
        let far = pt(1e200, 0.0);
        assert!(chordal_distance(far, ExtPoint::Infinity) < 1e-199);
    }

    proptest! {
        #[test]
        fn metric_is_bounded_symmetric_and_inversion_invariant(
            a in (-50.0f64..50.0, -50.0f64..50.0),
            b in (-50.0f64..50.0, -50.0f64..50.0),
        ) {
            let (u, v) = (Complex64::new(a.0, a.1), Complex64::new(b.0, b.1));
            let d = chordal_distance(ExtPoint::Finite(u), ExtPoint::Finite(v));
            prop_assert!(d <= 2.0 + 1e-12);
            prop_assert!((d - chordal_distance(ExtPoint::Finite(v), ExtPoint::Finite(u))).abs() < 1e-15);
            // z -> 1/z is a rotation of the sphere
            if u.norm() > 1e-6 && v.norm() > 1e-6 {
                let di = chordal_distance(ExtPoint::Finite(u.inv()), ExtPoint::Finite(v.inv()));
                prop_assert!((d - di).abs() < 1e-10);
            }
        }
    }
}
