//! Homogeneous coordinates for points of the projective space `P^{n+1}`.
//!
//! A point of `R^{n+1}` is lifted to a vector of length `n + 2` by appending
//! a trailing `1`; vectors differing by a nonzero factor denote the same
//! projective point, and a zero trailing coordinate marks a point at
//! infinity (an *ideal* point).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Default tolerance on the sine of the angle between two coordinate lines.
pub const DEFAULT_EQ_TOL: f64 = 1e-9;

/// A nonzero vector of homogeneous coordinates `(a_1, ..., a_{n+2})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProjectivePoint {
    coords: Vec<f64>,
}

impl TryFrom<Vec<f64>> for ProjectivePoint {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        ProjectivePoint::new(coords)
    }
}

impl From<ProjectivePoint> for Vec<f64> {
    fn from(p: ProjectivePoint) -> Self {
        p.coords
    }
}

impl ProjectivePoint {
    /// Wraps raw homogeneous coordinates. At least two entries are needed
    /// (`n >= 0`), all finite and not all zero.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "homogeneous vector needs at least 2 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("homogeneous coordinates"));
        }
        if coords.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(ProjectivePoint { coords })
    }

    /// Homogeneous coordinates `(v_1, ..., v_{n+1}, 1)` of an affine point.
    pub fn lift(v: &[f64]) -> Self {
        let mut coords = Vec::with_capacity(v.len() + 1);
        coords.extend_from_slice(v);
        coords.push(1.0);
        ProjectivePoint { coords }
    }

    /// Lifts the graph point `(theta, value)`.
    pub fn lift_graph(theta: &[f64], value: f64) -> Self {
        let mut coords = Vec::with_capacity(theta.len() + 2);
        coords.extend_from_slice(theta);
        coords.push(value);
        coords.push(1.0);
        ProjectivePoint { coords }
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(coords.len() >= 2);
        ProjectivePoint { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Number of homogeneous coordinates, `n + 2`.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The `n` of `P^{n+1}`.
    pub fn n(&self) -> usize {
        self.coords.len() - 2
    }

    pub fn last(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    /// Exactly at infinity.
    pub fn is_ideal(&self) -> bool {
        self.last() == 0.0
    }

    /// Trailing coordinate small relative to the whole vector.
    pub fn is_nearly_ideal(&self, rel_tol: f64) -> bool {
        self.last().abs() <= rel_tol * norm(&self.coords)
    }

    pub fn dehomogenize(&self) -> Result<Vec<f64>> {
        let w = self.last();
        if w == 0.0 {
            return Err(Error::IdealPoint);
        }
        Ok(self.coords[..self.coords.len() - 1]
            .iter()
            .map(|x| x / w)
            .collect())
    }

    /// Canonical representative: trailing coordinate exactly 1 for finite
    /// points; unit norm with first nonzero coordinate positive for ideal
    /// points.
    pub fn normalized(&self) -> Self {
        let w = self.last();
        if w != 0.0 {
            let mut coords: Vec<f64> = self.coords.iter().map(|x| x / w).collect();
            let last = coords.len() - 1;
            coords[last] = 1.0;
            ProjectivePoint { coords }
        } else {
            let s = norm(&self.coords);
            let first = self
                .coords
                .iter()
                .find(|&&x| x != 0.0)
                .copied()
                .unwrap_or(1.0);
            let s = if first < 0.0 { -s } else { s };
            ProjectivePoint {
                coords: self.coords.iter().map(|x| x / s).collect(),
            }
        }
    }

    /// Unit-norm representative with the same orientation (positive scale).
    pub fn unit(&self) -> Self {
        let s = norm(&self.coords);
        ProjectivePoint {
            coords: self.coords.iter().map(|x| x / s).collect(),
        }
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "invalid scale factor {lambda}"
            )));
        }
        Ok(ProjectivePoint {
            coords: self.coords.iter().map(|x| x * lambda).collect(),
        })
    }

    pub fn negated(&self) -> Self {
        ProjectivePoint {
            coords: self.coords.iter().map(|x| -x).collect(),
        }
    }

    /// Sine of the angle between the lines spanned by `self` and `other`;
    /// `None` if the lengths differ.
    pub fn sine_to(&self, other: &ProjectivePoint) -> Option<f64> {
        if self.len() != other.len() {
            return None;
        }
        let p = self.unit();
        let q = other.unit();
        let c = dot(&p.coords, &q.coords);
        // |p - (p.q) q| = |sin|, stable for small angles
        let r: f64 = p
            .coords
            .iter()
            .zip(&q.coords)
            .map(|(pi, qi)| {
                let d = pi - c * qi;
                d * d
            })
            .sum();
        Some(r.sqrt())
    }

    pub fn projectively_equal(&self, other: &ProjectivePoint, tol: f64) -> bool {
        projectively_equal(self, other, tol)
    }
}

/// True iff the coordinate lines of `p` and `q` meet at an angle whose sine
/// is below `tol`. Insensitive to scale and sign; points of different
/// dimension are never equal.
pub fn projectively_equal(p: &ProjectivePoint, q: &ProjectivePoint, tol: f64) -> bool {
    match p.sine_to(q) {
        Some(s) => s < tol,
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(v: &[f64]) -> ProjectivePoint {
        ProjectivePoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn lift_appends_one() {
        assert_eq!(
            ProjectivePoint::lift(&[0.0, 0.0]).coords(),
            &[0.0, 0.0, 1.0]
        );
        assert_eq!(
            ProjectivePoint::lift(&[1.0, 0.5]).coords(),
            &[1.0, 0.5, 1.0]
        );
        assert!(!ProjectivePoint::lift(&[3.0]).is_ideal());
    }

    #[test]
    fn dehomogenize_divides_by_last() {
        assert_eq!(pt(&[2.0, 1.0, 2.0]).dehomogenize().unwrap(), vec![1.0, 0.5]);
        assert_eq!(pt(&[1.0, 0.5, 1.0]).dehomogenize().unwrap(), vec![1.0, 0.5]);
        assert!(matches!(
            pt(&[1.0, 1.0, 0.0]).dehomogenize(),
            Err(Error::IdealPoint)
        ));
    }

    #[test]
    fn equality_up_to_scale_and_sign() {
        let p = pt(&[1.0, 2.0, 1.0]);
        assert!(projectively_equal(
            &p,
            &pt(&[2.0, 4.0, 2.0]),
            DEFAULT_EQ_TOL
        ));
        assert!(projectively_equal(
            &p,
            &pt(&[-1.0, -2.0, -1.0]),
            DEFAULT_EQ_TOL
        ));
        assert!(!projectively_equal(
            &p,
            &pt(&[1.0, 2.0, 0.0]),
            DEFAULT_EQ_TOL
        ));
        assert!(!projectively_equal(&p, &pt(&[1.0, 2.0]), DEFAULT_EQ_TOL));
    }

    #[test]
    fn rejects_zero_and_nonfinite() {
        assert!(matches!(
            ProjectivePoint::new(vec![0.0, 0.0, 0.0]),
            Err(Error::ZeroVector)
        ));
        assert!(ProjectivePoint::new(vec![1.0, f64::NAN, 1.0]).is_err());
        assert!(ProjectivePoint::new(vec![1.0]).is_err());
    }

    #[test]
    fn normalization_conventions() {
        let p = pt(&[2.0, 1.0, -2.0]).normalized();
        assert_eq!(p.coords(), &[-1.0, -0.5, 1.0]);
        let q = pt(&[0.0, -3.0, 4.0, 0.0]).normalized();
        assert_eq!(q.coords(), &[0.0, 0.6, -0.8, 0.0]);
    }

    #[test]
    fn json_is_a_plain_array() {
        let p = pt(&[1.0, 0.5, 1.0]);
        assert_eq!(serde_json::to_string(&p).unwrap(), "[1.0,0.5,1.0]");
        let back: ProjectivePoint = serde_json::from_str("[1.0,0.5,1.0]").unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<ProjectivePoint>("[0.0,0.0]").is_err());
    }

    proptest! {
        #[test]
        fn scaling_preserves_equivalence(
            v in prop::collection::vec(-10.0f64..10.0, 2..6),
            lambda in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3],
        ) {
            let p = ProjectivePoint::lift(&v);
            let q = p.scaled(lambda).unwrap();
            prop_assert!(projectively_equal(&p, &q, DEFAULT_EQ_TOL));
        }

        #[test]
        fn lift_then_dehomogenize_is_identity(v in prop::collection::vec(-1e6f64..1e6, 1..6)) {
            let p = ProjectivePoint::lift(&v);
            prop_assert!(!p.is_ideal());
            prop_assert_eq!(p.dehomogenize().unwrap(), v);
        }

        #[test]
        fn normalized_is_equivalent(v in prop::collection::vec(-10.0f64..10.0, 3..6)) {
            prop_assume!(v.iter().any(|&x| x != 0.0));
            let p = ProjectivePoint::new(v).unwrap();
            prop_assert!(projectively_equal(&p, &p.normalized(), DEFAULT_EQ_TOL));
        }
    }
}
