//! Fenchel-Young, Bregman and polar Fenchel-Young divergences, their total
//! (conformally normalized) versions, and the swap identities between a
//! divergence and its reference dual.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::legendre::{SampledFunction, SmoothConvex};
use crate::linalg::{dot, norm_sq};
use crate::projective::ProjectivePoint;
use crate::transforms::interpolate;

/// Which conformal factor a total divergence uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `1 / sqrt(1 + |g|^2)`, the distance-to-hyperplane normalization.
    #[default]
    Sqrt,
    /// `1 / (1 + |g|^2)`.
    Paper,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(Variant::Sqrt),
            "paper" | "paper_tb" => Ok(Variant::Paper),
            other => Err(Error::InvalidInput(format!(
                "unknown variant {other:?} (expected sqrt or paper)"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Sqrt => "sqrt",
            Variant::Paper => "paper",
        })
    }
}

impl Variant {
    /// Normalizer `kappa >= 1` for a vector `v`; divergences are divided by it.
    pub fn norm_factor(self, v: &[f64]) -> f64 {
        let s = 1.0 + norm_sq(v);
        match self {
            Variant::Sqrt => s.sqrt(),
            Variant::Paper => s,
        }
    }
}

/// `F(theta) + F*(eta) - <theta, eta>`.
pub fn fenchel_young(f_theta: f64, fstar_eta: f64, theta: &[f64], eta: &[f64]) -> f64 {
    f_theta + fstar_eta - dot(theta, eta)
}

/// A convex function that can be evaluated together with its gradient.
#[derive(Clone, Copy)]
pub enum Potential<'a> {
    Smooth(&'a dyn SmoothConvex),
    /// Values are interpolated between nodes; gradients are only available
    /// at nodes and only when the samples carry them.
    Sampled(&'a SampledFunction),
}

impl<'a> From<&'a SampledFunction> for Potential<'a> {
    fn from(f: &'a SampledFunction) -> Self {
        Potential::Sampled(f)
    }
}

impl Potential<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Potential::Smooth(f) => f.dim(),
            Potential::Sampled(f) => f.dim(),
        }
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        match self {
            Potential::Smooth(f) => Ok(f.value(theta)),
            Potential::Sampled(f) => match node_index(f, theta) {
                Some(i) => Ok(f.value(i)),
                None => interpolate(f, theta),
            },
        }
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), theta.len())?;
        match self {
            Potential::Smooth(f) => Ok(f.gradient(theta)),
            Potential::Sampled(f) => {
                if !f.has_gradients() {
                    return Err(Error::MissingGradients);
                }
                let i = node_index(f, theta).ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "gradient requested at {theta:?}, which is not a grid node"
                    ))
                })?;
                Ok(f.gradient(i).expect("gradients present").to_vec())
            }
        }
    }
}

fn node_index(f: &SampledFunction, theta: &[f64]) -> Option<usize> {
    (0..f.len()).find(|&i| {
        f.theta(i)
            .iter()
            .zip(theta)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0))
    })
}

/// `B_F(theta1 : theta2) = F(theta1) - F(theta2) - <theta1 - theta2, grad F(theta2)>`.
pub fn bregman(f: Potential<'_>, theta1: &[f64], theta2: &[f64]) -> Result<f64> {
    let g = f.gradient(theta2)?;
    let f1 = f.value(theta1)?;
    let f2 = f.value(theta2)?;
    let diff: Vec<f64> = theta1.iter().zip(theta2).map(|(a, b)| a - b).collect();
    Ok(f1 - f2 - dot(&diff, &g))
}

/// `B_F(theta1 : theta2)` divided by the conformal normalizer of `grad F(theta2)`.
pub fn total_bregman(
    f: Potential<'_>,
    theta1: &[f64],
    theta2: &[f64],
    variant: Variant,
) -> Result<f64> {
    let g = f.gradient(theta2)?;
    Ok(bregman(f, theta1, theta2)? / variant.norm_factor(&g))
}

fn affine(p: &ProjectivePoint) -> Result<Vec<f64>> {
    if p.is_ideal() {
        return Err(Error::IdealPoint);
    }
    Ok(p.normalized().into_coords())
}

fn affine_pair(a: &ProjectivePoint, b: &ProjectivePoint) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(a.len(), b.len())?;
    Ok((affine(a)?, affine(b)?))
}

/// `[a]^T C_L [b]` on representatives with trailing coordinate 1.
fn legendre_form(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() - 2;
    a[n] + b[n] - dot(&a[..n], &b[..n])
}

/// Polar Fenchel-Young divergence `[a]^T C_L [b]`, both points first
/// normalized to trailing coordinate 1. For `a = (theta, F(theta), 1)` and
/// `b = (eta, F*(eta), 1)` this is `F(theta) + F*(eta) - <theta, eta>`.
pub fn polar_fenchel_young(a: &ProjectivePoint, b: &ProjectivePoint) -> Result<f64> {
    let (a, b) = affine_pair(a, b)?;
    Ok(legendre_form(&a, &b))
}

/// All pairwise polar Fenchel-Young divergences, `out[i][j] = D(a_i : b_j)`.
pub fn polar_fenchel_young_matrix(
    a: &[ProjectivePoint],
    b: &[ProjectivePoint],
) -> Result<Vec<Vec<f64>>> {
    let a: Vec<Vec<f64>> = a.iter().map(affine).collect::<Result<_>>()?;
    let b: Vec<Vec<f64>> = b.iter().map(affine).collect::<Result<_>>()?;
    if let Some(first) = a.first().or(b.first()) {
        for p in a.iter().chain(&b) {
            check_dim(first.len(), p.len())?;
        }
    }
    Ok(a.par_iter()
        .map(|x| b.iter().map(|y| legendre_form(x, y)).collect())
        .collect())
}

/// Normalizers of a pair: `kappa_b` from the first coordinates of `b`,
/// `kappa_star_a` from those of `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConformalFactors {
    pub kappa_b: f64,
    pub kappa_star_a: f64,
    pub variant: Variant,
}

impl ConformalFactors {
    pub fn new(a: &ProjectivePoint, b: &ProjectivePoint, variant: Variant) -> Result<Self> {
        let (a, b) = affine_pair(a, b)?;
        let n = a.len() - 2;
        Ok(ConformalFactors {
            kappa_b: variant.norm_factor(&b[..n]),
            kappa_star_a: variant.norm_factor(&a[..n]),
            variant,
        })
    }
}

/// `D(a : b) / kappa(b)` with the square-root factor.
pub fn polar_total_fenchel_young(a: &ProjectivePoint, b: &ProjectivePoint) -> Result<f64> {
    polar_total_fenchel_young_with(a, b, Variant::Sqrt)
}

pub fn polar_total_fenchel_young_with(
    a: &ProjectivePoint,
    b: &ProjectivePoint,
    variant: Variant,
) -> Result<f64> {
    let k = ConformalFactors::new(a, b, variant)?;
    Ok(polar_fenchel_young(a, b)? / k.kappa_b)
}

/// Reference dual: `D(b : a) / kappa*(a)` with the square-root factor.
pub fn polar_total_fenchel_young_dual(b: &ProjectivePoint, a: &ProjectivePoint) -> Result<f64> {
    polar_total_fenchel_young_dual_with(b, a, Variant::Sqrt)
}

pub fn polar_total_fenchel_young_dual_with(
    b: &ProjectivePoint,
    a: &ProjectivePoint,
    variant: Variant,
) -> Result<f64> {
    let k = ConformalFactors::new(a, b, variant)?;
    Ok(polar_fenchel_young(b, a)? / k.kappa_star_a)
}

/// Both sides of the plain swap `D(a:b) = D*(b:a)` and of the total swap
/// `tD(a:b) / kappa*(a) = tD*(b:a) / kappa(b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapReport {
    pub plain_lhs: f64,
    pub plain_rhs: f64,
    pub total_lhs: f64,
    pub total_rhs: f64,
}

impl SwapReport {
    /// Largest of the two discrepancies relative to `max(1, |lhs|)`.
    pub fn max_relative_error(&self) -> f64 {
        let rel = |l: f64, r: f64| (l - r).abs() / l.abs().max(1.0);
        rel(self.plain_lhs, self.plain_rhs).max(rel(self.total_lhs, self.total_rhs))
    }

    pub fn holds(&self, rel_tol: f64) -> bool {
        self.max_relative_error() <= rel_tol
    }
}

pub fn swap_check(a: &ProjectivePoint, b: &ProjectivePoint) -> Result<SwapReport> {
    swap_check_with(a, b, Variant::Sqrt)
}

pub fn swap_check_with(
    a: &ProjectivePoint,
    b: &ProjectivePoint,
    variant: Variant,
) -> Result<SwapReport> {
    let k = ConformalFactors::new(a, b, variant)?;
    Ok(SwapReport {
        plain_lhs: polar_fenchel_young(a, b)?,
        plain_rhs: polar_fenchel_young(b, a)?,
        total_lhs: polar_total_fenchel_young_with(a, b, variant)? / k.kappa_star_a,
        total_rhs: polar_total_fenchel_young_dual_with(b, a, variant)? / k.kappa_b,
    })
}

/// Every divergence of the family evaluated on one pair. Conformal factors
/// are the square-root ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub fy: f64,
    /// Absent when the pair did not come from a function with a gradient.
    pub bregman: Option<f64>,
    pub polar_fy: f64,
    pub total_sqrt: f64,
    pub total_paper: f64,
    pub kappa_b: f64,
    pub kappa_star_a: f64,
}

/// Report for `theta1` against `eta2 = grad F(theta2)`, with
/// `F*(eta2) = <theta2, eta2> - F(theta2)`.
pub fn divergence_report(
    f: Potential<'_>,
    theta1: &[f64],
    theta2: &[f64],
) -> Result<DivergenceReport> {
    let eta2 = f.gradient(theta2)?;
    let f1 = f.value(theta1)?;
    let fstar2 = dot(theta2, &eta2) - f.value(theta2)?;
    let a = ProjectivePoint::lift_graph(theta1, f1);
    let b = ProjectivePoint::lift_graph(&eta2, fstar2);
    Ok(DivergenceReport {
        fy: fenchel_young(f1, fstar2, theta1, &eta2),
        bregman: Some(bregman(f, theta1, theta2)?),
        polar_fy: polar_fenchel_young(&a, &b)?,
        total_sqrt: total_bregman(f, theta1, theta2, Variant::Sqrt)?,
        total_paper: total_bregman(f, theta1, theta2, Variant::Paper)?,
        kappa_b: Variant::Sqrt.norm_factor(&eta2),
        kappa_star_a: Variant::Sqrt.norm_factor(theta1),
    })
}

/// Report for a raw pair `a = (theta, F(theta), 1)`, `b = (eta, F*(eta), 1)`.
pub fn divergence_report_points(
    a: &ProjectivePoint,
    b: &ProjectivePoint,
) -> Result<DivergenceReport> {
    let (x, y) = affine_pair(a, b)?;
    let n = x.len() - 2;
    let polar_fy = legendre_form(&x, &y);
    Ok(DivergenceReport {
        fy: fenchel_young(x[n], y[n], &x[..n], &y[..n]),
        bregman: None,
        polar_fy,
        total_sqrt: polar_fy / Variant::Sqrt.norm_factor(&y[..n]),
        total_paper: polar_fy / Variant::Paper.norm_factor(&y[..n]),
        kappa_b: Variant::Sqrt.norm_factor(&y[..n]),
        kappa_star_a: Variant::Sqrt.norm_factor(&x[..n]),
    })
}
