use serde::Serialize;

use super::discrete::conjugate_bruteforce;
use super::sampled::{Grid, SampledFunction};
use super::smooth::{conjugate_smooth, SmoothConvex};
use crate::error::{Error, Result};
use crate::polarity::{polar_boundary_envelope, ConvexBody, CostMatrix, SampleLayout};
use crate::projective::ProjectivePoint;

/// Boundary of the epigraph: samples `(theta_i, F(theta_i), 1)` with tangents
/// `(e_k, dF/dtheta_k, 0)`. Gradients come from `f` or, failing that, from
/// finite differences along the grid. `+inf` nodes are left out.
pub fn epigraph_body(f: &SampledFunction) -> Result<ConvexBody> {
    let n = f.dim();
    let grads = f.gradients_or_finite_differences()?;
    let mut samples = Vec::with_capacity(f.len());
    let mut tangents = Vec::with_capacity(f.len());
    for i in 0..f.len() {
        if f.is_infinite(i) {
            continue;
        }
        samples.push(ProjectivePoint::lift_graph(f.theta(i), f.value(i)));
        tangents.push(
            (0..n)
                .map(|k| {
                    let mut t = vec![0.0; n + 2];
                    t[k] = 1.0;
                    t[n] = grads[i * n + k];
                    t
                })
                .collect(),
        );
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("function is +inf everywhere".into()));
    }
    let complete = samples.len() == f.len();
    let body = ConvexBody::new(n, samples, tangents)?;
    match f.grid().shape() {
        Some(shape) if complete && n >= 2 => body.with_layout(SampleLayout {
            shape: Some(shape),
            closed: false,
        }),
        _ => Ok(body),
    }
}

/// How the reference conjugate is computed.
#[derive(Clone, Copy)]
pub enum ConjugateReference<'a> {
    /// Solve `grad F(theta) = eta` for this function.
    Smooth(&'a dyn SmoothConvex),
    /// Brute-force supremum over the samples themselves.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarityCheck {
    pub max_discrepancy: f64,
    /// Sample index where the maximum is attained.
    pub worst_index: Option<usize>,
    pub compared: usize,
    pub skipped: usize,
    pub degenerate: usize,
}

/// Maps the graph of `F` through the Legendre polarity and compares every
/// finite image point `(eta, y)` with `y = F*(eta)`.
pub fn verify_legendre_polarity(
    f: &SampledFunction,
    reference: ConjugateReference<'_>,
) -> Result<PolarityCheck> {
    let n = f.dim();
    let body = epigraph_body(f)?;
    let env = polar_boundary_envelope(&CostMatrix::legendre(n), &body)?;
    let finite: Vec<(usize, Vec<f64>)> = env.finite_points().collect();
    let sample_theta: Vec<usize> = (0..f.len()).filter(|&i| !f.is_infinite(i)).collect();
    let reference_values: Vec<f64> = match reference {
        ConjugateReference::Smooth(func) => finite
            .iter()
            .map(|(idx, x)| {
                conjugate_smooth(func, &x[..n], f.theta(sample_theta[*idx])).map(|r| r.value)
            })
            .collect::<Result<_>>()?,
        ConjugateReference::Sampled => {
            if finite.is_empty() {
                Vec::new()
            } else {
                let grid = Grid::scattered(n, dedup_points(&finite, n))?;
                let star = conjugate_bruteforce(f, &grid)?;
                finite
                    .iter()
                    .map(|(_, x)| {
                        let j = (0..grid.len())
                            .find(|&j| grid.point(j) == &x[..n])
                            .expect("point was added to the grid");
                        star.dual.value(j)
                    })
                    .collect()
            }
        }
    };
    let mut check = PolarityCheck {
        max_discrepancy: 0.0,
        worst_index: None,
        compared: finite.len(),
        skipped: env.skipped.len(),
        degenerate: env.degenerate_count(),
    };
    for ((idx, x), r) in finite.iter().zip(&reference_values) {
        let d = (x[n] - r).abs();
        if d > check.max_discrepancy || check.worst_index.is_none() {
            check.max_discrepancy = check.max_discrepancy.max(d);
            check.worst_index = Some(sample_theta[*idx]);
        }
    }
    Ok(check)
}

fn dedup_points(points: &[(usize, Vec<f64>)], n: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = points.iter().map(|(_, x)| x[..n].to_vec()).collect();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    out.dedup();
    out
}
