//! Quadratic polarities induced by an invertible cost matrix.
//!
//! A matrix `C` of size `(n+2) x (n+2)` pairs homogeneous points through
//! `p(a, b) = a^T C b`. The polar of a set `A` is the set of `b` with
//! `p(a, b) >= 0` for every `a` in `A`; its dual uses `C^T`. Polar sets are
//! handled extensionally: a body is a list of boundary samples with tangent
//! directions, and the boundary of its polar is recovered sample by sample
//! as the envelope of the polar hyperplanes (incidence + tangency), i.e. as
//! the one-dimensional null space of an `(n+1) x (n+2)` system.

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot, norm, MatrixEntries};
use crate::projective::{ProjectivePoint, DEFAULT_EQ_TOL};

/// Default relative tolerance of membership predicates.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;

/// An invertible cost matrix together with its cached inverse.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    n: usize,
    c: DMatrix<f64>,
    c_inv: DMatrix<f64>,
}

impl CostMatrix {
    /// Builds `C` from a row-major slice of length `(n+2)^2`.
    pub fn new(n: usize, row_major: &[f64]) -> Result<Self> {
        let d = n + 2;
        check_dim(d * d, row_major.len())?;
        Self::from_matrix(linalg::from_row_major(d, row_major))
    }

    pub fn from_matrix(c: DMatrix<f64>) -> Result<Self> {
        let (r, k) = c.shape();
        if r != k || r < 2 {
            return Err(Error::InvalidInput(format!(
                "cost matrix must be square of size >= 2, got {r}x{k}"
            )));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("cost matrix"));
        }
        let c_inv = linalg::checked_inverse(&c)?;
        Ok(CostMatrix { n: r - 2, c, c_inv })
    }

    /// The Legendre matrix `[[-I_n, 0, 0], [0, 0, 1], [0, 1, 0]]`.
    pub fn legendre(n: usize) -> Self {
        let c = legendre_matrix(n);
        // symmetric involution: its own inverse
        CostMatrix {
            n,
            c_inv: c.clone(),
            c,
        }
    }

    pub fn identity(n: usize) -> Self {
        let c = DMatrix::identity(n + 2, n + 2);
        CostMatrix {
            n,
            c_inv: c.clone(),
            c,
        }
    }

    /// `[[I_n, 0, 0], [0, 1/sqrt2, 1/sqrt2], [0, -1/sqrt2, 1/sqrt2]]`, which maps the
    /// epigraph of the half squared norm onto the unit ball.
    pub fn parabola_to_sphere(n: usize) -> Self {
        let d = n + 2;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut c = DMatrix::identity(d, d);
        c[(n, n)] = s;
        c[(n, n + 1)] = s;
        c[(n + 1, n)] = -s;
        c[(n + 1, n + 1)] = s;
        // orthogonal: inverse is the transpose
        CostMatrix {
            n,
            c_inv: c.transpose(),
            c,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Side length `n + 2`.
    pub fn size(&self) -> usize {
        self.n + 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.c_inv
    }

    pub fn transpose(&self) -> CostMatrix {
        CostMatrix {
            n: self.n,
            c: self.c.transpose(),
            c_inv: self.c_inv.transpose(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<CostMatrix> {
        if factor == 0.0 || !factor.is_finite() {
            return Err(Error::InvalidInput(format!(
                "invalid scale factor {factor}"
            )));
        }
        Ok(CostMatrix {
            n: self.n,
            c: &self.c * factor,
            c_inv: &self.c_inv / factor,
        })
    }

    /// `C v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&self.c, v)
    }

    /// `C^T v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&self.c.transpose(), v)
    }

    pub fn is_symmetric(&self) -> bool {
        self.c == self.c.transpose()
    }

    /// `|| C^{-1} C - I ||_F`.
    pub fn inverse_residual(&self) -> f64 {
        let d = self.size();
        linalg::fro(&(&self.c_inv * &self.c - DMatrix::identity(d, d)))
    }

    pub fn row_major(&self) -> Vec<f64> {
        linalg::to_row_major(&self.c)
    }
}

pub(crate) fn legendre_matrix(n: usize) -> DMatrix<f64> {
    let d = n + 2;
    let mut c = DMatrix::zeros(d, d);
    for i in 0..n {
        c[(i, i)] = -1.0;
    }
    c[(n, n + 1)] = 1.0;
    c[(n + 1, n)] = 1.0;
    c
}

/// On-disk form `{"n": int, "C": row-major array}`; nested rows are also
/// accepted on input.
#[derive(Serialize, Deserialize)]
struct CostMatrixJson {
    n: usize,
    #[serde(rename = "C")]
    c: MatrixEntries,
}

impl Serialize for CostMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CostMatrixJson {
            n: self.n,
            c: MatrixEntries::Flat(self.row_major()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CostMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = CostMatrixJson::deserialize(d)?;
        let flat = raw
            .c
            .into_flat(raw.n + 2)
            .map_err(serde::de::Error::custom)?;
        CostMatrix::new(raw.n, &flat).map_err(serde::de::Error::custom)
    }
}

/// `a^T C b`.
pub fn pairing(c: &CostMatrix, a: &ProjectivePoint, b: &ProjectivePoint) -> Result<f64> {
    check_dim(c.size(), a.len())?;
    check_dim(c.size(), b.len())?;
    Ok(raw_pairing(c.matrix(), a.coords(), b.coords()))
}

pub(crate) fn raw_pairing(c: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let d = a.len();
    let mut s = 0.0;
    for i in 0..d {
        let mut row = 0.0;
        for j in 0..d {
            row += c[(i, j)] * b[j];
        }
        s += a[i] * row;
    }
    s
}

/// `sum |a_i| |C_ij| |b_j|`, the natural magnitude of the terms in a pairing.
pub(crate) fn pairing_scale(c: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let d = a.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += (a[i] * c[(i, j)] * b[j]).abs();
        }
    }
    s
}

/// The closed halfspace `{x : normal . x >= 0}` in homogeneous coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>) -> Result<Self> {
        if normal.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(Halfspace { normal })
    }

    pub fn evaluate(&self, x: &ProjectivePoint) -> f64 {
        dot(&self.normal, x.coords())
    }

    pub fn contains(&self, x: &ProjectivePoint, rel_tol: f64) -> bool {
        let scale: f64 = self
            .normal
            .iter()
            .zip(x.coords())
            .map(|(a, b)| (a * b).abs())
            .sum();
        self.evaluate(x) >= -rel_tol * scale
    }
}

/// Polar of a single point: `{b : a^T C b >= 0}`, with normal `C^T a`.
pub fn polar_halfspace(c: &CostMatrix, a: &ProjectivePoint) -> Result<Halfspace> {
    check_dim(c.size(), a.len())?;
    Halfspace::new(c.apply_transpose(a.coords()))
}

/// Index layout of boundary samples, used to find neighbours.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleLayout {
    /// Row-major grid shape (last axis fastest). `None` means a single chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vec<usize>>,
    /// For chains: the last sample is adjacent to the first.
    #[serde(default)]
    pub closed: bool,
}

/// Boundary samples of a closed convex body together with, for every
/// sample, `n` tangent directions (columns of the parametrization Jacobian)
/// in homogeneous coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ConvexBodyJson", into = "ConvexBodyJson")]
pub struct ConvexBody {
    n: usize,
    samples: Vec<ProjectivePoint>,
    tangents: Vec<Vec<Vec<f64>>>,
    layout: SampleLayout,
}

#[derive(Serialize, Deserialize)]
struct ConvexBodyJson {
    n: usize,
    samples: Vec<Vec<f64>>,
    tangents: Vec<Vec<Vec<f64>>>,
    #[serde(flatten)]
    layout: SampleLayout,
}

impl TryFrom<ConvexBodyJson> for ConvexBody {
    type Error = Error;

    fn try_from(raw: ConvexBodyJson) -> Result<Self> {
        let samples = raw
            .samples
            .into_iter()
            .map(ProjectivePoint::new)
            .collect::<Result<Vec<_>>>()?;
        ConvexBody::new(raw.n, samples, raw.tangents)?.with_layout(raw.layout)
    }
}

impl From<ConvexBody> for ConvexBodyJson {
    fn from(b: ConvexBody) -> Self {
        ConvexBodyJson {
            n: b.n,
            samples: b
                .samples
                .iter()
                .map(|s| s.normalized().into_coords())
                .collect(),
            tangents: b.tangents,
            layout: b.layout,
        }
    }
}

impl ConvexBody {
    /// Validates dimensions and requires every sample to be a finite point.
    pub fn new(
        n: usize,
        samples: Vec<ProjectivePoint>,
        tangents: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let body = Self::new_unchecked_finite(n, samples, tangents)?;
        if body.samples.iter().any(|s| s.is_ideal()) {
            return Err(Error::InvalidInput(
                "boundary samples must be finite points".into(),
            ));
        }
        Ok(body)
    }

    /// Same checks as [`ConvexBody::new`] except that samples may lie at
    /// infinity (images of finite bodies under projective maps).
    pub(crate) fn new_unchecked_finite(
        n: usize,
        samples: Vec<ProjectivePoint>,
        tangents: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        check_dim(samples.len(), tangents.len())?;
        for (s, ts) in samples.iter().zip(&tangents) {
            check_dim(n + 2, s.len())?;
            check_dim(n, ts.len())?;
            for t in ts {
                check_dim(n + 2, t.len())?;
                if t.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("tangent direction"));
                }
            }
        }
        Ok(ConvexBody {
            n,
            samples,
            tangents,
            layout: SampleLayout::default(),
        })
    }

    pub fn with_layout(mut self, layout: SampleLayout) -> Result<Self> {
        if let Some(shape) = &layout.shape {
            let count: usize = shape.iter().product();
            check_dim(self.samples.len(), count)?;
            if shape.len() != self.n {
                return Err(Error::InvalidGrid(format!(
                    "grid shape has {} axes for a body of dimension {}",
                    shape.len(),
                    self.n
                )));
            }
        }
        self.layout = layout;
        Ok(self)
    }

    /// The unit circle `(cos t, sin t)` sampled at `count` equally spaced angles,
    /// as a closed chain.
    pub fn unit_disk(count: usize) -> Self {
        let mut samples = Vec::with_capacity(count);
        let mut tangents = Vec::with_capacity(count);
        for k in 0..count {
            let t = std::f64::consts::TAU * k as f64 / count as f64;
            let (s, c) = t.sin_cos();
            samples.push(ProjectivePoint::lift(&[c, s]));
            tangents.push(vec![vec![-s, c, 0.0]]);
        }
        ConvexBody {
            n: 1,
            samples,
            tangents,
            layout: SampleLayout {
                shape: None,
                closed: true,
            },
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[ProjectivePoint] {
        &self.samples
    }

    pub fn tangents(&self) -> &[Vec<Vec<f64>>] {
        &self.tangents
    }

    pub fn layout(&self) -> &SampleLayout {
        &self.layout
    }

    /// Indices adjacent to `i` along each layout axis.
    pub(crate) fn neighbours(&self, i: usize) -> Vec<usize> {
        neighbours(&self.layout, self.samples.len(), i)
    }
}

fn neighbours(layout: &SampleLayout, len: usize, i: usize) -> Vec<usize> {
    let mut out = Vec::new();
    match &layout.shape {
        Some(shape) if shape.len() > 1 => {
            let mut stride = 1;
            for axis in (0..shape.len()).rev() {
                let pos = (i / stride) % shape[axis];
                if pos > 0 {
                    out.push(i - stride);
                }
                if pos + 1 < shape[axis] {
                    out.push(i + stride);
                }
                stride *= shape[axis];
            }
        }
        _ => {
            if i > 0 {
                out.push(i - 1);
            } else if layout.closed && len > 2 {
                out.push(len - 1);
            }
            if i + 1 < len {
                out.push(i + 1);
            } else if layout.closed && len > 2 {
                out.push(0);
            }
        }
    }
    out
}

/// Tolerances of the envelope construction.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeOptions {
    /// Relative singular-value gap deciding rank.
    pub rank_tol: f64,
    /// A unit-norm output whose last coordinate is below this is ideal.
    pub ideal_tol: f64,
    /// Outputs equal (sine of angle) to a neighbour's are flagged degenerate.
    pub collapse_tol: f64,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        EnvelopeOptions {
            rank_tol: linalg::RANK_THRESHOLD,
            ideal_tol: 1e-12,
            collapse_tol: DEFAULT_EQ_TOL,
        }
    }
}

/// One boundary point of a polar set.
#[derive(Debug, Clone)]
pub struct EnvelopePoint {
    /// Index of the boundary sample that produced this point.
    pub index: usize,
    /// Unit-norm representative oriented so that its pairing with the body
    /// is nonnegative.
    pub oriented: ProjectivePoint,
    /// The point lies at infinity (a recession direction of the polar).
    pub ideal: bool,
    /// The point coincides with a neighbour's: the body is flat there.
    pub degenerate: bool,
}

impl EnvelopePoint {
    /// Canonical normalized representative.
    pub fn point(&self) -> ProjectivePoint {
        self.oriented.normalized()
    }

    pub fn dehomogenize(&self) -> Option<Vec<f64>> {
        if self.ideal {
            None
        } else {
            self.oriented.dehomogenize().ok()
        }
    }
}

/// A boundary sample that could not produce an envelope point.
#[derive(Debug)]
pub struct SkippedSample {
    pub index: usize,
    pub error: Error,
}

/// Sampled boundary of a polar set.
#[derive(Debug)]
pub struct Envelope {
    pub points: Vec<EnvelopePoint>,
    pub skipped: Vec<SkippedSample>,
}

impl Envelope {
    /// Envelope point produced by sample `index`, if any.
    pub fn get(&self, index: usize) -> Option<&EnvelopePoint> {
        self.points
            .binary_search_by_key(&index, |p| p.index)
            .ok()
            .map(|k| &self.points[k])
    }

    /// `(index, affine point)` for every finite output.
    pub fn finite_points(&self) -> impl Iterator<Item = (usize, Vec<f64>)> + '_ {
        self.points
            .iter()
            .filter_map(|p| p.dehomogenize().map(|x| (p.index, x)))
    }

    pub fn ideal_count(&self) -> usize {
        self.points.iter().filter(|p| p.ideal).count()
    }

    pub fn degenerate_count(&self) -> usize {
        self.points.iter().filter(|p| p.degenerate).count()
    }

    /// Largest normalized incidence/tangency residual
    /// `|x^T C b| / (||x|| ||C|| ||b||)` over all outputs.
    pub fn max_residual(&self, c: &CostMatrix, body: &ConvexBody) -> f64 {
        let cn = linalg::fro(c.matrix());
        let mut worst = 0.0_f64;
        for p in &self.points {
            let b = p.oriented.coords();
            let a = body.samples[p.index].coords();
            let r = raw_pairing(c.matrix(), a, b).abs() / (norm(a) * cn * norm(b));
            worst = worst.max(r);
            for t in &body.tangents[p.index] {
                let r = raw_pairing(c.matrix(), t, b).abs() / (norm(t) * cn * norm(b));
                worst = worst.max(r);
            }
        }
        worst
    }
}

/// Boundary of the polar `Delta_C(body)` as the envelope of the polar
/// hyperplanes of the boundary samples.
///
/// For each sample `a` with tangents `t_1..t_n` the output `b` spans the null
/// space of the stacked conditions `a^T C b = 0`, `t_k^T C b = 0`. Samples
/// whose tangents are linearly dependent, or whose stacked system leaves more
/// than one free direction, are reported in [`Envelope::skipped`]. Samples are
/// processed independently.
pub fn polar_boundary_envelope(c: &CostMatrix, body: &ConvexBody) -> Result<Envelope> {
    polar_boundary_envelope_with(c, body, &EnvelopeOptions::default())
}

pub fn polar_boundary_envelope_with(
    c: &CostMatrix,
    body: &ConvexBody,
    opts: &EnvelopeOptions,
) -> Result<Envelope> {
    check_dim(c.size(), body.n + 2)?;
    let ct = c.matrix().transpose();
    let d = c.size();
    let n = body.n;

    let raw: Vec<std::result::Result<Vec<f64>, Error>> = (0..body.len())
        .into_par_iter()
        .map(|i| {
            let mut m = DMatrix::zeros(n + 1, d);
            let rows = std::iter::once(body.samples[i].coords())
                .chain(body.tangents[i].iter().map(|t| t.as_slice()));
            for (r, x) in rows.enumerate() {
                let y = linalg::mat_vec(&ct, x);
                for (j, v) in y.into_iter().enumerate() {
                    m[(r, j)] = v;
                }
            }
            if n > 0 {
                let tang = m.rows(1, n).into_owned();
                let r = rank_with(&tang, opts.rank_tol);
                if r < n {
                    return Err(Error::RankDeficient {
                        index: i,
                        rank: r,
                        expected: n,
                    });
                }
            }
            let ns = null_space_with(&m, opts.rank_tol);
            if ns.rank < n + 1 {
                return Err(Error::NullSpaceAmbiguous {
                    index: i,
                    dim: d - ns.rank,
                });
            }
            Ok(ns.vector)
        })
        .collect();

    // Orientation: the body must lie on the nonnegative side of each polar
    // hyperplane.
    let cm = c.matrix();
    let oriented: Vec<Option<Vec<f64>>> = raw
        .par_iter()
        .map(|r| {
            let b = r.as_ref().ok()?;
            let cb = linalg::mat_vec(cm, b);
            let side: f64 = body.samples.iter().map(|a| dot(a.coords(), &cb)).sum();
            let flip = if side != 0.0 {
                side < 0.0
            } else {
                b[d - 1] < 0.0
            };
            Some(if flip {
                b.iter().map(|x| -x).collect()
            } else {
                b.clone()
            })
        })
        .collect();

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for (i, r) in raw.into_iter().enumerate() {
        match r {
            Err(error) => skipped.push(SkippedSample { index: i, error }),
            Ok(_) => {
                let b = ProjectivePoint::from_vec_unchecked(
                    oriented[i].clone().expect("oriented output"),
                )
                .unit();
                let degenerate = body.neighbours(i).into_iter().any(|j| {
                    oriented[j].as_ref().is_some_and(|bj| {
                        ProjectivePoint::from_vec_unchecked(bj.clone())
                            .sine_to(&b)
                            .is_some_and(|s| s < opts.collapse_tol)
                    })
                });
                points.push(EnvelopePoint {
                    index: i,
                    ideal: b.last().abs() <= opts.ideal_tol,
                    oriented: b,
                    degenerate,
                });
            }
        }
    }
    Ok(Envelope { points, skipped })
}

fn rank_with(m: &DMatrix<f64>, rel: f64) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel * max).count()
}

fn null_space_with(m: &DMatrix<f64>, rel: f64) -> linalg::NullSpace {
    let mut ns = linalg::null_space(m);
    if rel != linalg::RANK_THRESHOLD {
        ns.rank = rank_with(m, rel);
    }
    ns
}

/// True iff `a_i^T C b >= -tol` for every boundary sample `a_i`, with `tol`
/// relative to the magnitude of the pairing terms.
pub fn polar_membership(c: &CostMatrix, body: &ConvexBody, b: &ProjectivePoint) -> Result<bool> {
    polar_membership_tol(c, body, b, DEFAULT_MEMBERSHIP_TOL)
}

pub fn polar_membership_tol(
    c: &CostMatrix,
    body: &ConvexBody,
    b: &ProjectivePoint,
    rel_tol: f64,
) -> Result<bool> {
    check_dim(c.size(), b.len())?;
    check_dim(c.size(), body.n + 2)?;
    if body.is_empty() {
        return Err(Error::InvalidInput("body has no boundary samples".into()));
    }
    Ok(all_nonnegative(c.matrix(), body.samples(), b, rel_tol))
}

/// Dual polarity: true iff `b_i^T C^T a >= -tol` for every sample `b_i` of
/// a body in the dual space. Vacuously true for an empty list.
pub fn dual_polar_membership(
    c: &CostMatrix,
    dual_samples: &[ProjectivePoint],
    a: &ProjectivePoint,
) -> Result<bool> {
    dual_polar_membership_tol(c, dual_samples, a, DEFAULT_MEMBERSHIP_TOL)
}

pub fn dual_polar_membership_tol(
    c: &CostMatrix,
    dual_samples: &[ProjectivePoint],
    a: &ProjectivePoint,
    rel_tol: f64,
) -> Result<bool> {
    check_dim(c.size(), a.len())?;
    for b in dual_samples {
        check_dim(c.size(), b.len())?;
    }
    Ok(all_nonnegative(
        &c.matrix().transpose(),
        dual_samples,
        a,
        rel_tol,
    ))
}

fn all_nonnegative(
    m: &DMatrix<f64>,
    xs: &[ProjectivePoint],
    y: &ProjectivePoint,
    rel_tol: f64,
) -> bool {
    xs.iter().all(|x| {
        let v = raw_pairing(m, x.coords(), y.coords());
        v >= -rel_tol * pairing_scale(m, x.coords(), y.coords())
    })
}

/// Outcome of a primal -> polar -> dual-polar round trip.
#[derive(Debug, Clone, Serialize)]
pub struct InvolutionReport {
    /// Largest distance between an original boundary point and its round trip.
    pub max_discrepancy: f64,
    /// Number of samples compared (finite at both ends).
    pub compared: usize,
}

/// Applies the polar envelope with `C`, rebuilds tangents on the image by
/// fourth-order finite differences along the sample layout, applies the dual
/// envelope with `C^T`, and measures how far the result lands from the
/// original boundary.
///
/// Distances are Euclidean between dehomogenized points, divided by
/// `max(1, |x|)` so that samples far from the origin are compared relatively.
pub fn involution_check(c: &CostMatrix, body: &ConvexBody) -> Result<InvolutionReport> {
    let opts = EnvelopeOptions::default();
    let forward = polar_boundary_envelope_with(c, body, &opts)?;
    if let Some(s) = forward.skipped.into_iter().next() {
        return Err(s.error);
    }
    let image: Vec<ProjectivePoint> = forward
        .points
        .into_iter()
        .map(|p| natural_lift(c, body, p.index, p.oriented))
        .collect();
    let tangents = finite_difference_tangents(&image, body.n, &body.layout)?;
    let dual_body = ConvexBody::new_unchecked_finite(body.n, image, tangents)?
        .with_layout(body.layout.clone())?;
    let back = polar_boundary_envelope_with(&c.transpose(), &dual_body, &opts)?;
    let mut back = back;
    if !back.skipped.is_empty() {
        return Err(back.skipped.swap_remove(0).error);
    }
    let mut worst = 0.0_f64;
    let mut compared = 0;
    for (i, x) in back.finite_points() {
        let Ok(orig) = body.samples[i].dehomogenize() else {
            continue;
        };
        worst = worst.max(relative_distance(&orig, &x));
        compared += 1;
    }
    Ok(InvolutionReport {
        max_discrepancy: worst,
        compared,
    })
}

/// Rescales an envelope output to `C^{-1} w`, where `w` is the generalized
/// cross product of the sample and its tangents. That representative depends
/// on the parameter as smoothly as the body itself does, which the unit-norm
/// one need not.
fn natural_lift(
    c: &CostMatrix,
    body: &ConvexBody,
    index: usize,
    b: ProjectivePoint,
) -> ProjectivePoint {
    let mut rows: Vec<&[f64]> = vec![body.samples[index].coords()];
    rows.extend(body.tangents[index].iter().map(Vec::as_slice));
    let v = linalg::mat_vec(&c.c_inv, &linalg::generalized_cross(&rows));
    let s = dot(b.coords(), &v);
    match b.scaled(s) {
        Ok(scaled) => scaled,
        Err(_) => b,
    }
}

/// `|x - y| / max(1, |x|, |y|)`.
pub fn relative_distance(x: &[f64], y: &[f64]) -> f64 {
    let d: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    d / 1.0_f64.max(norm(x)).max(norm(y))
}

/// Tangent directions of a sampled hypersurface in homogeneous coordinates,
/// differentiating with respect to the sample index along each layout axis.
///
/// Only the span matters to the envelope conditions, so the unit parameter
/// step is used throughout.
pub fn finite_difference_tangents(
    samples: &[ProjectivePoint],
    n: usize,
    layout: &SampleLayout,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let len = samples.len();
    let shape = match &layout.shape {
        Some(s) => s.clone(),
        None if n == 1 => vec![len],
        None => {
            return Err(Error::InvalidGrid(
                "finite differences need a grid shape when n > 1".into(),
            ))
        }
    };
    check_dim(n, shape.len())?;
    let aligned = align_signs(samples, &shape);
    let samples = aligned.as_slice();
    let periodic = layout.closed && n == 1;
    if periodic && len >= SPECTRAL_MIN {
        return Ok(spectral_derivative(samples)
            .into_iter()
            .map(|t| vec![t])
            .collect());
    }
    let mut out = vec![Vec::with_capacity(n); len];
    let mut strides = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    for (i, tangents) in out.iter_mut().enumerate() {
        for axis in 0..n {
            let stride = strides[axis];
            let m = shape[axis];
            let pos = (i / stride) % m;
            let base = i - pos * stride;
            let at = |k: usize| samples[base + k * stride].coords();
            tangents.push(derivative_1d(at, m, pos, periodic)?);
        }
    }
    Ok(out)
}

/// Representatives with signs flipped so that consecutive samples along the
/// last grid axis (and consecutive row starts) point the same way, making
/// the sequence a continuous lift of the projective curve.
fn align_signs(samples: &[ProjectivePoint], shape: &[usize]) -> Vec<ProjectivePoint> {
    let row = *shape.last().unwrap_or(&samples.len());
    let mut out: Vec<ProjectivePoint> = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let prev = if i % row != 0 {
            i - 1
        } else {
            i.saturating_sub(row)
        };
        let flip = i > 0 && dot(out[prev].coords(), s.coords()) < 0.0;
        out.push(if flip { s.negated() } else { s.clone() });
    }
    out
}

/// Closed chains at least this long are differentiated spectrally.
const SPECTRAL_MIN: usize = 16;

/// Derivative with respect to the sample index of a periodic sequence,
/// by multiplying Fourier coefficients by `i k` (Nyquist mode dropped).
///
/// A lift that comes back negated after one turn is continued to twice the
/// length as `[f, -f]`, which is periodic.
fn spectral_derivative(samples: &[ProjectivePoint]) -> Vec<Vec<f64>> {
    let len = samples.len();
    let d = samples[0].len();
    let anti = dot(samples[0].coords(), samples[len - 1].coords()) < 0.0;
    let m = if anti { 2 * len } else { len };
    let value = |j: usize, c: usize| {
        if j < len {
            samples[j].coords()[c]
        } else {
            -samples[j - len].coords()[c]
        }
    };
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(m);
    let inverse = planner.plan_fft_inverse(m);
    let mut out = vec![vec![0.0; d]; len];
    let mut buf = vec![Complex::new(0.0, 0.0); m];
    for c in 0..d {
        for (j, z) in buf.iter_mut().enumerate() {
            *z = Complex::new(value(j, c), 0.0);
        }
        forward.process(&mut buf);
        for (k, z) in buf.iter_mut().enumerate() {
            let freq = match (2 * k).cmp(&m) {
                std::cmp::Ordering::Less => k as f64,
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Greater => k as f64 - m as f64,
            };
            *z *= Complex::new(0.0, std::f64::consts::TAU * freq / m as f64);
        }
        inverse.process(&mut buf);
        for (row, z) in out.iter_mut().zip(&buf) {
            row[c] = z.re / m as f64;
        }
    }
    out
}

fn derivative_1d<'a>(
    at: impl Fn(usize) -> &'a [f64],
    m: usize,
    i: usize,
    periodic: bool,
) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::InvalidGrid(
            "need at least 2 samples per axis".into(),
        ));
    }
    let d = at(0).len();
    let combo = |terms: &[(isize, f64)], scale: f64| -> Vec<f64> {
        let mut v = vec![0.0; d];
        for &(off, w) in terms {
            let k = if periodic {
                (i as isize + off).rem_euclid(m as isize) as usize
            } else {
                (i as isize + off) as usize
            };
            for (vj, xj) in v.iter_mut().zip(at(k)) {
                *vj += w * xj;
            }
        }
        v.iter_mut().for_each(|x| *x /= scale);
        v
    };
    const CENTRAL4: [(isize, f64); 4] = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];
    if periodic && m >= 5 {
        return Ok(combo(&CENTRAL4, 12.0));
    }
    if periodic && m >= 3 {
        return Ok(combo(&[(-1, -1.0), (1, 1.0)], 2.0));
    }
    if m >= 5 {
        let v = if i >= 2 && i + 2 < m {
            combo(&CENTRAL4, 12.0)
        } else if i == 0 {
            combo(
                &[(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)],
                12.0,
            )
        } else if i == 1 {
            combo(
                &[(-1, -3.0), (0, -10.0), (1, 18.0), (2, -6.0), (3, 1.0)],
                12.0,
            )
        } else if i == m - 2 {
            combo(
                &[(1, 3.0), (0, 10.0), (-1, -18.0), (-2, 6.0), (-3, -1.0)],
                12.0,
            )
        } else {
            combo(
                &[(0, 25.0), (-1, -48.0), (-2, 36.0), (-3, -16.0), (-4, 3.0)],
                12.0,
            )
        };
        return Ok(v);
    }
    if m >= 3 {
        let v = if i == 0 {
            combo(&[(0, -3.0), (1, 4.0), (2, -1.0)], 2.0)
        } else if i == m - 1 {
            combo(&[(0, 3.0), (-1, -4.0), (-2, 1.0)], 2.0)
        } else {
            combo(&[(-1, -1.0), (1, 1.0)], 2.0)
        };
        return Ok(v);
    }
    Ok(if i == 0 {
        combo(&[(0, -1.0), (1, 1.0)], 1.0)
    } else {
        combo(&[(-1, -1.0), (0, 1.0)], 1.0)
    })
}
