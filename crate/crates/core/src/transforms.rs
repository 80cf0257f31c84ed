//! Generalized Legendre-Fenchel transforms as affine deformations of
//! homogeneous coordinates, and the factorizations of an arbitrary quadratic
//! polarity through the Legendre one: `Delta_C = T o Delta_L` with
//! `M_T = C^{-1} C_L`, and `Delta_C = Delta_L o S` with `M_S = C_L C^T`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::legendre::{conjugate, Grid, SampledFunction};
use crate::linalg::{self, checked_inverse, dot, fro, mat_vec, norm, MatrixEntries};
use crate::polarity::{
    legendre_matrix, polar_boundary_envelope, relative_distance, ConvexBody, CostMatrix, Envelope,
};
use crate::projective::ProjectivePoint;

/// A unit-norm image whose last coordinate is below this is ideal.
pub const IDEAL_TOL: f64 = 1e-12;

/// An invertible `(n+2) x (n+2)` matrix acting on homogeneous coordinates.
#[derive(Debug, Clone)]
pub struct AffineDeformation {
    n: usize,
    m: DMatrix<f64>,
    m_inv: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct DeformationJson {
    n: usize,
    #[serde(rename = "M")]
    m: MatrixEntries,
}

impl Serialize for AffineDeformation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DeformationJson {
            n: self.n,
            m: MatrixEntries::Rows(linalg::to_rows(&self.m)),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AffineDeformation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = DeformationJson::deserialize(d)?;
        let flat = raw
            .m
            .into_flat(raw.n + 2)
            .map_err(serde::de::Error::custom)?;
        if flat.len() != (raw.n + 2) * (raw.n + 2) {
            return Err(serde::de::Error::custom("wrong number of matrix entries"));
        }
        AffineDeformation::new(linalg::from_row_major(raw.n + 2, &flat))
            .map_err(serde::de::Error::custom)
    }
}

impl AffineDeformation {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let (r, c) = m.shape();
        check_dim(r, c)?;
        if r < 2 {
            return Err(Error::InvalidInput(
                "deformation must be at least 2x2".into(),
            ));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("deformation matrix"));
        }
        let m_inv = checked_inverse(&m)?;
        Ok(AffineDeformation { n: r - 2, m, m_inv })
    }

    pub fn identity(n: usize) -> Self {
        let m = DMatrix::identity(n + 2, n + 2);
        AffineDeformation {
            n,
            m_inv: m.clone(),
            m,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.m_inv
    }

    /// `M [b]`, and whether the image is (numerically) ideal.
    pub fn apply(&self, p: &ProjectivePoint) -> Result<(ProjectivePoint, bool)> {
        check_dim(self.n + 2, p.len())?;
        let v = mat_vec(&self.m, p.coords());
        let ideal = v[v.len() - 1].abs() <= IDEAL_TOL * norm(&v);
        Ok((ProjectivePoint::new(v)?, ideal))
    }
}

/// `C = C_L M_T^{-1}`: the polar under `C` is the Legendre polar mapped by `M_T`.
pub fn decompose_t(c: &CostMatrix) -> Result<AffineDeformation> {
    AffineDeformation::new(c.inverse() * legendre_matrix(c.n()))
}

/// `C = M_S^T C_L`: the polar under `C` is the Legendre polar of `M_S A`.
pub fn decompose_s(c: &CostMatrix) -> Result<AffineDeformation> {
    AffineDeformation::new(legendre_matrix(c.n()) * c.matrix().transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TsResiduals {
    /// `|M_T - C_L M_S^{-T} C_L| / |M_T|`.
    pub residual_t: f64,
    /// `|M_S - C_L M_T^{-T} C_L| / |M_S|`.
    pub residual_s: f64,
}

/// Residuals of the identities linking the two factorizations of one `C`.
pub fn relate_t_s(mt: &AffineDeformation, ms: &AffineDeformation) -> Result<TsResiduals> {
    check_dim(mt.n, ms.n)?;
    let cl = legendre_matrix(mt.n);
    let from_s = &cl * ms.inverse().transpose() * &cl;
    let from_t = &cl * mt.inverse().transpose() * &cl;
    Ok(TsResiduals {
        residual_t: linalg::relative_residual(&mt.m, &from_s),
        residual_s: linalg::relative_residual(&ms.m, &from_t),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionResiduals {
    /// `|C M_T - C_L| / |C_L|`, the identity `C = C_L M_T^{-1}` without
    /// inverting `M_T` a second time.
    pub t_factorization: f64,
    /// `|C - M_S^T C_L| / |C|`.
    pub s_factorization: f64,
    #[serde(flatten)]
    pub t_s: TsResiduals,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub n: usize,
    #[serde(rename = "M_T")]
    pub m_t: Vec<Vec<f64>>,
    #[serde(rename = "M_S")]
    pub m_s: Vec<Vec<f64>>,
    pub residuals: DecompositionResiduals,
}

pub fn decomposition_report(c: &CostMatrix) -> Result<DecompositionReport> {
    let mt = decompose_t(c)?;
    let ms = decompose_s(c)?;
    let cl = legendre_matrix(c.n());
    Ok(DecompositionReport {
        n: c.n(),
        m_t: linalg::to_rows(&mt.m),
        m_s: linalg::to_rows(&ms.m),
        residuals: DecompositionResiduals {
            t_factorization: linalg::relative_residual(&cl, &(c.matrix() * &mt.m)),
            s_factorization: linalg::relative_residual(c.matrix(), &(ms.m.transpose() * &cl)),
            t_s: relate_t_s(&mt, &ms)?,
        },
    })
}

/// A body mapped through a deformation.
#[derive(Debug, Clone)]
pub struct DeformedBody {
    pub body: ConvexBody,
    /// Per sample: the image lies at infinity.
    pub ideal: Vec<bool>,
}

/// Maps samples and tangents through `M`, rescaling each sample to unit
/// norm (positive factor, so orientation is kept).
pub fn apply_deformation(m: &AffineDeformation, body: &ConvexBody) -> Result<DeformedBody> {
    check_dim(m.n + 2, body.n() + 2)?;
    let mut samples = Vec::with_capacity(body.len());
    let mut ideal = Vec::with_capacity(body.len());
    for s in body.samples() {
        let (p, flag) = m.apply(s)?;
        samples.push(p.unit());
        ideal.push(flag);
    }
    let tangents = body
        .tangents()
        .iter()
        .map(|ts| ts.iter().map(|t| mat_vec(&m.m, t)).collect())
        .collect();
    let mapped = ConvexBody::new_unchecked_finite(body.n(), samples, tangents)?
        .with_layout(body.layout().clone())?;
    Ok(DeformedBody {
        body: mapped,
        ideal,
    })
}

fn read_square(
    entries: MatrixEntries,
    n: usize,
    name: &str,
) -> std::result::Result<DMatrix<f64>, String> {
    let flat = entries.into_flat(n)?;
    if flat.len() != n * n {
        return Err(format!("{name} must be {n}x{n}"));
    }
    Ok(DMatrix::from_row_slice(n, n, &flat))
}

/// Parameters of `eta -> mu F*(E eta + f) + <eta, g> + h`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSideParams {
    pub mu: f64,
    pub e: DMatrix<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub h: f64,
}

#[derive(Serialize, Deserialize)]
struct DualSideJson {
    mu: f64,
    #[serde(rename = "E")]
    e: MatrixEntries,
    f: Vec<f64>,
    g: Vec<f64>,
    h: f64,
}

impl Serialize for DualSideParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DualSideJson {
            mu: self.mu,
            e: MatrixEntries::Rows(linalg::to_rows(&self.e)),
            f: self.f.clone(),
            g: self.g.clone(),
            h: self.h,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DualSideParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = DualSideJson::deserialize(d)?;
        let n = raw.f.len();
        let e = read_square(raw.e, n, "E").map_err(serde::de::Error::custom)?;
        DualSideParams::new(raw.mu, e, raw.f, raw.g, raw.h).map_err(serde::de::Error::custom)
    }
}

fn check_affine(mu: f64, m: &DMatrix<f64>, u: &[f64], v: &[f64], w: f64) -> Result<()> {
    let n = u.len();
    check_dim(n, v.len())?;
    check_dim(n, m.nrows())?;
    check_dim(n, m.ncols())?;
    if mu.is_nan() || mu <= 0.0 || !mu.is_finite() {
        return Err(Error::InvalidInput(format!(
            "mu must be positive, got {mu}"
        )));
    }
    if m.iter().chain(u).chain(v).any(|x| !x.is_finite()) || !w.is_finite() {
        return Err(Error::NonFinite("transform parameters"));
    }
    checked_inverse(m)?;
    Ok(())
}

impl DualSideParams {
    pub fn new(mu: f64, e: DMatrix<f64>, f: Vec<f64>, g: Vec<f64>, h: f64) -> Result<Self> {
        check_affine(mu, &e, &f, &g, h)?;
        Ok(DualSideParams { mu, e, f, g, h })
    }

    pub fn identity(n: usize) -> Self {
        DualSideParams {
            mu: 1.0,
            e: DMatrix::identity(n, n),
            f: vec![0.0; n],
            g: vec![0.0; n],
            h: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// The homogeneous map sending the graph point `(xi, F*(xi), 1)` to
    /// `(eta, (TF)(eta), 1)` with `xi = E eta + f`:
    ///
    /// ```text
    /// [ E^{-1}         0    -E^{-1} f            ]
    /// [ (E^{-T} g)^T   mu   h - <E^{-1} f, g>    ]
    /// [ 0              0    1                    ]
    /// ```
    pub fn deformation(&self) -> Result<AffineDeformation> {
        let n = self.n();
        let e_inv = checked_inverse(&self.e)?;
        let e_inv_f = mat_vec(&e_inv, &self.f);
        let e_inv_t_g = mat_vec(&e_inv.transpose(), &self.g);
        let mut m = DMatrix::zeros(n + 2, n + 2);
        m.view_mut((0, 0), (n, n)).copy_from(&e_inv);
        for i in 0..n {
            m[(i, n + 1)] = -e_inv_f[i];
            m[(n, i)] = e_inv_t_g[i];
        }
        m[(n, n)] = self.mu;
        m[(n, n + 1)] = self.h - dot(&e_inv_f, &self.g);
        m[(n + 1, n + 1)] = 1.0;
        AffineDeformation::new(m)
    }
}

/// Parameters of `eta -> (mu F(A theta + b))*(eta) + <eta, c> + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSideParams {
    pub mu: f64,
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

#[derive(Serialize, Deserialize)]
struct PrimalSideJson {
    mu: f64,
    #[serde(rename = "A")]
    a: MatrixEntries,
    b: Vec<f64>,
    c: Vec<f64>,
    d: f64,
}

impl Serialize for PrimalSideParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PrimalSideJson {
            mu: self.mu,
            a: MatrixEntries::Rows(linalg::to_rows(&self.a)),
            b: self.b.clone(),
            c: self.c.clone(),
            d: self.d,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PrimalSideParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PrimalSideJson::deserialize(d)?;
        let n = raw.b.len();
        let a = read_square(raw.a, n, "A").map_err(serde::de::Error::custom)?;
        PrimalSideParams::new(raw.mu, a, raw.b, raw.c, raw.d).map_err(serde::de::Error::custom)
    }
}

impl PrimalSideParams {
    pub fn new(mu: f64, a: DMatrix<f64>, b: Vec<f64>, c: Vec<f64>, d: f64) -> Result<Self> {
        check_affine(mu, &a, &b, &c, d)?;
        Ok(PrimalSideParams { mu, a, b, c, d })
    }

    pub fn identity(n: usize) -> Self {
        PrimalSideParams {
            mu: 1.0,
            a: DMatrix::identity(n, n),
            b: vec![0.0; n],
            c: vec![0.0; n],
            d: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }
}

/// Multilinear interpolation of `f` at `x`. Points outside the grid box
/// (beyond a relative slack of `1e-12`) are rejected.
pub fn interpolate(f: &SampledFunction, x: &[f64]) -> Result<f64> {
    check_dim(f.dim(), x.len())?;
    let axes = f
        .grid()
        .axes()
        .ok_or_else(|| Error::InvalidGrid("interpolation needs a rectangular grid".into()))?;
    let dim = axes.len();
    let mut cell = Vec::with_capacity(dim);
    for (k, axis) in axes.iter().enumerate() {
        let (lo, hi) = (axis[0], axis[axis.len() - 1]);
        let slack = 1e-12 * (hi - lo).abs().max(1.0);
        let xk = x[k];
        if !(xk >= lo - slack && xk <= hi + slack) {
            return Err(Error::OutOfGrid { point: x.to_vec() });
        }
        if axis.len() == 1 {
            cell.push((0usize, 0.0));
            continue;
        }
        let xk = xk.clamp(lo, hi);
        let j = axis.partition_point(|&v| v <= xk);
        let i = j.saturating_sub(1).min(axis.len() - 2);
        let t = ((xk - axis[i]) / (axis[i + 1] - axis[i])).clamp(0.0, 1.0);
        cell.push((i, t));
    }
    let mut strides = vec![1usize; dim];
    for k in (0..dim.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * axes[k + 1].len();
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << dim) {
        let mut w = 1.0;
        let mut idx = 0;
        for k in 0..dim {
            let (i, t) = cell[k];
            if corner >> k & 1 == 1 {
                w *= t;
                idx += (i + 1) * strides[k];
            } else {
                w *= 1.0 - t;
                idx += i * strides[k];
            }
        }
        if w == 0.0 {
            continue;
        }
        let v = f.value(idx);
        if v == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        acc += w * v;
    }
    Ok(acc)
}

/// `(TF)(eta) = mu F*(E eta + f) + <eta, g> + h` on `eta`, reading `F*` from
/// samples by multilinear interpolation.
pub fn generalized_lft_dual_side(
    fstar: &SampledFunction,
    p: &DualSideParams,
    eta: &Grid,
) -> Result<SampledFunction> {
    check_dim(p.n(), fstar.dim())?;
    check_dim(p.n(), eta.dim())?;
    let values = (0..eta.len())
        .into_par_iter()
        .map(|j| {
            let e = eta.point(j);
            let xi: Vec<f64> = mat_vec(&p.e, e)
                .iter()
                .zip(&p.f)
                .map(|(a, b)| a + b)
                .collect();
            let v = interpolate(fstar, &xi)?;
            Ok(p.mu * v + dot(e, &p.g) + p.h)
        })
        .collect::<Result<Vec<f64>>>()?;
    SampledFunction::new(eta.clone(), values)
}

/// `(mu F(A theta + b))*(eta) + <eta, c> + d` on `eta`.
///
/// `G(theta) = mu F(A theta + b)` is sampled exactly at the preimages
/// `theta_i = A^{-1}(x_i - b)` of the nodes of `f`, then conjugated by direct
/// search (linear-time in one dimension).
pub fn generalized_lft_primal_side(
    f: &SampledFunction,
    p: &PrimalSideParams,
    eta: &Grid,
) -> Result<SampledFunction> {
    check_dim(p.n(), f.dim())?;
    check_dim(p.n(), eta.dim())?;
    let a_inv = checked_inverse(&p.a)?;
    let mut nodes: Vec<(Vec<f64>, f64)> = (0..f.len())
        .map(|i| {
            let shifted: Vec<f64> = f.theta(i).iter().zip(&p.b).map(|(x, b)| x - b).collect();
            (mat_vec(&a_inv, &shifted), p.mu * f.value(i))
        })
        .collect();
    let g = if p.n() == 1 {
        nodes.sort_by(|x, y| x.0[0].partial_cmp(&y.0[0]).expect("finite"));
        let (theta, values): (Vec<f64>, Vec<f64>) =
            nodes.into_iter().map(|(t, v)| (t[0], v)).unzip();
        SampledFunction::from_1d(theta, values)?
    } else {
        let (theta, values): (Vec<Vec<f64>>, Vec<f64>) = nodes.into_iter().unzip();
        SampledFunction::new(Grid::scattered(p.n(), theta)?, values)?
    };
    let star = conjugate(&g, eta, true)?;
    let values = (0..eta.len())
        .map(|j| star.dual.value(j) + dot(eta.point(j), &p.c) + p.d)
        .collect();
    SampledFunction::new(eta.clone(), values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub max_discrepancy: f64,
    pub compared: usize,
}

fn is_ideal(v: &[f64]) -> bool {
    v[v.len() - 1].abs() <= IDEAL_TOL * norm(v)
}

/// Index-matched distance between two sets of envelope points: relative
/// distance of affine points when both are finite, sine of the angle between
/// homogeneous vectors otherwise.
fn compare(left: &Envelope, right: &[(usize, Vec<f64>)]) -> TheoremCheck {
    let mut worst = 0.0_f64;
    let mut compared = 0;
    for (index, v) in right {
        let Some(l) = left.get(*index) else { continue };
        let lv = l.oriented.coords();
        let d = if !l.ideal && !is_ideal(v) {
            let w = v[v.len() - 1];
            let x: Vec<f64> = v[..v.len() - 1].iter().map(|c| c / w).collect();
            let y = l.oriented.dehomogenize().expect("finite");
            relative_distance(&y, &x)
        } else {
            let p = ProjectivePoint::from_vec_unchecked(lv.to_vec());
            let q = ProjectivePoint::from_vec_unchecked(v.clone());
            p.sine_to(&q).unwrap_or(f64::INFINITY)
        };
        worst = worst.max(d);
        compared += 1;
    }
    TheoremCheck {
        max_discrepancy: worst,
        compared,
    }
}

/// Compares the `C`-polar boundary with the Legendre-polar boundary mapped
/// by `M_T`.
pub fn verify_thm_t(c: &CostMatrix, body: &ConvexBody) -> Result<TheoremCheck> {
    let left = polar_boundary_envelope(c, body)?;
    let mt = decompose_t(c)?;
    let legendre = polar_boundary_envelope(&CostMatrix::legendre(c.n()), body)?;
    let right: Vec<(usize, Vec<f64>)> = legendre
        .points
        .iter()
        .map(|p| (p.index, mat_vec(&mt.m, p.oriented.coords())))
        .collect();
    Ok(compare(&left, &right))
}

/// Compares the `C`-polar boundary with the Legendre-polar boundary of the
/// body mapped by `M_S`.
pub fn verify_thm_s(c: &CostMatrix, body: &ConvexBody) -> Result<TheoremCheck> {
    let left = polar_boundary_envelope(c, body)?;
    let ms = decompose_s(c)?;
    let moved = apply_deformation(&ms, body)?;
    let legendre = polar_boundary_envelope(&CostMatrix::legendre(c.n()), &moved.body)?;
    let right: Vec<(usize, Vec<f64>)> = legendre
        .points
        .iter()
        .map(|p| (p.index, p.oriented.coords().to_vec()))
        .collect();
    Ok(compare(&left, &right))
}

/// Frobenius norm of `a - b`.
pub fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    fro(&(a - b))
}
