//! The c-transform `F^c(eta) = inf_theta c(theta, eta) + F(theta)` for
//! quadratic costs, and the block cost matrix attached to such a cost.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::legendre::{Grid, SampledFunction};
use crate::linalg::{self, dot, mat_vec, MatrixEntries};
use crate::polarity::CostMatrix;

/// `c(theta, eta) = theta^T Cn theta + d |eta|^2 + e <theta, eta>
///   + <f_coef, theta> + <g_coef, eta> + h`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    pub cn: DMatrix<f64>,
    pub d: f64,
    pub e: f64,
    pub f_coef: Vec<f64>,
    pub g_coef: Vec<f64>,
    pub h: f64,
}

#[derive(Serialize, Deserialize)]
struct CostJson {
    #[serde(rename = "Cn")]
    cn: MatrixEntries,
    #[serde(default)]
    d: f64,
    #[serde(default)]
    e: f64,
    #[serde(default)]
    f_coef: Option<Vec<f64>>,
    #[serde(default)]
    g_coef: Option<Vec<f64>>,
    #[serde(default)]
    h: f64,
}

impl Serialize for QuadraticCost {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CostJson {
            cn: MatrixEntries::Rows(linalg::to_rows(&self.cn)),
            d: self.d,
            e: self.e,
            f_coef: Some(self.f_coef.clone()),
            g_coef: Some(self.g_coef.clone()),
            h: self.h,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuadraticCost {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = CostJson::deserialize(d)?;
        let n = match &raw.cn {
            MatrixEntries::Rows(rows) => rows.len(),
            MatrixEntries::Flat(v) => {
                let n = (v.len() as f64).sqrt().round() as usize;
                if n * n != v.len() {
                    return Err(D::Error::custom(
                        "flat Cn must have a square number of entries",
                    ));
                }
                n
            }
        };
        let cn = raw.cn.into_flat(n).map_err(D::Error::custom)?;
        QuadraticCost::new(
            linalg::from_row_major(n, &cn),
            raw.d,
            raw.e,
            raw.f_coef.unwrap_or_else(|| vec![0.0; n]),
            raw.g_coef.unwrap_or_else(|| vec![0.0; n]),
            raw.h,
        )
        .map_err(D::Error::custom)
    }
}

impl QuadraticCost {
    pub fn new(
        cn: DMatrix<f64>,
        d: f64,
        e: f64,
        f_coef: Vec<f64>,
        g_coef: Vec<f64>,
        h: f64,
    ) -> Result<Self> {
        let n = cn.nrows();
        if n == 0 || cn.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "Cn must be square and nonempty, got {}x{}",
                cn.nrows(),
                cn.ncols()
            )));
        }
        check_dim(n, f_coef.len())?;
        check_dim(n, g_coef.len())?;
        let finite = cn.iter().chain(&f_coef).chain(&g_coef).chain([&d, &e, &h]);
        if finite.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("quadratic cost"));
        }
        Ok(QuadraticCost {
            cn,
            d,
            e,
            f_coef,
            g_coef,
            h,
        })
    }

    /// Only the quadratic block, every other coefficient zero.
    pub fn block(cn: DMatrix<f64>) -> Result<Self> {
        let n = cn.nrows();
        Self::new(cn, 0.0, 0.0, vec![0.0; n], vec![0.0; n], 0.0)
    }

    /// `c(theta, eta) = -<theta, eta>`.
    pub fn negative_inner(n: usize) -> Self {
        Self::new(
            DMatrix::zeros(n, n),
            0.0,
            -1.0,
            vec![0.0; n],
            vec![0.0; n],
            0.0,
        )
        .expect("valid cost")
    }

    pub fn zero(n: usize) -> Self {
        Self::block(DMatrix::zeros(n, n)).expect("valid cost")
    }

    pub fn n(&self) -> usize {
        self.cn.nrows()
    }

    pub fn evaluate(&self, theta: &[f64], eta: &[f64]) -> f64 {
        dot(theta, &mat_vec(&self.cn, theta))
            + self.d * dot(eta, eta)
            + self.e * dot(theta, eta)
            + dot(&self.f_coef, theta)
            + dot(&self.g_coef, eta)
            + self.h
    }

    fn is_block_form(&self) -> bool {
        self.d == 0.0
            && self.e == 0.0
            && self.h == 0.0
            && self.f_coef.iter().chain(&self.g_coef).all(|&x| x == 0.0)
    }
}

/// Values of `F^c` on a dual grid and the minimizing primal node of each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CTransform {
    pub values: SampledFunction,
    pub argmin: Vec<usize>,
}

/// `F^c(eta_j) = min_i c(theta_i, eta_j) + F(theta_i)`; ties go to the
/// smallest index and `+inf` nodes never win.
pub fn c_transform(f: &SampledFunction, cost: &QuadraticCost, eta: &Grid) -> Result<CTransform> {
    if f.len() < 2 {
        return Err(Error::InvalidInput(
            "c-transform needs at least 2 grid points".into(),
        ));
    }
    check_dim(cost.n(), f.dim())?;
    check_dim(f.dim(), eta.dim())?;
    if f.finite_count() == 0 {
        return Err(Error::InvalidInput("function is +inf everywhere".into()));
    }
    let (values, argmin): (Vec<f64>, Vec<usize>) = (0..eta.len())
        .into_par_iter()
        .map(|j| {
            let e = eta.point(j);
            let mut best = f64::INFINITY;
            let mut arg = usize::MAX;
            for i in 0..f.len() {
                if f.is_infinite(i) {
                    continue;
                }
                let v = cost.evaluate(f.theta(i), e) + f.value(i);
                if arg == usize::MAX || v < best {
                    best = v;
                    arg = i;
                }
            }
            (best, arg)
        })
        .unzip();
    if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
        return Err(Error::NonFinite("c-transform values"));
    }
    Ok(CTransform {
        values: SampledFunction::new(eta.clone(), values)?,
        argmin,
    })
}

/// `[[Cn, 0, 0], [0, 0, 1], [0, 1, 0]]`. Only costs consisting of the
/// quadratic block alone are accepted.
pub fn cost_to_polarity_matrix(cost: &QuadraticCost) -> Result<CostMatrix> {
    if !cost.is_block_form() {
        return Err(Error::UnsupportedCost(
            "only the quadratic block Cn can be embedded; d, e, f_coef, g_coef and h must be zero"
                .into(),
        ));
    }
    let n = cost.n();
    let mut c = DMatrix::zeros(n + 2, n + 2);
    c.view_mut((0, 0), (n, n)).copy_from(&cost.cn);
    c[(n, n + 1)] = 1.0;
    c[(n + 1, n)] = 1.0;
    CostMatrix::from_matrix(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::legendre::conjugate_bruteforce;

    fn sampled(lo: f64, hi: f64, count: usize, f: impl Fn(f64) -> f64) -> SampledFunction {
        SampledFunction::sample(Grid::linspace(lo, hi, count).unwrap(), |t| f(t[0])).unwrap()
    }

    #[test]
    fn negative_inner_cost_gives_minus_conjugate() {
        let f = sampled(-3.0, 3.0, 601, |t| t * t + t + 3.0);
        let eta = Grid::linspace(-4.0, 4.0, 81).unwrap();
        let ct = c_transform(&f, &QuadraticCost::negative_inner(1), &eta).unwrap();
        let star = conjugate_bruteforce(&f, &eta).unwrap();
        for j in 0..eta.len() {
            assert!((ct.values.value(j) + star.dual.value(j)).abs() <= 1e-12);
            assert_eq!(ct.argmin[j], star.argmax[j]);
        }
    }

    #[test]
    fn zero_cost_gives_minimum() {
        let f = sampled(-2.0, 2.0, 41, |t| (t - 0.5).powi(2) + 1.0);
        let eta = Grid::linspace(-1.0, 1.0, 5).unwrap();
        let ct = c_transform(&f, &QuadraticCost::zero(1), &eta).unwrap();
        assert!(ct.values.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(ct.argmin.iter().all(|&i| f.theta(i)[0] == 0.5));
    }

    #[test]
    fn half_distance_cost_on_quadratic() {
        // 1/2 |theta - eta|^2 + 1/2 theta^2 is minimized at eta / 2
        let f = sampled(-4.0, 4.0, 8001, |t| 0.5 * t * t);
        let cost = QuadraticCost::new(
            DMatrix::from_element(1, 1, 0.5),
            0.5,
            -1.0,
            vec![0.0],
            vec![0.0],
            0.0,
        )
        .unwrap();
        let eta = Grid::linspace(-3.0, 3.0, 31).unwrap();
        let ct = c_transform(&f, &cost, &eta).unwrap();
        for j in 0..eta.len() {
            let e = eta.point(j)[0];
            assert!((ct.values.value(j) - 0.25 * e * e).abs() < 1e-6);
        }
    }

    #[test]
    fn ties_and_infinite_nodes() {
        let f = SampledFunction::from_1d(
            vec![-1.0, 0.0, 1.0, 2.0],
            vec![f64::INFINITY, 1.0, 1.0, f64::INFINITY],
        )
        .unwrap();
        let ct = c_transform(&f, &QuadraticCost::zero(1), &Grid::line(vec![0.0]).unwrap()).unwrap();
        assert_eq!(ct.argmin, vec![1]);
        assert_eq!(ct.values.value(0), 1.0);
        let one = SampledFunction::from_1d(vec![0.0], vec![0.0]).unwrap();
        assert!(c_transform(
            &one,
            &QuadraticCost::zero(1),
            &Grid::line(vec![0.0]).unwrap()
        )
        .is_err());
    }

    #[test]
    fn larger_function_has_larger_transform() {
        let f = sampled(-2.0, 2.0, 101, |t| t.abs());
        let g = sampled(-2.0, 2.0, 101, |t| t.abs() + 0.1 * t.sin().powi(2));
        let cost = QuadraticCost::new(
            DMatrix::from_element(1, 1, 0.3),
            -0.2,
            0.7,
            vec![0.1],
            vec![-0.4],
            2.0,
        )
        .unwrap();
        let eta = Grid::linspace(-3.0, 3.0, 25).unwrap();
        let cf = c_transform(&f, &cost, &eta).unwrap();
        let cg = c_transform(&g, &cost, &eta).unwrap();
        for j in 0..eta.len() {
            assert!(cg.values.value(j) >= cf.values.value(j));
        }
    }

    #[test]
    fn polarity_matrix_blocks() {
        let l = cost_to_polarity_matrix(&QuadraticCost::block(-DMatrix::identity(2, 2)).unwrap())
            .unwrap();
        assert_eq!(l.matrix(), CostMatrix::legendre(2).matrix());
        let one = cost_to_polarity_matrix(&QuadraticCost::block(DMatrix::identity(1, 1)).unwrap())
            .unwrap();
        assert_eq!(
            one.row_major(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]
        );
        let diag =
            QuadraticCost::block(DMatrix::from_diagonal(&nalgebra::dvector![-2.0, -3.0])).unwrap();
        let c = cost_to_polarity_matrix(&diag).unwrap();
        assert_eq!(c.n(), 2);
        // expanding along the couplers gives -det(Cn)
        assert!((c.matrix().determinant() + 6.0).abs() < 1e-12);
    }

    #[test]
    fn polarity_matrix_rejections() {
        assert!(matches!(
            cost_to_polarity_matrix(&QuadraticCost::negative_inner(1)),
            Err(Error::UnsupportedCost(_))
        ));
        assert!(matches!(
            cost_to_polarity_matrix(&QuadraticCost::zero(2)),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{"Cn": [[-1.0]], "d": 0.5, "e": -1.0, "f_coef": [0.25], "h": 2.0}"#;
        let cost: QuadraticCost = serde_json::from_str(json).unwrap();
        assert_eq!(cost.g_coef, vec![0.0]);
        assert_eq!(cost.evaluate(&[2.0], &[1.0]), -4.0 + 0.5 - 2.0 + 0.5 + 2.0);
        let back: QuadraticCost =
            serde_json::from_str(&serde_json::to_string(&cost).unwrap()).unwrap();
        assert_eq!(back, cost);
        let flat: QuadraticCost = serde_json::from_str(r#"{"Cn": [1, 0, 0, 1]}"#).unwrap();
        assert_eq!(flat.n(), 2);
        assert!(serde_json::from_str::<QuadraticCost>(r#"{"Cn": [1, 0, 0]}"#).is_err());
        assert!(
            serde_json::from_str::<QuadraticCost>(r#"{"Cn": [[1.0]], "f_coef": [1, 2]}"#).is_err()
        );
    }
}
