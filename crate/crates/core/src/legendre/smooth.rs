use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm};

/// A differentiable, strictly convex function on an open domain of `R^n`.
pub trait SmoothConvex: Sync {
    fn dim(&self) -> usize;
    fn value(&self, theta: &[f64]) -> f64;
    fn gradient(&self, theta: &[f64]) -> Vec<f64>;
}

/// `Q(theta) = |theta - center|^2 / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSquaredNorm {
    pub center: Vec<f64>,
}

impl HalfSquaredNorm {
    pub fn new(dim: usize) -> Self {
        HalfSquaredNorm {
            center: vec![0.0; dim],
        }
    }

    pub fn centered(center: Vec<f64>) -> Self {
        HalfSquaredNorm { center }
    }
}

impl SmoothConvex for HalfSquaredNorm {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        0.5 * theta
            .iter()
            .zip(&self.center)
            .map(|(t, c)| (t - c) * (t - c))
            .sum::<f64>()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.center).map(|(t, c)| t - c).collect()
    }
}

/// `a theta^2 + b theta + c` with `a > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic1d {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SmoothConvex for Quadratic1d {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let t = theta[0];
        self.a * t * t + self.b * t + self.c
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        vec![2.0 * self.a * theta[0] + self.b]
    }
}

/// Adapts a pair of closures.
pub struct FnConvex<F, G> {
    dim: usize,
    f: F,
    grad: G,
}

impl<F, G> FnConvex<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    pub fn new(dim: usize, f: F, grad: G) -> Self {
        FnConvex { dim, f, grad }
    }
}

impl<F, G> SmoothConvex for FnConvex<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64]) -> f64 {
        (self.f)(theta)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        (self.grad)(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothOptions {
    pub max_iter: usize,
    /// Residual target relative to `1 + |eta|`.
    pub tol: f64,
}

impl Default for SmoothOptions {
    fn default() -> Self {
        SmoothOptions {
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothConjugate {
    pub theta: Vec<f64>,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// `F*(eta)` for a smooth strictly convex `F` by solving `grad F(theta) = eta`.
pub fn conjugate_smooth(
    f: &dyn SmoothConvex,
    eta: &[f64],
    theta0: &[f64],
) -> Result<SmoothConjugate> {
    conjugate_smooth_with(f, eta, theta0, SmoothOptions::default())
}

pub fn conjugate_smooth_with(
    f: &dyn SmoothConvex,
    eta: &[f64],
    theta0: &[f64],
    opts: SmoothOptions,
) -> Result<SmoothConjugate> {
    check_dim(f.dim(), eta.len())?;
    check_dim(f.dim(), theta0.len())?;
    if eta.iter().chain(theta0).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("conjugation point"));
    }
    let target = opts.tol * (1.0 + norm(eta));
    let (theta, iterations) = if f.dim() == 1 {
        solve_1d(f, eta[0], theta0[0], target, opts.max_iter)?
    } else {
        solve_newton(f, eta, theta0, target, opts.max_iter)?
    };
    let residual = residual(f, &theta, eta);
    Ok(SmoothConjugate {
        value: dot(&theta, eta) - f.value(&theta),
        theta,
        residual,
        iterations,
    })
}

fn residual(f: &dyn SmoothConvex, theta: &[f64], eta: &[f64]) -> f64 {
    let g = f.gradient(theta);
    g.iter()
        .zip(eta)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Bracket the root of the increasing `F'(theta) - eta`, then Illinois
/// regula falsi with a bisection fallback.
fn solve_1d(
    f: &dyn SmoothConvex,
    eta: f64,
    theta0: f64,
    target: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let g = |t: f64| f.gradient(&[t])[0] - eta;
    let g0 = g(theta0);
    if g0.is_nan() {
        return Err(Error::OutOfRange(format!("gradient undefined at {theta0}")));
    }
    if g0.abs() <= target {
        return Ok((vec![theta0], 0));
    }
    let dir = if g0 < 0.0 { 1.0 } else { -1.0 };
    let mut step = theta0.abs().max(1.0);
    let (mut a, mut ga) = (theta0, g0);
    let (mut b, mut gb);
    let mut expansions = 0;
    loop {
        b = theta0 + dir * step;
        gb = g(b);
        if gb.is_nan() || !b.is_finite() {
            return Err(Error::OutOfRange(format!(
                "could not bracket gradient value {eta}"
            )));
        }
        if gb.abs() <= target {
            return Ok((vec![b], 0));
        }
        if gb.signum() != ga.signum() {
            break;
        }
        a = b;
        ga = gb;
        step *= 2.0;
        expansions += 1;
        if expansions > 1100 {
            return Err(Error::OutOfRange(format!(
                "could not bracket gradient value {eta}"
            )));
        }
    }
    let mut side = 0i8;
    for it in 1..=max_iter {
        let mut t = if ga.is_finite() && gb.is_finite() {
            (a * gb - b * ga) / (gb - ga)
        } else {
            0.5 * (a + b)
        };
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if !(t > lo && t < hi) {
            t = 0.5 * (a + b);
        }
        let gt = g(t);
        if gt.is_nan() {
            return Err(Error::OutOfRange(format!("gradient undefined at {t}")));
        }
        if gt.abs() <= target || (hi - lo) <= 4.0 * f64::EPSILON * t.abs().max(f64::MIN_POSITIVE) {
            if gt.abs() > target {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual: gt.abs(),
                });
            }
            return Ok((vec![t], it));
        }
        if gt.signum() == gb.signum() {
            b = t;
            gb = gt;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = t;
            ga = gt;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
        // keep the interval shrinking geometrically when regula falsi stalls
        if it % 8 == 0 {
            let m = 0.5 * (a + b);
            let gm = g(m);
            if gm.abs() <= target {
                return Ok((vec![m], it));
            }
            if gm.signum() == gb.signum() {
                b = m;
                gb = gm;
            } else {
                a = m;
                ga = gm;
            }
            side = 0;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: g(0.5 * (a + b)).abs(),
    })
}

fn fd_hessian(f: &dyn SmoothConvex, theta: &[f64]) -> DMatrix<f64> {
    let n = theta.len();
    let mut h = DMatrix::zeros(n, n);
    let mut p = theta.to_vec();
    for j in 0..n {
        let step = 1e-5 * theta[j].abs().max(1.0);
        p[j] = theta[j] + step;
        let gp = f.gradient(&p);
        p[j] = theta[j] - step;
        let gm = f.gradient(&p);
        p[j] = theta[j];
        for i in 0..n {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    (&h + h.transpose()) * 0.5
}

/// Damped Newton on `F(theta) - <theta, eta>` with a finite-difference
/// Hessian and Armijo backtracking.
fn solve_newton(
    f: &dyn SmoothConvex,
    eta: &[f64],
    theta0: &[f64],
    target: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let merit = |t: &[f64]| f.value(t) - dot(t, eta);
    let mut theta = theta0.to_vec();
    let mut phi = merit(&theta);
    if !phi.is_finite() {
        return Err(Error::OutOfRange(
            "starting point outside the domain".into(),
        ));
    }
    for it in 0..max_iter {
        let r: Vec<f64> = f
            .gradient(&theta)
            .iter()
            .zip(eta)
            .map(|(g, e)| g - e)
            .collect();
        let rn = norm(&r);
        if rn <= target {
            return Ok((theta, it));
        }
        let rv = DVector::from_column_slice(&r);
        let d = match fd_hessian(f, &theta).cholesky() {
            Some(ch) => -ch.solve(&rv),
            None => -rv.clone(),
        };
        let slope = rv.dot(&d);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let trial: Vec<f64> = theta.iter().zip(d.iter()).map(|(x, s)| x + t * s).collect();
            let pt = merit(&trial);
            if pt.is_finite() {
                let better_merit = pt <= phi + 1e-4 * t * slope;
                let better_residual = {
                    let g = f.gradient(&trial);
                    let rr: f64 = g
                        .iter()
                        .zip(eta)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    rr < rn
                };
                if better_merit || better_residual {
                    theta = trial;
                    phi = pt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: it + 1,
                residual: rn,
            });
        }
    }
    let rn = residual(f, &theta, eta);
    if rn <= target {
        Ok((theta, max_iter))
    } else {
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual: rn,
        })
    }
}
