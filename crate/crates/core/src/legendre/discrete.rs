use rayon::prelude::*;
use serde::Serialize;

use super::sampled::{linspace, Grid, SampledFunction};
use crate::error::{check_dim, Error, Result};
use crate::linalg::dot;

/// Conjugate values on a dual grid together with the maximizing primal node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conjugate {
    pub dual: SampledFunction,
    pub argmax: Vec<usize>,
}

/// A sampled function and a sampled conjugate of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugatePair {
    pub primal: SampledFunction,
    pub dual: SampledFunction,
}

impl ConjugatePair {
    /// Smallest `F(theta_i) + F*(eta_j) - <theta_i, eta_j>` over all finite
    /// pairs; nonnegative for a genuine conjugate.
    pub fn min_fenchel_young_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for i in 0..self.primal.len() {
            let fi = self.primal.value(i);
            if !fi.is_finite() {
                continue;
            }
            for j in 0..self.dual.len() {
                let gj = self.dual.value(j);
                if !gj.is_finite() {
                    continue;
                }
                gap = gap.min(fi + gj - dot(self.primal.theta(i), self.dual.theta(j)));
            }
        }
        gap
    }
}

fn check_inputs(f: &SampledFunction, eta: &Grid) -> Result<()> {
    if f.len() < 2 {
        return Err(Error::InvalidInput(
            "conjugation needs at least 2 grid points".into(),
        ));
    }
    check_dim(f.dim(), eta.dim())?;
    if f.finite_count() == 0 {
        return Err(Error::InvalidInput("function is +inf everywhere".into()));
    }
    Ok(())
}

/// `F*(eta_j) = max_i <theta_i, eta_j> - F(theta_i)` by direct search.
///
/// Ties go to the smallest index; `+inf` nodes never win.
pub fn conjugate_bruteforce(f: &SampledFunction, eta: &Grid) -> Result<Conjugate> {
    check_inputs(f, eta)?;
    let (values, argmax): (Vec<f64>, Vec<usize>) = (0..eta.len())
        .into_par_iter()
        .map(|j| {
            let e = eta.point(j);
            let mut best = f64::NEG_INFINITY;
            let mut arg = usize::MAX;
            for i in 0..f.len() {
                let fi = f.value(i);
                if fi == f64::INFINITY {
                    continue;
                }
                let v = dot(f.theta(i), e) - fi;
                if arg == usize::MAX || v > best {
                    best = v;
                    arg = i;
                }
            }
            (best, arg)
        })
        .unzip();
    Ok(Conjugate {
        dual: SampledFunction::new(eta.clone(), values)?,
        argmax,
    })
}

/// Abscissae closer than this many ulps are treated as one node.
const MERGE_ULPS: f64 = 64.0;

fn nearly_equal(a: f64, b: f64) -> bool {
    (b - a).abs() <= MERGE_ULPS * f64::EPSILON * a.abs().max(b.abs())
}

/// Indices of the lower convex hull of the finite samples, left to right.
/// Interior points within rounding of a chord are dropped, and of two nodes with nearly equal
/// abscissae only the lower one is kept.
fn lower_hull(f: &SampledFunction) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..f.len() {
        if f.is_infinite(i) {
            continue;
        }
        let (x2, y2) = (f.theta(i)[0], f.value(i));
        if let Some(&last) = hull.last() {
            if nearly_equal(f.theta(last)[0], x2) {
                if y2 >= f.value(last) {
                    continue;
                }
                hull.pop();
            }
        }
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let (x0, y0) = (f.theta(a)[0], f.value(a));
            let (x1, y1) = (f.theta(b)[0], f.value(b));
            // keep b only if it lies below the chord a-c by more than rounding
            let cross = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0);
            let noise = 4.0 * f64::EPSILON * (y0.abs() + y1.abs() + y2.abs()) * (x2 - x0);
            if cross > noise {
                break;
            }
            hull.pop();
        }
        hull.push(i);
    }
    hull
}

/// One-dimensional conjugate in `O(len + eta.len())` by walking the lower
/// convex hull with a monotone pointer.
pub fn conjugate_fast_1d(f: &SampledFunction, eta: &Grid) -> Result<Conjugate> {
    check_inputs(f, eta)?;
    check_dim(1, f.dim())?;
    let hull = lower_hull(f);
    let value = |i: usize, e: f64| dot(f.theta(i), &[e]) - f.value(i);
    let mut k = 0;
    let mut values = Vec::with_capacity(eta.len());
    let mut argmax = Vec::with_capacity(eta.len());
    for j in 0..eta.len() {
        let e = eta.point(j)[0];
        while k + 1 < hull.len() && value(hull[k + 1], e) > value(hull[k], e) {
            k += 1;
        }
        values.push(value(hull[k], e));
        argmax.push(hull[k]);
    }
    Ok(Conjugate {
        dual: SampledFunction::new(eta.clone(), values)?,
        argmax,
    })
}

/// Picks the linear-time path for one-dimensional input.
pub fn conjugate(f: &SampledFunction, eta: &Grid, fast: bool) -> Result<Conjugate> {
    if fast && f.dim() == 1 {
        conjugate_fast_1d(f, eta)
    } else {
        conjugate_bruteforce(f, eta)
    }
}

/// Slopes between consecutive finite samples of a one-dimensional function.
fn adjacent_slopes(f: &SampledFunction) -> Vec<f64> {
    let finite: Vec<usize> = (0..f.len()).filter(|&i| !f.is_infinite(i)).collect();
    finite
        .windows(2)
        .map(|w| (f.value(w[1]) - f.value(w[0])) / (f.theta(w[1])[0] - f.theta(w[0])[0]))
        .collect()
}

fn grid_from_range(ranges: &[(f64, f64)], counts: &[usize]) -> Result<Grid> {
    let axes = ranges
        .iter()
        .zip(counts)
        .map(|(&(lo, hi), &count)| {
            if hi > lo {
                linspace(lo, hi, count.max(2))
            } else {
                vec![lo]
            }
        })
        .collect();
    Grid::from_axes(axes)
}

/// Default dual grid: per axis, the range of the gradient (or of the discrete
/// slopes when gradients are absent), with as many nodes as the primal axis.
pub fn auto_dual_grid(f: &SampledFunction) -> Result<Grid> {
    let dim = f.dim();
    let finite: Vec<usize> = (0..f.len()).filter(|&i| !f.is_infinite(i)).collect();
    if finite.is_empty() {
        return Err(Error::InvalidInput("function is +inf everywhere".into()));
    }
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
    let mut widen = |k: usize, s: f64| {
        ranges[k].0 = ranges[k].0.min(s);
        ranges[k].1 = ranges[k].1.max(s);
    };
    let counts: Vec<usize> = match f.grid().shape() {
        Some(shape) => shape,
        None => vec![(f.len() as f64).powf(1.0 / dim as f64).round() as usize; dim],
    };
    if f.has_gradients() {
        for &i in &finite {
            for (k, &g) in f.gradient(i).expect("gradients").iter().enumerate() {
                widen(k, g);
            }
        }
    } else if dim == 1 {
        for s in adjacent_slopes(f) {
            widen(0, s);
        }
    } else {
        let axes = f.grid().axes().ok_or(Error::MissingGradients)?;
        let shape = f.grid().shape().expect("rectangular");
        let mut stride = 1;
        for k in (0..dim).rev() {
            for i in 0..f.len() {
                let pos = (i / stride) % shape[k];
                if pos + 1 < shape[k] && !f.is_infinite(i) && !f.is_infinite(i + stride) {
                    let s = (f.value(i + stride) - f.value(i)) / (axes[k][pos + 1] - axes[k][pos]);
                    widen(k, s);
                }
            }
            stride *= shape[k];
        }
    }
    if ranges
        .iter()
        .any(|r| r.0.partial_cmp(&r.1).is_none_or(|o| o.is_gt()))
    {
        return Err(Error::InvalidInput(
            "not enough finite samples to choose a dual grid".into(),
        ));
    }
    grid_from_range(&ranges, &counts)
}

/// The dual grid on which a one-dimensional discrete conjugate is exactly
/// polyhedral: the edge slopes of the lower convex hull of the samples.
fn slope_grid(f: &SampledFunction) -> Result<Grid> {
    let hull = lower_hull(f);
    if hull.len() < 2 {
        return Err(Error::InvalidInput(
            "biconjugation needs at least 2 finite samples".into(),
        ));
    }
    let mut slopes: Vec<f64> = hull
        .windows(2)
        .map(|w| (f.value(w[1]) - f.value(w[0])) / (f.theta(w[1])[0] - f.theta(w[0])[0]))
        .collect();
    slopes.sort_by(|a, b| a.partial_cmp(b).expect("finite slopes"));
    slopes.dedup_by(|b, a| nearly_equal(*a, *b));
    Grid::line(slopes)
}

/// `F**` evaluated back on the primal grid.
///
/// In one dimension the intermediate grid is the set of hull edge slopes, which
/// makes the result the exact lower convex envelope of the samples (and
/// `+inf` outside the span of the finite ones). In higher dimension the
/// automatic dual grid is used.
pub fn biconjugate(f: &SampledFunction) -> Result<SampledFunction> {
    let eta = if f.dim() == 1 {
        slope_grid(f)?
    } else {
        auto_dual_grid(f)?
    };
    biconjugate_on(f, &eta)
}

/// `F**` through an explicit intermediate dual grid.
pub fn biconjugate_on(f: &SampledFunction, eta: &Grid) -> Result<SampledFunction> {
    let fast = f.dim() == 1;
    let star = conjugate(f, eta, fast)?;
    if star.dual.len() < 2 {
        // a single dual node: F** is the affine minorant through it
        let e = eta.point(0);
        let v = star.dual.value(0);
        let values = (0..f.len()).map(|i| dot(f.theta(i), e) - v).collect();
        return mask_outside(f, values);
    }
    let back = conjugate(&star.dual, f.grid(), fast)?;
    mask_outside(f, back.dual.values().to_vec())
}

fn mask_outside(f: &SampledFunction, mut values: Vec<f64>) -> Result<SampledFunction> {
    if f.dim() == 1 {
        let finite: Vec<f64> = (0..f.len())
            .filter(|&i| !f.is_infinite(i))
            .map(|i| f.theta(i)[0])
            .collect();
        let (lo, hi) = (finite[0], finite[finite.len() - 1]);
        for (i, v) in values.iter_mut().enumerate() {
            let t = f.theta(i)[0];
            if t < lo || t > hi {
                *v = f64::INFINITY;
            }
        }
    }
    SampledFunction::new(f.grid().clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sampled(lo: f64, hi: f64, count: usize, f: impl Fn(f64) -> f64) -> SampledFunction {
        SampledFunction::sample(Grid::linspace(lo, hi, count).unwrap(), |t| f(t[0])).unwrap()
    }

    fn at(eta: f64) -> Grid {
        Grid::line(vec![eta]).unwrap()
    }

    #[test]
    fn self_dual_quadratic() {
        let q = sampled(-3.0, 3.0, 6001, |t| 0.5 * t * t);
        let c = conjugate_bruteforce(&q, &at(1.0)).unwrap();
        assert!((c.dual.value(0) - 0.5).abs() < 1e-12);
        assert_eq!(q.theta(c.argmax[0]), &[1.0]);
    }

    #[test]
    fn shifted_quadratic_at_one() {
        let f = sampled(-3.0, 3.0, 6001, |t| t * t + t + 3.0);
        let c = conjugate_bruteforce(&f, &at(1.0)).unwrap();
        assert!((c.dual.value(0) + 3.0).abs() < 1e-12);
        for eta in [-2.0, 0.0, 3.0] {
            let c = conjugate_bruteforce(&f, &at(eta)).unwrap();
            let closed = (eta * eta - 2.0 * eta - 11.0) / 4.0;
            assert!((c.dual.value(0) - closed).abs() < 1e-6);
        }
    }

    #[test]
    fn affine_ties_go_to_first_node() {
        let f = sampled(-1.0, 1.0, 21, |t| 2.0 * t);
        let c = conjugate_bruteforce(&f, &at(2.0)).unwrap();
        assert!(c.dual.value(0).abs() < 1e-15);
        assert_eq!(c.argmax[0], 0);
        let fast = conjugate_fast_1d(&f, &at(2.0)).unwrap();
        assert!(fast.dual.value(0).abs() < 1e-15);
        assert_eq!(lower_hull(&f), vec![0, 20]);
    }

    #[test]
    fn infinite_nodes_are_skipped() {
        let f = SampledFunction::from_1d(
            vec![-1.0, 0.0, 1.0, 2.0],
            vec![f64::INFINITY, 0.0, 1.0, f64::INFINITY],
        )
        .unwrap();
        let c = conjugate_bruteforce(&f, &Grid::line(vec![-5.0, 5.0]).unwrap()).unwrap();
        assert_eq!(c.dual.values(), &[0.0, 4.0]);
        assert_eq!(c.argmax, vec![1, 2]);
        let fast = conjugate_fast_1d(&f, &Grid::line(vec![-5.0, 5.0]).unwrap()).unwrap();
        assert_eq!(fast.dual.values(), c.dual.values());
    }

    #[test]
    fn rejects_tiny_input() {
        let f = SampledFunction::from_1d(vec![0.0], vec![0.0]).unwrap();
        assert!(conjugate_bruteforce(&f, &at(0.0)).is_err());
        let g = sampled(0.0, 1.0, 3, |t| t);
        let eta2 = Grid::uniform(2, 0.0, 1.0, 2).unwrap();
        assert!(matches!(
            conjugate_bruteforce(&g, &eta2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn two_dimensional_quadratic_is_self_dual() {
        let grid = Grid::uniform(2, -2.0, 2.0, 81).unwrap();
        let q = SampledFunction::sample(grid, |t| 0.5 * dot(t, t)).unwrap();
        let eta = Grid::scattered(2, vec![vec![0.5, -1.0], vec![1.0, 1.0]]).unwrap();
        let c = conjugate_bruteforce(&q, &eta).unwrap();
        assert!((c.dual.value(0) - 0.625).abs() < 1e-12);
        assert!((c.dual.value(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auto_grid_spans_discrete_slopes() {
        let q = sampled(-1.0, 1.0, 5, |t| 0.5 * t * t);
        let g = auto_dual_grid(&q).unwrap();
        assert_eq!(g.len(), 5);
        let (lo, hi) = g.bounds();
        assert!((lo[0] + 0.75).abs() < 1e-15 && (hi[0] - 0.75).abs() < 1e-15);
        let with_grad = q
            .clone()
            .with_gradients(vec![-1.0, -0.5, 0.0, 0.5, 1.0])
            .unwrap();
        let (lo, hi) = auto_dual_grid(&with_grad).unwrap().bounds();
        assert_eq!((lo[0], hi[0]), (-1.0, 1.0));
        let affine = sampled(-1.0, 1.0, 5, |t| 3.0 * t);
        assert_eq!(auto_dual_grid(&affine).unwrap().len(), 1);
    }

    #[test]
    fn double_well_biconjugate_is_flat_between_wells() {
        let f = sampled(-2.0, 2.0, 401, |t| (t * t - 1.0).powi(2));
        let b = biconjugate(&f).unwrap();
        for i in 0..f.len() {
            let t = f.theta(i)[0];
            assert!(b.value(i) <= f.value(i) + 1e-12);
            if t.abs() <= 1.0 {
                assert!(b.value(i).abs() < 1e-12, "theta {t}: {}", b.value(i));
            } else {
                assert!((b.value(i) - f.value(i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn biconjugate_of_convex_and_affine_data() {
        let q = sampled(-2.0, 2.0, 201, |t| 0.5 * t * t);
        let b = biconjugate(&q).unwrap();
        for i in 1..q.len() - 1 {
            assert!((b.value(i) - q.value(i)).abs() < 1e-9);
        }
        let a = sampled(-2.0, 2.0, 11, |t| 1.5 * t - 0.25);
        let b = biconjugate(&a).unwrap();
        for i in 0..a.len() {
            assert!((b.value(i) - a.value(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn biconjugate_masks_outside_domain() {
        let f = SampledFunction::from_1d(
            vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            vec![f64::INFINITY, 1.0, f64::INFINITY, 1.0, f64::INFINITY],
        )
        .unwrap();
        let b = biconjugate(&f).unwrap();
        assert_eq!(b.value(0), f64::INFINITY);
        assert_eq!(b.value(4), f64::INFINITY);
        assert!((b.value(2) - 1.0).abs() < 1e-15);
    }

    fn convex_samples() -> impl Strategy<Value = SampledFunction> {
        (
            3usize..40,
            prop::collection::vec(0.01f64..2.0, 40),
            -5.0f64..5.0,
            -3.0f64..3.0,
        )
            .prop_map(|(m, steps, start, slope0)| {
                let theta: Vec<f64> = (0..m)
                    .map(|i| start + 0.1 * i as f64 + 0.01 * steps[i])
                    .collect();
                let mut values = vec![0.0];
                let mut slope = slope0;
                for i in 1..m {
                    values.push(values[i - 1] + slope * (theta[i] - theta[i - 1]));
                    slope += steps[i];
                }
                SampledFunction::from_1d(theta, values).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn fast_matches_bruteforce(
            f in convex_samples(),
            lo in -10.0f64..0.0,
            width in 0.1f64..20.0,
            count in 1usize..60,
        ) {
            let eta = Grid::linspace(lo, lo + width, count).unwrap();
            let brute = conjugate_bruteforce(&f, &eta).unwrap();
            let fast = conjugate_fast_1d(&f, &eta).unwrap();
            for j in 0..eta.len() {
                prop_assert!((brute.dual.value(j) - fast.dual.value(j)).abs() <= 1e-12);
            }
        }

        #[test]
        fn fast_matches_bruteforce_on_nonconvex(
            values in prop::collection::vec(-5.0f64..5.0, 2..50),
            count in 1usize..40,
        ) {
            let theta = linspace(-1.0, 1.0, values.len());
            let f = SampledFunction::from_1d(theta, values).unwrap();
            let eta = Grid::linspace(-30.0, 30.0, count).unwrap();
            let brute = conjugate_bruteforce(&f, &eta).unwrap();
            let fast = conjugate_fast_1d(&f, &eta).unwrap();
            for j in 0..eta.len() {
                prop_assert!((brute.dual.value(j) - fast.dual.value(j)).abs() <= 1e-12);
            }
        }

        #[test]
        fn fenchel_young_and_convexity(f in convex_samples()) {
            let eta = auto_dual_grid(&f).unwrap();
            let star = conjugate_bruteforce(&f, &eta).unwrap();
            let pair = ConjugatePair { primal: f.clone(), dual: star.dual.clone() };
            prop_assert!(pair.min_fenchel_young_gap() >= -1e-9);
            let v = star.dual.values();
            for j in 1..v.len().saturating_sub(1) {
                let (a, b, c) = (eta.point(j - 1)[0], eta.point(j)[0], eta.point(j + 1)[0]);
                let second = (v[j + 1] - v[j]) / (c - b) - (v[j] - v[j - 1]) / (b - a);
                prop_assert!(second >= -1e-9);
            }
        }

        #[test]
        fn order_reversal(
            f in convex_samples(),
            bumps in prop::collection::vec(0.0f64..1.0, 40),
        ) {
            let raised: Vec<f64> = f.values().iter().zip(&bumps).map(|(v, b)| v + b).collect();
            let g = SampledFunction::new(f.grid().clone(), raised).unwrap();
            let eta = Grid::linspace(-20.0, 20.0, 50).unwrap();
            let cf = conjugate_bruteforce(&f, &eta).unwrap();
            let cg = conjugate_bruteforce(&g, &eta).unwrap();
            for j in 0..eta.len() {
                prop_assert!(cg.dual.value(j) <= cf.dual.value(j) + 1e-12);
            }
        }

        #[test]
        fn biconjugate_is_idempotent_and_below(
            values in prop::collection::vec(-5.0f64..5.0, 3..50),
        ) {
            let theta = linspace(-2.0, 2.0, values.len());
            let f = SampledFunction::from_1d(theta, values).unwrap();
            let once = biconjugate(&f).unwrap();
            let twice = biconjugate(&once).unwrap();
            for i in 0..f.len() {
                prop_assert!(once.value(i) <= f.value(i) + 1e-9);
                prop_assert!((once.value(i) - twice.value(i)).abs() <= 1e-9);
            }
        }
    }
}
