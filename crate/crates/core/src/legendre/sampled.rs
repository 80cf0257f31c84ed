use serde::Serialize;

use crate::error::{check_dim, Error, Result};

/// `count` equally spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| {
                if k + 1 == count {
                    hi
                } else {
                    lo + (hi - lo) * (k as f64 / (count - 1) as f64)
                }
            })
            .collect(),
    }
}

/// A finite set of parameter points in `R^n`.
///
/// Built either from per-axis coordinate lists (a rectangular grid, row-major
/// with the last axis fastest) or as a scattered list of distinct points.
/// One-dimensional grids are always sorted strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    dim: usize,
    points: Vec<f64>,
    axes: Option<Vec<Vec<f64>>>,
}

impl Grid {
    /// Strictly increasing one-dimensional grid.
    pub fn line(values: Vec<f64>) -> Result<Self> {
        Self::from_axes(vec![values])
    }

    pub fn linspace(lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::line(linspace(lo, hi, count))
    }

    /// The product grid `axes[0] x axes[1] x ...`.
    pub fn from_axes(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one axis".into()));
        }
        for (k, axis) in axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(Error::InvalidGrid(format!("axis {k} is empty")));
            }
            if axis.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("grid coordinates"));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGrid(format!(
                    "axis {k} is not strictly increasing"
                )));
            }
        }
        let dim = axes.len();
        let count: usize = axes.iter().map(Vec::len).product();
        let mut points = Vec::with_capacity(count * dim);
        let mut idx = vec![0usize; dim];
        for _ in 0..count {
            for (k, &i) in idx.iter().enumerate() {
                points.push(axes[k][i]);
            }
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Grid {
            dim,
            points,
            axes: Some(axes),
        })
    }

    /// Same `[lo, hi]` range with `count` nodes on each of `dim` axes.
    pub fn uniform(dim: usize, lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::from_axes(vec![linspace(lo, hi, count); dim])
    }

    /// An unstructured list of pairwise distinct points.
    pub fn scattered(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        for p in &points {
            check_dim(dim, p.len())?;
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("grid coordinates"));
            }
        }
        if dim == 1 {
            return Self::line(points.into_iter().map(|p| p[0]).collect());
        }
        let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidGrid(
                "grid points must be pairwise distinct".into(),
            ));
        }
        Ok(Grid {
            dim,
            points: points.concat(),
            axes: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Per-axis coordinates when the grid is rectangular.
    pub fn axes(&self) -> Option<&[Vec<f64>]> {
        self.axes.as_deref()
    }

    pub fn shape(&self) -> Option<Vec<usize>> {
        self.axes.as_ref().map(|a| a.iter().map(Vec::len).collect())
    }

    /// Lower and upper corner of the bounding box.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.points() {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }
}

/// Values (and optionally gradients) of a function on a [`Grid`].
///
/// `+inf` values mark nodes outside the effective domain; they are skipped
/// by every supremum and infimum. `NaN` and `-inf` are rejected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
    gradients: Option<Vec<f64>>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_dim(grid.len(), values.len())?;
        if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::NonFinite("function values"));
        }
        Ok(SampledFunction {
            grid,
            values,
            gradients: None,
        })
    }

    /// One-dimensional samples at strictly increasing `theta`.
    pub fn from_1d(theta: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(Grid::line(theta)?, values)
    }

    /// Evaluates `f` on every grid node.
    pub fn sample(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = grid.points().map(&f).collect();
        Self::new(grid, values)
    }

    /// Evaluates `f` and its gradient on every grid node.
    pub fn sample_with_gradient(
        grid: Grid,
        f: impl Fn(&[f64]) -> f64,
        grad: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let values = grid.points().map(&f).collect();
        let gradients = grid.points().flat_map(grad).collect();
        Self::new(grid, values)?.with_gradients(gradients)
    }

    /// Attaches gradients, row-major `len x dim`.
    pub fn with_gradients(mut self, gradients: Vec<f64>) -> Result<Self> {
        check_dim(self.len() * self.dim(), gradients.len())?;
        if gradients.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradients"));
        }
        self.gradients = Some(gradients);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn theta(&self, i: usize) -> &[f64] {
        self.grid.point(i)
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_infinite(&self, i: usize) -> bool {
        self.values[i] == f64::INFINITY
    }

    pub fn finite_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }

    pub fn has_gradients(&self) -> bool {
        self.gradients.is_some()
    }

    pub fn gradient(&self, i: usize) -> Option<&[f64]> {
        let d = self.dim();
        self.gradients.as_ref().map(|g| &g[i * d..(i + 1) * d])
    }

    pub fn gradients(&self) -> Option<&[f64]> {
        self.gradients.as_deref()
    }

    /// Gradients if present, otherwise finite differences along the grid
    /// axes: central in the interior, one-sided at the ends, with the grid
    /// spacing as step.
    pub fn gradients_or_finite_differences(&self) -> Result<Vec<f64>> {
        if let Some(g) = &self.gradients {
            return Ok(g.clone());
        }
        let axes = self.grid.axes().ok_or(Error::MissingGradients)?;
        if self.dim() == 1 && self.len() < 3 {
            return Err(Error::MissingGradients);
        }
        let dim = self.dim();
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let mut strides = vec![1usize; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        let mut out = vec![0.0; self.len() * dim];
        for i in 0..self.len() {
            if self.is_infinite(i) {
                continue;
            }
            for k in 0..dim {
                let m = shape[k];
                if m < 2 {
                    return Err(Error::MissingGradients);
                }
                let pos = (i / strides[k]) % m;
                let ok = |p: usize| self.values[i - pos * strides[k] + p * strides[k]].is_finite();
                let lo = if pos > 0 && ok(pos - 1) { pos - 1 } else { pos };
                let hi = if pos + 1 < m && ok(pos + 1) {
                    pos + 1
                } else {
                    pos
                };
                if lo == hi {
                    return Err(Error::InvalidInput(format!(
                        "node {i} has no finite neighbour along axis {k}"
                    )));
                }
                let base = i - pos * strides[k];
                let f = |p: usize| self.values[base + p * strides[k]];
                out[i * dim + k] = (f(hi) - f(lo)) / (axes[k][hi] - axes[k][lo]);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_hits_endpoints_and_zero() {
        let v = linspace(-2.0, 2.0, 5);
        assert_eq!(v, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(linspace(-3.0, 3.0, 1001)[500], 0.0);
    }

    #[test]
    fn product_grid_is_row_major() {
        let g = Grid::from_axes(vec![vec![0.0, 1.0], vec![10.0, 20.0, 30.0]]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.point(0), &[0.0, 10.0]);
        assert_eq!(g.point(1), &[0.0, 20.0]);
        assert_eq!(g.point(3), &[1.0, 10.0]);
        assert_eq!(g.shape(), Some(vec![2, 3]));
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::line(vec![0.0, 0.0]).is_err());
        assert!(Grid::line(vec![1.0, 0.0]).is_err());
        assert!(Grid::line(vec![0.0, f64::NAN]).is_err());
        assert!(Grid::scattered(2, vec![vec![0.0, 1.0], vec![0.0, 1.0]]).is_err());
        assert!(Grid::scattered(2, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
    }

    #[test]
    fn function_validation() {
        let g = Grid::linspace(0.0, 1.0, 3).unwrap();
        assert!(SampledFunction::new(g.clone(), vec![0.0, 1.0]).is_err());
        assert!(SampledFunction::new(g.clone(), vec![0.0, f64::NAN, 1.0]).is_err());
        assert!(SampledFunction::new(g.clone(), vec![0.0, f64::NEG_INFINITY, 1.0]).is_err());
        let f = SampledFunction::new(g, vec![0.0, f64::INFINITY, 1.0]).unwrap();
        assert!(f.is_infinite(1));
        assert_eq!(f.finite_count(), 2);
        assert!(f.clone().with_gradients(vec![0.0; 2]).is_err());
    }

    #[test]
    fn finite_difference_gradients() {
        let f = SampledFunction::sample(Grid::linspace(-1.0, 1.0, 5).unwrap(), |t| t[0] * t[0])
            .unwrap();
        let g = f.gradients_or_finite_differences().unwrap();
        // central differences are exact for quadratics; ends are one-sided
        assert_eq!(g[2], 0.0);
        assert!((g[1] + 1.0).abs() < 1e-15);
        assert!((g[0] + 1.5).abs() < 1e-15);
        let two = SampledFunction::from_1d(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            two.gradients_or_finite_differences(),
            Err(Error::MissingGradients)
        ));
    }

    #[test]
    fn finite_difference_gradients_2d() {
        let grid = Grid::uniform(2, -1.0, 1.0, 5).unwrap();
        let f = SampledFunction::sample(grid, |t| 0.5 * (t[0] * t[0] + t[1] * t[1])).unwrap();
        let g = f.gradients_or_finite_differences().unwrap();
        // node (1, 3) is theta = (-0.5, 0.5)
        let i = 5 + 3;
        assert!((g[2 * i] + 0.5).abs() < 1e-15);
        assert!((g[2 * i + 1] - 0.5).abs() < 1e-15);
    }
}
