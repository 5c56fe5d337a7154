//! Sampled multiparameter functions on rectangular grids and their
//! rectangular (joint) increments.
//!
//! For x, y ∈ [0,1]ⁿ the joint increment is the alternating sum of f over the
//! 2ⁿ corners of the axis-aligned box spanned by x and y, the corner taking
//! y_k on an odd number of axes entering with a minus sign. Equivalently it
//! is the composition over k of the one-axis differences
//! g ↦ g − g(·, y_k, ·).

use crate::error::{domain, parameter, Result};

/// Largest supported parameter dimension.
pub const MAX_DIM: usize = 8;

/// Selects x_k or y_k on every axis, with the inclusion–exclusion sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CornerSign {
    /// Bit k set means axis k takes the y coordinate.
    pub corner: u32,
    pub sign: i8,
}

impl CornerSign {
    pub fn takes_y(&self, axis: usize) -> bool {
        self.corner >> axis & 1 == 1
    }

    /// The corner point for a given pair.
    pub fn point(&self, pair: &PointPair) -> Vec<f64> {
        (0..pair.dim())
            .map(|k| if self.takes_y(k) { pair.y[k] } else { pair.x[k] })
            .collect()
    }
}

/// All 2ⁿ corners of an n-dimensional box, in binary order of the selector.
pub fn corner_expansion(n: usize) -> Result<Vec<CornerSign>> {
    if !(1..=MAX_DIM).contains(&n) {
        return parameter(format!("dimension {n} outside 1..={MAX_DIM}"));
    }
    Ok((0..1u32 << n)
        .map(|corner| CornerSign {
            corner,
            sign: if corner.count_ones() % 2 == 0 { 1 } else { -1 },
        })
        .collect())
}

/// Two points spanning an axis-aligned box.
#[derive(Clone, Debug, PartialEq)]
pub struct PointPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PointPair {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return parameter(format!("point dimensions differ: {} vs {}", x.len(), y.len()));
        }
        if x.is_empty() || x.len() > MAX_DIM {
            return parameter(format!("dimension {} outside 1..={MAX_DIM}", x.len()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return domain("point coordinates must be finite");
        }
        Ok(Self { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Per-axis side lengths |x_k − y_k|.
    pub fn deltas(&self) -> Vec<f64> {
        self.x.iter().zip(&self.y).map(|(a, b)| (a - b).abs()).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.x.iter().zip(&self.y).any(|(a, b)| a == b)
    }

    /// The same box with x_k and y_k exchanged on one axis.
    pub fn swapped(&self, axis: usize) -> Self {
        let mut out = self.clone();
        std::mem::swap(&mut out.x[axis], &mut out.y[axis]);
        out
    }
}

/// Values of a function on the tensor grid ∏ axes_k, stored row-major with
/// axis 0 varying slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
    strides: Vec<usize>,
}

impl GridField {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        let n = axes.len();
        if !(1..=MAX_DIM).contains(&n) {
            return parameter(format!("dimension {n} outside 1..={MAX_DIM}"));
        }
        for (k, axis) in axes.iter().enumerate() {
            if axis.len() < 2 {
                return parameter(format!("axis {k} needs at least two nodes"));
            }
            if axis.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return domain(format!("axis {k} has nodes outside [0, 1]"));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return parameter(format!("axis {k} is not strictly increasing"));
            }
        }
        let len: usize = axes.iter().map(Vec::len).product();
        if values.len() != len {
            return parameter(format!("{} values for a grid of {len} nodes", values.len()));
        }
        let strides = strides(&axes);
        Ok(Self {
            axes,
            values,
            strides,
        })
    }

    /// Samples `f` at every node.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(axes: Vec<Vec<f64>>, f: F) -> Result<Self> {
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let len: usize = shape.iter().product();
        let mut point = vec![0.0; axes.len()];
        let mut values = Vec::with_capacity(len);
        for flat in 0..len {
            let mut rem = flat;
            for k in (0..axes.len()).rev() {
                point[k] = axes[k][rem % shape[k]];
                rem /= shape[k];
            }
            values.push(f(&point));
        }
        Self::new(axes, values)
    }

    /// m equally spaced nodes on [0, 1] per axis.
    pub fn uniform_axes(shape: &[usize]) -> Vec<Vec<f64>> {
        shape.iter().map(|&m| uniform_axis(m)).collect()
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            let m = self.axes[k].len();
            out[k] = flat % m;
            flat /= m;
        }
        out
    }

    pub fn node(&self, index: &[usize]) -> Vec<f64> {
        index.iter().enumerate().map(|(k, &i)| self.axes[k][i]).collect()
    }

    pub fn value_at(&self, index: &[usize]) -> f64 {
        self.values[self.flat_index(index)]
    }

    /// Index of `coord` on axis `k`, which must be an exact node.
    pub fn locate(&self, k: usize, coord: f64) -> Result<usize> {
        let axis = &self.axes[k];
        match axis.binary_search_by(|v| v.total_cmp(&coord)) {
            Ok(i) => Ok(i),
            Err(_) => domain(format!("{coord} is not a node of axis {k}")),
        }
    }

    /// Scales every value by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            axes: self.axes.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            strides: self.strides.clone(),
        }
    }

    /// Restriction to every `step`-th node on each axis (last node kept when
    /// it falls on the stride).
    pub fn coarsened(&self, step: usize) -> Result<Self> {
        if step == 0 {
            return parameter("coarsening step must be positive");
        }
        let picks: Vec<Vec<usize>> = self
            .axes
            .iter()
            .map(|a| (0..a.len()).step_by(step).collect())
            .collect();
        let axes: Vec<Vec<f64>> = picks
            .iter()
            .enumerate()
            .map(|(k, p)| p.iter().map(|&i| self.axes[k][i]).collect())
            .collect();
        let sub_shape: Vec<usize> = picks.iter().map(Vec::len).collect();
        let len: usize = sub_shape.iter().product();
        let mut values = Vec::with_capacity(len);
        let mut idx = vec![0usize; self.dim()];
        for flat in 0..len {
            let mut rem = flat;
            for k in (0..self.dim()).rev() {
                idx[k] = picks[k][rem % sub_shape[k]];
                rem /= sub_shape[k];
            }
            values.push(self.value_at(&idx));
        }
        Self::new(axes, values)
    }

    /// Joint increment over the box spanned by the node indices `x` and `y`.
    pub fn rect_increment_at(&self, x: &[usize], y: &[usize]) -> f64 {
        let n = self.dim();
        // a flat box has increment exactly zero; summing corners would leave rounding noise
        if (0..n).any(|k| x[k] == y[k]) {
            return 0.0;
        }
        let base_x: usize = self.flat_index(x);
        // offsets from the all-x corner when axis k switches to y_k
        let mut shift = [0isize; MAX_DIM];
        for k in 0..n {
            shift[k] = (y[k] as isize - x[k] as isize) * self.strides[k] as isize;
        }
        let mut total = 0.0;
        for corner in 0..1u32 << n {
            let mut flat = base_x as isize;
            for (k, s) in shift.iter().enumerate().take(n) {
                if corner >> k & 1 == 1 {
                    flat += s;
                }
            }
            let v = self.values[flat as usize];
            if corner.count_ones() % 2 == 0 {
                total += v;
            } else {
                total -= v;
            }
        }
        total
    }
}

pub(crate) fn strides(axes: &[Vec<f64>]) -> Vec<usize> {
    let mut strides = vec![1; axes.len()];
    for k in (0..axes.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * axes[k + 1].len();
    }
    strides
}

pub fn uniform_axis(m: usize) -> Vec<f64> {
    let last = (m.max(2) - 1) as f64;
    (0..m).map(|i| i as f64 / last).collect()
}

/// Anything whose joint increments can be taken.
pub trait Field {
    fn dim(&self) -> usize;
    fn rect_increment(&self, pair: &PointPair) -> Result<f64>;
}

impl Field for GridField {
    fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Requires both points to be grid nodes; no interpolation is done.
    fn rect_increment(&self, pair: &PointPair) -> Result<f64> {
        if pair.dim() != self.dim() {
            return parameter(format!(
                "pair of dimension {} against a {}-dimensional grid",
                pair.dim(),
                self.dim()
            ));
        }
        let mut xi = [0usize; MAX_DIM];
        let mut yi = [0usize; MAX_DIM];
        for k in 0..self.dim() {
            xi[k] = self.locate(k, pair.x[k])?;
            yi[k] = self.locate(k, pair.y[k])?;
        }
        let n = self.dim();
        Ok(self.rect_increment_at(&xi[..n], &yi[..n]))
    }
}

/// A field given by a closure, evaluated lazily at the corners.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnField<F> {
    pub fn new(dim: usize, f: F) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return parameter(format!("dimension {dim} outside 1..={MAX_DIM}"));
        }
        Ok(Self { dim, f })
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        (self.f)(point)
    }
}

impl<F: Fn(&[f64]) -> f64> Field for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rect_increment(&self, pair: &PointPair) -> Result<f64> {
        if pair.dim() != self.dim {
            return parameter("pair dimension does not match the field");
        }
        if pair.is_degenerate() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        let mut point = [0.0; MAX_DIM];
        for c in corner_expansion(self.dim)? {
            for (k, p) in point.iter_mut().enumerate().take(self.dim) {
                *p = if c.takes_y(k) { pair.y[k] } else { pair.x[k] };
            }
            total += f64::from(c.sign) * (self.f)(&point[..self.dim]);
        }
        Ok(total)
    }
}

/// Joint increment of any field.
pub fn rect_increment<F: Field + ?Sized>(field: &F, pair: &PointPair) -> Result<f64> {
    field.rect_increment(pair)
}

/// Splits the box at `m` on `axis` and returns the increments over the full
/// box, the [x_k, m] piece and the [m, y_k] piece.
///
/// The first value equals the sum of the other two for every f, because the
/// one-axis difference telescopes through m.
pub fn split_additivity_check<F: Field + ?Sized>(
    field: &F,
    pair: &PointPair,
    axis: usize,
    m: f64,
) -> Result<(f64, f64, f64)> {
    if axis >= pair.dim() {
        return parameter(format!("axis {axis} out of range"));
    }
    let (lo, hi) = if pair.x[axis] < pair.y[axis] {
        (pair.x[axis], pair.y[axis])
    } else {
        (pair.y[axis], pair.x[axis])
    };
    if !(m > lo && m < hi) {
        return parameter(format!("split point {m} not strictly inside ({lo}, {hi})"));
    }
    let full = field.rect_increment(pair)?;
    let mut first = pair.clone();
    first.y[axis] = m;
    let mut second = pair.clone();
    second.x[axis] = m;
    Ok((full, field.rect_increment(&first)?, field.rect_increment(&second)?))
}

/// Reference implementation: applies the one-axis difference operators one
/// after another instead of summing corners.
pub fn iterated_difference<F: Fn(&[f64]) -> f64>(f: &F, pair: &PointPair, order: &[usize]) -> f64 {
    fn go<F: Fn(&[f64]) -> f64>(f: &F, pair: &PointPair, order: &[usize], point: &mut Vec<f64>) -> f64 {
        match order.split_first() {
            None => f(point),
            Some((&k, rest)) => {
                let keep = point[k];
                let a = go(f, pair, rest, point);
                point[k] = pair.y[k];
                let b = go(f, pair, rest, point);
                point[k] = keep;
                a - b
            }
        }
    }
    let mut point = pair.x.clone();
    go(f, pair, order, &mut point)
}
