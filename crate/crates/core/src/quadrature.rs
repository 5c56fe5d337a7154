//! One-dimensional adaptive Gauss–Kronrod quadrature, a geometric splitter
//! for integrable endpoint singularities, and nested tensor integration.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

// Kronrod abscissae on [0, 1]; odd indices are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Outcome of an adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Tolerances shared by the integrators.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-14,
            rel: 1e-12,
            max_intervals: 2000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

/// 15-point Kronrod estimate with the embedded 7-point Gauss error estimate.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive bisection: the piece with the largest error estimate is
/// split until the summed error meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tolerance) -> Integral {
    if a == b {
        return Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    let (value, error) = gauss_kronrod(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut evaluations = 15;
    while total_err > tol.target(total) && heap.len() < tol.max_intervals {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (lv, le) = gauss_kronrod(f, worst.a, mid);
        let (rv, re) = gauss_kronrod(f, mid, worst.b);
        evaluations += 30;
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }
    // resum to shed the drift of the running updates
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Integral {
        value,
        error,
        evaluations,
        converged: error <= tol.target(value),
    }
}

/// Integrates over [a, b] when f may blow up (integrably) at `a`.
///
/// The range is cut into the geometric pieces [a + h/2^{k+1}, a + h/2^k],
/// each integrated adaptively, and the walk toward `a` stops once a piece
/// contributes less than `cutoff` of the running total. A walk that reaches
/// `max_pieces` without meeting the cutoff is reported as not converged,
/// which is how divergent integrands show up.
pub fn integrate_left_singular<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: Tolerance,
    cutoff: f64,
    max_pieces: usize,
) -> Integral {
    if b <= a {
        return Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    let width = b - a;
    let mut acc = Neumaier::default();
    let mut error = 0.0;
    let mut evaluations = 0;
    let mut converged = true;
    let mut hi = b;
    for k in 0..max_pieces {
        let lo = a + width * 0.5f64.powi(k as i32 + 1);
        if lo <= a || lo >= hi {
            break;
        }
        let piece = integrate(f, lo, hi, tol);
        evaluations += piece.evaluations;
        error += piece.error;
        converged &= piece.converged;
        acc.add(piece.value);
        let total = acc.sum();
        if piece.value.abs() <= cutoff * total.abs() || (total == 0.0 && piece.value == 0.0 && k > 4)
        {
            return Integral {
                value: total,
                error,
                evaluations,
                converged,
            };
        }
        hi = lo;
        if k + 1 == max_pieces {
            converged = false;
        }
    }
    Integral {
        value: acc.sum(),
        error,
        evaluations,
        converged: converged && hi > a,
    }
}

/// Integrates f over the box ∏[0, upper_k] by nesting the left-singular
/// integrator, axis 0 outermost. `f` receives the full coordinate vector.
pub fn integrate_box_left_singular<F: Fn(&[f64]) -> f64>(
    f: &F,
    upper: &[f64],
    tol: Tolerance,
    cutoff: f64,
    max_pieces: usize,
) -> Integral {
    nested(f, upper, &[], tol, cutoff, max_pieces)
}

fn nested<F: Fn(&[f64]) -> f64>(
    f: &F,
    upper: &[f64],
    prefix: &[f64],
    tol: Tolerance,
    cutoff: f64,
    max_pieces: usize,
) -> Integral {
    let axis = prefix.len();
    if axis == upper.len() {
        return Integral {
            value: f(prefix),
            error: 0.0,
            evaluations: 1,
            converged: true,
        };
    }
    let evaluations = Cell::new(0usize);
    let converged = Cell::new(true);
    let inner = |u: f64| {
        let mut point = Vec::with_capacity(upper.len());
        point.extend_from_slice(prefix);
        point.push(u);
        let r = nested(f, upper, &point, tol, cutoff, max_pieces);
        evaluations.set(evaluations.get() + r.evaluations);
        converged.set(converged.get() && r.converged);
        r.value
    };
    let outer = integrate_left_singular(&inner, 0.0, upper[axis], tol, cutoff, max_pieces);
    Integral {
        value: outer.value,
        error: outer.error,
        evaluations: evaluations.get(),
        converged: outer.converged && converged.get(),
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Neumaier) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}
