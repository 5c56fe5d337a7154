//! Heat-kernel integrals for the mild solution of ∂u/∂t = ½∂²u/∂y² + Ẇ with
//! zero initial condition and additive space-time white noise.
//!
//! Everything reduces to two closed forms in the kernel p_r(δ) =
//! (2πr)^{−1/2} e^{−δ²/(2r)}:
//!
//! ```text
//! G(T, δ) = ∫₀^T p_r(δ) dr          = √(2T/π) e^{−δ²/(2T)} − |δ| erfc(|δ|/√(2T))
//! F(T, δ) = ∫₀^T [p_r(0) − p_r(δ)] dr = √(2T/π) (1 − e^{−δ²/(2T)}) + |δ| erfc(|δ|/√(2T))
//! ```

use std::f64::consts::{PI, SQRT_2};

use serde::Serialize;

use crate::error::{parameter, Result};
use crate::quadrature::{integrate, integrate_left_singular, Tolerance};
use crate::special::erfc;

/// A space-time point (t, y) of the solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeatPoint {
    pub t: f64,
    pub y: f64,
}

impl HeatPoint {
    pub fn new(t: f64, y: f64) -> Self {
        Self { t, y }
    }
}

/// The heat kernel p_r(δ).
pub fn heat_kernel(r: f64, delta: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    (-delta * delta / (2.0 * r)).exp() / (2.0 * PI * r).sqrt()
}

/// G(T, δ) = ∫₀^T p_r(δ) dr.
pub fn kernel_integral(t: f64, delta: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let d = delta.abs();
    let s = (2.0 * t).sqrt();
    let head = (2.0 * t / PI).sqrt() * (-d * d / (2.0 * t)).exp();
    if d == 0.0 {
        head
    } else {
        head - d * erfc(d / s)
    }
}

/// F(T, δ) = ∫₀^T [p_r(0) − p_r(δ)] dr, computed without cancellation.
pub fn kernel_gap(t: f64, delta: f64) -> f64 {
    let d = delta.abs();
    if t <= 0.0 || d == 0.0 {
        return 0.0;
    }
    let s = (2.0 * t).sqrt();
    (2.0 * t / PI).sqrt() * -(-d * d / (2.0 * t)).exp_m1() + d * erfc(d / s)
}

/// F(T, δ) tabulated on a (T, δ) grid.
#[derive(Clone, Debug)]
pub struct KernelIntegralTable {
    ts: Vec<f64>,
    deltas: Vec<f64>,
    values: Vec<f64>,
}

impl KernelIntegralTable {
    pub fn new(ts: Vec<f64>, deltas: Vec<f64>) -> Result<Self> {
        if ts.iter().chain(&deltas).any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return parameter("table nodes must be finite and non-negative");
        }
        let values = ts
            .iter()
            .flat_map(|&t| deltas.iter().map(move |&d| kernel_gap(t, d)))
            .collect();
        Ok(Self { ts, deltas, values })
    }

    pub fn ts(&self) -> &[f64] {
        &self.ts
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.deltas.len() + j]
    }

    /// Table value when (T, δ) is a node, the closed form otherwise.
    pub fn get(&self, t: f64, delta: f64) -> f64 {
        let i = self.ts.iter().position(|&v| v == t);
        let j = self.deltas.iter().position(|&v| v == delta.abs());
        match (i, j) {
            (Some(i), Some(j)) => self.value(i, j),
            _ => kernel_gap(t, delta),
        }
    }
}

/// E[u(s,x) u(t,y)] = ½ ∫_{|t−s|}^{s+t} p_w(x − y) dw.
pub fn heat_cov(a: HeatPoint, b: HeatPoint) -> f64 {
    if a.t.min(b.t) <= 0.0 {
        return 0.0;
    }
    let d = a.y - b.y;
    0.5 * (kernel_integral(a.t + b.t, d) - kernel_integral((a.t - b.t).abs(), d))
}

/// E[u(s,x) − u(t,x) − u(s,y) + u(t,y)]², from the three-integral form
/// (∫_{s+t}^{2(s∨t)} − ∫_{2(s∧t)}^{s+t} + 2∫₀^{|s−t|}) [p_r(0) − p_r(x−y)] dr.
pub fn heat_sq_increment(s: f64, t: f64, x: f64, y: f64) -> f64 {
    let d = x - y;
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    let mid = kernel_gap(s + t, d);
    let first = kernel_gap(2.0 * hi, d) - mid;
    let second = mid - kernel_gap(2.0 * lo, d);
    first - second + 2.0 * kernel_gap(hi - lo, d)
}

/// The same quantity as the covariance combination over the four corners
/// a = (s,x), b = (t,x), c = (s,y), d = (t,y).
pub fn heat_sq_increment_from_cov(s: f64, t: f64, x: f64, y: f64) -> f64 {
    let a = HeatPoint::new(s, x);
    let b = HeatPoint::new(t, x);
    let c = HeatPoint::new(s, y);
    let d = HeatPoint::new(t, y);
    let q = heat_cov;
    q(a, a) + q(b, b) + q(c, c) + q(d, d)
        + 2.0 * (q(a, d) + q(b, c) - q(a, b) - q(a, c) - q(b, d) - q(c, d))
}

/// Constant c_α with J ≤ c_α δ^{2α} a^{1/2−α}, assembled from the two
/// branches of the J identity split at δ/√(2a) = 1:
///
/// * δ/√(2a) ≥ 1: the Gaussian tail is at most (1 − e^{−z²})/(2(e−1)z), so
///   J ≤ (2 + 2/(e−1)) √a (1 − e^{−δ²/2a});
/// * δ/√(2a) ≤ 1: the tail is at most √π/2, so J ≤ 2√a(1 − e^{−δ²/2a}) + √(2π)δ;
///
/// and 1 − e^{−w} ≤ w^α on w ≥ 0 for α ∈ [0, 1].
pub fn lemma51_c_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let e = std::f64::consts::E;
    let far = (2.0 + 2.0 / (e - 1.0)) * 2f64.powf(-alpha);
    let near = 2f64.powf(1.0 - alpha) + (2.0 * PI).sqrt() * 2f64.powf(0.5 - alpha);
    Ok(far.max(near))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&alpha) {
        return parameter(format!("α must lie in [0, 1/2], got {alpha}"));
    }
    Ok(())
}

/// Exact square increment with its two upper bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IncrementBound {
    pub value: f64,
    /// 2∫₀^{|s−t|} [p_r(0) − p_r(x−y)] dr.
    pub bound1: f64,
    /// (2/√(2π))·c_α·|x−y|^{2α}|s−t|^{1/2−α}.
    pub bound2: f64,
}

impl IncrementBound {
    pub fn ordered(&self) -> bool {
        self.value <= self.bound1 * (1.0 + 1e-12) + 1e-300 && self.bound1 <= self.bound2 * (1.0 + 1e-12) + 1e-300
    }
}

pub fn heat_sq_increment_bound(s: f64, t: f64, x: f64, y: f64, alpha: f64) -> Result<IncrementBound> {
    let c = lemma51_c_alpha(alpha)?;
    let dt = (s - t).abs();
    let dx = (x - y).abs();
    let bound2 = if dt == 0.0 || dx == 0.0 {
        0.0
    } else {
        2.0 / (2.0 * PI).sqrt() * c * dx.powf(2.0 * alpha) * dt.powf(0.5 - alpha)
    };
    Ok(IncrementBound {
        value: heat_sq_increment(s, t, x, y),
        bound1: 2.0 * kernel_gap(dt, dx),
        bound2,
    })
}

/// Quadrature values, brackets and closed identity for the integrals
/// I = ∫_a^b r^{−1/2}(1 − e^{−δ²/2r}) dr and J = ∫₀^a of the same integrand.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lemma51 {
    pub i_quadrature: f64,
    pub lower: f64,
    pub upper: f64,
    pub j_quadrature: f64,
    pub j_identity: f64,
}

impl Lemma51 {
    /// lower ≤ I ≤ upper, allowing for the quadrature tolerance.
    pub fn brackets_hold(&self, tol: f64) -> bool {
        self.lower <= self.i_quadrature + tol && self.i_quadrature <= self.upper + tol
    }

    pub fn j_matches(&self, tol: f64) -> bool {
        (self.j_quadrature - self.j_identity).abs() < tol
    }
}

fn one_minus_exp(w: f64) -> f64 {
    -(-w).exp_m1()
}

pub fn lemma51_brackets(a: f64, b: f64, delta: f64) -> Result<Lemma51> {
    if !(a > 0.0 && a < b && b.is_finite()) {
        return parameter(format!("need 0 < a < b, got a = {a}, b = {b}"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return parameter(format!("δ must be positive, got {delta}"));
    }
    let d2 = delta * delta;
    // r = v² removes the r^{−1/2} factor
    let integrand = |v: f64| 2.0 * one_minus_exp(d2 / (2.0 * v * v));
    let tol = Tolerance::new(1e-15, 1e-13);
    let i_quadrature = integrate(&integrand, a.sqrt(), b.sqrt(), tol).value;
    let j_quadrature = integrate_left_singular(&integrand, 0.0, a.sqrt(), tol, 1e-16, 200).value;
    let span = 2.0 * (b.sqrt() - a.sqrt());
    let z = delta / (2.0 * a).sqrt();
    Ok(Lemma51 {
        i_quadrature,
        lower: span * one_minus_exp(d2 / (2.0 * b)),
        upper: span * one_minus_exp(d2 / (2.0 * a)),
        j_quadrature,
        // 2√2 δ ∫_z^∞ e^{−x²} dx = √(2π) δ erfc(z)
        j_identity: 2.0 * a.sqrt() * one_minus_exp(z * z) + (2.0 * PI).sqrt() * delta * erfc(z),
    })
}

/// ρ(u) = √(2/π) ∫₀^u r^{−1/2}(1 − e^{−1/r}) dr, with ρ(+∞) allowed.
///
/// With r = v² the integral is 2∫₀^{√u}(1 − e^{−1/v²}) dv; the part beyond
/// v = 1 is mapped to q = 1/v, giving 2∫_{1/√u}^1 (1 − e^{−q²})/q² dq, whose
/// integrand is smooth down to q = 0.
pub fn rho(u: f64) -> f64 {
    if !(u > 0.0) {
        return 0.0;
    }
    let tol = Tolerance::new(1e-16, 1e-13);
    let near = |v: f64| 2.0 * one_minus_exp(1.0 / (v * v));
    let head = integrate(&near, 0.0, u.sqrt().min(1.0), tol).value;
    let tail = if u > 1.0 {
        let far = |q: f64| 2.0 * one_minus_exp(q * q) / (q * q);
        let lo = if u.is_infinite() { 0.0 } else { 1.0 / u.sqrt() };
        integrate(&far, lo, 1.0, tol).value
    } else {
        0.0
    };
    (2.0 / PI).sqrt() * (head + tail)
}

/// ρ(+∞) = √(2/π)·Γ(1/2)·2 = 2√2.
pub const RHO_INFINITY: f64 = 2.0 * SQRT_2;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_integral_matches_quadrature() {
        for &(t, d) in &[(1.0, 0.0), (0.3, 0.2), (2.0, 1.5), (0.01, 0.7)] {
            let q = integrate_left_singular(
                &|r: f64| heat_kernel(r, d),
                0.0,
                t,
                Tolerance::new(1e-18, 1e-14),
                1e-16,
                400,
            )
            .value;
            let c = kernel_integral(t, d);
            assert!((q - c).abs() <= 1e-11 * c.max(1e-300), "T={t} δ={d}: {q} vs {c}");
        }
    }

    #[test]
    fn kernel_gap_is_difference() {
        for &(t, d) in &[(1.0, 0.5), (3.0, 2.0), (0.2, 0.01)] {
            let want = kernel_integral(t, 0.0) - kernel_integral(t, d);
            assert!((kernel_gap(t, d) - want).abs() < 1e-14);
        }
        assert_eq!(kernel_gap(0.0, 1.0), 0.0);
        assert_eq!(kernel_gap(1.0, 0.0), 0.0);
    }

    #[test]
    fn covariance_reference_values() {
        let v = heat_cov(HeatPoint::new(1.0, 0.3), HeatPoint::new(1.0, 0.3));
        assert!((v - 0.564_189_583_547_756_3).abs() < 1e-14);
        let v = heat_cov(HeatPoint::new(1.0, 0.0), HeatPoint::new(2.0, 0.0));
        let want = (3f64.sqrt() - 1.0) / (2.0 * PI).sqrt();
        assert!((v - want).abs() < 1e-14);
        assert!((want - 0.292_045).abs() < 2e-6);
        assert_eq!(heat_cov(HeatPoint::new(0.0, 0.0), HeatPoint::new(0.5, 0.1)), 0.0);
    }

    #[test]
    fn square_increment_reference_value() {
        let v = heat_sq_increment(0.0, 1.0, 1.0, 0.0);
        let want = 2.0 / PI.sqrt() * (1.0 - (-0.25f64).exp()) + erfc(0.5);
        assert!((v - want).abs() < 1e-14);
        assert!((v - 0.729_096).abs() < 1e-6);
        assert!((heat_sq_increment_from_cov(0.0, 1.0, 1.0, 0.0) - v).abs() < 1e-12);
        assert_eq!(heat_sq_increment(0.4, 0.4, 0.0, 1.0), 0.0);
        assert_eq!(heat_sq_increment(0.2, 0.9, 0.3, 0.3), 0.0);
    }

    #[test]
    fn table_follows_closed_form() {
        let t = KernelIntegralTable::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.25]).unwrap();
        assert_eq!(t.value(0, 1), 0.0);
        assert_eq!(t.value(2, 0), 0.0);
        assert!(t.value(1, 1) <= t.value(2, 1));
        assert_eq!(t.get(0.5, -0.25), kernel_gap(0.5, 0.25));
        assert_eq!(t.get(0.7, 0.1), kernel_gap(0.7, 0.1));
    }

    #[test]
    fn lemma51_reference() {
        let l = lemma51_brackets(1.0, 4.0, 1.0).unwrap();
        assert!((l.lower - 0.235_007).abs() < 1e-6, "{}", l.lower);
        assert!((l.upper - 0.786_939).abs() < 1e-6, "{}", l.upper);
        assert!(l.brackets_hold(1e-9));
        let l = lemma51_brackets(1.0, 2.0, SQRT_2).unwrap();
        assert!((l.j_identity - 1.821_853).abs() < 1e-6, "{}", l.j_identity);
        assert!(l.j_matches(1e-9));
        assert!(lemma51_brackets(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn bounds_are_ordered() {
        for &(s, t, x, y) in &[(0.1, 0.9, 0.0, 0.5), (0.5, 0.51, 0.2, 0.9), (1.0, 0.0, 0.0, 0.01)] {
            for alpha in [0.0, 0.125, 0.25, 0.5] {
                let b = heat_sq_increment_bound(s, t, x, y, alpha).unwrap();
                assert!(b.ordered(), "{b:?}");
            }
        }
        assert!(heat_sq_increment_bound(0.1, 0.2, 0.0, 0.1, 0.6).is_err());
    }

    #[test]
    fn rho_matches_closed_form() {
        // ∫₀^w (1 − e^{−q²})/q² dq = √π erf(w) − (1 − e^{−w²})/w
        let closed = |u: f64| {
            (2.0 / PI).sqrt()
                * (2.0 * PI.sqrt() * erfc(1.0 / u.sqrt()) + 2.0 * u.sqrt() * (1.0 - (-1.0 / u).exp()))
        };
        for u in [1e-6, 0.01, 0.5, 1.0, 2.0, 40.0, 1e8] {
            assert!((rho(u) - closed(u)).abs() < 1e-12, "u={u}");
        }
        assert!((rho(f64::INFINITY) - RHO_INFINITY).abs() < 1e-12);
        assert_eq!(rho(0.0), 0.0);
    }
}
