//! Young functions Ψ, moduli of continuity p and the square-root-logarithm
//! moduli used by the continuity statistics.
//!
//! Generalized inverses follow the usual conventions:
//! Ψ⁻¹(u) = sup{v : Ψ(v) ≤ u} for u ≥ Ψ(0) and p⁻¹(u) = max{v ∈ [0,1] : p(v) ≤ u}
//! for 0 ≤ u ≤ p(1).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{domain, parameter, Error, Result};
use crate::field_grid::PointPair;

/// The Ψ family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum YoungFunction {
    /// Ψ(u) = u^α.
    Power(f64),
    /// Ψ(u) = exp(u²/4).
    ExpQuarterSquare,
}

impl YoungFunction {
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return parameter(format!("power exponent must be positive, got {alpha}"));
        }
        Ok(Self::Power(alpha))
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Self::Power(alpha) => u.abs().powf(alpha),
            Self::ExpQuarterSquare => (0.25 * u * u).exp(),
        }
    }

    pub fn at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// Ψ⁻¹(u) = sup{v ≥ 0 : Ψ(v) ≤ u}.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        if u.is_nan() || u < self.at_zero() {
            return domain(format!("Ψ⁻¹ undefined below Ψ(0) = {}, got {u}", self.at_zero()));
        }
        Ok(match *self {
            Self::Power(1.0) => u,
            Self::Power(alpha) => u.powf(1.0 / alpha),
            Self::ExpQuarterSquare => 2.0 * u.max(1.0).ln().sqrt(),
        })
    }
}

impl fmt::Display for YoungFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power(a) => write!(f, "pow:{a}"),
            Self::ExpQuarterSquare => f.write_str("expq"),
        }
    }
}

impl FromStr for YoungFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "expq" {
            return Ok(Self::ExpQuarterSquare);
        }
        match s.strip_prefix("pow:") {
            Some(e) => Self::power(parse_number(e)?),
            None => parameter(format!("unknown Young function '{s}' (want pow:<a> or expq)")),
        }
    }
}

/// A modulus of continuity p on [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub enum ModulusFunction {
    /// p(u) = u^γ.
    Power(f64),
    /// Piecewise-linear interpolation of (u, p(u)) samples, origin included.
    Tabulated(Table),
}

/// Samples of a tabulated modulus; see [`ModulusFunction::tabulated`].
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    u: Vec<f64>,
    p: Vec<f64>,
    source: Option<String>,
}

impl Table {
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.u.iter().copied().zip(self.p.iter().copied())
    }
}

impl ModulusFunction {
    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return parameter(format!("modulus exponent must be positive, got {gamma}"));
        }
        Ok(Self::Power(gamma))
    }

    /// Builds a tabulated modulus from samples with strictly increasing
    /// abscissae in [0, 1] and non-decreasing values. The origin (0, 0) is
    /// prepended when missing; a sample at u = 0 must have p = 0.
    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<Self> {
        Self::tabulated_with_source(samples, None)
    }

    fn tabulated_with_source(mut samples: Vec<(f64, f64)>, source: Option<String>) -> Result<Self> {
        if samples.iter().any(|(u, p)| !u.is_finite() || !p.is_finite()) {
            return parameter("tabulated modulus has non-finite samples");
        }
        match samples.first() {
            Some(&(u, p)) if u == 0.0 && p != 0.0 => {
                return parameter("tabulated modulus must vanish at 0");
            }
            Some(&(0.0, _)) => {}
            _ => samples.insert(0, (0.0, 0.0)),
        }
        if samples.len() < 2 {
            return parameter("tabulated modulus needs at least one sample beyond the origin");
        }
        if samples.windows(2).any(|w| w[0].0 >= w[1].0) {
            return parameter("tabulated abscissae must be strictly increasing");
        }
        if samples.windows(2).any(|w| w[0].1 > w[1].1) {
            return parameter("tabulated modulus must be non-decreasing");
        }
        if samples.iter().any(|&(u, p)| !(0.0..=1.0).contains(&u) || p < 0.0) {
            return parameter("tabulated modulus needs u in [0, 1] and p ≥ 0");
        }
        let (u, p) = samples.into_iter().unzip();
        Ok(Self::Tabulated(Table { u, p, source }))
    }

    /// Reads whitespace- or comma-separated `u p` lines; `#` starts a comment.
    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 2 {
                return parameter(format!("{}:{}: expected two columns", path.display(), lineno + 1));
            }
            samples.push((parse_number(fields[0])?, parse_number(fields[1])?));
        }
        Self::tabulated_with_source(samples, Some(path.display().to_string()))
    }

    pub fn eval(&self, u: f64) -> f64 {
        let u = u.abs();
        match self {
            Self::Power(g) if *g == 1.0 => u,
            Self::Power(g) => u.powf(*g),
            Self::Tabulated(t) => {
                let last = t.u.len() - 1;
                if u >= t.u[last] {
                    return t.p[last];
                }
                let i = t.u.partition_point(|&v| v <= u) - 1;
                let w = (u - t.u[i]) / (t.u[i + 1] - t.u[i]);
                t.p[i] + w * (t.p[i + 1] - t.p[i])
            }
        }
    }

    /// p⁻¹(u) = max{v ∈ [0,1] : p(v) ≤ u}.
    ///
    /// Tabulated moduli locate the rightmost sample satisfying the bound and
    /// then bisect between it and its right neighbour.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        let top = self.eval(1.0);
        if u.is_nan() || u < 0.0 || u > top * (1.0 + 4.0 * f64::EPSILON) {
            return domain(format!("p⁻¹ defined on [0, {top}], got {u}"));
        }
        match self {
            Self::Power(g) if *g == 1.0 => Ok(u.min(1.0)),
            Self::Power(g) => Ok(u.powf(1.0 / g).min(1.0)),
            Self::Tabulated(t) => {
                let i = t.p.partition_point(|&v| v <= u);
                if i == t.p.len() {
                    // bound holds at the last sample, and p is constant beyond it
                    return Ok(1.0);
                }
                let (mut lo, mut hi) = (t.u[i - 1], t.u[i]);
                while hi - lo > 1e-15 * hi.max(1e-300) {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.eval(mid) <= u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(lo)
            }
        }
    }

    pub fn is_power(&self) -> Option<f64> {
        match self {
            Self::Power(g) => Some(*g),
            Self::Tabulated(_) => None,
        }
    }

    /// Checks continuity data: non-decreasing with p(0) = 0.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Power(g) => Self::power(*g).map(|_| ()),
            Self::Tabulated(t) => {
                let samples = t.points().collect();
                Self::tabulated(samples).map(|_| ())
            }
        }
    }
}

impl fmt::Display for ModulusFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power(g) => write!(f, "pow:{g}"),
            Self::Tabulated(t) => match &t.source {
                Some(path) => write!(f, "tab:{path}"),
                None => write!(f, "tab:<{} samples>", t.u.len()),
            },
        }
    }
}

impl FromStr for ModulusFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(e) = s.strip_prefix("pow:") {
            return Self::power(parse_number(e)?);
        }
        if let Some(path) = s.strip_prefix("tab:") {
            return Self::from_table_file(Path::new(path));
        }
        parameter(format!("unknown modulus '{s}' (want pow:<g> or tab:<path>)"))
    }
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parameter(format!("not a number: '{s}'")))
}

/// Which square-root-logarithm modulus to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub enum LogForm {
    /// ∏p_k(|Δ_k|)·√(log ∏ 1/|Δ_j|).
    H,
    /// Edge sum Σ_k (∏_{j≠k} p_j(|z_jk|))·|log ∏_{j≠k}|z_jk||^½·p_k(|Δ_k|)·|log|Δ_k||^½.
    Sigma,
    /// `H` with p_k(u) = u^{H_k}.
    HurstH(Vec<f64>),
    /// `Sigma` with p_k(u) = u^{H_k}.
    HurstSigma(Vec<f64>),
    /// |t−s|^{1/4−α}|x−y|^{2α}|log(|t−s||x−y|)|^½ for points (t, x).
    Heat { alpha: f64 },
    /// |s−t|^{1/4}|log(|x||s−t|)|^½ + |x−y|^{1/2}|log(|x−y||t|)|^½ for
    /// points (s, x) and (t, y).
    HeatPointwise,
}

impl LogForm {
    /// Whether the modulus scales rectangle increments (as opposed to plain
    /// point differences W(x) − W(y)).
    pub fn is_rectangular(&self) -> bool {
        matches!(self, Self::H | Self::HurstH(_) | Self::Heat { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::H => "h",
            Self::Sigma => "sigma",
            Self::HurstH(_) => "hH",
            Self::HurstSigma(_) => "sigmaH",
            Self::Heat { .. } => "heat",
            Self::HeatPointwise => "heat_uLIL2",
        }
    }
}

/// A square-root-logarithm modulus built on base moduli p_1..p_n.
#[derive(Clone, Debug, PartialEq)]
pub struct LogModulatedModulus {
    moduli: Vec<ModulusFunction>,
    form: LogForm,
}

impl LogModulatedModulus {
    pub fn h(moduli: Vec<ModulusFunction>) -> Result<Self> {
        Self::with_moduli(moduli, LogForm::H)
    }

    pub fn sigma(moduli: Vec<ModulusFunction>) -> Result<Self> {
        Self::with_moduli(moduli, LogForm::Sigma)
    }

    fn with_moduli(moduli: Vec<ModulusFunction>, form: LogForm) -> Result<Self> {
        if moduli.is_empty() || moduli.len() > crate::field_grid::MAX_DIM {
            return parameter("need between 1 and 8 base moduli");
        }
        Ok(Self { moduli, form })
    }

    pub fn hurst_h(hurst: &[f64]) -> Result<Self> {
        let moduli = hurst_moduli(hurst)?;
        Self::with_moduli(moduli, LogForm::HurstH(hurst.to_vec()))
    }

    pub fn hurst_sigma(hurst: &[f64]) -> Result<Self> {
        let moduli = hurst_moduli(hurst)?;
        Self::with_moduli(moduli, LogForm::HurstSigma(hurst.to_vec()))
    }

    /// Time–space modulus for the heat equation, α ∈ [0, 1/4].
    pub fn heat(alpha: f64) -> Result<Self> {
        if !(0.0..=0.25).contains(&alpha) {
            return parameter(format!("heat exponent α must lie in [0, 1/4], got {alpha}"));
        }
        // exponents may hit 0 at the ends of the range; eval uses the closed form
        let moduli = vec![
            ModulusFunction::Power(0.25 - alpha),
            ModulusFunction::Power(2.0 * alpha),
        ];
        Ok(Self {
            moduli,
            form: LogForm::Heat { alpha },
        })
    }

    pub fn heat_pointwise() -> Self {
        Self {
            moduli: vec![ModulusFunction::Power(0.25), ModulusFunction::Power(0.5)],
            form: LogForm::HeatPointwise,
        }
    }

    /// Builds the form named `name` (h, sigma, hH, sigmaH, heat, heat_uLIL2).
    pub fn named(name: &str, hurst: &[f64], alpha: f64) -> Result<Self> {
        match name {
            "h" => Self::h(hurst_moduli(hurst)?),
            "sigma" => Self::sigma(hurst_moduli(hurst)?),
            "hH" => Self::hurst_h(hurst),
            "sigmaH" => Self::hurst_sigma(hurst),
            "heat" => Self::heat(alpha),
            "heat_uLIL2" => Ok(Self::heat_pointwise()),
            other => parameter(format!("unknown modulus form '{other}'")),
        }
    }

    pub fn dim(&self) -> usize {
        self.moduli.len()
    }

    pub fn form(&self) -> &LogForm {
        &self.form
    }

    pub fn moduli(&self) -> &[ModulusFunction] {
        &self.moduli
    }

    pub fn eval(&self, pair: &PointPair) -> Result<f64> {
        let n = self.dim();
        if pair.dim() != n {
            return parameter(format!("pair of dimension {} for a {n}-dimensional modulus", pair.dim()));
        }
        let deltas = pair.deltas();
        if deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
            return domain(format!("every |x_k − y_k| must lie in (0, 1), got {deltas:?}"));
        }
        match &self.form {
            LogForm::H | LogForm::HurstH(_) => {
                let p: f64 = self.moduli.iter().zip(&deltas).map(|(m, &d)| m.eval(d)).product();
                let log: f64 = deltas.iter().map(|d| -d.ln()).sum();
                Ok(p * log.sqrt())
            }
            LogForm::Sigma | LogForm::HurstSigma(_) => self.sigma_value(pair, &deltas),
            LogForm::Heat { alpha } => {
                let (dt, dx) = (deltas[0], deltas[1]);
                Ok(dt.powf(0.25 - alpha) * dx.powf(2.0 * alpha) * (dt * dx).ln().abs().sqrt())
            }
            LogForm::HeatPointwise => {
                let (dt, dx) = (deltas[0], deltas[1]);
                let space = pair.x[1].abs();
                let time = pair.y[0].abs();
                if space == 0.0 || time == 0.0 {
                    return domain("pointwise heat modulus needs x ≠ 0 and t ≠ 0");
                }
                Ok(dt.powf(0.25) * (space * dt).ln().abs().sqrt()
                    + dx.sqrt() * (dx * time).ln().abs().sqrt())
            }
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn sigma_value(&self, pair: &PointPair, deltas: &[f64]) -> Result<f64> {
        let n = self.dim();
        if pair.x.iter().chain(&pair.y).any(|&c| !(c > 0.0 && c <= 1.0)) {
            return domain("edge modulus needs every coordinate in (0, 1]");
        }
        let mut total = 0.0;
        for k in 0..n {
            let edge = self.moduli[k].eval(deltas[k]) * (-deltas[k].ln()).sqrt();
            // the other coordinates sit at x_j before axis k and y_j after it
            let mut prod = 1.0;
            let mut log = 0.0;
            for j in (0..n).filter(|&j| j != k) {
                let z = if j < k { pair.x[j] } else { pair.y[j] };
                prod *= self.moduli[j].eval(z);
                log += z.ln();
            }
            // with n = 1 the product is empty and contributes the factor 1
            let log_factor = if n == 1 { 1.0 } else { log.abs().sqrt() };
            total += prod * log_factor * edge;
        }
        Ok(total)
    }
}

/// p_k(u) = u^{H_k} for Hurst indices in (0, 1].
pub fn hurst_moduli(hurst: &[f64]) -> Result<Vec<ModulusFunction>> {
    hurst
        .iter()
        .map(|&h| {
            if h > 0.0 && h <= 1.0 {
                Ok(ModulusFunction::Power(h))
            } else {
                parameter(format!("Hurst index must lie in (0, 1], got {h}"))
            }
        })
        .collect()
}

/// Convenience wrapper: Ψ⁻¹(u).
pub fn psi_inverse(psi: &YoungFunction, u: f64) -> Result<f64> {
    psi.inverse(u)
}

/// Convenience wrapper: p⁻¹(u).
pub fn p_inverse(p: &ModulusFunction, u: f64) -> Result<f64> {
    p.inverse(u)
}

/// Convenience wrapper for [`LogModulatedModulus::eval`].
pub fn eval_log_modulus(m: &LogModulatedModulus, pair: &PointPair) -> Result<f64> {
    m.eval(pair)
}
