//! Both sides of the multiparameter Garsia–Rodemich–Rumsey inequality.
//!
//! For a continuous f on [0,1]ⁿ with
//!
//! ```text
//! B = ∬ Ψ(|□ⁿ_y f(x)| / ∏ p_k(|x_k − y_k|)) dx dy < ∞
//! ```
//!
//! every box increment obeys
//!
//! ```text
//! |□ⁿ_s f(t)| ≤ 8ⁿ ∫₀^{|s₁−t₁|}…∫₀^{|sₙ−tₙ|} Ψ⁻¹(4ⁿB / (u₁²…uₙ²)) dp₁(u₁)…dpₙ(uₙ).
//! ```
//!
//! This module evaluates B on a grid, the right-hand side (closed form for
//! power families, nested quadrature otherwise), pairwise verification, the
//! joint Kolmogorov constant, and the chain construction that drives the
//! induction over dimensions.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, parameter, Error, Result};
use crate::field_grid::{Field, FnField, GridField, PointPair, MAX_DIM};
use crate::modulus::{ModulusFunction, YoungFunction};
use crate::quadrature::{integrate_box_left_singular, Neumaier, Tolerance};

/// Relative size below which the walk toward u = 0 stops.
pub const ENDPOINT_CUTOFF: f64 = 1e-12;

/// The field entering the functional B.
#[derive(Clone, Copy)]
pub enum ProblemField<'a> {
    /// Grid samples; B uses the nodes with dual-cell (half-way) weights.
    Grid(&'a GridField),
    /// A function sampled at the centres of `cells`ⁿ equal cells.
    Callable {
        f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
        dim: usize,
        cells: usize,
    },
}

impl ProblemField<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Self::Grid(g) => g.dim(),
            Self::Callable { dim, .. } => *dim,
        }
    }

    pub fn rect_increment(&self, pair: &PointPair) -> Result<f64> {
        match self {
            Self::Grid(g) => g.rect_increment(pair),
            Self::Callable { f, dim, .. } => FnField::new(*dim, |p: &[f64]| f(p))?.rect_increment(pair),
        }
    }
}

/// Field, Young function and one modulus per axis.
#[derive(Clone)]
pub struct GrrProblem<'a> {
    pub field: ProblemField<'a>,
    pub psi: YoungFunction,
    pub moduli: Vec<ModulusFunction>,
}

impl<'a> GrrProblem<'a> {
    pub fn new(field: ProblemField<'a>, psi: YoungFunction, moduli: Vec<ModulusFunction>) -> Result<Self> {
        if moduli.len() != field.dim() {
            return parameter(format!(
                "{} moduli for a {}-dimensional field",
                moduli.len(),
                field.dim()
            ));
        }
        if let ProblemField::Callable { cells, .. } = field {
            if cells == 0 {
                return parameter("need at least one cell per axis");
            }
        }
        Ok(Self { field, psi, moduli })
    }

    pub fn dim(&self) -> usize {
        self.moduli.len()
    }
}

/// Quadrature nodes, weights and sampled values for B.
struct Sample {
    grid: GridField,
    weights: Vec<Vec<f64>>,
}

fn quadrature_sample(field: &ProblemField<'_>) -> Result<Sample> {
    match field {
        ProblemField::Grid(g) => {
            let weights = g.axes().iter().map(|a| dual_weights(a)).collect();
            Ok(Sample {
                grid: (*g).clone(),
                weights,
            })
        }
        ProblemField::Callable { f, dim, cells } => {
            if *cells < 2 {
                return parameter("midpoint rule needs at least two cells per axis");
            }
            let centers: Vec<f64> = (0..*cells).map(|i| (i as f64 + 0.5) / *cells as f64).collect();
            let axes = vec![centers; *dim];
            let grid = GridField::from_fn(axes, |p| f(p))?;
            let weights = vec![vec![1.0 / *cells as f64; *cells]; *dim];
            Ok(Sample { grid, weights })
        }
    }
}

/// Half-way cell widths around each node: node i owns
/// [(a_{i−1}+a_i)/2, (a_i+a_{i+1})/2], clipped to the axis range.
fn dual_weights(axis: &[f64]) -> Vec<f64> {
    let m = axis.len();
    (0..m)
        .map(|i| {
            let lo = if i == 0 { axis[0] } else { 0.5 * (axis[i - 1] + axis[i]) };
            let hi = if i + 1 == m { axis[m - 1] } else { 0.5 * (axis[i] + axis[i + 1]) };
            hi - lo
        })
        .collect()
}

/// Midpoint-rule value of the double integral B.
///
/// Ratios with a zero numerator and a zero denominator count as 0 and
/// contribute Ψ(0); a nonzero numerator over a zero denominator makes B
/// infinite. The pair loop runs in parallel over the first point, each row
/// is summed with compensation, and rows are merged in index order, so the
/// value does not depend on the thread count.
pub fn b_functional(prob: &GrrProblem<'_>) -> Result<f64> {
    let sample = quadrature_sample(&prob.field)?;
    Ok(b_on_sample(&sample, &prob.psi, &prob.moduli))
}

fn b_on_sample(sample: &Sample, psi: &YoungFunction, moduli: &[ModulusFunction]) -> f64 {
    let grid = &sample.grid;
    let n = grid.dim();
    let shape = grid.shape();
    let denom: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let a = &grid.axes()[k];
            let m = a.len();
            let mut t = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    t[i * m + j] = moduli[k].eval(a[i] - a[j]);
                }
            }
            t
        })
        .collect();
    let psi0 = psi.at_zero();
    let total = grid.len();
    let rows: Vec<Neumaier> = (0..total)
        .into_par_iter()
        .map(|xf| {
            let xi = grid.multi_index(xf);
            let wx: f64 = (0..n).map(|k| sample.weights[k][xi[k]]).product();
            let mut acc = Neumaier::default();
            let mut yi = vec![0usize; n];
            for _ in 0..total {
                let mut w = wx;
                let mut den = 1.0;
                let mut degenerate = false;
                for k in 0..n {
                    w *= sample.weights[k][yi[k]];
                    let m = shape[k];
                    den *= denom[k][xi[k] * m + yi[k]];
                    degenerate |= xi[k] == yi[k];
                }
                let term = if degenerate {
                    psi0
                } else {
                    let num = grid.rect_increment_at(&xi, &yi).abs();
                    if den > 0.0 {
                        psi.eval(num / den)
                    } else if num == 0.0 {
                        psi0
                    } else {
                        f64::INFINITY
                    }
                };
                acc.add(w * term);
                advance(&mut yi, &shape);
            }
            acc
        })
        .collect();
    let mut b = Neumaier::default();
    for r in &rows {
        b.merge(r);
    }
    let v = b.sum();
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn advance(idx: &mut [usize], shape: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < shape[k] {
            return;
        }
        idx[k] = 0;
    }
}

/// Ψ⁻¹ with arguments below Ψ(0) mapped to 0 (the sup over an empty set).
fn psi_inverse_clamped(psi: &YoungFunction, u: f64) -> f64 {
    if u <= psi.at_zero() {
        0.0
    } else {
        psi.inverse(u).unwrap_or(0.0)
    }
}

/// The right-hand side 8ⁿ ∫…∫ Ψ⁻¹(4ⁿB/∏u_k²) dp₁…dpₙ over ∏[0, δ_k].
///
/// Power Ψ(u) = u^α with power moduli u^{γ_k} has the closed form
/// 8ⁿ(4ⁿB)^{1/α} ∏ γ_k δ_k^{γ_k−2/α}/(γ_k − 2/α), finite iff every αγ_k > 2;
/// other combinations go through [`grr_rhs_quadrature`]. An infinite B
/// yields +∞ (the bound is vacuous).
pub fn grr_rhs(psi: &YoungFunction, moduli: &[ModulusFunction], b: f64, deltas: &[f64]) -> Result<f64> {
    check_rhs_args(moduli, b, deltas)?;
    if deltas.contains(&0.0) {
        return Ok(0.0);
    }
    if b.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if let YoungFunction::Power(alpha) = psi {
        let gammas: Option<Vec<f64>> = moduli.iter().map(ModulusFunction::is_power).collect();
        if let Some(gammas) = gammas {
            return power_rhs(*alpha, &gammas, b, deltas);
        }
    }
    grr_rhs_quadrature(psi, moduli, b, deltas)
}

fn check_rhs_args(moduli: &[ModulusFunction], b: f64, deltas: &[f64]) -> Result<()> {
    if moduli.len() != deltas.len() || moduli.is_empty() || moduli.len() > MAX_DIM {
        return parameter("need one modulus per axis, 1 ≤ n ≤ 8");
    }
    if b.is_nan() || b <= 0.0 {
        return parameter(format!("B must be positive, got {b}"));
    }
    if deltas.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return domain(format!("side lengths must lie in [0, 1], got {deltas:?}"));
    }
    Ok(())
}

fn power_rhs(alpha: f64, gammas: &[f64], b: f64, deltas: &[f64]) -> Result<f64> {
    let n = gammas.len() as i32;
    let mut value = 8f64.powi(n) * (4f64.powi(n) * b).powf(1.0 / alpha);
    for (&g, &d) in gammas.iter().zip(deltas) {
        let e = g - 2.0 / alpha;
        if alpha * g <= 2.0 {
            return Err(Error::Divergent(format!("αγ = {} ≤ 2", alpha * g)));
        }
        value *= g * d.powf(e) / e;
    }
    Ok(value)
}

/// Nested quadrature of the right-hand side, whatever the families.
///
/// Each Stieltjes integral dp_k is rewritten in the variable v = p_k(u),
/// u = p_k⁻¹(v), and integrated over [0, p_k(δ_k)] with geometric
/// subdivision toward v = 0 until a piece adds less than 1e−12 of the
/// running total. A walk that never gets there is reported as divergent.
pub fn grr_rhs_quadrature(
    psi: &YoungFunction,
    moduli: &[ModulusFunction],
    b: f64,
    deltas: &[f64],
) -> Result<f64> {
    check_rhs_args(moduli, b, deltas)?;
    if deltas.contains(&0.0) {
        return Ok(0.0);
    }
    if b.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let n = moduli.len() as i32;
    let scale = 4f64.powi(n) * b;
    let upper: Vec<f64> = moduli.iter().zip(deltas).map(|(m, &d)| m.eval(d)).collect();
    let integrand = |v: &[f64]| {
        let mut prod = 1.0;
        for (m, &vk) in moduli.iter().zip(v) {
            let u = m.inverse(vk).unwrap_or(0.0);
            prod *= u * u;
        }
        if prod == 0.0 {
            return f64::INFINITY;
        }
        psi_inverse_clamped(psi, scale / prod)
    };
    let max_pieces = if moduli.len() == 1 { 4000 } else { 1200 };
    let r = integrate_box_left_singular(
        &integrand,
        &upper,
        Tolerance::new(1e-300, 1e-12),
        ENDPOINT_CUTOFF,
        max_pieces,
    );
    if !r.converged || !r.value.is_finite() {
        return Err(Error::Divergent(format!(
            "{psi} with moduli {:?}: endpoint walk did not settle",
            moduli.iter().map(ToString::to_string).collect::<Vec<_>>()
        )));
    }
    Ok(8f64.powi(n) * r.value)
}

/// Where the B entering the right-hand side comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum BSource {
    /// Midpoint estimate from [`b_functional`].
    Estimated,
    /// A value known in closed form.
    ClosedForm(f64),
}

impl BSource {
    /// Default discretization allowance: none for a closed-form B, 5% for a
    /// Riemann-sum B, which can undershoot the continuum value.
    pub fn default_slack(&self) -> f64 {
        match self {
            Self::Estimated => 0.05,
            Self::ClosedForm(_) => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The right-hand side is infinite or divergent; nothing to check.
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCheck {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lhs: f64,
    pub rhs: Option<f64>,
    pub status: CheckStatus,
}

/// Outcome of [`verify_grr`].
#[derive(Clone, Debug, Serialize)]
pub struct GrrVerification {
    pub b: f64,
    pub b_source: BSource,
    pub slack: f64,
    pub checks: Vec<PairCheck>,
    pub pass: bool,
}

/// Memoizes the right-hand side by side lengths; on a grid only a few
/// distinct side-length vectors occur.
pub struct RhsCache<'a> {
    psi: YoungFunction,
    moduli: &'a [ModulusFunction],
    b: f64,
    table: HashMap<Vec<u64>, Option<f64>>,
}

impl<'a> RhsCache<'a> {
    pub fn new(psi: YoungFunction, moduli: &'a [ModulusFunction], b: f64) -> Self {
        Self {
            psi,
            moduli,
            b,
            table: HashMap::new(),
        }
    }

    /// `None` when the integral diverges.
    pub fn get(&mut self, deltas: &[f64]) -> Result<Option<f64>> {
        let key: Vec<u64> = deltas.iter().map(|d| d.to_bits()).collect();
        if let Some(v) = self.table.get(&key) {
            return Ok(*v);
        }
        let v = match grr_rhs(&self.psi, self.moduli, self.b, deltas) {
            Ok(v) => Some(v),
            Err(Error::Divergent(_)) => None,
            Err(e) => return Err(e),
        };
        self.table.insert(key, v);
        Ok(v)
    }
}

fn classify(lhs: f64, rhs: Option<f64>, slack: f64) -> CheckStatus {
    match rhs {
        Some(r) if r.is_finite() => {
            if lhs <= (1.0 + slack) * r {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            }
        }
        _ => CheckStatus::Vacuous,
    }
}

/// Checks |□ f| ≤ (1 + slack)·RHS at each pair.
pub fn verify_grr(
    prob: &GrrProblem<'_>,
    pairs: &[PointPair],
    slack: f64,
    b_source: BSource,
) -> Result<GrrVerification> {
    if !(slack >= 0.0) {
        return parameter(format!("slack must be non-negative, got {slack}"));
    }
    let b = match b_source {
        BSource::Estimated => b_functional(prob)?,
        BSource::ClosedForm(b) => b,
    };
    let mut cache = RhsCache::new(prob.psi, &prob.moduli, b);
    let mut checks = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let lhs = prob.field.rect_increment(pair)?.abs();
        let rhs = if b > 0.0 {
            cache.get(&pair.deltas())?
        } else {
            // B = 0 forces every increment to vanish
            Some(0.0)
        };
        checks.push(PairCheck {
            x: pair.x.clone(),
            y: pair.y.clone(),
            lhs,
            rhs,
            status: classify(lhs, rhs, slack),
        });
    }
    let pass = checks.iter().all(|c| c.status != CheckStatus::Fail);
    Ok(GrrVerification {
        b,
        b_source,
        slack,
        checks,
        pass,
    })
}

/// Aggregate of a check over every box spanned by two grid nodes.
#[derive(Clone, Debug, Default, Serialize)]
pub struct GridCheckSummary {
    pub pairs: u64,
    pub passed: u64,
    pub failed: u64,
    pub vacuous: u64,
    /// Largest lhs / rhs over pairs with finite positive rhs.
    pub max_ratio: f64,
    /// First few failing boxes.
    pub failures: Vec<PairCheck>,
    pub pass: bool,
}

impl GridCheckSummary {
    fn absorb(&mut self, other: GridCheckSummary) {
        self.pairs += other.pairs;
        self.passed += other.passed;
        self.failed += other.failed;
        self.vacuous += other.vacuous;
        self.max_ratio = self.max_ratio.max(other.max_ratio);
        for f in other.failures {
            if self.failures.len() < MAX_REPORTED_FAILURES {
                self.failures.push(f);
            }
        }
    }
}

const MAX_REPORTED_FAILURES: usize = 20;

/// Index pairs i < j of every axis, in lexicographic order.
pub(crate) fn axis_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect()
}

/// Visits every non-degenerate box with corners on grid nodes (one per
/// choice of i_k < j_k on each axis) and tallies `bound(deltas)` against
/// |□ f|. Work is split over the first axis; tallies merge in order.
pub(crate) fn check_all_boxes<B>(grid: &GridField, slack: f64, bound: B) -> GridCheckSummary
where
    B: Fn(&[f64]) -> Option<f64> + Sync,
{
    let n = grid.dim();
    let per_axis: Vec<Vec<(usize, usize)>> = grid.shape().iter().map(|&m| axis_pairs(m)).collect();
    let chunks: Vec<GridCheckSummary> = per_axis[0]
        .par_iter()
        .map(|&first| {
            let mut summary = GridCheckSummary::default();
            let mut counter = vec![0usize; n];
            let mut xi = vec![0usize; n];
            let mut yi = vec![0usize; n];
            let mut deltas = vec![0.0; n];
            loop {
                for k in 0..n {
                    let (i, j) = if k == 0 { first } else { per_axis[k][counter[k]] };
                    xi[k] = i;
                    yi[k] = j;
                    deltas[k] = grid.axes()[k][j] - grid.axes()[k][i];
                }
                let lhs = grid.rect_increment_at(&xi, &yi).abs();
                let rhs = bound(&deltas);
                summary.pairs += 1;
                match classify(lhs, rhs, slack) {
                    CheckStatus::Pass => summary.passed += 1,
                    CheckStatus::Vacuous => summary.vacuous += 1,
                    CheckStatus::Fail => {
                        summary.failed += 1;
                        if summary.failures.len() < MAX_REPORTED_FAILURES {
                            summary.failures.push(PairCheck {
                                x: grid.node(&xi),
                                y: grid.node(&yi),
                                lhs,
                                rhs,
                                status: CheckStatus::Fail,
                            });
                        }
                    }
                }
                if let Some(r) = rhs {
                    if r > 0.0 && r.is_finite() {
                        summary.max_ratio = summary.max_ratio.max(lhs / r);
                    }
                }
                // odometer over axes 1..n
                let mut k = n;
                loop {
                    if k == 1 {
                        return summary;
                    }
                    k -= 1;
                    counter[k] += 1;
                    if counter[k] < per_axis[k].len() {
                        break;
                    }
                    counter[k] = 0;
                }
            }
        })
        .collect();
    let mut total = GridCheckSummary::default();
    for c in chunks {
        total.absorb(c);
    }
    total.pass = total.failed == 0;
    total
}

/// Precomputes `f(deltas)` for every distinct side-length vector of a grid.
pub(crate) fn tabulate_by_deltas<F>(grid: &GridField, f: F) -> HashMap<Vec<u64>, Option<f64>>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let n = grid.dim();
    let mut seps: Vec<Vec<f64>> = Vec::with_capacity(n);
    for axis in grid.axes() {
        let mut s: Vec<f64> = axis_pairs(axis.len()).iter().map(|&(i, j)| axis[j] - axis[i]).collect();
        s.sort_by(f64::total_cmp);
        s.dedup();
        seps.push(s);
    }
    let mut keys: Vec<Vec<f64>> = vec![vec![]];
    for s in &seps {
        keys = keys
            .into_iter()
            .flat_map(|prefix| {
                s.iter().map(move |&d| {
                    let mut p = prefix.clone();
                    p.push(d);
                    p
                })
            })
            .collect();
    }
    keys.par_iter()
        .map(|d| (d.iter().map(|v| v.to_bits()).collect(), f(d)))
        .collect()
}

/// Checks the inequality at every box spanned by two grid nodes, with B
/// from `b_source` (the grid itself when estimated).
pub fn verify_grr_on_grid(
    grid: &GridField,
    psi: YoungFunction,
    moduli: &[ModulusFunction],
    slack: f64,
    b_source: BSource,
) -> Result<(f64, GridCheckSummary)> {
    let prob = GrrProblem::new(ProblemField::Grid(grid), psi, moduli.to_vec())?;
    let b = match b_source {
        BSource::Estimated => b_functional(&prob)?,
        BSource::ClosedForm(b) => b,
    };
    if b == 0.0 {
        let summary = check_all_boxes(grid, slack, |_| Some(0.0));
        return Ok((b, summary));
    }
    // validate once so tabulation below only sees divergence
    grr_rhs(&psi, moduli, b, &vec![1.0; grid.dim()]).or_else(|e| match e {
        Error::Divergent(_) => Ok(f64::INFINITY),
        e => Err(e),
    })?;
    let table = tabulate_by_deltas(grid, |d| grr_rhs(&psi, moduli, b, d).ok());
    let summary = check_all_boxes(grid, slack, |d| {
        let key: Vec<u64> = d.iter().map(|v| v.to_bits()).collect();
        table.get(&key).copied().flatten()
    });
    Ok((b, summary))
}

/// C = 8ⁿ·4^{n/α}·∏(1 + 2/(β_k − αε_k)), defined when 0 < αε_k < β_k.
pub fn kolmogorov_constant(n: usize, alpha: f64, beta: &[f64], eps: &[f64]) -> Result<f64> {
    if beta.len() != n || eps.len() != n || n == 0 || n > MAX_DIM {
        return parameter("β and ε need one entry per axis, 1 ≤ n ≤ 8");
    }
    if !(alpha > 0.0) {
        return parameter(format!("α must be positive, got {alpha}"));
    }
    for (k, (&b, &e)) in beta.iter().zip(eps).enumerate() {
        if !(e * alpha > 0.0 && e * alpha < b) {
            return parameter(format!("axis {k}: need 0 < αε < β, got αε = {}, β = {b}", alpha * e));
        }
    }
    let ni = n as i32;
    let mut c = 8f64.powi(ni) * 4f64.powf(n as f64 / alpha);
    for (&b, &e) in beta.iter().zip(eps) {
        c *= 1.0 + 2.0 / (b - alpha * e);
    }
    Ok(c)
}

/// Outcome of [`kolmogorov_bound_check`].
#[derive(Clone, Debug, Serialize)]
pub struct KolmogorovReport {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub eps: Vec<f64>,
    /// Exponents γ_k = (2 + β_k − αε_k)/α of the power moduli behind B.
    pub gammas: Vec<f64>,
    pub constant: f64,
    pub b: f64,
    /// η = B^{1/α}.
    pub eta: f64,
    /// B / K̂, the realized η^α against the moment constant.
    pub b_over_k: f64,
    pub slack: f64,
    pub summary: GridCheckSummary,
    pub vacuous: bool,
    pub pass: bool,
}

/// Checks |□_t W(s)| ≤ C·η·∏|t_k − s_k|^{β_k/α − ε_k} at every grid box.
///
/// η = B^{1/α} with B computed on the grid for Ψ(u) = u^α and
/// p_k(u) = u^{γ_k}, γ_k = (2 + β_k − αε_k)/α, the choice for which the
/// GRR right-hand side equals the displayed bound exactly.
pub fn kolmogorov_bound_check(
    field: &GridField,
    alpha: f64,
    beta: &[f64],
    eps: &[f64],
    k_hat: f64,
    slack: f64,
) -> Result<KolmogorovReport> {
    let n = field.dim();
    let constant = kolmogorov_constant(n, alpha, beta, eps)?;
    if !(k_hat > 0.0) {
        return parameter("K̂ must be positive");
    }
    let gammas: Vec<f64> = beta
        .iter()
        .zip(eps)
        .map(|(&b, &e)| (2.0 + b - alpha * e) / alpha)
        .collect();
    let moduli: Vec<ModulusFunction> = gammas.iter().map(|&g| ModulusFunction::Power(g)).collect();
    let prob = GrrProblem::new(ProblemField::Grid(field), YoungFunction::Power(alpha), moduli)?;
    let b = b_functional(&prob)?;
    let eta = b.powf(1.0 / alpha);
    let exponents: Vec<f64> = beta.iter().zip(eps).map(|(&b, &e)| b / alpha - e).collect();
    let vacuous = !eta.is_finite();
    let summary = check_all_boxes(field, slack, |d| {
        if vacuous {
            return None;
        }
        let p: f64 = d.iter().zip(&exponents).map(|(x, e)| x.powf(*e)).product();
        Some(constant * eta * p)
    });
    let pass = summary.pass;
    Ok(KolmogorovReport {
        alpha,
        beta: beta.to_vec(),
        eps: eps.to_vec(),
        gammas,
        constant,
        b,
        eta,
        b_over_k: b / k_hat,
        slack,
        summary,
        vacuous,
        pass,
    })
}

/// One step of a GRR chain.
#[derive(Clone, Debug, Serialize)]
pub struct ChainStep {
    pub t_prev: f64,
    pub d: f64,
    pub t: f64,
    /// I(t_k).
    pub i_t: f64,
    /// ∫ Ψ(|g(z,t_k) − g(z,t_{k−1})| / p(|t_k − t_{k−1}|)) μ(dz).
    pub integral: f64,
    /// 4B / d².
    pub bound: f64,
}

/// Decreasing sequences t_0 > t_1 > … and d_0 > d_1 > … with
/// t_k ≤ d_{k−1} = p⁻¹(p(t_{k−1})/2).
#[derive(Clone, Debug, Serialize)]
pub struct GrrChain {
    pub t_seq: Vec<f64>,
    pub d_seq: Vec<f64>,
    pub steps: Vec<ChainStep>,
    /// Dyadic level: candidates are j/2^level.
    pub level: u32,
}

impl GrrChain {
    /// Every step satisfies the integral bound 4B/d².
    pub fn satisfies_bound(&self) -> bool {
        self.steps.iter().all(|s| s.integral <= s.bound)
    }
}

/// Builds a chain on the dyadic candidates j/2^level.
///
/// `g(z, t)` is evaluated for the atoms z of a discrete measure with the
/// given weights. I(t) = ∫₀¹ ∫ Ψ(|g(z,t) − g(z,s)|/p(|t − s|)) μ(dz) ds uses
/// the midpoints of the 2^level cells in s. t_0 is the largest candidate
/// with I(t_0) ≤ B; then each t_k is the largest candidate t ≤ d_{k−1} with
/// I(t) ≤ 2B/d_{k−1} and the step integral at most 2I(t_{k−1})/d_{k−1}.
/// The chain ends once no positive candidate lies below d_{k−1}; a step
/// with candidates but none admissible is a resolution error.
pub fn build_grr_chain<G>(
    g: G,
    weights: &[f64],
    psi: &YoungFunction,
    p: &ModulusFunction,
    b: f64,
    level: u32,
) -> Result<GrrChain>
where
    G: Fn(usize, f64) -> f64,
{
    if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0)) {
        return parameter("measure weights must be non-negative and non-empty");
    }
    if !(1..=24).contains(&level) {
        return parameter("dyadic level must lie in 1..=24");
    }
    if !(b > 0.0) {
        return parameter("B must be positive");
    }
    let cells = 1usize << level;
    let h = 1.0 / cells as f64;
    let mids: Vec<f64> = (0..cells).map(|j| (j as f64 + 0.5) * h).collect();
    let g_mid: Vec<Vec<f64>> = mids
        .iter()
        .map(|&s| (0..weights.len()).map(|z| g(z, s)).collect())
        .collect();
    let g_at = |t: f64| -> Vec<f64> { (0..weights.len()).map(|z| g(z, t)).collect() };
    let step_integral = |ga: &[f64], gb: &[f64], dist: f64| -> f64 {
        let den = p.eval(dist);
        weights
            .iter()
            .zip(ga.iter().zip(gb))
            .map(|(w, (a, b))| {
                let num = (a - b).abs();
                let r = if den > 0.0 {
                    num / den
                } else if num == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                w * psi.eval(r)
            })
            .sum()
    };
    let big_i = |t: f64, gt: &[f64]| -> f64 {
        let mut acc = Neumaier::default();
        for (s, gs) in mids.iter().zip(&g_mid) {
            acc.add(h * step_integral(gt, gs, (t - s).abs()));
        }
        acc.sum()
    };

    let candidates: Vec<f64> = (1..cells).map(|j| j as f64 * h).collect();
    let mut t0 = None;
    for &t in candidates.iter().rev() {
        let gt = g_at(t);
        let it = big_i(t, &gt);
        if it <= b {
            t0 = Some((t, gt, it));
            break;
        }
    }
    let (mut t_prev, mut g_prev, mut i_prev) =
        t0.ok_or_else(|| Error::Resolution("no starting point with I(t) ≤ B on the grid".into()))?;
    let mut chain = GrrChain {
        t_seq: vec![t_prev],
        d_seq: Vec::new(),
        steps: Vec::new(),
        level,
    };
    loop {
        let d = p.inverse(0.5 * p.eval(t_prev))?;
        chain.d_seq.push(d);
        let below: Vec<f64> = candidates.iter().copied().filter(|&t| t <= d).collect();
        if below.is_empty() {
            break;
        }
        let mut found = None;
        for &t in below.iter().rev() {
            let gt = g_at(t);
            let it = big_i(t, &gt);
            if it > 2.0 * b / d {
                continue;
            }
            let step = step_integral(&gt, &g_prev, t_prev - t);
            if step <= 2.0 * i_prev / d {
                found = Some((t, gt, it, step));
                break;
            }
        }
        let (t, gt, it, step) = found.ok_or_else(|| {
            Error::Resolution(format!("no admissible point below d = {d} at level {level}"))
        })?;
        chain.steps.push(ChainStep {
            t_prev,
            d,
            t,
            i_t: it,
            integral: step,
            bound: 4.0 * b / (d * d),
        });
        chain.t_seq.push(t);
        t_prev = t;
        g_prev = gt;
        i_prev = it;
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn pow(a: f64) -> ModulusFunction {
        ModulusFunction::Power(a)
    }

    #[test]
    fn rhs_reference_values() {
        let psi = YoungFunction::Power(4.0);
        let one = grr_rhs(&psi, &[pow(1.0)], 1.0, &[1.0]).unwrap();
        assert!((one - 16.0 * SQRT_2).abs() < 1e-12);
        let two = grr_rhs(&psi, &[pow(1.0), pow(1.0)], 1.0, &[1.0, 1.0]).unwrap();
        assert!((two - 512.0).abs() < 1e-10);
        assert_eq!(grr_rhs(&psi, &[pow(1.0), pow(1.0)], 1.0, &[0.0, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn rhs_quadrature_oracle_one_dim() {
        // 8 ∫₀¹ (4/u²)^{1/4} du by the quadrature route
        let q = grr_rhs_quadrature(&YoungFunction::Power(4.0), &[pow(1.0)], 1.0, &[1.0]).unwrap();
        assert!((q - 16.0 * SQRT_2).abs() < 1e-8 * 16.0 * SQRT_2, "{q}");
    }

    #[test]
    fn rhs_divergence_is_signalled() {
        let psi = YoungFunction::Power(2.0);
        assert!(matches!(grr_rhs(&psi, &[pow(1.0)], 1.0, &[0.5]), Err(Error::Divergent(_))));
        assert!(matches!(
            grr_rhs_quadrature(&psi, &[pow(0.9)], 1.0, &[0.5]),
            Err(Error::Divergent(_))
        ));
    }

    #[test]
    fn b_for_linear_function() {
        let f = |p: &[f64]| p[0];
        let prob = GrrProblem::new(
            ProblemField::Callable { f: &f, dim: 1, cells: 200 },
            YoungFunction::Power(4.0),
            vec![pow(1.0)],
        )
        .unwrap();
        // integrand is 1 off the diagonal cells
        let b = b_functional(&prob).unwrap();
        assert!((b - (1.0 - 1.0 / 200.0)).abs() < 1e-12, "{b}");
    }

    #[test]
    fn b_for_product_function() {
        let f = |p: &[f64]| p[0] * p[1];
        let prob = GrrProblem::new(
            ProblemField::Callable { f: &f, dim: 2, cells: 40 },
            YoungFunction::Power(4.0),
            vec![pow(1.0), pow(1.0)],
        )
        .unwrap();
        let b = b_functional(&prob).unwrap();
        let want = (1.0 - 1.0 / 40.0f64).powi(2);
        assert!((b - want).abs() < 1e-12, "{b} vs {want}");
    }

    #[test]
    fn b_of_zero_field_is_psi_at_zero() {
        let f = |_: &[f64]| 0.0;
        let prob = GrrProblem::new(
            ProblemField::Callable { f: &f, dim: 2, cells: 10 },
            YoungFunction::Power(2.0),
            vec![pow(0.5), pow(0.5)],
        )
        .unwrap();
        assert_eq!(b_functional(&prob).unwrap(), 0.0);
    }

    #[test]
    fn b_infinite_when_modulus_vanishes_on_a_jump() {
        let g = GridField::new(vec![vec![0.0, 0.5, 1.0]], vec![0.0, 1.0, 1.0]).unwrap();
        let flat = ModulusFunction::tabulated(vec![(0.6, 0.0), (1.0, 1.0)]).unwrap();
        let prob = GrrProblem::new(ProblemField::Grid(&g), YoungFunction::Power(2.0), vec![flat]).unwrap();
        assert!(b_functional(&prob).unwrap().is_infinite());
    }

    #[test]
    fn dual_weights_sum_to_span() {
        let w = dual_weights(&[0.0, 0.1, 0.5, 1.0]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(w[0], 0.05);
    }

    #[test]
    fn verify_simple_cases() {
        let lin = |p: &[f64]| p[0];
        let prob = GrrProblem::new(
            ProblemField::Callable { f: &lin, dim: 1, cells: 64 },
            YoungFunction::Power(4.0),
            vec![pow(1.0)],
        )
        .unwrap();
        let pair = PointPair::new(vec![0.0], vec![1.0]).unwrap();
        let v = verify_grr(&prob, &[pair], 0.0, BSource::ClosedForm(1.0)).unwrap();
        assert!(v.pass);
        assert_eq!(v.checks[0].lhs, 1.0);
        assert!((v.checks[0].rhs.unwrap() - 16.0 * SQRT_2).abs() < 1e-12);

        let prod = |p: &[f64]| p[0] * p[1];
        let prob = GrrProblem::new(
            ProblemField::Callable { f: &prod, dim: 2, cells: 32 },
            YoungFunction::Power(4.0),
            vec![pow(1.0), pow(1.0)],
        )
        .unwrap();
        let pair = PointPair::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let v = verify_grr(&prob, &[pair], 0.0, BSource::ClosedForm(1.0)).unwrap();
        assert!(v.pass);
        assert!((v.checks[0].rhs.unwrap() - 512.0).abs() < 1e-9);
    }

    #[test]
    fn verify_zero_field_estimated_b() {
        let g = GridField::from_fn(GridField::uniform_axes(&[9, 9]), |_| 0.0).unwrap();
        let (b, s) =
            verify_grr_on_grid(&g, YoungFunction::Power(4.0), &[pow(1.0), pow(1.0)], 0.05, BSource::Estimated)
                .unwrap();
        assert_eq!(b, 0.0);
        assert!(s.pass);
        assert_eq!(s.pairs, 36 * 36);
    }

    #[test]
    fn verify_divergent_pairs_are_vacuous() {
        let f = |p: &[f64]| p[0];
        let prob = GrrProblem::new(
            ProblemField::Callable { f: &f, dim: 1, cells: 16 },
            YoungFunction::Power(2.0),
            vec![pow(1.0)],
        )
        .unwrap();
        let pair = PointPair::new(vec![0.25], vec![0.75]).unwrap();
        let v = verify_grr(&prob, &[pair], 0.05, BSource::Estimated).unwrap();
        assert_eq!(v.checks[0].status, CheckStatus::Vacuous);
        assert!(v.pass);
    }

    #[test]
    fn kolmogorov_constant_values() {
        assert!((kolmogorov_constant(1, 2.0, &[1.0], &[0.25]).unwrap() - 80.0).abs() < 1e-12);
        assert!(
            (kolmogorov_constant(2, 2.0, &[1.0, 1.0], &[0.25, 0.25]).unwrap() - 6400.0).abs() < 1e-9
        );
        assert!(kolmogorov_constant(1, 2.0, &[1.0], &[0.5]).is_err());
        assert!(kolmogorov_constant(1, 2.0, &[1.0], &[0.0]).is_err());
    }

    #[test]
    fn kolmogorov_check_deterministic_fields() {
        let zero = GridField::from_fn(GridField::uniform_axes(&[9, 9]), |_| 0.0).unwrap();
        let r = kolmogorov_bound_check(&zero, 4.0, &[1.0, 1.0], &[0.1, 0.1], 3.0, 0.05).unwrap();
        assert!(r.pass);
        assert_eq!(r.summary.max_ratio, 0.0);

        let prod = GridField::from_fn(GridField::uniform_axes(&[17, 17]), |p| p[0] * p[1]).unwrap();
        let r = kolmogorov_bound_check(&prod, 4.0, &[1.0, 1.0], &[0.1, 0.1], 3.0, 0.05).unwrap();
        assert!(r.pass, "{:?}", r.summary);
        assert!(r.summary.max_ratio < 1.0);
    }

    #[test]
    fn chain_for_identity_path() {
        let chain = build_grr_chain(
            |_, t| t,
            &[0.5, 0.5],
            &YoungFunction::Power(2.0),
            &pow(1.0),
            1.0,
            12,
        )
        .unwrap();
        assert!(chain.steps.len() > 5);
        for (k, s) in chain.steps.iter().enumerate() {
            assert_eq!(s.d, 0.5 * chain.t_seq[k]);
            assert!(s.t <= s.d);
            assert!((s.integral - 1.0).abs() < 1e-12);
            assert!(s.integral <= s.bound);
        }
        assert!(chain.satisfies_bound());
    }

    #[test]
    fn chain_for_zero_path() {
        let chain =
            build_grr_chain(|_, _| 0.0, &[1.0], &YoungFunction::Power(2.0), &pow(0.5), 1.0, 8).unwrap();
        assert!(chain.satisfies_bound());
        for w in chain.t_seq.windows(2) {
            assert!(w[1] < w[0]);
        }
    }
}
