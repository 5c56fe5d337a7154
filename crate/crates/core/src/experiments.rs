//! Monte Carlo harness: sup ratios against log-modulated moduli, per-path
//! certificates from the GRR inequality, edge decompositions and refinement
//! sweeps.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    b_functional, check_all_boxes, grr_rhs, tabulate_by_deltas, CheckStatus, GridCheckSummary, GrrProblem,
    ProblemField, ENDPOINT_CUTOFF,
};
use crate::error::{parameter, Error, Result};
use crate::field_grid::{GridField, PointPair};
use crate::gaussian::{CovarianceModel, Sampler};
use crate::modulus::{LogForm, LogModulatedModulus, ModulusFunction, YoungFunction};
use crate::quadrature::{integrate_box_left_singular, Tolerance};
use crate::report::SCHEMA;
use crate::rng::{replicate_rng, SUBSAMPLE_STREAM};

/// Grids with more nodes than 65ⁿ are probed on a random subsample.
pub const FULL_ENUMERATION_SIDE: usize = 65;
/// Pairs drawn when subsampling.
pub const SUBSAMPLE_PAIRS: usize = 1_000_000;
/// Per-step growth of the median sup ratio above which a sweep is flagged.
pub const STABILITY_BAND: f64 = 0.5;
/// Default upper bound on separations entering a sup ratio.
pub const DEFAULT_DELTA_MAX: f64 = 0.5;

/// Ψ and moduli for the per-path certificate.
#[derive(Clone, Debug)]
pub struct CertificateSpec {
    pub psi: YoungFunction,
    pub moduli: Vec<ModulusFunction>,
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub model: CovarianceModel,
    pub modulus: LogModulatedModulus,
    pub delta_max: f64,
    pub replicates: u64,
    pub seed: u64,
    pub slack: f64,
    pub certificate: Option<CertificateSpec>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta_max)?;
        if self.replicates == 0 {
            return parameter("need at least one replicate");
        }
        if self.modulus.dim() != self.model.dim() {
            return parameter("modulus and model dimensions differ");
        }
        if !(self.slack >= 0.0) {
            return parameter("slack must be non-negative");
        }
        if let Some(c) = &self.certificate {
            if c.moduli.len() != self.model.dim() {
                return parameter("certificate needs one modulus per axis");
            }
        }
        Ok(())
    }
}

fn check_delta(delta_max: f64) -> Result<()> {
    if !(delta_max > 0.0 && delta_max < 1.0) {
        return parameter(format!("δ_max must lie in (0, 1), got {delta_max}"));
    }
    Ok(())
}

/// Sup ratio together with what it was taken over.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupRatio {
    pub value: f64,
    /// Largest numerator over the same pairs.
    pub max_increment: f64,
    pub pairs: u64,
    /// Seed of the pair subsample, when one was used.
    pub subsample_seed: Option<u64>,
}

/// max |□ⁿ W| / m(x, y) over grid boxes with every side in (0, δ_max].
///
/// Rectangular forms (h, hH, heat) divide the joint increment; the σ forms
/// bound point differences and divide |W(x) − W(y)| over node pairs with
/// all coordinates in (0, 1).
pub fn sup_ratio(field: &GridField, modulus: &LogModulatedModulus, delta_max: f64) -> Result<f64> {
    Ok(sup_ratio_detail(field, modulus, delta_max, 0)?.value)
}

/// [`sup_ratio`] with pair counts; `subsample_seed` drives the stratified
/// subsample used on grids above 65ⁿ nodes.
pub fn sup_ratio_detail(
    field: &GridField,
    modulus: &LogModulatedModulus,
    delta_max: f64,
    subsample_seed: u64,
) -> Result<SupRatio> {
    check_delta(delta_max)?;
    if modulus.dim() != field.dim() {
        return parameter("modulus and field dimensions differ");
    }
    let n = field.dim();
    let subsample = field.len() > FULL_ENUMERATION_SIDE.pow(n as u32);
    let r = if modulus.form().is_rectangular() {
        rect_sup(field, modulus, delta_max, subsample.then_some(subsample_seed))?
    } else {
        point_sup(field, modulus, delta_max, subsample.then_some(subsample_seed))?
    };
    if r.pairs == 0 {
        return parameter(format!("no admissible grid pair with separations in (0, {delta_max}]"));
    }
    Ok(r)
}

#[derive(Clone, Copy, Default)]
struct Acc {
    ratio: f64,
    inc: f64,
    pairs: u64,
}

impl Acc {
    fn push(&mut self, num: f64, den: f64) {
        self.pairs += 1;
        self.inc = self.inc.max(num);
        self.ratio = self.ratio.max(num / den);
    }

    fn merge(a: Acc, b: Acc) -> Acc {
        Acc {
            ratio: a.ratio.max(b.ratio),
            inc: a.inc.max(b.inc),
            pairs: a.pairs + b.pairs,
        }
    }
}

/// Per axis: admissible index pairs i < j and the separation index of each.
struct AxisPairs {
    pairs: Vec<(usize, usize, usize)>,
    seps: Vec<f64>,
}

fn axis_pairs_within(axis: &[f64], delta_max: f64) -> AxisPairs {
    let m = axis.len();
    let mut seps: Vec<f64> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| axis[j] - axis[i]))
        .filter(|&d| d > 0.0 && d <= delta_max)
        .collect();
    seps.sort_by(f64::total_cmp);
    seps.dedup();
    let mut pairs = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let d = axis[j] - axis[i];
            if d <= delta_max {
                let s = seps.binary_search_by(|v| v.total_cmp(&d)).expect("separation present");
                pairs.push((i, j, s));
            }
        }
    }
    AxisPairs { pairs, seps }
}

fn rect_sup(
    field: &GridField,
    modulus: &LogModulatedModulus,
    delta_max: f64,
    subsample: Option<u64>,
) -> Result<SupRatio> {
    let n = field.dim();
    let per_axis: Vec<AxisPairs> = field.axes().iter().map(|a| axis_pairs_within(a, delta_max)).collect();
    if per_axis.iter().any(|a| a.pairs.is_empty()) {
        return Ok(SupRatio {
            value: 0.0,
            max_increment: 0.0,
            pairs: 0,
            subsample_seed: subsample,
        });
    }
    // the modulus depends on the side lengths only
    let sizes: Vec<usize> = per_axis.iter().map(|a| a.seps.len()).collect();
    let total: usize = sizes.iter().product();
    let table: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut d = vec![0.0; n];
            for k in (0..n).rev() {
                d[k] = per_axis[k].seps[rem % sizes[k]];
                rem /= sizes[k];
            }
            modulus.eval(&PointPair::new(vec![0.0; n], d)?)
        })
        .collect::<Result<_>>()?;
    let table_index = |ids: &[usize]| ids.iter().zip(&sizes).fold(0usize, |acc, (i, s)| acc * s + i);

    let acc = if let Some(seed) = subsample {
        let per_node = SUBSAMPLE_PAIRS.div_ceil(field.len());
        // neighbours of each node within δ_max, per axis
        let neighbours: Vec<Vec<Vec<(usize, usize)>>> = per_axis
            .iter()
            .zip(field.axes())
            .map(|(ap, a)| {
                let mut nb = vec![Vec::new(); a.len()];
                for &(i, j, s) in &ap.pairs {
                    nb[i].push((j, s));
                    nb[j].push((i, s));
                }
                nb
            })
            .collect();
        (0..field.len())
            .into_par_iter()
            .map(|flat| {
                let xi = field.multi_index(flat);
                let mut acc = Acc::default();
                if (0..n).any(|k| neighbours[k][xi[k]].is_empty()) {
                    return acc;
                }
                let mut rng = replicate_rng(seed ^ SUBSAMPLE_STREAM, flat as u64);
                let mut yi = vec![0usize; n];
                let mut ids = vec![0usize; n];
                for _ in 0..per_node {
                    for k in 0..n {
                        let nb = &neighbours[k][xi[k]];
                        let (j, s) = nb[rng.random_range(0..nb.len())];
                        yi[k] = j;
                        ids[k] = s;
                    }
                    acc.push(field.rect_increment_at(&xi, &yi).abs(), table[table_index(&ids)]);
                }
                acc
            })
            .reduce(Acc::default, Acc::merge)
    } else {
        per_axis[0]
            .pairs
            .par_iter()
            .map(|&(i0, j0, s0)| {
                let mut acc = Acc::default();
                let mut counter = vec![0usize; n];
                let mut xi = vec![0usize; n];
                let mut yi = vec![0usize; n];
                let mut ids = vec![0usize; n];
                xi[0] = i0;
                yi[0] = j0;
                ids[0] = s0;
                loop {
                    for k in 1..n {
                        let (i, j, s) = per_axis[k].pairs[counter[k]];
                        xi[k] = i;
                        yi[k] = j;
                        ids[k] = s;
                    }
                    acc.push(field.rect_increment_at(&xi, &yi).abs(), table[table_index(&ids)]);
                    let mut k = n;
                    loop {
                        if k == 1 {
                            return acc;
                        }
                        k -= 1;
                        counter[k] += 1;
                        if counter[k] < per_axis[k].pairs.len() {
                            break;
                        }
                        counter[k] = 0;
                    }
                }
            })
            .reduce(Acc::default, Acc::merge)
    };
    Ok(SupRatio {
        value: acc.ratio,
        max_increment: acc.inc,
        pairs: acc.pairs,
        subsample_seed: subsample,
    })
}

fn point_sup(
    field: &GridField,
    modulus: &LogModulatedModulus,
    delta_max: f64,
    subsample: Option<u64>,
) -> Result<SupRatio> {
    let n = field.dim();
    // ordered neighbours j ≠ i with coordinates in (0, 1) on both ends;
    // σ vanishes when a transverse coordinate equals 1
    let neighbours: Vec<Vec<Vec<usize>>> = field
        .axes()
        .iter()
        .map(|a| {
            (0..a.len())
                .map(|i| {
                    if !(a[i] > 0.0 && a[i] < 1.0) {
                        return Vec::new();
                    }
                    (0..a.len())
                        .filter(|&j| j != i && a[j] > 0.0 && a[j] < 1.0 && (a[j] - a[i]).abs() <= delta_max)
                        .collect()
                })
                .collect()
        })
        .collect();
    let per_node = subsample.map(|_| SUBSAMPLE_PAIRS.div_ceil(field.len()));
    let acc = (0..field.len())
        .into_par_iter()
        .map(|flat| -> Result<Acc> {
            let xi = field.multi_index(flat);
            let mut acc = Acc::default();
            if (0..n).any(|k| neighbours[k][xi[k]].is_empty()) {
                return Ok(acc);
            }
            let x = field.node(&xi);
            let wx = field.values()[flat];
            let visit = |yi: &[usize], acc: &mut Acc| -> Result<()> {
                let y = field.node(yi);
                let den = modulus.eval(&PointPair::new(x.clone(), y)?)?;
                acc.push((wx - field.value_at(yi)).abs(), den);
                Ok(())
            };
            let mut yi = vec![0usize; n];
            if let (Some(seed), Some(count)) = (subsample, per_node) {
                let mut rng = replicate_rng(seed ^ SUBSAMPLE_STREAM, flat as u64);
                for _ in 0..count {
                    for k in 0..n {
                        let nb = &neighbours[k][xi[k]];
                        yi[k] = nb[rng.random_range(0..nb.len())];
                    }
                    visit(&yi, &mut acc)?;
                }
                return Ok(acc);
            }
            let mut counter = vec![0usize; n];
            loop {
                for k in 0..n {
                    yi[k] = neighbours[k][xi[k]][counter[k]];
                }
                visit(&yi, &mut acc)?;
                let mut k = n;
                loop {
                    if k == 0 {
                        return Ok(acc);
                    }
                    k -= 1;
                    counter[k] += 1;
                    if counter[k] < neighbours[k][xi[k]].len() {
                        break;
                    }
                    counter[k] = 0;
                }
            }
        })
        .try_reduce(Acc::default, |a, b| Ok(Acc::merge(a, b)))?;
    Ok(SupRatio {
        value: acc.ratio,
        max_increment: acc.inc,
        pairs: acc.pairs,
        subsample_seed: subsample,
    })
}

/// T(δ) = ∫₀^{δ₁}…∫₀^{δₙ} (log 1/(u₁²…uₙ²))^{1/2} dp₁(u₁)…dpₙ(uₙ), the
/// path-independent part of the certificate, in the variables v_k = p_k(u_k).
pub fn log_moment_integral(moduli: &[ModulusFunction], deltas: &[f64]) -> Result<f64> {
    if moduli.len() != deltas.len() {
        return parameter("need one modulus per side length");
    }
    if deltas.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return parameter("side lengths must lie in [0, 1]");
    }
    if deltas.contains(&0.0) {
        return Ok(0.0);
    }
    let upper: Vec<f64> = moduli.iter().zip(deltas).map(|(m, &d)| m.eval(d)).collect();
    let integrand = |v: &[f64]| {
        let mut log_sum = 0.0;
        for (m, &vk) in moduli.iter().zip(v) {
            let u = m.inverse(vk).unwrap_or(0.0);
            if u <= 0.0 {
                return f64::INFINITY;
            }
            log_sum -= 2.0 * u.ln();
        }
        log_sum.max(0.0).sqrt()
    };
    let r = integrate_box_left_singular(
        &integrand,
        &upper,
        Tolerance::new(1e-300, 1e-10),
        ENDPOINT_CUTOFF,
        600,
    );
    if !r.converged || !r.value.is_finite() {
        return Err(Error::Divergent("log-moment integral did not settle".into()));
    }
    Ok(r.value)
}

/// The displayed two-term certificate bound
/// 2·8ⁿ·T(δ) + √(log(4ⁿB))·∏p_k(δ_k).
pub fn certificate_bound(t: f64, b: f64, moduli: &[ModulusFunction], deltas: &[f64]) -> f64 {
    let n = moduli.len() as i32;
    let prod: f64 = moduli.iter().zip(deltas).map(|(m, &d)| m.eval(d)).product();
    2.0 * 8f64.powi(n) * t + (4f64.powi(n) * b).ln().max(0.0).sqrt() * prod
}

/// T(δ) for every side-length vector of a grid, computed once and shared by
/// all replicates on that grid.
pub struct CertificateKernel {
    moduli: Vec<ModulusFunction>,
    table: HashMap<Vec<u64>, Option<f64>>,
}

impl CertificateKernel {
    pub fn for_grid(moduli: &[ModulusFunction], axes: &[Vec<f64>]) -> Result<Self> {
        if moduli.len() != axes.len() {
            return parameter("need one modulus per axis");
        }
        let probe = GridField::from_fn(axes.to_vec(), |_| 0.0)?;
        let table = tabulate_by_deltas(&probe, |d| log_moment_integral(moduli, d).ok());
        Ok(Self {
            moduli: moduli.to_vec(),
            table,
        })
    }

    pub fn moduli(&self) -> &[ModulusFunction] {
        &self.moduli
    }

    pub fn t(&self, deltas: &[f64]) -> Option<f64> {
        let key: Vec<u64> = deltas.iter().map(|d| d.to_bits()).collect();
        self.table.get(&key).copied().flatten()
    }
}

/// Outcome of a per-path certificate over every grid box.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub b: f64,
    /// B was infinite: the certificate says nothing about this path.
    pub vacuous: bool,
    pub slack: f64,
    pub summary: GridCheckSummary,
    pub pass: bool,
}

fn require_expq(psi: &YoungFunction) -> Result<()> {
    if *psi != YoungFunction::ExpQuarterSquare {
        return parameter("the certificate is stated for Ψ(u) = e^{u²/4}");
    }
    Ok(())
}

/// Checks the two-term bound with the path's own B at every grid box.
pub fn grr_certificate_grid(
    field: &GridField,
    psi: &YoungFunction,
    kernel: &CertificateKernel,
    slack: f64,
) -> Result<CertificateReport> {
    require_expq(psi)?;
    let moduli = kernel.moduli();
    let prob = GrrProblem::new(ProblemField::Grid(field), *psi, moduli.to_vec())?;
    let b = b_functional(&prob)?;
    if !b.is_finite() {
        return Ok(CertificateReport {
            b,
            vacuous: true,
            slack,
            summary: GridCheckSummary {
                pass: true,
                ..GridCheckSummary::default()
            },
            pass: true,
        });
    }
    let summary = check_all_boxes(field, slack, |d| kernel.t(d).map(|t| certificate_bound(t, b, moduli, d)));
    let pass = summary.pass;
    Ok(CertificateReport {
        b,
        vacuous: false,
        slack,
        summary,
        pass,
    })
}

/// One pair of [`grr_certificate`].
#[derive(Clone, Debug, Serialize)]
pub struct CertificateCheck {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lhs: f64,
    /// The displayed two-term bound.
    pub bound: Option<f64>,
    /// The GRR right-hand side itself, 8ⁿ∫…Ψ⁻¹(4ⁿB/∏u²)dp.
    pub grr_rhs: Option<f64>,
    pub status: CheckStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairCertificateReport {
    pub b: f64,
    pub vacuous: bool,
    pub slack: f64,
    pub checks: Vec<CertificateCheck>,
    pub pass: bool,
}

/// Per-pair certificate with the path's own B, reporting both the displayed
/// two-term bound (which decides pass/fail) and the GRR right-hand side.
pub fn grr_certificate(
    field: &GridField,
    psi: &YoungFunction,
    moduli: &[ModulusFunction],
    pairs: &[PointPair],
    slack: f64,
) -> Result<PairCertificateReport> {
    require_expq(psi)?;
    let prob = GrrProblem::new(ProblemField::Grid(field), *psi, moduli.to_vec())?;
    let b = b_functional(&prob)?;
    let vacuous = !b.is_finite();
    let mut checks = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let lhs = prob.field.rect_increment(pair)?.abs();
        let d = pair.deltas();
        let (bound, full) = if vacuous {
            (None, None)
        } else {
            let t = log_moment_integral(moduli, &d).ok();
            (
                t.map(|t| certificate_bound(t, b, moduli, &d)),
                grr_rhs(psi, moduli, b, &d).ok(),
            )
        };
        let status = match bound {
            Some(r) if lhs <= (1.0 + slack) * r => CheckStatus::Pass,
            Some(_) => CheckStatus::Fail,
            None => CheckStatus::Vacuous,
        };
        checks.push(CertificateCheck {
            x: pair.x.clone(),
            y: pair.y.clone(),
            lhs,
            bound,
            grr_rhs: full,
            status,
        });
    }
    let pass = checks.iter().all(|c| c.status != CheckStatus::Fail);
    Ok(PairCertificateReport {
        b,
        vacuous,
        slack,
        checks,
        pass,
    })
}

/// |W(x) − W(y)| against σ(x, y) for a field vanishing on the axes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeBound {
    pub lhs: f64,
    pub rhs: f64,
    /// W(e_k) − W(e_{k−1}) along the path e_0 = y → e_n = x that switches
    /// coordinate k from y_k to x_k at step k; they sum to W(x) − W(y).
    pub edges: Vec<f64>,
}

/// Increments along the edges from y to x, one coordinate at a time.
pub fn edge_increments(field: &GridField, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = field.dim();
    if x.len() != n || y.len() != n {
        return parameter("points must match the field dimension");
    }
    let xi: Vec<usize> = (0..n).map(|k| field.locate(k, x[k])).collect::<Result<_>>()?;
    let mut cur: Vec<usize> = (0..n).map(|k| field.locate(k, y[k])).collect::<Result<_>>()?;
    let mut prev = field.value_at(&cur);
    let mut edges = Vec::with_capacity(n);
    for k in 0..n {
        cur[k] = xi[k];
        let v = field.value_at(&cur);
        edges.push(v - prev);
        prev = v;
    }
    Ok(edges)
}

pub fn edge_decomposition_bound(
    field: &GridField,
    x: &[f64],
    y: &[f64],
    modulus: &LogModulatedModulus,
    delta_max: f64,
) -> Result<EdgeBound> {
    check_delta(delta_max)?;
    if !matches!(modulus.form(), LogForm::Sigma | LogForm::HurstSigma(_)) {
        return parameter("edge decomposition uses the σ forms");
    }
    check_vanishing_on_axes(field)?;
    let edges = edge_increments(field, x, y)?;
    let lhs = (field.value_at(&locate_all(field, x)?) - field.value_at(&locate_all(field, y)?)).abs();
    if x == y {
        return Ok(EdgeBound { lhs, rhs: 0.0, edges });
    }
    let pair = PointPair::new(x.to_vec(), y.to_vec())?;
    if pair.deltas().iter().any(|&d| d > delta_max) {
        return parameter(format!("separations exceed δ_max = {delta_max}"));
    }
    let rhs = modulus.eval(&pair)?;
    Ok(EdgeBound { lhs, rhs, edges })
}

fn locate_all(field: &GridField, p: &[f64]) -> Result<Vec<usize>> {
    (0..field.dim()).map(|k| field.locate(k, p[k])).collect()
}

fn check_vanishing_on_axes(field: &GridField) -> Result<()> {
    for flat in 0..field.len() {
        let idx = field.multi_index(flat);
        let on_axis = idx.iter().enumerate().any(|(k, &i)| field.axes()[k][i] == 0.0);
        if on_axis && field.values()[flat] != 0.0 {
            return Err(Error::Hypothesis(format!(
                "field is {} at {:?}, which has a zero coordinate",
                field.values()[flat],
                field.node(&idx)
            )));
        }
    }
    Ok(())
}

/// Per-replicate statistics.
#[derive(Clone, Debug, Serialize)]
pub struct ReplicateStats {
    pub replicate: u64,
    /// B(ω) of the certificate, when one is configured.
    pub b: Option<f64>,
    pub sup_ratio: f64,
    pub max_increment: f64,
    pub pairs: u64,
    pub certificate_pass: Option<bool>,
    pub certificate_vacuous: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridStats {
    pub shape: Vec<usize>,
    pub sampling_path: crate::gaussian::SamplingPath,
    pub jitter: Vec<f64>,
    pub subsample_seed: Option<u64>,
    pub replicates: Vec<ReplicateStats>,
    pub median: f64,
    pub p95: f64,
    pub all_finite: bool,
    pub certificates_pass: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Refinement {
    /// median_{k+1} / median_k.
    pub growth: Vec<f64>,
    pub band: f64,
    /// Some step grew by more than the band.
    pub unstable: bool,
    pub note: &'static str,
}

/// Everything a sweep produced, ready for serialization.
#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub schema: &'static str,
    pub model: &'static str,
    pub params: serde_json::Value,
    pub form: &'static str,
    pub delta_max: f64,
    pub seed: u64,
    pub slack: f64,
    pub grids: Vec<GridStats>,
    pub refinement: Refinement,
    pub pass: bool,
}

impl RegularityReport {
    /// Rows `grid, replicate, B, sup_ratio, pass`.
    pub fn csv(&self) -> String {
        let mut s = String::from("grid,replicate,B,sup_ratio,pass\n");
        for g in &self.grids {
            let grid = g.shape.iter().map(ToString::to_string).collect::<Vec<_>>().join("x");
            for r in &g.replicates {
                let b = r.b.map(crate::report::format_number).unwrap_or_default();
                let pass = r.certificate_pass.map(|p| p.to_string()).unwrap_or_default();
                s.push_str(&format!(
                    "{grid},{},{b},{},{pass}\n",
                    r.replicate,
                    crate::report::format_number(r.sup_ratio)
                ));
            }
        }
        s
    }
}

/// Linear-interpolation quantile of a sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn run_grid(spec: &ExperimentSpec, shape: &[usize]) -> Result<GridStats> {
    let axes = GridField::uniform_axes(shape);
    let sampler = Sampler::auto(&spec.model, &axes)?;
    let kernel = match &spec.certificate {
        Some(c) => Some(CertificateKernel::for_grid(&c.moduli, &axes)?),
        None => None,
    };
    let replicates: Vec<ReplicateStats> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let field = sampler.sample(spec.seed, r);
            let s = sup_ratio_detail(&field, &spec.modulus, spec.delta_max, spec.seed)?;
            let (b, pass, vacuous) = match (&spec.certificate, &kernel) {
                (Some(c), Some(k)) => {
                    let rep = grr_certificate_grid(&field, &c.psi, k, spec.slack)?;
                    (Some(rep.b), Some(rep.pass), Some(rep.vacuous))
                }
                _ => (None, None, None),
            };
            Ok(ReplicateStats {
                replicate: r,
                b,
                sup_ratio: s.value,
                max_increment: s.max_increment,
                pairs: s.pairs,
                certificate_pass: pass,
                certificate_vacuous: vacuous,
            })
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = replicates.iter().map(|r| r.sup_ratio).collect();
    let subsample = axes.iter().map(Vec::len).product::<usize>() > FULL_ENUMERATION_SIDE.pow(shape.len() as u32);
    let certificates_pass = spec
        .certificate
        .as_ref()
        .map(|_| replicates.iter().all(|r| r.certificate_pass != Some(false)));
    Ok(GridStats {
        shape: shape.to_vec(),
        sampling_path: sampler.path(),
        jitter: sampler.jitter().to_vec(),
        subsample_seed: subsample.then_some(spec.seed),
        median: quantile(&ratios, 0.5),
        p95: quantile(&ratios, 0.95),
        all_finite: ratios.iter().all(|r| r.is_finite() && *r >= 0.0),
        certificates_pass,
        replicates,
    })
}

/// Runs the sup-ratio statistic (and the certificate, if configured) per
/// replicate on each grid, in order of increasing resolution.
pub fn refinement_sweep(spec: &ExperimentSpec, grids: &[Vec<usize>]) -> Result<RegularityReport> {
    spec.validate()?;
    if grids.is_empty() {
        return parameter("need at least one grid");
    }
    for g in grids {
        if g.len() != spec.model.dim() || g.iter().any(|&m| m < 2) {
            return parameter(format!("grid {g:?} does not fit a {}-dimensional model", spec.model.dim()));
        }
    }
    for w in grids.windows(2) {
        let (a, b): (usize, usize) = (w[0].iter().product(), w[1].iter().product());
        if b <= a {
            return parameter("grids must increase strictly in resolution");
        }
    }
    let stats: Vec<GridStats> = grids.iter().map(|g| run_grid(spec, g)).collect::<Result<_>>()?;
    let growth: Vec<f64> = stats.windows(2).map(|w| w[1].median / w[0].median).collect();
    let unstable = growth.iter().any(|g| !(*g <= 1.0 + STABILITY_BAND));
    let pass = stats.iter().all(|g| g.all_finite && g.certificates_pass != Some(false));
    Ok(RegularityReport {
        schema: SCHEMA,
        model: spec.model.name(),
        params: spec.model.params(),
        form: spec.modulus.form().name(),
        delta_max: spec.delta_max,
        seed: spec.seed,
        slack: spec.slack,
        grids: stats,
        refinement: Refinement {
            growth,
            band: STABILITY_BAND,
            unstable,
            note: "heuristic stability band, not a property of the limit",
        },
        pass,
    })
}
