//! Centered Gaussian fields: covariance models, exact increment variances,
//! the sequential modulus construction, and exact sampling on grids.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{parameter, Error, Result};
use crate::field_grid::{corner_expansion, GridField, PointPair, MAX_DIM};
use crate::heat::{heat_cov, HeatPoint};
use crate::linalg::Factor;
use crate::modulus::ModulusFunction;
use crate::quadrature::Neumaier;
use crate::rng::{replicate_rng, standard_normals, MOMENT_STREAM};

/// One-dimensional covariance factor Q_k(s, t).
pub type Factor1d = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Covariance Q(x, y) on [0,1]ⁿ.
pub type CovFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// The covariance Q(x, y) of a centered field.
#[derive(Clone)]
pub enum CovarianceModel {
    /// Q(x, y) = ∏ Q_k(x_k, y_k).
    Product(Vec<Factor1d>),
    /// Fractional Brownian field with Hurst indices H_k ∈ (0, 1].
    Fbm(Vec<f64>),
    /// Mild solution of the heat equation; coordinates are (t, y).
    Heat,
    Custom { dim: usize, q: CovFn },
}

impl fmt::Debug for CovarianceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Product(v) => write!(f, "Product({} factors)", v.len()),
            Self::Fbm(h) => write!(f, "Fbm({h:?})"),
            Self::Heat => write!(f, "Heat"),
            Self::Custom { dim, .. } => write!(f, "Custom(dim = {dim})"),
        }
    }
}

/// R_H(s, t) = ½(|s|^{2H} + |t|^{2H} − |s − t|^{2H}).
pub fn fbm_cov_1d(h: f64, s: f64, t: f64) -> f64 {
    let e = 2.0 * h;
    0.5 * (s.abs().powf(e) + t.abs().powf(e) - (s - t).abs().powf(e))
}

impl CovarianceModel {
    pub fn fbm(hurst: Vec<f64>) -> Result<Self> {
        if hurst.is_empty() || hurst.len() > MAX_DIM {
            return parameter("need 1 to 8 Hurst indices");
        }
        if let Some(h) = hurst.iter().find(|h| !(**h > 0.0 && **h <= 1.0)) {
            return parameter(format!("Hurst index must lie in (0, 1], got {h}"));
        }
        Ok(Self::Fbm(hurst))
    }

    pub fn product(factors: Vec<Factor1d>) -> Result<Self> {
        if factors.is_empty() || factors.len() > MAX_DIM {
            return parameter("need 1 to 8 covariance factors");
        }
        Ok(Self::Product(factors))
    }

    pub fn custom(dim: usize, q: CovFn) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return parameter("dimension must lie in 1..=8");
        }
        Ok(Self::Custom { dim, q })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Product(f) => f.len(),
            Self::Fbm(h) => h.len(),
            Self::Heat => 2,
            Self::Custom { dim, .. } => *dim,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Product(_) => "product",
            Self::Fbm(_) => "fbm",
            Self::Heat => "heat",
            Self::Custom { .. } => "custom",
        }
    }

    /// Parameters recorded in snapshot manifests and reports.
    pub fn params(&self) -> serde_json::Value {
        match self {
            Self::Fbm(h) => json!({ "hurst": h }),
            Self::Product(f) => json!({ "factors": f.len() }),
            Self::Heat => json!({}),
            Self::Custom { dim, .. } => json!({ "dim": dim }),
        }
    }

    pub fn is_product(&self) -> bool {
        matches!(self, Self::Product(_) | Self::Fbm(_))
    }

    /// Q_k(s, t) for product models.
    pub fn factor(&self, k: usize, s: f64, t: f64) -> Option<f64> {
        match self {
            Self::Product(f) => Some(f[k](s, t)),
            Self::Fbm(h) => Some(fbm_cov_1d(h[k], s, t)),
            _ => None,
        }
    }

    pub fn cov(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Self::Product(_) | Self::Fbm(_) => (0..self.dim())
                .map(|k| self.factor(k, x[k], y[k]).unwrap_or(0.0))
                .product(),
            Self::Heat => heat_cov(HeatPoint::new(x[0], x[1]), HeatPoint::new(y[0], y[1])),
            Self::Custom { q, .. } => q(x, y),
        }
    }

    /// Covariance matrix over the nodes of `grid` in row-major order.
    pub fn grid_covariance(&self, grid: &GridField) -> Vec<f64> {
        let n = grid.len();
        let nodes: Vec<Vec<f64>> = (0..n).map(|i| grid.node(&grid.multi_index(i))).collect();
        let mut c = vec![0.0; n * n];
        c.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.cov(&nodes[i], &nodes[j]);
            }
        });
        // symmetrize exactly
        for i in 0..n {
            for j in 0..i {
                c[j * n + i] = c[i * n + j];
            }
        }
        c
    }
}

fn check_pair(model: &CovarianceModel, pair: &PointPair) -> Result<()> {
    if pair.dim() != model.dim() {
        return parameter(format!(
            "pair of dimension {} for a {}-dimensional model",
            pair.dim(),
            model.dim()
        ));
    }
    Ok(())
}

/// E|□ⁿ_y W(x)|² = □^{2n}_{(y,y)} Q(x,x), using the product formula when the
/// model factorizes and the 4ⁿ-corner sum otherwise.
pub fn increment_variance(model: &CovarianceModel, pair: &PointPair) -> Result<f64> {
    if model.is_product() {
        increment_variance_product(model, pair)
    } else {
        increment_variance_generic(model, pair)
    }
}

/// □^{2n}_{(y,y)} Q(x,x) as a signed sum over 2ⁿ × 2ⁿ corner pairs.
pub fn increment_variance_generic(model: &CovarianceModel, pair: &PointPair) -> Result<f64> {
    check_pair(model, pair)?;
    if pair.is_degenerate() {
        return Ok(0.0);
    }
    let corners = corner_expansion(pair.dim())?;
    let points: Vec<Vec<f64>> = corners.iter().map(|c| c.point(pair)).collect();
    let mut acc = Neumaier::default();
    for (a, ca) in corners.iter().enumerate() {
        for (b, cb) in corners.iter().enumerate() {
            let sign = f64::from(ca.sign) * f64::from(cb.sign);
            acc.add(sign * model.cov(&points[a], &points[b]));
        }
    }
    Ok(acc.sum())
}

/// ∏ [Q_k(x_k,x_k) − Q_k(x_k,y_k) − Q_k(y_k,x_k) + Q_k(y_k,y_k)].
pub fn increment_variance_product(model: &CovarianceModel, pair: &PointPair) -> Result<f64> {
    check_pair(model, pair)?;
    if !model.is_product() {
        return parameter(format!("{} model has no product form", model.name()));
    }
    if pair.is_degenerate() {
        return Ok(0.0);
    }
    let mut v = 1.0;
    for k in 0..pair.dim() {
        let (x, y) = (pair.x[k], pair.y[k]);
        let q = |s, t| model.factor(k, s, t).unwrap_or(0.0);
        v *= q(x, x) - q(x, y) - q(y, x) + q(y, y);
    }
    Ok(v)
}

/// Tabulated moduli from the sequential construction, with the sup taken
/// over grid pairs only.
#[derive(Clone, Debug)]
pub struct EmpiricalModulus {
    pub moduli: Vec<ModulusFunction>,
    /// The sup ran over grid pairs; continuum values may be larger.
    pub grid_resolution: bool,
}

/// Sequential construction: p₁(u) = sup_{|x₁−y₁|≤u} V^{1/2} and
/// p_k(u) = sup_{|x_k−y_k|≤u} V^{1/2}/∏_{j<k} p_j(|x_j−y_j|), with V the
/// increment variance and 0/0 = 0, over every box spanned by grid nodes.
pub fn build_empirical_modulus(model: &CovarianceModel, axes: &[Vec<f64>]) -> Result<EmpiricalModulus> {
    let n = model.dim();
    if axes.len() != n {
        return parameter("need one axis per model dimension");
    }
    GridField::from_fn(axes.to_vec(), |_| 0.0)?;
    // distinct separations per axis and the separation index of each node pair
    let mut seps: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut sep_index: Vec<Vec<usize>> = Vec::with_capacity(n);
    for a in axes {
        let m = a.len();
        let mut s: Vec<f64> = (0..m).flat_map(|i| (0..m).map(move |j| (a[i] - a[j]).abs())).collect();
        s.sort_by(f64::total_cmp);
        s.dedup();
        let idx = (0..m * m)
            .map(|ij| {
                let d = (a[ij / m] - a[ij % m]).abs();
                s.binary_search_by(|v| v.total_cmp(&d)).expect("separation present")
            })
            .collect();
        seps.push(s);
        sep_index.push(idx);
    }
    // boxes: one (i ≤ j) pair per axis
    let per_axis: Vec<Vec<(usize, usize)>> = axes
        .iter()
        .map(|a| (0..a.len()).flat_map(|i| (i..a.len()).map(move |j| (i, j))).collect())
        .collect();
    let mut boxes: Vec<Vec<(usize, usize)>> = vec![vec![]];
    for pa in &per_axis {
        boxes = boxes
            .into_iter()
            .flat_map(|b| {
                pa.iter().map(move |&p| {
                    let mut b = b.clone();
                    b.push(p);
                    b
                })
            })
            .collect();
    }
    let variances: Vec<(Vec<usize>, f64)> = boxes
        .par_iter()
        .map(|b| {
            let x: Vec<f64> = b.iter().enumerate().map(|(k, &(i, _))| axes[k][i]).collect();
            let y: Vec<f64> = b.iter().enumerate().map(|(k, &(_, j))| axes[k][j]).collect();
            let ids: Vec<usize> = b
                .iter()
                .enumerate()
                .map(|(k, &(i, j))| sep_index[k][i * axes[k].len() + j])
                .collect();
            let pair = PointPair::new(x, y)?;
            let v = increment_variance(model, &pair)?;
            Ok((ids, v))
        })
        .collect::<Result<_>>()?;
    let scale = variances.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    for (_, v) in &variances {
        if *v < -1e-12 * scale.max(1.0) {
            return Err(Error::Model(format!("negative increment variance {v}")));
        }
    }
    let mut tables: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut sup = vec![0.0f64; seps[k].len()];
        for (ids, v) in &variances {
            let root = v.max(0.0).sqrt();
            let den: f64 = (0..k).map(|j| tables[j][ids[j]]).product();
            let r = if den > 0.0 { root / den } else { 0.0 };
            sup[ids[k]] = sup[ids[k]].max(r);
        }
        for i in 1..sup.len() {
            sup[i] = sup[i].max(sup[i - 1]);
        }
        tables.push(sup);
    }
    let moduli = seps
        .iter()
        .zip(&tables)
        .map(|(s, p)| ModulusFunction::tabulated(s.iter().copied().zip(p.iter().copied()).collect()))
        .collect::<Result<_>>()?;
    Ok(EmpiricalModulus {
        moduli,
        grid_resolution: true,
    })
}

/// Largest V / ∏p_k²(|x_k − y_k|) over grid boxes (0/0 = 0); at most 1 when
/// the product dominance holds.
pub fn dominance_ratio(model: &CovarianceModel, axes: &[Vec<f64>], moduli: &[ModulusFunction]) -> Result<f64> {
    let grid = GridField::from_fn(axes.to_vec(), |_| 0.0)?;
    let n = grid.len();
    (0..n)
        .into_par_iter()
        .map(|a| {
            let x = grid.node(&grid.multi_index(a));
            let mut worst = 0.0f64;
            for b in 0..n {
                let y = grid.node(&grid.multi_index(b));
                let pair = PointPair::new(x.clone(), y)?;
                let v = increment_variance(model, &pair)?;
                let den: f64 = pair.deltas().iter().zip(moduli).map(|(d, p)| p.eval(*d).powi(2)).product();
                let r = if den > 0.0 {
                    v / den
                } else if v <= 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst = worst.max(r);
            }
            Ok(worst)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// How the grid covariance is factorized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingPath {
    /// Per-axis factors L_k applied as ⊗L_k without forming it.
    Kronecker,
    /// ⊗L_k materialized as one matrix; same arithmetic as `Kronecker`.
    Dense,
    /// Cholesky of the assembled grid covariance.
    FullCholesky,
}

enum Plan {
    Kronecker(Vec<Vec<f64>>),
    Dense(Vec<f64>),
    Full(Factor),
}

/// Exact sampler for one model on one grid; factorizations are computed
/// once and shared by all replicates.
pub struct Sampler {
    model: CovarianceModel,
    axes: Vec<Vec<f64>>,
    shape: Vec<usize>,
    len: usize,
    plan: Plan,
    path: SamplingPath,
    jitter: Vec<f64>,
}

/// Nodes above which the dense Kronecker matrix is refused.
const DENSE_LIMIT: usize = 4096;

impl Sampler {
    /// Kronecker path for product models, full factorization otherwise.
    pub fn auto(model: &CovarianceModel, axes: &[Vec<f64>]) -> Result<Self> {
        let path = if model.is_product() {
            SamplingPath::Kronecker
        } else {
            SamplingPath::FullCholesky
        };
        Self::new(model, axes, path)
    }

    pub fn new(model: &CovarianceModel, axes: &[Vec<f64>], path: SamplingPath) -> Result<Self> {
        if axes.len() != model.dim() {
            return parameter("need one axis per model dimension");
        }
        let grid = GridField::from_fn(axes.to_vec(), |_| 0.0)?;
        let shape = grid.shape();
        let len = grid.len();
        let (plan, jitter) = match path {
            SamplingPath::Kronecker | SamplingPath::Dense => {
                if !model.is_product() {
                    return parameter(format!("{} model has no product form", model.name()));
                }
                let mut lowers = Vec::with_capacity(axes.len());
                let mut jitter = Vec::with_capacity(axes.len());
                for (k, a) in axes.iter().enumerate() {
                    let m = a.len();
                    let mut c = vec![0.0; m * m];
                    for i in 0..m {
                        for j in 0..m {
                            c[i * m + j] = model.factor(k, a[i], a[j]).unwrap_or(0.0);
                        }
                    }
                    let f = Factor::new(&c, m)?;
                    jitter.push(f.jitter);
                    lowers.push(f.embedded());
                }
                if path == SamplingPath::Dense {
                    if len > DENSE_LIMIT {
                        return parameter(format!("dense path limited to {DENSE_LIMIT} nodes"));
                    }
                    (Plan::Dense(kronecker_dense(&lowers, &shape, &grid)), jitter)
                } else {
                    (Plan::Kronecker(lowers), jitter)
                }
            }
            SamplingPath::FullCholesky => {
                let f = Factor::new(&model.grid_covariance(&grid), len)?;
                let j = vec![f.jitter];
                (Plan::Full(f), j)
            }
        };
        Ok(Self {
            model: model.clone(),
            axes: axes.to_vec(),
            shape,
            len,
            plan,
            path,
            jitter,
        })
    }

    pub fn path(&self) -> SamplingPath {
        self.path
    }

    pub fn model(&self) -> &CovarianceModel {
        &self.model
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// Jitter added per factor (one per axis on Kronecker paths).
    pub fn jitter(&self) -> &[f64] {
        &self.jitter
    }

    /// Row-major sample values of replicate `replicate`.
    pub fn sample_values(&self, seed: u64, replicate: u64) -> Vec<f64> {
        let z = standard_normals(&mut replicate_rng(seed, replicate), self.len);
        match &self.plan {
            Plan::Kronecker(lowers) => kronecker_apply(lowers, &self.shape, &z),
            Plan::Dense(m) => {
                let n = self.len;
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let row = &m[i * n..(i + 1) * n];
                        let mut acc = 0.0;
                        for (a, b) in row.iter().zip(&z) {
                            acc += a * b;
                        }
                        acc
                    })
                    .collect()
            }
            Plan::Full(f) => f.apply(&z),
        }
    }

    pub fn sample(&self, seed: u64, replicate: u64) -> GridField {
        GridField::new(self.axes.clone(), self.sample_values(seed, replicate))
            .expect("axes validated at construction")
    }
}

/// (⊗L_k)[i, j] = ∏_k L_k[i_k, j_k], multiplied in axis order.
fn kronecker_dense(lowers: &[Vec<f64>], shape: &[usize], grid: &GridField) -> Vec<f64> {
    let n = grid.len();
    let mut m = vec![0.0; n * n];
    m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let ii = grid.multi_index(i);
        for (j, v) in row.iter_mut().enumerate() {
            let jj = grid.multi_index(j);
            let mut c = 1.0;
            for k in 0..shape.len() {
                c *= lowers[k][ii[k] * shape[k] + jj[k]];
            }
            *v = c;
        }
    });
    m
}

/// y = (⊗L_k) z visiting only j with j_k ≤ i_k, in the same lexicographic
/// order and with the same coefficient products as the dense matvec. The
/// skipped terms are exact zeros and an accumulator that starts at +0 never
/// becomes −0, so the two paths agree bit for bit.
fn kronecker_apply(lowers: &[Vec<f64>], shape: &[usize], z: &[f64]) -> Vec<f64> {
    let n = shape.len();
    let len: usize = shape.iter().product();
    let mut strides = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    (0..len)
        .into_par_iter()
        .map(|flat| {
            let mut i = vec![0usize; n];
            let mut r = flat;
            for k in 0..n {
                i[k] = r / strides[k];
                r %= strides[k];
            }
            let mut j = vec![0usize; n];
            let mut acc = 0.0;
            loop {
                let mut c = 1.0;
                let mut idx = 0;
                for k in 0..n {
                    c *= lowers[k][i[k] * shape[k] + j[k]];
                    idx += j[k] * strides[k];
                }
                acc += c * z[idx];
                let mut k = n;
                loop {
                    if k == 0 {
                        return acc;
                    }
                    k -= 1;
                    if j[k] < i[k] {
                        j[k] += 1;
                        break;
                    }
                    j[k] = 0;
                }
            }
        })
        .collect()
}

/// One exact replicate of `model` on the grid spanned by `axes`.
pub fn sample_field(model: &CovarianceModel, axes: &[Vec<f64>], seed: u64, replicate: u64) -> Result<GridField> {
    Ok(Sampler::auto(model, axes)?.sample(seed, replicate))
}

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: u64,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut s = Neumaier::default();
    for v in values {
        s.add(*v);
    }
    let mean = s.sum() / n;
    let mut ss = Neumaier::default();
    for v in values {
        ss.add((v - mean) * (v - mean));
    }
    let var = ss.sum() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and standard error of (□ⁿW)² over `replicates` exact draws of the
/// field on the 2ⁿ corners of the rectangle.
pub fn increment_moment_mc(
    model: &CovarianceModel,
    pair: &PointPair,
    replicates: u64,
    seed: u64,
) -> Result<Estimate> {
    check_pair(model, pair)?;
    if replicates < 100 {
        return parameter("need at least 100 replicates");
    }
    if pair.is_degenerate() {
        return Ok(Estimate {
            mean: 0.0,
            std_error: 0.0,
            draws: replicates,
        });
    }
    let n = pair.dim();
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|k| vec![pair.x[k].min(pair.y[k]), pair.x[k].max(pair.y[k])])
        .collect();
    let sampler = Sampler::auto(model, &axes)?;
    let corners = corner_expansion(n)?;
    // corner c takes the upper node on axis k when bit k is set
    let offsets: Vec<(usize, f64)> = corners
        .iter()
        .map(|c| {
            let idx = (0..n).fold(0usize, |acc, k| 2 * acc + usize::from(c.takes_y(k)));
            (idx, f64::from(c.sign))
        })
        .collect();
    let squares: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let v = sampler.sample_values(seed, r);
            let inc: f64 = offsets.iter().map(|&(i, s)| s * v[i]).sum();
            inc * inc
        })
        .collect();
    let (mean, std_error) = mean_and_se(&squares);
    Ok(Estimate {
        mean,
        std_error,
        draws: replicates,
    })
}

/// The bound on E e^{N²/4} printed with the moment computation; it is below
/// the true unit-variance value √2.
pub const PRINTED_EXP_MOMENT_BOUND: f64 = 15.0 / 14.0;

/// Monte Carlo estimate of E e^{N²/4} against the closed form.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExpMomentReport {
    pub variance: f64,
    pub estimate: Estimate,
    /// (1 − σ²/2)^{−1/2}.
    pub closed_form: f64,
    pub relative_error: f64,
    pub printed_bound: f64,
    pub exceeds_printed_bound: bool,
}

/// Estimates E e^{N²/4} for N ~ N(0, σ²) from `draws` samples.
pub fn exp_moment_check(variance: f64, draws: u64, seed: u64) -> Result<ExpMomentReport> {
    if !(variance >= 0.0) {
        return parameter(format!("variance must be non-negative, got {variance}"));
    }
    if variance >= 2.0 {
        return Err(Error::Divergent(format!("E e^{{N²/4}} is infinite for variance {variance} ≥ 2")));
    }
    if draws < 2 {
        return parameter("need at least two draws");
    }
    let sd = variance.sqrt();
    let mut rng = replicate_rng(seed, MOMENT_STREAM);
    let values: Vec<f64> = (0..draws)
        .map(|_| {
            let z = standard_normals(&mut rng, 1)[0] * sd;
            (z * z / 4.0).exp()
        })
        .collect();
    let (mean, std_error) = mean_and_se(&values);
    let closed_form = (1.0 - variance / 2.0).powf(-0.5);
    Ok(ExpMomentReport {
        variance,
        estimate: Estimate {
            mean,
            std_error,
            draws,
        },
        closed_form,
        relative_error: (mean - closed_form).abs() / closed_form,
        printed_bound: PRINTED_EXP_MOMENT_BOUND,
        exceeds_printed_bound: mean > PRINTED_EXP_MOMENT_BOUND,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(x: &[f64], y: &[f64]) -> PointPair {
        PointPair::new(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn fbm_increment_variance_reference() {
        let m = CovarianceModel::fbm(vec![0.5, 0.5]).unwrap();
        let v = increment_variance(&m, &pair(&[0.0, 0.0], &[1.0, 1.0])).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let m = CovarianceModel::fbm(vec![0.3, 0.7]).unwrap();
        let p = pair(&[0.1, 0.7], &[0.6, 0.45]);
        let want = 0.5f64.powf(0.6) * 0.25f64.powf(1.4);
        assert!((increment_variance_product(&m, &p).unwrap() - want).abs() < 1e-14);
        assert!((increment_variance_generic(&m, &p).unwrap() - want).abs() < 1e-14);
        assert!((want - 0.094_731).abs() < 2e-6);
        assert_eq!(increment_variance(&m, &pair(&[0.1, 0.2], &[0.1, 0.9])).unwrap(), 0.0);
    }

    #[test]
    fn heat_generic_path_matches_closed_form() {
        let v = increment_variance(&CovarianceModel::Heat, &pair(&[0.2, 0.1], &[0.9, 0.6])).unwrap();
        let want = crate::heat::heat_sq_increment(0.2, 0.9, 0.1, 0.6);
        assert!((v - want).abs() < 1e-12);
    }

    #[test]
    fn empirical_modulus_of_brownian_motion() {
        let m = CovarianceModel::fbm(vec![0.5]).unwrap();
        let axes = GridField::uniform_axes(&[17]);
        let e = build_empirical_modulus(&m, &axes).unwrap();
        for i in 0..=16 {
            let u = i as f64 / 16.0;
            assert!((e.moduli[0].eval(u) - u.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_modulus_factorizes_for_fbm() {
        let m = CovarianceModel::fbm(vec![0.3, 0.7]).unwrap();
        let axes = GridField::uniform_axes(&[9, 9]);
        let e = build_empirical_modulus(&m, &axes).unwrap();
        for i in 0..=8 {
            let u = i as f64 / 8.0;
            assert!((e.moduli[0].eval(u) - u.powf(0.3)).abs() < 1e-12);
            assert!((e.moduli[1].eval(u) - u.powf(0.7)).abs() < 1e-12);
        }
        assert!(dominance_ratio(&m, &axes, &e.moduli).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn samples_vanish_on_axes_and_repeat() {
        let m = CovarianceModel::fbm(vec![0.3, 0.7]).unwrap();
        let axes = GridField::uniform_axes(&[5, 5]);
        let s = Sampler::auto(&m, &axes).unwrap();
        let a = s.sample(42, 0);
        assert_eq!(a.values(), s.sample(42, 0).values());
        assert_ne!(a.values(), s.sample(42, 1).values());
        for i in 0..5 {
            assert_eq!(a.value_at(&[0, i]), 0.0);
            assert_eq!(a.value_at(&[i, 0]), 0.0);
        }
    }

    #[test]
    fn kronecker_and_dense_agree_bitwise() {
        let m = CovarianceModel::fbm(vec![0.3, 0.7]).unwrap();
        let axes = GridField::uniform_axes(&[6, 7]);
        let k = Sampler::new(&m, &axes, SamplingPath::Kronecker).unwrap();
        let d = Sampler::new(&m, &axes, SamplingPath::Dense).unwrap();
        let f = Sampler::new(&m, &axes, SamplingPath::FullCholesky).unwrap();
        for r in 0..5 {
            let a = k.sample_values(7, r);
            let b = d.sample_values(7, r);
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
            let c = f.sample_values(7, r);
            assert!(a.iter().zip(&c).all(|(x, y)| (x - y).abs() < 1e-8));
        }
    }

    #[test]
    fn heat_sampler_uses_full_path() {
        let axes = GridField::uniform_axes(&[5, 5]);
        let s = Sampler::auto(&CovarianceModel::Heat, &axes).unwrap();
        assert_eq!(s.path(), SamplingPath::FullCholesky);
        let g = s.sample(1, 0);
        assert!((0..5).all(|i| g.value_at(&[0, i]) == 0.0));
        assert!(Sampler::new(&CovarianceModel::Heat, &axes, SamplingPath::Kronecker).is_err());
    }

    #[test]
    fn degenerate_moment_is_exactly_zero() {
        let m = CovarianceModel::fbm(vec![0.5, 0.5]).unwrap();
        let e = increment_moment_mc(&m, &pair(&[0.2, 0.3], &[0.2, 0.9]), 100, 1).unwrap();
        assert_eq!((e.mean, e.std_error), (0.0, 0.0));
    }

    #[test]
    fn exp_moment_edges() {
        let r = exp_moment_check(0.0, 1000, 3).unwrap();
        assert_eq!(r.estimate.mean, 1.0);
        assert!(matches!(exp_moment_check(2.5, 1000, 3), Err(Error::Divergent(_))));
    }
}
