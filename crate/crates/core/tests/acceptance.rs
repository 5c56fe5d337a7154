//! Acceptance run: one line per criterion, non-zero exit if any fails.
//!
//! Oracles here are computed independently of the library (adaptive Simpson
//! on smooth substitutions, closed forms worked out by hand).

use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

use grr_core::bounds::{build_grr_chain, grr_rhs, verify_grr_on_grid, BSource};
use grr_core::experiments::{grr_certificate_grid, refinement_sweep, CertificateKernel, ExperimentSpec};
use grr_core::gaussian::{
    exp_moment_check, increment_moment_mc, increment_variance_generic, increment_variance_product,
    CovarianceModel, Sampler, SamplingPath,
};
use grr_core::heat::{
    heat_cov, heat_sq_increment, heat_sq_increment_from_cov, lemma51_brackets, rho, HeatPoint, RHO_INFINITY,
};
use grr_core::{GridField, LogModulatedModulus, ModulusFunction, PointPair, YoungFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// ½∫_{|t−s|}^{s+t} p_w(x − y) dw with w = v².
fn brute_cov(s: f64, x: f64, t: f64, y: f64) -> f64 {
    if s.min(t) <= 0.0 {
        return 0.0;
    }
    let z2 = (x - y) * (x - y);
    let f = |v: f64| if v == 0.0 { 0.0 } else { (-z2 / (2.0 * v * v)).exp() };
    0.5 * (2.0 / PI).sqrt() * simpson(&f, (t - s).abs().sqrt(), (s + t).sqrt(), 1e-15)
}

/// ∫₀^T [p_r(0) − p_r(Δ)] dr with r = v².
fn brute_gap(t: f64, delta: f64) -> f64 {
    let d2 = delta * delta;
    let f = |v: f64| if v == 0.0 { 1.0 } else { -(-d2 / (2.0 * v * v)).exp_m1() };
    (2.0 / PI).sqrt() * simpson(&f, 0.0, t.sqrt(), 1e-15)
}

fn erfc_quad(z: f64) -> f64 {
    2.0 / PI.sqrt() * simpson(&|s: f64| (-s * s).exp(), z, z + 12.0, 1e-16)
}

/// ρ(u) = √(2/π)[2√π erfc(1/√u) + 2√u(1 − e^{−1/u})], by parts.
fn rho_closed(u: f64) -> f64 {
    (2.0 / PI).sqrt() * (2.0 * PI.sqrt() * erfc_quad(1.0 / u.sqrt()) + 2.0 * u.sqrt() * -(-1.0 / u).exp_m1())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let psi = YoungFunction::Power(4.0);
    let mut pass = true;
    let mut notes = Vec::new();
    // RHS = 8ⁿ∏∫₀^δ (4ⁿ/u²)^{1/4} du = 8ⁿ·2^{n/2}·∏2√δ
    let rhs1 = grr_rhs(&psi, &[ModulusFunction::Power(1.0)], 1.0, &[1.0]).unwrap();
    let rhs2 = grr_rhs(&psi, &vec![ModulusFunction::Power(1.0); 2], 1.0, &[1.0, 1.0]).unwrap();
    let ok_ref = (rhs1 - 16.0 * SQRT_2).abs() < 1e-12 * rhs1 && (rhs2 - 512.0).abs() < 1e-12 * rhs2;
    pass &= ok_ref;
    notes.push(format!("RHS(1)={rhs1:.12} RHS(1,1)={rhs2:.9}"));
    for n in 1..=3usize {
        let grid = GridField::from_fn(GridField::uniform_axes(&vec![17; n]), |p| p.iter().product()).unwrap();
        let moduli = vec![ModulusFunction::Power(1.0); n];
        let (_, s) = verify_grr_on_grid(&grid, psi, &moduli, 0.0, BSource::ClosedForm(1.0)).unwrap();
        pass &= s.pass && s.failed == 0 && s.vacuous == 0;
        notes.push(format!("n={n}: {} boxes, {} failed, max ratio {:.3e}", s.pairs, s.failed, s.max_ratio));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    notes.push(format!("{secs:.1}s"));
    Outcome {
        pass,
        detail: notes.join("; "),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for n in [2usize, 3] {
        for _ in 0..1000 {
            let h: Vec<f64> = (0..n).map(|_| r.random_range(0.05..=1.0)).collect();
            let model = CovarianceModel::fbm(h).unwrap();
            let x: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
            let y: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
            let pair = PointPair::new(x, y).unwrap();
            let a = increment_variance_product(&model, &pair).unwrap();
            let b = increment_variance_generic(&model, &pair).unwrap();
            worst = worst.max((a - b).abs());
        }
    }
    let mut pass = worst <= 1e-12;
    let model = CovarianceModel::fbm(vec![0.3, 0.7]).unwrap();
    let mut worst_z: f64 = 0.0;
    for i in 0..10 {
        let x: Vec<f64> = (0..2).map(|_| r.random_range(0.0..0.7)).collect();
        let y: Vec<f64> = x.iter().map(|&v| v + r.random_range(0.05..0.3)).collect();
        let want = (y[0] - x[0]).powf(0.6) * (y[1] - x[1]).powf(1.4);
        let pair = PointPair::new(x, y).unwrap();
        let e = increment_moment_mc(&model, &pair, 100_000, 100 + i).unwrap();
        worst_z = worst_z.max((e.mean - want).abs() / e.std_error);
    }
    pass &= worst_z <= 4.0;
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 300.0;
    Outcome {
        pass,
        detail: format!("max |product − generic| = {worst:.2e}; MC worst |z| = {worst_z:.2} (limit 4); {secs:.1}s"),
    }
}

fn criterion_3() -> Outcome {
    let model = CovarianceModel::fbm(vec![0.3, 0.7]).unwrap();
    let axes = GridField::uniform_axes(&[9, 9]);
    let kron = Sampler::new(&model, &axes, SamplingPath::Kronecker).unwrap();
    let dense = Sampler::new(&model, &axes, SamplingPath::Dense).unwrap();
    let full = Sampler::new(&model, &axes, SamplingPath::FullCholesky).unwrap();
    let nodes: Vec<Vec<f64>> = {
        let g = GridField::from_fn(axes.clone(), |_| 0.0).unwrap();
        (0..g.len()).map(|i| g.node(&g.multi_index(i))).collect()
    };
    let m = nodes.len();
    let reps = 20_000u64;
    let mut sum = vec![0.0; m * m];
    for r in 0..reps {
        let v = kron.sample_values(7, r);
        for i in 0..m {
            for j in i..m {
                sum[i * m + j] += v[i] * v[j];
            }
        }
    }
    let mut worst_z: f64 = 0.0;
    for i in 0..m {
        for j in i..m {
            let qii = model.cov(&nodes[i], &nodes[i]);
            let qjj = model.cov(&nodes[j], &nodes[j]);
            let qij = model.cov(&nodes[i], &nodes[j]);
            let est = sum[i * m + j] / reps as f64;
            // Var(X_i X_j) = Q_ii Q_jj + Q_ij² for a centred Gaussian pair
            let se = ((qii * qjj + qij * qij) / reps as f64).sqrt();
            let dev = (est - qij).abs();
            if se == 0.0 {
                if dev > 0.0 {
                    worst_z = f64::INFINITY;
                }
            } else {
                worst_z = worst_z.max(dev / se);
            }
        }
    }
    let mut identical = true;
    let mut full_gap: f64 = 0.0;
    for r in 0..500 {
        let a = kron.sample_values(11, r);
        let b = dense.sample_values(11, r);
        identical &= a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
        let c = full.sample_values(11, r);
        full_gap = full_gap.max(a.iter().zip(&c).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    Outcome {
        pass: worst_z <= 5.0 && identical,
        detail: format!(
            "{} entries, worst |z| = {worst_z:.2} (limit 5); kronecker vs dense bit-identical: {identical}; \
             full Cholesky max gap {full_gap:.1e}",
            m * (m + 1) / 2
        ),
    }
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (s, t) = (r.random_range(0.01..2.0), r.random_range(0.01..2.0));
        let (x, y) = (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        let want = brute_cov(s, x, t, y);
        let got = heat_cov(HeatPoint::new(s, x), HeatPoint::new(t, y));
        worst = worst.max((got - want).abs() / want.abs());
    }
    let var = heat_cov(HeatPoint::new(1.0, 0.3), HeatPoint::new(1.0, 0.3));
    let var_err = (var - (1.0 / PI).sqrt()).abs();
    Outcome {
        pass: worst <= 1e-10 && var_err <= 1e-10,
        detail: format!("worst relative error {worst:.2e}; Var u(1,x) = {var:.9} (err {var_err:.1e})"),
    }
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (s, t) = (r.random_range(0.0..2.0), r.random_range(0.0..2.0));
        let (x, y) = (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        worst = worst.max((heat_sq_increment(s, t, x, y) - heat_sq_increment_from_cov(s, t, x, y)).abs());
    }
    let v = heat_sq_increment(0.0, 1.0, 1.0, 0.0);
    // with s = 0 only the t-slice survives: 2(Var u(1,·) − cov at distance 1)
    let oracle = 2.0 * (brute_cov(1.0, 0.0, 1.0, 0.0) - brute_cov(1.0, 1.0, 1.0, 0.0));
    let pass = worst <= 1e-10 && (v - 0.729096).abs() <= 1e-6 && (v - oracle).abs() <= 1e-10;
    Outcome {
        pass,
        detail: format!("max |three-integral − four-corner| = {worst:.2e}; value(0,1,1) = {v:.9} (oracle {oracle:.9})"),
    }
}

fn criterion_6() -> Outcome {
    let mut r = rng(6);
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    for _ in 0..1000 {
        let (s, t) = (r.random_range(0.0..2.0), r.random_range(0.0..2.0));
        let delta = r.random_range(0.001..3.0);
        let v = heat_sq_increment(s, t, delta, 0.0);
        let bound = 2.0 * brute_gap((s - t).abs(), delta);
        if v > bound * (1.0 + 1e-10) + 1e-15 {
            violations += 1;
        }
        max_ratio = max_ratio.max(v / bound);
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations in 1000; max value/bound = {max_ratio:.6}"),
    }
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let mut bad_brackets = 0;
    let mut bad_j = 0;
    for _ in 0..1000 {
        let a = r.random_range(0.01..5.0);
        let b = a + r.random_range(0.01..5.0);
        let d = r.random_range(0.01..5.0);
        let l = lemma51_brackets(a, b, d).unwrap();
        bad_brackets += usize::from(!l.brackets_hold(1e-9));
        bad_j += usize::from(!l.j_matches(1e-9));
    }
    let l = lemma51_brackets(1.0, 4.0, 1.0).unwrap();
    // lower = 2(√b − √a)(1 − e^{−δ²/2b}), upper = 2(√b − √a)(1 − e^{−δ²/2a})
    let lower = 2.0 * (1.0 - (-0.125f64).exp());
    let upper = 2.0 * (1.0 - (-0.5f64).exp());
    let refs = (l.lower - 0.235007).abs() <= 1e-6
        && (l.upper - 0.786939).abs() <= 1e-6
        && (l.lower - lower).abs() < 1e-15
        && (l.upper - upper).abs() < 1e-15;
    Outcome {
        pass: bad_brackets == 0 && bad_j == 0 && refs,
        detail: format!(
            "bracket failures {bad_brackets}, J mismatches {bad_j}; (1,4,1): lower {:.7}, I {:.7}, upper {:.7}",
            l.lower, l.i_quadrature, l.upper
        ),
    }
}

fn criterion_8() -> Outcome {
    let at_inf = rho(f64::INFINITY);
    let ok_inf = (at_inf - 2.0 * SQRT_2).abs() <= 1e-6 && (RHO_INFINITY - 2.0 * SQRT_2).abs() < 1e-15;
    let u = 1e-6;
    let small = rho(u) / (2.0 * (2.0 / PI).sqrt() * u.sqrt());
    let mut closed_gap: f64 = 0.0;
    for u in [1e-3, 0.1, 0.5, 1.0, 2.0, 10.0, 1e3] {
        closed_gap = closed_gap.max((rho(u) - rho_closed(u)).abs());
    }
    let mut r = rng(8);
    let mut violations = 0;
    for _ in 0..1000 {
        let (s, t) = (r.random_range(0.0..2.0), r.random_range(0.0..2.0));
        let delta = r.random_range(0.001..3.0);
        let v = heat_sq_increment(s, t, delta, 0.0);
        let bound = delta * rho((s - t).abs() / (delta * delta));
        if v > bound * (1.0 + 1e-10) + 1e-15 {
            violations += 1;
        }
    }
    Outcome {
        pass: ok_inf && (small - 1.0).abs() <= 0.01 && closed_gap < 1e-9 && violations == 0,
        detail: format!(
            "ρ(∞) = {at_inf:.9}; small-u ratio {small:.6}; max |ρ − closed form| = {closed_gap:.1e}; \
             {violations} bound violations"
        ),
    }
}

fn criterion_9() -> Outcome {
    let r = exp_moment_check(1.0, 1_000_000, 9).unwrap();
    let err = (r.estimate.mean - SQRT_2).abs() / SQRT_2;
    Outcome {
        pass: err <= 0.01 && (r.closed_form - SQRT_2).abs() < 1e-15 && r.exceeds_printed_bound,
        detail: format!(
            "estimate {:.6} (rel err {err:.2e}); exceeds the printed 15/14 = {:.6}: {}",
            r.estimate.mean, r.printed_bound, r.exceeds_printed_bound
        ),
    }
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let model = CovarianceModel::fbm(vec![0.3, 0.7]).unwrap();
    let axes = GridField::uniform_axes(&[33, 33]);
    let moduli = vec![ModulusFunction::Power(0.25), ModulusFunction::Power(0.65)];
    let sampler = Sampler::auto(&model, &axes).unwrap();
    let kernel = CertificateKernel::for_grid(&moduli, &axes).unwrap();
    let (mut finite, mut passed, mut vacuous) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for r in 0..50 {
        let field = sampler.sample(42, r);
        let rep = grr_certificate_grid(&field, &YoungFunction::ExpQuarterSquare, &kernel, 0.05).unwrap();
        if rep.vacuous {
            vacuous += 1;
            continue;
        }
        finite += 1;
        passed += usize::from(rep.pass);
        worst = worst.max(rep.summary.max_ratio);
    }
    Outcome {
        pass: passed == finite,
        detail: format!(
            "{passed}/{finite} finite-B paths pass, {vacuous} vacuous; worst lhs/bound {worst:.3e}; {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    }
}

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let spec = ExperimentSpec {
        model: CovarianceModel::fbm(vec![0.5, 0.5]).unwrap(),
        modulus: LogModulatedModulus::hurst_h(&[0.5, 0.5]).unwrap(),
        delta_max: 0.25,
        replicates: 50,
        seed: 42,
        slack: 0.05,
        certificate: None,
    };
    let r = refinement_sweep(&spec, &[vec![17, 17], vec![33, 33], vec![65, 65]]).unwrap();
    let medians: Vec<String> = r.grids.iter().map(|g| format!("{:.4}", g.median)).collect();
    let within = r.refinement.growth.iter().all(|g| (1.0 / 1.5..=1.5).contains(g));
    let finite = r.grids.iter().all(|g| g.all_finite);
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: within && finite && !r.refinement.unstable && secs < 600.0,
        detail: format!(
            "medians [{}], growth {:?}, all finite {finite}; {secs:.1}s",
            medians.join(", "),
            r.refinement.growth.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>()
        ),
    }
}

fn criterion_12() -> Outcome {
    let chain = build_grr_chain(|_, t| t, &[1.0], &YoungFunction::Power(2.0), &ModulusFunction::Power(1.0), 1.0, 16)
        .unwrap();
    // p = id: d_{k−1} = p⁻¹(p(t_{k−1})/2) = t_{k−1}/2 exactly
    let halves = chain.steps.iter().enumerate().all(|(k, s)| s.d == chain.t_seq[k] / 2.0 && s.t <= s.d);
    let bound = chain.satisfies_bound();
    Outcome {
        pass: halves && bound && !chain.steps.is_empty(),
        detail: format!("{} steps; d = t/2 exactly: {halves}; step bound holds: {bound}", chain.steps.len()),
    }
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("GRR inequality, closed-form regime", criterion_1),
        ("increment variance, product vs corner paths and MC", criterion_2),
        ("sampler exactness", criterion_3),
        ("heat covariance", criterion_4),
        ("heat increment identity", criterion_5),
        ("heat increment sign bound", criterion_6),
        ("integral brackets and J identity", criterion_7),
        ("ρ endpoints and bound", criterion_8),
        ("exponential moment", criterion_9),
        ("per-path certificate", criterion_10),
        ("refinement stability", criterion_11),
        ("GRR chain", criterion_12),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if filter.is_some_and(|k| k != i + 1) {
            continue;
        }
        let o = f();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:2} {} {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
