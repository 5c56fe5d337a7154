use std::path::Path;
use std::process::{Command, Output};

use grr_core::cli::{parse_args, RunConfig};
use proptest::prelude::*;

fn grr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grr")).args(args).output().unwrap()
}

fn last_line(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stdout);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn heat_covariance_at_a_point() {
    let o = grr(&["cov", "--model", "heat", "--eval", "1,0,1,0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().next().unwrap(), "0.564190");
    let status = last_line(&o);
    assert_eq!(status["subcommand"], "cov");
    assert_eq!(status["status"], "pass");
    assert!(status["elapsed_ms"].is_u64());
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["holder", "--hurst", "0.5,0.5", "--grids", "17x17", "--delta", "1.5"],
        vec!["holder", "--hurst", "0.5,0.5", "--grids", "17x17", "--replicates", "0"],
        vec!["simulate", "--model", "fbm", "--hurst", "0", "--grid", "9x9", "--out", "x"],
        vec!["cov", "--model", "fbm", "--hurst", "0.5", "--eval", "1,2,3"],
        vec!["verify-grr", "--function", "quad", "--psi", "pow:4", "--p", "pow:1", "--grid", "5x5"],
    ] {
        let o = grr(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_eq!(last_line(&o)["status"], "usage");
    }
}

#[test]
fn verify_grr_on_prod_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = grr(&[
        "verify-grr", "--function", "prod", "--psi", "pow:4", "--p", "pow:1", "--grid", "9x9",
        "--report", report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["schema"], "grr-report/1");
    assert_eq!(r["pass"], true);
    assert_eq!(r["b"].as_f64(), Some(1.0));
    // estimated B on a smooth function with random pairs
    let o = grr(&[
        "verify-grr", "--function", "sinprod", "--psi", "pow:4", "--p", "pow:1", "--grid", "9x9", "--b", "estimated",
        "--pairs", "50",
    ]);
    assert_eq!(o.status.code(), Some(0));
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = grr(&[
            "simulate", "--model", "fbm", "--hurst", "0.3,0.7", "--grid", "9x9", "--seed", "42", "--replicates", "2",
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let (fa, fb) = (read_dir_bytes(&a), read_dir_bytes(&b));
    assert_eq!(fa.len(), 4);
    assert_eq!(fa, fb);
}

#[test]
fn holder_reports_are_byte_identical_and_config_files_work() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let report = dir.path().join(format!("{name}.json"));
        let csv = dir.path().join(format!("{name}.csv"));
        let o = grr(&[
            "holder", "--hurst", "0.5,0.5", "--grids", "9x9,17x17", "--replicates", "4", "--seed", "3", "--delta",
            "0.25", "--report", report.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        (std::fs::read(report).unwrap(), std::fs::read_to_string(csv).unwrap())
    };
    let (r1, c1) = run("one");
    let (r2, _) = run("two");
    assert_eq!(r1, r2);
    assert_eq!(c1.lines().count(), 9);
    assert!(c1.starts_with("grid,replicate,B,sup_ratio,pass"));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"subcommand": "heat-holder", "t_grid": [9], "x_grid": [9], "alpha": 0.125, "delta": 0.25,
            "replicates": 2, "seed": 5}"#,
    )
    .unwrap();
    let o = grr(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(last_line(&o)["subcommand"], "heat-holder");
    std::fs::write(&cfg, r#"{"subcommand": "holder", "grids": ["9x9"], "delta": 2.0}"#).unwrap();
    assert_eq!(grr(&["--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn io_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let out = blocker.join("sub");
    let o = grr(&["simulate", "--model", "fbm", "--hurst", "0.5", "--grid", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arguments_round_trip(
        h in prop::collection::vec(0.01..=1.0f64, 1..=3),
        m in 2usize..40,
        seed in any::<u64>(),
        reps in 1u64..100,
        delta in 0.01..0.99f64,
    ) {
        let hurst = h.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        let grid = vec![m.to_string(); h.len()].join("x");
        let seed = seed.to_string();
        let reps = reps.to_string();
        let delta = delta.to_string();
        let argv = [
            "grr", "holder", "--hurst", &hurst, "--grids", &grid, "--seed", &seed, "--replicates", &reps,
            "--delta", &delta, "--form", "sigmaH",
        ];
        let cfg = parse_args(argv).unwrap();
        let again = parse_args(std::iter::once("grr".to_string()).chain(cfg.to_args())).unwrap();
        prop_assert_eq!(&again, &cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        prop_assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), cfg);
    }
}

