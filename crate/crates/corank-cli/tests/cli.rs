//! End-to-end tests of the `corank` binary: artifact round-trips, exit
//! codes, and embedded metadata.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corank"))
}

fn write_gaussian_csv(path: &Path, n: usize, seed: u64) {
    use corank::density::ReferenceDensity;
    use corank::rng::seeded_rng;
    let f0 = ReferenceDensity::gaussian(2);
    let mut rng = seeded_rng(seed, 0);
    let mut out = String::from("x,y\n");
    for z in f0.sample(&mut rng, n) {
        out.push_str(&format!("{},{}\n", z[0], z[1]));
    }
    fs::write(path, out).unwrap();
}

#[test]
fn ranks_then_stat_matches_in_process_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("data.csv");
    write_gaussian_csv(&data_path, 60, 42);

    let ranks_path = dir.path().join("ranks.csv");
    let status = bin()
        .args(["ranks", "--input"])
        .arg(&data_path)
        .args(["--nr", "6", "--ns", "10", "--seed", "7", "--output"])
        .arg(&ranks_path)
        .status()
        .unwrap();
    assert!(status.success());

    let stat_path = dir.path().join("stat.json");
    let status = bin()
        .args(["stat", "--input"])
        .arg(&ranks_path)
        .args(["--score", "wilcoxon", "--seed", "7", "--output"])
        .arg(&stat_path)
        .status()
        .unwrap();
    assert!(status.success());

    // In-process pipeline on the same inputs.
    let data = corank::serialize::read_data_csv(fs::File::open(&data_path).unwrap()).unwrap();
    let grid = corank::make_grid(
        corank::factorize(60, 2, corank::FactorizePolicy::Explicit { n_r: 6, n_s: 10 }, 7)
            .unwrap(),
    )
    .unwrap();
    let rs = corank::ranks_and_signs(&corank::empirical_codf(&data, &grid).unwrap(), 7).unwrap();
    let score = corank::catalog_score("wilcoxon", 2).unwrap();
    let constants: Vec<f64> = (0..60).map(|i| if i < 30 { 1.0 } else { 0.0 }).collect();
    let want = corank::approximate_score_statistic(&constants, &score, &rs).unwrap();

    let emitted: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&stat_path).unwrap()).unwrap();
    let got: Vec<f64> = emitted["stat"]["value"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(got, want.value, "CSV round-trip must be bit-exact");

    // Every artifact carries version, config, and seed.
    let sidecar: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("ranks.csv.meta.json")).unwrap(),
    )
    .unwrap();
    assert!(sidecar["tool_version"].is_string());
    assert_eq!(sidecar["seed"], 7);
    assert!(sidecar["config"]["grid"]["n_r"].as_u64() == Some(6));
}

#[test]
fn rank_multiset_invariant_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("data.csv");
    write_gaussian_csv(&data_path, 60, 11);
    let ranks_path = dir.path().join("ranks.csv");
    assert!(bin()
        .args(["ranks", "--input"])
        .arg(&data_path)
        .args(["--nr", "6", "--ns", "10", "--seed", "3", "--output"])
        .arg(&ranks_path)
        .status()
        .unwrap()
        .success());
    let rs = corank::serialize::read_ranks_csv(fs::File::open(&ranks_path).unwrap()).unwrap();
    assert_eq!(rs.len(), 60);
    let mut counts = [0usize; 7];
    for r in &rs {
        counts[r.rank] += 1;
    }
    assert_eq!(counts, [0, 10, 10, 10, 10, 10, 10]);
}

#[test]
fn regression_model_residuals_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("data.csv");
    // Observations x_i = theta^T c_i + z_i with scalar covariate c_i = i and
    // theta = (([0.5], [-0.25])) so residuals are recovered exactly.
    use corank::density::ReferenceDensity;
    use corank::rng::seeded_rng;
    let f0 = ReferenceDensity::gaussian(2);
    let mut rng = seeded_rng(3, 0);
    let resid = f0.sample(&mut rng, 12);
    let mut data = String::new();
    let mut cov = String::new();
    for (i, z) in resid.iter().enumerate() {
        let c = i as f64 / 12.0;
        data.push_str(&format!("{},{}\n", z[0] + 0.5 * c, z[1] - 0.25 * c));
        cov.push_str(&format!("{c}\n"));
    }
    fs::write(&data_path, &data).unwrap();
    let cov_path = dir.path().join("cov.csv");
    fs::write(&cov_path, &cov).unwrap();

    let out = dir.path().join("ranks.csv");
    assert!(bin()
        .args(["ranks", "--model", "linear_regression", "--input"])
        .arg(&data_path)
        .args(["--covariates"])
        .arg(&cov_path)
        .args(["--theta", "0.5,-0.25", "--nr", "3", "--ns", "4", "--seed", "2", "--output"])
        .arg(&out)
        .status()
        .unwrap()
        .success());

    // Same residuals through the library give identical ranks.
    let grid = corank::make_grid(
        corank::factorize(12, 2, corank::FactorizePolicy::Explicit { n_r: 3, n_s: 4 }, 2)
            .unwrap(),
    )
    .unwrap();
    let want =
        corank::ranks_and_signs(&corank::empirical_codf(&resid, &grid).unwrap(), 2).unwrap();
    let got = corank::serialize::read_ranks_csv(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(want, got);

    // linear_regression without covariates is a usage error.
    let status = bin()
        .args(["ranks", "--model", "linear_regression", "--input"])
        .arg(&data_path)
        .args(["--output"])
        .arg(dir.path().join("r3.csv"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn overwrite_guard_and_bad_input_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("data.csv");
    write_gaussian_csv(&data_path, 12, 1);
    let out = dir.path().join("ranks.csv");
    assert!(bin()
        .args(["ranks", "--input"])
        .arg(&data_path)
        .args(["--nr", "3", "--ns", "4", "--output"])
        .arg(&out)
        .status()
        .unwrap()
        .success());
    // Second run without --force refuses to clobber.
    let status = bin()
        .args(["ranks", "--input"])
        .arg(&data_path)
        .args(["--nr", "3", "--ns", "4", "--output"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // --force allows it.
    assert!(bin()
        .args(["ranks", "--input"])
        .arg(&data_path)
        .args(["--nr", "3", "--ns", "4", "--output"])
        .arg(&out)
        .arg("--force")
        .status()
        .unwrap()
        .success());

    // Malformed CSV names the offending row.
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x,y\n0.1,nope\n").unwrap();
    let output = bin()
        .args(["ranks", "--input"])
        .arg(&bad)
        .args(["--output"])
        .arg(dir.path().join("r2.csv"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("row 2"));
}

#[test]
fn verify_exit_codes_and_diagnostic_mode() {
    let dir = tempfile::tempdir().unwrap();
    // A deliberately failing config: repeated n cannot be strictly
    // decreasing.
    let cfg = dir.path().join("gc.json");
    fs::write(&cfg, r#"{"n_list": [100, 100], "replicates": 3, "seed": 5}"#).unwrap();
    let status = bin()
        .args(["verify", "gc", "--config"])
        .arg(&cfg)
        .args(["--output"])
        .arg(dir.path().join("gc.json.out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let status = bin()
        .args(["verify", "gc", "--config"])
        .arg(&cfg)
        .arg("--diagnostic")
        .args(["--output"])
        .arg(dir.path().join("gc2.json.out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // A passing check exits 0 and embeds its seed.
    let out = dir.path().join("basu.json");
    let status = bin()
        .args(["verify", "basu", "--reps", "1500", "--seed", "9", "--output"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["report"]["seed"], 9);
    assert_eq!(report["report"]["pass"], true);
}

#[test]
fn simulate_emits_paths_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let paths = dir.path().join("paths.csv");
    let summary = dir.path().join("summary.json");
    assert!(bin()
        .args(["simulate", "--paths", "500", "--seed", "4", "--output"])
        .arg(&paths)
        .args(["--summary"])
        .arg(&summary)
        .status()
        .unwrap()
        .success());
    let text = fs::read_to_string(&paths).unwrap();
    assert_eq!(text.lines().count(), 501, "header plus one row per path");
    assert!(text.lines().next().unwrap().contains("endpoint_0"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    let m = summary["mean_exp_loglik"][0].as_f64().unwrap();
    assert!((m - 1.0).abs() < 0.5, "mean exp loglik {m}");
    assert!(summary["endpoint_covariance"].is_array());
}
