use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bmidas_cli::output::read_table_binary;

fn bmidas(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmidas"))
        .args(args)
        .current_dir(cwd)
        .env_remove("BMIDAS_OUT")
        .output()
        .expect("spawn bmidas")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = bmidas(args, cwd);
    assert!(
        out.status.success(),
        "bmidas {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn column(csv_text: &str, name: &str) -> Vec<String> {
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

/// Simulated illustration dataset in `dir/sim`.
fn illustration(dir: &Path) -> (PathBuf, PathBuf) {
    ok(&["simulate", "--illustration", "--seed", "5", "--out", "sim"], dir);
    (dir.join("sim/low_freq.csv"), dir.join("sim/high_freq.csv"))
}

const FAST: [&str; 6] = ["-S", "6000", "--burn-in", "2000", "--thin", "4"];

#[test]
fn simulate_writes_dataset_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["simulate", "--dgp", "1", "--K", "30", "--sigma-eps", "0.5", "--out", "sim"], dir.path());
    assert!(stdout.contains("200 periods"));
    let sim = dir.path().join("sim");
    for f in ["low_freq.csv", "high_freq.csv", "truth.csv", "weights.csv", "dataset.toml", "manifest.toml"] {
        assert!(sim.join(f).exists(), "{f}");
    }
    assert_eq!(read(sim.join("low_freq.csv")).lines().count(), 1 + 201);
    // head of C - m = 21 months plus 201 quarters.
    assert_eq!(read(sim.join("high_freq.csv")).lines().count(), 1 + 21 + 3 * 201);
    let manifest = read(sim.join("manifest.toml"));
    assert!(manifest.contains("command = \"simulate\""));
    assert!(manifest.contains("sigma_eps = 0.5"));
    assert!(manifest.contains("lag_window = 24"));
}

#[test]
fn fit_selects_the_active_predictor() {
    let dir = tempfile::tempdir().unwrap();
    let (lo, hi) = illustration(dir.path());
    let stdout = ok(
        &["fit", "--model", "agl_ss", "-r", "0", "--low-freq", lo.to_str().unwrap(), "--high-freq", hi.to_str().unwrap(), "--out", "fit"],
        dir.path(),
    );
    assert!(stdout.contains("selected [x2]"), "{stdout}");
    let selection = read(dir.path().join("fit/selection.csv"));
    assert_eq!(column(&selection, "included"), ["0", "1", "0", "0"]);

    let draws = read(dir.path().join("fit/draws.csv"));
    let header = draws.lines().next().unwrap();
    assert!(header.starts_with("theta_g1_1,theta_g1_2,theta_g1_3,theta_g1_4,theta_g2_1"));
    assert!(header.ends_with("sigma2,lambda_1,lambda_2,lambda_3,lambda_4,pi0,gamma_1,gamma_2,gamma_3,gamma_4"));
    assert_eq!(draws.lines().count(), 1 + 1000);
    assert!(dir.path().join("fit/omega_trace.csv").exists());
}

#[test]
fn identical_config_gives_identical_draws() {
    let dir = tempfile::tempdir().unwrap();
    let (lo, hi) = illustration(dir.path());
    let (lo, hi) = (lo.to_str().unwrap(), hi.to_str().unwrap());
    for (out, seed) in [("a", "3"), ("b", "3"), ("c", "4")] {
        let mut args = vec!["fit", "--low-freq", lo, "--high-freq", hi, "-C", "12", "--seed", seed, "--out", out];
        args.extend(FAST);
        ok(&args, dir.path());
    }
    let a = std::fs::read(dir.path().join("a/draws.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/draws.csv")).unwrap();
    let c = std::fs::read(dir.path().join("c/draws.csv")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);

    // Replaying the manifest elsewhere reproduces the draws.
    ok(&["run", "--config", "a/manifest.toml", "--out", "replay"], dir.path());
    assert_eq!(std::fs::read(dir.path().join("replay/draws.csv")).unwrap(), a);
}

#[test]
fn binary_draws_match_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (lo, hi) = illustration(dir.path());
    let (lo, hi) = (lo.to_str().unwrap(), hi.to_str().unwrap());
    for (out, format) in [("csv", "csv"), ("bin", "binary")] {
        let mut args = vec!["fit", "--low-freq", lo, "--high-freq", hi, "-C", "12", "--model", "agl", "--draws-format", format, "--out", out];
        args.extend(FAST);
        ok(&args, dir.path());
    }
    let table = read_table_binary(&dir.path().join("bin/draws.bin")).unwrap();
    let text = read(dir.path().join("csv/draws.csv"));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), table.columns.join(","));
    assert!(!table.columns.iter().any(|c| c.starts_with("gamma")));
    for (line, row) in lines.zip(&table.rows) {
        let parsed: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(&parsed, row);
    }
}

#[test]
fn forecast_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--dgp", "1", "--K", "4", "--T", "60", "--holdout", "2", "--seed", "9", "--out", "sim"], dir.path());
    let sim = dir.path().join("sim");
    let lo = sim.join("low_freq.csv");
    let hi = sim.join("high_freq.csv");
    let (lo, hi) = (lo.to_str().unwrap(), hi.to_str().unwrap());
    for model in ["agl", "agl_ss"] {
        let mut args = vec!["forecast", "--model", model, "--low-freq", lo, "--high-freq", hi, "--first-origin", "50", "--out", model];
        args.extend(["-S", "3000", "--burn-in", "1000", "--thin", "4"]);
        let stdout = ok(&args, dir.path());
        assert!(stdout.contains("12 forecasts"), "{stdout}");
    }
    let forecasts = read(dir.path().join("agl/forecasts.csv"));
    assert_eq!(forecasts.lines().count(), 1 + 12);
    assert_eq!(column(&forecasts, "target")[0], "50");
    let predictive = read(dir.path().join("agl_ss/predictive_draws.csv"));
    assert!(predictive.lines().next().unwrap().ends_with("draw_500"));

    let stdout = ok(&["evaluate", "--run", "agl=agl", "--run", "agl_ss=agl_ss", "--benchmark", "agl", "--out", "eval"], dir.path());
    assert!(stdout.contains("agl_ss: n 12"), "{stdout}");
    let dmw = read(dir.path().join("eval/dmw.csv"));
    assert_eq!(dmw.lines().count(), 1 + 3);
    let relative = read(dir.path().join("eval/relative.csv"));
    assert_eq!(column(&relative, "rmsfe_ratio")[0].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn out_of_sample_targets_have_no_realization() {
    let dir = tempfile::tempdir().unwrap();
    let (lo, hi) = illustration(dir.path());
    // Drop the last 3 quarters of the response; the predictors run on.
    let text = read(&lo);
    let kept: Vec<&str> = text.lines().take(1 + 497).collect();
    let short = dir.path().join("short.csv");
    std::fs::write(&short, kept.join("\n") + "\n").unwrap();
    let mut args = vec![
        "forecast",
        "--model",
        "agl",
        "--low-freq",
        short.to_str().unwrap(),
        "--high-freq",
        hi.to_str().unwrap(),
        "-C",
        "12",
        "--first-origin",
        "495",
        "--out-of-sample",
        "--out",
        "fc",
    ];
    args.extend(["-S", "2000", "--burn-in", "500", "--thin", "5"]);
    ok(&args, dir.path());
    let forecasts = read(dir.path().join("fc/forecasts.csv"));
    let realized = column(&forecasts, "realized");
    assert_eq!(realized.len(), 2 + 3);
    assert!(realized[..2].iter().all(|r| !r.is_empty()));
    assert!(realized[2..].iter().all(|r| r.is_empty()));
    assert_eq!(column(&forecasts, "date").last().unwrap(), "2085-09-30");
}

#[test]
fn montecarlo_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        &["montecarlo", "--dgp", "1", "--K", "6", "--T", "80", "--R", "3", "--workers", "2", "-S", "2000", "--burn-in", "1000", "--thin", "5", "--out", "mc"],
        dir.path(),
    );
    assert!(stdout.contains("3 replications (0 failed)"), "{stdout}");
    let metrics = read(dir.path().join("mc/metrics.csv"));
    assert_eq!(metrics.lines().count(), 2);
    assert_eq!(column(&metrics, "design"), ["dgp1"]);
    assert_eq!(read(dir.path().join("mc/replications.csv")).lines().count(), 4);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "command = \"simulate\"\nseed = 11\nout_dir = \"from_config\"\n[simulate]\nn_predictors = 3\nt_obs = 30\n",
    )
    .unwrap();
    ok(&["run", "--config", "run.toml"], dir.path());
    let manifest = read(dir.path().join("from_config/manifest.toml"));
    assert!(manifest.contains("seed = 11"));
    assert!(manifest.contains("n_predictors = 3"));

    ok(&["simulate", "--config", "run.toml", "--K", "5", "--seed", "12", "--out", "flags"], dir.path());
    let manifest = read(dir.path().join("flags/manifest.toml"));
    assert!(manifest.contains("seed = 12"));
    assert!(manifest.contains("n_predictors = 5"));
    assert!(manifest.contains("t_obs = 30"));
}

#[test]
fn output_directory_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bmidas"))
        .args(["simulate", "--K", "3", "--T", "20"])
        .current_dir(dir.path())
        .env("BMIDAS_OUT", "env_out")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("env_out/low_freq.csv").exists());
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    // r = 3 exceeds the supported restrictions.
    let out = bmidas(&["simulate", "-r", "3", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("restriction"));

    let out = bmidas(&["fit", "--low-freq", "missing.csv", "--high-freq", "missing.csv", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(4));

    std::fs::write(dir.path().join("bad.toml"), "seed = \"many\"\n").unwrap();
    let out = bmidas(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let (lo, hi) = illustration(dir.path());
    let out = bmidas(&["fit", "--low-freq", lo.to_str().unwrap(), "--high-freq", hi.to_str().unwrap(), "-m", "4", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frequency mismatch"));
}
