use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use zerolab_cli::config::RunConfig;
use zerolab_cli::manifest::RunManifest;
use zerolab_cli::run::{run_config, RunOptions};

const HOLE_SMOKE: &str = r#"{
  "seed": 7,
  "experiments": [
    {
      "kind": "hole",
      "m": 1,
      "degrees": [4],
      "trials": 1000,
      "domain": { "kind": "euclidean_disk", "center": { "chart": 0, "coords": [[0.0, 0.0]] }, "radius": 0.5 }
    }
  ]
}"#;

fn zerolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zerolab"))
        .args(args)
        .env_remove("ZEROLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn csv_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn minimal_hole_run_writes_manifest_and_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hole.json", HOLE_SMOKE);
    let out = dir.path().join("out");
    let res = zerolab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest_path = out.join("manifest.json");
    assert_eq!(String::from_utf8_lossy(&res.stdout).trim(), manifest_path.display().to_string());

    let manifest = RunManifest::load(&manifest_path).unwrap();
    assert_eq!(manifest.master_seed, 7);
    assert_eq!(manifest.experiments.len(), 1);
    assert_eq!(manifest.config_hash.len(), 64);

    let report = zerolab(&["report", manifest_path.to_str().unwrap()]);
    assert!(report.status.success());
    let lines = csv_lines(&out.join("report.csv"));
    assert_eq!(lines[0], "experiment,N,p_hat,ci_lo,ci_hi,trials,censored");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("00-hole,4,"));
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hole.json", HOLE_SMOKE);
    let mut csvs = Vec::new();
    for (tag, threads) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(tag);
        let res = zerolab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(res.status.success());
        assert!(zerolab(&["report", out.join("manifest.json").to_str().unwrap()]).status.success());
        csvs.push(fs::read(out.join("report.csv")).unwrap());
        csvs.push(fs::read(out.join("00-hole.report.json")).unwrap());
    }
    assert_eq!(csvs[0], csvs[2]);
    assert_eq!(csvs[1], csvs[3]);
}

#[test]
fn seed_override_changes_hash_and_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hole.json", HOLE_SMOKE);
    let (a, _) = run_config(&cfg, &RunOptions { output_dir: Some(dir.path().join("a")), ..Default::default() }).unwrap();
    let (b, _) = run_config(
        &cfg,
        &RunOptions { seed: Some(8), output_dir: Some(dir.path().join("b")), ..Default::default() },
    )
    .unwrap();
    assert_ne!(a.config_hash, b.config_hash);
    assert_eq!(b.master_seed, 8);
    let ra = fs::read(dir.path().join("a/00-hole.records.jsonl")).unwrap();
    let rb = fs::read(dir.path().join("b/00-hole.records.jsonl")).unwrap();
    assert_ne!(ra, rb);
}

#[test]
fn too_few_trials_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &HOLE_SMOKE.replace("\"trials\": 1000", "\"trials\": 10"));
    let res = zerolab(&["run", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("trials"), "{err}");
}

#[test]
fn unknown_field_is_rejected_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &HOLE_SMOKE.replace("\"trials\"", "\"trails\""));
    let res = zerolab(&["run", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("trails"));
}

#[test]
fn zero_threads_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hole.json", HOLE_SMOKE);
    let res = zerolab(&["run", cfg.to_str().unwrap(), "--threads", "0"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn empty_run_reports_notice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", "seed = 1\nexperiments = []\n");
    let res = zerolab(&["run", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest = dir.path().join("empty.out/manifest.json");
    let report = zerolab(&["report", manifest.to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&report.stdout).contains("no experiments in this run"));
    assert_eq!(csv_lines(&dir.path().join("empty.out/report.csv")).len(), 1);
}

#[test]
fn missing_output_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hole.json", HOLE_SMOKE);
    let out = dir.path().join("out");
    assert!(zerolab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    fs::remove_file(out.join("00-hole.report.json")).unwrap();
    let report = zerolab(&["report", out.join("manifest.json").to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&report.stdout).contains("missing output"));
}

#[test]
fn kernel_decay_plot_has_three_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "kernel.toml",
        "seed = 1\n[[experiments]]\nkind = \"kernel-suite\"\nname = \"k\"\ndegrees = [100]\nsamples = 200\n",
    );
    assert!(zerolab(&["run", cfg.to_str().unwrap()]).status.success());
    let manifest = dir.path().join("kernel.out/manifest.json");
    let res = zerolab(&["plot", manifest.to_str().unwrap(), "--kind", "kernel-decay"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let lines = csv_lines(&dir.path().join("kernel.out/k.kernel-decay.N100.csv"));
    assert_eq!(lines[0], "d,P_N,gaussian");
    assert_eq!(lines.len(), 202);
    for line in &lines[1..] {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 3);
        assert!((0.0..=1.0).contains(&cols[1]));
    }
}

#[test]
fn scatter_zeros_of_explicit_polynomial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", "seed = 1\nexperiments = []\n");
    assert!(zerolab(&["run", cfg.to_str().unwrap()]).status.success());
    let manifest = dir.path().join("empty.out/manifest.json");
    let res = zerolab(&["plot", manifest.to_str().unwrap(), "--kind", "scatter-zeros", "--coeffs", "-1,0,1"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let lines = csv_lines(&dir.path().join("empty.out/coeffs.zeros.csv"));
    assert_eq!(lines.last().unwrap(), "# infinity,0");
    let mut re: Vec<f64> = lines[1..lines.len() - 1]
        .iter()
        .map(|l| {
            let cols: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
            assert!(cols[1].abs() < 1e-12);
            cols[0]
        })
        .collect();
    re.sort_by(f64::total_cmp);
    assert_eq!(re.len(), 2);
    assert!((re[0] + 1.0).abs() < 1e-12 && (re[1] - 1.0).abs() < 1e-12);
}

#[test]
fn rate_plot_has_one_row_per_degree() {
    let dir = tempfile::tempdir().unwrap();
    let text = HOLE_SMOKE.replace("\"degrees\": [4]", "\"degrees\": [1, 2, 3, 4, 5]").replace("1000", "4000");
    let cfg = write(dir.path(), "rate.json", &text);
    assert!(zerolab(&["run", cfg.to_str().unwrap()]).status.success());
    let manifest = dir.path().join("rate.out/manifest.json");
    assert!(zerolab(&["plot", manifest.to_str().unwrap(), "--kind", "rate"]).status.success());
    let lines = csv_lines(&dir.path().join("rate.out/00-hole.rate.csv"));
    assert_eq!(lines[0], "N,x,neg_log_p,neg_log_ci_hi,neg_log_ci_lo");
    assert_eq!(lines.len(), 6);
    assert!(dir.path().join("rate.out/00-hole.ratefit.json").exists());
}

#[test]
fn histogram_and_trial_scatter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "zc.toml",
        r#"seed = 3
[[experiments]]
kind = "zero-count"
name = "zc"
m = 1
degrees = [6]
trials = 200
domain = { kind = "euclidean_disk", center = { chart = 0, coords = [[0.0, 0.0]] }, radius = 1.0 }
"#,
    );
    assert!(zerolab(&["run", cfg.to_str().unwrap()]).status.success());
    let manifest = dir.path().join("zc.out/manifest.json");
    assert!(zerolab(&["plot", manifest.to_str().unwrap(), "--kind", "histogram"]).status.success());
    let hist = csv_lines(&dir.path().join("zc.out/zc.histogram.csv"));
    assert_eq!(hist.len(), 1 + 7);
    let total: u64 = hist[1..].iter().map(|l| l.split(',').nth(3).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 200);

    let res = zerolab(&["plot", manifest.to_str().unwrap(), "--kind", "scatter-zeros", "--trial", "5"]);
    assert!(res.status.success());
    assert_eq!(csv_lines(&dir.path().join("zc.out/zc.zeros.trial5.csv")).len(), 1 + 6 + 1);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let ext = path.extension().and_then(|e| e.to_str());
        if matches!(ext, Some("toml" | "json")) {
            let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(!cfg.experiments.is_empty(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn readme_config_parses() {
    let readme = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    let start = readme.find("```toml\n").expect("README has a toml block") + 8;
    let end = start + readme[start..].find("```").unwrap();
    RunConfig::parse(&readme[start..end], Path::new("readme.toml")).unwrap();
}
