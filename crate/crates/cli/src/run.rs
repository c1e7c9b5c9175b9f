use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use zerolab::currents::{pl_linear_statistic, smooth_indicator, Side, TestFunction};
use zerolab::deviations::{
    run_hole_experiment, run_l1_log_experiment, run_max_modulus_experiment, run_zero_count_experiment, write_summary_csv,
    TailEstimate,
};
use zerolab::kernel::{build_lattice, far_field_peak, min_eigenvalue, near_field_deviation, regime_split, row_sum_max};
use zerolab::quadrature::QuadratureGrid;
use zerolab::zeros::find_roots;
use zerolab::{sample_section, ChartPoint, EnsembleSpec};

use crate::config::{Experiment, KernelSuite, MonteCarlo, PlCheck, RunConfig};
use crate::manifest::{ExperimentOutputs, RunManifest, MANIFEST_FILE};
use crate::CliError;

pub const RESOLVED_CONFIG: &str = "config.resolved.json";

/// Far-field threshold on `P_N · N^{m+1}`.
pub const FAR_FIELD_LIMIT: f64 = 10.0;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("configuration serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn output_dir(cfg: &RunConfig, config_path: &Path, opts: &RunOptions) -> PathBuf {
    if let Some(dir) = &opts.output_dir {
        return dir.clone();
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    match &cfg.output_dir {
        Some(dir) => base.join(dir),
        None => {
            let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            base.join(format!("{stem}.out"))
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn numeric(e: zerolab::Error) -> CliError {
    match e {
        zerolab::Error::Config(msg) => CliError::Validation(msg),
        zerolab::Error::Io(e) => CliError::Io(e),
        other => CliError::Numeric(other.to_string()),
    }
}

/// Executes every experiment of the configuration and writes the manifest.
/// Returns the manifest and its path.
pub fn run_config(config_path: &Path, opts: &RunOptions) -> Result<(RunManifest, PathBuf), CliError> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.override_seed(seed);
    }
    let hash = config_hash(&cfg);
    let dir = output_dir(&cfg, config_path, opts);
    std::fs::create_dir_all(&dir)?;
    write_json(&dir.join(RESOLVED_CONFIG), &cfg)?;

    let started = chrono::Utc::now().to_rfc3339();
    let mut exec = cfg.clone();
    if let Some(threads) = opts.threads {
        exec.set_threads(threads);
    }
    let mut experiments = Vec::new();
    for (i, e) in exec.experiments.iter().enumerate() {
        let name = e.name(i);
        let outputs = match e {
            Experiment::ZeroCount(mc) | Experiment::Hole(mc) | Experiment::MaxModulus(mc) | Experiment::L1Log(mc) => {
                run_monte_carlo(e, mc, exec.seed, &dir, &name)?
            }
            Experiment::KernelSuite(k) => run_kernel_suite(k, &dir, &name)?,
            Experiment::PlCheck(p) => run_pl_check(p, exec.seed, &dir, &name)?,
        };
        experiments.push(ExperimentOutputs { name, kind: e.kind().to_string(), outputs });
    }
    let manifest = RunManifest {
        config_hash: hash,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        master_seed: cfg.seed,
        threads: opts.threads,
        config: PathBuf::from(RESOLVED_CONFIG),
        experiments,
    };
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, &manifest)?;
    Ok((manifest, path))
}

fn run_monte_carlo(e: &Experiment, mc: &MonteCarlo, seed: u64, dir: &Path, name: &str) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let mut cfg = mc.experiment_config(seed);
    let mut outputs = BTreeMap::new();
    if mc.records {
        let file = PathBuf::from(format!("{name}.records.jsonl"));
        cfg.records = Some(dir.join(&file));
        outputs.insert("records".to_string(), file);
    }
    let report_file = PathBuf::from(format!("{name}.report.json"));
    let tails: Vec<TailEstimate> = match e {
        Experiment::ZeroCount(_) => {
            let r = run_zero_count_experiment(&cfg).map_err(numeric)?;
            write_json(&dir.join(&report_file), &r)?;
            r.estimates.into_iter().map(|e| e.tail).collect()
        }
        Experiment::Hole(_) => {
            let r = run_hole_experiment(&cfg).map_err(numeric)?;
            write_json(&dir.join(&report_file), &r)?;
            if let Some(fit) = &r.fit {
                let file = PathBuf::from(format!("{name}.ratefit.json"));
                write_json(&dir.join(&file), fit)?;
                outputs.insert("ratefit".to_string(), file);
            }
            r.estimates.into_iter().map(|e| e.tail).collect()
        }
        Experiment::MaxModulus(_) => {
            let r = run_max_modulus_experiment(&cfg).map_err(numeric)?;
            write_json(&dir.join(&report_file), &r)?;
            r.estimates.into_iter().map(|e| e.tail).collect()
        }
        Experiment::L1Log(_) => {
            let r = run_l1_log_experiment(&cfg).map_err(numeric)?;
            write_json(&dir.join(&report_file), &r)?;
            r.estimates.into_iter().map(|e| e.tail).collect()
        }
        _ => unreachable!("not a Monte Carlo experiment"),
    };
    outputs.insert("report".to_string(), report_file);
    let summary = PathBuf::from(format!("{name}.summary.csv"));
    let mut w = BufWriter::new(File::create(dir.join(&summary))?);
    write_summary_csv(&tails, &mut w).map_err(numeric)?;
    w.flush()?;
    outputs.insert("summary".to_string(), summary);
    Ok(outputs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEntry {
    #[serde(rename = "N")]
    pub degree: usize,
    pub split: f64,
    /// `sup |P_N e^{N d²/2} − 1|` below the split.
    pub near_field_deviation: f64,
    /// `sup P_N N^{m+1}` above the split.
    pub far_field_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSummary {
    pub points: usize,
    pub row_sum_max: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSuiteReport {
    pub m: usize,
    pub samples: usize,
    pub entries: Vec<KernelEntry>,
    /// Near-field deviation decreases along the configured degrees.
    pub near_field_decreasing: bool,
    /// Every far-field peak is at most [`FAR_FIELD_LIMIT`].
    pub far_field_bounded: bool,
    pub lattice: Option<LatticeSummary>,
}

pub fn kernel_suite_report(k: &KernelSuite) -> Result<KernelSuiteReport, CliError> {
    let entries: Vec<KernelEntry> = k
        .degrees
        .iter()
        .map(|&n| KernelEntry {
            degree: n,
            split: regime_split(k.m, n),
            near_field_deviation: near_field_deviation(k.m, n, k.samples),
            far_field_peak: far_field_peak(k.m, n, k.samples),
        })
        .collect();
    let near_field_decreasing = entries.windows(2).all(|w| w[1].near_field_deviation < w[0].near_field_deviation);
    let far_field_bounded = entries.iter().all(|e| e.far_field_peak <= FAR_FIELD_LIMIT);
    let lattice = match &k.lattice {
        Some(p) => {
            let center = ChartPoint::origin(k.m, 0).map_err(numeric)?;
            let lattice = build_lattice(&center, p.t, p.a, p.degree).map_err(numeric)?;
            let delta = lattice.covariance();
            Some(LatticeSummary {
                points: lattice.len(),
                row_sum_max: row_sum_max(&delta),
                min_eigenvalue: min_eigenvalue(&delta).map_err(numeric)?,
            })
        }
        None => None,
    };
    Ok(KernelSuiteReport { m: k.m, samples: k.samples, entries, near_field_decreasing, far_field_bounded, lattice })
}

fn run_kernel_suite(k: &KernelSuite, dir: &Path, name: &str) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let report = kernel_suite_report(k)?;
    let file = PathBuf::from(format!("{name}.report.json"));
    write_json(&dir.join(&file), &report)?;
    Ok(BTreeMap::from([("report".to_string(), file)]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlEntry {
    #[serde(rename = "N")]
    pub degree: usize,
    pub sections: u64,
    /// `max |pl(ψ) − Σ_zeros ψ|`.
    pub max_difference: f64,
    /// `max |pl(1) − N|`.
    pub max_unit_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlCheckReport {
    pub entries: Vec<PlEntry>,
}

/// `(N, section, pl(ψ), Σ_zeros ψ, pl(1))`.
pub type PlRow = (usize, u64, f64, f64, f64);

pub fn pl_check_rows(p: &PlCheck, seed: u64) -> Result<Vec<PlRow>, CliError> {
    let psi = smooth_indicator(&p.domain, p.width, Side::Inner).map_err(numeric)?;
    let one = TestFunction::one(1);
    let mut rows = Vec::new();
    for &n in &p.degrees {
        let spec = EnsembleSpec::new(1, n, p.seed.unwrap_or(seed)).map_err(numeric)?;
        let grid = QuadratureGrid::for_log_integrand(n);
        for k in 0..p.sections {
            let s = sample_section(&spec, k);
            let pl = pl_linear_statistic(&s, &psi, &grid).map_err(numeric)?;
            let unit = pl_linear_statistic(&s, &one, &grid).map_err(numeric)?;
            let roots = find_roots(&s).map_err(numeric)?;
            let at_infinity = if roots.degree_at_infinity > 0 { psi.value(&ChartPoint::infinity()) * roots.degree_at_infinity as f64 } else { 0.0 };
            let direct: f64 = roots.roots.iter().map(|r| psi.value(r)).sum::<f64>() + at_infinity;
            rows.push((n, k, pl, direct, unit));
        }
    }
    Ok(rows)
}

fn run_pl_check(p: &PlCheck, seed: u64, dir: &Path, name: &str) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let rows = pl_check_rows(p, seed)?;
    let values = PathBuf::from(format!("{name}.values.csv"));
    let mut w = BufWriter::new(File::create(dir.join(&values))?);
    writeln!(w, "N,section,pl,direct,difference,unit")?;
    for (n, k, pl, direct, unit) in &rows {
        writeln!(w, "{n},{k},{pl},{direct},{},{unit}", pl - direct)?;
    }
    w.flush()?;
    let entries = p
        .degrees
        .iter()
        .map(|&n| {
            let mine: Vec<_> = rows.iter().filter(|r| r.0 == n).collect();
            let max_difference = mine.iter().map(|r| (r.2 - r.3).abs()).fold(0.0, f64::max);
            let max_unit_error = mine.iter().map(|r| (r.4 - n as f64).abs()).fold(0.0, f64::max);
            let tolerance = p.tolerance * n as f64;
            PlEntry {
                degree: n,
                sections: p.sections,
                max_difference,
                max_unit_error,
                tolerance,
                passed: max_difference <= tolerance && max_unit_error <= 1e-6,
            }
        })
        .collect();
    let report = PlCheckReport { entries };
    let file = PathBuf::from(format!("{name}.report.json"));
    write_json(&dir.join(&file), &report)?;
    Ok(BTreeMap::from([("report".to_string(), file), ("values".to_string(), values)]))
}
