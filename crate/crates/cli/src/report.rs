use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use zerolab::deviations::{HoleReport, L1LogReport, MaxModulusReport, TailEstimate, ZeroCountReport};

use crate::config::{Experiment, RunConfig};
use crate::manifest::{ExperimentOutputs, RunManifest};
use crate::run::{KernelSuiteReport, PlCheckReport};
use crate::CliError;

pub const REPORT_CSV: &str = "report.csv";

/// Text report and the combined summary CSV written next to the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub csv: PathBuf,
    /// Experiments whose outputs could not be read.
    pub missing: Vec<String>,
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn tail_table(out: &mut String, tails: &[TailEstimate], exponent: u32, label: &str) {
    let _ = writeln!(out, "  {:>5}  {:>12}  {:>27}  {:>9}  {:>12}", "N", "p_hat", "95% CI", "trials", label);
    for t in tails {
        let rate = match t.log_rate(exponent) {
            Some((v, _, _)) => format!("{v:.6}"),
            None => "censored".to_string(),
        };
        let _ = writeln!(
            out,
            "  {:>5}  {:>12.6e}  [{:>11.4e}, {:>11.4e}]  {:>9}  {:>12}",
            t.degree, t.p_hat, t.ci_lo, t.ci_hi, t.trials, rate
        );
        if t.flagged > 0 {
            let _ = writeln!(out, "         {} flagged trials excluded", t.flagged);
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn experiment_section(
    base: &Path,
    e: &ExperimentOutputs,
    exponent: u32,
    out: &mut String,
    rows: &mut Vec<(String, TailEstimate)>,
) -> Result<(), String> {
    let label = format!("-log p/N^{exponent}");
    let report = e.path(base, "report").ok_or_else(|| format!("{}: no report output recorded", e.name))?;
    let _ = writeln!(out, "== {} ({})", e.name, e.kind);
    match e.kind.as_str() {
        "hole" => {
            let r: HoleReport = read(&report)?;
            let tails: Vec<TailEstimate> = r.estimates.iter().map(|e| e.tail.clone()).collect();
            tail_table(out, &tails, exponent, &label);
            match &r.fit {
                Some(fit) => {
                    let _ = writeln!(out, "  rate fit  -log p ~ C N^{} + c0", fit.exponent);
                    let _ = writeln!(
                        out,
                        "    exponent {}: C = {:.6} +- {:.6}, c0 = {:.4}, R^2 = {:.6}",
                        fit.exponent, fit.slope, fit.slope_std_error, fit.intercept, fit.r_squared
                    );
                    let a = &fit.alternative;
                    let _ = writeln!(
                        out,
                        "    exponent {}: C = {:.6} +- {:.6}, c0 = {:.4}, R^2 = {:.6}",
                        a.exponent, a.slope, a.slope_std_error, a.intercept, a.r_squared
                    );
                    let _ = writeln!(out, "    R^2 gap = {:+.6}", fit.r_squared_gap);
                }
                None => {
                    let _ = writeln!(out, "  rate fit: {}", r.fit_error.as_deref().unwrap_or("not available"));
                }
            }
            let decreasing = tails.windows(2).all(|w| w[1].p_hat < w[0].p_hat);
            let bound_ok = r.estimates.iter().all(|e| e.lower_bound.as_ref().is_none_or(|b| b.bound <= e.tail.p_hat));
            let _ = writeln!(out, "  p_hat strictly decreasing: {}", verdict(decreasing));
            let _ = writeln!(out, "  analytic lower bound <= p_hat: {}", verdict(bound_ok));
            rows.extend(tails.into_iter().map(|t| (e.name.clone(), t)));
        }
        "zero-count" => {
            let r: ZeroCountReport = read(&report)?;
            let _ = writeln!(out, "  delta = {}", r.delta);
            let tails: Vec<TailEstimate> = r.estimates.iter().map(|e| e.tail.clone()).collect();
            tail_table(out, &tails, exponent, &label);
            for z in &r.estimates {
                let _ = writeln!(
                    out,
                    "  N = {}: mean fraction {:.6} (expected {:.6}){}",
                    z.degree,
                    z.mean_fraction,
                    z.expected_fraction,
                    if z.ambiguous > 0 { format!(", {} undecided by the sandwich", z.ambiguous) } else { String::new() }
                );
                for nv in &z.nevanlinna {
                    let _ = writeln!(
                        out,
                        "    n_f({})/N = {:.6} +- {:.6} (expected {:.6})",
                        nv.radius, nv.mean, nv.std_error, nv.expected
                    );
                }
            }
            rows.extend(tails.into_iter().map(|t| (e.name.clone(), t)));
        }
        "max-modulus" => {
            let r: MaxModulusReport = read(&report)?;
            let _ = writeln!(out, "  delta = {}", r.delta);
            let tails: Vec<TailEstimate> = r.estimates.iter().map(|e| e.tail.clone()).collect();
            tail_table(out, &tails, exponent, &label);
            for m in &r.estimates {
                let _ = writeln!(
                    out,
                    "  N = {}: median log M / N = {:.6}, mean {:.6}, 1/2 log Pi_N = {:.6}",
                    m.tail.degree, m.median_scaled_log, m.mean_scaled_log, m.typical_log
                );
                let _ = writeln!(out, "    M <= |c| sqrt(Pi_N) on every trial: {}", verdict(m.bound_violations == 0));
            }
            rows.extend(tails.into_iter().map(|t| (e.name.clone(), t)));
        }
        "l1-log" => {
            let r: L1LogReport = read(&report)?;
            let _ = writeln!(out, "  delta = {}", r.delta);
            let tails: Vec<TailEstimate> = r.estimates.iter().map(|e| e.tail.clone()).collect();
            tail_table(out, &tails, exponent, &label);
            for l in &r.estimates {
                let _ = writeln!(
                    out,
                    "  N = {}: mean {:.6} +- {:.6}, exact expectation {:.6}",
                    l.tail.degree, l.mean, l.std_error, l.expected
                );
                let _ = writeln!(out, "    absolute >= |signed| on every trial: {}", verdict(l.violations == 0));
            }
            rows.extend(tails.into_iter().map(|t| (e.name.clone(), t)));
        }
        "kernel-suite" => {
            let r: KernelSuiteReport = read(&report)?;
            let _ = writeln!(out, "  {:>5}  {:>10}  {:>14}  {:>14}", "N", "split", "near-field dev", "P_N N^(m+1)");
            for k in &r.entries {
                let _ = writeln!(
                    out,
                    "  {:>5}  {:>10.6}  {:>14.6e}  {:>14.6e}",
                    k.degree, k.split, k.near_field_deviation, k.far_field_peak
                );
            }
            let _ = writeln!(out, "  near-field deviation decreasing: {}", verdict(r.near_field_decreasing));
            let _ = writeln!(out, "  far-field peak <= 10: {}", verdict(r.far_field_bounded));
            if let Some(l) = &r.lattice {
                let _ = writeln!(
                    out,
                    "  lattice: {} points, row sum max {:.6}, min eigenvalue {:.6}",
                    l.points, l.row_sum_max, l.min_eigenvalue
                );
            }
        }
        "pl-check" => {
            let r: PlCheckReport = read(&report)?;
            let _ = writeln!(out, "  {:>5}  {:>9}  {:>14}  {:>14}  {:>10}", "N", "sections", "max |diff|", "max |pl(1)-N|", "verdict");
            for p in &r.entries {
                let _ = writeln!(
                    out,
                    "  {:>5}  {:>9}  {:>14.6e}  {:>14.6e}  {:>10}",
                    p.degree,
                    p.sections,
                    p.max_difference,
                    p.max_unit_error,
                    verdict(p.passed)
                );
            }
        }
        other => return Err(format!("{}: unknown experiment kind {other:?}", e.name)),
    }
    Ok(())
}

fn experiment_exponent(e: &Experiment) -> u32 {
    match e {
        Experiment::ZeroCount(mc) | Experiment::Hole(mc) | Experiment::MaxModulus(mc) | Experiment::L1Log(mc) => mc.m as u32 + 1,
        Experiment::KernelSuite(k) => k.m as u32 + 1,
        Experiment::PlCheck(_) => 2,
    }
}

/// Renders the report of a finished run and writes `report.csv` with the
/// columns `experiment,N,p_hat,ci_lo,ci_hi,trials,censored`.
pub fn emit_report(manifest_path: &Path) -> Result<Report, CliError> {
    let manifest = RunManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut text = String::new();
    let _ = writeln!(text, "run {} (zerolab {})", manifest.config_hash, manifest.code_version);
    let _ = writeln!(text, "seed {}, started {}, finished {}", manifest.master_seed, manifest.started, manifest.finished);
    // the rate exponent m+1 comes from the resolved configuration
    let exponents: Vec<u32> = match RunConfig::load(&base.join(&manifest.config)) {
        Ok(cfg) => cfg.experiments.iter().map(experiment_exponent).collect(),
        Err(_) => vec![],
    };
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    if manifest.experiments.is_empty() {
        let _ = writeln!(text, "no experiments in this run");
    }
    for (i, e) in manifest.experiments.iter().enumerate() {
        let mut section = String::new();
        let exponent = exponents.get(i).copied().unwrap_or(2);
        match experiment_section(base, e, exponent, &mut section, &mut rows) {
            Ok(()) => text.push_str(&section),
            Err(msg) => {
                let _ = writeln!(text, "== {} ({}): missing output: {msg}", e.name, e.kind);
                missing.push(e.name.clone());
            }
        }
    }
    let csv = base.join(REPORT_CSV);
    let mut w = BufWriter::new(File::create(&csv)?);
    writeln!(w, "experiment,N,p_hat,ci_lo,ci_hi,trials,censored")?;
    for (name, t) in &rows {
        writeln!(w, "{name},{},{},{},{},{},{}", t.degree, t.p_hat, t.ci_lo, t.ci_hi, t.trials, t.censored)?;
    }
    w.flush()?;
    Ok(Report { text, csv, missing })
}
