use clap::ValueEnum;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use zerolab::deviations::{HoleReport, TailEstimate, ZeroCountReport};
use zerolab::kernel::gaussian_approximation;
use zerolab::zeros::{find_roots, roots_of};
use zerolab::{sample_section, Complex64, EnsembleSpec};

use crate::config::{Experiment, RunConfig};
use crate::manifest::RunManifest;
use crate::run::KernelSuiteReport;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Empirical distribution of count/N (zero-count runs).
    Histogram,
    /// `(N^{m+1}, −log p̂)` series (hole and zero-count runs).
    Rate,
    /// `(d, P_N, e^{−N d²/2})` curves (kernel suites).
    KernelDecay,
    /// Zeros of one section.
    ScatterZeros,
}

#[derive(Debug, Clone, Default)]
pub struct PlotOptions {
    /// Trial index used by `scatter-zeros`.
    pub trial: u64,
    /// Explicit polynomial coefficients `a_0, …, a_N` for `scatter-zeros`.
    pub coeffs: Option<Vec<f64>>,
    /// Output directory; defaults to the manifest directory.
    pub out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("missing output {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_rate(path: &Path, tails: &[TailEstimate], exponent: u32) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "N,x,neg_log_p,neg_log_ci_hi,neg_log_ci_lo")?;
    for t in tails.iter().filter(|t| t.p_hat > 0.0) {
        let x = (t.degree as f64).powi(exponent as i32);
        writeln!(w, "{},{},{},{},{}", t.degree, x, -t.p_hat.ln(), -t.ci_hi.ln(), -t.ci_lo.ln())?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `re,im,residual` rows for the zeros of `Σ a_j z^j`.
pub fn write_zeros_of(coeffs: &[f64], path: &Path) -> Result<(), CliError> {
    let a: Vec<Complex64> = coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    let roots = roots_of(&a).map_err(|e| CliError::Numeric(e.to_string()))?;
    let mut w = create(path)?;
    roots.write_csv(&mut w).map_err(|e| CliError::Numeric(e.to_string()))?;
    w.flush()?;
    Ok(())
}

/// Writes plot-ready data for every matching experiment of the run and
/// returns the files written.
pub fn emit_plot_data(manifest_path: &Path, kind: PlotKind, opts: &PlotOptions) -> Result<Vec<PathBuf>, CliError> {
    let manifest = RunManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let out = opts.out.clone().unwrap_or_else(|| base.clone());
    std::fs::create_dir_all(&out)?;
    let config = RunConfig::load(&base.join(&manifest.config))?;
    let mut written = Vec::new();

    if let (PlotKind::ScatterZeros, Some(coeffs)) = (kind, &opts.coeffs) {
        let path = out.join("coeffs.zeros.csv");
        write_zeros_of(coeffs, &path)?;
        return Ok(vec![path]);
    }

    for (i, (e, outputs)) in config.experiments.iter().zip(&manifest.experiments).enumerate() {
        let name = e.name(i);
        let report = outputs.path(&base, "report");
        match (kind, e) {
            (PlotKind::Histogram, Experiment::ZeroCount(_)) => {
                let r: ZeroCountReport = read(&report.ok_or_else(|| missing(&name))?)?;
                let path = out.join(format!("{name}.histogram.csv"));
                let mut w = create(&path)?;
                writeln!(w, "N,count,fraction,frequency,probability")?;
                for z in &r.estimates {
                    let total: u64 = z.histogram.iter().sum();
                    for (k, &f) in z.histogram.iter().enumerate() {
                        let p = if total > 0 { f as f64 / total as f64 } else { 0.0 };
                        writeln!(w, "{},{},{},{},{}", z.degree, k, k as f64 / z.degree as f64, f, p)?;
                    }
                }
                w.flush()?;
                written.push(path);
            }
            (PlotKind::Rate, Experiment::Hole(mc)) => {
                let r: HoleReport = read(&report.ok_or_else(|| missing(&name))?)?;
                let tails: Vec<TailEstimate> = r.estimates.into_iter().map(|e| e.tail).collect();
                let path = out.join(format!("{name}.rate.csv"));
                write_rate(&path, &tails, mc.m as u32 + 1)?;
                written.push(path);
            }
            (PlotKind::Rate, Experiment::ZeroCount(mc)) => {
                let r: ZeroCountReport = read(&report.ok_or_else(|| missing(&name))?)?;
                let tails: Vec<TailEstimate> = r.estimates.into_iter().map(|e| e.tail).collect();
                let path = out.join(format!("{name}.rate.csv"));
                write_rate(&path, &tails, mc.m as u32 + 1)?;
                written.push(path);
            }
            (PlotKind::KernelDecay, Experiment::KernelSuite(k)) => {
                let r: KernelSuiteReport = read(&report.ok_or_else(|| missing(&name))?)?;
                for entry in &r.entries {
                    let n = entry.degree;
                    let path = out.join(format!("{name}.kernel-decay.N{n}.csv"));
                    let mut w = create(&path)?;
                    writeln!(w, "d,P_N,gaussian")?;
                    for j in 0..=k.samples {
                        let d = std::f64::consts::FRAC_PI_2 * j as f64 / k.samples as f64;
                        writeln!(w, "{},{},{}", d, d.cos().powi(n as i32), gaussian_approximation(d, n))?;
                    }
                    w.flush()?;
                    written.push(path);
                }
            }
            (PlotKind::ScatterZeros, Experiment::ZeroCount(mc) | Experiment::Hole(mc) | Experiment::MaxModulus(mc) | Experiment::L1Log(mc))
                if mc.m == 1 =>
            {
                let spec = EnsembleSpec::new(1, mc.degrees[0], mc.seed.unwrap_or(config.seed))
                    .map_err(|e| CliError::Numeric(e.to_string()))?;
                let s = sample_section(&spec, opts.trial);
                let roots = find_roots(&s).map_err(|e| CliError::Numeric(e.to_string()))?;
                let path = out.join(format!("{name}.zeros.trial{}.csv", opts.trial));
                let mut w = create(&path)?;
                roots.write_csv(&mut w).map_err(|e| CliError::Numeric(e.to_string()))?;
                w.flush()?;
                written.push(path);
            }
            _ => {}
        }
    }
    Ok(written)
}

fn missing(name: &str) -> CliError {
    CliError::Validation(format!("{name}: no report output recorded"))
}
