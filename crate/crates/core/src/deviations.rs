//! Monte Carlo drivers for zero-count tails, hole probabilities, maximum
//! modulus tails and L¹ log-modulus tails, plus the analytic hole lower bound.
//!
//! Every experiment is a per-trial function producing a [`TrialRecord`] and
//! an accumulator folding records in trial order. Trials run in parallel in
//! fixed-size chunks, but records are folded sequentially, so the outputs do
//! not depend on the number of worker threads. Replaying persisted records
//! through the same accumulators gives bit-identical summaries.

use crate::currents::{integrate_log_modulus, volume_sandwich, LogNormalization};
use crate::domain::DomainSpec;
use crate::ensemble::{sample_section, szego_diagonal, EnsembleSpec, PolySection};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureGrid;
use crate::rng::{Purpose, TrialRng};
use crate::zeros::{count_in_domain, find_roots, max_modulus, nevanlinna_count};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MIN_TRIALS: u64 = 100;
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

// deviations this close to the threshold count as ties (e.g. 13/20 − 0.5 vs 0.15)
const TIE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    Wilson,
    Wald,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorOptions {
    pub ci: CiMethod,
    /// Normal quantile of the interval.
    pub z: f64,
    /// Refinement rounds of the maximum-modulus search.
    pub max_levels: usize,
    /// Log-integrand grid; defaults to [`QuadratureGrid::for_log_integrand`].
    pub quadrature: Option<QuadratureGrid>,
    /// Collar width of the smoothed indicators (m = 2 zero counts).
    pub sandwich_width: f64,
    /// Radii at which `n_f(r)` is recorded in zero-count runs.
    pub radii: Vec<f64>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Trials evaluated per parallel batch.
    pub chunk: usize,
    /// Fewer hole hits than this marks the estimate as low-powered.
    pub min_hits: u64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            ci: CiMethod::Wilson,
            z: Z95,
            max_levels: 4,
            quadrature: None,
            sandwich_width: 0.1,
            radii: vec![],
            threads: None,
            chunk: 8192,
            min_hits: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: usize,
    /// One ensemble per degree, all with the same `m` and seed.
    pub degrees: Vec<usize>,
    pub master_seed: u64,
    pub domain: DomainSpec,
    pub trials: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub estimator: EstimatorOptions,
    /// JSONL destination for trial records.
    #[serde(default)]
    pub records: Option<PathBuf>,
}

fn default_delta() -> f64 {
    0.5
}

impl ExperimentConfig {
    pub fn new(m: usize, degrees: Vec<usize>, master_seed: u64, domain: DomainSpec, trials: u64) -> Self {
        Self {
            m,
            degrees,
            master_seed,
            domain,
            trials,
            delta: default_delta(),
            estimator: EstimatorOptions::default(),
            records: None,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.estimator.threads = Some(threads);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < MIN_TRIALS {
            return Err(Error::Config(format!("trials: {} is below the minimum of {MIN_TRIALS}", self.trials)));
        }
        if self.degrees.is_empty() {
            return Err(Error::Config("degrees: at least one degree is required".into()));
        }
        for (i, &n) in self.degrees.iter().enumerate() {
            EnsembleSpec::new(self.m, n, self.master_seed).map_err(|e| Error::Config(format!("degrees[{i}]: {e}")))?;
        }
        self.domain.validate().map_err(|e| Error::Config(format!("domain: {e}")))?;
        if self.domain.dim() != self.m {
            return Err(Error::Config(format!("domain: dimension {} does not match m = {}", self.domain.dim(), self.m)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta: {} must be positive", self.delta)));
        }
        let e = &self.estimator;
        if !(e.z > 0.0 && e.z.is_finite()) {
            return Err(Error::Config("estimator.z: must be positive".into()));
        }
        if e.chunk == 0 {
            return Err(Error::Config("estimator.chunk: must be positive".into()));
        }
        if e.threads == Some(0) {
            return Err(Error::Config("estimator.threads: must be positive".into()));
        }
        if let Some(r) = e.radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::Config(format!("estimator.radii: {r} is not a positive radius")));
        }
        Ok(())
    }

    pub fn specs(&self) -> Vec<EnsembleSpec> {
        self.degrees.iter().map(|&degree| EnsembleSpec { m: self.m, degree, master_seed: self.master_seed }).collect()
    }

    fn grid(&self, degree: usize) -> QuadratureGrid {
        self.estimator.quadrature.clone().unwrap_or_else(|| QuadratureGrid::for_log_integrand(degree))
    }

    fn require_line(&self, operation: &'static str) -> Result<()> {
        if self.m != 1 {
            return Err(Error::UnsupportedDimension { m: self.m, operation });
        }
        Ok(())
    }
}

/// Per-trial statistics. Only the fields of the running experiment are set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    #[serde(rename = "N")]
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Lower and upper sandwich bounds of the zero volume in the domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<[f64; 2]>,
    /// `n_f(r)` at the configured radii.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nevanlinna: Vec<usize>,
    /// `log M` with `M = sup_U |s|_h` in the orthonormal normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_max_modulus: Option<f64>,
    /// `M ≤ ‖c‖ √Π_N` held.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_bound: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1_log: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signed_log: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hole: Option<bool>,
    /// Solver or quadrature failure; flagged trials are excluded from estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
    #[serde(default)]
    pub wall_time_us: u64,
}

impl TrialRecord {
    fn empty(trial: u64, degree: usize) -> Self {
        Self {
            trial,
            degree,
            count: None,
            volume: None,
            nevanlinna: vec![],
            log_max_modulus: None,
            coefficient_bound: None,
            l1_log: None,
            signed_log: None,
            hole: None,
            flag: None,
            wall_time_us: 0,
        }
    }

    fn flagged(trial: u64, degree: usize, e: &Error) -> Self {
        Self { flag: Some(e.to_string()), ..Self::empty(trial, degree) }
    }
}

/// Wilson score interval for `hits` successes in `n` trials.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Normal-approximation interval, clipped to `[0, 1]`.
pub fn wald_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let p = hits as f64 / n as f64;
    let half = z * (p * (1.0 - p) / n as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// Streaming Bernoulli counter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub hits: u64,
}

impl Tally {
    pub fn push(&mut self, hit: bool) {
        self.trials += 1;
        self.hits += u64::from(hit);
    }

    pub fn p_hat(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.hits as f64 / self.trials as f64
        }
    }

    pub fn interval(&self, method: CiMethod, z: f64) -> (f64, f64) {
        match method {
            CiMethod::Wilson => wilson_interval(self.hits, self.trials, z),
            CiMethod::Wald => wald_interval(self.hits, self.trials, z),
        }
    }
}

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMean {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMean {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Tail or hole probability estimate at one degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    #[serde(rename = "N")]
    pub degree: usize,
    /// Unflagged trials.
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// No hit was observed, so only an upper bound is available.
    pub censored: bool,
    /// Trials excluded because of solver or quadrature failures.
    pub flagged: u64,
}

impl TailEstimate {
    fn from_tally(degree: usize, tally: &Tally, flagged: u64, opts: &EstimatorOptions) -> Self {
        let (ci_lo, ci_hi) = tally.interval(opts.ci, opts.z);
        Self {
            degree,
            trials: tally.trials,
            hits: tally.hits,
            p_hat: tally.p_hat(),
            ci_lo,
            ci_hi,
            censored: tally.hits == 0,
            flagged,
        }
    }

    /// `−log p̂ / N^k` with the interval mapped through the same transform,
    /// as `(value, lo, hi)`. `None` when censored.
    pub fn log_rate(&self, exponent: u32) -> Option<(f64, f64, f64)> {
        if self.censored {
            return None;
        }
        let scale = (self.degree as f64).powi(exponent as i32);
        Some((-self.p_hat.ln() / scale, -self.ci_hi.ln() / scale, -self.ci_lo.ln() / scale))
    }
}

/// CSV with columns `N,p_hat,ci_lo,ci_hi,trials,censored`.
pub fn write_summary_csv(rows: &[TailEstimate], out: &mut impl Write) -> Result<()> {
    writeln!(out, "N,p_hat,ci_lo,ci_hi,trials,censored")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{},{}", r.degree, r.p_hat, r.ci_lo, r.ci_hi, r.trials, r.censored)?;
    }
    Ok(())
}

/// Runs `trial` for every `(spec, index)` and hands records to `sink` in
/// (degree, trial) order.
fn drive<F, S>(cfg: &ExperimentConfig, trial: F, mut sink: S) -> Result<()>
where
    F: Fn(&EnsembleSpec, u64) -> TrialRecord + Sync,
    S: FnMut(TrialRecord) -> Result<()> + Send,
{
    let chunk = cfg.estimator.chunk as u64;
    let body = |sink: &mut S| -> Result<()> {
        for spec in cfg.specs() {
            let mut start = 0;
            while start < cfg.trials {
                let end = (start + chunk).min(cfg.trials);
                let batch: Vec<TrialRecord> = (start..end)
                    .into_par_iter()
                    .map(|t| {
                        let clock = Instant::now();
                        let mut r = trial(&spec, t);
                        r.wall_time_us = clock.elapsed().as_micros() as u64;
                        r
                    })
                    .collect();
                for r in batch {
                    sink(r)?;
                }
                start = end;
            }
        }
        Ok(())
    };
    match cfg.estimator.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("estimator.threads: {e}")))?
            .install(|| body(&mut sink)),
        None => body(&mut sink),
    }
}

trait Accumulator: Sized + Send {
    type Output;
    fn new(cfg: &ExperimentConfig, degree: usize) -> Result<Self>;
    fn push(&mut self, r: &TrialRecord);
    fn finish(self, cfg: &ExperimentConfig) -> Self::Output;
}

fn run<A: Accumulator>(
    cfg: &ExperimentConfig,
    trial: impl Fn(&EnsembleSpec, u64) -> TrialRecord + Sync,
) -> Result<Vec<A::Output>> {
    cfg.validate()?;
    let mut accs = cfg.degrees.iter().map(|&n| A::new(cfg, n)).collect::<Result<Vec<A>>>()?;
    let index: BTreeMap<usize, usize> = cfg.degrees.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut writer = match &cfg.records {
        Some(path) => Some(BufWriter::new(File::create(path)?)),
        None => None,
    };
    drive(cfg, trial, |r| {
        if let Some(w) = writer.as_mut() {
            serde_json::to_writer(&mut *w, &r)?;
            w.write_all(b"\n")?;
        }
        accs[index[&r.degree]].push(&r);
        Ok(())
    })?;
    if let Some(mut w) = writer {
        w.flush()?;
    }
    Ok(accs.into_iter().map(|a| a.finish(cfg)).collect())
}

fn replay<A: Accumulator>(cfg: &ExperimentConfig, records: impl IntoIterator<Item = TrialRecord>) -> Result<Vec<A::Output>> {
    cfg.validate()?;
    let mut accs = cfg.degrees.iter().map(|&n| A::new(cfg, n)).collect::<Result<Vec<A>>>()?;
    let index: BTreeMap<usize, usize> = cfg.degrees.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    for r in records {
        let i = *index
            .get(&r.degree)
            .ok_or_else(|| Error::Config(format!("record for N = {} not in the configured degrees", r.degree)))?;
        accs[i].push(&r);
    }
    Ok(accs.into_iter().map(|a| a.finish(cfg)).collect())
}

/// Reads a JSONL file of trial records.
pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- zero counts

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NevanlinnaMean {
    pub radius: f64,
    /// Sample mean of `n_f(r)/N`.
    pub mean: f64,
    pub std_error: f64,
    /// `r²/(1+r²)`.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCountEstimate {
    #[serde(rename = "N")]
    pub degree: usize,
    /// `Vol(U)/Vol(CP^m)`, the mean of the zero-volume fraction.
    pub expected_fraction: f64,
    /// `P(|fraction − expected| > δ)`.
    pub tail: TailEstimate,
    /// Trials whose sandwich interval straddles the threshold (m = 2). They
    /// are not counted as hits, so `tail` is a lower estimate and
    /// `(hits + ambiguous)/trials` an upper one.
    pub ambiguous: u64,
    pub mean_fraction: f64,
    /// `histogram[k]` trials had `k` zeros in the domain (m = 1).
    pub histogram: Vec<u64>,
    pub nevanlinna: Vec<NevanlinnaMean>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCountReport {
    pub delta: f64,
    pub estimates: Vec<ZeroCountEstimate>,
}

fn expected_fraction(domain: &DomainSpec) -> Result<f64> {
    let m = domain.dim();
    let total = PI.powi(m as i32) / (1..=m).product::<usize>() as f64;
    Ok(domain.fs_volume()? / total)
}

/// FS volume of the zero set of a degree-`N` section, `N π^{m−1}/(m−1)!`.
fn zero_set_volume(m: usize, degree: usize) -> f64 {
    degree as f64 * PI.powi(m as i32 - 1) / (1..m).product::<usize>() as f64
}

struct ZeroCountAcc {
    degree: usize,
    m: usize,
    expected: f64,
    delta: f64,
    tally: Tally,
    ambiguous: u64,
    flagged: u64,
    mean: RunningMean,
    histogram: Vec<u64>,
    radii: Vec<f64>,
    nevanlinna: Vec<RunningMean>,
}

impl Accumulator for ZeroCountAcc {
    type Output = ZeroCountEstimate;

    fn new(cfg: &ExperimentConfig, degree: usize) -> Result<Self> {
        Ok(Self {
            degree,
            m: cfg.m,
            expected: expected_fraction(&cfg.domain)?,
            delta: cfg.delta,
            tally: Tally::default(),
            ambiguous: 0,
            flagged: 0,
            mean: RunningMean::default(),
            histogram: if cfg.m == 1 { vec![0; degree + 1] } else { vec![] },
            radii: cfg.estimator.radii.clone(),
            nevanlinna: vec![RunningMean::default(); cfg.estimator.radii.len()],
        })
    }

    fn push(&mut self, r: &TrialRecord) {
        if r.flag.is_some() {
            self.flagged += 1;
            return;
        }
        let n = self.degree as f64;
        let threshold = self.delta + TIE_SLACK;
        let exceeds = |x: f64| (x - self.expected).abs() > threshold;
        if let Some(count) = r.count {
            let fraction = count as f64 / n;
            self.tally.push(exceeds(fraction));
            self.mean.push(fraction);
            if let Some(h) = self.histogram.get_mut(count) {
                *h += 1;
            }
        } else if let Some([lo, hi]) = r.volume {
            let scale = zero_set_volume(self.m, self.degree);
            let (lo, hi) = (lo / scale, hi / scale);
            // the event holds on all of [lo, hi], on none of it, or is undecided
            let all = hi < self.expected - threshold || lo > self.expected + threshold;
            let none = lo >= self.expected - threshold && hi <= self.expected + threshold;
            self.tally.push(all);
            if !all && !none {
                self.ambiguous += 1;
            }
            self.mean.push(0.5 * (lo + hi));
        }
        for (acc, &k) in self.nevanlinna.iter_mut().zip(&r.nevanlinna) {
            acc.push(k as f64 / n);
        }
    }

    fn finish(self, cfg: &ExperimentConfig) -> ZeroCountEstimate {
        ZeroCountEstimate {
            degree: self.degree,
            expected_fraction: self.expected,
            tail: TailEstimate::from_tally(self.degree, &self.tally, self.flagged, &cfg.estimator),
            ambiguous: self.ambiguous,
            mean_fraction: self.mean.mean(),
            histogram: self.histogram,
            nevanlinna: self
                .radii
                .iter()
                .zip(&self.nevanlinna)
                .map(|(&radius, acc)| NevanlinnaMean {
                    radius,
                    mean: acc.mean(),
                    std_error: acc.std_error(),
                    expected: radius * radius / (1.0 + radius * radius),
                })
                .collect(),
        }
    }
}

fn zero_count_trial(cfg: &ExperimentConfig, spec: &EnsembleSpec, t: u64) -> TrialRecord {
    let s = sample_section(spec, t);
    let result = (|| -> Result<TrialRecord> {
        let mut r = TrialRecord::empty(t, spec.degree);
        if spec.m == 1 {
            let roots = find_roots(&s)?;
            r.count = Some(count_in_domain(&roots, &cfg.domain));
            r.nevanlinna = cfg.estimator.radii.iter().map(|&radius| nevanlinna_count(&roots, radius)).collect();
        } else {
            let (lo, hi) = volume_sandwich(&s, &cfg.domain, cfg.estimator.sandwich_width, &cfg.grid(spec.degree))?;
            r.volume = Some([lo, hi]);
        }
        Ok(r)
    })();
    result.unwrap_or_else(|e| TrialRecord::flagged(t, spec.degree, &e))
}

fn zero_count_pre(cfg: &ExperimentConfig) -> Result<()> {
    match cfg.m {
        1 => Ok(()),
        2 if cfg.estimator.radii.is_empty() => Ok(()),
        2 => Err(Error::Config("estimator.radii: Nevanlinna counts need m = 1".into())),
        m => Err(Error::UnsupportedDimension { m, operation: "run_zero_count_experiment" }),
    }
}

/// Distribution of the zero-volume fraction in `U` and the tail
/// `P(|fraction − Vol(U)/Vol(CP^m)| > δ)`. For m = 1 the fraction is
/// `count/N`; for m = 2 the zero volume is bracketed by the smoothed
/// indicator sandwich.
pub fn run_zero_count_experiment(cfg: &ExperimentConfig) -> Result<ZeroCountReport> {
    zero_count_pre(cfg)?;
    let estimates = run::<ZeroCountAcc>(cfg, |spec, t| zero_count_trial(cfg, spec, t))?;
    Ok(ZeroCountReport { delta: cfg.delta, estimates })
}

pub fn summarize_zero_count(cfg: &ExperimentConfig, records: impl IntoIterator<Item = TrialRecord>) -> Result<ZeroCountReport> {
    zero_count_pre(cfg)?;
    Ok(ZeroCountReport { delta: cfg.delta, estimates: replay::<ZeroCountAcc>(cfg, records)? })
}

// ---------------------------------------------------------------- holes

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleEstimate {
    pub tail: TailEstimate,
    /// Fewer than `min_hits` holes were observed.
    pub low_hits: bool,
    pub lower_bound: Option<HoleLowerBound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleReport {
    pub estimates: Vec<HoleEstimate>,
    pub fit: Option<RateFit>,
    /// Why no fit was produced.
    pub fit_error: Option<String>,
}

struct HoleAcc {
    degree: usize,
    tally: Tally,
    flagged: u64,
}

impl Accumulator for HoleAcc {
    type Output = HoleEstimate;

    fn new(_cfg: &ExperimentConfig, degree: usize) -> Result<Self> {
        Ok(Self { degree, tally: Tally::default(), flagged: 0 })
    }

    fn push(&mut self, r: &TrialRecord) {
        match (r.flag.as_ref(), r.hole) {
            (None, Some(hole)) => self.tally.push(hole),
            _ => self.flagged += 1,
        }
    }

    fn finish(self, cfg: &ExperimentConfig) -> HoleEstimate {
        HoleEstimate {
            tail: TailEstimate::from_tally(self.degree, &self.tally, self.flagged, &cfg.estimator),
            low_hits: self.tally.hits < cfg.estimator.min_hits,
            lower_bound: hole_lower_bound(&cfg.domain, self.degree).ok(),
        }
    }
}

fn hole_trial(cfg: &ExperimentConfig, spec: &EnsembleSpec, t: u64) -> TrialRecord {
    let s = sample_section(spec, t);
    match find_roots(&s) {
        Ok(roots) => {
            let count = count_in_domain(&roots, &cfg.domain);
            TrialRecord { count: Some(count), hole: Some(count == 0), ..TrialRecord::empty(t, spec.degree) }
        }
        Err(e) => TrialRecord::flagged(t, spec.degree, &e),
    }
}

fn hole_report(cfg: &ExperimentConfig, estimates: Vec<HoleEstimate>) -> HoleReport {
    let points: Vec<RatePoint> = estimates.iter().map(|e| RatePoint::from(&e.tail)).collect();
    let (fit, fit_error) = match fit_rate(&points, cfg.m as u32 + 1) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    HoleReport { estimates, fit, fit_error }
}

/// `p̂_N = P(no zero in U)` per degree with a rate fit of `−log p̂` against
/// `N^{m+1}`. Memory does not grow with the number of trials unless records
/// are persisted.
pub fn run_hole_experiment(cfg: &ExperimentConfig) -> Result<HoleReport> {
    cfg.require_line("run_hole_experiment")?;
    let estimates = run::<HoleAcc>(cfg, |spec, t| hole_trial(cfg, spec, t))?;
    Ok(hole_report(cfg, estimates))
}

pub fn summarize_hole(cfg: &ExperimentConfig, records: impl IntoIterator<Item = TrialRecord>) -> Result<HoleReport> {
    cfg.require_line("run_hole_experiment")?;
    Ok(hole_report(cfg, replay::<HoleAcc>(cfg, records)?))
}

// ---------------------------------------------------------------- rate fits

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    #[serde(rename = "N")]
    pub degree: usize,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl From<&TailEstimate> for RatePoint {
    fn from(t: &TailEstimate) -> Self {
        Self { degree: t.degree, p_hat: t.p_hat, ci_lo: t.ci_lo, ci_hi: t.ci_hi }
    }
}

/// Least-squares line `−log p̂ ≈ slope · N^exponent + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub exponent: u32,
    pub slope: f64,
    pub slope_std_error: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Points with `p̂ > 0` that entered the fit.
    pub points: Vec<RatePoint>,
    pub exponent: u32,
    pub slope: f64,
    pub slope_std_error: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// The pure exponential fit against `N`.
    pub alternative: LinearFit,
    /// `r_squared − alternative.r_squared`.
    pub r_squared_gap: f64,
}

fn linear_fit(points: &[RatePoint], exponent: u32) -> LinearFit {
    let xs: Vec<f64> = points.iter().map(|p| (p.degree as f64).powi(exponent as i32)).collect();
    let ys: Vec<f64> = points.iter().map(|p| -p.p_hat.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    let slope_std_error = if xs.len() > 2 { (ss_res / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    LinearFit { exponent, slope, slope_std_error, intercept, r_squared }
}

/// Fits `−log p̂` against `N^exponent` and, for comparison, against `N`.
pub fn fit_rate(points: &[RatePoint], exponent: u32) -> Result<RateFit> {
    let used: Vec<RatePoint> = points.iter().copied().filter(|p| p.p_hat > 0.0 && p.p_hat.is_finite()).collect();
    let distinct = used.iter().map(|p| p.degree).collect::<std::collections::BTreeSet<_>>().len();
    if distinct < 3 {
        return Err(Error::TooFewPoints(distinct));
    }
    let main = linear_fit(&used, exponent);
    let alternative = linear_fit(&used, 1);
    Ok(RateFit {
        points: used,
        exponent,
        slope: main.slope,
        slope_std_error: main.slope_std_error,
        intercept: main.intercept,
        r_squared: main.r_squared,
        alternative,
        r_squared_gap: main.r_squared - alternative.r_squared,
    })
}

// ---------------------------------------------------------------- lower bound

/// Analytic lower bound on the hole probability of a bounded set `D ⊂ C`.
///
/// With `σ` the section `1` of `O(1)` (`|σ|_h = (1+|z|²)^{−1/2}`, no zero in
/// `C`), every section whose first orthonormal coefficient has `|c_0| > 1`
/// and whose other coefficients satisfy `|c_j| < t_N` has no zero in `D̄`.
/// Since `P(|c| > 1) = e^{−1}` and `P(|c| < t) ≥ t²/2`, the hole probability
/// is at least `e^{−1}(t_N²/2)^{d_N−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleLowerBound {
    #[serde(rename = "N")]
    pub degree: usize,
    /// `sup_D |z|`.
    pub r_far: f64,
    /// `½ log(1 + r_far²)`.
    pub a: f64,
    /// `Vol(CP^1)^{−1/2} = π^{−1/2}`.
    pub b: f64,
    /// `b e^{−aN} / (√N √d_N)`.
    pub t_n: f64,
    pub bound: f64,
    /// `log bound`, finite even when `bound` underflows.
    pub log_bound: f64,
}

pub fn hole_lower_bound(domain: &DomainSpec, degree: usize) -> Result<HoleLowerBound> {
    if domain.dim() != 1 {
        return Err(Error::UnsupportedDimension { m: domain.dim(), operation: "hole_lower_bound" });
    }
    if degree == 0 {
        return Err(Error::InvalidSpec("N must be at least 1".into()));
    }
    let r_far = domain.chart0_sup_norm()?.ok_or_else(|| {
        Error::InvalidDomain("domain contains the zero of σ at infinity; rotate the domain into a chart-0 disk".into())
    })?;
    let n = degree as f64;
    let d_n = (degree + 1) as f64;
    let a = 0.5 * (r_far * r_far).ln_1p();
    let b = 1.0 / PI.sqrt();
    let log_t = b.ln() - a * n - 0.5 * n.ln() - 0.5 * d_n.ln();
    let log_bound = -1.0 + (d_n - 1.0) * (2.0 * log_t - 2f64.ln());
    Ok(HoleLowerBound { degree, r_far, a, b, t_n: log_t.exp(), bound: log_bound.exp(), log_bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessCheck {
    pub samples: u64,
    /// Samples with no zero in the closed domain.
    pub holes: u64,
}

impl WitnessCheck {
    pub fn passed(&self) -> bool {
        self.samples > 0 && self.holes == self.samples
    }
}

/// One conditioned witness section: `|c_0| > 1`, `|c_j| < t_N` for `j ≥ 1`.
pub fn witness_section(degree: usize, t_n: f64, master_seed: u64, trial: u64) -> Result<PolySection> {
    let spec = EnsembleSpec::new(1, degree, master_seed)?;
    let mut rng = TrialRng::new(master_seed, Purpose::Witness, trial);
    let mut coeffs = Vec::with_capacity(degree + 1);
    coeffs.push(rng.complex_gaussian_outside_unit());
    for _ in 0..degree {
        coeffs.push(rng.complex_gaussian_inside(t_n));
    }
    PolySection::from_coeffs(spec, trial, coeffs)
}

/// Samples conditioned sections and checks that none has a zero in `D̄`.
///
/// `σ^{⊗N}` is the constant polynomial, so its normalization is the first
/// orthonormal basis element and the Gram–Schmidt completion with the
/// monomials is the monomial basis itself.
pub fn hole_witness(domain: &DomainSpec, degree: usize, samples: u64, master_seed: u64) -> Result<WitnessCheck> {
    let lb = hole_lower_bound(domain, degree)?;
    let holes = (0..samples)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let s = witness_section(degree, lb.t_n, master_seed, t)?;
            let roots = find_roots(&s)?;
            let inside = roots.roots.iter().filter(|p| domain.contains_closed(p)).count();
            Ok(u64::from(inside == 0))
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    Ok(WitnessCheck { samples, holes })
}

// ---------------------------------------------------------------- max modulus

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxModulusEstimate {
    /// `P(|log M|/N > δ)`.
    pub tail: TailEstimate,
    /// Trials with `M > ‖c‖ √Π_N`.
    pub bound_violations: u64,
    pub mean_scaled_log: f64,
    pub median_scaled_log: f64,
    /// `½ log Π_N`, the log of the pointwise root-mean-square.
    pub typical_log: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxModulusReport {
    pub delta: f64,
    pub estimates: Vec<MaxModulusEstimate>,
}

struct MaxAcc {
    degree: usize,
    delta: f64,
    tally: Tally,
    flagged: u64,
    violations: u64,
    mean: RunningMean,
    values: Vec<f64>,
}

impl Accumulator for MaxAcc {
    type Output = MaxModulusEstimate;

    fn new(cfg: &ExperimentConfig, degree: usize) -> Result<Self> {
        Ok(Self {
            degree,
            delta: cfg.delta,
            tally: Tally::default(),
            flagged: 0,
            violations: 0,
            mean: RunningMean::default(),
            values: vec![],
        })
    }

    fn push(&mut self, r: &TrialRecord) {
        let (Some(log_m), None) = (r.log_max_modulus, r.flag.as_ref()) else {
            self.flagged += 1;
            return;
        };
        let scaled = log_m / self.degree as f64;
        self.tally.push(scaled.abs() > self.delta);
        if r.coefficient_bound == Some(false) {
            self.violations += 1;
        }
        self.mean.push(scaled);
        self.values.push(scaled);
    }

    fn finish(mut self, cfg: &ExperimentConfig) -> MaxModulusEstimate {
        self.values.sort_by(f64::total_cmp);
        let k = self.values.len();
        let median = match k {
            0 => f64::NAN,
            _ if k % 2 == 1 => self.values[k / 2],
            _ => 0.5 * (self.values[k / 2 - 1] + self.values[k / 2]),
        };
        MaxModulusEstimate {
            tail: TailEstimate::from_tally(self.degree, &self.tally, self.flagged, &cfg.estimator),
            bound_violations: self.violations,
            mean_scaled_log: self.mean.mean(),
            median_scaled_log: median,
            typical_log: 0.5 * szego_diagonal(cfg.m, self.degree).ln(),
        }
    }
}

fn max_modulus_trial(cfg: &ExperimentConfig, spec: &EnsembleSpec, t: u64) -> TrialRecord {
    let s = sample_section(spec, t);
    match max_modulus(&s, &cfg.domain, cfg.estimator.max_levels) {
        Ok(value) => {
            // M = γ·value and ‖c‖√Π_N = γ‖c‖
            let bound_ok = value <= s.coeff_norm() * (1.0 + 1e-12);
            TrialRecord {
                log_max_modulus: Some(value.ln() + spec.gamma().ln()),
                coefficient_bound: Some(bound_ok),
                ..TrialRecord::empty(t, spec.degree)
            }
        }
        Err(e) => TrialRecord::flagged(t, spec.degree, &e),
    }
}

/// Distribution of `(1/N) log M^U_N` with `M^U_N = sup_U |s|_h`, the tail
/// `P(|log M|/N > δ)` and a per-trial check of `M ≤ ‖c‖ √Π_N`.
pub fn run_max_modulus_experiment(cfg: &ExperimentConfig) -> Result<MaxModulusReport> {
    cfg.require_line("run_max_modulus_experiment")?;
    let estimates = run::<MaxAcc>(cfg, |spec, t| max_modulus_trial(cfg, spec, t))?;
    Ok(MaxModulusReport { delta: cfg.delta, estimates })
}

pub fn summarize_max_modulus(cfg: &ExperimentConfig, records: impl IntoIterator<Item = TrialRecord>) -> Result<MaxModulusReport> {
    cfg.require_line("run_max_modulus_experiment")?;
    Ok(MaxModulusReport { delta: cfg.delta, estimates: replay::<MaxAcc>(cfg, records)? })
}

// ---------------------------------------------------------------- L¹ log

/// `Ein(x) = ∫_0^x (1 − e^{−t})/t dt`.
fn ein(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut k = 1.0;
    while term.abs() > 1e-17 * sum.abs() && k < 500.0 {
        term *= -x * k / ((k + 1.0) * (k + 1.0));
        sum += term;
        k += 1.0;
    }
    sum
}

/// `E ∫_{CP^1} |log|s|_h| dVol` for the degree-`N` ensemble.
///
/// `|s(z)|_h² = Π_N E` with `E ~ Exp(1)` at every point, so the expectation
/// is `(π/2) E|L + log E|` with `L = log Π_N`, which equals
/// `(π/2)(L − γ + 2 Ein(e^{−L}))`.
pub fn expected_l1_log(degree: usize) -> f64 {
    let l = szego_diagonal(1, degree).ln();
    0.5 * PI * (l - EULER_GAMMA + 2.0 * ein((-l).exp()))
}

/// The coarser prediction `(π/2)(log Π_N + γ)`.
pub fn l1_log_prediction(degree: usize) -> f64 {
    0.5 * PI * (szego_diagonal(1, degree).ln() + EULER_GAMMA)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1LogEstimate {
    /// `P(∫|log|s|_h| ≥ δN)`.
    pub tail: TailEstimate,
    pub mean: f64,
    pub std_error: f64,
    pub expected: f64,
    pub prediction: f64,
    /// Trials with `∫|log| < |∫log|` beyond quadrature error.
    pub violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1LogReport {
    pub delta: f64,
    pub estimates: Vec<L1LogEstimate>,
}

impl L1LogReport {
    /// Ratio of sample means between two degrees of the run.
    pub fn mean_ratio(&self, numerator: usize, denominator: usize) -> Option<f64> {
        let find = |n: usize| self.estimates.iter().find(|e| e.tail.degree == n).map(|e| e.mean);
        Some(find(numerator)? / find(denominator)?)
    }
}

struct L1Acc {
    degree: usize,
    delta: f64,
    tally: Tally,
    flagged: u64,
    violations: u64,
    mean: RunningMean,
}

impl Accumulator for L1Acc {
    type Output = L1LogEstimate;

    fn new(cfg: &ExperimentConfig, degree: usize) -> Result<Self> {
        Ok(Self { degree, delta: cfg.delta, tally: Tally::default(), flagged: 0, violations: 0, mean: RunningMean::default() })
    }

    fn push(&mut self, r: &TrialRecord) {
        let (Some(abs), Some(signed), None) = (r.l1_log, r.signed_log, r.flag.as_ref()) else {
            self.flagged += 1;
            return;
        };
        self.tally.push(abs >= self.delta * self.degree as f64);
        if abs < signed.abs() * (1.0 - 1e-9) {
            self.violations += 1;
        }
        self.mean.push(abs);
    }

    fn finish(self, cfg: &ExperimentConfig) -> L1LogEstimate {
        L1LogEstimate {
            tail: TailEstimate::from_tally(self.degree, &self.tally, self.flagged, &cfg.estimator),
            mean: self.mean.mean(),
            std_error: self.mean.std_error(),
            expected: expected_l1_log(self.degree),
            prediction: l1_log_prediction(self.degree),
            violations: self.violations,
        }
    }
}

fn l1_trial(cfg: &ExperimentConfig, spec: &EnsembleSpec, t: u64) -> TrialRecord {
    let s = sample_section(spec, t);
    match integrate_log_modulus(&s, &cfg.grid(spec.degree), LogNormalization::Orthonormal) {
        Ok(v) => TrialRecord {
            l1_log: Some(v.absolute.estimate),
            signed_log: Some(v.signed.estimate),
            ..TrialRecord::empty(t, spec.degree)
        },
        Err(e) => TrialRecord::flagged(t, spec.degree, &e),
    }
}

/// Per-trial `∫|log|s|_h| dVol` in the orthonormal normalization and the
/// tail `P(∫|log|s|_h| ≥ δN)`.
pub fn run_l1_log_experiment(cfg: &ExperimentConfig) -> Result<L1LogReport> {
    cfg.require_line("run_l1_log_experiment")?;
    let estimates = run::<L1Acc>(cfg, |spec, t| l1_trial(cfg, spec, t))?;
    Ok(L1LogReport { delta: cfg.delta, estimates })
}

pub fn summarize_l1_log(cfg: &ExperimentConfig, records: impl IntoIterator<Item = TrialRecord>) -> Result<L1LogReport> {
    cfg.require_line("run_l1_log_experiment")?;
    Ok(L1LogReport { delta: cfg.delta, estimates: replay::<L1Acc>(cfg, records)? })
}
