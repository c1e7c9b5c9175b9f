//! Run configuration files (JSON or TOML).

use serde::{Deserialize, Serialize};
use std::path::Path;
use zerolab::deviations::{EstimatorOptions, ExperimentConfig};
use zerolab::domain::DomainSpec;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed shared by all experiments unless an entry sets its own.
    pub seed: u64,
    /// Output directory; relative paths are resolved against the config file.
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    ZeroCount(MonteCarlo),
    Hole(MonteCarlo),
    MaxModulus(MonteCarlo),
    L1Log(MonteCarlo),
    KernelSuite(KernelSuite),
    PlCheck(PlCheck),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::ZeroCount(_) => "zero-count",
            Experiment::Hole(_) => "hole",
            Experiment::MaxModulus(_) => "max-modulus",
            Experiment::L1Log(_) => "l1-log",
            Experiment::KernelSuite(_) => "kernel-suite",
            Experiment::PlCheck(_) => "pl-check",
        }
    }

    pub fn name(&self, index: usize) -> String {
        let given = match self {
            Experiment::ZeroCount(e) | Experiment::Hole(e) | Experiment::MaxModulus(e) | Experiment::L1Log(e) => &e.name,
            Experiment::KernelSuite(e) => &e.name,
            Experiment::PlCheck(e) => &e.name,
        };
        given.clone().unwrap_or_else(|| format!("{:02}-{}", index, self.kind()))
    }
}

/// Monte Carlo experiment entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarlo {
    #[serde(default)]
    pub name: Option<String>,
    pub m: usize,
    pub degrees: Vec<usize>,
    pub domain: DomainSpec,
    pub trials: u64,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub estimator: EstimatorOptions,
    /// Persist per-trial JSONL records.
    #[serde(default = "yes")]
    pub records: bool,
}

fn yes() -> bool {
    true
}

impl MonteCarlo {
    pub fn experiment_config(&self, seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(self.m, self.degrees.clone(), self.seed.unwrap_or(seed), self.domain.clone(), self.trials);
        if let Some(delta) = self.delta {
            cfg.delta = delta;
        }
        cfg.estimator = self.estimator.clone();
        cfg
    }
}

/// Kernel decay curves and lattice diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSuite {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "one")]
    pub m: usize,
    pub degrees: Vec<usize>,
    /// Distances sampled per curve.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub lattice: Option<LatticeParams>,
}

fn one() -> usize {
    1
}

fn default_samples() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeParams {
    pub t: f64,
    pub a: f64,
    #[serde(rename = "N")]
    pub degree: usize,
}

/// Poincaré–Lelong statistic against the direct sum over zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlCheck {
    #[serde(default)]
    pub name: Option<String>,
    pub degrees: Vec<usize>,
    pub sections: u64,
    pub domain: DomainSpec,
    pub width: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Allowed difference per unit degree.
    #[serde(default = "default_pl_tolerance")]
    pub tolerance: f64,
}

fn default_pl_tolerance() -> f64 {
    1e-3
}

fn parse_error(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

impl RunConfig {
    /// Parses JSON (`.json`) or TOML (anything else), reporting schema
    /// violations with their field path.
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg: RunConfig = if is_json {
            let de = &mut serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(de).map_err(|e| parse_error(format!("{}: {}", e.path(), e.inner())))?
        } else {
            let de = toml::Deserializer::parse(text).map_err(parse_error)?;
            serde_path_to_error::deserialize(de).map_err(|e| parse_error(format!("{}: {}", e.path(), e.inner())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut names = std::collections::BTreeSet::new();
        for (i, e) in self.experiments.iter().enumerate() {
            let at = |msg: String| CliError::Validation(format!("experiments[{i}].{msg}"));
            if !names.insert(e.name(i)) {
                return Err(at(format!("name: duplicate experiment name {:?}", e.name(i))));
            }
            match e {
                Experiment::ZeroCount(mc) | Experiment::Hole(mc) | Experiment::MaxModulus(mc) | Experiment::L1Log(mc) => {
                    mc.experiment_config(self.seed).validate().map_err(|e| at(strip_config_prefix(e)))?;
                }
                Experiment::KernelSuite(k) => {
                    if k.degrees.is_empty() || k.degrees.contains(&0) {
                        return Err(at("degrees: need at least one positive degree".into()));
                    }
                    if k.m == 0 {
                        return Err(at("m: must be at least 1".into()));
                    }
                    if k.samples < 2 {
                        return Err(at("samples: need at least 2".into()));
                    }
                }
                Experiment::PlCheck(p) => {
                    if p.degrees.is_empty() || p.degrees.contains(&0) {
                        return Err(at("degrees: need at least one positive degree".into()));
                    }
                    if p.sections == 0 {
                        return Err(at("sections: must be positive".into()));
                    }
                    p.domain.validate().map_err(|e| at(format!("domain: {e}")))?;
                    if p.domain.dim() != 1 {
                        return Err(at("domain: pl-check runs on CP^1".into()));
                    }
                    if p.width.is_nan() || p.width <= 0.0 {
                        return Err(at("width: must be positive".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies a seed override to the run and every experiment.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        for e in &mut self.experiments {
            match e {
                Experiment::ZeroCount(mc) | Experiment::Hole(mc) | Experiment::MaxModulus(mc) | Experiment::L1Log(mc) => {
                    mc.seed = None
                }
                Experiment::PlCheck(p) => p.seed = None,
                Experiment::KernelSuite(_) => {}
            }
        }
    }

    /// Sets the worker thread count of every Monte Carlo experiment.
    pub fn set_threads(&mut self, threads: usize) {
        for e in &mut self.experiments {
            if let Experiment::ZeroCount(mc) | Experiment::Hole(mc) | Experiment::MaxModulus(mc) | Experiment::L1Log(mc) = e {
                mc.estimator.threads = Some(threads);
            }
        }
    }
}

fn strip_config_prefix(e: zerolab::Error) -> String {
    match e {
        zerolab::Error::Config(msg) => msg,
        other => other.to_string(),
    }
}
