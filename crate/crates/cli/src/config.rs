//! Experiment records: flags layered over an optional JSON file, validated
//! before any command runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cyclefv::{Configuration, ModelParams, Params, Prob};

use crate::{CliError, CliResult, CovarianceArgs, DynamicsArgs, ModelArgs, SimulateArgs, SpectrumArgs, VerifyArgs};

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<u64>,
    pub theta: Option<f64>,
    pub p: Option<f64>,
    pub t_end: Option<f64>,
    pub steps: Option<usize>,
    pub replicas: Option<usize>,
    pub seed: Option<u64>,
    pub init: Option<Vec<u64>>,
    pub mu: Option<Vec<f64>>,
    pub burn_in: Option<f64>,
    pub stationary: Option<bool>,
    pub checked: Option<bool>,
    pub only: Option<Vec<String>>,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }
}

/// Fully resolved parameters of one command.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: Params,
    pub n: Option<u64>,
    pub t_end: f64,
    pub steps: usize,
    pub replicas: usize,
    pub seed: u64,
    pub init: Option<Configuration>,
    pub mu: Option<Prob>,
    pub stationary: bool,
    pub burn_in: Option<f64>,
    pub checked: bool,
    pub only: Option<Vec<String>>,
    pub theta_mismatch: f64,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn required<T>(v: Option<T>, name: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing required argument --{name}")))
}

fn model(args: &ModelArgs, file: &FileConfig, default_k: Option<usize>) -> CliResult<Params> {
    let k = required(pick(args.k, file.k).or(default_k), "K")?;
    let theta = pick(args.theta, file.theta).unwrap_or(1.0);
    let p = pick(args.p, file.p).unwrap_or(1.0);
    Ok(ModelParams::new(k, theta, p)?)
}

fn particles(flag: Option<u64>, file: &FileConfig) -> CliResult<u64> {
    let n = required(pick(flag, file.n), "N")?;
    if n < 2 {
        return Err(CliError::Usage(format!("--N must be at least 2, got {n}")));
    }
    Ok(n)
}

fn start(params: &Params, n: u64, init: Option<Vec<u64>>) -> CliResult<Configuration> {
    let cfg = match init {
        Some(counts) => Configuration::new(counts)?,
        None => Configuration::concentrated(params.k(), n, 0)?,
    };
    if cfg.k() != params.k() || cfg.n() != n {
        return Err(CliError::Usage(format!(
            "--init has {} sites and {} particles, expected {} and {n}",
            cfg.k(),
            cfg.n(),
            params.k()
        )));
    }
    Ok(cfg)
}

fn positive_time(t: f64, name: &str) -> CliResult<f64> {
    if t.is_finite() && t > 0.0 {
        Ok(t)
    } else {
        Err(CliError::Usage(format!("--{name} must be positive, got {t}")))
    }
}

impl ExperimentConfig {
    fn base(params: Params) -> Self {
        Self {
            params,
            n: None,
            t_end: 0.0,
            steps: 0,
            replicas: 0,
            seed: 0,
            init: None,
            mu: None,
            stationary: false,
            burn_in: None,
            checked: false,
            only: None,
            theta_mismatch: 0.0,
            output: None,
            summary: None,
        }
    }

    pub fn for_spectrum(a: &SpectrumArgs, file: &FileConfig) -> CliResult<Self> {
        let mut c = Self::base(model(&a.model, file, None)?);
        c.output = pick(a.out.output.clone(), file.output.clone());
        c.summary = pick(a.out.summary.clone(), file.summary.clone());
        Ok(c)
    }

    pub fn for_covariance(a: &CovarianceArgs, file: &FileConfig) -> CliResult<Self> {
        let mut c = Self::base(model(&a.model, file, None)?);
        c.n = Some(particles(a.n, file)?);
        c.checked = a.checked || file.checked.unwrap_or(false);
        c.output = pick(a.out.output.clone(), file.output.clone());
        c.summary = pick(a.out.summary.clone(), file.summary.clone());
        Ok(c)
    }

    pub fn for_simulate(a: &SimulateArgs, file: &FileConfig) -> CliResult<Self> {
        let mut c = Self::base(model(&a.model, file, None)?);
        let n = particles(a.n, file)?;
        c.n = Some(n);
        c.t_end = positive_time(required(pick(a.t_end, file.t_end), "t-end")?, "t-end")?;
        c.steps = pick(a.steps, file.steps).unwrap_or(10);
        c.replicas = pick(a.replicas, file.replicas).unwrap_or(1);
        if c.replicas == 0 {
            return Err(CliError::Usage("--replicas must be at least 1".into()));
        }
        if c.steps == 0 {
            return Err(CliError::Usage("--steps must be at least 1".into()));
        }
        c.seed = pick(a.seed, file.seed).unwrap_or(0);
        c.init = Some(start(&c.params, n, pick(a.init.clone(), file.init.clone()))?);
        c.stationary = a.stationary || file.stationary.unwrap_or(false);
        c.burn_in = pick(a.burn_in, file.burn_in);
        if let Some(b) = c.burn_in {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(CliError::Usage(format!("--burn-in must be nonnegative, got {b}")));
            }
        }
        c.checked = a.checked || file.checked.unwrap_or(false);
        c.output = pick(a.out.output.clone(), file.output.clone());
        c.summary = pick(a.out.summary.clone(), file.summary.clone());
        Ok(c)
    }

    pub fn for_dynamics(a: &DynamicsArgs, file: &FileConfig) -> CliResult<Self> {
        let mut c = Self::base(model(&a.model, file, None)?);
        let n = particles(a.n, file)?;
        c.n = Some(n);
        c.t_end = positive_time(pick(a.t_end, file.t_end).unwrap_or(5.0), "t-end")?;
        c.steps = pick(a.steps, file.steps).unwrap_or(20);
        if c.steps == 0 {
            return Err(CliError::Usage("--steps must be at least 1".into()));
        }
        c.init = Some(start(&c.params, n, pick(a.init.clone(), file.init.clone()))?);
        let mu = match pick(a.mu.clone(), file.mu.clone()) {
            Some(w) => Prob::new(w)?,
            None => Prob::dirac(c.params.k(), 0),
        };
        if mu.len() != c.params.k() {
            return Err(CliError::Usage(format!("--mu has {} entries, expected {}", mu.len(), c.params.k())));
        }
        c.mu = Some(mu);
        c.output = pick(a.out.output.clone(), file.output.clone());
        c.summary = pick(a.out.summary.clone(), file.summary.clone());
        Ok(c)
    }

    pub fn for_verify(a: &VerifyArgs, file: &FileConfig) -> CliResult<Self> {
        let mut c = Self::base(model(&a.model, file, Some(4))?);
        c.n = Some(pick(a.n, file.n).unwrap_or(3));
        if c.n < Some(2) {
            return Err(CliError::Usage("--N must be at least 2".into()));
        }
        c.seed = pick(a.seed, file.seed).unwrap_or(1);
        c.replicas = pick(a.replicas, file.replicas).unwrap_or(2_000);
        if c.replicas < 2 {
            return Err(CliError::Usage("--replicas must be at least 2".into()));
        }
        c.only = pick(a.only.clone(), file.only.clone());
        c.theta_mismatch = a.inject_theta_mismatch.unwrap_or(0.0);
        c.output = pick(a.output.clone(), file.output.clone());
        Ok(c)
    }

    /// Sampling grid `i t_end / steps`, `i = 0..=steps`.
    pub fn grid(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.t_end * i as f64 / self.steps as f64).collect()
    }

    pub fn particles(&self) -> u64 {
        self.n.expect("command without N")
    }
}
