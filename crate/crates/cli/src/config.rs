use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use gmrf_infogeo::{ModelParams, RunSettings, SamplerKind, Schedule, ScheduleMode};
use serde::Serialize;

/// Every setting of a `simulate` run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub rows: usize,
    pub cols: usize,
    pub mu0: f64,
    pub sigma2_0: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub delta_beta: f64,
    pub steps_per_leg: Option<usize>,
    pub mode: ScheduleMode,
    pub sampler: SamplerKind,
    pub proposal_std: Option<f64>,
    pub sweeps_per_step: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dump_snapshots: bool,
    pub replicas: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rows: 128,
            cols: 128,
            mu0: 0.0,
            sigma2_0: 5.0,
            beta_min: 0.0,
            beta_max: 0.5,
            delta_beta: 0.005,
            steps_per_leg: None,
            mode: ScheduleMode::UpThenDown,
            sampler: SamplerKind::Metropolis,
            proposal_std: None,
            sweeps_per_step: 1,
            seed: 0,
            out_dir: PathBuf::from("run"),
            dump_snapshots: false,
            replicas: 1,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| anyhow!("invalid value {value:?} for {key}: {e}"))
}

impl RunConfig {
    /// Apply one `key = value` setting. Keys use the flag spelling, with
    /// either dashes or underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().replace('_', "-").as_str() {
            "rows" => self.rows = parse_value(key, value)?,
            "cols" => self.cols = parse_value(key, value)?,
            "mu0" => self.mu0 = parse_value(key, value)?,
            "sigma2" | "sigma2-0" => self.sigma2_0 = parse_value(key, value)?,
            "beta-min" => self.beta_min = parse_value(key, value)?,
            "beta-max" => self.beta_max = parse_value(key, value)?,
            "delta-beta" => self.delta_beta = parse_value(key, value)?,
            "steps-per-leg" => self.steps_per_leg = Some(parse_value(key, value)?),
            "mode" => self.mode = parse_value(key, value)?,
            "sampler" => self.sampler = parse_value(key, value)?,
            "proposal-std" => self.proposal_std = Some(parse_value(key, value)?),
            "sweeps-per-step" => self.sweeps_per_step = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "out" | "out-dir" => self.out_dir = PathBuf::from(value),
            "dump-snapshots" => self.dump_snapshots = parse_value(key, value)?,
            "replicas" => self.replicas = parse_value(key, value)?,
            other => bail!("unknown setting {other:?}"),
        }
        Ok(())
    }

    /// Read `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key = value", path.display(), n + 1))?;
            self.set(key, value)
                .with_context(|| format!("{}:{}", path.display(), n + 1))?;
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<Schedule<f64>> {
        let mut s = Schedule::new(self.beta_min, self.beta_max, self.delta_beta, self.mode)?;
        if let Some(n) = self.steps_per_leg {
            s = s.with_steps_per_leg(n)?;
        }
        Ok(s)
    }

    pub fn params(&self) -> Result<ModelParams<f64>> {
        Ok(ModelParams::moore(self.mu0, self.sigma2_0, self.beta_min)?)
    }

    pub fn settings(&self, seed: u64) -> Result<RunSettings<f64>> {
        let settings = RunSettings {
            sampler: self.sampler,
            proposal_std: self.proposal_std,
            sweeps_per_step: self.sweeps_per_step,
            seed,
        };
        settings.validate()?;
        Ok(settings)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 3 || self.cols < 3 {
            bail!("lattice must be at least 3x3, got {}x{}", self.rows, self.cols);
        }
        if self.replicas == 0 {
            bail!("replicas must be positive");
        }
        self.schedule()?;
        self.params()?;
        self.settings(self.seed)?;
        Ok(())
    }
}
