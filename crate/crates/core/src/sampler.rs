//! Single-site MCMC sweeps and the inverse-temperature schedule driver.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmrf::{lcdf_log_density_from_sum, ModelParams};
use crate::infogeo::analyze;
use crate::lattice::{neighbor_indices, Configuration, MOORE_SUPPORT};
use crate::rng::{stream_rng, STREAM_CHAIN};
use crate::scalar::{entry_sum, Scalar};
use crate::trajectory::TrajectoryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    Up,
    Down,
    UpThenDown,
}

impl std::str::FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "up" => Ok(Self::Up),
            "down" => Ok(Self::Down),
            "up-then-down" => Ok(Self::UpThenDown),
            other => Err(Error::InvalidParameter(format!(
                "unknown schedule mode {other:?} (expected up, down or up-then-down)"
            ))),
        }
    }
}

impl std::fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Up => "up",
            Self::Down => "down",
            Self::UpThenDown => "up-then-down",
        })
    }
}

/// Direction of β along a schedule leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Leg {
    /// β increasing.
    Forward,
    /// β decreasing.
    Backward,
}

impl Leg {
    pub fn as_str(self) -> &'static str {
        match self {
            Leg::Forward => "forward",
            Leg::Backward => "backward",
        }
    }
}

impl std::str::FromStr for Leg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Leg::Forward),
            "backward" => Ok(Leg::Backward),
            other => Err(Error::InvalidInput(format!("unknown leg {other:?}"))),
        }
    }
}

impl std::fmt::Display for Leg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Linear β schedule.
///
/// A leg has `N = round((beta_max − beta_min) / delta_beta)` steps unless
/// overridden. The forward leg visits `beta_min + k·h` and the backward leg
/// `beta_max − k·h` for `k = 1..=N`, with `h = (beta_max − beta_min) / N`.
/// A zero-width range without an override has one step per leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule<F> {
    pub beta_min: F,
    pub beta_max: F,
    pub delta_beta: F,
    pub mode: ScheduleMode,
    pub steps_per_leg: Option<usize>,
}

impl<F: Scalar> Schedule<F> {
    pub fn new(beta_min: F, beta_max: F, delta_beta: F, mode: ScheduleMode) -> Result<Self> {
        let s = Self {
            beta_min,
            beta_max,
            delta_beta,
            mode,
            steps_per_leg: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// Fix the number of steps per leg regardless of `delta_beta`.
    pub fn with_steps_per_leg(mut self, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter("steps per leg must be positive".into()));
        }
        self.steps_per_leg = Some(steps);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta_min.is_finite() || !self.beta_max.is_finite() {
            return Err(Error::InvalidParameter("beta bounds must be finite".into()));
        }
        if self.beta_min > self.beta_max {
            return Err(Error::InvalidParameter(format!(
                "beta_min {} exceeds beta_max {}",
                self.beta_min, self.beta_max
            )));
        }
        if !(self.delta_beta > F::zero()) || !self.delta_beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta_beta must be positive, got {}",
                self.delta_beta
            )));
        }
        if self.steps_per_leg == Some(0) {
            return Err(Error::InvalidParameter("steps per leg must be positive".into()));
        }
        Ok(())
    }

    pub fn steps_per_leg(&self) -> usize {
        if let Some(n) = self.steps_per_leg {
            return n;
        }
        let n = ((self.beta_max - self.beta_min) / self.delta_beta)
            .round()
            .to_usize()
            .unwrap_or(0);
        n.max(1)
    }

    pub fn len(&self) -> usize {
        match self.mode {
            ScheduleMode::UpThenDown => 2 * self.steps_per_leg(),
            _ => self.steps_per_leg(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The set β of every step, tagged with its leg.
    pub fn steps(&self) -> Vec<(F, Leg)> {
        let n = self.steps_per_leg();
        let h = (self.beta_max - self.beta_min) / F::from_count(n);
        let up = (1..=n).map(|k| (self.beta_min + F::from_count(k) * h, Leg::Forward));
        let down = (1..=n).map(|k| (self.beta_max - F::from_count(k) * h, Leg::Backward));
        match self.mode {
            ScheduleMode::Up => up.collect(),
            ScheduleMode::Down => down.collect(),
            ScheduleMode::UpThenDown => up.chain(down).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Metropolis,
    Gibbs,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "metropolis" => Ok(Self::Metropolis),
            "gibbs" => Ok(Self::Gibbs),
            other => Err(Error::InvalidParameter(format!(
                "unknown sampler {other:?} (expected metropolis or gibbs)"
            ))),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Metropolis => "metropolis",
            Self::Gibbs => "gibbs",
        })
    }
}

/// LCDF ratio p(x_new | η) / p(x_old | η).
pub fn acceptance_ratio<F: Scalar>(
    x_old: F,
    x_new: F,
    neighbor_values: &[F; MOORE_SUPPORT],
    params: &ModelParams<F>,
) -> F {
    let sum = entry_sum(neighbor_values);
    (lcdf_log_density_from_sum(x_new, sum, params) - lcdf_log_density_from_sum(x_old, sum, params)).exp()
}

/// Symmetric increment distribution for Metropolis moves.
pub trait Proposal<F> {
    fn increment<R: Rng + ?Sized>(&mut self, rng: &mut R) -> F;
}

/// Gaussian random walk with standard deviation `std`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomWalk<F> {
    pub std: F,
}

impl<F: Scalar> RandomWalk<F> {
    pub fn new(std: F) -> Result<Self> {
        if !(std > F::zero()) || !std.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "proposal std must be positive, got {std}"
            )));
        }
        Ok(Self { std })
    }
}

impl<F: Scalar> Proposal<F> for RandomWalk<F> {
    #[inline]
    fn increment<R: Rng + ?Sized>(&mut self, rng: &mut R) -> F {
        self.std * F::standard_normal(rng)
    }
}

/// One Metropolis-Hastings sweep in row-major order with a Gaussian random
/// walk. Returns the fraction of accepted moves.
pub fn metropolis_sweep<F: Scalar, R: Rng + ?Sized>(
    config: &mut Configuration<F>,
    params: &ModelParams<F>,
    proposal_std: F,
    rng: &mut R,
) -> Result<F> {
    let mut walk = RandomWalk::new(proposal_std)?;
    Ok(metropolis_sweep_with(config, params, &mut walk, rng))
}

/// Metropolis sweep with an arbitrary symmetric proposal. Each site draws one
/// increment and one uniform, accepted or not.
pub fn metropolis_sweep_with<F: Scalar, P: Proposal<F>, R: Rng + ?Sized>(
    config: &mut Configuration<F>,
    params: &ModelParams<F>,
    proposal: &mut P,
    rng: &mut R,
) -> F {
    let (rows, cols) = (config.rows(), config.cols());
    let cells = config.cells_mut();
    let mut accepted = 0usize;
    for row in 0..rows {
        for col in 0..cols {
            let i = row * cols + col;
            let sum = neighbor_indices(rows, cols, row, col)
                .iter()
                .fold(F::zero(), |acc, &k| acc + cells[k]);
            let x = cells[i];
            let candidate = x + proposal.increment(rng);
            let u = F::unit_uniform(rng);
            let log_p = lcdf_log_density_from_sum(candidate, sum, params) - lcdf_log_density_from_sum(x, sum, params);
            if u < log_p.exp() {
                cells[i] = candidate;
                accepted += 1;
            }
        }
    }
    F::from_count(accepted) / F::from_count(rows * cols)
}

/// One Gibbs sweep in row-major order: each site is redrawn from its LCDF
/// given the current neighbours.
pub fn gibbs_sweep<F: Scalar, R: Rng + ?Sized>(config: &mut Configuration<F>, params: &ModelParams<F>, rng: &mut R) {
    let (rows, cols) = (config.rows(), config.cols());
    let sd = params.sigma2.sqrt();
    let cells = config.cells_mut();
    for row in 0..rows {
        for col in 0..cols {
            let sum = neighbor_indices(rows, cols, row, col)
                .iter()
                .fold(F::zero(), |acc, &k| acc + cells[k]);
            cells[row * cols + col] = params.conditional_mean(sum) + sd * F::standard_normal(rng);
        }
    }
}

/// Sampler configuration for [`run_schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings<F> {
    pub sampler: SamplerKind,
    /// Random-walk standard deviation; `None` uses √σ² of the current step.
    pub proposal_std: Option<F>,
    pub sweeps_per_step: usize,
    pub seed: u64,
}

impl<F: Scalar> RunSettings<F> {
    pub fn new(sampler: SamplerKind, seed: u64) -> Self {
        Self {
            sampler,
            proposal_std: None,
            sweeps_per_step: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps_per_step == 0 {
            return Err(Error::InvalidParameter("sweeps per step must be positive".into()));
        }
        if let Some(std) = self.proposal_std {
            RandomWalk::new(std)?;
        }
        Ok(())
    }
}

/// Run the schedule and return one record per step.
pub fn run_schedule<F: Scalar>(
    schedule: &Schedule<F>,
    initial: Configuration<F>,
    params: ModelParams<F>,
    settings: &RunSettings<F>,
) -> Result<Vec<TrajectoryRecord<F>>> {
    run_schedule_with(schedule, initial, params, settings, |_, _| Ok(()))
}

/// [`run_schedule`] with a hook called after every step with the new record
/// and the configuration it was estimated from.
///
/// At each step β is set to the schedule value, the sampler runs with the
/// latest (μ̂, σ̂²), and the snapshot is re-estimated. Degenerate snapshots
/// yield flagged records and leave (μ, σ²) at their previous values.
pub fn run_schedule_with<F, H>(
    schedule: &Schedule<F>,
    initial: Configuration<F>,
    params: ModelParams<F>,
    settings: &RunSettings<F>,
    mut on_step: H,
) -> Result<Vec<TrajectoryRecord<F>>>
where
    F: Scalar,
    H: FnMut(&TrajectoryRecord<F>, &Configuration<F>) -> Result<()>,
{
    schedule.validate()?;
    params.validate()?;
    settings.validate()?;
    if params.delta != MOORE_SUPPORT {
        return Err(Error::InvalidParameter(format!(
            "the lattice sampler uses the Moore neighbourhood, got delta = {}",
            params.delta
        )));
    }
    let mut rng = stream_rng(settings.seed, STREAM_CHAIN);
    let mut config = initial;
    let mut current = params;
    let steps = schedule.steps();
    let mut records = Vec::with_capacity(steps.len());
    for (k, (beta, leg)) in steps.into_iter().enumerate() {
        current.beta = beta;
        let mut acceptance = F::zero();
        for _ in 0..settings.sweeps_per_step {
            match settings.sampler {
                SamplerKind::Metropolis => {
                    let std = settings.proposal_std.unwrap_or_else(|| current.sigma2.sqrt());
                    let mut walk = RandomWalk { std };
                    acceptance = acceptance + metropolis_sweep_with(&mut config, &current, &mut walk, &mut rng);
                }
                SamplerKind::Gibbs => {
                    gibbs_sweep(&mut config, &current, &mut rng);
                    acceptance = acceptance + F::one();
                }
            }
        }
        acceptance = acceptance / F::from_count(settings.sweeps_per_step);
        let analysis = analyze(&config, MOORE_SUPPORT)?;
        let record = TrajectoryRecord::from_analysis(k + 1, leg, beta, acceptance, &analysis);
        if let Some(est) = analysis.estimate {
            current.mu = est.params.mu;
            current.sigma2 = est.params.sigma2;
        }
        on_step(&record, &config)?;
        records.push(record);
    }
    Ok(records)
}
