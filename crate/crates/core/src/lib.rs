//! Simulation and information-geometric analysis of isotropic pairwise
//! Gaussian-Markov random fields on a toroidal lattice with the eight-cell
//! Moore neighbourhood.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which the CLI and the test suites use.

pub mod curve;
pub mod error;
pub mod gmrf;
pub mod infogeo;
pub mod lattice;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod trajectory;

pub use curve::{build_fisher_curve, export_curve, hysteresis_gap, parse_curve, CurveFormat, CurvePoint};
pub use error::{Error, Result};
pub use gmrf::{log_pseudo_likelihood, ModelParams};
pub use infogeo::{
    analyze, asymptotic_variance, entropy, mpl_beta, patch_covariance, tensor_g1, tensor_g2, Component,
    FisherTensor, PatchStats, SnapshotAnalysis, TensorKind,
};
pub use lattice::{Configuration, Patch, SiteIndex, Snapshot};
pub use sampler::{run_schedule, run_schedule_with, Leg, RunSettings, SamplerKind, Schedule, ScheduleMode};
pub use scalar::Scalar;
pub use trajectory::{read_trajectory_csv, write_trajectory_csv, TrajectoryRecord};

pub type Configuration64 = Configuration<f64>;
pub type Snapshot64 = Snapshot<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type PatchStats64 = PatchStats<f64>;
pub type FisherTensor64 = FisherTensor<f64>;
pub type Schedule64 = Schedule<f64>;
pub type RunSettings64 = RunSettings<f64>;
pub type TrajectoryRecord64 = TrajectoryRecord<f64>;
pub type FisherCurve64 = curve::FisherCurve<f64>;
