//! Antenna impedance estimation from multi-packet training in temporally
//! correlated Rayleigh fading.
//!
//! The receiver front-end switches halfway through each packet's training
//! sequence, so the second half of the packet sees the channel scaled by an
//! unknown complex factor `F`. Given `L` packets whose channels are
//! correlated across time through a known matrix `C_H`, this crate estimates
//! `F` and the channel power `σ_h²`:
//!
//! * [`estimators::estimate_ml`]: the maximum-likelihood estimator, which
//!   reduces to a scalar search over `μ = σ_h²(1 + |F|²)`;
//! * [`estimators::estimate_mm`]: the closed-form estimator that is exact ML
//!   for i.i.d. fading and a cheap baseline otherwise;
//! * [`crb`]: Fisher information and the Cramér-Rao bound;
//! * [`montecarlo`]: a seeded, thread-count-invariant RMSE harness.

pub mod channel;
pub mod crb;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod montecarlo;
pub mod rng;
pub mod signal;

pub use num_complex::Complex64;

pub use channel::{ChannelDraw, CorrelationSpec, Fading};
pub use crb::FimResult;
pub use error::{Error, Result};
pub use estimators::{EstimateStatus, MlOptions, ThetaEstimate};
pub use linalg::{ComplexMat, HermEig};
pub use montecarlo::{Experiment, ExperimentConfig, SweepPoint, SweepResult, TrialOutcome};
pub use signal::{Noise, ObservationBatch, SufficientStats, TrainingPair};
