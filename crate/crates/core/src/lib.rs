//! Measure-imperceptible top-k multi-label attacks.
//!
//! The attack expels a chosen set of relevant labels from a scorer's top-k
//! while pulling the remaining relevant labels up, so precision, mAP and
//! NDCG at k barely move. Two untargeted baselines, a metric suite, small
//! differentiable victims and a seeded experiment harness come with it.

pub mod attack;
pub mod baselines;
pub mod checks;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod ranking;

pub use error::{Error, Result};
pub use attack::{AttackConfig, AttackOutcome, Method, Scheme, StopMode};
pub use dataset::Instance;
pub use model::{Scorer, TrainConfig};
pub use ranking::{LabelVector, ScoreVector, SpecifiedSet};
