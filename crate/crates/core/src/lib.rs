//! Group testing as a noisy channel: test outcomes depend only on how many
//! defective items sit in each pool.
//!
//! This crate is `no_std` (it needs `alloc`) and holds the pure parts of the
//! toolkit:
//!
//! - [`noise`]: the "only defects matter" channel family and outcome sampling.
//! - [`design`]: Bernoulli test matrices and the staged/adaptive pool
//!   strategies, including a binary-splitting baseline.
//! - [`decode`]: exhaustive maximum-likelihood decoding over size-K sets.
//! - [`bounds`]: binary entropy, the per-test mutual information (closed form
//!   and a joint-enumeration oracle), the upper/lower test-count bounds and
//!   the Fano error floor.
//! - [`sim`]: seeded Monte Carlo trials and their aggregation.
//!
//! IO, the command line and parallel execution live in the `gtlab` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod combin;
pub mod decode;
pub mod design;
pub mod noise;
pub mod rng;
pub mod sim;

pub use bounds::{BoundsReport, MiOrientation, MiSpec, PGrid};
pub use decode::{DecodeResult, OutcomeVector};
pub use design::{DefectiveSet, Pool, Step, Strategy, StrategySpec, TestMatrix};
pub use noise::{ChannelLaw, NoiseKind, NoiseModel};
pub use sim::{ExperimentConfig, RunSummary, SweepAxis, TrialRecord};
