//! Multi-target tracking of interacting targets.
//!
//! Two trackers share the same motion and appearance models:
//!
//! * a joint MCMC sampler whose Metropolis-Hastings acceptance includes
//!   pairwise Markov random field potentials that penalize overlapping
//!   targets ([`samplers::mcmc_mrf_step`]);
//! * independent per-target CONDENSATION filters
//!   ([`samplers::condensation_step`]).
//!
//! [`simulator`] produces synthetic arenas of interacting agents with exact
//! groundtruth, and [`harness`] runs either tracker against it with
//! automatic failure detection and correction.

pub mod appearance;
pub mod error;
pub mod frame;
pub mod geometry;
pub mod harness;
pub mod interaction;
pub mod motion;
pub mod pgm;
pub mod samplers;
pub mod simulator;
pub mod tracks;

pub use error::{Error, Result};
pub use frame::Frame;
pub use geometry::{JointParticle, PatchDims, TargetState};
