//! Cooperative multi-agent Q-learning with value-decomposition mixers and
//! teacher–student distillation.
//!
//! The crate provides:
//! - a minimal differentiable numeric layer (arrays, a reverse-mode tape,
//!   RMSprop, finite-difference gradient checking),
//! - recurrent per-agent Q-networks,
//! - VDN / QMIX / QPLEX mixing networks with a brute-force joint-argmax
//!   consistency checker,
//! - deterministic grid-battle and matrix-game environments,
//! - the centralized-teacher / decentralized-student training engine and a
//!   plain CTDE baseline mode,
//! - a tabular verification of the distillation fixed point (the student
//!   converges to the hidden-information expectation of the teacher).

pub mod agent;
pub mod array;
pub mod autodiff;
pub mod distill;
pub mod env;
pub mod error;
pub mod gradcheck;
pub mod learner;
pub mod math;
pub mod mixer;
pub mod params;
pub mod rng;

pub use array::Array;
pub use error::{CoreError, Result};
