//! Weekly admission control of elective surgery patients modelled as an
//! infinite-horizon discounted MDP over waiting-list counts.
//!
//! * [`model`]: instance configuration, states, actions, transitions and costs.
//! * [`action_space`]: the full and the structurally reduced action sets.
//! * [`exact`]: enumerated value iteration and the myopic policy.
//! * [`adp`]: the RLS-TD(λ) approximate dynamic programming solver.
//! * [`sim`]: Monte-Carlo policy evaluation with shared arrival streams.

pub mod action_space;
pub mod adp;
pub mod exact;
pub mod instances;
pub mod error;
pub mod model;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
