//! Hierarchical vertex components model (HVCM) for structured interaction
//! networks.
//!
//! The crate covers the whole modelling loop:
//!
//! * [`interaction`]: interaction logs, label canonicalization, restriction and
//!   running history statistics.
//! * [`generative`] and [`stick`]: forward simulation of the sequential
//!   process, the multi-sender extension, the flat "Hollywood" baseline and the
//!   stick-breaking construction.
//! * [`seating`] and [`enumerate`]: the extended (auxiliary vertex) state, its
//!   exact joint likelihood and brute-force marginalization.
//! * [`inference`]: the auxiliary-variable Gibbs sampler.
//! * [`netstats`] and [`ppc`]: network statistics and posterior predictive
//!   checks.
//! * [`io`], [`config`] and [`api`]: file formats, run configuration and the
//!   JSON wire types used by the service.

pub mod api;
pub mod config;
pub mod enumerate;
pub mod error;
pub mod generative;
pub mod inference;
pub mod interaction;
pub mod io;
pub mod math;
pub mod netstats;
pub mod params;
pub mod ppc;
pub mod seating;
pub mod stick;

pub use error::{Error, Result};
pub use interaction::{HistoryState, Interaction, InteractionLog, ReceiverId, SenderId};
pub use params::{Categorical, HvcmParams, LocalParams};

/// Deterministic generator used throughout the crate.
pub type Rng = rand_chacha::ChaCha12Rng;

/// Builds the crate's generator from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
