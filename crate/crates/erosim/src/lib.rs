//! Competitive erosion on the integer lattice.
//!
//! Alternating blue and red particles are emitted at the origin of ℤ. Each
//! particle performs a simple symmetric random walk until it reaches a nonzero
//! site that is uncolored or oppositely colored, and claims that site. The
//! crate provides:
//!
//! * an exact microstep-level engine plus a gambler's-ruin "fast" mode that is
//!   exact in distribution for the final configuration ([`state`]),
//! * observables: supports, monochromatic runs, the layer stack, goodness
//!   counters, and the excursion decomposition of the signed potential
//!   ([`coloring`], [`layers`], [`goodness`], [`trajectory`]),
//! * the killed process on `[-L, L]` and the associated constants `w_k`,
//!   `alpha`, and `C` ([`killed`], [`constants`]),
//! * a discretized sampler for the limiting hitting/extrema functionals
//!   ([`oracle`]),
//! * multi-color and higher-dimensional variants ([`variants`]),
//! * a seeded, parallel experiment harness with CSV output, checkpointing and
//!   distributional comparison ([`harness`], [`stats`]),
//! * the acceptance suite wiring everything together ([`acceptance`]).

pub mod acceptance;
pub mod coloring;
pub mod constants;
pub mod goodness;
pub mod harness;
pub mod killed;
pub mod layers;
pub mod oracle;
pub mod rng;
pub mod state;
pub mod stats;
pub mod trajectory;
pub mod variants;

pub use coloring::{Color, RunLengthView, SettleKind, SiteColoring};
pub use state::{ActiveParticle, EngineError, ErosionState, MicrostepEvent, StateOptions};
