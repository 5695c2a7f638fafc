//! Stable matching for many-to-one markets with couples.
//!
//! The library covers the full pipeline:
//!
//! - [`market`] — hospitals, singles, couples, choice functions, and
//!   [`matching`] — matchings, blocks, stability checking;
//! - [`engine`] — doctor-proposing deferred acceptance plus sorted couple
//!   insertion with permutation reordering (classic, backward-edge, and
//!   direct variants);
//! - [`influence`] — influence trees, the couples graph, components, cycles,
//!   and topological insertion orders;
//! - [`gen`] — seeded random markets and the one-couple counterexample
//!   family; [`oracle`] — exhaustive stable-matching existence search;
//!   [`pessimistic`] — the randomized multi-assignment application process;
//! - [`experiments`] — reproducible Monte Carlo studies with CSV output;
//! - [`io`] — versioned JSON file formats for markets, matchings, and run
//!   traces.
//!
//! Start with the runnable programs in `examples/`; each demonstrates one
//! capability end to end.

pub mod cli;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod gen;
pub mod influence;
pub mod io;
pub mod market;
pub mod matching;
pub mod oracle;
pub mod pessimistic;
pub mod rng;

pub use engine::{
    deferred_acceptance, direct_insertion, soda, solve, EngineMode, Permutation, SodaOutcome,
    SolveMode,
};
pub use market::{Couple, DoctorId, Hospital, HospitalId, MarketInstance, Single};
pub use matching::{find_blocks, is_stable, validate_matching, Block, Matching};
