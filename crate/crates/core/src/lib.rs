//! Simulation and analysis of linear network coded broadcast over erasure
//! channels.
//!
//! A sender holds `K` data packets; each of `N` receivers already has some of
//! them and wants the rest, as recorded in a state feedback matrix ([`Sfm`]).
//! Every slot the sender broadcasts one linear combination chosen by a
//! [`schemes::Scheme`]; each receiver independently loses it with its own
//! erasure probability. The crate measures completion time and average packet
//! decoding delay, compares them with analytic lower bounds, and computes
//! exact erasure-free optima on small instances by exhaustive search.
//!
//! Modules:
//! - [`gf`]: GF(2^m) arithmetic and incremental elimination.
//! - [`sfm`]: feedback matrices, channels, instance generators, text format.
//! - [`session`]: one broadcast session, slot by slot.
//! - [`schemes`]: coded packet generators.
//! - [`metrics`]: delay/completion metrics, bounds, Monte Carlo, ratio reports.
//! - [`oracle`]: brute-force optimal schedules.

pub mod gf;
pub mod metrics;
pub mod oracle;
pub mod schemes;
pub mod session;
pub mod sfm;

pub use gf::{CodingVector, EliminationState, Field, FieldSpec};
pub use metrics::{
    apdd_overall, apdd_receiver, approximation_report, bounds, completion_stats, ApproxReport,
    Bounds, Estimates, MonteCarlo, Rational,
};
pub use schemes::{PlanSpec, Scheme, SchemeSpec};
pub use session::{MemoryMode, Session, SessionResult};
pub use sfm::{ChannelSpec, Sfm};
