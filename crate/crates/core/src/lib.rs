//! Proximal backpressure for joint rate control and routing in multi-hop
//! networks.
//!
//! * [`net`]: topology, sessions, utilities, the scenario text format and
//!   flow-balance residuals.
//! * [`proj`]: projection onto {z ≥ 0, Σz ≤ b}.
//! * [`rate`]: the proximal per-source rate update.
//! * [`backpressure`]: the proximal backpressure slot update.
//! * [`dpp`]: the classical drift-plus-penalty baseline.
//! * [`queues`]: instant-forwarding, store-and-forward and signed virtual
//!   queues.
//! * [`oracle`]: centralized optimum, multipliers and the gap constant ζ.
//! * [`sim`]: slot simulator, traces, comparisons and the chain example.
//!
//! The numerical core is generic over the scalar type; queue bookkeeping also
//! accepts exact rationals. The aliases below fix `f64`.

// NaN must fail validation, so `!(x > 0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod backpressure;
pub mod dpp;
mod error;
pub mod net;
pub mod oracle;
pub mod proj;
pub mod queues;
pub mod rate;
mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::{lit, wide, Fluid, Real};

/// Built-in scenario documents.
pub mod scenarios {
    /// Six nodes, eight links, two sessions; optimum x* = (1.2, 1.8).
    pub const SIXNODE: &str = include_str!("../../../scenarios/sixnode.net");
    /// One link of capacity 1 and one log-utility session; optimum x* = 1.
    pub const SINGLE_LINK: &str = include_str!("../../../scenarios/single_link.net");
}

pub type ScenarioF64 = net::Scenario<f64>;
pub type DecisionVectorF64 = net::DecisionVector<f64>;
pub type AlgConfigF64 = backpressure::AlgConfig<f64>;
pub type BpStateF64 = backpressure::BpState<f64>;
pub type DppConfigF64 = dpp::DppConfig<f64>;
pub type OracleSolutionF64 = oracle::OracleSolution<f64>;
pub type TraceF64 = sim::Trace<f64>;
pub type QueueTripleF64 = queues::QueueTriple<f64>;
