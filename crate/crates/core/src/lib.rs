//! Deterministic desk-scale simulator of a two free-flyer debris push mission.
//!
//! Two BDI agents (master and slave) coordinate through a CoAP server (the
//! mothership) over a simulated low-power link, agree on a start time and push
//! a debris object. A run reports the synchronization error between the two
//! actuations, per-action energy and the resulting debris motion.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agentspeak;
pub mod coap;
pub mod energy;
pub mod mothership;
pub mod output;
pub mod physics;
pub mod programs;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod simnet;

pub use report::RunReport;
pub use runner::{run, RunError, RunOptions, RunOutput};
pub use scenario::Scenario;
