//! Canonical agent programs shipped with the simulator.
//!
//! A reconstruction of the coordination protocol built from the three host
//! actions (`listen_gs`, `announce_perform_mission`, `listen_server`) in
//! mission order.

pub const MASTER: &str = include_str!("../../../agents/master.asl");
pub const SLAVE: &str = include_str!("../../../agents/slave.asl");

/// Host-internal actions every agent node provides.
pub const INTERNAL_ACTIONS: &[&str] = &[".wait", ".schedule"];
