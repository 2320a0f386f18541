//! Run summary: synchronization error, energy, phase trace, debris and
//! message counters.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::agentspeak::Diagnostics;
use crate::energy::AgentEnergy;
use crate::mothership::{MissionPhase, PhaseChange};
use crate::runner::{ActuationRecord, RunFacts, MASTER, SLAVE};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionReport {
    pub injected_at_ms: f64,
    pub motor_speed: u8,
    pub mission_length_ms: u64,
    /// Base station's PUT was answered 2.04.
    pub accepted: bool,
    /// Start on the server timeline.
    pub start_time_ms: Option<u64>,
    pub master_actuation_ms: Option<f64>,
    pub slave_actuation_ms: Option<f64>,
    pub sync_error_ms: Option<f64>,
    pub master_energy_uj: f64,
    pub slave_energy_uj: f64,
    pub slave_polls: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Incomplete {
    /// Index into `missions`.
    pub mission: usize,
    /// Furthest phase the mission reached from the agents' point of view.
    pub phase: MissionPhase,
    /// Agents that never actuated for it.
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DebrisReport {
    pub t_ms: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    pub peak_omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MessageCounters {
    pub sent: u64,
    pub delivered: u64,
    pub lost: u64,
    pub retransmitted: u64,
    pub in_flight: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub t_end_ms: f64,
    /// |master actuation - slave actuation| for the first mission, global timeline.
    pub sync_error_ms: Option<f64>,
    pub mission_incomplete: Option<Incomplete>,
    pub missions: Vec<MissionReport>,
    pub energy: BTreeMap<String, AgentEnergy>,
    pub phase_trace: Vec<PhaseChange>,
    pub debris: Option<DebrisReport>,
    pub messages: MessageCounters,
    pub diagnostics: BTreeMap<String, Diagnostics>,
}

impl RunReport {
    pub fn is_complete(&self) -> bool {
        self.mission_incomplete.is_none()
    }
}

/// Round an event at `t_ms` belongs to: the number of actuations that started
/// at or before it.
fn round_of(t_ms: f64, acts: &[ActuationRecord]) -> usize {
    acts.iter().filter(|a| a.start_ms <= t_ms).count()
}

fn sync_error(m: Option<&ActuationRecord>, s: Option<&ActuationRecord>) -> Option<f64> {
    let (m, s) = (m?, s?);
    // Both instants are whole microseconds; subtract in integer units.
    let us = ((m.start_ms * 1000.0).round() as i64 - (s.start_ms * 1000.0).round() as i64).abs();
    Some(us as f64 / 1000.0)
}

pub(crate) fn build_report(f: &RunFacts<'_>) -> RunReport {
    let (master, slave) = (MASTER.to_string(), SLAVE.to_string());
    let mut missions = Vec::new();
    let mut incomplete = None;
    let mut round = 0usize;
    for (i, inj) in f.injections.iter().enumerate() {
        let accepted = inj.response.as_deref() == Some("2.04");
        let mut m = MissionReport {
            injected_at_ms: inj.at_ms,
            motor_speed: inj.motor_speed,
            mission_length_ms: inj.mission_length_ms,
            accepted,
            start_time_ms: None,
            master_actuation_ms: None,
            slave_actuation_ms: None,
            sync_error_ms: None,
            master_energy_uj: 0.0,
            slave_energy_uj: 0.0,
            slave_polls: 0,
        };
        if !accepted {
            incomplete.get_or_insert(Incomplete { mission: i, phase: MissionPhase::Idle, missing: vec![master.clone(), slave.clone()] });
            missions.push(m);
            continue;
        }
        let (ma, sa) = (f.master_actuations.get(round), f.slave_actuations.get(round));
        m.start_time_ms = f.scheduled_starts.get(round).copied();
        m.master_actuation_ms = ma.map(|a| a.start_ms);
        m.slave_actuation_ms = sa.map(|a| a.start_ms);
        m.sync_error_ms = sync_error(ma, sa);
        for e in f.ledger.events() {
            if e.agent == master && round_of(e.t_ms, f.master_actuations) == round {
                m.master_energy_uj += e.energy_uj;
            } else if e.agent == slave && round_of(e.t_ms, f.slave_actuations) == round {
                m.slave_energy_uj += e.energy_uj;
                if e.action == "listen_server" {
                    m.slave_polls += 1;
                }
            }
        }
        let missing: Vec<String> = [(ma, &master), (sa, &slave)].into_iter().filter(|(a, _)| a.is_none()).map(|(_, n)| n.clone()).collect();
        if !missing.is_empty() {
            let phase = if m.start_time_ms.is_some() { MissionPhase::Scheduled } else { MissionPhase::Announced };
            incomplete.get_or_insert(Incomplete { mission: i, phase, missing });
        }
        missions.push(m);
        round += 1;
    }
    let mut energy = f.ledger.agents().clone();
    for n in [&master, &slave] {
        energy.entry(n.clone()).or_default();
    }
    let c = f.counters;
    RunReport {
        seed: f.scenario.seed,
        t_end_ms: f.scenario.t_end_ms,
        sync_error_ms: missions.first().and_then(|m| m.sync_error_ms),
        mission_incomplete: incomplete,
        missions,
        energy,
        phase_trace: f.server.phase_trace().to_vec(),
        debris: f.physics.map(|w| {
            let s = w.sample();
            DebrisReport { t_ms: s.t_ms, x: s.x, y: s.y, theta: s.theta, vx: s.vx, vy: s.vy, omega: s.omega, peak_omega: w.peak_omega }
        }),
        messages: MessageCounters { sent: c.sent, delivered: c.delivered, lost: c.lost, retransmitted: c.retransmitted, in_flight: c.in_flight() },
        diagnostics: f.diagnostics.clone(),
    }
}
