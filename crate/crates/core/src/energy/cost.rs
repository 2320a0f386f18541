use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionCost {
    /// Bytes on air for the request the action sends.
    pub request_bytes: usize,
    pub energy_uj: f64,
    pub duration_ms: f64,
}

impl ActionCost {
    pub fn validate(&self) -> Result<(), String> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if self.request_bytes == 0 || !ok(self.energy_uj) || !ok(self.duration_ms) {
            return Err(format!("action cost fields must be positive: {self:?}"));
        }
        Ok(())
    }
}

/// Measured mean cost of each external action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostTable(pub BTreeMap<String, ActionCost>);

impl Default for CostTable {
    fn default() -> Self {
        let entries = [
            ("listen_gs", 70, 271.0, 14.7),
            ("announce_perform_mission", 78, 294.0, 14.7),
            ("listen_server", 70, 276.0, 14.9),
        ];
        CostTable(
            entries
                .into_iter()
                .map(|(n, request_bytes, energy_uj, duration_ms)| (n.to_string(), ActionCost { request_bytes, energy_uj, duration_ms }))
                .collect(),
        )
    }
}

impl CostTable {
    pub fn get(&self, action: &str) -> Option<&ActionCost> {
        self.0.get(action)
    }

    /// Replaces or adds entries.
    pub fn merge(&mut self, overrides: &CostTable) {
        for (k, v) in &overrides.0 {
            self.0.insert(k.clone(), *v);
        }
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        for (name, c) in &self.0 {
            c.validate().map_err(|reason| EnergyError::BadCost { action: name.clone(), reason })?;
        }
        Ok(())
    }

    /// Fails on the first action in `actions` without an entry.
    pub fn check_covers<'a>(&self, actions: impl IntoIterator<Item = &'a str>) -> Result<(), EnergyError> {
        for a in actions {
            if !self.0.contains_key(a) {
                return Err(EnergyError::UnknownAction(a.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("no cost entry for action `{0}`")]
    UnknownAction(String),
    #[error("invalid cost for `{action}`: {reason}")]
    BadCost { action: String, reason: String },
}

/// Optional multiplicative noise on charged energy, `N(1, sigma_frac)`.
#[derive(Debug, Clone)]
pub struct CostJitter {
    normal: Normal<f64>,
    rng: ChaCha8Rng,
}

impl CostJitter {
    pub fn new(sigma_frac: f64, seed: u64) -> Result<Self, String> {
        let normal = Normal::new(1.0, sigma_frac).map_err(|e| e.to_string())?;
        Ok(Self { normal, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    fn factor(&mut self) -> f64 {
        self.normal.sample(&mut self.rng).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChargeEvent {
    pub agent: String,
    pub action: String,
    pub t_ms: f64,
    pub energy_uj: f64,
    pub duration_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AgentEnergy {
    pub energy_uj: f64,
    pub busy_ms: f64,
    pub actions: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, Default)]
pub struct Ledger {
    table: CostTable,
    agents: BTreeMap<String, AgentEnergy>,
    events: Vec<ChargeEvent>,
    jitter: Option<CostJitter>,
}

impl Ledger {
    pub fn new(table: CostTable) -> Self {
        Self { table, ..Self::default() }
    }

    pub fn with_jitter(mut self, jitter: CostJitter) -> Self {
        self.jitter = Some(jitter);
        self
    }

    pub fn table(&self) -> &CostTable {
        &self.table
    }

    /// Books one action for `agent` starting at `t_ms`.
    pub fn charge(&mut self, agent: &str, action: &str, t_ms: f64) -> Result<&ChargeEvent, EnergyError> {
        let cost = *self.table.get(action).ok_or_else(|| EnergyError::UnknownAction(action.to_string()))?;
        let energy_uj = match &mut self.jitter {
            Some(j) => cost.energy_uj * j.factor(),
            None => cost.energy_uj,
        };
        let a = self.agents.entry(agent.to_string()).or_default();
        a.energy_uj += energy_uj;
        a.busy_ms += cost.duration_ms;
        *a.actions.entry(action.to_string()).or_default() += 1;
        self.events.push(ChargeEvent { agent: agent.to_string(), action: action.to_string(), t_ms, energy_uj, duration_ms: cost.duration_ms });
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn agent(&self, agent: &str) -> AgentEnergy {
        self.agents.get(agent).cloned().unwrap_or_default()
    }

    pub fn agents(&self) -> &BTreeMap<String, AgentEnergy> {
        &self.agents
    }

    pub fn events(&self) -> &[ChargeEvent] {
        &self.events
    }

    pub fn events_for<'a>(&'a self, agent: &'a str) -> impl Iterator<Item = &'a ChargeEvent> + 'a {
        self.events.iter().filter(move |e| e.agent == agent)
    }
}
