//! Scenario files: topology, programs, link and clock models, mission
//! injections, costs and physics, in TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agentspeak::{parse_program, AgentProgram, ParseError};
use crate::energy::{CostTable, DEFAULT_IDLE_MA, DEFAULT_SUPPLY_V};
use crate::mothership::MissionParams;
use crate::physics::Geometry;
use crate::programs;
use crate::simnet::{LinkModel, NodeClock, NodeId, Role, MAX_DRIFT_PPM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actuation {
    Led,
    #[default]
    Push,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub role: Role,
    #[serde(default)]
    pub clock: NodeClock,
    /// Global time at which an agent starts reasoning.
    #[serde(default)]
    pub boot_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentsConfig {
    /// Program paths, relative to the scenario file. Built-in programs are
    /// used when absent.
    pub master: Option<PathBuf>,
    pub slave: Option<PathBuf>,
    /// Adds the `repeat` belief to both agents so they start over after a
    /// mission.
    pub repeat: bool,
}

/// A base-station announcement at a global time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    pub at_ms: f64,
    pub motor_speed: u8,
    pub mission_length_ms: u64,
}

impl Injection {
    pub fn params(&self) -> MissionParams {
        MissionParams { motor_speed: self.motor_speed, mission_length_ms: self.mission_length_ms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub supply_v: f64,
    pub idle_ma: f64,
    pub fs_hz: f64,
    pub filter_order: usize,
    pub filter_fc_hz: f64,
    /// Relative standard deviation of per-action energy; 0 disables.
    pub jitter_sigma: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self { supply_v: DEFAULT_SUPPLY_V, idle_ma: DEFAULT_IDLE_MA, fs_hz: 500.0, filter_order: 4, filter_fc_hz: 50.0, jitter_sigma: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub enabled: bool,
    pub sample_ms: f64,
    pub geometry: Geometry,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self { enabled: true, sample_ms: 10.0, geometry: Geometry::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub t_end_ms: f64,
    #[serde(default)]
    pub actuation: Actuation,
    #[serde(default)]
    pub agents: AgentsConfig,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub link: LinkModel,
    /// Per-node link overrides by node name (`slave`, `master`, ...).
    #[serde(default)]
    pub link_overrides: BTreeMap<String, LinkModel>,
    #[serde(default = "default_max_drift")]
    pub max_drift_ppm: f64,
    pub missions: Vec<Injection>,
    #[serde(default)]
    pub costs: CostTable,
    #[serde(default)]
    pub energy: EnergyConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    /// Directory program paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_max_drift() -> f64 {
    MAX_DRIFT_PPM
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid scenario {path}: {source}")]
    Toml { path: PathBuf, source: Box<toml::de::Error> },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("agent program {path}: {source}")]
    Program { path: String, source: ParseError },
    #[error("unknown sweep parameter `{0}`")]
    UnknownParam(String),
}

impl Default for Scenario {
    fn default() -> Self {
        let agent = |role, boot_ms| NodeSpec { role, clock: NodeClock::default(), boot_ms };
        Scenario {
            seed: 1,
            t_end_ms: 10_000.0,
            actuation: Actuation::Push,
            agents: AgentsConfig::default(),
            nodes: vec![
                agent(Role::BaseStation, 0.0),
                agent(Role::Mothership, 0.0),
                agent(Role::MasterFf, 200.0),
                agent(Role::SlaveFf, 200.0),
            ],
            link: LinkModel::default(),
            link_overrides: BTreeMap::new(),
            max_drift_ppm: MAX_DRIFT_PPM,
            missions: vec![Injection { at_ms: 100.0, motor_speed: 40, mission_length_ms: 1500 }],
            costs: CostTable::default(),
            energy: EnergyConfig::default(),
            physics: PhysicsConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        let mut s: Scenario =
            toml::from_str(text).map_err(|e| ScenarioError::Toml { path: base_dir.to_path_buf(), source: Box::new(e) })?;
        s.base_dir = base_dir.to_path_buf();
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut s: Scenario = toml::from_str(&text).map_err(|e| ScenarioError::Toml { path: path.to_path_buf(), source: Box::new(e) })?;
        s.base_dir = base;
        s.validate()?;
        Ok(s)
    }

    /// Cost table with the scenario's overrides applied over the defaults.
    pub fn cost_table(&self) -> CostTable {
        let mut t = CostTable::default();
        t.merge(&self.costs);
        t
    }

    pub fn node(&self, role: Role) -> &NodeSpec {
        self.nodes.iter().find(|n| n.role == role).expect("validated topology")
    }

    pub fn node_mut(&mut self, role: Role) -> &mut NodeSpec {
        self.nodes.iter_mut().find(|n| n.role == role).expect("validated topology")
    }

    pub fn program_path(&self, role: Role) -> Option<PathBuf> {
        let p = match role {
            Role::MasterFf => self.agents.master.as_ref(),
            Role::SlaveFf => self.agents.slave.as_ref(),
            _ => None,
        }?;
        Some(if p.is_absolute() { p.clone() } else { self.base_dir.join(p) })
    }

    pub fn program_source(&self, role: Role) -> Result<String, ScenarioError> {
        match self.program_path(role) {
            Some(path) => std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io { path, source }),
            None => Ok(match role {
                Role::MasterFf => programs::MASTER.to_string(),
                _ => programs::SLAVE.to_string(),
            }),
        }
    }

    pub fn program(&self, role: Role) -> Result<AgentProgram, ScenarioError> {
        let src = self.program_source(role)?;
        parse_program(&src).map_err(|source| ScenarioError::Program {
            path: self.program_path(role).map(|p| p.display().to_string()).unwrap_or_else(|| format!("<built-in {}>", role.name())),
            source,
        })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        for role in [Role::BaseStation, Role::Mothership, Role::MasterFf, Role::SlaveFf] {
            let n = self.nodes.iter().filter(|s| s.role == role).count();
            if n != 1 {
                return bad(format!("need exactly one {} node, found {n}", role.name()));
            }
        }
        if self.nodes.iter().filter(|s| s.role == Role::Debris).count() > 1 {
            return bad("at most one debris node".into());
        }
        for n in &self.nodes {
            n.clock.validate(self.max_drift_ppm).map_err(|e| ScenarioError::Invalid(format!("{} clock: {e}", n.role.name())))?;
            if !(n.boot_ms >= 0.0 && n.boot_ms.is_finite()) {
                return bad(format!("{} boot_ms must be >= 0", n.role.name()));
            }
        }
        if !(self.t_end_ms > 0.0 && self.t_end_ms.is_finite()) {
            return bad(format!("t_end_ms must be positive, got {}", self.t_end_ms));
        }
        self.link.validate().map_err(|e| ScenarioError::Invalid(format!("link: {e}")))?;
        for (name, l) in &self.link_overrides {
            if self.node_by_name(name).is_none() {
                return bad(format!("link override for unknown node `{name}`"));
            }
            l.validate().map_err(|e| ScenarioError::Invalid(format!("link override {name}: {e}")))?;
        }
        for m in &self.missions {
            m.params().validate().map_err(|e| ScenarioError::Invalid(format!("mission at {} ms: {e}", m.at_ms)))?;
            if !(m.at_ms >= 0.0) {
                return bad("mission injection time must be >= 0".into());
            }
        }
        let table = self.cost_table();
        table.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let e = &self.energy;
        if !(e.supply_v > 0.0 && e.fs_hz > 0.0 && e.jitter_sigma >= 0.0) {
            return bad(format!("energy settings out of range: {e:?}"));
        }
        if !(self.physics.sample_ms > 0.0) {
            return bad("physics.sample_ms must be positive".into());
        }
        self.physics.geometry.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        for role in [Role::MasterFf, Role::SlaveFf] {
            if let Some(p) = self.program_path(role) {
                if !p.is_file() {
                    return bad(format!("{} program {} does not exist", role.name(), p.display()));
                }
            }
            let program = self.program(role)?;
            let supported = host_actions(role);
            for a in program.action_names() {
                if a.starts_with('.') {
                    if !programs::INTERNAL_ACTIONS.contains(&a.as_str()) {
                        return bad(format!("{} program uses unknown internal action `{a}`", role.name()));
                    }
                } else if !supported.contains(&a.as_str()) {
                    return bad(format!("{} cannot perform action `{a}`", role.name()));
                } else if table.get(&a).is_none() {
                    return bad(format!("no cost entry for action `{a}`"));
                }
            }
        }
        Ok(())
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().map(|n| NodeId::new(n.role, 0)).find(|id| id.to_string() == name)
    }

    /// Sets a sweepable parameter by name.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<(), ScenarioError> {
        match name {
            "seed" => self.seed = value as u64,
            "clock_offset_master" => self.node_mut(Role::MasterFf).clock.offset_ms = value,
            "clock_offset_slave" => self.node_mut(Role::SlaveFf).clock.offset_ms = value,
            "drift_master" => self.node_mut(Role::MasterFf).clock.drift_ppm = value,
            "drift_slave" => self.node_mut(Role::SlaveFf).clock.drift_ppm = value,
            "loss_prob" => self.link.loss_prob = value,
            "jitter_ms" => self.link.jitter_ms = value,
            "base_latency_ms" => self.link.base_latency_ms = value,
            _ => return Err(ScenarioError::UnknownParam(name.to_string())),
        }
        self.validate()
    }
}

/// External actions each agent role can perform.
pub fn host_actions(role: Role) -> &'static [&'static str] {
    match role {
        Role::MasterFf => &["listen_gs", "announce_perform_mission"],
        Role::SlaveFf => &["listen_server"],
        _ => &[],
    }
}
