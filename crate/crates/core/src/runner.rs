//! Wires the agents, the mothership, the base station and the debris model
//! into one discrete-event run.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::agentspeak::{ActionRequest, AgentProgram, AgentState, Term};
use crate::coap::{
    decode_message, encode_message, match_response, Code, CoapMessage, MessageType, RequestKey, ACK_TIMEOUT_MS, MAX_RETRANSMIT,
};
use crate::energy::{synth_trace, CostJitter, CurrentTrace, Ledger, TraceError};
use crate::mothership::{MissionFields, MissionPhase, MissionServer, MISSION_PATH};
use crate::physics::{PhysicsError, RigidBody2D, TrajectorySample, WorldState};
use crate::report::{build_report, RunReport};
use crate::scenario::{Actuation, Scenario, ScenarioError};
use crate::simnet::{Ctx, EventKind, Handler, LogRecord, Network, NodeClock, NodeId, Role, SimError, SimEvent, SimTime, Simulator};

pub const BASE: NodeId = NodeId::new(Role::BaseStation, 0);
pub const MOTHERSHIP: NodeId = NodeId::new(Role::Mothership, 0);
pub const MASTER: NodeId = NodeId::new(Role::MasterFf, 0);
pub const SLAVE: NodeId = NodeId::new(Role::SlaveFf, 0);

/// Upper bound on reasoning steps an agent may take without acting.
const MAX_STEPS_PER_CYCLE: u32 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Tag {
    /// Agent starts reasoning.
    Boot,
    /// The in-flight action finished with this result.
    Resume(Term),
    Retransmit(u16),
    /// Base station announces the mission with this index.
    Inject(usize),
    ServerTick,
    ActuateStart,
    ActuateEnd,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub no_physics: bool,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub events: Vec<LogRecord>,
    /// Synthetic supply current of the master.
    pub master_trace: CurrentTrace,
    pub trajectory: Option<Vec<TrajectorySample>>,
}

struct Pending {
    key: RequestKey,
    dst: NodeId,
    bytes: Vec<u8>,
    retransmits: u32,
    timer: u64,
    action: String,
    /// Start time sent with a start registration.
    start: Option<u64>,
}

#[derive(Default)]
struct Client {
    next_mid: u16,
    pending: BTreeMap<u16, Pending>,
}

impl Client {
    fn new(first_mid: u16) -> Self {
        Self { next_mid: first_mid, pending: BTreeMap::new() }
    }

    /// Sends a CON request and arms its retransmission timer.
    fn request(&mut self, me: NodeId, dst: NodeId, mut msg: CoapMessage, action: &str, start: Option<u64>, ctx: &mut Ctx<'_, Tag>) -> Result<String, String> {
        msg.message_id = self.next_mid;
        self.next_mid = self.next_mid.wrapping_add(1);
        let bytes = encode_message(&msg).map_err(|e| e.to_string())?;
        let summary = msg.summary();
        let delivered = ctx.send(me, dst, bytes.clone());
        let timer = ctx.timer(ctx.now() + SimTime::from_ms(ACK_TIMEOUT_MS as f64), me, Tag::Retransmit(msg.message_id));
        let key = RequestKey { peer: dst, message_id: msg.message_id, token: msg.token.clone() };
        self.pending.insert(msg.message_id, Pending { key, dst, bytes, retransmits: 0, timer, action: action.to_string(), start });
        Ok(format!("send {summary}{}", if delivered { "" } else { " (lost)" }))
    }

    /// Retransmits, or gives up and returns the abandoned request.
    fn on_timeout(&mut self, me: NodeId, mid: u16, ctx: &mut Ctx<'_, Tag>) -> (String, Option<Pending>) {
        let Some(p) = self.pending.get_mut(&mid) else {
            return (format!("stale timeout mid={mid}"), None);
        };
        if p.retransmits >= MAX_RETRANSMIT {
            let p = self.pending.remove(&mid).expect("present");
            return (format!("give up mid={mid} after {} retransmissions", p.retransmits), Some(p));
        }
        p.retransmits += 1;
        ctx.note_retransmission();
        let delivered = ctx.send(me, p.dst, p.bytes.clone());
        p.timer = ctx.timer(ctx.now() + SimTime::from_ms(ACK_TIMEOUT_MS as f64), me, Tag::Retransmit(mid));
        (format!("retransmit mid={mid} #{}{}", p.retransmits, if delivered { "" } else { " (lost)" }), None)
    }

    fn on_response(&mut self, msg: &CoapMessage, from: NodeId, ctx: &mut Ctx<'_, Tag>) -> Option<(Pending, bool)> {
        let keys = self.pending.values().map(|p| p.key.clone()).collect();
        let m = match_response(&keys, msg, from)?;
        let p = self.pending.remove(&m.key.message_id).expect("matched key is pending");
        ctx.cancel(p.timer);
        Some((p, m.rejected))
    }
}

#[derive(Debug, Clone, Copy)]
struct Planned {
    speed: u8,
    len_ms: u64,
    start_local_ms: u64,
    end_global: SimTime,
}

/// Actuation window of one agent on the global timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationRecord {
    pub start_ms: f64,
    pub end_ms: f64,
    pub start_local_ms: u64,
    pub motor_speed: u8,
    pub mission_length_ms: u64,
}

struct Agent {
    id: NodeId,
    clock: NodeClock,
    program: AgentProgram,
    state: AgentState,
    client: Client,
    /// The in-flight external action may not complete before this time.
    busy_until: SimTime,
    planned: Option<Planned>,
    actuations: Vec<ActuationRecord>,
}

struct Physics {
    world: WorldState,
    sample_every: u64,
    trajectory: Vec<TrajectorySample>,
    /// Instants that already have a physics event queued.
    step_at: BTreeSet<SimTime>,
}

/// Per-injection bookkeeping on the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionRecord {
    pub at_ms: f64,
    pub motor_speed: u8,
    pub mission_length_ms: u64,
    /// Response code to the base station's PUT, if one arrived.
    pub response: Option<String>,
}

struct World {
    scenario: Scenario,
    base: Client,
    injections: Vec<InjectionRecord>,
    server: MissionServer,
    server_clock: NodeClock,
    dedup: BTreeMap<(NodeId, u16), Vec<u8>>,
    /// Start times the server accepted, in order.
    scheduled_starts: Vec<u64>,
    master: Agent,
    slave: Agent,
    ledger: Ledger,
    physics: Option<Physics>,
}

fn num_arg(req: &ActionRequest, i: usize) -> Result<f64, String> {
    req.args
        .get(i)
        .and_then(Term::as_num)
        .filter(|v| v.is_finite() && *v >= 0.0)
        .ok_or_else(|| format!("action {req}: argument {} must be a non-negative number", i + 1))
}

fn fmt_pose(s: &TrajectorySample) -> String {
    format!("x={:.6} y={:.6} theta={:.6} omega={:.6}", s.x, s.y, s.theta, s.omega)
}

impl World {
    fn agent_mut(&mut self, node: NodeId) -> &mut Agent {
        match node.role {
            Role::MasterFf => &mut self.master,
            _ => &mut self.slave,
        }
    }

    fn cycle(&mut self, node: NodeId, ctx: &mut Ctx<'_, Tag>) -> Result<String, String> {
        let mut steps = 0u32;
        let mut acts = Vec::new();
        loop {
            let agent = self.agent_mut(node);
            if !agent.state.has_work() {
                break;
            }
            steps += 1;
            if steps > MAX_STEPS_PER_CYCLE {
                return Err(format!("{node} took {MAX_STEPS_PER_CYCLE} reasoning steps without acting"));
            }
            let program = &agent.program;
            if let Some(req) = agent.state.reasoning_step(program).map_err(|e| e.to_string())? {
                acts.push(self.start_action(node, req, ctx)?);
            }
        }
        Ok(if acts.is_empty() { format!("steps={steps} idle") } else { format!("steps={steps} {}", acts.join("; ")) })
    }

    fn resume(&mut self, node: NodeId, result: Term, ctx: &mut Ctx<'_, Tag>) -> Result<String, String> {
        self.agent_mut(node).state.resolve_action(result.clone()).map_err(|e| e.to_string())?;
        Ok(format!("result {result} | {}", self.cycle(node, ctx)?))
    }

    fn start_action(&mut self, node: NodeId, req: ActionRequest, ctx: &mut Ctx<'_, Tag>) -> Result<String, String> {
        let now = ctx.now();
        match req.name.as_str() {
            ".wait" => {
                let t = num_arg(&req, 0)?;
                let agent = self.agent_mut(node);
                let target = agent.clock.global_for_local_us(agent.clock.local_us(now) + (t * 1000.0).round() as i64).max(now);
                ctx.timer(target, node, Tag::Resume(Term::atom("true")));
                Ok(format!("{req}"))
            }
            ".schedule" => {
                let speed = num_arg(&req, 0)?;
                let len = num_arg(&req, 1)?;
                let start = num_arg(&req, 2)?;
                if speed > 100.0 || len == 0.0 {
                    return Err(format!("action {req}: speed must be <= 100 and length > 0"));
                }
                let agent = self.agent_mut(node);
                let (start_ms, len_ms) = (start.round() as u64, len.round() as u64);
                let start_global = agent.clock.global_for_local_us(start_ms as i64 * 1000).max(now);
                let end_global = agent.clock.global_for_local_us((start_ms + len_ms) as i64 * 1000).max(start_global);
                agent.planned = Some(Planned { speed: speed.round() as u8, len_ms, start_local_ms: start_ms, end_global });
                ctx.timer(start_global, node, Tag::ActuateStart);
                Ok(format!("{req} at t={}", start_global.as_ms()))
            }
            name => {
                let cost = *self.ledger.table().get(name).ok_or_else(|| format!("{node} has no cost entry for `{name}`"))?;
                self.ledger.charge(&node.to_string(), name, now.as_ms()).map_err(|e| e.to_string())?;
                let agent = self.agent_mut(node);
                agent.busy_until = now + SimTime::from_ms(cost.duration_ms);
                let get = || CoapMessage::new(MessageType::Confirmable, Code::GET, 0).with_path(MISSION_PATH);
                let (msg, start) = match (node.role, name) {
                    (Role::MasterFf, "listen_gs") | (Role::SlaveFf, "listen_server") => (get(), None),
                    (Role::MasterFf, "announce_perform_mission") => {
                        let lead = num_arg(&req, 2)?;
                        let start = agent.clock.local_now(now.as_ms()).ceil().max(0.0) as u64 + lead.round() as u64;
                        let msg = CoapMessage::new(MessageType::Confirmable, Code::PUT, 0).with_path(MISSION_PATH).with_text(&format!("{start:06}"));
                        (msg, Some(start))
                    }
                    _ => return Err(format!("{node} cannot perform `{name}`")),
                };
                let sent = agent.client.request(node, MOTHERSHIP, msg, name, start, ctx)?;
                Ok(format!("{req} {sent}"))
            }
        }
    }

    /// Maps a response (or its absence) to the percept handed to the agent.
    fn action_result(p: &Pending, resp: Option<(&CoapMessage, bool)>) -> Term {
        let n = |v: u64| Term::num(v as f64);
        let Some((msg, rejected)) = resp else {
            return Term::atom("timeout");
        };
        let fields = (msg.code == Code::CONTENT && !rejected).then(|| msg.payload_text().and_then(|t| MissionFields::parse(t).ok())).flatten();
        match p.action.as_str() {
            "listen_gs" => match fields.and_then(|f| f.params().ok().map(|pr| (pr, f.start))) {
                Some((pr, None)) => Term::compound("mission", vec![n(pr.motor_speed as u64), n(pr.mission_length_ms)]),
                _ => Term::atom("no_mission"),
            },
            "listen_server" => match fields.and_then(|f| f.params().ok().map(|pr| (pr, f.start))) {
                Some((pr, Some(start))) => Term::compound("mission", vec![n(pr.motor_speed as u64), n(pr.mission_length_ms), n(start)]),
                _ => Term::atom("waiting"),
            },
            _ => match (msg.code, rejected, p.start) {
                (Code::CHANGED, false, Some(start)) => Term::compound("scheduled", vec![n(start)]),
                _ => Term::atom("rejected"),
            },
        }
    }

    fn agent_rx(&mut self, node: NodeId, from: NodeId, msg: CoapMessage, ctx: &mut Ctx<'_, Tag>) -> String {
        let agent = self.agent_mut(node);
        let Some((p, rejected)) = agent.client.on_response(&msg, from, ctx) else {
            return "unmatched, dropped".into();
        };
        let result = Self::action_result(&p, Some((&msg, rejected)));
        let at = agent.busy_until.max(ctx.now());
        ctx.timer(at, node, Tag::Resume(result.clone()));
        format!("-> {result} at t={}", at.as_ms())
    }

    fn server_rx(&mut self, from: NodeId, msg: CoapMessage, ctx: &mut Ctx<'_, Tag>) -> Result<String, String> {
        if !msg.code.is_request() {
            return Ok("not a request, ignored".into());
        }
        let key = (from, msg.message_id);
        if let Some(bytes) = self.dedup.get(&key) {
            ctx.send(MOTHERSHIP, from, bytes.clone());
            return Ok("duplicate, cached response resent".into());
        }
        let now_ms = self.server_clock.local_now(ctx.now().as_ms());
        let before = self.server.phase();
        let resp = self.server.handle_request(&msg, from, now_ms);
        let after = self.server.phase();
        let mut note = String::new();
        if before != after {
            note = format!(" phase {before}->{after}");
        }
        if before == MissionPhase::Announced && after == MissionPhase::Scheduled {
            let start = self.server.record().start_time_ms.expect("scheduled mission has a start");
            self.scheduled_starts.push(start);
            let at = self.server_clock.global_for_local_us(start as i64 * 1000);
            ctx.timer(at, MOTHERSHIP, Tag::ServerTick);
        }
        let bytes = encode_message(&resp).map_err(|e| e.to_string())?;
        if msg.mtype == MessageType::Confirmable {
            self.dedup.insert(key, bytes.clone());
        }
        let lost = !ctx.send(MOTHERSHIP, from, bytes);
        Ok(format!("reply {}{note}{}", resp.summary(), if lost { " (lost)" } else { "" }))
    }

    fn server_tick(&mut self, ctx: &mut Ctx<'_, Tag>) -> String {
        let now_ms = self.server_clock.local_now(ctx.now().as_ms());
        let Some(ch) = self.server.tick(now_ms) else {
            return format!("tick {}", self.server.phase());
        };
        match ch.to {
            MissionPhase::Running => {
                let r = self.server.record();
                let end = r.start_time_ms.unwrap_or_default() + r.params.map(|p| p.mission_length_ms).unwrap_or_default();
                ctx.timer(self.server_clock.global_for_local_us(end as i64 * 1000), MOTHERSHIP, Tag::ServerTick);
            }
            MissionPhase::Done => {
                ctx.timer(ctx.now(), MOTHERSHIP, Tag::ServerTick);
            }
            _ => {}
        }
        format!("tick {}->{}", ch.from, ch.to)
    }

    fn actuate_start(&mut self, node: NodeId, ctx: &mut Ctx<'_, Tag>) -> Result<String, String> {
        let now = ctx.now();
        let push_mode = self.scenario.actuation == Actuation::Push;
        let geometry = self.scenario.physics.geometry;
        let agent = self.agent_mut(node);
        let plan = agent.planned.ok_or_else(|| format!("{node} actuation without a plan"))?;
        agent.actuations.push(ActuationRecord {
            start_ms: now.as_ms(),
            end_ms: plan.end_global.as_ms(),
            start_local_ms: plan.start_local_ms,
            motor_speed: plan.speed,
            mission_length_ms: plan.len_ms,
        });
        ctx.timer(plan.end_global, node, Tag::ActuateEnd);
        if let (true, Some(ph)) = (push_mode, self.physics.as_mut()) {
            ph.world.advance_to(now.as_ms(), ph.sample_every, &mut ph.trajectory).map_err(|e| e.to_string())?;
            let contact = if node.role == Role::MasterFf { geometry.master_contact } else { geometry.slave_contact };
            let force = plan.speed as f64 / 100.0 * geometry.f_max_n;
            let push = geometry.push(contact, force, now.as_ms(), (plan.end_global - now).as_ms());
            ph.world.add_push(push, &node.to_string()).map_err(|e| e.to_string())?;
            if ph.step_at.insert(plan.end_global) {
                ctx.schedule(plan.end_global, EventKind::PhysicsStep);
            }
        }
        let kind = if push_mode { "push" } else { "led" };
        Ok(format!("actuate {kind} speed={} len={} local_start={}", plan.speed, plan.len_ms, plan.start_local_ms))
    }

    fn actuate_end(&mut self, node: NodeId, ctx: &mut Ctx<'_, Tag>) -> Result<String, String> {
        self.agent_mut(node).planned = None;
        Ok(format!("actuation done | {}", self.resume(node, Term::atom("true"), ctx)?))
    }

    fn base_inject(&mut self, i: usize, ctx: &mut Ctx<'_, Tag>) -> Result<String, String> {
        let params = self.scenario.missions[i].params();
        let msg = CoapMessage::new(MessageType::Confirmable, Code::PUT, 0).with_path(MISSION_PATH).with_text(&params.to_payload());
        self.base.request(BASE, MOTHERSHIP, msg, "announce", None, ctx)
    }

    fn on_timeout(&mut self, node: NodeId, mid: u16, ctx: &mut Ctx<'_, Tag>) -> String {
        if node == BASE {
            return self.base.on_timeout(BASE, mid, ctx).0;
        }
        let agent = self.agent_mut(node);
        let (detail, gave_up) = agent.client.on_timeout(node, mid, ctx);
        if let Some(p) = gave_up {
            let result = Self::action_result(&p, None);
            let at = agent.busy_until.max(ctx.now());
            ctx.timer(at, node, Tag::Resume(result.clone()));
            return format!("{detail} -> {result} at t={}", at.as_ms());
        }
        detail
    }
}

impl Handler for World {
    type Tag = Tag;

    fn handle(&mut self, ctx: &mut Ctx<'_, Tag>, ev: &SimEvent<Tag>) -> Result<String, String> {
        match &ev.kind {
            EventKind::Deliver(frame) => {
                let head = format!("{}->{}", frame.src, frame.dst);
                let msg = match decode_message(&frame.bytes) {
                    Ok(m) => m,
                    Err(e) => return Ok(format!("{head} undecodable ({e}), dropped")),
                };
                let summary = format!("{head} {} bytes={}", msg.summary(), frame.on_air_bytes);
                let rest = match frame.dst.role {
                    Role::Mothership => self.server_rx(frame.src, msg, ctx)?,
                    Role::BaseStation => match self.base.on_response(&msg, frame.src, ctx) {
                        Some((p, _)) => {
                            // The base station sends one request per injection, MIDs from 1.
                            let idx = p.key.message_id.wrapping_sub(1) as usize;
                            if let Some(r) = self.injections.get_mut(idx) {
                                r.response = Some(msg.code.to_string());
                            }
                            format!("mission mid={} acknowledged", p.key.message_id)
                        }
                        None => "unmatched, dropped".into(),
                    },
                    Role::MasterFf | Role::SlaveFf => self.agent_rx(frame.dst, frame.src, msg, ctx),
                    Role::Debris => "ignored".into(),
                };
                Ok(format!("{summary} | {rest}"))
            }
            EventKind::Timer { node, tag } => match tag {
                Tag::Boot => Ok(format!("boot | {}", self.cycle(*node, ctx)?)),
                Tag::Resume(t) => self.resume(*node, t.clone(), ctx),
                Tag::Retransmit(mid) => Ok(self.on_timeout(*node, *mid, ctx)),
                Tag::Inject(i) => self.base_inject(*i, ctx),
                Tag::ServerTick => Ok(self.server_tick(ctx)),
                Tag::ActuateStart => self.actuate_start(*node, ctx),
                Tag::ActuateEnd => self.actuate_end(*node, ctx),
            },
            EventKind::PhysicsStep => {
                let Some(ph) = self.physics.as_mut() else {
                    return Ok("physics disabled".into());
                };
                ph.world.advance_to(ctx.now().as_ms(), ph.sample_every, &mut ph.trajectory).map_err(|e| e.to_string())?;
                Ok(format!("pose {}", fmt_pose(&ph.world.sample())))
            }
        }
    }
}

fn make_agent(scenario: &Scenario, id: NodeId, first_mid: u16) -> Result<Agent, ScenarioError> {
    let mut program = scenario.program(id.role)?;
    if scenario.agents.repeat {
        program.initial_beliefs.push(Term::atom("repeat"));
    }
    let state = AgentState::new(&program);
    Ok(Agent {
        id,
        clock: scenario.node(id.role).clock,
        program,
        state,
        client: Client::new(first_mid),
        busy_until: SimTime::ZERO,
        planned: None,
        actuations: Vec::new(),
    })
}

/// Everything the report needs from a finished run.
pub struct RunFacts<'a> {
    pub scenario: &'a Scenario,
    pub injections: &'a [InjectionRecord],
    pub scheduled_starts: &'a [u64],
    pub server: &'a MissionServer,
    pub master_actuations: &'a [ActuationRecord],
    pub slave_actuations: &'a [ActuationRecord],
    pub ledger: &'a Ledger,
    pub counters: crate::simnet::Counters,
    pub diagnostics: BTreeMap<String, crate::agentspeak::Diagnostics>,
    pub physics: Option<&'a WorldState>,
}

/// Runs a scenario to `t_end_ms`.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput, RunError> {
    scenario.validate()?;
    let mut net = Network::new(scenario.link, scenario.seed);
    for (name, link) in &scenario.link_overrides {
        let id = scenario.node_by_name(name).ok_or_else(|| ScenarioError::Invalid(format!("unknown node `{name}`")))?;
        net.overrides.insert(id, *link);
    }
    let mut ledger = Ledger::new(scenario.cost_table());
    if scenario.energy.jitter_sigma > 0.0 {
        let j = CostJitter::new(scenario.energy.jitter_sigma, scenario.seed ^ 0x5eed_e4e7).map_err(ScenarioError::Invalid)?;
        ledger = ledger.with_jitter(j);
    }
    let physics = if scenario.physics.enabled && !opts.no_physics && scenario.actuation == Actuation::Push {
        let g = &scenario.physics.geometry;
        let world = WorldState::new(RigidBody2D::at_rest(g.mass_kg, g.inertia_kgm2), g.dt_ms)?;
        let sample_every = ((scenario.physics.sample_ms / g.dt_ms).round() as u64).max(1);
        let first = world.sample();
        Some(Physics { world, sample_every, trajectory: vec![first], step_at: BTreeSet::new() })
    } else {
        None
    };
    let mut world = World {
        scenario: scenario.clone(),
        base: Client::new(1),
        injections: scenario
            .missions
            .iter()
            .map(|m| InjectionRecord { at_ms: m.at_ms, motor_speed: m.motor_speed, mission_length_ms: m.mission_length_ms, response: None })
            .collect(),
        server: MissionServer::new(),
        server_clock: scenario.node(Role::Mothership).clock,
        dedup: BTreeMap::new(),
        scheduled_starts: Vec::new(),
        master: make_agent(scenario, MASTER, 1)?,
        slave: make_agent(scenario, SLAVE, 1)?,
        ledger,
        physics,
    };

    let mut sim: Simulator<Tag> = Simulator::new(net);
    {
        let mut ctx = sim.ctx();
        for (i, m) in scenario.missions.iter().enumerate() {
            ctx.timer(SimTime::from_ms(m.at_ms), BASE, Tag::Inject(i));
        }
        for id in [MASTER, SLAVE] {
            ctx.timer(SimTime::from_ms(scenario.node(id.role).boot_ms), id, Tag::Boot);
        }
    }
    let t_end = SimTime::from_ms(scenario.t_end_ms);
    sim.run_until(&mut world, t_end)?;
    if let Some(ph) = world.physics.as_mut() {
        ph.world.advance_to(scenario.t_end_ms, ph.sample_every, &mut ph.trajectory)?;
    }

    let master_name = MASTER.to_string();
    let master_trace = synth_trace(
        world.ledger.events_for(&master_name),
        scenario.energy.fs_hz,
        scenario.energy.supply_v,
        scenario.energy.idle_ma,
        0.0,
        scenario.t_end_ms,
    )?;
    let diagnostics = [&world.master, &world.slave].iter().map(|a| (a.id.to_string(), a.state.diagnostics())).collect();
    let facts = RunFacts {
        scenario,
        injections: &world.injections,
        scheduled_starts: &world.scheduled_starts,
        server: &world.server,
        master_actuations: &world.master.actuations,
        slave_actuations: &world.slave.actuations,
        ledger: &world.ledger,
        counters: sim.net.counters(),
        diagnostics,
        physics: world.physics.as_ref().map(|p| &p.world),
    };
    let report = build_report(&facts);
    let trajectory = world.physics.map(|p| p.trajectory);
    Ok(RunOutput { report, events: sim.into_log(), master_trace, trajectory })
}
