//! BDI reasoning cycle: belief base, event queue and intention stacks.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use super::ast::{AgentProgram, BodyStep, Condition, Plan, RelOp, TriggerEvent, TriggerKind};
use super::term::{unify, Substitution, Term};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("relational expression `{expr}` has an unbound operand")]
    Unbound { expr: String },
    #[error("cannot compare `{lhs}` with `{rhs}`")]
    Incomparable { lhs: String, rhs: String },
    #[error("belief `{0}` is not ground")]
    NonGroundBelief(String),
    #[error("action result `{0}` is not ground")]
    NonGroundResult(String),
    #[error("no action is in flight")]
    NoActionInFlight,
}

/// A request for the host to carry out an action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRequest {
    pub name: String,
    pub args: Vec<Term>,
}

impl ActionRequest {
    /// Host-internal actions are written with a leading `.`.
    pub fn is_internal(&self) -> bool {
        self.name.starts_with('.')
    }
}

impl std::fmt::Display for ActionRequest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let step = BodyStep::Action { name: self.name.clone(), args: self.args.clone() };
        write!(f, "{step}")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    /// Events dropped because no plan was applicable.
    pub no_plan: u32,
    /// Intentions abandoned (failed test goal or unhandled subgoal).
    pub dropped_intentions: u32,
}

type IntentionId = u64;

#[derive(Debug, Clone, PartialEq)]
struct QueuedEvent {
    trigger: TriggerEvent,
    intention: Option<IntentionId>,
}

#[derive(Debug, Clone, PartialEq)]
struct Frame {
    plan: Plan,
    subst: Substitution,
    pc: usize,
}

impl Frame {
    fn done(&self) -> bool {
        self.pc >= self.plan.body.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Intention {
    id: IntentionId,
    frames: Vec<Frame>,
    awaiting_subgoal: bool,
}

impl Intention {
    fn pop_finished(&mut self) {
        while self.frames.last().is_some_and(Frame::done) {
            self.frames.pop();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct InFlight {
    intention: IntentionId,
    request: ActionRequest,
}

/// Runtime state of one agent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentState {
    beliefs: Vec<Term>,
    events: VecDeque<QueuedEvent>,
    intentions: VecDeque<Intention>,
    in_flight: Option<InFlight>,
    diagnostics: Diagnostics,
    next_intention: IntentionId,
    instances: u64,
}

fn compare(lhs: &Term, op: RelOp, rhs: &Term) -> Result<bool, AgentError> {
    use std::cmp::Ordering;
    if matches!(op, RelOp::Eq | RelOp::Ne) {
        return Ok((lhs == rhs) == (op == RelOp::Eq));
    }
    let ord = match (lhs, rhs) {
        (Term::Num(a), Term::Num(b)) => a.partial_cmp(b),
        (Term::Atom(a), Term::Atom(b)) | (Term::Str(a), Term::Str(b)) => Some(a.cmp(b)),
        _ => None,
    };
    let ord = ord.ok_or_else(|| AgentError::Incomparable { lhs: lhs.to_string(), rhs: rhs.to_string() })?;
    Ok(match op {
        RelOp::Lt => ord == Ordering::Less,
        RelOp::Le => ord != Ordering::Greater,
        RelOp::Gt => ord == Ordering::Greater,
        RelOp::Ge => ord != Ordering::Less,
        RelOp::Eq | RelOp::Ne => unreachable!(),
    })
}

/// First substitution (extending `s`) that satisfies every condition, searching
/// conditions left to right and beliefs in belief-base order.
pub fn check_context(conditions: &[Condition], beliefs: &[Term], s: &Substitution) -> Result<Option<Substitution>, AgentError> {
    let Some((first, rest)) = conditions.split_first() else {
        return Ok(Some(s.clone()));
    };
    match first {
        Condition::Literal(lit) => {
            for b in beliefs {
                if let Some(s2) = unify(lit, b, s) {
                    if let Some(found) = check_context(rest, beliefs, &s2)? {
                        return Ok(Some(found));
                    }
                }
            }
            Ok(None)
        }
        Condition::Not(lit) => {
            if beliefs.iter().any(|b| unify(lit, b, s).is_some()) {
                Ok(None)
            } else {
                check_context(rest, beliefs, s)
            }
        }
        Condition::Rel(l, op, r) => {
            let (lv, rv) = (s.apply(l), s.apply(r));
            if !lv.is_ground() || !rv.is_ground() {
                return Err(AgentError::Unbound { expr: first.to_string() });
            }
            if compare(&lv, *op, &rv)? {
                check_context(rest, beliefs, s)
            } else {
                Ok(None)
            }
        }
    }
}

impl AgentState {
    /// Fresh state with the program's initial beliefs and goals posted.
    pub fn new(program: &AgentProgram) -> Self {
        let mut st = AgentState::default();
        for b in &program.initial_beliefs {
            st.add_belief_silently(b.clone());
        }
        for g in &program.initial_goals {
            st.post_event(TriggerEvent::goal_add(g.clone()));
        }
        st
    }

    fn add_belief_silently(&mut self, b: Term) {
        if !self.beliefs.contains(&b) {
            self.beliefs.push(b);
        }
    }

    pub fn beliefs(&self) -> &[Term] {
        &self.beliefs
    }

    /// Pending events, oldest first.
    pub fn queued_events(&self) -> impl Iterator<Item = &TriggerEvent> {
        self.events.iter().map(|e| &e.trigger)
    }

    pub fn intention_count(&self) -> usize {
        self.intentions.len()
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn pending_action(&self) -> Option<&ActionRequest> {
        self.in_flight.as_ref().map(|f| &f.request)
    }

    /// True when another reasoning step could make progress.
    pub fn has_work(&self) -> bool {
        self.in_flight.is_none() && (!self.events.is_empty() || self.intentions.iter().any(|i| !i.awaiting_subgoal))
    }

    /// Queues an event. Belief events update the belief base first: adding a
    /// present belief or deleting an absent one is a no-op that queues nothing.
    pub fn post_event(&mut self, event: TriggerEvent) {
        self.post(event, None);
    }

    fn post(&mut self, event: TriggerEvent, intention: Option<IntentionId>) {
        match event.kind {
            TriggerKind::BeliefAdd => {
                if self.beliefs.contains(&event.content) {
                    return;
                }
                self.beliefs.push(event.content.clone());
            }
            TriggerKind::BeliefDel => {
                let Some(i) = self.beliefs.iter().position(|b| *b == event.content) else {
                    return;
                };
                self.beliefs.remove(i);
            }
            TriggerKind::GoalAdd | TriggerKind::GoalDel => {}
        }
        self.events.push_back(QueuedEvent { trigger: event, intention });
    }

    fn select_plan(&mut self, program: &AgentProgram, event: &TriggerEvent) -> Result<Option<Frame>, AgentError> {
        for plan in &program.plans {
            if plan.trigger.kind != event.kind {
                continue;
            }
            let suffix = format!("_{}", self.instances);
            let plan = plan.renamed(&suffix);
            let Some(s) = unify(&plan.trigger.content, &event.content, &Substitution::new()) else {
                continue;
            };
            if let Some(s) = check_context(&plan.context, &self.beliefs, &s)? {
                self.instances += 1;
                return Ok(Some(Frame { plan, subst: s, pc: 0 }));
            }
        }
        Ok(None)
    }

    fn drop_intention(&mut self, id: IntentionId) {
        if let Some(i) = self.intentions.iter().position(|it| it.id == id) {
            self.intentions.remove(i);
            self.diagnostics.dropped_intentions += 1;
        }
    }

    /// One reasoning cycle: handle the oldest event, then execute one body step
    /// of the first runnable intention (round-robin). A no-op while an action is
    /// in flight.
    pub fn reasoning_step(&mut self, program: &AgentProgram) -> Result<Option<ActionRequest>, AgentError> {
        if self.in_flight.is_some() {
            return Ok(None);
        }
        if let Some(ev) = self.events.pop_front() {
            match self.select_plan(program, &ev.trigger)? {
                None => {
                    self.diagnostics.no_plan += 1;
                    if let Some(id) = ev.intention {
                        self.drop_intention(id);
                    }
                }
                Some(frame) => match ev.intention.and_then(|id| self.intentions.iter_mut().find(|i| i.id == id)) {
                    Some(it) => {
                        it.pop_finished();
                        it.frames.push(frame);
                        it.awaiting_subgoal = false;
                    }
                    None => {
                        let id = self.next_intention;
                        self.next_intention += 1;
                        self.intentions.push_back(Intention { id, frames: vec![frame], awaiting_subgoal: false });
                    }
                },
            }
        }

        let Some(idx) = self.intentions.iter().position(|i| !i.awaiting_subgoal) else {
            return Ok(None);
        };
        let mut it = self.intentions.remove(idx).expect("index from position");
        let out = self.execute_step(&mut it)?;
        it.pop_finished();
        let awaiting_action = self.in_flight.as_ref().is_some_and(|f| f.intention == it.id);
        if !it.frames.is_empty() || awaiting_action {
            self.intentions.push_back(it);
        }
        Ok(out)
    }

    fn execute_step(&mut self, it: &mut Intention) -> Result<Option<ActionRequest>, AgentError> {
        it.pop_finished();
        let Some(frame) = it.frames.last_mut() else {
            return Ok(None);
        };
        let step = frame.plan.body[frame.pc].clone();
        frame.pc += 1;
        match step {
            BodyStep::Action { name, args } => {
                let request = ActionRequest { name, args: args.iter().map(|a| frame.subst.apply(a)).collect() };
                self.in_flight = Some(InFlight { intention: it.id, request: request.clone() });
                Ok(Some(request))
            }
            BodyStep::AchieveGoal(g) => {
                let goal = frame.subst.apply(&g);
                it.awaiting_subgoal = true;
                self.post(TriggerEvent::goal_add(goal), Some(it.id));
                Ok(None)
            }
            BodyStep::TestGoal(g) => {
                let query = frame.subst.apply(&g);
                match self.beliefs.iter().find_map(|b| unify(&query, b, &frame.subst)) {
                    Some(s) => frame.subst = s,
                    None => {
                        it.frames.clear();
                        self.diagnostics.dropped_intentions += 1;
                    }
                }
                Ok(None)
            }
            BodyStep::AddBelief(b) => {
                let b = frame.subst.apply(&b);
                if !b.is_ground() {
                    return Err(AgentError::NonGroundBelief(b.to_string()));
                }
                self.post(TriggerEvent::belief_add(b), None);
                Ok(None)
            }
            BodyStep::DelBelief(b) => {
                let pattern = frame.subst.apply(&b);
                let found = self.beliefs.iter().find_map(|belief| unify(&pattern, belief, &frame.subst).map(|s| (belief.clone(), s)));
                if let Some((belief, s)) = found {
                    frame.subst = s;
                    self.post(TriggerEvent::belief_del(belief), None);
                }
                Ok(None)
            }
        }
    }

    /// Completes the in-flight action. A result other than the atom `true` is
    /// added to the belief base as a percept (posting `+result`).
    pub fn resolve_action(&mut self, result: Term) -> Result<(), AgentError> {
        let flight = self.in_flight.take().ok_or(AgentError::NoActionInFlight)?;
        if result != Term::atom("true") {
            if !result.is_ground() {
                self.in_flight = Some(flight);
                return Err(AgentError::NonGroundResult(result.to_string()));
            }
            self.post(TriggerEvent::belief_add(result), None);
        }
        if let Some(i) = self.intentions.iter().position(|it| it.id == flight.intention) {
            self.intentions[i].pop_finished();
            if self.intentions[i].frames.is_empty() {
                self.intentions.remove(i);
            }
        }
        Ok(())
    }
}
