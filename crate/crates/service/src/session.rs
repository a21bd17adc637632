//! The robot, its world and the operator-facing state that wraps them. A
//! [`Session`] is driven one message or one cycle at a time; the live server
//! and the scripted runner both go through it, so they cannot disagree on
//! what a message means.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use somnav_core::experiment::Simulation;
use somnav_core::{Agent, AgentError, Decision, GridWorld, InputVector, Pose, SensorModel};

use crate::protocol::{ClientMessage, ErrorCode, ServerMessage, StateMessage};

/// A client message stamped with the tick at which it took effect, i.e.
/// the number of cycles completed before it was applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedMessage {
    pub tick: u64,
    pub message: ClientMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    /// Tick reached by the cycle that produced the decision.
    pub tick: u64,
    pub decision: Decision,
}

/// What applying one client message produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    /// For the sender only.
    pub reply: Vec<ServerMessage>,
    /// For every connected client.
    pub broadcast: Vec<ServerMessage>,
}

#[derive(Debug, Clone)]
pub struct CycleRecord {
    pub decision: DecisionRecord,
    /// State first, then any help request raised this cycle.
    pub messages: Vec<ServerMessage>,
}

#[derive(Debug, Clone)]
pub struct Session {
    sim: Simulation,
    snapshots: BTreeMap<u64, InputVector>,
    next_snapshot: u64,
    tick: u64,
    paused: bool,
}

impl Session {
    pub fn new(world: GridWorld, sensor: SensorModel, agent: Agent) -> Self {
        Self {
            sim: Simulation::new(world, sensor, agent),
            snapshots: BTreeMap::new(),
            next_snapshot: 1,
            tick: 0,
            paused: false,
        }
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn agent(&self) -> &Agent {
        &self.sim.agent
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn snapshot(&self, id: u64) -> Option<&InputVector> {
        self.snapshots.get(&id)
    }

    /// Moves the robot to `pose` as if carried there.
    pub fn place(&mut self, pose: Pose) -> anyhow::Result<()> {
        self.sim.world.sense(pose, self.sim.sensor)?;
        self.sim.teleport(pose);
        Ok(())
    }

    /// Stores a candidate goal and returns its id. Ids start at 1.
    pub fn add_snapshot(&mut self, observation: InputVector) -> anyhow::Result<u64> {
        let dim = self.sim.sensor.dim();
        anyhow::ensure!(
            observation.len() == dim,
            "snapshot has {} values, the {:?} sensor produces {dim}",
            observation.len(),
            self.sim.sensor
        );
        let id = self.next_snapshot;
        self.next_snapshot += 1;
        self.snapshots.insert(id, observation);
        Ok(id)
    }

    /// Applies an operator message between cycles.
    pub fn apply(&mut self, message: &ClientMessage) -> Outcome {
        let ack = ServerMessage::Ack { of_seq: message.seq() };
        let mut out = Outcome::default();
        match message {
            ClientMessage::SetGoal { snapshot_id, .. } => {
                let Some(snapshot) = self.snapshots.get(snapshot_id).cloned() else {
                    out.reply.push(ServerMessage::error(
                        ErrorCode::UnknownSnapshot,
                        format!("no snapshot with id {snapshot_id}"),
                    ));
                    return out;
                };
                match self.sim.agent.set_goal(snapshot) {
                    Ok(goal) => {
                        out.reply.push(ack);
                        out.broadcast.extend(goal.help.as_ref().map(ServerMessage::from));
                    }
                    Err(AgentError::MemoryPlastic) => out.reply.push(ServerMessage::error(
                        ErrorCode::MemoryPlastic,
                        "memory is still plastic; send freeze first",
                    )),
                    Err(e) => out.reply.push(ServerMessage::error(ErrorCode::Internal, e.to_string())),
                }
            }
            ClientMessage::Command { action, .. } => {
                self.sim.agent.override_action(*action);
                out.reply.push(ack);
            }
            ClientMessage::Resume { .. } => {
                self.paused = false;
                out.reply.push(ack);
            }
            ClientMessage::Pause { .. } => {
                self.paused = true;
                out.reply.push(ack);
            }
            ClientMessage::SaveSnapshot { .. } => {
                let id = self.next_snapshot;
                self.next_snapshot += 1;
                self.snapshots.insert(id, self.sim.observe());
                out.reply.push(ack);
                out.reply.push(ServerMessage::SnapshotSaved { snapshot_id: id });
            }
            ClientMessage::Freeze { .. } => {
                self.sim.agent.freeze_memory();
                out.reply.push(ack);
            }
        }
        out
    }

    /// Runs one perceive-decide-act cycle. Ignores `paused`; callers that
    /// keep wall-clock time check it themselves.
    pub fn cycle(&mut self) -> Result<CycleRecord, AgentError> {
        let decision = self.sim.cycle()?;
        self.tick += 1;
        let mut messages = vec![ServerMessage::State(self.state_message())];
        messages.extend(decision.help.as_ref().map(ServerMessage::from));
        Ok(CycleRecord {
            decision: DecisionRecord {
                tick: self.tick,
                decision,
            },
            messages,
        })
    }

    /// Current telemetry with `seq` left at 0 for the connection to fill in.
    pub fn state_message(&self) -> StateMessage {
        let state = self.sim.agent.current_state();
        let plan = state.last_plan.unwrap_or_default();
        StateMessage {
            seq: 0,
            tick: self.tick,
            pose: self.sim.pose,
            mode: state.mode,
            current_node: state.current_node,
            goal_node: state.goal.as_ref().map(|g| g.goal_node),
            plan_nodes: plan.nodes,
            plan_actions: plan.actions,
            steps_taken: state.goal.as_ref().map_or(0, |g| g.steps_taken),
            initial_estimate: state.goal.as_ref().and_then(|g| g.initial_estimate),
            observation: self.sim.observe().into_inner(),
        }
    }
}

/// Replays `timeline` against `session` for `cycles` cycles. Messages for
/// tick `k` are applied, in timeline order, right before the cycle that
/// completes tick `k + 1`. Pause and resume are acknowledged but do not
/// stop time here: the timeline is the clock.
pub fn run_scripted(
    session: &mut Session,
    timeline: &[TimedMessage],
    cycles: u64,
) -> Result<Vec<DecisionRecord>, AgentError> {
    let mut order: Vec<&TimedMessage> = timeline.iter().collect();
    order.sort_by_key(|m| m.tick);
    let mut pending = order.into_iter().peekable();
    let mut decisions = Vec::with_capacity(cycles as usize);
    for _ in 0..cycles {
        while let Some(m) = pending.next_if(|m| m.tick <= session.tick()) {
            session.apply(&m.message);
        }
        decisions.push(session.cycle()?.decision);
    }
    Ok(decisions)
}

/// Reads a timeline written as one JSON object per line, e.g.
/// `{"tick": 3, "message": {"type": "command", "action": "forward"}}`.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_timeline(text: &str) -> anyhow::Result<Vec<TimedMessage>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| anyhow::anyhow!("timeline line {}: {e}", i + 1)))
        .collect()
}
