//! The decision cycle: perceive, activate a memory, plan through the chain,
//! act, and hand control to a human when asked or when stuck.
//!
//! Each call to [`Agent::step`] is one decision cycle. Plans are recomputed
//! every cycle and only their first action is executed; the plan length at
//! goal-set time is kept as the estimate against which progress is judged.
//! A human override replaces exactly one cycle's action.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::som::{InputVector, NodeId, SomError, SomMap};
use crate::transition::{ActionId, Plan, TransitionError, TransitionModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Som(#[from] SomError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error("goals can only be set once memory is frozen")]
    MemoryPlastic,
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, AgentError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Multiple of the initial plan estimate the agent may spend before it
    /// asks for help.
    pub budget_factor: f64,
    /// Seed of the uniform exploration policy.
    pub exploration_seed: u64,
    /// Number of cycles during which the SOM trains. Memory freezes
    /// automatically once the agent has lived this long.
    pub plastic_steps: u64,
    /// Observations needed before a transition becomes a planning edge.
    pub min_edge_count: u32,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            budget_factor: 1.0,
            exploration_seed: 0,
            plastic_steps: 0,
            min_edge_count: 1,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget_factor < 1.0 || !self.budget_factor.is_finite() {
            return Err(AgentError::InvalidConfig(format!(
                "budget_factor must be a finite value >= 1 (got {})",
                self.budget_factor
            )));
        }
        if self.min_edge_count == 0 {
            return Err(AgentError::InvalidConfig("min_edge_count must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    Exploring,
    Seeking,
    AwaitingHelp,
    /// The cycle just completed executed a human command.
    Overridden,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Autonomous,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HelpReason {
    EstimateExceeded,
    NoPath,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelpRequest {
    pub reason: HelpReason,
    pub at_node: NodeId,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub snapshot: InputVector,
    pub goal_node: NodeId,
    /// Length of the first plan found for this goal. `None` until a plan
    /// exists.
    pub initial_estimate: Option<u32>,
    /// Autonomous actions executed while seeking this goal.
    pub steps_taken: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Option<ActionId>,
    pub source: DecisionSource,
    pub plan_snapshot: Option<Plan>,
    pub help: Option<HelpRequest>,
}

impl Decision {
    fn autonomous(action: Option<ActionId>) -> Self {
        Self {
            action,
            source: DecisionSource::Autonomous,
            plan_snapshot: None,
            help: None,
        }
    }
}

/// Result of [`Agent::set_goal`].
#[derive(Debug, Clone, PartialEq)]
pub struct GoalAck {
    pub goal: Goal,
    pub help: Option<HelpRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSnapshot {
    pub mode: AgentMode,
    pub current_node: Option<NodeId>,
    pub goal: Option<Goal>,
    pub last_plan: Option<Plan>,
    pub pending_help: Option<HelpRequest>,
    pub pending_override: Option<ActionId>,
    pub lifetime_steps: u64,
    pub som_version: u64,
    pub frozen: bool,
    pub transitions: usize,
}

/// Everything the agent has learned, plus the last executed action whose
/// outcome has not been observed yet.
#[derive(Debug, Clone, PartialEq)]
pub struct Memory {
    pub som: SomMap,
    pub model: TransitionModel,
    pub frozen: bool,
    pub lifetime_steps: u64,
    pub trace: Option<(NodeId, ActionId)>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    som: SomMap,
    model: TransitionModel,
    frozen: bool,
    mode: AgentMode,
    /// Mode to return to once an overridden cycle is over.
    resume_mode: AgentMode,
    goal: Option<Goal>,
    current_node: Option<NodeId>,
    trace: Option<(NodeId, ActionId)>,
    pending_override: Option<ActionId>,
    lifetime_steps: u64,
    last_plan: Option<Plan>,
    pending_help: Option<HelpRequest>,
    emitted: [bool; 2],
}

impl Agent {
    pub fn new(som: SomMap, config: AgentConfig) -> Result<Self> {
        let model = TransitionModel::with_min_edge_count(som.node_count(), som.version(), config.min_edge_count);
        Self::from_memory(
            Memory {
                som,
                model,
                frozen: false,
                lifetime_steps: 0,
                trace: None,
            },
            config,
        )
    }

    /// Rebuilds an agent around existing memory. The agent starts exploring
    /// with no goal and no pending interaction.
    pub fn from_memory(memory: Memory, config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let mut model = memory.model;
        if model.node_count() != memory.som.node_count() {
            return Err(AgentError::InvalidConfig(format!(
                "transition model has {} nodes, SOM has {}",
                model.node_count(),
                memory.som.node_count()
            )));
        }
        if model.min_edge_count() != config.min_edge_count {
            let mut rebuilt =
                TransitionModel::with_min_edge_count(model.node_count(), model.som_version(), config.min_edge_count);
            for (f, a, t, c) in model.iter() {
                rebuilt.add_count(f, a, t, c)?;
            }
            model = rebuilt;
        }
        let mut agent = Self {
            config,
            som: memory.som,
            model,
            frozen: memory.frozen,
            mode: AgentMode::Exploring,
            resume_mode: AgentMode::Exploring,
            goal: None,
            current_node: None,
            trace: memory.trace,
            pending_override: None,
            lifetime_steps: memory.lifetime_steps,
            last_plan: None,
            pending_help: None,
            emitted: [false; 2],
        };
        if !agent.frozen && agent.lifetime_steps >= agent.config.plastic_steps {
            agent.freeze_memory();
        }
        Ok(agent)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn som(&self) -> &SomMap {
        &self.som
    }

    pub fn model(&self) -> &TransitionModel {
        &self.model
    }

    pub fn mode(&self) -> AgentMode {
        self.mode
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn current_node(&self) -> Option<NodeId> {
        self.current_node
    }

    pub fn goal(&self) -> Option<&Goal> {
        self.goal.as_ref()
    }

    pub fn lifetime_steps(&self) -> u64 {
        self.lifetime_steps
    }

    pub fn memory(&self) -> Memory {
        Memory {
            som: self.som.clone(),
            model: self.model.clone(),
            frozen: self.frozen,
            lifetime_steps: self.lifetime_steps,
            trace: self.trace,
        }
    }

    /// One decision cycle on a fresh observation.
    pub fn step(&mut self, observation: &InputVector) -> Result<Decision> {
        let obs = observation.as_slice();
        if obs.len() != self.som.dim() {
            return Err(SomError::DimensionMismatch {
                expected: self.som.dim(),
                got: obs.len(),
            }
            .into());
        }
        if self.mode == AgentMode::Overridden {
            self.mode = self.resume_mode;
        }
        if !self.frozen && self.lifetime_steps >= self.config.plastic_steps {
            self.freeze_memory();
        }

        let node = if self.frozen {
            self.som.activate(obs)?
        } else {
            self.som.train_step(obs)?
        };
        if let Some((prev, action)) = self.trace.take() {
            self.model.record_transition(prev, action, node)?;
        }
        self.current_node = Some(node);
        let cycle = self.lifetime_steps;
        self.lifetime_steps += 1;

        let decision = if let Some(action) = self.pending_override.take() {
            self.resume_mode = match self.mode {
                AgentMode::AwaitingHelp => AgentMode::Seeking,
                m => m,
            };
            self.mode = AgentMode::Overridden;
            self.pending_help = None;
            Decision {
                action: Some(action),
                source: DecisionSource::Human,
                plan_snapshot: None,
                help: None,
            }
        } else {
            match self.mode {
                AgentMode::Exploring => Decision::autonomous(Some(self.exploration_action(cycle))),
                AgentMode::Seeking => self.seek(node)?,
                AgentMode::AwaitingHelp | AgentMode::Idle | AgentMode::Overridden => Decision::autonomous(None),
            }
        };

        if let Some(action) = decision.action {
            self.trace = Some((node, action));
        }
        Ok(decision)
    }

    /// Uniform over the motion commands, a pure function of the seed and the
    /// cycle number.
    fn exploration_action(&self, cycle: u64) -> ActionId {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.exploration_seed);
        rng.set_stream(cycle);
        ActionId::ALL[rng.random_range(0..3)]
    }

    fn seek(&mut self, node: NodeId) -> Result<Decision> {
        let goal = self.goal.as_ref().expect("seeking without a goal");
        let goal_node = goal.goal_node;
        if node == goal_node {
            self.mode = AgentMode::Idle;
            self.last_plan = None;
            return Ok(Decision::autonomous(None));
        }
        let plan = match self.model.plan(node, goal_node) {
            Ok(plan) => plan,
            Err(TransitionError::NoPath { .. }) => {
                self.mode = AgentMode::AwaitingHelp;
                self.last_plan = None;
                let help = self.emit_help(
                    HelpReason::NoPath,
                    node,
                    format!("no path from {node} to goal {goal_node}"),
                );
                return Ok(Decision {
                    help,
                    ..Decision::autonomous(None)
                });
            }
            Err(e) => return Err(e.into()),
        };
        self.emitted[HelpReason::NoPath as usize] = false;

        let goal = self.goal.as_mut().expect("seeking without a goal");
        let estimate = *goal.initial_estimate.get_or_insert(plan.estimate);
        let budget = (self.config.budget_factor * estimate as f64).ceil() as u64;
        if goal.steps_taken as u64 > budget {
            let detail = format!(
                "{} actions taken against an estimate of {estimate} (budget {budget})",
                goal.steps_taken
            );
            self.mode = AgentMode::AwaitingHelp;
            self.last_plan = Some(plan.clone());
            let help = self.emit_help(HelpReason::EstimateExceeded, node, detail);
            return Ok(Decision {
                plan_snapshot: Some(plan),
                help,
                ..Decision::autonomous(None)
            });
        }
        goal.steps_taken += 1;
        let action = plan.first_action();
        self.last_plan = Some(plan.clone());
        Ok(Decision {
            plan_snapshot: Some(plan),
            ..Decision::autonomous(action)
        })
    }

    /// Edge-triggered: a reason fires once until the goal changes or, for
    /// `NoPath`, until a plan is found again.
    fn emit_help(&mut self, reason: HelpReason, at_node: NodeId, detail: String) -> Option<HelpRequest> {
        let req = HelpRequest {
            reason,
            at_node,
            detail,
        };
        self.pending_help = Some(req.clone());
        if std::mem::replace(&mut self.emitted[reason as usize], true) {
            None
        } else {
            Some(req)
        }
    }

    /// Expresses a goal as a sensory snapshot. Memory must be frozen so that
    /// node identities stay stable while the goal is pursued.
    pub fn set_goal(&mut self, snapshot: InputVector) -> Result<GoalAck> {
        let goal_node = self.som.activate(snapshot.as_slice())?;
        if !self.frozen {
            return Err(AgentError::MemoryPlastic);
        }
        self.emitted = [false; 2];
        self.pending_help = None;
        self.last_plan = None;
        self.mode = AgentMode::Seeking;
        self.resume_mode = AgentMode::Seeking;
        let mut goal = Goal {
            snapshot,
            goal_node,
            initial_estimate: None,
            steps_taken: 0,
        };
        let mut help = None;
        if let Some(current) = self.current_node {
            match self.model.plan(current, goal_node) {
                Ok(plan) => {
                    goal.initial_estimate = Some(plan.estimate);
                    self.last_plan = Some(plan);
                }
                Err(TransitionError::NoPath { .. }) => {
                    self.mode = AgentMode::AwaitingHelp;
                    self.resume_mode = AgentMode::AwaitingHelp;
                    help = self.emit_help(
                        HelpReason::NoPath,
                        current,
                        format!("no path from {current} to goal {goal_node}"),
                    );
                }
                Err(e) => return Err(e.into()),
            }
        }
        self.goal = Some(goal.clone());
        Ok(GoalAck { goal, help })
    }

    /// Replaces the next cycle's action. Later calls before that cycle win.
    pub fn override_action(&mut self, action: ActionId) {
        self.pending_override = Some(action);
    }

    /// Ends the plastic phase: training stops and transitions gathered
    /// against the moving map are discarded.
    pub fn freeze_memory(&mut self) {
        if self.frozen {
            return;
        }
        self.frozen = true;
        self.model.clear(self.som.version());
        self.trace = None;
    }

    /// Forgets where the robot is, e.g. after it was carried to a new spot.
    /// The next observation starts a fresh trace.
    pub fn relocate(&mut self) {
        self.current_node = None;
        self.trace = None;
    }

    /// Drops the plan kept for observability. Decisions never read it.
    pub fn clear_cached_plan(&mut self) {
        self.last_plan = None;
    }

    pub fn current_state(&self) -> StateSnapshot {
        StateSnapshot {
            mode: self.mode,
            current_node: self.current_node,
            goal: self.goal.clone(),
            last_plan: self.last_plan.clone(),
            pending_help: self.pending_help.clone(),
            pending_override: self.pending_override,
            lifetime_steps: self.lifetime_steps,
            som_version: self.som.version(),
            frozen: self.frozen,
            transitions: self.model.len(),
        }
    }
}
