//! Offline workloads: training runs with a quantization-error curve and
//! navigation statistics, and goal-seeking runs from stored memory.

use anyhow::Context;
use serde::{Deserialize, Serialize};
use somnav_core::experiment::{self, QeSample, Simulation, TrialOutcome, TrialSummary};
use somnav_core::persistence::{AgentSettings, LoadedMemory};
use somnav_core::{
    Agent, AgentConfig, AgentMode, Exec, GridWorld, HelpRequest, Memory, NodeId, Pose, SensorModel, SomConfig, SomMap,
};

use crate::session::{run_scripted, DecisionRecord, Session, TimedMessage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub width: usize,
    pub height: usize,
    pub sensor: SensorModel,
    pub seed: u64,
    pub alpha_winner: f64,
    pub alpha_neighbor: f64,
    pub budget_factor: f64,
    pub min_edge_count: u32,
    pub plastic_steps: u64,
    pub steps: u64,
    /// 0 samples only at the start and the end.
    pub sample_every: u64,
    /// Pose whose observation is the goal for the navigation trials. No
    /// trials are run without one.
    pub goal: Option<Pose>,
    pub trials: usize,
    pub max_cycles: u32,
}

impl TrainSpec {
    /// Defaults used by the CLI: a 12×12 ring16 map trained for a third of
    /// the run, then frozen.
    pub fn new(steps: u64, seed: u64) -> Self {
        Self {
            width: 12,
            height: 12,
            sensor: SensorModel::Ring16,
            seed,
            alpha_winner: 0.9,
            alpha_neighbor: 0.4,
            budget_factor: 2.0,
            min_edge_count: 1,
            plastic_steps: steps / 3,
            steps,
            sample_every: 100,
            goal: None,
            trials: 20,
            max_cycles: 500,
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            budget_factor: self.budget_factor,
            exploration_seed: self.seed,
            plastic_steps: self.plastic_steps,
            min_edge_count: self.min_edge_count,
        }
    }

    pub fn simulation(&self, world: &GridWorld) -> anyhow::Result<Simulation> {
        let som = SomMap::new(SomConfig {
            width: self.width,
            height: self.height,
            dim: self.sensor.dim(),
            alpha_winner: self.alpha_winner,
            alpha_neighbor: self.alpha_neighbor,
            seed: self.seed,
        })?;
        let agent = Agent::new(som, self.agent_config())?;
        Ok(Simulation::new(world.clone(), self.sensor, agent))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigationReport {
    pub goal: Pose,
    pub goal_node: Option<NodeId>,
    pub summary: TrialSummary,
    pub success_rate: f64,
    pub outcomes: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub spec: TrainSpec,
    pub quantization_error: Vec<QeSample>,
    pub frozen: bool,
    pub transitions: usize,
    pub navigation: Option<NavigationReport>,
}

/// Explores for `spec.steps` cycles and, when a goal pose is given and the
/// memory ended up frozen, runs `spec.trials` goal-seeking trials from
/// seeded random starts. Returns the report and the trained simulation.
pub fn run_headless(world: &GridWorld, spec: &TrainSpec, exec: Exec) -> anyhow::Result<(TrainReport, Simulation)> {
    let mut sim = spec.simulation(world)?;
    let eval = experiment::pose_observations(world, spec.sensor, exec);
    let curve = experiment::explore(&mut sim, spec.steps, &eval, spec.sample_every, exec)?;
    let navigation = match spec.goal {
        Some(goal) if sim.agent.is_frozen() => Some(navigate(&sim, goal, spec, exec)?),
        _ => None,
    };
    let report = TrainReport {
        spec: spec.clone(),
        quantization_error: curve,
        frozen: sim.agent.is_frozen(),
        transitions: sim.agent.model().len(),
        navigation,
    };
    Ok((report, sim))
}

fn navigate(sim: &Simulation, goal: Pose, spec: &TrainSpec, exec: Exec) -> anyhow::Result<NavigationReport> {
    let snapshot = sim
        .world
        .sense(goal, spec.sensor)
        .with_context(|| format!("goal pose {goal:?}"))?;
    let starts = experiment::random_poses(&sim.world, spec.trials, spec.seed);
    let outcomes = experiment::navigation_trials(sim, &starts, &snapshot, spec.max_cycles, exec)?;
    let summary = experiment::summarize(&outcomes);
    Ok(NavigationReport {
        goal,
        goal_node: outcomes.first().map(|o| o.goal_node),
        success_rate: if summary.trials == 0 {
            0.0
        } else {
            summary.reached as f64 / summary.trials as f64
        },
        summary,
        outcomes,
    })
}

/// Saved memory as stored in a file.
pub fn memory_settings(sim: &Simulation) -> AgentSettings {
    AgentSettings::from_config(sim.agent.config(), sim.agent.is_frozen(), sim.agent.som().version())
}

/// Rebuilds an agent from a memory file. A frozen file resumes past its
/// plastic phase; an unfrozen one starts it over.
pub fn agent_from_file(loaded: LoadedMemory, config: AgentConfig) -> anyhow::Result<Agent> {
    let lifetime_steps = if loaded.agent.frozen {
        loaded.agent.plastic_steps
    } else {
        0
    };
    Ok(Agent::from_memory(
        Memory {
            som: loaded.som,
            model: loaded.model,
            frozen: loaded.agent.frozen,
            lifetime_steps,
            trace: None,
        },
        config,
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub cycles: u64,
    pub final_pose: Pose,
    pub final_mode: AgentMode,
    pub reached: bool,
    pub help: Vec<HelpRequest>,
    pub decisions: Vec<DecisionRecord>,
}

/// Replays `timeline` for `cycles` cycles and summarizes the run.
pub fn run_session(session: &mut Session, timeline: &[TimedMessage], cycles: u64) -> anyhow::Result<RunReport> {
    let decisions = run_scripted(session, timeline, cycles)?;
    let help = decisions.iter().filter_map(|d| d.decision.help.clone()).collect();
    let mode = session.agent().mode();
    Ok(RunReport {
        cycles,
        final_pose: session.simulation().pose,
        final_mode: mode,
        reached: mode == AgentMode::Idle,
        help,
        decisions,
    })
}
