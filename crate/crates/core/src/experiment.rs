//! Closed-loop simulation and the batch workloads built on it: evaluation
//! sets of observations, quantization-error sampling during exploration and
//! batches of independent goal-seeking trials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentMode, Decision, HelpRequest, Result};
use crate::par::{self, Exec};
use crate::som::{InputVector, NodeId};
use crate::world::{GridWorld, Pose, SensorModel};

/// An agent embodied in a grid world.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub world: GridWorld,
    pub sensor: SensorModel,
    pub pose: Pose,
    pub agent: Agent,
}

impl Simulation {
    pub fn new(world: GridWorld, sensor: SensorModel, agent: Agent) -> Self {
        let pose = world.start();
        Self {
            world,
            sensor,
            pose,
            agent,
        }
    }

    pub fn observe(&self) -> InputVector {
        self.world
            .sense(self.pose, self.sensor)
            .expect("simulation pose is always valid")
    }

    /// Sense, decide, act.
    pub fn cycle(&mut self) -> Result<Decision> {
        let obs = self.observe();
        let decision = self.agent.step(&obs)?;
        if let Some(action) = decision.action {
            self.pose = self
                .world
                .apply_action(self.pose, action)
                .expect("simulation pose is always valid");
        }
        Ok(decision)
    }

    /// Places the robot at `pose` without it experiencing the move.
    pub fn teleport(&mut self, pose: Pose) {
        self.pose = pose;
        self.agent.relocate();
    }
}

/// Observations of every valid pose in the world, in [`GridWorld::all_poses`] order.
pub fn pose_observations(world: &GridWorld, sensor: SensorModel, exec: Exec) -> Vec<InputVector> {
    let poses = world.all_poses();
    par::map(exec, &poses, |p| world.sense(*p, sensor).expect("valid pose"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QeSample {
    pub step: u64,
    pub quantization_error: f64,
}

/// Runs `steps` cycles, sampling the quantization error over `eval_set`
/// before the first cycle, every `sample_every` cycles, and after the last.
pub fn explore(
    sim: &mut Simulation,
    steps: u64,
    eval_set: &[InputVector],
    sample_every: u64,
    exec: Exec,
) -> Result<Vec<QeSample>> {
    let sample = |sim: &Simulation, step| -> Result<QeSample> {
        Ok(QeSample {
            step,
            quantization_error: sim.agent.som().quantization_error_with(eval_set, exec)?,
        })
    };
    let mut curve = vec![sample(sim, 0)?];
    for i in 1..=steps {
        sim.cycle()?;
        if i == steps || (sample_every > 0 && i % sample_every == 0) {
            curve.push(sample(sim, i)?);
        }
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub start: Pose,
    pub goal_node: NodeId,
    pub reached: bool,
    pub cycles: u32,
    pub initial_estimate: Option<u32>,
    pub steps_taken: u32,
    pub help: Vec<HelpRequest>,
}

/// Runs one goal-seeking episode from `start` on a copy of `sim`, without a
/// human in the loop: the episode ends when the goal node is reached, when
/// the agent stops to wait for help, or after `max_cycles`.
pub fn seek_trial(sim: &Simulation, start: Pose, goal: &InputVector, max_cycles: u32) -> Result<TrialOutcome> {
    let mut sim = sim.clone();
    sim.teleport(start);
    let ack = sim.agent.set_goal(goal.clone())?;
    let mut help: Vec<HelpRequest> = ack.help.into_iter().collect();
    let mut cycles = 0;
    while cycles < max_cycles {
        match sim.agent.mode() {
            AgentMode::Idle | AgentMode::AwaitingHelp if cycles > 0 => break,
            _ => {}
        }
        let d = sim.cycle()?;
        cycles += 1;
        help.extend(d.help);
    }
    let goal_state = sim.agent.goal().expect("goal was set");
    Ok(TrialOutcome {
        start,
        goal_node: goal_state.goal_node,
        reached: sim.agent.mode() == AgentMode::Idle,
        cycles,
        initial_estimate: goal_state.initial_estimate,
        steps_taken: goal_state.steps_taken,
        help,
    })
}

/// Independent trials, one per start pose, run under `exec`. Each trial
/// starts from the same memory; outcomes come back in `starts` order.
pub fn navigation_trials(
    sim: &Simulation,
    starts: &[Pose],
    goal: &InputVector,
    max_cycles: u32,
    exec: Exec,
) -> Result<Vec<TrialOutcome>> {
    par::map(exec, starts, |&s| seek_trial(sim, s, goal, max_cycles))
        .into_iter()
        .collect()
}

/// `count` poses drawn uniformly from the world's valid poses.
pub fn random_poses(world: &GridWorld, count: usize, seed: u64) -> Vec<Pose> {
    let poses = world.all_poses();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| poses[rng.random_range(0..poses.len())]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub reached: usize,
    pub help_requested: usize,
    pub unreached_without_help: usize,
}

pub fn summarize(outcomes: &[TrialOutcome]) -> TrialSummary {
    TrialSummary {
        trials: outcomes.len(),
        reached: outcomes.iter().filter(|o| o.reached).count(),
        help_requested: outcomes.iter().filter(|o| !o.help.is_empty()).count(),
        unreached_without_help: outcomes.iter().filter(|o| !o.reached && o.help.is_empty()).count(),
    }
}
