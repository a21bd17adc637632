//! Associative-memory navigation engine.
//!
//! Sensory observations are clustered by a self-organizing map ([`som`]);
//! transitions between map nodes under the robot's discrete actions form a
//! Markov chain that is searched for a path to a goal node
//! ([`transition`]). The [`agent`] runs the decision cycle, including help
//! requests and single-cycle human overrides, against the deterministic
//! [`world`] simulator. [`persistence`] stores learned memory and
//! [`experiment`] runs batch workloads on top of everything else.

pub mod agent;
pub mod experiment;
pub mod par;
pub mod persistence;
pub mod som;
pub mod transition;
pub mod world;

pub use agent::{
    Agent, AgentConfig, AgentError, AgentMode, Decision, DecisionSource, Goal, GoalAck, HelpReason, HelpRequest,
    Memory, StateSnapshot,
};
pub use par::Exec;
pub use som::{InputVector, NodeId, SomConfig, SomError, SomMap};
pub use transition::{ActionId, Plan, TransitionError, TransitionModel};
pub use world::{GridWorld, Heading, Pose, SensorModel, WorldError};
