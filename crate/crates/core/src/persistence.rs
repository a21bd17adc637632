//! `.somnav.json` memory snapshots.
//!
//! The file is a JSON object with keys in sorted order at every level, so
//! identical memories serialize to identical bytes. Floating-point values
//! are written in shortest round-trip form and read back bit for bit.
//! Only version 1 is understood; any other version is rejected.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentConfig;
use crate::som::{NodeId, SomConfig, SomMap};
use crate::transition::{ActionId, TransitionModel};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("cannot write memory: {0}")]
    SinkUnwritable(#[source] std::io::Error),
    #[error("cannot read memory: {0}")]
    SourceUnreadable(#[source] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported memory format version {0} (expected {FORMAT_VERSION})")]
    VersionUnsupported(u64),
    #[error("invariant violated at `{path}`: {message}")]
    InvariantViolation { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, PersistError>;

fn violation(path: impl Into<String>, message: impl Into<String>) -> PersistError {
    PersistError::InvariantViolation {
        path: path.into(),
        message: message.into(),
    }
}

// Field order below is alphabetical: serde emits struct fields in
// declaration order, which gives the canonical sorted-key layout.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRoot {
    agent: AgentSection,
    som: SomSection,
    transitions: Vec<TransitionEntry>,
    version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentSection {
    budget_factor: f64,
    frozen: bool,
    plastic_steps: u64,
    som_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SomSection {
    alpha_neighbor: f64,
    alpha_winner: f64,
    dim: usize,
    height: usize,
    seed: u64,
    weights: Vec<Vec<f64>>,
    width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    action: ActionId,
    count: u32,
    from: usize,
    to: usize,
}

/// The agent-level settings stored alongside the memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSettings {
    pub budget_factor: f64,
    pub plastic_steps: u64,
    pub frozen: bool,
    pub som_version: u64,
}

impl AgentSettings {
    pub fn from_config(config: &AgentConfig, frozen: bool, som_version: u64) -> Self {
        Self {
            budget_factor: config.budget_factor,
            plastic_steps: config.plastic_steps,
            frozen,
            som_version,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedMemory {
    pub som: SomMap,
    pub model: TransitionModel,
    pub agent: AgentSettings,
}

/// Serializes memory to its canonical text form.
pub fn encode_memory(som: &SomMap, model: &TransitionModel, agent: &AgentSettings) -> Result<String> {
    if model.node_count() != som.node_count() {
        return Err(violation(
            "transitions",
            format!(
                "transition model has {} nodes but the SOM has {}",
                model.node_count(),
                som.node_count()
            ),
        ));
    }
    let cfg = som.config();
    let root = FileRoot {
        agent: AgentSection {
            budget_factor: agent.budget_factor,
            frozen: agent.frozen,
            plastic_steps: agent.plastic_steps,
            som_version: agent.som_version,
        },
        som: SomSection {
            alpha_neighbor: cfg.alpha_neighbor,
            alpha_winner: cfg.alpha_winner,
            dim: cfg.dim,
            height: cfg.height,
            seed: cfg.seed,
            weights: som.weight_vectors().map(<[f64]>::to_vec).collect(),
            width: cfg.width,
        },
        transitions: model
            .iter()
            .map(|(f, a, t, c)| TransitionEntry {
                action: a,
                count: c,
                from: f.0,
                to: t.0,
            })
            .collect(),
        version: FORMAT_VERSION as u64,
    };
    let mut text = serde_json::to_string_pretty(&root)?;
    text.push('\n');
    Ok(text)
}

/// Writes memory to `sink`. Validation happens before any byte is written.
pub fn save_memory<W: Write>(som: &SomMap, model: &TransitionModel, agent: &AgentSettings, mut sink: W) -> Result<()> {
    let text = encode_memory(som, model, agent)?;
    sink.write_all(text.as_bytes())
        .and_then(|_| sink.flush())
        .map_err(PersistError::SinkUnwritable)
}

pub fn save_memory_to_path(som: &SomMap, model: &TransitionModel, agent: &AgentSettings, path: &Path) -> Result<()> {
    let text = encode_memory(som, model, agent)?;
    std::fs::write(path, text).map_err(PersistError::SinkUnwritable)
}

pub fn load_memory_from_path(path: &Path) -> Result<LoadedMemory> {
    let text = std::fs::read_to_string(path).map_err(PersistError::SourceUnreadable)?;
    decode_memory(&text)
}

pub fn load_memory<R: std::io::Read>(mut source: R) -> Result<LoadedMemory> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(PersistError::SourceUnreadable)?;
    decode_memory(&text)
}

pub fn decode_memory(text: &str) -> Result<LoadedMemory> {
    // version gate first, so a future layout is reported as such rather
    // than as a schema mismatch
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => return Err(PersistError::VersionUnsupported(v)),
        None => return Err(violation("version", "missing or not an unsigned integer")),
    }
    let root: FileRoot = serde_json::from_value(value)?;
    validate(root)
}

fn validate(root: FileRoot) -> Result<LoadedMemory> {
    let s = &root.som;
    let config = SomConfig {
        width: s.width,
        height: s.height,
        dim: s.dim,
        alpha_winner: s.alpha_winner,
        alpha_neighbor: s.alpha_neighbor,
        seed: s.seed,
    };
    if s.width == 0 {
        return Err(violation("som.width", "must be positive"));
    }
    if s.height == 0 {
        return Err(violation("som.height", "must be positive"));
    }
    if s.dim == 0 {
        return Err(violation("som.dim", "must be positive"));
    }
    if !(s.alpha_winner > 0.0 && s.alpha_winner <= 1.0) {
        return Err(violation("som.alpha_winner", "must lie in (0, 1]"));
    }
    if !(s.alpha_neighbor > 0.0 && s.alpha_neighbor <= s.alpha_winner) {
        return Err(violation("som.alpha_neighbor", "must lie in (0, alpha_winner]"));
    }
    let nodes = config.node_count();
    if s.weights.len() != nodes {
        return Err(violation(
            "som.weights",
            format!("expected {nodes} vectors, found {}", s.weights.len()),
        ));
    }
    for (i, w) in s.weights.iter().enumerate() {
        if w.len() != s.dim {
            return Err(violation(
                format!("som.weights[{i}]"),
                format!("expected length {}, found {}", s.dim, w.len()),
            ));
        }
        if let Some(j) = w.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(violation(
                format!("som.weights[{i}][{j}]"),
                format!("value {} outside [0, 1]", w[j]),
            ));
        }
    }
    let a = &root.agent;
    if !(a.budget_factor >= 1.0 && a.budget_factor.is_finite()) {
        return Err(violation("agent.budget_factor", "must be a finite value >= 1"));
    }

    let som = SomMap::from_weights(config, &s.weights, a.som_version).map_err(|e| violation("som", e.to_string()))?;
    let mut model = TransitionModel::new(nodes, a.som_version);
    for (i, t) in root.transitions.iter().enumerate() {
        let path = |f: &str| format!("transitions[{i}].{f}");
        if t.from >= nodes {
            return Err(violation(path("from"), format!("node {} >= {nodes}", t.from)));
        }
        if t.to >= nodes {
            return Err(violation(path("to"), format!("node {} >= {nodes}", t.to)));
        }
        if t.count == 0 {
            return Err(violation(path("count"), "counts must be positive"));
        }
        let (f, to) = (NodeId(t.from), NodeId(t.to));
        if model.count(f, t.action, to) != 0 {
            return Err(violation(format!("transitions[{i}]"), "duplicate transition"));
        }
        model
            .add_count(f, t.action, to, t.count)
            .map_err(|e| violation(format!("transitions[{i}]"), e.to_string()))?;
    }
    Ok(LoadedMemory {
        som,
        model,
        agent: AgentSettings {
            budget_factor: a.budget_factor,
            plastic_steps: a.plastic_steps,
            frozen: a.frozen,
            som_version: a.som_version,
        },
    })
}
