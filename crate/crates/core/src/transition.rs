//! Markov chain over SOM nodes and shortest-path planning through it.
//!
//! The chain counts `(from, action, to)` observations. A directed edge
//! `from -> to` exists when some action has been seen to cause that
//! transition at least `min_edge_count` times; self-loops are kept in the
//! counts but never become edges. Every edge costs one action, so a plan's
//! length is directly an estimate of the number of actions to the goal.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::som::NodeId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransitionError {
    #[error("invalid node {index} (chain has {count} nodes)")]
    InvalidNode { index: usize, count: usize },
    #[error("no recorded transition from {from} to {to}")]
    NoEdge { from: NodeId, to: NodeId },
    #[error("goal {goal} is unreachable from {start}")]
    NoPath { start: NodeId, goal: NodeId },
}

pub type Result<T> = std::result::Result<T, TransitionError>;

/// The robot's discrete command set. The integer encoding follows the
/// declaration order and is stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionId {
    Forward = 0,
    SpinLeft = 1,
    SpinRight = 2,
    Stop = 3,
}

impl ActionId {
    pub const ALL: [ActionId; 4] = [
        ActionId::Forward,
        ActionId::SpinLeft,
        ActionId::SpinRight,
        ActionId::Stop,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionId::Forward => "forward",
            ActionId::SpinLeft => "spin_left",
            ActionId::SpinRight => "spin_right",
            ActionId::Stop => "stop",
        }
    }
}

impl std::fmt::Display for ActionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ActionId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub nodes: Vec<NodeId>,
    pub actions: Vec<ActionId>,
    pub estimate: u32,
}

impl Plan {
    pub fn first_action(&self) -> Option<ActionId> {
        self.actions.first().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionModel {
    node_count: usize,
    min_edge_count: u32,
    /// SOM version the node identities refer to.
    som_version: u64,
    counts: BTreeMap<(NodeId, ActionId, NodeId), u32>,
}

impl TransitionModel {
    pub fn new(node_count: usize, som_version: u64) -> Self {
        Self::with_min_edge_count(node_count, som_version, 1)
    }

    pub fn with_min_edge_count(node_count: usize, som_version: u64, min_edge_count: u32) -> Self {
        Self {
            node_count,
            min_edge_count: min_edge_count.max(1),
            som_version,
            counts: BTreeMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn min_edge_count(&self) -> u32 {
        self.min_edge_count
    }

    pub fn som_version(&self) -> u64 {
        self.som_version
    }

    /// Drops every count and rebinds the chain to `som_version`.
    pub fn clear(&mut self, som_version: u64) {
        self.counts.clear();
        self.som_version = som_version;
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of distinct `(from, action, to)` triples observed.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    /// Nonzero counts in `(from, action, to)` order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, ActionId, NodeId, u32)> + '_ {
        self.counts.iter().map(|(&(f, a, t), &c)| (f, a, t, c))
    }

    fn check(&self, n: NodeId) -> Result<()> {
        if n.0 >= self.node_count {
            return Err(TransitionError::InvalidNode {
                index: n.0,
                count: self.node_count,
            });
        }
        Ok(())
    }

    pub fn record_transition(&mut self, from: NodeId, action: ActionId, to: NodeId) -> Result<()> {
        self.add_count(from, action, to, 1)
    }

    /// Adds `count` observations at once (used when restoring a snapshot).
    pub fn add_count(&mut self, from: NodeId, action: ActionId, to: NodeId, count: u32) -> Result<()> {
        self.check(from)?;
        self.check(to)?;
        if count > 0 {
            *self.counts.entry((from, action, to)).or_insert(0) += count;
        }
        Ok(())
    }

    pub fn count(&self, from: NodeId, action: ActionId, to: NodeId) -> u32 {
        self.counts.get(&(from, action, to)).copied().unwrap_or(0)
    }

    fn outgoing(&self, from: NodeId) -> impl Iterator<Item = (ActionId, NodeId, u32)> + '_ {
        self.counts
            .range((from, ActionId::Forward, NodeId(0))..=(from, ActionId::Stop, NodeId(usize::MAX)))
            .map(|(&(_, a, t), &c)| (a, t, c))
    }

    /// Maximum-likelihood estimate of `P(to | from, action)`; zero when the
    /// action was never tried from `from`.
    pub fn action_probability(&self, from: NodeId, action: ActionId, to: NodeId) -> f64 {
        let total: u64 = self
            .outgoing(from)
            .filter(|(a, _, _)| *a == action)
            .map(|(_, _, c)| c as u64)
            .sum();
        if total == 0 {
            return 0.0;
        }
        self.count(from, action, to) as f64 / total as f64
    }

    /// The action most often observed to take `from` to `to`; ties go to the
    /// lowest action encoding.
    pub fn best_action(&self, from: NodeId, to: NodeId) -> Result<ActionId> {
        self.check(from)?;
        self.check(to)?;
        let mut best: Option<(ActionId, u32)> = None;
        if from != to {
            for a in ActionId::ALL {
                let c = self.count(from, a, to);
                if c >= self.min_edge_count && best.is_none_or(|(_, bc)| c > bc) {
                    best = Some((a, c));
                }
            }
        }
        best.map(|(a, _)| a).ok_or(TransitionError::NoEdge { from, to })
    }

    /// Successor nodes of `from` in ascending order.
    pub fn successors(&self, from: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .outgoing(from)
            .filter(|&(_, t, c)| t != from && c >= self.min_edge_count)
            .map(|(_, t, _)| t)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Dijkstra over the chain with unit edge costs. When two paths of equal
    /// length reach a node, the one through the lower-indexed predecessor is
    /// kept, which makes the result independent of exploration order.
    pub fn plan(&self, start: NodeId, goal: NodeId) -> Result<Plan> {
        self.check(start)?;
        self.check(goal)?;
        if start == goal {
            return Ok(Plan {
                nodes: vec![start],
                actions: Vec::new(),
                estimate: 0,
            });
        }

        let n = self.node_count;
        let adjacency = self.adjacency();
        let mut dist = vec![u32::MAX; n];
        let mut pred: Vec<Option<NodeId>> = vec![None; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[start.0] = 0;
        heap.push(Reverse((0u32, start)));

        while let Some(Reverse((d, u))) = heap.pop() {
            if settled[u.0] {
                continue;
            }
            settled[u.0] = true;
            if u == goal {
                break;
            }
            for &v in adjacency.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
                if settled[v.0] {
                    continue;
                }
                let nd = d + 1;
                let better = nd < dist[v.0] || (nd == dist[v.0] && pred[v.0].is_some_and(|p| u < p));
                if better {
                    dist[v.0] = nd;
                    pred[v.0] = Some(u);
                    heap.push(Reverse((nd, v)));
                }
            }
        }

        if dist[goal.0] == u32::MAX {
            return Err(TransitionError::NoPath { start, goal });
        }
        let mut nodes = vec![goal];
        let mut cur = goal;
        while let Some(p) = pred[cur.0] {
            nodes.push(p);
            cur = p;
        }
        nodes.reverse();
        let actions = nodes
            .windows(2)
            .map(|w| self.best_action(w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Plan {
            estimate: actions.len() as u32,
            nodes,
            actions,
        })
    }

    fn adjacency(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (&(f, _, t), &c) in &self.counts {
            if f != t && c >= self.min_edge_count {
                adj.entry(f).or_default().push(t);
            }
        }
        for succ in adj.values_mut() {
            succ.sort_unstable();
            succ.dedup();
        }
        adj
    }

    /// True when the chain's node identities belong to `som_version`.
    pub fn reindex_guard(&self, som_version: u64) -> bool {
        self.som_version == som_version
    }
}
