//! Self-organizing map: a rectangular grid of "ideal input" vectors with
//! competitive activation and a fixed-neighbourhood training update.
//!
//! Every activation scans all `width * height` nodes exactly once, so the
//! work per lookup depends only on the map's configuration and never on how
//! much the map has been trained.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Exec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SomError {
    #[error("invalid SOM configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid node {index} (map has {count} nodes)")]
    InvalidNode { index: usize, count: usize },
    #[error("quantization error requires at least one input")]
    EmptyInputSet,
    #[error("input component {index} = {value} lies outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, SomError>;

/// Learning rate applied to the winning node.
pub const DEFAULT_ALPHA_WINNER: f64 = 0.9;
/// Learning rate applied to each cardinal neighbour of the winner.
pub const DEFAULT_ALPHA_NEIGHBOR: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomConfig {
    pub width: usize,
    pub height: usize,
    pub dim: usize,
    pub alpha_winner: f64,
    pub alpha_neighbor: f64,
    pub seed: u64,
}

impl SomConfig {
    pub fn new(width: usize, height: usize, dim: usize, seed: u64) -> Self {
        Self {
            width,
            height,
            dim,
            alpha_winner: DEFAULT_ALPHA_WINNER,
            alpha_neighbor: DEFAULT_ALPHA_NEIGHBOR,
            seed,
        }
    }

    pub fn node_count(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.dim == 0 {
            return Err(SomError::InvalidConfig(format!(
                "width, height and dim must be positive (got {}x{}, dim {})",
                self.width, self.height, self.dim
            )));
        }
        let (aw, an) = (self.alpha_winner, self.alpha_neighbor);
        if !(an > 0.0 && an <= aw && aw <= 1.0) {
            return Err(SomError::InvalidConfig(format!(
                "learning rates must satisfy 0 < alpha_neighbor <= alpha_winner <= 1 (got {an}, {aw})"
            )));
        }
        Ok(())
    }
}

impl Default for SomConfig {
    fn default() -> Self {
        Self::new(10, 10, 16, 0)
    }
}

/// Row-major index of a node: `(row, col)` maps to `row * width + col`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn from_coords(row: usize, col: usize, width: usize) -> Self {
        NodeId(row * width + col)
    }

    pub fn coords(self, width: usize) -> (usize, usize) {
        (self.0 / width, self.0 % width)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// A sensory vector with every component in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct InputVector(Vec<f64>);

impl InputVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(SomError::OutOfRange { index, value });
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for InputVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        InputVector::new(values).map_err(serde::de::Error::custom)
    }
}

impl AsRef<[f64]> for InputVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Euclidean distance between two equal-length vectors.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SomError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(squared_distance(a, b).sqrt())
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[derive(Debug)]
pub struct SomMap {
    config: SomConfig,
    /// Flat row-major storage, `dim` values per node.
    weights: Vec<f64>,
    /// Bumped by every training step; the transition model records which
    /// version its node identities belong to.
    version: u64,
    distance_evals: AtomicU64,
}

impl Clone for SomMap {
    fn clone(&self) -> Self {
        Self {
            config: self.config,
            weights: self.weights.clone(),
            version: self.version,
            distance_evals: AtomicU64::new(self.distance_evals()),
        }
    }
}

impl PartialEq for SomMap {
    /// Compares configuration, weights (bitwise) and version. The
    /// instrumentation counter is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.version == other.version
            && self.weights.len() == other.weights.len()
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl SomMap {
    /// Builds a map with weights drawn i.i.d. uniform from `[0, 1]`.
    pub fn new(config: SomConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let weights = (0..config.node_count() * config.dim)
            .map(|_| rng.random::<f64>())
            .collect();
        Ok(Self::assemble(config, weights, 0))
    }

    /// Builds a map from explicit row-major weight vectors.
    pub fn from_weights(config: SomConfig, vectors: &[Vec<f64>], version: u64) -> Result<Self> {
        config.validate()?;
        if vectors.len() != config.node_count() {
            return Err(SomError::InvalidConfig(format!(
                "expected {} weight vectors, got {}",
                config.node_count(),
                vectors.len()
            )));
        }
        let mut weights = Vec::with_capacity(config.node_count() * config.dim);
        for v in vectors {
            if v.len() != config.dim {
                return Err(SomError::DimensionMismatch {
                    expected: config.dim,
                    got: v.len(),
                });
            }
            if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
                return Err(SomError::OutOfRange { index, value });
            }
            weights.extend_from_slice(v);
        }
        Ok(Self::assemble(config, weights, version))
    }

    fn assemble(config: SomConfig, weights: Vec<f64>, version: u64) -> Self {
        Self {
            config,
            weights,
            version,
            distance_evals: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &SomConfig {
        &self.config
    }

    pub fn width(&self) -> usize {
        self.config.width
    }

    pub fn height(&self) -> usize {
        self.config.height
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn node_count(&self) -> usize {
        self.config.node_count()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Total distance evaluations performed by activations on this map.
    pub fn distance_evals(&self) -> u64 {
        self.distance_evals.load(Ordering::Relaxed)
    }

    pub fn weight(&self, node: NodeId) -> Result<&[f64]> {
        self.check_node(node)?;
        let d = self.config.dim;
        Ok(&self.weights[node.0 * d..(node.0 + 1) * d])
    }

    pub fn weight_vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.config.dim)
    }

    fn check_node(&self, node: NodeId) -> Result<()> {
        if node.0 >= self.node_count() {
            return Err(SomError::InvalidNode {
                index: node.0,
                count: self.node_count(),
            });
        }
        Ok(())
    }

    fn check_dim(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.config.dim {
            return Err(SomError::DimensionMismatch {
                expected: self.config.dim,
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Returns the node whose weight vector is nearest to `input`; ties go
    /// to the lowest index.
    pub fn activate(&self, input: &[f64]) -> Result<NodeId> {
        self.check_dim(input)?;
        Ok(self.activate_unchecked(input).0)
    }

    /// Winner plus its (squared) distance. Performs exactly `node_count()`
    /// distance evaluations.
    fn activate_unchecked(&self, input: &[f64]) -> (NodeId, f64) {
        let mut best = (NodeId(0), f64::INFINITY);
        for (i, w) in self.weight_vectors().enumerate() {
            let d = squared_distance(w, input);
            // strict comparison keeps the lowest index on ties
            if d < best.1 {
                best = (NodeId(i), d);
            }
        }
        self.distance_evals
            .fetch_add(self.node_count() as u64, Ordering::Relaxed);
        best
    }

    /// Up/down/left/right neighbours that exist on the grid (no wraparound),
    /// in row-major order.
    pub fn cardinal_neighbors(&self, node: NodeId) -> Result<Vec<NodeId>> {
        self.check_node(node)?;
        Ok(grid_neighbors(node, self.config.width, self.config.height))
    }

    /// One presentation of `input`: the winner moves toward the input with
    /// `alpha_winner`, its cardinal neighbours with `alpha_neighbor`. The
    /// winner is chosen from the weights as they were before the update.
    pub fn train_step(&mut self, input: &[f64]) -> Result<NodeId> {
        self.check_dim(input)?;
        let (winner, _) = self.activate_unchecked(input);
        let neighbors = grid_neighbors(winner, self.config.width, self.config.height);
        // neighbours first so that the update order is strictly row-major
        // around the winner; the nodes are disjoint either way
        let mut updates: Vec<(NodeId, f64)> = neighbors.into_iter().map(|n| (n, self.config.alpha_neighbor)).collect();
        updates.push((winner, self.config.alpha_winner));
        updates.sort_by_key(|(n, _)| *n);
        let dim = self.config.dim;
        for (node, alpha) in updates {
            let w = &mut self.weights[node.0 * dim..(node.0 + 1) * dim];
            for (wj, &xj) in w.iter_mut().zip(input) {
                *wj += alpha * (xj - *wj);
            }
        }
        self.version += 1;
        Ok(winner)
    }

    /// Mean distance from each input to its winner's weight vector.
    pub fn quantization_error(&self, inputs: &[InputVector]) -> Result<f64> {
        self.quantization_error_with(inputs, Exec::default())
    }

    pub fn quantization_error_with(&self, inputs: &[InputVector], exec: Exec) -> Result<f64> {
        if inputs.is_empty() {
            return Err(SomError::EmptyInputSet);
        }
        for x in inputs {
            self.check_dim(x.as_slice())?;
        }
        let residuals = par::map(exec, inputs, |x| self.activate_unchecked(x.as_slice()).1.sqrt());
        // summed in input order so the result does not depend on `exec`
        Ok(residuals.iter().sum::<f64>() / inputs.len() as f64)
    }

    /// Activates every input. Equivalent to calling [`SomMap::activate`] in a loop.
    pub fn activate_all(&self, inputs: &[InputVector], exec: Exec) -> Result<Vec<NodeId>> {
        for x in inputs {
            self.check_dim(x.as_slice())?;
        }
        Ok(par::map(exec, inputs, |x| self.activate_unchecked(x.as_slice()).0))
    }
}

fn grid_neighbors(node: NodeId, width: usize, height: usize) -> Vec<NodeId> {
    let (r, c) = node.coords(width);
    let mut out = Vec::with_capacity(4);
    if r > 0 {
        out.push(NodeId::from_coords(r - 1, c, width));
    }
    if c > 0 {
        out.push(NodeId::from_coords(r, c - 1, width));
    }
    if c + 1 < width {
        out.push(NodeId::from_coords(r, c + 1, width));
    }
    if r + 1 < height {
        out.push(NodeId::from_coords(r + 1, c, width));
    }
    out
}
