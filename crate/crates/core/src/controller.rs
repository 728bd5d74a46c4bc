//! Directly encoded recurrent neural-network controllers and their
//! mutation operators.
//!
//! A genotype lists nodes and weighted connections. The fixed interface is
//! 9 sensor inputs (7 proximity + 2 ground), one bias unit clamped to 1, and
//! 2 outputs mapped linearly onto wheel speeds by the simulator. Recurrent
//! connections, including self-loops, are allowed. Activation is one
//! synchronous tanh propagation step per control cycle.
//!
//! Text encoding (one line, embedded in archive files):
//! `g1 <lineage>|<id>:<kind> ...|<from>:<to>:<weight>:<e|d> ...`
//! where kind is one of `i`(nput), `b`(ias), `h`(idden), `o`(utput).

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sensor inputs fed to a controller: 7 proximity + 2 ground.
pub const N_SENSOR_INPUTS: usize = 9;
/// Wheel outputs.
pub const N_OUTPUTS: usize = 2;
/// Weight bound: weights live in `[-W_MAX, W_MAX]`.
pub const W_MAX: f64 = 5.0;

/// Node ids for the fixed interface.
pub const BIAS_ID: u32 = N_SENSOR_INPUTS as u32;
pub const FIRST_OUTPUT_ID: u32 = BIAS_ID + 1;
pub const FIRST_HIDDEN_ID: u32 = FIRST_OUTPUT_ID + N_OUTPUTS as u32;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("genotype violates interface arity: {0}")]
    Arity(String),
    #[error("connection endpoint {0} does not exist")]
    DanglingEndpoint(u32),
    #[error("connection targets non-activatable node {0}")]
    BadTarget(u32),
    #[error("weight {0} outside [-{W_MAX}, {W_MAX}]")]
    WeightOutOfBounds(f64),
    #[error("cannot decode genotype: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Input,
    Bias,
    Hidden,
    Output,
}

impl NodeKind {
    fn tag(self) -> char {
        match self {
            NodeKind::Input => 'i',
            NodeKind::Bias => 'b',
            NodeKind::Hidden => 'h',
            NodeKind::Output => 'o',
        }
    }

    fn from_tag(c: &str) -> Option<Self> {
        match c {
            "i" => Some(NodeKind::Input),
            "b" => Some(NodeKind::Bias),
            "h" => Some(NodeKind::Hidden),
            "o" => Some(NodeKind::Output),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub id: u32,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Connection {
    pub from: u32,
    pub to: u32,
    pub weight: f64,
    pub enabled: bool,
}

/// Mutation operator probabilities and scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationParams {
    /// Probability that an offspring has all its weights perturbed.
    pub weight_prob: f64,
    /// Standard deviation of the Gaussian weight perturbation.
    pub weight_sigma: f64,
    pub add_connection_prob: f64,
    pub add_node_prob: f64,
    pub remove_connection_prob: f64,
}

impl Default for MutationParams {
    fn default() -> Self {
        Self {
            weight_prob: 0.8,
            weight_sigma: 0.5,
            add_connection_prob: 0.1,
            add_node_prob: 0.05,
            remove_connection_prob: 0.05,
        }
    }
}

impl MutationParams {
    pub fn none() -> Self {
        Self {
            weight_prob: 0.0,
            weight_sigma: 0.5,
            add_connection_prob: 0.0,
            add_node_prob: 0.0,
            remove_connection_prob: 0.0,
        }
    }
}

/// A directly encoded recurrent network. Immutable value; mutation returns
/// a new genotype.
#[derive(Debug, Clone, PartialEq)]
pub struct Genotype {
    nodes: Vec<Node>,
    connections: Vec<Connection>,
    /// Seed metadata recording the lineage tag drawn at creation.
    lineage: u64,
}

impl Genotype {
    /// Minimal topology: every input-side unit (sensors + bias) connected to
    /// every output with a uniform weight in `[-1, 1]`.
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut nodes = Vec::with_capacity(N_SENSOR_INPUTS + 1 + N_OUTPUTS);
        for id in 0..N_SENSOR_INPUTS as u32 {
            nodes.push(Node { id, kind: NodeKind::Input });
        }
        nodes.push(Node { id: BIAS_ID, kind: NodeKind::Bias });
        for k in 0..N_OUTPUTS as u32 {
            nodes.push(Node { id: FIRST_OUTPUT_ID + k, kind: NodeKind::Output });
        }
        let mut connections = Vec::with_capacity((N_SENSOR_INPUTS + 1) * N_OUTPUTS);
        for from in 0..=BIAS_ID {
            for k in 0..N_OUTPUTS as u32 {
                connections.push(Connection {
                    from,
                    to: FIRST_OUTPUT_ID + k,
                    weight: rng.random_range(-1.0..=1.0),
                    enabled: true,
                });
            }
        }
        let lineage = rng.random();
        Self { nodes, connections, lineage }
    }

    /// Build a genotype from explicit parts, checking all invariants.
    pub fn from_parts(
        nodes: Vec<Node>,
        connections: Vec<Connection>,
        lineage: u64,
    ) -> Result<Self, ControllerError> {
        let g = Self { nodes, connections, lineage };
        g.validate()?;
        Ok(g)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn lineage(&self) -> u64 {
        self.lineage
    }

    pub fn hidden_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Hidden).count()
    }

    fn next_node_id(&self) -> u32 {
        self.nodes.iter().map(|n| n.id).max().map_or(0, |m| m + 1)
    }

    fn has_connection(&self, from: u32, to: u32) -> bool {
        self.connections.iter().any(|c| c.from == from && c.to == to)
    }

    /// Structural and bound invariants.
    pub fn validate(&self) -> Result<(), ControllerError> {
        let inputs = self.nodes.iter().filter(|n| n.kind == NodeKind::Input).count();
        let biases = self.nodes.iter().filter(|n| n.kind == NodeKind::Bias).count();
        let outputs = self.nodes.iter().filter(|n| n.kind == NodeKind::Output).count();
        if inputs != N_SENSOR_INPUTS || biases != 1 || outputs != N_OUTPUTS {
            return Err(ControllerError::Arity(format!(
                "{inputs} inputs, {biases} bias, {outputs} outputs"
            )));
        }
        for c in &self.connections {
            let to_kind = self
                .nodes
                .iter()
                .find(|n| n.id == c.to)
                .ok_or(ControllerError::DanglingEndpoint(c.to))?
                .kind;
            if self.nodes.iter().all(|n| n.id != c.from) {
                return Err(ControllerError::DanglingEndpoint(c.from));
            }
            if matches!(to_kind, NodeKind::Input | NodeKind::Bias) {
                return Err(ControllerError::BadTarget(c.to));
            }
            if !c.weight.is_finite() || c.weight.abs() > W_MAX {
                return Err(ControllerError::WeightOutOfBounds(c.weight));
            }
        }
        Ok(())
    }

    /// Apply the configured mutation operators, in fixed order: weight
    /// perturbation, add-connection, add-node (splitting an existing
    /// connection), remove-connection. Inapplicable structural mutations are
    /// skipped.
    pub fn mutate(&self, params: &MutationParams, rng: &mut impl Rng) -> Genotype {
        let mut g = self.clone();
        if params.weight_prob > 0.0 && rng.random::<f64>() < params.weight_prob {
            let normal = Normal::new(0.0, params.weight_sigma).unwrap();
            for c in &mut g.connections {
                c.weight = (c.weight + normal.sample(rng)).clamp(-W_MAX, W_MAX);
            }
        }
        if params.add_connection_prob > 0.0 && rng.random::<f64>() < params.add_connection_prob {
            let targets: Vec<u32> = g
                .nodes
                .iter()
                .filter(|n| matches!(n.kind, NodeKind::Hidden | NodeKind::Output))
                .map(|n| n.id)
                .collect();
            let mut free: Vec<(u32, u32)> = Vec::new();
            for from in g.nodes.iter().map(|n| n.id) {
                for &to in &targets {
                    if !g.has_connection(from, to) {
                        free.push((from, to));
                    }
                }
            }
            if !free.is_empty() {
                let (from, to) = free[rng.random_range(0..free.len())];
                g.connections.push(Connection {
                    from,
                    to,
                    weight: rng.random_range(-1.0..=1.0),
                    enabled: true,
                });
            }
        }
        if params.add_node_prob > 0.0 && rng.random::<f64>() < params.add_node_prob {
            let enabled: Vec<usize> = g
                .connections
                .iter()
                .enumerate()
                .filter(|(_, c)| c.enabled)
                .map(|(i, _)| i)
                .collect();
            if !enabled.is_empty() {
                let split = enabled[rng.random_range(0..enabled.len())];
                let old = g.connections.remove(split);
                let h = g.next_node_id();
                g.nodes.push(Node { id: h, kind: NodeKind::Hidden });
                g.connections.push(Connection { from: old.from, to: h, weight: 1.0, enabled: true });
                g.connections.push(Connection { from: h, to: old.to, weight: old.weight, enabled: true });
            }
        }
        if params.remove_connection_prob > 0.0
            && rng.random::<f64>() < params.remove_connection_prob
            && !g.connections.is_empty()
        {
            let i = rng.random_range(0..g.connections.len());
            g.connections.remove(i);
        }
        g
    }

    /// One-line self-describing text record.
    pub fn encode(&self) -> String {
        let nodes: Vec<String> = self
            .nodes
            .iter()
            .map(|n| format!("{}:{}", n.id, n.kind.tag()))
            .collect();
        let conns: Vec<String> = self
            .connections
            .iter()
            .map(|c| {
                format!(
                    "{}:{}:{}:{}",
                    c.from,
                    c.to,
                    c.weight,
                    if c.enabled { 'e' } else { 'd' }
                )
            })
            .collect();
        format!("g1 {}|{}|{}", self.lineage, nodes.join(" "), conns.join(" "))
    }

    pub fn decode(s: &str) -> Result<Self, ControllerError> {
        let err = |m: &str| ControllerError::Decode(m.to_string());
        let rest = s.strip_prefix("g1 ").ok_or_else(|| err("missing g1 header"))?;
        let mut parts = rest.split('|');
        let lineage: u64 = parts
            .next()
            .ok_or_else(|| err("missing lineage"))?
            .parse()
            .map_err(|e| err(&format!("bad lineage: {e}")))?;
        let node_part = parts.next().ok_or_else(|| err("missing node list"))?;
        let conn_part = parts.next().ok_or_else(|| err("missing connection list"))?;
        if parts.next().is_some() {
            return Err(err("trailing fields"));
        }
        let mut nodes = Vec::new();
        for tok in node_part.split(' ').filter(|t| !t.is_empty()) {
            let (id, kind) = tok.split_once(':').ok_or_else(|| err("bad node token"))?;
            nodes.push(Node {
                id: id.parse().map_err(|e| err(&format!("bad node id: {e}")))?,
                kind: NodeKind::from_tag(kind).ok_or_else(|| err("bad node kind"))?,
            });
        }
        let mut connections = Vec::new();
        for tok in conn_part.split(' ').filter(|t| !t.is_empty()) {
            let fields: Vec<&str> = tok.split(':').collect();
            if fields.len() != 4 {
                return Err(err("bad connection token"));
            }
            connections.push(Connection {
                from: fields[0].parse().map_err(|e| err(&format!("bad from: {e}")))?,
                to: fields[1].parse().map_err(|e| err(&format!("bad to: {e}")))?,
                weight: fields[2].parse().map_err(|e| err(&format!("bad weight: {e}")))?,
                enabled: match fields[3] {
                    "e" => true,
                    "d" => false,
                    _ => return Err(err("bad enabled flag")),
                },
            });
        }
        let g = Self { nodes, connections, lineage };
        g.validate()?;
        Ok(g)
    }
}

/// Genotype lowered to index-based buffers for fast per-cycle activation.
#[derive(Debug, Clone)]
pub struct CompiledNetwork {
    n_nodes: usize,
    /// (from index, to index, weight) for every enabled connection.
    edges: Vec<(u32, u32, f64)>,
    input_idx: [usize; N_SENSOR_INPUTS],
    bias_idx: usize,
    output_idx: [usize; N_OUTPUTS],
    /// Node indices that are activated by tanh (hidden + output).
    activated: Vec<usize>,
}

/// Per-robot node activations, persisted across control cycles.
#[derive(Debug, Clone)]
pub struct ControllerState {
    acts: Vec<f64>,
    accum: Vec<f64>,
}

impl CompiledNetwork {
    pub fn compile(g: &Genotype) -> Result<Self, ControllerError> {
        g.validate()?;
        let n_nodes = g.nodes.len();
        let mut index_of = std::collections::HashMap::with_capacity(n_nodes);
        for (i, n) in g.nodes.iter().enumerate() {
            index_of.insert(n.id, i);
        }
        let mut input_idx = [0usize; N_SENSOR_INPUTS];
        let mut bias_idx = 0usize;
        let mut output_idx = [0usize; N_OUTPUTS];
        let mut in_seen = 0;
        let mut out_seen = 0;
        let mut activated = Vec::new();
        for (i, n) in g.nodes.iter().enumerate() {
            match n.kind {
                NodeKind::Input => {
                    input_idx[in_seen] = i;
                    in_seen += 1;
                }
                NodeKind::Bias => bias_idx = i,
                NodeKind::Output => {
                    output_idx[out_seen] = i;
                    out_seen += 1;
                    activated.push(i);
                }
                NodeKind::Hidden => activated.push(i),
            }
        }
        let edges = g
            .connections
            .iter()
            .filter(|c| c.enabled)
            .map(|c| (index_of[&c.from] as u32, index_of[&c.to] as u32, c.weight))
            .collect();
        Ok(Self { n_nodes, edges, input_idx, bias_idx, output_idx, activated })
    }

    /// Zeroed activations (trial start).
    pub fn fresh_state(&self) -> ControllerState {
        ControllerState {
            acts: vec![0.0; self.n_nodes],
            accum: vec![0.0; self.n_nodes],
        }
    }

    /// One synchronous propagation step. Inputs must already be scaled to
    /// `[-1, 1]`; outputs are tanh activations in `[-1, 1]`.
    pub fn activate(
        &self,
        state: &mut ControllerState,
        inputs: &[f64; N_SENSOR_INPUTS],
    ) -> [f64; N_OUTPUTS] {
        for (k, &i) in self.input_idx.iter().enumerate() {
            state.acts[i] = inputs[k];
        }
        state.acts[self.bias_idx] = 1.0;
        for &i in &self.activated {
            state.accum[i] = 0.0;
        }
        for &(from, to, w) in &self.edges {
            state.accum[to as usize] += w * state.acts[from as usize];
        }
        for &i in &self.activated {
            state.acts[i] = state.accum[i].tanh();
        }
        [
            state.acts[self.output_idx[0]],
            state.acts[self.output_idx[1]],
        ]
    }
}
