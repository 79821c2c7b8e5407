//! Growth of the directed preferential attachment graph.
//!
//! At every step one edge is added. With probability `alpha` a new node
//! points to an existing node chosen by in-degree; with probability `beta`
//! an edge joins two existing nodes (tail by out-degree, head by in-degree,
//! drawn independently); with probability `gamma` an existing node chosen by
//! out-degree points to a new node.
//!
//! Preferential choice uses the mixture identity
//! `(D(w) + δ)/(n + δN) = n/(n+δN) · D(w)/n + δN/(n+δN) · 1/N`:
//! pick the head (tail) of a uniform edge, or else a uniform node.

use std::io::{Read, Write};

use rand::Rng;

use crate::census::JointCountTable;
use crate::error::{Error, Result};
use crate::params::ModelParams;

pub type NodeId = u32;

/// Edge arrays plus per-node degrees. Self-loops and parallel edges allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedMultigraph {
    tails: Vec<NodeId>,
    heads: Vec<NodeId>,
    in_degree: Vec<u32>,
    out_degree: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepCase {
    Alpha,
    Beta,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowthStepOutcome {
    pub case: StepCase,
    pub new_node: Option<NodeId>,
    pub edge: (NodeId, NodeId),
}

/// Initial graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SeedSpec {
    /// One node carrying one self-loop.
    #[default]
    SelfLoop,
    Explicit {
        nodes: u32,
        edges: Vec<(NodeId, NodeId)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowthLimits {
    pub memory_budget_bytes: u64,
}

impl Default for GrowthLimits {
    fn default() -> Self {
        GrowthLimits {
            memory_budget_bytes: 4 << 30,
        }
    }
}

/// Bytes held per edge (tail + head) and per node (two degree counters).
const BYTES_PER_EDGE: u64 = 8;
const BYTES_PER_NODE: u64 = 8;

impl DirectedMultigraph {
    pub fn with_nodes(nodes: u32) -> Self {
        DirectedMultigraph {
            tails: Vec::new(),
            heads: Vec::new(),
            in_degree: vec![0; nodes as usize],
            out_degree: vec![0; nodes as usize],
        }
    }

    pub fn node_count(&self) -> usize {
        self.in_degree.len()
    }

    pub fn edge_count(&self) -> usize {
        self.tails.len()
    }

    pub fn tails(&self) -> &[NodeId] {
        &self.tails
    }

    pub fn heads(&self) -> &[NodeId] {
        &self.heads
    }

    pub fn in_degree(&self) -> &[u32] {
        &self.in_degree
    }

    pub fn out_degree(&self) -> &[u32] {
        &self.out_degree
    }

    pub fn add_node(&mut self) -> NodeId {
        let id = self.in_degree.len() as NodeId;
        self.in_degree.push(0);
        self.out_degree.push(0);
        id
    }

    /// Panics if either endpoint does not exist.
    pub fn add_edge(&mut self, tail: NodeId, head: NodeId) {
        self.out_degree[tail as usize] += 1;
        self.in_degree[head as usize] += 1;
        self.tails.push(tail);
        self.heads.push(head);
    }

    pub fn reserve(&mut self, edges: usize, nodes: usize) {
        self.tails.reserve(edges);
        self.heads.reserve(edges);
        self.in_degree.reserve(nodes);
        self.out_degree.reserve(nodes);
    }

    /// Rebuilds the graph from edge arrays, recomputing degrees.
    pub fn from_edges(nodes: u32, tails: Vec<NodeId>, heads: Vec<NodeId>) -> Result<Self> {
        if tails.len() != heads.len() {
            return Err(Error::Format("tail and head arrays differ in length".into()));
        }
        let mut g = DirectedMultigraph::with_nodes(nodes);
        for (&t, &h) in tails.iter().zip(&heads) {
            if t >= nodes || h >= nodes {
                return Err(Error::Format(format!("edge {t}->{h} references a missing node")));
            }
            g.out_degree[t as usize] += 1;
            g.in_degree[h as usize] += 1;
        }
        g.tails = tails;
        g.heads = heads;
        Ok(g)
    }
}

pub fn seed_graph(spec: &SeedSpec, params: &ModelParams) -> Result<DirectedMultigraph> {
    let g = match spec {
        SeedSpec::SelfLoop => {
            let mut g = DirectedMultigraph::with_nodes(1);
            g.add_edge(0, 0);
            g
        }
        SeedSpec::Explicit { nodes, edges } => {
            if *nodes == 0 {
                return Err(Error::InvalidSeed("the seed graph needs at least one node".into()));
            }
            let mut g = DirectedMultigraph::with_nodes(*nodes);
            for &(t, h) in edges {
                if t >= *nodes || h >= *nodes {
                    return Err(Error::InvalidSeed(format!(
                        "edge {t}->{h} references a node outside 0..{nodes}"
                    )));
                }
                g.add_edge(t, h);
            }
            g
        }
    };
    if g.edge_count() == 0 && (params.delta_in == 0.0 || params.delta_out == 0.0) {
        return Err(Error::InvalidSeed(
            "a seed with no edges needs delta_in > 0 and delta_out > 0".into(),
        ));
    }
    Ok(g)
}

/// Node chosen with probability `(D_in(w) + δ_in)/(n + δ_in N)`.
pub fn choose_by_in<R: Rng + ?Sized>(graph: &DirectedMultigraph, delta_in: f64, rng: &mut R) -> NodeId {
    choose(&graph.heads, graph.node_count(), delta_in, rng)
}

/// Node chosen with probability `(D_out(v) + δ_out)/(n + δ_out N)`.
pub fn choose_by_out<R: Rng + ?Sized>(graph: &DirectedMultigraph, delta_out: f64, rng: &mut R) -> NodeId {
    choose(&graph.tails, graph.node_count(), delta_out, rng)
}

#[inline]
fn choose<R: Rng + ?Sized>(endpoints: &[NodeId], nodes: usize, delta: f64, rng: &mut R) -> NodeId {
    let n = endpoints.len() as f64;
    let total = n + delta * nodes as f64;
    debug_assert!(total > 0.0 && nodes > 0);
    if rng.random::<f64>() * total < n {
        endpoints[rng.random_range(0..endpoints.len())]
    } else {
        rng.random_range(0..nodes) as NodeId
    }
}

/// One growth step.
pub fn step<R: Rng + ?Sized>(
    graph: &mut DirectedMultigraph,
    params: &ModelParams,
    rng: &mut R,
) -> GrowthStepOutcome {
    let u: f64 = rng.random();
    if u < params.alpha {
        let w = choose_by_in(graph, params.delta_in, rng);
        let v = graph.add_node();
        graph.add_edge(v, w);
        GrowthStepOutcome {
            case: StepCase::Alpha,
            new_node: Some(v),
            edge: (v, w),
        }
    } else if u < params.alpha + params.beta {
        let v = choose_by_out(graph, params.delta_out, rng);
        let w = choose_by_in(graph, params.delta_in, rng);
        graph.add_edge(v, w);
        GrowthStepOutcome {
            case: StepCase::Beta,
            new_node: None,
            edge: (v, w),
        }
    } else {
        let v = choose_by_out(graph, params.delta_out, rng);
        let w = graph.add_node();
        graph.add_edge(v, w);
        GrowthStepOutcome {
            case: StepCase::Gamma,
            new_node: Some(w),
            edge: (v, w),
        }
    }
}

/// Grows `graph` until it has exactly `target_edges` edges.
pub fn grow<R: Rng + ?Sized>(
    graph: &mut DirectedMultigraph,
    target_edges: u64,
    params: &ModelParams,
    rng: &mut R,
    limits: &GrowthLimits,
) -> Result<()> {
    let current = graph.edge_count() as u64;
    if target_edges < current {
        return Err(Error::InvalidParams(format!(
            "target {target_edges} is below the current edge count {current}"
        )));
    }
    // node ids and degrees are 32-bit
    let max_nodes = graph.node_count() as u64 + (target_edges - current);
    if target_edges >= u32::MAX as u64 || max_nodes >= u32::MAX as u64 {
        return Err(Error::ResourceLimit(format!(
            "{target_edges} edges exceed 32-bit node/edge ids"
        )));
    }
    let expected_nodes = graph.node_count() as u64
        + ((target_edges - current) as f64 * (1.0 - params.beta)).ceil() as u64;
    let bytes = target_edges * BYTES_PER_EDGE + expected_nodes * BYTES_PER_NODE;
    if bytes > limits.memory_budget_bytes {
        return Err(Error::ResourceLimit(format!(
            "{target_edges} edges need about {bytes} bytes, budget is {}",
            limits.memory_budget_bytes
        )));
    }
    let extra = (target_edges - current) as usize;
    graph.reserve(extra, expected_nodes as usize - graph.node_count().min(expected_nodes as usize));
    for _ in 0..extra {
        step(graph, params, rng);
    }
    Ok(())
}

/// `N_ij`: number of nodes with in-degree `i` and out-degree `j`.
pub fn degree_counts(graph: &DirectedMultigraph) -> JointCountTable {
    let mut table = JointCountTable::new();
    for (&i, &j) in graph.in_degree.iter().zip(&graph.out_degree) {
        table.add(i as u64, j as u64, 1);
    }
    table
}

const MAGIC: [u8; 4] = *b"HTPA";
const FORMAT_VERSION: u32 = 1;

/// Little-endian binary layout: magic `HTPA`, `u32` version, `u64` node
/// count, `u64` edge count, then all tails and all heads as `u32`.
pub fn write_binary<W: Write>(graph: &DirectedMultigraph, mut out: W) -> Result<()> {
    if graph.node_count() as u64 >= 1 << 32 {
        return Err(Error::ResourceLimit("node count does not fit 32-bit ids".into()));
    }
    out.write_all(&MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(graph.node_count() as u64).to_le_bytes())?;
    out.write_all(&(graph.edge_count() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(4 * graph.edge_count());
    for ids in [&graph.tails, &graph.heads] {
        buf.clear();
        for &v in ids.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<DirectedMultigraph> {
    let mut header = [0u8; 24];
    input.read_exact(&mut header)?;
    if header[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let nodes = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let edges = u64::from_le_bytes(header[16..24].try_into().unwrap());
    if nodes >= 1 << 32 || edges >= 1 << 32 {
        return Err(Error::Format("counts exceed 32-bit ids".into()));
    }
    let mut read_ids = |count: usize| -> Result<Vec<NodeId>> {
        let mut raw = vec![0u8; 4 * count];
        input.read_exact(&mut raw)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let tails = read_ids(edges as usize)?;
    let heads = read_ids(edges as usize)?;
    DirectedMultigraph::from_edges(nodes as u32, tails, heads)
}
