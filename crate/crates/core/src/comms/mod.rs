//! Communication between subdomains: the weighted communication graph,
//! greedy round scheduling, dofmaps and the round-based exchange engine.
//!
//! Node ids are 0-based in memory. The text formats use 1-based ids.

mod dofmap;
mod engine;
mod schedule;

pub use dofmap::{build_dofmap, build_exchange_plan, DofMap, ExchangePlan};
pub use engine::{run_exchange, Delivery, Endpoint, ExchangeMode, Message, Tag};
pub use schedule::{format_schedule, greedy_schedule, parse_graph, parse_schedule, CommSchedule};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::dg::BrokenSpace;
use crate::mesh::SubdomainLayout;

#[derive(Debug, Error)]
pub enum CommError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("payload from {from} to {to} has {got} values, expected {expected}")]
    PayloadLength { from: usize, to: usize, expected: usize, got: usize },
    #[error("unexpected message from {from} to {to} in round {round}")]
    Protocol { from: usize, to: usize, round: usize },
    #[error("node {node} timed out waiting for {peer} in round {round}")]
    Timeout { node: usize, peer: usize, round: usize },
    #[error("exchange worker panicked")]
    WorkerPanic,
}

/// Undirected weighted edge with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: usize,
}

impl Edge {
    pub fn new(a: usize, b: usize, weight: usize) -> Self {
        Self {
            i: a.min(b),
            j: a.max(b),
            weight,
        }
    }

    pub fn touches(&self, node: usize) -> bool {
        self.i == node || self.j == node
    }

    pub fn other(&self, node: usize) -> Option<usize> {
        if self.i == node {
            Some(self.j)
        } else if self.j == node {
            Some(self.i)
        } else {
            None
        }
    }
}

/// Weighted undirected graph of subdomain pairs that exchange values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    n_nodes: usize,
    edges: Vec<Edge>,
}

impl CommGraph {
    pub fn new(n_nodes: usize, edges: Vec<Edge>) -> Result<Self, CommError> {
        let mut seen = BTreeSet::new();
        for e in &edges {
            if e.i == e.j {
                return Err(CommError::InvalidGraph(format!("self-loop at node {}", e.i)));
            }
            if e.i > e.j {
                return Err(CommError::InvalidGraph(format!("edge ({}, {}) is not normalized", e.i, e.j)));
            }
            if e.j >= n_nodes {
                return Err(CommError::InvalidGraph(format!("edge ({}, {}) has a node out of range", e.i, e.j)));
            }
            if e.weight == 0 {
                return Err(CommError::InvalidGraph(format!("edge ({}, {}) has zero weight", e.i, e.j)));
            }
            if !seen.insert((e.i, e.j)) {
                return Err(CommError::InvalidGraph(format!("duplicate edge ({}, {})", e.i, e.j)));
            }
        }
        Ok(Self { n_nodes, edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_nodes];
        for e in &self.edges {
            d[e.i] += 1;
            d[e.j] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }
}

/// Graph of a layout: an edge joins `i` and `j` when they exchange values,
/// weighted by the number of dofs per solution component moved in both
/// directions.
pub fn build_comm_graph(layout: &SubdomainLayout, space: &BrokenSpace) -> CommGraph {
    graph_from_plan(&build_exchange_plan(layout), space.dofs_per_cell())
}

pub fn graph_from_plan(plan: &ExchangePlan, dofs_per_cell: usize) -> CommGraph {
    let n = plan.n_nodes();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let cells = plan.cells(i, j).len() + plan.cells(j, i).len();
            if cells > 0 {
                edges.push(Edge::new(i, j, cells * dofs_per_cell));
            }
        }
    }
    CommGraph::new(n, edges).expect("plan edges are valid")
}
