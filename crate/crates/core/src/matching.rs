//! Bipartite bid graph and minimum-weight maximum-cardinality matching.

use std::collections::HashMap;

use crate::domain::{Bid, Task, TaskId, WorkerId};
use crate::error::{Error, Result};
use crate::flow::{quantize, Augment, Cost, FlowNetwork, TIE, WEIGHT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Index into [`BidGraph::workers`].
    pub worker: usize,
    /// Index into [`BidGraph::tasks`].
    pub task: usize,
    pub weight: f64,
}

/// Workers on one side, tasks on the other, one edge per positive bid.
/// Edges are kept sorted by (worker id, task id).
#[derive(Debug, Clone, PartialEq)]
pub struct BidGraph {
    pub workers: Vec<WorkerId>,
    pub tasks: Vec<TaskId>,
    /// Deliverable energy per task; zero for transport tasks.
    pub deliverable_kwh: Vec<f64>,
    pub is_v2g: Vec<bool>,
    pub edges: Vec<Edge>,
}

impl BidGraph {
    /// Builds the graph over every task in `tasks` and every worker that bid.
    pub fn new(bids: &[Bid], tasks: &[Task]) -> Result<BidGraph> {
        crate::domain::validate_bids(bids).map_err(Error::InvalidInput)?;
        let task_index: HashMap<TaskId, usize> = tasks.iter().enumerate().map(|(j, t)| (t.id, j)).collect();
        let mut workers: Vec<WorkerId> = bids.iter().map(|b| b.worker).collect();
        workers.sort();
        workers.dedup();
        let mut edges = Vec::with_capacity(bids.len());
        for b in bids {
            let task = *task_index.get(&b.task).ok_or(Error::UnknownTask(b.task))?;
            let worker = workers.binary_search(&b.worker).expect("collected above");
            edges.push(Edge {
                worker,
                task,
                weight: b.amount,
            });
        }
        edges.sort_by_key(|e| (workers[e.worker], tasks[e.task].id));
        Ok(BidGraph {
            workers,
            tasks: tasks.iter().map(|t| t.id).collect(),
            deliverable_kwh: tasks.iter().map(|t| if t.is_v2g() { t.deliverable_kwh } else { 0.0 }).collect(),
            is_v2g: tasks.iter().map(|t| t.is_v2g()).collect(),
            edges,
        })
    }

    pub fn edge_pair(&self, e: usize) -> (WorkerId, TaskId) {
        let edge = &self.edges[e];
        (self.workers[edge.worker], self.tasks[edge.task])
    }
}

/// Minimum total weight among maximum-cardinality matchings, restricted to
/// the edges with `active[e]`. Ties go to the edge set that is smallest in
/// (worker id, task id) order. Returns matched edge indices in graph order.
pub fn min_weight_matching(graph: &BidGraph, active: &[bool]) -> Vec<usize> {
    debug_assert_eq!(active.len(), graph.edges.len());
    let mut net = FlowNetwork::new();
    let source = net.add_node();
    let sink = net.add_node();
    let left = net.add_nodes(graph.workers.len());
    let right = net.add_nodes(graph.tasks.len());
    for l in left.clone() {
        net.add_arc(source, l, 1, Cost::ZERO);
    }
    for r in right.clone() {
        net.add_arc(r, sink, 1, Cost::ZERO);
    }
    let arcs: Vec<(usize, usize)> = graph
        .edges
        .iter()
        .enumerate()
        .filter(|(e, _)| active[*e])
        .map(|(e, edge)| {
            let cost = Cost::at(WEIGHT, quantize(edge.weight)).with(TIE, e as i128 + 1);
            (e, net.add_arc(left.start + edge.worker, right.start + edge.task, 1, cost))
        })
        .collect();
    net.run(source, sink, Augment::Maximum);
    arcs.into_iter().filter(|(_, a)| net.flow_on(*a) > 0).map(|(e, _)| e).collect()
}
