//! Winner determination for the reverse auction and second-price payments.
//!
//! [`solve_wibs_exact`] is a branch-and-bound over which V2G tasks get
//! covered; each node is one min-cost flow. [`bmw`] is the iterative
//! matching heuristic used at simulation scale.

use std::collections::HashMap;

use crate::domain::{Bid, EnergyBudget, Task, TaskId, Worker, WorkerId, ENERGY_EPS};
use crate::error::{Error, Result};
use crate::flow::{quantize, Augment, Cost, FlowNetwork, SLACK, TIE, WEIGHT};
use crate::matching::{min_weight_matching, BidGraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignedPair {
    pub worker: WorkerId,
    pub task: TaskId,
    /// The winning bid.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Sorted by task id.
    pub pairs: Vec<AssignedPair>,
    pub total_cost: f64,
    pub delivered_v2g_kwh: f64,
    pub required_kwh: f64,
    /// Whether the energy budget is met.
    pub feasible: bool,
    /// Rideshare and battery-swap tasks left without a winner.
    pub unassigned_mandatory: Vec<TaskId>,
    /// Matching rounds performed (1 for the exact solver).
    pub iterations: usize,
}

impl Assignment {
    fn from_edges(graph: &BidGraph, edges: &[usize], budget: EnergyBudget, iterations: usize) -> Assignment {
        let mut covered = vec![false; graph.tasks.len()];
        let mut pairs: Vec<AssignedPair> = edges
            .iter()
            .map(|&e| {
                let edge = graph.edges[e];
                covered[edge.task] = true;
                AssignedPair {
                    worker: graph.workers[edge.worker],
                    task: graph.tasks[edge.task],
                    cost: edge.weight,
                }
            })
            .collect();
        pairs.sort_by_key(|p| p.task);
        let delivered: f64 = edges.iter().map(|&e| graph.deliverable_kwh[graph.edges[e].task]).sum();
        Assignment {
            total_cost: pairs.iter().map(|p| p.cost).sum(),
            delivered_v2g_kwh: delivered,
            required_kwh: budget.required_kwh,
            feasible: budget.is_met_by(delivered),
            unassigned_mandatory: (0..graph.tasks.len())
                .filter(|&j| !graph.is_v2g[j] && !covered[j])
                .map(|j| graph.tasks[j])
                .collect(),
            pairs,
            iterations,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn penalized_cost(&self, penalty: f64) -> f64 {
        self.total_cost + penalty * self.unassigned_mandatory.len() as f64
    }

    pub fn winner_of(&self, task: TaskId) -> Option<WorkerId> {
        self.pairs.iter().find(|p| p.task == task).map(|p| p.worker)
    }

    pub fn task_of(&self, worker: WorkerId) -> Option<TaskId> {
        self.pairs.iter().find(|p| p.worker == worker).map(|p| p.task)
    }

    /// Verifies uniqueness, that every pair is a bid at its amount, and the
    /// energy bookkeeping.
    pub fn check(&self, bids: &[Bid], tasks: &[Task]) -> std::result::Result<(), String> {
        let mut workers = std::collections::HashSet::new();
        let mut seen_tasks = std::collections::HashSet::new();
        let mut delivered = 0.0;
        for p in &self.pairs {
            if !workers.insert(p.worker) {
                return Err(format!("{} assigned twice", p.worker));
            }
            if !seen_tasks.insert(p.task) {
                return Err(format!("{} assigned twice", p.task));
            }
            let bid = bids
                .iter()
                .find(|b| b.worker == p.worker && b.task == p.task)
                .ok_or_else(|| format!("({}, {}) has no bid", p.worker, p.task))?;
            if bid.amount != p.cost {
                return Err(format!("({}, {}) costed {} but bid {}", p.worker, p.task, p.cost, bid.amount));
            }
            let task = tasks.iter().find(|t| t.id == p.task).ok_or_else(|| format!("unknown {}", p.task))?;
            if task.is_v2g() {
                delivered += task.deliverable_kwh;
            }
        }
        if (delivered - self.delivered_v2g_kwh).abs() > 1e-9 * (1.0 + delivered) {
            return Err(format!("delivered {} recorded as {}", delivered, self.delivered_v2g_kwh));
        }
        if self.feasible && delivered + ENERGY_EPS < self.required_kwh {
            return Err(format!("flagged feasible with {delivered} of {} kWh", self.required_kwh));
        }
        Ok(())
    }
}

/// Default coverage penalty: one more than every bid combined.
pub fn default_penalty(bids: &[Bid]) -> f64 {
    1.0 + bids.iter().map(|b| b.amount).sum::<f64>()
}

fn check_workers(bids: &[Bid], workers: &[Worker]) -> Result<()> {
    for b in bids {
        if !workers.iter().any(|w| w.id == b.worker) {
            return Err(Error::UnknownWorker(b.worker));
        }
    }
    Ok(())
}

/// Most V2G energy any matching of the bid graph can deliver.
pub fn max_deliverable_kwh(bids: &[Bid], tasks: &[Task]) -> Result<f64> {
    Ok(max_deliverable(&BidGraph::new(bids, tasks)?))
}

fn max_deliverable(graph: &BidGraph) -> f64 {
    let mut net = FlowNetwork::new();
    let source = net.add_node();
    let sink = net.add_node();
    let left = net.add_nodes(graph.workers.len());
    let right = net.add_nodes(graph.tasks.len());
    for l in left.clone() {
        net.add_arc(source, l, 1, Cost::ZERO);
    }
    for (j, r) in right.clone().enumerate() {
        if graph.is_v2g[j] {
            net.add_arc(r, sink, 1, Cost::at(WEIGHT, -quantize(graph.deliverable_kwh[j])));
        }
    }
    let arcs: Vec<(usize, usize)> = graph
        .edges
        .iter()
        .filter(|e| graph.is_v2g[e.task])
        .map(|e| (e.task, net.add_arc(left.start + e.worker, right.start + e.task, 1, Cost::ZERO)))
        .collect();
    net.run(source, sink, Augment::WhileNegative);
    arcs.iter()
        .filter(|(_, a)| net.flow_on(*a) > 0)
        .map(|(j, _)| graph.deliverable_kwh[*j])
        .sum()
}

/// Cheapest penalised matching that covers every V2G task in `forced` and no
/// other V2G task, or `None` if `forced` cannot be covered.
fn solve_forced(graph: &BidGraph, forced: &[bool], penalty: i128) -> Option<(Cost, Vec<usize>)> {
    let mut net = FlowNetwork::new();
    let source = net.add_node();
    let sink = net.add_node();
    let left = net.add_nodes(graph.workers.len());
    let right = net.add_nodes(graph.tasks.len());
    for l in left.clone() {
        net.add_arc(source, l, 1, Cost::ZERO);
    }
    let mut forced_arcs = Vec::new();
    for (j, r) in right.clone().enumerate() {
        if forced[j] {
            forced_arcs.push(net.add_arc(r, sink, 1, Cost::at(SLACK, -1)));
        } else if !graph.is_v2g[j] {
            net.add_arc(r, sink, 1, Cost::at(WEIGHT, -penalty));
        }
    }
    let arcs: Vec<(usize, usize)> = graph
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| !graph.is_v2g[e.task] || forced[e.task])
        .map(|(k, e)| {
            let cost = Cost::at(WEIGHT, quantize(e.weight)).with(TIE, k as i128 + 1);
            (k, net.add_arc(left.start + e.worker, right.start + e.task, 1, cost))
        })
        .collect();
    let result = net.run(source, sink, Augment::WhileNegative);
    if forced_arcs.iter().any(|&a| net.flow_on(a) == 0) {
        return None;
    }
    let cost = result.cost.with(SLACK, forced_arcs.len() as i128);
    let edges = arcs.into_iter().filter(|(_, a)| net.flow_on(*a) > 0).map(|(k, _)| k).collect();
    Some((cost, edges))
}

struct Search<'a> {
    graph: &'a BidGraph,
    penalty: i128,
    required: f64,
    /// V2G tasks with at least one bid, largest energy first.
    candidates: Vec<usize>,
    /// `suffix[d]` = energy of candidates `d..`.
    suffix: Vec<f64>,
    forced: Vec<bool>,
    best: Option<(Cost, Vec<usize>)>,
}

impl Search<'_> {
    fn visit(&mut self, depth: usize, energy: f64) {
        let Some((cost, edges)) = solve_forced(self.graph, &self.forced, self.penalty) else {
            return;
        };
        if self.best.as_ref().is_some_and(|(b, _)| cost >= *b) {
            return;
        }
        if energy + ENERGY_EPS >= self.required {
            self.best = Some((cost, edges));
            return;
        }
        if depth == self.candidates.len() || energy + self.suffix[depth] + ENERGY_EPS < self.required {
            return;
        }
        let j = self.candidates[depth];
        self.forced[j] = true;
        self.visit(depth + 1, energy + self.graph.deliverable_kwh[j]);
        self.forced[j] = false;
        self.visit(depth + 1, energy);
    }
}

/// Optimal winners: minimum bid cost plus `unassigned_penalty` per uncovered
/// rideshare or battery-swap task, subject to delivering the energy budget.
/// Exponential in the number of V2G tasks; meant for small instances.
pub fn solve_wibs_exact(
    bids: &[Bid],
    tasks: &[Task],
    workers: &[Worker],
    budget: EnergyBudget,
    unassigned_penalty: f64,
) -> Result<Assignment> {
    check_workers(bids, workers)?;
    if !(unassigned_penalty.is_finite() && unassigned_penalty >= 0.0) {
        return Err(Error::InvalidInput(format!("penalty {unassigned_penalty} must be finite and >= 0")));
    }
    let graph = BidGraph::new(bids, tasks)?;
    let attainable = max_deliverable(&graph);
    if attainable + ENERGY_EPS < budget.required_kwh {
        return Err(Error::BudgetUnattainable {
            required_kwh: budget.required_kwh,
            attainable_kwh: attainable,
        });
    }
    let mut candidates: Vec<usize> = (0..graph.tasks.len())
        .filter(|&j| graph.is_v2g[j] && graph.edges.iter().any(|e| e.task == j))
        .collect();
    candidates.sort_by(|&a, &b| {
        graph.deliverable_kwh[b]
            .total_cmp(&graph.deliverable_kwh[a])
            .then(graph.tasks[a].cmp(&graph.tasks[b]))
    });
    let mut suffix = vec![0.0; candidates.len() + 1];
    for d in (0..candidates.len()).rev() {
        suffix[d] = suffix[d + 1] + graph.deliverable_kwh[candidates[d]];
    }
    let mut search = Search {
        graph: &graph,
        penalty: quantize(unassigned_penalty),
        required: budget.required_kwh,
        candidates,
        suffix,
        forced: vec![false; graph.tasks.len()],
        best: None,
    };
    search.visit(0, 0.0);
    let (_, edges) = search.best.ok_or(Error::BudgetUnattainable {
        required_kwh: budget.required_kwh,
        attainable_kwh: attainable,
    })?;
    Ok(Assignment::from_edges(&graph, &edges, budget, 1))
}

/// Iterative matching heuristic. Matches at minimum weight; while the budget
/// is short, removes the fewest most expensive transport edges whose workers
/// could make up the shortfall on still-uncovered V2G tasks, then rematches.
/// Stops with `feasible = false` once no such edge set exists.
pub fn bmw(workers: &[Worker], tasks: &[Task], bids: &[Bid], budget: EnergyBudget) -> Result<Assignment> {
    check_workers(bids, workers)?;
    let graph = BidGraph::new(bids, tasks)?;
    let mut active = vec![true; graph.edges.len()];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let matched = min_weight_matching(&graph, &active);
        let delivered: f64 = matched.iter().map(|&e| graph.deliverable_kwh[graph.edges[e].task]).sum();
        if budget.is_met_by(delivered) {
            return Ok(Assignment::from_edges(&graph, &matched, budget, iterations));
        }
        let shortfall = budget.required_kwh - delivered;

        let mut covered = vec![false; graph.tasks.len()];
        for &e in &matched {
            covered[graph.edges[e].task] = true;
        }
        let mut contribution = vec![0.0f64; graph.workers.len()];
        for (e, edge) in graph.edges.iter().enumerate() {
            if active[e] && graph.is_v2g[edge.task] && !covered[edge.task] {
                let c = &mut contribution[edge.worker];
                *c = c.max(graph.deliverable_kwh[edge.task]);
            }
        }
        let mut removable: Vec<usize> = matched.iter().copied().filter(|&e| !graph.is_v2g[graph.edges[e].task]).collect();
        // Graph order is (worker id, task id), so a stable sort keeps that as the tie-break.
        removable.sort_by(|&a, &b| graph.edges[b].weight.total_cmp(&graph.edges[a].weight));

        let mut freed = 0.0;
        let mut prefix = None;
        for (n, &e) in removable.iter().enumerate() {
            freed += contribution[graph.edges[e].worker];
            if freed + ENERGY_EPS >= shortfall {
                prefix = Some(n + 1);
                break;
            }
        }
        let Some(z) = prefix else {
            return Ok(Assignment::from_edges(&graph, &matched, budget, iterations));
        };
        for &e in &removable[..z] {
            active[e] = false;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payment {
    pub worker: WorkerId,
    pub task: TaskId,
    pub bid: f64,
    pub amount: f64,
    /// Another worker bid less on the same task than the winner.
    pub undercut: bool,
}

/// One payment per winner, sorted by task id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PaymentSchedule {
    pub payments: Vec<Payment>,
}

impl PaymentSchedule {
    pub fn total(&self) -> f64 {
        self.payments.iter().map(|p| p.amount).sum()
    }

    pub fn get(&self, worker: WorkerId) -> Option<f64> {
        self.payments.iter().find(|p| p.worker == worker).map(|p| p.amount)
    }

    pub fn undercut_tasks(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.payments.iter().filter(|p| p.undercut).map(|p| p.task)
    }
}

/// Each winner is paid the lowest bid any other worker placed on its task,
/// or its own bid when nobody else bid.
pub fn second_price_payments(assignment: &Assignment, bids: &[Bid]) -> Result<PaymentSchedule> {
    let mut by_task: HashMap<TaskId, Vec<&Bid>> = HashMap::new();
    for b in bids {
        by_task.entry(b.task).or_default().push(b);
    }
    let payments = assignment
        .pairs
        .iter()
        .map(|p| {
            let on_task = by_task.get(&p.task).map(Vec::as_slice).unwrap_or(&[]);
            let own = on_task
                .iter()
                .find(|b| b.worker == p.worker)
                .ok_or(Error::MissingBid {
                    worker: p.worker,
                    task: p.task,
                })?
                .amount;
            let competing = on_task
                .iter()
                .filter(|b| b.worker != p.worker)
                .map(|b| b.amount)
                .min_by(f64::total_cmp);
            Ok(Payment {
                worker: p.worker,
                task: p.task,
                bid: own,
                amount: competing.unwrap_or(own),
                undercut: competing.is_some_and(|c| c < own),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PaymentSchedule { payments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Point, TaskType};

    fn worker(id: u32) -> Worker {
        Worker::new(id, Point::new(0.0, 0.0), 0.2, 300.0, 20.0)
    }

    fn ride(id: u32) -> Task {
        Task::transport(id, TaskType::Rideshare, Point::new(0.0, 0.0), Point::new(2.0, 0.0))
    }

    fn v2g(id: u32, kwh: f64) -> Task {
        Task::v2g(id, Point::new(1.0, 1.0), kwh)
    }

    fn pairs(a: &Assignment) -> Vec<(u32, u32)> {
        a.pairs.iter().map(|p| (p.worker.0, p.task.0)).collect()
    }

    fn two_worker_instance() -> (Vec<Worker>, Vec<Task>, Vec<Bid>) {
        (
            vec![worker(1), worker(2)],
            vec![ride(1), v2g(2, 5.0)],
            vec![Bid::new(1, 1, 4.0), Bid::new(1, 2, 6.0), Bid::new(2, 1, 5.0), Bid::new(2, 2, 6.5)],
        )
    }

    #[test]
    fn exact_two_workers() {
        let (w, t, b) = two_worker_instance();
        let a = solve_wibs_exact(&b, &t, &w, EnergyBudget::new(5.0), default_penalty(&b)).unwrap();
        assert_eq!(pairs(&a), vec![(1, 1), (2, 2)]);
        assert!((a.total_cost - 10.5).abs() < 1e-12);
        assert!(a.feasible);
        assert_eq!(a.delivered_v2g_kwh, 5.0);
        a.check(&b, &t).unwrap();
    }

    #[test]
    fn exact_single_pair() {
        let b = [Bid::new(1, 1, 3.0)];
        let a = solve_wibs_exact(&b, &[ride(1)], &[worker(1)], EnergyBudget::none(), default_penalty(&b)).unwrap();
        assert_eq!(pairs(&a), vec![(1, 1)]);
        assert_eq!(a.total_cost, 3.0);
    }

    #[test]
    fn exact_budget_forces_v2g() {
        let b = [Bid::new(1, 1, 1.0), Bid::new(1, 2, 9.0)];
        let t = [ride(1), v2g(2, 5.0)];
        let a = solve_wibs_exact(&b, &t, &[worker(1)], EnergyBudget::new(5.0), 100.0).unwrap();
        assert_eq!(pairs(&a), vec![(1, 2)]);
        assert_eq!(a.penalized_cost(100.0), 109.0);
        assert_eq!(a.unassigned_mandatory, vec![TaskId(1)]);
    }

    #[test]
    fn exact_reports_unattainable_budget() {
        let b = [Bid::new(1, 2, 9.0), Bid::new(2, 2, 8.0)];
        let t = [ride(1), v2g(2, 5.0), v2g(3, 4.0)];
        let err = solve_wibs_exact(&b, &t, &[worker(1), worker(2)], EnergyBudget::new(6.0), 100.0).unwrap_err();
        assert!(matches!(err, Error::BudgetUnattainable { attainable_kwh, .. } if attainable_kwh == 5.0));
        assert!(matches!(
            solve_wibs_exact(&b, &t, &[worker(1)], EnergyBudget::none(), 1.0),
            Err(Error::UnknownWorker(WorkerId(2)))
        ));
    }

    #[test]
    fn bmw_hand_trace() {
        let b = [Bid::new(1, 1, 1.0), Bid::new(1, 2, 9.0)];
        let t = [ride(1), v2g(2, 5.0)];
        let a = bmw(&[worker(1)], &t, &b, EnergyBudget::new(5.0)).unwrap();
        assert_eq!(pairs(&a), vec![(1, 2)]);
        assert_eq!(a.total_cost, 9.0);
        assert_eq!(a.iterations, 2);
        assert!(a.feasible);
    }

    #[test]
    fn bmw_without_budget_is_one_matching() {
        let (w, t, b) = two_worker_instance();
        let a = bmw(&w, &t, &b, EnergyBudget::none()).unwrap();
        assert_eq!(a.iterations, 1);
        let g = BidGraph::new(&b, &t).unwrap();
        let m = min_weight_matching(&g, &[true; 4]);
        assert_eq!(a.total_cost, m.iter().map(|&e| g.edges[e].weight).sum::<f64>());
    }

    #[test]
    fn bmw_agrees_with_exact_on_two_workers() {
        let (w, t, b) = two_worker_instance();
        let a = bmw(&w, &t, &b, EnergyBudget::new(5.0)).unwrap();
        assert_eq!(pairs(&a), vec![(1, 1), (2, 2)]);
        assert!((a.total_cost - 10.5).abs() < 1e-12);
        assert_eq!(a.iterations, 1);
    }

    #[test]
    fn bmw_gives_up_when_no_worker_can_help() {
        let b = [Bid::new(1, 1, 1.0)];
        let t = [ride(1), v2g(2, 5.0)];
        let a = bmw(&[worker(1)], &t, &b, EnergyBudget::new(5.0)).unwrap();
        assert!(!a.feasible);
        assert_eq!(pairs(&a), vec![(1, 1)]);
        a.check(&b, &t).unwrap();
    }

    #[test]
    fn payments() {
        let t = [ride(1)];
        let b = [Bid::new(1, 1, 4.0), Bid::new(2, 1, 5.5), Bid::new(3, 1, 7.0)];
        let a = bmw(&[worker(1), worker(2), worker(3)], &t, &b, EnergyBudget::none()).unwrap();
        let p = second_price_payments(&a, &b).unwrap();
        assert_eq!(p.get(WorkerId(1)), Some(5.5));
        assert_eq!(p.undercut_tasks().count(), 0);

        let sole = [Bid::new(1, 1, 6.0)];
        let a = bmw(&[worker(1)], &t, &sole, EnergyBudget::none()).unwrap();
        assert_eq!(second_price_payments(&a, &sole).unwrap().get(WorkerId(1)), Some(6.0));

        let b = [Bid::new(1, 1, 4.0), Bid::new(2, 1, 5.0)];
        let forced = Assignment {
            pairs: vec![AssignedPair { worker: WorkerId(2), task: TaskId(1), cost: 5.0 }],
            total_cost: 5.0,
            delivered_v2g_kwh: 0.0,
            required_kwh: 0.0,
            feasible: true,
            unassigned_mandatory: vec![],
            iterations: 1,
        };
        let p = second_price_payments(&forced, &b).unwrap();
        assert_eq!(p.get(WorkerId(2)), Some(4.0));
        assert_eq!(p.undercut_tasks().collect::<Vec<_>>(), vec![TaskId(1)]);

        assert!(matches!(second_price_payments(&forced, &b[..1]), Err(Error::MissingBid { .. })));
    }
}
