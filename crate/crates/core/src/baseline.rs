//! Greedy comparator: per-worker top-K recommendations from known
//! preferences and per-task cheapest-bid assignment without backtracking.

use std::collections::HashSet;

use crate::auction::{AssignedPair, Assignment};
use crate::cars::PreferenceModel;
use crate::domain::{eligible, Bid, EnergyBudget, Task, TaskId, Worker, WorkerId};
use crate::error::{Error, Result};
use crate::potr::RecommendationMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutcome {
    pub assignment: Assignment,
    pub violated_budget: bool,
    /// Tasks of any type that received no worker, ascending.
    pub unmatched_tasks: Vec<TaskId>,
}

/// Each worker independently gets its K eligible tasks with the highest
/// preference, ties by task id. No coverage or quota coupling.
pub fn pk_topk(
    prefs: &PreferenceModel,
    workers: &[Worker],
    tasks: &[Task],
    k: usize,
    lambda_km: f64,
) -> Result<RecommendationMatrix> {
    let mut matrix = RecommendationMatrix::empty(workers, tasks, k);
    for (i, w) in workers.iter().enumerate() {
        let mut ranked: Vec<(f64, TaskId, usize)> = Vec::new();
        for (j, s) in tasks.iter().enumerate() {
            if eligible(w, s, lambda_km) {
                ranked.push((prefs.get(w.id, s.kind)?, s.id, j));
            }
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, _, j) in ranked.iter().take(k) {
            matrix.set(i, j, true);
        }
    }
    Ok(matrix)
}

/// Walks tasks by ascending id and hands each to its lowest still-free
/// bidder, ties by worker id.
pub fn bg_assign(bids: &[Bid], tasks: &[Task], budget: EnergyBudget) -> Result<BaselineOutcome> {
    crate::domain::validate_bids(bids).map_err(Error::InvalidInput)?;
    for b in bids {
        if !tasks.iter().any(|t| t.id == b.task) {
            return Err(Error::UnknownTask(b.task));
        }
    }
    let mut order: Vec<&Task> = tasks.iter().collect();
    order.sort_by_key(|t| t.id);
    let mut busy: HashSet<WorkerId> = HashSet::new();
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    let mut delivered = 0.0;
    for task in order {
        let best = bids
            .iter()
            .filter(|b| b.task == task.id && !busy.contains(&b.worker))
            .min_by(|a, b| a.amount.total_cmp(&b.amount).then(a.worker.cmp(&b.worker)));
        match best {
            Some(b) => {
                busy.insert(b.worker);
                pairs.push(AssignedPair {
                    worker: b.worker,
                    task: task.id,
                    cost: b.amount,
                });
                if task.is_v2g() {
                    delivered += task.deliverable_kwh;
                }
            }
            None => unmatched.push(task.id),
        }
    }
    let met = budget.is_met_by(delivered);
    let assignment = Assignment {
        total_cost: pairs.iter().map(|p| p.cost).sum(),
        delivered_v2g_kwh: delivered,
        required_kwh: budget.required_kwh,
        feasible: met,
        unassigned_mandatory: unmatched
            .iter()
            .copied()
            .filter(|id| tasks.iter().any(|t| t.id == *id && !t.is_v2g()))
            .collect(),
        pairs,
        iterations: 1,
    };
    Ok(BaselineOutcome {
        assignment,
        violated_budget: !met,
        unmatched_tasks: unmatched,
    })
}
