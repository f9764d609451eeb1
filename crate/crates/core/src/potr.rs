//! Exact preference-aware task recommendation.
//!
//! Picks, for every worker, a list of at most `K` eligible tasks so that the
//! total weight of the chosen (worker, task) entries is maximal, every task is
//! recommended to at least `psi` workers and every list carries at least
//! `v2g_min` V2G tasks. The program is totally unimodular once written as a
//! flow with lower bounds, so it is solved exactly by [`crate::flow`]:
//!
//! ```text
//! source -> worker (cap K) -> worker/type group -> task -> sink
//!                              |  V2G group: lower bound v2g_min
//!                              `- task->sink: lower bound psi
//! ```
//!
//! Lower bounds are modelled as "slack" arcs on the most significant cost
//! level, so a solve either satisfies all of them or reports which family
//! could not be met.

use crate::domain::{eligible, Task, TaskId, TaskType, Worker, WorkerId};
use crate::error::{ConstraintClass, Error, Result};
use crate::flow::{quantize, Augment, Cost, FlowNetwork, EXPLORE, SLACK, TIE, WEIGHT};

/// Weight used for a (worker, type) pair that has never been observed.
/// Such entries outrank every finite weight; the bonus is earned once per
/// (worker, task type) group, however many tasks of that group are picked.
pub const UNEXPLORED: f64 = f64::INFINITY;

const MAX_WEIGHT: f64 = 1e12;

/// Dense worker x task weights, rows in worker order, columns in task order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<WeightMatrix> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "weight matrix has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(bad) = data
            .iter()
            .find(|w| !(**w == UNEXPLORED || (w.is_finite() && **w >= 0.0 && **w < MAX_WEIGHT)))
        {
            return Err(Error::InvalidInput(format!("weight {bad} outside [0, 1e12) or +inf")));
        }
        Ok(WeightMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<WeightMatrix> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        WeightMatrix::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, worker: usize, task: usize) -> f64 {
        self.data[worker * self.cols + task]
    }

    pub fn scaled(&self, c: f64) -> Result<WeightMatrix> {
        WeightMatrix::new(self.rows, self.cols, self.data.iter().map(|w| w * c).collect())
    }
}

/// Binary recommendation lists; entry (i, j) means task j is in worker i's list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecommendationMatrix {
    pub worker_ids: Vec<WorkerId>,
    pub task_ids: Vec<TaskId>,
    entries: Vec<bool>,
    pub k: usize,
    /// Effective (possibly relaxed) bounds the matrix was solved under.
    pub psi: usize,
    pub v2g_min: usize,
}

impl RecommendationMatrix {
    pub fn empty(workers: &[Worker], tasks: &[Task], k: usize) -> RecommendationMatrix {
        RecommendationMatrix {
            worker_ids: workers.iter().map(|w| w.id).collect(),
            task_ids: tasks.iter().map(|t| t.id).collect(),
            entries: vec![false; workers.len() * tasks.len()],
            k,
            psi: 0,
            v2g_min: 0,
        }
    }

    pub fn num_workers(&self) -> usize {
        self.worker_ids.len()
    }

    pub fn num_tasks(&self) -> usize {
        self.task_ids.len()
    }

    pub fn get(&self, worker: usize, task: usize) -> bool {
        self.entries[worker * self.task_ids.len() + task]
    }

    pub fn set(&mut self, worker: usize, task: usize, on: bool) {
        let cols = self.task_ids.len();
        self.entries[worker * cols + task] = on;
    }

    pub fn row_count(&self, worker: usize) -> usize {
        let cols = self.task_ids.len();
        self.entries[worker * cols..(worker + 1) * cols]
            .iter()
            .filter(|x| **x)
            .count()
    }

    pub fn col_count(&self, task: usize) -> usize {
        (0..self.worker_ids.len()).filter(|&i| self.get(i, task)).count()
    }

    /// Selected entries as (row, column) indices, row-major.
    pub fn selected(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.task_ids.len();
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, on)| **on)
            .map(move |(idx, _)| (idx / cols, idx % cols))
    }

    pub fn pairs(&self) -> Vec<(WorkerId, TaskId)> {
        self.selected()
            .map(|(i, j)| (self.worker_ids[i], self.task_ids[j]))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.entries.iter().filter(|x| **x).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Checks list length, coverage, V2G quota and eligibility against the
    /// bounds stored in the matrix.
    pub fn check(&self, workers: &[Worker], tasks: &[Task], lambda_km: f64) -> Result<(), String> {
        if workers.len() != self.num_workers() || tasks.len() != self.num_tasks() {
            return Err("shape mismatch".into());
        }
        for (i, w) in workers.iter().enumerate() {
            if self.row_count(i) > self.k {
                return Err(format!("{} receives {} > K tasks", w.id, self.row_count(i)));
            }
            let v2g = (0..tasks.len())
                .filter(|&j| self.get(i, j) && tasks[j].is_v2g())
                .count();
            if v2g < self.v2g_min {
                return Err(format!("{} receives {v2g} < {} V2G tasks", w.id, self.v2g_min));
            }
            for (j, s) in tasks.iter().enumerate() {
                if self.get(i, j) && !eligible(w, s, lambda_km) {
                    return Err(format!("{} is not eligible for {}", w.id, s.id));
                }
            }
        }
        for (j, s) in tasks.iter().enumerate() {
            if self.col_count(j) < self.psi {
                return Err(format!("{} reaches {} < psi workers", s.id, self.col_count(j)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotrBounds {
    pub k: usize,
    pub psi: usize,
    pub v2g_min: usize,
    pub lambda_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Relaxation {
    pub constraint: ConstraintClass,
    pub original: usize,
    pub relaxed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotrSolution {
    pub matrix: RecommendationMatrix,
    /// Sum of the finite weights of the selected entries.
    pub objective: f64,
    /// Number of (worker, type) groups reached through unexplored entries.
    pub explored_groups: usize,
    pub relaxation_report: Vec<Relaxation>,
}

fn need_tasks(num_tasks: usize) -> Result<()> {
    if num_tasks == 0 {
        return Err(Error::InvalidInput("task set is empty".into()));
    }
    Ok(())
}

/// `floor(|W| K / |S|)`: the minimum number of lists each task must reach.
pub fn derive_psi(num_workers: usize, num_tasks: usize, k: usize) -> Result<usize> {
    need_tasks(num_tasks)?;
    Ok(num_workers * k / num_tasks)
}

/// `floor(|V2G| K / |S|)`: the minimum number of V2G tasks per list.
pub fn derive_v2g_min(num_v2g: usize, num_tasks: usize, k: usize) -> Result<usize> {
    need_tasks(num_tasks)?;
    Ok(num_v2g * k / num_tasks)
}

/// Solves with `psi` and `v2g_min` derived from the population counts.
pub fn solve_potr(
    weights: &WeightMatrix,
    workers: &[Worker],
    tasks: &[Task],
    k: usize,
    lambda_km: f64,
    allow_relaxation: bool,
) -> Result<PotrSolution> {
    let bounds = if tasks.is_empty() {
        PotrBounds { k, psi: 0, v2g_min: 0, lambda_km }
    } else {
        let v2g = tasks.iter().filter(|t| t.is_v2g()).count();
        PotrBounds {
            k,
            psi: derive_psi(workers.len(), tasks.len(), k)?,
            v2g_min: derive_v2g_min(v2g, tasks.len(), k)?,
            lambda_km,
        }
    };
    solve_potr_with_bounds(weights, workers, tasks, bounds, allow_relaxation)
}

/// Solves under explicit bounds. When the bounds cannot be met and
/// `allow_relaxation` is set, `psi` is lowered first, then `v2g_min`, each to
/// the largest value that is feasible; every change lands in the report.
pub fn solve_potr_with_bounds(
    weights: &WeightMatrix,
    workers: &[Worker],
    tasks: &[Task],
    bounds: PotrBounds,
    allow_relaxation: bool,
) -> Result<PotrSolution> {
    if weights.rows() != workers.len() || weights.cols() != tasks.len() {
        return Err(Error::InvalidInput(format!(
            "weights are {}x{} but there are {} workers and {} tasks",
            weights.rows(),
            weights.cols(),
            workers.len(),
            tasks.len()
        )));
    }
    let problem = Problem::new(weights, workers, tasks, bounds.lambda_km);

    let unmet = problem.unmet(bounds);
    if unmet.is_empty() {
        return Ok(problem.finish(problem.solve(bounds, true), bounds, Vec::new()));
    }
    if !allow_relaxation {
        return Err(Error::RecommendationInfeasible { binding: unmet });
    }

    // Lowering either bound never breaks feasibility, so both searches bisect.
    let largest_psi = |v2g_min: usize| {
        largest_feasible(bounds.psi, |psi| problem.unmet(PotrBounds { psi, v2g_min, ..bounds }).is_empty())
            .map(|psi| PotrBounds { psi, v2g_min, ..bounds })
    };

    let mut report = Vec::new();
    let effective = match largest_psi(bounds.v2g_min) {
        Some(found) => found,
        None => {
            // psi = 0 is still infeasible, so the V2G quota binds.
            let v2g_min = largest_feasible(bounds.v2g_min, |v2g_min| {
                problem.unmet(PotrBounds { psi: 0, v2g_min, ..bounds }).is_empty()
            })
            .expect("zero lower bounds are always feasible");
            let full = PotrBounds { v2g_min, ..bounds };
            if problem.unmet(full).is_empty() {
                full
            } else {
                largest_psi(v2g_min).expect("psi = 0 was feasible for this quota")
            }
        }
    };
    let attempt = problem.solve(effective, true);
    if effective.psi != bounds.psi {
        report.push(Relaxation {
            constraint: ConstraintClass::Psi,
            original: bounds.psi,
            relaxed: effective.psi,
        });
    }
    if effective.v2g_min != bounds.v2g_min {
        report.push(Relaxation {
            constraint: ConstraintClass::V2gMin,
            original: bounds.v2g_min,
            relaxed: effective.v2g_min,
        });
    }
    Ok(problem.finish(attempt, effective, report))
}

/// Largest value below `upper` that passes `feasible`, given that
/// feasibility is monotone and `upper` itself already failed.
fn largest_feasible(upper: usize, mut feasible: impl FnMut(usize) -> bool) -> Option<usize> {
    let mut best = None;
    let (mut lo, mut hi) = (0, upper);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid) {
            best = Some(mid);
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    best
}

struct Problem<'a> {
    weights: &'a WeightMatrix,
    workers: &'a [Worker],
    tasks: &'a [Task],
    eligible: Vec<bool>,
}

struct Attempt {
    entries: Vec<bool>,
    unmet: Vec<ConstraintClass>,
}

impl<'a> Problem<'a> {
    fn new(weights: &'a WeightMatrix, workers: &'a [Worker], tasks: &'a [Task], lambda_km: f64) -> Self {
        let eligible = workers
            .iter()
            .flat_map(|w| tasks.iter().map(move |s| eligible(w, s, lambda_km)))
            .collect();
        Problem {
            weights,
            workers,
            tasks,
            eligible,
        }
    }

    /// Lower-bound classes that cannot be met. Only the slack level decides
    /// this, so the probe network carries no other costs.
    fn unmet(&self, bounds: PotrBounds) -> Vec<ConstraintClass> {
        self.solve(bounds, false).unmet
    }

    fn solve(&self, bounds: PotrBounds, full_objective: bool) -> Attempt {
        let nw = self.workers.len();
        let ns = self.tasks.len();
        let k = bounds.k as i64;

        let mut g = if full_objective { FlowNetwork::new() } else { FlowNetwork::new().batched() };
        let source = g.add_node();
        let sink = g.add_node();
        let task_nodes = g.add_nodes(ns);
        let mut entry_arcs = Vec::new();
        let mut quota_arcs = Vec::new();
        let mut cover_arcs = Vec::new();

        for i in 0..nw {
            let worker_node = g.add_node();
            g.add_arc(source, worker_node, k, Cost::ZERO);
            for z in TaskType::ALL {
                let group = g.add_node();
                g.add_arc(worker_node, group, k, Cost::ZERO);
                if z == TaskType::V2G && bounds.v2g_min > 0 {
                    quota_arcs.push(g.add_arc(worker_node, group, bounds.v2g_min as i64, Cost::at(SLACK, -1)));
                }
                let mut explore_node = None;
                for (j, s) in self.tasks.iter().enumerate() {
                    if s.kind != z || !self.eligible[i * ns + j] {
                        continue;
                    }
                    let w = self.weights.get(i, j);
                    let tie = Cost::at(TIE, (i * ns + j) as i128 + 1);
                    let arc = if !full_objective {
                        g.add_arc(group, task_nodes.start + j, 1, Cost::ZERO)
                    } else if w == UNEXPLORED {
                        let via = *explore_node.get_or_insert_with(|| {
                            let x = g.add_node();
                            g.add_arc(group, x, 1, Cost::at(EXPLORE, -1));
                            g.add_arc(group, x, k, Cost::ZERO);
                            x
                        });
                        g.add_arc(via, task_nodes.start + j, 1, tie)
                    } else {
                        g.add_arc(group, task_nodes.start + j, 1, tie.with(WEIGHT, -quantize(w)))
                    };
                    entry_arcs.push((i, j, arc));
                }
            }
        }
        for j in 0..ns {
            let node = task_nodes.start + j;
            g.add_arc(node, sink, nw as i64, Cost::ZERO);
            if bounds.psi > 0 {
                cover_arcs.push(g.add_arc(node, sink, bounds.psi as i64, Cost::at(SLACK, -1)));
            }
        }

        g.run(source, sink, Augment::WhileNegative);

        let mut entries = vec![false; nw * ns];
        for (i, j, arc) in entry_arcs {
            entries[i * ns + j] = g.flow_on(arc) > 0;
        }
        let mut unmet = Vec::new();
        if cover_arcs.iter().any(|&a| g.residual(a) > 0) {
            unmet.push(ConstraintClass::Psi);
        }
        if quota_arcs.iter().any(|&a| g.residual(a) > 0) {
            unmet.push(ConstraintClass::V2gMin);
        }
        Attempt { entries, unmet }
    }

    fn finish(&self, attempt: Attempt, bounds: PotrBounds, relaxation_report: Vec<Relaxation>) -> PotrSolution {
        let mut matrix = RecommendationMatrix::empty(self.workers, self.tasks, bounds.k);
        matrix.psi = bounds.psi;
        matrix.v2g_min = bounds.v2g_min;
        let ns = self.tasks.len();
        let mut objective = 0.0;
        let mut groups = std::collections::BTreeSet::new();
        for (idx, on) in attempt.entries.iter().enumerate() {
            if !on {
                continue;
            }
            let (i, j) = (idx / ns, idx % ns);
            matrix.set(i, j, true);
            let w = self.weights.get(i, j);
            if w == UNEXPLORED {
                groups.insert((i, self.tasks[j].kind));
            } else {
                objective += w;
            }
        }
        PotrSolution {
            matrix,
            objective,
            explored_groups: groups.len(),
            relaxation_report,
        }
    }
}
