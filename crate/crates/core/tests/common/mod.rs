//! Brute-force oracles and random instance builders shared by the
//! integration suites. Nothing here calls the solvers it is used to check.
#![allow(dead_code)]

use gridride_core::domain::{eligible, Bid, EnergyBudget, Point, Task, TaskType, Worker, ENERGY_EPS};
use gridride_core::potr::{PotrBounds, WeightMatrix, UNEXPLORED};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Lexicographic recommendation value: (unexplored groups reached, finite weight).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotrValue {
    pub explored: usize,
    pub weight: f64,
}

impl PotrValue {
    fn better_than(&self, other: &PotrValue) -> bool {
        self.explored > other.explored
            || (self.explored == other.explored && self.weight > other.weight + 1e-12)
    }
}

/// Exhaustive search over every binary worker x task matrix.
pub fn potr_enumerate(
    weights: &WeightMatrix,
    workers: &[Worker],
    tasks: &[Task],
    bounds: PotrBounds,
) -> Option<PotrValue> {
    let nw = workers.len();
    let ns = tasks.len();
    let cells = nw * ns;
    assert!(cells <= 20, "enumeration only for tiny instances");
    let mut best: Option<PotrValue> = None;
    'outer: for mask in 0u32..(1u32 << cells) {
        let on = |i: usize, j: usize| mask & (1 << (i * ns + j)) != 0;
        for i in 0..nw {
            let mut len = 0;
            let mut v2g = 0;
            for j in 0..ns {
                if on(i, j) {
                    if !eligible(&workers[i], &tasks[j], bounds.lambda_km) {
                        continue 'outer;
                    }
                    len += 1;
                    if tasks[j].kind == TaskType::V2G {
                        v2g += 1;
                    }
                }
            }
            if len > bounds.k || v2g < bounds.v2g_min {
                continue 'outer;
            }
        }
        for j in 0..ns {
            if (0..nw).filter(|&i| on(i, j)).count() < bounds.psi {
                continue 'outer;
            }
        }
        let mut groups = std::collections::HashSet::new();
        let mut weight = 0.0;
        for i in 0..nw {
            for j in 0..ns {
                if on(i, j) {
                    let w = weights.get(i, j);
                    if w == UNEXPLORED {
                        groups.insert((i, tasks[j].kind));
                    } else {
                        weight += w;
                    }
                }
            }
        }
        let value = PotrValue {
            explored: groups.len(),
            weight,
        };
        if best.is_none_or(|b| value.better_than(&b)) {
            best = Some(value);
        }
    }
    best
}

/// Enumeration plus the same relaxation policy: lower psi first, then the
/// V2G quota, each to the largest feasible value.
pub fn potr_enumerate_relaxed(
    weights: &WeightMatrix,
    workers: &[Worker],
    tasks: &[Task],
    bounds: PotrBounds,
) -> (PotrBounds, PotrValue) {
    for psi in (0..=bounds.psi).rev() {
        let b = PotrBounds { psi, ..bounds };
        if let Some(v) = potr_enumerate(weights, workers, tasks, b) {
            return (b, v);
        }
    }
    for v2g_min in (0..bounds.v2g_min).rev() {
        let base = PotrBounds { psi: 0, v2g_min, ..bounds };
        if potr_enumerate(weights, workers, tasks, base).is_some() {
            for psi in (0..=bounds.psi).rev() {
                let b = PotrBounds { psi, v2g_min, ..bounds };
                if let Some(v) = potr_enumerate(weights, workers, tasks, b) {
                    return (b, v);
                }
            }
        }
    }
    unreachable!("zero bounds are feasible")
}

/// Minimum penalised cost over every matching of the bid graph, or `None`
/// when no matching meets the energy budget.
pub fn wibs_enumerate(bids: &[Bid], tasks: &[Task], budget: EnergyBudget, penalty: f64) -> Option<f64> {
    let mut workers: Vec<_> = bids.iter().map(|b| b.worker).collect();
    workers.sort();
    workers.dedup();
    let task_index = |id| tasks.iter().position(|t| t.id == id).unwrap();
    let per_worker: Vec<Vec<(usize, f64)>> = workers
        .iter()
        .map(|w| {
            bids.iter()
                .filter(|b| b.worker == *w)
                .map(|b| (task_index(b.task), b.amount))
                .collect()
        })
        .collect();
    let mut used = vec![false; tasks.len()];
    let mut best = None;
    wibs_rec(0, &per_worker, tasks, &mut used, 0.0, budget, penalty, &mut best);
    best
}

#[allow(clippy::too_many_arguments)]
fn wibs_rec(
    w: usize,
    per_worker: &[Vec<(usize, f64)>],
    tasks: &[Task],
    used: &mut [bool],
    cost: f64,
    budget: EnergyBudget,
    penalty: f64,
    best: &mut Option<f64>,
) {
    if w == per_worker.len() {
        let delivered: f64 = tasks
            .iter()
            .zip(used.iter())
            .filter(|(t, u)| **u && t.kind == TaskType::V2G)
            .map(|(t, _)| t.deliverable_kwh)
            .sum();
        if delivered + ENERGY_EPS < budget.required_kwh {
            return;
        }
        let uncovered = tasks
            .iter()
            .zip(used.iter())
            .filter(|(t, u)| !**u && t.kind != TaskType::V2G)
            .count();
        let total = cost + penalty * uncovered as f64;
        if best.is_none_or(|b| total < b) {
            *best = Some(total);
        }
        return;
    }
    wibs_rec(w + 1, per_worker, tasks, used, cost, budget, penalty, best);
    for &(j, amount) in &per_worker[w] {
        if !used[j] {
            used[j] = true;
            wibs_rec(w + 1, per_worker, tasks, used, cost + amount, budget, penalty, best);
            used[j] = false;
        }
    }
}

pub fn random_point(rng: &mut impl Rng, side: f64) -> Point {
    Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side))
}

pub fn random_task(rng: &mut impl Rng, id: u32, side: f64) -> Task {
    match rng.random_range(0..3u8) {
        2 => Task::v2g(id, random_point(rng, side), rng.random_range(1.0..10.0)),
        z => Task::transport(
            id,
            TaskType::from_code(z).unwrap(),
            random_point(rng, side),
            random_point(rng, side),
        ),
    }
}

pub fn random_worker(rng: &mut impl Rng, id: u32, side: f64) -> Worker {
    let range = rng.random_range(20.0..300.0);
    Worker::new(
        id,
        random_point(rng, side),
        rng.random_range(0.1..0.3),
        range,
        rng.random_range(0.0..range * 0.5),
    )
}

/// Random auction: mixed task types, bid density in [0.3, 1], random budget
/// between zero and 110% of the total V2G energy.
pub fn random_auction(rng: &mut impl Rng, max_workers: usize, max_tasks: usize) -> (Vec<Worker>, Vec<Task>, Vec<Bid>, EnergyBudget) {
    let nw = rng.random_range(1..=max_workers);
    let ns = rng.random_range(1..=max_tasks);
    let density = rng.random_range(0.3..1.0);
    auction_of_size(rng, nw, ns, density)
}

pub fn auction_of_size(rng: &mut impl Rng, nw: usize, ns: usize, density: f64) -> (Vec<Worker>, Vec<Task>, Vec<Bid>, EnergyBudget) {
    let workers: Vec<Worker> = (0..nw).map(|i| random_worker(rng, i as u32 + 1, 10.0)).collect();
    let tasks: Vec<Task> = (0..ns).map(|j| random_task(rng, j as u32 + 1, 10.0)).collect();
    let mut bids = Vec::new();
    for w in &workers {
        for t in &tasks {
            if rng.random_bool(density) {
                // Integer-cent bids make exact ties possible.
                let cents: u32 = rng.random_range(100..2000);
                bids.push(Bid { worker: w.id, task: t.id, amount: cents as f64 / 100.0 });
            }
        }
    }
    let total_v2g: f64 = tasks.iter().filter(|t| t.is_v2g()).map(|t| t.deliverable_kwh).sum();
    let budget = if rng.random_bool(0.2) {
        EnergyBudget::none()
    } else {
        EnergyBudget::new(rng.random_range(0.0..=1.1) * total_v2g)
    };
    (workers, tasks, bids, budget)
}

/// Recommendation instance with at most 12 worker-task cells, about a fifth
/// of them carrying the unexplored sentinel.
pub fn potr_instance(rng: &mut impl Rng) -> (Vec<Worker>, Vec<Task>, WeightMatrix, usize) {
    let nw = rng.random_range(1..=4usize);
    let ns = rng.random_range(1..=12 / nw);
    let workers: Vec<Worker> = (0..nw).map(|i| random_worker(rng, i as u32 + 1, 14.0)).collect();
    let tasks: Vec<Task> = (0..ns).map(|j| random_task(rng, j as u32 + 1, 14.0)).collect();
    let sentinel = rng.random_bool(0.2);
    let weights = WeightMatrix::from_fn(nw, ns, |_, _| {
        if sentinel && rng.random_bool(0.3) {
            UNEXPLORED
        } else {
            rng.random_range(0.0..1.0)
        }
    })
    .unwrap();
    let k = rng.random_range(1..=ns);
    (workers, tasks, weights, k)
}
