//! Seeded instance generators shared by the solver benchmarks.

use gridride_core::domain::{Bid, EnergyBudget, Point, Task, TaskType, Worker};
use gridride_core::potr::WeightMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Auction {
    pub workers: Vec<Worker>,
    pub tasks: Vec<Task>,
    pub bids: Vec<Bid>,
    pub budget: EnergyBudget,
}

fn point(rng: &mut impl Rng, region_km: f64) -> Point {
    Point::new(rng.random_range(0.0..region_km), rng.random_range(0.0..region_km))
}

fn workers(rng: &mut impl Rng, n: usize, region_km: f64) -> Vec<Worker> {
    (0..n)
        .map(|i| Worker::new(i as u32 + 1, point(rng, region_km), rng.random_range(0.12..0.25), 400.0, 40.0))
        .collect()
}

/// Tasks cycle through the three types so every size has all of them.
fn tasks(rng: &mut impl Rng, n: usize, region_km: f64) -> Vec<Task> {
    (0..n)
        .map(|j| {
            let id = j as u32 + 1;
            match j % 3 {
                0 => Task::transport(id, TaskType::Rideshare, point(rng, region_km), point(rng, region_km)),
                1 => Task::transport(id, TaskType::BatterySwap, point(rng, region_km), point(rng, region_km)),
                _ => Task::v2g(id, point(rng, region_km), rng.random_range(1.0..10.0)),
            }
        })
        .collect()
}

/// Complete bid graph with `n` workers and `n` tasks; the budget asks for
/// `budget_share` of all deliverable V2G energy.
pub fn complete_auction(n: usize, budget_share: f64, seed: u64) -> Auction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let workers = workers(&mut rng, n, 20.0);
    let tasks = tasks(&mut rng, n, 20.0);
    let bids = workers
        .iter()
        .flat_map(|w| tasks.iter().map(move |t| (w.id, t.id)))
        .map(|(w, t)| Bid::new(w.0, t.0, rng.random_range(1.0..20.0)))
        .collect();
    let v2g: f64 = tasks.iter().filter(|t| t.is_v2g()).map(|t| t.deliverable_kwh).sum();
    Auction {
        workers,
        tasks,
        bids,
        budget: EnergyBudget::new(budget_share * v2g),
    }
}

pub struct Recommendation {
    pub workers: Vec<Worker>,
    pub tasks: Vec<Task>,
    pub weights: WeightMatrix,
}

/// Workers and tasks scattered over a 20 km square with uniform weights.
pub fn recommendation(num_workers: usize, num_tasks: usize, seed: u64) -> Recommendation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let workers = workers(&mut rng, num_workers, 20.0);
    let tasks = tasks(&mut rng, num_tasks, 20.0);
    let weights = WeightMatrix::from_fn(num_workers, num_tasks, |_, _| rng.random_range(0.0..1.0)).expect("weights lie in [0, 1]");
    Recommendation { workers, tasks, weights }
}
