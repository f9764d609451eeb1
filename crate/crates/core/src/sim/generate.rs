//! Synthetic fleets, task streams and bids.
//!
//! Every random draw comes from a ChaCha stream keyed by the run seed and a
//! tag tuple, so variants sharing a seed see identical tasks, identical
//! markups and, for any pair recommended in both, identical bids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::cars::PreferenceModel;
use crate::domain::{Bid, Point, Task, TaskType, Worker, WorkerId};
use crate::error::{Error, Result};
use crate::potr::RecommendationMatrix;
use crate::sim::scenario::{Arrivals, Scenario};

const TAG_FLEET: u64 = 1;
const TAG_TASKS: u64 = 2;
const TAG_BID: u64 = 3;
const TAG_MARKUP: u64 = 4;
const TAG_PREFS: u64 = 5;

/// Task ids are `round * TASK_ID_STRIDE + k`.
pub const TASK_ID_STRIDE: u32 = 100_000;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for `(seed, tags...)`.
pub fn stream_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let key = tags.iter().fold(splitmix(seed), |acc, &t| splitmix(acc ^ splitmix(t)));
    ChaCha8Rng::seed_from_u64(key)
}

pub fn fleet_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, &[TAG_FLEET])
}

pub fn task_rng(seed: u64, round: u32) -> ChaCha8Rng {
    stream_rng(seed, &[TAG_TASKS, round as u64])
}

pub fn preference_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, &[TAG_PREFS])
}

/// Random fleet inside the scenario region. Returns the workers (all
/// available) and each worker's full-battery range.
pub fn generate_workers(scenario: &Scenario, rng: &mut impl Rng) -> (Vec<Worker>, Vec<f64>) {
    let side = scenario.region_km;
    (1..=scenario.num_workers as u32)
        .map(|id| {
            let capacity = rng.random_range(250.0..500.0);
            let location = Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side));
            let e = rng.random_range(0.12..0.25);
            let range = capacity * rng.random_range(0.5..=1.0);
            (Worker::new(id, location, e, range, 0.1 * capacity), capacity)
        })
        .unzip()
}

fn arrivals(rate: f64, mode: Arrivals, rng: &mut impl Rng) -> u32 {
    let n = match mode {
        Arrivals::Fixed => rate.round(),
        Arrivals::Poisson if rate > 0.0 => Poisson::new(rate).expect("positive finite rate").sample(rng),
        Arrivals::Poisson => 0.0,
    };
    (n as u32).min(TASK_ID_STRIDE - 1)
}

/// Tasks arriving in `round`: rideshare, then battery swap, then V2G.
pub fn generate_tasks(scenario: &Scenario, round: u32, rng: &mut impl Rng) -> Vec<Task> {
    let side = scenario.region_km;
    let counts = scenario.rates.map(|r| arrivals(r, scenario.arrivals, rng));
    let point = |rng: &mut dyn rand::RngCore| Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side));
    let mut tasks = Vec::with_capacity(counts.iter().sum::<u32>() as usize);
    let mut next = 0u32;
    let mut id = || {
        next += 1;
        round * TASK_ID_STRIDE + next
    };
    for kind in TaskType::ALL {
        for _ in 0..counts[kind.index()] {
            let task = match kind {
                TaskType::V2G => {
                    let kwh = rng.random_range(scenario.v2g_kwh_min..=scenario.v2g_kwh_max);
                    Task::v2g(id(), point(rng), kwh)
                }
                _ => {
                    let origin = point(rng);
                    Task::transport(id(), kind, origin, point(rng))
                }
            };
            tasks.push(task.with_slot(round));
        }
    }
    tasks
}

#[derive(Debug, Clone, PartialEq)]
pub struct BidModel {
    pub base: f64,
    pub per_km: f64,
    pub markup_min: f64,
    pub markup_max: f64,
    pub noise_sd: f64,
    pub min_bid: f64,
    pub seed: u64,
}

impl BidModel {
    pub fn from_scenario(s: &Scenario) -> BidModel {
        BidModel {
            base: s.bid_base,
            per_km: s.bid_per_km,
            markup_min: s.markup_min,
            markup_max: s.markup_max,
            noise_sd: s.bid_noise_sd,
            min_bid: s.min_bid,
            seed: s.seed,
        }
    }

    /// The worker's fixed price multiplier.
    pub fn markup(&self, worker: WorkerId) -> f64 {
        if self.markup_min == self.markup_max {
            return self.markup_min;
        }
        stream_rng(self.seed, &[TAG_MARKUP, worker.0 as u64]).random_range(self.markup_min..=self.markup_max)
    }

    /// Distance the price is based on: approach plus trip, with V2G energy
    /// converted to the distance it would drive.
    pub fn priced_km(worker: &Worker, task: &Task) -> f64 {
        let approach = worker.location.distance(&task.origin);
        let service = match task.kind {
            TaskType::V2G => task.deliverable_kwh / worker.energy_per_km,
            _ => task.service_distance(),
        };
        approach + service
    }

    pub fn amount(&self, worker: &Worker, task: &Task, noise: f64) -> f64 {
        let raw = (self.base + self.per_km * Self::priced_km(worker, task)) * self.markup(worker.id) + noise;
        raw.max(self.min_bid)
    }
}

/// Each recommended worker bids on a task with its true preference for the
/// task's type.
pub fn simulate_bids(
    a: &RecommendationMatrix,
    workers: &[Worker],
    tasks: &[Task],
    prefs: &PreferenceModel,
    model: &BidModel,
    round: u32,
) -> Result<Vec<Bid>> {
    if a.num_workers() != workers.len() || a.num_tasks() != tasks.len() {
        return Err(Error::InvalidInput("recommendation shape does not match the population".into()));
    }
    let noise = (model.noise_sd > 0.0).then(|| Normal::new(0.0, model.noise_sd).expect("finite sd"));
    let mut bids = Vec::new();
    for (i, j) in a.selected() {
        let (w, s) = (&workers[i], &tasks[j]);
        let mut rng = stream_rng(model.seed, &[TAG_BID, round as u64, w.id.0 as u64, s.id.0 as u64]);
        let bids_now = rng.random::<f64>() < prefs.get(w.id, s.kind)?;
        let eps = noise.map_or(0.0, |n| n.sample(&mut rng));
        if bids_now {
            bids.push(Bid {
                worker: w.id,
                task: s.id,
                amount: model.amount(w, s, eps),
            });
        }
    }
    Ok(bids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TaskId;

    fn plain_model() -> BidModel {
        BidModel {
            base: 2.0,
            per_km: 1.0,
            markup_min: 1.0,
            markup_max: 1.0,
            noise_sd: 0.0,
            min_bid: 0.5,
            seed: 7,
        }
    }

    #[test]
    fn affine_bid() {
        let w = Worker::new(1, Point::new(0.0, 0.0), 0.2, 300.0, 20.0);
        let s = Task::transport(1, TaskType::Rideshare, Point::new(3.0, 0.0), Point::new(3.0, 5.0));
        assert!((plain_model().amount(&w, &s, 0.0) - 10.0).abs() < 1e-12);
        let v = Task::v2g(2, Point::new(0.0, 0.0), 1.0);
        assert!((plain_model().amount(&w, &v, 0.0) - 7.0).abs() < 1e-12);
        assert_eq!(plain_model().amount(&w, &s, -100.0), 0.5);
    }

    #[test]
    fn no_rates_no_tasks() {
        let mut s = Scenario::default();
        s.rates = [0.0; 3];
        assert!(generate_tasks(&s, 1, &mut task_rng(1, 1)).is_empty());
    }

    #[test]
    fn task_stream_is_reproducible() {
        let s = Scenario::default();
        let a = generate_tasks(&s, 3, &mut task_rng(9, 3));
        let b = generate_tasks(&s, 3, &mut task_rng(9, 3));
        assert_eq!(a, b);
        assert!(a.iter().all(|t| t.validate().is_ok() && t.slot_created == 3));
        assert!(a.iter().all(|t| t.id.0 / TASK_ID_STRIDE == 3));
        assert_ne!(a, generate_tasks(&s, 4, &mut task_rng(9, 4)));
    }

    #[test]
    fn fixed_arrivals_hit_the_rate() {
        let mut s = Scenario::default();
        s.arrivals = Arrivals::Fixed;
        s.rates = [2.0, 1.0, 25.0];
        let tasks = generate_tasks(&s, 1, &mut task_rng(1, 1));
        assert_eq!(tasks.iter().filter(|t| t.is_v2g()).count(), 25);
        assert_eq!(tasks.len(), 28);
    }

    #[test]
    fn extreme_preferences() {
        let s = Scenario::default();
        let (workers, _) = generate_workers(&Scenario { num_workers: 4, ..s.clone() }, &mut fleet_rng(1));
        let tasks = generate_tasks(&s, 1, &mut task_rng(1, 1));
        let mut a = RecommendationMatrix::empty(&workers, &tasks, tasks.len());
        for i in 0..workers.len() {
            for j in 0..tasks.len() {
                a.set(i, j, true);
            }
        }
        let ids: Vec<WorkerId> = workers.iter().map(|w| w.id).collect();
        let always = PreferenceModel::sample(&ids, &[1.0], &mut fleet_rng(2)).unwrap();
        let never = PreferenceModel::sample(&ids, &[0.0], &mut fleet_rng(2)).unwrap();
        let model = BidModel::from_scenario(&s);
        let all = simulate_bids(&a, &workers, &tasks, &always, &model, 1).unwrap();
        assert_eq!(all.len(), workers.len() * tasks.len());
        assert!(all.iter().all(|b| b.amount >= s.min_bid));
        assert!(simulate_bids(&a, &workers, &tasks, &never, &model, 1).unwrap().is_empty());
    }

    #[test]
    fn bids_depend_only_on_the_pair() {
        let s = Scenario::default();
        let (workers, _) = generate_workers(&Scenario { num_workers: 3, ..s.clone() }, &mut fleet_rng(1));
        let tasks = generate_tasks(&s, 1, &mut task_rng(1, 1));
        let ids: Vec<WorkerId> = workers.iter().map(|w| w.id).collect();
        let prefs = PreferenceModel::sample(&ids, &[1.0], &mut fleet_rng(2)).unwrap();
        let model = BidModel::from_scenario(&s);
        let mut one = RecommendationMatrix::empty(&workers, &tasks, 5);
        one.set(1, 0, true);
        let mut many = one.clone();
        many.set(0, 0, true);
        many.set(2, 1, true);
        let lone = simulate_bids(&one, &workers, &tasks, &prefs, &model, 1).unwrap();
        let crowd = simulate_bids(&many, &workers, &tasks, &prefs, &model, 1).unwrap();
        let same = crowd.iter().find(|b| b.worker == workers[1].id && b.task == TaskId(tasks[0].id.0)).unwrap();
        assert_eq!(lone, vec![*same]);
    }
}
