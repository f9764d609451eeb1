//! Worker dynamics between rounds: trips, battery draw, busy and charging
//! periods.

use crate::auction::{Assignment, PaymentSchedule};
use crate::domain::{energy_to_perform, Task, TaskType, Worker, WorkerStatus, ENERGY_EPS, ROUND_MINUTES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetParams {
    pub speed_kmh: f64,
    pub charge_rounds: u32,
    /// Workers whose range drops below `min_range_km + charge_margin_km` go charging.
    pub charge_margin_km: f64,
}

impl Default for FleetParams {
    fn default() -> Self {
        FleetParams {
            speed_kmh: 30.0,
            charge_rounds: 4,
            charge_margin_km: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetState {
    pub workers: Vec<Worker>,
    /// Full-battery range per worker.
    pub capacity_km: Vec<f64>,
    pub odometer_km: Vec<f64>,
    pub earnings: Vec<f64>,
}

/// Rounds a trip of `km` occupies; at least the current one.
pub fn busy_rounds(km: f64, speed_kmh: f64) -> u32 {
    let minutes = km / speed_kmh * 60.0;
    ((minutes / ROUND_MINUTES).ceil() as u32).max(1)
}

impl FleetState {
    pub fn new(workers: Vec<Worker>, capacity_km: Vec<f64>) -> Result<FleetState> {
        if workers.len() != capacity_km.len() {
            return Err(Error::InvalidInput("one capacity per worker required".into()));
        }
        let mut ids = std::collections::HashSet::new();
        for (w, cap) in workers.iter().zip(&capacity_km) {
            w.validate().map_err(Error::InvalidInput)?;
            if !ids.insert(w.id) {
                return Err(Error::InvalidInput(format!("duplicate worker {}", w.id)));
            }
            if *cap + ENERGY_EPS < w.range_km {
                return Err(Error::InvalidInput(format!("worker {} holds more than its capacity", w.id)));
            }
        }
        let n = workers.len();
        Ok(FleetState {
            workers,
            capacity_km,
            odometer_km: vec![0.0; n],
            earnings: vec![0.0; n],
        })
    }

    /// Frees workers whose busy or charging period ends by `round`;
    /// charged workers come back full.
    pub fn release(&mut self, round: u32) {
        for (w, cap) in self.workers.iter_mut().zip(&self.capacity_km) {
            match w.status {
                WorkerStatus::Busy { until } if until <= round => w.status = WorkerStatus::Available,
                WorkerStatus::Charging { until } if until <= round => {
                    w.status = WorkerStatus::Available;
                    w.range_km = *cap;
                }
                _ => {}
            }
        }
    }

    pub fn available(&self) -> Vec<Worker> {
        self.workers.iter().filter(|w| w.is_available()).cloned().collect()
    }
}

/// Moves winners to their task, draws their battery, marks them busy and
/// sends low workers to charge. Everyone else is untouched.
pub fn apply_round(
    state: &FleetState,
    assignment: &Assignment,
    payments: &PaymentSchedule,
    tasks: &[Task],
    round: u32,
    params: FleetParams,
) -> Result<FleetState> {
    let mut next = state.clone();
    for pair in &assignment.pairs {
        let i = next
            .workers
            .iter()
            .position(|w| w.id == pair.worker)
            .ok_or(Error::UnknownWorker(pair.worker))?;
        let task = tasks.iter().find(|t| t.id == pair.task).ok_or(Error::UnknownTask(pair.task))?;
        let w = &mut next.workers[i];
        if !w.is_available() {
            return Err(Error::InvalidInput(format!("{} won {} while unavailable", w.id, task.id)));
        }
        let draw = energy_to_perform(w, task).total_draw_kwh;
        let left = w.energy_kwh() - draw;
        if left < -ENERGY_EPS {
            return Err(Error::NegativeEnergy {
                worker: w.id,
                energy_kwh: left,
            });
        }
        let approach = w.location.distance(&task.origin);
        let driven = approach + task.service_distance();
        w.range_km = (left / w.energy_per_km).max(0.0);
        w.location = task.destination;
        let occupied = match task.kind {
            TaskType::V2G => busy_rounds(approach, params.speed_kmh),
            _ => busy_rounds(driven, params.speed_kmh),
        };
        w.status = WorkerStatus::Busy { until: round + occupied };
        next.odometer_km[i] += driven;
        next.earnings[i] += payments.get(w.id).unwrap_or(0.0);
    }
    for w in &mut next.workers {
        if matches!(w.status, WorkerStatus::Charging { .. }) {
            continue;
        }
        if w.range_km < w.min_range_km + params.charge_margin_km {
            let start = match w.status {
                WorkerStatus::Busy { until } => until,
                _ => round + 1,
            };
            w.status = WorkerStatus::Charging {
                until: start + params.charge_rounds,
            };
        }
    }
    Ok(next)
}
