//! Shared market types: tasks, workers, bids, energy accounting and the
//! eligibility predicate every solver filters on.
//!
//! Coordinates are planar kilometres. Energy is kWh, consumption kWh/km.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Absolute slack used when comparing energy sums against a budget.
pub const ENERGY_EPS: f64 = 1e-9;

/// Length of one auction round in minutes.
pub const ROUND_MINUTES: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WorkerId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskId(pub u32);

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}

/// Task kind; the discriminants are the wire codes used in CSV files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskType {
    Rideshare = 0,
    BatterySwap = 1,
    V2G = 2,
}

impl TaskType {
    pub const ALL: [TaskType; 3] = [TaskType::Rideshare, TaskType::BatterySwap, TaskType::V2G];
    pub const COUNT: usize = 3;

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<TaskType> {
        match code {
            0 => Some(TaskType::Rideshare),
            1 => Some(TaskType::BatterySwap),
            2 => Some(TaskType::V2G),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskType::Rideshare => "rideshare",
            TaskType::BatterySwap => "battery_swap",
            TaskType::V2G => "v2g",
        }
    }
}

/// 1 for grid-discharge tasks, 0 otherwise.
pub fn v2g_indicator(z: TaskType) -> u8 {
    u8::from(z == TaskType::V2G)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub kind: TaskType,
    pub origin: Point,
    pub destination: Point,
    /// kWh handed to the grid; zero for transport tasks.
    pub deliverable_kwh: f64,
    pub slot_created: u32,
}

impl Task {
    pub fn transport(id: u32, kind: TaskType, origin: Point, destination: Point) -> Task {
        debug_assert!(kind != TaskType::V2G);
        Task {
            id: TaskId(id),
            kind,
            origin,
            destination,
            deliverable_kwh: 0.0,
            slot_created: 0,
        }
    }

    pub fn v2g(id: u32, location: Point, deliverable_kwh: f64) -> Task {
        Task {
            id: TaskId(id),
            kind: TaskType::V2G,
            origin: location,
            destination: location,
            deliverable_kwh,
            slot_created: 0,
        }
    }

    pub fn with_slot(mut self, slot: u32) -> Task {
        self.slot_created = slot;
        self
    }

    pub fn is_v2g(&self) -> bool {
        self.kind == TaskType::V2G
    }

    /// Trip length from pickup to drop-off; zero for stationary tasks.
    pub fn service_distance(&self) -> f64 {
        self.origin.distance(&self.destination)
    }

    pub fn validate(&self) -> Result<(), String> {
        let coords = [
            self.origin.x,
            self.origin.y,
            self.destination.x,
            self.destination.y,
        ];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(format!("task {}: non-finite coordinate", self.id));
        }
        if !self.deliverable_kwh.is_finite() || self.deliverable_kwh < 0.0 {
            return Err(format!("task {}: deliverable energy must be >= 0", self.id));
        }
        match self.kind {
            TaskType::V2G => {
                if self.deliverable_kwh <= 0.0 {
                    return Err(format!("task {}: V2G task needs deliverable energy > 0", self.id));
                }
                if self.origin != self.destination {
                    return Err(format!("task {}: V2G task must start where it ends", self.id));
                }
            }
            _ => {
                if self.deliverable_kwh != 0.0 {
                    return Err(format!(
                        "task {}: only V2G tasks carry deliverable energy",
                        self.id
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorkerStatus {
    Available,
    /// Serving a task; free again from round `until`.
    Busy { until: u32 },
    /// Recharging; refilled and free again from round `until`.
    Charging { until: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worker {
    pub id: WorkerId,
    pub location: Point,
    pub energy_per_km: f64,
    /// Remaining range.
    pub range_km: f64,
    /// Range that must be left after any task.
    pub min_range_km: f64,
    pub status: WorkerStatus,
}

impl Worker {
    pub fn new(id: u32, location: Point, energy_per_km: f64, range_km: f64, min_range_km: f64) -> Worker {
        Worker {
            id: WorkerId(id),
            location,
            energy_per_km,
            range_km,
            min_range_km,
            status: WorkerStatus::Available,
        }
    }

    pub fn is_available(&self) -> bool {
        self.status == WorkerStatus::Available
    }

    pub fn energy_kwh(&self) -> f64 {
        self.range_km * self.energy_per_km
    }

    /// Energy the worker may spend before dipping into its reserve.
    pub fn spendable_kwh(&self) -> f64 {
        (self.range_km - self.min_range_km) * self.energy_per_km
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.energy_per_km.is_finite() && self.energy_per_km > 0.0) {
            return Err(format!("worker {}: energy_per_km must be > 0", self.id));
        }
        if !(self.range_km.is_finite() && self.range_km >= 0.0) {
            return Err(format!("worker {}: range_km must be >= 0", self.id));
        }
        if !(self.min_range_km.is_finite() && self.min_range_km >= 0.0) {
            return Err(format!("worker {}: min_range_km must be >= 0", self.id));
        }
        if self.min_range_km > self.range_km {
            return Err(format!("worker {}: min_range_km exceeds range_km", self.id));
        }
        if !(self.location.x.is_finite() && self.location.y.is_finite()) {
            return Err(format!("worker {}: non-finite location", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub worker: WorkerId,
    pub task: TaskId,
    pub amount: f64,
}

impl Bid {
    pub fn new(worker: u32, task: u32, amount: f64) -> Bid {
        Bid {
            worker: WorkerId(worker),
            task: TaskId(task),
            amount,
        }
    }
}

/// Checks amounts and the one-bid-per-pair rule.
pub fn validate_bids(bids: &[Bid]) -> Result<(), String> {
    let mut seen = std::collections::HashSet::with_capacity(bids.len());
    for b in bids {
        if !(b.amount.is_finite() && b.amount > 0.0) {
            return Err(format!(
                "bid of {} on {}: amount must be positive and finite",
                b.worker, b.task
            ));
        }
        if !seen.insert((b.worker, b.task)) {
            return Err(format!("duplicate bid of {} on {}", b.worker, b.task));
        }
    }
    Ok(())
}

/// Battery draw of one worker performing one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedgerEntry {
    pub worker: WorkerId,
    pub task: TaskId,
    /// Burned driving to the task origin.
    pub travel_kwh: f64,
    /// Burned on the trip, or discharged to the grid for V2G.
    pub service_kwh: f64,
    pub total_draw_kwh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget {
    pub required_kwh: f64,
}

impl EnergyBudget {
    pub fn new(required_kwh: f64) -> EnergyBudget {
        EnergyBudget { required_kwh }
    }

    pub fn none() -> EnergyBudget {
        EnergyBudget { required_kwh: 0.0 }
    }

    pub fn is_met_by(&self, delivered_kwh: f64) -> bool {
        delivered_kwh + ENERGY_EPS >= self.required_kwh
    }
}

pub fn energy_to_perform(w: &Worker, s: &Task) -> EnergyLedgerEntry {
    let travel_kwh = w.energy_per_km * w.location.distance(&s.origin);
    let service_kwh = match s.kind {
        TaskType::V2G => s.deliverable_kwh,
        TaskType::Rideshare | TaskType::BatterySwap => w.energy_per_km * s.service_distance(),
    };
    EnergyLedgerEntry {
        worker: w.id,
        task: s.id,
        travel_kwh,
        service_kwh,
        total_draw_kwh: travel_kwh + service_kwh,
    }
}

/// Proximity, reserve and availability filter; both comparisons are inclusive.
pub fn eligible(w: &Worker, s: &Task, lambda_km: f64) -> bool {
    w.is_available()
        && w.location.distance(&s.origin) <= lambda_km
        && energy_to_perform(w, s).total_draw_kwh <= w.spendable_kwh()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worker_at(x: f64, y: f64, e: f64) -> Worker {
        Worker::new(1, Point::new(x, y), e, 300.0, 20.0)
    }

    #[test]
    fn indicator_matches_type_codes() {
        assert_eq!(v2g_indicator(TaskType::V2G), 1);
        assert_eq!(v2g_indicator(TaskType::Rideshare), 0);
        assert_eq!(v2g_indicator(TaskType::BatterySwap), 0);
        for z in TaskType::ALL {
            assert_eq!(TaskType::from_code(z.code()), Some(z));
            assert_eq!(v2g_indicator(z) == 1, z == TaskType::V2G);
        }
        assert_eq!(TaskType::from_code(3), None);
    }

    #[test]
    fn ledger_rideshare() {
        let w = worker_at(0.0, 0.0, 0.2);
        let s = Task::transport(1, TaskType::Rideshare, Point::new(3.0, 4.0), Point::new(6.0, 8.0));
        let e = energy_to_perform(&w, &s);
        assert!((e.travel_kwh - 1.0).abs() < 1e-12);
        assert!((e.service_kwh - 1.0).abs() < 1e-12);
        assert!((e.total_draw_kwh - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ledger_colocated_v2g() {
        let w = worker_at(2.0, 2.0, 0.2);
        let s = Task::v2g(1, Point::new(2.0, 2.0), 5.0);
        let e = energy_to_perform(&w, &s);
        assert_eq!(e.travel_kwh, 0.0);
        assert_eq!(e.service_kwh, 5.0);
        assert_eq!(e.total_draw_kwh, 5.0);
    }

    #[test]
    fn ledger_zero_length_trip() {
        let w = worker_at(0.0, 0.0, 0.15);
        let p = Point::new(0.0, 10.0);
        let s = Task::transport(1, TaskType::Rideshare, p, p);
        let e = energy_to_perform(&w, &s);
        assert!((e.travel_kwh - 1.5).abs() < 1e-12);
        assert_eq!(e.service_kwh, 0.0);
        assert!(Worker::new(2, p, 0.0, 10.0, 0.0).validate().is_err());
    }

    #[test]
    fn eligibility_radius_is_inclusive() {
        let w = worker_at(0.0, 0.0, 0.2);
        let at = Task::v2g(1, Point::new(10.0, 0.0), 1.0);
        let beyond = Task::v2g(2, Point::new(10.1, 0.0), 1.0);
        assert!(eligible(&w, &at, 10.0));
        assert!(!eligible(&w, &beyond, 10.0));
    }

    #[test]
    fn eligibility_respects_reserve() {
        // (r - r_min) * e = (30 - 10) * 0.2 = 4.0 kWh spendable
        let w = Worker::new(1, Point::new(0.0, 0.0), 0.2, 30.0, 10.0);
        let over = Task::v2g(1, Point::new(0.0, 0.0), 4.1);
        let exact = Task::v2g(2, Point::new(0.0, 0.0), 4.0);
        assert!(!eligible(&w, &over, 10.0));
        assert!(eligible(&w, &exact, 10.0));
    }

    #[test]
    fn busy_workers_are_ineligible() {
        let mut w = worker_at(0.0, 0.0, 0.2);
        w.status = WorkerStatus::Busy { until: 3 };
        assert!(!eligible(&w, &Task::v2g(1, Point::new(0.0, 0.0), 1.0), 10.0));
    }

    #[test]
    fn task_validation() {
        let p = Point::new(0.0, 0.0);
        assert!(Task::v2g(1, p, 0.0).validate().is_err());
        let mut moved = Task::v2g(1, p, 2.0);
        moved.destination = Point::new(1.0, 0.0);
        assert!(moved.validate().is_err());
        let mut ride = Task::transport(2, TaskType::Rideshare, p, p);
        assert!(ride.validate().is_ok());
        ride.deliverable_kwh = 1.0;
        assert!(ride.validate().is_err());
    }

    #[test]
    fn bid_validation() {
        assert!(validate_bids(&[Bid::new(1, 1, 2.0), Bid::new(1, 2, 2.0)]).is_ok());
        assert!(validate_bids(&[Bid::new(1, 1, 0.0)]).is_err());
        assert!(validate_bids(&[Bid::new(1, 1, f64::INFINITY)]).is_err());
        assert!(validate_bids(&[Bid::new(1, 1, 2.0), Bid::new(1, 1, 3.0)]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_task() -> impl Strategy<Value = Task> {
            (0u8..3, -50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64, 0.5..10.0f64)
                .prop_map(|(z, ox, oy, dx, dy, kwh)| match TaskType::from_code(z).unwrap() {
                    TaskType::V2G => Task::v2g(1, Point::new(ox, oy), kwh),
                    kind => Task::transport(1, kind, Point::new(ox, oy), Point::new(dx, dy)),
                })
        }

        fn arb_worker() -> impl Strategy<Value = Worker> {
            (-50.0..50.0f64, -50.0..50.0f64, 0.05..0.4f64, 0.0..400.0f64, 0.0..1.0f64)
                .prop_map(|(x, y, e, r, frac)| Worker::new(1, Point::new(x, y), e, r, r * frac))
        }

        proptest! {
            #[test]
            fn eligible_implies_reserve_respected(w in arb_worker(), s in arb_task(), lambda in 0.0..80.0f64) {
                if eligible(&w, &s, lambda) {
                    prop_assert!(energy_to_perform(&w, &s).total_draw_kwh <= w.spendable_kwh());
                }
            }

            #[test]
            fn ledger_is_translation_invariant(w in arb_worker(), s in arb_task(), dx in -100.0..100.0f64, dy in -100.0..100.0f64) {
                let a = energy_to_perform(&w, &s);
                let mut w2 = w.clone();
                w2.location = w.location.translate(dx, dy);
                let mut s2 = s.clone();
                s2.origin = s.origin.translate(dx, dy);
                s2.destination = s.destination.translate(dx, dy);
                let b = energy_to_perform(&w2, &s2);
                prop_assert!((a.travel_kwh - b.travel_kwh).abs() < 1e-9);
                prop_assert!((a.service_kwh - b.service_kwh).abs() < 1e-9);
                prop_assert_eq!(b.total_draw_kwh, b.travel_kwh + b.service_kwh);
            }
        }
    }
}
