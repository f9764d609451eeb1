//! Crowdsourced ride- and energy-sharing marketplace: preference-aware task
//! recommendation, a bandit learner for bidding preferences, reverse-auction
//! winner selection under a V2G energy budget, and a round-based simulator.

pub mod auction;
pub mod baseline;
pub mod cars;
pub mod domain;
pub mod error;
mod flow;
pub mod harness;
pub mod matching;
pub mod potr;
pub mod sim;

pub use auction::{bmw, second_price_payments, solve_wibs_exact, AssignedPair, Assignment, Payment, PaymentSchedule};
pub use baseline::{bg_assign, pk_topk, BaselineOutcome};
pub use cars::{CarsState, Observation, ObservationBatch, PreferenceModel, UpdateMode};
pub use domain::{
    eligible, energy_to_perform, Bid, EnergyBudget, EnergyLedgerEntry, Point, Task, TaskId, TaskType, Worker, WorkerId,
    WorkerStatus,
};
pub use error::{ConstraintClass, Error, Result};
pub use matching::{min_weight_matching, BidGraph};
pub use potr::{solve_potr, PotrBounds, PotrSolution, RecommendationMatrix, Relaxation, WeightMatrix, UNEXPLORED};
pub use sim::{RoundRecord, RunReport, Scenario, Variant};
