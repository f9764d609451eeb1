//! Round-based marketplace simulator.

pub mod engine;
pub mod fleet;
pub mod generate;
pub mod ingest;
pub mod report;
pub mod scenario;

pub use engine::{mae, run, RoundRecord, RunReport};
pub use fleet::{apply_round, busy_rounds, FleetParams, FleetState};
pub use generate::{generate_tasks, generate_workers, simulate_bids, BidModel};
pub use ingest::{ingest_tasks, ingest_workers};
pub use report::{report_csv_string, validate_report_csv, write_report_csv, REPORT_COLUMNS};
pub use scenario::{Arrivals, BudgetRule, Scenario, Variant};
