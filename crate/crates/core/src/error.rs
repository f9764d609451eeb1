use std::fmt;

use crate::domain::{TaskId, WorkerId};

/// Lower-bound constraint families of the recommendation program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintClass {
    /// Every task must appear in at least `psi` lists.
    Psi,
    /// Every list must carry at least `v2g_min` V2G tasks.
    V2gMin,
}

impl fmt::Display for ConstraintClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintClass::Psi => f.write_str("psi"),
            ConstraintClass::V2gMin => f.write_str("v2g_min"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("recommendation program infeasible; binding constraint(s): {}", join_classes(.binding))]
    RecommendationInfeasible { binding: Vec<ConstraintClass> },

    #[error("energy budget of {required_kwh} kWh unattainable (at most {attainable_kwh} kWh deliverable)")]
    BudgetUnattainable { required_kwh: f64, attainable_kwh: f64 },

    #[error("worker {worker} won task {task} without a recorded bid")]
    MissingBid { worker: WorkerId, task: TaskId },

    #[error("unknown worker {0}")]
    UnknownWorker(WorkerId),

    #[error("unknown task {0}")]
    UnknownTask(TaskId),

    #[error("worker {worker} would end with negative energy ({energy_kwh} kWh)")]
    NegativeEnergy { worker: WorkerId, energy_kwh: f64 },

    #[error("regret bound undefined for delta_min = {0}")]
    UndefinedBound(f64),

    #[error("{path}: row {row}: {message}")]
    Parse { path: String, row: usize, message: String },

    #[error("scenario key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{variant} seed {seed}: {source}")]
    Cell {
        variant: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("round {round}: {source}")]
    Round {
        round: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn join_classes(classes: &[ConstraintClass]) -> String {
    classes
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
