//! Bandit learner for worker bidding preferences.
//!
//! Each (worker, task type) pair is an arm with an unknown bid probability.
//! Every round the recommendation program is solved with the optimistic
//! index `alpha_hat + sqrt((Q + 1) ln t / m)` as weight, and every
//! recommended entry yields one bid / no-bid observation for its arm.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::domain::{Bid, Task, TaskId, TaskType, Worker, WorkerId};
use crate::error::{Error, Result};
use crate::potr::{solve_potr, PotrSolution, RecommendationMatrix, WeightMatrix, UNEXPLORED};

const CHECKPOINT_VERSION: u32 = 1;

/// How a no-bid observation moves the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateMode {
    /// Running mean of the 0/1 outcomes.
    #[default]
    Bernoulli,
    /// Bids pull the estimate towards 1; a missing bid leaves it unchanged.
    /// The count grows either way.
    BidOnly,
}

impl UpdateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            UpdateMode::Bernoulli => "bernoulli",
            UpdateMode::BidOnly => "bid-only",
        }
    }

    pub fn parse(s: &str) -> Option<UpdateMode> {
        match s {
            "bernoulli" => Some(UpdateMode::Bernoulli),
            "bid-only" => Some(UpdateMode::BidOnly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarsState {
    worker_ids: Vec<WorkerId>,
    rows: HashMap<WorkerId, usize>,
    alpha_hat: Vec<[f64; TaskType::COUNT]>,
    counts: Vec<[u64; TaskType::COUNT]>,
    t: u64,
    pub mode: UpdateMode,
}

impl CarsState {
    /// Fresh state at round 1 with every estimate set to `prior`.
    pub fn new(worker_ids: &[WorkerId], prior: f64, mode: UpdateMode) -> CarsState {
        CarsState {
            worker_ids: worker_ids.to_vec(),
            rows: worker_ids.iter().enumerate().map(|(i, w)| (*w, i)).collect(),
            alpha_hat: vec![[prior; TaskType::COUNT]; worker_ids.len()],
            counts: vec![[0; TaskType::COUNT]; worker_ids.len()],
            t: 1,
            mode,
        }
    }

    pub fn worker_ids(&self) -> &[WorkerId] {
        &self.worker_ids
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    /// Number of arms, `|W| x` number of task types.
    pub fn q(&self) -> usize {
        self.worker_ids.len() * TaskType::COUNT
    }

    fn row(&self, worker: WorkerId) -> Result<usize> {
        self.rows.get(&worker).copied().ok_or(Error::UnknownWorker(worker))
    }

    pub fn alpha_hat(&self, worker: WorkerId, kind: TaskType) -> Result<f64> {
        Ok(self.alpha_hat[self.row(worker)?][kind.index()])
    }

    pub fn count(&self, worker: WorkerId, kind: TaskType) -> Result<u64> {
        Ok(self.counts[self.row(worker)?][kind.index()])
    }

    /// Overwrites one arm; used to inject knowledge and by checkpoints.
    pub fn set_arm(&mut self, worker: WorkerId, kind: TaskType, alpha_hat: f64, count: u64) -> Result<()> {
        if !(0.0..=1.0).contains(&alpha_hat) {
            return Err(Error::InvalidInput(format!("alpha_hat {alpha_hat} outside [0, 1]")));
        }
        let r = self.row(worker)?;
        self.alpha_hat[r][kind.index()] = alpha_hat;
        self.counts[r][kind.index()] = count;
        Ok(())
    }

    pub fn set_round(&mut self, t: u64) {
        self.t = t.max(1);
    }

    /// Serialises to the versioned tabular checkpoint format.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "version,{CHECKPOINT_VERSION}");
        let _ = writeln!(out, "t,{}", self.t);
        let _ = writeln!(out, "mode,{}", self.mode.as_str());
        out.push_str("worker_id,task_type,alpha_hat,m\n");
        for (r, w) in self.worker_ids.iter().enumerate() {
            for z in TaskType::ALL {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    w.0,
                    z.code(),
                    self.alpha_hat[r][z.index()],
                    self.counts[r][z.index()]
                );
            }
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<CarsState> {
        let bad = |row: usize, message: String| Error::Parse {
            path: "<checkpoint>".into(),
            row,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut header = |key: &str| -> Result<String> {
            let (n, line) = lines.next().ok_or_else(|| bad(0, format!("missing `{key}` line")))?;
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(','))
                .map(str::to_owned)
                .ok_or_else(|| bad(n, format!("expected `{key},...`")))
        };
        let version: u32 = header("version")?.parse().map_err(|_| bad(1, "bad version".into()))?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(1, format!("unsupported checkpoint version {version}")));
        }
        let t: u64 = header("t")?.parse().map_err(|_| bad(2, "bad round counter".into()))?;
        let mode_text = header("mode")?;
        let mode = UpdateMode::parse(&mode_text).ok_or_else(|| bad(3, format!("unknown mode {mode_text}")))?;
        match lines.next() {
            Some((_, "worker_id,task_type,alpha_hat,m")) => {}
            _ => return Err(bad(4, "missing column header".into())),
        }

        let mut arms: Vec<(WorkerId, TaskType, f64, u64)> = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(bad(n, "expected 4 fields".into()));
            }
            let worker = fields[0].parse().map(WorkerId).map_err(|_| bad(n, "bad worker id".into()))?;
            let kind = fields[1]
                .parse()
                .ok()
                .and_then(TaskType::from_code)
                .ok_or_else(|| bad(n, "bad task type".into()))?;
            let alpha: f64 = fields[2].parse().map_err(|_| bad(n, "bad alpha_hat".into()))?;
            let m: u64 = fields[3].parse().map_err(|_| bad(n, "bad count".into()))?;
            arms.push((worker, kind, alpha, m));
        }
        let mut ids: Vec<WorkerId> = Vec::new();
        for (w, ..) in &arms {
            if !ids.contains(w) {
                ids.push(*w);
            }
        }
        let mut state = CarsState::new(&ids, 0.0, mode);
        state.t = t.max(1);
        for (n, (w, z, a, m)) in arms.into_iter().enumerate() {
            state.set_arm(w, z, a, m).map_err(|e| bad(n + 5, e.to_string()))?;
        }
        Ok(state)
    }
}

/// Hidden bid probabilities, indexed like [`CarsState`].
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceModel {
    rows: HashMap<WorkerId, usize>,
    alpha: Vec<[f64; TaskType::COUNT]>,
}

impl PreferenceModel {
    pub fn new(entries: Vec<(WorkerId, [f64; TaskType::COUNT])>) -> Result<PreferenceModel> {
        let mut rows = HashMap::new();
        let mut alpha = Vec::with_capacity(entries.len());
        for (w, a) in entries {
            if a.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidInput(format!("preference of {w} outside [0, 1]")));
            }
            if rows.insert(w, alpha.len()).is_some() {
                return Err(Error::InvalidInput(format!("duplicate preferences for {w}")));
            }
            alpha.push(a);
        }
        Ok(PreferenceModel { rows, alpha })
    }

    /// Draws every (worker, type) probability uniformly from `choices`.
    pub fn sample(worker_ids: &[WorkerId], choices: &[f64], rng: &mut impl Rng) -> Result<PreferenceModel> {
        if choices.is_empty() {
            return Err(Error::InvalidInput("empty preference set".into()));
        }
        let entries = worker_ids
            .iter()
            .map(|w| (*w, std::array::from_fn(|_| choices[rng.random_range(0..choices.len())])))
            .collect();
        PreferenceModel::new(entries)
    }

    pub fn get(&self, worker: WorkerId, kind: TaskType) -> Result<f64> {
        let r = self.rows.get(&worker).ok_or(Error::UnknownWorker(worker))?;
        Ok(self.alpha[*r][kind.index()])
    }

    pub fn worker_ids(&self) -> impl Iterator<Item = WorkerId> + '_ {
        let mut ids: Vec<_> = self.rows.iter().map(|(w, r)| (*r, *w)).collect();
        ids.sort();
        ids.into_iter().map(|(_, w)| w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub worker: WorkerId,
    pub task: TaskId,
    pub kind: TaskType,
    pub did_bid: bool,
}

/// One record per recommended entry of a round.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ObservationBatch(pub Vec<Observation>);

impl ObservationBatch {
    /// Builds the batch for `matrix` from the bids that came back.
    pub fn from_round(matrix: &RecommendationMatrix, tasks: &[Task], bids: &[Bid]) -> ObservationBatch {
        let bid_on: std::collections::HashSet<(WorkerId, TaskId)> =
            bids.iter().map(|b| (b.worker, b.task)).collect();
        ObservationBatch(
            matrix
                .selected()
                .map(|(i, j)| {
                    let (worker, task) = (matrix.worker_ids[i], matrix.task_ids[j]);
                    Observation {
                        worker,
                        task,
                        kind: tasks[j].kind,
                        did_bid: bid_on.contains(&(worker, task)),
                    }
                })
                .collect(),
        )
    }
}

/// Optimistic index of one arm; `+inf` for arms never observed.
pub fn ucb_index(state: &CarsState, worker: WorkerId, kind: TaskType) -> Result<f64> {
    let m = state.count(worker, kind)?;
    if m == 0 {
        return Ok(UNEXPLORED);
    }
    let q = state.q() as f64;
    let t = state.round().max(1) as f64;
    Ok(state.alpha_hat(worker, kind)? + ((q + 1.0) * t.ln() / m as f64).sqrt())
}

pub fn ucb_weights(state: &CarsState, workers: &[Worker], tasks: &[Task]) -> Result<WeightMatrix> {
    let mut data = Vec::with_capacity(workers.len() * tasks.len());
    for w in workers {
        let per_type: Vec<f64> = TaskType::ALL
            .iter()
            .map(|z| ucb_index(state, w.id, *z))
            .collect::<Result<_>>()?;
        data.extend(tasks.iter().map(|s| per_type[s.kind.index()]));
    }
    WeightMatrix::new(workers.len(), tasks.len(), data)
}

/// Weights from known preferences (no exploration bonus).
pub fn preference_weights(prefs: &PreferenceModel, workers: &[Worker], tasks: &[Task]) -> Result<WeightMatrix> {
    let mut data = Vec::with_capacity(workers.len() * tasks.len());
    for w in workers {
        for s in tasks {
            data.push(prefs.get(w.id, s.kind)?);
        }
    }
    WeightMatrix::new(workers.len(), tasks.len(), data)
}

/// Solves the recommendation program with optimistic weights; relaxation on.
pub fn select_action(
    state: &CarsState,
    workers: &[Worker],
    tasks: &[Task],
    k: usize,
    lambda_km: f64,
) -> Result<PotrSolution> {
    let weights = ucb_weights(state, workers, tasks)?;
    solve_potr(&weights, workers, tasks, k, lambda_km, true)
}

/// Applies one round of observations in (worker id, task id) order and
/// advances the round counter.
pub fn update(state: &CarsState, obs: &ObservationBatch) -> Result<CarsState> {
    let mut next = state.clone();
    let mut records = obs.0.clone();
    records.sort_by_key(|o| (o.worker, o.task));
    for o in records {
        let r = next.row(o.worker)?;
        let z = o.kind.index();
        let m = next.counts[r][z] as f64;
        let a = next.alpha_hat[r][z];
        let x = if o.did_bid { 1.0 } else { 0.0 };
        next.alpha_hat[r][z] = match (next.mode, o.did_bid) {
            (UpdateMode::BidOnly, false) => a,
            _ => (a * m + x) / (m + 1.0),
        };
        next.counts[r][z] += 1;
    }
    next.t += 1;
    Ok(next)
}

/// Expected reward of a recommendation under the true preferences.
pub fn realized_reward(matrix: &RecommendationMatrix, tasks: &[Task], prefs: &PreferenceModel) -> Result<f64> {
    matrix
        .selected()
        .map(|(i, j)| prefs.get(matrix.worker_ids[i], tasks[j].kind))
        .sum()
}

/// `t * r_star - sum(rewards)` over the rounds played so far.
pub fn cumulative_regret(history: &[f64], r_star: f64) -> f64 {
    history.len() as f64 * r_star - history.iter().sum::<f64>()
}

/// Logarithmic regret bound for the optimistic learner.
pub fn regret_bound(a_max: f64, q: usize, delta_min: f64, delta_max: f64, t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidInput("round counter must be >= 1".into()));
    }
    bound_at_log(a_max, q, delta_min, delta_max, (t as f64).ln())
}

fn bound_at_log(a_max: f64, q: usize, delta_min: f64, delta_max: f64, ln_t: f64) -> Result<f64> {
    if !(delta_min > 0.0) {
        return Err(Error::UndefinedBound(delta_min));
    }
    let q = q as f64;
    let log_term = 4.0 * a_max * a_max * q.powi(3) * (q + 1.0) * ln_t / (delta_min * delta_min);
    let constant = std::f64::consts::PI.powi(2) / 3.0 * q * q + q;
    Ok((log_term + constant) * delta_max)
}
