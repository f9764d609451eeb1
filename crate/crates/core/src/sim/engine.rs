//! The round loop: tasks, recommendation, bidding, winner selection,
//! payments, learning and fleet dynamics.

use crate::auction::{bmw, default_penalty, second_price_payments, solve_wibs_exact, Assignment};
use crate::baseline::{bg_assign, pk_topk};
use crate::cars::{self, CarsState, ObservationBatch, PreferenceModel};
use crate::domain::{Bid, EnergyBudget, Task, TaskType, Worker, WorkerId};
use crate::error::{Error, Result};
use crate::potr::{solve_potr, RecommendationMatrix};
use crate::sim::fleet::{apply_round, FleetParams, FleetState};
use crate::sim::generate::{fleet_rng, generate_tasks, generate_workers, preference_rng, simulate_bids, task_rng, BidModel};
use crate::sim::ingest::{ingest_tasks, ingest_workers};
use crate::sim::scenario::{BudgetRule, Scenario, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u32,
    pub tasks_offered: usize,
    pub workers_available: usize,
    pub bids_received: usize,
    /// Sum of winning bids.
    pub objective: f64,
    pub tasks_completed: usize,
    pub payments_total: f64,
    pub delivered_v2g_kwh: f64,
    pub budget_kwh: f64,
    pub budget_met: bool,
    /// Expected number of bids under the true preferences.
    pub reward: f64,
    /// Learner error after this round's update; learning variants only.
    pub mae: Option<f64>,
    /// Cumulative regret through this round; static mode only.
    pub regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub variant: Variant,
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    /// Final learner state for learning variants.
    pub learner: Option<CarsState>,
}

fn prefix_sums(values: impl Iterator<Item = f64>) -> Vec<f64> {
    values
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

impl RunReport {
    pub fn cum_objective(&self) -> Vec<f64> {
        prefix_sums(self.records.iter().map(|r| r.objective))
    }

    pub fn cum_tasks(&self) -> Vec<u64> {
        self.records
            .iter()
            .scan(0u64, |acc, r| {
                *acc += r.tasks_completed as u64;
                Some(*acc)
            })
            .collect()
    }

    pub fn cum_payments(&self) -> Vec<f64> {
        prefix_sums(self.records.iter().map(|r| r.payments_total))
    }

    pub fn cum_reward(&self) -> Vec<f64> {
        prefix_sums(self.records.iter().map(|r| r.reward))
    }

    /// Cumulative payments over cumulative tasks; zero before the first task.
    pub fn avg_price_per_task(&self) -> Vec<f64> {
        self.cum_payments()
            .into_iter()
            .zip(self.cum_tasks())
            .map(|(p, n)| if n == 0 { 0.0 } else { p / n as f64 })
            .collect()
    }

    pub fn total_objective(&self) -> f64 {
        self.cum_objective().last().copied().unwrap_or(0.0)
    }

    pub fn total_tasks(&self) -> u64 {
        self.cum_tasks().last().copied().unwrap_or(0)
    }

    /// Total objective over total tasks; zero when nothing was completed.
    pub fn objective_per_task(&self) -> f64 {
        match self.total_tasks() {
            0 => 0.0,
            n => self.total_objective() / n as f64,
        }
    }
}

/// Mean absolute error of the learner's estimates over every (worker, type).
pub fn mae(state: &CarsState, prefs: &PreferenceModel) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for &w in state.worker_ids() {
        for z in TaskType::ALL {
            total += (state.alpha_hat(w, z)? - prefs.get(w, z)?).abs();
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

fn round_budget(scenario: &Scenario, tasks: &[Task]) -> EnergyBudget {
    match scenario.budget_rule {
        BudgetRule::Fixed => EnergyBudget::new(scenario.budget_kwh),
        BudgetRule::SumOfV2g => {
            let offered: f64 = tasks.iter().filter(|t| t.is_v2g()).map(|t| t.deliverable_kwh).sum();
            EnergyBudget::new(offered * scenario.budget_fraction)
        }
    }
}

/// Exact winners; when the budget cannot be met, the most deliverable
/// energy is targeted instead and the round is marked as missing it.
fn select_opt(bids: &[Bid], tasks: &[Task], workers: &[Worker], budget: EnergyBudget) -> Result<Assignment> {
    let penalty = default_penalty(bids);
    match solve_wibs_exact(bids, tasks, workers, budget, penalty) {
        Err(Error::BudgetUnattainable { attainable_kwh, .. }) => {
            let mut a = solve_wibs_exact(bids, tasks, workers, EnergyBudget::new(attainable_kwh), penalty)?;
            a.required_kwh = budget.required_kwh;
            a.feasible = budget.is_met_by(a.delivered_v2g_kwh);
            Ok(a)
        }
        other => other,
    }
}

struct Population {
    fleet: FleetState,
    prefs: PreferenceModel,
}

fn population(scenario: &Scenario) -> Result<Population> {
    let (workers, capacity) = match &scenario.workers_file {
        Some(path) => {
            let workers = ingest_workers(path)?;
            let capacity = workers.iter().map(|w| w.range_km).collect();
            (workers, capacity)
        }
        None => generate_workers(scenario, &mut fleet_rng(scenario.seed)),
    };
    let ids: Vec<WorkerId> = workers.iter().map(|w| w.id).collect();
    let prefs = PreferenceModel::sample(&ids, &scenario.preference_set, &mut preference_rng(scenario.seed))?;
    Ok(Population {
        fleet: FleetState::new(workers, capacity)?,
        prefs,
    })
}

struct TaskSource {
    replay: Option<Vec<Task>>,
}

impl TaskSource {
    fn new(scenario: &Scenario) -> Result<TaskSource> {
        Ok(TaskSource {
            replay: scenario.tasks_file.as_deref().map(ingest_tasks).transpose()?,
        })
    }

    /// New arrivals for `round`; in static mode every task, once.
    fn arrivals(&self, scenario: &Scenario, round: u32) -> Vec<Task> {
        match &self.replay {
            Some(all) if scenario.static_mode => all.clone(),
            Some(all) => all.iter().filter(|t| t.slot_created == round).cloned().collect(),
            None => generate_tasks(scenario, round, &mut task_rng(scenario.seed, round)),
        }
    }
}

/// Runs `scenario.variant` for `scenario.rounds` rounds.
pub fn run(scenario: &Scenario) -> Result<RunReport> {
    scenario.validate()?;
    let variant = scenario.variant;
    let Population { mut fleet, prefs } = population(scenario)?;
    let source = TaskSource::new(scenario)?;
    let model = BidModel::from_scenario(scenario);
    let params = FleetParams {
        speed_kmh: scenario.speed_kmh,
        charge_rounds: scenario.charge_rounds,
        charge_margin_km: scenario.charge_margin_km,
    };
    let fleet_ids: Vec<WorkerId> = fleet.workers.iter().map(|w| w.id).collect();
    let mut learner = variant
        .learns()
        .then(|| CarsState::new(&fleet_ids, scenario.prior, scenario.update_mode));

    let static_tasks = scenario.static_mode.then(|| source.arrivals(scenario, 1));
    let r_star = match &static_tasks {
        Some(tasks) => {
            let workers = fleet.available();
            let weights = cars::preference_weights(&prefs, &workers, tasks)?;
            Some(solve_potr(&weights, &workers, tasks, scenario.k, scenario.lambda_km, true)?.objective)
        }
        None => None,
    };

    let mut pending: Vec<Task> = Vec::new();
    let mut records = Vec::with_capacity(scenario.rounds as usize);
    let mut regret = 0.0;
    for round in 1..=scenario.rounds {
        let wrap = |e: Error| Error::Round {
            round,
            source: Box::new(e),
        };
        let tasks = match &static_tasks {
            Some(t) => t.clone(),
            None => {
                fleet.release(round);
                let mut t = std::mem::take(&mut pending);
                t.extend(source.arrivals(scenario, round));
                t
            }
        };
        let workers = fleet.available();
        let budget = round_budget(scenario, &tasks);

        let step = (|| -> Result<_> {
            let matrix: RecommendationMatrix = match (variant, &learner) {
                (Variant::Bg, _) => pk_topk(&prefs, &workers, &tasks, scenario.k, scenario.lambda_km)?,
                (_, Some(state)) => cars::select_action(state, &workers, &tasks, scenario.k, scenario.lambda_km)?.matrix,
                (_, None) => {
                    let weights = cars::preference_weights(&prefs, &workers, &tasks)?;
                    solve_potr(&weights, &workers, &tasks, scenario.k, scenario.lambda_km, true)?.matrix
                }
            };
            let bids = simulate_bids(&matrix, &workers, &tasks, &prefs, &model, round)?;
            let assignment = match variant {
                Variant::PkOpt | Variant::CarsOpt => select_opt(&bids, &tasks, &workers, budget)?,
                Variant::PkBmw | Variant::CarsBmw => bmw(&workers, &tasks, &bids, budget)?,
                Variant::Bg => bg_assign(&bids, &tasks, budget)?.assignment,
            };
            let payments = second_price_payments(&assignment, &bids)?;
            Ok((matrix, bids, assignment, payments))
        })();
        let (matrix, bids, assignment, payments) = step.map_err(wrap)?;

        let reward = cars::realized_reward(&matrix, &tasks, &prefs).map_err(wrap)?;
        let mut error = None;
        if let Some(state) = learner.as_mut() {
            *state = cars::update(state, &ObservationBatch::from_round(&matrix, &tasks, &bids)).map_err(wrap)?;
            error = Some(mae(state, &prefs).map_err(wrap)?);
        }
        if let Some(r) = r_star {
            regret += r - reward;
        }

        if static_tasks.is_none() {
            fleet = apply_round(&fleet, &assignment, &payments, &tasks, round, params).map_err(wrap)?;
            pending = tasks
                .iter()
                .filter(|t| {
                    !t.is_v2g()
                        && assignment.winner_of(t.id).is_none()
                        && round - t.slot_created < scenario.carry_over_rounds
                })
                .cloned()
                .collect();
        }

        records.push(RoundRecord {
            round,
            tasks_offered: tasks.len(),
            workers_available: workers.len(),
            bids_received: bids.len(),
            objective: assignment.total_cost,
            tasks_completed: assignment.len(),
            payments_total: payments.total(),
            delivered_v2g_kwh: assignment.delivered_v2g_kwh,
            budget_kwh: budget.required_kwh,
            budget_met: budget.is_met_by(assignment.delivered_v2g_kwh),
            reward,
            mae: error,
            regret: r_star.map(|_| regret),
        });
    }
    Ok(RunReport {
        variant,
        seed: scenario.seed,
        records,
        learner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Scenario {
        Scenario {
            num_workers: 12,
            rounds: 6,
            rates: [3.0, 2.0, 3.0],
            region_km: 10.0,
            ..Scenario::default()
        }
    }

    #[test]
    fn mae_examples() {
        let ids = [WorkerId(1)];
        let prefs = PreferenceModel::new(vec![(WorkerId(1), [0.5, 0.5, 0.5])]).unwrap();
        let zero = CarsState::new(&ids, 0.0, Default::default());
        assert_eq!(mae(&zero, &prefs).unwrap(), 0.5);
        let exact = CarsState::new(&ids, 0.5, Default::default());
        assert_eq!(mae(&exact, &prefs).unwrap(), 0.0);

        let prefs = PreferenceModel::new(vec![(WorkerId(1), [0.5, 0.7, 0.7])]).unwrap();
        let mut s = CarsState::new(&ids, 0.7, Default::default());
        s.set_arm(WorkerId(1), TaskType::Rideshare, 0.2, 1).unwrap();
        s.set_arm(WorkerId(1), TaskType::BatterySwap, 0.9, 1).unwrap();
        // Two differing entries, 0.3 and 0.2; the third matches.
        assert!((mae(&s, &prefs).unwrap() * 3.0 / 2.0 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_empty_round() {
        let s = Scenario {
            rounds: 1,
            rates: [0.0; 3],
            ..small()
        };
        let r = run(&s).unwrap();
        assert_eq!(r.records.len(), 1);
        let rec = &r.records[0];
        assert_eq!((rec.tasks_offered, rec.tasks_completed, rec.objective), (0, 0, 0.0));
        assert!(rec.budget_met);
    }

    #[test]
    fn every_variant_runs_and_is_deterministic() {
        for v in Variant::ALL {
            let s = Scenario { variant: v, ..small() };
            let a = run(&s).unwrap();
            assert_eq!(a, run(&s).unwrap());
            assert_eq!(a.records.len(), 6);
            for rec in &a.records {
                assert!(rec.tasks_completed <= rec.tasks_offered);
                assert!(rec.mae.is_some() == v.learns());
                assert!(rec.regret.is_none());
            }
        }
    }

    #[test]
    fn static_mode_reports_regret() {
        let s = Scenario {
            static_mode: true,
            variant: Variant::PkOpt,
            ..small()
        };
        let r = run(&s).unwrap();
        assert!(r.records.iter().all(|rec| rec.regret.unwrap().abs() < 1e-9));
        let offered = r.records[0].tasks_offered;
        assert!(r.records.iter().all(|rec| rec.tasks_offered == offered));

        let c = run(&Scenario { variant: Variant::CarsOpt, ..s }).unwrap();
        let regrets: Vec<f64> = c.records.iter().map(|rec| rec.regret.unwrap()).collect();
        assert!(regrets.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn cumulative_helpers() {
        let r = run(&Scenario { variant: Variant::PkBmw, ..small() }).unwrap();
        let cum = r.cum_objective();
        assert!(cum.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(r.total_tasks() as usize, r.records.iter().map(|x| x.tasks_completed).sum::<usize>());
    }
}
