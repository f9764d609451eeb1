//! Experiment grids over variants, seeds and recommendation lengths.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sim::{report_csv_string, run, RunReport, Scenario, Variant};

/// Per-round curves written by `compare`, averaged over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    CumObjective,
    CumTasks,
    AvgPricePerTask,
    Mae,
    CumReward,
    Regret,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::CumObjective,
        Metric::CumTasks,
        Metric::AvgPricePerTask,
        Metric::Mae,
        Metric::CumReward,
        Metric::Regret,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::CumObjective => "cum_objective",
            Metric::CumTasks => "cum_tasks",
            Metric::AvgPricePerTask => "avg_price_per_task",
            Metric::Mae => "mae",
            Metric::CumReward => "cum_reward",
            Metric::Regret => "regret",
        }
    }

    fn series(self, r: &RunReport) -> Vec<Option<f64>> {
        let some = |v: Vec<f64>| v.into_iter().map(Some).collect();
        match self {
            Metric::CumObjective => some(r.cum_objective()),
            Metric::CumTasks => some(r.cum_tasks().into_iter().map(|n| n as f64).collect()),
            Metric::AvgPricePerTask => some(r.avg_price_per_task()),
            Metric::Mae => r.records.iter().map(|x| x.mae).collect(),
            Metric::CumReward => some(r.cum_reward()),
            Metric::Regret => r.records.iter().map(|x| x.regret).collect(),
        }
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_cells(cells: Vec<Scenario>) -> Result<Vec<RunReport>> {
    cells
        .into_par_iter()
        .map(|s| {
            run(&s).map_err(|e| Error::Cell {
                variant: s.variant.name().to_owned(),
                seed: s.seed,
                source: Box::new(e),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    /// Variant-major, then seed, in the order given.
    pub reports: Vec<RunReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: Variant,
    pub seeds: usize,
    pub objective: (f64, f64),
    pub tasks: (f64, f64),
    pub avg_price: (f64, f64),
    pub objective_per_task: (f64, f64),
    pub budget_met_rate: f64,
    pub final_mae: Option<(f64, f64)>,
}

/// Runs every (variant, seed) cell of `base` in parallel.
pub fn compare(base: &Scenario, variants: &[Variant], seeds: &[u64]) -> Result<Comparison> {
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidInput("need at least one variant and one seed".into()));
    }
    let cells = variants
        .iter()
        .flat_map(|&variant| {
            seeds.iter().map(move |&seed| Scenario {
                variant,
                seed,
                ..base.clone()
            })
        })
        .collect();
    Ok(Comparison {
        variants: variants.to_vec(),
        seeds: seeds.to_vec(),
        reports: run_cells(cells)?,
    })
}

impl Comparison {
    pub fn of(&self, variant: Variant) -> impl Iterator<Item = &RunReport> {
        self.reports.iter().filter(move |r| r.variant == variant)
    }

    pub fn report_csv(&self) -> Result<String> {
        report_csv_string(&self.reports)
    }

    /// `round,<variant>...` with each cell the seed mean; blank where the
    /// metric does not apply to a variant.
    pub fn curve_csv(&self, metric: Metric) -> String {
        let mut out = String::from("round");
        for v in &self.variants {
            out.push(',');
            out.push_str(v.name());
        }
        out.push('\n');
        let series: Vec<Vec<Vec<Option<f64>>>> = self
            .variants
            .iter()
            .map(|&v| self.of(v).map(|r| metric.series(r)).collect())
            .collect();
        let rounds = self.reports.iter().map(|r| r.records.len()).max().unwrap_or(0);
        for t in 0..rounds {
            let _ = write!(out, "{}", t + 1);
            for per_seed in &series {
                let vals: Vec<f64> = per_seed.iter().filter_map(|s| s.get(t).copied().flatten()).collect();
                out.push(',');
                if !vals.is_empty() {
                    let _ = write!(out, "{}", mean_sd(&vals).0);
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        self.variants
            .iter()
            .map(|&variant| {
                let runs: Vec<&RunReport> = self.of(variant).collect();
                let stat = |f: &dyn Fn(&RunReport) -> f64| mean_sd(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
                let rounds: usize = runs.iter().map(|r| r.records.len()).sum();
                let met: usize = runs.iter().map(|r| r.records.iter().filter(|x| x.budget_met).count()).sum();
                let maes: Vec<f64> = runs.iter().filter_map(|r| r.records.last().and_then(|x| x.mae)).collect();
                SummaryRow {
                    variant,
                    seeds: runs.len(),
                    objective: stat(&|r| r.total_objective()),
                    tasks: stat(&|r| r.total_tasks() as f64),
                    avg_price: stat(&|r| r.avg_price_per_task().last().copied().unwrap_or(0.0)),
                    objective_per_task: stat(&|r| r.objective_per_task()),
                    budget_met_rate: if rounds == 0 { 0.0 } else { met as f64 / rounds as f64 },
                    final_mae: (!maes.is_empty()).then(|| mean_sd(&maes)),
                }
            })
            .collect()
    }

    /// Fixed-width table of seed means and standard deviations.
    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<9} {:>5} {:>22} {:>18} {:>16} {:>16} {:>9} {:>16}\n",
            "variant", "seeds", "cum_objective", "cum_tasks", "avg_price", "objective/task", "budget", "final_mae"
        );
        let pm = |(m, s): (f64, f64)| format!("{m:.3} ± {s:.3}");
        for row in self.summary() {
            let _ = writeln!(
                out,
                "{:<9} {:>5} {:>22} {:>18} {:>16} {:>16} {:>8.1}% {:>16}",
                row.variant.name(),
                row.seeds,
                pm(row.objective),
                pm(row.tasks),
                pm(row.avg_price),
                pm(row.objective_per_task),
                100.0 * row.budget_met_rate,
                row.final_mae.map(pm).unwrap_or_else(|| "-".into()),
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variant: Variant,
    pub k: usize,
    pub objective_per_task: (f64, f64),
    pub tasks: (f64, f64),
    pub objective: (f64, f64),
}

/// Repeats `compare` for each recommendation length in `ks`.
pub fn sweep_k(base: &Scenario, variants: &[Variant], seeds: &[u64], ks: &[usize]) -> Result<Vec<SweepRow>> {
    if ks.is_empty() {
        return Err(Error::InvalidInput("need at least one K".into()));
    }
    let mut rows = Vec::new();
    for &k in ks {
        let scenario = Scenario { k, ..base.clone() };
        scenario.validate()?;
        let cmp = compare(&scenario, variants, seeds)?;
        for &variant in variants {
            let runs: Vec<&RunReport> = cmp.of(variant).collect();
            let stat = |f: &dyn Fn(&RunReport) -> f64| mean_sd(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
            rows.push(SweepRow {
                variant,
                k,
                objective_per_task: stat(&|r| r.objective_per_task()),
                tasks: stat(&|r| r.total_tasks() as f64),
                objective: stat(&|r| r.total_objective()),
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "variant,k,objective_per_task_mean,objective_per_task_sd,cum_tasks_mean,cum_tasks_sd,cum_objective_mean,cum_objective_sd\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.variant.name(),
            r.k,
            r.objective_per_task.0,
            r.objective_per_task.1,
            r.tasks.0,
            r.tasks.1,
            r.objective.0,
            r.objective.1
        );
    }
    out
}
