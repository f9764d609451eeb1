//! Round-report CSV: one row per (variant, seed, round).

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::sim::engine::RunReport;

pub const REPORT_COLUMNS: [&str; 20] = [
    "variant",
    "seed",
    "round",
    "tasks_offered",
    "workers_available",
    "bids_received",
    "objective",
    "tasks_completed",
    "payments_total",
    "delivered_v2g_kwh",
    "budget_kwh",
    "budget_met",
    "reward",
    "mae",
    "regret",
    "cum_objective",
    "cum_tasks",
    "cum_payments",
    "cum_reward",
    "avg_price_per_task",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        path: "<report>".into(),
        row: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_report_csv(reports: &[RunReport], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS).map_err(csv_err)?;
    for report in reports {
        let cum_objective = report.cum_objective();
        let cum_tasks = report.cum_tasks();
        let cum_payments = report.cum_payments();
        let cum_reward = report.cum_reward();
        let avg_price = report.avg_price_per_task();
        for (n, r) in report.records.iter().enumerate() {
            w.write_record([
                report.variant.name().to_owned(),
                report.seed.to_string(),
                r.round.to_string(),
                r.tasks_offered.to_string(),
                r.workers_available.to_string(),
                r.bids_received.to_string(),
                r.objective.to_string(),
                r.tasks_completed.to_string(),
                r.payments_total.to_string(),
                r.delivered_v2g_kwh.to_string(),
                r.budget_kwh.to_string(),
                r.budget_met.to_string(),
                r.reward.to_string(),
                opt(r.mae),
                opt(r.regret),
                cum_objective[n].to_string(),
                cum_tasks[n].to_string(),
                cum_payments[n].to_string(),
                cum_reward[n].to_string(),
                avg_price[n].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: "<report>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn report_csv_string(reports: &[RunReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_report_csv(reports, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportCheck {
    pub rows: usize,
    pub runs: usize,
}

/// Re-derives every cumulative column from the per-round columns and fails
/// on the first disagreement.
pub fn validate_report_csv(input: impl Read) -> Result<ReportCheck> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != REPORT_COLUMNS {
        return Err(Error::Parse {
            path: "<report>".into(),
            row: 1,
            message: format!("unexpected columns; expected {}", REPORT_COLUMNS.join(",")),
        });
    }
    let col = |name: &str| REPORT_COLUMNS.iter().position(|c| *c == name).expect("known column");
    let mut check = ReportCheck { rows: 0, runs: 0 };
    let mut run: Option<(String, String)> = None;
    let (mut objective, mut tasks, mut payments, mut reward) = (0.0f64, 0u64, 0.0f64, 0.0f64);
    let mut expected_round = 1u32;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = i + 2;
        let fail = |message: String| Error::Parse {
            path: "<report>".into(),
            row,
            message,
        };
        let f = |name: &str| -> Result<f64> {
            rec[col(name)].parse().map_err(|_| fail(format!("column {name}: not a number")))
        };
        let key = (rec[col("variant")].to_owned(), rec[col("seed")].to_owned());
        if run.as_ref() != Some(&key) {
            run = Some(key);
            check.runs += 1;
            (objective, tasks, payments, reward) = (0.0, 0, 0.0, 0.0);
            expected_round = 1;
        }
        let round: u32 = rec[col("round")].parse().map_err(|_| fail("column round: not an integer".into()))?;
        if round != expected_round {
            return Err(fail(format!("expected round {expected_round}, found {round}")));
        }
        expected_round += 1;
        objective += f("objective")?;
        tasks += rec[col("tasks_completed")]
            .parse::<u64>()
            .map_err(|_| fail("column tasks_completed: not an integer".into()))?;
        payments += f("payments_total")?;
        reward += f("reward")?;
        let avg = if tasks == 0 { 0.0 } else { payments / tasks as f64 };
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        for (name, derived) in [
            ("cum_objective", objective),
            ("cum_tasks", tasks as f64),
            ("cum_payments", payments),
            ("cum_reward", reward),
            ("avg_price_per_task", avg),
        ] {
            let stored = f(name)?;
            if !close(stored, derived) {
                return Err(fail(format!("{name} is {stored} but the round columns give {derived}")));
            }
        }
        check.rows += 1;
    }
    Ok(check)
}
