//! CSV loaders for worker fleets and task streams.
//!
//! ```text
//! workers: id,x_km,y_km,energy_per_km,range_km,min_range_km
//! tasks:   id,type,origin_x,origin_y,dest_x,dest_y,deliverable_kwh,slot
//! ```

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::domain::{Point, Task, TaskId, TaskType, Worker};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
struct WorkerRow {
    id: u32,
    x_km: f64,
    y_km: f64,
    energy_per_km: f64,
    range_km: f64,
    min_range_km: f64,
}

#[derive(Debug, Deserialize)]
struct TaskRow {
    id: u32,
    #[serde(rename = "type")]
    kind: u8,
    origin_x: f64,
    origin_y: f64,
    dest_x: f64,
    dest_y: f64,
    deliverable_kwh: f64,
    slot: u32,
}

fn rows<T: for<'de> Deserialize<'de>>(reader: impl Read, label: &str) -> Result<Vec<(usize, T)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            // Row numbers count the header as row 1.
            let row = i + 2;
            r.map(|v| (row, v)).map_err(|e| Error::Parse {
                path: label.to_owned(),
                row,
                message: e.to_string(),
            })
        })
        .collect()
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn read_workers(reader: impl Read, label: &str) -> Result<Vec<Worker>> {
    let mut seen = HashSet::new();
    rows::<WorkerRow>(reader, label)?
        .into_iter()
        .map(|(row, r)| {
            let bad = |message: String| Error::Parse {
                path: label.to_owned(),
                row,
                message,
            };
            let w = Worker::new(r.id, Point::new(r.x_km, r.y_km), r.energy_per_km, r.range_km, r.min_range_km);
            w.validate().map_err(bad)?;
            if !seen.insert(w.id) {
                return Err(bad(format!("duplicate worker id {}", r.id)));
            }
            Ok(w)
        })
        .collect()
}

pub fn read_tasks(reader: impl Read, label: &str) -> Result<Vec<Task>> {
    let mut seen: HashSet<TaskId> = HashSet::new();
    rows::<TaskRow>(reader, label)?
        .into_iter()
        .map(|(row, r)| {
            let bad = |message: String| Error::Parse {
                path: label.to_owned(),
                row,
                message,
            };
            let kind = TaskType::from_code(r.kind).ok_or_else(|| bad(format!("unknown task type {}", r.kind)))?;
            let task = Task {
                id: TaskId(r.id),
                kind,
                origin: Point::new(r.origin_x, r.origin_y),
                destination: Point::new(r.dest_x, r.dest_y),
                deliverable_kwh: r.deliverable_kwh,
                slot_created: r.slot,
            };
            task.validate().map_err(bad)?;
            if !seen.insert(task.id) {
                return Err(bad(format!("duplicate task id {}", r.id)));
            }
            Ok(task)
        })
        .collect()
}

pub fn ingest_workers(path: &Path) -> Result<Vec<Worker>> {
    read_workers(open(path)?, &path.display().to_string())
}

pub fn ingest_tasks(path: &Path) -> Result<Vec<Task>> {
    read_tasks(open(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKER_HEADER: &str = "id,x_km,y_km,energy_per_km,range_km,min_range_km\n";
    const TASK_HEADER: &str = "id,type,origin_x,origin_y,dest_x,dest_y,deliverable_kwh,slot\n";

    #[test]
    fn header_only_files_are_empty() {
        assert!(read_workers(WORKER_HEADER.as_bytes(), "w").unwrap().is_empty());
        assert!(read_tasks(TASK_HEADER.as_bytes(), "t").unwrap().is_empty());
    }

    #[test]
    fn negative_efficiency_names_the_row() {
        let text = format!("{WORKER_HEADER}1,0,0,0.2,300,20\n2,1,1,-0.1,300,20\n");
        let err = read_workers(text.as_bytes(), "fleet.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err}");
        assert!(err.to_string().contains("fleet.csv: row 3"));
    }

    #[test]
    fn fifty_four_models() {
        let mut text = WORKER_HEADER.to_owned();
        for i in 1..=54 {
            text.push_str(&format!("{i},{}.5,2,0.{},{},{}\n", i % 10, 12 + i % 10, 250 + i, 25));
        }
        let workers = read_workers(text.as_bytes(), "w").unwrap();
        assert_eq!(workers.len(), 54);
        assert!(workers.iter().all(Worker::is_available));
    }

    #[test]
    fn task_rows() {
        let text = format!("{TASK_HEADER}1,0,0,0,3,4,0,1\n2,2,5,5,5,5,4.5,1\n3,1,1,1,2,2,0,2\n");
        let tasks = read_tasks(text.as_bytes(), "t").unwrap();
        assert_eq!(tasks.len(), 3);
        assert_eq!(tasks[0].service_distance(), 5.0);
        assert!(tasks[1].is_v2g());
        assert_eq!(tasks[2].slot_created, 2);
    }

    #[test]
    fn task_errors() {
        let bad_type = format!("{TASK_HEADER}1,7,0,0,3,4,0,1\n");
        assert!(matches!(read_tasks(bad_type.as_bytes(), "t"), Err(Error::Parse { row: 2, .. })));
        let v2g_moves = format!("{TASK_HEADER}1,2,0,0,3,4,5,1\n");
        assert!(read_tasks(v2g_moves.as_bytes(), "t").is_err());
        let dup = format!("{TASK_HEADER}1,0,0,0,3,4,0,1\n1,0,0,0,3,4,0,1\n");
        assert!(matches!(read_tasks(dup.as_bytes(), "t"), Err(Error::Parse { row: 3, .. })));
        let short = format!("{TASK_HEADER}1,0,0\n");
        assert!(read_tasks(short.as_bytes(), "t").is_err());
    }
}
