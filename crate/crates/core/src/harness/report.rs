use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, EpisodeResult, HarnessError};

/// One episode as written to the report CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub case_id: u64,
    pub trial: usize,
    pub pushes: usize,
    pub actions_total: usize,
    pub completed: bool,
    pub grasp_success: bool,
    pub wall_time_s: f64,
    pub substeps: usize,
}

impl ReportRow {
    pub fn from_episode(case_id: u64, trial: usize, e: &EpisodeResult) -> Self {
        Self {
            case_id,
            trial,
            pushes: e.pushes_executed,
            actions_total: e.actions_total(),
            completed: e.completed,
            grasp_success: e.grasp_succeeded,
            wall_time_s: e.wall_time_s,
            substeps: e.simulator_substeps,
        }
    }

    pub fn grasp_attempted(&self) -> bool {
        self.actions_total > self.pushes
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub episodes: usize,
    pub mean_actions: f64,
    pub mean_pushes: f64,
    pub mean_wall_time_s: f64,
    pub mean_substeps: f64,
    pub total_substeps: usize,
    pub completion_rate: f64,
    /// Successful grasps over grasp attempts; 0 when nothing was attempted.
    pub grasp_success_rate: f64,
}

impl Summary {
    pub fn of<'a>(rows: impl IntoIterator<Item = &'a ReportRow>) -> Self {
        let rows: Vec<&ReportRow> = rows.into_iter().collect();
        let n = rows.len();
        if n == 0 {
            return Self::default();
        }
        let mean = |f: &dyn Fn(&ReportRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n as f64;
        let attempts = rows.iter().filter(|r| r.grasp_attempted()).count();
        let successes = rows.iter().filter(|r| r.grasp_success).count();
        Self {
            episodes: n,
            mean_actions: mean(&|r| r.actions_total as f64),
            mean_pushes: mean(&|r| r.pushes as f64),
            mean_wall_time_s: mean(&|r| r.wall_time_s),
            mean_substeps: mean(&|r| r.substeps as f64),
            total_substeps: rows.iter().map(|r| r.substeps).sum(),
            completion_rate: mean(&|r| r.completed as u8 as f64),
            grasp_success_rate: if attempts == 0 { 0.0 } else { successes as f64 / attempts as f64 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub policy: String,
    pub rows: Vec<ReportRow>,
    pub per_case: Vec<(u64, Summary)>,
    pub summary: Summary,
}

impl BenchmarkReport {
    pub fn new(policy: String, rows: Vec<ReportRow>) -> Self {
        let mut ids: Vec<u64> = Vec::new();
        for r in &rows {
            if !ids.contains(&r.case_id) {
                ids.push(r.case_id);
            }
        }
        let per_case = ids.iter().map(|&id| (id, Summary::of(rows.iter().filter(|r| r.case_id == id)))).collect();
        let summary = Summary::of(&rows);
        Self { policy, rows, per_case, summary }
    }

    /// Rows as CSV. Wall time is written as 0 unless `record_wall_time`, so
    /// reports of identical runs are byte-identical.
    pub fn write_csv<W: Write>(&self, w: W, record_wall_time: bool) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            let row = ReportRow { wall_time_s: if record_wall_time { r.wall_time_s } else { 0.0 }, ..r.clone() };
            out.serialize(row)?;
        }
        if self.rows.is_empty() {
            out.write_record(["case_id", "trial", "pushes", "actions_total", "completed", "grasp_success", "wall_time_s", "substeps"])?;
        }
        out.flush().map_err(|e| HarnessError::Csv(e.into()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, record_wall_time: bool) -> Result<(), HarnessError> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(io_err(path))?;
        self.write_csv(f, record_wall_time)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>, HarnessError> {
        let mut rd = csv::Reader::from_path(path)?;
        Ok(rd.deserialize().collect::<Result<_, _>>()?)
    }
}
