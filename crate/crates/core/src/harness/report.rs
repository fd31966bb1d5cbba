//! Success-rate aggregation and report output (CSV and an aligned text table).

use super::run::EpisodeRecord;
use super::HarnessError;
use crate::episodes::Task;
use crate::planner::{Backend, Skill};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateCell {
    pub successes: usize,
    pub attempts: usize,
}

impl RateCell {
    fn add(&mut self, success: bool) {
        self.attempts += 1;
        self.successes += success as usize;
    }

    /// Percentage, or `None` when never attempted.
    pub fn rate(&self) -> Option<f64> {
        (self.attempts > 0).then(|| 100.0 * self.successes as f64 / self.attempts as f64)
    }
}

/// Rates for one source position (the only one, or first/second for BiSonic).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub planning: RateCell,
    /// Indexed like [`Skill::ALL`]; attempts count the times a skill was reached.
    pub skills: [RateCell; 5],
    pub overall: RateCell,
}

impl StageReport {
    pub fn skill(&self, skill: Skill) -> RateCell {
        self.skills[skill_index(skill)]
    }
}

fn skill_index(skill: Skill) -> usize {
    Skill::ALL.iter().position(|&s| s == skill).unwrap()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub backend: Backend,
    /// Episodes that count towards the rates.
    pub episodes: usize,
    pub skipped: usize,
    pub stages: Vec<StageReport>,
}

/// Planning accuracy and overall success are over all non-skipped episodes;
/// a skill's rate is over the episodes in which execution reached it.
pub fn aggregate(records: &[EpisodeRecord]) -> Result<EvalReport, HarnessError> {
    let counted: Vec<&EpisodeRecord> = records.iter().filter(|r| !r.is_skipped()).collect();
    let first = counted.first().ok_or(HarnessError::EmptyRun)?;
    let task = first.task;
    if let Some(r) = counted.iter().find(|r| r.task != task) {
        return Err(HarnessError::Config(format!("mixed tasks: {} and {}", task, r.task)));
    }
    let mut stages = vec![StageReport::default(); task.source_count()];
    for r in &counted {
        for (k, stage) in stages.iter_mut().enumerate() {
            stage.planning.add(r.stage_planning.get(k) == Some(&true));
            stage.overall.add(r.stage_overall(k));
            if let Some(s) = r.stages.get(k) {
                for o in &s.outcomes {
                    stage.skills[skill_index(o.skill)].add(o.success);
                }
            }
        }
    }
    Ok(EvalReport {
        task,
        backend: first.backend,
        episodes: counted.len(),
        skipped: records.len() - counted.len(),
        stages,
    })
}

/// Report columns in table order.
pub const COLUMNS: [&str; 7] = ["Task Planning", "Navigate", "Pick", "Place", "Open Door", "Close Sink", "Overall"];

fn column_cell(stage: &StageReport, column: usize) -> RateCell {
    match column {
        0 => stage.planning,
        6 => stage.overall,
        k => stage.skills[k - 1],
    }
}

/// Columns shown for a task: planning, its own skills, overall, plus any
/// other skill a wrong plan happened to execute.
fn visible_columns(report: &EvalReport) -> Vec<usize> {
    let own: &[Skill] = match report.task {
        Task::SonicStow => &[Skill::Nav, Skill::Pick, Skill::Place],
        Task::SonicInteract => &[Skill::Nav, Skill::OpenDoor, Skill::CloseSink],
        Task::BiSonic => &Skill::ALL,
    };
    (0..COLUMNS.len())
        .filter(|&c| {
            c == 0
                || c == 6
                || own.contains(&Skill::ALL[c - 1])
                || report.stages.iter().any(|s| s.skills[c - 1].attempts > 0)
        })
        .collect()
}

fn format_rate(cell: RateCell) -> String {
    cell.rate().map_or_else(|| "-".to_string(), |r| format!("{r:.2}"))
}

fn format_cell(report: &EvalReport, column: usize) -> String {
    report
        .stages
        .iter()
        .map(|s| format_rate(column_cell(s, column)))
        .collect::<Vec<_>>()
        .join(" / ")
}

fn backend_name(b: Backend) -> &'static str {
    match b {
        Backend::Oracle => "oracle",
        Backend::RuleBased => "rule",
        Backend::Remote => "remote",
    }
}

fn parse_backend(s: &str) -> Result<Backend, HarnessError> {
    match s {
        "oracle" => Ok(Backend::Oracle),
        "rule" => Ok(Backend::RuleBased),
        "remote" => Ok(Backend::Remote),
        other => Err(HarnessError::Config(format!("unknown backend `{other}`"))),
    }
}

/// Aligned text table; dual-source cells read "first / second".
pub fn render_text(report: &EvalReport) -> String {
    let cols = visible_columns(report);
    let cells: Vec<String> = cols.iter().map(|&c| format_cell(report, c)).collect();
    let widths: Vec<usize> = cols.iter().zip(&cells).map(|(&c, v)| COLUMNS[c].len().max(v.len())).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}  planner={}  episodes={}  skipped={}",
        report.task,
        backend_name(report.backend),
        report.episodes,
        report.skipped
    );
    let row = |items: Vec<&str>| {
        items
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let _ = writeln!(out, "{}", row(cols.iter().map(|&c| COLUMNS[c]).collect()));
    let _ = writeln!(out, "{}", row(cells.iter().map(String::as_str).collect()));
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    task: String,
    backend: String,
    episodes: usize,
    skipped: usize,
    stage: usize,
    column: String,
    successes: usize,
    attempts: usize,
    rate: Option<f64>,
}

/// One row per (stage, column), all seven columns, in table order.
pub fn write_csv<W: Write>(out: W, report: &EvalReport) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for (k, stage) in report.stages.iter().enumerate() {
        for (c, name) in COLUMNS.iter().enumerate() {
            let cell = column_cell(stage, c);
            w.serialize(CsvRow {
                task: report.task.slug().into(),
                backend: backend_name(report.backend).into(),
                episodes: report.episodes,
                skipped: report.skipped,
                stage: k + 1,
                column: (*name).into(),
                successes: cell.successes,
                attempts: cell.attempts,
                rate: cell.rate().map(|r| (r * 100.0).round() / 100.0),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<EvalReport, HarnessError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut report: Option<EvalReport> = None;
    for row in reader.deserialize() {
        let row: CsvRow = row?;
        let r = match report.as_mut() {
            Some(r) => r,
            None => report.insert(EvalReport {
                task: row.task.parse()?,
                backend: parse_backend(&row.backend)?,
                episodes: row.episodes,
                skipped: row.skipped,
                stages: Vec::new(),
            }),
        };
        let k = row.stage.checked_sub(1).ok_or_else(|| HarnessError::Config("stage 0".into()))?;
        if r.stages.len() <= k {
            r.stages.resize(k + 1, StageReport::default());
        }
        let c = COLUMNS
            .iter()
            .position(|n| *n == row.column)
            .ok_or_else(|| HarnessError::Config(format!("unknown column `{}`", row.column)))?;
        let cell = RateCell {
            successes: row.successes,
            attempts: row.attempts,
        };
        let stage = &mut r.stages[k];
        match c {
            0 => stage.planning = cell,
            6 => stage.overall = cell,
            s => stage.skills[s - 1] = cell,
        }
    }
    report.ok_or(HarnessError::EmptyRun)
}
