//! Runs every configured federation and writes the result files.
//!
//! Output directory layout:
//!
//! - `<label>_rounds.csv`: one row per completed round
//! - `<label>.ckpt`: final model and mask (successful runs only)
//! - `summary.csv`: one row per run with final metrics or the failure
//! - `time_to_accuracy.csv`: first cumulative simulated time at which each
//!   run reaches each configured accuracy threshold, `-` if never
//! - `size_vs_time.csv`: active parameter count against cumulative time
//!
//! Runs execute in config order. A failing run is recorded and the rest
//! still execute.

use std::fs;
use std::path::{Path, PathBuf};

use fedtopic::checkpoint::Checkpoint;
use fedtopic::corpus::{load_corpus, train_test_split, CorpusFormat};
use fedtopic::federation::{run_federation_with, EvalMetrics};
use fedtopic::synthetic::generate;
use fedtopic::{Corpus, RoundReport};
use thiserror::Error;

use crate::config::{DataSource, ExperimentSpec, RunSpec, ScheduleChoice};
use crate::format::sig9;

pub const ROUNDS_HEADER: &str = "round,loss,density,active_params,round_time_s,cum_time_s,accuracy,coherence,diversity";
pub const UNREACHED: &str = "-";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("loading {path}: {source}")]
    Load { path: PathBuf, source: fedtopic::Error },

    #[error("preparing corpus: {0}")]
    Prepare(fedtopic::Error),

    #[error("writing {path}: {message}")]
    Write { path: PathBuf, message: String },
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run: RunSpec,
    /// Every completed round, including those before a failure.
    pub reports: Vec<RoundReport>,
    pub error: Option<String>,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }

    /// Metrics of the last evaluated round.
    pub fn final_metrics(&self) -> Option<&EvalMetrics> {
        self.reports.iter().rev().find_map(|r| r.metrics.as_ref())
    }

    /// Cumulative time of the first evaluation with accuracy at least `threshold`.
    pub fn time_to_accuracy(&self, threshold: f64) -> Option<f64> {
        self.reports
            .iter()
            .find(|r| r.metrics.and_then(|m| m.accuracy).is_some_and(|a| a >= threshold))
            .map(|r| r.cum_time_s)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunOutcome>,
}

impl ExperimentOutcome {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| !r.succeeded()).count()
    }
}

/// Train and test corpora for a spec.
pub fn load_data(spec: &ExperimentSpec) -> Result<(Corpus, Corpus), ExperimentError> {
    let load = |path: &Path| {
        load_corpus(path, CorpusFormat::BagOfWords)
            .map(|l| l.corpus)
            .map_err(|source| ExperimentError::Load {
                path: path.to_path_buf(),
                source,
            })
    };
    let seed = spec.federation.seed;
    let split = |c: &Corpus| train_test_split(c, spec.test_fraction, seed).map_err(ExperimentError::Prepare);
    match &spec.data {
        DataSource::Files {
            train,
            test: Some(test),
        } => Ok((load(train)?, load(test)?)),
        DataSource::Files { train, test: None } => split(&load(train)?),
        DataSource::Synthetic(s) => split(&generate(s).map_err(ExperimentError::Prepare)?),
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome, ExperimentError> {
    run_experiment_with(spec, |_, _| {})
}

/// Like [`run_experiment`], calling `on_round` after every round of every run.
pub fn run_experiment_with<F>(spec: &ExperimentSpec, mut on_round: F) -> Result<ExperimentOutcome, ExperimentError>
where
    F: FnMut(&RunSpec, &RoundReport),
{
    let (train, test) = load_data(spec)?;
    let dir = &spec.output_dir;
    fs::create_dir_all(dir).map_err(|e| write_error(dir, e))?;

    let mut runs = Vec::with_capacity(spec.runs.len());
    for run in &spec.runs {
        let mut reports = Vec::new();
        let result = run_federation_with(&spec.run_config(run), &train, &test, |r, _| {
            on_round(run, r);
            reports.push(r.clone());
        });
        let error = match result {
            Ok(done) => {
                let path = dir.join(format!("{}.ckpt", run.label));
                let ck = Checkpoint {
                    vocab: done.vocab,
                    params: done.params,
                    mask: done.mask,
                };
                ck.save(&path).map_err(|e| write_error(&path, e))?;
                None
            }
            Err(e) => Some(e.to_string()),
        };
        write_file(&dir.join(format!("{}_rounds.csv", run.label)), &rounds_csv(&reports))?;
        runs.push(RunOutcome {
            run: run.clone(),
            reports,
            error,
        });
    }

    let outcome = ExperimentOutcome { runs };
    write_file(&dir.join("summary.csv"), &summary_csv(&outcome))?;
    write_file(
        &dir.join("time_to_accuracy.csv"),
        &time_to_accuracy_csv(&outcome, &spec.accuracy_thresholds),
    )?;
    write_file(&dir.join("size_vs_time.csv"), &size_vs_time_csv(&outcome))?;
    Ok(outcome)
}

/// Per-round telemetry; metric cells are empty on rounds without evaluation.
pub fn rounds_csv(reports: &[RoundReport]) -> String {
    let rows = reports.iter().map(|r| {
        let m = r.metrics.as_ref();
        vec![
            r.round.to_string(),
            sig9(r.mean_loss),
            sig9(r.density),
            r.active_params.to_string(),
            sig9(r.round_time_s),
            sig9(r.cum_time_s),
            opt(m.and_then(|m| m.accuracy)),
            opt(m.map(|m| m.coherence)),
            opt(m.map(|m| m.diversity)),
        ]
    });
    to_csv(ROUNDS_HEADER.split(',').map(str::to_string).collect(), rows)
}

pub fn summary_csv(outcome: &ExperimentOutcome) -> String {
    let header = [
        "label",
        "schedule",
        "target_density",
        "status",
        "rounds",
        "accuracy",
        "coherence",
        "diversity",
        "total_time_s",
        "final_density",
        "active_params",
        "error",
    ];
    let rows = outcome.runs.iter().map(|o| {
        let m = o.final_metrics();
        let last = o.reports.last();
        vec![
            o.run.label.clone(),
            schedule_name(o.run.schedule).to_string(),
            sig9(o.run.final_density),
            if o.succeeded() { "ok" } else { "failed" }.to_string(),
            o.reports.len().to_string(),
            opt(m.and_then(|m| m.accuracy)),
            opt(m.map(|m| m.coherence)),
            opt(m.map(|m| m.diversity)),
            opt(last.map(|r| r.cum_time_s)),
            opt(last.map(|r| r.density)),
            last.map(|r| r.active_params.to_string()).unwrap_or_default(),
            o.error.clone().unwrap_or_default(),
        ]
    });
    to_csv(header.map(str::to_string).to_vec(), rows)
}

pub fn time_to_accuracy_csv(outcome: &ExperimentOutcome, thresholds: &[f64]) -> String {
    let mut header = vec!["label".to_string()];
    header.extend(thresholds.iter().map(|&t| sig9(t)));
    let rows = outcome.runs.iter().map(|o| {
        let mut row = vec![o.run.label.clone()];
        row.extend(thresholds.iter().map(|&t| match o.time_to_accuracy(t) {
            Some(s) => sig9(s),
            None => UNREACHED.to_string(),
        }));
        row
    });
    to_csv(header, rows)
}

pub fn size_vs_time_csv(outcome: &ExperimentOutcome) -> String {
    let header = ["label", "round", "cum_time_s", "active_params", "density"];
    let rows = outcome.runs.iter().flat_map(|o| {
        o.reports.iter().map(move |r| {
            vec![
                o.run.label.clone(),
                r.round.to_string(),
                sig9(r.cum_time_s),
                r.active_params.to_string(),
                sig9(r.density),
            ]
        })
    });
    to_csv(header.map(str::to_string).to_vec(), rows)
}

fn schedule_name(s: ScheduleChoice) -> &'static str {
    match s {
        ScheduleChoice::None => "none",
        ScheduleChoice::Normal => "normal",
        ScheduleChoice::Fast => "fast",
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}

fn to_csv(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    // Writing to memory cannot fail.
    w.write_record(&header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("cells are utf-8")
}

fn write_file(path: &Path, text: &str) -> Result<(), ExperimentError> {
    fs::write(path, text).map_err(|e| write_error(path, e))
}

fn write_error(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Write {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}
