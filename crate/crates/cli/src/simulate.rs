//! Synthetic studies: MOBO sessions against matched random-search runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mobo_core::synthetic::{hypervolume_trace, random_search, run_session};
use mobo_core::{ObjectiveVector, RaterPopulation, SessionConfig, SyntheticRater};
use serde::Serialize;

use crate::error::CliError;

/// Parses `a..b` (inclusive), `a..=b` or `a,b,c`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::new("invalid_args", format!("bad seed list {spec:?}"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b) = (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let seeds = spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaterOutcome {
    pub rater: usize,
    pub seed: u64,
    pub iterations: usize,
    pub stopped_early: bool,
    /// Per-iteration hypervolume, carried forward to the full budget when
    /// the session stopped early.
    pub mobo_trace: Vec<f64>,
    pub random_trace: Vec<f64>,
}

impl RaterOutcome {
    pub fn mobo_final(&self) -> f64 {
        self.mobo_trace.last().copied().unwrap_or(0.0)
    }

    pub fn random_final(&self) -> f64 {
        self.random_trace.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub outcomes: Vec<RaterOutcome>,
}

impl StudySummary {
    /// Raters where MOBO reached at least the baseline's final hypervolume.
    pub fn wins(&self) -> usize {
        self.outcomes.iter().filter(|o| o.mobo_final() >= o.random_final()).count()
    }

    pub fn mean_mobo(&self) -> f64 {
        mean(self.outcomes.iter().map(RaterOutcome::mobo_final))
    }

    pub fn mean_random(&self) -> f64 {
        mean(self.outcomes.iter().map(RaterOutcome::random_final))
    }

    pub fn hypervolume_csv(&self) -> String {
        let mut out = String::from("rater,seed,method,iteration,hypervolume\n");
        for o in &self.outcomes {
            for (method, trace) in [("mobo", &o.mobo_trace), ("random", &o.random_trace)] {
                for (i, hv) in trace.iter().enumerate() {
                    let _ = writeln!(out, "{},{},{method},{},{hv}", o.rater, o.seed, i + 1);
                }
            }
        }
        out
    }
}

fn mean(it: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = it.len();
    if n == 0 {
        return 0.0;
    }
    it.sum::<f64>() / n as f64
}

fn carry_forward(mut trace: Vec<f64>, len: usize) -> Vec<f64> {
    if let Some(&last) = trace.last() {
        trace.resize(len.max(trace.len()), last);
    }
    trace
}

/// Runs one MOBO session and one random-search baseline of the full budget
/// for `rater`. The acquisition and baseline seeds are both `seed`.
pub fn run_rater(
    rater: &SyntheticRater,
    index: usize,
    seed: u64,
    base: &SessionConfig,
) -> Result<(RaterOutcome, String, String), CliError> {
    let mut config = base.clone();
    config.acquisition.seed = seed;
    let id = format!("rater-{index:02}");
    let session = run_session(rater, &id, &config).map_err(|e| CliError::new("session_failed", e.to_string()))?;
    let objectives: Vec<ObjectiveVector> = session.history().iter().map(|o| o.objectives).collect();
    let baseline = random_search(rater, config.total_iterations, seed, &config.scales);
    let base_obj: Vec<ObjectiveVector> = baseline.iter().map(|b| b.objectives).collect();

    let mut baseline_log = String::new();
    for b in &baseline {
        baseline_log.push_str(&serde_json::to_string(b).expect("baseline samples serialize"));
        baseline_log.push('\n');
    }
    let outcome = RaterOutcome {
        rater: index,
        seed,
        iterations: session.iteration(),
        stopped_early: session.stopped_early(),
        mobo_trace: carry_forward(hypervolume_trace(&objectives), config.total_iterations),
        random_trace: hypervolume_trace(&base_obj),
    };
    Ok((outcome, session.export_jsonl(), baseline_log))
}

/// Runs the study in memory, one rater per seed.
pub fn run_study(
    population: &RaterPopulation,
    seeds: &[u64],
    config: &SessionConfig,
    mut on_rater: impl FnMut(&RaterOutcome, &str, &str) -> Result<(), CliError>,
) -> Result<StudySummary, CliError> {
    config.validate().map_err(|e| CliError::new("config_invalid", e.to_string()))?;
    let mut outcomes = Vec::with_capacity(seeds.len());
    for (index, &seed) in seeds.iter().enumerate() {
        let rater = population.rater(seed);
        let (outcome, mobo_log, random_log) = run_rater(&rater, index + 1, seed, config)?;
        on_rater(&outcome, &mobo_log, &random_log)?;
        outcomes.push(outcome);
    }
    Ok(StudySummary { outcomes })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::new("io", format!("{}: {e}", path.display()))
}

/// Runs the study and writes `mobo/rater-XX.jsonl`, `random/rater-XX.jsonl`
/// and `hypervolume.csv` under `out`.
pub fn simulate_to_dir(
    population: &RaterPopulation,
    seeds: &[u64],
    config: &SessionConfig,
    out: &Path,
    mut progress: impl std::io::Write,
) -> Result<StudySummary, CliError> {
    let dirs: [PathBuf; 2] = [out.join("mobo"), out.join("random")];
    for d in &dirs {
        fs::create_dir_all(d).map_err(io_err(d))?;
    }
    let summary = run_study(population, seeds, config, |o, mobo_log, random_log| {
        let name = format!("rater-{:02}.jsonl", o.rater);
        for (dir, body) in dirs.iter().zip([mobo_log, random_log]) {
            let path = dir.join(&name);
            fs::write(&path, body).map_err(io_err(&path))?;
        }
        let _ = writeln!(
            progress,
            "rater {:>2} seed {:>4}: mobo {:>9.4} ({:>2} it{}) random {:>9.4}",
            o.rater,
            o.seed,
            o.mobo_final(),
            o.iterations,
            if o.stopped_early { ", stopped" } else { "" },
            o.random_final()
        );
        Ok(())
    })?;
    let csv = out.join("hypervolume.csv");
    fs::write(&csv, summary.hypervolume_csv()).map_err(io_err(&csv))?;
    Ok(summary)
}
