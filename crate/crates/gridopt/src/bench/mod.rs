//! Benchmark suites over (case x formulation x start x solver options) and
//! Dolan-More performance profiles of the recorded statistics.

mod emit;
mod profile;

pub use emit::{emit_profile_csv, emit_profile_svg, emit_records, read_records};
pub use profile::{compute_profile, Metric, ProfileCurve};

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Deserialize;
use thiserror::Error;

use crate::grid::build_network;
use crate::ipm::{solve_opf, MuRule, SolveOptions, SolveStatus};
use crate::mpc::CaseData;
use crate::opf::{Formulation, Start};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("suite spec: {0}")]
    SuiteSpec(String),
    #[error("empty record set")]
    EmptyRecordSet,
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("duplicate record for solver `{0}` on problem `{1}`")]
    DuplicateRecord(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
}

/// One benchmark observation: solver m on problem s.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub solver_id: String,
    pub problem_id: String,
    pub success: bool,
    pub time_s: f64,
    pub iters: usize,
    pub memory_bytes: usize,
    pub objective: Option<f64>,
}

/// Solver configuration row of a suite description.
#[derive(Debug, Clone, Deserialize)]
pub struct SolverSpec {
    pub id: String,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// "sigma" (scaled complementarity) or "fm" (monotone Fiacco-McCormick).
    #[serde(default = "default_mu_rule")]
    pub mu_rule: String,
    #[serde(default = "default_true")]
    pub step_control: bool,
    #[serde(default)]
    pub mu0: Option<f64>,
}

fn default_tol() -> f64 {
    1e-4
}

fn default_max_iter() -> usize {
    500
}

fn default_mu_rule() -> String {
    "sigma".into()
}

fn default_true() -> bool {
    true
}

fn default_formulations() -> Vec<String> {
    Formulation::ALL.iter().map(|f| f.to_string()).collect()
}

fn default_starts() -> Vec<String> {
    vec!["mpc".into()]
}

/// Suite description, usually loaded from a TOML document.
#[derive(Debug, Clone, Deserialize)]
pub struct SuiteSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub cases: Vec<PathBuf>,
    #[serde(default = "default_formulations")]
    pub formulations: Vec<String>,
    #[serde(default = "default_starts")]
    pub starts: Vec<String>,
    /// Per-run wall-clock limit in seconds; absent = none.
    #[serde(default)]
    pub time_limit: Option<f64>,
    pub solvers: Vec<SolverSpec>,
}

impl SuiteSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<SuiteSpec, BenchError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let spec: SuiteSpec =
            toml::from_str(&text).map_err(|e| BenchError::SuiteSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.cases.is_empty() {
            return Err(BenchError::SuiteSpec("no cases listed".into()));
        }
        if self.solvers.is_empty() {
            return Err(BenchError::SuiteSpec("no solvers listed".into()));
        }
        for path in &self.cases {
            if !path.exists() {
                return Err(BenchError::SuiteSpec(format!(
                    "unknown case path `{}`",
                    path.display()
                )));
            }
        }
        for f in &self.formulations {
            f.parse::<Formulation>()
                .map_err(BenchError::SuiteSpec)?;
        }
        for s in &self.starts {
            s.parse::<Start>().map_err(BenchError::SuiteSpec)?;
        }
        for solver in &self.solvers {
            solver_options(solver)?;
        }
        Ok(())
    }
}

fn solver_options(spec: &SolverSpec) -> Result<SolveOptions, BenchError> {
    let mu_rule = match spec.mu_rule.as_str() {
        "sigma" => MuRule::ScaledComplementarity { sigma: 0.1 },
        "fm" => MuRule::MonotoneFM { kappa: 0.2, theta: 1.5 },
        other => {
            return Err(BenchError::SuiteSpec(format!(
                "solver `{}`: unknown mu rule `{other}`",
                spec.id
            )))
        }
    };
    Ok(SolveOptions {
        tol: spec.tol,
        max_iter: spec.max_iter,
        mu_rule,
        step_control: spec.step_control,
        mu0: spec.mu0,
        ..SolveOptions::default()
    })
}

struct Task {
    solver_idx: usize,
    case_idx: usize,
    formulation: Formulation,
    start: Start,
}

/// Executes every (solver x case x formulation x start) combination.
/// Individual run failures are captured as unsuccessful records; only a
/// malformed suite aborts. Records come back canonically sorted by
/// (solver_id, problem_id).
pub fn run_suite(spec: &SuiteSpec, jobs: usize) -> Result<Vec<RunRecord>, BenchError> {
    spec.validate()?;
    let cases: Vec<(String, CaseData)> = spec
        .cases
        .iter()
        .map(|path| {
            let case = CaseData::read(path)
                .map_err(|e| BenchError::SuiteSpec(format!("{}: {e}", path.display())))?;
            Ok((case.name.clone(), case))
        })
        .collect::<Result<_, BenchError>>()?;
    let formulations: Vec<Formulation> =
        spec.formulations.iter().map(|f| f.parse().unwrap()).collect();
    let starts: Vec<Start> = spec.starts.iter().map(|s| s.parse().unwrap()).collect();
    let options: Vec<SolveOptions> = spec
        .solvers
        .iter()
        .map(|s| {
            let mut o = solver_options(s).unwrap();
            if o.time_limit.is_none() {
                o.time_limit = spec.time_limit;
            }
            Ok(o)
        })
        .collect::<Result<_, BenchError>>()?;

    let mut tasks = Vec::new();
    for solver_idx in 0..spec.solvers.len() {
        for case_idx in 0..cases.len() {
            for &formulation in &formulations {
                for &start in &starts {
                    tasks.push(Task { solver_idx, case_idx, formulation, start });
                }
            }
        }
    }

    let next = AtomicUsize::new(0);
    let records: Mutex<Vec<RunRecord>> = Mutex::new(Vec::with_capacity(tasks.len()));
    let workers = jobs.max(1).min(tasks.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = tasks.get(i) else { break };
                let record = run_one(
                    &spec.solvers[task.solver_idx].id,
                    &cases[task.case_idx].0,
                    &cases[task.case_idx].1,
                    task.formulation,
                    task.start,
                    &options[task.solver_idx],
                );
                records.lock().unwrap().push(record);
            });
        }
    });

    let mut records = records.into_inner().unwrap();
    records.sort_by(|a, b| {
        (a.solver_id.as_str(), a.problem_id.as_str()).cmp(&(b.solver_id.as_str(), b.problem_id.as_str()))
    });
    Ok(records)
}

fn run_one(
    solver_id: &str,
    case_name: &str,
    case: &CaseData,
    formulation: Formulation,
    start: Start,
    opts: &SolveOptions,
) -> RunRecord {
    let problem_id = format!("{case_name}:{formulation}:{start}");
    let clock = std::time::Instant::now();
    let outcome = build_network(case)
        .map_err(|e| e.to_string())
        .and_then(|net| solve_opf(&net, formulation, start, opts).map_err(|e| e.to_string()));
    match outcome {
        Ok(res) => RunRecord {
            solver_id: solver_id.to_string(),
            problem_id,
            success: res.status == SolveStatus::Optimal,
            time_s: res.wall_time,
            iters: res.iterations,
            memory_bytes: res.peak_mem,
            objective: (res.status == SolveStatus::Optimal).then_some(res.f),
        },
        Err(_) => RunRecord {
            solver_id: solver_id.to_string(),
            problem_id,
            success: false,
            time_s: clock.elapsed().as_secs_f64(),
            iters: 0,
            memory_bytes: 0,
            objective: None,
        },
    }
}
