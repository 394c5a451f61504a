//! Performance profiles: p_m(alpha) = fraction of problems solver m
//! finishes within alpha times the best recorded statistic.

use std::collections::BTreeMap;
use std::str::FromStr;

use super::{BenchError, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Time,
    Iters,
    Memory,
}

impl Metric {
    pub fn value(&self, record: &RunRecord) -> f64 {
        match self {
            Metric::Time => record.time_s,
            Metric::Iters => record.iters as f64,
            Metric::Memory => record.memory_bytes as f64,
        }
    }

    /// Default log-spaced alpha grid for this statistic.
    pub fn default_alphas(&self) -> Vec<f64> {
        let hi: f64 = match self {
            Metric::Time | Metric::Memory => 10.0,
            Metric::Iters => 8.0,
        };
        log_grid(1.0, hi, 200)
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Time => "time",
            Metric::Iters => "iters",
            Metric::Memory => "memory",
        })
    }
}

impl FromStr for Metric {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "time" => Ok(Metric::Time),
            "iters" => Ok(Metric::Iters),
            "memory" => Ok(Metric::Memory),
            other => Err(BenchError::UnknownMetric(other.to_string())),
        }
    }
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && points >= 2);
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// One solver's profile curve over the alpha grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub solver_id: String,
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
}

/// Computes p_m(alpha) for every solver present in the records. Failed
/// runs count as +infinity; a problem failed by every solver still counts
/// in the denominator. A zero statistic is lifted to the smallest positive
/// value so the ratio stays defined.
pub fn compute_profile(
    records: &[RunRecord],
    metric: Metric,
    alphas: &[f64],
) -> Result<Vec<ProfileCurve>, BenchError> {
    if records.is_empty() {
        return Err(BenchError::EmptyRecordSet);
    }
    let mut theta: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    let mut problems: Vec<&str> = Vec::new();
    let mut solvers: Vec<&str> = Vec::new();
    for r in records {
        let key = (r.solver_id.as_str(), r.problem_id.as_str());
        let value = if r.success {
            metric.value(r).max(f64::MIN_POSITIVE)
        } else {
            f64::INFINITY
        };
        if theta.insert(key, value).is_some() {
            return Err(BenchError::DuplicateRecord(
                r.solver_id.clone(),
                r.problem_id.clone(),
            ));
        }
        problems.push(&r.problem_id);
        solvers.push(&r.solver_id);
    }
    problems.sort_unstable();
    problems.dedup();
    solvers.sort_unstable();
    solvers.dedup();

    // best statistic per problem over successful runs
    let best: BTreeMap<&str, f64> = problems
        .iter()
        .map(|&s| {
            let b = solvers
                .iter()
                .filter_map(|&m| theta.get(&(m, s)).copied())
                .fold(f64::INFINITY, f64::min);
            (s, b)
        })
        .collect();

    let n_problems = problems.len() as f64;
    let curves = solvers
        .iter()
        .map(|&m| {
            let values = alphas
                .iter()
                .map(|&alpha| {
                    let wins = problems
                        .iter()
                        .filter(|&&s| {
                            let t = theta.get(&(m, s)).copied().unwrap_or(f64::INFINITY);
                            t.is_finite() && t <= alpha * best[s]
                        })
                        .count();
                    wins as f64 / n_problems
                })
                .collect();
            ProfileCurve {
                solver_id: m.to_string(),
                alphas: alphas.to_vec(),
                values,
            }
        })
        .collect();
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(m: &str, s: &str, time: f64) -> RunRecord {
        RunRecord {
            solver_id: m.into(),
            problem_id: s.into(),
            success: time.is_finite(),
            time_s: if time.is_finite() { time } else { 0.0 },
            iters: 1,
            memory_bytes: 1,
            objective: time.is_finite().then_some(1.0),
        }
    }

    /// The derived 2-solver / 3-problem oracle matrix.
    fn oracle_records() -> Vec<RunRecord> {
        vec![
            record("m1", "s1", 2.0),
            record("m2", "s1", 4.0),
            record("m1", "s2", 1.0),
            record("m2", "s2", 8.0),
            record("m1", "s3", f64::INFINITY),
            record("m2", "s3", 3.0),
        ]
    }

    /// Brute-force enumeration of the defining indicator sum.
    fn brute_force(records: &[RunRecord], metric: Metric, alpha: f64, solver: &str) -> f64 {
        let mut problems: Vec<&str> = records.iter().map(|r| r.problem_id.as_str()).collect();
        problems.sort_unstable();
        problems.dedup();
        let mut hits = 0usize;
        for &s in &problems {
            let best = records
                .iter()
                .filter(|r| r.problem_id == s && r.success)
                .map(|r| metric.value(r).max(f64::MIN_POSITIVE))
                .fold(f64::INFINITY, f64::min);
            let mine = records
                .iter()
                .find(|r| r.problem_id == s && r.solver_id == solver)
                .filter(|r| r.success)
                .map(|r| metric.value(r).max(f64::MIN_POSITIVE));
            if let Some(t) = mine {
                if t <= alpha * best {
                    hits += 1;
                }
            }
        }
        hits as f64 / problems.len() as f64
    }

    #[test]
    fn oracle_matrix_values() {
        let records = oracle_records();
        let alphas = [1.0, 2.0, 8.0];
        let curves = compute_profile(&records, Metric::Time, &alphas).unwrap();
        let m1 = curves.iter().find(|c| c.solver_id == "m1").unwrap();
        let m2 = curves.iter().find(|c| c.solver_id == "m2").unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
        assert!(close(m1.values[0], 2.0 / 3.0));
        assert!(close(m2.values[0], 1.0 / 3.0));
        assert!(close(m1.values[1], 2.0 / 3.0));
        assert!(close(m2.values[1], 2.0 / 3.0));
        assert!(close(m2.values[2], 1.0));
        // cross-check every point against the enumeration oracle
        for curve in &curves {
            for (&alpha, &p) in curve.alphas.iter().zip(&curve.values) {
                assert!(close(p, brute_force(&records, Metric::Time, alpha, &curve.solver_id)));
            }
        }
    }

    #[test]
    fn single_solver_all_success_is_one() {
        let records = vec![record("m", "a", 3.0), record("m", "b", 5.0)];
        let curves = compute_profile(&records, Metric::Time, &[1.0, 2.0, 100.0]).unwrap();
        assert!(curves[0].values.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn all_failures_floor_at_zero() {
        let records = vec![
            record("good", "a", 1.0),
            record("bad", "a", f64::INFINITY),
            record("good", "b", 1.0),
            record("bad", "b", f64::INFINITY),
        ];
        let curves = compute_profile(&records, Metric::Time, &[1.0, 1e6]).unwrap();
        let bad = curves.iter().find(|c| c.solver_id == "bad").unwrap();
        assert!(bad.values.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn zero_statistic_lifted() {
        let mut records = vec![record("m1", "a", 0.0), record("m2", "a", 1.0)];
        records[0].time_s = 0.0;
        let curves = compute_profile(&records, Metric::Time, &[1.0]).unwrap();
        let m1 = curves.iter().find(|c| c.solver_id == "m1").unwrap();
        assert_eq!(m1.values[0], 1.0);
    }

    #[test]
    fn duplicate_pair_rejected() {
        let records = vec![record("m", "a", 1.0), record("m", "a", 2.0)];
        assert!(matches!(
            compute_profile(&records, Metric::Time, &[1.0]),
            Err(BenchError::DuplicateRecord(_, _))
        ));
    }

    #[test]
    fn empty_records_rejected() {
        assert!(matches!(
            compute_profile(&[], Metric::Time, &[1.0]),
            Err(BenchError::EmptyRecordSet)
        ));
    }

    #[test]
    fn metric_labels_round_trip() {
        for m in [Metric::Time, Metric::Iters, Metric::Memory] {
            assert_eq!(m.to_string().parse::<Metric>().unwrap(), m);
        }
        assert!(matches!(
            "wat".parse::<Metric>(),
            Err(BenchError::UnknownMetric(_))
        ));
    }

    #[test]
    fn default_grids_span_paper_axes() {
        let t = Metric::Time.default_alphas();
        assert_eq!(t.len(), 200);
        assert!((t[0] - 1.0).abs() < 1e-12);
        assert!((t[199] - 10.0).abs() < 1e-9);
        let i = Metric::Iters.default_alphas();
        assert!((i[199] - 8.0).abs() < 1e-9);
    }
}
