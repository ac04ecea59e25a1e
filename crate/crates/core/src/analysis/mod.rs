//! Post-hoc statistics over study records: group comparisons by Bayes
//! factor, parameter IQRs, objective correlations and Pareto counts.

pub mod bayes;
pub mod dataset;
pub mod quad;
pub mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bayes::{bayes_factor_ttest, categorize_bf, BayesFactorResult, EvidenceLabel, DEFAULT_CAUCHY_SCALE};
pub use dataset::{
    ingest_csv, ingest_dataset, pareto_counts_by_group, pareto_flags, records_from_session, write_csv, Dataset,
    DatasetError, ObjectiveSpace, RowIssue, SchemaMapping, StudyRecord,
};
pub use stats::{correlation_matrix, holm_adjust, iqr, pearson, quantile_type7, CorrelationMatrix};

use crate::design::{N_PARAMS, PARAM_NAMES};
use crate::objectives::{Objective, N_OBJECTIVES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sample {sample} has {len} values, need more")]
    TooFewSamples { sample: &'static str, len: usize },
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("zero pooled variance")]
    DegenerateSample,
    #[error("column {0} is constant")]
    DegenerateColumn(usize),
    #[error("group {0:?} has no records")]
    EmptyGroup(String),
    #[error("{0}")]
    InvalidInput(String),
}

/// Picks the two groups to compare. `female`/`male` (any case) are used
/// when both are present, so other labels are left out; otherwise exactly
/// two distinct labels are required.
pub fn comparison_groups(records: &[StudyRecord]) -> Result<(String, String), StatsError> {
    let mut labels: Vec<&str> = records.iter().map(|r| r.group.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    let find = |want: &str| labels.iter().find(|l| l.eq_ignore_ascii_case(want)).map(|s| s.to_string());
    if let (Some(f), Some(m)) = (find("female"), find("male")) {
        return Ok((f, m));
    }
    match labels.as_slice() {
        [a, b] => Ok((a.to_string(), b.to_string())),
        _ => Err(StatsError::InvalidInput(format!(
            "need exactly two groups to compare, found {labels:?}"
        ))),
    }
}

fn group<'a>(records: &'a [StudyRecord], label: &'a str) -> impl Iterator<Item = &'a StudyRecord> + 'a {
    records.iter().filter(move |r| r.group == label)
}

/// Per-parameter `(q1, q3)` of one group.
pub fn parameter_iqr(records: &[StudyRecord], label: &str) -> Result<[(f64, f64); N_PARAMS], StatsError> {
    let rows: Vec<&StudyRecord> = group(records, label).collect();
    if rows.is_empty() {
        return Err(StatsError::EmptyGroup(label.to_string()));
    }
    Ok(std::array::from_fn(|d| {
        let col: Vec<f64> = rows.iter().map(|r| r.params.as_array()[d]).collect();
        iqr(&col).expect("non-empty column")
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    /// `None` when both groups are constant in this column.
    pub bf: Option<BayesFactorResult>,
    pub iqr_a: (f64, f64),
    pub iqr_b: (f64, f64),
    pub mean_a: f64,
    pub mean_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub rows: Vec<ComparisonRow>,
}

fn compare(
    records: &[StudyRecord],
    a: &str,
    b: &str,
    names: &[&str],
    value: impl Fn(&StudyRecord, usize) -> f64,
) -> Result<GroupComparison, StatsError> {
    let xa: Vec<&StudyRecord> = group(records, a).collect();
    let xb: Vec<&StudyRecord> = group(records, b).collect();
    for (label, rows) in [(a, &xa), (b, &xb)] {
        if rows.is_empty() {
            return Err(StatsError::EmptyGroup(label.to_string()));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut rows = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let ca: Vec<f64> = xa.iter().map(|r| value(r, k)).collect();
        let cb: Vec<f64> = xb.iter().map(|r| value(r, k)).collect();
        rows.push(ComparisonRow {
            name: name.to_string(),
            bf: match bayes_factor_ttest(&ca, &cb, DEFAULT_CAUCHY_SCALE) {
                Ok(bf) => Some(bf),
                Err(StatsError::DegenerateSample) => None,
                Err(e) => return Err(e),
            },
            iqr_a: iqr(&ca).expect("non-empty"),
            iqr_b: iqr(&cb).expect("non-empty"),
            mean_a: mean(&ca),
            mean_b: mean(&cb),
        });
    }
    Ok(GroupComparison {
        group_a: a.to_string(),
        group_b: b.to_string(),
        n_a: xa.len(),
        n_b: xb.len(),
        rows,
    })
}

/// Bayes factor and IQR for each design parameter between two groups.
pub fn compare_parameters(records: &[StudyRecord], a: &str, b: &str) -> Result<GroupComparison, StatsError> {
    compare(records, a, b, &PARAM_NAMES, |r, d| r.params.as_array()[d])
}

/// Bayes factor for each raw objective between two groups.
pub fn compare_objectives(records: &[StudyRecord], a: &str, b: &str) -> Result<GroupComparison, StatsError> {
    let names: Vec<&str> = Objective::ALL.iter().map(|o| o.name()).collect();
    compare(records, a, b, &names, |r, k| r.raw.0[k])
}

/// Correlations of the seven raw objectives.
pub fn objective_correlations(records: &[StudyRecord]) -> Result<CorrelationMatrix, StatsError> {
    let names: Vec<&str> = Objective::ALL.iter().map(|o| o.name()).collect();
    let columns: Vec<Vec<f64>> = (0..N_OBJECTIVES)
        .map(|k| records.iter().map(|r| r.raw.0[k]).collect())
        .collect();
    correlation_matrix(&names, &columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DesignParams;
    use crate::objectives::{ObjectiveVector, RawObjectives};
    use crate::session::Phase;

    fn rec(participant: &str, group: &str, iteration: usize, p: f64, trust: f64) -> StudyRecord {
        let mut params = [0.5; 9];
        params[2] = p;
        params[0] = iteration as f64 / 20.0;
        StudyRecord {
            participant: participant.into(),
            group: group.into(),
            iteration,
            phase: Phase::Optimization,
            params: DesignParams::new(&params).unwrap(),
            raw: RawObjectives([trust, trust, 5.0 + trust, 1.0, 4.0 + 0.1 * iteration as f64, 4.0, 10.0 - trust]),
            normalized: ObjectiveVector::from_array([0.0; 7]),
        }
    }

    #[test]
    fn groups_prefer_female_male() {
        let rs = vec![rec("a", "Female", 1, 0.1, 1.0), rec("b", "male", 1, 0.1, 1.0), rec("c", "diverse", 1, 0.1, 1.0)];
        assert_eq!(comparison_groups(&rs).unwrap(), ("Female".into(), "male".into()));
        let rs = vec![rec("a", "x", 1, 0.1, 1.0), rec("b", "y", 1, 0.1, 1.0)];
        assert_eq!(comparison_groups(&rs).unwrap(), ("x".into(), "y".into()));
        assert!(comparison_groups(&rs[..1]).is_err());
    }

    #[test]
    fn iqr_per_group() {
        let rs: Vec<StudyRecord> = (0..4).map(|i| rec("a", "f", i + 1, i as f64 / 3.0, 2.0)).collect();
        let q = parameter_iqr(&rs, "f").unwrap();
        assert!((q[2].0 - 0.25).abs() < 1e-12 && (q[2].1 - 0.75).abs() < 1e-12);
        assert_eq!(q[4], (0.5, 0.5));
        assert_eq!(parameter_iqr(&rs, "m"), Err(StatsError::EmptyGroup("m".into())));
    }

    #[test]
    fn parameter_comparison_detects_shift() {
        let mut rs = Vec::new();
        for i in 0..30 {
            let jitter = (i % 7) as f64 * 0.01;
            rs.push(rec(&format!("f{i}"), "female", 1 + i % 20, 0.2 + jitter, 2.0));
            rs.push(rec(&format!("m{i}"), "male", 1 + i % 20, 0.8 + jitter, 2.0));
        }
        let cmp = compare_parameters(&rs, "female", "male").unwrap();
        assert_eq!(cmp.rows.len(), 9);
        assert!(cmp.rows[2].bf.unwrap().bf10 > 100.0);
        // p1 is the same iteration ramp in both groups
        assert!(cmp.rows[0].bf.unwrap().bf10 < 1.0);
        // p5 is constant in both groups
        assert!(cmp.rows[4].bf.is_none());
        assert!(compare_parameters(&rs[..0], "female", "male").is_err());
    }

    #[test]
    fn objective_correlation_signs() {
        let rs: Vec<StudyRecord> = (0..10).map(|i| rec("a", "f", i + 1, 0.3, 1.0 + (i % 5) as f64)).collect();
        let m = objective_correlations(&rs);
        // perceived safety is constant
        assert_eq!(m, Err(StatsError::DegenerateColumn(3)));
    }
}
