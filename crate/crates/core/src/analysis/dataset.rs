//! Study records: CSV ingestion with a column-mapping schema, CSV export,
//! and conversion from finished sessions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{DesignParams, N_PARAMS};
use crate::objectives::{denormalize, Objective, ObjectiveScales, ObjectiveVector, RawObjectives, N_OBJECTIVES};
use crate::session::{Phase, Session};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub participant: String,
    pub group: String,
    /// 1-based.
    pub iteration: usize,
    pub phase: Phase,
    pub params: DesignParams,
    pub raw: RawObjectives,
    pub normalized: ObjectiveVector,
}

/// A data row that was read but rejected, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowIssue {
    /// 1-based line number in the file, header included.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<StudyRecord>,
    pub issues: Vec<RowIssue>,
}

impl Dataset {
    pub fn participants(&self) -> usize {
        self.records.iter().map(|r| &r.participant).collect::<HashSet<_>>().len()
    }
}

/// Canonical column names, in export order.
pub fn canonical_header() -> Vec<String> {
    let mut h: Vec<String> = ["participant", "group", "iteration", "phase"].map(String::from).to_vec();
    h.extend((1..=N_PARAMS).map(|i| format!("p{i}")));
    h.extend(Objective::ALL.iter().map(|o| format!("{}_raw", o.name())));
    h.extend(Objective::ALL.iter().map(|o| o.name().to_string()));
    h
}

/// Maps canonical column names onto a file's own header. Unmapped columns
/// are looked up under their canonical name. Either the raw or the
/// normalized objective block may be absent; it is then derived through
/// `scales`. A missing phase column is derived from `n_sobol`, a missing
/// group column yields an empty label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaMapping {
    pub columns: HashMap<String, String>,
    pub scales: ObjectiveScales,
    pub n_sobol: usize,
    /// Labels recognized as the sampling phase (case-insensitive).
    pub sampling_labels: Vec<String>,
}

impl Default for SchemaMapping {
    fn default() -> Self {
        Self {
            columns: HashMap::new(),
            scales: ObjectiveScales::default(),
            n_sobol: 5,
            sampling_labels: vec!["sampling".into()],
        }
    }
}

impl SchemaMapping {
    pub fn from_toml(text: &str) -> Result<Self, DatasetError> {
        toml::from_str(text).map_err(|e| DatasetError::Schema(e.to_string()))
    }

    fn source<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.columns.get(canonical).map_or(canonical, String::as_str)
    }
}

struct Layout {
    participant: usize,
    group: Option<usize>,
    iteration: usize,
    phase: Option<usize>,
    params: [usize; N_PARAMS],
    raw: Option<[usize; N_OBJECTIVES]>,
    normalized: Option<[usize; N_OBJECTIVES]>,
}

fn layout(header: &csv::StringRecord, mapping: &SchemaMapping) -> Result<Layout, DatasetError> {
    let index: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let find = |canonical: &str| index.get(mapping.source(canonical)).copied();
    let need = |canonical: &str| {
        find(canonical).ok_or_else(|| {
            DatasetError::Schema(format!("missing column {:?} (for {canonical})", mapping.source(canonical)))
        })
    };
    let block = |suffix: &str| -> Option<[usize; N_OBJECTIVES]> {
        let cols: Vec<usize> = Objective::ALL
            .iter()
            .filter_map(|o| find(&format!("{}{suffix}", o.name())))
            .collect();
        cols.try_into().ok()
    };
    let mut params = [0; N_PARAMS];
    for (i, slot) in params.iter_mut().enumerate() {
        *slot = need(&format!("p{}", i + 1))?;
    }
    let raw = block("_raw");
    let normalized = block("");
    if raw.is_none() && normalized.is_none() {
        return Err(DatasetError::Schema(
            "need a complete raw or normalized objective block".into(),
        ));
    }
    Ok(Layout {
        participant: need("participant")?,
        group: find("group"),
        iteration: need("iteration")?,
        phase: find("phase"),
        params,
        raw,
        normalized,
    })
}

fn number(rec: &csv::StringRecord, col: usize, line: usize, header: &csv::StringRecord) -> Result<f64, DatasetError> {
    let text = rec.get(col).unwrap_or("").trim();
    text.parse::<f64>().map_err(|_| DatasetError::Parse {
        line,
        message: format!("column {:?}: {text:?} is not a number", &header[col]),
    })
}

/// Reads records. Rows violating parameter or objective bounds, or repeating
/// a (participant, iteration) pair, are reported in [`Dataset::issues`] and
/// left out of [`Dataset::records`].
pub fn ingest_csv<R: Read>(reader: R, mapping: &SchemaMapping) -> Result<Dataset, DatasetError> {
    mapping.scales.validate().map_err(|e| DatasetError::Schema(e.to_string()))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| DatasetError::Parse { line: 1, message: e.to_string() })?
        .clone();
    if header.is_empty() || header.iter().all(|h| h.trim().is_empty()) {
        return Err(DatasetError::Schema("empty file or header".into()));
    }
    let lay = layout(&header, mapping)?;
    let sampling: Vec<String> = mapping.sampling_labels.iter().map(|s| s.to_lowercase()).collect();

    let mut out = Dataset::default();
    let mut seen = HashSet::new();
    for (k, row) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = row.map_err(|e| DatasetError::Parse { line, message: e.to_string() })?;
        let participant = rec.get(lay.participant).unwrap_or("").trim().to_string();
        let group = lay.group.map(|c| rec.get(c).unwrap_or("").trim().to_string()).unwrap_or_default();
        let it = number(&rec, lay.iteration, line, &header)?;
        if it.fract() != 0.0 || it < 1.0 {
            out.issues.push(RowIssue { line, message: format!("iteration {it} is not a positive integer") });
            continue;
        }
        let iteration = it as usize;
        let phase = match lay.phase {
            Some(c) => {
                let label = rec.get(c).unwrap_or("").trim().to_lowercase();
                if sampling.contains(&label) { Phase::Sampling } else { Phase::Optimization }
            }
            None if iteration <= mapping.n_sobol => Phase::Sampling,
            None => Phase::Optimization,
        };

        let mut p = [0.0; N_PARAMS];
        for (d, &c) in lay.params.iter().enumerate() {
            p[d] = number(&rec, c, line, &header)?;
        }
        let params = match DesignParams::new(&p) {
            Ok(v) => v,
            Err(e) => {
                out.issues.push(RowIssue { line, message: e.to_string() });
                continue;
            }
        };

        let read_block = |cols: &[usize; N_OBJECTIVES]| -> Result<[f64; N_OBJECTIVES], DatasetError> {
            let mut v = [0.0; N_OBJECTIVES];
            for (i, &c) in cols.iter().enumerate() {
                v[i] = number(&rec, c, line, &header)?;
            }
            Ok(v)
        };
        let raw_vals = lay.raw.as_ref().map(read_block).transpose()?;
        let norm_vals = lay.normalized.as_ref().map(read_block).transpose()?;

        let raw = match raw_vals {
            Some(v) => v,
            None => {
                let n = norm_vals.expect("layout has one block");
                std::array::from_fn(|i| denormalize(n[i], mapping.scales.get(Objective::ALL[i])))
            }
        };
        if let Some(msg) = raw_violation(&raw, &mapping.scales) {
            out.issues.push(RowIssue { line, message: msg });
            continue;
        }
        let normalized = match norm_vals {
            Some(v) => ObjectiveVector::from_array(v),
            None => mapping.scales.normalize(&RawObjectives(raw)),
        };
        if !normalized.is_in_bounds() {
            out.issues.push(RowIssue { line, message: "normalized objective outside [-1, 1]".into() });
            continue;
        }
        if !seen.insert((participant.clone(), iteration)) {
            out.issues.push(RowIssue {
                line,
                message: format!("duplicate (participant {participant:?}, iteration {iteration})"),
            });
            continue;
        }
        out.records.push(StudyRecord {
            participant,
            group,
            iteration,
            phase,
            params,
            raw: RawObjectives(raw),
            normalized,
        });
    }
    Ok(out)
}

/// Subjective objectives must lie on their scale. The crossing time is a
/// measurement: any finite non-negative value is accepted and clamped only
/// during normalization.
fn raw_violation(raw: &[f64; N_OBJECTIVES], scales: &ObjectiveScales) -> Option<String> {
    for o in Objective::ALL {
        let v = raw[o.index()];
        let s = scales.get(o);
        let ok = match o {
            Objective::TimeToCross => v.is_finite() && v >= 0.0,
            _ => v.is_finite() && v >= s.lo && v <= s.hi,
        };
        if !ok {
            return Some(format!("{} = {v} outside [{}, {}]", o.name(), s.lo, s.hi));
        }
    }
    None
}

pub fn ingest_dataset(path: &Path, mapping: &SchemaMapping) -> Result<Dataset, DatasetError> {
    ingest_csv(std::fs::File::open(path)?, mapping)
}

pub fn write_csv<W: Write>(records: &[StudyRecord], writer: W) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| DatasetError::Io(e.into());
    w.write_record(canonical_header()).map_err(io)?;
    for r in records {
        let mut row = vec![
            r.participant.clone(),
            r.group.clone(),
            r.iteration.to_string(),
            match r.phase {
                Phase::Sampling => "sampling",
                _ => "optimization",
            }
            .to_string(),
        ];
        row.extend(r.params.as_array().iter().map(|v| v.to_string()));
        row.extend(r.raw.0.iter().map(|v| v.to_string()));
        row.extend(r.normalized.to_array().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_from_session(session: &Session, participant: &str, group: &str) -> Vec<StudyRecord> {
    session
        .history()
        .iter()
        .map(|o| StudyRecord {
            participant: participant.to_string(),
            group: group.to_string(),
            iteration: o.issued.iteration,
            phase: o.issued.phase,
            params: o.issued.design,
            raw: o.raw,
            normalized: o.objectives,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveSpace {
    /// Raw values, sign-flipped where smaller is better. Crossing times are
    /// not clamped.
    Raw,
    Normalized,
}

fn oriented(r: &StudyRecord, space: ObjectiveSpace, scales: &ObjectiveScales) -> [f64; N_OBJECTIVES] {
    match space {
        ObjectiveSpace::Normalized => r.normalized.to_array(),
        ObjectiveSpace::Raw => std::array::from_fn(|i| {
            let o = Objective::ALL[i];
            match scales.get(o).direction {
                crate::objectives::Direction::Maximize => r.raw.0[i],
                crate::objectives::Direction::Minimize => -r.raw.0[i],
            }
        }),
    }
}

/// Marks each record that is Pareto-optimal among its participant's records.
/// Records are taken in iteration order, so among duplicates the earliest
/// iteration is the one kept.
pub fn pareto_flags(records: &[StudyRecord], space: ObjectiveSpace, scales: &ObjectiveScales) -> Vec<bool> {
    let mut by_participant: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_participant.entry(&r.participant).or_default().push(i);
    }
    let mut flags = vec![false; records.len()];
    for mut idx in by_participant.into_values() {
        idx.sort_by_key(|&i| records[i].iteration);
        let pts: Vec<[f64; N_OBJECTIVES]> = idx.iter().map(|&i| oriented(&records[i], space, scales)).collect();
        for k in crate::pareto::nondominated_indices(&pts) {
            flags[idx[k]] = true;
        }
    }
    flags
}

/// Number of per-participant Pareto designs, pooled by group label.
pub fn pareto_counts_by_group(
    records: &[StudyRecord],
    space: ObjectiveSpace,
    scales: &ObjectiveScales,
) -> BTreeMap<String, usize> {
    let flags = pareto_flags(records, space, scales);
    let mut out = BTreeMap::new();
    for (r, f) in records.iter().zip(flags) {
        let c = out.entry(r.group.clone()).or_insert(0);
        if f {
            *c += 1;
        }
    }
    out
}
