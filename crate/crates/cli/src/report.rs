//! The `analyze` command: Pareto counts, group comparisons and correlations
//! over a study dataset.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mobo_core::analysis::{
    compare_objectives, compare_parameters, comparison_groups, ingest_dataset, objective_correlations,
    pareto_counts_by_group, pareto_flags, write_csv, CorrelationMatrix, Dataset, GroupComparison, ObjectiveSpace,
    SchemaMapping, StudyRecord,
};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub data: PathBuf,
    pub schema: Option<PathBuf>,
    /// Restrict the group comparisons to per-participant Pareto designs.
    /// Correlations always use every record.
    pub pareto_only: bool,
    /// Column holding the group label, if not `group`.
    pub group_col: Option<String>,
    /// Space used to pick Pareto designs for `pareto_only`.
    pub space: ObjectiveSpace,
    /// Writes the tables as CSV files here.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub records: usize,
    pub participants: usize,
    pub issues: usize,
    pub analyzed: usize,
    pub pareto_raw: BTreeMap<String, usize>,
    pub pareto_normalized: BTreeMap<String, usize>,
    pub parameters: GroupComparison,
    pub objectives: GroupComparison,
    pub correlations: CorrelationMatrix,
}

fn stats_err(e: impl std::fmt::Display) -> CliError {
    CliError::new("analysis_failed", e.to_string())
}

pub fn load(opts: &AnalyzeOptions) -> Result<(Dataset, SchemaMapping), CliError> {
    let mut mapping = match &opts.schema {
        None => SchemaMapping::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::new("io", format!("{}: {e}", p.display())))?;
            SchemaMapping::from_toml(&text).map_err(|e| CliError::new("schema", e.to_string()))?
        }
    };
    if let Some(col) = &opts.group_col {
        mapping.columns.insert("group".into(), col.clone());
    }
    let data = ingest_dataset(&opts.data, &mapping).map_err(|e| match e {
        mobo_core::analysis::DatasetError::Io(io) => CliError::new("io", format!("{}: {io}", opts.data.display())),
        mobo_core::analysis::DatasetError::Parse { .. } => CliError::new("parse", e.to_string()),
        mobo_core::analysis::DatasetError::Schema(_) => CliError::new("schema", e.to_string()),
    })?;
    Ok((data, mapping))
}

pub fn analyze(data: &Dataset, mapping: &SchemaMapping, opts: &AnalyzeOptions) -> Result<AnalysisReport, CliError> {
    if data.records.is_empty() {
        return Err(CliError::new("schema", "no valid records"));
    }
    let scales = &mapping.scales;
    let selected: Vec<StudyRecord> = if opts.pareto_only {
        let flags = pareto_flags(&data.records, opts.space, scales);
        data.records.iter().zip(flags).filter(|(_, f)| *f).map(|(r, _)| r.clone()).collect()
    } else {
        data.records.clone()
    };
    let (a, b) = comparison_groups(&selected).map_err(stats_err)?;
    Ok(AnalysisReport {
        records: data.records.len(),
        participants: data.participants(),
        issues: data.issues.len(),
        analyzed: selected.len(),
        pareto_raw: pareto_counts_by_group(&data.records, ObjectiveSpace::Raw, scales),
        pareto_normalized: pareto_counts_by_group(&data.records, ObjectiveSpace::Normalized, scales),
        parameters: compare_parameters(&selected, &a, &b).map_err(stats_err)?,
        objectives: compare_objectives(&selected, &a, &b).map_err(stats_err)?,
        correlations: objective_correlations(&data.records).map_err(stats_err)?,
    })
}

fn counts_line(counts: &BTreeMap<String, usize>) -> String {
    counts.iter().map(|(g, n)| format!("{g}: {n}")).collect::<Vec<_>>().join(", ")
}

fn comparison_table(out: &mut String, title: &str, c: &GroupComparison) {
    let _ = writeln!(out, "\n{title} ({} n={}, {} n={})", c.group_a, c.n_a, c.group_b, c.n_b);
    let _ = writeln!(
        out,
        "{:<18} {:>12} {:>8}  {:<13} {:<13} {}",
        "name", "BF10", "err%", format!("{} IQR", c.group_a), format!("{} IQR", c.group_b), "evidence"
    );
    for r in &c.rows {
        let (bf, err, label) = match &r.bf {
            Some(bf) => (format!("{:.4}", bf.bf10), format!("{:.3}", bf.error_pct), bf.evidence.as_str()),
            None => ("-".into(), "-".into(), "constant"),
        };
        let _ = writeln!(
            out,
            "{:<18} {:>12} {:>8}  {:<13} {:<13} {label}",
            r.name,
            bf,
            err,
            format!("{:.2}-{:.2}", r.iqr_a.0, r.iqr_a.1),
            format!("{:.2}-{:.2}", r.iqr_b.0, r.iqr_b.1),
        );
    }
}

impl AnalysisReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "records: {} participants: {} rejected rows: {} analyzed: {}",
            self.records, self.participants, self.issues, self.analyzed
        );
        let _ = writeln!(out, "pareto designs (raw): {}", counts_line(&self.pareto_raw));
        let _ = writeln!(out, "pareto designs (normalized): {}", counts_line(&self.pareto_normalized));
        comparison_table(&mut out, "parameters", &self.parameters);
        comparison_table(&mut out, "objectives", &self.objectives);
        let m = &self.correlations;
        let _ = writeln!(out, "\ncorrelations (n={}, Holm-adjusted, * p<0.05)", m.n);
        let _ = write!(out, "{:<18}", "");
        for name in &m.names {
            let _ = write!(out, " {:>9}", abbreviate(name));
        }
        out.push('\n');
        for (i, name) in m.names.iter().enumerate() {
            let _ = write!(out, "{name:<18}");
            for j in 0..m.names.len() {
                let c = m.get(i, j);
                let star = if i != j && c.significant { "*" } else { " " };
                let _ = write!(out, " {:>8.3}{star}", c.r);
            }
            out.push('\n');
        }
        out
    }

    fn comparison_csv(c: &GroupComparison) -> String {
        let mut out = String::from("name,bf10,error_pct,evidence,iqr_a_lo,iqr_a_hi,iqr_b_lo,iqr_b_hi,mean_a,mean_b\n");
        for r in &c.rows {
            let (bf, err, label) = match &r.bf {
                Some(bf) => (bf.bf10.to_string(), bf.error_pct.to_string(), bf.evidence.as_str()),
                None => (String::new(), String::new(), "constant"),
            };
            let _ = writeln!(
                out,
                "{},{bf},{err},{label},{},{},{},{},{},{}",
                r.name, r.iqr_a.0, r.iqr_a.1, r.iqr_b.0, r.iqr_b.1, r.mean_a, r.mean_b
            );
        }
        out
    }

    fn correlation_csv(&self) -> String {
        let mut out = String::from("a,b,r,p_raw,p_adjusted,significant\n");
        let m = &self.correlations;
        for i in 0..m.names.len() {
            for j in i + 1..m.names.len() {
                let c = m.get(i, j);
                let _ = writeln!(out, "{},{},{},{},{},{}", m.names[i], m.names[j], c.r, c.p_raw, c.p_adjusted, c.significant);
            }
        }
        out
    }

    /// Writes `parameters.csv`, `objectives.csv`, `correlations.csv`,
    /// `pareto_counts.csv` and `records.csv` (the ingested records).
    pub fn write_tables(&self, dir: &Path, records: &[StudyRecord]) -> Result<(), CliError> {
        let io = |p: &Path| {
            let p = p.to_path_buf();
            move |e: std::io::Error| CliError::new("io", format!("{}: {e}", p.display()))
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let mut counts = String::from("space,group,count\n");
        for (space, map) in [("raw", &self.pareto_raw), ("normalized", &self.pareto_normalized)] {
            for (g, n) in map {
                let _ = writeln!(counts, "{space},{g},{n}");
            }
        }
        let files = [
            ("parameters.csv", Self::comparison_csv(&self.parameters)),
            ("objectives.csv", Self::comparison_csv(&self.objectives)),
            ("correlations.csv", self.correlation_csv()),
            ("pareto_counts.csv", counts),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            fs::write(&p, body).map_err(io(&p))?;
        }
        let p = dir.join("records.csv");
        let f = fs::File::create(&p).map_err(io(&p))?;
        write_csv(records, f).map_err(|e| CliError::new("io", e.to_string()))
    }
}

fn abbreviate(name: &str) -> String {
    name.split('_').map(|w| &w[..w.len().min(4)]).collect::<Vec<_>>().join("_")
}

pub fn run(opts: &AnalyzeOptions) -> Result<String, CliError> {
    let (data, mapping) = load(opts)?;
    let report = analyze(&data, &mapping, opts)?;
    if let Some(dir) = &opts.out {
        report.write_tables(dir, &data.records)?;
    }
    Ok(report.render())
}
