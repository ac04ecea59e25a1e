//! The per-participant optimization loop: Sobol sampling, then one
//! EHVI-selected design per rating, until the iteration budget runs out or a
//! perfect rating arrives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{sobol_designs, suggest_next, AcquisitionConfig, AcquisitionDiagnostics, AcquisitionError};
use crate::design::DesignParams;
use crate::objectives::{
    is_perfect_rating, objective_vector, ObjectiveScales, ObjectiveVector, QuestionnaireResponse, RawObjectives,
    ScaleError,
};
use crate::pareto::{pareto_front, ParetoFront};
use crate::seed::mix_seed;
use crate::surrogate::{FitOptions, FittedObjective, GpError, SurrogateModel};

pub const DEFAULT_ITERATIONS: usize = 20;

const FIT_STREAM: u64 = 0x6669_7400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("session already finished")]
    SessionFinished,
    #[error("invalid session config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
    #[error(transparent)]
    Surrogate(#[from] GpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub acquisition: AcquisitionConfig,
    pub scales: ObjectiveScales,
    pub fit: FitOptions,
    pub total_iterations: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            acquisition: AcquisitionConfig::default(),
            scales: ObjectiveScales::default(),
            fit: FitOptions::default(),
            total_iterations: DEFAULT_ITERATIONS,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        self.acquisition
            .validate()
            .map_err(|e| SessionError::ConfigInvalid(e.to_string()))?;
        self.scales
            .validate()
            .map_err(|e| SessionError::ConfigInvalid(e.to_string()))?;
        if self.total_iterations < self.acquisition.n_sobol {
            return Err(SessionError::ConfigInvalid(
                "total_iterations must be at least n_sobol".into(),
            ));
        }
        if self.fit.restarts == 0 {
            return Err(SessionError::ConfigInvalid("fit.restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Sampling,
    Optimization,
    Finished,
}

/// A design handed to the participant. `iteration` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssuedDesign {
    pub iteration: usize,
    pub phase: Phase,
    pub design: DesignParams,
    pub diagnostics: Option<AcquisitionDiagnostics>,
    pub fitted: Option<Vec<FittedObjective>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub issued: IssuedDesign,
    pub response: QuestionnaireResponse,
    pub raw: RawObjectives,
    pub objectives: ObjectiveVector,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    NextDesign(IssuedDesign),
    Finished { stopped_early: bool },
}

/// One line of a session export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub session_id: String,
    pub iteration: usize,
    pub phase: Phase,
    pub design: DesignParams,
    pub response: QuestionnaireResponse,
    pub raw: RawObjectives,
    pub objectives: ObjectiveVector,
    pub diagnostics: Option<AcquisitionDiagnostics>,
    pub fitted: Option<Vec<FittedObjective>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    id: String,
    config: SessionConfig,
    history: Vec<Observation>,
    pending: Option<IssuedDesign>,
    stopped_early: bool,
}

impl Session {
    pub fn start(id: impl Into<String>, config: SessionConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let first = sobol_designs(&config.acquisition)[0];
        Ok(Self {
            id: id.into(),
            config,
            history: Vec::new(),
            pending: Some(IssuedDesign {
                iteration: 1,
                phase: Phase::Sampling,
                design: first,
                diagnostics: None,
                fitted: None,
            }),
            stopped_early: false,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Number of completed ratings.
    pub fn iteration(&self) -> usize {
        self.history.len()
    }

    pub fn phase(&self) -> Phase {
        match &self.pending {
            None => Phase::Finished,
            Some(p) => p.phase,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.pending.is_none()
    }

    pub fn stopped_early(&self) -> bool {
        self.stopped_early
    }

    pub fn pending(&self) -> Option<&IssuedDesign> {
        self.pending.as_ref()
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    /// Current front over the normalized objectives, with history indices.
    pub fn pareto_front(&self) -> Option<ParetoFront> {
        let pts: Vec<[f64; 7]> = self.history.iter().map(|o| o.objectives.to_array()).collect();
        pareto_front(&pts).ok()
    }

    pub fn submit_rating(&mut self, response: QuestionnaireResponse) -> Result<Step, SessionError> {
        let issued = self.pending.clone().ok_or(SessionError::SessionFinished)?;
        let (raw, objectives) = objective_vector(&response, &self.config.scales)?;
        let perfect = is_perfect_rating(&response, &self.config.scales);
        let obs = Observation { issued, response, raw, objectives };

        let done = self.history.len() + 1;
        if perfect || done >= self.config.total_iterations {
            self.history.push(obs);
            self.pending = None;
            self.stopped_early = perfect && done < self.config.total_iterations;
            return Ok(Step::Finished { stopped_early: self.stopped_early });
        }

        // Nothing is committed until the next design exists.
        let mut history = self.history.clone();
        history.push(obs);
        let next = self.next_design(&history)?;
        self.history = history;
        self.pending = Some(next.clone());
        Ok(Step::NextDesign(next))
    }

    fn next_design(&self, history: &[Observation]) -> Result<IssuedDesign, SessionError> {
        let n = history.len();
        let acq = &self.config.acquisition;
        // A GP needs two observations; with n_sobol = 1 sampling runs one step
        // longer.
        if n < acq.n_sobol.max(2) {
            let cfg = AcquisitionConfig { n_sobol: n + 1, ..acq.clone() };
            return Ok(IssuedDesign {
                iteration: n + 1,
                phase: Phase::Sampling,
                design: sobol_designs(&cfg)[n],
                diagnostics: None,
                fitted: None,
            });
        }

        let data: Vec<(DesignParams, ObjectiveVector)> =
            history.iter().map(|o| (o.issued.design, o.objectives)).collect();
        let stream = n as u64;
        let model = SurrogateModel::fit(&data, &self.config.fit, mix_seed(acq.seed ^ FIT_STREAM, stream))?;
        let pts: Vec<[f64; 7]> = data.iter().map(|(_, v)| v.to_array()).collect();
        let front = pareto_front(&pts).map_err(AcquisitionError::from)?;
        let incumbents: Vec<DesignParams> = front.indices().iter().map(|&i| data[i].0).collect();
        let s = suggest_next(&model, &front, &incumbents, acq, mix_seed(acq.seed, stream))?;
        Ok(IssuedDesign {
            iteration: n + 1,
            phase: Phase::Optimization,
            design: s.design,
            diagnostics: Some(s.diagnostics),
            fitted: Some(model.fitted()),
        })
    }

    pub fn export(&self) -> Vec<ExportRecord> {
        self.history
            .iter()
            .map(|o| ExportRecord {
                session_id: self.id.clone(),
                iteration: o.issued.iteration,
                phase: o.issued.phase,
                design: o.issued.design,
                response: o.response.clone(),
                raw: o.raw,
                objectives: o.objectives,
                diagnostics: o.issued.diagnostics.clone(),
                fitted: o.issued.fitted.clone(),
            })
            .collect()
    }

    /// Export as newline-terminated JSON lines. Contains no wall-clock data,
    /// so equal inputs give equal bytes.
    pub fn export_jsonl(&self) -> String {
        let mut out = String::new();
        for r in self.export() {
            out.push_str(&serde_json::to_string(&r).expect("export records serialize"));
            out.push('\n');
        }
        out
    }
}
