//! Multi-objective Bayesian optimization of a nine-parameter external HMI
//! design against seven questionnaire objectives.
//!
//! The pipeline is: [`design`] parameters are shown to a rater, whose
//! answers are scored and normalized by [`objectives`]; a [`session`] fits
//! a [`surrogate`] per objective and picks the next design by expected
//! hypervolume improvement ([`acquisition`], [`pareto`]). [`store`] keeps
//! sessions as replayable event logs, [`synthetic`] supplies simulated
//! raters and [`analysis`] holds the post-hoc statistics.

pub mod acquisition;
pub mod analysis;
pub mod design;
pub mod objectives;
pub mod pareto;
pub mod seed;
pub mod session;
pub mod sobol;
pub mod store;
pub mod surrogate;
pub mod synthetic;

pub use acquisition::{suggest_next, AcquisitionConfig, AcquisitionDiagnostics, AcquisitionError, Suggestion};
pub use design::{blink_frequency_hz, resolve_geometry, DesignError, DesignParams, EhmiRendering, Rect, N_PARAMS};
pub use objectives::{
    is_perfect_rating, normalize, objective_vector, score_questionnaire, Objective, ObjectiveScales, ObjectiveVector,
    QuestionnaireResponse, RawObjectives, ScaleError, ScaleSpec, N_OBJECTIVES,
};
pub use pareto::{box_decomposition, dominates, hypervolume, pareto_front, BoxDecomposition, ParetoError, ParetoFront};
pub use session::{IssuedDesign, Phase, Session, SessionConfig, SessionError, Step};
pub use store::{SessionStore, StoreError};
pub use surrogate::{FitOptions, GaussianProcess, GpError, GpHyperparams, SurrogateModel};
pub use synthetic::{RaterPopulation, SyntheticRater};
