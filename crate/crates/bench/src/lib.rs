//! Fixtures shared by the benchmarks.

use mobo_core::synthetic::run_session;
use mobo_core::{
    AcquisitionConfig, DesignParams, FitOptions, ObjectiveVector, RaterPopulation, SessionConfig,
};

/// A short session config that keeps a full run under a second.
pub fn light_config(total_iterations: usize) -> SessionConfig {
    SessionConfig {
        acquisition: AcquisitionConfig { n_candidates: 256, n_mc_samples: 128, ..Default::default() },
        fit: FitOptions { restarts: 2, ..Default::default() },
        total_iterations,
        ..Default::default()
    }
}

/// The rated designs of one synthetic session.
pub fn history(n: usize, seed: u64) -> Vec<(DesignParams, ObjectiveVector)> {
    let rater = RaterPopulation { noise_sd: 0.1, ..Default::default() }.rater(seed);
    let session = run_session(&rater, "bench", &light_config(n)).expect("synthetic session");
    session.history().iter().map(|o| (o.issued.design, o.objectives)).collect()
}
