//! Initial Sobol designs and Monte Carlo expected hypervolume improvement
//! (q = 1) over a mixed candidate pool.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::design::{DesignParams, N_PARAMS};
use crate::objectives::N_OBJECTIVES;
use crate::pareto::{box_decomposition, improvement_in, BoxDecomposition, ParetoError, ParetoFront};
use crate::sobol::Sobol;
use crate::surrogate::{GpError, SurrogateModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AcquisitionError {
    #[error("invalid acquisition config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Surrogate(#[from] GpError),
    #[error(transparent)]
    Pareto(#[from] ParetoError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    /// Designs of the sampling phase.
    pub n_sobol: usize,
    pub n_candidates: usize,
    pub n_mc_samples: usize,
    /// Batch size; only 1 is supported.
    pub q: usize,
    pub seed: u64,
    /// Standard deviation of the incumbent perturbations in the pool.
    pub perturbation_sd: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            n_sobol: 5,
            n_candidates: 2024,
            n_mc_samples: 512,
            q: 1,
            seed: 0,
            perturbation_sd: 0.05,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<(), AcquisitionError> {
        let bad = |m: &str| Err(AcquisitionError::ConfigInvalid(m.to_string()));
        if self.n_sobol < 1 {
            return bad("n_sobol must be at least 1");
        }
        if self.n_candidates < 1 {
            return bad("n_candidates must be at least 1");
        }
        if self.n_mc_samples < 1 {
            return bad("n_mc_samples must be at least 1");
        }
        if self.q != 1 {
            return bad("only q = 1 is supported");
        }
        if !(self.perturbation_sd.is_finite() && self.perturbation_sd >= 0.0) {
            return bad("perturbation_sd must be a non-negative number");
        }
        Ok(())
    }
}

/// The first `n_sobol` points of the unscrambled Sobol sequence, skipping
/// the origin. Independent of the seed: every session gets the same list.
pub fn sobol_designs(config: &AcquisitionConfig) -> Vec<DesignParams> {
    let s = Sobol::new(N_PARAMS);
    (1..=config.n_sobol as u32)
        .map(|i| DesignParams::new(&s.point(i)).expect("Sobol points lie in [0, 1)"))
        .collect()
}

/// Standard-normal base samples shared by every candidate scored with the
/// same seed.
pub fn base_samples(n_mc: usize, seed: u64) -> Vec<[f64; N_OBJECTIVES]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_mc)
        .map(|_| std::array::from_fn(|_| rng.sample(StandardNormal)))
        .collect()
}

/// MC estimate of the expected hypervolume improvement of one posterior
/// marginal, with all boxes that cannot be reached discarded up front.
fn ehvi_from_marginal(
    decomp: &BoxDecomposition,
    mean: &[f64; N_OBJECTIVES],
    var: &[f64; N_OBJECTIVES],
    base: &[[f64; N_OBJECTIVES]],
) -> f64 {
    let sd: [f64; N_OBJECTIVES] = std::array::from_fn(|k| var[k].max(0.0).sqrt());
    let draws: Vec<[f64; N_OBJECTIVES]> = base
        .iter()
        .map(|z| std::array::from_fn(|k| mean[k] + sd[k] * z[k]))
        .collect();
    let mut y_max = [f64::NEG_INFINITY; N_OBJECTIVES];
    for y in &draws {
        for k in 0..N_OBJECTIVES {
            y_max[k] = y_max[k].max(y[k]);
        }
    }
    let (lower, upper) = decomp.restricted_to(&y_max);
    if lower.is_empty() {
        return 0.0;
    }
    let total: f64 = draws
        .iter()
        .map(|y| improvement_in(&lower, &upper, N_OBJECTIVES, y))
        .sum();
    total / base.len() as f64
}

/// Monte Carlo EHVI of `candidate`: the mean hypervolume improvement over
/// `n_mc` posterior draws. Deterministic in `seed`.
pub fn ehvi_mc(
    model: &SurrogateModel,
    decomp: &BoxDecomposition,
    candidate: &DesignParams,
    n_mc: usize,
    seed: u64,
) -> Result<f64, AcquisitionError> {
    if decomp.dim() != N_OBJECTIVES {
        return Err(ParetoError::DimensionMismatch {
            expected: N_OBJECTIVES,
            got: decomp.dim(),
        }
        .into());
    }
    let (mean, var) = model.marginals(std::slice::from_ref(candidate));
    let base = base_samples(n_mc, seed);
    Ok(ehvi_from_marginal(decomp, &mean[0], &var[0], &base))
}

/// Per-iteration acquisition record kept in the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionDiagnostics {
    pub best_score: f64,
    pub best_index: usize,
    pub n_candidates: usize,
    pub n_mc_samples: usize,
    /// First 16 hex digits of the SHA-256 of the candidate pool.
    pub pool_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub design: DesignParams,
    pub diagnostics: AcquisitionDiagnostics,
}

/// Candidate pool: a digitally shifted Sobol continuation (first half) and
/// Gaussian perturbations of the Pareto-optimal designs (second half).
pub fn candidate_pool(
    incumbents: &[DesignParams],
    config: &AcquisitionConfig,
    seed: u64,
) -> Vec<DesignParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let n = config.n_candidates;
    let n_local = if incumbents.is_empty() { 0 } else { n / 2 };
    let n_global = n - n_local;

    let masks: Vec<u32> = (0..N_PARAMS).map(|_| rng.random()).collect();
    let sobol = Sobol::new(N_PARAMS).with_digital_shift(&masks);
    let start = config.n_sobol as u32 + 1;
    let mut pool: Vec<DesignParams> = (0..n_global as u32)
        .map(|i| DesignParams::new(&sobol.point(start + i)).expect("Sobol points lie in [0, 1)"))
        .collect();

    let noise = Normal::new(0.0, config.perturbation_sd).expect("validated sd");
    for i in 0..n_local {
        let base = incumbents[i % incumbents.len()].as_array();
        let p = std::array::from_fn(|k| base[k] + rng.sample(noise));
        pool.push(DesignParams::clamped(p));
    }
    pool
}

fn pool_hash(pool: &[DesignParams]) -> String {
    let mut h = Sha256::new();
    for d in pool {
        for v in d.as_array() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Picks the candidate with the largest MC-EHVI; ties go to the lowest
/// candidate index.
pub fn suggest_next(
    model: &SurrogateModel,
    front: &ParetoFront,
    incumbents: &[DesignParams],
    config: &AcquisitionConfig,
    seed: u64,
) -> Result<Suggestion, AcquisitionError> {
    config.validate()?;
    let decomp = box_decomposition(front)?;
    let pool = candidate_pool(incumbents, config, seed);
    let base = base_samples(config.n_mc_samples, seed);
    let (mean, var) = model.marginals(&pool);

    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, (m, v)) in mean.iter().zip(&var).enumerate() {
        let score = ehvi_from_marginal(&decomp, m, v, &base);
        if score > best.1 {
            best = (i, score);
        }
    }
    Ok(Suggestion {
        design: pool[best.0],
        diagnostics: AcquisitionDiagnostics {
            best_score: best.1,
            best_index: best.0,
            n_candidates: pool.len(),
            n_mc_samples: config.n_mc_samples,
            pool_hash: pool_hash(&pool),
            seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::ObjectiveVector;
    use crate::pareto::{hypervolume_of, pareto_front};
    use crate::surrogate::{FitOptions, GpHyperparams};

    fn history(n: usize, seed: u64) -> Vec<(DesignParams, ObjectiveVector)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let d = DesignParams::clamped(std::array::from_fn(|_| rng.random_range(0.0..1.0)));
                let x = d.as_array();
                let o = std::array::from_fn(|k| {
                    let c = (k as f64 + 1.0) / 8.0;
                    (1.0 - 2.0 * (x[k] - c).powi(2) - 0.5 * (x[k + 1] - 0.5).powi(2)).clamp(-1.0, 1.0)
                });
                (d, ObjectiveVector::from_array(o))
            })
            .collect()
    }

    #[test]
    fn first_sobol_design_is_midpoint() {
        let c = AcquisitionConfig { n_sobol: 1, ..Default::default() };
        assert_eq!(sobol_designs(&c), vec![DesignParams::splat(0.5).unwrap()]);
        let a = sobol_designs(&AcquisitionConfig { seed: 1, ..Default::default() });
        let b = sobol_designs(&AcquisitionConfig { seed: 99, ..Default::default() });
        assert_eq!(a.len(), 5);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(AcquisitionConfig::default().validate().is_ok());
        for bad in [
            AcquisitionConfig { n_sobol: 0, ..Default::default() },
            AcquisitionConfig { n_candidates: 0, ..Default::default() },
            AcquisitionConfig { n_mc_samples: 0, ..Default::default() },
            AcquisitionConfig { q: 2, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    /// A model whose posterior is a point mass at the training targets.
    fn degenerate_model(target: [f64; 7]) -> (SurrogateModel, DesignParams) {
        let d0 = DesignParams::splat(0.5).unwrap();
        let d1 = DesignParams::splat(0.9).unwrap();
        let hist = vec![
            (d0, ObjectiveVector::from_array(target)),
            (d1, ObjectiveVector::from_array(target.map(|v| v - 0.2))),
        ];
        let hyper = vec![GpHyperparams::isotropic(9, 0.3, 1.0, 1e-12); 7];
        (SurrogateModel::with_hyperparams(&hist, &hyper).unwrap(), d0)
    }

    #[test]
    fn dominated_point_mass_scores_zero() {
        let (model, d0) = degenerate_model([0.0; 7]);
        let front = pareto_front(&[vec![0.5; 7]]).unwrap();
        let decomp = box_decomposition(&front).unwrap();
        assert_eq!(ehvi_mc(&model, &decomp, &d0, 64, 1).unwrap(), 0.0);
    }

    #[test]
    fn dominating_point_mass_scores_hv_difference() {
        let (model, d0) = degenerate_model([0.8; 7]);
        let pts = vec![
            vec![0.5, 0.1, 0.3, 0.7, 0.2, 0.4, 0.6],
            vec![0.2, 0.6, 0.5, 0.1, 0.7, 0.3, 0.4],
        ];
        let front = pareto_front(&pts).unwrap();
        let decomp = box_decomposition(&front).unwrap();
        let score = ehvi_mc(&model, &decomp, &d0, 16, 1).unwrap();
        let reference = front.reference.clone();
        let (mean, var) = model.marginals(&[d0]);
        assert!(var[0].iter().all(|v| *v < 1e-10));
        let y = mean[0].to_vec();
        let want = hypervolume_of(vec![y.clone()], &reference) - hypervolume_of(pts, &reference);
        assert!((score - want).abs() < 1e-6 * want, "{score} vs {want}");
    }

    #[test]
    fn suggestion_is_deterministic_and_valid() {
        let hist = history(8, 3);
        let model = SurrogateModel::fit(&hist, &FitOptions::default(), 1).unwrap();
        let objs: Vec<Vec<f64>> = hist.iter().map(|(_, o)| o.to_array().to_vec()).collect();
        let front = pareto_front(&objs).unwrap();
        let incumbents: Vec<DesignParams> = front.indices().iter().map(|&i| hist[i].0).collect();
        let config = AcquisitionConfig { n_candidates: 200, n_mc_samples: 64, ..Default::default() };
        let a = suggest_next(&model, &front, &incumbents, &config, 42).unwrap();
        let b = suggest_next(&model, &front, &incumbents, &config, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.diagnostics.best_score >= 0.0);
        assert_eq!(a.diagnostics.n_candidates, 200);
        // The winning score is reproducible through the single-candidate path.
        let decomp = box_decomposition(&front).unwrap();
        let s = ehvi_mc(&model, &decomp, &a.design, 64, 42).unwrap();
        assert!((s - a.diagnostics.best_score).abs() < 1e-12);
    }

    #[test]
    fn saturated_front_picks_first_candidate() {
        let hist = history(6, 4);
        let model = SurrogateModel::fit(&hist, &FitOptions::default(), 1).unwrap();
        let front = pareto_front(&[vec![1.0; 7]]).unwrap();
        let config = AcquisitionConfig { n_candidates: 50, n_mc_samples: 32, ..Default::default() };
        let s = suggest_next(&model, &front, &[hist[0].0], &config, 7).unwrap();
        assert_eq!(s.diagnostics.best_score, 0.0);
        assert_eq!(s.diagnostics.best_index, 0);
        assert_eq!(s.design, candidate_pool(&[hist[0].0], &config, 7)[0]);
    }

    #[test]
    fn pool_composition() {
        let inc = vec![DesignParams::splat(1.0).unwrap()];
        let config = AcquisitionConfig { n_candidates: 11, ..Default::default() };
        let pool = candidate_pool(&inc, &config, 5);
        assert_eq!(pool.len(), 11);
        // perturbations of the all-ones corner are clamped into the box
        for d in &pool[6..] {
            assert!(d.as_array().iter().all(|v| (0.8..=1.0).contains(v)));
        }
        let no_inc = candidate_pool(&[], &config, 5);
        assert_eq!(no_inc.len(), 11);
    }
}
