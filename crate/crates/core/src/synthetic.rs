//! Deterministic synthetic raters standing in for study participants.
//!
//! Each objective has a quadratic ideal-point utility
//! `u = 1 - sum_d w[o][d] (p_d - ideal_d)^2`, perturbed by Gaussian noise and
//! discretized onto the objective's questionnaire scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::design::{DesignParams, EhmiRendering, N_PARAMS};
use crate::objectives::{objective_vector, ObjectiveScales, ObjectiveVector, QuestionnaireResponse, ScaleSpec, N_OBJECTIVES};
use crate::pareto::{default_reference, hypervolume_of};
use crate::seed::mix_seed;
use crate::session::{Session, SessionConfig, SessionError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRater {
    pub ideal_point: [f64; N_PARAMS],
    /// One row of dimension weights per objective. The crossing-time row is
    /// unused: that objective comes from [`SyntheticRater::crossing_time`].
    pub weights: [[f64; N_PARAMS]; N_OBJECTIVES],
    pub noise_sd: f64,
    pub base_latency_s: f64,
    pub salience_gain_s: f64,
    pub seed: u64,
    /// Upper cap on latent utilities, applied after the noise. Below ~0.974
    /// the rater can never give the lowest mental-demand rating, so sessions
    /// never stop early.
    #[serde(default = "one")]
    pub utility_ceiling: f64,
}

fn one() -> f64 {
    1.0
}

impl SyntheticRater {
    /// A noise-free rater with uniform weights `1/9`, so utilities span
    /// `[0, 1]` over the design box.
    pub fn new(ideal_point: [f64; N_PARAMS], seed: u64) -> Self {
        Self {
            ideal_point,
            weights: [[1.0 / N_PARAMS as f64; N_PARAMS]; N_OBJECTIVES],
            noise_sd: 0.0,
            base_latency_s: 15.0,
            salience_gain_s: 8.0,
            seed,
            utility_ceiling: 1.0,
        }
    }

    /// Noise-free latent utilities in `[0, 1]` (before the ceiling).
    pub fn utilities(&self, params: &DesignParams) -> [f64; N_OBJECTIVES] {
        let p = params.as_array();
        std::array::from_fn(|o| {
            let deficit: f64 = (0..N_PARAMS)
                .map(|d| self.weights[o][d] * (p[d] - self.ideal_point[d]).powi(2))
                .sum();
            1.0 - deficit
        })
    }

    pub fn crossing_time(&self, rendering: &EhmiRendering) -> f64 {
        self.crossing_time_with_noise(rendering, 0.0)
    }

    fn crossing_time_with_noise(&self, rendering: &EhmiRendering, noise: f64) -> f64 {
        let salience = (rendering.color[3] + rendering.rect.area() + rendering.loudness) / 3.0;
        (self.base_latency_s - self.salience_gain_s * salience + noise).max(0.0)
    }

    pub fn rate(&self, params: &DesignParams, iteration: u64, scales: &ObjectiveScales) -> QuestionnaireResponse {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, iteration));
        let noise = Normal::new(0.0, self.noise_sd.max(0.0)).expect("finite sd");
        let base = self.utilities(params);
        let u: [f64; N_OBJECTIVES] = std::array::from_fn(|o| {
            (base[o] + noise.sample(&mut rng)).min(self.utility_ceiling).clamp(0.0, 1.0)
        });
        let time_noise = noise.sample(&mut rng);

        let up = |u: f64, s: &ScaleSpec| (s.lo + u * (s.hi - s.lo)).round().clamp(s.lo, s.hi) as i32;
        let down = |u: f64, s: &ScaleSpec| (s.hi - u * (s.hi - s.lo)).round().clamp(s.lo, s.hi) as i32;

        let trust = up(u[0], &scales.trust);
        let pred = up(u[1], &scales.predictability);
        let pred_inverse = (scales.predictability.lo + scales.predictability.hi) as i32 - pred;
        let acceptance = up(u[4], &scales.acceptance);
        QuestionnaireResponse {
            trust_items: [trust; 2],
            predictability_items: [pred, pred, pred_inverse, pred_inverse],
            mental_demand: down(u[2], &scales.mental_demand),
            safety_items: [up(u[3], &scales.perceived_safety); 4],
            usefulness: acceptance,
            satisfaction: acceptance,
            visual_appeal: up(u[5], &scales.aesthetics),
            time_to_cross_s: self.crossing_time_with_noise(&params.resolve(), time_noise),
        }
    }
}

/// Recipe for a batch of raters, loadable from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RaterPopulation {
    pub count: usize,
    pub seed: u64,
    pub weight_min: f64,
    pub weight_max: f64,
    pub noise_sd: f64,
    pub base_latency_s: f64,
    pub salience_gain_s: f64,
    pub utility_ceiling: f64,
}

impl Default for RaterPopulation {
    fn default() -> Self {
        Self {
            count: 20,
            seed: 1,
            weight_min: 0.5 / N_PARAMS as f64,
            weight_max: 2.0 / N_PARAMS as f64,
            noise_sd: 0.0,
            base_latency_s: 15.0,
            salience_gain_s: 8.0,
            utility_ceiling: 1.0,
        }
    }
}

impl RaterPopulation {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// One rater per seed, ideal points and weights drawn uniformly.
    pub fn rater(&self, seed: u64) -> SyntheticRater {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, seed));
        let ideal_point = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        let (lo, hi) = (self.weight_min.min(self.weight_max), self.weight_max.max(self.weight_min));
        let weights = std::array::from_fn(|_| {
            std::array::from_fn(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
        });
        SyntheticRater {
            ideal_point,
            weights,
            noise_sd: self.noise_sd,
            base_latency_s: self.base_latency_s,
            salience_gain_s: self.salience_gain_s,
            seed,
            utility_ceiling: self.utility_ceiling,
        }
    }

    pub fn generate(&self) -> Vec<SyntheticRater> {
        (0..self.count as u64).map(|i| self.rater(i)).collect()
    }
}

const BASELINE_STREAM: u64 = 0xba5e;

/// Drives a full session with `rater` answering every issued design.
pub fn run_session(rater: &SyntheticRater, id: &str, config: &SessionConfig) -> Result<Session, SessionError> {
    let mut session = Session::start(id, config.clone())?;
    while let Some(p) = session.pending().cloned() {
        let r = rater.rate(&p.design, p.iteration as u64, &config.scales);
        session.submit_rating(r)?;
    }
    Ok(session)
}

/// One rated design of a random-search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSample {
    pub iteration: usize,
    pub design: DesignParams,
    pub response: QuestionnaireResponse,
    pub objectives: ObjectiveVector,
}

/// `n` uniform random designs rated by `rater`, with the same iteration
/// numbering (and so the same rating noise stream) as a session.
pub fn random_search(rater: &SyntheticRater, n: usize, seed: u64, scales: &ObjectiveScales) -> Vec<BaselineSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, BASELINE_STREAM));
    (1..=n)
        .map(|iteration| {
            let design = DesignParams::clamped(std::array::from_fn(|_| rng.random_range(0.0..1.0)));
            let response = rater.rate(&design, iteration as u64, scales);
            let (_, objectives) = objective_vector(&response, scales).expect("synthetic ratings are on scale");
            BaselineSample { iteration, design, response, objectives }
        })
        .collect()
}

/// Hypervolume of the first `k` objective vectors for `k = 1..=len`, under
/// the default reference point.
pub fn hypervolume_trace(objectives: &[ObjectiveVector]) -> Vec<f64> {
    let reference = default_reference(N_OBJECTIVES);
    (1..=objectives.len())
        .map(|k| {
            let pts = objectives[..k].iter().map(|o| o.to_array().to_vec()).collect();
            hypervolume_of(pts, &reference)
        })
        .collect()
}
