//! Questionnaire scoring and normalization into the maximize-oriented
//! `[-1, 1]` objective space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const N_OBJECTIVES: usize = 7;

/// The seven objectives in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Trust,
    Predictability,
    MentalDemand,
    PerceivedSafety,
    Acceptance,
    Aesthetics,
    TimeToCross,
}

impl Objective {
    pub const ALL: [Objective; N_OBJECTIVES] = [
        Objective::Trust,
        Objective::Predictability,
        Objective::MentalDemand,
        Objective::PerceivedSafety,
        Objective::Acceptance,
        Objective::Aesthetics,
        Objective::TimeToCross,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::Trust => "trust",
            Objective::Predictability => "predictability",
            Objective::MentalDemand => "mental_demand",
            Objective::PerceivedSafety => "perceived_safety",
            Objective::Acceptance => "acceptance",
            Objective::Aesthetics => "aesthetics",
            Objective::TimeToCross => "time_to_cross",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error("{field} = {value} lies outside its scale [{lo}, {hi}]")]
    ScaleViolation {
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid scale: lo = {lo} must be below hi = {hi}")]
    InvalidScale { lo: f64, hi: f64 },
}

/// Bounds and optimization direction of one objective's raw scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub lo: f64,
    pub hi: f64,
    pub direction: Direction,
}

impl ScaleSpec {
    pub fn new(lo: f64, hi: f64, direction: Direction) -> Result<Self, ScaleError> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(ScaleError::InvalidScale { lo, hi });
        }
        Ok(Self { lo, hi, direction })
    }

    /// The best raw value on this scale.
    pub fn best(&self) -> f64 {
        match self.direction {
            Direction::Maximize => self.hi,
            Direction::Minimize => self.lo,
        }
    }

    fn check(&self, field: &'static str, value: f64) -> Result<(), ScaleError> {
        if value.is_finite() && value >= self.lo && value <= self.hi {
            Ok(())
        } else {
            Err(ScaleError::ScaleViolation {
                field,
                value,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}

/// Maps `raw` (clamped to the scale first) affinely onto `[-1, 1]`, flipping
/// the sign for minimized objectives so that larger is always better.
pub fn normalize(raw: f64, spec: &ScaleSpec) -> f64 {
    let x = raw.clamp(spec.lo, spec.hi);
    let v = (2.0 * (x - spec.lo) / (spec.hi - spec.lo) - 1.0).clamp(-1.0, 1.0);
    match spec.direction {
        Direction::Maximize => v,
        Direction::Minimize => -v,
    }
}

/// Inverse of [`normalize`] on the scale interior.
pub fn denormalize(v: f64, spec: &ScaleSpec) -> f64 {
    let v = match spec.direction {
        Direction::Maximize => v,
        Direction::Minimize => -v,
    };
    spec.lo + (v + 1.0) / 2.0 * (spec.hi - spec.lo)
}

/// Per-objective raw scales. Item-level bounds of the questionnaire are
/// derived from these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveScales {
    pub trust: ScaleSpec,
    pub predictability: ScaleSpec,
    pub mental_demand: ScaleSpec,
    pub perceived_safety: ScaleSpec,
    pub acceptance: ScaleSpec,
    pub aesthetics: ScaleSpec,
    pub time_to_cross: ScaleSpec,
}

/// Default clamp for the crossing time, in seconds.
pub const DEFAULT_MAX_CROSSING_S: f64 = 60.0;

impl Default for ObjectiveScales {
    fn default() -> Self {
        use Direction::*;
        let s = |lo, hi, d| ScaleSpec { lo, hi, direction: d };
        Self {
            trust: s(1.0, 5.0, Maximize),
            predictability: s(1.0, 5.0, Maximize),
            mental_demand: s(1.0, 20.0, Minimize),
            perceived_safety: s(-3.0, 3.0, Maximize),
            acceptance: s(1.0, 7.0, Maximize),
            aesthetics: s(1.0, 7.0, Maximize),
            time_to_cross: s(0.0, DEFAULT_MAX_CROSSING_S, Minimize),
        }
    }
}

impl ObjectiveScales {
    pub fn get(&self, o: Objective) -> &ScaleSpec {
        match o {
            Objective::Trust => &self.trust,
            Objective::Predictability => &self.predictability,
            Objective::MentalDemand => &self.mental_demand,
            Objective::PerceivedSafety => &self.perceived_safety,
            Objective::Acceptance => &self.acceptance,
            Objective::Aesthetics => &self.aesthetics,
            Objective::TimeToCross => &self.time_to_cross,
        }
    }

    pub fn validate(&self) -> Result<(), ScaleError> {
        for o in Objective::ALL {
            let s = self.get(o);
            ScaleSpec::new(s.lo, s.hi, s.direction)?;
        }
        Ok(())
    }

    pub fn normalize(&self, raw: &RawObjectives) -> ObjectiveVector {
        ObjectiveVector::from_array(std::array::from_fn(|i| {
            normalize(raw.0[i], self.get(Objective::ALL[i]))
        }))
    }
}

/// Raw item-level answers for one iteration plus the measured crossing time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireResponse {
    pub trust_items: [i32; 2],
    /// Items 3 and 4 are inverse-coded.
    pub predictability_items: [i32; 4],
    pub mental_demand: i32,
    pub safety_items: [i32; 4],
    pub usefulness: i32,
    pub satisfaction: i32,
    pub visual_appeal: i32,
    pub time_to_cross_s: f64,
}

impl QuestionnaireResponse {
    pub fn validate(&self, scales: &ObjectiveScales) -> Result<(), ScaleError> {
        for &v in &self.trust_items {
            scales.trust.check("trust_items", v as f64)?;
        }
        for &v in &self.predictability_items {
            scales.predictability.check("predictability_items", v as f64)?;
        }
        scales.mental_demand.check("mental_demand", self.mental_demand as f64)?;
        for &v in &self.safety_items {
            scales.perceived_safety.check("safety_items", v as f64)?;
        }
        scales.acceptance.check("usefulness", self.usefulness as f64)?;
        scales.acceptance.check("satisfaction", self.satisfaction as f64)?;
        scales.aesthetics.check("visual_appeal", self.visual_appeal as f64)?;
        if !(self.time_to_cross_s.is_finite() && self.time_to_cross_s >= 0.0) {
            return Err(ScaleError::ScaleViolation {
                field: "time_to_cross_s",
                value: self.time_to_cross_s,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(())
    }

    /// The best possible answer on every item, with the given crossing time.
    pub fn perfect(scales: &ObjectiveScales, time_to_cross_s: f64) -> Self {
        let t = scales.trust.hi as i32;
        let p = scales.predictability;
        Self {
            trust_items: [t; 2],
            predictability_items: [
                p.hi as i32,
                p.hi as i32,
                p.lo as i32,
                p.lo as i32,
            ],
            mental_demand: scales.mental_demand.lo as i32,
            safety_items: [scales.perceived_safety.hi as i32; 4],
            usefulness: scales.acceptance.hi as i32,
            satisfaction: scales.acceptance.hi as i32,
            visual_appeal: scales.aesthetics.hi as i32,
            time_to_cross_s,
        }
    }
}

/// Unnormalized objective values in [`Objective::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawObjectives(pub [f64; N_OBJECTIVES]);

impl RawObjectives {
    pub fn get(&self, o: Objective) -> f64 {
        self.0[o.index()]
    }
}

/// Normalized objectives in `[-1, 1]`, larger is better for all of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub trust: f64,
    pub predictability: f64,
    pub mental_demand: f64,
    pub perceived_safety: f64,
    pub acceptance: f64,
    pub aesthetics: f64,
    pub time_to_cross: f64,
}

impl ObjectiveVector {
    pub fn from_array(a: [f64; N_OBJECTIVES]) -> Self {
        Self {
            trust: a[0],
            predictability: a[1],
            mental_demand: a[2],
            perceived_safety: a[3],
            acceptance: a[4],
            aesthetics: a[5],
            time_to_cross: a[6],
        }
    }

    pub fn to_array(&self) -> [f64; N_OBJECTIVES] {
        [
            self.trust,
            self.predictability,
            self.mental_demand,
            self.perceived_safety,
            self.acceptance,
            self.aesthetics,
            self.time_to_cross,
        ]
    }

    pub fn get(&self, o: Objective) -> f64 {
        self.to_array()[o.index()]
    }

    pub fn is_in_bounds(&self) -> bool {
        self.to_array().iter().all(|v| (-1.0..=1.0).contains(v))
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Scores a response into raw objective values.
pub fn score_questionnaire(
    resp: &QuestionnaireResponse,
    scales: &ObjectiveScales,
) -> Result<RawObjectives, ScaleError> {
    resp.validate(scales)?;
    let p = &scales.predictability;
    let reversed = |x: i32| p.lo + p.hi - x as f64;
    let pi = &resp.predictability_items;
    let predictability = mean(&[
        pi[0] as f64,
        pi[1] as f64,
        reversed(pi[2]),
        reversed(pi[3]),
    ]);
    let trust = mean(&resp.trust_items.map(f64::from));
    let safety = mean(&resp.safety_items.map(f64::from));
    let acceptance = mean(&[resp.usefulness as f64, resp.satisfaction as f64]);
    Ok(RawObjectives([
        trust,
        predictability,
        resp.mental_demand as f64,
        safety,
        acceptance,
        resp.visual_appeal as f64,
        resp.time_to_cross_s,
    ]))
}

/// Scores and normalizes in one step.
pub fn objective_vector(
    resp: &QuestionnaireResponse,
    scales: &ObjectiveScales,
) -> Result<(RawObjectives, ObjectiveVector), ScaleError> {
    let raw = score_questionnaire(resp, scales)?;
    Ok((raw, scales.normalize(&raw)))
}

/// True iff every subjective item carries its best rating. The crossing time
/// is a measurement, not a rating, and is ignored.
pub fn is_perfect_rating(resp: &QuestionnaireResponse, scales: &ObjectiveScales) -> bool {
    let p = &scales.predictability;
    resp.trust_items.iter().all(|&v| v as f64 == scales.trust.hi)
        && resp.predictability_items[..2].iter().all(|&v| v as f64 == p.hi)
        && resp.predictability_items[2..].iter().all(|&v| v as f64 == p.lo)
        && resp.mental_demand as f64 == scales.mental_demand.lo
        && resp.safety_items.iter().all(|&v| v as f64 == scales.perceived_safety.hi)
        && resp.usefulness as f64 == scales.acceptance.hi
        && resp.satisfaction as f64 == scales.acceptance.hi
        && resp.visual_appeal as f64 == scales.aesthetics.hi
}
