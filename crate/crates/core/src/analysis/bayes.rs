//! Two-sample JZS Bayes factor and evidence categories.
//!
//! The Cauchy prior on effect size is written as a normal scale mixture,
//! `delta | g ~ N(0, g)` with `g ~ InvGamma(1/2, r^2/2)`, so BF10 becomes a
//! one-dimensional integral over `g`. It is evaluated in `u = ln g`,
//! shifted by its peak to stay finite for very large t.

use serde::{Deserialize, Serialize};

use super::quad::integrate;
use super::StatsError;

pub const DEFAULT_CAUCHY_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvidenceLabel {
    ExtremeEquality,
    StrongEquality,
    ModerateEquality,
    Inconclusive,
    ModerateDifference,
    StrongDifference,
    ExtremeDifference,
}

impl EvidenceLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EvidenceLabel::ExtremeEquality => "extreme-equality",
            EvidenceLabel::StrongEquality => "strong-equality",
            EvidenceLabel::ModerateEquality => "moderate-equality",
            EvidenceLabel::Inconclusive => "inconclusive",
            EvidenceLabel::ModerateDifference => "moderate-difference",
            EvidenceLabel::StrongDifference => "strong-difference",
            EvidenceLabel::ExtremeDifference => "extreme-difference",
        }
    }
}

impl std::fmt::Display for EvidenceLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Thresholds are exclusive on the outer side: 0.3 and 3 are inconclusive,
/// 10 is moderate and 100 is strong.
pub fn categorize_bf(bf10: f64) -> EvidenceLabel {
    use EvidenceLabel::*;
    match bf10 {
        b if b < 0.01 => ExtremeEquality,
        b if b < 0.1 => StrongEquality,
        b if b < 0.3 => ModerateEquality,
        b if b <= 3.0 => Inconclusive,
        b if b <= 10.0 => ModerateDifference,
        b if b <= 100.0 => StrongDifference,
        _ => ExtremeDifference,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesFactorResult {
    pub bf10: f64,
    pub log_bf10: f64,
    /// Quadrature error estimate relative to the integral, in percent.
    pub error_pct: f64,
    pub t: f64,
    pub df: f64,
    pub evidence: EvidenceLabel,
}

/// Pooled-variance two-sample t statistic and its degrees of freedom.
pub fn t_statistic(x: &[f64], y: &[f64]) -> Result<(f64, f64), StatsError> {
    for (name, s) in [("x", x), ("y", y)] {
        if s.len() < 2 {
            return Err(StatsError::TooFewSamples { sample: name, len: s.len() });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let ss = |s: &[f64], m: f64| s.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    let (mx, my) = (mean(x), mean(y));
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let df = n1 + n2 - 2.0;
    let pooled = (ss(x, mx) + ss(y, my)) / df;
    let scale = mx.abs().max(my.abs()).max(1.0);
    if !(pooled > (f64::EPSILON * scale).powi(2)) {
        return Err(StatsError::DegenerateSample);
    }
    let t = (mx - my) / (pooled * (1.0 / n1 + 1.0 / n2)).sqrt();
    Ok((t, df))
}

/// `ln BF10` for a pooled two-sample t statistic, and the relative error of
/// the underlying integral.
pub fn jzs_log_bf10(t: f64, n1: usize, n2: usize, cauchy_scale: f64) -> (f64, f64) {
    let n_eff = (n1 * n2) as f64 / (n1 + n2) as f64;
    let nu = (n1 + n2) as f64 - 2.0;
    let r2 = cauchy_scale * cauchy_scale;
    let null = (1.0 + t * t / nu).ln();
    let log_h = |u: f64| {
        let g = u.exp();
        let a = (n_eff * g).ln_1p();
        cauchy_scale.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * u - r2 / (2.0 * g) - 0.5 * a
            - 0.5 * (nu + 1.0) * ((t * t / ((1.0 + n_eff * g) * nu)).ln_1p() - null)
    };

    // log_h is unimodal in u; a coarse scan finds its peak and the region
    // where it is within e^-60 of it.
    let grid: Vec<f64> = (0..=2000).map(|i| -40.0 + 0.1 * i as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&u| log_h(u)).collect();
    let peak = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let keep: Vec<usize> = (0..grid.len()).filter(|&i| vals[i] > peak - 60.0).collect();
    let lo = grid[keep[0]] - 1.0;
    let hi = grid[*keep.last().expect("peak is kept")] + 1.0;

    let q = integrate(|u| (log_h(u) - peak).exp(), lo, hi, 0.0, 1e-10, 4000);
    (peak + q.value.ln(), q.abs_error / q.value)
}

pub fn bayes_factor_ttest(x: &[f64], y: &[f64], cauchy_scale: f64) -> Result<BayesFactorResult, StatsError> {
    if !(cauchy_scale.is_finite() && cauchy_scale > 0.0) {
        return Err(StatsError::InvalidInput("cauchy_scale must be positive".into()));
    }
    let (t, df) = t_statistic(x, y)?;
    let (log_bf10, rel_err) = jzs_log_bf10(t, x.len(), y.len(), cauchy_scale);
    let bf10 = log_bf10.exp();
    Ok(BayesFactorResult {
        bf10,
        log_bf10,
        error_pct: 100.0 * rel_err,
        t,
        df,
        evidence: categorize_bf(bf10),
    })
}
