//! The nine-parameter eHMI design vector and its resolution into a
//! concrete rendering description.
//!
//! Every point of the unit box `[0, 1]^9` is a feasible design: the vertical
//! position is clamped so that the light rectangle never leaves the allowed
//! front-face region, which keeps the search space box-shaped.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of design parameters.
pub const N_PARAMS: usize = 9;

/// Highest blink frequency reachable at `blink = 1`.
pub const MAX_BLINK_HZ: f64 = 4.0;

/// Parameter names in storage order `p1..p9`.
pub const PARAM_NAMES: [&str; N_PARAMS] = [
    "r",
    "g",
    "b",
    "alpha",
    "blink",
    "width",
    "height",
    "vertical_position",
    "loudness",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("expected {N_PARAMS} design parameters, got {0}")]
    WrongArity(usize),
    #[error("parameter p{} ({}) is not finite", .index + 1, PARAM_NAMES[*.index])]
    NotFinite { index: usize },
    #[error("parameter p{} ({}) = {value} lies outside [0, 1]", .index + 1, PARAM_NAMES[*.index])]
    OutOfRange { index: usize, value: f64 },
}

/// A validated design `p1..p9`, each component in `[0, 1]`.
///
/// Serializes as a plain ordered array of nine numbers.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DesignParams([f64; N_PARAMS]);

impl DesignParams {
    /// Validates raw components. Values are kept unchanged.
    pub fn new(raw: &[f64]) -> Result<Self, DesignError> {
        if raw.len() != N_PARAMS {
            return Err(DesignError::WrongArity(raw.len()));
        }
        let mut out = [0.0; N_PARAMS];
        for (index, (&v, slot)) in raw.iter().zip(out.iter_mut()).enumerate() {
            if !v.is_finite() {
                return Err(DesignError::NotFinite { index });
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(DesignError::OutOfRange { index, value: v });
            }
            *slot = v;
        }
        Ok(Self(out))
    }

    /// Builds a design by clamping every component into `[0, 1]`.
    ///
    /// Panics on non-finite input.
    pub fn clamped(raw: [f64; N_PARAMS]) -> Self {
        assert!(raw.iter().all(|v| v.is_finite()), "non-finite design component");
        Self(raw.map(|v| v.clamp(0.0, 1.0)))
    }

    pub fn splat(v: f64) -> Result<Self, DesignError> {
        Self::new(&[v; N_PARAMS])
    }

    pub fn as_array(&self) -> &[f64; N_PARAMS] {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn r(&self) -> f64 {
        self.0[0]
    }
    pub fn g(&self) -> f64 {
        self.0[1]
    }
    pub fn b(&self) -> f64 {
        self.0[2]
    }
    pub fn alpha(&self) -> f64 {
        self.0[3]
    }
    pub fn blink(&self) -> f64 {
        self.0[4]
    }
    pub fn width(&self) -> f64 {
        self.0[5]
    }
    pub fn height(&self) -> f64 {
        self.0[6]
    }
    pub fn vertical_position(&self) -> f64 {
        self.0[7]
    }
    pub fn loudness(&self) -> f64 {
        self.0[8]
    }

    pub fn resolve(&self) -> EhmiRendering {
        resolve_geometry(self)
    }
}

impl fmt::Debug for DesignParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("DesignParams").field(&self.0).finish()
    }
}

impl std::ops::Index<usize> for DesignParams {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for DesignParams {
    type Error = DesignError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(&v)
    }
}

impl From<DesignParams> for Vec<f64> {
    fn from(p: DesignParams) -> Self {
        p.0.to_vec()
    }
}

/// Validates nine raw reals into a [`DesignParams`].
pub fn validate_params(raw: &[f64]) -> Result<DesignParams, DesignError> {
    DesignParams::new(raw)
}

/// Maps the normalized blink parameter to a frequency in Hz.
///
/// The reciprocal form `1 / ((1 / blink) * 0.25)` reduces to `4 * blink`.
/// `blink = 0` yields 0 Hz, meaning a constantly-on display.
pub fn blink_frequency_hz(blink: f64) -> f64 {
    if blink <= 0.0 {
        0.0
    } else {
        1.0 / ((1.0 / blink) * 0.25)
    }
}

/// Axis-aligned light rectangle in coordinates normalized to the allowed
/// front-face region. `center_u` is fixed on the vehicle's vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center_u: f64,
    pub center_v: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Whether the rectangle lies inside the unit region (with a little
    /// round-off slack).
    pub fn is_contained(&self) -> bool {
        const EPS: f64 = 1e-12;
        self.center_v - self.h / 2.0 >= -EPS
            && self.center_v + self.h / 2.0 <= 1.0 + EPS
            && self.center_u - self.w / 2.0 >= -EPS
            && self.center_u + self.w / 2.0 <= 1.0 + EPS
    }
}

/// A design resolved into renderable quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EhmiRendering {
    /// RGBA, each channel in `[0, 1]`. Alpha is plain opacity.
    pub color: [f64; 4],
    pub blink_hz: f64,
    pub rect: Rect,
    pub loudness: f64,
}

pub fn resolve_geometry(params: &DesignParams) -> EhmiRendering {
    let w = params.width();
    let h = params.height();
    let half = h / 2.0;
    let center_v = params.vertical_position().clamp(half, 1.0 - half);
    EhmiRendering {
        color: [params.r(), params.g(), params.b(), params.alpha()],
        blink_hz: blink_frequency_hz(params.blink()),
        rect: Rect {
            center_u: 0.5,
            center_v,
            w,
            h,
        },
        loudness: params.loudness(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn midpoint_is_valid() {
        let p = validate_params(&[0.5; 9]).unwrap();
        assert_eq!(p.as_array(), &[0.5; 9]);
    }

    #[test]
    fn rejects_bad_input() {
        let mut raw = [0.5; 9];
        raw[0] = 1.2;
        assert_eq!(
            validate_params(&raw),
            Err(DesignError::OutOfRange { index: 0, value: 1.2 })
        );
        raw[0] = 0.5;
        raw[4] = f64::NAN;
        assert_eq!(validate_params(&raw), Err(DesignError::NotFinite { index: 4 }));
        raw[4] = f64::INFINITY;
        assert_eq!(validate_params(&raw), Err(DesignError::NotFinite { index: 4 }));
        assert_eq!(validate_params(&[0.5; 8]), Err(DesignError::WrongArity(8)));
        assert_eq!(validate_params(&[0.5; 10]), Err(DesignError::WrongArity(10)));
    }

    #[test]
    fn blink_examples() {
        assert!((blink_frequency_hz(0.8) - 3.2).abs() < 1e-12);
        assert!((blink_frequency_hz(1.0) - 4.0).abs() < 1e-12);
        assert_eq!(blink_frequency_hz(0.0), 0.0);
        assert!((blink_frequency_hz(0.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn blink_is_linear_on_grid() {
        for i in 1..=1000 {
            let x = i as f64 / 1000.0;
            let hz = blink_frequency_hz(x);
            assert!((hz - 4.0 * x).abs() < 1e-12, "x={x}");
            assert!((0.0..=MAX_BLINK_HZ).contains(&hz));
        }
    }

    #[test]
    fn full_region_rectangle() {
        let mut raw = [0.5; 9];
        raw[5] = 1.0;
        raw[6] = 1.0;
        let r = resolve_geometry(&DesignParams::new(&raw).unwrap()).rect;
        assert_eq!(r, Rect { center_u: 0.5, center_v: 0.5, w: 1.0, h: 1.0 });
    }

    #[test]
    fn zero_height_keeps_position() {
        let mut raw = [0.5; 9];
        raw[6] = 0.0;
        raw[7] = 0.93;
        let r = resolve_geometry(&DesignParams::new(&raw).unwrap()).rect;
        assert_eq!(r.h, 0.0);
        assert_eq!(r.center_v, 0.93);
    }

    #[test]
    fn top_flush_clamp() {
        let mut raw = [0.5; 9];
        raw[5] = 0.5;
        raw[6] = 0.4;
        raw[7] = 1.0;
        let r = resolve_geometry(&DesignParams::new(&raw).unwrap()).rect;
        assert!((r.center_v - 0.8).abs() < 1e-15);
        assert!(r.is_contained());
    }

    #[test]
    fn serializes_as_ordered_array() {
        let p = DesignParams::new(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9]");
        let back: DesignParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<DesignParams>("[0.1,2.0,0.3,0.4,0.5,0.6,0.7,0.8,0.9]").is_err());
    }

    proptest! {
        #[test]
        fn resolve_is_total_and_contained(raw in proptest::array::uniform9(0.0f64..=1.0)) {
            let p = validate_params(&raw).unwrap();
            let a = resolve_geometry(&p);
            prop_assert!(a.rect.is_contained());
            prop_assert!((0.0..=MAX_BLINK_HZ).contains(&a.blink_hz));
            prop_assert_eq!(a, resolve_geometry(&p));
            prop_assert_eq!(a.color, [raw[0], raw[1], raw[2], raw[3]]);
            prop_assert_eq!(a.loudness, raw[8]);
        }
    }
}
