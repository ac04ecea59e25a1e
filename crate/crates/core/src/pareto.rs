//! Dominance, Pareto-front extraction, exact hypervolume (WFG) and the
//! disjoint box decomposition of the non-dominated region.
//!
//! All routines assume maximization and accept objective vectors of any
//! dimension; the engine itself always works in seven dimensions.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Offset of the default reference point below the `[-1, 1]` objective box.
pub const REFERENCE_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParetoError {
    #[error("empty input")]
    EmptyInput,
    #[error("point {index} does not dominate the reference point")]
    ReferenceViolation { index: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// The reference point used for normalized objectives.
pub fn default_reference(dim: usize) -> Vec<f64> {
    vec![-1.0 - REFERENCE_MARGIN; dim]
}

/// `a` dominates `b`: no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

/// Indices of the non-dominated points, ascending. Among identical vectors
/// only the first occurrence is kept.
pub fn nondominated_indices<P: AsRef<[f64]>>(points: &[P]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    // Lexicographically descending: a point can only be dominated by points
    // sorted before it. Ties keep the lower index first.
    order.sort_by(|&i, &j| {
        let (a, b) = (points[i].as_ref(), points[j].as_ref());
        for (x, y) in a.iter().zip(b) {
            match y.partial_cmp(x).unwrap_or(Ordering::Equal) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        i.cmp(&j)
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let p = points[i].as_ref();
        if !kept.iter().any(|&k| weakly_dominates(points[k].as_ref(), p)) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    /// Position of the point in the input sequence (e.g. the history).
    pub index: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub points: Vec<FrontPoint>,
    pub reference: Vec<f64>,
}

impl ParetoFront {
    /// An empty front, as exists before any observation.
    pub fn empty(reference: Vec<f64>) -> Self {
        Self {
            points: Vec::new(),
            reference,
        }
    }

    pub fn dim(&self) -> usize {
        self.reference.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.index).collect()
    }

    pub fn values(&self) -> Vec<&[f64]> {
        self.points.iter().map(|p| p.values.as_slice()).collect()
    }

    fn check_reference(&self) -> Result<(), ParetoError> {
        for p in &self.points {
            if p.values.len() != self.dim() {
                return Err(ParetoError::DimensionMismatch {
                    expected: self.dim(),
                    got: p.values.len(),
                });
            }
            if p.values.iter().zip(&self.reference).any(|(v, r)| v < r) {
                return Err(ParetoError::ReferenceViolation { index: p.index });
            }
        }
        Ok(())
    }
}

/// Pareto front with the default reference point.
pub fn pareto_front<P: AsRef<[f64]>>(points: &[P]) -> Result<ParetoFront, ParetoError> {
    let dim = points.first().ok_or(ParetoError::EmptyInput)?.as_ref().len();
    pareto_front_with_reference(points, default_reference(dim))
}

pub fn pareto_front_with_reference<P: AsRef<[f64]>>(
    points: &[P],
    reference: Vec<f64>,
) -> Result<ParetoFront, ParetoError> {
    if points.is_empty() {
        return Err(ParetoError::EmptyInput);
    }
    for p in points {
        if p.as_ref().len() != reference.len() {
            return Err(ParetoError::DimensionMismatch {
                expected: reference.len(),
                got: p.as_ref().len(),
            });
        }
    }
    let points = nondominated_indices(points)
        .into_iter()
        .map(|index| FrontPoint {
            index,
            values: points[index].as_ref().to_vec(),
        })
        .collect();
    Ok(ParetoFront { points, reference })
}

/// Exact hypervolume dominated by the front above its reference point.
pub fn hypervolume(front: &ParetoFront) -> Result<f64, ParetoError> {
    front.check_reference()?;
    let pts: Vec<Vec<f64>> = front.points.iter().map(|p| p.values.clone()).collect();
    Ok(hypervolume_of(pts, &front.reference))
}

/// Hypervolume of an arbitrary point set (dominated points allowed). Points
/// must weakly dominate `reference`.
pub fn hypervolume_of(points: Vec<Vec<f64>>, reference: &[f64]) -> f64 {
    let mut pts = nondominated(points);
    wfg(&mut pts, reference)
}

fn nondominated(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let idx = nondominated_indices(&points);
    let mut keep = vec![false; points.len()];
    for i in idx {
        keep[i] = true;
    }
    points
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}

fn box_volume(p: &[f64], reference: &[f64]) -> f64 {
    p.iter().zip(reference).map(|(x, r)| x - r).product()
}

/// WFG: sum of exclusive contributions, each computed from the limit set of
/// the points that follow it. `points` must be mutually non-dominated.
fn wfg(points: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    let d = reference.len();
    match points.len() {
        0 => return 0.0,
        1 => return box_volume(&points[0], reference),
        _ => {}
    }
    if d == 1 {
        return points.iter().map(|p| p[0]).fold(f64::MIN, f64::max) - reference[0];
    }
    if d == 2 {
        return hv2(points, reference);
    }
    // Sorting by the last objective keeps limit sets small.
    points.sort_by(|a, b| b[d - 1].partial_cmp(&a[d - 1]).unwrap_or(Ordering::Equal));
    let mut total = 0.0;
    for i in 0..points.len() {
        let p = &points[i];
        let limited: Vec<Vec<f64>> = points[i + 1..]
            .iter()
            .map(|q| q.iter().zip(p).map(|(a, b)| a.min(*b)).collect())
            .collect();
        let mut limited = nondominated(limited);
        total += box_volume(p, reference) - wfg(&mut limited, reference);
    }
    total
}

fn hv2(points: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    points.sort_by(|a, b| b[0].partial_cmp(&a[0]).unwrap_or(Ordering::Equal));
    let mut area = 0.0;
    let mut y_max = reference[1];
    for p in points.iter() {
        if p[1] > y_max {
            area += (p[0] - reference[0]) * (p[1] - y_max);
            y_max = p[1];
        }
    }
    area
}

/// Disjoint axis-aligned boxes whose union is the part of
/// `[reference, upper]` not weakly dominated by any front point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDecomposition {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    reference: Vec<f64>,
    upper_corner: Vec<f64>,
}

impl BoxDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.lower.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn upper_corner(&self) -> &[f64] {
        &self.upper_corner
    }

    pub fn boxes(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        self.lower
            .chunks_exact(self.dim)
            .zip(self.upper.chunks_exact(self.dim))
    }

    pub fn volume(&self) -> f64 {
        self.boxes()
            .map(|(l, u)| l.iter().zip(u).map(|(a, b)| b - a).product::<f64>())
            .sum()
    }

    /// Hypervolume gained by adding `y` to the front: the overlap of
    /// `[reference, y]` with the non-dominated boxes.
    pub fn improvement(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.dim);
        improvement_in(&self.lower, &self.upper, self.dim, y)
    }

    /// Boxes that can intersect `[reference, y]` for some `y <= y_max`.
    pub fn restricted_to(&self, y_max: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::new();
        let mut up = Vec::new();
        for (l, u) in self.boxes() {
            if l.iter().zip(y_max).all(|(a, y)| a < y) {
                lo.extend_from_slice(l);
                up.extend_from_slice(u);
            }
        }
        (lo, up)
    }
}

/// Summed overlap of `[-inf, y]` with flat-stored boxes.
pub(crate) fn improvement_in(lower: &[f64], upper: &[f64], dim: usize, y: &[f64]) -> f64 {
    let mut total = 0.0;
    'boxes: for (l, u) in lower.chunks_exact(dim).zip(upper.chunks_exact(dim)) {
        let mut vol = 1.0;
        for k in 0..dim {
            let side = y[k].min(u[k]) - l[k];
            if side <= 0.0 {
                continue 'boxes;
            }
            vol *= side;
        }
        total += vol;
    }
    total
}

/// Decomposes the non-dominated region of `front` within
/// `[reference, upper_corner]`, with the upper corner at `+1` everywhere.
pub fn box_decomposition(front: &ParetoFront) -> Result<BoxDecomposition, ParetoError> {
    box_decomposition_with_upper(front, vec![1.0; front.dim()])
}

pub fn box_decomposition_with_upper(
    front: &ParetoFront,
    upper_corner: Vec<f64>,
) -> Result<BoxDecomposition, ParetoError> {
    front.check_reference()?;
    let dim = front.dim();
    if upper_corner.len() != dim {
        return Err(ParetoError::DimensionMismatch {
            expected: dim,
            got: upper_corner.len(),
        });
    }
    let pts: Vec<Vec<f64>> = front
        .points
        .iter()
        .map(|p| {
            p.values
                .iter()
                .zip(&upper_corner)
                .map(|(v, u)| v.min(*u))
                .collect()
        })
        .collect();
    let pts = nondominated(pts);
    let mut out = BoxDecomposition {
        dim,
        lower: Vec::new(),
        upper: Vec::new(),
        reference: front.reference.clone(),
        upper_corner,
    };
    if dim > 0 {
        let mut suffix = Vec::with_capacity(dim);
        let (reference, upper) = (out.reference.clone(), out.upper_corner.clone());
        split(&pts, dim, &reference, &upper, &mut suffix, &mut out);
    }
    Ok(out)
}

fn emit(
    first: &[(f64, f64)],
    suffix: &[(f64, f64)],
    out: &mut BoxDecomposition,
) {
    let intervals = first.iter().chain(suffix.iter().rev());
    for &(lo, hi) in intervals {
        out.lower.push(lo);
        out.upper.push(hi);
    }
}

fn emit_full(
    dims: usize,
    lower: &[f64],
    upper: &[f64],
    suffix: &[(f64, f64)],
    out: &mut BoxDecomposition,
) {
    let first: Vec<(f64, f64)> = (0..dims).map(|k| (lower[k], upper[k])).collect();
    emit(&first, suffix, out);
}

/// Recursive slicing along the last active dimension. `suffix` holds the
/// intervals already fixed for dimensions `dims..`, innermost last.
fn split(
    points: &[Vec<f64>],
    dims: usize,
    lower: &[f64],
    upper: &[f64],
    suffix: &mut Vec<(f64, f64)>,
    out: &mut BoxDecomposition,
) {
    if points.is_empty() {
        emit_full(dims, lower, upper, suffix, out);
        return;
    }
    if dims == 1 {
        let m = points.iter().map(|p| p[0]).fold(f64::MIN, f64::max);
        if m < upper[0] {
            emit(&[(m, upper[0])], suffix, out);
        }
        return;
    }
    let k = dims - 1;
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| b[k].partial_cmp(&a[k]).unwrap_or(Ordering::Equal));

    let top = sorted[0][k];
    if top < upper[k] {
        suffix.push((top, upper[k]));
        emit_full(k, lower, upper, suffix, out);
        suffix.pop();
    }

    // Projected non-dominated set of all points at or above the current
    // slice. Slices over which the set does not change are merged.
    let mut active: Vec<Vec<f64>> = Vec::new();
    let mut pending: Option<(Vec<Vec<f64>>, f64)> = None;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i][k];
        let mut changed = false;
        while i < sorted.len() && sorted[i][k] == v {
            let proj = &sorted[i][..k];
            if !active.iter().any(|a| weakly_dominates(a, proj)) {
                active.retain(|a| !weakly_dominates(proj, a));
                active.push(proj.to_vec());
                changed = true;
            }
            i += 1;
        }
        if changed {
            if let Some((set, hi)) = pending.take() {
                slice(&set, k, lower, upper, (v, hi), suffix, out);
            }
            pending = Some((active.clone(), v));
        }
    }
    if let Some((set, hi)) = pending {
        slice(&set, k, lower, upper, (lower[k], hi), suffix, out);
    }
}

fn slice(
    set: &[Vec<f64>],
    k: usize,
    lower: &[f64],
    upper: &[f64],
    (lo, hi): (f64, f64),
    suffix: &mut Vec<(f64, f64)>,
    out: &mut BoxDecomposition,
) {
    if hi <= lo {
        return;
    }
    suffix.push((lo, hi));
    split(set, k, lower, upper, suffix, out);
    suffix.pop();
}
