//! Pearson correlations with Holm-adjusted p-values, and type-7 quantiles.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatsError;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Pearson r and its two-sided p-value under the null of zero correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::InvalidInput("columns differ in length".into()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewSamples { sample: "records", len: n });
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateColumn(if sxx == 0.0 { 0 } else { 1 }));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        (2.0 * dist.cdf(-t.abs())).min(1.0)
    };
    Ok((r, p))
}

/// Holm step-down adjustment. Output is in input order.
pub fn holm_adjust(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((m - rank) as f64 * p[i]).min(1.0));
        adjusted[i] = running;
    }
    adjusted
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub r: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

/// Pairwise correlations of the given columns. The diagonal is `r = 1`,
/// `p = 0`; off-diagonal p-values are Holm-adjusted over the `k(k-1)/2`
/// distinct pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub n: usize,
    pub cells: Vec<Vec<CorrelationCell>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> &CorrelationCell {
        &self.cells[i][j]
    }
}

pub fn correlation_matrix(names: &[&str], columns: &[Vec<f64>]) -> Result<CorrelationMatrix, StatsError> {
    let k = columns.len();
    let n = columns.first().map_or(0, Vec::len);
    if n < 3 {
        return Err(StatsError::TooFewSamples { sample: "records", len: n });
    }
    for (i, c) in columns.iter().enumerate() {
        if c.len() != n {
            return Err(StatsError::InvalidInput("columns differ in length".into()));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        if c.iter().all(|v| *v == c[0]) {
            return Err(StatsError::DegenerateColumn(i));
        }
    }
    let diag = CorrelationCell { r: 1.0, p_raw: 0.0, p_adjusted: 0.0, significant: true };
    let mut cells = vec![vec![diag; k]; k];
    let mut pairs = Vec::new();
    let mut raw = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let (r, p) = pearson(&columns[i], &columns[j])?;
            cells[i][j].r = r;
            pairs.push((i, j));
            raw.push(p);
        }
    }
    for (&(i, j), (&p, adj)) in pairs.iter().zip(raw.iter().zip(holm_adjust(&raw))) {
        let cell = CorrelationCell {
            r: cells[i][j].r,
            p_raw: p,
            p_adjusted: adj,
            significant: adj < SIGNIFICANCE_LEVEL,
        };
        cells[i][j] = cell;
        cells[j][i] = cell;
    }
    Ok(CorrelationMatrix {
        names: names.iter().map(|s| s.to_string()).collect(),
        n,
        cells,
    })
}

/// Linear-interpolation quantile (Hyndman & Fan type 7) of unsorted data.
pub fn quantile_type7(data: &[f64], q: f64) -> Option<f64> {
    if data.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut s = data.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    Some(s[lo] + (h - lo as f64) * (s[hi] - s[lo]))
}

/// `(q1, q3)` under type-7 interpolation.
pub fn iqr(data: &[f64]) -> Option<(f64, f64)> {
    Some((quantile_type7(data, 0.25)?, quantile_type7(data, 0.75)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantiles_by_hand() {
        assert_eq!(iqr(&[3.0, 0.0, 2.0, 1.0]), Some((0.75, 2.25)));
        assert_eq!(iqr(&[0.5; 6]), Some((0.5, 0.5)));
        assert_eq!(iqr(&[]), None);
        assert_eq!(quantile_type7(&[4.0], 0.9), Some(4.0));
    }

    #[test]
    fn duplicated_column_is_perfectly_correlated() {
        let a: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let b: Vec<f64> = (0..10).map(|i| ((i * 7) % 10) as f64).collect();
        let m = correlation_matrix(&["a", "a2", "b"], &[a.clone(), a, b]).unwrap();
        assert_eq!(m.get(0, 1).r, 1.0);
        assert!(m.get(0, 1).significant);
        assert_eq!(m.get(1, 0), m.get(0, 1));
    }

    #[test]
    fn constant_column_is_rejected() {
        let r = correlation_matrix(&["a", "b"], &[vec![1.0, 2.0, 3.0], vec![2.0; 3]]);
        assert_eq!(r, Err(StatsError::DegenerateColumn(1)));
    }

    #[test]
    fn p_value_reference() {
        // scipy.stats.pearsonr([1,2,3,4,5],[2,1,4,3,5]) -> (0.8, 0.10408803866182788)
        let (r, p) = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
        assert!((p - 0.104_088_038_661_827_88).abs() < 1e-9);
    }

    #[test]
    fn holm_by_hand() {
        // sorted p: 0.01 (x4), 0.02 (x3), 0.03 (x2), 0.5 (x1)
        let adj = holm_adjust(&[0.03, 0.5, 0.01, 0.02]);
        let want = [0.06, 0.5, 0.04, 0.06];
        for (a, w) in adj.iter().zip(want) {
            assert!((a - w).abs() < 1e-12, "{adj:?}");
        }
    }

    /// Step-down definition: the adjusted value of the k-th smallest p is
    /// the running maximum of `(m - j) * p_(j)` for `j <= k`, capped at 1.
    fn holm_oracle(p: &[f64]) -> Vec<f64> {
        let m = p.len();
        let mut sorted: Vec<(f64, usize)> = p.iter().cloned().zip(0..).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = vec![0.0; m];
        for k in 0..m {
            let v = (0..=k).map(|j| ((m - j) as f64 * sorted[j].0).min(1.0)).fold(0.0, f64::max);
            out[sorted[k].1] = v;
        }
        out
    }

    proptest! {
        #[test]
        fn holm_matches_definition(p in prop::collection::vec(0.0..1.0f64, 1..30)) {
            let adj = holm_adjust(&p);
            prop_assert_eq!(&adj, &holm_oracle(&p));
            let mut idx: Vec<usize> = (0..p.len()).collect();
            idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
            for w in idx.windows(2) {
                prop_assert!(adj[w[0]] <= adj[w[1]]);
            }
            for (a, r) in adj.iter().zip(&p) {
                prop_assert!(a >= r && *a <= 1.0);
            }
        }

        #[test]
        fn quartiles_are_ordered(d in prop::collection::vec(-100.0..100.0f64, 1..50)) {
            let (q1, q3) = iqr(&d).unwrap();
            prop_assert!(q1 <= q3);
        }
    }
}
