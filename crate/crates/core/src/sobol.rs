//! Unscrambled Sobol sequence in Gray-code order.
//!
//! Direction numbers are the first entries of Joe & Kuo's
//! `new-joe-kuo-6.21201` table, enough for the nine design dimensions.

const BITS: usize = 32;

/// `(s, a, m)` per dimension, starting at dimension 2. Dimension 1 is the
/// van der Corput sequence.
const DIRECTIONS: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
];

pub const MAX_DIM: usize = DIRECTIONS.len() + 1;

#[derive(Debug, Clone)]
pub struct Sobol {
    v: Vec<[u32; BITS]>,
    shift: Vec<u32>,
}

impl Sobol {
    pub fn new(dim: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "Sobol dimension must be in 1..={MAX_DIM}"
        );
        let mut v = Vec::with_capacity(dim);
        let mut first = [0u32; BITS];
        for (k, slot) in first.iter_mut().enumerate() {
            *slot = 1 << (BITS - 1 - k);
        }
        v.push(first);
        for &(s, a, m) in &DIRECTIONS[..dim - 1] {
            let s = s as usize;
            let mut dirs = [0u32; BITS];
            for k in 0..s {
                dirs[k] = m[k] << (BITS - 1 - k);
            }
            for k in s..BITS {
                let mut x = dirs[k - s] ^ (dirs[k - s] >> s);
                for j in 1..s {
                    if (a >> (s - 1 - j)) & 1 == 1 {
                        x ^= dirs[k - j];
                    }
                }
                dirs[k] = x;
            }
            v.push(dirs);
        }
        Self {
            v,
            shift: vec![0; dim],
        }
    }

    /// Applies a digital shift: every coordinate is XOR-ed with the given
    /// 32-bit mask. Preserves the net structure of the sequence.
    pub fn with_digital_shift(mut self, masks: &[u32]) -> Self {
        assert_eq!(masks.len(), self.v.len());
        self.shift = masks.to_vec();
        self
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// Point at `index` (index 0 is the origin of the unshifted sequence).
    pub fn point(&self, index: u32) -> Vec<f64> {
        let gray = index ^ (index >> 1);
        self.v
            .iter()
            .zip(&self.shift)
            .map(|(dirs, &mask)| {
                let mut x = mask;
                let mut g = gray;
                let mut k = 0;
                while g != 0 {
                    if g & 1 == 1 {
                        x ^= dirs[k];
                    }
                    g >>= 1;
                    k += 1;
                }
                x as f64 / (1u64 << BITS) as f64
            })
            .collect()
    }

    /// `count` consecutive points starting at `start`.
    pub fn points(&self, start: u32, count: usize) -> Vec<Vec<f64>> {
        (0..count as u32).map(|i| self.point(start + i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from scipy.stats.qmc.Sobol(d=9, scramble=False).
    const REFERENCE: [[f64; 9]; 8] = [
        [0.0; 9],
        [0.5; 9],
        [0.75, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75],
        [0.25, 0.75, 0.75, 0.75, 0.25, 0.25, 0.75, 0.25, 0.25],
        [0.375, 0.375, 0.625, 0.875, 0.375, 0.125, 0.375, 0.875, 0.875],
        [0.875, 0.875, 0.125, 0.375, 0.875, 0.625, 0.875, 0.375, 0.375],
        [0.625, 0.125, 0.875, 0.625, 0.625, 0.875, 0.125, 0.125, 0.125],
        [0.125, 0.625, 0.375, 0.125, 0.125, 0.375, 0.625, 0.625, 0.625],
    ];

    #[test]
    fn matches_reference_prefix() {
        let s = Sobol::new(9);
        for (i, row) in REFERENCE.iter().enumerate() {
            assert_eq!(s.point(i as u32), row.to_vec(), "index {i}");
        }
        let p = s.point(15);
        assert_eq!(
            p,
            vec![0.0625, 0.9375, 0.5625, 0.3125, 0.6875, 0.1875, 0.8125, 0.3125, 0.3125]
        );
    }

    #[test]
    fn matches_reference_deep_index() {
        // scipy: fast_forward(1000) then two draws, printed to 6 decimals
        let s = Sobol::new(9);
        let want = [
            [0.219727, 0.09668, 0.518555, 0.676758, 0.280273, 0.907227, 0.045898, 0.899414, 0.500977],
            [0.719727, 0.59668, 0.018555, 0.176758, 0.780273, 0.407227, 0.545898, 0.399414, 0.000977],
        ];
        for (k, row) in want.iter().enumerate() {
            let p = s.point(1000 + k as u32);
            for (a, b) in p.iter().zip(row) {
                assert!((a - b).abs() < 1e-6, "{p:?}");
            }
        }
    }

    #[test]
    fn one_dimensional_stratification() {
        // The first 2^k points hit every cell of width 2^-k exactly once.
        let s = Sobol::new(9);
        let pts = s.points(0, 64);
        for d in 0..9 {
            let mut seen = [false; 64];
            for p in &pts {
                seen[(p[d] * 64.0) as usize] = true;
            }
            assert!(seen.iter().all(|&b| b), "dim {d}");
        }
    }

    #[test]
    fn digital_shift_keeps_stratification() {
        let s = Sobol::new(3).with_digital_shift(&[0xdead_beef, 0x1234_5678, 0x0f0f_0f0f]);
        let pts = s.points(0, 32);
        for d in 0..3 {
            let mut seen = [false; 32];
            for p in &pts {
                assert!((0.0..1.0).contains(&p[d]));
                seen[(p[d] * 32.0) as usize] = true;
            }
            assert!(seen.iter().all(|&b| b));
        }
    }
}
