//! Minimal Sobol low-discrepancy sequence (Gray-code construction) for the
//! deterministic sampling used by the cone certification. Direction numbers
//! cover the first 13 dimensions, plenty for desk-scale phase spaces.

/// Primitive polynomial degrees, coefficients, and initial direction numbers
/// for dimensions 2..=13 (dimension 1 is the van der Corput sequence).
const POLYS: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
];

const BITS: usize = 32;

pub struct Sobol {
    dim: usize,
    v: Vec<[u32; BITS]>,
    x: Vec<u32>,
    index: u64,
}

impl Sobol {
    /// A `dim`-dimensional sequence; `skip` initial points are discarded
    /// (the deterministic "seed").
    pub fn new(dim: usize, skip: u64) -> Self {
        assert!(dim >= 1 && dim <= POLYS.len() + 1, "sobol table covers up to {} dims", POLYS.len() + 1);
        let mut v = Vec::with_capacity(dim);
        // Dimension 1: v[c] = 2^(31-c).
        let mut first = [0u32; BITS];
        for (c, slot) in first.iter_mut().enumerate() {
            *slot = 1 << (31 - c);
        }
        v.push(first);
        for j in 1..dim {
            let (s, a, m_init) = POLYS[j - 1];
            let s = s as usize;
            let mut m = [0u64; BITS];
            for i in 0..s {
                m[i] = m_init[i] as u64;
            }
            for i in s..BITS {
                let mut mi = m[i - s] ^ (m[i - s] << s);
                for k in 1..s {
                    let bit = (a >> (s - 1 - k)) & 1;
                    if bit == 1 {
                        mi ^= m[i - k] << k;
                    }
                }
                m[i] = mi;
            }
            let mut vj = [0u32; BITS];
            for c in 0..BITS {
                vj[c] = (m[c] as u32) << (31 - c);
            }
            v.push(vj);
        }
        let mut s = Sobol { dim, v, x: vec![0; dim], index: 0 };
        for _ in 0..skip {
            s.advance();
        }
        s
    }

    fn advance(&mut self) {
        // Gray-code step: flip the direction number of the lowest zero bit.
        let c = (!self.index).trailing_zeros() as usize;
        let c = c.min(BITS - 1);
        for j in 0..self.dim {
            self.x[j] ^= self.v[j][c];
        }
        self.index += 1;
    }

    /// Next point in `[0, 1)^dim`.
    pub fn next_point(&mut self) -> Vec<f64> {
        self.advance();
        self.x.iter().map(|&xi| xi as f64 / 4294967296.0).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn is_deterministic_and_spread() {
        let mut a = Sobol::new(6, 0);
        let mut b = Sobol::new(6, 0);
        for _ in 0..100 {
            assert_eq!(a.next_point(), b.next_point());
        }
        // Low-discrepancy sanity: the first 256 points of dim 2 land one per
        // 16-cell stratum in each axis pairings coarse check: mean near 1/2.
        let mut s = Sobol::new(2, 0);
        let mut mean = [0.0f64; 2];
        for _ in 0..256 {
            let p = s.next_point();
            mean[0] += p[0];
            mean[1] += p[1];
        }
        assert!((mean[0] / 256.0 - 0.5).abs() < 0.01);
        assert!((mean[1] / 256.0 - 0.5).abs() < 0.01);
    }

    #[test]
    fn skip_acts_as_seed() {
        let mut a = Sobol::new(3, 5);
        let mut b = Sobol::new(3, 0);
        for _ in 0..5 {
            b.next_point();
        }
        assert_eq!(a.next_point(), b.next_point());
    }
}
