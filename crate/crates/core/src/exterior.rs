//! Index tables for the action of a sparse `n x n` matrix on the `m`-th
//! exterior power of `C^n`.
//!
//! Basis vectors are `e_I = e_{i_1} ^ ... ^ e_{i_m}` with `i_1 < ... < i_m`.
//! A matrix `A` acts as a derivation:
//! `A(e_{i_1} ^ ... ^ e_{i_m}) = sum_p e_{i_1} ^ ... ^ A e_{i_p} ^ ... ^ e_{i_m}`,
//! which is what propagating a wedge of solutions of `Y' = A Y` requires.

use num_complex::Complex64;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Term {
    pub src: usize,
    pub dst: usize,
    pub entry: usize,
    pub sign: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct ExteriorPower {
    /// Bit masks of the basis subsets, in lexicographic order.
    pub subsets: Vec<u32>,
    index: Vec<usize>,
}

impl ExteriorPower {
    pub fn new(n: usize, m: usize) -> Self {
        assert!(m >= 1 && m <= n && n <= 16);
        let mut subsets: Vec<u32> = (0u32..(1 << n)).filter(|s| s.count_ones() as usize == m).collect();
        subsets.sort_by_key(|s| sorted_members(*s));
        let mut index = vec![usize::MAX; 1 << n];
        for (k, s) in subsets.iter().enumerate() {
            index[*s as usize] = k;
        }
        ExteriorPower { subsets, index }
    }

    pub fn dim(&self) -> usize {
        self.subsets.len()
    }

    /// Position of `e_{idx[0]} ^ ... ^ e_{idx[m-1]}` (any order) as
    /// `(basis index, sign)`, or `None` when indices repeat.
    pub fn locate(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let mut mask = 0u32;
        for &i in idx {
            if mask & (1 << i) != 0 {
                return None;
            }
            mask |= 1 << i;
        }
        Some((self.index[mask as usize], permutation_sign(idx)))
    }

    /// Terms of the derivation induced by the given sparsity pattern.
    pub fn derivation_terms(&self, pattern: &[(usize, usize)]) -> Vec<Term> {
        let mut terms = Vec::new();
        for (src, &mask) in self.subsets.iter().enumerate() {
            for (entry, &(row, col)) in pattern.iter().enumerate() {
                if mask & (1 << col) == 0 {
                    continue;
                }
                if row == col {
                    terms.push(Term { src, dst: src, entry, sign: 1.0 });
                    continue;
                }
                if mask & (1 << row) != 0 {
                    continue;
                }
                let (lo, hi) = if row < col { (row, col) } else { (col, row) };
                let between = (mask >> (lo + 1)) & ((1u32 << (hi - lo - 1)) - 1);
                let sign = if between.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                let dst_mask = (mask & !(1 << col)) | (1 << row);
                terms.push(Term {
                    src,
                    dst: self.index[dst_mask as usize],
                    entry,
                    sign,
                });
            }
        }
        terms
    }
}

fn sorted_members(mask: u32) -> Vec<u32> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

/// Sign of the permutation sorting `idx` (entries assumed distinct).
pub(crate) fn permutation_sign(idx: &[usize]) -> f64 {
    let mut inversions = 0;
    for a in 0..idx.len() {
        for b in a + 1..idx.len() {
            if idx[a] > idx[b] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `out = A^{(m)} z` for one block of `dim` coefficients.
#[inline]
pub(crate) fn apply(terms: &[Term], values: &[Complex64], z: &[Complex64], out: &mut [Complex64]) {
    for o in out.iter_mut() {
        *o = Complex64::new(0.0, 0.0);
    }
    for t in terms {
        out[t.dst] += values[t.entry] * z[t.src] * t.sign;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn det(m: &DMatrix<Complex64>) -> Complex64 {
        m.clone().determinant()
    }

    #[test]
    fn derivation_matches_product_rule_for_minors() {
        // d/dt det(Y_rows) along Y' = A Y equals the derivation applied to the wedge
        let n = 4;
        let a = DMatrix::from_fn(n, n, |i, j| Complex64::new(0.3 * i as f64 - 0.7 * j as f64 + 0.1, 0.05 * (i * j) as f64));
        let y = DMatrix::from_fn(n, 2, |i, j| Complex64::new((i + 2 * j) as f64 * 0.4 - 1.0, 0.2 * i as f64));
        let ext = ExteriorPower::new(n, 2);
        let pattern: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let values: Vec<Complex64> = pattern.iter().map(|&(i, j)| a[(i, j)]).collect();
        let terms = ext.derivation_terms(&pattern);
        let wedge: Vec<Complex64> = ext
            .subsets
            .iter()
            .map(|&s| {
                let rows: Vec<usize> = (0..n).filter(|i| s & (1 << i) != 0).collect();
                det(&y.select_rows(rows.iter()))
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); ext.dim()];
        apply(&terms, &values, &wedge, &mut out);
        let ay = &a * &y;
        for (k, &s) in ext.subsets.iter().enumerate() {
            let rows: Vec<usize> = (0..n).filter(|i| s & (1 << i) != 0).collect();
            let y_rows = y.select_rows(rows.iter());
            let ay_rows = ay.select_rows(rows.iter());
            // derivative of det of a 2x2 with columns y1, y2: det[ay1, y2] + det[y1, ay2]
            let mut m1 = y_rows.clone();
            m1.set_column(0, &ay_rows.column(0));
            let mut m2 = y_rows.clone();
            m2.set_column(1, &ay_rows.column(1));
            let expect = det(&m1) + det(&m2);
            assert!((out[k] - expect).norm() < 1e-12, "{k}: {} vs {}", out[k], expect);
        }
    }

    #[test]
    fn locate_signs() {
        let ext = ExteriorPower::new(5, 3);
        let (i, s) = ext.locate(&[4, 0, 2]).unwrap();
        let (j, t) = ext.locate(&[0, 2, 4]).unwrap();
        assert_eq!(i, j);
        assert_eq!(s, t);
        let (_, u) = ext.locate(&[2, 0, 4]).unwrap();
        assert_eq!(u, -1.0);
        assert!(ext.locate(&[1, 1, 3]).is_none());
    }
}
