//! Compressed sparse column storage.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    /// Column pointers, length `ncols + 1`.
    pub colptr: Vec<usize>,
    /// Row indices, sorted within each column.
    pub rowval: Vec<usize>,
    pub nzval: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, colptr: vec![0; ncols + 1], rowval: Vec::new(), nzval: Vec::new() }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed and
    /// explicit zeros kept.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].1, triplets[t].0));
        let mut colptr = vec![0; ncols + 1];
        let mut rowval = Vec::with_capacity(triplets.len());
        let mut nzval: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for t in order {
            let (r, c, v) = triplets[t];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *nzval.last_mut().unwrap() += v;
            } else {
                rowval.push(r);
                nzval.push(v);
                colptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        Self { nrows, ncols, colptr, rowval, nzval }
    }

    pub fn from_dense(d: &nalgebra::DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for c in 0..d.ncols() {
            for r in 0..d.nrows() {
                if d[(r, c)] != 0.0 {
                    t.push((r, c, d[(r, c)]));
                }
            }
        }
        Self::from_triplets(d.nrows(), d.ncols(), &t)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                d[(self.rowval[p], c)] += self.nzval[p];
            }
        }
        d
    }

    pub fn nnz(&self) -> usize {
        self.nzval.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| (self.colptr[c]..self.colptr[c + 1]).map(move |p| (self.rowval[p], c, self.nzval[p])))
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for p in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowval[p]] += self.nzval[p] * xc;
            }
        }
    }

    /// y = Aᵀ x
    pub fn tr_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let mut s = 0.0;
            for p in self.colptr[c]..self.colptr[c + 1] {
                s += self.nzval[p] * x[self.rowval[p]];
            }
            y[c] = s;
        }
    }

    /// A ← diag(row) A diag(col)
    pub fn scale(&mut self, row: &[f64], col: &[f64]) {
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                self.nzval[p] *= row[self.rowval[p]] * col[c];
            }
        }
    }

    pub fn col_inf_norms(&self) -> Vec<f64> {
        (0..self.ncols)
            .map(|c| self.nzval[self.colptr[c]..self.colptr[c + 1]].iter().fold(0.0f64, |a, v| a.max(v.abs())))
            .collect()
    }

    pub fn row_inf_norms(&self) -> Vec<f64> {
        let mut r = vec![0.0f64; self.nrows];
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                let i = self.rowval[p];
                r[i] = r[i].max(self.nzval[p].abs());
            }
        }
        r
    }

    pub fn transpose(&self) -> Self {
        let mut t: Vec<(usize, usize, f64)> = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        t.sort_by_key(|e| (e.1, e.0));
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    /// One line per nonzero: `row col value`, preceded by a `rows cols nnz` header.
    pub fn write_triplets(&self, out: &mut String) {
        let _ = writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for (r, c, v) in self.triplets() {
            let _ = writeln!(out, "{r} {c} {v:e}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_multiply() {
        let a = CscMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 2, 2.0), (0, 0, 3.0), (1, 0, -1.0)]);
        assert_eq!(a.nnz(), 3);
        let d = a.to_dense();
        assert_eq!(d[(0, 0)], 4.0);
        let mut y = [0.0; 2];
        a.mul_vec(&[1.0, 5.0, 2.0], &mut y);
        assert_eq!(y, [4.0, 3.0]);
        let mut z = [0.0; 3];
        a.tr_mul_vec(&[1.0, 1.0], &mut z);
        assert_eq!(z, [3.0, 0.0, 2.0]);
        assert_eq!(a.transpose().to_dense(), d.transpose());
    }
}
