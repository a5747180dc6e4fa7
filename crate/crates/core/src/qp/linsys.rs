//! Linear systems of the form (P + σI + Aᵀ diag(ρ) A) x = r.
//!
//! The dense backend factors the reduced matrix directly and caches
//! factorizations per uniform ρ. The sparse backend factors the
//! quasi-definite KKT matrix
//!
//! ```text
//! [ P + σI      Aᵀ     ]
//! [   A     −diag(1/ρ) ]
//! ```
//!
//! with a reverse Cuthill–McKee ordering and an up-looking LDLᵀ.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::sparse::CscMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum FactorError {
    NotPositiveDefinite,
    ZeroPivot(usize),
}

pub trait LinearSystem {
    fn factor(&mut self, p_diag: &[f64], a: &CscMatrix, sigma: f64, rho: &[f64]) -> Result<(), FactorError>;
    /// Overwrites `rhs` with the solution.
    fn solve(&mut self, rhs: &mut [f64]);
}

fn uniform(rho: &[f64]) -> Option<f64> {
    match rho.first() {
        Some(&r) if rho.iter().all(|&v| v == r) => Some(r),
        None => Some(0.0),
        _ => None,
    }
}

pub struct DenseSystem {
    a_dense: Option<DMatrix<f64>>,
    gram: Option<DMatrix<f64>>,
    cache: Vec<(u64, Cholesky<f64, Dyn>)>,
    active: usize,
    buf: DVector<f64>,
}

const DENSE_CACHE: usize = 4;

impl DenseSystem {
    pub fn new() -> Self {
        Self { a_dense: None, gram: None, cache: Vec::new(), active: 0, buf: DVector::zeros(0) }
    }
}

impl Default for DenseSystem {
    fn default() -> Self {
        Self::new()
    }
}

impl LinearSystem for DenseSystem {
    fn factor(&mut self, p_diag: &[f64], a: &CscMatrix, sigma: f64, rho: &[f64]) -> Result<(), FactorError> {
        let n = p_diag.len();
        if self.a_dense.is_none() {
            self.a_dense = Some(a.to_dense());
        }
        let ad = self.a_dense.as_ref().unwrap();
        let k = match uniform(rho) {
            Some(r) => {
                let key = r.to_bits() ^ sigma.to_bits().rotate_left(17);
                if let Some(pos) = self.cache.iter().position(|(k, _)| *k == key) {
                    self.active = pos;
                    return Ok(());
                }
                let gram = self.gram.get_or_insert_with(|| ad.tr_mul(ad));
                let mut k = &*gram * r;
                for i in 0..n {
                    k[(i, i)] += p_diag[i] + sigma;
                }
                let chol = Cholesky::new(k).ok_or(FactorError::NotPositiveDefinite)?;
                if self.cache.len() == DENSE_CACHE {
                    self.cache.remove(0);
                }
                self.cache.push((key, chol));
                self.active = self.cache.len() - 1;
                self.buf = DVector::zeros(n);
                return Ok(());
            }
            None => {
                let mut w = ad.clone();
                for (i, mut row) in w.row_iter_mut().enumerate() {
                    row *= rho[i].sqrt();
                }
                let mut k = w.tr_mul(&w);
                for i in 0..n {
                    k[(i, i)] += p_diag[i] + sigma;
                }
                k
            }
        };
        let chol = Cholesky::new(k).ok_or(FactorError::NotPositiveDefinite)?;
        // non-uniform factorizations are not reusable; keep them out of the cache keys
        if self.cache.len() == DENSE_CACHE {
            self.cache.remove(0);
        }
        self.cache.push((u64::MAX, chol));
        self.active = self.cache.len() - 1;
        self.buf = DVector::zeros(n);
        Ok(())
    }

    fn solve(&mut self, rhs: &mut [f64]) {
        self.buf.as_mut_slice().copy_from_slice(rhs);
        self.cache[self.active].1.solve_mut(&mut self.buf);
        rhs.copy_from_slice(self.buf.as_slice());
    }
}

/// Reverse Cuthill–McKee ordering of a symmetric pattern given as adjacency lists.
pub fn rcm_ordering(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &start in &by_degree {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

const NONE: usize = usize::MAX;

/// Up-looking LDLᵀ of a symmetric matrix stored as its upper triangle (CSC).
pub struct Ldl {
    n: usize,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    dinv: Vec<f64>,
}

impl Ldl {
    pub fn factor(upper: &CscMatrix) -> Result<Self, FactorError> {
        let n = upper.ncols;
        let (ap, ai, ax) = (&upper.colptr, &upper.rowval, &upper.nzval);
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for p in ap[j]..ap[j + 1] {
                let mut i = ai[p];
                debug_assert!(i <= j);
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let total = lp[n];
        let mut li = vec![0usize; total];
        let mut lx = vec![0.0; total];
        let mut d = vec![0.0; n];
        let mut dinv = vec![0.0; n];
        let mut used = vec![false; n];
        let mut yvals = vec![0.0; n];
        let mut yidx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = lp[..n].to_vec();

        for k in 0..n {
            let mut nnz_y = 0;
            d[k] = 0.0;
            for p in ap[k]..ap[k + 1] {
                let b = ai[p];
                if b == k {
                    d[k] = ax[p];
                    continue;
                }
                yvals[b] = ax[p];
                if !used[b] {
                    used[b] = true;
                    elim[0] = b;
                    let mut nnz_e = 1;
                    let mut nx = etree[b];
                    while nx != NONE && nx < k {
                        if used[nx] {
                            break;
                        }
                        used[nx] = true;
                        elim[nnz_e] = nx;
                        nnz_e += 1;
                        nx = etree[nx];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        yidx[nnz_y] = elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            for idx in (0..nnz_y).rev() {
                let c = yidx[idx];
                let tmp = next_space[c];
                let yc = yvals[c];
                for j in lp[c]..tmp {
                    yvals[li[j]] -= lx[j] * yc;
                }
                li[tmp] = k;
                lx[tmp] = yc * dinv[c];
                d[k] -= yc * lx[tmp];
                next_space[c] += 1;
                yvals[c] = 0.0;
                used[c] = false;
            }
            if d[k] == 0.0 || !d[k].is_finite() {
                return Err(FactorError::ZeroPivot(k));
            }
            dinv[k] = 1.0 / d[k];
        }
        Ok(Self { n, lp, li, lx, dinv })
    }

    pub fn solve(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..self.n {
            x[i] *= self.dinv[i];
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                s -= self.lx[j] * x[self.li[j]];
            }
            x[i] = s;
        }
    }

    pub fn factor_nnz(&self) -> usize {
        self.li.len()
    }

    /// Number of negative pivots (inertia check for quasi-definite systems).
    pub fn negative_pivots(&self) -> usize {
        self.dinv.iter().filter(|v| **v < 0.0).count()
    }
}

pub struct SparseSystem {
    perm: Vec<usize>,
    pinv: Vec<usize>,
    ldl: Option<Ldl>,
    n: usize,
    work: Vec<f64>,
}

impl SparseSystem {
    pub fn new() -> Self {
        Self { perm: Vec::new(), pinv: Vec::new(), ldl: None, n: 0, work: Vec::new() }
    }
}

impl Default for SparseSystem {
    fn default() -> Self {
        Self::new()
    }
}

impl LinearSystem for SparseSystem {
    fn factor(&mut self, p_diag: &[f64], a: &CscMatrix, sigma: f64, rho: &[f64]) -> Result<(), FactorError> {
        let n = p_diag.len();
        let m = a.nrows;
        let dim = n + m;
        if self.perm.len() != dim {
            let mut adj = vec![Vec::new(); dim];
            for (r, c, _) in a.triplets() {
                adj[c].push(n + r);
                adj[n + r].push(c);
            }
            for l in adj.iter_mut() {
                l.sort_unstable();
                l.dedup();
            }
            self.perm = rcm_ordering(&adj);
            self.pinv = vec![0; dim];
            for (new, &old) in self.perm.iter().enumerate() {
                self.pinv[old] = new;
            }
        }
        let mut t = Vec::with_capacity(dim + a.nnz());
        for i in 0..n {
            let q = self.pinv[i];
            t.push((q, q, p_diag[i] + sigma));
        }
        for i in 0..m {
            let q = self.pinv[n + i];
            t.push((q, q, -1.0 / rho[i]));
        }
        for (r, c, v) in a.triplets() {
            let (pr, pc) = (self.pinv[n + r], self.pinv[c]);
            t.push((pr.min(pc), pr.max(pc), v));
        }
        let upper = CscMatrix::from_triplets(dim, dim, &t);
        let ldl = Ldl::factor(&upper)?;
        if ldl.negative_pivots() != m {
            return Err(FactorError::NotPositiveDefinite);
        }
        self.ldl = Some(ldl);
        self.n = n;
        self.work = vec![0.0; dim];
        Ok(())
    }

    fn solve(&mut self, rhs: &mut [f64]) {
        let n = self.n;
        self.work.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            self.work[self.pinv[i]] = rhs[i];
        }
        self.ldl.as_ref().expect("factor before solve").solve(&mut self.work);
        for i in 0..n {
            rhs[i] = self.work[self.pinv[i]];
        }
    }
}
