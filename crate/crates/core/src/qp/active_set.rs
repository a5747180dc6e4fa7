//! Dual active-set method (Goldfarb–Idnani) for strictly convex QPs with a
//! diagonal cost.
//!
//! Starts from the unconstrained minimizer and adds one violated row at a
//! time, dropping rows whose multipliers would change sign. Rows with a
//! single entry and l = u fix their variable up front. The working-set Gram
//! matrix N_Wᵀ P⁻¹ N_W is kept as an updated Cholesky factor, and the factor
//! of the last optimal working set is reused by the next solve.

use super::{QpError, QpProblem, QpSolution, QpStatus};

/// Row of the working set and the side of its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActiveRow {
    pub row: usize,
    pub upper: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSetSettings {
    /// Absolute feasibility tolerance, relative to max(1, |bound|).
    pub feas_tol: f64,
    /// Relative pivot below which a row counts as dependent on the working set.
    pub dependence_tol: f64,
    pub max_iter: usize,
}

impl Default for ActiveSetSettings {
    fn default() -> Self {
        Self { feas_tol: 1e-10, dependence_tol: 1e-12, max_iter: 20_000 }
    }
}

/// Row-major copy of the problem, reusable across bound updates.
pub struct DualActiveSet {
    problem: QpProblem,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    settings: ActiveSetSettings,
    cache: Option<Cache>,
}

/// Factor of the last optimal working set.
struct Cache {
    /// Free-variable pattern the Gram matrix was formed with.
    free: Vec<bool>,
    members: Vec<(usize, f64)>,
    chol: Chol,
    reuses: usize,
}

/// Reuses before the cached factor is rebuilt from scratch.
const CACHE_REFRESH: usize = 256;

struct Member {
    row: usize,
    sigma: f64,
    equality: bool,
    lambda: f64,
}

/// Growing lower-triangular factor stored by rows.
#[derive(Default, Clone)]
struct Chol {
    rows: Vec<Vec<f64>>,
}

impl Chol {
    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; b.len()];
        for i in 0..b.len() {
            let r = &self.rows[i];
            let s: f64 = r[..i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (b[i] - s) / r[i];
        }
        y
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.forward(b);
        for i in (0..x.len()).rev() {
            let mut s = x[i];
            for j in i + 1..x.len() {
                s -= self.rows[j][i] * x[j];
            }
            x[i] = s / self.rows[i][i];
        }
        x
    }

    /// Appends a row given the cross terms `v` and the diagonal entry; returns
    /// false (and leaves the factor untouched) if the new pivot is too small.
    fn append(&mut self, v: &[f64], diag: f64, tol: f64) -> bool {
        let mut l = self.forward(v);
        let d2 = diag - l.iter().map(|x| x * x).sum::<f64>();
        if !(d2 > tol * diag.max(f64::MIN_POSITIVE)) {
            return false;
        }
        l.push(d2.sqrt());
        self.rows.push(l);
        true
    }

    /// Deletes row and column `k`, restoring the trailing block with a rank-one update.
    fn remove(&mut self, k: usize) {
        self.rows.remove(k);
        let mut w: Vec<f64> = self.rows[k..].iter_mut().map(|r| r.remove(k)).collect();
        for (i, wi0) in (k..self.rows.len()).zip(0..) {
            let lii = self.rows[i][i];
            let r = lii.hypot(w[wi0]);
            let (c, s) = (r / lii, w[wi0] / lii);
            self.rows[i][i] = r;
            for (j, wj) in (i + 1..self.rows.len()).zip(wi0 + 1..) {
                let lji = (self.rows[j][i] + s * w[wj]) / c;
                w[wj] = c * w[wj] - s * lji;
                self.rows[j][i] = lji;
            }
        }
    }
}

impl DualActiveSet {
    pub fn new(problem: &QpProblem, settings: ActiveSetSettings) -> Result<Self, QpError> {
        problem.validate()?;
        let at = problem.a.transpose();
        let mut s = Self {
            problem: problem.clone(),
            row_ptr: Vec::with_capacity(problem.m() + 1),
            col_idx: Vec::with_capacity(at.nnz()),
            vals: Vec::with_capacity(at.nnz()),
            settings,
            cache: None,
        };
        s.row_ptr.push(0);
        for r in 0..problem.m() {
            for idx in at.colptr[r]..at.colptr[r + 1] {
                s.col_idx.push(at.rowval[idx]);
                s.vals.push(at.nzval[idx]);
            }
            s.row_ptr.push(s.col_idx.len());
        }
        Ok(s)
    }

    pub fn problem(&self) -> &QpProblem {
        &self.problem
    }

    pub fn update_bounds(&mut self, l: &[f64], u: &[f64]) -> Result<(), QpError> {
        if l.len() != self.problem.m() || u.len() != self.problem.m() {
            return Err(QpError::Dimension("bound vectors".into()));
        }
        for row in 0..l.len() {
            if !(l[row] <= u[row]) {
                return Err(QpError::InvalidBounds { row, lower: l[row], upper: u[row] });
            }
        }
        self.problem.l.copy_from_slice(l);
        self.problem.u.copy_from_slice(u);
        Ok(())
    }

    pub fn update_linear_cost(&mut self, q: &[f64]) -> Result<(), QpError> {
        if q.len() != self.problem.n() {
            return Err(QpError::Dimension("linear cost".into()));
        }
        self.problem.q.copy_from_slice(q);
        Ok(())
    }

    fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.vals[a..b])
    }

    fn dot(&self, r: usize, x: &[f64]) -> f64 {
        let (idx, v) = self.row(r);
        idx.iter().zip(v).map(|(&j, a)| a * x[j]).sum()
    }

    /// Solves the QP starting from `warm` as the initial working set. Returns
    /// the solution and the final working set.
    pub fn solve(&mut self, warm: &[ActiveRow]) -> Result<(QpSolution, Vec<ActiveRow>), QpError> {
        let cached = self.cache.take();
        let pr = &self.problem;
        let (n, m) = (pr.n(), pr.m());
        let st = &self.settings;
        let infeasible = |iterations: usize| {
            let sol = QpSolution {
                x: vec![0.0; n],
                y: vec![0.0; m],
                z: vec![0.0; m],
                status: QpStatus::PrimalInfeasible,
                primal_residual: f64::INFINITY,
                dual_residual: 0.0,
                iterations,
                objective: f64::INFINITY,
                polished: false,
                certificate_norm: None,
            };
            Ok((sol, Vec::new()))
        };

        // fixed variables
        let mut fixed: Vec<Option<f64>> = vec![None; n];
        let mut pinned_row = vec![false; m];
        for r in 0..m {
            let (idx, v) = self.row(r);
            if idx.len() == 1 && pr.l[r] == pr.u[r] && v[0] != 0.0 {
                let val = pr.l[r] / v[0];
                match fixed[idx[0]] {
                    Some(prev) if (prev - val).abs() > st.feas_tol * prev.abs().max(1.0) => return infeasible(0),
                    _ => fixed[idx[0]] = Some(val),
                }
                pinned_row[r] = true;
            }
        }
        let mut hinv = vec![0.0; n];
        let mut x0 = vec![0.0; n];
        for j in 0..n {
            match fixed[j] {
                Some(v) => x0[j] = v,
                None => {
                    if !(pr.p_diag[j] > 0.0) {
                        return Err(QpError::InvalidCost(j));
                    }
                    hinv[j] = 1.0 / pr.p_diag[j];
                    x0[j] = -pr.q[j] * hinv[j];
                }
            }
        }
        // rows touching only fixed variables are constants
        let mut trivial = vec![false; m];
        for r in 0..m {
            let (idx, _) = self.row(r);
            if idx.iter().all(|&j| hinv[j] == 0.0) {
                trivial[r] = true;
                let v = self.dot(r, &x0);
                if !pinned_row[r] && (v < pr.l[r] - self.tol(pr.l[r]) || v > pr.u[r] + self.tol(pr.u[r])) {
                    return infeasible(0);
                }
            }
        }
        let weighted_norm = |r: usize| -> f64 {
            let (idx, v) = self.row(r);
            idx.iter().zip(v).map(|(&j, a)| a * a * hinv[j]).sum()
        };

        let mut work: Vec<Member> = Vec::new();
        let mut in_set = vec![false; m];
        let mut chol = Chol::default();
        let mut scratch = vec![0.0; n];
        let free: Vec<bool> = hinv.iter().map(|&h| h != 0.0).collect();
        let mut reuses = 0;

        // start from the cached factor when it covers most of the warm set
        if let Some(c) = cached.filter(|c| c.free == free && c.reuses < CACHE_REFRESH) {
            let wanted: std::collections::HashSet<ActiveRow> = warm.iter().copied().collect();
            let keep: Vec<bool> = c
                .members
                .iter()
                .map(|&(r, sigma)| {
                    let bound = if sigma < 0.0 { pr.u[r] } else { pr.l[r] };
                    !trivial[r] && bound.is_finite() && wanted.contains(&ActiveRow { row: r, upper: sigma < 0.0 })
                })
                .collect();
            if 2 * keep.iter().filter(|&&k| k).count() >= c.members.len() {
                chol = c.chol;
                work = c.members.iter().map(|&(row, sigma)| Member { row, sigma, equality: pr.l[row] == pr.u[row], lambda: 0.0 }).collect();
                for k in (0..keep.len()).rev() {
                    if !keep[k] {
                        work.remove(k);
                        chol.remove(k);
                    }
                }
                for mb in &work {
                    in_set[mb.row] = true;
                }
                reuses = c.reuses + 1;
            }
        }

        // cross terms σ_j σ_p a_jᵀ P⁻¹ a_p for all members j
        let cross = |work: &[Member], scratch: &mut Vec<f64>, r: usize, sigma: f64| -> Vec<f64> {
            let (idx, v) = self.row(r);
            for (&j, a) in idx.iter().zip(v) {
                scratch[j] = sigma * a * hinv[j];
            }
            let out = work.iter().map(|mb| mb.sigma * self.dot(mb.row, scratch)).collect();
            for &j in idx {
                scratch[j] = 0.0;
            }
            out
        };

        // warm working set: equality-constrained solve, then drop negative multipliers
        for w in warm {
            let r = w.row;
            if r >= m || trivial[r] || in_set[r] {
                continue;
            }
            let equality = pr.l[r] == pr.u[r];
            let bound = if w.upper { pr.u[r] } else { pr.l[r] };
            if !bound.is_finite() {
                continue;
            }
            let sigma = if w.upper { -1.0 } else { 1.0 };
            let v = cross(&work, &mut scratch, r, sigma);
            if chol.append(&v, weighted_norm(r), st.dependence_tol) {
                work.push(Member { row: r, sigma, equality, lambda: 0.0 });
                in_set[r] = true;
            }
        }
        let mut iterations = 0;
        loop {
            if work.is_empty() {
                break;
            }
            let rhs: Vec<f64> = work
                .iter()
                .map(|mb| {
                    let b = if mb.sigma > 0.0 { pr.l[mb.row] } else { -pr.u[mb.row] };
                    b - mb.sigma * self.dot(mb.row, &x0)
                })
                .collect();
            let lam = chol.solve(&rhs);
            for (mb, l) in work.iter_mut().zip(&lam) {
                mb.lambda = *l;
            }
            let worst = work
                .iter()
                .enumerate()
                .filter(|(_, mb)| !mb.equality)
                .min_by(|a, b| a.1.lambda.total_cmp(&b.1.lambda))
                .filter(|(_, mb)| mb.lambda < 0.0)
                .map(|(k, _)| k);
            match worst {
                Some(k) => {
                    in_set[work[k].row] = false;
                    work.remove(k);
                    chol.remove(k);
                    iterations += 1;
                }
                None => break,
            }
        }
        let mut x = x0.clone();
        for mb in &work {
            let (idx, v) = self.row(mb.row);
            for (&j, a) in idx.iter().zip(v) {
                x[j] += mb.lambda * mb.sigma * a * hinv[j];
            }
        }
        let mut ax = pr.constraint_values(&x);

        let mut z = vec![0.0; n];
        let mut az = vec![0.0; m];
        let mut refreshed = true;
        loop {
            // most violated row, scaled by its weighted norm
            let mut pick: Option<(usize, f64, f64)> = None;
            for r in 0..m {
                if trivial[r] || in_set[r] {
                    continue;
                }
                let (lo, hi) = (pr.l[r], pr.u[r]);
                let (viol, sigma) = if ax[r] < lo - self.tol(lo) {
                    (lo - ax[r], 1.0)
                } else if ax[r] > hi + self.tol(hi) {
                    (ax[r] - hi, -1.0)
                } else {
                    continue;
                };
                let score = viol / weighted_norm(r).sqrt().max(1e-300);
                if pick.is_none_or(|(_, _, s)| score > s) {
                    pick = Some((r, sigma, score));
                }
            }
            let Some((p, sigma_p, _)) = pick else {
                if refreshed {
                    break;
                }
                // recompute from the multipliers to shed accumulated drift
                x.copy_from_slice(&x0);
                for mb in &work {
                    let (idx, v) = self.row(mb.row);
                    for (&j, a) in idx.iter().zip(v) {
                        x[j] += mb.lambda * mb.sigma * a * hinv[j];
                    }
                }
                ax = pr.constraint_values(&x);
                refreshed = true;
                continue;
            };
            refreshed = false;
            let equality_p = pr.l[p] == pr.u[p];
            let bound_p = if sigma_p > 0.0 { pr.l[p] } else { -pr.u[p] };
            let np_norm = weighted_norm(p);
            let mut lambda_p = 0.0;
            loop {
                iterations += 1;
                if iterations > st.max_iter {
                    let sol = self.finish(x, &ax, &work, &hinv, &fixed, iterations, QpStatus::MaxIterations);
                    return Ok((sol, Vec::new()));
                }
                let v = cross(&work, &mut scratch, p, sigma_p);
                let r = chol.solve(&v);
                // z = P⁻¹ n_p − P⁻¹ N_W r
                let (idx, vals) = self.row(p);
                z.iter_mut().for_each(|e| *e = 0.0);
                for (&j, a) in idx.iter().zip(vals) {
                    z[j] += sigma_p * a * hinv[j];
                }
                for (mb, rj) in work.iter().zip(&r) {
                    let (idx, vals) = self.row(mb.row);
                    for (&j, a) in idx.iter().zip(vals) {
                        z[j] -= rj * mb.sigma * a * hinv[j];
                    }
                }
                let zn = sigma_p * self.dot(p, &z);
                let mut t1 = f64::INFINITY;
                let mut block = None;
                for (k, (mb, &rj)) in work.iter().zip(&r).enumerate() {
                    if !mb.equality && rj > 0.0 {
                        let t = mb.lambda / rj;
                        if t < t1 {
                            t1 = t;
                            block = Some(k);
                        }
                    }
                }
                let dependent = zn <= st.dependence_tol * np_norm;
                let t2 = if dependent { f64::INFINITY } else { (bound_p - sigma_p * ax[p]) / zn };
                if dependent && block.is_none() {
                    return infeasible(iterations);
                }
                let t = t1.min(t2);
                if !dependent {
                    for j in 0..n {
                        x[j] += t * z[j];
                    }
                    pr.a.mul_vec(&z, &mut az);
                    for i in 0..m {
                        ax[i] += t * az[i];
                    }
                }
                for (mb, rj) in work.iter_mut().zip(&r) {
                    mb.lambda -= t * rj;
                }
                lambda_p += t;
                if t2 <= t1 {
                    if chol.append(&v, np_norm, st.dependence_tol) {
                        work.push(Member { row: p, sigma: sigma_p, equality: equality_p, lambda: lambda_p });
                        in_set[p] = true;
                    }
                    break;
                }
                let k = block.expect("finite t1");
                in_set[work[k].row] = false;
                work.remove(k);
                chol.remove(k);
            }
        }
        let active = work.iter().map(|mb| ActiveRow { row: mb.row, upper: mb.sigma < 0.0 }).collect();
        let sol = self.finish(x, &ax, &work, &hinv, &fixed, iterations, QpStatus::Optimal);
        self.cache = Some(Cache { free, members: work.iter().map(|mb| (mb.row, mb.sigma)).collect(), chol, reuses });
        Ok((sol, active))
    }

    fn tol(&self, bound: f64) -> f64 {
        self.settings.feas_tol * bound.abs().max(1.0)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(&self, x: Vec<f64>, ax: &[f64], work: &[Member], hinv: &[f64], fixed: &[Option<f64>], iterations: usize, status: QpStatus) -> QpSolution {
        let pr = &self.problem;
        let (n, m) = (pr.n(), pr.m());
        let mut y = vec![0.0; m];
        for mb in work {
            y[mb.row] = -mb.sigma * mb.lambda;
        }
        // multipliers of pinned variables absorb the remaining stationarity
        let mut grad: Vec<f64> = (0..n).map(|j| pr.p_diag[j] * x[j] + pr.q[j]).collect();
        for mb in work {
            let (idx, v) = self.row(mb.row);
            for (&j, a) in idx.iter().zip(v) {
                grad[j] += a * y[mb.row];
            }
        }
        for r in 0..m {
            let (idx, v) = self.row(r);
            if idx.len() == 1 && fixed[idx[0]].is_some() && pr.l[r] == pr.u[r] && y[r] == 0.0 && hinv[idx[0]] == 0.0 {
                let j = idx[0];
                y[r] = -grad[j] / v[0];
                grad[j] = 0.0;
            }
        }
        let zc: Vec<f64> = ax.iter().zip(pr.l.iter().zip(&pr.u)).map(|(v, (l, u))| v.clamp(*l, *u)).collect();
        let primal_residual = ax.iter().zip(&zc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dual_residual = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        QpSolution {
            objective: pr.objective(&x),
            x,
            y,
            z: zc,
            status,
            primal_residual,
            dual_residual,
            iterations,
            polished: false,
            certificate_norm: None,
        }
    }
}
