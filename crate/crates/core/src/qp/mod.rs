//! Convex QP solver: minimize ½xᵀPx + qᵀx subject to l ≤ Ax ≤ u with a
//! diagonal P ⪰ 0.
//!
//! Operator splitting (ADMM) in the style of OSQP: Ruiz equilibration,
//! over-relaxation, adaptive ρ, primal infeasibility certificates and an
//! optional active-set polish.

pub mod active_set;
pub mod linsys;
pub mod sparse;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use linsys::{DenseSystem, FactorError, LinearSystem, SparseSystem};
pub use sparse::CscMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid bounds on row {row}: lower {lower} > upper {upper}")]
    InvalidBounds { row: usize, lower: f64, upper: f64 },
    #[error("cost diagonal entry {0} is negative or not finite")]
    InvalidCost(usize),
    #[error("linear system factorization failed: {0:?}")]
    Factorization(FactorError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    /// Diagonal of P.
    pub p_diag: Vec<f64>,
    pub q: Vec<f64>,
    pub a: CscMatrix,
    /// Row bounds; infinite values mark one-sided or free rows.
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

impl QpProblem {
    pub fn n(&self) -> usize {
        self.p_diag.len()
    }

    pub fn m(&self) -> usize {
        self.l.len()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let (n, m) = (self.n(), self.m());
        if self.q.len() != n || self.a.ncols != n || self.a.nrows != m || self.u.len() != m {
            return Err(QpError::Dimension(format!(
                "P {n}, q {}, A {}x{}, l {m}, u {}",
                self.q.len(),
                self.a.nrows,
                self.a.ncols,
                self.u.len()
            )));
        }
        if let Some(i) = self.p_diag.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(QpError::InvalidCost(i));
        }
        for row in 0..m {
            if !(self.l[row] <= self.u[row]) {
                return Err(QpError::InvalidBounds { row, lower: self.l[row], upper: self.u[row] });
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.p_diag).zip(&self.q).map(|((x, p), q)| 0.5 * p * x * x + q * x).sum()
    }

    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        let mut ax = vec![0.0; self.m()];
        self.a.mul_vec(x, &mut ax);
        ax
    }

    /// Largest bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraint_values(x)
            .iter()
            .zip(self.l.iter().zip(&self.u))
            .map(|(v, (l, u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Plain-text dump: cost diagonal, q, A as triplets, then l and u.
    pub fn to_triplet_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# n {} m {}", self.n(), self.m());
        s.push_str("P_diag\n");
        for v in &self.p_diag {
            let _ = writeln!(s, "{v:e}");
        }
        s.push_str("q\n");
        for v in &self.q {
            let _ = writeln!(s, "{v:e}");
        }
        s.push_str("A\n");
        self.a.write_triplets(&mut s);
        s.push_str("l u\n");
        for (l, u) in self.l.iter().zip(&self.u) {
            let _ = writeln!(s, "{l:e} {u:e}");
        }
        s
    }

    /// Inverse of [`Self::to_triplet_text`].
    pub fn from_triplet_text(text: &str) -> Result<Self, QpError> {
        let bad = |what: &str| QpError::Dimension(format!("malformed problem text: {what}"));
        let expect = |tag: &str, lines: &mut dyn Iterator<Item = &str>| -> Result<(), QpError> {
            (lines.next() == Some(tag)).then_some(()).ok_or_else(|| bad(tag))
        };
        let mut it = text.lines().filter(|l| !l.starts_with('#'));
        expect("P_diag", &mut it)?;
        let block = |it: &mut dyn Iterator<Item = &str>, stop: &str| -> Result<Vec<f64>, QpError> {
            let mut v = Vec::new();
            for l in &mut *it {
                if l == stop {
                    return Ok(v);
                }
                v.push(l.trim().parse().map_err(|_| bad(l))?);
            }
            Err(bad(stop))
        };
        let p_diag = block(&mut it, "q")?;
        let q = block(&mut it, "A")?;
        let head: Vec<usize> = it.next().ok_or_else(|| bad("A header"))?.split_whitespace().map(|t| t.parse().map_err(|_| bad(t))).collect::<Result<_, _>>()?;
        let [rows, cols, nnz] = head[..] else { return Err(bad("A header")) };
        let mut trip = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let l = it.next().ok_or_else(|| bad("A entry"))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad(l));
            }
            trip.push((f[0].parse().map_err(|_| bad(l))?, f[1].parse().map_err(|_| bad(l))?, f[2].parse().map_err(|_| bad(l))?));
        }
        expect("l u", &mut it)?;
        let (mut l, mut u) = (Vec::new(), Vec::new());
        for line in it {
            let f: Vec<f64> = line.split_whitespace().map(|t| t.parse().map_err(|_| bad(line))).collect::<Result<_, _>>()?;
            if f.len() != 2 {
                return Err(bad(line));
            }
            l.push(f[0]);
            u.push(f[1]);
        }
        let p = QpProblem { p_diag, q, a: CscMatrix::from_triplets(rows, cols, &trip), l, u };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    PrimalInfeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    /// Primal solution.
    pub x: Vec<f64>,
    /// Dual solution; positive entries correspond to active upper bounds.
    pub y: Vec<f64>,
    /// Constraint values projected onto [l, u].
    pub z: Vec<f64>,
    pub status: QpStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub objective: f64,
    pub polished: bool,
    /// ‖δy‖-normalized certificate quality when infeasible.
    pub certificate_norm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Auto,
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_prim_inf: f64,
    pub max_iter: usize,
    pub adaptive_rho_interval: usize,
    pub check_interval: usize,
    pub scaling_iters: usize,
    pub polish: bool,
    /// Same ρ on every row, so the factorization is independent of the bounds.
    pub uniform_rho: bool,
    pub backend: Backend,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            eps_prim_inf: 1e-5,
            max_iter: 20_000,
            adaptive_rho_interval: 50,
            check_interval: 5,
            scaling_iters: 10,
            polish: true,
            uniform_rho: false,
            backend: Backend::Auto,
        }
    }
}

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;
const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;
const DENSE_LIMIT: usize = 1500;
const POLISH_LIMIT: usize = 1500;
const POLISH_DELTA: f64 = 1e-9;

/// Solver state that survives bound updates, so a sequence of related
/// problems can reuse scaling, factorizations and iterates.
pub struct Admm {
    settings: Settings,
    original: QpProblem,
    // scaled data
    p: Vec<f64>,
    q: Vec<f64>,
    a: CscMatrix,
    l: Vec<f64>,
    u: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
    c: f64,
    rho: f64,
    rho_vec: Vec<f64>,
    sys: Box<dyn LinearSystem + Send>,
    x: Vec<f64>,
    z: Vec<f64>,
    y: Vec<f64>,
}

fn clip_scale(v: f64) -> f64 {
    if v < SCALE_MIN {
        1.0
    } else {
        v.min(SCALE_MAX)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

impl Admm {
    pub fn new(problem: &QpProblem, settings: Settings) -> Result<Self, QpError> {
        problem.validate()?;
        let (n, m) = (problem.n(), problem.m());
        let mut p = problem.p_diag.clone();
        let mut q = problem.q.clone();
        let mut a = problem.a.clone();
        let mut d = vec![1.0; n];
        let mut e = vec![1.0; m];
        let mut c = 1.0;
        for _ in 0..settings.scaling_iters {
            let acol = a.col_inf_norms();
            let dt: Vec<f64> = (0..n).map(|j| 1.0 / clip_scale(p[j].abs().max(acol[j])).sqrt()).collect();
            let et: Vec<f64> = a.row_inf_norms().iter().map(|r| 1.0 / clip_scale(*r).sqrt()).collect();
            a.scale(&et, &dt);
            for j in 0..n {
                p[j] *= dt[j] * dt[j];
                q[j] *= dt[j];
                d[j] *= dt[j];
            }
            for i in 0..m {
                e[i] *= et[i];
            }
            let mean_p = if n > 0 { p.iter().map(|v| v.abs()).sum::<f64>() / n as f64 } else { 0.0 };
            let ct = 1.0 / clip_scale(mean_p.max(inf_norm(&q)));
            p.iter_mut().for_each(|v| *v *= ct);
            q.iter_mut().for_each(|v| *v *= ct);
            c *= ct;
        }
        let l: Vec<f64> = problem.l.iter().zip(&e).map(|(v, s)| v * s).collect();
        let u: Vec<f64> = problem.u.iter().zip(&e).map(|(v, s)| v * s).collect();
        let dense = match settings.backend {
            Backend::Dense => true,
            Backend::Sparse => false,
            Backend::Auto => n <= DENSE_LIMIT,
        };
        let sys: Box<dyn LinearSystem + Send> =
            if dense { Box::new(DenseSystem::new()) } else { Box::new(SparseSystem::new()) };
        let mut w = Self {
            rho: settings.rho,
            settings,
            original: problem.clone(),
            p,
            q,
            a,
            l,
            u,
            d,
            e,
            c,
            rho_vec: vec![0.0; m],
            sys,
            x: vec![0.0; n],
            z: vec![0.0; m],
            y: vec![0.0; m],
        };
        w.set_rho_vec();
        w.refactor()?;
        Ok(w)
    }

    fn set_rho_vec(&mut self) -> bool {
        let mut changed = false;
        for i in 0..self.l.len() {
            let r = if self.settings.uniform_rho {
                self.rho
            } else if self.l[i] == f64::NEG_INFINITY && self.u[i] == f64::INFINITY {
                RHO_MIN
            } else if self.u[i] - self.l[i] < 1e-4 * self.e[i] {
                (RHO_EQ_FACTOR * self.rho).min(RHO_MAX)
            } else {
                self.rho
            };
            if r != self.rho_vec[i] {
                changed = true;
                self.rho_vec[i] = r;
            }
        }
        changed
    }

    fn refactor(&mut self) -> Result<(), QpError> {
        self.sys
            .factor(&self.p, &self.a, self.settings.sigma, &self.rho_vec)
            .map_err(QpError::Factorization)
    }

    pub fn problem(&self) -> &QpProblem {
        &self.original
    }

    /// Replaces the row bounds keeping A, P and q.
    pub fn update_bounds(&mut self, l: &[f64], u: &[f64]) -> Result<(), QpError> {
        let m = self.l.len();
        if l.len() != m || u.len() != m {
            return Err(QpError::Dimension("bound vectors".into()));
        }
        for row in 0..m {
            if !(l[row] <= u[row]) {
                return Err(QpError::InvalidBounds { row, lower: l[row], upper: u[row] });
            }
            self.l[row] = l[row] * self.e[row];
            self.u[row] = u[row] * self.e[row];
        }
        self.original.l = l.to_vec();
        self.original.u = u.to_vec();
        if self.set_rho_vec() {
            self.refactor()?;
        }
        Ok(())
    }

    /// Replaces the linear cost (scaling is kept).
    pub fn update_linear_cost(&mut self, q: &[f64]) -> Result<(), QpError> {
        if q.len() != self.q.len() {
            return Err(QpError::Dimension("linear cost".into()));
        }
        for j in 0..q.len() {
            self.q[j] = q[j] * self.d[j] * self.c;
        }
        self.original.q = q.to_vec();
        Ok(())
    }

    /// Sets primal and dual iterates (unscaled); z is reset to Ax.
    pub fn warm_start(&mut self, x: &[f64], y: &[f64]) {
        for j in 0..self.x.len() {
            self.x[j] = x[j] / self.d[j];
        }
        for i in 0..self.y.len() {
            self.y[i] = y[i] * self.c / self.e[i];
        }
        self.a.mul_vec(&self.x, &mut self.z);
        for i in 0..self.z.len() {
            self.z[i] = self.z[i].clamp(self.l[i], self.u[i]);
        }
    }

    pub fn cold_start(&mut self) {
        self.x.iter_mut().for_each(|v| *v = 0.0);
        self.y.iter_mut().for_each(|v| *v = 0.0);
        self.z.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn solve(&mut self) -> Result<QpSolution, QpError> {
        let (n, m) = (self.x.len(), self.z.len());
        let s = self.settings.clone();
        let mut rhs = vec![0.0; n];
        let mut xt = vec![0.0; n];
        let mut zt = vec![0.0; m];
        let mut tmp_m = vec![0.0; m];
        let mut y_prev = vec![0.0; m];
        let mut status = QpStatus::MaxIterations;
        let mut res = (f64::INFINITY, f64::INFINITY);
        let mut cert = None;
        let mut iter = 0;
        while iter < s.max_iter {
            iter += 1;
            // x-update
            for i in 0..m {
                tmp_m[i] = self.rho_vec[i] * self.z[i] - self.y[i];
            }
            self.a.tr_mul_vec(&tmp_m, &mut rhs);
            for j in 0..n {
                rhs[j] += s.sigma * self.x[j] - self.q[j];
            }
            xt.copy_from_slice(&rhs);
            self.sys.solve(&mut xt);
            self.a.mul_vec(&xt, &mut zt);
            y_prev.copy_from_slice(&self.y);
            for j in 0..n {
                self.x[j] = s.alpha * xt[j] + (1.0 - s.alpha) * self.x[j];
            }
            for i in 0..m {
                let zr = s.alpha * zt[i] + (1.0 - s.alpha) * self.z[i];
                let znew = (zr + self.y[i] / self.rho_vec[i]).clamp(self.l[i], self.u[i]);
                self.y[i] += self.rho_vec[i] * (zr - znew);
                self.z[i] = znew;
            }

            let check = iter % s.check_interval == 0 || iter == s.max_iter;
            let adapt = s.adaptive_rho_interval > 0 && iter % s.adaptive_rho_interval == 0;
            if check || adapt {
                let r = self.residuals();
                res = (r.prim, r.dual);
                if r.prim <= r.eps_prim && r.dual <= r.eps_dual {
                    status = QpStatus::Optimal;
                    break;
                }
                if let Some(q) = self.infeasibility(&y_prev) {
                    status = QpStatus::PrimalInfeasible;
                    cert = Some(q);
                    break;
                }
                if adapt {
                    let ratio = (r.prim_rel / r.dual_rel.max(1e-30)).sqrt();
                    let new_rho = (self.rho * ratio).clamp(RHO_MIN, RHO_MAX);
                    if new_rho > 5.0 * self.rho || new_rho < 0.2 * self.rho {
                        self.rho = new_rho;
                        self.set_rho_vec();
                        self.refactor()?;
                    }
                }
            }
        }
        let mut sol = self.unscaled_solution(status, res, iter, cert);
        if status == QpStatus::Optimal && s.polish && n + m <= POLISH_LIMIT {
            self.polish(&mut sol);
        }
        Ok(sol)
    }

    fn residuals(&self) -> Residuals {
        let (n, m) = (self.x.len(), self.z.len());
        let mut ax = vec![0.0; m];
        self.a.mul_vec(&self.x, &mut ax);
        let mut aty = vec![0.0; n];
        self.a.tr_mul_vec(&self.y, &mut aty);
        let mut prim = 0.0f64;
        let mut ax_n = 0.0f64;
        let mut z_n = 0.0f64;
        let (mut prim_s, mut axs, mut zs) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..m {
            let ei = 1.0 / self.e[i];
            prim = prim.max(((ax[i] - self.z[i]) * ei).abs());
            ax_n = ax_n.max((ax[i] * ei).abs());
            z_n = z_n.max((self.z[i] * ei).abs());
            prim_s = prim_s.max((ax[i] - self.z[i]).abs());
            axs = axs.max(ax[i].abs());
            zs = zs.max(self.z[i].abs());
        }
        let mut dual = 0.0f64;
        let (mut px_n, mut aty_n, mut q_n) = (0.0f64, 0.0f64, 0.0f64);
        let (mut dual_s, mut pxs, mut atys, mut qs) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for j in 0..n {
            let px = self.p[j] * self.x[j];
            let r = px + self.q[j] + aty[j];
            let dj = 1.0 / (self.d[j] * self.c);
            dual = dual.max((r * dj).abs());
            px_n = px_n.max((px * dj).abs());
            aty_n = aty_n.max((aty[j] * dj).abs());
            q_n = q_n.max((self.q[j] * dj).abs());
            dual_s = dual_s.max(r.abs());
            pxs = pxs.max(px.abs());
            atys = atys.max(aty[j].abs());
            qs = qs.max(self.q[j].abs());
        }
        let eps = &self.settings;
        Residuals {
            prim,
            dual,
            eps_prim: eps.eps_abs + eps.eps_rel * ax_n.max(z_n),
            eps_dual: eps.eps_abs + eps.eps_rel * px_n.max(aty_n).max(q_n),
            prim_rel: prim_s / axs.max(zs).max(1e-30),
            dual_rel: dual_s / pxs.max(atys).max(qs).max(1e-30),
        }
    }

    /// Returns the normalized certificate quality if δy certifies infeasibility.
    fn infeasibility(&self, y_prev: &[f64]) -> Option<f64> {
        let m = self.z.len();
        let dy: Vec<f64> = (0..m).map(|i| self.y[i] - y_prev[i]).collect();
        let norm = (0..m).fold(0.0f64, |a, i| a.max((dy[i] * self.e[i]).abs()));
        if norm < 1e-30 {
            return None;
        }
        let eps = self.settings.eps_prim_inf * norm;
        let mut atdy = vec![0.0; self.x.len()];
        self.a.tr_mul_vec(&dy, &mut atdy);
        let at_norm = atdy.iter().zip(&self.d).fold(0.0f64, |a, (v, d)| a.max((v / d).abs()));
        if at_norm > eps {
            return None;
        }
        let mut support = 0.0;
        for i in 0..m {
            if dy[i] > 0.0 {
                if self.u[i] == f64::INFINITY {
                    return None;
                }
                support += self.u[i] * dy[i];
            } else if dy[i] < 0.0 {
                if self.l[i] == f64::NEG_INFINITY {
                    return None;
                }
                support += self.l[i] * dy[i];
            }
        }
        (support < -eps).then_some(-support / norm)
    }

    fn unscaled_solution(&self, status: QpStatus, res: (f64, f64), iterations: usize, cert: Option<f64>) -> QpSolution {
        let x: Vec<f64> = self.x.iter().zip(&self.d).map(|(v, d)| v * d).collect();
        let y: Vec<f64> = self.y.iter().zip(&self.e).map(|(v, e)| v * e / self.c).collect();
        let mut z: Vec<f64> = self.z.iter().zip(&self.e).map(|(v, e)| v / e).collect();
        for i in 0..z.len() {
            // unscaling must not leave the original slab
            z[i] = z[i].clamp(self.original.l[i], self.original.u[i]);
        }
        QpSolution {
            objective: self.original.objective(&x),
            x,
            y,
            z,
            status,
            primal_residual: res.0,
            dual_residual: res.1,
            iterations,
            polished: false,
            certificate_norm: cert,
        }
    }

    /// Solves the equality-constrained problem on the guessed active set and
    /// keeps the result if it is at least as accurate.
    fn polish(&self, sol: &mut QpSolution) {
        let pr = &self.original;
        let (n, m) = (pr.n(), pr.m());
        let mut active = Vec::new();
        for i in 0..m {
            if sol.z[i] - pr.l[i] < -sol.y[i] {
                active.push((i, pr.l[i]));
            } else if pr.u[i] - sol.z[i] < sol.y[i] {
                active.push((i, pr.u[i]));
            }
        }
        let dim = n + active.len();
        let ad = pr.a.to_dense();
        let mut k = DMatrix::zeros(dim, dim);
        let mut kreg = DMatrix::zeros(dim, dim);
        for j in 0..n {
            k[(j, j)] = pr.p_diag[j];
            kreg[(j, j)] = pr.p_diag[j] + POLISH_DELTA;
        }
        for (r, &(i, _)) in active.iter().enumerate() {
            for j in 0..n {
                let v = ad[(i, j)];
                k[(n + r, j)] = v;
                k[(j, n + r)] = v;
                kreg[(n + r, j)] = v;
                kreg[(j, n + r)] = v;
            }
            kreg[(n + r, n + r)] = -POLISH_DELTA;
        }
        let mut rhs = DVector::zeros(dim);
        for j in 0..n {
            rhs[j] = -pr.q[j];
        }
        for (r, &(_, b)) in active.iter().enumerate() {
            rhs[n + r] = b;
        }
        let lu = kreg.lu();
        let Some(mut sol_v) = lu.solve(&rhs) else { return };
        for _ in 0..5 {
            let r = &rhs - &k * &sol_v;
            let Some(dx) = lu.solve(&r) else { return };
            sol_v += dx;
        }
        let x: Vec<f64> = sol_v.rows(0, n).iter().copied().collect();
        let mut y = vec![0.0; m];
        for (r, &(i, _)) in active.iter().enumerate() {
            y[i] = sol_v[n + r];
        }
        let cand = QpSolution { x, y, ..sol.clone() };
        let rep_new = kkt_check(pr, &cand);
        let rep_old = kkt_check(pr, sol);
        if rep_new.max() <= rep_old.max().max(self.settings.eps_abs) {
            let ax = pr.constraint_values(&cand.x);
            sol.z = ax.iter().enumerate().map(|(i, v)| v.clamp(pr.l[i], pr.u[i])).collect();
            sol.objective = pr.objective(&cand.x);
            sol.x = cand.x;
            sol.y = cand.y;
            sol.primal_residual = rep_new.primal_violation;
            sol.dual_residual = rep_new.stationarity;
            sol.polished = true;
        }
    }
}

struct Residuals {
    prim: f64,
    dual: f64,
    eps_prim: f64,
    eps_dual: f64,
    prim_rel: f64,
    dual_rel: f64,
}

/// One-shot solve with optional warm start (x, y).
pub fn solve(problem: &QpProblem, warm: Option<(&[f64], &[f64])>, settings: &Settings) -> Result<QpSolution, QpError> {
    let mut w = Admm::new(problem, settings.clone())?;
    if let Some((x, y)) = warm {
        w.warm_start(x, y);
    }
    w.solve()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// ‖Px + q + Aᵀy‖∞
    pub stationarity: f64,
    /// max(l − Ax, Ax − u, 0)
    pub primal_violation: f64,
    /// Complementary slackness with dual sign consistency.
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal_violation).max(self.complementarity)
    }
}

/// Independent recomputation of the optimality conditions.
pub fn kkt_check(problem: &QpProblem, sol: &QpSolution) -> KktReport {
    let (n, m) = (problem.n(), problem.m());
    let mut aty = vec![0.0; n];
    problem.a.tr_mul_vec(&sol.y, &mut aty);
    let stationarity =
        (0..n).fold(0.0f64, |a, j| a.max((problem.p_diag[j] * sol.x[j] + problem.q[j] + aty[j]).abs()));
    let ax = problem.constraint_values(&sol.x);
    let mut primal_violation = 0.0f64;
    let mut complementarity = 0.0f64;
    for i in 0..m {
        let (l, u, v, y) = (problem.l[i], problem.u[i], ax[i], sol.y[i]);
        primal_violation = primal_violation.max((l - v).max(v - u).max(0.0));
        let c = if y > 0.0 {
            if u.is_finite() { (y * (u - v)).abs() } else { y }
        } else if y < 0.0 {
            if l.is_finite() { (y * (v - l)).abs() } else { -y }
        } else {
            0.0
        };
        complementarity = complementarity.max(c);
    }
    KktReport { stationarity, primal_violation, complementarity }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(p: &[f64], q: &[f64], a: &[(usize, usize, f64)], rows: usize, l: &[f64], u: &[f64]) -> QpProblem {
        QpProblem {
            p_diag: p.to_vec(),
            q: q.to_vec(),
            a: CscMatrix::from_triplets(rows, p.len(), a),
            l: l.to_vec(),
            u: u.to_vec(),
        }
    }

    #[test]
    fn active_lower_bound() {
        let pr = problem(&[2.0], &[0.0], &[(0, 0, 1.0)], 1, &[1.0], &[f64::INFINITY]);
        let s = solve(&pr, None, &Settings::default()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() <= 1e-6);
        assert!(kkt_check(&pr, &s).max() <= 1e-5);
    }

    #[test]
    fn unconstrained_minimizer() {
        let pr = problem(&[2.0, 2.0], &[-2.0, -4.0], &[], 0, &[], &[]);
        let s = solve(&pr, None, &Settings::default()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() <= 1e-6 && (s.x[1] - 2.0).abs() <= 1e-6);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let pr = problem(&[2.0], &[0.0], &[(0, 0, 1.0), (1, 0, 1.0)], 2, &[1.0, f64::NEG_INFINITY], &[1.0, 0.0]);
        let s = solve(&pr, None, &Settings::default()).unwrap();
        assert_eq!(s.status, QpStatus::PrimalInfeasible);
        assert!(s.certificate_norm.unwrap() > 0.0);
    }

    #[test]
    fn warm_start_is_cheap() {
        let pr = problem(
            &[1.0, 2.0, 0.5],
            &[1.0, -1.0, 0.3],
            &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0), (1, 2, -1.0), (2, 2, 1.0)],
            3,
            &[1.0, -0.5, f64::NEG_INFINITY],
            &[1.0, 0.5, 0.2],
        );
        let settings = Settings { polish: false, ..Settings::default() };
        let cold = solve(&pr, None, &settings).unwrap();
        let warm = solve(&pr, Some((&cold.x, &cold.y)), &settings).unwrap();
        assert_eq!(warm.status, QpStatus::Optimal);
        assert!(warm.iterations * 10 <= cold.iterations.max(10), "{} vs {}", warm.iterations, cold.iterations);
    }

    #[test]
    fn sparse_and_dense_backends_agree() {
        let pr = problem(
            &[1.0, 0.0, 2.0],
            &[0.5, -1.0, 0.0],
            &[(0, 0, 1.0), (0, 1, -1.0), (1, 1, 1.0), (2, 2, 1.0), (2, 0, 1.0)],
            3,
            &[0.0, -1.0, -0.3],
            &[0.0, 1.0, 0.3],
        );
        let d = solve(&pr, None, &Settings { backend: Backend::Dense, ..Settings::default() }).unwrap();
        let s = solve(&pr, None, &Settings { backend: Backend::Sparse, ..Settings::default() }).unwrap();
        for j in 0..3 {
            assert!((d.x[j] - s.x[j]).abs() <= 1e-6);
        }
    }

    #[test]
    fn bound_updates_reuse_workspace() {
        let pr = problem(&[2.0], &[0.0], &[(0, 0, 1.0)], 1, &[1.0], &[2.0]);
        let mut w = Admm::new(&pr, Settings::default()).unwrap();
        assert!((w.solve().unwrap().x[0] - 1.0).abs() <= 1e-6);
        w.update_bounds(&[-3.0], &[-2.0]).unwrap();
        assert!((w.solve().unwrap().x[0] + 2.0).abs() <= 1e-6);
    }

    #[test]
    fn dump_lists_every_nonzero() {
        let pr = problem(&[2.0], &[0.0], &[(0, 0, 1.0)], 1, &[1.0], &[2.0]);
        let t = pr.to_triplet_text();
        assert!(t.contains("A\n1 1 1\n0 0 1e0"));
        let back = QpProblem::from_triplet_text(&t).unwrap();
        assert_eq!(back.p_diag, pr.p_diag);
        assert_eq!(back.a.to_dense(), pr.a.to_dense());
        assert_eq!((back.l, back.u), (pr.l, pr.u));
        let free = problem(&[1.0], &[0.0], &[(0, 0, 1.0)], 1, &[f64::NEG_INFINITY], &[f64::INFINITY]);
        assert_eq!(QpProblem::from_triplet_text(&free.to_triplet_text()).unwrap().u[0], f64::INFINITY);
        assert!(QpProblem::from_triplet_text("P_diag\n1\nq\n").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn box_qp_matches_clamped_minimizer(
                data in prop::collection::vec((0.1f64..10.0, -5.0f64..5.0, -2.0f64..0.0, 0.0f64..2.0), 1..8)
            ) {
                let n = data.len();
                let trip: Vec<_> = (0..n).map(|j| (j, j, 1.0)).collect();
                let pr = QpProblem {
                    p_diag: data.iter().map(|d| d.0).collect(),
                    q: data.iter().map(|d| d.1).collect(),
                    a: CscMatrix::from_triplets(n, n, &trip),
                    l: data.iter().map(|d| d.2).collect(),
                    u: data.iter().map(|d| d.3).collect(),
                };
                let s = solve(&pr, None, &Settings::default()).unwrap();
                prop_assert_eq!(s.status, QpStatus::Optimal);
                for (j, d) in data.iter().enumerate() {
                    let exact = (-d.1 / d.0).clamp(d.2, d.3);
                    prop_assert!((s.x[j] - exact).abs() <= 1e-6, "{} vs {}", s.x[j], exact);
                }
            }

            #[test]
            fn general_qp_satisfies_kkt(
                p in prop::collection::vec(0.0f64..4.0, 4),
                q in prop::collection::vec(-3.0f64..3.0, 4),
                a in prop::collection::vec(-2.0f64..2.0, 12),
                c in prop::collection::vec(-1.0f64..1.0, 3),
            ) {
                // rows bounded around a known feasible point x = (c, 0)
                let x0 = [c[0], c[1], c[2], 0.0];
                let mut trip = Vec::new();
                for i in 0..3 {
                    for j in 0..4 {
                        trip.push((i, j, a[i * 4 + j]));
                    }
                }
                for j in 0..4 {
                    trip.push((3 + j, j, 1.0));
                }
                let am = CscMatrix::from_triplets(7, 4, &trip);
                let mut ax = vec![0.0; 7];
                am.mul_vec(&x0, &mut ax);
                let l: Vec<f64> = ax.iter().map(|v| v - 0.5).collect();
                let u: Vec<f64> = ax.iter().map(|v| v + 0.5).collect();
                let pr = QpProblem { p_diag: p, q, a: am, l, u };
                let s = solve(&pr, None, &Settings::default()).unwrap();
                prop_assert_eq!(s.status, QpStatus::Optimal);
                let k = kkt_check(&pr, &s);
                prop_assert!(k.max() <= 1e-5, "{:?}", k);
            }
        }
    }
}
