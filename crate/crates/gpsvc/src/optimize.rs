//! Box-constrained limited-memory quasi-Newton minimization with
//! finite-difference gradients.
//!
//! The algorithm follows Byrd, Lu, Nocedal and Zhu (1995): generalized
//! Cauchy point along the projected steepest-descent path, direct primal
//! subspace minimization over the free variables, and a backtracking line
//! search. Gradients are approximated by finite differences; the per-
//! coordinate probes are independent and evaluate in parallel when a thread
//! pool is supplied, with results written to fixed slots so the outcome is
//! bitwise independent of the thread count.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;

/// Finite-difference scheme for gradient approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdScheme {
    Forward,
    Central,
}

#[derive(Debug, Clone)]
pub struct OptimOptions {
    /// Number of stored correction pairs.
    pub memory: usize,
    /// Maximum outer iterations.
    pub max_iter: usize,
    /// Relative function-change tolerance: stop when
    /// `|f_k - f_{k+1}| <= ftol_rel * max(|f_k|, |f_{k+1}|, 1)`.
    pub ftol_rel: f64,
    /// Infinity-norm tolerance on the projected gradient.
    pub pgtol: f64,
    /// Absolute finite-difference step (callers optimize in scaled space).
    pub fd_step: f64,
    pub scheme: FdScheme,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            memory: 5,
            max_iter: 100,
            ftol_rel: 1e7 * f64::EPSILON,
            pgtol: 1e-5,
            fd_step: 1e-3,
            scheme: FdScheme::Central,
        }
    }
}

/// Termination codes mirror the classic optimizer conventions: 0 converged,
/// 1 iteration limit, 52 abnormal line-search termination.
pub const CODE_CONVERGED: i32 = 0;
pub const CODE_MAX_ITER: i32 = 1;
pub const CODE_LINE_SEARCH_FAILED: i32 = 52;

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    /// Objective evaluations requested by the outer loop and line searches.
    pub n_f_evals: usize,
    /// Gradient approximations computed.
    pub n_grad_evals: usize,
    /// Objective evaluations spent inside finite-difference probes.
    pub n_fd_evals: usize,
    pub iterations: usize,
    pub code: i32,
    pub message: String,
}

struct Evaluator<'a> {
    f: &'a (dyn Fn(&[f64]) -> Result<f64> + Sync),
    pool: Option<&'a rayon::ThreadPool>,
}

impl Evaluator<'_> {
    /// Errors act as an infinite barrier; the line search backtracks off them.
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x).unwrap_or(f64::INFINITY)
    }

    fn eval_batch(&self, points: &[Vec<f64>]) -> Vec<f64> {
        match self.pool {
            Some(pool) if points.len() > 1 => pool.install(|| {
                use rayon::prelude::*;
                points.par_iter().map(|p| self.eval(p)).collect()
            }),
            _ => points.iter().map(|p| self.eval(p)).collect(),
        }
    }
}

/// Finite-difference gradient honoring the box: probes that would leave the
/// feasible region flip to one-sided differences.
fn fd_gradient(
    ev: &Evaluator<'_>,
    x: &[f64],
    fx: f64,
    lower: &[f64],
    upper: &[f64],
    opts: &OptimOptions,
    n_fd: &mut usize,
) -> DVector<f64> {
    let n = x.len();
    let h = opts.fd_step;
    // (coordinate, +step, -step)
    let mut plan = Vec::with_capacity(n);
    for i in 0..n {
        let hp = h.min(upper[i] - x[i]).max(0.0);
        let hm = h.min(x[i] - lower[i]).max(0.0);
        plan.push((hp, hm));
    }
    let mut points = Vec::new();
    let mut slots: Vec<(usize, bool)> = Vec::new(); // (coordinate, is_plus)
    for (i, &(hp, hm)) in plan.iter().enumerate() {
        match opts.scheme {
            FdScheme::Central => {
                if hp > 0.0 {
                    let mut p = x.to_vec();
                    p[i] += hp;
                    points.push(p);
                    slots.push((i, true));
                }
                if hm > 0.0 {
                    let mut p = x.to_vec();
                    p[i] -= hm;
                    points.push(p);
                    slots.push((i, false));
                }
            }
            FdScheme::Forward => {
                if hp > 0.0 {
                    let mut p = x.to_vec();
                    p[i] += hp;
                    points.push(p);
                    slots.push((i, true));
                } else if hm > 0.0 {
                    let mut p = x.to_vec();
                    p[i] -= hm;
                    points.push(p);
                    slots.push((i, false));
                }
            }
        }
    }
    let values = ev.eval_batch(&points);
    *n_fd += values.len();

    let mut fplus = vec![f64::NAN; n];
    let mut fminus = vec![f64::NAN; n];
    for ((i, is_plus), v) in slots.into_iter().zip(values) {
        if is_plus {
            fplus[i] = v;
        } else {
            fminus[i] = v;
        }
    }
    DVector::from_fn(n, |i, _| {
        let (hp, hm) = plan[i];
        match opts.scheme {
            FdScheme::Central => {
                if hp > 0.0 && hm > 0.0 {
                    (fplus[i] - fminus[i]) / (hp + hm)
                } else if hp > 0.0 {
                    (fplus[i] - fx) / hp
                } else if hm > 0.0 {
                    (fx - fminus[i]) / hm
                } else {
                    0.0
                }
            }
            FdScheme::Forward => {
                if hp > 0.0 {
                    (fplus[i] - fx) / hp
                } else if hm > 0.0 {
                    (fx - fminus[i]) / hm
                } else {
                    0.0
                }
            }
        }
    })
}

/// Infinity norm of the projected gradient `P(x - g) - x`.
fn projected_grad_inf(x: &[f64], g: &DVector<f64>, lower: &[f64], upper: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        let step = x[i] - g[i];
        let moved = if step < lower[i] {
            lower[i] - x[i]
        } else if step > upper[i] {
            upper[i] - x[i]
        } else {
            -g[i]
        };
        worst = worst.max(moved.abs());
    }
    worst
}

struct LbfgsbMemory {
    s: VecDeque<DVector<f64>>,
    y: VecDeque<DVector<f64>>,
    theta: f64,
    w: DMatrix<f64>,
    m: DMatrix<f64>,
}

impl LbfgsbMemory {
    fn new(n: usize) -> Self {
        Self {
            s: VecDeque::new(),
            y: VecDeque::new(),
            theta: 1.0,
            w: DMatrix::zeros(n, 0),
            m: DMatrix::zeros(0, 0),
        }
    }

    fn clear(&mut self, n: usize) {
        self.s.clear();
        self.y.clear();
        self.theta = 1.0;
        self.w = DMatrix::zeros(n, 0);
        self.m = DMatrix::zeros(0, 0);
    }

    /// Store an update pair and rebuild the compact-form `W` and `M`
    /// matrices. Skips the pair (returning false) when the curvature
    /// condition fails or the middle matrix turns singular.
    fn push(&mut self, s: DVector<f64>, y: DVector<f64>, limit: usize) -> bool {
        let sy = s.dot(&y);
        let yy = y.dot(&y);
        if !(sy > f64::EPSILON * yy) || !sy.is_finite() {
            return false;
        }
        self.s.push_back(s);
        self.y.push_back(y);
        if self.s.len() > limit {
            self.s.pop_front();
            self.y.pop_front();
        }
        self.theta = yy / sy;

        let n = self.s[0].len();
        let m = self.s.len();
        let s_mat = DMatrix::from_fn(n, m, |i, j| self.s[j][i]);
        let y_mat = DMatrix::from_fn(n, m, |i, j| self.y[j][i]);

        let mut w = DMatrix::zeros(n, 2 * m);
        w.view_mut((0, 0), (n, m)).copy_from(&y_mat);
        w.view_mut((0, m), (n, m)).copy_from(&(s_mat.clone() * self.theta));

        let sty = s_mat.transpose() * &y_mat;
        let mut l = sty.lower_triangle();
        l.set_diagonal(&DVector::zeros(m));
        let d = sty.diagonal();
        let sts = s_mat.transpose() * &s_mat;

        let mut m_inv = DMatrix::zeros(2 * m, 2 * m);
        for j in 0..m {
            m_inv[(j, j)] = -d[j];
        }
        m_inv.view_mut((m, 0), (m, m)).copy_from(&l);
        m_inv.view_mut((0, m), (m, m)).copy_from(&l.transpose());
        m_inv.view_mut((m, m), (m, m)).copy_from(&(sts * self.theta));

        match m_inv.try_inverse() {
            Some(inv) => {
                self.w = w;
                self.m = inv;
                true
            }
            None => {
                self.clear(n);
                false
            }
        }
    }
}

/// Generalized Cauchy point along the projected gradient path, together
/// with `c = W^T (x_cp - x)` and the free-variable mask at the Cauchy point.
fn cauchy_point(
    x: &[f64],
    g: &DVector<f64>,
    lower: &[f64],
    upper: &[f64],
    mem: &LbfgsbMemory,
) -> (Vec<f64>, DVector<f64>, Vec<bool>) {
    let n = x.len();
    let theta = mem.theta;
    let mut t = vec![f64::INFINITY; n];
    let mut d = DVector::zeros(n);
    for i in 0..n {
        let gi = g[i];
        let ti = if gi < 0.0 {
            (x[i] - upper[i]) / gi
        } else if gi > 0.0 {
            (x[i] - lower[i]) / gi
        } else {
            f64::INFINITY
        };
        t[i] = ti;
        d[i] = if ti < f64::EPSILON { 0.0 } else { -gi };
    }

    let mut order: Vec<usize> = (0..n).filter(|&i| t[i] > 0.0).collect();
    order.sort_by(|&a, &b| t[a].total_cmp(&t[b]).then(a.cmp(&b)));

    let mut x_cp = x.to_vec();
    let two_m = mem.w.ncols();
    let mut p = mem.w.transpose() * &d;
    let mut c = DVector::zeros(two_m);
    let mut df = -d.dot(&d);
    if df == 0.0 {
        // zero projected gradient: no movement
        let free = (0..n).map(|i| x[i] > lower[i] && x[i] < upper[i]).collect();
        return (x_cp, c, free);
    }
    let mut ddf = -theta * df - p.dot(&(&mem.m * &p));
    let mut dt_min = if ddf > 0.0 { -df / ddf } else { f64::INFINITY };
    let mut t_old = 0.0;

    let mut idx = 0;
    while idx < order.len() {
        let b = order[idx];
        let t_b = t[b];
        let dt_b = t_b - t_old;
        if dt_min < dt_b {
            break;
        }
        // breakpoint b is reached: clamp it to its bound
        x_cp[b] = if d[b] > 0.0 { upper[b] } else { lower[b] };
        let z_b = x_cp[b] - x[b];
        c += &p * dt_b;
        let g_b = g[b];
        let w_b = mem.w.row(b).transpose();
        let w_m_c = w_b.dot(&(&mem.m * &c));
        let w_m_p = w_b.dot(&(&mem.m * &p));
        let w_m_w = w_b.dot(&(&mem.m * &w_b));
        df += dt_b * ddf + g_b * g_b + theta * g_b * z_b - g_b * w_m_c;
        ddf -= theta * g_b * g_b + 2.0 * g_b * w_m_p + g_b * g_b * w_m_w;
        p += &w_b * g_b;
        d[b] = 0.0;
        dt_min = if ddf > 0.0 { -df / ddf } else { f64::INFINITY };
        t_old = t_b;
        idx += 1;
    }

    let t_next = if idx < order.len() { t[order[idx]] } else { f64::INFINITY };
    if !dt_min.is_finite() {
        dt_min = 0.0;
    }
    dt_min = dt_min.max(0.0);
    t_old += dt_min;
    for i in 0..n {
        if t[i] >= t_next {
            x_cp[i] = x[i] + t_old * d[i];
            // guard roundoff at the box
            x_cp[i] = x_cp[i].clamp(lower[i], upper[i]);
        }
    }
    c += &p * dt_min;

    let free = (0..n)
        .map(|i| x_cp[i] > lower[i] && x_cp[i] < upper[i])
        .collect();
    (x_cp, c, free)
}

/// Direct primal subspace minimization over the free variables (eqs. 5.4 ff);
/// returns the target point `x_bar`.
fn subspace_min(
    x: &[f64],
    g: &DVector<f64>,
    lower: &[f64],
    upper: &[f64],
    mem: &LbfgsbMemory,
    x_cp: &[f64],
    c: &DVector<f64>,
    free: &[bool],
) -> Vec<f64> {
    let n = x.len();
    let free_idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
    if free_idx.is_empty() {
        return x_cp.to_vec();
    }
    let theta = mem.theta;
    let nf = free_idx.len();

    // reduced gradient of the quadratic model at the Cauchy point
    let mut r = DVector::zeros(nf);
    let wmc = &mem.w * (&mem.m * c);
    for (a, &i) in free_idx.iter().enumerate() {
        r[a] = g[i] + theta * (x_cp[i] - x[i]) - wmc[i];
    }

    let d_free: DVector<f64> = if mem.s.is_empty() {
        -&r / theta
    } else {
        let two_m = mem.w.ncols();
        // rows of W restricted to the free set
        let wz = DMatrix::from_fn(two_m, nf, |a, b| mem.w[(free_idx[b], a)]);
        let n_mat = DMatrix::identity(two_m, two_m) - (&mem.m * (&wz * wz.transpose())) / theta;
        let rhs = &mem.m * (&wz * &r);
        match n_mat.lu().solve(&rhs) {
            Some(v) => -(&r + (wz.transpose() * v) / theta) / theta,
            None => -&r / theta,
        }
    };

    // longest feasible fraction of the subspace step
    let mut alpha = 1.0_f64;
    for (a, &i) in free_idx.iter().enumerate() {
        let di = d_free[a];
        if di > 0.0 {
            alpha = alpha.min((upper[i] - x_cp[i]) / di);
        } else if di < 0.0 {
            alpha = alpha.min((lower[i] - x_cp[i]) / di);
        }
    }
    if !alpha.is_finite() {
        alpha = 1.0;
    }
    alpha = alpha.clamp(0.0, 1.0);

    let mut x_bar = x_cp.to_vec();
    for (a, &i) in free_idx.iter().enumerate() {
        x_bar[i] = (x_cp[i] + alpha * d_free[a]).clamp(lower[i], upper[i]);
    }
    x_bar
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;

/// Minimize `f` over the box `[lower, upper]`. The objective may return an
/// error, which acts as an infinite barrier away from the returned iterates.
pub fn minimize_bounded(
    f: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &OptimOptions,
    pool: Option<&rayon::ThreadPool>,
) -> Result<OptimOutcome> {
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(Error::Domain(format!(
            "bounds of length {}/{} do not match dimension {n}",
            lower.len(),
            upper.len()
        )));
    }
    for i in 0..n {
        if !(lower[i] <= upper[i]) {
            return Err(Error::Domain(format!(
                "lower bound exceeds upper bound at coordinate {i}: {} > {}",
                lower[i], upper[i]
            )));
        }
    }
    let ev = Evaluator { f, pool };
    let mut x: Vec<f64> = (0..n).map(|i| x0[i].clamp(lower[i], upper[i])).collect();

    let mut n_f = 0usize;
    let mut n_grad = 0usize;
    let mut n_fd = 0usize;

    let mut fx = ev.eval(&x);
    n_f += 1;
    if !fx.is_finite() {
        return Err(Error::Numeric(
            "objective is not finite at the initial point".into(),
        ));
    }
    let mut g = fd_gradient(&ev, &x, fx, lower, upper, opts, &mut n_fd);
    n_grad += 1;

    let mut mem = LbfgsbMemory::new(n);
    let mut code = CODE_MAX_ITER;
    let mut message = "iteration limit reached".to_string();
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        if projected_grad_inf(&x, &g, lower, upper) <= opts.pgtol {
            code = CODE_CONVERGED;
            message = "projected gradient within tolerance".into();
            iterations = iter;
            break;
        }

        let mut accepted = None;
        for attempt in 0..2 {
            let (x_cp, c, free) = cauchy_point(&x, &g, lower, upper, &mem);
            let x_bar = subspace_min(&x, &g, lower, upper, &mem, &x_cp, &c, &free);
            let d: DVector<f64> =
                DVector::from_fn(n, |i, _| x_bar[i] - x[i]);
            let dir_deriv = g.dot(&d);
            if dir_deriv < 0.0 {
                let mut alpha = 1.0;
                for _ in 0..MAX_BACKTRACKS {
                    let trial: Vec<f64> = (0..n)
                        .map(|i| (x[i] + alpha * d[i]).clamp(lower[i], upper[i]))
                        .collect();
                    let ft = ev.eval(&trial);
                    n_f += 1;
                    if ft.is_finite() && ft <= fx + ARMIJO_C1 * alpha * dir_deriv {
                        accepted = Some((trial, ft));
                        break;
                    }
                    alpha *= 0.5;
                }
            }
            if accepted.is_some() {
                break;
            }
            if attempt == 0 {
                // drop the curvature memory and retry as projected steepest
                // descent before giving up
                mem.clear(n);
            }
        }

        let Some((x_new, f_new)) = accepted else {
            code = CODE_LINE_SEARCH_FAILED;
            message = "line search failed to find sufficient decrease".into();
            break;
        };

        let g_new = fd_gradient(&ev, &x_new, f_new, lower, upper, opts, &mut n_fd);
        n_grad += 1;

        let s = DVector::from_fn(n, |i, _| x_new[i] - x[i]);
        let yv = &g_new - &g;
        mem.push(s, yv, opts.memory);

        let f_change_small =
            (fx - f_new).abs() <= opts.ftol_rel * fx.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        if f_change_small {
            code = CODE_CONVERGED;
            message = "function change within tolerance".into();
            break;
        }
    }

    Ok(OptimOutcome {
        x,
        f: fx,
        n_f_evals: n_f,
        n_grad_evals: n_grad,
        n_fd_evals: n_fd,
        iterations,
        code,
        message,
    })
}
