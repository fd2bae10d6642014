//! Solvers for `min_{u in Y} 1/2 <u, Q u> - <c, u>` with `Q` symmetric
//! positive definite and applied matrix-free.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, RestoreError, Result};
use crate::linalg::{axpy, dot, norm2, norm_inf};
use crate::operators::LinearOperator;
use crate::prox::FeasibleSet;

pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply(x, &mut out);
        out
    }
}

/// `Q = A^T D A + shift I`
pub struct ShiftedNormal<'a> {
    pub op: &'a dyn LinearOperator,
    pub shift: f64,
}

impl SymmetricOperator for ShiftedNormal<'_> {
    fn dim(&self) -> usize {
        self.op.input_len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.op.normal(x, out);
        axpy(self.shift, x, out);
    }
}

/// Row-major dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymmetric {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(mismatch(n * n, data.len()));
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(invalid(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

impl SymmetricOperator for DenseSymmetric {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&self.data[i * self.n..(i + 1) * self.n], x);
        }
    }
}

/// `w(u) = 1/2 <u, Q u> - <c, u>`
pub fn quadratic_objective(q: &dyn SymmetricOperator, c: &[f64], u: &[f64]) -> f64 {
    0.5 * dot(u, &q.apply_vec(u)) - dot(c, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgOptions {
    pub tol: f64,
    pub maxit: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            maxit: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||Q x - c|| / ||c||` of the returned iterate (recursive residual).
    pub relative_residual: f64,
    pub converged: bool,
}

/// Conjugate gradients from `x0` (zero when `None`) until
/// `||Q x - c|| <= tol ||c||`.
pub fn cg_solve(
    q: &dyn SymmetricOperator,
    c: &[f64],
    x0: Option<&[f64]>,
    opts: &CgOptions,
) -> Result<CgResult> {
    let n = q.dim();
    if c.len() != n {
        return Err(mismatch(n, c.len()));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("CG tolerance must be positive"));
    }
    let cnorm = norm2(c);
    let mut x = match x0 {
        Some(v) if v.len() != n => return Err(mismatch(n, v.len())),
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    if cnorm == 0.0 {
        return Ok(CgResult {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let mut r = c.to_vec();
    if x0.is_some() {
        let qx = q.apply_vec(&x);
        axpy(-1.0, &qx, &mut r);
    }
    let target = opts.tol * cnorm;
    let mut rr = dot(&r, &r);
    let mut p = r.clone();
    let mut qp = vec![0.0; n];
    let mut it = 0;
    while rr.sqrt() > target && it < opts.maxit {
        q.apply(&p, &mut qp);
        let curv = dot(&p, &qp);
        if !(curv > 0.0) {
            return Err(RestoreError::NotPositiveDefinite {
                iteration: it,
                curvature: curv,
            });
        }
        let a = rr / curv;
        axpy(a, &p, &mut x);
        axpy(-a, &qp, &mut r);
        let rr_new = dot(&r, &r);
        let b = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + b * *pi;
        }
        rr = rr_new;
        it += 1;
    }
    let res = rr.sqrt() / cnorm;
    Ok(CgResult {
        x,
        iterations: it,
        relative_residual: res,
        converged: rr.sqrt() <= target,
    })
}

/// Multipliers and termination measures at a feasible point.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Lower-bound multipliers.
    pub beta: Vec<f64>,
    /// Upper-bound multipliers (box sets only).
    pub gamma: Option<Vec<f64>>,
    pub objective: f64,
    /// `|sum beta_i (lb - u_i) [+ gamma_i (u_i - ub)]| / max(|w|, 1)`
    pub relative_gap: f64,
    /// `-min(min_i beta_i, 0) / max(||beta||, 1)`; zero for box sets.
    pub dual_infeasibility: f64,
}

impl KktReport {
    /// Builds the report from the gradient `g = Q u - c`.
    pub fn from_gradient(u: &[f64], g: &[f64], c: &[f64], set: &FeasibleSet) -> Result<Self> {
        let objective = 0.5 * (dot(u, g) - dot(u, c));
        let denom = objective.abs().max(1.0);
        match *set {
            FeasibleSet::LowerBounded { lb } => {
                let beta = g.to_vec();
                let gap: f64 = beta.iter().zip(u).map(|(b, ui)| b * (lb - ui)).sum();
                let min_beta = beta.iter().copied().fold(f64::INFINITY, f64::min);
                Ok(Self {
                    dual_infeasibility: -min_beta.min(0.0) / norm2(&beta).max(1.0),
                    relative_gap: gap.abs() / denom,
                    beta,
                    gamma: None,
                    objective,
                })
            }
            FeasibleSet::Box { lb, ub } => {
                let beta: Vec<f64> = g.iter().map(|v| v.max(0.0)).collect();
                let gamma: Vec<f64> = g.iter().map(|v| -v.min(0.0)).collect();
                let gap: f64 = beta
                    .iter()
                    .zip(&gamma)
                    .zip(u)
                    .map(|((b, gm), ui)| b * (lb - ui) + gm * (ui - ub))
                    .sum();
                Ok(Self {
                    beta,
                    gamma: Some(gamma),
                    objective,
                    relative_gap: gap.abs() / denom,
                    dual_infeasibility: 0.0,
                })
            }
            FeasibleSet::All => Err(invalid("KKT report needs a bounded feasible set")),
        }
    }

    pub fn compute(
        q: &dyn SymmetricOperator,
        c: &[f64],
        u: &[f64],
        set: &FeasibleSet,
    ) -> Result<Self> {
        let mut g = q.apply_vec(u);
        axpy(-1.0, c, &mut g);
        Self::from_gradient(u, &g, c, set)
    }

    pub fn satisfied(&self, eps_d: f64, eps_f: f64) -> bool {
        self.relative_gap <= eps_d && self.dual_infeasibility <= eps_f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpgOptions {
    pub memory: usize,
    pub eps_d: f64,
    pub eps_f: f64,
    pub maxit: usize,
    #[serde(default)]
    pub trace: bool,
}

impl Default for SpgOptions {
    fn default() -> Self {
        Self {
            memory: 20,
            eps_d: 5e-5,
            eps_f: 1e-4,
            maxit: 2000,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpgTraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub gap: f64,
    /// Max of the last `memory` objective values the step was tested against.
    pub reference: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpgResult {
    pub x: Vec<f64>,
    pub report: KktReport,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<SpgTraceRow>,
}

const ARMIJO: f64 = 1e-4;
const STEP_MIN: f64 = 1e-10;
const STEP_MAX: f64 = 1e10;
const REFRESH_EVERY: usize = 50;

/// Nonmonotone spectral projected gradient with the multiplier-based
/// termination test.
pub fn spg_solve(
    q: &dyn SymmetricOperator,
    c: &[f64],
    set: &FeasibleSet,
    x0: Option<&[f64]>,
    opts: &SpgOptions,
) -> Result<SpgResult> {
    let n = q.dim();
    if c.len() != n {
        return Err(mismatch(n, c.len()));
    }
    set.validate()?;
    if set.is_all() {
        return Err(invalid("projected gradient needs a bounded feasible set"));
    }
    if !(opts.eps_d > 0.0 && opts.eps_f > 0.0) || opts.memory == 0 {
        return Err(invalid("SPG tolerances and memory must be positive"));
    }
    let mut x = match x0 {
        Some(v) if v.len() != n => return Err(mismatch(n, v.len())),
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    set.project_in_place(&mut x);
    let fresh_gradient = |x: &[f64]| {
        let mut g = q.apply_vec(x);
        axpy(-1.0, c, &mut g);
        g
    };
    let mut g = fresh_gradient(&x);
    let mut f = 0.5 * (dot(&x, &g) - dot(&x, c));

    let qe = q.apply_vec(&vec![1.0; n]);
    let mut step = (1.0 / norm_inf(&qe).max(f64::MIN_POSITIVE)).clamp(STEP_MIN, STEP_MAX);
    let mut history = std::collections::VecDeque::with_capacity(opts.memory);
    history.push_back(f);
    let mut trace = Vec::new();
    let mut d = vec![0.0; n];
    let mut qd = vec![0.0; n];
    let mut since_refresh = 0;
    let mut done = 0;

    for it in 0..opts.maxit {
        let report = KktReport::from_gradient(&x, &g, c, set)?;
        if report.satisfied(opts.eps_d, opts.eps_f) {
            let g_new = fresh_gradient(&x);
            let fresh = KktReport::from_gradient(&x, &g_new, c, set)?;
            if fresh.satisfied(opts.eps_d, opts.eps_f) {
                return Ok(SpgResult {
                    x,
                    report: fresh,
                    iterations: it,
                    converged: true,
                    trace,
                });
            }
            g = g_new;
            f = fresh.objective;
            since_refresh = 0;
        }

        for ((di, xi), gi) in d.iter_mut().zip(&x).zip(&g) {
            *di = xi - step * gi;
        }
        set.project_in_place(&mut d);
        for (di, xi) in d.iter_mut().zip(&x) {
            *di -= xi;
        }
        if norm_inf(&d) == 0.0 {
            break;
        }
        q.apply(&d, &mut qd);
        let gtd = dot(&g, &d);
        let dqd = dot(&d, &qd);
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut alpha = 1.0;
        let mut f_new = f + gtd + 0.5 * dqd;
        while f_new > reference + ARMIJO * alpha * gtd && alpha > 1e-20 {
            alpha *= 0.5;
            f_new = f + alpha * gtd + 0.5 * alpha * alpha * dqd;
        }

        let x_prev = x.clone();
        axpy(alpha, &d, &mut x);
        set.project_in_place(&mut x);
        since_refresh += 1;
        let y = if since_refresh >= REFRESH_EVERY {
            since_refresh = 0;
            let g_new = fresh_gradient(&x);
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            g = g_new;
            y
        } else {
            let y: Vec<f64> = qd.iter().map(|v| alpha * v).collect();
            axpy(1.0, &y, &mut g);
            y
        };
        f = 0.5 * (dot(&x, &g) - dot(&x, c));
        let s: Vec<f64> = x.iter().zip(&x_prev).map(|(a, b)| a - b).collect();
        let sty = dot(&s, &y);
        step = if sty > 0.0 {
            (dot(&s, &s) / sty).clamp(STEP_MIN, STEP_MAX)
        } else {
            STEP_MAX
        };
        if history.len() == opts.memory {
            history.pop_front();
        }
        history.push_back(f);
        if opts.trace {
            trace.push(SpgTraceRow {
                iteration: it + 1,
                objective: f,
                gap: report.relative_gap,
                reference,
                step: alpha,
            });
        }
        done = it + 1;
    }

    let g = fresh_gradient(&x);
    let report = KktReport::from_gradient(&x, &g, c, set)?;
    let converged = report.satisfied(opts.eps_d, opts.eps_f);
    Ok(SpgResult {
        iterations: done,
        x,
        report,
        converged,
        trace,
    })
}

pub fn write_spg_trace(path: impl AsRef<Path>, rows: &[SpgTraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
