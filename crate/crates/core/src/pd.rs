//! Penalty decomposition for the `l0`-regularized analysis model
//!
//! `min_{u in Y} 1/2 ||A u - f||_D^2 + sum_i lambda_i ||(W u)_i||_0`.
//!
//! The constraint `alpha = W u` is relaxed into the quadratic penalty
//! `p_rho(u, alpha) = 1/2 ||A u - f||_D^2 + sum_i lambda_i ||alpha_i||_0
//! + rho/2 ||W u - alpha||^2`, which is minimized by block coordinate descent
//! for an increasing sequence `rho_k = rho_0 delta^k`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::framelet::{FrameCoefficients, Framelet};
use crate::linalg::{axpy, dist2, norm2};
use crate::operators::LinearOperator;
use crate::prox::{FeasibleSet, ThresholdVector};
use crate::qp::{cg_solve, spg_solve, CgOptions, ShiftedNormal, SpgOptions};
use crate::telemetry::TelemetryRow;

/// Forward model, frame, data and regularization weights.
pub struct Problem<'a> {
    pub op: &'a dyn LinearOperator,
    pub frame: &'a Framelet,
    pub f: &'a [f64],
    pub set: FeasibleSet,
    plane_lambda: Vec<f64>,
    atf: Vec<f64>,
}

impl<'a> Problem<'a> {
    /// `lambda` holds one weight per level, or a single weight for all levels.
    pub fn new(
        op: &'a dyn LinearOperator,
        frame: &'a Framelet,
        f: &'a [f64],
        lambda: &[f64],
        set: FeasibleSet,
    ) -> Result<Self> {
        let n = frame.width() * frame.height();
        if op.input_len() != n {
            return Err(mismatch(n, op.input_len()));
        }
        if f.len() != op.output_len() {
            return Err(mismatch(op.output_len(), f.len()));
        }
        set.validate()?;
        let plane_lambda = frame.plane_weights(lambda)?;
        Ok(Self {
            op,
            frame,
            f,
            set,
            atf: op.weighted_adjoint(f),
            plane_lambda,
        })
    }

    pub fn plane_lambda(&self) -> &[f64] {
        &self.plane_lambda
    }

    pub fn pixels(&self) -> usize {
        self.op.input_len()
    }

    /// `1/2 ||A u - f||_D^2`
    pub fn data_fit(&self, u: &[f64]) -> f64 {
        let mut r = self.op.apply_vec(u);
        axpy(-1.0, self.f, &mut r);
        0.5 * crate::linalg::weighted_norm_sq(&r, self.op.weights())
    }

    /// `sum_i lambda_i ||alpha_i||_0`
    pub fn sparsity(&self, alpha: &FrameCoefficients) -> f64 {
        (0..alpha.num_planes())
            .map(|p| {
                let l = self.plane_lambda[p];
                if l == 0.0 {
                    0.0
                } else {
                    l * alpha.plane(p).iter().filter(|&&v| v != 0.0).count() as f64
                }
            })
            .sum()
    }

    pub fn penalty_value(&self, u: &[f64], alpha: &FrameCoefficients, rho: f64) -> f64 {
        let wu = self.frame.decompose(u);
        self.penalty_with(u, &wu, alpha, rho)
    }

    fn penalty_with(
        &self,
        u: &[f64],
        wu: &FrameCoefficients,
        alpha: &FrameCoefficients,
        rho: f64,
    ) -> f64 {
        let gap = dist2(wu.as_slice(), alpha.as_slice());
        self.data_fit(u) + self.sparsity(alpha) + 0.5 * rho * gap * gap
    }

    /// Minimizes `p_rho(., alpha)` over `Y`, starting from `warm`. `synth` is
    /// `W^T alpha`.
    pub fn step_u(&self, synth: &[f64], rho: f64, warm: &[f64], sub: &Subsolver) -> Result<UStep> {
        let mut c = self.atf.clone();
        axpy(rho, synth, &mut c);
        let q = ShiftedNormal {
            op: self.op,
            shift: rho,
        };
        if self.set.is_all() {
            let r = cg_solve(&q, &c, Some(warm), &sub.cg)?;
            Ok(UStep {
                u: r.x,
                iterations: r.iterations,
                converged: r.converged,
            })
        } else {
            let r = spg_solve(&q, &c, &self.set, Some(warm), &sub.spg)?;
            Ok(UStep {
                u: r.x,
                iterations: r.iterations,
                converged: r.converged,
            })
        }
    }

    /// `H_{sqrt(2 lambda / rho)}(W u)`
    pub fn step_alpha(&self, wu: &FrameCoefficients, rho: f64) -> Result<FrameCoefficients> {
        crate::prox::hard_threshold(wu, &ThresholdVector::l0(&self.plane_lambda, rho)?)
    }
}

/// Settings for the `u`-subproblem solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subsolver {
    pub cg: CgOptions,
    pub spg: SpgOptions,
}

impl Subsolver {
    /// The tolerance the descent slack is measured against.
    pub fn tolerance(&self, set: &FeasibleSet) -> f64 {
        if set.is_all() {
            self.cg.tol
        } else {
            self.spg.eps_d
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UStep {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn bcd_step_u(
    problem: &Problem,
    alpha: &FrameCoefficients,
    rho: f64,
    warm: &[f64],
    sub: &Subsolver,
) -> Result<UStep> {
    if !(rho > 0.0) {
        return Err(invalid("penalty must be positive"));
    }
    let synth = problem.frame.reconstruct(alpha)?;
    problem.step_u(&synth, rho, warm, sub)
}

pub fn bcd_step_alpha(problem: &Problem, u: &[f64], rho: f64) -> Result<FrameCoefficients> {
    problem.step_alpha(&problem.frame.decompose(u), rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdConfig {
    pub rho0: f64,
    pub delta: f64,
    pub eps_inner: f64,
    pub eps_outer: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Relative CG residual at `k = 0`, divided by 10 per outer step.
    pub cg_tol0: f64,
    pub cg_tol_floor: f64,
    pub cg_maxit: usize,
    pub spg: SpgOptions,
}

impl Default for PdConfig {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            delta: 10.0,
            eps_inner: 1e-4,
            eps_outer: 1e-3,
            max_outer: 30,
            max_inner: 200,
            cg_tol0: 1e-6,
            cg_tol_floor: 1e-8,
            cg_maxit: 500,
            spg: SpgOptions::default(),
        }
    }
}

impl PdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(invalid("rho0 must be positive"));
        }
        if !(self.delta > 1.0 && self.delta.is_finite()) {
            return Err(invalid("delta must exceed 1"));
        }
        if !(self.eps_inner > 0.0 && self.eps_outer > 0.0) {
            return Err(invalid("stopping tolerances must be positive"));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(invalid("iteration caps must be positive"));
        }
        if !(self.cg_tol0 > 0.0 && self.cg_tol_floor > 0.0) {
            return Err(invalid("CG tolerances must be positive"));
        }
        Ok(())
    }

    pub fn rho(&self, k: usize) -> f64 {
        self.rho0 * self.delta.powi(k as i32)
    }

    pub fn subsolver(&self, k: usize) -> Subsolver {
        let tol = (self.cg_tol0 / 10f64.powi(k as i32)).max(self.cg_tol_floor);
        Subsolver {
            cg: CgOptions {
                tol,
                maxit: self.cg_maxit,
            },
            spg: self.spg,
        }
    }
}

/// Starting coefficients and the feasible pair behind the reset safeguard.
/// Everything defaults to zero.
#[derive(Debug, Clone, Default)]
pub struct PdInit {
    pub alpha00: Option<FrameCoefficients>,
    pub feasible: Option<(Vec<f64>, FrameCoefficients)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerRecord {
    pub outer: usize,
    pub inner: usize,
    /// `p_rho(u^q, alpha^q)` (for `q = 0`: the value after the first `u`-step).
    pub p_start: f64,
    /// `p_rho(u^{q+1}, alpha^q)`
    pub p_after_u: f64,
    /// `p_rho(u^{q+1}, alpha^{q+1})`
    pub p_after_alpha: f64,
    /// `||W^T (alpha^{q+1} - alpha^q)||`
    pub increment: f64,
    pub subsolver_tol: f64,
    pub subsolver_iterations: usize,
    pub subsolver_converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: usize,
    pub rho: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    pub penalty: f64,
    pub feasibility: f64,
    /// `||W u - alpha|| / max(|p_rho|, 1)`
    pub outer_ratio: f64,
    /// Whether this run started from the feasible coefficients.
    pub reset: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResidual {
    pub stationarity: f64,
    pub threshold_violations: usize,
    pub support_mismatch: f64,
}

#[derive(Debug, Clone)]
pub struct PdReport {
    pub u: Vec<f64>,
    pub alpha: FrameCoefficients,
    pub upsilon: f64,
    pub outer: Vec<OuterRecord>,
    pub inner: Vec<InnerRecord>,
    pub telemetry: Vec<TelemetryRow>,
    pub residual: FixedPointResidual,
    pub converged: bool,
    pub wall_seconds: f64,
}

impl PdReport {
    pub fn total_inner(&self) -> usize {
        self.outer.iter().map(|o| o.inner_iterations).sum()
    }

    pub fn final_ratio(&self) -> f64 {
        self.outer.last().map_or(f64::NAN, |o| o.outer_ratio)
    }
}

/// Result of one BCD run at fixed `rho`.
pub struct BcdRun {
    pub u: Vec<f64>,
    pub alpha: FrameCoefficients,
    pub wu: FrameCoefficients,
    pub penalty: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternates `u`- and `alpha`-steps at fixed `rho` until the relative
/// progress of `p_rho` drops below `eps_inner`. `first` is the already
/// computed first `u`-step for `alpha_init`.
#[allow(clippy::too_many_arguments)]
pub fn bcd_solve(
    problem: &Problem,
    rho: f64,
    alpha_init: FrameCoefficients,
    first: UStep,
    cfg: &PdConfig,
    k: usize,
    inner_log: &mut Vec<InnerRecord>,
    mut telemetry: impl FnMut(usize, f64, &[f64], &FrameCoefficients, &FrameCoefficients),
) -> Result<BcdRun> {
    let sub = cfg.subsolver(k);
    let tol = sub.tolerance(&problem.set);
    let mut alpha = alpha_init;
    let mut synth = problem.frame.reconstruct(&alpha)?;
    let mut step = first;
    let mut wu = problem.frame.decompose(&step.u);
    let mut p_prev = problem.penalty_with(&step.u, &wu, &alpha, rho);
    let mut q = 0;
    loop {
        let u = step.u;
        let p_after_u = problem.penalty_with(&u, &wu, &alpha, rho);
        let next_alpha = problem.step_alpha(&wu, rho)?;
        let next_synth = problem.frame.reconstruct(&next_alpha)?;
        let increment = dist2(&next_synth, &synth);
        let p_after_alpha = problem.penalty_with(&u, &wu, &next_alpha, rho);
        inner_log.push(InnerRecord {
            outer: k,
            inner: q,
            p_start: p_prev,
            p_after_u,
            p_after_alpha,
            increment,
            subsolver_tol: tol,
            subsolver_iterations: step.iterations,
            subsolver_converged: step.converged,
        });
        alpha = next_alpha;
        synth = next_synth;
        telemetry(q, p_after_alpha, &u, &wu, &alpha);
        let progress = (p_prev - p_after_alpha).abs() / p_after_alpha.abs().max(1.0);
        q += 1;
        if progress <= cfg.eps_inner || q >= cfg.max_inner {
            return Ok(BcdRun {
                u,
                alpha,
                wu,
                penalty: p_after_alpha,
                iterations: q,
                converged: progress <= cfg.eps_inner,
            });
        }
        p_prev = p_after_alpha;
        step = problem.step_u(&synth, rho, &u, &sub)?;
        wu = problem.frame.decompose(&step.u);
    }
}

fn validate_init(
    problem: &Problem,
    init: &PdInit,
) -> Result<(FrameCoefficients, Vec<f64>, FrameCoefficients)> {
    let zero = problem.frame.zero_coefficients();
    let alpha00 = match &init.alpha00 {
        Some(a) if !a.congruent(&zero) => {
            return Err(invalid("initial coefficients have the wrong shape"))
        }
        Some(a) => a.clone(),
        None => zero.clone(),
    };
    let (u_feas, a_feas) = match &init.feasible {
        Some((u, a)) => {
            if u.len() != problem.pixels() || !a.congruent(&zero) {
                return Err(invalid("feasible pair has the wrong shape"));
            }
            if !problem.set.contains(u) {
                return Err(invalid("feasible image lies outside the feasible set"));
            }
            let wu = problem.frame.decompose(u);
            if dist2(wu.as_slice(), a.as_slice()) > 1e-9 * a.norm2().max(1.0) {
                return Err(invalid("feasible pair does not satisfy alpha = W u"));
            }
            (u.clone(), a.clone())
        }
        None => (vec![0.0; problem.pixels()], zero),
    };
    if !problem.set.contains(&u_feas) {
        return Err(invalid(
            "the zero image is not feasible; supply a feasible pair",
        ));
    }
    Ok((alpha00, u_feas, a_feas))
}

pub fn pd_solve(problem: &Problem, cfg: &PdConfig, init: &PdInit) -> Result<PdReport> {
    cfg.validate()?;
    let start = Instant::now();
    let (alpha00, u_feas, alpha_feas) = validate_init(problem, init)?;

    let mut rho = cfg.rho(0);
    let feasible_value = problem.data_fit(&u_feas) + problem.sparsity(&alpha_feas);
    let mut alpha = alpha00;
    let first = bcd_step_u(problem, &alpha, rho, &u_feas, &cfg.subsolver(0))?;
    let first_value = problem.penalty_value(&first.u, &alpha, rho);
    let upsilon = feasible_value.max(first_value);
    let mut first = first;
    let mut reset = false;

    let mut outer = Vec::new();
    let mut inner = Vec::new();
    let mut telemetry = Vec::new();
    let mut converged = false;
    let mut last: Option<BcdRun> = None;

    for k in 0..cfg.max_outer {
        let run = bcd_solve(
            problem,
            rho,
            alpha,
            first,
            cfg,
            k,
            &mut inner,
            |q, p, u, wu, a| {
                telemetry.push(TelemetryRow {
                    outer: k,
                    rho,
                    inner: q,
                    penalty: p,
                    feasibility: dist2(wu.as_slice(), a.as_slice()),
                    data_fit: problem.data_fit(u),
                    l0_count: a.count_nonzero(),
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                })
            },
        )?;
        let feasibility = dist2(run.wu.as_slice(), run.alpha.as_slice());
        let ratio = feasibility / run.penalty.abs().max(1.0);
        outer.push(OuterRecord {
            k,
            rho,
            inner_iterations: run.iterations,
            inner_converged: run.converged,
            penalty: run.penalty,
            feasibility,
            outer_ratio: ratio,
            reset,
        });
        if ratio <= cfg.eps_outer {
            converged = true;
            last = Some(run);
            break;
        }
        if k + 1 == cfg.max_outer {
            last = Some(run);
            break;
        }
        rho = cfg.rho(k + 1);
        let sub = cfg.subsolver(k + 1);
        let candidate = bcd_step_u(problem, &run.alpha, rho, &run.u, &sub)?;
        let value = problem.penalty_value(&candidate.u, &run.alpha, rho);
        if value > upsilon {
            reset = true;
            alpha = alpha_feas.clone();
            first = bcd_step_u(problem, &alpha, rho, &run.u, &sub)?;
        } else {
            reset = false;
            alpha = run.alpha;
            first = candidate;
        }
    }

    let run = last.expect("at least one outer iteration");
    let residual = fixed_point_residual(problem, &run.u, &run.alpha, rho)?;
    Ok(PdReport {
        u: run.u,
        alpha: run.alpha,
        upsilon,
        outer,
        inner,
        telemetry,
        residual,
        converged,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// First-order optimality of `u` for `p_rho(., alpha)` over `Y`, and
/// consistency of `alpha` with hard thresholding of `W u`.
pub fn fixed_point_residual(
    problem: &Problem,
    u: &[f64],
    alpha: &FrameCoefficients,
    rho: f64,
) -> Result<FixedPointResidual> {
    if u.len() != problem.pixels() {
        return Err(mismatch(problem.pixels(), u.len()));
    }
    let mut r = problem.op.apply_vec(u);
    axpy(-1.0, problem.f, &mut r);
    let mut grad = problem.op.weighted_adjoint(&r);
    let wu = problem.frame.decompose(u);
    let diff = wu.with_data(
        wu.as_slice()
            .iter()
            .zip(alpha.as_slice())
            .map(|(a, b)| a - b)
            .collect(),
    )?;
    let back = problem.frame.reconstruct(&diff)?;
    axpy(rho, &back, &mut grad);
    let stationarity = if problem.set.is_all() {
        norm2(&grad)
    } else {
        let mut proj: Vec<f64> = u.iter().zip(&grad).map(|(a, g)| a - g).collect();
        problem.set.project_in_place(&mut proj);
        dist2(&proj, u)
    };

    let thresholds = ThresholdVector::l0(problem.plane_lambda(), rho)?;
    let mut violations = 0;
    let mut mismatch_max = 0.0f64;
    for p in 0..alpha.num_planes() {
        let t = thresholds.as_slice()[p];
        for (w, a) in wu.plane(p).iter().zip(alpha.plane(p)) {
            if *a == 0.0 {
                if w.abs() > t * (1.0 + 1e-8) {
                    violations += 1;
                }
            } else {
                mismatch_max = mismatch_max.max((w - a).abs());
            }
        }
    }
    Ok(FixedPointResidual {
        stationarity,
        threshold_violations: violations,
        support_mismatch: mismatch_max,
    })
}
