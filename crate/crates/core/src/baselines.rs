//! Convex `l1` comparison methods: accelerated proximal gradient on the
//! balanced model and split Bregman on the analysis model.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::framelet::FrameCoefficients;
use crate::image::GaussianStream;
use crate::linalg::{axpy, dist2, dot, norm2, weighted_norm_sq};
use crate::operators::LinearOperator;
use crate::pd::Problem;
use crate::prox::{group_soft_threshold, soft_threshold, ThresholdVector};
use crate::qp::{cg_solve, CgOptions, ShiftedNormal};
use crate::telemetry::TelemetryRow;

/// `p = 1` (anisotropic) or `p = 2` (isotropic, grouped across a level's bands).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

fn shrink(x: &FrameCoefficients, t: &ThresholdVector, norm: Norm) -> Result<FrameCoefficients> {
    match norm {
        Norm::L1 => soft_threshold(x, t),
        Norm::L2 => group_soft_threshold(x, t),
    }
}

/// `sum_i lambda_i |alpha_i|` or the grouped version.
pub fn l1_penalty(alpha: &FrameCoefficients, plane_lambda: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::L1 => (0..alpha.num_planes())
            .map(|p| plane_lambda[p] * alpha.plane(p).iter().map(|v| v.abs()).sum::<f64>())
            .sum(),
        Norm::L2 => {
            let n = alpha.plane_len();
            let data = alpha.as_slice();
            let mut total = 0.0;
            for level in 0..alpha.levels() {
                let planes = alpha.level_planes(level);
                if planes.is_empty() {
                    continue;
                }
                let l = plane_lambda[planes.start];
                let s: f64 = (0..n)
                    .map(|i| {
                        planes
                            .clone()
                            .map(|p| data[p * n + i].powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .sum();
                total += l * s;
            }
            let last = alpha.num_planes() - 1;
            total + plane_lambda[last] * alpha.plane(last).iter().map(|v| v.abs()).sum::<f64>()
        }
    }
}

/// Power-method estimate of `||A||^2` (largest eigenvalue of `A^T D A`),
/// inflated by 5%.
pub fn opnorm_estimate(op: &dyn LinearOperator, iters: usize) -> Result<f64> {
    if iters < 10 {
        return Err(invalid("power method needs at least 10 iterations"));
    }
    let n = op.input_len();
    let g = GaussianStream::new(0x5eed);
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * g.normal(i as u64)).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut y = vec![0.0; n];
    let mut est = 0.0;
    for _ in 0..iters {
        op.normal(&x, &mut y);
        est = dot(&x, &y);
        let ny = norm2(&y);
        if ny == 0.0 {
            return Ok(0.0);
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
    }
    Ok(1.05 * est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BalancedConfig {
    pub kappa: f64,
    pub norm: Norm,
    pub eps_p: f64,
    /// Fixed step; `None` means `1 / (||A||^2 + kappa)` from the power method.
    pub step: Option<f64>,
    pub maxit: usize,
    pub power_iters: usize,
}

impl Default for BalancedConfig {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            norm: Norm::L1,
            eps_p: 1e-4,
            step: None,
            maxit: 5000,
            power_iters: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub norm: Norm,
    /// Coupling weight; `None` means the mean of the per-level weights times `mu_scale`.
    pub mu: Option<f64>,
    pub mu_scale: f64,
    pub eps_s: f64,
    pub maxit: usize,
    pub cg_tol: f64,
    pub cg_maxit: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            norm: Norm::L1,
            mu: None,
            mu_scale: 1.0,
            eps_s: 1e-4,
            maxit: 2000,
            cg_tol: 1e-6,
            cg_maxit: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineReport {
    pub u: Vec<f64>,
    pub alpha: FrameCoefficients,
    pub iterations: usize,
    pub converged: bool,
    pub stop_value: f64,
    /// Objective after every accepted iterate.
    pub objective: Vec<f64>,
    pub restarts: usize,
    pub telemetry: Vec<TelemetryRow>,
    pub wall_seconds: f64,
}

/// Iterate with the cached linear images needed by the balanced objective.
struct Tracked {
    alpha: FrameCoefficients,
    /// `W^T alpha`
    synth: Vec<f64>,
    /// `A W^T alpha`
    image: Vec<f64>,
    /// `W W^T alpha`
    proj: FrameCoefficients,
}

impl Tracked {
    fn new(problem: &Problem, alpha: FrameCoefficients) -> Result<Self> {
        let synth = problem.frame.reconstruct(&alpha)?;
        let image = problem.op.apply_vec(&synth);
        let proj = problem.frame.decompose(&synth);
        Ok(Self {
            alpha,
            synth,
            image,
            proj,
        })
    }

    /// `a + beta (a - b)` computed on every cached component.
    fn extrapolate(a: &Tracked, b: &Tracked, beta: f64) -> Result<Tracked> {
        let comb = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(p, q)| p + beta * (p - q)).collect()
        };
        Ok(Tracked {
            alpha: a
                .alpha
                .with_data(comb(a.alpha.as_slice(), b.alpha.as_slice()))?,
            synth: comb(&a.synth, &b.synth),
            image: comb(&a.image, &b.image),
            proj: a
                .proj
                .with_data(comb(a.proj.as_slice(), b.proj.as_slice()))?,
        })
    }
}

fn balanced_objective(problem: &Problem, t: &Tracked, kappa: f64, norm: Norm) -> f64 {
    let mut r = t.image.clone();
    axpy(-1.0, problem.f, &mut r);
    let fit = 0.5 * weighted_norm_sq(&r, problem.op.weights());
    let gap = dist2(t.alpha.as_slice(), t.proj.as_slice());
    fit + 0.5 * kappa * gap * gap + l1_penalty(&t.alpha, problem.plane_lambda(), norm)
}

/// Accelerated proximal gradient for
/// `min_alpha 1/2 ||A W^T alpha - f||_D^2 + kappa/2 ||(I - W W^T) alpha||^2
///  + sum_i lambda_i |alpha_i|_p`, restarting the momentum whenever the
/// objective would increase.
pub fn apg_balanced(problem: &Problem, cfg: &BalancedConfig) -> Result<BaselineReport> {
    if !(cfg.kappa >= 0.0) || !(cfg.eps_p > 0.0) {
        return Err(invalid("kappa must be nonnegative and eps_p positive"));
    }
    let start = Instant::now();
    let step = match cfg.step {
        Some(s) if s > 0.0 => s,
        Some(_) => return Err(invalid("step must be positive")),
        None => 1.0 / (opnorm_estimate(problem.op, cfg.power_iters)? + cfg.kappa),
    };
    let thresholds = ThresholdVector::scaled(problem.plane_lambda(), step)?;
    let fnorm = norm2(problem.f).max(f64::MIN_POSITIVE);

    let mut x = Tracked::new(problem, problem.frame.zero_coefficients())?;
    let mut f_x = balanced_objective(problem, &x, cfg.kappa, cfg.norm);
    let mut z = Tracked::new(problem, problem.frame.zero_coefficients())?;
    let mut t = 1.0f64;
    let mut objective = vec![f_x];
    let mut telemetry = Vec::new();
    let mut restarts = 0;
    let mut stop_value = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.maxit {
        iterations += 1;
        // gradient at z: W (A^T D r - kappa W^T z) + kappa z
        let mut r = z.image.clone();
        axpy(-1.0, problem.f, &mut r);
        let mut back = problem.op.weighted_adjoint(&r);
        axpy(-cfg.kappa, &z.synth, &mut back);
        let mut grad = problem.frame.decompose(&back);
        axpy(cfg.kappa, z.alpha.as_slice(), grad.as_mut_slice());

        let mut trial = z.alpha.clone();
        axpy(-step, grad.as_slice(), trial.as_mut_slice());
        let trial = shrink(&trial, &thresholds, cfg.norm)?;
        let next = Tracked::new(problem, trial)?;
        let f_next = balanced_objective(problem, &next, cfg.kappa, cfg.norm);

        if f_next > f_x {
            // discard the step and restart the momentum from x
            restarts += 1;
            t = 1.0;
            z = Tracked::extrapolate(&x, &x, 0.0)?;
            continue;
        }
        let change = dist2(next.alpha.as_slice(), x.alpha.as_slice()) / next.alpha.norm2().max(1.0);
        let mut res = next.image.clone();
        axpy(-1.0, problem.f, &mut res);
        let misfit = weighted_norm_sq(&res, problem.op.weights()).sqrt() / fnorm;
        stop_value = change.min(misfit);

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = Tracked::extrapolate(&next, &x, (t - 1.0) / t_next)?;
        t = t_next;
        x = next;
        f_x = f_next;
        objective.push(f_x);
        telemetry.push(TelemetryRow {
            outer: 0,
            rho: cfg.kappa,
            inner: iterations,
            penalty: f_x,
            feasibility: stop_value,
            data_fit: 0.5 * misfit * misfit * fnorm * fnorm,
            l0_count: x.alpha.count_nonzero(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if stop_value <= cfg.eps_p {
            converged = true;
            break;
        }
    }
    Ok(BaselineReport {
        u: x.synth,
        alpha: x.alpha,
        iterations,
        converged,
        stop_value,
        objective,
        restarts,
        telemetry,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// `1/2 ||A u - f||_D^2 + sum_i lambda_i |(W u)_i|_p`
pub fn analysis_objective(problem: &Problem, u: &[f64], norm: Norm) -> f64 {
    problem.data_fit(u) + l1_penalty(&problem.frame.decompose(u), problem.plane_lambda(), norm)
}

pub fn default_mu(level_lambda: &[f64]) -> f64 {
    level_lambda.iter().sum::<f64>() / level_lambda.len().max(1) as f64
}

/// Split Bregman iteration for `min_u 1/2 ||A u - f||_D^2 + sum_i lambda_i |(W u)_i|_p`.
pub fn split_bregman_analysis(
    problem: &Problem,
    level_lambda: &[f64],
    cfg: &AnalysisConfig,
) -> Result<BaselineReport> {
    let mu = match cfg.mu {
        Some(m) => m,
        None => cfg.mu_scale * default_mu(level_lambda),
    };
    if !(mu > 0.0 && mu.is_finite()) || !(cfg.eps_s > 0.0) {
        return Err(invalid(format!(
            "coupling weight must be positive, got {mu}"
        )));
    }
    let start = Instant::now();
    let thresholds = ThresholdVector::scaled(problem.plane_lambda(), 1.0 / mu)?;
    let fnorm = norm2(problem.f).max(f64::MIN_POSITIVE);
    let atf = problem.op.weighted_adjoint(problem.f);
    let q = ShiftedNormal {
        op: problem.op,
        shift: mu,
    };
    let cg = CgOptions {
        tol: cfg.cg_tol,
        maxit: cfg.cg_maxit,
    };

    let mut u = vec![0.0; problem.pixels()];
    let mut d = problem.frame.zero_coefficients();
    let mut b = problem.frame.zero_coefficients();
    let mut objective = Vec::new();
    let mut telemetry = Vec::new();
    let mut stop_value = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.maxit {
        iterations += 1;
        let mut dmb = d.clone();
        axpy(-1.0, b.as_slice(), dmb.as_mut_slice());
        let mut c = atf.clone();
        axpy(mu, &problem.frame.reconstruct(&dmb)?, &mut c);
        u = cg_solve(&q, &c, Some(&u), &cg)?.x;

        let wu = problem.frame.decompose(&u);
        let mut wub = wu.clone();
        axpy(1.0, b.as_slice(), wub.as_mut_slice());
        d = shrink(&wub, &thresholds, cfg.norm)?;
        // b + W u - d
        b = wub;
        axpy(-1.0, d.as_slice(), b.as_mut_slice());

        stop_value = dist2(wu.as_slice(), d.as_slice()) / fnorm;
        let fit = problem.data_fit(&u);
        let obj = fit + l1_penalty(&wu, problem.plane_lambda(), cfg.norm);
        objective.push(obj);
        telemetry.push(TelemetryRow {
            outer: 0,
            rho: mu,
            inner: iterations,
            penalty: obj,
            feasibility: stop_value,
            data_fit: fit,
            l0_count: d.count_nonzero(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if stop_value <= cfg.eps_s {
            converged = true;
            break;
        }
    }
    Ok(BaselineReport {
        u,
        alpha: d,
        iterations,
        converged,
        stop_value,
        objective,
        restarts: 0,
        telemetry,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
