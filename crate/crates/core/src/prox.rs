//! Thresholding maps and projections onto the pixel feasible set.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::framelet::FrameCoefficients;
use crate::image::Image;

/// Pixel constraint set `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibleSet {
    All,
    LowerBounded { lb: f64 },
    Box { lb: f64, ub: f64 },
}

impl FeasibleSet {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FeasibleSet::All => Ok(()),
            FeasibleSet::LowerBounded { lb } if lb.is_finite() => Ok(()),
            FeasibleSet::Box { lb, ub } if lb.is_finite() && ub.is_finite() && lb <= ub => Ok(()),
            _ => Err(invalid(format!("invalid feasible set {self:?}"))),
        }
    }

    pub fn lower(&self) -> f64 {
        match *self {
            FeasibleSet::All => f64::NEG_INFINITY,
            FeasibleSet::LowerBounded { lb } | FeasibleSet::Box { lb, .. } => lb,
        }
    }

    pub fn upper(&self) -> f64 {
        match *self {
            FeasibleSet::Box { ub, .. } => ub,
            _ => f64::INFINITY,
        }
    }

    pub fn is_all(&self) -> bool {
        matches!(self, FeasibleSet::All)
    }

    pub fn project_in_place(&self, x: &mut [f64]) {
        match *self {
            FeasibleSet::All => {}
            FeasibleSet::LowerBounded { lb } => x.iter_mut().for_each(|v| *v = v.max(lb)),
            FeasibleSet::Box { lb, ub } => x.iter_mut().for_each(|v| *v = v.clamp(lb, ub)),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        x.iter().all(|&v| v >= lo && v <= hi)
    }
}

pub fn project_feasible(x: &Image, set: &FeasibleSet) -> Image {
    let mut out = x.clone();
    set.project_in_place(out.pixels_mut());
    out
}

/// One threshold per coefficient plane, broadcast over the plane's pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector(Vec<f64>);

impl ThresholdVector {
    pub fn new(per_plane: Vec<f64>) -> Result<Self> {
        if per_plane.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
            return Err(invalid("thresholds must be finite and nonnegative"));
        }
        Ok(Self(per_plane))
    }

    /// `sqrt(2 lambda / rho)` per plane.
    pub fn l0(plane_lambda: &[f64], rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(invalid(format!("penalty must be positive, got {rho}")));
        }
        Self::new(plane_lambda.iter().map(|&l| l0_threshold(l, rho)).collect())
    }

    /// `scale * lambda` per plane (shrinkage thresholds).
    pub fn scaled(plane_lambda: &[f64], scale: f64) -> Result<Self> {
        Self::new(plane_lambda.iter().map(|&l| scale * l).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    fn check(&self, x: &FrameCoefficients) -> Result<()> {
        if self.0.len() != x.num_planes() {
            return Err(mismatch(x.num_planes(), self.0.len()));
        }
        Ok(())
    }
}

pub fn l0_threshold(lambda: f64, rho: f64) -> f64 {
    (2.0 * lambda / rho).sqrt()
}

/// `x` if `|x| > gamma`, else 0.
#[inline]
pub fn hard_threshold_scalar(x: f64, gamma: f64) -> f64 {
    if x.abs() > gamma {
        x
    } else {
        0.0
    }
}

#[inline]
pub fn soft_threshold_scalar(x: f64, t: f64) -> f64 {
    let m = x.abs() - t;
    if m > 0.0 {
        m.copysign(x)
    } else {
        0.0
    }
}

/// Minimizer of `lambda [a != 0] + rho/2 (a - c)^2`.
pub fn l0_prox_scalar(c: f64, lambda: f64, rho: f64) -> f64 {
    hard_threshold_scalar(c, l0_threshold(lambda, rho))
}

fn map_planes(
    x: &FrameCoefficients,
    t: &ThresholdVector,
    f: impl Fn(f64, f64) -> f64,
) -> Result<FrameCoefficients> {
    t.check(x)?;
    let mut out = x.clone();
    for (p, &tp) in t.as_slice().iter().enumerate() {
        out.plane_mut(p).iter_mut().for_each(|v| *v = f(*v, tp));
    }
    Ok(out)
}

pub fn hard_threshold(x: &FrameCoefficients, gamma: &ThresholdVector) -> Result<FrameCoefficients> {
    map_planes(x, gamma, hard_threshold_scalar)
}

pub fn l0_prox(c: &FrameCoefficients, plane_lambda: &[f64], rho: f64) -> Result<FrameCoefficients> {
    hard_threshold(c, &ThresholdVector::l0(plane_lambda, rho)?)
}

pub fn soft_threshold(x: &FrameCoefficients, t: &ThresholdVector) -> Result<FrameCoefficients> {
    map_planes(x, t, soft_threshold_scalar)
}

/// Shrinks each pixel's vector of detail coefficients within a level by its
/// Euclidean norm. The level's threshold is taken from its first plane; the
/// final (lowpass) plane is shrunk elementwise.
pub fn group_soft_threshold(
    x: &FrameCoefficients,
    t: &ThresholdVector,
) -> Result<FrameCoefficients> {
    t.check(x)?;
    let mut out = x.clone();
    let n = x.plane_len();
    let data = x.as_slice();
    for level in 0..x.levels() {
        let planes = x.level_planes(level);
        if planes.is_empty() {
            continue;
        }
        let tl = t.as_slice()[planes.start];
        let dst = out.as_mut_slice();
        for i in 0..n {
            let norm = planes
                .clone()
                .map(|p| data[p * n + i].powi(2))
                .sum::<f64>()
                .sqrt();
            let factor = if norm > tl { 1.0 - tl / norm } else { 0.0 };
            for p in planes.clone() {
                dst[p * n + i] = data[p * n + i] * factor;
            }
        }
    }
    let last = x.num_planes() - 1;
    let tl = t.as_slice()[last];
    out.plane_mut(last)
        .iter_mut()
        .for_each(|v| *v = soft_threshold_scalar(*v, tl));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framelet::{FilterBank, FrameletKind};
    use crate::image::GaussianStream;
    use proptest::prelude::*;

    fn stack(kind: FrameletKind, levels: usize, seed: u64) -> FrameCoefficients {
        let bank = FilterBank::new(kind).unwrap();
        let c = FrameCoefficients::zeros(&bank, levels, 5, 4);
        let g = GaussianStream::new(seed);
        let data = (0..c.len()).map(|i| g.normal(i as u64)).collect();
        c.with_data(data).unwrap()
    }

    #[test]
    fn hard_threshold_branches() {
        assert_eq!(hard_threshold_scalar(0.5, 1.0), 0.0);
        assert_eq!(hard_threshold_scalar(2.0, 1.0), 2.0);
        assert_eq!(hard_threshold_scalar(1.0, 1.0), 0.0);
        assert_eq!(hard_threshold_scalar(-1.0, 1.0), 0.0);
        assert_eq!(hard_threshold_scalar(-1.5, 1.0), -1.5);
    }

    #[test]
    fn l0_threshold_arithmetic() {
        assert_eq!(l0_threshold(2.0, 4.0), 1.0);
        assert_eq!(l0_prox_scalar(1.0, 2.0, 4.0), 0.0);
        assert_eq!(l0_prox_scalar(1.0 + 1e-12, 2.0, 4.0), 1.0 + 1e-12);
        assert_eq!(l0_prox_scalar(-0.3, 0.0, 4.0), -0.3);
        assert_eq!(l0_prox_scalar(0.0, 0.0, 4.0), 0.0);
    }

    #[test]
    fn l0_prox_rejects_bad_penalty() {
        let c = stack(FrameletKind::Haar, 1, 1);
        let lam = vec![1.0; c.num_planes()];
        assert!(l0_prox(&c, &lam, 0.0).is_err());
        assert!(l0_prox(&c, &lam, -1.0).is_err());
        assert!(l0_prox(&c, &lam[1..], 1.0).is_err());
    }

    #[test]
    fn hard_threshold_support() {
        let c = stack(FrameletKind::PiecewiseLinear, 2, 3);
        let gam: Vec<f64> = (0..c.num_planes()).map(|p| 0.1 * p as f64).collect();
        let out = hard_threshold(&c, &ThresholdVector::new(gam.clone()).unwrap()).unwrap();
        for p in 0..c.num_planes() {
            for (a, b) in c.plane(p).iter().zip(out.plane(p)) {
                if a.abs() > gam[p] {
                    assert_eq!(a, b);
                } else {
                    assert_eq!(*b, 0.0);
                }
            }
        }
    }

    #[test]
    fn soft_threshold_examples_and_grid_oracle() {
        assert_eq!(soft_threshold_scalar(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold_scalar(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold_scalar(0.7, 1.0), 0.0);
        assert_eq!(soft_threshold_scalar(0.7, 0.0), 0.7);
        let g = GaussianStream::new(9);
        for k in 0..50u64 {
            let x = 3.0 * g.normal(2 * k);
            let t = g.normal(2 * k + 1).abs();
            let obj = |a: f64| t * a.abs() + 0.5 * (a - x).powi(2);
            let mut best = (f64::INFINITY, 0.0);
            for i in -200_000..=200_000 {
                let a = i as f64 * 5e-5;
                let v = obj(a);
                if v < best.0 {
                    best = (v, a);
                }
            }
            let s = soft_threshold_scalar(x, t);
            assert!((s - best.1).abs() <= 1e-4);
            assert!(obj(s) <= best.0 + 1e-12);
            assert!((obj(s) - best.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn group_shrinkage_radial_oracle() {
        let c = stack(FrameletKind::PiecewiseLinear, 1, 4);
        let t = vec![0.8; c.num_planes()];
        let out = group_soft_threshold(&c, &ThresholdVector::new(t).unwrap()).unwrap();
        let n = c.plane_len();
        let planes = c.level_planes(0);
        for i in 0..n {
            let x: Vec<f64> = planes.clone().map(|p| c.as_slice()[p * n + i]).collect();
            let y: Vec<f64> = planes.clone().map(|p| out.as_slice()[p * n + i]).collect();
            let nx = crate::linalg::norm2(&x);
            // the minimizer lies on the ray through x: search its radius
            let obj = |r: f64| 0.8 * r + 0.5 * (r - nx).powi(2);
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..=400_000 {
                let r = k as f64 * nx / 200_000.0;
                if obj(r) < best.0 {
                    best = (obj(r), r);
                }
            }
            let ny = crate::linalg::norm2(&y);
            assert!((obj(ny) - best.0).abs() <= 1e-6);
            assert!(ny <= nx);
            if ny > 0.0 {
                let cos = crate::linalg::dot(&x, &y) / (nx * ny);
                assert!((cos - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn group_with_scalar_groups_equals_soft() {
        // Haar with one level has 3 bands per group; the identity bank has
        // only scalar groups.
        let c = stack(FrameletKind::Identity, 1, 6);
        let t = ThresholdVector::new(vec![0.4]).unwrap();
        let a = group_soft_threshold(&c, &t).unwrap();
        let b = soft_threshold(&c, &t).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn group_zeroes_small_groups() {
        let c = stack(FrameletKind::Haar, 2, 8);
        let t = ThresholdVector::new(vec![1e6; c.num_planes()]).unwrap();
        let out = group_soft_threshold(&c, &t).unwrap();
        assert_eq!(out.count_nonzero(), 0);
    }

    #[test]
    fn projection_examples() {
        let img = Image::new(3, 1, vec![-5.0, 100.0, 300.0]).unwrap();
        let b = FeasibleSet::Box { lb: 0.0, ub: 255.0 };
        assert_eq!(project_feasible(&img, &b).pixels(), &[0.0, 100.0, 255.0]);
        let l = FeasibleSet::LowerBounded { lb: 0.0 };
        assert_eq!(project_feasible(&img, &l).pixels(), &[0.0, 100.0, 300.0]);
        assert_eq!(project_feasible(&img, &FeasibleSet::All), img);
        assert!(FeasibleSet::Box { lb: 1.0, ub: 0.0 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn projection_idempotent_and_nonexpansive(
            x in proptest::collection::vec(-500.0f64..500.0, 1..20),
            shift in -50.0f64..50.0,
        ) {
            let y: Vec<f64> = x.iter().map(|v| v * 0.9 + shift).collect();
            for set in [
                FeasibleSet::All,
                FeasibleSet::LowerBounded { lb: 0.0 },
                FeasibleSet::Box { lb: 0.0, ub: 255.0 },
            ] {
                let mut px = x.clone();
                set.project_in_place(&mut px);
                let mut ppx = px.clone();
                set.project_in_place(&mut ppx);
                prop_assert_eq!(&px, &ppx);
                prop_assert!(set.contains(&px));
                let mut py = y.clone();
                set.project_in_place(&mut py);
                prop_assert!(crate::linalg::dist2(&px, &py) <= crate::linalg::dist2(&x, &y) + 1e-12);
            }
        }

        #[test]
        fn l0_prox_two_point_optimal(c in -10.0f64..10.0, lambda in 0.0f64..5.0, rho in 0.01f64..10.0) {
            let a = l0_prox_scalar(c, lambda, rho);
            let obj = |a: f64| if a != 0.0 { lambda } else { 0.0 } + 0.5 * rho * (a - c).powi(2);
            prop_assert!(obj(a) <= obj(0.0));
            prop_assert!(obj(a) <= obj(c));
        }
    }
}
