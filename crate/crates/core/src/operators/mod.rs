//! Matrix-free forward operators `A` with exact adjoints.

mod blur;
mod fanbeam;
mod siddon;

pub use blur::{blur_apply, gaussian_kernel, BlurOperator, Kernel2d};
pub use fanbeam::{fanbeam_build, FanBeamGeometry, SparseMatrix};
pub use siddon::{siddon_trace, PixelGrid, Point};

pub use crate::separable::{Boundary, Direction};

/// A linear map `R^n -> R^d` together with its transpose and an optional
/// positive diagonal weight `D` on the measurement side.
pub trait LinearOperator: Send + Sync {
    /// `n`
    fn input_len(&self) -> usize;
    /// `d`
    fn output_len(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn adjoint(&self, y: &[f64], x: &mut [f64]);

    /// Diagonal of `D`; `None` means `D = I`.
    fn weights(&self) -> Option<&[f64]> {
        None
    }

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.output_len()];
        self.apply(x, &mut y);
        y
    }

    fn adjoint_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.input_len()];
        self.adjoint(y, &mut x);
        x
    }

    /// `A^T D A x`
    fn normal(&self, x: &[f64], out: &mut [f64]) {
        let mut y = self.apply_vec(x);
        if let Some(d) = self.weights() {
            for (v, w) in y.iter_mut().zip(d) {
                *v *= w;
            }
        }
        self.adjoint(&y, out);
    }

    /// `A^T D y`
    fn weighted_adjoint(&self, y: &[f64]) -> Vec<f64> {
        match self.weights() {
            Some(d) => {
                let dy: Vec<f64> = y.iter().zip(d).map(|(v, w)| v * w).collect();
                self.adjoint_vec(&dy)
            }
            None => self.adjoint_vec(y),
        }
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn input_len(&self) -> usize {
        (**self).input_len()
    }
    fn output_len(&self) -> usize {
        (**self).output_len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
    fn adjoint(&self, y: &[f64], x: &mut [f64]) {
        (**self).adjoint(y, x)
    }
    fn weights(&self) -> Option<&[f64]> {
        (**self).weights()
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for Box<T> {
    fn input_len(&self) -> usize {
        (**self).input_len()
    }
    fn output_len(&self) -> usize {
        (**self).output_len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
    fn adjoint(&self, y: &[f64], x: &mut [f64]) {
        (**self).adjoint(y, x)
    }
    fn weights(&self) -> Option<&[f64]> {
        (**self).weights()
    }
}

/// `A = s I`. `s = 1` is the denoising operator; `s = 0` is handy in tests.
#[derive(Debug, Clone, Copy)]
pub struct ScaledIdentity {
    pub n: usize,
    pub scale: f64,
}

impl ScaledIdentity {
    pub fn identity(n: usize) -> Self {
        Self { n, scale: 1.0 }
    }
}

impl LinearOperator for ScaledIdentity {
    fn input_len(&self) -> usize {
        self.n
    }
    fn output_len(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.scale * xi;
        }
    }
    fn adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.apply(y, x)
    }
}

/// Keeps the pixels where `mask` is true (inpainting-style sampling).
#[derive(Debug, Clone)]
pub struct MaskOperator {
    mask: Vec<bool>,
}

impl MaskOperator {
    pub fn new(mask: Vec<bool>) -> Self {
        Self { mask }
    }
}

impl LinearOperator for MaskOperator {
    fn input_len(&self) -> usize {
        self.mask.len()
    }
    fn output_len(&self) -> usize {
        self.mask.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), &m) in y.iter_mut().zip(x).zip(&self.mask) {
            *yi = if m { *xi } else { 0.0 };
        }
    }
    fn adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.apply(y, x)
    }
}

/// Attaches a diagonal weight `D` (all entries > 0) to another operator.
pub struct Weighted<A> {
    inner: A,
    diag: Vec<f64>,
}

impl<A: LinearOperator> Weighted<A> {
    pub fn new(inner: A, diag: Vec<f64>) -> crate::error::Result<Self> {
        if diag.len() != inner.output_len() {
            return Err(crate::error::mismatch(inner.output_len(), diag.len()));
        }
        if diag.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(crate::error::invalid("weights must be positive and finite"));
        }
        Ok(Self { inner, diag })
    }
}

impl<A: LinearOperator> LinearOperator for Weighted<A> {
    fn input_len(&self) -> usize {
        self.inner.input_len()
    }
    fn output_len(&self) -> usize {
        self.inner.output_len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply(x, y)
    }
    fn adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.inner.adjoint(y, x)
    }
    fn weights(&self) -> Option<&[f64]> {
        Some(&self.diag)
    }
}

/// `|<A u, v> - <u, A^T v>| / (||A u|| ||v|| + ||u|| ||A^T v||)` for one probe pair.
pub fn adjoint_mismatch(op: &dyn LinearOperator, u: &[f64], v: &[f64]) -> f64 {
    use crate::linalg::{dot, norm2};
    let au = op.apply_vec(u);
    let atv = op.adjoint_vec(v);
    let lhs = dot(&au, v);
    let rhs = dot(u, &atv);
    let scale = norm2(&au) * norm2(v) + norm2(u) * norm2(&atv);
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}
