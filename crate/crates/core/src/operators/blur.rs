use crate::error::{invalid, mismatch, Result};
use crate::image::Image;
use crate::separable::{extend_index, Boundary, Direction, LineOperator};

use super::LinearOperator;

/// Square 2-D correlation kernel, row-major, centered.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2d {
    size: usize,
    taps: Vec<f64>,
    /// 1-D factor `g` with `taps = g (x) g`, when the kernel is separable.
    factor: Option<Vec<f64>>,
}

impl Kernel2d {
    pub fn new(size: usize, taps: Vec<f64>) -> Result<Self> {
        if size % 2 == 0 {
            return Err(invalid(format!("kernel size must be odd, got {size}")));
        }
        if taps.len() != size * size {
            return Err(mismatch(size * size, taps.len()));
        }
        Ok(Self {
            size,
            taps,
            factor: None,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn radius(&self) -> isize {
        (self.size / 2) as isize
    }

    /// `k(i, j)` with `i, j` in `-radius..=radius` (row offset, column offset).
    pub fn at(&self, i: isize, j: isize) -> f64 {
        let r = self.radius();
        self.taps[((i + r) as usize) * self.size + (j + r) as usize]
    }

    pub fn separable_factor(&self) -> Option<&[f64]> {
        self.factor.as_deref()
    }

    /// Flat little-endian blob: `b"FRK2"`, size `u32`, then the taps as `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.taps.len());
        out.extend_from_slice(b"FRK2");
        out.extend_from_slice(&(self.size as u32).to_le_bytes());
        for t in &self.taps {
            out.extend_from_slice(&t.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = crate::framelet::ByteReader { bytes, pos: 0 };
        if r.take(4)? != b"FRK2" {
            return Err(invalid("not a kernel blob"));
        }
        let size = r.u32()? as usize;
        let mut taps = Vec::with_capacity(size * size);
        for _ in 0..size * size {
            taps.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
        }
        Self::new(size, taps)
    }
}

/// Normalized Gaussian `k(i, j) ∝ exp(-(i^2 + j^2) / (2 std^2))` on a
/// centered `size x size` lattice.
pub fn gaussian_kernel(size: usize, std: f64) -> Result<Kernel2d> {
    if size % 2 == 0 {
        return Err(invalid(format!("kernel size must be odd, got {size}")));
    }
    if !(std > 0.0) || !std.is_finite() {
        return Err(invalid(format!("kernel std must be positive, got {std}")));
    }
    let r = (size / 2) as isize;
    let g: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * std * std)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / s).collect();
    let taps = g
        .iter()
        .flat_map(|a| g.iter().map(move |b| a * b))
        .collect();
    Ok(Kernel2d {
        size,
        taps,
        factor: Some(g),
    })
}

/// 2-D correlation with a fixed kernel and boundary extension.
#[derive(Debug, Clone)]
pub struct BlurOperator {
    width: usize,
    height: usize,
    kernel: Kernel2d,
    boundary: Boundary,
    separable: Option<(LineOperator, LineOperator)>,
}

impl BlurOperator {
    pub fn new(width: usize, height: usize, kernel: Kernel2d, boundary: Boundary) -> Self {
        let separable = kernel.factor.as_ref().map(|g| {
            let r = kernel.radius();
            let offsets: Vec<isize> = (-r..=r).collect();
            (
                LineOperator::correlation(width, g, &offsets, boundary),
                LineOperator::correlation(height, g, &offsets, boundary),
            )
        });
        Self {
            width,
            height,
            kernel,
            boundary,
            separable,
        }
    }

    pub fn kernel(&self) -> &Kernel2d {
        &self.kernel
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    fn direct(&self, x: &[f64], y: &mut [f64], dir: Direction) {
        let (w, h) = (self.width, self.height);
        let r = self.kernel.radius();
        y.fill(0.0);
        for row in 0..h {
            for col in 0..w {
                for i in -r..=r {
                    let sr = extend_index(row as isize + i, h, self.boundary);
                    for j in -r..=r {
                        let sc = extend_index(col as isize + j, w, self.boundary);
                        let k = self.kernel.at(i, j);
                        match dir {
                            Direction::Forward => y[row * w + col] += k * x[sr * w + sc],
                            Direction::Adjoint => y[sr * w + sc] += k * x[row * w + col],
                        }
                    }
                }
            }
        }
    }

    fn run(&self, x: &[f64], y: &mut [f64], dir: Direction) {
        match &self.separable {
            Some((rows, cols)) => {
                let mut tmp = vec![0.0; x.len()];
                rows.along_rows(x, &mut tmp, dir);
                cols.along_cols(&tmp, y, self.width, dir);
            }
            None => self.direct(x, y, dir),
        }
    }
}

impl LinearOperator for BlurOperator {
    fn input_len(&self) -> usize {
        self.width * self.height
    }
    fn output_len(&self) -> usize {
        self.width * self.height
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.run(x, y, Direction::Forward)
    }
    fn adjoint(&self, y: &[f64], x: &mut [f64]) {
        self.run(y, x, Direction::Adjoint)
    }
}

pub fn blur_apply(
    img: &Image,
    kernel: &Kernel2d,
    direction: Direction,
    boundary: Boundary,
) -> Image {
    let op = BlurOperator::new(img.width(), img.height(), kernel.clone(), boundary);
    let mut out = vec![0.0; img.len()];
    op.run(img.pixels(), &mut out, direction);
    Image::new(img.width(), img.height(), out).expect("blur preserves shape")
}
