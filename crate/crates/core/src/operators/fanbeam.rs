//! Fan-beam projection matrix on a flat detector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

use super::siddon::{siddon_trace, PixelGrid, Point};
use super::LinearOperator;

pub const DEFAULT_PIXEL_SIZE: f64 = 0.25;

/// Scan geometry. Sources sit on a circle of radius `source_radius` at
/// `views` equally spaced angles; the flat detector faces the source at
/// distance `2 * source_radius` and spans the fan angle `detector_span`
/// (radians), split into `detectors` equal bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanBeamGeometry {
    pub grid_side: usize,
    pub pixel_size: f64,
    pub views: usize,
    pub detectors: usize,
    pub source_radius: f64,
    pub detector_span: f64,
}

impl FanBeamGeometry {
    /// 360 views, `2 * side` detectors, pixels of side 1/4, source at twice
    /// the grid side, and a fan that covers the grid's circumscribed circle
    /// with 5% margin.
    pub fn default_for(grid_side: usize) -> Self {
        let pixel_size = DEFAULT_PIXEL_SIZE;
        let source_radius = 2.0 * grid_side as f64 * pixel_size;
        Self {
            grid_side,
            pixel_size,
            views: 360,
            detectors: 2 * grid_side,
            source_radius,
            detector_span: Self::covering_span(grid_side, pixel_size, source_radius) * 1.05,
        }
    }

    /// Fan angle subtended by the grid's circumscribed circle.
    pub fn covering_span(grid_side: usize, pixel_size: f64, source_radius: f64) -> f64 {
        let half_diag = grid_side as f64 * pixel_size / std::f64::consts::SQRT_2;
        2.0 * (half_diag / source_radius).asin()
    }

    pub fn grid(&self) -> PixelGrid {
        PixelGrid::square(self.grid_side, self.pixel_size)
    }

    fn validate(&self) -> Result<()> {
        if self.grid_side == 0 || self.views == 0 || self.detectors == 0 {
            return Err(invalid("grid side, views and detectors must be positive"));
        }
        if !(self.pixel_size > 0.0) {
            return Err(invalid("pixel size must be positive"));
        }
        let half_diag = self.grid_side as f64 * self.pixel_size / std::f64::consts::SQRT_2;
        if !(self.source_radius > half_diag) {
            return Err(invalid("source circle must enclose the grid"));
        }
        if !(self.detector_span > 0.0 && self.detector_span < std::f64::consts::PI) {
            return Err(invalid("detector span must lie in (0, pi)"));
        }
        Ok(())
    }

    /// Source position and detector-bin center of ray `(view, bin)`.
    pub fn ray(&self, view: usize, bin: usize) -> (Point, Point) {
        let theta = std::f64::consts::TAU * view as f64 / self.views as f64;
        let (s, c) = theta.sin_cos();
        let r = self.source_radius;
        let source = Point::new(r * c, r * s);
        let half_width = 2.0 * r * (self.detector_span / 2.0).tan();
        let t = -half_width + (bin as f64 + 0.5) * 2.0 * half_width / self.detectors as f64;
        let det = Point::new(-r * c - t * s, -r * s + t * c);
        (source, det)
    }
}

/// Compressed sparse row matrix with `f64` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    index: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let nnz = rows.iter().map(Vec::len).sum();
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut index = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        offsets.push(0);
        for row in &rows {
            for &(j, v) in row {
                if j >= cols {
                    return Err(invalid(format!("column {j} out of range {cols}")));
                }
                index.push(j as u32);
                values.push(v);
            }
            offsets.push(index.len());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            offsets,
            index,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[k]..self.offsets[k + 1];
        self.index[r.clone()]
            .iter()
            .zip(&self.values[r])
            .map(|(&j, &v)| (j as usize, v))
    }
}

impl LinearOperator for SparseMatrix {
    fn input_len(&self) -> usize {
        self.cols
    }
    fn output_len(&self) -> usize {
        self.rows
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(k, yk)| {
            *yk = self.row(k).map(|(j, v)| v * x[j]).sum();
        });
    }
    fn adjoint(&self, y: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        for (k, &yk) in y.iter().enumerate() {
            if yk != 0.0 {
                for (j, v) in self.row(k) {
                    x[j] += v * yk;
                }
            }
        }
    }
}

/// Builds the `views * detectors` by `side^2` system matrix; row
/// `view * detectors + bin` holds the Siddon lengths of that ray.
pub fn fanbeam_build(geometry: &FanBeamGeometry) -> Result<SparseMatrix> {
    geometry.validate()?;
    let grid = geometry.grid();
    let rows: Result<Vec<Vec<(usize, f64)>>> = (0..geometry.views * geometry.detectors)
        .into_par_iter()
        .map(|k| {
            let (s, d) = geometry.ray(k / geometry.detectors, k % geometry.detectors);
            siddon_trace(s, d, &grid)
        })
        .collect();
    SparseMatrix::from_rows(grid.nx * grid.ny, rows?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GaussianStream;
    use crate::operators::adjoint_mismatch;

    /// 16x16 unit pixels.
    fn small(views: usize) -> FanBeamGeometry {
        FanBeamGeometry {
            views,
            pixel_size: 1.0,
            source_radius: 32.0,
            detector_span: FanBeamGeometry::covering_span(16, 1.0, 32.0) * 1.05,
            ..FanBeamGeometry::default_for(16)
        }
    }

    #[test]
    fn shape_and_coverage() {
        let g = small(12);
        let a = fanbeam_build(&g).unwrap();
        assert_eq!(a.rows(), 12 * 32);
        assert_eq!(a.cols(), 256);
        // every pixel is seen by some ray
        let seen = a.adjoint_vec(&vec![1.0; a.rows()]);
        assert!(seen.iter().all(|&v| v > 0.0));
        // the outermost bins miss the grid
        assert_eq!(a.row(0).count(), 0);
        assert_eq!(a.row(31).count(), 0);
    }

    #[test]
    fn adjoint_matches_forward() {
        let a = fanbeam_build(&small(10)).unwrap();
        let g = GaussianStream::new(3);
        for s in 0..5u64 {
            let u: Vec<f64> = (0..a.cols())
                .map(|i| g.normal(s * 100_000 + i as u64))
                .collect();
            let v: Vec<f64> = (0..a.rows())
                .map(|i| g.normal(s * 100_000 + 50_000 + i as u64))
                .collect();
            assert!(adjoint_mismatch(&a, &u, &v) < 1e-12);
        }
    }

    #[test]
    fn disk_sinogram_is_mirror_symmetric() {
        let g = small(8);
        let a = fanbeam_build(&g).unwrap();
        let grid = g.grid();
        let mut disk = vec![0.0; 256];
        for row in 0..16 {
            for col in 0..16 {
                let p = grid.pixel_center(col, row);
                if p.x.hypot(p.y) < 5.0 {
                    disk[row * 16 + col] = 1.0;
                }
            }
        }
        let sino = a.apply_vec(&disk);
        let d = g.detectors;
        for v in 0..g.views {
            for b in 0..d {
                let x = sino[v * d + b];
                let y = sino[v * d + d - 1 - b];
                assert!(
                    (x - y).abs() <= 1e-8 * x.abs().max(1.0),
                    "view {v} bin {b}: {x} vs {y}"
                );
            }
        }
        // central ray through a disk of radius 5: path length about 10
        assert!((sino[d / 2] - 10.0).abs() < 1.5);
    }

    #[test]
    fn default_geometry_encloses_the_grid() {
        let g = FanBeamGeometry::default_for(128);
        assert_eq!((g.views, g.detectors), (360, 256));
        assert_eq!(g.source_radius, 2.0 * 128.0 * DEFAULT_PIXEL_SIZE);
        assert!(g.validate().is_ok());
    }

    #[test]
    fn invalid_geometry() {
        let mut g = small(4);
        g.source_radius = 3.0;
        assert!(fanbeam_build(&g).is_err());
        let mut g = small(4);
        g.views = 0;
        assert!(fanbeam_build(&g).is_err());
    }
}
