//! Exact intersection lengths of a line segment with a square pixel grid.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// `nx x ny` pixels of side `pixel_size`, centered on the origin. Pixel
/// `(col, row)` has flat index `row * nx + col`; row 0 is the top (largest y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGrid {
    pub nx: usize,
    pub ny: usize,
    pub pixel_size: f64,
}

impl PixelGrid {
    pub fn square(side: usize, pixel_size: f64) -> Self {
        Self {
            nx: side,
            ny: side,
            pixel_size,
        }
    }

    fn x_min(&self) -> f64 {
        -(self.nx as f64) * self.pixel_size / 2.0
    }

    fn y_min(&self) -> f64 {
        -(self.ny as f64) * self.pixel_size / 2.0
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> Point {
        let h = self.pixel_size;
        Point::new(
            self.x_min() + (col as f64 + 0.5) * h,
            self.y_min() + ((self.ny - 1 - row) as f64 + 0.5) * h,
        )
    }
}

/// Parametric window of one axis: the `alpha` range where the segment lies
/// between the two outer planes.
fn axis_window(p0: f64, d: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if d == 0.0 {
        if p0 > lo && p0 < hi {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            None
        }
    } else {
        let a = (lo - p0) / d;
        let b = (hi - p0) / d;
        Some((a.min(b), a.max(b)))
    }
}

fn plane_crossings(p0: f64, d: f64, lo: f64, h: f64, count: usize, window: (f64, f64)) -> Vec<f64> {
    if d == 0.0 {
        return Vec::new();
    }
    let mut out: Vec<f64> = (0..=count)
        .map(|i| (lo + i as f64 * h - p0) / d)
        .filter(|&a| a > window.0 && a < window.1)
        .collect();
    if d < 0.0 {
        out.reverse();
    }
    out
}

/// Pixels crossed by the segment `p0 -> p1` in traversal order, with the
/// length of the segment inside each. Segments shorter than `1e-10` pixel
/// widths (grazing corners) are dropped.
pub fn siddon_trace(p0: Point, p1: Point, grid: &PixelGrid) -> Result<Vec<(usize, f64)>> {
    let (dx, dy) = (p1.x - p0.x, p1.y - p0.y);
    let length = dx.hypot(dy);
    if !(length > 0.0) || !length.is_finite() {
        return Err(invalid("ray has zero length"));
    }
    let h = grid.pixel_size;
    let (xmin, ymin) = (grid.x_min(), grid.y_min());
    let (xmax, ymax) = (-xmin, -ymin);
    let Some(wx) = axis_window(p0.x, dx, xmin, xmax) else {
        return Ok(Vec::new());
    };
    let Some(wy) = axis_window(p0.y, dy, ymin, ymax) else {
        return Ok(Vec::new());
    };
    let a_lo = 0f64.max(wx.0).max(wy.0);
    let a_hi = 1f64.min(wx.1).min(wy.1);
    if a_lo >= a_hi {
        return Ok(Vec::new());
    }
    let window = (a_lo, a_hi);
    let xs = plane_crossings(p0.x, dx, xmin, h, grid.nx, window);
    let ys = plane_crossings(p0.y, dy, ymin, h, grid.ny, window);

    let mut alphas = Vec::with_capacity(xs.len() + ys.len() + 2);
    alphas.push(a_lo);
    let (mut i, mut j) = (0, 0);
    while i < xs.len() || j < ys.len() {
        if j == ys.len() || (i < xs.len() && xs[i] <= ys[j]) {
            alphas.push(xs[i]);
            i += 1;
        } else {
            alphas.push(ys[j]);
            j += 1;
        }
    }
    alphas.push(a_hi);

    let min_len = 1e-10 * h;
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(alphas.len());
    for w in alphas.windows(2) {
        let seg = (w[1] - w[0]) * length;
        if seg <= min_len {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let col = ((p0.x + mid * dx - xmin) / h).floor();
        let up = ((p0.y + mid * dy - ymin) / h).floor();
        if col < 0.0 || up < 0.0 || col >= grid.nx as f64 || up >= grid.ny as f64 {
            continue;
        }
        let idx = (grid.ny - 1 - up as usize) * grid.nx + col as usize;
        match out.last_mut() {
            Some((last, len)) if *last == idx => *len += seg,
            _ => out.push((idx, seg)),
        }
    }
    Ok(out)
}
