//! Image container, quality metrics, noise synthesis and the Shepp–Logan phantom.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::linalg;

/// Dense grayscale image, row-major, double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("image must be nonempty"));
        }
        if pixels.len() != width * height {
            return Err(mismatch(width * height, pixels.len()));
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("pixel {i} is not finite")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "image must be nonempty");
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixel count `n`.
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn max_abs(&self) -> f64 {
        linalg::norm_inf(&self.pixels)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Which of the two PSNR normalizations to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsnrMode {
    /// `-20 log10(||u - ref||_2 / n)`
    Ct,
    /// `-20 log10(||u - ref||_2 / (255 n))`
    Gray255,
    /// Conventional peak-255 PSNR, `-20 log10(||u - ref||_2 / (255 sqrt(n)))`.
    Peak255,
}

impl std::str::FromStr for PsnrMode {
    type Err = crate::error::RestoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ct" => Ok(PsnrMode::Ct),
            "gray255" => Ok(PsnrMode::Gray255),
            "peak255" => Ok(PsnrMode::Peak255),
            other => Err(invalid(format!("unknown psnr mode '{other}'"))),
        }
    }
}

/// Peak signal-to-noise ratio in decibels. Identical images give `f64::INFINITY`.
pub fn psnr(u: &Image, reference: &Image, mode: PsnrMode) -> Result<f64> {
    if !u.same_shape(reference) {
        return Err(mismatch(
            format!("{}x{}", reference.width, reference.height),
            format!("{}x{}", u.width, u.height),
        ));
    }
    let err = linalg::dist2(&u.pixels, &reference.pixels);
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    let n = u.len() as f64;
    let denom = match mode {
        PsnrMode::Ct => n,
        PsnrMode::Gray255 => 255.0 * n,
        PsnrMode::Peak255 => 255.0 * n.sqrt(),
    };
    Ok(-20.0 * (err / denom).log10())
}

/// Additive white Gaussian noise parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { sigma, seed })
    }

    /// `sigma = 0.01 * ||f||_inf`, the calibration used for tomography data.
    pub fn relative_to_peak(data: &[f64], seed: u64) -> Self {
        Self {
            sigma: 0.01 * linalg::norm_inf(data),
            seed,
        }
    }
}

/// Counter-based normal variates.
///
/// Uniforms come from SplitMix64's output function applied to
/// `seed + (counter + 1) * 0x9E3779B97F4A7C15`, so the value at any index
/// depends only on `(seed, index)`. Pairs of uniforms `(2k, 2k+1)` feed a
/// Box–Muller transform; index `2k` takes the cosine branch and `2k+1` the
/// sine branch.
#[derive(Debug, Clone, Copy)]
pub struct GaussianStream {
    seed: u64,
}

impl GaussianStream {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn bits(&self, counter: u64) -> u64 {
        Self::mix(
            self.seed
                .wrapping_add(counter.wrapping_add(1).wrapping_mul(Self::GOLDEN)),
        )
    }

    /// Uniform on (0, 1].
    pub fn uniform(&self, counter: u64) -> f64 {
        ((self.bits(counter) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate number `index`.
    pub fn normal(&self, index: u64) -> f64 {
        let pair = index / 2;
        let u1 = self.uniform(2 * pair);
        let u2 = self.uniform(2 * pair + 1);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        if index % 2 == 0 {
            r * theta.cos()
        } else {
            r * theta.sin()
        }
    }

    pub fn fill(&self, out: &mut [f64]) {
        for (i, v) in out.iter_mut().enumerate() {
            *v = self.normal(i as u64);
        }
    }
}

/// Adds `sigma * N(0, 1)` to every entry of `data`, deterministically in `spec.seed`.
pub fn add_gaussian_noise_slice(data: &[f64], spec: NoiseSpec) -> Vec<f64> {
    if spec.sigma == 0.0 {
        return data.to_vec();
    }
    let stream = GaussianStream::new(spec.seed);
    data.iter()
        .enumerate()
        .map(|(i, &v)| v + spec.sigma * stream.normal(i as u64))
        .collect()
}

pub fn add_gaussian_noise(img: &Image, spec: NoiseSpec) -> Image {
    Image {
        width: img.width,
        height: img.height,
        pixels: add_gaussian_noise_slice(&img.pixels, spec),
    }
}

/// One ellipse of the phantom: intensity, semi-axes, center, rotation (degrees).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ellipse {
    pub intensity: f64,
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub y0: f64,
    pub phi_deg: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let phi = self.phi_deg.to_radians();
        let (s, c) = phi.sin_cos();
        let dx = x - self.x0;
        let dy = y - self.y0;
        let xr = dx * c + dy * s;
        let yr = -dx * s + dy * c;
        (xr / self.a).powi(2) + (yr / self.b).powi(2) <= 1.0
    }
}

/// The modified (Toft) Shepp–Logan table, which keeps intensities in [0, 1].
pub(crate) const SHEPP_LOGAN: [Ellipse; 10] = [
    Ellipse {
        intensity: 1.0,
        a: 0.69,
        b: 0.92,
        x0: 0.0,
        y0: 0.0,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: -0.8,
        a: 0.6624,
        b: 0.874,
        x0: 0.0,
        y0: -0.0184,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: -0.2,
        a: 0.11,
        b: 0.31,
        x0: 0.22,
        y0: 0.0,
        phi_deg: -18.0,
    },
    Ellipse {
        intensity: -0.2,
        a: 0.16,
        b: 0.41,
        x0: -0.22,
        y0: 0.0,
        phi_deg: 18.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.21,
        b: 0.25,
        x0: 0.0,
        y0: 0.35,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.046,
        b: 0.046,
        x0: 0.0,
        y0: 0.1,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.046,
        b: 0.046,
        x0: 0.0,
        y0: -0.1,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.046,
        b: 0.023,
        x0: -0.08,
        y0: -0.605,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.023,
        b: 0.023,
        x0: 0.0,
        y0: -0.606,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.023,
        b: 0.046,
        x0: 0.06,
        y0: -0.605,
        phi_deg: 0.0,
    },
];

/// Normalized coordinates of pixel centers: x grows rightwards, y upwards, both in (-1, 1).
pub(crate) fn pixel_center(i: usize, n: usize) -> f64 {
    (2.0 * i as f64 + 1.0) / n as f64 - 1.0
}

/// Shepp–Logan phantom sampled at pixel centers of an `n x n` grid.
pub fn shepp_logan(n: usize) -> Result<Image> {
    if n < 16 {
        return Err(invalid(format!("phantom side must be >= 16, got {n}")));
    }
    Ok(Image::from_fn(n, n, |col, row| {
        let x = pixel_center(col, n);
        let y = -pixel_center(row, n);
        let v: f64 = SHEPP_LOGAN
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.intensity)
            .sum();
        // Overlap sums such as 1 - 0.8 are not exact in binary.
        (v * 1e12).round() / 1e12
    }))
}
