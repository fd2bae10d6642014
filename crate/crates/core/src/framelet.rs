//! B-spline tight framelets and the multi-level undecimated transform.
//!
//! `W` is built from tensor products of 1-D framelet filters. At level `l`
//! the filters are dilated by `2^l` (à trous); every non-lowpass band of each
//! level is kept and only the lowpass output is passed to the next level, so
//! a transform with `k` 1-D filters and `L` levels stores
//! `(k^2 - 1) L + 1` planes of `n` pixels. With this layout `W^T W = I`
//! holds exactly.
//!
//! The B-spline filters are symmetric or antisymmetric about tap 0, and with
//! half-sample symmetric extension the boundary-folded filters remain a tight
//! frame. The Haar filters sit on a half-integer center; for them no
//! symmetric fold is tight, so Haar banks always use periodic extension.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::image::Image;
use crate::separable::{Boundary, Direction, LineOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameletKind {
    Haar,
    PiecewiseLinear,
    PiecewiseCubic,
    /// `W = I`; one filter `[1]`, intended for testing.
    Identity,
}

impl FrameletKind {
    pub const ALL: [FrameletKind; 4] = [
        FrameletKind::Haar,
        FrameletKind::PiecewiseLinear,
        FrameletKind::PiecewiseCubic,
        FrameletKind::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FrameletKind::Haar => "haar",
            FrameletKind::PiecewiseLinear => "piecewise_linear",
            FrameletKind::PiecewiseCubic => "piecewise_cubic",
            FrameletKind::Identity => "identity",
        }
    }

    fn code(self) -> u8 {
        match self {
            FrameletKind::Haar => 0,
            FrameletKind::PiecewiseLinear => 1,
            FrameletKind::PiecewiseCubic => 2,
            FrameletKind::Identity => 3,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.code() == c)
    }
}

impl std::str::FromStr for FrameletKind {
    type Err = crate::error::RestoreError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown framelet kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filter1d {
    pub taps: Vec<f64>,
    /// Offset of `taps[0]` relative to the output sample.
    pub first_offset: isize,
}

impl Filter1d {
    fn centered(taps: Vec<f64>) -> Self {
        let first_offset = -((taps.len() as isize - 1) / 2);
        Self { taps, first_offset }
    }

    pub fn offsets(&self, dilation: isize) -> Vec<isize> {
        (0..self.taps.len() as isize)
            .map(|t| (self.first_offset + t) * dilation)
            .collect()
    }

    pub fn support(&self) -> usize {
        self.taps.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    kind: FrameletKind,
    filters: Vec<Filter1d>,
}

impl FilterBank {
    pub fn new(kind: FrameletKind) -> Result<Self> {
        let filters = match kind {
            FrameletKind::Haar => vec![
                Filter1d {
                    taps: vec![0.5, 0.5],
                    first_offset: 0,
                },
                Filter1d {
                    taps: vec![0.5, -0.5],
                    first_offset: 0,
                },
            ],
            FrameletKind::PiecewiseLinear => {
                let r = std::f64::consts::SQRT_2 / 4.0;
                vec![
                    Filter1d::centered(vec![0.25, 0.5, 0.25]),
                    Filter1d::centered(vec![r, 0.0, -r]),
                    Filter1d::centered(vec![-0.25, 0.5, -0.25]),
                ]
            }
            FrameletKind::PiecewiseCubic => {
                let s6 = 6f64.sqrt();
                vec![
                    Filter1d::centered([1.0, 4.0, 6.0, 4.0, 1.0].map(|v| v / 16.0).to_vec()),
                    Filter1d::centered([-1.0, -2.0, 0.0, 2.0, 1.0].map(|v| v / 8.0).to_vec()),
                    Filter1d::centered([s6, 0.0, -2.0 * s6, 0.0, s6].map(|v| v / 16.0).to_vec()),
                    Filter1d::centered([-1.0, 2.0, 0.0, -2.0, 1.0].map(|v| v / 8.0).to_vec()),
                    Filter1d::centered([1.0, -4.0, 6.0, -4.0, 1.0].map(|v| v / 16.0).to_vec()),
                ]
            }
            FrameletKind::Identity => vec![Filter1d::centered(vec![1.0])],
        };
        let bank = Self { kind, filters };
        bank.check_tightness()?;
        Ok(bank)
    }

    /// Verifies `sum_j sum_t h_j[t] h_j[t + m] = delta(m)`, the undecimated
    /// form of the unitary extension principle, to roundoff.
    fn check_tightness(&self) -> Result<()> {
        let len = self
            .filters
            .iter()
            .map(Filter1d::support)
            .max()
            .unwrap_or(1) as isize;
        for m in -(len - 1)..len {
            let mut acc = 0.0;
            for f in &self.filters {
                for (t, &h) in f.taps.iter().enumerate() {
                    let s = t as isize + m;
                    if s >= 0 && (s as usize) < f.taps.len() {
                        acc += h * f.taps[s as usize];
                    }
                }
            }
            let target = if m == 0 { 1.0 } else { 0.0 };
            if (acc - target).abs() > 1e-14 {
                return Err(invalid(format!(
                    "{} filters fail the tightness check at lag {m}: {acc}",
                    self.kind.name()
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> FrameletKind {
        self.kind
    }

    pub fn filters(&self) -> &[Filter1d] {
        &self.filters
    }

    pub fn filter_count(&self) -> usize {
        self.filters.len()
    }

    /// All 2-D tensor bands `(row filter, column filter)`, lowpass `(0, 0)` first.
    pub fn bands2d(&self) -> Vec<(usize, usize)> {
        let k = self.filters.len();
        (0..k).flat_map(|r| (0..k).map(move |c| (r, c))).collect()
    }

    /// Non-lowpass 2-D bands per level.
    pub fn detail_bands(&self) -> usize {
        self.filters.len().pow(2) - 1
    }

    /// The extension actually used for a requested boundary mode.
    pub fn effective_boundary(&self, requested: Boundary) -> Boundary {
        match self.kind {
            FrameletKind::Haar => Boundary::Periodic,
            _ => requested,
        }
    }
}

pub fn make_filter_bank(kind: FrameletKind) -> Result<FilterBank> {
    FilterBank::new(kind)
}

/// Where a coefficient plane sits in the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneKind {
    Detail { level: usize, band: (usize, usize) },
    Lowpass,
}

/// Multi-level stack of coefficient planes with per-plane weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCoefficients {
    kind: FrameletKind,
    levels: usize,
    width: usize,
    height: usize,
    filter_count: usize,
    data: Vec<f64>,
    lambda: Vec<f64>,
}

impl FrameCoefficients {
    pub fn zeros(bank: &FilterBank, levels: usize, width: usize, height: usize) -> Self {
        let planes = bank.detail_bands() * levels + 1;
        Self {
            kind: bank.kind(),
            levels,
            width,
            height,
            filter_count: bank.filter_count(),
            data: vec![0.0; planes * width * height],
            lambda: vec![0.0; planes],
        }
    }

    pub fn kind(&self) -> FrameletKind {
        self.kind
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn num_planes(&self) -> usize {
        self.lambda.len()
    }

    pub fn detail_bands(&self) -> usize {
        self.filter_count * self.filter_count - 1
    }

    /// Total coefficient count `m = ((|I| - 1) L + 1) n`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn plane(&self, p: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[p * n..(p + 1) * n]
    }

    pub fn plane_mut(&mut self, p: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[p * n..(p + 1) * n]
    }

    pub fn plane_kind(&self, p: usize) -> PlaneKind {
        let per = self.detail_bands();
        if p + 1 == self.num_planes() {
            return PlaneKind::Lowpass;
        }
        let level = p / per;
        let idx = p % per + 1;
        PlaneKind::Detail {
            level,
            band: (idx / self.filter_count, idx % self.filter_count),
        }
    }

    /// Planes belonging to `level`, in storage order.
    pub fn level_planes(&self, level: usize) -> std::ops::Range<usize> {
        let per = self.detail_bands();
        level * per..(level + 1) * per
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn set_lambda(&mut self, lambda: Vec<f64>) -> Result<()> {
        if lambda.len() != self.num_planes() {
            return Err(mismatch(self.num_planes(), lambda.len()));
        }
        if lambda.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(invalid("plane weights must be finite and nonnegative"));
        }
        self.lambda = lambda;
        Ok(())
    }

    /// One weight per level, shared by that level's bands; the coarse lowpass
    /// plane gets 0. The identity bank has no detail bands, so its single
    /// plane takes the level-0 weight.
    pub fn set_level_lambda(&mut self, per_level: &[f64]) -> Result<()> {
        let w = level_weights_to_planes(self.kind, self.levels, self.filter_count, per_level)?;
        self.set_lambda(w)
    }

    pub fn congruent(&self, other: &FrameCoefficients) -> bool {
        self.kind == other.kind
            && self.levels == other.levels
            && self.width == other.width
            && self.height == other.height
            && self.data.len() == other.data.len()
    }

    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(mismatch(self.data.len(), data.len()));
        }
        Ok(Self {
            data,
            ..self.clone()
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            data: vec![0.0; self.data.len()],
            ..self.clone()
        }
    }

    pub fn norm2(&self) -> f64 {
        crate::linalg::norm2(&self.data)
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    /// Serializes to a flat little-endian container:
    /// `b"FRCF"`, version `u32 = 1`, kind `u8`, levels/width/height/planes
    /// `u32`, one `(level u32, band_r u8, band_c u8, lambda f64)` record per
    /// plane (`level = u32::MAX` for the lowpass), then the planes as `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.num_planes() * 14 + self.data.len() * 8);
        out.extend_from_slice(b"FRCF");
        out.extend_from_slice(&1u32.to_le_bytes());
        out.push(self.kind.code());
        for v in [self.levels, self.width, self.height, self.num_planes()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for p in 0..self.num_planes() {
            let (level, band) = match self.plane_kind(p) {
                PlaneKind::Detail { level, band } => (level as u32, band),
                PlaneKind::Lowpass => (u32::MAX, (0, 0)),
            };
            out.extend_from_slice(&level.to_le_bytes());
            out.push(band.0 as u8);
            out.push(band.1 as u8);
            out.extend_from_slice(&self.lambda[p].to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != b"FRCF" {
            return Err(invalid("not a coefficient container"));
        }
        if r.u32()? != 1 {
            return Err(invalid("unsupported coefficient container version"));
        }
        let kind = FrameletKind::from_code(r.take(1)?[0])
            .ok_or_else(|| invalid("unknown framelet kind code"))?;
        let levels = r.u32()? as usize;
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let planes = r.u32()? as usize;
        let bank = FilterBank::new(kind)?;
        let mut coeffs = FrameCoefficients::zeros(&bank, levels, width, height);
        if coeffs.num_planes() != planes {
            return Err(mismatch(coeffs.num_planes(), planes));
        }
        let mut lambda = Vec::with_capacity(planes);
        for p in 0..planes {
            let level = r.u32()?;
            let band = r.take(2)?;
            let expected = match coeffs.plane_kind(p) {
                PlaneKind::Detail { level, band } => (level as u32, band),
                PlaneKind::Lowpass => (u32::MAX, (0, 0)),
            };
            if (level, (band[0] as usize, band[1] as usize)) != expected {
                return Err(invalid(format!("plane {p} out of declared order")));
            }
            lambda.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
        }
        for v in coeffs.data.iter_mut() {
            *v = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
        }
        if r.pos != bytes.len() {
            return Err(invalid("trailing bytes after coefficient payload"));
        }
        coeffs.set_lambda(lambda)?;
        Ok(coeffs)
    }
}

pub(crate) struct ByteReader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.pos + k > self.bytes.len() {
            return Err(invalid(format!("container truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub(crate) fn level_weights_to_planes(
    kind: FrameletKind,
    levels: usize,
    filter_count: usize,
    per_level: &[f64],
) -> Result<Vec<f64>> {
    let per = filter_count * filter_count - 1;
    let planes = per * levels + 1;
    let weight = |l: usize| -> Result<f64> {
        match per_level.len() {
            0 => Err(invalid("at least one level weight is required")),
            1 => Ok(per_level[0]),
            len if len == levels => Ok(per_level[l]),
            len => Err(mismatch(format!("1 or {levels} level weights"), len)),
        }
    };
    let mut out = Vec::with_capacity(planes);
    for l in 0..levels {
        let w = weight(l)?;
        out.extend(std::iter::repeat_n(w, per));
    }
    out.push(if kind == FrameletKind::Identity {
        weight(0)?
    } else {
        0.0
    });
    Ok(out)
}

/// Analysis/synthesis pair for a fixed bank, level count and image size.
#[derive(Debug, Clone)]
pub struct Framelet {
    bank: FilterBank,
    levels: usize,
    width: usize,
    height: usize,
    boundary: Boundary,
    /// `[level][filter]` operators along rows and along columns.
    row_ops: Vec<Vec<LineOperator>>,
    col_ops: Vec<Vec<LineOperator>>,
}

impl Framelet {
    pub fn new(
        bank: FilterBank,
        levels: usize,
        width: usize,
        height: usize,
        boundary: Boundary,
    ) -> Result<Self> {
        if levels == 0 {
            return Err(invalid("decomposition needs at least one level"));
        }
        if width == 0 || height == 0 {
            return Err(invalid("image must be nonempty"));
        }
        if levels > 30 {
            return Err(invalid(format!("{levels} levels is too many")));
        }
        let extent = width.min(height);
        let support = bank
            .filters
            .iter()
            .map(Filter1d::support)
            .max()
            .unwrap_or(1);
        let dilated = (1usize << (levels - 1)) * (support - 1) + 1;
        if dilated > 2 * extent {
            return Err(invalid(format!(
                "{levels} levels dilate the {}-tap filters to {dilated} taps, more than twice the image extent {extent}",
                support
            )));
        }
        let boundary = bank.effective_boundary(boundary);
        let build = |len: usize, level: usize| -> Vec<LineOperator> {
            let dilation = 1isize << level;
            bank.filters
                .iter()
                .map(|f| LineOperator::correlation(len, &f.taps, &f.offsets(dilation), boundary))
                .collect()
        };
        let row_ops = (0..levels).map(|l| build(width, l)).collect();
        let col_ops = (0..levels).map(|l| build(height, l)).collect();
        Ok(Self {
            bank,
            levels,
            width,
            height,
            boundary,
            row_ops,
            col_ops,
        })
    }

    pub fn for_image(
        kind: FrameletKind,
        levels: usize,
        image: &Image,
        boundary: Boundary,
    ) -> Result<Self> {
        Self::new(
            FilterBank::new(kind)?,
            levels,
            image.width(),
            image.height(),
            boundary,
        )
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn zero_coefficients(&self) -> FrameCoefficients {
        FrameCoefficients::zeros(&self.bank, self.levels, self.width, self.height)
    }

    /// Plane weights from per-level weights (see [`FrameCoefficients::set_level_lambda`]).
    pub fn plane_weights(&self, per_level: &[f64]) -> Result<Vec<f64>> {
        level_weights_to_planes(
            self.bank.kind(),
            self.levels,
            self.bank.filter_count(),
            per_level,
        )
    }

    /// `alpha = W u` into an existing stack (weights untouched).
    pub fn decompose_into(&self, u: &[f64], out: &mut FrameCoefficients) {
        let n = self.width * self.height;
        assert_eq!(u.len(), n, "image size does not match the transform");
        assert!(
            out.data.len() == (self.bank.detail_bands() * self.levels + 1) * n,
            "coefficient stack does not match the transform"
        );
        let k = self.bank.filter_count();
        let mut current = u.to_vec();
        let mut rows: Vec<Vec<f64>> = vec![vec![0.0; n]; k];
        let mut lowpass = vec![0.0; n];
        for level in 0..self.levels {
            for (j, r) in rows.iter_mut().enumerate() {
                self.row_ops[level][j].along_rows(&current, r, Direction::Forward);
            }
            let mut plane = level * self.bank.detail_bands();
            for (jr, r) in rows.iter().enumerate() {
                for jc in 0..k {
                    let op = &self.col_ops[level][jc];
                    if jr == 0 && jc == 0 {
                        op.along_cols(r, &mut lowpass, self.width, Direction::Forward);
                    } else {
                        op.along_cols(r, out.plane_mut(plane), self.width, Direction::Forward);
                        plane += 1;
                    }
                }
            }
            std::mem::swap(&mut current, &mut lowpass);
        }
        let last = out.num_planes() - 1;
        out.plane_mut(last).copy_from_slice(&current);
    }

    pub fn decompose(&self, u: &[f64]) -> FrameCoefficients {
        let mut out = self.zero_coefficients();
        self.decompose_into(u, &mut out);
        out
    }

    /// `W^T alpha`.
    pub fn reconstruct(&self, coeffs: &FrameCoefficients) -> Result<Vec<f64>> {
        let n = self.width * self.height;
        if coeffs.kind() != self.bank.kind()
            || coeffs.levels() != self.levels
            || coeffs.width() != self.width
            || coeffs.height() != self.height
        {
            return Err(mismatch(
                format!(
                    "{} L={} {}x{}",
                    self.bank.kind().name(),
                    self.levels,
                    self.width,
                    self.height
                ),
                format!(
                    "{} L={} {}x{}",
                    coeffs.kind().name(),
                    coeffs.levels(),
                    coeffs.width(),
                    coeffs.height()
                ),
            ));
        }
        let k = self.bank.filter_count();
        let mut v = coeffs.plane(coeffs.num_planes() - 1).to_vec();
        let mut acc = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let mut next = vec![0.0; n];
        for level in (0..self.levels).rev() {
            next.fill(0.0);
            let mut plane = level * self.bank.detail_bands();
            for jr in 0..k {
                acc.fill(0.0);
                for jc in 0..k {
                    let src: &[f64] = if jr == 0 && jc == 0 {
                        &v
                    } else {
                        let s = coeffs.plane(plane);
                        plane += 1;
                        s
                    };
                    self.col_ops[level][jc].along_cols(
                        src,
                        &mut tmp,
                        self.width,
                        Direction::Adjoint,
                    );
                    crate::linalg::axpy(1.0, &tmp, &mut acc);
                }
                self.row_ops[level][jr].along_rows(&acc, &mut tmp, Direction::Adjoint);
                crate::linalg::axpy(1.0, &tmp, &mut next);
            }
            std::mem::swap(&mut v, &mut next);
        }
        Ok(v)
    }
}

/// Convenience wrapper: symmetric boundary, fresh transform.
pub fn decompose(u: &Image, bank: &FilterBank, levels: usize) -> Result<FrameCoefficients> {
    let t = Framelet::new(
        bank.clone(),
        levels,
        u.width(),
        u.height(),
        Boundary::Symmetric,
    )?;
    Ok(t.decompose(u.pixels()))
}

pub fn reconstruct(coeffs: &FrameCoefficients, bank: &FilterBank) -> Result<Image> {
    if coeffs.kind() != bank.kind() {
        return Err(mismatch(bank.kind().name(), coeffs.kind().name()));
    }
    let t = Framelet::new(
        bank.clone(),
        coeffs.levels(),
        coeffs.width(),
        coeffs.height(),
        Boundary::Symmetric,
    )?;
    Image::new(coeffs.width(), coeffs.height(), t.reconstruct(coeffs)?)
}

/// `a x + y`, keeping the weights of `y`.
pub fn coeff_axpy(
    a: f64,
    x: &FrameCoefficients,
    y: &FrameCoefficients,
) -> Result<FrameCoefficients> {
    if !x.congruent(y) {
        return Err(mismatch(
            format!("{} planes", y.num_planes()),
            format!("{} planes", x.num_planes()),
        ));
    }
    let mut out = y.clone();
    crate::linalg::axpy(a, &x.data, &mut out.data);
    Ok(out)
}
