use crate::error::{Error, Result};

use super::ImageGray;

/// A square patch vectorised row-major. Values are unconstrained reals
/// (mean-removed patches go negative).
#[derive(Debug, Clone, PartialEq)]
pub struct PatchVec {
    side: usize,
    values: Vec<f64>,
}

impl PatchVec {
    pub fn new(side: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != side * side {
            return Err(Error::Dimension(format!(
                "patch of side {side} needs {} values, got {}",
                side * side,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("patch contains a non-finite value".into()));
        }
        Ok(Self { side, values })
    }

    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            values: vec![0.0; side * side],
        }
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.side + col]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Returns a copy with `offset` added to every value.
    pub fn offset(&self, offset: f64) -> Self {
        Self {
            side: self.side,
            values: self.values.iter().map(|v| v + offset).collect(),
        }
    }
}

/// Upper-left corner of a patch inside its source image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatchPosition {
    pub row: usize,
    pub col: usize,
}

impl PatchPosition {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Start offsets along one axis: `0, stride, 2*stride, ...` with a final
/// entry clamped to `len - side` so the whole axis is covered.
fn axis_starts(len: usize, side: usize, stride: usize) -> Vec<usize> {
    let last = len - side;
    let mut starts: Vec<usize> = (0..=last).step_by(stride).collect();
    if *starts.last().unwrap() != last {
        starts.push(last);
    }
    starts
}

/// Raster-order patch positions for an image of the given size.
pub fn patch_grid(height: usize, width: usize, side: usize, stride: usize) -> Result<Vec<PatchPosition>> {
    if side == 0 || side > height.min(width) {
        return Err(Error::Dimension(format!(
            "patch side {side} does not fit a {height}x{width} image"
        )));
    }
    if stride == 0 || stride > side {
        return Err(Error::Parameter(format!(
            "patch stride must lie in 1..={side} for full coverage, got {stride}"
        )));
    }
    let rows = axis_starts(height, side, stride);
    let cols = axis_starts(width, side, stride);
    Ok(rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| PatchPosition::new(r, c)))
        .collect())
}

/// Extracts overlapping patches in raster order. The last row and column of
/// positions are pulled inward so every pixel is covered.
pub fn extract_patches(image: &ImageGray, side: usize, stride: usize) -> Result<Vec<(PatchPosition, PatchVec)>> {
    patch_grid(image.height(), image.width(), side, stride)?
        .into_iter()
        .map(|pos| Ok((pos, image.window(pos.row, pos.col, side)?)))
        .collect()
}

/// Averages overlapping patches into an image. Every output pixel must be
/// covered by at least one patch.
pub fn assemble_patches(patches: &[(PatchPosition, PatchVec)], out_height: usize, out_width: usize) -> Result<ImageGray> {
    let mut sum = vec![0.0; out_height * out_width];
    let mut count = vec![0u32; out_height * out_width];
    accumulate(patches, out_height, out_width, usize::MAX, &mut sum, &mut count, None)?;
    finish(&sum, &count, None, out_height, out_width)
}

/// Like [`assemble_patches`], but each pixel averages only the patches that
/// cover it from their upper-left `footprint`x`footprint` block when there
/// are any. Pixels no footprint reaches fall back to all covering patches.
///
/// Used for HR patches decoded from top-left decimated observations, whose
/// rows and columns past the last sample are extrapolated.
pub fn assemble_patches_footprint(
    patches: &[(PatchPosition, PatchVec)],
    footprint: usize,
    out_height: usize,
    out_width: usize,
) -> Result<ImageGray> {
    let n = out_height * out_width;
    let (mut sum, mut count) = (vec![0.0; n], vec![0u32; n]);
    let (mut inner_sum, mut inner_count) = (vec![0.0; n], vec![0u32; n]);
    accumulate(
        patches,
        out_height,
        out_width,
        footprint,
        &mut sum,
        &mut count,
        Some((&mut inner_sum, &mut inner_count)),
    )?;
    finish(&sum, &count, Some((&inner_sum, &inner_count)), out_height, out_width)
}

fn accumulate(
    patches: &[(PatchPosition, PatchVec)],
    out_height: usize,
    out_width: usize,
    footprint: usize,
    sum: &mut [f64],
    count: &mut [u32],
    mut inner: Option<(&mut [f64], &mut [u32])>,
) -> Result<()> {
    for (pos, patch) in patches {
        let side = patch.side();
        if pos.row + side > out_height || pos.col + side > out_width {
            return Err(Error::Dimension(format!(
                "patch of side {side} at ({}, {}) exceeds {out_height}x{out_width} frame",
                pos.row, pos.col
            )));
        }
        for r in 0..side {
            let base = (pos.row + r) * out_width + pos.col;
            for c in 0..side {
                let v = patch.get(r, c);
                sum[base + c] += v;
                count[base + c] += 1;
                if let Some((s, n)) = inner.as_mut() {
                    if r < footprint && c < footprint {
                        s[base + c] += v;
                        n[base + c] += 1;
                    }
                }
            }
        }
    }
    Ok(())
}

fn finish(
    sum: &[f64],
    count: &[u32],
    inner: Option<(&[f64], &[u32])>,
    out_height: usize,
    out_width: usize,
) -> Result<ImageGray> {
    if let Some(idx) = count.iter().position(|&n| n == 0) {
        return Err(Error::Coverage {
            row: idx / out_width,
            col: idx % out_width,
        });
    }
    let data = (0..sum.len())
        .map(|i| match inner {
            Some((s, n)) if n[i] > 0 => s[i] / n[i] as f64,
            _ => sum[i] / count[i] as f64,
        })
        .collect();
    ImageGray::new(out_height, out_width, data)
}
