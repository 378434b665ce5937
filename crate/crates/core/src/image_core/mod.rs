//! Grayscale image container, patch extraction/assembly, bicubic resampling,
//! PSNR, BT.601 colour conversion and 8-bit file I/O.

mod color;
pub mod io;
mod patches;
mod resize;

pub use color::{rgb_to_ycbcr, ycbcr_to_rgb, RgbImage, YCbCr};
pub use patches::{assemble_patches, assemble_patches_footprint, extract_patches, patch_grid, PatchPosition, PatchVec};
pub use resize::{bicubic_resize, bicubic_resize_anchored, cubic_weight, SampleAnchor};

use crate::error::{Error, Result};

/// A single-channel image with intensities in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGray {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageGray {
    /// Builds an image, clamping every value to `[0, 1]`.
    pub fn new(height: usize, width: usize, mut data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "image must be non-empty, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::Dimension(format!(
                "expected {} values for a {height}x{width} image, got {}",
                height * width,
                data.len()
            )));
        }
        for v in data.iter_mut() {
            if !v.is_finite() {
                return Err(Error::Numeric("image contains a non-finite value".into()));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Pixel lookup with coordinates clamped to the frame (edge replication).
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c)
    }

    /// Copies the `side`x`side` window whose upper-left pixel is `(row, col)`.
    pub fn window(&self, row: usize, col: usize, side: usize) -> Result<PatchVec> {
        if row + side > self.height || col + side > self.width {
            return Err(Error::Dimension(format!(
                "{side}x{side} window at ({row}, {col}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        let mut values = Vec::with_capacity(side * side);
        for r in row..row + side {
            values.extend_from_slice(&self.data[r * self.width + col..r * self.width + col + side]);
        }
        PatchVec::new(side, values)
    }

    /// Returns the sub-image `[row, row+height) x [col, col+width)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::Dimension(format!(
                "crop {height}x{width} at ({row}, {col}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        Self::from_fn(height, width, |r, c| self.get(row + r, col + c))
    }
}

/// Peak signal-to-noise ratio in dB on the 8-bit intensity scale.
///
/// Both images are rescaled to `[0, 255]` before the mean squared error is
/// taken. Identical images yield `f64::INFINITY`.
pub fn psnr(reference: &ImageGray, estimate: &ImageGray) -> Result<f64> {
    if reference.height != estimate.height || reference.width != estimate.width {
        return Err(Error::Dimension(format!(
            "psnr needs equal sizes, got {}x{} and {}x{}",
            reference.height, reference.width, estimate.height, estimate.width
        )));
    }
    let sum: f64 = reference
        .data
        .iter()
        .zip(&estimate.data)
        .map(|(a, b)| {
            let d = 255.0 * (a - b);
            d * d
        })
        .sum();
    let mse = sum / reference.data.len() as f64;
    Ok(psnr_from_mse(mse))
}

/// `10 log10(255^2 / mse)` with `mse` on the 8-bit scale.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn construction_clamps_and_validates() {
        let img = ImageGray::new(1, 3, vec![-0.5, 0.5, 1.5]).unwrap();
        assert_eq!(img.data(), &[0.0, 0.5, 1.0]);
        assert!(matches!(ImageGray::new(2, 2, vec![0.0; 3]), Err(Error::Dimension(_))));
        assert!(matches!(
            ImageGray::new(1, 1, vec![f64::NAN]),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = ImageGray::from_fn(4, 5, |r, c| (r * 5 + c) as f64 / 20.0).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_full_scale_difference_is_zero_db() {
        let a = ImageGray::filled(3, 3, 0.0).unwrap();
        let b = ImageGray::filled(3, 3, 1.0).unwrap();
        assert_abs_diff_eq!(psnr(&a, &b).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psnr_unit_mse() {
        // one 8-bit step everywhere gives MSE = 1
        let a = ImageGray::filled(4, 4, 100.0 / 255.0).unwrap();
        let b = ImageGray::filled(4, 4, 101.0 / 255.0).unwrap();
        let expected = 10.0 * 65025f64.log10();
        assert_abs_diff_eq!(psnr(&a, &b).unwrap(), expected, epsilon = 1e-9);
        assert_abs_diff_eq!(psnr(&a, &b).unwrap(), 48.13, epsilon = 0.01);
    }

    #[test]
    fn psnr_rejects_mismatched_sizes() {
        let a = ImageGray::filled(3, 3, 0.0).unwrap();
        let b = ImageGray::filled(3, 4, 0.0).unwrap();
        assert!(matches!(psnr(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn psnr_is_symmetric_and_decreasing_in_mse() {
        let a = ImageGray::from_fn(6, 6, |r, c| ((r * 7 + c * 3) % 11) as f64 / 11.0).unwrap();
        let b = ImageGray::from_fn(6, 6, |r, c| ((r * 5 + c) % 13) as f64 / 13.0).unwrap();
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        let mut last = f64::INFINITY;
        for mse in [0.5, 1.0, 2.0, 10.0, 100.0] {
            let p = psnr_from_mse(mse);
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn window_and_crop_bounds() {
        let img = ImageGray::from_fn(5, 6, |r, c| (r * 6 + c) as f64 / 30.0).unwrap();
        let w = img.window(1, 2, 3).unwrap();
        assert_abs_diff_eq!(w.values()[0], img.get(1, 2));
        assert_abs_diff_eq!(w.values()[8], img.get(3, 4));
        assert!(img.window(3, 0, 3).is_err());
        assert!(img.crop(0, 0, 5, 7).is_err());
        assert_eq!(img.crop(1, 1, 2, 3).unwrap().width(), 3);
    }
}
