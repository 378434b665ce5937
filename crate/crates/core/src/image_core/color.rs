//! Full-range ITU-R BT.601 YCbCr on the `[0, 1]` scale (chroma centred at 0.5).

use crate::error::{Error, Result};

use super::ImageGray;

/// An RGB image as three planes of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub r: ImageGray,
    pub g: ImageGray,
    pub b: ImageGray,
}

impl RgbImage {
    pub fn new(r: ImageGray, g: ImageGray, b: ImageGray) -> Result<Self> {
        let dims = |i: &ImageGray| (i.height(), i.width());
        if dims(&r) != dims(&g) || dims(&r) != dims(&b) {
            return Err(Error::Dimension("RGB planes differ in size".into()));
        }
        Ok(Self { r, g, b })
    }

    pub fn height(&self) -> usize {
        self.r.height()
    }

    pub fn width(&self) -> usize {
        self.r.width()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YCbCr {
    pub y: ImageGray,
    pub cb: ImageGray,
    pub cr: ImageGray,
}

pub fn rgb_to_ycbcr(rgb: &RgbImage) -> YCbCr {
    let (h, w) = (rgb.height(), rgb.width());
    let mut y = Vec::with_capacity(h * w);
    let mut cb = Vec::with_capacity(h * w);
    let mut cr = Vec::with_capacity(h * w);
    for ((&r, &g), &b) in rgb.r.data().iter().zip(rgb.g.data()).zip(rgb.b.data()) {
        y.push(0.299 * r + 0.587 * g + 0.114 * b);
        cb.push(0.5 - 0.168_735_892 * r - 0.331_264_108 * g + 0.5 * b);
        cr.push(0.5 + 0.5 * r - 0.418_687_589 * g - 0.081_312_411 * b);
    }
    // planes are built from validated input, so sizes always agree
    YCbCr {
        y: ImageGray::new(h, w, y).expect("luma plane"),
        cb: ImageGray::new(h, w, cb).expect("cb plane"),
        cr: ImageGray::new(h, w, cr).expect("cr plane"),
    }
}

pub fn ycbcr_to_rgb(ycc: &YCbCr) -> Result<RgbImage> {
    let (h, w) = (ycc.y.height(), ycc.y.width());
    if (ycc.cb.height(), ycc.cb.width()) != (h, w) || (ycc.cr.height(), ycc.cr.width()) != (h, w) {
        return Err(Error::Dimension("YCbCr planes differ in size".into()));
    }
    let mut r = Vec::with_capacity(h * w);
    let mut g = Vec::with_capacity(h * w);
    let mut b = Vec::with_capacity(h * w);
    for ((&y, &cb), &cr) in ycc.y.data().iter().zip(ycc.cb.data()).zip(ycc.cr.data()) {
        let (cb, cr) = (cb - 0.5, cr - 0.5);
        r.push(y + 1.402 * cr);
        g.push(y - 0.344_136_286 * cb - 0.714_136_286 * cr);
        b.push(y + 1.772 * cb);
    }
    RgbImage::new(ImageGray::new(h, w, r)?, ImageGray::new(h, w, g)?, ImageGray::new(h, w, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn plane(h: usize, w: usize, f: impl FnMut(usize, usize) -> f64) -> ImageGray {
        ImageGray::from_fn(h, w, f).unwrap()
    }

    #[test]
    fn gray_axis_has_neutral_chroma() {
        for v in [0u8, 17, 128, 200, 255] {
            let x = v as f64 / 255.0;
            let rgb = RgbImage::new(plane(2, 2, |_, _| x), plane(2, 2, |_, _| x), plane(2, 2, |_, _| x)).unwrap();
            let ycc = rgb_to_ycbcr(&rgb);
            assert!(ycc.y.data().iter().all(|y| (y - x).abs() < 1e-12));
            assert!(ycc.cb.data().iter().all(|c| (c - 0.5).abs() < 1e-12));
            assert!(ycc.cr.data().iter().all(|c| (c - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn black_maps_to_zero_luma() {
        let z = plane(3, 4, |_, _| 0.0);
        let ycc = rgb_to_ycbcr(&RgbImage::new(z.clone(), z.clone(), z).unwrap());
        assert!(ycc.y.data().iter().all(|&y| y == 0.0));
    }

    #[test]
    fn round_trip_within_one_level() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut q = || rng.gen_range(0..=255u8) as f64 / 255.0;
        let (h, w) = (8, 9);
        let r: Vec<f64> = (0..h * w).map(|_| q()).collect();
        let g: Vec<f64> = (0..h * w).map(|_| q()).collect();
        let b: Vec<f64> = (0..h * w).map(|_| q()).collect();
        let rgb = RgbImage::new(
            ImageGray::new(h, w, r).unwrap(),
            ImageGray::new(h, w, g).unwrap(),
            ImageGray::new(h, w, b).unwrap(),
        )
        .unwrap();
        let back = ycbcr_to_rgb(&rgb_to_ycbcr(&rgb)).unwrap();
        for (src, dst) in [(&rgb.r, &back.r), (&rgb.g, &back.g), (&rgb.b, &back.b)] {
            for (a, b) in src.data().iter().zip(dst.data()) {
                assert!((a - b).abs() <= 1.0 / 255.0);
            }
        }
    }
}
