use crate::error::{Error, Result};

use super::ImageGray;

const CUBIC_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5` (Catmull-Rom).
pub fn cubic_weight(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// How output pixel indices map back onto the input grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleAnchor {
    /// Pixel centres are aligned: `src = (dst + 0.5) / s - 0.5`.
    Centered,
    /// Upper-left samples are aligned: `src = dst / s`. Matches a decimator
    /// that keeps the first sample of every block.
    TopLeft,
}

/// Bicubic resize with centre-aligned sampling and edge replication.
pub fn bicubic_resize(image: &ImageGray, factor: f64) -> Result<ImageGray> {
    bicubic_resize_anchored(image, factor, SampleAnchor::Centered)
}

/// Bicubic resize with an explicit grid anchor.
pub fn bicubic_resize_anchored(image: &ImageGray, factor: f64, anchor: SampleAnchor) -> Result<ImageGray> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::Parameter(format!("resize factor must be positive, got {factor}")));
    }
    let out_h = (factor * image.height() as f64).round() as usize;
    let out_w = (factor * image.width() as f64).round() as usize;
    if out_h == 0 || out_w == 0 {
        return Err(Error::Dimension("resize produces an empty image".into()));
    }
    let cols = axis_taps(image.width(), out_w, anchor);
    let rows = axis_taps(image.height(), out_h, anchor);

    // horizontal pass
    let mut tmp = vec![0.0; image.height() * out_w];
    for r in 0..image.height() {
        for (c, taps) in cols.iter().enumerate() {
            tmp[r * out_w + c] = taps.iter().map(|&(i, w)| w * image.get(r, i)).sum();
        }
    }
    // vertical pass
    let mut out = vec![0.0; out_h * out_w];
    for (r, taps) in rows.iter().enumerate() {
        for c in 0..out_w {
            out[r * out_w + c] = taps.iter().map(|&(i, w)| w * tmp[i * out_w + c]).sum();
        }
    }
    ImageGray::new(out_h, out_w, out)
}

/// Four (index, weight) taps per output sample, indices clamped to the axis.
fn axis_taps(in_len: usize, out_len: usize, anchor: SampleAnchor) -> Vec<[(usize, f64); 4]> {
    let scale = out_len as f64 / in_len as f64;
    (0..out_len)
        .map(|dst| {
            let src = match anchor {
                SampleAnchor::Centered => (dst as f64 + 0.5) / scale - 0.5,
                SampleAnchor::TopLeft => dst as f64 / scale,
            };
            let base = src.floor();
            let frac = src - base;
            let mut taps = [(0usize, 0.0); 4];
            for (k, tap) in taps.iter_mut().enumerate() {
                let offset = k as f64 - 1.0;
                let idx = (base as isize + k as isize - 1).clamp(0, in_len as isize - 1) as usize;
                *tap = (idx, cubic_weight(frac - offset));
            }
            taps
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_partition_of_unity() {
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let s: f64 = (-1..=2).map(|k| cubic_weight(t - k as f64)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(cubic_weight(0.0), 1.0);
        assert!(cubic_weight(1.0).abs() < 1e-15);
        assert!(cubic_weight(2.5).abs() < 1e-15);
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = ImageGray::filled(5, 7, 0.37).unwrap();
        let out = bicubic_resize(&img, 3.0).unwrap();
        assert_eq!((out.height(), out.width()), (15, 21));
        assert!(out.data().iter().all(|v| (v - 0.37).abs() < 1e-12));
    }

    #[test]
    fn unit_factor_is_identity() {
        let img = ImageGray::from_fn(6, 9, |r, c| ((r * 31 + c * 17) % 23) as f64 / 23.0).unwrap();
        for anchor in [SampleAnchor::Centered, SampleAnchor::TopLeft] {
            let out = bicubic_resize_anchored(&img, 1.0, anchor).unwrap();
            for (a, b) in out.data().iter().zip(img.data()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn linear_ramp_is_reproduced_in_interior() {
        let (h, w) = (10, 12);
        let ramp = |r: f64, c: f64| 0.1 + 0.03 * r + 0.02 * c;
        let img = ImageGray::from_fn(h, w, |r, c| ramp(r as f64, c as f64)).unwrap();
        let k = 3.0;
        let out = bicubic_resize(&img, k).unwrap();
        // stay two input pixels away from the border, i.e. 2k output pixels
        let border = 2 * k as usize;
        for r in border..out.height() - border {
            for c in border..out.width() - border {
                // direct evaluation of the ramp at the mapped source position
                let sr = (r as f64 + 0.5) / k - 0.5;
                let sc = (c as f64 + 0.5) / k - 0.5;
                assert!((out.get(r, c) - ramp(sr, sc)).abs() <= 1e-6, "({r}, {c})");
            }
        }
    }

    #[test]
    fn top_left_anchor_keeps_input_samples() {
        let img = ImageGray::from_fn(6, 6, |r, c| ((r * 7 + c * 5) % 11) as f64 / 11.0).unwrap();
        let out = bicubic_resize_anchored(&img, 3.0, SampleAnchor::TopLeft).unwrap();
        for r in 0..6 {
            for c in 0..6 {
                assert!((out.get(3 * r, 3 * c) - img.get(r, c)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_bad_factor() {
        let img = ImageGray::filled(3, 3, 0.5).unwrap();
        assert!(bicubic_resize(&img, 0.0).is_err());
        assert!(bicubic_resize(&img, -2.0).is_err());
        assert!(bicubic_resize(&img, f64::NAN).is_err());
    }
}
