//! Procedural test images.
//!
//! Dead-leaves scenes: opaque discs and rectangles with a power-law size
//! distribution, each carrying a gentle intensity ramp, stacked until the
//! frame is covered, then softened with a small Gaussian so edges are not
//! pixel-sharp. Their edge and texture statistics are close enough to
//! photographs for dictionary training and end-to-end checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::degradation::{convolve, gaussian_kernel, Padding};
use crate::error::{Error, Result};
use crate::image_core::ImageGray;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadLeavesOptions {
    pub min_radius: f64,
    pub max_radius: f64,
    /// Standard deviation of the final softening blur, 0 to skip it.
    pub soften_sigma: f64,
}

impl Default for DeadLeavesOptions {
    fn default() -> Self {
        Self { min_radius: 4.0, max_radius: 60.0, soften_sigma: 0.8 }
    }
}

struct Leaf {
    cy: f64,
    cx: f64,
    radius: f64,
    rect: bool,
    aspect: f64,
    level: f64,
    gy: f64,
    gx: f64,
}

impl Leaf {
    fn covers(&self, y: f64, x: f64) -> bool {
        let dy = y - self.cy;
        let dx = x - self.cx;
        if self.rect {
            dy.abs() <= self.radius * self.aspect && dx.abs() <= self.radius / self.aspect
        } else {
            dy * dy + dx * dx <= self.radius * self.radius
        }
    }

    fn value(&self, y: f64, x: f64) -> f64 {
        self.level + self.gy * (y - self.cy) + self.gx * (x - self.cx)
    }
}

/// A seeded dead-leaves image.
pub fn dead_leaves(height: usize, width: usize, seed: u64, opts: &DeadLeavesOptions) -> Result<ImageGray> {
    if height == 0 || width == 0 {
        return Err(Error::Dimension("image must be non-empty".into()));
    }
    if !(opts.min_radius > 0.0 && opts.max_radius >= opts.min_radius) {
        return Err(Error::Parameter("radii must satisfy 0 < min <= max".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (opts.min_radius.powi(-2), opts.max_radius.powi(-2));
    let mut leaves: Vec<Leaf> = Vec::new();
    // front-to-back: a pixel takes the first leaf that covers it
    let mut owner: Vec<Option<usize>> = vec![None; height * width];
    let mut uncovered = height * width;
    let margin = opts.max_radius;
    while uncovered > 0 && leaves.len() < 200_000 {
        let u: f64 = rng.gen();
        let radius = (lo - u * (lo - hi)).powf(-0.5);
        let leaf = Leaf {
            cy: rng.gen_range(-margin..height as f64 + margin),
            cx: rng.gen_range(-margin..width as f64 + margin),
            radius,
            rect: rng.gen_bool(0.3),
            aspect: rng.gen_range(0.5f64..2.0).sqrt(),
            level: rng.gen_range(0.08..0.92),
            gy: rng.gen_range(-0.15..0.15) / radius.max(4.0),
            gx: rng.gen_range(-0.15..0.15) / radius.max(4.0),
        };
        let id = leaves.len();
        let r0 = (leaf.cy - radius * 1.5).floor().max(0.0) as usize;
        let r1 = ((leaf.cy + radius * 1.5).ceil().max(0.0) as usize).min(height);
        let c0 = (leaf.cx - radius * 1.5).floor().max(0.0) as usize;
        let c1 = ((leaf.cx + radius * 1.5).ceil().max(0.0) as usize).min(width);
        for r in r0..r1 {
            for c in c0..c1 {
                let slot = &mut owner[r * width + c];
                if slot.is_none() && leaf.covers(r as f64, c as f64) {
                    *slot = Some(id);
                    uncovered -= 1;
                }
            }
        }
        leaves.push(leaf);
    }
    let data = owner
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let (r, c) = ((i / width) as f64, (i % width) as f64);
            o.map_or(0.5, |id| leaves[id].value(r, c))
        })
        .collect();
    let img = ImageGray::new(height, width, data)?;
    if opts.soften_sigma > 0.0 {
        let side = (2.0 * (3.0 * opts.soften_sigma).ceil() + 1.0) as usize;
        let m = height.min(width);
        let side = side.min(if m % 2 == 1 { m } else { m - 1 });
        convolve(&img, &gaussian_kernel(side, opts.soften_sigma)?, Padding::Reflect)
    } else {
        Ok(img)
    }
}
