//! Run configuration: plain `key=value` text, one entry per line.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Bicubic,
    /// Target-only sparse coding.
    Sf,
    /// One shift-weight step and one coding step.
    Mfsc,
    Proposed,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Bicubic, Method::Sf, Method::Mfsc, Method::Proposed];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bicubic => "bicubic",
            Method::Sf => "sf",
            Method::Mfsc => "mfsc",
            Method::Proposed => "proposed",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown method {s:?}")))
    }
}

/// How decoded HR patches are merged into the output image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assembly {
    /// Plain mean of every covering patch.
    Uniform,
    /// Mean over patches whose sampled block covers the pixel, see
    /// [`crate::image_core::assemble_patches_footprint`].
    Footprint,
}

impl Assembly {
    pub fn name(self) -> &'static str {
        match self {
            Assembly::Uniform => "uniform",
            Assembly::Footprint => "footprint",
        }
    }
}

impl fmt::Display for Assembly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Assembly {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Assembly::Uniform, Assembly::Footprint]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown assembly {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k: usize,
    pub n_frames: usize,
    pub patch_side: usize,
    pub stride: usize,
    pub eta: f64,
    /// Alternation rounds.
    pub rounds: usize,
    /// Dictionary size.
    pub atoms: usize,
    pub blur_side: usize,
    pub blur_sigma: f64,
    /// In 8-bit intensity units.
    pub noise_sigma: f64,
    pub seed: u64,
    pub search_radius: usize,
    pub method: Method,
    /// Synthetic shifts are drawn from the integers in `[-shift_range, shift_range]`.
    pub shift_range: i64,
    /// Move integer matches so the residual shift is representable.
    pub anchor: bool,
    pub assembly: Assembly,
    pub train_eta: f64,
    pub train_iters: usize,
    pub train_patches: usize,
    pub lasso_tol: f64,
    pub lasso_max_iter: usize,
    /// Worker threads, 0 for one per core.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 3,
            n_frames: 5,
            patch_side: 5,
            stride: 2,
            eta: 0.02,
            rounds: 3,
            atoms: 256,
            blur_side: 9,
            blur_sigma: 1.0,
            noise_sigma: 1.0,
            seed: 0,
            search_radius: 3,
            method: Method::Proposed,
            shift_range: 5,
            anchor: true,
            assembly: Assembly::Footprint,
            train_eta: 0.1,
            train_iters: 20,
            train_patches: 8000,
            lasso_tol: 1e-6,
            lasso_max_iter: 1000,
            threads: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parameter(format!("bad value {value:?} for {key}")))
}

impl RunConfig {
    pub const KEYS: [&'static str; 22] = [
        "k",
        "n_frames",
        "patch_side",
        "stride",
        "eta",
        "rounds",
        "atoms",
        "blur_side",
        "blur_sigma",
        "noise_sigma",
        "seed",
        "search_radius",
        "method",
        "shift_range",
        "anchor",
        "assembly",
        "train_eta",
        "train_iters",
        "train_patches",
        "lasso_tol",
        "lasso_max_iter",
        "threads",
    ];

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "k" => self.k = parse(key, value)?,
            "n_frames" => self.n_frames = parse(key, value)?,
            "patch_side" => self.patch_side = parse(key, value)?,
            "stride" => self.stride = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "rounds" => self.rounds = parse(key, value)?,
            "atoms" => self.atoms = parse(key, value)?,
            "blur_side" => self.blur_side = parse(key, value)?,
            "blur_sigma" => self.blur_sigma = parse(key, value)?,
            "noise_sigma" => self.noise_sigma = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "search_radius" => self.search_radius = parse(key, value)?,
            "method" => self.method = value.trim().parse()?,
            "shift_range" => self.shift_range = parse(key, value)?,
            "anchor" => self.anchor = parse(key, value)?,
            "assembly" => self.assembly = value.trim().parse()?,
            "train_eta" => self.train_eta = parse(key, value)?,
            "train_iters" => self.train_iters = parse(key, value)?,
            "train_patches" => self.train_patches = parse(key, value)?,
            "lasso_tol" => self.lasso_tol = parse(key, value)?,
            "lasso_max_iter" => self.lasso_max_iter = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            _ => return Err(Error::Parameter(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` text on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("expected key=value, got {line:?}")))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = text.parse()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Parameter(m));
        if self.k < 2 {
            return fail(format!("k must be >= 2, got {}", self.k));
        }
        if self.n_frames < 1 {
            return fail("n_frames must be >= 1".into());
        }
        if self.patch_side < 2 {
            return fail("patch_side must be >= 2".into());
        }
        if self.stride < 1 || self.stride > self.patch_side {
            return fail(format!("stride must be in 1..={}, got {}", self.patch_side, self.stride));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) || !(self.train_eta > 0.0 && self.train_eta.is_finite()) {
            return fail("eta and train_eta must be positive".into());
        }
        if self.rounds < 1 {
            return fail("rounds must be >= 1".into());
        }
        if self.atoms < 1 {
            return fail("atoms must be >= 1".into());
        }
        if self.blur_side % 2 == 0 {
            return fail(format!("blur_side must be odd, got {}", self.blur_side));
        }
        if !(self.blur_sigma > 0.0) || !(self.noise_sigma >= 0.0) {
            return fail("blur_sigma must be positive and noise_sigma non-negative".into());
        }
        if self.shift_range < 0 {
            return fail("shift_range must be non-negative".into());
        }
        if !(self.lasso_tol > 0.0) || self.lasso_max_iter == 0 {
            return fail("lasso_tol and lasso_max_iter must be positive".into());
        }
        Ok(())
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "k" => self.k.to_string(),
            "n_frames" => self.n_frames.to_string(),
            "patch_side" => self.patch_side.to_string(),
            "stride" => self.stride.to_string(),
            "eta" => self.eta.to_string(),
            "rounds" => self.rounds.to_string(),
            "atoms" => self.atoms.to_string(),
            "blur_side" => self.blur_side.to_string(),
            "blur_sigma" => self.blur_sigma.to_string(),
            "noise_sigma" => self.noise_sigma.to_string(),
            "seed" => self.seed.to_string(),
            "search_radius" => self.search_radius.to_string(),
            "method" => self.method.to_string(),
            "shift_range" => self.shift_range.to_string(),
            "anchor" => self.anchor.to_string(),
            "assembly" => self.assembly.to_string(),
            "train_eta" => self.train_eta.to_string(),
            "train_iters" => self.train_iters.to_string(),
            "train_patches" => self.train_patches.to_string(),
            "lasso_tol" => self.lasso_tol.to_string(),
            "lasso_max_iter" => self.lasso_max_iter.to_string(),
            "threads" => self.threads.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for key in Self::KEYS {
            writeln!(f, "{key}={}", self.value_of(key))?;
        }
        Ok(())
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(s)?;
        Ok(cfg)
    }
}
