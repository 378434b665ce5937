//! Whole-image super resolution, training-patch collection and the synthetic
//! frame generator used by the CLI.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Assembly, Method, RunConfig};
use crate::degradation::{degrade_image, DegradeSpec};
use crate::dictfile::{BankMeta, DictionaryFile};
use crate::double_sparse::{single_frame_patch, super_resolve_patch, AlternationOptions, AlternationTrace};
use crate::error::{Error, Result};
use crate::image_core::{
    assemble_patches, assemble_patches_footprint, bicubic_resize_anchored, patch_grid, rgb_to_ycbcr, ycbcr_to_rgb, ImageGray, PatchPosition, PatchVec,
    RgbImage, SampleAnchor, YCbCr,
};
use crate::registration::{anchor_match, clip_by_matching, BaseDictionaryBank};
use crate::sparse::{learn_dictionary, Dictionary, LassoOptions, LearnOptions, LearnedDictionary};

/// HR dictionary with its derived LR bank.
#[derive(Debug, Clone, Copy)]
pub struct SrModel<'a> {
    pub hr: &'a Dictionary,
    pub bank: &'a BaseDictionaryBank,
}

impl<'a> SrModel<'a> {
    pub fn from_file(file: &'a DictionaryFile) -> Result<Self> {
        match &file.bank {
            Some((_, bank)) => Ok(Self { hr: &file.hr, bank }),
            None => Err(Error::Format("dictionary file carries no LR bank".into())),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SrSummary {
    pub method: Option<Method>,
    pub n_patches: usize,
    /// Patches coded from the target alone because no auxiliary patch could
    /// be registered.
    pub n_fallback: usize,
    /// Individual (patch, auxiliary frame) registrations that failed.
    pub n_registration_failures: usize,
    pub mean_lasso_sweeps: f64,
    pub n_codes: usize,
    pub n_certified: usize,
    pub wall_time: Duration,
    /// Per-patch traces in raster order (empty for bicubic).
    pub traces: Vec<AlternationTrace>,
}

impl SrSummary {
    pub fn report(&self) -> String {
        format!(
            "method={} patches={} fallback={} registration_failures={} mean_lasso_sweeps={:.1} kkt_certified={}/{} wall_time_s={:.3}",
            self.method.map_or("-", Method::name),
            self.n_patches,
            self.n_fallback,
            self.n_registration_failures,
            self.mean_lasso_sweeps,
            self.n_certified,
            self.n_codes,
            self.wall_time.as_secs_f64()
        )
    }
}

/// Bicubic magnification aligned with top-left decimation: LR pixel `(r, c)`
/// sits on HR pixel `(k r, k c)`.
pub fn bicubic_upscale(lr: &ImageGray, k: usize) -> Result<ImageGray> {
    bicubic_resize_anchored(lr, k as f64, SampleAnchor::TopLeft)
}

fn alternation_options(cfg: &RunConfig, rounds: usize) -> AlternationOptions {
    AlternationOptions {
        eta: cfg.eta,
        rounds,
        lasso: lasso_options(cfg),
        ..Default::default()
    }
}

fn lasso_options(cfg: &RunConfig) -> LassoOptions {
    LassoOptions { tol: cfg.lasso_tol, max_iter: cfg.lasso_max_iter, record_history: false }
}

struct PatchOutcome {
    hr: PatchVec,
    trace: AlternationTrace,
    registration_failures: usize,
}

fn register(
    y1: &PatchVec,
    pos: PatchPosition,
    aux: &[ImageGray],
    upscaled: Option<&ImageGray>,
    cfg: &RunConfig,
) -> (Vec<PatchVec>, usize) {
    let mut patches = Vec::with_capacity(aux.len());
    let mut failures = 0;
    for img in aux {
        let matched = clip_by_matching(y1, pos, img, cfg.search_radius).and_then(|(p, at)| {
            match upscaled {
                Some(up) => {
                    let moved = anchor_match(up, pos, at, img, y1.side() - 1, cfg.k);
                    img.window(moved.row, moved.col, y1.side() - 1)
                }
                None => Ok(p),
            }
        });
        match matched {
            Ok(p) => patches.push(p),
            Err(e) => {
                log::debug!("registration failed at ({}, {}): {e}", pos.row, pos.col);
                failures += 1;
            }
        }
    }
    (patches, failures)
}

fn process_patch(
    target: &ImageGray,
    aux: &[ImageGray],
    upscaled: Option<&ImageGray>,
    pos: PatchPosition,
    model: SrModel,
    method: Method,
    cfg: &RunConfig,
) -> Result<PatchOutcome> {
    let y1 = target.window(pos.row, pos.col, cfg.patch_side)?;
    if method == Method::Sf {
        let (hr, code) = single_frame_patch(&y1, model.bank, model.hr, cfg.eta, &lasso_options(cfg))?;
        let trace = AlternationTrace {
            kkt_violations: vec![code.kkt_violation],
            codes_certified: code.kkt_violation <= cfg.lasso_tol,
            single_frame: true,
            lasso_sweeps: code.iterations,
            final_alpha: code.coeffs,
            ..Default::default()
        };
        return Ok(PatchOutcome { hr, trace, registration_failures: 0 });
    }
    let (aux_patches, registration_failures) = register(&y1, pos, aux, upscaled, cfg);
    let rounds = if method == Method::Mfsc { 1 } else { cfg.rounds };
    let (hr, trace) = super_resolve_patch(&y1, &aux_patches, model.bank, model.hr, &alternation_options(cfg, rounds))?;
    Ok(PatchOutcome { hr, trace, registration_failures })
}

fn run_in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Super-resolves a grayscale target frame by `cfg.k` using `method`.
/// Auxiliary frames and the model are ignored by bicubic.
pub fn super_resolve_gray(
    target: &ImageGray,
    aux: &[ImageGray],
    model: Option<SrModel>,
    method: Method,
    cfg: &RunConfig,
) -> Result<(ImageGray, SrSummary)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut summary = SrSummary { method: Some(method), ..Default::default() };
    if method == Method::Bicubic {
        let out = bicubic_upscale(target, cfg.k)?;
        summary.wall_time = start.elapsed();
        return Ok((out, summary));
    }
    let model = model.ok_or_else(|| Error::Parameter(format!("method {method} needs a dictionary")))?;
    if model.bank.k() != cfg.k || model.bank.lr_side() != cfg.patch_side {
        return Err(Error::Parameter(format!(
            "dictionary was built for k={} patch_side={}, config has k={} patch_side={}",
            model.bank.k(),
            model.bank.lr_side(),
            cfg.k,
            cfg.patch_side
        )));
    }
    if let Some(a) = aux.iter().find(|a| a.height() != target.height() || a.width() != target.width()) {
        return Err(Error::Dimension(format!(
            "auxiliary frame is {}x{}, target is {}x{}",
            a.height(),
            a.width(),
            target.height(),
            target.width()
        )));
    }
    let positions = patch_grid(target.height(), target.width(), cfg.patch_side, cfg.stride)?;
    let upscaled = if cfg.anchor && !aux.is_empty() && method != Method::Sf {
        Some(bicubic_upscale(target, cfg.k)?)
    } else {
        None
    };
    let outcomes: Vec<PatchOutcome> = run_in_pool(cfg.threads, || {
        positions
            .par_iter()
            .map(|&pos| process_patch(target, aux, upscaled.as_ref(), pos, model, method, cfg))
            .collect::<Result<Vec<_>>>()
    })??;

    let k = cfg.k;
    let mut placed = Vec::with_capacity(outcomes.len());
    let mut sweeps = 0;
    for (pos, o) in positions.iter().zip(outcomes) {
        summary.n_registration_failures += o.registration_failures;
        if o.trace.single_frame && method != Method::Sf {
            summary.n_fallback += 1;
        }
        summary.n_codes += o.trace.kkt_violations.len();
        summary.n_certified += o.trace.kkt_violations.iter().filter(|v| **v <= cfg.lasso_tol).count();
        sweeps += o.trace.lasso_sweeps;
        placed.push((PatchPosition::new(k * pos.row, k * pos.col), o.hr));
        summary.traces.push(o.trace);
    }
    summary.n_patches = placed.len();
    summary.mean_lasso_sweeps = sweeps as f64 / summary.n_codes.max(1) as f64;
    let (h, w) = (k * target.height(), k * target.width());
    let out = match cfg.assembly {
        Assembly::Uniform => assemble_patches(&placed, h, w)?,
        Assembly::Footprint => assemble_patches_footprint(&placed, k * (cfg.patch_side - 1) + 1, h, w)?,
    };
    summary.wall_time = start.elapsed();
    Ok((out, summary))
}

/// Colour path: the luma plane goes through `method`, chroma is magnified
/// bicubically from the target.
pub fn super_resolve_color(
    target: &RgbImage,
    aux: &[RgbImage],
    model: Option<SrModel>,
    method: Method,
    cfg: &RunConfig,
) -> Result<(RgbImage, SrSummary)> {
    let ycc = rgb_to_ycbcr(target);
    let aux_y: Vec<ImageGray> = aux.iter().map(|a| rgb_to_ycbcr(a).y).collect();
    let (y, summary) = super_resolve_gray(&ycc.y, &aux_y, model, method, cfg)?;
    let out = YCbCr {
        y,
        cb: bicubic_upscale(&ycc.cb, cfg.k)?,
        cr: bicubic_upscale(&ycc.cr, cfg.k)?,
    };
    Ok((ycbcr_to_rgb(&out)?, summary))
}

/// Largest top-left crop with both sides divisible by `k`.
pub fn crop_to_multiple(img: &ImageGray, k: usize) -> Result<ImageGray> {
    let h = img.height() / k * k;
    let w = img.width() / k * k;
    if h == 0 || w == 0 {
        return Err(Error::Dimension(format!("image {}x{} is smaller than k={k}", img.height(), img.width())));
    }
    img.crop(0, 0, h, w)
}

/// Degradation specs for one synthetic stack: frame 0 is unshifted, the
/// others get independent integer shifts in `[-shift_range, shift_range]`.
/// Every frame draws its own noise seed.
pub fn stack_specs(cfg: &RunConfig) -> Vec<DegradeSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.n_frames)
        .map(|i| {
            let (dx, dy) = if i == 0 {
                (0, 0)
            } else {
                (
                    rng.gen_range(-cfg.shift_range..=cfg.shift_range),
                    rng.gen_range(-cfg.shift_range..=cfg.shift_range),
                )
            };
            DegradeSpec {
                k: cfg.k,
                blur_side: cfg.blur_side,
                blur_sigma: cfg.blur_sigma,
                noise_sigma: cfg.noise_sigma,
                dx,
                dy,
                seed: rng.gen(),
            }
        })
        .collect()
}

/// Synthetic LR stack from one HR image (cropped to a multiple of `k`).
pub fn make_stack(hr: &ImageGray, cfg: &RunConfig) -> Result<(ImageGray, Vec<(DegradeSpec, ImageGray)>)> {
    let hr = crop_to_multiple(hr, cfg.k)?;
    let frames = stack_specs(cfg)
        .into_iter()
        .map(|spec| degrade_image(&hr, &spec).map(|lr| (spec, lr)))
        .collect::<Result<Vec<_>>>()?;
    Ok((hr, frames))
}

/// Mean-removed HR training patches of side `k * patch_side`, sampled
/// without replacement from all positions with some texture.
pub fn collect_training_patches(images: &[ImageGray], cfg: &RunConfig) -> Result<Vec<Vec<f64>>> {
    let side = cfg.k * cfg.patch_side;
    let mut candidates = Vec::new();
    for (i, img) in images.iter().enumerate() {
        if img.height() < side || img.width() < side {
            continue;
        }
        for pos in patch_grid(img.height(), img.width(), side, 1.max(cfg.k))? {
            candidates.push((i, pos));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_7a11);
    candidates.shuffle(&mut rng);
    let mut out = Vec::new();
    for (i, pos) in candidates {
        if out.len() >= cfg.train_patches {
            break;
        }
        let p = images[i].window(pos.row, pos.col, side)?;
        let m = p.mean();
        let centered: Vec<f64> = p.values().iter().map(|v| v - m).collect();
        let energy: f64 = centered.iter().map(|v| v * v).sum::<f64>() / centered.len() as f64;
        // flat patches carry no structure worth an atom
        if energy.sqrt() >= 1e-2 {
            out.push(centered);
        }
    }
    if out.len() < cfg.atoms {
        return Err(Error::Parameter(format!(
            "only {} usable training patches, need at least {}",
            out.len(),
            cfg.atoms
        )));
    }
    Ok(out)
}

/// Learns the HR dictionary and derives its LR bank. Also returns the
/// number of training patches used.
pub fn train_model(images: &[ImageGray], cfg: &RunConfig) -> Result<(DictionaryFile, LearnedDictionary, usize)> {
    cfg.validate()?;
    let patches = collect_training_patches(images, cfg)?;
    let opts = LearnOptions {
        n_atoms: cfg.atoms,
        eta: cfg.train_eta,
        n_iters: cfg.train_iters,
        seed: cfg.seed,
        lasso: lasso_options(cfg),
        ..Default::default()
    };
    let learned = run_in_pool(cfg.threads, || learn_dictionary(&patches, &opts))??;
    let meta = BankMeta { k: cfg.k, lr_side: cfg.patch_side, blur_side: cfg.blur_side, blur_sigma: cfg.blur_sigma };
    let file = DictionaryFile::with_bank(learned.dictionary.clone(), meta)?;
    Ok((file, learned, patches.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_core::psnr;
    use crate::synth::{dead_leaves, DeadLeavesOptions};

    fn small_cfg() -> RunConfig {
        RunConfig { atoms: 32, train_patches: 600, train_iters: 3, eta: 0.01, train_eta: 0.05, ..RunConfig::default() }
    }

    fn small_model(cfg: &RunConfig) -> DictionaryFile {
        let imgs: Vec<ImageGray> = (0..2).map(|s| dead_leaves(60, 60, 90 + s, &DeadLeavesOptions::default()).unwrap()).collect();
        train_model(&imgs, cfg).unwrap().0
    }

    #[test]
    fn specs_follow_the_protocol() {
        let cfg = RunConfig { seed: 9, ..RunConfig::default() };
        let specs = stack_specs(&cfg);
        assert_eq!(specs.len(), 5);
        assert_eq!((specs[0].dx, specs[0].dy), (0, 0));
        assert!(specs.iter().all(|s| s.dx.abs() <= 5 && s.dy.abs() <= 5));
        assert_eq!(specs, stack_specs(&cfg));
        let seeds: std::collections::HashSet<u64> = specs.iter().map(|s| s.seed).collect();
        assert_eq!(seeds.len(), 5);
    }

    #[test]
    fn bicubic_ignores_model_and_aux() {
        let lr = dead_leaves(20, 20, 1, &DeadLeavesOptions::default()).unwrap();
        let cfg = RunConfig::default();
        let (a, _) = super_resolve_gray(&lr, &[], None, Method::Bicubic, &cfg).unwrap();
        let (b, _) = super_resolve_gray(&lr, std::slice::from_ref(&lr), None, Method::Bicubic, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.height(), a.width()), (60, 60));
        assert_eq!(a, bicubic_upscale(&lr, 3).unwrap());
    }

    #[test]
    fn dictionary_methods_need_a_model() {
        let lr = ImageGray::filled(10, 10, 0.5).unwrap();
        let err = super_resolve_gray(&lr, &[], None, Method::Proposed, &RunConfig::default()).unwrap_err();
        assert_eq!(err.category(), "parameter");
    }

    #[test]
    fn end_to_end_small_stack() {
        let cfg = small_cfg();
        let file = small_model(&cfg);
        let model = SrModel::from_file(&file).unwrap();
        let hr = dead_leaves(45, 45, 7, &DeadLeavesOptions::default()).unwrap();
        let (hr, frames) = make_stack(&hr, &cfg).unwrap();
        let target = &frames[0].1;
        let aux: Vec<ImageGray> = frames[1..].iter().map(|(_, f)| f.clone()).collect();
        let (bic, _) = super_resolve_gray(target, &aux, Some(model), Method::Bicubic, &cfg).unwrap();
        let (prop, summary) = super_resolve_gray(target, &aux, Some(model), Method::Proposed, &cfg).unwrap();
        assert_eq!((prop.height(), prop.width()), (45, 45));
        assert_eq!(summary.n_patches, 36);
        assert_eq!(summary.traces.len(), 36);
        assert_eq!(summary.n_certified, summary.n_codes);
        assert!(summary.traces.iter().all(|t| t.is_non_increasing(1e-9)));
        assert!(psnr(&hr, &prop).unwrap().is_finite());
        assert!(psnr(&hr, &bic).unwrap().is_finite());
        // determinism, including under a different worker count
        let (again, _) = super_resolve_gray(target, &aux, Some(model), Method::Proposed, &RunConfig { threads: 1, ..cfg.clone() }).unwrap();
        assert_eq!(again, prop);
    }

    #[test]
    fn mfsc_is_proposed_with_one_round() {
        let cfg = small_cfg();
        let file = small_model(&cfg);
        let model = SrModel::from_file(&file).unwrap();
        let hr = dead_leaves(30, 30, 8, &DeadLeavesOptions::default()).unwrap();
        let (_, frames) = make_stack(&hr, &cfg).unwrap();
        let aux: Vec<ImageGray> = frames[1..].iter().map(|(_, f)| f.clone()).collect();
        let (m, _) = super_resolve_gray(&frames[0].1, &aux, Some(model), Method::Mfsc, &cfg).unwrap();
        let one = RunConfig { rounds: 1, ..cfg.clone() };
        let (p, _) = super_resolve_gray(&frames[0].1, &aux, Some(model), Method::Proposed, &one).unwrap();
        assert_eq!(m, p);
    }

    #[test]
    fn proposed_without_aux_equals_single_frame() {
        let cfg = small_cfg();
        let file = small_model(&cfg);
        let model = SrModel::from_file(&file).unwrap();
        let lr = dead_leaves(12, 12, 3, &DeadLeavesOptions::default()).unwrap();
        let (p, summary) = super_resolve_gray(&lr, &[], Some(model), Method::Proposed, &cfg).unwrap();
        let (s, _) = super_resolve_gray(&lr, &[], Some(model), Method::Sf, &cfg).unwrap();
        assert_eq!(p, s);
        assert_eq!(summary.n_fallback, summary.n_patches);
    }

    #[test]
    fn color_path_keeps_gray_gray() {
        let cfg = small_cfg();
        let lr = dead_leaves(10, 10, 4, &DeadLeavesOptions::default()).unwrap();
        let rgb = RgbImage::new(lr.clone(), lr.clone(), lr.clone()).unwrap();
        let (out, _) = super_resolve_color(&rgb, &[], None, Method::Bicubic, &cfg).unwrap();
        let gray = bicubic_upscale(&lr, 3).unwrap();
        for (a, b) in out.r.data().iter().zip(gray.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn mismatched_aux_is_rejected() {
        let cfg = small_cfg();
        let file = small_model(&cfg);
        let model = SrModel::from_file(&file).unwrap();
        let a = ImageGray::filled(10, 10, 0.2).unwrap();
        let b = ImageGray::filled(9, 10, 0.2).unwrap();
        let err = super_resolve_gray(&a, &[b], Some(model), Method::Proposed, &cfg).unwrap_err();
        assert_eq!(err.category(), "dimension");
    }
}
