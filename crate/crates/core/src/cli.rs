//! Command implementations behind the `dssr` binary.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{Method, RunConfig};
use crate::degradation::degrade_image;
use crate::dictfile::DictionaryFile;
use crate::error::{Error, Result};
use crate::image_core::io::{load, save_gray, save_rgb, LoadedImage};
use crate::image_core::{psnr, ImageGray, RgbImage};
use crate::pipeline::{crop_to_multiple, make_stack, stack_specs, super_resolve_color, super_resolve_gray, train_model, SrModel, SrSummary};
use crate::sparse::mutual_coherence;
use crate::synth::{dead_leaves, DeadLeavesOptions};

fn output_ext(input: &Path) -> &'static str {
    match input.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pgm") => "pgm",
        _ => "png",
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes frames `y1..yN` and their `.spec` sidecars into `out_dir`.
/// Frame 1 is the unshifted target. Returns the image paths.
pub fn cmd_degrade(hr_path: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    create_dir(out_dir)?;
    let ext = output_ext(hr_path);
    let hr = load(hr_path)?;
    let specs = stack_specs(cfg);
    let mut paths = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let path = out_dir.join(format!("y{}.{ext}", i + 1));
        match &hr {
            LoadedImage::Gray(g) => save_gray(&degrade_image(&crop_to_multiple(g, cfg.k)?, spec)?, &path)?,
            LoadedImage::Rgb(c) => {
                let mut planes = Vec::with_capacity(3);
                for (j, plane) in [&c.r, &c.g, &c.b].into_iter().enumerate() {
                    let s = crate::degradation::DegradeSpec { seed: spec.seed.wrapping_add(j as u64), ..*spec };
                    planes.push(degrade_image(&crop_to_multiple(plane, cfg.k)?, &s)?);
                }
                let b = planes.pop().unwrap();
                let g = planes.pop().unwrap();
                let r = planes.pop().unwrap();
                save_rgb(&RgbImage::new(r, g, b)?, &path)?;
            }
        }
        let sidecar = out_dir.join(format!("y{}.spec", i + 1));
        fs::write(&sidecar, spec.to_string()).map_err(|e| Error::io(&sidecar, e))?;
        paths.push(path);
    }
    Ok(paths)
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "pgm" | "ppm" | "pnm")
    )
}

/// Luma planes of every image in `dir`, in file-name order.
pub fn load_corpus(dir: &Path) -> Result<Vec<ImageGray>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    paths.sort();
    paths.iter().map(|p| load(p).map(|i| i.luma())).collect()
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub n_patches: usize,
    pub objective_history: Vec<f64>,
    pub mutual_coherence: f64,
    pub damped_steps: usize,
}

/// Learns an HR dictionary from every image in `corpus_dir` and writes it,
/// with its LR bank, to `dict_out`.
pub fn cmd_train(corpus_dir: &Path, dict_out: &Path, cfg: &RunConfig) -> Result<TrainReport> {
    let images = load_corpus(corpus_dir)?;
    if images.is_empty() {
        return Err(Error::Parameter(format!("no images found in {}", corpus_dir.display())));
    }
    let (file, learned, n_patches) = train_model(&images, cfg)?;
    file.save(dict_out)?;
    let coherence = if file.hr.n_atoms() >= 2 { mutual_coherence(&file.hr)? } else { 0.0 };
    Ok(TrainReport {
        n_patches,
        objective_history: learned.objective_history,
        mutual_coherence: coherence,
        damped_steps: learned.damped_steps,
    })
}

/// Super-resolves `target` with the auxiliary frames and writes the result.
/// RGB input goes through the luma/chroma path when every frame is RGB.
pub fn cmd_sr(
    target: &Path,
    aux: &[PathBuf],
    dict: Option<&Path>,
    out: &Path,
    cfg: &RunConfig,
    trace_out: Option<&Path>,
) -> Result<SrSummary> {
    let file = match dict {
        Some(p) => Some(DictionaryFile::load(p, true)?),
        None => None,
    };
    let model = file.as_ref().map(SrModel::from_file).transpose()?;
    let target_img = load(target)?;
    let aux_imgs = aux.iter().map(load).collect::<Result<Vec<_>>>()?;
    let summary = match &target_img {
        LoadedImage::Rgb(rgb) if aux_imgs.iter().all(|a| matches!(a, LoadedImage::Rgb(_))) => {
            let aux_rgb: Vec<RgbImage> = aux_imgs
                .into_iter()
                .map(|a| match a {
                    LoadedImage::Rgb(c) => c,
                    LoadedImage::Gray(_) => unreachable!(),
                })
                .collect();
            let (img, summary) = super_resolve_color(rgb, &aux_rgb, model, cfg.method, cfg)?;
            save_rgb(&img, out)?;
            summary
        }
        _ => {
            let aux_luma: Vec<ImageGray> = aux_imgs.iter().map(LoadedImage::luma).collect();
            let (img, summary) = super_resolve_gray(&target_img.luma(), &aux_luma, model, cfg.method, cfg)?;
            save_gray(&img, out)?;
            summary
        }
    };
    if let Some(path) = trace_out {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for (id, t) in summary.traces.iter().enumerate() {
            t.write_tsv(id, &mut f).map_err(|e| Error::io(path, e))?;
        }
        f.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(summary)
}

/// PSNR of `estimate` against `original`, on luma for colour inputs.
pub fn cmd_eval(original: &Path, estimate: &Path) -> Result<f64> {
    psnr(&load(original)?.luma(), &load(estimate)?.luma())
}

/// The machine-readable PSNR line.
pub fn format_psnr(db: f64) -> String {
    if db.is_infinite() {
        "psnr_db=inf".to_string()
    } else {
        format!("psnr_db={db:.2}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproRow {
    pub method: Method,
    pub psnr: Vec<f64>,
}

impl ReproRow {
    pub fn mean(&self) -> f64 {
        self.psnr.iter().sum::<f64>() / self.psnr.len() as f64
    }

    /// Sample standard deviation, 0 for a single trial.
    pub fn std(&self) -> f64 {
        let n = self.psnr.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.psnr.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproTable {
    pub rows: Vec<ReproRow>,
    /// Sparse codes computed over all trials and methods.
    pub codes: usize,
    /// Codes that passed the KKT check at `lasso_tol`.
    pub certified: usize,
}

impl ReproTable {
    pub fn row(&self, method: Method) -> Option<&ReproRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

impl fmt::Display for ReproTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let trials = self.rows.first().map_or(0, |r| r.psnr.len());
        writeln!(f, "PSNR [dB] over {trials} trials")?;
        writeln!(f, "{:<10} {:>16}", "method", "mean ± std")?;
        for r in &self.rows {
            writeln!(f, "{:<10} {:>8.2} ± {:<5.2}", r.method.name(), r.mean(), r.std())?;
        }
        writeln!(f, "kkt_certified={}/{}", self.certified, self.codes)
    }
}

/// Runs the synthetic protocol `n_trials` times on one HR image: stack
/// seeds are `seed, seed+1, ...`, every method sees the same stack.
pub fn repro_on_image(hr: &ImageGray, model: SrModel, cfg: &RunConfig, n_trials: usize) -> Result<ReproTable> {
    if n_trials == 0 {
        return Err(Error::Parameter("n_trials must be >= 1".into()));
    }
    let mut rows: Vec<ReproRow> = Method::ALL.iter().map(|&method| ReproRow { method, psnr: Vec::new() }).collect();
    let (mut codes, mut certified) = (0, 0);
    for t in 0..n_trials {
        let trial_cfg = RunConfig { seed: cfg.seed.wrapping_add(t as u64), ..cfg.clone() };
        let (hr_crop, frames) = make_stack(hr, &trial_cfg)?;
        let target = &frames[0].1;
        let aux: Vec<ImageGray> = frames[1..].iter().map(|(_, f)| f.clone()).collect();
        for row in rows.iter_mut() {
            let (est, summary) = super_resolve_gray(target, &aux, Some(model), row.method, &trial_cfg)?;
            row.psnr.push(psnr(&hr_crop, &est)?);
            codes += summary.n_codes;
            certified += summary.n_certified;
        }
    }
    Ok(ReproTable { rows, codes, certified })
}

pub fn cmd_repro(hr_path: &Path, dict: &Path, cfg: &RunConfig, n_trials: usize) -> Result<ReproTable> {
    let file = DictionaryFile::load(dict, true)?;
    let model = SrModel::from_file(&file)?;
    repro_on_image(&load(hr_path)?.luma(), model, cfg, n_trials)
}

/// Writes a dead-leaves test image.
pub fn cmd_synth(out: &Path, height: usize, width: usize, seed: u64) -> Result<()> {
    save_gray(&dead_leaves(height, width, seed, &DeadLeavesOptions::default())?, out)
}
