//! Integer block matching of target patches into auxiliary frames, the bank
//! of integer-shift LR base dictionaries, and the stacked per-patch system.
//!
//! Geometry: an HR patch has side `k * s` where `s` is the LR patch side.
//! The shift `(a, b)`, `0 <= a, b <= k`, selects the `k (s - 1)` HR window at
//! row `a`, column `b`; degrading it gives an `(s - 1)`x`(s - 1)` LR patch.

use rayon::prelude::*;

use crate::degradation::{apply_g, shift_clip_patch, BlurKernel};
use crate::error::{Error, Result};
use crate::image_core::{ImageGray, PatchPosition, PatchVec};
use crate::sparse::Dictionary;

/// Integer-LR-pixel SSD search for the target patch inside an auxiliary
/// frame.
///
/// The target's upper-left `(s-1)`x`(s-1)` block is compared against every
/// `(s-1)`x`(s-1)` window of `aux` whose corner lies within `search_radius`
/// of `target_pos`. Ties go to the lexicographically smallest `(row, col)`.
pub fn clip_by_matching(
    target_patch: &PatchVec,
    target_pos: PatchPosition,
    aux: &ImageGray,
    search_radius: usize,
) -> Result<(PatchVec, PatchPosition)> {
    let side = target_patch.side();
    if side < 2 {
        return Err(Error::Dimension("target patch must have side >= 2".into()));
    }
    let inner = side - 1;
    let (rows, cols) = search_ranges(target_pos, aux, inner, search_radius)?;
    let mut best: Option<(f64, PatchPosition)> = None;
    for r in rows.0..=rows.1 {
        for c in cols.0..=cols.1 {
            let s = ssd(target_patch, aux, r, c, inner);
            if best.is_none_or(|(b, _)| s < b) {
                best = Some((s, PatchPosition::new(r, c)));
            }
        }
    }
    let (_, pos) = best.expect("non-empty search window");
    Ok((aux.window(pos.row, pos.col, inner)?, pos))
}

type Range = (usize, usize);

fn search_ranges(target_pos: PatchPosition, aux: &ImageGray, inner: usize, radius: usize) -> Result<(Range, Range)> {
    if aux.height() < inner || aux.width() < inner {
        return Err(Error::Registration(format!(
            "auxiliary image {}x{} is smaller than the {inner}x{inner} clip",
            aux.height(),
            aux.width()
        )));
    }
    let axis = |center: usize, len: usize| -> Option<Range> {
        let max = len - inner;
        let lo = center.saturating_sub(radius);
        let hi = (center + radius).min(max);
        (lo <= hi).then_some((lo, hi))
    };
    match (axis(target_pos.row, aux.height()), axis(target_pos.col, aux.width())) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(Error::Registration(format!(
            "empty search window around ({}, {})",
            target_pos.row, target_pos.col
        ))),
    }
}

fn ssd(target: &PatchVec, aux: &ImageGray, row: usize, col: usize, inner: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..inner {
        for j in 0..inner {
            let d = target.get(i, j) - aux.get(row + i, col + j);
            acc += d * d;
        }
    }
    acc
}

/// Moves an integer match so that the residual displacement falls inside the
/// representable shift range `[0, k)` (HR pixels).
///
/// `upscaled` is the target frame magnified by `k` on the top-left sample
/// grid, so `upscaled[k i, k j] = target[i, j]`. Every window within one LR
/// pixel of `matched` is paired with each residual `(a, b)` in `0..k`, and
/// compared against `upscaled` sampled at `k * target_pos + (a, b)` with
/// stride `k`. The window of the best pair is returned; ties go to the first
/// candidate in raster order.
pub fn anchor_match(
    upscaled: &ImageGray,
    target_pos: PatchPosition,
    matched: PatchPosition,
    aux: &ImageGray,
    side: usize,
    k: usize,
) -> PatchPosition {
    if aux.height() < side
        || aux.width() < side
        || k * (target_pos.row + side) > upscaled.height()
        || k * (target_pos.col + side) > upscaled.width()
    {
        return matched;
    }
    let (max_row, max_col) = (aux.height() - side, aux.width() - side);
    let mut best = (f64::INFINITY, matched);
    for row in matched.row.saturating_sub(1)..=matched.row + 1 {
        for col in matched.col.saturating_sub(1)..=matched.col + 1 {
            if row > max_row || col > max_col {
                continue;
            }
            for a in 0..k {
                for b in 0..k {
                    let mut acc = 0.0;
                    for i in 0..side {
                        for j in 0..side {
                            let u = upscaled.get(k * (target_pos.row + i) + a, k * (target_pos.col + j) + b);
                            let d = u - aux.get(row + i, col + j);
                            acc += d * d;
                        }
                    }
                    if acc < best.0 {
                        best = (acc, PatchPosition::new(row, col));
                    }
                }
            }
        }
    }
    best.1
}

/// LR target dictionary plus the `(k+1)^2` integer-shift base dictionaries,
/// all derived from one HR dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseDictionaryBank {
    k: usize,
    lr_side: usize,
    target: Dictionary,
    bases: Vec<Dictionary>,
}

impl BaseDictionaryBank {
    /// Assembles a bank from precomputed blocks (base index `a * (k+1) + b`).
    pub fn from_parts(k: usize, lr_side: usize, target: Dictionary, bases: Vec<Dictionary>) -> Result<Self> {
        let n = target.n_atoms();
        if target.atom_dim() != lr_side * lr_side
            || bases.len() != (k + 1) * (k + 1)
            || bases
                .iter()
                .any(|b| b.n_atoms() != n || b.atom_dim() != (lr_side - 1) * (lr_side - 1))
        {
            return Err(Error::Dimension("inconsistent base dictionary bank".into()));
        }
        Ok(Self {
            k,
            lr_side,
            target,
            bases,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Side of the target LR patch.
    pub fn lr_side(&self) -> usize {
        self.lr_side
    }

    /// Side of the HR patch.
    pub fn hr_side(&self) -> usize {
        self.k * self.lr_side
    }

    pub fn n_atoms(&self) -> usize {
        self.target.n_atoms()
    }

    /// Length of the target LR patch vector.
    pub fn target_dim(&self) -> usize {
        self.lr_side * self.lr_side
    }

    /// Length of an auxiliary (clipped) LR patch vector.
    pub fn aux_dim(&self) -> usize {
        (self.lr_side - 1) * (self.lr_side - 1)
    }

    /// Number of base shifts, `(k+1)^2`.
    pub fn n_shifts(&self) -> usize {
        self.bases.len()
    }

    pub fn target_dict(&self) -> &Dictionary {
        &self.target
    }

    pub fn bases(&self) -> &[Dictionary] {
        &self.bases
    }

    pub fn base(&self, a: usize, b: usize) -> &Dictionary {
        &self.bases[self.shift_index(a, b)]
    }

    #[inline]
    pub fn shift_index(&self, a: usize, b: usize) -> usize {
        a * (self.k + 1) + b
    }

    #[inline]
    pub fn shift_of(&self, index: usize) -> (usize, usize) {
        (index / (self.k + 1), index % (self.k + 1))
    }
}

/// Derives the LR target dictionary `G D^h` and every base dictionary
/// `G W_(a,b) D^h` from an HR dictionary of square atoms.
pub fn build_base_bank(d_h: &Dictionary, kernel: &BlurKernel, k: usize) -> Result<BaseDictionaryBank> {
    let hr_side = (d_h.atom_dim() as f64).sqrt().round() as usize;
    if hr_side * hr_side != d_h.atom_dim() {
        return Err(Error::Dimension(format!(
            "HR atom length {} is not a square",
            d_h.atom_dim()
        )));
    }
    if k == 0 || hr_side % k != 0 || hr_side / k < 2 {
        return Err(Error::Dimension(format!(
            "HR patch side {hr_side} is incompatible with magnification {k}"
        )));
    }
    let lr_side = hr_side / k;
    let window = hr_side - k;
    let n_shifts = (k + 1) * (k + 1);

    // per atom: target column followed by one column per shift
    let columns: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..d_h.n_atoms())
        .into_par_iter()
        .map(|j| -> Result<_> {
            let atom = PatchVec::new(hr_side, d_h.atom(j).to_vec())?;
            let target = apply_g(&atom, kernel, k)?.into_values();
            let shifted = (0..n_shifts)
                .map(|s| {
                    let clip = shift_clip_patch(&atom, s / (k + 1), s % (k + 1), window)?;
                    Ok(apply_g(&clip, kernel, k)?.into_values())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((target, shifted))
        })
        .collect::<Result<_>>()?;

    let target = Dictionary::from_columns(&columns.iter().map(|(t, _)| t.clone()).collect::<Vec<_>>())?;
    let bases = (0..n_shifts)
        .map(|s| Dictionary::from_columns(&columns.iter().map(|(_, sh)| sh[s].clone()).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    BaseDictionaryBank::from_parts(k, lr_side, target, bases)
}

/// Stacked observation of one target patch and its auxiliary patches,
/// together with the block operator `B` (held implicitly through the bank).
///
/// `theta` layout: entry 0 weights the target block; auxiliary frame `i`
/// (0-based over auxiliaries) owns entries `1 + i*S .. 1 + (i+1)*S` with
/// `S = (k+1)^2`, ordered by shift index `a*(k+1) + b`.
#[derive(Debug, Clone)]
pub struct StackedSystem<'a> {
    bank: &'a BaseDictionaryBank,
    y_tilde: Vec<f64>,
    n_frames: usize,
}

impl<'a> StackedSystem<'a> {
    pub fn bank(&self) -> &'a BaseDictionaryBank {
        self.bank
    }

    pub fn y_tilde(&self) -> &[f64] {
        &self.y_tilde
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_aux(&self) -> usize {
        self.n_frames - 1
    }

    pub fn theta_len(&self) -> usize {
        1 + self.bank.n_shifts() * self.n_aux()
    }

    pub fn n_rows(&self) -> usize {
        self.bank.target_dim() + self.n_aux() * self.bank.aux_dim()
    }

    pub fn target_obs(&self) -> &[f64] {
        &self.y_tilde[..self.bank.target_dim()]
    }

    /// Observation of auxiliary frame `i` (0-based).
    pub fn aux_obs(&self, i: usize) -> &[f64] {
        let start = self.bank.target_dim() + i * self.bank.aux_dim();
        &self.y_tilde[start..start + self.bank.aux_dim()]
    }

    /// Range of `theta` entries owned by auxiliary frame `i`.
    pub fn theta_block(&self, i: usize) -> std::ops::Range<usize> {
        let s = self.bank.n_shifts();
        1 + i * s..1 + (i + 1) * s
    }

    /// The `N x theta_len` constraint matrix `E`, row-major.
    pub fn constraint_matrix(&self) -> Vec<Vec<f64>> {
        let mut e = vec![vec![0.0; self.theta_len()]; self.n_frames];
        e[0][0] = 1.0;
        for i in 0..self.n_aux() {
            for j in self.theta_block(i) {
                e[i + 1][j] = 1.0;
            }
        }
        e
    }

    /// Dictionary block of `B` in block-column `l` restricted to the rows of
    /// frame `frame` (0 = target), if non-zero.
    fn block(&self, frame: usize, l: usize) -> Option<&Dictionary> {
        if frame == 0 {
            return (l == 0).then(|| self.bank.target_dict());
        }
        let range = self.theta_block(frame - 1);
        range.contains(&l).then(|| &self.bank.bases()[l - range.start])
    }

    fn row_range(&self, frame: usize) -> std::ops::Range<usize> {
        if frame == 0 {
            0..self.bank.target_dim()
        } else {
            let start = self.bank.target_dim() + (frame - 1) * self.bank.aux_dim();
            start..start + self.bank.aux_dim()
        }
    }

    /// Dense `B`, row-major with `theta_len * K` columns. Intended for small
    /// banks; the solvers never materialise it.
    pub fn dense_b(&self) -> Vec<Vec<f64>> {
        let k = self.bank.n_atoms();
        let mut b = vec![vec![0.0; self.theta_len() * k]; self.n_rows()];
        for frame in 0..self.n_frames {
            for l in 0..self.theta_len() {
                if let Some(d) = self.block(frame, l) {
                    for (local, row) in self.row_range(frame).enumerate() {
                        for j in 0..k {
                            b[row][l * k + j] = d.get(local, j);
                        }
                    }
                }
            }
        }
        b
    }

    /// `B vec(W)` for a `K x theta_len` matrix `W` given column-major.
    pub fn apply_b(&self, w: &[f64]) -> Vec<f64> {
        let k = self.bank.n_atoms();
        debug_assert_eq!(w.len(), k * self.theta_len());
        let mut out = vec![0.0; self.n_rows()];
        for frame in 0..self.n_frames {
            let rows = self.row_range(frame);
            for l in 0..self.theta_len() {
                if let Some(d) = self.block(frame, l) {
                    let part = d.mul_vec(&w[l * k..(l + 1) * k]);
                    for (o, v) in out[rows.clone()].iter_mut().zip(part) {
                        *o += v;
                    }
                }
            }
        }
        out
    }

    /// The stacked dictionary `B (theta ⊗ I)`: target block scaled by
    /// `theta[0]` over, per auxiliary frame, the theta-weighted sum of base
    /// dictionaries.
    pub fn effective_dictionary(&self, theta: &[f64]) -> Dictionary {
        let k = self.bank.n_atoms();
        let rows = self.n_rows();
        let mut atoms = vec![0.0; rows * k];
        for frame in 0..self.n_frames {
            let range = self.row_range(frame);
            for l in 0..self.theta_len() {
                let t = theta[l];
                if t == 0.0 {
                    continue;
                }
                if let Some(d) = self.block(frame, l) {
                    for j in 0..k {
                        let col = &mut atoms[j * rows + range.start..j * rows + range.end];
                        for (c, v) in col.iter_mut().zip(d.atom(j)) {
                            *c += t * v;
                        }
                    }
                }
            }
        }
        Dictionary::new(rows, k, atoms).expect("consistent shape")
    }

    /// Columns of `B (I ⊗ alpha)`: column `l` is block-column `l` of `B`
    /// applied to `alpha`.
    pub fn shift_design(&self, alpha: &[f64]) -> Vec<Vec<f64>> {
        (0..self.theta_len())
            .map(|l| {
                let mut col = vec![0.0; self.n_rows()];
                for frame in 0..self.n_frames {
                    if let Some(d) = self.block(frame, l) {
                        let range = self.row_range(frame);
                        col[range].copy_from_slice(&d.mul_vec(alpha));
                    }
                }
                col
            })
            .collect()
    }
}

/// Stacks the target and auxiliary observations into one system.
pub fn build_stacked_system<'a>(
    target_patch: &PatchVec,
    aux_patches: &[PatchVec],
    bank: &'a BaseDictionaryBank,
) -> Result<StackedSystem<'a>> {
    if aux_patches.is_empty() {
        return Err(Error::Parameter("stacked system needs at least one auxiliary patch".into()));
    }
    if target_patch.side() != bank.lr_side() {
        return Err(Error::Dimension(format!(
            "target patch side {} does not match bank side {}",
            target_patch.side(),
            bank.lr_side()
        )));
    }
    if let Some(p) = aux_patches.iter().find(|p| p.side() != bank.lr_side() - 1) {
        return Err(Error::Dimension(format!(
            "auxiliary patch side {} does not match {}",
            p.side(),
            bank.lr_side() - 1
        )));
    }
    let mut y_tilde = target_patch.values().to_vec();
    for p in aux_patches {
        y_tilde.extend_from_slice(p.values());
    }
    Ok(StackedSystem {
        bank,
        y_tilde,
        n_frames: aux_patches.len() + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degradation::gaussian_kernel;
    use crate::image_core::{bicubic_resize_anchored, SampleAnchor};
    use rand::{Rng, SeedableRng};

    fn textured(h: usize, w: usize, seed: u64) -> ImageGray {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ImageGray::from_fn(h, w, |_, _| rng.gen()).unwrap()
    }

    fn random_hr_dict(k: usize, lr_side: usize, n: usize, seed: u64) -> Dictionary {
        let dim = (k * lr_side).pow(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Dictionary::new(dim, n, (0..dim * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn self_match_returns_target_position() {
        let img = textured(20, 20, 1);
        let pos = PatchPosition::new(7, 9);
        let target = img.window(7, 9, 5).unwrap();
        let (patch, found) = clip_by_matching(&target, pos, &img, 2).unwrap();
        assert_eq!(found, pos);
        assert_eq!(patch, img.window(7, 9, 4).unwrap());
    }

    #[test]
    fn one_pixel_translation_is_found() {
        let img = textured(20, 20, 2);
        // content moved one pixel to the right
        let moved = ImageGray::from_fn(20, 20, |r, c| img.get_clamped(r as isize, c as isize - 1)).unwrap();
        let pos = PatchPosition::new(6, 6);
        let target = img.window(6, 6, 5).unwrap();
        // exhaustive SSD oracle over the window
        let mut best = (f64::INFINITY, (0, 0));
        for r in 4..=8 {
            for c in 4..=8 {
                let mut s = 0.0;
                for i in 0..4 {
                    for j in 0..4 {
                        s += (target.get(i, j) - moved.get(r + i, c + j)).powi(2);
                    }
                }
                if s < best.0 {
                    best = (s, (r, c));
                }
            }
        }
        assert_eq!(best.1, (6, 7));
        let (_, found) = clip_by_matching(&target, pos, &moved, 2).unwrap();
        assert_eq!(found, PatchPosition::new(6, 7));
    }

    #[test]
    fn constant_aux_breaks_ties_lexicographically() {
        let aux = ImageGray::filled(12, 12, 0.4).unwrap();
        let target = PatchVec::new(5, vec![0.1; 25]).unwrap();
        let (_, found) = clip_by_matching(&target, PatchPosition::new(5, 4), &aux, 3).unwrap();
        assert_eq!(found, PatchPosition::new(2, 1));
    }

    #[test]
    fn too_small_aux_is_registration_error() {
        let aux = ImageGray::filled(3, 3, 0.4).unwrap();
        let target = PatchVec::zeros(5);
        let err = clip_by_matching(&target, PatchPosition::new(0, 0), &aux, 3).unwrap_err();
        assert!(matches!(err, Error::Registration(_)));
        let aux = ImageGray::filled(8, 8, 0.4).unwrap();
        let err = clip_by_matching(&target, PatchPosition::new(20, 20), &aux, 3).unwrap_err();
        assert!(matches!(err, Error::Registration(_)));
    }

    #[test]
    fn matching_is_translation_consistent() {
        let img = textured(24, 24, 5);
        let pos = PatchPosition::new(9, 9);
        let target = img.window(9, 9, 5).unwrap();
        for (tr, tc) in [(-2isize, 1isize), (1, 1), (0, -2), (2, 2)] {
            let moved = ImageGray::from_fn(24, 24, |r, c| img.get_clamped(r as isize - tr, c as isize - tc)).unwrap();
            let (_, found) = clip_by_matching(&target, pos, &moved, 3).unwrap();
            assert_eq!(found, PatchPosition::new((9 + tr) as usize, (9 + tc) as usize));
        }
    }

    fn upscale(lr: &ImageGray) -> ImageGray {
        bicubic_resize_anchored(lr, 3.0, SampleAnchor::TopLeft).unwrap()
    }

    #[test]
    fn anchoring_keeps_exact_matches() {
        let img = textured(20, 20, 6);
        let pos = PatchPosition::new(7, 7);
        assert_eq!(anchor_match(&upscale(&img), pos, pos, &img, 4, 3), pos);
    }

    #[test]
    fn anchoring_moves_negative_residuals_forward() {
        let hr = ImageGray::from_fn(60, 60, |r, c| 0.5 + 0.4 * ((c as f64) * 0.09).sin() * ((r as f64) * 0.05).cos()).unwrap();
        let lr = |shift: isize| {
            ImageGray::from_fn(20, 20, |r, c| hr.get_clamped(3 * r as isize, 3 * c as isize - shift)).unwrap()
        };
        let target_img = lr(0);
        let up = upscale(&target_img);
        let pos = PatchPosition::new(8, 8);
        // content moved right by s HR px: aux(c) = hr(3c - s), so the window
        // at column m has residual a = 3 (m - 8) - s, in 0..3 only for m = 9
        // when s is 1 or 2, and for m = 8 when s = 0
        for (s, want) in [(0, 8), (1, 9), (2, 9), (3, 9), (-1, 8), (-2, 8), (-3, 7)] {
            let aux = lr(s);
            let (_, m) = clip_by_matching(&target_img.window(8, 8, 5).unwrap(), pos, &aux, 2).unwrap();
            assert_eq!(anchor_match(&up, pos, m, &aux, 4, 3).col, want, "shift {s}");
        }
    }

    #[test]
    fn bank_shapes_and_constant_atoms() {
        let kernel = gaussian_kernel(9, 1.0).unwrap();
        let mut d = random_hr_dict(3, 5, 3, 7);
        d.atom_mut(1).iter_mut().for_each(|v| *v = 0.25);
        let bank = build_base_bank(&d, &kernel, 3).unwrap();
        assert_eq!(bank.n_shifts(), 16);
        assert_eq!((bank.target_dim(), bank.aux_dim()), (25, 16));
        for base in bank.bases() {
            assert_eq!((base.atom_dim(), base.n_atoms()), (16, 3));
            assert!(base.atom(1).iter().all(|v| (v - 0.25).abs() < 1e-12));
        }
    }

    #[test]
    fn zero_shift_base_equals_degraded_top_left_window() {
        let kernel = gaussian_kernel(9, 1.0).unwrap();
        let d = random_hr_dict(3, 5, 4, 8);
        let bank = build_base_bank(&d, &kernel, 3).unwrap();
        for j in 0..4 {
            let atom = PatchVec::new(15, d.atom(j).to_vec()).unwrap();
            let window = PatchVec::new(
                12,
                (0..12).flat_map(|r| atom.values()[r * 15..r * 15 + 12].to_vec()).collect(),
            )
            .unwrap();
            let direct = apply_g(&window, &kernel, 3).unwrap();
            for (a, b) in bank.base(0, 0).atom(j).iter().zip(direct.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bank_rejects_bad_geometry() {
        let kernel = gaussian_kernel(3, 1.0).unwrap();
        let d = Dictionary::zeros(224, 2);
        assert!(build_base_bank(&d, &kernel, 3).is_err());
        let d = Dictionary::zeros(225, 2);
        assert!(build_base_bank(&d, &kernel, 4).is_err());
    }

    #[test]
    fn stacked_shapes_follow_frame_count() {
        let kernel = gaussian_kernel(9, 1.0).unwrap();
        let bank = build_base_bank(&random_hr_dict(3, 5, 256, 9), &kernel, 3).unwrap();
        let target = PatchVec::zeros(5);
        let aux = vec![PatchVec::zeros(4); 4];
        let sys = build_stacked_system(&target, &aux, &bank).unwrap();
        assert_eq!(sys.y_tilde().len(), 89);
        assert!(sys.y_tilde().iter().all(|&v| v == 0.0));
        assert_eq!(sys.theta_len(), 65);
        assert_eq!(sys.n_rows(), 89);
        assert_eq!(sys.theta_len() * bank.n_atoms(), 65 * 256);
        let e = sys.constraint_matrix();
        assert_eq!((e.len(), e[0].len()), (5, 65));
        assert_eq!(e[0].iter().sum::<f64>(), 1.0);
        for (i, row) in e.iter().enumerate().skip(1) {
            assert_eq!(row.iter().sum::<f64>(), 16.0);
            assert!(sys.theta_block(i - 1).all(|j| row[j] == 1.0));
        }
        assert!(build_stacked_system(&target, &[], &bank).is_err());
        assert!(build_stacked_system(&target, &[PatchVec::zeros(5)], &bank).is_err());
    }

    #[test]
    fn forward_model_is_consistent_with_indicator_theta() {
        let kernel = gaussian_kernel(9, 1.0).unwrap();
        let d = random_hr_dict(3, 5, 6, 10);
        let bank = build_base_bank(&d, &kernel, 3).unwrap();
        let j = 2;
        let atom = PatchVec::new(15, d.atom(j).to_vec()).unwrap();
        let (a, b) = (2, 1);
        let y1 = apply_g(&atom, &kernel, 3).unwrap();
        let y2 = apply_g(&shift_clip_patch(&atom, a, b, 12).unwrap(), &kernel, 3).unwrap();
        let sys = build_stacked_system(&y1, &[y2], &bank).unwrap();
        let mut theta = vec![0.0; sys.theta_len()];
        theta[0] = 1.0;
        theta[1 + bank.shift_index(a, b)] = 1.0;
        let mut alpha = vec![0.0; 6];
        alpha[j] = 1.0;
        let fit = sys.effective_dictionary(&theta).mul_vec(&alpha);
        for (f, y) in fit.iter().zip(sys.y_tilde()) {
            assert!((f - y).abs() < 1e-12);
        }
    }
}
