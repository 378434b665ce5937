//! Joint estimation of the sparse code `alpha` and the shift weights `theta`
//! for one target patch and its matched auxiliary patches.
//!
//! The objective is
//! `F(alpha, theta) = ||y~ - B vec(alpha theta^T)||^2 + eta ||alpha||_1`
//! with `theta[0] = 1`, `theta >= 0` and each auxiliary block summing to at
//! most one. The alternation starts from a target-only code and then
//! repeats a shift-weight step and a coding step, each of which can only
//! lower `F`.

pub mod qp;

use std::io::Write;

use crate::error::{Error, Result};
use crate::image_core::PatchVec;
use crate::registration::{build_stacked_system, BaseDictionaryBank, StackedSystem};
use crate::sparse::dictionary::dot;
use crate::sparse::{sparse_code, sparse_code_warm, Dictionary, LassoOptions, SparseCode};

pub use qp::{project_capped_simplex, solve_capped_simplex_ls, QpOptions, QpSolution};

/// Feasibility slack on each auxiliary block sum.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

/// Shift weights: entry 0 belongs to the target and is pinned to one, then
/// one block of `n_shifts` weights per auxiliary frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftVector {
    theta: Vec<f64>,
    n_aux: usize,
    n_shifts: usize,
}

impl ShiftVector {
    /// All auxiliary mass on the zero shift, i.e. trusting the integer match.
    pub fn initial(n_aux: usize, n_shifts: usize) -> Self {
        let mut theta = vec![0.0; 1 + n_aux * n_shifts];
        theta[0] = 1.0;
        for i in 0..n_aux {
            theta[1 + i * n_shifts] = 1.0;
        }
        Self { theta, n_aux, n_shifts }
    }

    pub fn from_vec(theta: Vec<f64>, n_aux: usize, n_shifts: usize) -> Result<Self> {
        if theta.len() != 1 + n_aux * n_shifts {
            return Err(Error::Dimension(format!(
                "theta has length {}, expected {}",
                theta.len(),
                1 + n_aux * n_shifts
            )));
        }
        let s = Self { theta, n_aux, n_shifts };
        s.check_feasible()?;
        Ok(s)
    }

    pub fn check_feasible(&self) -> Result<()> {
        if self.theta[0] != 1.0 {
            return Err(Error::Parameter(format!("theta[0] must be 1, got {}", self.theta[0])));
        }
        if let Some(v) = self.theta.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Parameter(format!("theta entries must be finite and >= 0, got {v}")));
        }
        for i in 0..self.n_aux {
            let sum: f64 = self.block(i).iter().sum();
            if sum > 1.0 + FEASIBILITY_SLACK {
                return Err(Error::Parameter(format!("theta block {i} sums to {sum} > 1")));
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self) -> bool {
        self.check_feasible().is_ok()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn n_aux(&self) -> usize {
        self.n_aux
    }

    pub fn n_shifts(&self) -> usize {
        self.n_shifts
    }

    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        1 + i * self.n_shifts..1 + (i + 1) * self.n_shifts
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.theta[self.block_range(i)]
    }

    /// Largest auxiliary weight, 0 without auxiliary frames.
    pub fn max_aux_weight(&self) -> f64 {
        self.theta[1..].iter().copied().fold(0.0, f64::max)
    }
}

/// Images of `alpha` under every base dictionary: column `s` is
/// `D^{l(s)} alpha`. Shared by all auxiliary frames.
fn base_images(bank: &BaseDictionaryBank, alpha: &[f64]) -> Vec<Vec<f64>> {
    bank.bases().iter().map(|d| d.mul_vec(alpha)).collect()
}

fn block_residual_sq(y: &[f64], images: &[Vec<f64>], weights: &[f64]) -> f64 {
    let mut r = y.to_vec();
    for (img, &w) in images.iter().zip(weights) {
        if w != 0.0 {
            for (ri, v) in r.iter_mut().zip(img) {
                *ri -= w * v;
            }
        }
    }
    dot(&r, &r)
}

fn check_shapes(system: &StackedSystem, alpha: &[f64], theta: &ShiftVector) -> Result<()> {
    if alpha.len() != system.bank().n_atoms() {
        return Err(Error::Dimension(format!(
            "code has length {}, dictionary has {} atoms",
            alpha.len(),
            system.bank().n_atoms()
        )));
    }
    if theta.len() != system.theta_len() || theta.n_shifts() != system.bank().n_shifts() {
        return Err(Error::Dimension(format!(
            "theta has length {}, system expects {}",
            theta.len(),
            system.theta_len()
        )));
    }
    Ok(())
}

/// Data term `||y~ - B vec(alpha theta^T)||^2` only.
pub fn data_fit(system: &StackedSystem, alpha: &[f64], theta: &ShiftVector) -> Result<f64> {
    check_shapes(system, alpha, theta)?;
    let bank = system.bank();
    let mut target = system.target_obs().to_vec();
    let fit = bank.target_dict().mul_vec(alpha);
    for (t, f) in target.iter_mut().zip(fit) {
        *t -= theta.as_slice()[0] * f;
    }
    let mut total = dot(&target, &target);
    let images = base_images(bank, alpha);
    for i in 0..system.n_aux() {
        total += block_residual_sq(system.aux_obs(i), &images, theta.block(i));
    }
    Ok(total)
}

/// The joint objective `F(alpha, theta)`.
pub fn joint_objective(system: &StackedSystem, alpha: &[f64], theta: &ShiftVector, eta: f64) -> Result<f64> {
    Ok(data_fit(system, alpha, theta)? + eta * alpha.iter().map(|a| a.abs()).sum::<f64>())
}

/// First code, from the target patch alone.
pub fn init_alpha(y1: &PatchVec, target_dict: &Dictionary, eta: f64, opts: &LassoOptions) -> Result<SparseCode> {
    sparse_code(y1.values(), target_dict, eta, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispSolution {
    pub theta: ShiftVector,
    /// Data term at the returned weights.
    pub objective: f64,
    /// Largest projected-gradient norm over the auxiliary blocks.
    pub pg_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Shift-weight step: minimises the data term over feasible `theta` with
/// `alpha` fixed. The problem separates into one capped-simplex least
/// squares per auxiliary frame.
pub fn solve_disp(system: &StackedSystem, alpha: &[f64], init: &ShiftVector, opts: &QpOptions) -> Result<DispSolution> {
    check_shapes(system, alpha, init)?;
    init.check_feasible()?;
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numeric("code contains a non-finite value".into()));
    }
    let images = base_images(system.bank(), alpha);
    let mut theta = init.theta.clone();
    let mut pg_norm: f64 = 0.0;
    let mut converged = true;
    let mut iterations = 0;
    for i in 0..system.n_aux() {
        let range = init.block_range(i);
        let sol = solve_capped_simplex_ls(&images, system.aux_obs(i), &init.theta[range.clone()], opts);
        theta[range].copy_from_slice(&sol.v);
        pg_norm = pg_norm.max(sol.pg_norm);
        converged &= sol.converged;
        iterations = iterations.max(sol.iterations);
    }
    if !converged {
        log::warn!("shift-weight step stopped with projected gradient {pg_norm:.3e}");
    }
    let theta = ShiftVector { theta, n_aux: init.n_aux, n_shifts: init.n_shifts };
    let objective = data_fit(system, alpha, &theta)?;
    Ok(DispSolution { theta, objective, pg_norm, converged, iterations })
}

/// Coding step: lasso against the stacked dictionary `B (theta ⊗ I)`,
/// warm-started from `warm` when given.
pub fn solve_coeff(
    system: &StackedSystem,
    theta: &ShiftVector,
    eta: f64,
    opts: &LassoOptions,
    warm: Option<&[f64]>,
) -> Result<SparseCode> {
    theta.check_feasible()?;
    if theta.len() != system.theta_len() {
        return Err(Error::Dimension("theta does not match the system".into()));
    }
    let dict = system.effective_dictionary(theta.as_slice());
    match warm {
        Some(w) => sparse_code_warm(system.y_tilde(), &dict, eta, opts, w),
        None => sparse_code(system.y_tilde(), &dict, eta, opts),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfStep {
    Init,
    Disp,
    Coeff,
}

impl HalfStep {
    pub fn name(self) -> &'static str {
        match self {
            HalfStep::Init => "init",
            HalfStep::Disp => "disp",
            HalfStep::Coeff => "coeff",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// 0 for the initial code, then the alternation round starting at 1.
    pub round: usize,
    pub step: HalfStep,
    pub objective: f64,
    pub theta: Vec<f64>,
    pub nnz: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlternationTrace {
    pub records: Vec<TraceRecord>,
    /// KKT violation of every code computed along the way.
    pub kkt_violations: Vec<f64>,
    /// Whether every code met its KKT tolerance.
    pub codes_certified: bool,
    /// True when there were no auxiliary patches and only the target was coded.
    pub single_frame: bool,
    /// Coordinate-descent sweeps summed over every code.
    pub lasso_sweeps: usize,
    pub final_alpha: Vec<f64>,
    pub final_theta: Option<ShiftVector>,
}

impl AlternationTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.records.windows(2).all(|w| w[1].objective <= w[0].objective + slack)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.records.last().map(|r| r.objective)
    }

    /// Objective after the coding step of `round`.
    pub fn objective_after_round(&self, round: usize) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.round == round && r.step == HalfStep::Coeff)
            .map(|r| r.objective)
    }

    fn push_code(&mut self, code: &SparseCode, tol: f64) {
        self.kkt_violations.push(code.kkt_violation);
        self.lasso_sweeps += code.iterations;
        self.codes_certified &= code.kkt_violation <= tol;
    }

    /// Tab-separated lines `patch_id step objective nnz_alpha max_theta`.
    pub fn write_tsv(&self, patch_id: usize, out: &mut dyn Write) -> std::io::Result<()> {
        for r in &self.records {
            let max_theta = r.theta.iter().skip(1).copied().fold(0.0, f64::max);
            writeln!(out, "{patch_id}\t{}\t{:.12e}\t{}\t{:.6}", r.step.name(), r.objective, r.nnz, max_theta)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternationOptions {
    pub eta: f64,
    /// Number of shift/coding rounds.
    pub rounds: usize,
    pub lasso: LassoOptions,
    pub qp: QpOptions,
}

impl Default for AlternationOptions {
    fn default() -> Self {
        Self { eta: 0.02, rounds: 3, lasso: LassoOptions::default(), qp: QpOptions::default() }
    }
}

fn hr_patch(d_h: &Dictionary, alpha: &[f64], mean: f64, side: usize) -> Result<PatchVec> {
    let values = d_h.mul_vec(alpha).into_iter().map(|v| v + mean).collect();
    PatchVec::new(side, values)
}

/// Reconstructs one HR patch from the target patch and its auxiliary patches.
///
/// The target patch mean is removed from every observation and added back to
/// the result. With no auxiliary patches only the target-only code is used.
pub fn super_resolve_patch(
    y1: &PatchVec,
    aux_patches: &[PatchVec],
    bank: &BaseDictionaryBank,
    d_h: &Dictionary,
    opts: &AlternationOptions,
) -> Result<(PatchVec, AlternationTrace)> {
    if opts.rounds == 0 {
        return Err(Error::Parameter("at least one alternation round is required".into()));
    }
    if d_h.n_atoms() != bank.n_atoms() || d_h.atom_dim() != bank.hr_side() * bank.hr_side() {
        return Err(Error::Dimension("HR dictionary does not match the base bank".into()));
    }
    let mean = y1.mean();
    let target = y1.offset(-mean);
    let mut trace = AlternationTrace { codes_certified: true, ..Default::default() };
    let tol = opts.lasso.tol;
    let first = init_alpha(&target, bank.target_dict(), opts.eta, &opts.lasso)?;
    trace.push_code(&first, tol);

    if aux_patches.is_empty() {
        trace.single_frame = true;
        trace.records.push(TraceRecord {
            round: 0,
            step: HalfStep::Init,
            objective: first.objective,
            theta: vec![1.0],
            nnz: first.n_nonzero,
        });
        let out = hr_patch(d_h, &first.coeffs, mean, bank.hr_side())?;
        trace.final_alpha = first.coeffs;
        return Ok((out, trace));
    }

    let aux: Vec<PatchVec> = aux_patches.iter().map(|p| p.offset(-mean)).collect();
    let system = build_stacked_system(&target, &aux, bank)?;
    let mut theta = ShiftVector::initial(system.n_aux(), bank.n_shifts());
    let mut alpha = first.coeffs;
    trace.records.push(TraceRecord {
        round: 0,
        step: HalfStep::Init,
        objective: joint_objective(&system, &alpha, &theta, opts.eta)?,
        theta: theta.as_slice().to_vec(),
        nnz: first.n_nonzero,
    });
    for round in 1..=opts.rounds {
        let disp = solve_disp(&system, &alpha, &theta, &opts.qp)?;
        theta = disp.theta;
        trace.records.push(TraceRecord {
            round,
            step: HalfStep::Disp,
            objective: joint_objective(&system, &alpha, &theta, opts.eta)?,
            theta: theta.as_slice().to_vec(),
            nnz: alpha.iter().filter(|a| **a != 0.0).count(),
        });
        let code = solve_coeff(&system, &theta, opts.eta, &opts.lasso, Some(&alpha))?;
        trace.push_code(&code, tol);
        alpha = code.coeffs;
        trace.records.push(TraceRecord {
            round,
            step: HalfStep::Coeff,
            objective: joint_objective(&system, &alpha, &theta, opts.eta)?,
            theta: theta.as_slice().to_vec(),
            nnz: code.n_nonzero,
        });
    }
    let out = hr_patch(d_h, &alpha, mean, bank.hr_side())?;
    trace.final_alpha = alpha;
    trace.final_theta = Some(theta);
    Ok((out, trace))
}

/// Two-step baseline: one shift-weight step from the target-only code, then
/// one coding step. Same as [`super_resolve_patch`] with a single round.
pub fn mf_sc_baseline_patch(
    y1: &PatchVec,
    aux_patches: &[PatchVec],
    bank: &BaseDictionaryBank,
    d_h: &Dictionary,
    opts: &AlternationOptions,
) -> Result<PatchVec> {
    let one = AlternationOptions { rounds: 1, ..*opts };
    super_resolve_patch(y1, aux_patches, bank, d_h, &one).map(|(p, _)| p)
}

/// Target-only reconstruction: lasso against `D^l`, then `D^h alpha`.
pub fn single_frame_patch(
    y1: &PatchVec,
    bank: &BaseDictionaryBank,
    d_h: &Dictionary,
    eta: f64,
    opts: &LassoOptions,
) -> Result<(PatchVec, SparseCode)> {
    let mean = y1.mean();
    let code = init_alpha(&y1.offset(-mean), bank.target_dict(), eta, opts)?;
    Ok((hr_patch(d_h, &code.coeffs, mean, bank.hr_side())?, code))
}
