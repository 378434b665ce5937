//! Dictionary learning by alternating lasso coding with a least-squares
//! (MOD) dictionary update and column renormalisation.
//!
//! A MOD step followed by renormalisation can raise the penalised objective
//! (renormalising inflates the rescaled codes). Each candidate dictionary is
//! therefore accepted only when the re-coded objective does not exceed the
//! previous one; otherwise the step is damped towards the current dictionary.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dictionary::{axpy, Dictionary};
use super::lasso::{sparse_code_warm, LassoOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOptions {
    pub n_atoms: usize,
    pub eta: f64,
    pub n_iters: usize,
    pub seed: u64,
    pub lasso: LassoOptions,
    /// Damping halvings tried before a rejected update is dropped.
    pub max_damping: usize,
}

impl Default for LearnOptions {
    fn default() -> Self {
        Self {
            n_atoms: 256,
            eta: 0.1,
            n_iters: 20,
            seed: 0,
            lasso: LassoOptions::default(),
            max_damping: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnedDictionary {
    pub dictionary: Dictionary,
    /// Training objective `sum ||y - D a||^2 + eta ||a||_1`, initial value first.
    pub objective_history: Vec<f64>,
    /// Outer iterations whose update was damped or dropped.
    pub damped_steps: usize,
}

fn code_all(patches: &[Vec<f64>], dict: &Dictionary, eta: f64, opts: &LassoOptions, init: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64)> {
    let codes: Vec<_> = patches
        .par_iter()
        .zip(init.par_iter())
        .map(|(y, a0)| sparse_code_warm(y, dict, eta, opts, a0))
        .collect::<Result<_>>()?;
    let total = codes.iter().map(|c| c.objective).sum();
    Ok((codes.into_iter().map(|c| c.coeffs).collect(), total))
}

/// Closed-form least-squares dictionary for fixed codes, `Y A^T (A A^T)^-1`,
/// followed by renormalisation of every column to unit norm. Atoms unused by
/// every code keep their current value. Returns the new dictionary and the
/// codes rescaled so that `D a` is unchanged.
pub fn mod_update(patches: &[Vec<f64>], codes: &[Vec<f64>], current: &Dictionary) -> Result<(Dictionary, Vec<Vec<f64>>)> {
    let k = current.n_atoms();
    let dim = current.atom_dim();
    if patches.len() != codes.len() {
        return Err(Error::Dimension("patch and code counts differ".into()));
    }
    let used: Vec<usize> = (0..k).filter(|&j| codes.iter().any(|a| a[j] != 0.0)).collect();
    let m = used.len();
    let mut dict = current.clone();
    if m > 0 {
        let slot: Vec<Option<usize>> = {
            let mut s = vec![None; k];
            for (i, &j) in used.iter().enumerate() {
                s[j] = Some(i);
            }
            s
        };
        let mut gram = DMatrix::<f64>::zeros(m, m);
        let mut cross = DMatrix::<f64>::zeros(m, dim);
        for (y, a) in patches.iter().zip(codes) {
            let nz: Vec<(usize, f64)> = a
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, &v)| (slot[j].expect("used atom"), v))
                .collect();
            for &(i, vi) in &nz {
                for &(l, vl) in &nz {
                    gram[(i, l)] += vi * vl;
                }
                for (d, &yd) in y.iter().enumerate() {
                    cross[(i, d)] += vi * yd;
                }
            }
        }
        let solved = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&cross),
            None => {
                let ridge = 1e-12 * gram.trace().max(1e-300) / m as f64;
                let reg = &gram + DMatrix::<f64>::identity(m, m) * ridge;
                reg.cholesky()
                    .ok_or_else(|| Error::Numeric("dictionary update is singular".into()))?
                    .solve(&cross)
            }
        };
        for (i, &j) in used.iter().enumerate() {
            let row = solved.row(i);
            dict.atom_mut(j).iter_mut().zip(row.iter()).for_each(|(d, &v)| *d = v);
        }
    }
    let norms = dict.normalize_columns();
    let rescaled = codes
        .iter()
        .map(|a| a.iter().zip(&norms).map(|(&v, &n)| if n > 0.0 { v * n } else { v }).collect())
        .collect();
    Ok((dict, rescaled))
}

fn blend(current: &Dictionary, target: &Dictionary, t: f64) -> Dictionary {
    let mut out = current.clone();
    for j in 0..out.n_atoms() {
        let col = out.atom_mut(j);
        col.iter_mut().for_each(|v| *v *= 1.0 - t);
        axpy(t, target.atom(j), col);
    }
    out.normalize_columns();
    out
}

/// Learns a unit-norm dictionary from equally sized training vectors.
pub fn learn_dictionary(patches: &[Vec<f64>], opts: &LearnOptions) -> Result<LearnedDictionary> {
    let k = opts.n_atoms;
    if k == 0 || patches.len() < k {
        return Err(Error::Parameter(format!(
            "need at least {k} training patches, got {}",
            patches.len()
        )));
    }
    let dim = patches[0].len();
    if dim == 0 || patches.iter().any(|p| p.len() != dim) {
        return Err(Error::Dimension("training patches differ in length".into()));
    }

    // seeded choice of k distinct non-zero patches
    let mut order: Vec<usize> = (0..patches.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));
    let mut columns = Vec::with_capacity(k);
    for &i in &order {
        let norm = DVector::from_column_slice(&patches[i]).norm();
        if norm > 1e-12 {
            columns.push(patches[i].iter().map(|v| v / norm).collect::<Vec<_>>());
            if columns.len() == k {
                break;
            }
        }
    }
    if columns.len() < k {
        return Err(Error::Parameter(format!(
            "only {} non-zero training patches for {k} atoms",
            columns.len()
        )));
    }
    let mut dict = Dictionary::from_columns(&columns)?;
    let zeros = vec![vec![0.0; k]; patches.len()];
    let (mut codes, mut objective) = code_all(patches, &dict, opts.eta, &opts.lasso, &zeros)?;
    let mut history = vec![objective];
    let mut damped_steps = 0;

    for iter in 0..opts.n_iters {
        let (candidate, rescaled) = mod_update(patches, &codes, &dict)?;
        let (new_codes, new_obj) = code_all(patches, &candidate, opts.eta, &opts.lasso, &rescaled)?;
        if new_obj <= objective {
            dict = candidate;
            codes = new_codes;
            objective = new_obj;
        } else {
            damped_steps += 1;
            let mut t = 0.5;
            let mut accepted = false;
            for _ in 0..opts.max_damping {
                let trial = blend(&dict, &candidate, t);
                let (trial_codes, trial_obj) = code_all(patches, &trial, opts.eta, &opts.lasso, &codes)?;
                if trial_obj <= objective {
                    dict = trial;
                    codes = trial_codes;
                    objective = trial_obj;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                log::debug!("dictionary iteration {iter}: update dropped");
            }
        }
        log::info!("dictionary iteration {}: objective {objective:.6}", iter + 1);
        history.push(objective);
    }
    Ok(LearnedDictionary {
        dictionary: dict,
        objective_history: history,
        damped_steps,
    })
}
