//! Independent reference solvers for the integration tests.

#![allow(dead_code)]

use dssr::sparse::Dictionary;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn random_dictionary(rng: &mut impl Rng, rows: usize, atoms: usize) -> Dictionary {
    let mut d = Dictionary::new(rows, atoms, (0..rows * atoms).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    d.normalize_columns();
    d
}

/// Global lasso minimum by enumerating every support and sign pattern.
///
/// For a fixed sign vector `s` on support `S` the objective is a smooth
/// quadratic whose stationary point is `G^-1 (D_S^T y - eta s / 2)` with
/// `G = D_S^T D_S`. The optimum is one of these points whose signs agree with
/// `s`, provided the optimal support has a nonsingular Gram matrix, which
/// holds almost surely for random instances. The empty support is included.
pub fn lasso_bruteforce(y: &[f64], dict: &Dictionary, eta: f64) -> f64 {
    let k = dict.n_atoms();
    assert!(k <= 16, "enumeration is exponential in the atom count");
    let q = dict.atom_dim();
    let yv = DVector::from_column_slice(y);
    let y_sq = yv.norm_squared();
    let full = DMatrix::from_fn(q, k, |r, c| dict.get(r, c));
    let mut best = y_sq;
    let mut a = vec![0.0; k];
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|j| mask >> j & 1 == 1).collect();
        let n = support.len();
        if n > q {
            continue;
        }
        let ds = full.select_columns(&support);
        let gram = ds.transpose() * &ds;
        if gram.clone().symmetric_eigenvalues().min() < 1e-10 {
            continue;
        }
        let inv = gram.clone().try_inverse().expect("nonsingular Gram");
        let rhs = ds.transpose() * &yv;
        let u = &inv * &rhs;
        for signs in 0u32..(1 << n) {
            let sign = |i: usize| if signs >> i & 1 == 1 { -1.0 } else { 1.0 };
            let mut ok = true;
            for i in 0..n {
                let mut v = u[i];
                for j in 0..n {
                    v -= 0.5 * eta * inv[(i, j)] * sign(j);
                }
                if v * sign(i) <= 0.0 {
                    ok = false;
                    break;
                }
                a[i] = v;
            }
            if !ok {
                continue;
            }
            // ||y - D a||^2 = y'y - 2 a'D'y + a'G a
            let mut f = y_sq;
            for i in 0..n {
                f += eta * a[i].abs() - 2.0 * a[i] * rhs[i];
                for j in 0..n {
                    f += a[i] * gram[(i, j)] * a[j];
                }
            }
            best = best.min(f);
        }
    }
    best
}

/// `min ||y - C v||^2` over `{v >= 0, sum v <= 1}` by grid search at step
/// `h` over all but the last coordinate; the last one is minimised exactly
/// along its feasible interval.
pub fn capped_simplex_grid(columns: &[Vec<f64>], y: &[f64], h: f64) -> f64 {
    let n = columns.len();
    assert!((1..=3).contains(&n), "grid oracle handles one to three variables");
    let steps = (1.0 / h).round() as usize;
    let last = &columns[n - 1];
    let last_sq: f64 = last.iter().map(|v| v * v).sum();
    let eval = |fixed: &[f64]| -> f64 {
        let used: f64 = fixed.iter().sum();
        if used > 1.0 + 1e-12 {
            return f64::INFINITY;
        }
        let mut r: Vec<f64> = y.to_vec();
        for (c, &v) in columns.iter().zip(fixed) {
            for (ri, ci) in r.iter_mut().zip(c) {
                *ri -= v * ci;
            }
        }
        let t = if last_sq > 0.0 {
            (r.iter().zip(last).map(|(a, b)| a * b).sum::<f64>() / last_sq).clamp(0.0, (1.0 - used).max(0.0))
        } else {
            0.0
        };
        r.iter().zip(last).map(|(a, b)| (a - t * b).powi(2)).sum()
    };
    let mut best = f64::INFINITY;
    match n {
        1 => best = eval(&[]),
        2 => {
            for i in 0..=steps {
                best = best.min(eval(&[i as f64 * h]));
            }
        }
        _ => {
            for i in 0..=steps {
                for j in 0..=steps - i {
                    best = best.min(eval(&[i as f64 * h, j as f64 * h]));
                }
            }
        }
    }
    best
}

pub fn qp_objective(columns: &[Vec<f64>], y: &[f64], v: &[f64]) -> f64 {
    let mut r = y.to_vec();
    for (c, &w) in columns.iter().zip(v) {
        for (ri, ci) in r.iter_mut().zip(c) {
            *ri -= w * ci;
        }
    }
    r.iter().map(|x| x * x).sum()
}
