//! Least squares over the capped simplex `{v >= 0, sum(v) <= 1}`.
//!
//! Each iteration takes one projected-gradient step with step `1/L`, then
//! tries a Newton step restricted to the face the step landed on, cut back to
//! stay feasible. Both moves are accepted only when they lower the objective,
//! so the iterates are monotone from the starting point.

use nalgebra::{DMatrix, DVector};

use crate::sparse::dictionary::dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    /// Stop once `||v - P(v - grad f(v))||_inf` falls to this value.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub v: Vec<f64>,
    pub objective: f64,
    pub pg_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection onto `{v >= 0, sum(v) <= 1}`.
pub fn project_capped_simplex(v: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= 1.0 {
        return clipped;
    }
    // onto the simplex {sum = 1}: sort-based threshold
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// `||y - M v||^2` with the quadratic form precomputed.
struct Quadratic {
    h: DMatrix<f64>,
    c: DVector<f64>,
    yy: f64,
}

impl Quadratic {
    fn new(columns: &[Vec<f64>], y: &[f64]) -> Self {
        let n = columns.len();
        let h = DMatrix::from_fn(n, n, |i, j| dot(&columns[i], &columns[j]));
        let c = DVector::from_fn(n, |i, _| dot(&columns[i], y));
        Self { h, c, yy: dot(y, y) }
    }

    fn value(&self, v: &DVector<f64>) -> f64 {
        let hv = &self.h * v;
        (v.dot(&hv) - 2.0 * self.c.dot(v) + self.yy).max(0.0)
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        (&self.h * v - &self.c) * 2.0
    }
}

fn projected_gradient_norm(v: &DVector<f64>, g: &DVector<f64>) -> f64 {
    let trial: Vec<f64> = v.iter().zip(g.iter()).map(|(a, b)| a - b).collect();
    let p = project_capped_simplex(&trial);
    v.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Minimises `||y - M v||^2` over the capped simplex, where `M` has the given
/// columns, starting from the feasible point `init`.
pub fn solve_capped_simplex_ls(columns: &[Vec<f64>], y: &[f64], init: &[f64], opts: &QpOptions) -> QpSolution {
    let n = columns.len();
    assert_eq!(init.len(), n, "init length must match the column count");
    let q = Quadratic::new(columns, y);
    let lipschitz = 2.0 * q.h.clone().symmetric_eigen().eigenvalues.max().max(0.0);
    let mut v = DVector::from_column_slice(init);
    let mut f = q.value(&v);
    let mut iterations = 0;
    let mut g = q.gradient(&v);
    let mut pg = projected_gradient_norm(&v, &g);

    while pg > opts.tol && iterations < opts.max_iter && lipschitz > 0.0 {
        iterations += 1;
        let step: Vec<f64> = v.iter().zip(g.iter()).map(|(a, b)| a - b / lipschitz).collect();
        let cand = DVector::from_vec(project_capped_simplex(&step));
        let fc = q.value(&cand);
        let mut moved = false;
        if fc < f {
            v = cand;
            f = fc;
            moved = true;
        }
        if let Some((cand, fc)) = face_newton(&q, &v, f) {
            v = cand;
            f = fc;
            moved = true;
        }
        g = q.gradient(&v);
        pg = projected_gradient_norm(&v, &g);
        if !moved {
            // no descent left at working precision
            break;
        }
    }
    QpSolution {
        objective: f,
        converged: pg <= opts.tol || lipschitz == 0.0,
        pg_norm: if lipschitz == 0.0 { 0.0 } else { pg },
        iterations,
        v: v.iter().copied().collect(),
    }
}

/// Newton step on the face of `v` (free coordinates are the positive ones,
/// with the sum constraint kept if it is tight), followed by a ratio test.
fn face_newton(q: &Quadratic, v: &DVector<f64>, f: f64) -> Option<(DVector<f64>, f64)> {
    let free: Vec<usize> = (0..v.len()).filter(|&j| v[j] > 0.0).collect();
    if free.is_empty() {
        return None;
    }
    let m = free.len();
    let tight = v.sum() >= 1.0 - 1e-12;
    let g = q.gradient(v);
    let dim = if tight { m + 1 } else { m };
    let mut kkt = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            kkt[(a, b)] = 2.0 * q.h[(i, j)];
        }
        rhs[a] = -g[i];
    }
    if tight {
        for a in 0..m {
            kkt[(a, m)] = 1.0;
            kkt[(m, a)] = 1.0;
        }
    }
    let scale = kkt.amax().max(f64::MIN_POSITIVE);
    let sol = kkt.svd(true, true).solve(&rhs, 1e-12 * scale).ok()?;
    let mut d = DVector::zeros(v.len());
    for (a, &i) in free.iter().enumerate() {
        d[i] = sol[a];
    }
    if tight {
        // keep the step on the hyperplane exactly
        let drift = d.sum() / m as f64;
        for &i in &free {
            d[i] -= drift;
        }
    }
    let mut t: f64 = 1.0;
    for &i in &free {
        if d[i] < 0.0 {
            t = t.min(-v[i] / d[i]);
        }
    }
    let ds = d.sum();
    if !tight && ds > 0.0 {
        t = t.min((1.0 - v.sum()) / ds);
    }
    if !(t > 0.0) {
        return None;
    }
    let mut cand = v + d * t;
    for x in cand.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s = cand.sum();
    if s > 1.0 {
        cand /= s;
    }
    let fc = q.value(&cand);
    (fc < f).then_some((cand, fc))
}
