use crate::error::{Error, Result};

/// A dictionary of `n_atoms` column vectors of length `atom_dim`, stored
/// column-major so each atom is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atom_dim: usize,
    n_atoms: usize,
    atoms: Vec<f64>,
}

impl Dictionary {
    pub fn new(atom_dim: usize, n_atoms: usize, atoms: Vec<f64>) -> Result<Self> {
        if atom_dim == 0 || n_atoms == 0 {
            return Err(Error::Dimension("dictionary must have atoms of positive length".into()));
        }
        if atoms.len() != atom_dim * n_atoms {
            return Err(Error::Dimension(format!(
                "expected {} entries for {atom_dim}x{n_atoms}, got {}",
                atom_dim * n_atoms,
                atoms.len()
            )));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("dictionary contains a non-finite entry".into()));
        }
        Ok(Self {
            atom_dim,
            n_atoms,
            atoms,
        })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let dim = columns.first().map(Vec::len).unwrap_or(0);
        if columns.iter().any(|c| c.len() != dim) {
            return Err(Error::Dimension("atoms differ in length".into()));
        }
        Self::new(dim, columns.len(), columns.concat())
    }

    pub fn zeros(atom_dim: usize, n_atoms: usize) -> Self {
        Self {
            atom_dim,
            n_atoms,
            atoms: vec![0.0; atom_dim * n_atoms],
        }
    }

    #[inline]
    pub fn atom_dim(&self) -> usize {
        self.atom_dim
    }

    #[inline]
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    #[inline]
    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.atom_dim..(j + 1) * self.atom_dim]
    }

    #[inline]
    pub fn atom_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.atoms[j * self.atom_dim..(j + 1) * self.atom_dim]
    }

    /// Column-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.atoms
    }

    #[inline]
    pub fn get(&self, row: usize, atom: usize) -> f64 {
        self.atoms[atom * self.atom_dim + row]
    }

    /// `D * coeffs`.
    pub fn mul_vec(&self, coeffs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.n_atoms);
        let mut out = vec![0.0; self.atom_dim];
        for (j, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                axpy(c, self.atom(j), &mut out);
            }
        }
        out
    }

    /// `D^T v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.atom_dim);
        (0..self.n_atoms).map(|j| dot(self.atom(j), v)).collect()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.n_atoms).map(|j| dot(self.atom(j), self.atom(j)).sqrt()).collect()
    }

    /// Scales every non-zero column to unit ℓ² norm; returns the old norms.
    pub fn normalize_columns(&mut self) -> Vec<f64> {
        let norms = self.column_norms();
        for (j, &n) in norms.iter().enumerate() {
            if n > 0.0 {
                self.atom_mut(j).iter_mut().for_each(|v| *v /= n);
            }
        }
        norms
    }

    /// Stacks dictionaries with equal atom counts on top of each other.
    pub fn vstack(parts: &[&Dictionary]) -> Result<Self> {
        let n_atoms = parts.first().map(|d| d.n_atoms).unwrap_or(0);
        if parts.iter().any(|d| d.n_atoms != n_atoms) {
            return Err(Error::Dimension("stacked dictionaries differ in atom count".into()));
        }
        let atom_dim: usize = parts.iter().map(|d| d.atom_dim).sum();
        let mut atoms = Vec::with_capacity(atom_dim * n_atoms);
        for j in 0..n_atoms {
            for d in parts {
                atoms.extend_from_slice(d.atom(j));
            }
        }
        Self::new(atom_dim, n_atoms, atoms)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Largest absolute cosine between two distinct atoms.
pub fn mutual_coherence(dict: &Dictionary) -> Result<f64> {
    if dict.n_atoms() < 2 {
        return Err(Error::Parameter("coherence needs at least two atoms".into()));
    }
    let norms = dict.column_norms();
    let mut best: f64 = 0.0;
    for j in 0..dict.n_atoms() {
        for k in j + 1..dict.n_atoms() {
            let denom = norms[j] * norms[k];
            if denom > 0.0 {
                best = best.max((dot(dict.atom(j), dict.atom(k)) / denom).abs());
            }
        }
    }
    Ok(best.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn coherence_of_orthonormal_pair_is_zero() {
        let d = Dictionary::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(mutual_coherence(&d).unwrap(), 0.0);
    }

    #[test]
    fn coherence_of_duplicate_is_one() {
        let d = Dictionary::from_columns(&[vec![0.3, 0.4, 1.0], vec![0.3, 0.4, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        assert!((mutual_coherence(&d).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coherence_matches_pairwise_bruteforce() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let cols: Vec<Vec<f64>> = (0..8).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let d = Dictionary::from_columns(&cols).unwrap();
        let mut oracle: f64 = 0.0;
        for (i, a) in cols.iter().enumerate() {
            for (j, b) in cols.iter().enumerate() {
                if i != j {
                    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let c = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
                    oracle = oracle.max(c.abs());
                }
            }
        }
        let got = mutual_coherence(&d).unwrap();
        assert!((got - oracle).abs() < 1e-14);
        assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn coherence_needs_two_atoms() {
        let d = Dictionary::from_columns(&[vec![1.0, 0.0]]).unwrap();
        assert!(mutual_coherence(&d).is_err());
    }

    #[test]
    fn products_and_stacking() {
        let d = Dictionary::from_columns(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(d.mul_vec(&[1.0, 0.0, -1.0]), vec![-4.0, -4.0]);
        assert_eq!(d.tr_mul_vec(&[1.0, 1.0]), vec![3.0, 7.0, 11.0]);
        let e = Dictionary::from_columns(&[vec![9.0], vec![8.0], vec![7.0]]).unwrap();
        let s = Dictionary::vstack(&[&d, &e]).unwrap();
        assert_eq!(s.atom(1), &[3.0, 4.0, 8.0]);
        assert!(Dictionary::new(2, 2, vec![0.0; 3]).is_err());
    }
}
