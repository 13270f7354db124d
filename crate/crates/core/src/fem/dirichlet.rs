//! Essential boundary conditions by symmetric elimination.

use crate::error::{invalid, Result};
use crate::linsolve::SparseCholesky;
use crate::sparse::CsrMatrix;

/// Prescribed values on a subset of the dofs of a space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DirichletSet {
    n: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl DirichletSet {
    /// Builds the set from `(dof, value)` pairs. Repeated dofs must carry the
    /// same value.
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut pairs: Vec<(usize, f64)> = pairs.into_iter().collect();
        pairs.sort_by_key(|p| p.0);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if i >= n {
                return Err(invalid(format!("Dirichlet dof {i} out of range 0..{n}")));
            }
            if !v.is_finite() {
                return Err(invalid(format!("non-finite Dirichlet value at dof {i}")));
            }
            if indices.last() == Some(&i) {
                let prev = *values.last().unwrap();
                if (prev - v).abs() > 1e-12 * prev.abs().max(v.abs()).max(1e-300) {
                    return Err(invalid(format!(
                        "conflicting Dirichlet values {prev} and {v} at dof {i}"
                    )));
                }
                continue;
            }
            indices.push(i);
            values.push(v);
        }
        Ok(Self { n, indices, values })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            ..Self::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Sorted constrained dofs.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }

    /// Full-length vector with the prescribed values and zeros elsewhere.
    pub fn lift(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            g[i] = v;
        }
        g
    }

    /// Overwrites the constrained entries of `x`.
    pub fn apply(&self, x: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            x[i] = v;
        }
    }

    /// Same constrained dofs, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.indices.len() {
            return Err(invalid("Dirichlet value count mismatch"));
        }
        Ok(Self {
            n: self.n,
            indices: self.indices.clone(),
            values,
        })
    }
}

/// Factor of `K` restricted to the free dofs of a fixed constrained set.
/// Dirichlet values may change between solves.
#[derive(Debug, Clone)]
pub struct ConstrainedSolver {
    matrix: CsrMatrix,
    constrained: Vec<usize>,
    free: Vec<usize>,
    factor: Option<SparseCholesky>,
}

impl ConstrainedSolver {
    pub fn new(matrix: &CsrMatrix, constrained: &[usize]) -> Result<Self> {
        let n = matrix.nrows();
        let mut mask = vec![false; n];
        for &i in constrained {
            if i >= n {
                return Err(invalid(format!("constrained dof {i} out of range 0..{n}")));
            }
            mask[i] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
        let factor = if free.is_empty() {
            None
        } else {
            Some(SparseCholesky::new(&matrix.submatrix(&free, &free))?)
        };
        let constrained = (0..n).filter(|&i| mask[i]).collect();
        Ok(Self {
            matrix: matrix.clone(),
            constrained,
            free,
            factor,
        })
    }

    pub fn for_set(matrix: &CsrMatrix, set: &DirichletSet) -> Result<Self> {
        Self::new(matrix, set.indices())
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn constrained(&self) -> &[usize] {
        &self.constrained
    }

    /// Solves `K x = b` on the free dofs with `x = g` on the constrained ones.
    /// Entries of `b` at constrained dofs are ignored.
    pub fn solve(&self, b: &[f64], set: &DirichletSet) -> Result<Vec<f64>> {
        if set.indices() != self.constrained.as_slice() {
            return Err(invalid("Dirichlet set does not match the factored constraint pattern"));
        }
        let g = set.lift();
        let mut x = g.clone();
        if let Some(f) = &self.factor {
            let kg = self.matrix.mul_vec(&g);
            let rhs: Vec<f64> = self.free.iter().map(|&i| b[i] - kg[i]).collect();
            let xf = f.solve(&rhs);
            for (&i, v) in self.free.iter().zip(xf) {
                x[i] = v;
            }
        }
        Ok(x)
    }
}
