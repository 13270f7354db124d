//! Direct solver for sparse symmetric positive definite systems.
//!
//! Reverse Cuthill-McKee reordering followed by an envelope (skyline)
//! Cholesky factorization. The structured meshes used here give narrow
//! envelopes after reordering, so fill stays small.

use std::collections::VecDeque;

use crate::error::{FslError, Result};
use crate::sparse::CsrMatrix;

/// Reverse Cuthill-McKee ordering of the symmetric sparsity pattern of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();

    let bfs_last = |start: usize, visited: &[bool]| -> (usize, usize) {
        let mut level = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        level[start] = 0;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in &adjacency[v] {
                if !visited[w] && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (last, level[last])
    };

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        // pseudo-peripheral start node
        let (mut start, mut ecc) = bfs_last(seed, &visited);
        for _ in 0..4 {
            let (far, e) = bfs_last(start, &visited);
            if e <= ecc {
                break;
            }
            start = far;
            ecc = e;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adjacency[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope Cholesky factor `P A Pᵀ = L Lᵀ` with one step of iterative
/// refinement in [`SparseCholesky::solve`].
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    matrix: CsrMatrix,
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    factor: Vec<f64>,
}

impl SparseCholesky {
    pub fn new(matrix: &CsrMatrix) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return Err(FslError::InvalidArgument(format!(
                "Cholesky needs a square matrix, got {}x{}",
                n,
                matrix.ncols()
            )));
        }
        let perm = reverse_cuthill_mckee(matrix);
        let mut inv_perm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for old_i in 0..n {
            let i = inv_perm[old_i];
            for (old_j, _) in matrix.row(old_i) {
                let j = inv_perm[old_j];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut offsets = vec![0; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + (i - first[i] + 1);
        }
        let mut factor = vec![0.0; offsets[n]];
        for old_i in 0..n {
            let i = inv_perm[old_i];
            for (old_j, v) in matrix.row(old_i) {
                let j = inv_perm[old_j];
                if j <= i {
                    factor[offsets[i] + (j - first[i])] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let row_i = offsets[i];
            let diag_orig = factor[row_i + (i - fi)];
            for j in fi..i {
                let fj = first[j];
                let row_j = offsets[j];
                let k0 = fi.max(fj);
                let mut s = factor[row_i + (j - fi)];
                for k in k0..j {
                    s -= factor[row_i + (k - fi)] * factor[row_j + (k - fj)];
                }
                factor[row_i + (j - fi)] = s / factor[row_j + (j - fj)];
            }
            let mut d = diag_orig;
            for k in fi..i {
                let l = factor[row_i + (k - fi)];
                d -= l * l;
            }
            if !(d > 1e-14 * diag_orig.abs()) || !d.is_finite() {
                return Err(FslError::NotPositiveDefinite {
                    row: perm[i],
                    pivot: d,
                });
            }
            factor[row_i + (i - fi)] = d.sqrt();
        }

        Ok(Self {
            matrix: matrix.clone(),
            perm,
            inv_perm,
            first,
            offsets,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn envelope_size(&self) -> usize {
        self.factor.len()
    }

    fn solve_factored(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = self.offsets[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.factor[row + (k - fi)] * y[k];
            }
            y[i] = s / self.factor[row + (i - fi)];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = self.offsets[i];
            y[i] /= self.factor[row + (i - fi)];
            let xi = y[i];
            for k in fi..i {
                y[k] -= self.factor[row + (k - fi)] * xi;
            }
        }
        (0..n).map(|old| y[self.inv_perm[old]]).collect()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim(), "right-hand side length mismatch");
        let mut x = self.solve_factored(b);
        let ax = self.matrix.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = self.solve_factored(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        x
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}

/// Dense symmetric positive definite solve, used for Schur complements.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    matrix: nalgebra::DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl DenseCholesky {
    pub fn new(matrix: nalgebra::DMatrix<f64>) -> Result<Self> {
        let chol = nalgebra::Cholesky::new(matrix.clone()).ok_or_else(|| {
            FslError::SolverFailure("dense matrix is not positive definite".into())
        })?;
        Ok(Self { matrix, chol })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = nalgebra::DVector::from_column_slice(b);
        let mut x = self.chol.solve(&rhs);
        let r = &rhs - &self.matrix * &x;
        x += self.chol.solve(&r);
        x.as_slice().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, 2.0);
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
                t.push(i + 1, i, -1.0);
            }
        }
        t.build()
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplacian_1d(17);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..17).collect::<Vec<_>>());
    }

    #[test]
    fn solves_tridiagonal() {
        let a = laplacian_1d(50);
        let chol = SparseCholesky::new(&a).unwrap();
        assert!(chol.envelope_size() <= 2 * 50);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x_true);
        let x = chol.solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 1, 2.0);
        t.push(1, 0, 2.0);
        t.push(1, 1, 1.0);
        assert!(matches!(
            SparseCholesky::new(&t.build()),
            Err(FslError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn disconnected_pattern() {
        let mut t = TripletBuilder::new(4, 4);
        for i in 0..4 {
            t.push(i, i, 1.0 + i as f64);
        }
        t.push(0, 3, 0.5);
        t.push(3, 0, 0.5);
        let a = t.build();
        let x = SparseCholesky::new(&a).unwrap().solve(&[1.0, 2.0, 3.0, 4.0]);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }
}
