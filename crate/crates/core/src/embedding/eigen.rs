use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenpairs of `A f = λ B f`, ascending in `λ`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector for `values[i]`; columns are B-orthonormal.
    pub vectors: DMatrix<f64>,
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Ascending symmetric eigendecomposition.
pub(crate) fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Solves the symmetric-definite pencil by Cholesky reduction
/// `L⁻¹ A L⁻ᵀ y = λ y`, `f = L⁻ᵀ y`.
pub fn solve_generalized_symmetric_eig(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GeneralizedEigen> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if a.ncols() != n { a.ncols() } else { b.nrows() },
        });
    }
    let b = symmetrize(b);
    let (b_values, _) = sorted_symmetric_eigen(&b);
    let min = b_values.first().copied().unwrap_or(0.0);
    let max = b_values.last().copied().unwrap_or(0.0);
    if !(min > 1e-13 * max.abs()) || !(max > 0.0) {
        return Err(Error::NotPositiveDefinite { min_pivot: min });
    }
    let chol = b.cholesky().ok_or(Error::NotPositiveDefinite { min_pivot: min })?;
    let l = chol.l();
    // C = L⁻¹ A L⁻ᵀ
    let l_inv_a = l
        .solve_lower_triangular(&symmetrize(a))
        .ok_or(Error::NotPositiveDefinite { min_pivot: min })?;
    let c = l
        .solve_lower_triangular(&l_inv_a.transpose())
        .ok_or(Error::NotPositiveDefinite { min_pivot: min })?;
    let (values, y) = sorted_symmetric_eigen(&c);
    let vectors = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or(Error::NotPositiveDefinite { min_pivot: min })?;
    Ok(GeneralizedEigen { values, vectors })
}
