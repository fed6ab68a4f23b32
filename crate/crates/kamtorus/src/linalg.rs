//! Small dense linear-algebra helpers shared by the geometric and certificate code.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use thiserror::Error;

/// Largest condition number accepted by [`checked_inverse`].
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular")]
    Singular,
    #[error("condition estimate {0:.3e} exceeds the accepted limit")]
    IllConditioned(f64),
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
}

/// Max-row-sum norm `|M| = max_i Σ_j |M_ij|`; equals the max norm on column vectors.
pub fn row_sum_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Max-column-sum norm, i.e. `|M^⊤|`.
pub fn col_sum_norm(m: &DMatrix<f64>) -> f64 {
    row_sum_norm(&m.transpose())
}

/// Max-row-sum norm of a complex matrix.
pub fn row_sum_norm_c(m: &DMatrix<Complex64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Norm of a tensor `T_{ijk}` stored as `slices[k] = T_{··k}`, seen as a map `v ↦ Σ_k T_{··k} v_k`
/// into matrices measured with the row-sum norm: `max_i Σ_{j,k} |T_{ijk}|`.
pub fn tensor_norm_c(slices: &[DMatrix<Complex64>]) -> f64 {
    if slices.is_empty() {
        return 0.0;
    }
    let rows = slices[0].nrows();
    (0..rows)
        .map(|i| slices.iter().map(|s| s.row(i).iter().map(|x| x.norm()).sum::<f64>()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Same as [`tensor_norm_c`] for the transposed matrices: `max_j Σ_{i,k} |T_{ijk}|`.
pub fn tensor_norm_transpose_c(slices: &[DMatrix<Complex64>]) -> f64 {
    let t: Vec<DMatrix<Complex64>> = slices.iter().map(|s| s.transpose()).collect();
    tensor_norm_c(&t)
}

/// Inverse by LU with partial pivoting, one step of iterative refinement and a
/// 1-norm condition check against [`MAX_CONDITION`].
pub fn checked_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare(m.nrows(), m.ncols()));
    }
    let n = m.nrows();
    let inv = m.clone().lu().try_inverse().ok_or(LinalgError::Singular)?;
    let residual = DMatrix::identity(n, n) - m * &inv;
    let refined = &inv + &inv * residual;
    let cond = col_sum_norm(m) * col_sum_norm(&refined);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(LinalgError::IllConditioned(cond));
    }
    Ok(refined)
}

/// The standard symplectic matrix `Ω₀ = [[0, −I], [I, 0]]` of size `2n`.
pub fn omega0(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = -1.0;
        m[(n + i, i)] = 1.0;
    }
    m
}

/// Generic version of [`omega0`] for any field.
pub fn omega0_in<T: ComplexField>(n: usize) -> DMatrix<T> {
    let mut m = DMatrix::from_element(2 * n, 2 * n, T::zero());
    for i in 0..n {
        m[(i, n + i)] = -T::one();
        m[(n + i, i)] = T::one();
    }
    m
}

/// Real parts of a complex matrix.
pub fn re(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|x| x.re)
}

/// Complex copy of a real matrix.
pub fn cx(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Symmetric part `(M + M^⊤)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_a_small_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 3.0, 0.5]);
        assert_eq!(row_sum_norm(&m), 3.5);
        assert_eq!(col_sum_norm(&m), 4.0);
    }

    #[test]
    fn inverse_with_refinement() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let inv = checked_inverse(&m).unwrap();
        assert!((m * inv - DMatrix::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn near_singular_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-14]);
        assert!(checked_inverse(&m).is_err());
        assert_eq!(checked_inverse(&DMatrix::zeros(2, 2)), Err(LinalgError::Singular));
    }

    #[test]
    fn omega0_is_antisymmetric_and_squares_to_minus_identity() {
        let o = omega0(3);
        assert_eq!(o.transpose(), -&o);
        assert_eq!(&o * &o, -DMatrix::<f64>::identity(6, 6));
    }
}
