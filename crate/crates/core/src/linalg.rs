//! Dense linear-algebra helpers shared by the estimators.
//!
//! Everything here works on `nalgebra` dynamic matrices. Complex matrices are
//! used for operators on the Hilbert space, real matrices for coefficient-space
//! objects (design matrices, generators, transition matrices).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

/// Largest entrywise deviation of `m` from its conjugate transpose.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn skew_residual(m: &RMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] + m[(j, i)]).abs());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Columns of the returned matrix are the matching
/// eigenvectors.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Eigenvalues of a real symmetric matrix, descending.
pub fn symmetric_eigenvalues(m: &RMatrix) -> Vec<f64> {
    let sym = (m + m.transpose()).scale(0.5);
    let mut v: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn singular_values(m: &RMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn numerical_rank(m: &RMatrix, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&top) if top > 0.0 => sv.iter().filter(|&&s| s > rel_tol * top).count(),
        _ => 0,
    }
}

pub fn spectral_norm(m: &RMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Least-squares solution of `a x = b` through a Householder QR factorization
/// of `a`. The caller is responsible for checking that `a` has full column
/// rank.
pub fn lstsq_qr(a: &RMatrix, b: &RVector) -> Result<RVector> {
    if a.nrows() != b.len() {
        return Err(Error::shape(
            format!("rhs of length {}", a.nrows()),
            format!("length {}", b.len()),
        ));
    }
    if a.nrows() < a.ncols() {
        return Err(Error::shape(
            format!("at least {} rows", a.ncols()),
            format!("{} rows", a.nrows()),
        ));
    }
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * b;
    let r = qr.r();
    r.solve_upper_triangular(&qtb).ok_or_else(|| {
        Error::InvalidArgument("triangular factor is singular".to_string())
    })
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(m: &RMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring around a degree-13 Padé
/// approximant.
pub fn expm(a: &RMatrix) -> RMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return RMatrix::zeros(0, 0);
    }
    let norm = one_norm(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings));

    let b = &PADE13;
    let ident = RMatrix::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (a6.scale(b[13]) + a4.scale(b[11]) + a2.scale(b[9]))
        + a6.scale(b[7])
        + a4.scale(b[5])
        + a2.scale(b[3])
        + ident.scale(b[1]);
    let u = &scaled * u_inner;
    let v = &a6 * (a6.scale(b[12]) + a4.scale(b[10]) + a2.scale(b[8]))
        + a6.scale(b[6])
        + a4.scale(b[4])
        + a2.scale(b[2])
        + ident.scale(b[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut result = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_zero_is_identity() {
        let z = RMatrix::zeros(4, 4);
        assert_eq!(expm(&z), RMatrix::identity(4, 4));
    }

    #[test]
    fn expm_diagonal() {
        let a = RMatrix::from_diagonal(&RVector::from_vec(vec![1.0, -2.0, 0.5]));
        let e = expm(&a);
        for (i, x) in [1.0f64, -2.0, 0.5].iter().enumerate() {
            assert!((e[(i, i)] - x.exp()).abs() < 1e-13 * x.exp().max(1.0));
        }
    }

    #[test]
    fn expm_large_norm_rotation() {
        // 2x2 rotation generator with angle 40 rad forces several squarings
        let theta = 40.0f64;
        let a = RMatrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
        let e = expm(&a);
        let want = RMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        assert!((e - want).norm() < 1e-12);
    }

    #[test]
    fn expm_matches_nalgebra() {
        let a = RMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 / 7.0 - 0.6);
        let ours = expm(&a);
        let theirs = a.clone().exp();
        assert!((ours - &theirs).norm() / theirs.norm() < 1e-12);
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = RMatrix::from_fn(7, 3, |i, j| ((i + 1) as f64).powi(j as i32));
        let x = RVector::from_vec(vec![0.3, -1.0, 2.0]);
        let b = &a * &x;
        let got = lstsq_qr(&a, &b).unwrap();
        assert!((got - x).norm() < 1e-10);
    }

    #[test]
    fn eigenvalues_sorted_descending() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let v = hermitian_eigenvalues(&m);
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn rank_of_rank_one_matrix() {
        let m = RMatrix::from_fn(4, 3, |i, j| (i + 1) as f64 * (j + 2) as f64);
        assert_eq!(numerical_rank(&m, 1e-10), 1);
    }
}
