//! Independent oracles and random generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qst_lre::linalg::{CMatrix, RMatrix, RVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Euclidean projection onto the probability simplex by trying every support
/// set and keeping the closest feasible candidate.
pub fn simplex_projection_exhaustive(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let shift = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; n];
        let mut feasible = true;
        for &i in &support {
            x[i] = v[i] - shift;
            if x[i] < -1e-14 {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let dist: f64 = x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, x));
        }
    }
    best.expect("some support is always feasible").1
}

pub fn random_complex<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = random_complex(d, d, rng);
    (&g + g.adjoint()).scale(0.5)
}

pub fn traceless(m: &CMatrix) -> CMatrix {
    let d = m.nrows();
    m - CMatrix::identity(d, d).scale(m.trace().re / d as f64)
}

pub fn random_real<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> RMatrix {
    RMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RVector {
    RVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Random orthogonal matrix with determinant 1, from the exponential of a
/// random skew matrix computed by nalgebra's own routine.
pub fn random_rotation<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> RMatrix {
    let g = random_real(n, n, rng);
    let skew = (&g - g.transpose()).scale(0.5 * scale);
    skew.exp()
}

pub fn spectral_norm(m: &RMatrix) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

pub fn pauli(x: f64, y: f64, z: f64) -> CMatrix {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    DMatrix::from_row_slice(2, 2, &[c(z, 0.0), c(x, -y), c(x, y), c(-z, 0.0)])
}
