//! Orthonormal Hermitian operator basis (normalized generalized Gell-Mann
//! matrices), su(d) structure constants, and conversions between operators
//! and real coefficient vectors.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_residual, CMatrix, RVector};

const HERMITIAN_TOL: f64 = 1e-10;
const IMAG_TOL: f64 = 1e-10;

/// Which slice of the basis a coefficient vector refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    /// All `d^2` coefficients, identity component last.
    Full,
    /// The `d^2 - 1` traceless coefficients only.
    Traceless,
}

/// Orthonormal basis `E_1..E_{d^2}` with `Tr(E_i E_j) = delta_ij`.
///
/// Ordering: symmetric off-diagonal pairs `(j, k)` with `j < k` in
/// lexicographic order, then the antisymmetric pairs in the same order, then
/// the `d - 1` diagonal elements, then `I / sqrt(d)`.
#[derive(Debug, Clone)]
pub struct BasisSet {
    dim: usize,
    elements: Vec<CMatrix>,
}

pub fn make_basis(dim: usize) -> Result<BasisSet> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let d = dim;
    let zero = Complex64::new(0.0, 0.0);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut elements = Vec::with_capacity(d * d);

    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = CMatrix::from_element(d, d, zero);
            m[(j, k)] = Complex64::new(r, 0.0);
            m[(k, j)] = Complex64::new(r, 0.0);
            elements.push(m);
        }
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = CMatrix::from_element(d, d, zero);
            m[(j, k)] = Complex64::new(0.0, -r);
            m[(k, j)] = Complex64::new(0.0, r);
            elements.push(m);
        }
    }
    for l in 1..d {
        let scale = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::from_element(d, d, zero);
        for i in 0..l {
            m[(i, i)] = Complex64::new(scale, 0.0);
        }
        m[(l, l)] = Complex64::new(-(l as f64) * scale, 0.0);
        elements.push(m);
    }
    let id = 1.0 / (d as f64).sqrt();
    elements.push(CMatrix::from_diagonal_element(d, d, Complex64::new(id, 0.0)));

    Ok(BasisSet { dim, elements })
}

/// `Tr(a b)` without forming the product.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

impl BasisSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of elements, `d^2`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &CMatrix {
        &self.elements[i]
    }

    pub fn traceless_len(&self) -> usize {
        self.elements.len() - 1
    }

    /// Largest deviation of the Gram matrix `Tr(E_i^dagger E_j)` from the identity.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.elements.iter().enumerate() {
            let a_dag = a.adjoint();
            for (j, b) in self.elements.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((trace_product(&a_dag, b) - want).norm());
            }
        }
        worst
    }

    fn check_operator(&self, op: &CMatrix) -> Result<()> {
        if op.nrows() != self.dim || op.ncols() != self.dim {
            return Err(Error::shape(
                format!("{0}x{0} operator", self.dim),
                format!("{}x{}", op.nrows(), op.ncols()),
            ));
        }
        let residual = hermiticity_residual(op);
        if residual > HERMITIAN_TOL {
            return Err(Error::NotHermitian { residual });
        }
        Ok(())
    }

    /// Coefficients `c_j = Tr(op E_j)`.
    pub fn expand(&self, op: &CMatrix, convention: Convention) -> Result<RVector> {
        self.check_operator(op)?;
        let count = match convention {
            Convention::Full => self.len(),
            Convention::Traceless => self.traceless_len(),
        };
        let mut out = RVector::zeros(count);
        for (j, e) in self.elements.iter().take(count).enumerate() {
            let c = trace_product(op, e);
            if c.im.abs() > IMAG_TOL {
                return Err(Error::ComplexCoefficient { imag: c.im });
            }
            out[j] = c.re;
        }
        Ok(out)
    }

    /// Linear combination of basis elements. A vector of length `d^2 - 1` is
    /// read as traceless coefficients with no identity component.
    pub fn reconstruct(&self, coefficients: &[f64]) -> Result<CMatrix> {
        if coefficients.len() != self.len() && coefficients.len() != self.traceless_len() {
            return Err(Error::shape(
                format!("{} or {} coefficients", self.len(), self.traceless_len()),
                coefficients.len(),
            ));
        }
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (c, e) in coefficients.iter().zip(&self.elements) {
            m += e.scale(*c);
        }
        Ok(m)
    }

    /// State reconstruction from a coherence vector; in the traceless
    /// convention the `I / d` part is implied.
    pub fn reconstruct_state(&self, v: &CoherenceVector) -> Result<CMatrix> {
        let mut m = self.reconstruct(v.entries.as_slice())?;
        if v.convention == Convention::Traceless {
            if v.entries.len() != self.traceless_len() {
                return Err(Error::shape(self.traceless_len(), v.entries.len()));
            }
            let id = Complex64::new(1.0 / self.dim as f64, 0.0);
            for i in 0..self.dim {
                m[(i, i)] += id;
            }
        } else if v.entries.len() != self.len() {
            return Err(Error::shape(self.len(), v.entries.len()));
        }
        Ok(m)
    }
}

/// Real coefficient vector of a state: `Theta` (length `d^2`) or the
/// coherence vector `x` (length `d^2 - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceVector {
    pub entries: RVector,
    pub convention: Convention,
}

impl CoherenceVector {
    pub fn full(entries: RVector) -> Self {
        CoherenceVector {
            entries,
            convention: Convention::Full,
        }
    }

    pub fn traceless(entries: RVector) -> Self {
        CoherenceVector {
            entries,
            convention: Convention::Traceless,
        }
    }

    pub fn of_state(rho: &CMatrix, basis: &BasisSet, convention: Convention) -> Result<Self> {
        Ok(CoherenceVector {
            entries: basis.expand(rho, convention)?,
            convention,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|x| x.is_finite())
    }

    /// Drop the identity coefficient of a full-convention vector.
    pub fn to_traceless(&self) -> Self {
        match self.convention {
            Convention::Traceless => self.clone(),
            Convention::Full => {
                let n = self.entries.len() - 1;
                CoherenceVector::traceless(self.entries.rows(0, n).into_owned())
            }
        }
    }
}

/// Structure constants of su(d) in the basis `{i E_j}`:
/// `[i E_j, i E_l] = sum_k omega[j][l][k] i E_k`.
#[derive(Debug, Clone)]
pub struct StructureTensor {
    dim: usize,
    n: usize,
    omega: Vec<f64>,
}

impl StructureTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Index range of each axis, `d^2 - 1`.
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, j: usize, l: usize, k: usize) -> f64 {
        self.omega[(j * self.n + l) * self.n + k]
    }

    /// `sum_{j,k} omega[m][j][k] omega[n][j][k]`, which equals `2 d delta_mn`.
    pub fn contraction(&self, m: usize, n: usize) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.n {
            for k in 0..self.n {
                acc += self.get(m, j, k) * self.get(n, j, k);
            }
        }
        acc
    }
}

pub fn structure_constants(basis: &BasisSet) -> StructureTensor {
    let n = basis.traceless_len();
    let e = &basis.elements[..n];
    let mut omega = vec![0.0; n * n * n];
    // omega_jlk = Tr((iE_k)^dagger [iE_j, iE_l]) = i Tr(E_k [E_j, E_l])
    for j in 0..n {
        for l in (j + 1)..n {
            let comm = &e[j] * &e[l] - &e[l] * &e[j];
            for (k, ek) in e.iter().enumerate() {
                let v = (Complex64::i() * trace_product(ek, &comm)).re;
                omega[(j * n + l) * n + k] = v;
                omega[(l * n + j) * n + k] = -v;
            }
        }
    }
    StructureTensor {
        dim: basis.dim,
        n,
        omega,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli() -> [CMatrix; 3] {
        [
            CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
            CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
            CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
        ]
    }

    #[test]
    fn qubit_basis_is_scaled_paulis() {
        let b = make_basis(2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (e, s) in b.elements().iter().zip(pauli().iter()) {
            assert!((e - s.scale(r)).norm() < 1e-15);
        }
        assert!((b.element(3) - CMatrix::identity(2, 2).scale(r)).norm() < 1e-15);
        // Tr(E_i E_j) = delta_ij over all 16 pairs, by direct products
        for i in 0..4 {
            for j in 0..4 {
                let t = (b.element(i) * b.element(j)).trace();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((t - c(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn qutrit_counts() {
        let b = make_basis(3).unwrap();
        assert_eq!(b.len(), 9);
        let traceless = b.elements()[..8].iter().filter(|e| e.trace().norm() < 1e-12).count();
        assert_eq!(traceless, 8);
        let want = CMatrix::identity(3, 3).scale(1.0 / 3f64.sqrt());
        assert!((b.element(8) - want).norm() < 1e-15);
    }

    #[test]
    fn rejects_small_dimension() {
        assert!(matches!(make_basis(1), Err(Error::InvalidDimension(1))));
        assert!(matches!(make_basis(0), Err(Error::InvalidDimension(0))));
    }

    #[test]
    fn orthonormal_up_to_eight() {
        for d in 2..=8 {
            let b = make_basis(d).unwrap();
            assert!(b.orthonormality_residual() < 1e-12, "d = {d}");
        }
    }

    #[test]
    fn qubit_structure_constants_are_levi_civita() {
        let b = make_basis(2).unwrap();
        let om = structure_constants(&b);
        let eps = |j: usize, l: usize, k: usize| -> f64 {
            match (j, l, k) {
                (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
                (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
                _ => 0.0,
            }
        };
        for j in 0..3 {
            for l in 0..3 {
                for k in 0..3 {
                    let want = -std::f64::consts::SQRT_2 * eps(j, l, k);
                    assert!((om.get(j, l, k) - want).abs() < 1e-14);
                }
            }
        }
        for m in 0..3 {
            for n in 0..3 {
                let want = if m == n { 4.0 } else { 0.0 };
                assert!((om.contraction(m, n) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn structure_constants_antisymmetric_and_contract() {
        for d in 2..=4 {
            let b = make_basis(d).unwrap();
            let om = structure_constants(&b);
            let n = om.size();
            for j in 0..n {
                for k in 0..n {
                    assert_eq!(om.get(j, j, k), 0.0);
                    for l in 0..n {
                        assert!((om.get(j, l, k) + om.get(l, j, k)).abs() < 1e-12);
                    }
                }
            }
            for m in 0..n {
                for p in 0..n {
                    let want = if m == p { 2.0 * d as f64 } else { 0.0 };
                    assert!((om.contraction(m, p) - want).abs() < 1e-10, "d={d} m={m} n={p}");
                }
            }
        }
    }

    #[test]
    fn expand_examples() {
        let b = make_basis(2).unwrap();
        let s = pauli();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mixed = CMatrix::identity(2, 2).scale(0.5);
        let got = b.expand(&mixed, Convention::Full).unwrap();
        assert!((got - RVector::from_vec(vec![0.0, 0.0, 0.0, r])).norm() < 1e-15);

        let cx = b.expand(&s[0], Convention::Traceless).unwrap();
        assert!((cx - RVector::from_vec(vec![2f64.sqrt(), 0.0, 0.0])).norm() < 1e-15);

        let h = s[0].scale(0.2) + s[1].scale(0.3) + s[2].scale(0.5);
        let hv = b.expand(&h, Convention::Traceless).unwrap();
        let want = RVector::from_vec(vec![0.2, 0.3, 0.5]).scale(2f64.sqrt());
        assert!((hv - want).norm() < 1e-15);
    }

    #[test]
    fn expand_rejects_bad_input() {
        let b = make_basis(2).unwrap();
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(b.expand(&m, Convention::Full), Err(Error::NotHermitian { .. })));
        let wrong = CMatrix::identity(3, 3);
        assert!(matches!(b.expand(&wrong, Convention::Full), Err(Error::Shape { .. })));
    }

    #[test]
    fn reconstruct_examples() {
        let b = make_basis(2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let m = b.reconstruct(&[0.0, 0.0, 0.0, r]).unwrap();
        assert!((m - CMatrix::identity(2, 2).scale(0.5)).norm() < 1e-15);

        let x = CoherenceVector::traceless(RVector::from_vec(vec![r, 0.0, 0.0]));
        let rho = b.reconstruct_state(&x).unwrap();
        let want = (CMatrix::identity(2, 2) + &pauli()[0]).scale(0.5);
        assert!((rho - want).norm() < 1e-15);

        assert!(matches!(b.reconstruct(&[1.0, 2.0]), Err(Error::Shape { .. })));
    }
}
