//! Static tomography: POVM sets, Born-rule probabilities, the design matrix,
//! least-squares reconstruction, the nominal MSE bound and its robust shift
//! under bounded POVM perturbations, and correction to a physical state.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSet, CoherenceVector, Convention};
use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigen, hermitian_eigenvalues, hermitian_part, hermiticity_residual, lstsq_qr,
    symmetric_eigenvalues, CMatrix, RMatrix, RVector,
};

const STATE_TOL: f64 = 1e-10;
const POVM_TOL: f64 = 1e-10;
/// Smallest Gram eigenvalue accepted as informationally complete.
pub const RANK_TOL: f64 = 1e-10;

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() < 2 {
            return Err(Error::InvalidState(format!(
                "expected a square matrix of size >= 2, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = hermiticity_residual(&matrix);
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (residual {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = *hermitian_eigenvalues(&matrix).last().unwrap();
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(DensityMatrix { matrix })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            matrix: CMatrix::identity(dim, dim).scale(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }
}

/// Measurement operators grouped into configurations. Each configuration is a
/// complete POVM on its own.
#[derive(Debug, Clone)]
pub struct PovmSet {
    dim: usize,
    elements: Vec<CMatrix>,
    /// start offset of each configuration in `elements`, plus a final sentinel
    offsets: Vec<usize>,
}

impl PovmSet {
    pub fn new(dim: usize, configurations: Vec<Vec<CMatrix>>) -> Result<Self> {
        if configurations.is_empty() {
            return Err(Error::InvalidPovm("no configurations".into()));
        }
        let mut elements = Vec::new();
        let mut offsets = vec![0];
        let ident = CMatrix::identity(dim, dim);
        for (ci, config) in configurations.into_iter().enumerate() {
            if config.is_empty() {
                return Err(Error::InvalidPovm(format!("configuration {ci} is empty")));
            }
            let mut sum = CMatrix::zeros(dim, dim);
            for (ei, p) in config.iter().enumerate() {
                if p.nrows() != dim || p.ncols() != dim {
                    return Err(Error::shape(
                        format!("{dim}x{dim} element"),
                        format!("{}x{} (configuration {ci}, element {ei})", p.nrows(), p.ncols()),
                    ));
                }
                let herm = hermiticity_residual(p);
                if herm > POVM_TOL {
                    return Err(Error::InvalidPovm(format!(
                        "configuration {ci}, element {ei} is not Hermitian (residual {herm:e})"
                    )));
                }
                let min = *hermitian_eigenvalues(p).last().unwrap();
                if min < -POVM_TOL {
                    return Err(Error::InvalidPovm(format!(
                        "configuration {ci}, element {ei} has negative eigenvalue {min:e}"
                    )));
                }
                sum += p;
            }
            let defect = (sum - &ident).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if defect > POVM_TOL {
                return Err(Error::InvalidPovm(format!(
                    "configuration {ci} sums to identity only within {defect:e}"
                )));
            }
            elements.extend(config);
            offsets.push(elements.len());
        }
        Ok(PovmSet {
            dim,
            elements,
            offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of elements, `J`.
    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Number of configurations, `M`.
    pub fn num_configs(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn config_range(&self, c: usize) -> std::ops::Range<usize> {
        self.offsets[c]..self.offsets[c + 1]
    }

    pub fn configuration(&self, c: usize) -> &[CMatrix] {
        &self.elements[self.config_range(c)]
    }

    pub fn configurations(&self) -> impl Iterator<Item = &[CMatrix]> + '_ {
        (0..self.num_configs()).map(move |c| self.configuration(c))
    }

    /// Copies of the state spent on each configuration when `total` copies are
    /// split evenly.
    pub fn copies_per_config(&self, total: u64) -> Result<u64> {
        let m = self.num_configs() as u64;
        if total == 0 || !total.is_multiple_of(m) {
            return Err(Error::InvalidArgument(format!(
                "total copies {total} is not a positive multiple of {m} configurations"
            )));
        }
        Ok(total / m)
    }

    /// Replace the elements while keeping the configuration layout. The new
    /// set is validated.
    pub fn with_elements(&self, elements: Vec<CMatrix>) -> Result<Self> {
        if elements.len() != self.elements.len() {
            return Err(Error::shape(self.elements.len(), elements.len()));
        }
        let mut configs = Vec::with_capacity(self.num_configs());
        let mut it = elements.into_iter();
        for c in 0..self.num_configs() {
            configs.push(it.by_ref().take(self.config_range(c).len()).collect());
        }
        PovmSet::new(self.dim, configs)
    }
}

fn qubit_cube_configs() -> Vec<Vec<CMatrix>> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let half = 0.5;
    let x_plus = CMatrix::from_row_slice(2, 2, &[c(half, 0.), c(half, 0.), c(half, 0.), c(half, 0.)]);
    let x_minus = CMatrix::from_row_slice(2, 2, &[c(half, 0.), c(-half, 0.), c(-half, 0.), c(half, 0.)]);
    let y_plus = CMatrix::from_row_slice(2, 2, &[c(half, 0.), c(0., -half), c(0., half), c(half, 0.)]);
    let y_minus = CMatrix::from_row_slice(2, 2, &[c(half, 0.), c(0., half), c(0., -half), c(half, 0.)]);
    let z_plus = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
    let z_minus = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]);
    vec![vec![x_plus, x_minus], vec![y_plus, y_minus], vec![z_plus, z_minus]]
}

/// Cube measurement set on `n` qubits: all tensor products of the single-qubit
/// configurations `{(I +- sigma_a) / 2}`, giving `3^n` configurations of
/// `2^n` elements.
pub fn cube_povm(n_qubits: usize) -> Result<PovmSet> {
    if n_qubits == 0 {
        return Err(Error::InvalidArgument("cube POVM needs at least one qubit".into()));
    }
    let single = qubit_cube_configs();
    let mut configs: Vec<Vec<CMatrix>> = single.clone();
    for _ in 1..n_qubits {
        let mut next = Vec::with_capacity(configs.len() * 3);
        for left in &configs {
            for right in &single {
                let mut elems = Vec::with_capacity(left.len() * right.len());
                for a in left {
                    for b in right {
                        elems.push(a.kronecker(b));
                    }
                }
                next.push(elems);
            }
        }
        configs = next;
    }
    PovmSet::new(1 << n_qubits, configs)
}

/// Born-rule probabilities `p_i = Tr(P_i rho)`, clamped to `[0, 1]`.
pub fn born_probabilities(rho: &DensityMatrix, povm: &PovmSet) -> Result<Vec<f64>> {
    if rho.dim() != povm.dim() {
        return Err(Error::shape(format!("state of dimension {}", povm.dim()), rho.dim()));
    }
    Ok(povm
        .elements()
        .iter()
        .map(|p| crate::basis::trace_product(p, rho.matrix()).re.clamp(0.0, 1.0))
        .collect())
}

/// Parametrization matrix `X` with row `i` equal to the expansion of `P_i`,
/// plus its Gram matrix and Gram eigenvalues (descending).
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    x: RMatrix,
    gram: RMatrix,
    eigenvalues: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_matrix(x: RMatrix) -> Self {
        let gram = x.transpose() * &x;
        let eigenvalues = symmetric_eigenvalues(&gram);
        DesignMatrix { x, gram, eigenvalues }
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.x
    }

    pub fn gram(&self) -> &RMatrix {
        &self.gram
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.x.norm()
    }

    pub fn check_complete(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        if min > RANK_TOL {
            Ok(())
        } else {
            Err(Error::NotInformationallyComplete { min_eigenvalue: min })
        }
    }

    /// `Tr[(X^T X)^{-1}]` from the cached spectrum.
    pub fn inverse_gram_trace(&self) -> Result<f64> {
        self.check_complete()?;
        Ok(self.eigenvalues.iter().map(|l| 1.0 / l).sum())
    }
}

pub fn build_design_matrix(povm: &PovmSet, basis: &BasisSet) -> Result<DesignMatrix> {
    if povm.dim() != basis.dim() {
        return Err(Error::shape(format!("POVM of dimension {}", basis.dim()), povm.dim()));
    }
    let mut x = RMatrix::zeros(povm.num_elements(), basis.len());
    for (i, p) in povm.elements().iter().enumerate() {
        let row = basis.expand(p, Convention::Full)?;
        x.set_row(i, &row.transpose());
    }
    Ok(DesignMatrix::from_matrix(x))
}

/// Least-squares estimate `(X^T X)^{-1} X^T y`, computed from a QR
/// factorization of `X`.
pub fn lre_solve(x: &DesignMatrix, y_hat: &[f64]) -> Result<CoherenceVector> {
    if y_hat.len() != x.rows() {
        return Err(Error::shape(format!("{} observations", x.rows()), y_hat.len()));
    }
    x.check_complete()?;
    let y = RVector::from_column_slice(y_hat);
    Ok(CoherenceVector::full(lstsq_qr(x.matrix(), &y)?))
}

fn check_resources(configs: usize, copies: u64) -> Result<()> {
    if configs == 0 || copies == 0 {
        return Err(Error::InvalidArgument("M and N must be positive".into()));
    }
    if !copies.is_multiple_of(configs as u64) {
        return Err(Error::InvalidArgument(format!(
            "N = {copies} is not divisible by M = {configs}"
        )));
    }
    Ok(())
}

/// Nominal MSE bound `M / (4N) * Tr[(X^T X)^{-1}]`.
pub fn mse_bound(x: &DesignMatrix, configs: usize, copies: u64) -> Result<f64> {
    check_resources(configs, copies)?;
    Ok(configs as f64 / (4.0 * copies as f64) * x.inverse_gram_trace()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticBoundReport {
    pub nominal_bound: f64,
    pub perturbed_bound: Option<f64>,
    /// Shift bound using the first-order Gram perturbation `2 sqrt(J) eps ||X||_F`.
    pub robust_shift_bound: f64,
    /// Same bound with the full `2 sqrt(J) eps ||X||_F + J eps^2` term.
    pub robust_shift_bound_quadratic: f64,
    pub admissible: bool,
    pub admissible_quadratic: bool,
    pub epsilon_used: f64,
}

impl StaticBoundReport {
    pub fn robust_envelope(&self) -> f64 {
        self.nominal_bound + self.robust_shift_bound
    }
}

fn shift_from_gram_perturbation(
    configs: usize,
    copies: u64,
    params: usize,
    lambda_min: f64,
    gram_shift: f64,
) -> (f64, bool) {
    let margin = lambda_min - gram_shift;
    // at equality the bound diverges, so the boundary itself is reported as inadmissible
    if margin <= 1e-12 * lambda_min {
        return (f64::INFINITY, false);
    }
    if gram_shift == 0.0 {
        return (0.0, true);
    }
    // M / (4N) * d^2 * dG / (lambda (lambda - dG))
    let shift = configs as f64 * params as f64 * gram_shift
        / (4.0 * copies as f64 * lambda_min * margin);
    (shift, true)
}

/// Robust bound on how far the MSE bound can move when every POVM element is
/// perturbed by at most `eps_p` in Frobenius norm. Inadmissible budgets return
/// a flagged report with an infinite shift.
pub fn robust_bound_static(
    x: &DesignMatrix,
    eps_p: f64,
    configs: usize,
    copies: u64,
) -> StaticBoundReport {
    let j = x.rows() as f64;
    let params = x.cols();
    let lambda = x.min_eigenvalue();
    let frob = x.frobenius_norm();
    let nominal_bound = mse_bound(x, configs, copies).unwrap_or(f64::INFINITY);

    let linear = 2.0 * j.sqrt() * eps_p * frob;
    let quadratic = linear + j * eps_p * eps_p;
    let (robust_shift_bound, admissible) =
        shift_from_gram_perturbation(configs, copies, params, lambda, linear);
    let (robust_shift_bound_quadratic, admissible_quadratic) =
        shift_from_gram_perturbation(configs, copies, params, lambda, quadratic);

    StaticBoundReport {
        nominal_bound,
        perturbed_bound: None,
        robust_shift_bound,
        robust_shift_bound_quadratic,
        admissible,
        admissible_quadratic,
        epsilon_used: eps_p,
    }
}

/// Largest `eps_p` satisfying the admissibility condition,
/// `lambda_min / (2 sqrt(J) ||X||_F)`.
pub fn max_admissible_eps_static(x: &DesignMatrix) -> Result<f64> {
    x.check_complete()?;
    Ok(x.min_eigenvalue() / (2.0 * (x.rows() as f64).sqrt() * x.frobenius_norm()))
}

/// Euclidean projection of a descending-sorted spectrum onto the probability
/// simplex: the most negative entries are zeroed and their deficit spread
/// evenly over the survivors.
pub fn project_spectrum(sorted_desc: &[f64]) -> Vec<f64> {
    let mut v = sorted_desc.to_vec();
    let total: f64 = v.iter().sum();
    // spread any trace deficit first so the loop below only handles negativity
    let mut acc = 1.0 - total;
    let mut keep = v.len();
    while keep > 0 {
        let i = keep - 1;
        if v[i] + acc / keep as f64 >= 0.0 {
            break;
        }
        acc += v[i];
        v[i] = 0.0;
        keep -= 1;
    }
    if keep == 0 {
        // cannot happen for finite inputs, but stay total
        let n = v.len();
        return vec![1.0 / n as f64; n];
    }
    let share = acc / keep as f64;
    for x in v.iter_mut().take(keep) {
        *x += share;
    }
    v
}

/// Turn a least-squares estimate into the closest density matrix in
/// Frobenius norm: Hermitize, rescale the trace to one, then project the
/// spectrum onto the simplex.
pub fn project_physical(theta_hat: &CoherenceVector, basis: &BasisSet) -> Result<DensityMatrix> {
    if theta_hat.convention != Convention::Full || theta_hat.len() != basis.len() {
        return Err(Error::shape(
            format!("full-convention vector of length {}", basis.len()),
            format!("{:?} vector of length {}", theta_hat.convention, theta_hat.len()),
        ));
    }
    let raw = basis.reconstruct(theta_hat.entries.as_slice())?;
    let mut m = hermitian_part(&raw);
    let tr = m.trace().re;
    if tr > 1e-12 {
        m.scale_mut(1.0 / tr);
    }
    let (values, vectors) = hermitian_eigen(&m);
    let projected = project_spectrum(&values);
    let d = basis.dim();
    let mut out = CMatrix::zeros(d, d);
    for (k, &lam) in projected.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        let v = vectors.column(k);
        out += (v * v.adjoint()).scale(lam);
    }
    let out = hermitian_part(&out);
    Ok(DensityMatrix { matrix: out })
}
