//! Dynamic tomography from the time trace of a single observable.
//!
//! The coherence vector of a closed system evolves as `x(k+1) = A x(k)` with
//! `A = exp(A_c dt)` orthogonal, and the samples `y(k) = C A^k x0` stack into
//! the observability matrix. The initial state is recovered by least squares
//! when that matrix has full column rank.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisSet, CoherenceVector, Convention, StructureTensor};
use crate::error::{Error, Result};
use crate::linalg::{
    expm, hermitian_eigen, hermiticity_residual, lstsq_qr, numerical_rank, skew_residual,
    symmetric_eigenvalues, CMatrix, RMatrix, RVector,
};

const SKEW_TOL: f64 = 1e-10;
/// Margins within this fraction of `lambda_min` count as on the boundary.
const BOUNDARY_REL_TOL: f64 = 1e-12;
const ORTHOGONALITY_TOL: f64 = 1e-10;
/// Relative singular-value cutoff for the identifiability rank test.
pub const RANK_REL_TOL: f64 = 1e-10;

/// `(A_c)_{jk} = sum_m omega[m][j][k] h_m`.
pub fn adjoint_generator(h: &RVector, omega: &StructureTensor) -> Result<RMatrix> {
    let n = omega.size();
    if h.len() != n {
        return Err(Error::shape(format!("{n} Hamiltonian coefficients"), h.len()));
    }
    let mut a = RMatrix::zeros(n, n);
    for (m, &hm) in h.iter().enumerate() {
        if hm == 0.0 {
            continue;
        }
        for j in 0..n {
            for k in 0..n {
                a[(j, k)] += omega.get(m, j, k) * hm;
            }
        }
    }
    let residual = skew_residual(&a);
    if residual > SKEW_TOL {
        return Err(Error::NotSkewSymmetric { residual });
    }
    Ok(a)
}

/// Discrete transition matrix `exp(A_c dt)`; orthogonal for skew `A_c`.
pub fn discretize(a_c: &RMatrix, dt: f64) -> Result<RMatrix> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {dt}")));
    }
    if a_c.nrows() != a_c.ncols() {
        return Err(Error::shape("square generator", format!("{}x{}", a_c.nrows(), a_c.ncols())));
    }
    let residual = skew_residual(a_c);
    if residual > SKEW_TOL {
        return Err(Error::NotSkewSymmetric { residual });
    }
    let a = expm(&a_c.scale(dt));
    let n = a.nrows();
    let defect = (a.transpose() * &a - RMatrix::identity(n, n)).norm();
    if defect >= ORTHOGONALITY_TOL {
        return Err(Error::InvalidArgument(format!(
            "transition matrix lost orthogonality (residual {defect:e})"
        )));
    }
    Ok(a)
}

/// Closed-system sampled dynamics.
#[derive(Debug, Clone)]
pub struct DynamicsModel {
    dim: usize,
    h: RVector,
    generator: RMatrix,
    dt: f64,
    samples: usize,
    transition: RMatrix,
}

impl DynamicsModel {
    pub fn new(h: RVector, omega: &StructureTensor, dt: f64, samples: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        let generator = adjoint_generator(&h, omega)?;
        let transition = discretize(&generator, dt)?;
        Ok(DynamicsModel {
            dim: omega.dim(),
            h,
            generator,
            dt,
            samples,
            transition,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &RVector {
        &self.h
    }

    pub fn generator(&self) -> &RMatrix {
        &self.generator
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn transition(&self) -> &RMatrix {
        &self.transition
    }
}

/// Traceless observable `O = sum_k C_k E_k`.
#[derive(Debug, Clone)]
pub struct Observable {
    c: RVector,
    matrix: CMatrix,
}

impl Observable {
    pub fn new(matrix: CMatrix, basis: &BasisSet) -> Result<Self> {
        let tr = matrix.trace();
        if tr.norm() > 1e-10 {
            return Err(Error::InvalidArgument(format!("observable must be traceless, trace is {tr}")));
        }
        let c = basis.expand(&matrix, Convention::Traceless)?;
        Ok(Observable { c, matrix })
    }

    pub fn from_coefficients(c: RVector, basis: &BasisSet) -> Result<Self> {
        if c.len() != basis.traceless_len() {
            return Err(Error::shape(basis.traceless_len(), c.len()));
        }
        let matrix = basis.reconstruct(c.as_slice())?;
        Ok(Observable { c, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn coefficients(&self) -> &RVector {
        &self.c
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Distinct eigenvalues with the projectors onto their eigenspaces.
    pub fn spectral_outcomes(&self) -> Vec<(f64, CMatrix)> {
        debug_assert!(hermiticity_residual(&self.matrix) < 1e-10);
        let (values, vectors) = hermitian_eigen(&self.matrix);
        let d = self.dim();
        let mut out: Vec<(f64, CMatrix)> = Vec::new();
        for (k, &lam) in values.iter().enumerate() {
            let v = vectors.column(k);
            let proj = v * v.adjoint();
            match out.last_mut() {
                Some((mu, p)) if (*mu - lam).abs() < 1e-9 => *p += proj,
                _ => out.push((lam, proj)),
            }
        }
        debug_assert!({
            let total = out.iter().fold(CMatrix::zeros(d, d), |acc, (_, p)| acc + p);
            (total - CMatrix::identity(d, d)).norm() < 1e-9
        });
        out
    }
}

/// Stacked rows `C, CA, ..., CA^{s-1}`.
#[derive(Debug, Clone)]
pub struct ObservabilityMatrix {
    matrix: RMatrix,
    eigenvalues: Vec<f64>,
    frobenius: f64,
}

impl ObservabilityMatrix {
    pub fn from_matrix(matrix: RMatrix) -> Self {
        let eigenvalues = symmetric_eigenvalues(&(matrix.transpose() * &matrix));
        let frobenius = matrix.norm();
        ObservabilityMatrix {
            matrix,
            eigenvalues,
            frobenius,
        }
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of unknowns, `d^2 - 1`.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn gram_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius
    }

    pub fn rank(&self) -> usize {
        numerical_rank(&self.matrix, RANK_REL_TOL)
    }

    fn require_identifiable(&self) -> Result<()> {
        let rank = self.rank();
        if rank == self.cols() {
            Ok(())
        } else {
            Err(Error::Unidentifiable {
                rank,
                required: self.cols(),
            })
        }
    }

    /// `Tr[(O^T O)^{-1}]` from the cached spectrum.
    pub fn inverse_gram_trace(&self) -> Result<f64> {
        self.require_identifiable()?;
        Ok(self.eigenvalues.iter().map(|l| 1.0 / l).sum())
    }
}

pub fn observability(c: &Observable, a: &RMatrix, samples: usize) -> Result<ObservabilityMatrix> {
    observability_from_row(c.coefficients(), a, samples)
}

pub fn observability_from_row(c: &RVector, a: &RMatrix, samples: usize) -> Result<ObservabilityMatrix> {
    if samples == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let n = c.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::shape(format!("{n}x{n} transition"), format!("{}x{}", a.nrows(), a.ncols())));
    }
    let mut m = RMatrix::zeros(samples, n);
    let mut row = c.transpose();
    for k in 0..samples {
        m.set_row(k, &row);
        row = &row * a;
    }
    Ok(ObservabilityMatrix::from_matrix(m))
}

pub fn identifiable(obs: &ObservabilityMatrix) -> bool {
    obs.rank() == obs.cols()
}

/// Noiseless samples `y(k) = C A^k x0` for `k = 0..s-1`.
pub fn simulate_trajectory(x0: &CoherenceVector, model: &DynamicsModel, c: &Observable) -> Result<RVector> {
    let n = model.transition().nrows();
    if x0.convention != Convention::Traceless || x0.len() != n {
        return Err(Error::shape(format!("traceless vector of length {n}"), x0.len()));
    }
    if c.coefficients().len() != n {
        return Err(Error::shape(n, c.coefficients().len()));
    }
    Ok(RVector::from_iterator(
        model.samples(),
        trajectory(&x0.entries, model.transition(), model.samples()).map(|x| c.coefficients().dot(&x)),
    ))
}

/// Coherence vectors `x(0), x(1), ...`.
pub fn trajectory<'a>(x0: &RVector, a: &'a RMatrix, samples: usize) -> impl Iterator<Item = RVector> + 'a {
    let mut x = x0.clone();
    (0..samples).map(move |k| {
        if k > 0 {
            x = a * &x;
        }
        x.clone()
    })
}

pub fn dynamic_lre_solve(obs: &ObservabilityMatrix, y_hat: &[f64]) -> Result<CoherenceVector> {
    if y_hat.len() != obs.rows() {
        return Err(Error::shape(format!("{} samples", obs.rows()), y_hat.len()));
    }
    obs.require_identifiable()?;
    let y = RVector::from_column_slice(y_hat);
    Ok(CoherenceVector::traceless(lstsq_qr(obs.matrix(), &y)?))
}

/// MSE bound `s / (4N) * Tr[(O^T O)^{-1}]` with `s` the number of rows.
pub fn dynamic_mse_bound(obs: &ObservabilityMatrix, copies: u64) -> Result<f64> {
    if copies == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    Ok(obs.rows() as f64 / (4.0 * copies as f64) * obs.inverse_gram_trace()?)
}

fn sum_of_squares_below(s: usize) -> f64 {
    let s = s as f64;
    (s - 1.0) * s * (2.0 * s - 1.0) / 6.0
}

/// Bound on `||O_hat - O||_F` when the observable moves by at most `eps_o`
/// and the Hamiltonian by at most `eps_h` (both Frobenius):
/// `sqrt(s eps_o^2 + sum_{k<s} k^2 (||C|| + eps_o)^2 dt^2 2d eps_h^2)`.
pub fn delta_obs_bound(eps_o: f64, eps_h: f64, c_norm: f64, dt: f64, samples: usize, dim: usize) -> f64 {
    let s = samples as f64;
    let h_term = sum_of_squares_below(samples)
        * (c_norm + eps_o).powi(2)
        * dt * dt
        * 2.0
        * dim as f64
        * eps_h
        * eps_h;
    (s * eps_o * eps_o + h_term).sqrt()
}

/// Large-`s` form `sqrt(s eps_o^2 + 2d s^3 ||C||^2 dt^2 eps_h^2)`.
pub fn delta_obs_bound_asymptotic(
    eps_o: f64,
    eps_h: f64,
    c_norm: f64,
    dt: f64,
    samples: usize,
    dim: usize,
) -> f64 {
    let s = samples as f64;
    (s * eps_o * eps_o + 2.0 * dim as f64 * s.powi(3) * c_norm * c_norm * dt * dt * eps_h * eps_h).sqrt()
}

/// Guaranteed bound `sqrt(s) eps_o + sqrt(sum_{k<s} k^2) ||C|| sqrt(2d) dt eps_h`.
///
/// Row `k` of the difference splits as `dC A_hat^k + C (A_hat^k - A^k)`; the
/// triangle inequality on the two stacked parts keeps the cross term that the
/// sum-of-squares form in [`delta_obs_bound`] leaves out, which lets that form
/// undershoot the realized difference when both budgets are active.
pub fn delta_obs_bound_triangle(eps_o: f64, eps_h: f64, c_norm: f64, dt: f64, samples: usize, dim: usize) -> f64 {
    (samples as f64).sqrt() * eps_o
        + sum_of_squares_below(samples).sqrt() * c_norm * (2.0 * dim as f64).sqrt() * dt * eps_h
}

/// Which bound on `||O_hat - O||_F` feeds the robust dynamic report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaBoundForm {
    /// [`delta_obs_bound`], the sum-of-squares form.
    #[default]
    SumOfSquares,
    /// [`delta_obs_bound_triangle`], valid for every perturbation pair.
    Triangle,
}

impl DeltaBoundForm {
    pub fn evaluate(self, eps_o: f64, eps_h: f64, c_norm: f64, dt: f64, samples: usize, dim: usize) -> f64 {
        match self {
            DeltaBoundForm::SumOfSquares => delta_obs_bound(eps_o, eps_h, c_norm, dt, samples, dim),
            DeltaBoundForm::Triangle => delta_obs_bound_triangle(eps_o, eps_h, c_norm, dt, samples, dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicBoundReport {
    pub nominal_bound: f64,
    pub perturbed_bound: Option<f64>,
    pub delta_obs_bound: f64,
    pub robust_shift_bound: f64,
    pub admissible: bool,
    pub eps_o: f64,
    pub eps_h: f64,
}

impl DynamicBoundReport {
    pub fn with_budget(mut self, eps_o: f64, eps_h: f64) -> Self {
        self.eps_o = eps_o;
        self.eps_h = eps_h;
        self
    }

    pub fn robust_envelope(&self) -> f64 {
        self.nominal_bound + self.robust_shift_bound
    }
}

pub fn robust_bound_dynamic(obs: &ObservabilityMatrix, delta_bound: f64, copies: u64) -> DynamicBoundReport {
    let nominal_bound = dynamic_mse_bound(obs, copies).unwrap_or(f64::INFINITY);
    let lambda = obs.min_eigenvalue();
    let gram_shift = 2.0 * obs.frobenius_norm() * delta_bound;
    let margin = lambda - gram_shift;
    let (robust_shift_bound, admissible) = if margin <= BOUNDARY_REL_TOL * lambda || !nominal_bound.is_finite() {
        (f64::INFINITY, false)
    } else if delta_bound == 0.0 {
        (0.0, true)
    } else {
        let s = obs.rows() as f64;
        let params = obs.cols() as f64;
        let shift = s * params * obs.frobenius_norm() * delta_bound
            / (2.0 * copies as f64 * lambda * margin);
        (shift, true)
    };
    DynamicBoundReport {
        nominal_bound,
        perturbed_bound: None,
        delta_obs_bound: delta_bound,
        robust_shift_bound,
        admissible,
        eps_o: 0.0,
        eps_h: 0.0,
    }
}

/// Largest `||Delta O||_F` meeting the admissibility condition,
/// `lambda_min / (2 ||O||_F)`.
pub fn max_admissible_delta_dynamic(obs: &ObservabilityMatrix) -> Result<f64> {
    obs.require_identifiable()?;
    Ok(obs.min_eigenvalue() / (2.0 * obs.frobenius_norm()))
}
