//! Random perturbations of POVM sets, observables and Hamiltonians with
//! Frobenius-norm budgets.
//!
//! Every draw is checked against its budget as an inequality; nothing here
//! relies on the budget holding only on average.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::dynamic_lre::Observable;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, CMatrix, RVector};
use crate::static_lre::PovmSet;

const RESAMPLES: usize = 100;
const HALVINGS: usize = 30;
/// Perturbed POVM elements may dip this far below zero from rounding alone.
const PSD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationBudget {
    #[serde(default)]
    pub eps_p: f64,
    #[serde(default)]
    pub eps_o: f64,
    #[serde(default)]
    pub eps_h: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PerturbationBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps_p", self.eps_p), ("eps_o", self.eps_o), ("eps_h", self.eps_h)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}

/// How the magnitude of a perturbation is chosen inside its budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    /// Uniform in `[0, eps]`.
    #[default]
    Uniform,
    /// Exactly `eps`, for worst-case probing.
    Fixed,
}

/// Construction used for POVM perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PovmPerturbation {
    /// Convex mixing of each configuration with a random full-rank POVM of
    /// the same size. PSD and completeness hold by construction.
    #[default]
    Mixing,
    /// Independent Hermitian directions on all but the last element, which
    /// absorbs the negated sum; resampled until every element stays PSD.
    Additive,
}

fn magnitude<R: Rng + ?Sized>(eps: f64, mode: NormMode, rng: &mut R) -> f64 {
    match mode {
        NormMode::Uniform => eps * rng.random::<f64>(),
        NormMode::Fixed => eps,
    }
}

fn ginibre<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Hermitian matrix `(G + G^dagger) / 2` normalized to unit Frobenius norm.
pub fn random_hermitian_direction<R: Rng + ?Sized>(d: usize, traceless: bool, rng: &mut R) -> CMatrix {
    loop {
        let g = ginibre(d, rng);
        let mut h = (&g + g.adjoint()).scale(0.5);
        if traceless {
            let shift = h.trace() / Complex64::new(d as f64, 0.0);
            for i in 0..d {
                h[(i, i)] -= shift;
            }
        }
        let n = h.norm();
        if n > 1e-12 {
            return h.unscale(n);
        }
    }
}

fn min_eigenvalue(m: &CMatrix) -> f64 {
    *hermitian_eigenvalues(m).last().unwrap()
}

/// Random `k`-outcome POVM on `C^d` with every element full rank:
/// `Q_i = S^{-1/2} G_i G_i^dagger S^{-1/2}` with `S = sum_i G_i G_i^dagger`.
pub fn random_povm<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Vec<CMatrix> {
    let grams: Vec<CMatrix> = (0..k)
        .map(|_| {
            let g = ginibre(d, rng);
            &g * g.adjoint()
        })
        .collect();
    let total = grams.iter().fold(CMatrix::zeros(d, d), |acc, g| acc + g);
    let (values, vectors) = hermitian_eigen(&total);
    let inv_sqrt = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        values.iter().map(|&v| Complex64::new(1.0 / v.sqrt(), 0.0)),
    ));
    let root = &vectors * inv_sqrt * vectors.adjoint();
    grams.iter().map(|g| &root * g * &root).collect()
}

fn mix_configuration<R: Rng + ?Sized>(
    config: &[CMatrix],
    eps: f64,
    mode: NormMode,
    rng: &mut R,
) -> Result<Vec<CMatrix>> {
    let d = config[0].nrows();
    let k = config.len();
    for _ in 0..RESAMPLES {
        let q = random_povm(d, k, rng);
        let dirs: Vec<CMatrix> = q.iter().zip(config).map(|(q, p)| q - p).collect();
        let widest = dirs.iter().map(|m| m.norm()).fold(0.0, f64::max);
        let target = magnitude(eps, mode, rng);
        let t = if widest > 0.0 {
            (target / widest).min(1.0) * (1.0 - 1e-12)
        } else {
            0.0
        };
        let mut out: Vec<CMatrix> = config.iter().zip(&dirs).map(|(p, dir)| p + dir.scale(t)).collect();
        let head = out[..k - 1].iter().fold(CMatrix::zeros(d, d), |acc, m| acc + m);
        out[k - 1] = CMatrix::identity(d, d) - head;
        if accepts(config, &out, eps) {
            return Ok(out);
        }
    }
    Err(Error::BudgetTooLarge {
        requested: eps,
        largest_feasible: 0.0,
    })
}

fn accepts(nominal: &[CMatrix], perturbed: &[CMatrix], eps: f64) -> bool {
    perturbed
        .iter()
        .zip(nominal)
        .all(|(ph, p)| (ph - p).norm() <= eps && min_eigenvalue(ph) >= -PSD_TOL)
}

fn additive_configuration<R: Rng + ?Sized>(
    config: &[CMatrix],
    eps: f64,
    mode: NormMode,
    rng: &mut R,
) -> Result<Vec<CMatrix>> {
    let d = config[0].nrows();
    let k = config.len();
    let mut cap = eps / 2.0;
    let mut largest_feasible = 0.0f64;
    for _ in 0..HALVINGS {
        for _ in 0..RESAMPLES {
            let mut deltas: Vec<CMatrix> = (0..k - 1)
                .map(|_| random_hermitian_direction(d, false, rng).scale(magnitude(cap, mode, rng)))
                .collect();
            let sum = deltas.iter().fold(CMatrix::zeros(d, d), |acc, m| acc + m);
            deltas.push(-sum);
            let out: Vec<CMatrix> = config.iter().zip(&deltas).map(|(p, dl)| p + dl).collect();
            if accepts(config, &out, eps) {
                return Ok(out);
            }
            if out.iter().all(|m| min_eigenvalue(m) >= -PSD_TOL) {
                let widest = deltas.iter().map(|m| m.norm()).fold(0.0, f64::max);
                largest_feasible = largest_feasible.max(widest);
            }
        }
        cap /= 2.0;
    }
    Err(Error::BudgetTooLarge {
        requested: eps,
        largest_feasible,
    })
}

/// Perturb every element of `povm` by at most `eps_p` in Frobenius norm while
/// keeping each element PSD and each configuration summing to the identity.
pub fn perturb_povm<R: Rng + ?Sized>(
    povm: &PovmSet,
    eps_p: f64,
    method: PovmPerturbation,
    mode: NormMode,
    rng: &mut R,
) -> Result<PovmSet> {
    if !(eps_p >= 0.0 && eps_p.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps_p must be non-negative, got {eps_p}")));
    }
    if eps_p == 0.0 {
        return Ok(povm.clone());
    }
    let mut elements = Vec::with_capacity(povm.num_elements());
    for config in povm.configurations() {
        if config.len() == 1 {
            // a single-element configuration is pinned to the identity
            elements.push(config[0].clone());
            continue;
        }
        let perturbed = match method {
            PovmPerturbation::Mixing => mix_configuration(config, eps_p, mode, rng)?,
            PovmPerturbation::Additive => additive_configuration(config, eps_p, mode, rng)?,
        };
        elements.extend(perturbed);
    }
    povm.with_elements(elements)
}

/// Add a random traceless Hermitian perturbation of norm at most `eps_o`.
pub fn perturb_observable<R: Rng + ?Sized>(
    o: &Observable,
    basis: &BasisSet,
    eps_o: f64,
    mode: NormMode,
    rng: &mut R,
) -> Result<Observable> {
    if !(eps_o >= 0.0 && eps_o.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps_o must be non-negative, got {eps_o}")));
    }
    if eps_o == 0.0 {
        return Ok(o.clone());
    }
    let delta = random_hermitian_direction(o.dim(), true, rng).scale(magnitude(eps_o, mode, rng));
    let perturbed = Observable::new(o.matrix() + &delta, basis)?;
    // orthonormal basis: coefficient distance equals operator distance
    let coeff_gap = (perturbed.coefficients() - o.coefficients()).norm();
    let op_gap = delta.norm();
    if (coeff_gap - op_gap).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "coefficient and operator perturbation norms disagree ({coeff_gap:e} vs {op_gap:e})"
        )));
    }
    Ok(perturbed)
}

/// Move the Hamiltonian coefficients to a point drawn uniformly from the ball
/// of radius `eps_h` around `h` (or onto its sphere in fixed mode).
pub fn perturb_hamiltonian<R: Rng + ?Sized>(h: &RVector, eps_h: f64, mode: NormMode, rng: &mut R) -> Result<RVector> {
    if !(eps_h >= 0.0 && eps_h.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps_h must be non-negative, got {eps_h}")));
    }
    if eps_h == 0.0 || h.is_empty() {
        return Ok(h.clone());
    }
    let n = h.len();
    let dir = loop {
        let v = RVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            break v.unscale(norm);
        }
    };
    let radius = match mode {
        NormMode::Uniform => eps_h * rng.random::<f64>().powf(1.0 / n as f64),
        NormMode::Fixed => eps_h,
    };
    Ok(h + dir.scale(radius * (1.0 - 1e-15)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{make_basis, structure_constants};
    use crate::dynamic_lre::adjoint_generator;
    use crate::static_lre::cube_povm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config_sums_to_identity(p: &PovmSet) -> f64 {
        let d = p.dim();
        p.configurations()
            .map(|c| {
                let s = c.iter().fold(CMatrix::zeros(d, d), |acc, m| acc + m);
                (s - CMatrix::identity(d, d)).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_budget_is_identity() {
        let povm = cube_povm(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for method in [PovmPerturbation::Mixing, PovmPerturbation::Additive] {
            let out = perturb_povm(&povm, 0.0, method, NormMode::Uniform, &mut rng).unwrap();
            assert_eq!(out.elements(), povm.elements());
        }
        let h = RVector::from_vec(vec![0.1, 0.2, 0.3]);
        assert_eq!(perturb_hamiltonian(&h, 0.0, NormMode::Uniform, &mut rng).unwrap(), h);
    }

    #[test]
    fn povm_draws_respect_budget_and_constraints() {
        let povm = cube_povm(1).unwrap();
        for method in [PovmPerturbation::Mixing, PovmPerturbation::Additive] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..100 {
                let out = perturb_povm(&povm, 0.05, method, NormMode::Uniform, &mut rng).unwrap();
                assert!(config_sums_to_identity(&out) < 1e-12);
                for (a, b) in out.elements().iter().zip(povm.elements()) {
                    assert!((a - b).norm() <= 0.05);
                    assert!(min_eigenvalue(a) >= -PSD_TOL);
                }
            }
        }
    }

    #[test]
    fn mixing_handles_multi_qubit_sets() {
        let povm = cube_povm(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = perturb_povm(&povm, 0.01, PovmPerturbation::Mixing, NormMode::Fixed, &mut rng).unwrap();
        assert!(config_sums_to_identity(&out) < 1e-12);
        let widest = out
            .elements()
            .iter()
            .zip(povm.elements())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(widest <= 0.01 && widest > 0.0099);
    }

    #[test]
    fn additive_reports_infeasible_budget() {
        // rank-one projectors in dimension 4 leave a 3-dimensional kernel that a
        // random Hermitian direction almost never keeps PSD
        let povm = cube_povm(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = perturb_povm(&povm, 0.01, PovmPerturbation::Additive, NormMode::Uniform, &mut rng).unwrap_err();
        assert!(matches!(err, Error::BudgetTooLarge { .. }));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let povm = cube_povm(1).unwrap();
        let a = perturb_povm(&povm, 0.03, PovmPerturbation::Mixing, NormMode::Uniform, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = perturb_povm(&povm, 0.03, PovmPerturbation::Mixing, NormMode::Uniform, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a.elements(), b.elements());
    }

    #[test]
    fn observable_draws() {
        let basis = make_basis(2).unwrap();
        let sx = basis.element(0).scale(2f64.sqrt());
        let o = Observable::new(sx, &basis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let same = perturb_observable(&o, &basis, 0.0, NormMode::Uniform, &mut rng).unwrap();
        assert_eq!(same.coefficients(), o.coefficients());
        for _ in 0..100 {
            let p = perturb_observable(&o, &basis, 0.01, NormMode::Uniform, &mut rng).unwrap();
            assert!(p.matrix().trace().norm() < 1e-12);
            let gap_c = (p.coefficients() - o.coefficients()).norm();
            let gap_o = (p.matrix() - o.matrix()).norm();
            assert!((gap_c - gap_o).abs() < 1e-12);
            assert!(gap_o <= 0.01);
        }
    }

    #[test]
    fn hamiltonian_draws_bound_generator_shift() {
        for d in 2..=3 {
            let basis = make_basis(d).unwrap();
            let omega = structure_constants(&basis);
            let h = RVector::from_fn(omega.size(), |i, _| 0.1 * i as f64);
            let a = adjoint_generator(&h, &omega).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
            for _ in 0..100 {
                let hp = perturb_hamiltonian(&h, 0.02, NormMode::Uniform, &mut rng).unwrap();
                assert!((&hp - &h).norm() <= 0.02);
                let ap = adjoint_generator(&hp, &omega).unwrap();
                assert!((ap - &a).norm() <= (2.0 * d as f64).sqrt() * 0.02 * (1.0 + 1e-12));
            }
        }
    }
}
