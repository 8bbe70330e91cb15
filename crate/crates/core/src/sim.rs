//! Monte Carlo harness: random states, measurement sampling, single trials of
//! the static and dynamic pipelines, and sweeps over resources or system size.
//!
//! Every trial owns a ChaCha stream seeded from `(master seed, point, trial)`,
//! so results do not depend on how trials are scheduled across threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{make_basis, structure_constants, BasisSet, CoherenceVector, Convention, StructureTensor};
use crate::config::{ExperimentKind, Setting, SweepSpec};
use crate::dynamic_lre::{
    dynamic_lre_solve, DeltaBoundForm, dynamic_mse_bound, max_admissible_delta_dynamic, observability,
    robust_bound_dynamic, trajectory, DynamicBoundReport, DynamicsModel, Observable, ObservabilityMatrix,
};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::perturb::{perturb_hamiltonian, perturb_observable, perturb_povm, NormMode, PovmPerturbation};
use crate::static_lre::{
    born_probabilities, build_design_matrix, cube_povm, lre_solve, max_admissible_eps_static, mse_bound,
    robust_bound_static, DensityMatrix, DesignMatrix, PovmSet, StaticBoundReport,
};

/// Measurement-noise model for the simulated frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Static: every POVM element is an independent binomial detector fed the
    /// configuration's copies. Dynamic: projective sampling of the observable.
    #[default]
    Binomial,
    /// Static: one multinomial draw per configuration. Dynamic: same as
    /// `Binomial`.
    Multinomial,
    /// Independent normal errors with variance `(p - p^2) / shots`.
    Gaussian,
    /// Exact probabilities.
    Noiseless,
}

/// Which design matrix the static estimator inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconstructionMode {
    /// Reconstruct with the perturbed devices' design matrix.
    #[default]
    Perturbed,
    /// Reconstruct with the nominal design matrix (systematic error).
    Nominal,
}

/// How the dynamic resource `N` maps to shots per time sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShotAllocation {
    /// `N` shots at every sample, `s N` copies in total.
    #[default]
    PerSample,
    /// `N` copies in total, `N / s` per sample.
    Split,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at sweep point `point`.
pub fn derive_seed(master: u64, point: u64, trial: u64) -> u64 {
    mix64(mix64(mix64(master) ^ point) ^ trial)
}

pub fn trial_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `G G^dagger / Tr(G G^dagger)` for a complex Ginibre matrix `G`.
pub fn random_mixed_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<DensityMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    let rho = crate::linalg::hermitian_part(&w.unscale(tr));
    DensityMatrix::new(rho)
}

fn check_probabilities(p: &[f64]) -> Result<Vec<f64>> {
    if p.is_empty() {
        return Err(Error::InvalidProbabilities("empty".into()));
    }
    if let Some(bad) = p.iter().find(|x| !x.is_finite() || **x < -1e-9) {
        return Err(Error::InvalidProbabilities(format!("entry {bad} is negative or not finite")));
    }
    let clamped: Vec<f64> = p.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProbabilities(format!("entries sum to {total}, expected 1")));
    }
    Ok(clamped.into_iter().map(|x| x / total).collect())
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial parameters").sample(rng)
}

/// One multinomial draw of `shots` outcomes over `p`, returned as relative
/// frequencies `N_i / shots`.
pub fn sample_frequencies<R: Rng + ?Sized>(p: &[f64], shots: u64, rng: &mut R) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let p = check_probabilities(p)?;
    let mut remaining = shots;
    let mut mass = 1.0f64;
    let mut out = Vec::with_capacity(p.len());
    for (i, &pi) in p.iter().enumerate() {
        let n = if i + 1 == p.len() {
            remaining
        } else if mass <= 0.0 {
            0
        } else {
            binomial(remaining, (pi / mass).min(1.0), rng)
        };
        remaining -= n;
        mass -= pi;
        out.push(n as f64 / shots as f64);
    }
    Ok(out)
}

/// Noisy estimates of one configuration's probabilities.
pub fn sample_configuration<R: Rng + ?Sized>(p: &[f64], shots: u64, noise: NoiseModel, rng: &mut R) -> Result<Vec<f64>> {
    match noise {
        NoiseModel::Noiseless => Ok(p.to_vec()),
        NoiseModel::Multinomial => sample_frequencies(p, shots, rng),
        NoiseModel::Binomial => Ok(p
            .iter()
            .map(|&pi| binomial(shots, pi.clamp(0.0, 1.0), rng) as f64 / shots as f64)
            .collect()),
        NoiseModel::Gaussian => Ok(p
            .iter()
            .map(|&pi| {
                let var = (pi - pi * pi).max(0.0) / shots as f64;
                pi + var.sqrt() * rng.sample::<f64, _>(StandardNormal)
            })
            .collect()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub squared_error: f64,
    pub nominal_bound: f64,
    pub perturbed_bound: f64,
    pub robust_shift: f64,
    pub admissible: bool,
}

/// Static experiment at one system size; the nominal pieces are built once.
#[derive(Debug, Clone)]
pub struct StaticExperiment {
    pub basis: BasisSet,
    pub povm: PovmSet,
    pub design: DesignMatrix,
    pub eps_p: f64,
    pub method: PovmPerturbation,
    pub norm_mode: NormMode,
    pub reconstruction: ReconstructionMode,
    pub noise: NoiseModel,
}

impl StaticExperiment {
    pub fn new(basis: BasisSet, povm: PovmSet, eps_p: f64) -> Result<Self> {
        let design = build_design_matrix(&povm, &basis)?;
        design.check_complete()?;
        Ok(StaticExperiment {
            basis,
            povm,
            design,
            eps_p,
            method: PovmPerturbation::default(),
            norm_mode: NormMode::default(),
            reconstruction: ReconstructionMode::default(),
            noise: NoiseModel::default(),
        })
    }

    pub fn cube(n_qubits: usize, eps_p: f64) -> Result<Self> {
        let povm = cube_povm(n_qubits)?;
        let basis = make_basis(povm.dim())?;
        Self::new(basis, povm, eps_p)
    }

    pub fn bounds(&self, copies: u64) -> StaticBoundReport {
        robust_bound_static(&self.design, self.eps_p, self.povm.num_configs(), copies)
    }
}

/// Perturb the POVM, sample data from the perturbed devices, reconstruct, and
/// record the squared error with the nominal, perturbed and robust bounds.
pub fn run_static_trial<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    exp: &StaticExperiment,
    copies: u64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let shots = exp.povm.copies_per_config(copies)?;
    let truth = CoherenceVector::of_state(rho.matrix(), &exp.basis, Convention::Full)?;
    let perturbed = perturb_povm(&exp.povm, exp.eps_p, exp.method, exp.norm_mode, rng)?;
    let design_hat = build_design_matrix(&perturbed, &exp.basis)?;

    let p = born_probabilities(rho, &perturbed)?;
    let mut y = Vec::with_capacity(p.len());
    for c in 0..perturbed.num_configs() {
        y.extend(sample_configuration(&p[perturbed.config_range(c)], shots, exp.noise, rng)?);
    }
    let estimate = match exp.reconstruction {
        ReconstructionMode::Perturbed => lre_solve(&design_hat, &y)?,
        ReconstructionMode::Nominal => lre_solve(&exp.design, &y)?,
    };
    let err = (estimate.entries - truth.entries).norm_squared();
    let perturbed_bound = mse_bound(&design_hat, perturbed.num_configs(), copies)?;
    Ok((err, perturbed_bound))
}

/// Dynamic experiment around a nominal Hamiltonian and observable.
#[derive(Debug, Clone)]
pub struct DynamicExperiment {
    pub basis: BasisSet,
    pub omega: StructureTensor,
    pub model: DynamicsModel,
    pub observable: Observable,
    pub obs_matrix: ObservabilityMatrix,
    pub eps_o: f64,
    pub eps_h: f64,
    pub norm_mode: NormMode,
    pub noise: NoiseModel,
    pub allocation: ShotAllocation,
    pub delta_form: DeltaBoundForm,
}

impl DynamicExperiment {
    pub fn new(h: crate::linalg::RVector, observable: CMatrix, dt: f64, samples: usize, eps_o: f64, eps_h: f64) -> Result<Self> {
        let d = observable.nrows();
        let basis = make_basis(d)?;
        let omega = structure_constants(&basis);
        let model = DynamicsModel::new(h, &omega, dt, samples)?;
        let observable = Observable::new(observable, &basis)?;
        let obs_matrix = observability(&observable, model.transition(), samples)?;
        if !crate::dynamic_lre::identifiable(&obs_matrix) {
            return Err(Error::Unidentifiable {
                rank: obs_matrix.rank(),
                required: obs_matrix.cols(),
            });
        }
        Ok(DynamicExperiment {
            basis,
            omega,
            model,
            observable,
            obs_matrix,
            eps_o,
            eps_h,
            norm_mode: NormMode::default(),
            noise: NoiseModel::default(),
            allocation: ShotAllocation::default(),
            delta_form: DeltaBoundForm::default(),
        })
    }

    pub fn delta_bound(&self) -> f64 {
        self.delta_form.evaluate(
            self.eps_o,
            self.eps_h,
            self.observable.coefficients().norm(),
            self.model.dt(),
            self.model.samples(),
            self.basis.dim(),
        )
    }

    pub fn bounds(&self, copies: u64) -> DynamicBoundReport {
        robust_bound_dynamic(&self.obs_matrix, self.delta_bound(), copies).with_budget(self.eps_o, self.eps_h)
    }

    fn shots_per_sample(&self, copies: u64) -> Result<u64> {
        match self.allocation {
            ShotAllocation::PerSample => Ok(copies),
            ShotAllocation::Split => {
                let s = self.model.samples() as u64;
                if !copies.is_multiple_of(s) || copies == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "N = {copies} cannot be split evenly over {s} samples"
                    )));
                }
                Ok(copies / s)
            }
        }
    }

    /// Multiply both budgets by the factor that puts the joint bound on
    /// `||Delta O||_F` at `fraction` of the admissibility limit.
    pub fn scale_budget_to_admissible_fraction(&mut self, fraction: f64) -> Result<()> {
        let limit = fraction * max_admissible_delta_dynamic(&self.obs_matrix)?;
        let (eo, eh) = (self.eps_o, self.eps_h);
        if eo == 0.0 && eh == 0.0 {
            return Err(Error::InvalidArgument("admissible_fraction needs a non-zero eps_o or eps_h direction".into()));
        }
        let at = |c: f64| {
            self.delta_form.evaluate(c * eo, c * eh, self.observable.coefficients().norm(), self.model.dt(), self.model.samples(), self.basis.dim())
        };
        let mut hi = 1.0;
        while at(hi) < limit {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid) < limit {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.eps_o = lo * eo;
        self.eps_h = lo * eh;
        Ok(())
    }
}

/// Perturb the observable and Hamiltonian, evolve `rho0` under the perturbed
/// dynamics, sample the perturbed observable at every time step, and
/// reconstruct with the perturbed observability matrix.
pub fn run_dynamic_trial<R: Rng + ?Sized>(
    rho0: &DensityMatrix,
    exp: &DynamicExperiment,
    copies: u64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let shots = exp.shots_per_sample(copies)?;
    let x0 = CoherenceVector::of_state(rho0.matrix(), &exp.basis, Convention::Traceless)?;
    let o_hat = perturb_observable(&exp.observable, &exp.basis, exp.eps_o, exp.norm_mode, rng)?;
    let h_hat = perturb_hamiltonian(exp.model.hamiltonian(), exp.eps_h, exp.norm_mode, rng)?;
    let model_hat = DynamicsModel::new(h_hat, &exp.omega, exp.model.dt(), exp.model.samples())?;
    let obs_hat = observability(&o_hat, model_hat.transition(), exp.model.samples())?;

    let outcomes = o_hat.spectral_outcomes();
    let mut y = Vec::with_capacity(exp.model.samples());
    for x in trajectory(&x0.entries, model_hat.transition(), exp.model.samples()) {
        let rho = exp.basis.reconstruct_state(&CoherenceVector::traceless(x))?;
        let p: Vec<f64> = outcomes
            .iter()
            .map(|(_, proj)| crate::basis::trace_product(proj, &rho).re.clamp(0.0, 1.0))
            .collect();
        let total: f64 = p.iter().sum();
        let p: Vec<f64> = p.iter().map(|v| v / total).collect();
        let mean: f64 = outcomes.iter().zip(&p).map(|((o, _), pi)| o * pi).sum();
        let sample = match exp.noise {
            NoiseModel::Noiseless => mean,
            NoiseModel::Binomial | NoiseModel::Multinomial => sample_frequencies(&p, shots, rng)?
                .iter()
                .zip(&outcomes)
                .map(|(f, (o, _))| f * o)
                .sum(),
            NoiseModel::Gaussian => {
                let second: f64 = outcomes.iter().zip(&p).map(|((o, _), pi)| o * o * pi).sum();
                let sd = ((second - mean * mean).max(0.0) / shots as f64).sqrt();
                mean + Normal::new(0.0, sd.max(f64::MIN_POSITIVE)).unwrap().sample(rng)
            }
        };
        y.push(sample);
    }
    let estimate = dynamic_lre_solve(&obs_hat, &y)?;
    let err = (estimate.entries - x0.entries).norm_squared();
    let perturbed_bound = dynamic_mse_bound(&obs_hat, copies)?;
    Ok((err, perturbed_bound))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: u64,
    pub mse_empirical: Option<f64>,
    pub bound_nominal: f64,
    pub bound_perturbed: Option<f64>,
    pub robust_shift: f64,
    pub robust_envelope: f64,
    pub admissible_fraction: f64,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub variable: String,
    pub trials: usize,
    pub points: Vec<SweepPoint>,
}

enum Pipeline {
    Static(StaticExperiment),
    Dynamic(DynamicExperiment),
}

impl Pipeline {
    fn dim(&self) -> usize {
        match self {
            Pipeline::Static(e) => e.basis.dim(),
            Pipeline::Dynamic(e) => e.basis.dim(),
        }
    }

    /// (nominal bound, robust shift, admissible)
    fn bounds(&self, copies: u64) -> (f64, f64, bool) {
        match self {
            Pipeline::Static(e) => {
                let r = e.bounds(copies);
                (r.nominal_bound, r.robust_shift_bound, r.admissible)
            }
            Pipeline::Dynamic(e) => {
                let r = e.bounds(copies);
                (r.nominal_bound, r.robust_shift_bound, r.admissible)
            }
        }
    }

    fn trial<R: Rng + ?Sized>(&self, copies: u64, rng: &mut R) -> Result<(f64, f64)> {
        let rho = random_mixed_state(self.dim(), rng)?;
        match self {
            Pipeline::Static(e) => run_static_trial(&rho, e, copies, rng),
            Pipeline::Dynamic(e) => run_dynamic_trial(&rho, e, copies, rng),
        }
    }
}

pub fn static_experiment_for(spec: &SweepSpec, n_qubits: usize) -> Result<StaticExperiment> {
    let mut exp = StaticExperiment::cube(n_qubits, spec.budget.eps_p)?;
    if let Some(f) = spec.budget.admissible_fraction {
        exp.eps_p = f * max_admissible_eps_static(&exp.design)?;
    }
    exp.method = spec.povm_perturbation;
    exp.norm_mode = spec.budget.norm_mode;
    exp.reconstruction = spec.reconstruction;
    exp.noise = spec.noise;
    Ok(exp)
}

pub fn dynamic_experiment_for(spec: &SweepSpec) -> Result<DynamicExperiment> {
    let dynamics = &spec.dynamics;
    let (h, o) = dynamics.resolve()?;
    let mut exp = DynamicExperiment::new(h, o, dynamics.dt, dynamics.samples, spec.budget.eps_o, spec.budget.eps_h)?;
    exp.delta_form = spec.budget.delta_bound;
    if let Some(f) = spec.budget.admissible_fraction {
        exp.scale_budget_to_admissible_fraction(f)?;
    }
    exp.norm_mode = spec.budget.norm_mode;
    exp.noise = spec.noise;
    exp.allocation = dynamics.shot_allocation;
    Ok(exp)
}

fn run_point(pipeline: &Pipeline, spec: &SweepSpec, point: usize, value: u64, copies: u64, run_trials: bool) -> Result<SweepPoint> {
    let (nominal, shift, admissible) = pipeline.bounds(copies);
    let envelope = nominal + shift;
    if !run_trials {
        return Ok(SweepPoint {
            value,
            mse_empirical: None,
            bound_nominal: nominal,
            bound_perturbed: None,
            robust_shift: shift,
            robust_envelope: envelope,
            admissible_fraction: if admissible { 1.0 } else { 0.0 },
            records: Vec::new(),
        });
    }
    let records: Vec<TrialRecord> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(spec.seed, point as u64, t as u64);
            let mut rng = trial_rng(seed);
            let (err, perturbed) = pipeline
                .trial(copies, &mut rng)
                .map_err(|e| Error::Trial { seed, source: Box::new(e) })?;
            Ok(TrialRecord {
                trial: t,
                seed,
                squared_error: err,
                nominal_bound: nominal,
                perturbed_bound: perturbed,
                robust_shift: shift,
                admissible,
            })
        })
        .collect::<Result<_>>()?;
    let n = records.len() as f64;
    let mse = records.iter().map(|r| r.squared_error).sum::<f64>() / n;
    let perturbed = records.iter().map(|r| r.perturbed_bound).sum::<f64>() / n;
    let admissible_fraction = records.iter().filter(|r| r.admissible).count() as f64 / n;
    Ok(SweepPoint {
        value,
        mse_empirical: Some(mse),
        bound_nominal: nominal,
        bound_perturbed: Some(perturbed),
        robust_shift: shift,
        robust_envelope: envelope,
        admissible_fraction,
        records,
    })
}

/// Run every point of the sweep described by `spec`.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let mut points = Vec::with_capacity(spec.sweep_values.len());
    let variable = spec.sweep_variable().to_string();
    match spec.experiment {
        ExperimentKind::StaticNSweep => {
            let pipeline = Pipeline::Static(static_experiment_for(spec, spec.qubits)?);
            let m = cube_configs(spec.qubits);
            for (i, &v) in spec.sweep_values.iter().enumerate() {
                points.push(run_point(&pipeline, spec, i, v, v * m, true)?);
            }
        }
        ExperimentKind::StaticQubitSweep => {
            for (i, &n) in spec.sweep_values.iter().enumerate() {
                let pipeline = Pipeline::Static(static_experiment_for(spec, n as usize)?);
                let copies = spec.shots_per_config * cube_configs(n as usize);
                points.push(run_point(&pipeline, spec, i, n, copies, true)?);
            }
        }
        ExperimentKind::DynamicNSweep => {
            let pipeline = Pipeline::Dynamic(dynamic_experiment_for(spec)?);
            for (i, &v) in spec.sweep_values.iter().enumerate() {
                points.push(run_point(&pipeline, spec, i, v, v, true)?);
            }
        }
        ExperimentKind::BoundsOnly => {
            let pipeline = match spec.bounds_setting {
                Setting::Static => Pipeline::Static(static_experiment_for(spec, spec.qubits)?),
                Setting::Dynamic => Pipeline::Dynamic(dynamic_experiment_for(spec)?),
            };
            let m = match spec.bounds_setting {
                Setting::Static => cube_configs(spec.qubits),
                Setting::Dynamic => 1,
            };
            for (i, &v) in spec.sweep_values.iter().enumerate() {
                points.push(run_point(&pipeline, spec, i, v, v * m, false)?);
            }
        }
    }
    Ok(SweepResult {
        variable,
        trials: if spec.experiment == ExperimentKind::BoundsOnly { 0 } else { spec.trials },
        points,
    })
}

/// Number of Cube configurations on `n` qubits, `3^n`.
pub fn cube_configs(n_qubits: usize) -> u64 {
    3u64.pow(n_qubits as u32)
}
