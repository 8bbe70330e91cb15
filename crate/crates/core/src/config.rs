//! Sweep configuration: one strict JSON document, optionally overridden by
//! command-line flags, validated into a [`SweepSpec`].

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::basis::{make_basis, Convention};
use crate::dynamic_lre::{max_admissible_delta_dynamic, DeltaBoundForm};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, RVector};
use crate::perturb::{NormMode, PovmPerturbation};
use crate::sim::{dynamic_experiment_for, NoiseModel, ReconstructionMode, ShotAllocation, StaticExperiment};
use crate::static_lre::max_admissible_eps_static;

/// Largest qubit count accepted for Cube sweeps.
pub const MAX_QUBITS: usize = 4;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Single-system static sweep over shots per configuration `N / M`.
    StaticNSweep,
    /// Static sweep over the number of qubits at fixed `N / M`.
    StaticQubitSweep,
    /// Dynamic sweep over `N`.
    DynamicNSweep,
    /// Nominal and robust bounds only, no trials.
    BoundsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    #[default]
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    #[serde(default)]
    pub eps_p: f64,
    #[serde(default)]
    pub eps_o: f64,
    #[serde(default)]
    pub eps_h: f64,
    /// When set, rescales the budgets so the perturbation sits at this
    /// fraction of the admissibility limit. For the dynamic setting the
    /// configured `(eps_o, eps_h)` give the direction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissible_fraction: Option<f64>,
    #[serde(default)]
    pub norm_mode: NormMode,
    /// Bound on the observability-matrix perturbation used by dynamic runs.
    #[serde(default)]
    pub delta_bound: DeltaBoundForm,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            eps_p: 0.0,
            eps_o: 0.0,
            eps_h: 0.0,
            admissible_fraction: None,
            norm_mode: NormMode::default(),
            delta_bound: DeltaBoundForm::default(),
        }
    }
}

/// A Hermitian operator given either as Pauli weights `(x, y, z)` on one
/// qubit or as coefficients over the traceless orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Pauli([f64; 3]),
    Basis { dim: usize, coefficients: Vec<f64> },
}

impl OperatorSpec {
    pub fn dim(&self) -> usize {
        match self {
            OperatorSpec::Pauli(_) => 2,
            OperatorSpec::Basis { dim, .. } => *dim,
        }
    }

    pub fn matrix(&self) -> Result<CMatrix> {
        match self {
            OperatorSpec::Pauli([x, y, z]) => {
                let c = |re: f64, im: f64| Complex64::new(re, im);
                Ok(CMatrix::from_row_slice(2, 2, &[c(*z, 0.0), c(*x, -*y), c(*x, *y), c(-*z, 0.0)]))
            }
            OperatorSpec::Basis { dim, coefficients } => {
                let basis = make_basis(*dim)?;
                if coefficients.len() != basis.traceless_len() {
                    return Err(Error::shape(basis.traceless_len(), coefficients.len()));
                }
                basis.reconstruct(coefficients)
            }
        }
    }

    /// Coefficients over the traceless basis.
    pub fn coefficients(&self) -> Result<RVector> {
        match self {
            OperatorSpec::Basis { coefficients, .. } => Ok(RVector::from_column_slice(coefficients)),
            OperatorSpec::Pauli(_) => make_basis(2)?.expand(&self.matrix()?, Convention::Traceless),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    #[serde(default = "default_hamiltonian")]
    pub hamiltonian: OperatorSpec,
    #[serde(default = "default_observable")]
    pub observable: OperatorSpec,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub shot_allocation: ShotAllocation,
}

fn default_hamiltonian() -> OperatorSpec {
    OperatorSpec::Pauli([0.2, 0.3, 0.5])
}

fn default_observable() -> OperatorSpec {
    OperatorSpec::Pauli([1.0, 0.0, 0.0])
}

fn default_dt() -> f64 {
    0.05
}

fn default_samples() -> usize {
    24
}

impl Default for DynamicsSpec {
    fn default() -> Self {
        DynamicsSpec {
            hamiltonian: default_hamiltonian(),
            observable: default_observable(),
            dt: default_dt(),
            samples: default_samples(),
            shot_allocation: ShotAllocation::default(),
        }
    }
}

impl DynamicsSpec {
    /// Hamiltonian coefficients and observable matrix.
    pub fn resolve(&self) -> Result<(RVector, CMatrix)> {
        Ok((self.hamiltonian.coefficients()?, self.observable.matrix()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub experiment: ExperimentKind,
    /// Points of the swept variable; filled with the kind's default grid when
    /// empty.
    #[serde(default)]
    pub sweep_values: Vec<u64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Qubit count for static sweeps over `N / M`.
    #[serde(default = "default_qubits")]
    pub qubits: usize,
    /// Shots per configuration `N / M` for qubit sweeps.
    #[serde(default = "default_shots_per_config")]
    pub shots_per_config: u64,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub dynamics: DynamicsSpec,
    #[serde(default)]
    pub reconstruction: ReconstructionMode,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub povm_perturbation: PovmPerturbation,
    /// Which setting a bounds-only run evaluates.
    #[serde(default)]
    pub bounds_setting: Setting,
    #[serde(default = "default_output")]
    pub output: String,
    /// Non-fatal findings from validation, such as a budget past the
    /// admissibility limit.
    #[serde(skip)]
    pub warnings: Vec<String>,
}

fn default_trials() -> usize {
    100
}

fn default_qubits() -> usize {
    1
}

fn default_shots_per_config() -> u64 {
    1_000_000
}

fn default_output() -> String {
    "results".into()
}

const DEFAULT_N_GRID: [u64; 5] = [100, 1_000, 10_000, 100_000, 1_000_000];

impl SweepSpec {
    pub fn new(experiment: ExperimentKind) -> Self {
        let mut spec: SweepSpec =
            serde_json::from_value(serde_json::json!({ "experiment": experiment })).expect("defaults deserialize");
        spec.fill_defaults();
        spec
    }

    /// Name of the swept variable, used as the first CSV column's meaning.
    pub fn sweep_variable(&self) -> &'static str {
        match (self.experiment, self.bounds_setting) {
            (ExperimentKind::StaticQubitSweep, _) => "qubits",
            (ExperimentKind::StaticNSweep, _) | (ExperimentKind::BoundsOnly, Setting::Static) => "shots_per_config",
            (ExperimentKind::DynamicNSweep, _) | (ExperimentKind::BoundsOnly, Setting::Dynamic) => "copies",
        }
    }

    /// Whether the run touches the dynamic pipeline.
    pub fn uses_dynamics(&self) -> bool {
        self.experiment == ExperimentKind::DynamicNSweep
            || (self.experiment == ExperimentKind::BoundsOnly && self.bounds_setting == Setting::Dynamic)
    }

    fn fill_defaults(&mut self) {
        if self.sweep_values.is_empty() {
            self.sweep_values = match self.experiment {
                ExperimentKind::StaticQubitSweep => vec![1, 2, 3],
                _ => DEFAULT_N_GRID.to_vec(),
            };
        }
    }

    /// Check every parameter the chosen kind needs and collect warnings.
    pub fn validate(&mut self) -> Result<()> {
        self.fill_defaults();
        self.warnings.clear();
        let bad = |path: &str, message: String| Error::Config {
            path: path.into(),
            message,
        };
        if self.trials < 1 {
            return Err(bad("trials", "must be at least 1".into()));
        }
        if let Some(i) = self.sweep_values.iter().position(|&v| v == 0) {
            return Err(bad(&format!("sweep_values[{i}]"), "must be positive".into()));
        }
        if self.output.is_empty() {
            return Err(bad("output", "must not be empty".into()));
        }
        for (key, v) in [("eps_p", self.budget.eps_p), ("eps_o", self.budget.eps_o), ("eps_h", self.budget.eps_h)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad(&format!("budget.{key}"), format!("must be finite and non-negative, got {v}")));
            }
        }
        if let Some(f) = self.budget.admissible_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(bad("budget.admissible_fraction", format!("must lie in (0, 1), got {f}")));
            }
        }

        if self.uses_dynamics() {
            self.validate_dynamics()?;
        } else {
            let qubit_counts: Vec<usize> = match self.experiment {
                ExperimentKind::StaticQubitSweep => {
                    if self.shots_per_config == 0 {
                        return Err(bad("shots_per_config", "must be positive".into()));
                    }
                    for (i, &n) in self.sweep_values.iter().enumerate() {
                        if n as usize > MAX_QUBITS {
                            return Err(bad(&format!("sweep_values[{i}]"), format!("at most {MAX_QUBITS} qubits supported, got {n}")));
                        }
                    }
                    self.sweep_values.iter().map(|&n| n as usize).collect()
                }
                _ => {
                    if self.qubits == 0 || self.qubits > MAX_QUBITS {
                        return Err(bad("qubits", format!("must lie in 1..={MAX_QUBITS}, got {}", self.qubits)));
                    }
                    vec![self.qubits]
                }
            };
            if self.budget.admissible_fraction.is_none() {
                for n in qubit_counts {
                    let exp = StaticExperiment::cube(n, self.budget.eps_p).map_err(|e| bad("qubits", e.to_string()))?;
                    let max = max_admissible_eps_static(&exp.design).map_err(|e| bad("qubits", e.to_string()))?;
                    if self.budget.eps_p >= max {
                        self.warnings.push(format!(
                            "eps_p = {} is at or past the admissible limit {max} for {n} qubit(s); robust bounds will be reported inadmissible",
                            self.budget.eps_p
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_dynamics(&mut self) -> Result<()> {
        let bad = |path: &str, message: String| Error::Config {
            path: path.into(),
            message,
        };
        let d = &self.dynamics;
        if !(d.dt.is_finite() && d.dt > 0.0) {
            return Err(bad("dynamics.dt", format!("must be positive, got {}", d.dt)));
        }
        if d.samples < 1 {
            return Err(bad("dynamics.samples", "must be at least 1".into()));
        }
        for (key, op) in [("dynamics.hamiltonian", &d.hamiltonian), ("dynamics.observable", &d.observable)] {
            op.matrix().map_err(|e| bad(key, e.to_string()))?;
        }
        if d.hamiltonian.dim() != d.observable.dim() {
            return Err(bad(
                "dynamics",
                format!("hamiltonian acts on dimension {} but observable on {}", d.hamiltonian.dim(), d.observable.dim()),
            ));
        }
        if d.shot_allocation == ShotAllocation::Split {
            let s = d.samples as u64;
            if let Some(i) = self.sweep_values.iter().position(|&n| n % s != 0) {
                return Err(bad(
                    &format!("sweep_values[{i}]"),
                    format!("{} is not divisible by {s} samples under split allocation", self.sweep_values[i]),
                ));
            }
        }
        if self.budget.eps_o == 0.0 && self.budget.eps_h == 0.0 && self.budget.admissible_fraction.is_some() {
            return Err(bad("budget.admissible_fraction", "needs a non-zero eps_o or eps_h direction".into()));
        }
        let exp = dynamic_experiment_for(self).map_err(|e| bad("dynamics", e.to_string()))?;
        if self.budget.admissible_fraction.is_none() {
            let max = max_admissible_delta_dynamic(&exp.obs_matrix).map_err(|e| bad("dynamics", e.to_string()))?;
            let delta = exp.delta_bound();
            if delta >= max {
                self.warnings.push(format!(
                    "observability perturbation bound {delta} is at or past the admissible limit {max}; robust bounds will be reported inadmissible"
                ));
            }
        }
        Ok(())
    }
}

/// Record written next to the results; parses back into the same spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub code_version: String,
    pub master_seed: u64,
    pub spec: SweepSpec,
}

impl Manifest {
    pub fn new(spec: &SweepSpec) -> Self {
        Manifest {
            code_version: CODE_VERSION.into(),
            master_seed: spec.seed,
            spec: spec.clone(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub output: Option<String>,
}

fn from_value<T: serde::de::DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner.as_str()) {
            (true, _) => inner,
            (false, ".") => prefix.to_string(),
            (false, _) => format!("{prefix}.{inner}"),
        };
        Error::Config {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

/// Parse a sweep config or a run manifest from JSON text and validate it.
pub fn parse_config_str(text: &str, overrides: &Overrides) -> Result<SweepSpec> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config {
        path: ".".into(),
        message: e.to_string(),
    })?;
    let mut value = match value {
        Value::Object(ref map) if map.contains_key("spec") => {
            let manifest: Manifest = from_value(value, "")?;
            serde_json::to_value(manifest.spec).expect("spec serializes")
        }
        other => other,
    };
    if let Some(kind) = overrides.experiment {
        let Value::Object(map) = &mut value else {
            return Err(Error::Config {
                path: ".".into(),
                message: "config must be a JSON object".into(),
            });
        };
        let wanted = serde_json::to_value(kind).expect("kind serializes");
        match map.get("experiment") {
            None => {
                map.insert("experiment".into(), wanted);
            }
            Some(found) if *found == wanted => {}
            Some(found) => {
                return Err(Error::Config {
                    path: "experiment".into(),
                    message: format!("config names {found} but the command runs {wanted}"),
                })
            }
        }
    }
    let mut spec: SweepSpec = from_value(value, "")?;
    if let Some(seed) = overrides.seed {
        spec.seed = seed;
    }
    if let Some(trials) = overrides.trials {
        spec.trials = trials;
    }
    if let Some(out) = &overrides.output {
        spec.output = out.clone();
    }
    spec.validate()?;
    Ok(spec)
}

/// Parse a config or manifest file.
pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, overrides)
}
