//! Experiment configuration: a named scenario supplies defaults, and a TOML
//! file may override any field.

use std::path::{Path, PathBuf};

use pinncond::problems::ProblemKind;
use serde::{Deserialize, Serialize};

/// Serialisable mirror of [`ProblemKind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Poisson,
    Helmholtz,
    Advection,
}

impl Problem {
    pub fn kind(self) -> ProblemKind {
        match self {
            Problem::Poisson => ProblemKind::Poisson,
            Problem::Helmholtz => ProblemKind::Helmholtz,
            Problem::Advection => ProblemKind::Advection,
        }
    }
}

/// Configuration problems; reported with exit status 2.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("unknown scenario `{0}` (known: {known})", known = SCENARIOS.join(", "))]
    UnknownScenario(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub const SCENARIOS: [&str; 6] = [
    "poisson-fourier",
    "helmholtz-fourier",
    "advection-fourier",
    "poisson-mlp",
    "hardbc-toy",
    "spectrum-poisson",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    Fixed,
    Golden,
    Trace,
    GradRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Fourier,
    Mlp,
    FfMlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyKind {
    /// Exact matrices for the orthonormal Fourier ansatz.
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaKind {
    /// `|λ|_max / |λ|_min` over the whole spectrum.
    Full,
    /// Same ratio restricted to eigenvalues above `1e-10 · λ_max`.
    Range,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    CosSin,
    Hartley,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Gd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Plain gradient descent.
    Raw,
    /// Diagonal Fourier preconditioner.
    Precond,
    /// `(A + εI)⁻¹` gradient preconditioning.
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: Problem,
    /// Fourier cutoffs swept by Poisson runs.
    pub k_list: Vec<usize>,
    /// Transport speeds swept by advection runs.
    pub beta_list: Vec<f64>,
    /// Wave numbers swept by Helmholtz runs.
    pub omega_list: Vec<f64>,
    /// Forcing wave number of the Poisson problem.
    pub wave: f64,
    pub gamma: f64,
    pub lambda_mode: LambdaMode,
    pub lambda: f64,
    /// Seeds averaged by the gradient-ratio rule (geometric mean).
    pub grad_ratio_seeds: u64,
    pub assembly: AssemblyKind,
    pub kappa: KappaKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// Temporal cutoff of space-time Fourier models; the spatial cutoff
    /// comes from `problem.k_list`.
    pub kt: usize,
    pub basis: Basis,
    pub hidden: Vec<usize>,
    /// Fourier cutoff of the feature layer of FF-MLP models.
    pub ff_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_x: usize,
    pub n_t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub steps: usize,
    /// Step size as a fraction of `1/λ_max`.
    pub c: f64,
    pub optimizer: Optimizer,
    pub adam_lr: f64,
    pub variants: Vec<Variant>,
    pub ridge_eps: f64,
    /// Start from the zero vector instead of a seeded draw.
    pub zero_init: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub bins: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub problem: ProblemSection,
    pub model: ModelSection,
    pub grid: GridSection,
    pub train: TrainSection,
    pub spectrum: SpectrumSection,
}

impl ExperimentConfig {
    /// Defaults of a named scenario.
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig {
            scenario: name.to_string(),
            seed: 0,
            output_dir: None,
            problem: ProblemSection {
                kind: Problem::Poisson,
                k_list: vec![2, 4, 8, 16, 32],
                beta_list: vec![],
                omega_list: vec![],
                wave: 1.0,
                gamma: 1.0,
                lambda_mode: LambdaMode::Golden,
                lambda: 1.0,
                grad_ratio_seeds: 32,
                assembly: AssemblyKind::ClosedForm,
                kappa: KappaKind::Full,
            },
            model: ModelSection { kind: ModelKind::Fourier, kt: 3, basis: Basis::CosSin, hidden: vec![64, 64, 64], ff_k: 16 },
            grid: GridSection { n_x: 256, n_t: 1 },
            train: TrainSection {
                steps: 500,
                c: 0.9,
                optimizer: Optimizer::Gd,
                adam_lr: 1e-3,
                variants: vec![Variant::Raw, Variant::Precond],
                ridge_eps: pinncond::precond::DEFAULT_RIDGE_EPS,
                zero_init: false,
            },
            spectrum: SpectrumSection { bins: 50, threshold: 1e-6 },
        };
        match name {
            "poisson-fourier" => {}
            "helmholtz-fourier" => {
                cfg.problem.kind = Problem::Helmholtz;
                cfg.problem.k_list = vec![16];
                cfg.problem.omega_list = vec![2.5, 5.5, 10.5];
                cfg.problem.assembly = AssemblyKind::Quadrature;
            }
            "advection-fourier" => {
                let pi = std::f64::consts::PI;
                cfg.problem.kind = Problem::Advection;
                cfg.problem.k_list = vec![3];
                cfg.problem.beta_list = [2.0, 6.0, 15.0, 30.0, 60.0].iter().map(|b| b * pi).collect();
                cfg.model.kt = 3;
                cfg.model.basis = Basis::Hartley;
                cfg.grid = GridSection { n_x: 64, n_t: 64 };
                cfg.train.steps = 200;
                cfg.train.zero_init = true;
            }
            "poisson-mlp" => {
                cfg.problem.k_list = vec![1];
                cfg.problem.lambda_mode = LambdaMode::Fixed;
                cfg.problem.assembly = AssemblyKind::Quadrature;
                cfg.model.kind = ModelKind::Mlp;
                cfg.model.hidden = vec![32];
                cfg.grid.n_x = 128;
                cfg.train.steps = 100;
                cfg.train.variants = vec![Variant::Raw];
            }
            "hardbc-toy" => {
                let pi = std::f64::consts::PI;
                cfg.problem.k_list = vec![1];
                cfg.problem.beta_list = [2.0, 6.0, 15.0, 30.0].iter().map(|b| b * pi).collect();
                cfg.model.kt = 3;
            }
            "spectrum-poisson" => {
                cfg.problem.k_list = vec![16];
                cfg.problem.lambda_mode = LambdaMode::Fixed;
                // Large enough that the preconditioned Fourier spectrum sits
                // within [0.5, 1.5] of its median.
                cfg.problem.gamma = 10.0;
                cfg.grid.n_x = 512;
            }
            other => return Err(ConfigError::UnknownScenario(other.to_string())),
        }
        Ok(cfg)
    }

    /// Parses a TOML document: `scenario` picks the defaults, remaining keys
    /// override them.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let name = match doc.get("scenario") {
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(ConfigError::Parse("`scenario` must be a string".into())),
            None => return Err(ConfigError::Parse("missing `scenario`".into())),
        };
        let base = Self::preset(&name)?;
        let mut tree = toml::Table::try_from(&base).map_err(|e| ConfigError::Parse(e.to_string()))?;
        merge(&mut tree, doc);
        let cfg: ExperimentConfig =
            toml::Value::Table(tree).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    /// Values swept by condition-number and training runs.
    pub fn sweep(&self) -> Vec<f64> {
        match self.problem.kind {
            Problem::Poisson => self.problem.k_list.iter().map(|&k| k as f64).collect(),
            Problem::Helmholtz => self.problem.omega_list.clone(),
            Problem::Advection => self.problem.beta_list.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !SCENARIOS.contains(&self.scenario.as_str()) {
            return Err(ConfigError::UnknownScenario(self.scenario.clone()));
        }
        if self.problem.k_list.is_empty() || self.problem.k_list.contains(&0) {
            return bad("problem.k_list must be nonempty with positive entries");
        }
        if self.sweep().is_empty() {
            return bad("the swept parameter list of this problem is empty");
        }
        if self.sweep().iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("swept parameters must be finite and positive");
        }
        if !(self.problem.gamma.is_finite() && self.problem.gamma > 0.0) {
            return bad("problem.gamma must be positive");
        }
        if !(self.problem.lambda.is_finite() && self.problem.lambda >= 0.0) {
            return bad("problem.lambda must be nonnegative");
        }
        if self.problem.grad_ratio_seeds == 0 {
            return bad("problem.grad_ratio_seeds must be positive");
        }
        if !(self.train.c > 0.0 && self.train.c <= 1.0) {
            return bad("train.c must lie in (0, 1]");
        }
        if !(self.train.adam_lr > 0.0) || !(self.train.ridge_eps >= 0.0) {
            return bad("train.adam_lr must be positive and train.ridge_eps nonnegative");
        }
        if self.train.variants.is_empty() {
            return bad("train.variants must be nonempty");
        }
        if self.grid.n_x == 0 || self.grid.n_t == 0 {
            return bad("grid sizes must be positive");
        }
        if self.model.hidden.is_empty() || self.model.hidden.contains(&0) {
            return bad("model.hidden must list positive widths");
        }
        if self.spectrum.bins == 0 || !(self.spectrum.threshold > 0.0) {
            return bad("spectrum.bins and spectrum.threshold must be positive");
        }
        if self.problem.kind == Problem::Helmholtz && self.problem.assembly == AssemblyKind::ClosedForm {
            return bad("closed-form assembly exists for Poisson and advection only");
        }
        Ok(())
    }
}

/// Recursive table merge; values in `over` win.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
