//! Experiment configuration: a single JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sppc_core::{CInterpretation, Complex64, Matrix, OmpSelection, PlantModel};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoleSpec {
    Real(f64),
    /// `[re, im]`
    Complex([f64; 2]),
}

impl PoleSpec {
    fn to_complex(&self) -> Complex64 {
        match *self {
            PoleSpec::Real(re) => Complex64::new(re, 0.0),
            PoleSpec::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

/// `A` as rows, `B` as a column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitPlant {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// Realized in controllable canonical form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolePlant {
    pub poles: Vec<PoleSpec>,
}

/// Either explicit `(A, B)` or a pole list; never both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlantSpec {
    Explicit(ExplicitPlant),
    Poles(PolePlant),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Named(Identity),
    Matrix(Vec<Vec<f64>>),
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Named(Identity::Identity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    #[default]
    Omp,
    L1,
    Both,
}

impl SolverChoice {
    pub fn runs_omp(self) -> bool {
        matches!(self, SolverChoice::Omp | SolverChoice::Both)
    }

    pub fn runs_l1(self) -> bool {
        matches!(self, SolverChoice::L1 | SolverChoice::Both)
    }
}

fn default_horizon() -> usize {
    10
}
fn default_alpha() -> f64 {
    0.5
}
fn default_lambda() -> f64 {
    5.0
}
fn default_p_drop() -> f64 {
    0.5
}
fn default_steps() -> usize {
    100
}
fn default_trials() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantSpec,
    #[serde(default = "default_horizon", alias = "N")]
    pub horizon: usize,
    #[serde(default, alias = "Q")]
    pub q: WeightSpec,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub c_interpretation: CInterpretation,
    #[serde(default)]
    pub omp_selection: OmpSelection,
    #[serde(default)]
    pub solver: SolverChoice,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Bound recorded with ℓ¹ packets; defaults to `lambda`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1_fixed_bound: Option<f64>,
    /// Defaults to the all-ones vector scaled to unit norm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_p_drop")]
    pub p_drop: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<Matrix, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(CliError::Config(format!(
            "{what} must be a non-empty rectangular array"
        )));
    }
    let data = rows.iter().flatten().copied().collect();
    Matrix::new(n, rows[0].len(), data).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Range checks that do not need the plant.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} outside (0, 1)", self.alpha));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda = {} must be positive", self.lambda));
        }
        if let Some(bound) = self.l1_fixed_bound {
            if !(bound > 0.0 && bound.is_finite()) {
                return bad(format!("l1_fixed_bound = {bound} must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.p_drop) {
            return bad(format!("p_drop = {} outside [0, 1]", self.p_drop));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let Some(x0) = &self.x0 {
            if x0.iter().any(|v| !v.is_finite()) {
                return bad("x0 must be finite".into());
            }
        }
        Ok(())
    }

    /// Builds the plant. Shape and pole-structure problems are config errors;
    /// reachability is checked later by synthesis.
    pub fn build_plant(&self) -> Result<PlantModel, CliError> {
        match &self.plant {
            PlantSpec::Explicit(ExplicitPlant { a, b }) => {
                let a = matrix_from_rows(a, "plant.a")?;
                let b = Matrix::new(b.len(), 1, b.clone()).map_err(|e| CliError::Config(format!("plant.b: {e}")))?;
                PlantModel::new(a, b).map_err(|e| CliError::Config(format!("plant: {e}")))
            }
            PlantSpec::Poles(PolePlant { poles }) => {
                let poles: Vec<Complex64> = poles.iter().map(PoleSpec::to_complex).collect();
                PlantModel::from_poles(&poles).map_err(|e| CliError::Config(format!("plant.poles: {e}")))
            }
        }
    }

    pub fn weight(&self, n: usize) -> Result<Matrix, CliError> {
        match &self.q {
            WeightSpec::Named(Identity::Identity) => Ok(Matrix::identity(n)),
            WeightSpec::Matrix(rows) => {
                let q = matrix_from_rows(rows, "q")?;
                if q.rows() != n || q.cols() != n {
                    return Err(CliError::Config(format!(
                        "q must be {n}x{n}, got {}x{}",
                        q.rows(),
                        q.cols()
                    )));
                }
                Ok(q)
            }
        }
    }

    pub fn initial_state(&self, n: usize) -> Result<Vec<f64>, CliError> {
        match &self.x0 {
            Some(x0) if x0.len() != n => Err(CliError::Config(format!("x0 must have {n} entries, got {}", x0.len()))),
            Some(x0) => Ok(x0.clone()),
            None => Ok(vec![1.0 / (n as f64).sqrt(); n]),
        }
    }

    pub fn l1_bound(&self) -> f64 {
        self.l1_fixed_bound.unwrap_or(self.lambda)
    }
}
