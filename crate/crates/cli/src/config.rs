//! Model configuration: JSON schema, strict validation, builtin models.
//!
//! A model file names an operator pair `(A, B)` in row-major order, an
//! optional canonical drift block structure, and optional default overrides
//! for the suite grids.  Parsing is strict: unknown keys are rejected and
//! every matrix-level check reports the offending config key.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use kolmo_core::asymptotic::{JordanStructure, RotationBlock};
use kolmo_core::{linalg, models, OperatorSpec};

use crate::error::{CliError, Result};

pub const BUILTIN_MODELS: [&str; 4] = ["heat1d", "rotation", "kolmogorov", "mix"];

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// On-disk schema.  `A` and `B` are row-major `N*N` entry lists; `jordan`
/// carries nilpotent block sizes and `[half_size, frequency]` rotation pairs.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(default)]
    pub jordan: Option<JordanConfig>,
    #[serde(default)]
    pub defaults: Option<DefaultsConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JordanConfig {
    #[serde(default)]
    pub nilpotent: Vec<usize>,
    #[serde(default)]
    pub rotations: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefaultsConfig {
    pub p: Option<u32>,
    pub seed: Option<u64>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub t_points: Option<usize>,
    pub samples: Option<usize>,
}

/// A validated model ready for the suites.
#[derive(Debug)]
pub struct ResolvedModel {
    pub spec: OperatorSpec,
    pub structure: Option<JordanStructure>,
    pub defaults: DefaultsConfig,
}

/// Strict parse of a config document.  The returned config has passed the
/// schema check only; matrix-level validation happens in [`resolve_config`].
pub fn parse_model_config(text: &str) -> Result<ModelConfig> {
    serde_json::from_str(text).map_err(|e| CliError::input(format!("model config: {e}")))
}

fn matrix_from_key(key: &str, n: usize, entries: &[f64]) -> Result<DMatrix<f64>> {
    if entries.len() != n * n {
        return Err(CliError::input(format!(
            "config key \"{key}\": expected {} entries for N = {n}, got {}",
            n * n,
            entries.len()
        )));
    }
    if let Some(bad) = entries.iter().find(|v| !v.is_finite()) {
        return Err(CliError::input(format!(
            "config key \"{key}\": non-finite entry {bad}"
        )));
    }
    Ok(DMatrix::from_row_slice(n, n, entries))
}

/// Runs the matrix-level checks and assembles the operator and its optional
/// block structure.  Every failure names the config key it belongs to.
pub fn resolve_config(config: &ModelConfig) -> Result<ResolvedModel> {
    if config.name.is_empty() {
        return Err(CliError::input("config key \"name\": must be nonempty"));
    }
    if config.n == 0 {
        return Err(CliError::input("config key \"N\": must be positive"));
    }
    let a = matrix_from_key("A", config.n, &config.a)?;
    let b = matrix_from_key("B", config.n, &config.b)?;
    let asym = linalg::max_abs_diff(&a, &a.transpose());
    if asym > SYMMETRY_TOL {
        return Err(CliError::input(format!(
            "config key \"A\": matrix must be symmetric, off-diagonal mismatch {asym:.3e}"
        )));
    }
    let scale = a.amax().max(1.0);
    if linalg::sym_eigen_min(&a) < -PSD_TOL * scale {
        return Err(CliError::input(format!(
            "config key \"A\": matrix must be positive semidefinite, \
             smallest eigenvalue {:.3e}",
            linalg::sym_eigen_min(&a)
        )));
    }
    let spec = OperatorSpec::new(config.name.clone(), a, b)
        .map_err(|e| CliError::input(format!("config keys \"A\"/\"B\": {e}")))?;
    let structure = match &config.jordan {
        None => None,
        Some(jordan) => {
            let structure = JordanStructure {
                nilpotent_sizes: jordan.nilpotent.clone(),
                rotation_blocks: jordan
                    .rotations
                    .iter()
                    .map(|&(half_size, frequency)| RotationBlock {
                        half_size,
                        frequency,
                    })
                    .collect(),
            };
            structure
                .validate(&spec)
                .map_err(|e| CliError::input(format!("config key \"jordan\": {e}")))?;
            Some(structure)
        }
    };
    let defaults = config.defaults.clone().unwrap_or_default();
    validate_defaults(&defaults)?;
    Ok(ResolvedModel {
        spec,
        structure,
        defaults,
    })
}

fn validate_defaults(defaults: &DefaultsConfig) -> Result<()> {
    if defaults.p == Some(0) {
        return Err(CliError::input(
            "config key \"defaults.p\": must be positive",
        ));
    }
    if let Some(t_min) = defaults.t_min {
        if !(t_min > 0.0) {
            return Err(CliError::input(
                "config key \"defaults.t_min\": must be positive",
            ));
        }
    }
    if let (Some(lo), Some(hi)) = (defaults.t_min, defaults.t_max) {
        if !(hi > lo) {
            return Err(CliError::input(
                "config key \"defaults.t_max\": must exceed defaults.t_min",
            ));
        }
    }
    if let Some(points) = defaults.t_points {
        if points < 2 {
            return Err(CliError::input(
                "config key \"defaults.t_points\": need at least 2",
            ));
        }
    }
    if defaults.samples == Some(0) {
        return Err(CliError::input(
            "config key \"defaults.samples\": must be positive",
        ));
    }
    Ok(())
}

/// Bundled models, so the standard fixtures never depend on external files.
pub fn builtin(name: &str) -> Option<ResolvedModel> {
    let (spec, structure) = match name {
        "heat1d" => (models::heat(1), models::heat_structure(1)),
        "rotation" => (models::rotation(), models::rotation_structure()),
        "kolmogorov" => (models::kolmogorov(), models::kolmogorov_structure()),
        "mix" => (models::mix(), models::mix_structure()),
        _ => return None,
    };
    Some(ResolvedModel {
        spec,
        structure: Some(structure),
        defaults: DefaultsConfig::default(),
    })
}

/// Resolves `--model VALUE`: builtin name first, then a config file path.
pub fn resolve_model(value: &str) -> Result<ResolvedModel> {
    if let Some(model) = builtin(value) {
        return Ok(model);
    }
    let path = Path::new(value);
    if !path.exists() {
        return Err(CliError::input(format!(
            "model '{value}' is neither a builtin ({}) nor an existing config file",
            BUILTIN_MODELS.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path)?;
    let config = parse_model_config(&text)?;
    resolve_config(&config)
}
