//! Run configuration: JSON schema, defaults and validation.

use std::path::Path;

use riskagg::marginals::MarginalSpec;
use riskagg::osde::{SmoothnessParams, DEFAULT_K_CAP};
use riskagg::QaeMode;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const DEFAULT_GRID_BITS: u32 = 10;
pub const DEFAULT_CLASSICAL_N: usize = 1_000_000;

fn default_grid_bits() -> u32 {
    DEFAULT_GRID_BITS
}

fn default_clip() -> f64 {
    riskagg::copula::DEFAULT_CLIP
}

fn default_k_cap() -> usize {
    DEFAULT_K_CAP
}

fn default_classical_n() -> usize {
    DEFAULT_CLASSICAL_N
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalConfig {
    #[serde(flatten)]
    pub spec: MarginalSpec<f64>,
    #[serde(default = "default_grid_bits")]
    pub grid_bits: u32,
    /// Grid range; defaults to eight standard deviations either side,
    /// widened to cover the truncation window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaKind {
    Independence,
    Gaussian,
    StudentT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaConfig {
    pub kind: CopulaKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dof: Option<f64>,
    #[serde(default = "default_clip")]
    pub clip: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSelection {
    Var,
    Tvar,
    Both,
}

impl MeasureSelection {
    pub fn wants_var(self) -> bool {
        matches!(self, Self::Var | Self::Both)
    }

    pub fn wants_tvar(self) -> bool {
        matches!(self, Self::Tvar | Self::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskConfig {
    pub measure: MeasureSelection,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    Quantum,
    Classical,
    Both,
}

impl PipelineMode {
    pub fn quantum(self) -> bool {
        matches!(self, Self::Quantum | Self::Both)
    }

    pub fn classical(self) -> bool {
        matches!(self, Self::Classical | Self::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: PipelineMode,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default)]
    pub qae: QaeMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_classical_n", alias = "classical_N")]
    pub classical_n: usize,
    #[serde(default = "default_k_cap", alias = "K_cap")]
    pub k_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub marginals: Vec<MarginalConfig>,
    pub copula: CopulaConfig,
    /// One entry per marginal; omitted means r = 4, γ = 1 throughout.
    #[serde(default)]
    pub smoothness: Vec<SmoothnessParams<f64>>,
    pub risk: RiskConfig,
    pub run: RunSection,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn in_unit(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(schema(format!("{name} must lie in (0, 1), got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    /// Smoothness of marginal `i`, falling back to the defaults.
    pub fn smoothness_of(&self, i: usize) -> SmoothnessParams<f64> {
        self.smoothness.get(i).copied().unwrap_or_default()
    }

    pub fn validate(&self) -> CliResult<()> {
        let d = self.dim();
        if d == 0 {
            return Err(schema("at least one marginal is required"));
        }
        for (i, m) in self.marginals.iter().enumerate() {
            m.spec
                .validate()
                .map_err(|e| schema(format!("marginals[{i}]: {e}")))?;
            if !(2..=20).contains(&m.grid_bits) {
                return Err(schema(format!(
                    "marginals[{i}].grid_bits must lie in [2, 20], got {}",
                    m.grid_bits
                )));
            }
            if let Some([lo, hi]) = m.range {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(schema(format!("marginals[{i}].range must satisfy lo < hi")));
                }
            }
        }
        let c = &self.copula;
        if !(c.clip > 0.0 && c.clip < 0.5) {
            return Err(schema(format!(
                "copula.clip must lie in (0, 0.5), got {}",
                c.clip
            )));
        }
        match c.kind {
            CopulaKind::Independence => {
                if c.dof.is_some() {
                    return Err(schema("copula.dof applies only to student_t"));
                }
            }
            CopulaKind::Gaussian | CopulaKind::StudentT => {
                let m = c
                    .matrix
                    .as_ref()
                    .ok_or_else(|| schema("copula.matrix is required for this copula kind"))?;
                if m.len() != d || m.iter().any(|row| row.len() != d) {
                    return Err(schema(format!(
                        "copula.matrix must be {d}x{d} to match the number of marginals"
                    )));
                }
                if c.kind == CopulaKind::StudentT {
                    let dof = c
                        .dof
                        .ok_or_else(|| schema("copula.dof is required for student_t"))?;
                    if !(dof > 0.0) || !dof.is_finite() {
                        return Err(schema(format!("copula.dof must be positive, got {dof}")));
                    }
                } else if c.dof.is_some() {
                    return Err(schema("copula.dof applies only to student_t"));
                }
            }
        }
        if !self.smoothness.is_empty() && self.smoothness.len() != d {
            return Err(schema(format!(
                "smoothness must list {d} entries (one per marginal) or be omitted"
            )));
        }
        for (i, sp) in self.smoothness.iter().enumerate() {
            sp.validate()
                .map_err(|e| schema(format!("smoothness[{i}]: {e}")))?;
        }
        in_unit("risk.alpha", self.risk.alpha)?;
        in_unit("run.epsilon", self.run.epsilon)?;
        in_unit("run.delta", self.run.delta)?;
        if self.run.classical_n < 10 {
            return Err(schema("run.classical_n must be at least 10"));
        }
        if self.run.k_cap == 0 {
            return Err(schema("run.k_cap must be positive"));
        }
        Ok(())
    }
}
