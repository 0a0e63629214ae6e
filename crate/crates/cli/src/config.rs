//! Per-command configuration documents.
//!
//! Each subcommand reads one JSON object; every field has a default, unknown
//! keys are rejected, and command-line flags override file values.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use swlab_core::{Numerics, StarkShape, TiltKind, TiltProfile};

use crate::table::Format;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, ConfigError> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TiltConfig {
    pub kind: TiltKind,
    pub taper_width: i64,
}

impl Default for TiltConfig {
    fn default() -> Self {
        Self { kind: TiltKind::LinearClamped, taper_width: 0 }
    }
}

impl TiltConfig {
    pub fn profile(&self, n: i64) -> TiltProfile {
        TiltProfile { kind: self.kind, n, taper_width: self.taper_width }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnumerateConfig {
    pub nu_over_f: f64,
    pub f: f64,
    /// Defaults to `floor(nu/f) + |rung| + 1`.
    pub window_n: Option<i64>,
    pub rung: i64,
    pub max_card: Option<usize>,
    pub tilt: TiltConfig,
    /// Emit every sign pattern positive at `min S`, not only the all-positive one.
    pub all_signs: bool,
    pub output: OutputConfig,
}

impl Default for EnumerateConfig {
    fn default() -> Self {
        Self {
            nu_over_f: 3.5,
            f: 1.0,
            window_n: None,
            rung: 0,
            max_card: None,
            tilt: TiltConfig::default(),
            all_signs: false,
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CountConfig {
    pub nu_over_f: Vec<f64>,
    pub output: OutputConfig,
}

impl Default for CountConfig {
    fn default() -> Self {
        Self { nu_over_f: vec![3.5], output: OutputConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagramConfig {
    pub nu_min: f64,
    pub nu_max: f64,
    pub step: f64,
    pub max_card: Option<usize>,
    pub output: OutputConfig,
}

impl Default for DiagramConfig {
    fn default() -> Self {
        Self { nu_min: 0.05, nu_max: 10.0, step: 0.05, max_card: None, output: OutputConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ContinueMode {
    /// `lambda~` held at `mu^S`.
    Fixed,
    /// Unit norm enforced, `lambda~` solved for.
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinueConfig {
    pub nu_over_f: f64,
    pub f: f64,
    pub window_n: i64,
    pub rung: i64,
    pub offsets: Vec<i64>,
    /// Signs per site; empty means all positive.
    pub signs: Vec<i8>,
    /// Target `beta / mu^S`.
    pub beta_over_lambda: f64,
    pub steps: usize,
    pub mode: ContinueMode,
    pub tol: f64,
    pub max_iter: usize,
    pub output: OutputConfig,
}

impl Default for ContinueConfig {
    fn default() -> Self {
        Self {
            nu_over_f: 5.5,
            f: 1.0,
            window_n: 8,
            rung: 0,
            offsets: vec![0, 1],
            signs: Vec::new(),
            beta_over_lambda: 1e-3,
            steps: 8,
            mode: ContinueMode::Fixed,
            tol: 1e-12,
            max_iter: 50,
            output: OutputConfig::default(),
        }
    }
}

/// Continuum model fields shared by the semiclassical commands; `h` is per command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub v0: f64,
    pub k_l: f64,
    /// Tilt strength `F`; defaults to `h^2`.
    pub field: Option<f64>,
    /// Nonlinearity; defaults to `h^2`.
    pub eta: Option<f64>,
    pub window_n: i64,
    pub stark: StarkShape,
    pub numerics: Numerics,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            v0: 1.0,
            k_l: PI,
            field: None,
            eta: None,
            window_n: 8,
            stark: StarkShape::Tapered,
            numerics: Numerics::default(),
        }
    }
}

impl ModelConfig {
    pub fn model(&self, h: f64) -> swlab_core::Result<swlab_core::ContinuumModel> {
        let mut m = swlab_core::ContinuumModel::new(self.v0, self.k_l, h)?;
        if let Some(f) = self.field {
            m.field = f;
        }
        if let Some(e) = self.eta {
            m.eta = e;
        }
        m.window_n = self.window_n;
        m.stark = self.stark;
        m.numerics = self.numerics;
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EffectiveConfig {
    pub model: ModelConfig,
    pub h: Vec<f64>,
    pub rho_fraction: f64,
    pub output: OutputConfig,
}

impl Default for EffectiveConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            h: vec![0.05, 0.04, 0.03, 0.02],
            rho_fraction: 0.2,
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsConfig {
    pub model: ModelConfig,
    pub h: f64,
    pub n_k: usize,
    pub n_bands: usize,
    pub output: OutputConfig,
}

impl Default for BandsConfig {
    fn default() -> Self {
        Self { model: ModelConfig::default(), h: 0.05, n_k: 32, n_bands: 3, output: OutputConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub model: ModelConfig,
    pub h: Vec<f64>,
    pub rung: i64,
    pub offsets: Vec<i64>,
    /// Bound on the relative residual at the smallest `h`.
    pub residual_max: f64,
    /// Require the residual to fall as `h` decreases.
    pub monotone: bool,
    pub ladder_min: f64,
    pub ladder_max: f64,
    pub contraction_max: f64,
    pub fixed_point_tol: f64,
    pub fixed_point_max_iter: usize,
    pub output: OutputConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            h: vec![0.05, 0.04, 0.03, 0.02],
            rung: 0,
            offsets: vec![0],
            residual_max: 1e-2,
            monotone: true,
            ladder_min: 0.5,
            ladder_max: 2.0,
            contraction_max: 1.0,
            fixed_point_tol: 1e-10,
            fixed_point_max_iter: 100,
            output: OutputConfig::default(),
        }
    }
}
