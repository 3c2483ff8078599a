//! Typed run configurations read from TOML files (or from the `config` object of a
//! previous run's `manifest.json`).

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ostrovsky::estimates::{DataLaw, EstimateParams};
use ostrovsky::solver::Integrator;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ConfigError;

pub fn load_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), load)
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    let is_manifest = path.extension().is_some_and(|e| e == "json");
    let parsed = if is_manifest {
        let manifest: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let config = manifest
            .get("config")
            .cloned()
            .ok_or_else(|| ConfigError(format!("{} has no `config` object", path.display())))?;
        serde_json::from_value(config).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.message())))
    };
    parsed.context("invalid configuration")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_points: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSection {
    pub beta: f64,
    pub gamma: f64,
    pub k: u32,
}

fn default_snapshot_every() -> usize {
    1
}

fn default_monitor_s() -> f64 {
    2.0
}

fn default_cfl_safety() -> f64 {
    0.5
}

fn default_integrator() -> Integrator {
    Integrator::Ifrk4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_monitor_s")]
    pub monitor_s: f64,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default = "default_cfl_safety")]
    pub cfl_safety: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// Mean-zero Gaussian centred in the domain.
    Gaussian { amplitude: f64, width: f64 },
    /// Gaussian rescaled to a prescribed `H^1` norm.
    GaussianH1 { h1_norm: f64, width: f64 },
    /// gKdV traveling wave of the given speed, centred in the domain.
    Soliton { speed: f64 },
    /// Samples read from a snapshot file on the same grid.
    Snapshot { path: PathBuf },
    Zero,
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Gaussian {
            amplitude: 1.0,
            width: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub grid: GridSection,
    pub equation: EquationSection,
    pub time: TimeSection,
    #[serde(default)]
    pub initial: InitialData,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub gammas: Vec<f64>,
    pub t_cmp: f64,
    pub s: f64,
    pub snapshot_every: usize,
    pub floor_factor: f64,
    pub reference_gamma: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            gammas: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            t_cmp: 0.5,
            s: 2.0,
            snapshot_every: 10,
            floor_factor: 10.0,
            reference_gamma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGammaConfig {
    pub grid: GridSection,
    pub beta: f64,
    pub k: u32,
    pub dt: f64,
    pub sweep: SweepSection,
    pub initial: InitialData,
}

impl Default for SweepGammaConfig {
    fn default() -> Self {
        Self {
            grid: GridSection {
                n_points: 256,
                length: 40.0,
            },
            beta: -1.0,
            k: 5,
            dt: 0.002,
            sweep: SweepSection::default(),
            initial: InitialData::Gaussian {
                amplitude: 0.8,
                width: 1.5,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub n_blocks: Vec<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub tol: f64,
    pub threshold: f64,
    pub samples_per_region: usize,
    pub seed: u64,
    pub scaled_x_max: f64,
    pub scaled_t_max: f64,
    pub fit_exponent: bool,
    pub fit_range: [f64; 2],
    pub fit_points: usize,
    /// Exponent of the mixed-norm check; `0` skips it.
    pub gamma_exp: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            n_blocks: vec![16.0, 32.0, 64.0],
            beta: -1.0,
            gamma: 1.0,
            tol: 1e-9,
            threshold: 1.0,
            samples_per_region: 200,
            seed: 0,
            scaled_x_max: 32.0,
            scaled_t_max: 64.0,
            fit_exponent: true,
            fit_range: [1.0, 64.0],
            fit_points: 13,
            gamma_exp: 8.0,
        }
    }
}

/// Optional overrides of the per-tag default probe setup.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatesConfig {
    /// Tags to run; empty means all.
    pub which: Vec<String>,
    pub seed: Option<u64>,
    pub draws: Option<usize>,
    pub n_points: Option<usize>,
    pub length: Option<f64>,
    pub window: Option<f64>,
    pub amplitude: Option<f64>,
    pub law: Option<DataLaw>,
    pub params: Option<EstimateParams>,
    pub bilinear_s: Option<f64>,
    pub multilinear_k: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardConfig {
    pub grid: GridSection,
    pub beta: f64,
    pub gamma: f64,
    pub k: u32,
    pub dt: f64,
    pub delta: f64,
    pub iterations: usize,
    pub initial: InitialData,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            grid: GridSection {
                n_points: 256,
                length: 40.0,
            },
            beta: -1.0,
            gamma: 1.0,
            k: 5,
            dt: 1e-3,
            delta: 0.05,
            iterations: 40,
            initial: InitialData::GaussianH1 {
                h1_norm: 0.1,
                width: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvariantsConfig {
    pub snapshot: Option<PathBuf>,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub l2_gate: f64,
    pub hamiltonian_gate: f64,
}

impl Default for InvariantsConfig {
    fn default() -> Self {
        Self {
            snapshot: None,
            dt: 1e-3,
            t_end: 0.1,
            snapshot_every: 10,
            l2_gate: 1e-8,
            hamiltonian_gate: 1e-6,
        }
    }
}
