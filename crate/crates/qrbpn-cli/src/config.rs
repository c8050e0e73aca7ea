//! Run configuration: defaults, config file, flags, and environment.
//!
//! Precedence, lowest to highest: built-in defaults, `--config` file values,
//! command-line flags, then the `QRBPN_SEED` environment variable for the
//! seed alone. Defaults follow the standard data-collection settings:
//! `beta = 10`, fit window `[-0.1, 0.1]`, 900-point sweeps at 8192 shots for
//! gate machines, 81-point sweeps at 5e6 aggregate reads (in programming
//! cycles of 10000) for annealers. `shots = 0` selects exact mode, which
//! records closed-form means instead of sampled counts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qrbpn_core::backends::{QaNoiseModel, QcNoiseModel, Simulator};
use qrbpn_core::metrics::{FitWeighting, FitWindow};
use qrbpn_core::protocol::{Beta, SweepGrid};

use crate::error::{CliError, Result};

pub const ENV_SEED: &str = "QRBPN_SEED";

/// Which computational model the run targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Gate,
    Anneal,
}

impl BackendKind {
    pub fn default_grid_points(self) -> usize {
        match self {
            BackendKind::Gate => 900,
            BackendKind::Anneal => 81,
        }
    }

    pub fn default_shots(self) -> u64 {
        match self {
            BackendKind::Gate => 8192,
            BackendKind::Anneal => 5_000_000,
        }
    }

    pub fn default_chip_id(self) -> &'static str {
        match self {
            BackendKind::Gate => "ideal-gate",
            BackendKind::Anneal => "ideal-anneal",
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gate" => Ok(BackendKind::Gate),
            "anneal" => Ok(BackendKind::Anneal),
            other => Err(CliError::config(format!(
                "unknown backend {other:?}; expected \"gate\" or \"anneal\""
            ))),
        }
    }
}

/// Noise description loaded from `--noise-file`.
///
/// `default` applies to every qubit; `per_qubit` entries (JSON object keys
/// are qubit indices as strings) override it for individual qubits, which is
/// how heterogeneous fleets are modeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum NoiseSpec {
    Gate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chip_id: Option<String>,
        default: QcNoiseModel,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        per_qubit: BTreeMap<String, QcNoiseModel>,
    },
    Anneal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chip_id: Option<String>,
        default: QaNoiseModel,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        per_qubit: BTreeMap<String, QaNoiseModel>,
    },
}

impl NoiseSpec {
    pub fn backend_kind(&self) -> BackendKind {
        match self {
            NoiseSpec::Gate { .. } => BackendKind::Gate,
            NoiseSpec::Anneal { .. } => BackendKind::Anneal,
        }
    }

    pub fn chip_id(&self) -> Option<&str> {
        match self {
            NoiseSpec::Gate { chip_id, .. } | NoiseSpec::Anneal { chip_id, .. } => {
                chip_id.as_deref()
            }
        }
    }

    fn check_keys<'a>(keys: impl Iterator<Item = &'a String>) -> Result<()> {
        for key in keys {
            key.parse::<u32>().map_err(|_| {
                CliError::config(format!(
                    "per_qubit key {key:?} is not a qubit index; keys must be unsigned integers"
                ))
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseSpec::Gate { default, per_qubit, .. } => {
                default.validate()?;
                Self::check_keys(per_qubit.keys())?;
                for m in per_qubit.values() {
                    m.validate()?;
                }
            }
            NoiseSpec::Anneal { default, per_qubit, .. } => {
                default.validate()?;
                Self::check_keys(per_qubit.keys())?;
                for m in per_qubit.values() {
                    m.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::config(format!("cannot read noise file {}: {e}", path.display()))
        })?;
        let spec: NoiseSpec = serde_json::from_str(&text).map_err(|e| {
            CliError::config(format!("invalid noise file {}: {e}", path.display()))
        })?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub backend: BackendKind,
    pub chip_id: String,
    pub beta: Beta,
    pub grid: SweepGrid,
    /// Shots per (qubit, point) cell; 0 selects exact mode.
    pub shots: u64,
    /// Annealer programming-cycle size; `None` for gate machines.
    pub num_reads: Option<u64>,
    pub seed: u64,
    /// Measurement-plane angle for gate programs.
    pub phi: f64,
    pub qubits: Vec<u32>,
    pub window: FitWindow,
    pub weighting: FitWeighting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

impl RunConfig {
    /// Ideal configuration with all defaults for the given backend.
    pub fn ideal(backend: BackendKind) -> Self {
        RunConfig {
            backend,
            chip_id: backend.default_chip_id().to_string(),
            beta: Beta::default(),
            grid: SweepGrid::full_span(backend.default_grid_points()).expect("valid default grid"),
            shots: backend.default_shots(),
            num_reads: match backend {
                BackendKind::Anneal => Some(10_000),
                BackendKind::Gate => None,
            },
            seed: 0,
            phi: 0.0,
            qubits: vec![0],
            window: FitWindow::default(),
            weighting: FitWeighting::Unweighted,
            noise: None,
        }
    }

    /// The simulator for one qubit, with per-qubit noise overrides applied.
    pub fn simulator_for(&self, qubit: u32) -> Result<Simulator> {
        let key = qubit.to_string();
        let sim = match (&self.noise, self.backend) {
            (None, BackendKind::Gate) => Simulator::ideal_gate(),
            (None, BackendKind::Anneal) => Simulator::ideal_anneal(self.beta),
            (Some(NoiseSpec::Gate { default, per_qubit, .. }), BackendKind::Gate) => {
                Simulator::Gate(*per_qubit.get(&key).unwrap_or(default))
            }
            (Some(NoiseSpec::Anneal { default, per_qubit, .. }), BackendKind::Anneal) => {
                Simulator::Anneal(*per_qubit.get(&key).unwrap_or(default))
            }
            (Some(spec), backend) => {
                return Err(CliError::config(format!(
                    "noise file is for the {:?} model but the run targets {:?}",
                    spec.backend_kind(),
                    backend
                )))
            }
        };
        sim.validate()?;
        Ok(sim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits.is_empty() {
            return Err(CliError::config("qubit list must not be empty"));
        }
        let mut sorted = self.qubits.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.qubits.len() {
            return Err(CliError::config("qubit list contains duplicates"));
        }
        if !self.phi.is_finite() {
            return Err(CliError::config("phi must be finite"));
        }
        if let Some(nr) = self.num_reads {
            if nr == 0 {
                return Err(CliError::config("num_reads must be at least 1"));
            }
        }
        SweepGrid::new(self.grid.lo.value(), self.grid.hi.value(), self.grid.count)?;
        FitWindow::new(self.window.lo, self.window.hi)?;
        if let Some(noise) = &self.noise {
            noise.validate()?;
            if noise.backend_kind() != self.backend {
                return Err(CliError::config(format!(
                    "noise file is for the {:?} model but the run targets {:?}",
                    noise.backend_kind(),
                    self.backend
                )));
            }
        }
        for q in &self.qubits {
            self.simulator_for(*q)?;
        }
        Ok(())
    }
}

/// Partial settings read from a `--config` file; same keys as the flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub backend: Option<String>,
    pub chip_id: Option<String>,
    pub beta: Option<f64>,
    pub points: Option<usize>,
    pub grid_lo: Option<f64>,
    pub grid_hi: Option<f64>,
    pub shots: Option<u64>,
    pub num_reads: Option<u64>,
    pub seed: Option<u64>,
    pub phi: Option<f64>,
    pub qubits: Option<Vec<u32>>,
    pub window: Option<String>,
    pub weighting: Option<String>,
    pub noise_file: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::config(format!("invalid config file {}: {e}", path.display()))
        })
    }
}

/// Flag values as given on the command line (all optional).
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub backend: Option<BackendKind>,
    pub chip_id: Option<String>,
    pub beta: Option<f64>,
    pub points: Option<usize>,
    pub grid_lo: Option<f64>,
    pub grid_hi: Option<f64>,
    pub shots: Option<u64>,
    pub num_reads: Option<u64>,
    pub seed: Option<u64>,
    pub phi: Option<f64>,
    pub qubits: Option<Vec<u32>>,
    pub window: Option<(f64, f64)>,
    pub weighting: Option<FitWeighting>,
    pub noise_file: Option<PathBuf>,
}

/// Parse a `lo:hi` window argument.
pub fn parse_window(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| CliError::config(format!("window must be \"lo:hi\", got {s:?}")))?;
    let parse = |part: &str| -> Result<f64> {
        part.trim()
            .parse::<f64>()
            .map_err(|e| CliError::config(format!("bad window bound {part:?}: {e}")))
    };
    Ok((parse(lo)?, parse(hi)?))
}

pub fn parse_weighting(s: &str) -> Result<FitWeighting> {
    match s {
        "unweighted" => Ok(FitWeighting::Unweighted),
        "inverse-variance" => Ok(FitWeighting::InverseVariance),
        other => Err(CliError::config(format!(
            "unknown weighting {other:?}; expected \"unweighted\" or \"inverse-variance\""
        ))),
    }
}

/// Merge defaults, config file, flags, and environment into a run config.
pub fn resolve(file: &ConfigFile, flags: &CliOverrides) -> Result<RunConfig> {
    let backend = match (&flags.backend, &file.backend) {
        (Some(b), _) => *b,
        (None, Some(s)) => s.parse()?,
        (None, None) => {
            return Err(CliError::config(
                "backend is required (--backend gate|anneal or \"backend\" in the config file)",
            ))
        }
    };

    let noise_path = flags.noise_file.as_ref().or(file.noise_file.as_ref());
    let noise = noise_path.map(|p| NoiseSpec::load(p)).transpose()?;

    let chip_id = flags
        .chip_id
        .clone()
        .or_else(|| file.chip_id.clone())
        .or_else(|| noise.as_ref().and_then(|n| n.chip_id().map(str::to_string)))
        .unwrap_or_else(|| backend.default_chip_id().to_string());

    let beta = Beta::new(flags.beta.or(file.beta).unwrap_or(10.0))?;
    let points = flags.points.or(file.points).unwrap_or(backend.default_grid_points());
    let grid_lo = flags.grid_lo.or(file.grid_lo).unwrap_or(-1.0);
    let grid_hi = flags.grid_hi.or(file.grid_hi).unwrap_or(1.0);
    let grid = SweepGrid::new(grid_lo, grid_hi, points)?;
    let shots = flags.shots.or(file.shots).unwrap_or_else(|| backend.default_shots());
    let num_reads = match backend {
        BackendKind::Anneal => Some(flags.num_reads.or(file.num_reads).unwrap_or(10_000)),
        BackendKind::Gate => None,
    };

    let mut seed = flags.seed.or(file.seed).unwrap_or(0);
    if let Ok(env_seed) = std::env::var(ENV_SEED) {
        seed = env_seed.parse().map_err(|e| {
            CliError::config(format!("{ENV_SEED} must be an unsigned integer: {e}"))
        })?;
    }

    let phi = flags.phi.or(file.phi).unwrap_or(0.0);
    let qubits = flags.qubits.clone().or_else(|| file.qubits.clone()).unwrap_or_else(|| vec![0]);

    let window = match (flags.window, &file.window) {
        (Some(w), _) => w,
        (None, Some(s)) => parse_window(s)?,
        (None, None) => (FitWindow::default().lo, FitWindow::default().hi),
    };
    let window = FitWindow::new(window.0, window.1)?;

    let weighting = match (flags.weighting, &file.weighting) {
        (Some(w), _) => w,
        (None, Some(s)) => parse_weighting(s)?,
        (None, None) => FitWeighting::Unweighted,
    };

    let config = RunConfig {
        backend,
        chip_id,
        beta,
        grid,
        shots,
        num_reads,
        seed,
        phi,
        qubits,
        window,
        weighting,
        noise,
    };
    config.validate()?;
    Ok(config)
}
