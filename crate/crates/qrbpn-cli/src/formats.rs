//! On-disk artifact schemas: sweep results, metrics tables, job bundles.
//!
//! Sweep results are line-delimited JSON — one header object followed by one
//! object per (qubit, point) cell — which streams comfortably at fleet scale
//! (thousands of qubits times dozens of points) and diffs line by line.
//! Metrics are CSV with full-precision values. Job and result bundles are
//! single JSON documents exchanged with external hardware glue.
//!
//! Every file carries `schema` and `version` fields. Readers accept any
//! minor version of a known major and refuse newer majors loudly.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use qrbpn_core::metrics::QubitMetrics;
use qrbpn_core::protocol::{NativeGate, SweepGrid};

use crate::config::{BackendKind, NoiseSpec, RunConfig};
use crate::error::{CliError, Result};

pub const SWEEP_SCHEMA: &str = "qrbpn.sweep";
pub const JOBS_SCHEMA: &str = "qrbpn.jobs";
pub const RESULTS_SCHEMA: &str = "qrbpn.results";
pub const CURRENT_VERSION: SchemaVersion = SchemaVersion { major: 1, minor: 0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaVersion {
    pub major: u32,
    pub minor: u32,
}

fn check_schema(path: &Path, schema: &str, version: SchemaVersion, expected: &str) -> Result<()> {
    if schema != expected {
        return Err(CliError::schema(format!(
            "{}: schema {schema:?} where {expected:?} was expected",
            path.display()
        )));
    }
    if version.major > CURRENT_VERSION.major {
        return Err(CliError::schema(format!(
            "{}: file version {}.{} is newer than the supported {}.x; refusing to guess",
            path.display(),
            version.major,
            version.minor,
            CURRENT_VERSION.major
        )));
    }
    Ok(())
}

/// Timestamp for file metadata; honors `SOURCE_DATE_EPOCH` so identical runs
/// can produce byte-identical artifacts.
pub fn created_utc() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|epoch| chrono::DateTime::from_timestamp(epoch, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// How the cells of a sweep file were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Sampled,
    Exact,
}

/// First line of a sweep result file: config echo plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepHeader {
    pub schema: String,
    pub version: SchemaVersion,
    pub created_utc: String,
    pub tool_version: String,
    pub chip_id: String,
    pub backend: BackendKind,
    pub mode: SweepMode,
    pub beta: f64,
    pub shots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_reads: Option<u64>,
    pub seed: u64,
    pub phi: f64,
    pub grid: SweepGrid,
    pub qubits: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

impl SweepHeader {
    pub fn for_run(config: &RunConfig) -> Self {
        SweepHeader {
            schema: SWEEP_SCHEMA.to_string(),
            version: CURRENT_VERSION,
            created_utc: created_utc(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            chip_id: config.chip_id.clone(),
            backend: config.backend,
            mode: if config.shots == 0 { SweepMode::Exact } else { SweepMode::Sampled },
            beta: config.beta.value(),
            shots: config.shots,
            num_reads: config.num_reads,
            seed: config.seed,
            phi: config.phi,
            grid: config.grid,
            qubits: config.qubits.clone(),
            noise: config.noise.clone(),
        }
    }
}

/// One (qubit, point) cell. Sampled files carry counts; exact files carry
/// the closed-form mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub qubit: u32,
    pub point: u32,
    pub h_in: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_plus: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_minus: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_mean: Option<f64>,
}

/// A parsed sweep result file.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResultFile {
    pub header: SweepHeader,
    pub cells: Vec<SweepCell>,
}

impl SweepResultFile {
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| {
            CliError::config(format!("cannot write {}: {e}", path.display()))
        })?;
        let mut w = BufWriter::new(file);
        let emit = |w: &mut BufWriter<fs::File>, value: String| -> Result<()> {
            w.write_all(value.as_bytes())
                .and_then(|_| w.write_all(b"\n"))
                .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
        };
        emit(&mut w, serde_json::to_string(&self.header).expect("header serializes"))?;
        for cell in &self.cells {
            emit(&mut w, serde_json::to_string(cell).expect("cell serializes"))?;
        }
        w.flush()
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| {
            CliError::config(format!("cannot read {}: {e}", path.display()))
        })?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| CliError::schema(format!("{}: empty file", path.display())))?
            .map_err(|e| CliError::schema(format!("{}: {e}", path.display())))?;
        let header: SweepHeader = serde_json::from_str(&header_line).map_err(|e| {
            CliError::schema(format!("{}: bad header line: {e}", path.display()))
        })?;
        check_schema(path, &header.schema, header.version, SWEEP_SCHEMA)?;

        let mut cells = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line.map_err(|e| CliError::schema(format!("{}: {e}", path.display())))?;
            if line.is_empty() {
                continue;
            }
            let cell: SweepCell = serde_json::from_str(&line).map_err(|e| {
                CliError::schema(format!("{}: bad cell on line {}: {e}", path.display(), idx + 2))
            })?;
            validate_cell(path, &header, idx + 2, &cell)?;
            cells.push(cell);
        }
        Ok(SweepResultFile { header, cells })
    }
}

fn validate_cell(path: &Path, header: &SweepHeader, lineno: usize, cell: &SweepCell) -> Result<()> {
    match header.mode {
        SweepMode::Sampled => match (cell.n_plus, cell.n_minus) {
            (Some(p), Some(m)) if p + m == header.shots => Ok(()),
            (Some(p), Some(m)) => Err(CliError::schema(format!(
                "{}: line {lineno}: counts {p}+{m} do not sum to {} shots",
                path.display(),
                header.shots
            ))),
            _ => Err(CliError::schema(format!(
                "{}: line {lineno}: sampled cell is missing counts",
                path.display()
            ))),
        },
        SweepMode::Exact => {
            if cell.exact_mean.is_none() {
                return Err(CliError::schema(format!(
                    "{}: line {lineno}: exact cell is missing its mean",
                    path.display()
                )));
            }
            Ok(())
        }
    }
}

/// One row of a metrics CSV. Fit failures leave the numeric columns empty
/// and carry the reason in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub chip_id: String,
    pub qubit_id: u32,
    pub response: Option<f64>,
    pub bias: Option<f64>,
    pub neg_saturation: Option<f64>,
    pub pos_saturation: Option<f64>,
    pub fit_points: Option<usize>,
    pub fit_rms_residual: Option<f64>,
    pub clamped_points: Option<usize>,
    #[serde(default)]
    pub error: Option<String>,
}

impl MetricsRow {
    pub fn ok(m: &QubitMetrics) -> Self {
        MetricsRow {
            chip_id: m.chip_id.clone(),
            qubit_id: m.qubit_id,
            response: Some(m.response),
            bias: Some(m.bias),
            neg_saturation: Some(m.neg_saturation),
            pos_saturation: Some(m.pos_saturation),
            fit_points: Some(m.fit_points),
            fit_rms_residual: Some(m.fit_rms_residual),
            clamped_points: Some(m.clamped_points),
            error: None,
        }
    }

    pub fn failed(chip_id: &str, qubit_id: u32, reason: &str) -> Self {
        MetricsRow {
            chip_id: chip_id.to_string(),
            qubit_id,
            response: None,
            bias: None,
            neg_saturation: None,
            pos_saturation: None,
            fit_points: None,
            fit_rms_residual: None,
            clamped_points: None,
            error: Some(reason.to_string()),
        }
    }

    /// Convert an ok-row back into metrics; `None` for error rows.
    pub fn into_metrics(&self) -> Option<QubitMetrics> {
        if self.error.as_deref().is_some_and(|e| !e.is_empty()) {
            return None;
        }
        Some(QubitMetrics {
            chip_id: self.chip_id.clone(),
            qubit_id: self.qubit_id,
            response: self.response?,
            bias: self.bias?,
            neg_saturation: self.neg_saturation?,
            pos_saturation: self.pos_saturation?,
            fit_points: self.fit_points?,
            fit_rms_residual: self.fit_rms_residual?,
            clamped_points: self.clamped_points?,
        })
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    }
    w.flush()
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let headers = r
        .headers()
        .map_err(|e| CliError::schema(format!("{}: {e}", path.display())))?
        .clone();
    if !headers.iter().any(|h| h == "response") || !headers.iter().any(|h| h == "chip_id") {
        return Err(CliError::schema(format!(
            "{}: not a metrics CSV (header: {})",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| CliError::schema(format!("{}: {e}", path.display()))))
        .collect()
}

/// One hardware job: the 5-gate native program for gate machines, or the
/// (sign-flipped) local field plus chip settings for annealers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub qubit: u32,
    pub point: u32,
    /// The sweep value this job realizes, in the sampling convention.
    pub h_in: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gates: Option<Vec<NativeGate>>,
    /// Hardware-ready annealer field; negated because annealers minimize
    /// `+h * sigma` while the sampling convention favors `+1` at positive h.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<f64>,
}

/// Annealer data-collection settings carried alongside the jobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSettings {
    pub num_reads: u64,
    pub annealing_time_us: f64,
    pub flux_drift_compensation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobBundle {
    pub schema: String,
    pub version: SchemaVersion,
    pub created_utc: String,
    pub tool_version: String,
    pub chip_id: String,
    pub backend: BackendKind,
    pub beta: f64,
    /// Total shots expected back per (qubit, point) cell.
    pub shots_per_cell: u64,
    pub seed: u64,
    pub phi: f64,
    pub grid: SweepGrid,
    pub qubits: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<AnnealSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    pub jobs: Vec<Job>,
}

impl JobBundle {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bundle: JobBundle = read_json(path)?;
        check_schema(path, &bundle.schema, bundle.version, JOBS_SCHEMA)?;
        Ok(bundle)
    }
}

/// Raw counts returned by hardware for one job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub id: String,
    pub qubit: u32,
    pub point: u32,
    pub n_plus: u64,
    pub n_minus: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub schema: String,
    pub version: SchemaVersion,
    pub chip_id: String,
    pub results: Vec<JobResult>,
}

impl ResultBundle {
    pub fn new(chip_id: &str, results: Vec<JobResult>) -> Self {
        ResultBundle {
            schema: RESULTS_SCHEMA.to_string(),
            version: CURRENT_VERSION,
            chip_id: chip_id.to_string(),
            results,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bundle: ResultBundle = read_json(path)?;
        check_schema(path, &bundle.schema, bundle.version, RESULTS_SCHEMA)?;
        Ok(bundle)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::schema(format!("{}: {e}", path.display())))
}
