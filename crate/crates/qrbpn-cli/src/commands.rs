//! The six commands, written as library functions so tests drive them
//! directly: simulate, fit, report, export-jobs, import-results, plot-data.
//!
//! (qubit, point) cells are embarrassingly parallel. Each cell owns an RNG
//! stream keyed by `(seed, qubit, point, batch)`, so results are identical
//! for any worker count and any evaluation order; output assembly is a
//! single ordered writer.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use qrbpn_core::backends::{SampleRequest, ShotCounts, Simulator, StreamKey};
use qrbpn_core::estimation::{curve_from_cells, curve_from_exact_means, CurveMeta, ResponseCurve};
use qrbpn_core::metrics::{metrics_for_qubit, FitWeighting, FitWindow};
use qrbpn_core::protocol::{build_gate_program, build_sweep, InputField, QubitProgram, SweepGrid};
use qrbpn_core::reporting::{
    histogram, render, summarize_chip, ChipSummary, HistogramSpec, MetricKind, ReportFormat,
};

use crate::config::{BackendKind, RunConfig};
use crate::error::{CliError, Result};
use crate::formats::{
    AnnealSettings, Job, JobBundle, JobResult, MetricsRow, ResultBundle, SweepCell, SweepHeader,
    SweepMode, SweepResultFile, CURRENT_VERSION, JOBS_SCHEMA,
};

/// Batch indices occupy the low bits of the stream key; lanes (repetitions
/// of a whole sweep, e.g. rotated measurement planes) occupy the high bits.
const LANE_SHIFT: u32 = 20;
pub const MAX_LANE: u32 = (1 << (32 - LANE_SHIFT)) - 1;
const MAX_BATCHES: u64 = 1 << LANE_SHIFT;

fn program_for(config: &RunConfig, h: InputField) -> Result<QubitProgram> {
    Ok(match config.backend {
        BackendKind::Gate => build_gate_program(h, config.beta, config.phi)?,
        BackendKind::Anneal => QubitProgram::anneal(h),
    })
}

#[derive(Debug, Clone, Copy)]
struct CellId {
    qubit: u32,
    point: u32,
    lane: u32,
}

/// Sample one cell, splitting the shot budget into programming cycles of
/// `batch_size` reads, each on its own RNG stream.
fn sample_cell(
    sim: &Simulator,
    program: QubitProgram,
    shots: u64,
    batch_size: u64,
    seed: u64,
    cell: CellId,
) -> Result<ShotCounts> {
    let batch_size = batch_size.clamp(1, shots);
    let n_batches = shots.div_ceil(batch_size);
    if n_batches > MAX_BATCHES {
        return Err(CliError::config(format!(
            "{shots} shots in cycles of {batch_size} needs {n_batches} batches; \
             the stream key fits {MAX_BATCHES} — raise num_reads"
        )));
    }
    if cell.lane > MAX_LANE {
        return Err(CliError::config(format!("lane {} exceeds {MAX_LANE}", cell.lane)));
    }
    let mut total = ShotCounts { n_plus: 0, n_minus: 0 };
    for b in 0..n_batches {
        let this_batch = batch_size.min(shots - b * batch_size);
        let req = SampleRequest {
            program,
            shots: this_batch,
            seed,
            stream_key: StreamKey {
                qubit: cell.qubit,
                point: cell.point,
                batch: (cell.lane << LANE_SHIFT) | b as u32,
            },
        };
        let counts = sim.sample(&req)?;
        total.n_plus += counts.n_plus;
        total.n_minus += counts.n_minus;
    }
    Ok(total)
}

/// Run the whole sweep in memory (lane 0).
pub fn run_sweep(config: &RunConfig) -> Result<SweepResultFile> {
    run_sweep_lane(config, 0)
}

/// Run the whole sweep on a specific stream lane.
pub fn run_sweep_lane(config: &RunConfig, lane: u32) -> Result<SweepResultFile> {
    config.validate()?;
    let points = build_sweep(&config.grid);
    let exact = config.shots == 0;
    let batch_size = config.num_reads.unwrap_or(config.shots.max(1));

    let mut tasks = Vec::with_capacity(config.qubits.len() * points.len());
    for &qubit in &config.qubits {
        let sim = config.simulator_for(qubit)?;
        for (idx, &h) in points.iter().enumerate() {
            tasks.push((qubit, idx as u32, h, sim));
        }
    }

    let cells: Vec<SweepCell> = tasks
        .par_iter()
        .map(|&(qubit, point, h, sim)| -> Result<SweepCell> {
            let program = program_for(config, h)?;
            if exact {
                let mean = sim.exact_mean(&program)?;
                Ok(SweepCell {
                    qubit,
                    point,
                    h_in: h.value(),
                    n_plus: None,
                    n_minus: None,
                    exact_mean: Some(mean),
                })
            } else {
                let counts = sample_cell(
                    &sim,
                    program,
                    config.shots,
                    batch_size,
                    config.seed,
                    CellId { qubit, point, lane },
                )?;
                Ok(SweepCell {
                    qubit,
                    point,
                    h_in: h.value(),
                    n_plus: Some(counts.n_plus),
                    n_minus: Some(counts.n_minus),
                    exact_mean: None,
                })
            }
        })
        .collect::<Result<_>>()?;

    Ok(SweepResultFile { header: SweepHeader::for_run(config), cells })
}

/// `simulate`: run the sweep and persist one result file for the chip.
pub fn cmd_simulate(config: &RunConfig, out: &Path) -> Result<()> {
    let result = run_sweep(config)?;
    result.write(out)
}

/// Group the cells of a result file into per-qubit response curves.
pub fn curves_from_sweep(file: &SweepResultFile) -> Result<Vec<(u32, ResponseCurve)>> {
    let mut by_qubit: BTreeMap<u32, Vec<&SweepCell>> = BTreeMap::new();
    for cell in &file.cells {
        by_qubit.entry(cell.qubit).or_default().push(cell);
    }
    let header = &file.header;
    let meta = |qubit: u32| CurveMeta {
        backend_id: format!(
            "{}/{}",
            header.chip_id,
            match header.backend {
                BackendKind::Gate => "gate",
                BackendKind::Anneal => "anneal",
            }
        ),
        beta: header.beta,
        shots: header.shots,
        seed: header.seed ^ qubit as u64,
    };

    let mut curves = Vec::new();
    for (qubit, mut cells) in by_qubit {
        cells.sort_by_key(|c| c.point);
        let curve = match header.mode {
            SweepMode::Sampled => {
                let cells: Vec<(InputField, ShotCounts)> = cells
                    .iter()
                    .map(|c| {
                        Ok((
                            InputField::new(c.h_in).map_err(|e| CliError::schema(e.to_string()))?,
                            ShotCounts {
                                n_plus: c.n_plus.expect("validated on read"),
                                n_minus: c.n_minus.expect("validated on read"),
                            },
                        ))
                    })
                    .collect::<Result<_>>()?;
                curve_from_cells(&cells, meta(qubit)).map_err(|e| CliError::schema(e.to_string()))?
            }
            SweepMode::Exact => {
                let cells: Vec<(InputField, f64)> = cells
                    .iter()
                    .map(|c| {
                        Ok((
                            InputField::new(c.h_in).map_err(|e| CliError::schema(e.to_string()))?,
                            c.exact_mean.expect("validated on read"),
                        ))
                    })
                    .collect::<Result<_>>()?;
                curve_from_exact_means(&cells, meta(qubit))
                    .map_err(|e| CliError::schema(e.to_string()))?
            }
        };
        curves.push((qubit, curve));
    }
    Ok(curves)
}

/// Outcome of `fit`: rows written, and which qubits could not be fitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FitOutcome {
    pub qubits_ok: usize,
    pub failed: Vec<(u32, String)>,
}

/// `fit`: turn a sweep result file into a metrics CSV, one row per qubit.
///
/// Qubits whose fit fails produce an error row instead of aborting the whole
/// file; the caller turns a nonempty failure list into a nonzero exit.
pub fn cmd_fit(
    input: &Path,
    window: Option<FitWindow>,
    weighting: FitWeighting,
    out: &Path,
) -> Result<FitOutcome> {
    let file = SweepResultFile::read(input)?;
    let window = window.unwrap_or_default();
    let chip = file.header.chip_id.clone();
    let mut rows = Vec::new();
    let mut outcome = FitOutcome { qubits_ok: 0, failed: Vec::new() };
    for (qubit, curve) in curves_from_sweep(&file)? {
        match metrics_for_qubit(&curve, &window, weighting, &chip, qubit) {
            Ok(m) => {
                rows.push(MetricsRow::ok(&m));
                outcome.qubits_ok += 1;
            }
            Err(e) => {
                rows.push(MetricsRow::failed(&chip, qubit, &e.to_string()));
                outcome.failed.push((qubit, e.to_string()));
            }
        }
    }
    crate::formats::write_metrics_csv(out, &rows)?;
    Ok(outcome)
}

/// `report`: aggregate one or more metrics CSVs into summary rows.
///
/// `pooled` additionally emits one row that pools every qubit from all
/// inputs under the given label, qubit-weighted rather than averaging the
/// per-chip means.
pub fn build_report(inputs: &[&Path], pooled: Option<&str>) -> Result<Vec<ChipSummary>> {
    let mut by_chip: BTreeMap<String, Vec<qrbpn_core::metrics::QubitMetrics>> = BTreeMap::new();
    for path in inputs {
        for row in crate::formats::read_metrics_csv(path)? {
            match row.into_metrics() {
                Some(m) => by_chip.entry(m.chip_id.clone()).or_default().push(m),
                None => eprintln!(
                    "warning: skipping errored qubit {} on chip {} from {}",
                    row.qubit_id,
                    row.chip_id,
                    path.display()
                ),
            }
        }
    }
    let mut summaries: Vec<ChipSummary> = by_chip
        .values()
        .map(|metrics| summarize_chip(metrics).map_err(|e| CliError::schema(e.to_string())))
        .collect::<Result<_>>()?;
    if let Some(label) = pooled {
        let mut all: Vec<qrbpn_core::metrics::QubitMetrics> =
            by_chip.into_values().flatten().collect();
        for m in &mut all {
            m.chip_id = label.to_string();
        }
        summaries.push(summarize_chip(&all).map_err(|e| CliError::schema(e.to_string()))?);
    }
    Ok(summaries)
}

pub fn cmd_report(
    inputs: &[&Path],
    format: ReportFormat,
    pooled: Option<&str>,
    out: Option<&Path>,
) -> Result<String> {
    let summaries = build_report(inputs, pooled)?;
    let rendered = render(&summaries, format);
    if let Some(path) = out {
        fs::write(path, &rendered)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(rendered)
}

/// `export-jobs`: emit hardware-ready programs for an external runner.
pub fn build_job_bundle(config: &RunConfig) -> Result<JobBundle> {
    config.validate()?;
    if config.shots == 0 {
        return Err(CliError::config(
            "job export needs a positive shot budget; exact mode never leaves the simulator",
        ));
    }
    let points = build_sweep(&config.grid);
    let mut jobs = Vec::with_capacity(config.qubits.len() * points.len());
    for &qubit in &config.qubits {
        for (idx, &h) in points.iter().enumerate() {
            let id = format!("q{qubit}p{idx}");
            let job = match config.backend {
                BackendKind::Gate => {
                    let program = build_gate_program(h, config.beta, config.phi)?;
                    let seq = qrbpn_core::protocol::normalize_to_native(&program)?;
                    Job {
                        id,
                        qubit,
                        point: idx as u32,
                        h_in: h.value(),
                        gates: Some(seq.gates().to_vec()),
                        field: None,
                    }
                }
                BackendKind::Anneal => Job {
                    id,
                    qubit,
                    point: idx as u32,
                    h_in: h.value(),
                    gates: None,
                    // Annealers minimize +h*sigma; flip the sign so positive
                    // sweep values still favor sigma = +1 on hardware.
                    field: Some(-h.value()),
                },
            };
            jobs.push(job);
        }
    }
    Ok(JobBundle {
        schema: JOBS_SCHEMA.to_string(),
        version: CURRENT_VERSION,
        created_utc: crate::formats::created_utc(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        chip_id: config.chip_id.clone(),
        backend: config.backend,
        beta: config.beta.value(),
        shots_per_cell: config.shots,
        seed: config.seed,
        phi: config.phi,
        grid: config.grid,
        qubits: config.qubits.clone(),
        settings: match config.backend {
            BackendKind::Anneal => Some(AnnealSettings {
                num_reads: config.num_reads.unwrap_or(10_000),
                annealing_time_us: 1.0,
                flux_drift_compensation: false,
            }),
            BackendKind::Gate => None,
        },
        noise: config.noise.clone(),
        jobs,
    })
}

pub fn cmd_export_jobs(config: &RunConfig, out: &Path) -> Result<()> {
    build_job_bundle(config)?.write(out)
}

/// Reconstruct the run configuration a bundle echoes.
pub fn bundle_config(bundle: &JobBundle) -> Result<RunConfig> {
    Ok(RunConfig {
        backend: bundle.backend,
        chip_id: bundle.chip_id.clone(),
        beta: qrbpn_core::protocol::Beta::new(bundle.beta)?,
        grid: SweepGrid::new(bundle.grid.lo.value(), bundle.grid.hi.value(), bundle.grid.count)?,
        shots: bundle.shots_per_cell,
        num_reads: bundle.settings.map(|s| s.num_reads),
        seed: bundle.seed,
        phi: bundle.phi,
        qubits: bundle.qubits.clone(),
        window: FitWindow::default(),
        weighting: FitWeighting::Unweighted,
        noise: bundle.noise.clone(),
    })
}

/// Stand-in for the external hardware runner: execute every job on the
/// simulator the bundle describes. Uses the same stream keys as a direct
/// simulation, so a round trip reproduces `simulate` output exactly.
pub fn simulate_results_for_bundle(bundle: &JobBundle) -> Result<ResultBundle> {
    let config = bundle_config(bundle)?;
    config.validate()?;
    let batch_size = config.num_reads.unwrap_or(config.shots.max(1));
    let results: Vec<JobResult> = bundle
        .jobs
        .par_iter()
        .map(|job| -> Result<JobResult> {
            let h = InputField::new(job.h_in).map_err(|e| CliError::schema(e.to_string()))?;
            let program = program_for(&config, h)?;
            let sim = config.simulator_for(job.qubit)?;
            let counts = sample_cell(
                &sim,
                program,
                config.shots,
                batch_size,
                config.seed,
                CellId { qubit: job.qubit, point: job.point, lane: 0 },
            )?;
            Ok(JobResult {
                id: job.id.clone(),
                qubit: job.qubit,
                point: job.point,
                n_plus: counts.n_plus,
                n_minus: counts.n_minus,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ResultBundle::new(&bundle.chip_id, results))
}

fn list_offenders(label: &str, mut ids: Vec<String>) -> String {
    ids.sort();
    let shown = ids.len().min(20);
    let mut msg = format!("{label} ({} cells): {}", ids.len(), ids[..shown].join(", "));
    if ids.len() > shown {
        let _ = write!(msg, ", ... and {} more", ids.len() - shown);
    }
    msg
}

/// `import-results`: validate hardware counts against the job bundle and
/// normalize them into a sweep result file.
pub fn import_results(bundle: &JobBundle, results: &ResultBundle) -> Result<SweepResultFile> {
    if results.chip_id != bundle.chip_id {
        return Err(CliError::integrity(format!(
            "results are for chip {:?} but jobs were exported for {:?}",
            results.chip_id, bundle.chip_id
        )));
    }

    let mut by_id: HashMap<&str, &JobResult> = HashMap::with_capacity(results.results.len());
    let mut duplicates = Vec::new();
    for r in &results.results {
        if by_id.insert(r.id.as_str(), r).is_some() {
            duplicates.push(r.id.clone());
        }
    }
    if !duplicates.is_empty() {
        return Err(CliError::integrity(list_offenders("duplicate result ids", duplicates)));
    }

    let job_ids: std::collections::HashSet<&str> =
        bundle.jobs.iter().map(|j| j.id.as_str()).collect();
    let unknown: Vec<String> = results
        .results
        .iter()
        .filter(|r| !job_ids.contains(r.id.as_str()))
        .map(|r| r.id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(CliError::integrity(list_offenders(
            "result ids with no matching job",
            unknown,
        )));
    }

    let missing: Vec<String> = bundle
        .jobs
        .iter()
        .filter(|j| !by_id.contains_key(j.id.as_str()))
        .map(|j| j.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::integrity(list_offenders("jobs with no result", missing)));
    }

    let bad_counts: Vec<String> = bundle
        .jobs
        .iter()
        .filter_map(|j| {
            let r = by_id[j.id.as_str()];
            let total = r.n_plus + r.n_minus;
            (total != bundle.shots_per_cell).then(|| {
                format!("{} ({} counts, expected {})", j.id, total, bundle.shots_per_cell)
            })
        })
        .collect();
    if !bad_counts.is_empty() {
        return Err(CliError::integrity(list_offenders(
            "cells whose counts do not sum to the shot budget",
            bad_counts,
        )));
    }

    let config = bundle_config(bundle)?;
    let cells: Vec<SweepCell> = bundle
        .jobs
        .iter()
        .map(|j| {
            let r = by_id[j.id.as_str()];
            SweepCell {
                qubit: j.qubit,
                point: j.point,
                h_in: j.h_in,
                n_plus: Some(r.n_plus),
                n_minus: Some(r.n_minus),
                exact_mean: None,
            }
        })
        .collect();
    Ok(SweepResultFile { header: SweepHeader::for_run(&config), cells })
}

pub fn cmd_import_results(jobs_path: &Path, results_path: &Path, out: &Path) -> Result<()> {
    let bundle = JobBundle::read(jobs_path)?;
    let results = ResultBundle::read(results_path)?;
    import_results(&bundle, &results)?.write(out)
}

/// Options for `plot-data` histograms.
#[derive(Debug, Clone, Copy)]
pub struct PlotOptions {
    pub metric: MetricKind,
    pub bins: usize,
    pub range: Option<(f64, f64)>,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions { metric: MetricKind::Response, bins: 40, range: None }
    }
}

/// `plot-data`: plot-ready CSV, no rendering.
///
/// Sweep result files become per-point curves `(h_in, h_eff, ci_lo, ci_hi)`
/// with a boolean flag for clamped cells; metrics CSVs become histogram bins
/// for the chosen metric, with out-of-range values tallied on a trailing
/// comment line.
pub fn cmd_plot_data(input: &Path, opts: &PlotOptions, out: Option<&Path>) -> Result<String> {
    let first = {
        let text = fs::read_to_string(input)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", input.display())))?;
        text.chars().next().unwrap_or(' ')
    };

    let rendered = if first == '{' {
        let file = SweepResultFile::read(input)?;
        let mut out = String::from("qubit,h_in,h_eff,ci_lo,ci_hi,clamped\n");
        for (qubit, curve) in curves_from_sweep(&file)? {
            for p in &curve.points {
                let e = &p.estimate;
                let _ = writeln!(
                    out,
                    "{qubit},{},{},{},{},{}",
                    p.h_in, e.value, e.ci_lo, e.ci_hi, e.clamped
                );
            }
        }
        out
    } else {
        let rows = crate::formats::read_metrics_csv(input)?;
        let metrics: Vec<_> = rows.iter().filter_map(MetricsRow::into_metrics).collect();
        if metrics.is_empty() {
            return Err(CliError::schema(format!(
                "{}: no fitted qubits to histogram",
                input.display()
            )));
        }
        let (lo, hi) = match opts.range {
            Some(r) => r,
            None => {
                let values: Vec<f64> = metrics.iter().map(|m| opts.metric.of(m)).collect();
                let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if lo == hi {
                    (lo - 0.5, hi + 0.5)
                } else {
                    (lo, hi)
                }
            }
        };
        let spec = HistogramSpec { metric: opts.metric, lo, hi, bins: opts.bins };
        let hist = histogram(&metrics, &spec).map_err(|e| CliError::config(e.to_string()))?;
        let mut out = String::from("bin_center,count\n");
        for bin in &hist.bins {
            let _ = writeln!(out, "{},{}", bin.center, bin.count);
        }
        let _ = writeln!(out, "# outliers: {}", hist.outliers);
        out
    };

    if let Some(path) = out {
        fs::write(path, &rendered)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(rendered)
}
