//! `qrbpn` — sweep, fit, and report single-qubit response curves on
//! simulated or real quantum hardware.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qrbpn_cli::commands::{self, PlotOptions};
use qrbpn_cli::config::{
    parse_weighting, parse_window, resolve, CliOverrides, ConfigFile, RunConfig,
};
use qrbpn_cli::error::{CliError, Result};
use qrbpn_core::metrics::FitWindow;
use qrbpn_core::reporting::{MetricKind, ReportFormat};

#[derive(Parser)]
#[command(
    name = "qrbpn",
    version,
    about = "Single-qubit response/bias/saturation characterization for gate-model and annealing hardware"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

/// Flags shared by commands that build a run configuration.
#[derive(Args, Debug, Default)]
struct RunFlags {
    /// Computational model: gate | anneal
    #[arg(long)]
    backend: Option<String>,
    /// Chip identifier recorded in artifacts
    #[arg(long)]
    chip_id: Option<String>,
    /// Inverse effective temperature (default 10)
    #[arg(long)]
    beta: Option<f64>,
    /// Sweep point count (default 900 gate / 81 anneal)
    #[arg(long)]
    points: Option<usize>,
    /// Sweep lower bound (default -1)
    #[arg(long)]
    grid_lo: Option<f64>,
    /// Sweep upper bound (default +1)
    #[arg(long)]
    grid_hi: Option<f64>,
    /// Shots per cell; 0 = exact mode (default 8192 gate / 5000000 anneal)
    #[arg(long)]
    shots: Option<u64>,
    /// Annealer reads per programming cycle (default 10000)
    #[arg(long)]
    num_reads: Option<u64>,
    /// RNG seed; the QRBPN_SEED environment variable wins over this flag
    #[arg(long)]
    seed: Option<u64>,
    /// Measurement-plane angle in radians for gate programs (default 0)
    #[arg(long)]
    phi: Option<f64>,
    /// Qubit indices, comma separated (default 0)
    #[arg(long, value_delimiter = ',')]
    qubits: Option<Vec<u32>>,
    /// Fit window as lo:hi (default -0.1:0.1)
    #[arg(long)]
    window: Option<String>,
    /// Fit weighting: unweighted | inverse-variance
    #[arg(long)]
    weighting: Option<String>,
    /// JSON noise model file
    #[arg(long)]
    noise_file: Option<PathBuf>,
    /// JSON config file mirroring these flags
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunFlags {
    fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let overrides = CliOverrides {
            backend: self.backend.as_deref().map(str::parse).transpose()?,
            chip_id: self.chip_id.clone(),
            beta: self.beta,
            points: self.points,
            grid_lo: self.grid_lo,
            grid_hi: self.grid_hi,
            shots: self.shots,
            num_reads: self.num_reads,
            seed: self.seed,
            phi: self.phi,
            qubits: self.qubits.clone(),
            window: self.window.as_deref().map(parse_window).transpose()?,
            weighting: self.weighting.as_deref().map(parse_weighting).transpose()?,
            noise_file: self.noise_file.clone(),
        };
        resolve(&file, &overrides)
    }
}

#[derive(Subcommand)]
enum Commands {
    /// Run the sweep on a simulated backend and write a result file
    Simulate {
        #[command(flatten)]
        run: RunFlags,
        /// Output sweep result file (line-delimited JSON)
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit per-qubit metrics from a sweep result file
    Fit {
        /// Sweep result file produced by simulate or import-results
        input: PathBuf,
        /// Fit window as lo:hi (default -0.1:0.1)
        #[arg(long)]
        window: Option<String>,
        /// Fit weighting: unweighted | inverse-variance
        #[arg(long)]
        weighting: Option<String>,
        /// Output metrics CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate metrics CSVs into per-chip summary rows
    Report {
        /// Metrics CSV files, one or more
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output format: table | csv | json
        #[arg(long, default_value = "table")]
        format: String,
        /// Also emit one row pooling every qubit under this chip label
        #[arg(long)]
        pooled: Option<String>,
        /// Output path; prints to stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit hardware-ready programs for an external runner
    ExportJobs {
        #[command(flatten)]
        run: RunFlags,
        /// Output job bundle (JSON)
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate returned counts and normalize them into a sweep result file
    ImportResults {
        /// Job bundle the hardware executed
        #[arg(long)]
        jobs: PathBuf,
        /// Result bundle returned by the hardware glue
        #[arg(long)]
        results: PathBuf,
        /// Output sweep result file
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot-ready CSV: response curves from sweep files, histogram bins from metrics
    PlotData {
        /// Sweep result file or metrics CSV
        input: PathBuf,
        /// Histogram metric: response | bias | neg-saturation | pos-saturation
        #[arg(long)]
        metric: Option<String>,
        /// Histogram bin count (default 40)
        #[arg(long)]
        bins: Option<usize>,
        /// Histogram range as lo:hi (default: data extent)
        #[arg(long)]
        range: Option<String>,
        /// Output path; prints to stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_format(s: &str) -> Result<ReportFormat> {
    match s {
        "table" => Ok(ReportFormat::Table),
        "csv" => Ok(ReportFormat::Csv),
        "json" => Ok(ReportFormat::Json),
        other => Err(CliError::config(format!(
            "unknown format {other:?}; expected table, csv, or json"
        ))),
    }
}

fn parse_metric(s: &str) -> Result<MetricKind> {
    match s {
        "response" => Ok(MetricKind::Response),
        "bias" => Ok(MetricKind::Bias),
        "neg-saturation" => Ok(MetricKind::NegSaturation),
        "pos-saturation" => Ok(MetricKind::PosSaturation),
        other => Err(CliError::config(format!(
            "unknown metric {other:?}; expected response, bias, neg-saturation, or pos-saturation"
        ))),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Commands::Simulate { run, out } => {
            let config = run.resolve()?;
            commands::cmd_simulate(&config, &out)?;
            eprintln!(
                "wrote {} ({} qubits x {} points)",
                out.display(),
                config.qubits.len(),
                config.grid.count
            );
            Ok(())
        }
        Commands::Fit { input, window, weighting, out } => {
            let window = window
                .as_deref()
                .map(parse_window)
                .transpose()?
                .map(|(lo, hi)| FitWindow::new(lo, hi))
                .transpose()
                .map_err(CliError::from)?;
            let weighting =
                weighting.as_deref().map(parse_weighting).transpose()?.unwrap_or_default();
            let outcome = commands::cmd_fit(&input, window, weighting, &out)?;
            eprintln!("wrote {} ({} qubits fitted)", out.display(), outcome.qubits_ok);
            if !outcome.failed.is_empty() {
                let list = outcome
                    .failed
                    .iter()
                    .map(|(q, e)| format!("qubit {q}: {e}"))
                    .collect::<Vec<_>>()
                    .join("; ");
                return Err(CliError::Partial(format!(
                    "{} of {} qubits could not be fitted: {list}",
                    outcome.failed.len(),
                    outcome.failed.len() + outcome.qubits_ok
                )));
            }
            Ok(())
        }
        Commands::Report { inputs, format, pooled, out } => {
            let format = parse_format(&format)?;
            let paths: Vec<&std::path::Path> = inputs.iter().map(PathBuf::as_path).collect();
            let rendered = commands::cmd_report(&paths, format, pooled.as_deref(), out.as_deref())?;
            match out {
                Some(path) => eprintln!("wrote {}", path.display()),
                None => print!("{rendered}"),
            }
            Ok(())
        }
        Commands::ExportJobs { run, out } => {
            let config = run.resolve()?;
            commands::cmd_export_jobs(&config, &out)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Commands::ImportResults { jobs, results, out } => {
            commands::cmd_import_results(&jobs, &results, &out)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Commands::PlotData { input, metric, bins, range, out } => {
            let defaults = PlotOptions::default();
            let opts = PlotOptions {
                metric: metric.as_deref().map(parse_metric).transpose()?.unwrap_or(defaults.metric),
                bins: bins.unwrap_or(defaults.bins),
                range: range.as_deref().map(parse_window).transpose()?,
            };
            let rendered = commands::cmd_plot_data(&input, &opts, out.as_deref())?;
            match out {
                Some(path) => eprintln!("wrote {}", path.display()),
                None => print!("{rendered}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
