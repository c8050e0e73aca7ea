//! Fleet-level aggregation: per-chip summary rows and histogram data.
//!
//! Summaries use the population standard deviation (divide by n), so a
//! single-qubit chip reports exactly `0.00` spread instead of an undefined
//! sample deviation. Rendering rounds to two decimals; the machine formats
//! (CSV, JSON) keep full precision, so parsing a rendered CSV reproduces the
//! summary bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::QubitMetrics;

/// Mean and population standard deviation of one metric over a chip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

/// One summary row: qubit count and the four metric distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipSummary {
    pub chip_id: String,
    pub qubit_count: usize,
    pub response: MeanStd,
    pub bias: MeanStd,
    pub neg_saturation: MeanStd,
    pub pos_saturation: MeanStd,
}

/// Aggregate the metrics of one chip.
pub fn summarize_chip(metrics: &[QubitMetrics]) -> Result<ChipSummary> {
    let first = metrics
        .first()
        .ok_or_else(|| Error::invalid("chip summary needs at least one qubit"))?;
    if let Some(other) = metrics.iter().find(|m| m.chip_id != first.chip_id) {
        return Err(Error::invalid(format!(
            "chip summary got mixed chip ids: {} and {}",
            first.chip_id, other.chip_id
        )));
    }
    let collect = |f: fn(&QubitMetrics) -> f64| -> Vec<f64> { metrics.iter().map(f).collect() };
    Ok(ChipSummary {
        chip_id: first.chip_id.clone(),
        qubit_count: metrics.len(),
        response: mean_std(&collect(|m| m.response)),
        bias: mean_std(&collect(|m| m.bias)),
        neg_saturation: mean_std(&collect(|m| m.neg_saturation)),
        pos_saturation: mean_std(&collect(|m| m.pos_saturation)),
    })
}

/// Which of the four metrics a histogram bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Response,
    Bias,
    NegSaturation,
    PosSaturation,
}

impl MetricKind {
    pub fn of(&self, m: &QubitMetrics) -> f64 {
        match self {
            MetricKind::Response => m.response,
            MetricKind::Bias => m.bias,
            MetricKind::NegSaturation => m.neg_saturation,
            MetricKind::PosSaturation => m.pos_saturation,
        }
    }
}

/// Binning specification over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub metric: MetricKind,
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::invalid("histogram needs at least 1 bin"));
        }
        if !self.lo.is_finite() || !self.hi.is_finite() || self.lo >= self.hi {
            return Err(Error::invalid(format!(
                "histogram range needs lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// One histogram bin: center and tally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub center: f64,
    pub count: usize,
}

/// Binned counts plus the tally of values outside `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
    /// Values outside the range; reported, never silently dropped.
    pub outliers: usize,
}

/// Bin one metric over a fleet. In-range values partition into the bins;
/// everything else lands in `outliers`, so counts always total n.
pub fn histogram(metrics: &[QubitMetrics], spec: &HistogramSpec) -> Result<Histogram> {
    spec.validate()?;
    let width = (spec.hi - spec.lo) / spec.bins as f64;
    let mut bins: Vec<HistogramBin> = (0..spec.bins)
        .map(|i| HistogramBin { center: spec.lo + (i as f64 + 0.5) * width, count: 0 })
        .collect();
    let mut outliers = 0usize;
    for m in metrics {
        let v = spec.metric.of(m);
        if v < spec.lo || v > spec.hi || v.is_nan() {
            outliers += 1;
            continue;
        }
        let idx = (((v - spec.lo) / width) as usize).min(spec.bins - 1);
        bins[idx].count += 1;
    }
    Ok(Histogram { bins, outliers })
}

/// Output format of [`render`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

/// Two-decimal rendering; avoids the confusing `-0.00`.
fn fmt2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn fmt_pm(ms: &MeanStd) -> String {
    format!("{} ± {}", fmt2(ms.mean), fmt2(ms.std))
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn sorted_rows(summaries: &[ChipSummary]) -> Vec<&ChipSummary> {
    let mut rows: Vec<&ChipSummary> = summaries.iter().collect();
    rows.sort_by(|a, b| {
        b.qubit_count
            .cmp(&a.qubit_count)
            .then_with(|| a.chip_id.cmp(&b.chip_id))
    });
    rows
}

const TABLE_HEADER: [&str; 6] = ["Chip", "Qubits", "Response", "Bias", "Negative S.", "Positive S."];

/// Render summary rows, largest chips first.
///
/// The text table rounds to two decimals in `mean ± std` form; CSV and JSON
/// keep full precision and round-trip losslessly.
pub fn render(summaries: &[ChipSummary], format: ReportFormat) -> String {
    let rows = sorted_rows(summaries);
    match format {
        ReportFormat::Table => {
            let cells: Vec<[String; 6]> = rows
                .iter()
                .map(|s| {
                    [
                        s.chip_id.clone(),
                        s.qubit_count.to_string(),
                        fmt_pm(&s.response),
                        fmt_pm(&s.bias),
                        fmt_pm(&s.neg_saturation),
                        fmt_pm(&s.pos_saturation),
                    ]
                })
                .collect();
            let mut widths: Vec<usize> = TABLE_HEADER.iter().map(|h| h.len()).collect();
            for row in &cells {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.len());
                }
            }
            let mut out = String::new();
            let emit = |out: &mut String, row: &[String]| {
                let line = row
                    .iter()
                    .enumerate()
                    .map(|(i, cell)| {
                        if i == 1 {
                            format!("{cell:>width$}", width = widths[i])
                        } else {
                            format!("{cell:<width$}", width = widths[i])
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("  ");
                out.push_str(line.trim_end());
                out.push('\n');
            };
            let header: Vec<String> = TABLE_HEADER.iter().map(|s| s.to_string()).collect();
            emit(&mut out, &header);
            for row in &cells {
                emit(&mut out, row);
            }
            out
        }
        ReportFormat::Csv => {
            let mut out = String::from(
                "chip,qubits,response_mean,response_std,bias_mean,bias_std,\
                 neg_saturation_mean,neg_saturation_std,pos_saturation_mean,pos_saturation_std\n",
            );
            for s in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    csv_field(&s.chip_id),
                    s.qubit_count,
                    s.response.mean,
                    s.response.std,
                    s.bias.mean,
                    s.bias.std,
                    s.neg_saturation.mean,
                    s.neg_saturation.std,
                    s.pos_saturation.mean,
                    s.pos_saturation.std
                ));
            }
            out
        }
        ReportFormat::Json => {
            let rows: Vec<&ChipSummary> = rows;
            let mut s = serde_json::to_string_pretty(&rows).expect("summaries serialize");
            s.push('\n');
            s
        }
    }
}

/// Parse a summary CSV produced by [`render`] back into rows.
pub fn parse_summary_csv(text: &str) -> Result<Vec<ChipSummary>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("summary CSV is empty"))?;
    if !header.starts_with("chip,qubits,response_mean") {
        return Err(Error::invalid(format!("unrecognized summary CSV header: {header}")));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields = split_csv_line(line);
        if fields.len() != 10 {
            return Err(Error::invalid(format!(
                "summary CSV line {} has {} fields, expected 10",
                lineno + 2,
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad number {:?}: {e}", fields[i])))
        };
        out.push(ChipSummary {
            chip_id: fields[0].clone(),
            qubit_count: fields[1]
                .parse()
                .map_err(|e| Error::invalid(format!("bad qubit count {:?}: {e}", fields[1])))?,
            response: MeanStd { mean: num(2)?, std: num(3)? },
            bias: MeanStd { mean: num(4)?, std: num(5)? },
            neg_saturation: MeanStd { mean: num(6)?, std: num(7)? },
            pos_saturation: MeanStd { mean: num(8)?, std: num(9)? },
        });
    }
    Ok(out)
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qm(chip: &str, qubit: u32, response: f64, bias: f64, neg: f64, pos: f64) -> QubitMetrics {
        QubitMetrics {
            chip_id: chip.into(),
            qubit_id: qubit,
            response,
            bias,
            neg_saturation: neg,
            pos_saturation: pos,
            fit_points: 9,
            fit_rms_residual: 0.01,
            clamped_points: 0,
        }
    }

    /// `n` synthetic metrics with exact population mean and std per metric.
    fn tuned_fleet(chip: &str, n: usize, stats: [(f64, f64); 4]) -> Vec<QubitMetrics> {
        assert!(n % 2 == 1, "odd n keeps one centered sample");
        let spread = |s: f64| s * (n as f64 / (n as f64 - 1.0)).sqrt();
        (0..n)
            .map(|i| {
                let e = match i % 2 {
                    0 if i == 0 => 0.0,
                    0 => -1.0,
                    _ => 1.0,
                };
                qm(
                    chip,
                    i as u32,
                    stats[0].0 + e * spread(stats[0].1),
                    stats[1].0 + e * spread(stats[1].1),
                    stats[2].0 + e * spread(stats[2].1),
                    stats[3].0 + e * spread(stats[3].1),
                )
            })
            .collect()
    }

    #[test]
    fn single_qubit_summary_has_zero_std() {
        let s = summarize_chip(&[qm("one", 0, 8.23, 0.01, -1.28, 1.41)]).unwrap();
        assert_eq!(s.qubit_count, 1);
        assert_eq!(s.response.std, 0.0);
        let table = render(&[s], ReportFormat::Table);
        assert!(table.contains("8.23 ± 0.00"), "table:\n{table}");
        assert!(table.contains("-1.28 ± 0.00"));
    }

    #[test]
    fn two_qubit_mean_and_population_std() {
        let s = summarize_chip(&[
            qm("pair", 0, 9.0, 0.0, -4.0, 4.0),
            qm("pair", 1, 11.0, 0.0, -4.0, 4.0),
        ])
        .unwrap();
        assert_eq!(s.response.mean, 10.0);
        assert_eq!(s.response.std, 1.0);
    }

    #[test]
    fn tuned_fleet_rounds_to_target_row() {
        let fleet = tuned_fleet(
            "qa-fleet",
            2031,
            [(10.03, 0.26), (0.02, 0.07), (-4.92, 0.15), (4.90, 0.16)],
        );
        let s = summarize_chip(&fleet).unwrap();
        let table = render(&[s], ReportFormat::Table);
        for cell in ["10.03 ± 0.26", "0.02 ± 0.07", "-4.92 ± 0.15", "4.90 ± 0.16"] {
            assert!(table.contains(cell), "missing {cell} in:\n{table}");
        }
    }

    #[test]
    fn mixed_chip_ids_are_rejected() {
        let err = summarize_chip(&[qm("a", 0, 9.0, 0.0, -1.0, 1.0), qm("b", 1, 9.0, 0.0, -1.0, 1.0)]);
        assert!(err.is_err());
        assert!(summarize_chip(&[]).is_err());
    }

    #[test]
    fn histogram_single_bin_holds_everything() {
        let fleet: Vec<QubitMetrics> =
            (0..7).map(|i| qm("c", i, 9.0 + 0.01 * i as f64, 0.0, -1.0, 1.0)).collect();
        let spec = HistogramSpec { metric: MetricKind::Response, lo: 8.0, hi: 10.0, bins: 1 };
        let h = histogram(&fleet, &spec).unwrap();
        assert_eq!(h.bins[0].count, 7);
        assert_eq!(h.outliers, 0);
    }

    #[test]
    fn out_of_range_biases_are_counted_as_outliers() {
        let mut fleet: Vec<QubitMetrics> =
            (0..10).map(|i| qm("c", i, 9.0, 0.01 * i as f64, -1.0, 1.0)).collect();
        fleet.push(qm("c", 10, 9.0, 0.5, -1.0, 1.0));
        fleet.push(qm("c", 11, 9.0, -0.5, -1.0, 1.0));
        fleet.push(qm("c", 12, 9.0, 0.5, -1.0, 1.0));
        let spec = HistogramSpec { metric: MetricKind::Bias, lo: -0.3, hi: 0.3, bins: 12 };
        let h = histogram(&fleet, &spec).unwrap();
        assert_eq!(h.outliers, 3);
        let total: usize = h.bins.iter().map(|b| b.count).sum();
        assert_eq!(total + h.outliers, fleet.len());
    }

    #[test]
    fn uniform_values_fill_bins_evenly() {
        // One value per bin center: every bin tallies exactly one.
        let fleet: Vec<QubitMetrics> =
            (0..10).map(|i| qm("c", i, 0.05 + 0.1 * i as f64, 0.0, -1.0, 1.0)).collect();
        let spec = HistogramSpec { metric: MetricKind::Response, lo: 0.0, hi: 1.0, bins: 10 };
        let h = histogram(&fleet, &spec).unwrap();
        assert!(h.bins.iter().all(|b| b.count == 1));
        assert_eq!(h.outliers, 0);
    }

    #[test]
    fn histogram_counts_partition_for_any_spec() {
        let fleet = tuned_fleet("c", 101, [(10.0, 0.3), (0.0, 0.05), (-4.9, 0.2), (4.9, 0.2)]);
        for (lo, hi, bins) in [(-1.0, 1.0, 3), (9.9, 10.1, 7), (-20.0, 20.0, 1), (10.2, 10.4, 4)] {
            let spec = HistogramSpec { metric: MetricKind::Response, lo, hi, bins };
            let h = histogram(&fleet, &spec).unwrap();
            let total: usize = h.bins.iter().map(|b| b.count).sum();
            assert_eq!(total + h.outliers, fleet.len());
        }
        assert!(histogram(&fleet, &HistogramSpec { metric: MetricKind::Bias, lo: 0.0, hi: 0.0, bins: 1 }).is_err());
        assert!(histogram(&fleet, &HistogramSpec { metric: MetricKind::Bias, lo: 0.0, hi: 1.0, bins: 0 }).is_err());
    }

    #[test]
    fn rows_sort_by_size_then_name() {
        let a = summarize_chip(&[qm("small", 0, 9.0, 0.0, -1.0, 1.0)]).unwrap();
        let big = summarize_chip(&(0..3).map(|i| qm("big", i, 9.0, 0.0, -1.0, 1.0)).collect::<Vec<_>>())
            .unwrap();
        let also = summarize_chip(&[qm("alpha", 0, 9.0, 0.0, -1.0, 1.0)]).unwrap();
        let table = render(&[a, big, also], ReportFormat::Table);
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[1].starts_with("big"));
        assert!(lines[2].starts_with("alpha"));
        assert!(lines[3].starts_with("small"));
    }

    #[test]
    fn empty_input_renders_header_only() {
        let table = render(&[], ReportFormat::Table);
        assert_eq!(table.lines().count(), 1);
        assert!(table.starts_with("Chip"));
        let csv = render(&[], ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 1);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let fleet = tuned_fleet("round,trip", 11, [(9.04, 0.88), (0.03, 0.06), (-1.65, 0.37), (2.33, 0.53)]);
        let summary = summarize_chip(&fleet).unwrap();
        let csv = render(std::slice::from_ref(&summary), ReportFormat::Csv);
        let parsed = parse_summary_csv(&csv).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0], summary);
    }

    #[test]
    fn json_round_trip_is_identity() {
        let fleet = tuned_fleet("json", 11, [(9.0, 0.5), (0.0, 0.01), (-2.0, 0.3), (2.5, 0.4)]);
        let summary = summarize_chip(&fleet).unwrap();
        let json = render(std::slice::from_ref(&summary), ReportFormat::Json);
        let parsed: Vec<ChipSummary> = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, vec![summary]);
    }

    #[test]
    fn negative_zero_never_renders() {
        assert_eq!(fmt2(-0.0001), "0.00");
        assert_eq!(fmt2(-0.006), "-0.01");
    }
}
