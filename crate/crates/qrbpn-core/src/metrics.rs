//! The four per-qubit numbers extracted from a response curve.
//!
//! Response and bias are the slope and intercept of an affine fit of
//! `h_eff` on `h_in` restricted to the window where the device responds
//! linearly (default `[-0.1, 0.1]`, configurable because the linear region
//! is hardware dependent). Negative and positive saturation are the extreme
//! observed `h_eff` values over the whole sweep; they bound the output range
//! the hardware can realize. Clamped points count toward the saturations —
//! they are the observed extremes — but are tallied separately so readers
//! can tell a sampling floor from a physical one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::ResponseCurve;

/// Input-field window used for the affine fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub lo: f64,
    pub hi: f64,
}

impl FitWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::invalid(format!(
                "fit window needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(FitWindow { lo, hi })
    }

    pub fn contains(&self, h: f64) -> bool {
        self.lo <= h && h <= self.hi
    }
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow { lo: -0.1, hi: 0.1 }
    }
}

/// Weighting of the affine fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitWeighting {
    /// Ordinary least squares; every in-window point counts equally.
    #[default]
    Unweighted,
    /// Weight each point by `1 / std_error^2`. Requires sampled estimates;
    /// exact-mode curves carry zero errors and cannot be weighted.
    InverseVariance,
}

/// Result of the affine fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    /// Slope of `h_eff` vs `h_in`; ideally equals beta.
    pub response: f64,
    /// Intercept; ideally 0.
    pub bias: f64,
    /// Unweighted root-mean-square residual over the fitted points.
    pub rms_residual: f64,
    /// Number of in-window points used.
    pub points: usize,
}

/// Fit response and bias inside the window.
pub fn fit_response_bias(
    curve: &ResponseCurve,
    window: &FitWindow,
    weighting: FitWeighting,
) -> Result<LineFit> {
    let in_window: Vec<(f64, f64, f64)> = curve
        .points
        .iter()
        .filter(|p| window.contains(p.h_in))
        .map(|p| (p.h_in, p.estimate.value, p.estimate.std_error))
        .collect();
    if in_window.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "affine fit needs at least 2 points inside the window [{}, {}], found {}",
            window.lo,
            window.hi,
            in_window.len()
        )));
    }

    let weights: Vec<f64> = match weighting {
        FitWeighting::Unweighted => vec![1.0; in_window.len()],
        FitWeighting::InverseVariance => in_window
            .iter()
            .map(|&(h, _, se)| {
                if se > 0.0 {
                    Ok(1.0 / (se * se))
                } else {
                    Err(Error::invalid(format!(
                        "inverse-variance weighting needs nonzero std errors \
                         (point h_in={h} has none); use unweighted for exact-mode curves"
                    )))
                }
            })
            .collect::<Result<_>>()?,
    };

    let w_sum: f64 = weights.iter().sum();
    let x_bar = in_window.iter().zip(&weights).map(|(&(x, _, _), w)| w * x).sum::<f64>() / w_sum;
    let y_bar = in_window.iter().zip(&weights).map(|(&(_, y, _), w)| w * y).sum::<f64>() / w_sum;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&(x, y, _), w) in in_window.iter().zip(&weights) {
        sxx += w * (x - x_bar) * (x - x_bar);
        sxy += w * (x - x_bar) * (y - y_bar);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "affine fit needs at least 2 distinct input fields in the window".into(),
        ));
    }
    let response = sxy / sxx;
    let bias = y_bar - response * x_bar;

    let ss_res: f64 = in_window
        .iter()
        .map(|&(x, y, _)| {
            let r = y - (response * x + bias);
            r * r
        })
        .sum();
    let rms_residual = (ss_res / in_window.len() as f64).sqrt();

    Ok(LineFit { response, bias, rms_residual, points: in_window.len() })
}

/// Extreme observed effective fields `(negative, positive)` over the sweep.
pub fn saturations(curve: &ResponseCurve) -> (f64, f64) {
    let mut neg = f64::INFINITY;
    let mut pos = f64::NEG_INFINITY;
    for p in &curve.points {
        neg = neg.min(p.estimate.value);
        pos = pos.max(p.estimate.value);
    }
    (neg, pos)
}

/// The four per-qubit numbers plus fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitMetrics {
    pub chip_id: String,
    pub qubit_id: u32,
    pub response: f64,
    pub bias: f64,
    pub neg_saturation: f64,
    pub pos_saturation: f64,
    pub fit_points: usize,
    pub fit_rms_residual: f64,
    /// Sweep points whose estimate hit the unanimous-count sampling floor.
    pub clamped_points: usize,
}

/// Extract all four metrics from one curve.
pub fn metrics_for_qubit(
    curve: &ResponseCurve,
    window: &FitWindow,
    weighting: FitWeighting,
    chip_id: &str,
    qubit_id: u32,
) -> Result<QubitMetrics> {
    let fit = fit_response_bias(curve, window, weighting)?;
    let (neg, pos) = saturations(curve);
    let clamped = curve.points.iter().filter(|p| p.estimate.clamped).count();
    Ok(QubitMetrics {
        chip_id: chip_id.to_string(),
        qubit_id,
        response: fit.response,
        bias: fit.bias,
        neg_saturation: neg,
        pos_saturation: pos,
        fit_points: fit.points,
        fit_rms_residual: fit.rms_residual,
        clamped_points: clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{QaNoiseModel, QcNoiseModel, Simulator};
    use crate::estimation::{
        curve_from_exact_means, CurveMeta, EffectiveFieldEstimate, ResponseCurve, ResponsePoint,
    };
    use crate::protocol::{build_gate_program, build_sweep, Beta, QubitProgram, SweepGrid};
    use proptest::prelude::*;

    fn meta() -> CurveMeta {
        CurveMeta { backend_id: "test".into(), beta: 10.0, shots: 0, seed: 0 }
    }

    fn synthetic_curve(points: &[(f64, f64)]) -> ResponseCurve {
        ResponseCurve {
            points: points
                .iter()
                .map(|&(h, v)| ResponsePoint {
                    h_in: h,
                    estimate: EffectiveFieldEstimate {
                        value: v,
                        std_error: 0.0,
                        ci_lo: v,
                        ci_hi: v,
                        clamped: false,
                        shots: 0,
                    },
                })
                .collect(),
            meta: meta(),
        }
    }

    fn exact_curve(sim: &Simulator, grid_count: usize, beta: Beta) -> ResponseCurve {
        let cells: Vec<_> = build_sweep(&SweepGrid::full_span(grid_count).unwrap())
            .into_iter()
            .map(|h| {
                let prog = match sim {
                    Simulator::Gate(_) => build_gate_program(h, beta, 0.0).unwrap(),
                    Simulator::Anneal(_) => QubitProgram::anneal(h),
                };
                (h, sim.exact_mean(&prog).unwrap())
            })
            .collect();
        curve_from_exact_means(&cells, meta()).unwrap()
    }

    #[test]
    fn exact_line_is_recovered_without_residual() {
        let pts: Vec<(f64, f64)> =
            [-0.1, -0.05, 0.0, 0.05, 0.1].iter().map(|&h| (h, 10.0 * h + 0.02)).collect();
        let fit =
            fit_response_bias(&synthetic_curve(&pts), &FitWindow::default(), FitWeighting::default())
                .unwrap();
        assert!((fit.response - 10.0).abs() < 1e-12);
        assert!((fit.bias - 0.02).abs() < 1e-14);
        assert!(fit.rms_residual < 1e-14);
        assert_eq!(fit.points, 5);
    }

    #[test]
    fn ideal_gate_curve_has_unit_normalized_response() {
        let curve = exact_curve(&Simulator::ideal_gate(), 101, Beta::default());
        let fit =
            fit_response_bias(&curve, &FitWindow::default(), FitWeighting::Unweighted).unwrap();
        assert!((fit.response - 10.0).abs() < 1e-9);
        assert!(fit.bias.abs() < 1e-12);
        assert_eq!(fit.points, 11);
    }

    #[test]
    fn asymmetric_flip_fixture_matches_analytic_slope() {
        // Slope at the origin is (1 - q_plus - q_minus) * beta / (1 - E(0)^2)
        // = 9.5566; the chord over a +/-0.01 window bends it slightly to the
        // frozen 9.55532, with intercept near atanh(q_minus - q_plus).
        let sim = Simulator::Gate(QcNoiseModel {
            flip_from_plus: 0.0094,
            flip_from_minus: 0.0356,
            ..QcNoiseModel::ideal()
        });
        let curve = exact_curve(&sim, 900, Beta::default());
        let window = FitWindow::new(-0.01, 0.01).unwrap();
        let fit = fit_response_bias(&curve, &window, FitWeighting::Unweighted).unwrap();
        assert!((fit.response - 9.555_321_848_5).abs() < 1e-6, "response {}", fit.response);
        assert!((fit.bias - 0.026_268_241_11).abs() < 1e-8, "bias {}", fit.bias);

        let (neg, pos) = saturations(&curve);
        assert!((pos - 2.328_800_459_743_34).abs() < 1e-9);
        assert!((neg + 1.649_580_225_557_89).abs() < 1e-9);
    }

    #[test]
    fn annealer_flip_fixture_saturates_near_the_flip_bound() {
        let sim = Simulator::Anneal(QaNoiseModel {
            flip: 5.55e-5,
            ..QaNoiseModel::ideal(Beta::default())
        });
        let curve = exact_curve(&sim, 81, Beta::default());
        let fit =
            fit_response_bias(&curve, &FitWindow::default(), FitWeighting::Unweighted).unwrap();
        assert!((fit.response - 9.998_241_463_98).abs() < 1e-6);
        assert!(fit.bias.abs() < 1e-12);
        let (neg, pos) = saturations(&curve);
        assert!((pos - 4.899_517_450_259_69).abs() < 1e-9);
        assert_eq!(neg, -pos);
    }

    #[test]
    fn ideal_annealer_metrics_before_sampling_limits() {
        let curve = exact_curve(&Simulator::ideal_anneal(Beta::default()), 81, Beta::default());
        let m = metrics_for_qubit(&curve, &FitWindow::default(), FitWeighting::Unweighted, "chip", 0)
            .unwrap();
        assert!((m.response - 10.0).abs() < 1e-9);
        assert!(m.bias.abs() < 1e-12);
        assert!((m.neg_saturation + 10.0).abs() < 1e-7);
        assert!((m.pos_saturation - 10.0).abs() < 1e-7);
        assert_eq!(m.clamped_points, 0);
        assert!(m.neg_saturation <= m.bias && m.bias <= m.pos_saturation);
    }

    #[test]
    fn antisymmetric_curve_has_mirrored_saturations() {
        let curve = synthetic_curve(&[(-1.0, -4.2), (0.0, 0.0), (1.0, 4.2)]);
        assert_eq!(saturations(&curve), (-4.2, 4.2));
    }

    #[test]
    fn shrinking_the_window_below_two_points_errors() {
        let curve = exact_curve(&Simulator::ideal_anneal(Beta::default()), 81, Beta::default());
        let window = FitWindow::new(0.299, 0.301).unwrap();
        let err = fit_response_bias(&curve, &window, FitWeighting::Unweighted).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("0.299") && msg.contains("0.301"), "message: {msg}");
    }

    #[test]
    fn inverse_variance_weighting_rejects_exact_curves() {
        let curve = exact_curve(&Simulator::ideal_gate(), 101, Beta::default());
        let res = fit_response_bias(&curve, &FitWindow::default(), FitWeighting::InverseVariance);
        assert!(res.is_err());
    }

    #[test]
    fn inverse_variance_weighting_matches_unweighted_on_equal_errors() {
        let mut curve = synthetic_curve(&[(-0.1, -1.01), (-0.05, -0.49), (0.05, 0.51), (0.1, 0.99)]);
        for p in &mut curve.points {
            p.estimate.std_error = 0.05;
        }
        let a = fit_response_bias(&curve, &FitWindow::default(), FitWeighting::Unweighted).unwrap();
        let b =
            fit_response_bias(&curve, &FitWindow::default(), FitWeighting::InverseVariance).unwrap();
        assert!((a.response - b.response).abs() < 1e-12);
        assert!((a.bias - b.bias).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn shifting_the_curve_moves_only_the_bias(shift in -5.0f64..5.0) {
            let base: Vec<(f64, f64)> = vec![
                (-0.1, -0.93), (-0.06, -0.61), (-0.02, -0.18),
                (0.02, 0.22), (0.06, 0.58), (0.1, 1.02),
            ];
            let shifted: Vec<(f64, f64)> = base.iter().map(|&(h, v)| (h, v + shift)).collect();
            let f0 = fit_response_bias(&synthetic_curve(&base), &FitWindow::default(), FitWeighting::Unweighted).unwrap();
            let f1 = fit_response_bias(&synthetic_curve(&shifted), &FitWindow::default(), FitWeighting::Unweighted).unwrap();
            prop_assert!((f1.response - f0.response).abs() < 1e-9);
            prop_assert!((f1.bias - (f0.bias + shift)).abs() < 1e-9);
        }

        #[test]
        fn scaling_the_curve_scales_everything(scale in 0.1f64..20.0) {
            let base: Vec<(f64, f64)> = vec![
                (-1.0, -4.8), (-0.1, -0.93), (-0.02, -0.18),
                (0.02, 0.22), (0.1, 1.02), (1.0, 4.9),
            ];
            let scaled: Vec<(f64, f64)> = base.iter().map(|&(h, v)| (h, v * scale)).collect();
            let c0 = synthetic_curve(&base);
            let c1 = synthetic_curve(&scaled);
            let f0 = fit_response_bias(&c0, &FitWindow::default(), FitWeighting::Unweighted).unwrap();
            let f1 = fit_response_bias(&c1, &FitWindow::default(), FitWeighting::Unweighted).unwrap();
            prop_assert!((f1.response - scale * f0.response).abs() < 1e-9 * scale.max(1.0));
            prop_assert!((f1.bias - scale * f0.bias).abs() < 1e-9 * scale.max(1.0));
            let (n0, p0) = saturations(&c0);
            let (n1, p1) = saturations(&c1);
            prop_assert!((n1 - scale * n0).abs() < 1e-12 * scale.max(1.0));
            prop_assert!((p1 - scale * p0).abs() < 1e-12 * scale.max(1.0));
        }
    }
}
