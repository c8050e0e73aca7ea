//! Effective-field estimation from shot counts.
//!
//! The effective field of a binary outcome distribution is
//! `h_eff = atanh(E[sigma])`. From `M` shots the empirical mean
//! `m = (n_plus - n_minus) / M` gives the point estimate `atanh(m)`; its
//! standard error follows from the delta method,
//! `se = 1 / sqrt(M * (1 - m^2))`, and the reported interval is
//! `value +/- 3 * se` (99.7%).
//!
//! Unanimous counts would put `m` on the boundary where `atanh` diverges.
//! They get the half-count correction: the zero count is replaced by 0.5 and
//! the full count by `M - 0.5`, the estimate is flagged `clamped`, and the
//! value becomes `atanh((M-1)/M) = ln(2M - 1) / 2` — a sampling floor that
//! grows with `M`, not a measurement of the true field.

use serde::{Deserialize, Serialize};

use crate::backends::ShotCounts;
use crate::error::{Error, Result};
use crate::protocol::InputField;

/// Point estimate of the effective field with a 3-sigma interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveFieldEstimate {
    pub value: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// True iff the raw counts were unanimous and the half-count rule fired.
    pub clamped: bool,
    /// Shot budget behind the estimate; 0 marks an exact-mode value.
    pub shots: u64,
}

/// Sign-folded `atanh`: bitwise odd by construction.
///
/// The standard-library `atanh` evaluates `ln_1p(2x / (1 - x)) / 2`, whose
/// rounding differs between `x` and `-x` by up to 1 ulp. Estimates produced
/// from mirrored counts must negate exactly, so the sign is peeled off first.
fn atanh_odd(m: f64) -> f64 {
    let a = m.abs().atanh();
    if m.is_sign_negative() {
        -a
    } else {
        a
    }
}

/// The sampling-floor value `atanh((M-1)/M) = ln(2M - 1) / 2` reached by
/// unanimous counts. Shares the exact computation path of
/// [`heff_from_counts`] so the two agree bitwise.
pub fn clamp_bound(shots: u64) -> f64 {
    let m_f = shots as f64;
    atanh_odd((m_f - 1.0) / m_f)
}

/// Estimate the effective field from one cell of shot counts.
pub fn heff_from_counts(counts: &ShotCounts) -> Result<EffectiveFieldEstimate> {
    let shots = counts.total();
    if shots < 2 {
        return Err(Error::invalid(format!(
            "effective-field estimation needs at least 2 shots, got {shots}"
        )));
    }
    let m_f = shots as f64;
    let clamped = counts.n_plus == 0 || counts.n_minus == 0;
    let (plus, minus) = if counts.n_minus == 0 {
        (m_f - 0.5, 0.5)
    } else if counts.n_plus == 0 {
        (0.5, m_f - 0.5)
    } else {
        (counts.n_plus as f64, counts.n_minus as f64)
    };

    let mean = (plus - minus) / m_f;
    let value = atanh_odd(mean);
    let std_error = 1.0 / (m_f * (1.0 - mean * mean)).sqrt();
    let mut ci_lo = value - 3.0 * std_error;
    let mut ci_hi = value + 3.0 * std_error;

    // The delta method degrades near the boundary; within 10 counts of
    // unanimity, widen the outer endpoint to at least the sampling floor.
    let near_boundary = mean.abs() > 1.0 - 10.0 / m_f;
    if near_boundary {
        let bound = clamp_bound(shots);
        if mean > 0.0 {
            ci_hi = ci_hi.max(bound);
        } else {
            ci_lo = ci_lo.min(-bound);
        }
    }

    Ok(EffectiveFieldEstimate { value, std_error, ci_lo, ci_hi, clamped, shots })
}

/// Wrap an exact backend mean as a zero-width estimate.
pub fn heff_from_exact_mean(mean: f64) -> Result<EffectiveFieldEstimate> {
    if !mean.is_finite() || mean.abs() >= 1.0 {
        return Err(Error::invalid(format!(
            "exact mean must lie strictly inside (-1, 1), got {mean}"
        )));
    }
    let value = atanh_odd(mean);
    Ok(EffectiveFieldEstimate {
        value,
        std_error: 0.0,
        ci_lo: value,
        ci_hi: value,
        clamped: false,
        shots: 0,
    })
}

/// Provenance of a response curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub backend_id: String,
    pub beta: f64,
    /// Shots per point; 0 for exact-mode curves.
    pub shots: u64,
    pub seed: u64,
}

/// One sweep point of a response curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    pub h_in: f64,
    pub estimate: EffectiveFieldEstimate,
}

/// Estimated effective field over a sweep, sorted by input field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub points: Vec<ResponsePoint>,
    pub meta: CurveMeta,
}

fn assemble_curve(mut points: Vec<ResponsePoint>, meta: CurveMeta) -> Result<ResponseCurve> {
    if points.is_empty() {
        return Err(Error::invalid("a response curve needs at least one point"));
    }
    points.sort_by(|a, b| a.h_in.partial_cmp(&b.h_in).expect("input fields are finite"));
    for pair in points.windows(2) {
        if pair[0].h_in == pair[1].h_in {
            return Err(Error::invalid(format!(
                "duplicate input field {} in curve",
                pair[0].h_in
            )));
        }
    }
    Ok(ResponseCurve { points, meta })
}

/// Build a curve from sampled cells. Input fields must be unique.
pub fn curve_from_cells(
    cells: &[(InputField, ShotCounts)],
    meta: CurveMeta,
) -> Result<ResponseCurve> {
    let points = cells
        .iter()
        .map(|(h, counts)| {
            Ok(ResponsePoint { h_in: h.value(), estimate: heff_from_counts(counts)? })
        })
        .collect::<Result<Vec<_>>>()?;
    assemble_curve(points, meta)
}

/// Build a curve from exact backend means. Input fields must be unique.
pub fn curve_from_exact_means(
    cells: &[(InputField, f64)],
    meta: CurveMeta,
) -> Result<ResponseCurve> {
    let points = cells
        .iter()
        .map(|(h, mean)| {
            Ok(ResponsePoint { h_in: h.value(), estimate: heff_from_exact_mean(*mean)? })
        })
        .collect::<Result<Vec<_>>>()?;
    assemble_curve(points, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Binomial, Distribution};

    fn counts(p: u64, m: u64) -> ShotCounts {
        ShotCounts { n_plus: p, n_minus: m }
    }

    fn meta() -> CurveMeta {
        CurveMeta { backend_id: "test".into(), beta: 10.0, shots: 100, seed: 0 }
    }

    #[test]
    fn balanced_counts_give_zero_field() {
        let est = heff_from_counts(&counts(50, 50)).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.1);
        assert!((est.ci_lo + 0.3).abs() < 1e-15);
        assert!((est.ci_hi - 0.3).abs() < 1e-15);
        assert!(!est.clamped);
        assert_eq!(est.shots, 100);
    }

    #[test]
    fn three_to_one_counts() {
        let est = heff_from_counts(&counts(75, 25)).unwrap();
        assert!((est.value - 0.549_306_144_334_054_8).abs() < 1e-15);
    }

    #[test]
    fn unanimous_counts_hit_the_sampling_floor() {
        let est = heff_from_counts(&counts(8192, 0)).unwrap();
        assert!(est.clamped);
        assert!((est.value - 4.851_999_745_410_132).abs() < 1e-12);
        assert_eq!(est.value, clamp_bound(8192));
        assert!(est.ci_lo <= est.value && est.value <= est.ci_hi);
    }

    #[test]
    fn antisymmetry_is_exact() {
        for (a, b) in [(75u64, 25u64), (8192, 0), (1, 99), (3, 2)] {
            let plus = heff_from_counts(&counts(a, b)).unwrap();
            let minus = heff_from_counts(&counts(b, a)).unwrap();
            assert_eq!(plus.value, -minus.value);
            assert_eq!(plus.std_error, minus.std_error);
            assert_eq!(plus.ci_hi, -minus.ci_lo);
        }
    }

    #[test]
    fn clamp_is_strictly_increasing_in_shots() {
        let ladder = [2u64, 3, 10, 100, 8192, 1_000_000];
        for pair in ladder.windows(2) {
            let small = heff_from_counts(&counts(pair[0], 0)).unwrap();
            let large = heff_from_counts(&counts(pair[1], 0)).unwrap();
            assert!(small.value < large.value);
        }
    }

    #[test]
    fn single_shot_is_rejected() {
        assert!(heff_from_counts(&counts(1, 0)).is_err());
        assert!(heff_from_counts(&counts(0, 1)).is_err());
    }

    #[test]
    fn atanh_tanh_round_trip() {
        for i in 0..=100 {
            let x = (-5.0 * (100 - i) as f64 + 5.0 * i as f64) / 100.0;
            let back = x.tanh().atanh();
            assert!((back - x).abs() < 1e-12, "x={x} back={back}");
        }
    }

    #[test]
    fn exact_mode_has_zero_width() {
        let est = heff_from_exact_mean(0.761_594_155_955_764_9).unwrap();
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.ci_lo, est.value);
        assert_eq!(est.ci_hi, est.value);
        assert!(!est.clamped);
        assert_eq!(est.shots, 0);
        assert!(heff_from_exact_mean(1.0).is_err());
        assert!(heff_from_exact_mean(f64::NAN).is_err());
    }

    #[test]
    fn near_boundary_interval_reaches_the_floor() {
        // One dissenting shot out of 8192: the widened upper endpoint must
        // cover the value a fully unanimous cell would have produced.
        let est = heff_from_counts(&counts(8191, 1)).unwrap();
        assert!(!est.clamped);
        assert!(est.ci_hi >= clamp_bound(8192));
    }

    #[test]
    fn curve_is_sorted_and_rejects_duplicates() {
        let h = |v: f64| InputField::new(v).unwrap();
        let cells = vec![
            (h(1.0), counts(90, 10)),
            (h(-1.0), counts(10, 90)),
            (h(0.0), counts(50, 50)),
        ];
        let curve = curve_from_cells(&cells, meta()).unwrap();
        let hs: Vec<f64> = curve.points.iter().map(|p| p.h_in).collect();
        assert_eq!(hs, vec![-1.0, 0.0, 1.0]);
        // Mirrored counts make the curve exactly antisymmetric.
        assert_eq!(curve.points[0].estimate.value, -curve.points[2].estimate.value);
        assert_eq!(curve.points[1].estimate.value, 0.0);

        let dup = vec![(h(0.5), counts(60, 40)), (h(0.5), counts(61, 39))];
        assert!(curve_from_cells(&dup, meta()).is_err());
        assert!(curve_from_cells(&[], meta()).is_err());
    }

    #[test]
    fn three_sigma_coverage_holds_at_ten_thousand_shots() {
        // 1000 seeded resamples per probability; the nominal 99.7% interval
        // must cover the true field in at least 99.0% of trials.
        let shots = 10_000u64;
        for (case, p) in [0.5f64, 0.7, 0.9].into_iter().enumerate() {
            let truth = (2.0 * p - 1.0).atanh();
            let mut covered = 0u32;
            for trial in 0..1000u64 {
                let mut rng = ChaCha12Rng::seed_from_u64(0xC0FFEE + case as u64 * 10_000 + trial);
                let n_plus = Binomial::new(shots, p).unwrap().sample(&mut rng);
                let est = heff_from_counts(&counts(n_plus, shots - n_plus)).unwrap();
                if est.ci_lo <= truth && truth <= est.ci_hi {
                    covered += 1;
                }
            }
            assert!(covered >= 990, "p={p}: covered {covered}/1000");
        }
    }
}
