//! Shot-count production under configurable imperfections.
//!
//! Both simulators expose the same three entry points: a closed-form outcome
//! probability (the exact oracle), an exact mean that bypasses sampling, and
//! a binomial sampler driven by a counter-keyed RNG stream. Counts depend
//! only on `(seed, stream_key, shots, program, noise)`, never on the order
//! in which cells are evaluated, so sweeps parallelize freely.
//!
//! Conventions fixed here and used everywhere else:
//! * measurement outcome `0` maps to spin `sigma = +1`, so `<Z> = E[sigma]`;
//! * the annealer samples `P(sigma) ~ exp(beta * h * sigma)`, i.e. positive
//!   field favors `+1`. Hardware that minimizes `+h*sigma` gets negated
//!   fields at export time; the math core stays in this convention.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{Beta, InputField, QubitProgram};

/// Tally of spin observations for one (qubit, point) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    /// Observations of `sigma = +1` (measurement outcome 0).
    pub n_plus: u64,
    /// Observations of `sigma = -1` (measurement outcome 1).
    pub n_minus: u64,
}

impl ShotCounts {
    pub fn new(n_plus: u64, n_minus: u64) -> Result<Self> {
        if n_plus + n_minus == 0 {
            return Err(Error::invalid("shot counts must total at least 1"));
        }
        Ok(ShotCounts { n_plus, n_minus })
    }

    pub fn total(&self) -> u64 {
        self.n_plus + self.n_minus
    }

    /// Empirical mean `(n_plus - n_minus) / M`.
    pub fn mean(&self) -> f64 {
        (self.n_plus as f64 - self.n_minus as f64) / self.total() as f64
    }
}

/// Gate-model imperfections: coherent angle miscalibration plus asymmetric
/// readout flips (state preparation and measurement errors).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcNoiseModel {
    /// Multiplies the rotation angle; ideal 1.
    pub angle_scale: f64,
    /// Added to the rotation angle, in radians; ideal 0.
    pub angle_offset: f64,
    /// Probability of reporting -1 when the true outcome is +1.
    pub flip_from_plus: f64,
    /// Probability of reporting +1 when the true outcome is -1.
    pub flip_from_minus: f64,
}

impl QcNoiseModel {
    pub fn ideal() -> Self {
        QcNoiseModel {
            angle_scale: 1.0,
            angle_offset: 0.0,
            flip_from_plus: 0.0,
            flip_from_minus: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, q) in [
            ("flip_from_plus", self.flip_from_plus),
            ("flip_from_minus", self.flip_from_minus),
        ] {
            if !q.is_finite() || !(0.0..0.5).contains(&q) {
                return Err(Error::invalid(format!(
                    "{name} must lie in [0, 0.5), got {q}"
                )));
            }
        }
        if !self.angle_scale.is_finite() || self.angle_scale <= 0.0 {
            return Err(Error::invalid(format!(
                "angle_scale must be a positive real, got {}",
                self.angle_scale
            )));
        }
        if !self.angle_offset.is_finite() {
            return Err(Error::invalid("angle_offset must be finite"));
        }
        Ok(())
    }
}

/// Annealer imperfections: device temperature, field scale/offset/jitter
/// (integrated control errors) and a symmetric readout flip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QaNoiseModel {
    /// Device inverse effective temperature.
    pub beta_dev: Beta,
    /// Multiplies the programmed field; ideal 1.
    pub field_scale: f64,
    /// Added to the programmed field; ideal 0.
    pub field_offset: f64,
    /// Standard deviation of independent per-shot Gaussian field jitter.
    pub field_noise_std: f64,
    /// Symmetric readout flip probability.
    pub flip: f64,
}

impl QaNoiseModel {
    pub fn ideal(beta_dev: Beta) -> Self {
        QaNoiseModel {
            beta_dev,
            field_scale: 1.0,
            field_offset: 0.0,
            field_noise_std: 0.0,
            flip: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        // Re-check beta here: deserialized models bypass the Beta constructor.
        if !self.beta_dev.value().is_finite() || self.beta_dev.value() <= 0.0 {
            return Err(Error::invalid(format!(
                "beta_dev must be a finite positive real, got {}",
                self.beta_dev.value()
            )));
        }
        if !self.flip.is_finite() || !(0.0..0.5).contains(&self.flip) {
            return Err(Error::invalid(format!(
                "flip must lie in [0, 0.5), got {}",
                self.flip
            )));
        }
        if !self.field_noise_std.is_finite() || self.field_noise_std < 0.0 {
            return Err(Error::invalid(format!(
                "field_noise_std must be >= 0, got {}",
                self.field_noise_std
            )));
        }
        if !self.field_scale.is_finite() || !self.field_offset.is_finite() {
            return Err(Error::invalid("field scale and offset must be finite"));
        }
        Ok(())
    }
}

/// Identity of one independent RNG stream.
///
/// Streams are keyed per (qubit, point) cell; `batch` separates repeated
/// programming cycles of the same cell (and rotated-plane repetitions), so
/// aggregated counts never reuse random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct StreamKey {
    pub qubit: u32,
    pub point: u32,
    pub batch: u32,
}

impl StreamKey {
    pub fn cell(qubit: u32, point: u32) -> Self {
        StreamKey { qubit, point, batch: 0 }
    }
}

/// One sampling request: a program, a shot budget, and a stream identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRequest {
    pub program: QubitProgram,
    pub shots: u64,
    pub seed: u64,
    pub stream_key: StreamKey,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the ChaCha stream for `(seed, key)`.
///
/// Pure integer mixing; the same pair yields the same generator on every
/// platform and in any evaluation order.
fn stream_rng(seed: u64, key: StreamKey) -> ChaCha12Rng {
    let mut state = seed;
    let w0 = splitmix64(&mut state);
    state ^= (key.qubit as u64) << 32 | key.point as u64;
    let w1 = splitmix64(&mut state);
    state ^= key.batch as u64;
    let w2 = splitmix64(&mut state);
    let w3 = splitmix64(&mut state);

    let mut bytes = [0u8; 32];
    for (chunk, word) in bytes.chunks_exact_mut(8).zip([w0, w1, w2, w3]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha12Rng::from_seed(bytes)
}

/// Probability of observing `sigma = +1` for a gate-model program.
///
/// With the distorted angle `theta' = angle_scale * theta + angle_offset`,
/// the true outcome probability is `cos^2(theta'/2)`; readout flips mix it
/// to `(1 - q_plus) * p + q_minus * (1 - p)`.
pub fn qc_outcome_probability(program: &QubitProgram, noise: &QcNoiseModel) -> Result<f64> {
    let theta = match *program {
        QubitProgram::Gate { theta, .. } => theta,
        QubitProgram::Anneal { .. } => {
            return Err(Error::ModelMismatch(
                "gate outcome probability needs a gate-model program".into(),
            ))
        }
    };
    noise.validate()?;
    let theta_eff = noise.angle_scale * theta + noise.angle_offset;
    // cos^2(theta/2) keeps full relative precision in the tails, where
    // (1 + cos(theta)) / 2 would cancel.
    let half_cos = (theta_eff / 2.0).cos();
    let p_true = half_cos * half_cos;
    Ok((1.0 - noise.flip_from_plus) * p_true + noise.flip_from_minus * (1.0 - p_true))
}

/// Probability of observing `sigma = +1` for an annealed field.
///
/// With the distorted field `h' = field_scale * h + field_offset + jitter`,
/// the Gibbs law gives `p = 1 / (1 + exp(-2 * beta_dev * h'))`; the symmetric
/// flip mixes it to `(1 - q) * p + q * (1 - p)`.
pub fn qa_outcome_probability(field: InputField, noise: &QaNoiseModel, jitter: f64) -> Result<f64> {
    noise.validate()?;
    if !jitter.is_finite() {
        return Err(Error::invalid(format!("jitter must be finite, got {jitter}")));
    }
    let h_eff = noise.field_scale * field.value() + noise.field_offset + jitter;
    let p_true = 1.0 / (1.0 + (-2.0 * noise.beta_dev.value() * h_eff).exp());
    Ok((1.0 - noise.flip) * p_true + noise.flip * (1.0 - p_true))
}

/// A backend simulator: one noise model bound to one computational model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Simulator {
    Gate(QcNoiseModel),
    Anneal(QaNoiseModel),
}

impl Simulator {
    pub fn ideal_gate() -> Self {
        Simulator::Gate(QcNoiseModel::ideal())
    }

    pub fn ideal_anneal(beta_dev: Beta) -> Self {
        Simulator::Anneal(QaNoiseModel::ideal(beta_dev))
    }

    pub fn backend_id(&self) -> &'static str {
        match self {
            Simulator::Gate(_) => "gate-sim",
            Simulator::Anneal(_) => "anneal-sim",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Simulator::Gate(n) => n.validate(),
            Simulator::Anneal(n) => n.validate(),
        }
    }

    /// Jitter-free outcome probability of `sigma = +1`.
    pub fn outcome_probability(&self, program: &QubitProgram) -> Result<f64> {
        match (self, program) {
            (Simulator::Gate(noise), QubitProgram::Gate { .. }) => {
                qc_outcome_probability(program, noise)
            }
            (Simulator::Anneal(noise), QubitProgram::Anneal { field }) => {
                qa_outcome_probability(*field, noise, 0.0)
            }
            _ => Err(Error::ModelMismatch(format!(
                "{} cannot execute {:?}",
                self.backend_id(),
                program
            ))),
        }
    }

    /// Exact `E[sigma]`, bypassing sampling.
    ///
    /// Computed in the mean domain rather than as `2p - 1`:
    /// `(1 - q_plus - q_minus) * cos(theta') + (q_minus - q_plus)` for gate
    /// machines and `(1 - 2q) * tanh(beta_dev * h')` for annealers. The
    /// annealer form is exactly odd in the field; per-shot jitter is a
    /// sampling effect and enters only through [`Simulator::sample`].
    pub fn exact_mean(&self, program: &QubitProgram) -> Result<f64> {
        match (self, program) {
            (Simulator::Gate(noise), QubitProgram::Gate { theta, .. }) => {
                noise.validate()?;
                let theta_eff = noise.angle_scale * theta + noise.angle_offset;
                let visibility = 1.0 - noise.flip_from_plus - noise.flip_from_minus;
                Ok(visibility * theta_eff.cos() + (noise.flip_from_minus - noise.flip_from_plus))
            }
            (Simulator::Anneal(noise), QubitProgram::Anneal { field }) => {
                noise.validate()?;
                let h_eff = noise.field_scale * field.value() + noise.field_offset;
                Ok((1.0 - 2.0 * noise.flip) * (noise.beta_dev.value() * h_eff).tanh())
            }
            _ => Err(Error::ModelMismatch(format!(
                "{} cannot execute {:?}",
                self.backend_id(),
                program
            ))),
        }
    }

    /// Draw shot counts for one cell.
    ///
    /// Jitter-free models use a single binomial draw; per-shot field jitter
    /// falls back to shot-by-shot Bernoulli draws with fresh Gaussian noise.
    pub fn sample(&self, req: &SampleRequest) -> Result<ShotCounts> {
        if req.shots == 0 {
            return Err(Error::invalid("sample requires at least 1 shot"));
        }
        let mut rng = stream_rng(req.seed, req.stream_key);

        let jitter_std = match self {
            Simulator::Anneal(noise) => noise.field_noise_std,
            Simulator::Gate(_) => 0.0,
        };

        let n_plus = if jitter_std > 0.0 {
            let (noise, field) = match (self, &req.program) {
                (Simulator::Anneal(noise), QubitProgram::Anneal { field }) => (noise, *field),
                _ => {
                    return Err(Error::ModelMismatch(format!(
                        "{} cannot execute {:?}",
                        self.backend_id(),
                        req.program
                    )))
                }
            };
            noise.validate()?;
            let gauss = Normal::new(0.0, jitter_std)
                .map_err(|e| Error::invalid(format!("bad jitter width: {e}")))?;
            let mut plus = 0u64;
            for _ in 0..req.shots {
                let xi = gauss.sample(&mut rng);
                let p = qa_outcome_probability(field, noise, xi)?;
                if rng.gen_bool(p) {
                    plus += 1;
                }
            }
            plus
        } else {
            let p = self.outcome_probability(&req.program)?;
            Binomial::new(req.shots, p)
                .map_err(|e| Error::invalid(format!("bad binomial parameters: {e}")))?
                .sample(&mut rng)
        };

        Ok(ShotCounts { n_plus, n_minus: req.shots - n_plus })
    }
}
