//! Sweep construction and single-qubit program synthesis.
//!
//! A sweep point is an input field `h_in` in `[-1, 1]`. For gate machines the
//! point is realized as a Bloch-sphere rotation `Rz(phi) * Ry(theta)` applied
//! to `|0>` with `theta = acos(tanh(beta * h_in))`, so that an ideal qubit
//! measured in the Z basis reproduces a Gibbs output distribution with
//! `E[sigma] = tanh(beta * h_in)`. For annealers the point is the local field
//! itself. Gate programs are additionally compiled to a fixed 5-gate native
//! form `[Rz, SX, Rz, SX, Rz]` so every sweep point executes the same gate
//! count on hardware.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod su2;

pub use su2::UNITARY_EQUIVALENCE_TOL;

/// Inverse effective temperature linking input and effective fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Beta(f64);

impl Beta {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::invalid(format!(
                "beta must be a finite positive real, got {value}"
            )));
        }
        Ok(Beta(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Beta {
    fn default() -> Self {
        Beta(10.0)
    }
}

/// Programmed input field, dimensionless, in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputField(f64);

impl InputField {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
            return Err(Error::invalid(format!(
                "input field must lie in [-1, 1], got {value}"
            )));
        }
        Ok(InputField(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Evenly spaced sweep of input fields, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub lo: InputField,
    pub hi: InputField,
    pub count: usize,
}

impl SweepGrid {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        let lo = InputField::new(lo)?;
        let hi = InputField::new(hi)?;
        if lo.value() >= hi.value() {
            return Err(Error::invalid(format!(
                "sweep grid needs lo < hi, got [{}, {}]",
                lo.value(),
                hi.value()
            )));
        }
        if count < 2 {
            return Err(Error::invalid(format!(
                "sweep grid needs at least 2 points, got {count}"
            )));
        }
        Ok(SweepGrid { lo, hi, count })
    }

    /// Full span `[-1, 1]` with the given point count.
    pub fn full_span(count: usize) -> Result<Self> {
        SweepGrid::new(-1.0, 1.0, count)
    }
}

/// Materialize the grid: `count` points, first `lo`, last `hi`, evenly spaced.
///
/// Points are computed as the exact convex combination
/// `(lo*(n-1-i) + hi*i) / (n-1)` rather than `lo + i*step`, which keeps the
/// endpoints exact and lands symmetric grids on representable values.
pub fn build_sweep(grid: &SweepGrid) -> Vec<InputField> {
    let n = grid.count;
    let (lo, hi) = (grid.lo.value(), grid.hi.value());
    (0..n)
        .map(|i| {
            let num = lo * (n - 1 - i) as f64 + hi * i as f64;
            InputField(num / (n - 1) as f64)
        })
        .collect()
}

/// Executable single-qubit program for one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum QubitProgram {
    /// Prepare `Rz(phi) * Ry(theta) |0>` and measure in the Z basis.
    Gate { theta: f64, phi: f64 },
    /// Program a single-spin local field and read the spin projection.
    Anneal { field: InputField },
}

impl QubitProgram {
    pub fn gate(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(Error::invalid(format!(
                "gate program theta must lie in [0, pi], got {theta}"
            )));
        }
        if !phi.is_finite() {
            return Err(Error::invalid(format!(
                "gate program phi must be finite, got {phi}"
            )));
        }
        Ok(QubitProgram::Gate { theta, phi })
    }

    pub fn anneal(field: InputField) -> Self {
        QubitProgram::Anneal { field }
    }
}

/// Rotation angle realizing the input field on a gate machine.
///
/// `theta = acos(tanh(beta * h))`, strictly decreasing in `h`, with
/// `theta(0) = pi/2`. An ideal qubit prepared with this angle has
/// `<Z> = cos(theta) = tanh(beta * h)`, so the recovered effective field is
/// `beta * h`. At `|h| = 1`, `beta = 10` the angle is about `9.1e-5` rad;
/// it is computed in plain double precision and must not flush to zero.
pub fn theta_from_hin(h: InputField, beta: Beta) -> f64 {
    (beta.value() * h.value()).tanh().acos()
}

/// Build the gate-model program for one sweep point.
///
/// `phi` rotates the measurement plane and has no effect on the outcome
/// distribution; `phi = 0` keeps the experiment in the X-Z plane.
pub fn build_gate_program(h: InputField, beta: Beta, phi: f64) -> Result<QubitProgram> {
    QubitProgram::gate(theta_from_hin(h, beta), phi)
}

/// Evenly spaced plane angles in `[0, 2*pi]`, endpoints included.
///
/// Used to repeat the sweep in rotated measurement planes and check that the
/// fitted response does not depend on the plane.
pub fn phi_sweep(count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::invalid(format!(
            "phi sweep needs at least 2 values, got {count}"
        )));
    }
    let n = count;
    Ok((0..n)
        .map(|i| TAU * i as f64 / (n - 1) as f64)
        .collect())
}

/// One gate of the fixed native form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "lowercase")]
pub enum NativeGate {
    Rz { angle: f64 },
    Sx,
}

/// The normalized 5-gate program `[Rz(a), SX, Rz(b), SX, Rz(c)]`.
///
/// Every gate-model sweep point compiles to this exact shape, even when a
/// shorter circuit would implement the same unitary, so that all points pay
/// an identical gate error budget. Gates are listed in execution order; the
/// composite unitary is `Rz(c) * SX * Rz(b) * SX * Rz(a)` and equals the
/// target `Rz(phi) * Ry(theta)` up to a global phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NativeGateSequence {
    gates: [NativeGate; 5],
}

impl NativeGateSequence {
    fn from_rz_angles(a: f64, b: f64, c: f64) -> Self {
        NativeGateSequence {
            gates: [
                NativeGate::Rz { angle: a },
                NativeGate::Sx,
                NativeGate::Rz { angle: b },
                NativeGate::Sx,
                NativeGate::Rz { angle: c },
            ],
        }
    }

    /// Gates in execution order (always exactly 5).
    pub fn gates(&self) -> &[NativeGate; 5] {
        &self.gates
    }

    /// The three Rz angles `(a, b, c)` in execution order.
    pub fn rz_angles(&self) -> (f64, f64, f64) {
        match (self.gates[0], self.gates[2], self.gates[4]) {
            (
                NativeGate::Rz { angle: a },
                NativeGate::Rz { angle: b },
                NativeGate::Rz { angle: c },
            ) => (a, b, c),
            _ => unreachable!("native sequence shape is fixed at construction"),
        }
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Wrap an angle into `(-pi, pi]`.
fn wrap_angle(a: f64) -> f64 {
    let mut r = a % TAU;
    if r > PI {
        r -= TAU;
    } else if r <= -PI {
        r += TAU;
    }
    r
}

/// Compile a gate-model program to the native 5-gate form.
///
/// Uses the identity
/// `Rz(phi) * Ry(theta) = Rz(phi + pi) * SX * Rz(theta + pi) * SX * Rz(0)`
/// up to a global phase, then verifies the decomposition against a direct
/// 2x2 matrix product. A residual above [`UNITARY_EQUIVALENCE_TOL`] is an
/// internal error, never silently accepted.
pub fn normalize_to_native(program: &QubitProgram) -> Result<NativeGateSequence> {
    let (theta, phi) = match *program {
        QubitProgram::Gate { theta, phi } => (theta, phi),
        QubitProgram::Anneal { .. } => {
            return Err(Error::ModelMismatch(
                "native gate normalization applies to gate-model programs only".into(),
            ))
        }
    };

    let seq = NativeGateSequence::from_rz_angles(0.0, wrap_angle(theta + PI), wrap_angle(phi + PI));

    let residual = su2::native_sequence_residual(&seq, theta, phi);
    if residual > UNITARY_EQUIVALENCE_TOL {
        return Err(Error::InternalConsistency(format!(
            "5-gate decomposition residual {residual:.3e} exceeds {UNITARY_EQUIVALENCE_TOL:.1e} \
             for theta={theta}, phi={phi}"
        )));
    }
    Ok(seq)
}
