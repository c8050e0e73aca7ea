//! Minimal 2x2 unitary arithmetic for the gate-decomposition self-check.

use num_complex::Complex64;

use super::{NativeGate, NativeGateSequence};

/// Max-entry deviation allowed between a compiled sequence and its target,
/// after aligning global phase.
pub const UNITARY_EQUIVALENCE_TOL: f64 = 1e-10;

type Mat2 = [[Complex64; 2]; 2];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            *entry = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

fn rz(angle: f64) -> Mat2 {
    let half = angle / 2.0;
    [
        [Complex64::from_polar(1.0, -half), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::from_polar(1.0, half)],
    ]
}

fn ry(angle: f64) -> Mat2 {
    let (s, c) = (angle / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

fn sx() -> Mat2 {
    let p = Complex64::new(0.5, 0.5);
    let m = Complex64::new(0.5, -0.5);
    [[p, m], [m, p]]
}

fn sequence_unitary(seq: &NativeGateSequence) -> Mat2 {
    // Gates are listed in execution order; the circuit unitary multiplies
    // them right-to-left.
    let mut u = [
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    ];
    for gate in seq.gates() {
        let g = match *gate {
            NativeGate::Rz { angle } => rz(angle),
            NativeGate::Sx => sx(),
        };
        u = mat_mul(&g, &u);
    }
    u
}

/// Max-entry distance between the compiled sequence and `Rz(phi) * Ry(theta)`,
/// minimized over a global phase.
pub(super) fn native_sequence_residual(seq: &NativeGateSequence, theta: f64, phi: f64) -> f64 {
    let got = sequence_unitary(seq);
    let want = mat_mul(&rz(phi), &ry(theta));

    // Align phases on the largest target entry; a unitary always has one of
    // modulus >= 1/sqrt(2).
    let mut pivot = (0, 0);
    for r in 0..2 {
        for c in 0..2 {
            if want[r][c].norm() > want[pivot.0][pivot.1].norm() {
                pivot = (r, c);
            }
        }
    }
    let got_pivot = got[pivot.0][pivot.1];
    if got_pivot.norm() < 1e-3 {
        // Pivot magnitudes disagree badly; no phase can reconcile the two.
        return 1.0;
    }
    let phase = want[pivot.0][pivot.1] / got_pivot;
    let phase = phase / Complex64::new(phase.norm(), 0.0);

    let mut worst: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            worst = worst.max((phase * got[r][c] - want[r][c]).norm());
        }
    }
    worst
}
