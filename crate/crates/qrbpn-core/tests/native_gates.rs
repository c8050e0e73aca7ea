//! Cross-checks the 5-gate compilation against a standalone matrix oracle.
//!
//! The oracle below rebuilds every gate matrix from first principles and
//! multiplies them out on its own; it shares no code with the production
//! decomposition path.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::f64::consts::PI;

use qrbpn_core::protocol::{normalize_to_native, NativeGate, QubitProgram};

type Mat = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mul(a: &Mat, b: &Mat) -> Mat {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            out[r][0] += a[r][k] * b[k][0];
            out[r][1] += a[r][k] * b[k][1];
        }
    }
    out
}

fn oracle_rz(a: f64) -> Mat {
    [
        [Complex64::from_polar(1.0, -a / 2.0), c(0.0, 0.0)],
        [c(0.0, 0.0), Complex64::from_polar(1.0, a / 2.0)],
    ]
}

fn oracle_ry(t: f64) -> Mat {
    [
        [c((t / 2.0).cos(), 0.0), c(-(t / 2.0).sin(), 0.0)],
        [c((t / 2.0).sin(), 0.0), c((t / 2.0).cos(), 0.0)],
    ]
}

fn oracle_sx() -> Mat {
    [[c(0.5, 0.5), c(0.5, -0.5)], [c(0.5, -0.5), c(0.5, 0.5)]]
}

/// Multiply the sequence out in circuit order (first gate rightmost).
fn composite(gates: &[NativeGate; 5]) -> Mat {
    let mut u = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
    for g in gates {
        let m = match *g {
            NativeGate::Rz { angle } => oracle_rz(angle),
            NativeGate::Sx => oracle_sx(),
        };
        u = mul(&m, &u);
    }
    u
}

/// Max-entry distance up to a global phase.
fn phase_distance(a: &Mat, b: &Mat) -> f64 {
    let mut pivot = (0usize, 0usize);
    for r in 0..2 {
        for col in 0..2 {
            if b[r][col].norm() > b[pivot.0][pivot.1].norm() {
                pivot = (r, col);
            }
        }
    }
    let num = b[pivot.0][pivot.1];
    let den = a[pivot.0][pivot.1];
    if den.norm() < 1e-6 {
        return 1.0;
    }
    let phase = num / den;
    let phase = phase / c(phase.norm(), 0.0);
    let mut worst: f64 = 0.0;
    for r in 0..2 {
        for col in 0..2 {
            worst = worst.max((phase * a[r][col] - b[r][col]).norm());
        }
    }
    worst
}

fn target(theta: f64, phi: f64) -> Mat {
    mul(&oracle_rz(phi), &oracle_ry(theta))
}

fn is_sx(g: &NativeGate) -> bool {
    matches!(g, NativeGate::Sx)
}

fn check(theta: f64, phi: f64) -> f64 {
    let seq = normalize_to_native(&QubitProgram::gate(theta, phi).unwrap()).unwrap();
    let gates = seq.gates();
    assert_eq!(gates.len(), 5);
    assert!(!is_sx(&gates[0]) && is_sx(&gates[1]) && !is_sx(&gates[2]));
    assert!(is_sx(&gates[3]) && !is_sx(&gates[4]));
    phase_distance(&composite(gates), &target(theta, phi))
}

#[test]
fn identity_target_compiles_to_five_gates() {
    assert!(check(0.0, 0.0) < 1e-10);
}

#[test]
fn half_turn_target_matches_ry_pi() {
    // Ry(pi) = [[0, -1], [1, 0]]; the compiled product must match it up to
    // phase, which the oracle checks directly.
    let seq = normalize_to_native(&QubitProgram::gate(PI, 0.0).unwrap()).unwrap();
    let got = composite(seq.gates());
    let want = [[c(0.0, 0.0), c(-1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
    assert!(phase_distance(&got, &want) < 1e-10);
}

#[test]
fn border_angles_compile_cleanly() {
    for theta in [0.0, 1e-9, 9.08e-5, PI / 2.0, PI - 1e-9, PI] {
        for phi in [0.0, PI / 2.0, PI, 3.0 * PI / 2.0, 2.0 * PI] {
            let d = check(theta, phi);
            assert!(d < 1e-10, "theta={theta} phi={phi} distance={d:.3e}");
        }
    }
}

#[test]
fn thousand_random_targets_pass_the_matrix_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5EED_CAFE);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let theta = rng.gen_range(0.0..=PI);
        let phi = rng.gen_range(0.0..2.0 * PI);
        worst = worst.max(check(theta, phi));
    }
    assert!(worst < 1e-10, "worst residual {worst:.3e}");
}

#[test]
fn born_probability_ignores_the_plane_angle() {
    // |<0| Rz(phi) Ry(theta) |0>|^2 depends only on theta.
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    for _ in 0..200 {
        let theta = rng.gen_range(0.0..=PI);
        let phi = rng.gen_range(0.0..2.0 * PI);
        let with_phi = target(theta, phi)[0][0].norm_sqr();
        let without = target(theta, 0.0)[0][0].norm_sqr();
        assert!((with_phi - without).abs() < 1e-14);
    }
}
