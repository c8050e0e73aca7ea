//! Single-qubit characterization for gate-model and annealing quantum hardware.
//!
//! The pipeline measures how consistently a qubit responds to a programmed
//! input field `h_in` in `[-1, 1]`:
//!
//! 1. [`protocol`] turns a sweep of input fields into executable single-qubit
//!    programs (a rotation angle for gate machines, a local field for
//!    annealers) and compiles gate programs to a fixed 5-gate native form.
//! 2. [`backends`] produces shot counts for a program under configurable
//!    imperfections, with closed-form outcome probabilities as an exact oracle.
//! 3. [`estimation`] converts counts into effective-field estimates
//!    `h_eff = atanh(E[sigma])` with 3-sigma confidence intervals.
//! 4. [`metrics`] extracts the four per-qubit numbers: response and bias from
//!    an affine fit in the linear window, and the two saturation extremes.
//! 5. [`reporting`] aggregates per-qubit metrics into per-chip summaries and
//!    histogram data.
//!
//! All operations are pure; sampling is deterministic given a seed and a
//! per-cell stream key, so sweeps can be evaluated concurrently in any order.

pub mod backends;
pub mod error;
pub mod estimation;
pub mod metrics;
pub mod protocol;
pub mod reporting;

pub use error::{Error, Result};
