//! Simulation and analysis toolkit for a quantum repeater built from single
//! Er³⁺/Eu³⁺ ion pairs in Y₂SiO₅.
//!
//! The crate is organized bottom-up:
//!
//! * [`dipole`]: electric and magnetic dipole-dipole coupling, conditional
//!   drive and gate durations.
//! * [`cavity`]: Purcell-enhanced emission, indistinguishability and spin
//!   relaxation.
//! * [`lindblad`]: nine-level open-system engine (exact integration and
//!   first-order rotation superoperators).
//! * [`gates`]: CNOT / reverse-CNOT / state-transfer pulse sequences and
//!   their fidelities.
//! * [`protocol`]: Bell-state bookkeeping for heralded generation, mapping
//!   and swapping, plus a small state-vector oracle.
//! * [`rates`]: analytic entanglement-distribution rates and baselines.
//! * [`montecarlo`]: slotted protocol simulation validating the rate
//!   formulas.
//! * [`config`], [`sweep`], [`report`]: the text interfaces used by the CLI.
//!
//! Data-parallel loops (Monte Carlo trials, parameter grids) run on rayon when
//! the `parallel` feature is enabled and fall back to sequential iteration
//! otherwise. See [`exec::Execution`].

// Validation uses negated comparisons so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod config;
pub mod dipole;
pub mod exec;
pub mod gates;
pub mod lindblad;
pub mod montecarlo;
pub mod protocol;
pub mod rates;
pub mod report;
pub mod sweep;

/// Angular frequency (rad/s) for an ordinary frequency in Hz.
#[inline]
pub fn angular(hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * hz
}
