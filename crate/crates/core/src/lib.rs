//! Simulation library for intense optical coherent-state superpositions.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`] truncated Fock-space linear algebra, used as the numerical oracle
//! * [`coherent`] closed-form algebra of coherent-state superpositions
//! * [`states`] builders for the interferometer output, the conditioned GCSS,
//!   the classical mixture and parity cats
//! * [`autocorr`] second-order autocorrelation traces and their post-processing
//! * [`wigner`] Wigner functions by an analytic route and a displaced-parity route
//! * [`shg`] two-mode second-harmonic-generation dynamics
//! * [`qspec`] Monte-Carlo model of the shot-to-shot post-selection
//!
//! Units: time in fs, frequency in fs⁻¹, amplitudes in √photons, ħ = 1.

// `!(x > 0.0)` style checks are kept so NaN is rejected along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autocorr;
pub mod coherent;
pub mod error;
pub mod fock;
pub mod io;
pub mod numeric;
pub mod qspec;
pub mod shg;
pub mod states;
pub mod wigner;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
