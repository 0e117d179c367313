//! Simulator and analysis toolkit for Leggett-Garg inequalities in a driven
//! two-level system.
//!
//! The crate has four layers:
//!
//! * [`quantum`] — exact closed-form predictions for a two-level system driven
//!   by a constant off-diagonal Hamiltonian: unitary evolution, single-time and
//!   sequential two-time measurement probabilities, two-time correlators, and
//!   the four-time Leggett-Garg combination.
//! * [`beads`] — a deterministic hidden-variable model in which every system
//!   carries a label riding on one of four ontic regions (two regions per
//!   sector, two sectors). Trajectories never cross within a sector, so the
//!   region statistics follow the sector occupation waterline. Measurement is
//!   modelled explicitly as a region swap and is therefore invasive at the
//!   ontic level even though single-time statistics match the quantum ones.
//! * [`mc`] — counter-based seeded sampling, Monte Carlo estimation of bead
//!   correlators with standard errors, and a deterministic stratified
//!   enumeration oracle used to cross-check every closed form.
//! * [`analysis`] — Leggett-Garg quantity assembly and scans, the generic
//!   realist-ensemble bound check, and invasiveness-vs-detectability reports
//!   that separate "disturbs the ontic state" from "shows up in statistics".

pub mod analysis;
pub mod beads;
pub mod mc;
pub mod quantum;

mod error;

pub use error::Error;
// Complex amplitudes appear in the public quantum API; re-export the type so
// downstream code does not need a direct num-complex dependency.
pub use num_complex::Complex64;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
