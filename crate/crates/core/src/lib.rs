//! Hidden-label spin and path-amplitude toolkit.
//!
//! * [`quatspin`]: quaternion and complex spin amplitudes over hidden sign patterns.
//! * [`quasiprob`]: signed quasi-probability tables and Born tables.
//! * [`epr`]: singlet ensembles, trial sampling, correlators and CHSH.
//! * [`pathint`]: two-slit and four-hole path-amplitude interference.
//! * [`beamline`]: sequential Stern-Gerlach devices with beam blocking.
//! * [`phasespace`]: lattice lift of wavefunctions to `|r, p>` coefficients.

pub mod amplitude;
pub mod beamline;
pub mod epr;
pub mod error;
pub mod pathint;
pub mod phasespace;
pub mod quasiprob;
pub mod quatspin;
pub mod rng;

pub use error::{Error, Result};
