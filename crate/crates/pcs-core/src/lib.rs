//! Core optics for photonic-crystal-slab (PCS) mirrors and the Fabry-Perot
//! cavities built around them.
//!
//! The crate is organized around a small set of value types:
//!
//! - [`scattering`]: complex two-port scattering matrices of a mirror-symmetric
//!   element, their symmetric/antisymmetric eigenchannels and losses, and the
//!   transfer-matrix algebra used to chain elements into cavities.
//! - [`guided_modes`]: the analytic band solver for the homogenized
//!   (unpatterned) membrane: Fresnel coefficients, the round-trip resonance
//!   condition and the symmetry classification of the fundamental modes.
//! - [`fano`]: the two-mode Fano lineshape for the slab reflection and
//!   transmission near a guided resonance, its lossy extension, and
//!   least-squares fits of spectra to the model.
//! - [`cavity`]: single-ended and membrane-in-the-middle cavities, free
//!   spectral range / finesse relations, Airy transmission from transfer
//!   matrices and the coupled-cavity eigenmode formulas.
//! - [`optim`]: the small Levenberg-Marquardt engine and scalar solvers
//!   shared by the fitting routines.
//!
//! All types are immutable values and all operations are pure functions, so
//! everything here can be evaluated concurrently from any number of workers.
//!
//! Conventions: amplitudes are dimensionless, spectral quantities are carried
//! as vacuum wavelength in meters, and a field propagating over a distance
//! `l` picks up the phase `exp(i k l)`. This sign choice makes the
//! coupled-cavity eigenfrequency formulas in [`cavity`] exact for transfer
//! matrix chains built from [`scattering::propagation`].

pub mod cavity;
pub mod fano;
pub mod guided_modes;
pub mod optim;
pub mod scattering;

pub use num_complex::Complex64;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
