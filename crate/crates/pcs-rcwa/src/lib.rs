//! Fourier modal method (RCWA) for a single dielectric slab patterned with a
//! square lattice of circular holes.
//!
//! The solver returns the complex zeroth-order reflection/transmission pair
//! (a [`pcs_core::scattering::TwoPortScattering`], since the slab is
//! symmetric about its mid-plane) together with total far-field powers and a
//! per-order budget, versus wavelength, in-plane wavevector `k_x` and s/p
//! polarization. A Gaussian spectrometer convolution and deterministic
//! parallel map sweeps are included for reproducing measured reflectivity
//! maps.
//!
//! Linear algebra runs sequentially inside each solve (sweeps parallelize
//! across grid points instead), which keeps outputs byte-identical for any
//! worker count.

mod bessel;
mod crystal;
mod factor;
mod solver;

pub use bessel::bessel_j1;
pub use crystal::{effective_epsilon, epsilon_fourier, CrystalSpec, IndexModel};
pub use solver::{
    absorption_for_loss, band_map, convergence_step, convolve_spectrometer, solve, solve_two_sided,
    solve_with, BandMap, Factorization, IncidenceSide, MapPoint, OrderPower, PlaneWaveExcitation,
    Polarization, RcwaResult, SolveDiagnostics, SolveOptions, Truncation,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RcwaError {
    #[error("invalid crystal or excitation: {0}")]
    InvalidSpec(String),
    #[error("ambient order at a Rayleigh anomaly (min |k_z|/k0 = {min_kz:.3e}); perturb the wavelength")]
    SingularBoundary { min_kz: f64 },
    #[error("layer mode with |q|/k0 = {q_norm:.3e} too close to cutoff; perturb the wavelength")]
    DegenerateLayerMode { q_norm: f64 },
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error("wavelength sampling {step:.3e} m too coarse for a {fwhm:.3e} m spectrometer response")]
    GridTooCoarse { step: f64, fwhm: f64 },
}

/// Lock the dense linear algebra to sequential execution. Call once at
/// program start when reproducible parallel sweeps are wanted; the sweep
/// level (rayon) remains free to use every core.
pub fn lock_linear_algebra_sequential() {
    faer::set_global_parallelism(faer::Par::Seq);
}
