//! Synthetic cavity-scan measurements and the reduction pipeline that turns
//! them back into mirror numbers.
//!
//! A scan sweeps the laser across one or more free spectral ranges while the
//! transmission is recorded; 50-MHz modulation sidebands ride along as an
//! in-band frequency ruler, calibrating the instantaneous scan speed out of
//! every linewidth estimate. Lorentzian triplet fits per peak feed the
//! finesse/round-trip-loss extraction, the loss/transmission interval
//! decomposition, and the avoided-crossing analysis of
//! membrane-in-the-middle maps.

mod crossing;
mod finesse;
mod peaks;
mod trace;

pub use crossing::{fit_avoided_crossing, infer_gamma_prime, signed_delta_nu, CrossingFit, GammaPrimeFit};
pub use finesse::{extract_finesse, loss_decomposition, BudgetRow, LossBudget, PeakRecord};
pub use peaks::{detect_peaks, fit_lorentzian_triplet, PeakFit, PeakWindow};
pub use trace::{
    synthesize_scan, AxisKind, CavityUnderTest, NoiseModel, ScanAxisSpec, ScanGroundTruth,
    ScanTrace, SidebandSpec,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("invalid scan input: {0}")]
    InvalidInput(String),
    #[error("no peaks above the prominence threshold")]
    NoPeaks,
    #[error("fit diverged: {0}")]
    FitDiverged(String),
    #[error("need at least {needed} calibrated peaks, found {found}")]
    InsufficientPeaks { needed: usize, found: usize },
    #[error("loss interval is empty: {0}")]
    InconsistentBand(String),
    #[error(transparent)]
    Cavity(#[from] pcs_core::cavity::CavityError),
}
