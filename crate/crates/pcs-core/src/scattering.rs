//! Complex two-port scattering algebra for mirror-symmetric optical elements.
//!
//! A thin slab or mirror that is symmetric with respect to its own plane is
//! described by a 2x2 scattering matrix with equal diagonal entries `r` and
//! equal off-diagonal entries `t`. Illuminating it with the symmetric or
//! antisymmetric combination of left/right incoming fields diagonalizes the
//! matrix; the eigenvalues `r + t` and `r - t` have unit modulus for a
//! lossless element, and their deficit from unit modulus defines the channel
//! losses `L_pm = 1 - |r pm t|^2`.
//!
//! Transfer matrices relate the field pair on the right side of an element to
//! the pair on the left side and compose by matrix multiplication, which is
//! how cavities are assembled in [`crate::cavity`].
//!
//! Model limitation: a 2x2 scattering description covers one polarization of
//! one spatial mode. A real patterned membrane also scatters a small amount
//! (tens of ppm) of an incident beam's off-axis wavevector components into
//! the orthogonal polarization; that channel cannot be represented here and
//! shows up experimentally as extra residual transmission.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Threshold below which an element counts as opaque for the transfer-matrix
/// conversion.
pub const OPAQUE_TRANSMISSION_TOL: f64 = 1e-9;

/// Errors from the scattering algebra.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScatteringError {
    /// Transmission magnitude too small for a well-conditioned transfer
    /// matrix; use the analytic eigenmode path instead.
    #[error("|t| = {magnitude:.3e} <= {threshold:.3e}: element is opaque, transfer matrix is ill-conditioned")]
    IllConditioned { magnitude: f64, threshold: f64 },
    /// An eigenchannel amplitude vanishes, so the coupled-cavity mode of that
    /// channel is undefined.
    #[error("eigenchannel amplitude |r {sign} t| vanishes; coupled-cavity mode undefined")]
    DegenerateChannel { sign: char },
    /// Mirror parameters violate energy conservation.
    #[error("invalid mirror: transmission {transmission} + excess loss {excess_loss} exceeds 1")]
    InvalidMirror { transmission: f64, excess_loss: f64 },
}

/// Left/right pair of field amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPair {
    pub left: Complex64,
    pub right: Complex64,
}

impl FieldPair {
    pub fn new(left: Complex64, right: Complex64) -> Self {
        Self { left, right }
    }
}

/// Scattering matrix of a mirror-symmetric two-port: reflection `r` and
/// transmission `t`, identical from both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPortScattering {
    pub r: Complex64,
    pub t: Complex64,
}

impl TwoPortScattering {
    pub fn new(r: Complex64, t: Complex64) -> Self {
        Self { r, t }
    }

    /// Eigenvalues of the scattering matrix: `(r + t, r - t)`, associated with
    /// the symmetric and antisymmetric combinations of left/right inputs.
    pub fn eigenchannels(&self) -> (Complex64, Complex64) {
        (self.r + self.t, self.r - self.t)
    }

    /// Channel losses `L_pm = 1 - |r pm t|^2`.
    ///
    /// May be negative for a non-passive input; callers that need passivity
    /// check it with [`TwoPortScattering::is_passive`].
    pub fn channel_losses(&self) -> (f64, f64) {
        let (s_plus, s_minus) = self.eigenchannels();
        (1.0 - s_plus.norm_sqr(), 1.0 - s_minus.norm_sqr())
    }

    /// True iff both eigenchannel moduli are at most `1 + tol`.
    pub fn is_passive(&self, tol: f64) -> bool {
        debug_assert!(tol >= 0.0);
        let (s_plus, s_minus) = self.eigenchannels();
        s_plus.norm() <= 1.0 + tol && s_minus.norm() <= 1.0 + tol
    }

    /// Scatter an incoming field pair into the outgoing pair.
    pub fn apply(&self, input: &FieldPair) -> FieldPair {
        FieldPair {
            left: self.r * input.left + self.t * input.right,
            right: self.t * input.left + self.r * input.right,
        }
    }

    /// Convert to the transfer-matrix form.
    ///
    /// Fails with [`ScatteringError::IllConditioned`] when `|t|` is at or
    /// below [`OPAQUE_TRANSMISSION_TOL`].
    pub fn to_transfer(&self) -> Result<TransferMatrix, ScatteringError> {
        let t_abs = self.t.norm();
        if t_abs <= OPAQUE_TRANSMISSION_TOL {
            return Err(ScatteringError::IllConditioned {
                magnitude: t_abs,
                threshold: OPAQUE_TRANSMISSION_TOL,
            });
        }
        let inv_t = Complex64::new(1.0, 0.0) / self.t;
        Ok(TransferMatrix {
            m11: (self.t * self.t - self.r * self.r) * inv_t,
            m12: self.r * inv_t,
            m21: -self.r * inv_t,
            m22: inv_t,
        })
    }
}

/// Ideal mirror characterized by its power transmission and excess loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorSpec {
    /// Power transmission T' of the coating.
    pub power_transmission: f64,
    /// Power lost to absorption/scattering, in addition to the transmission.
    pub excess_loss: f64,
}

impl MirrorSpec {
    pub fn new(power_transmission: f64, excess_loss: f64) -> Result<Self, ScatteringError> {
        let ok = (0.0..=1.0).contains(&power_transmission)
            && (0.0..=1.0).contains(&excess_loss)
            && power_transmission + excess_loss <= 1.0;
        if !ok {
            return Err(ScatteringError::InvalidMirror {
                transmission: power_transmission,
                excess_loss,
            });
        }
        Ok(Self {
            power_transmission,
            excess_loss,
        })
    }

    /// Power reflectivity `|r'|^2 = 1 - T' - excess_loss`.
    pub fn power_reflectivity(&self) -> f64 {
        1.0 - self.power_transmission - self.excess_loss
    }

    /// Amplitude reflectivity `|r'|`.
    pub fn amplitude_reflectivity(&self) -> f64 {
        self.power_reflectivity().sqrt()
    }

    /// Scattering matrix of the mirror with the phase convention `r` real
    /// positive and `t = i sqrt(T')`, which makes a lossless mirror exactly
    /// unitary (`|r + t| = |r - t| = 1`).
    pub fn scattering(&self) -> TwoPortScattering {
        TwoPortScattering {
            r: Complex64::new(self.amplitude_reflectivity(), 0.0),
            t: Complex64::new(0.0, self.power_transmission.sqrt()),
        }
    }
}

/// 2x2 complex transfer matrix mapping the left-side field pair
/// `(rightward, leftward)` to the right-side pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub m11: Complex64,
    pub m12: Complex64,
    pub m21: Complex64,
    pub m22: Complex64,
}

impl TransferMatrix {
    pub fn identity() -> Self {
        Self {
            m11: Complex64::new(1.0, 0.0),
            m12: Complex64::new(0.0, 0.0),
            m21: Complex64::new(0.0, 0.0),
            m22: Complex64::new(1.0, 0.0),
        }
    }

    /// Ordinary matrix product `self * rhs`.
    pub fn compose(&self, rhs: &TransferMatrix) -> TransferMatrix {
        TransferMatrix {
            m11: self.m11 * rhs.m11 + self.m12 * rhs.m21,
            m12: self.m11 * rhs.m12 + self.m12 * rhs.m22,
            m21: self.m21 * rhs.m11 + self.m22 * rhs.m21,
            m22: self.m21 * rhs.m12 + self.m22 * rhs.m22,
        }
    }

    pub fn determinant(&self) -> Complex64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    /// Scattering coefficients seen from the left: `(r, t)` with no input
    /// from the right. Inverse of [`TwoPortScattering::to_transfer`] for
    /// symmetric elements.
    pub fn to_scattering(&self) -> TwoPortScattering {
        TwoPortScattering {
            r: -self.m21 / self.m22,
            t: self.determinant() / self.m22,
        }
    }

    /// Power transmission through the chained element for unit input from the
    /// left.
    pub fn power_transmission(&self) -> f64 {
        (self.determinant() / self.m22).norm_sqr()
    }
}

/// Free propagation over a length `l >= 0` at vacuum wavenumber `k`:
/// `diag(exp(i k l), exp(-i k l))`.
pub fn propagation(k: f64, l: f64) -> TransferMatrix {
    debug_assert!(l >= 0.0);
    let phase = Complex64::from_polar(1.0, k * l);
    TransferMatrix {
        m11: phase,
        m12: Complex64::new(0.0, 0.0),
        m21: Complex64::new(0.0, 0.0),
        m22: phase.conj(),
    }
}

/// Chain elements in optical order (first element hit by the beam first).
///
/// The result maps fields on the left of the first element to fields on the
/// right of the last, i.e. `chain([a, b]) = b.compose(a)` as matrices.
pub fn chain(elements: &[TransferMatrix]) -> TransferMatrix {
    elements
        .iter()
        .fold(TransferMatrix::identity(), |acc, m| m.compose(&acc))
}
