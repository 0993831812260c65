//! Two-mode Fano lineshape for the slab reflection and transmission near a
//! guided resonance.
//!
//! Away from resonance the slab scatters with constant direct coefficients
//! `(r_d, t_d)`; a high-Q guided mode adds a Lorentzian pathway of width
//! `gamma` centered at `lambda0`. Interference between the two produces the
//! asymmetric Fano profile with a transmission zero at some `lambda1`. Losses
//! are modeled by a phenomenological extra width `gamma_prime` applied to the
//! resonant denominator only, which leaves one eigenchannel of the slab
//! strictly lossless.
//!
//! The model equations are implemented verbatim. For a nonzero `r_d` they are
//! not exactly unitary away from the transmission zero, so global unitarity is
//! never asserted; [`unitarity_deviation`] exposes the deviation as a
//! diagnostic instead.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{self, LevMarOptions};
use crate::scattering::TwoPortScattering;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FanoError {
    #[error("invalid Fano parameters: {0}")]
    InvalidParams(String),
    #[error("minimum |t| = {min_t_abs:.3e} exceeds 1e-6; no transmission zero (lossy input?)")]
    NoZero { min_t_abs: f64 },
    #[error("fit diverged: {0}")]
    FitDiverged(String),
    #[error("window contains {count} resonance candidates, expected exactly one")]
    AmbiguousWindow { count: usize },
    #[error("invalid fit input: {0}")]
    InvalidInput(String),
}

/// Symmetry of the guided mode with respect to the slab mid-plane. The
/// fundamental TE mode is antisymmetric, the fundamental TM mode symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FanoBranch {
    Symmetric,
    Antisymmetric,
}

impl FanoBranch {
    pub fn sign(self) -> f64 {
        match self {
            FanoBranch::Symmetric => 1.0,
            FanoBranch::Antisymmetric => -1.0,
        }
    }
}

/// Parameters of the two-mode model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoParams {
    /// Direct (off-resonant) reflection coefficient.
    pub r_d: Complex64,
    /// Direct (off-resonant) transmission coefficient.
    pub t_d: Complex64,
    /// Guided-mode wavelength (m).
    pub lambda0: f64,
    /// Resonance width (m).
    pub gamma: f64,
    /// Phenomenological loss width (m), zero for the lossless model.
    pub gamma_prime: f64,
    pub branch: FanoBranch,
}

impl FanoParams {
    /// Build parameters satisfying the lossless direct-process constraint by
    /// construction: `r_d = i sin(phi) e^{i psi}`, `t_d = cos(phi) e^{i psi}`.
    pub fn from_angles(
        phi: f64,
        psi: f64,
        lambda0: f64,
        gamma: f64,
        gamma_prime: f64,
        branch: FanoBranch,
    ) -> Self {
        let global = Complex64::from_polar(1.0, psi);
        Self {
            r_d: Complex64::new(0.0, phi.sin()) * global,
            t_d: Complex64::new(phi.cos(), 0.0) * global,
            lambda0,
            gamma,
            gamma_prime,
            branch,
        }
    }

    /// Recover `(phi, psi)` from the direct coefficients.
    pub fn angles(&self) -> (f64, f64) {
        let psi = if self.t_d.norm() > 1e-12 {
            self.t_d.arg()
        } else {
            self.r_d.arg() - std::f64::consts::FRAC_PI_2
        };
        let global = Complex64::from_polar(1.0, -psi);
        let sin_phi = (self.r_d * global).im;
        let cos_phi = (self.t_d * global).re;
        (sin_phi.atan2(cos_phi), psi)
    }

    /// Check the lossless direct-process constraint `|r_d + t_d| = |r_d - t_d| = 1`
    /// (within 1e-9) and the width signs.
    pub fn validate(&self) -> Result<(), FanoError> {
        let plus = (self.r_d + self.t_d).norm();
        let minus = (self.r_d - self.t_d).norm();
        if (plus - 1.0).abs() > 1e-9 || (minus - 1.0).abs() > 1e-9 {
            return Err(FanoError::InvalidParams(format!(
                "direct process not lossless: |r_d+t_d| = {plus}, |r_d-t_d| = {minus}"
            )));
        }
        if self.gamma <= 0.0 || self.gamma.is_nan() || self.gamma_prime < 0.0 {
            return Err(FanoError::InvalidParams(format!(
                "widths must satisfy gamma > 0 (got {}) and gamma_prime >= 0 (got {})",
                self.gamma, self.gamma_prime
            )));
        }
        Ok(())
    }

    /// Scattering coefficients at `lambda`, including the loss width.
    pub fn scattering(&self, lambda: f64) -> TwoPortScattering {
        lossy_fano_rt(self, lambda)
    }
}

/// Lossless two-mode model. Requires `gamma_prime == 0`.
pub fn fano_rt(p: &FanoParams, lambda: f64) -> TwoPortScattering {
    assert_eq!(p.gamma_prime, 0.0, "fano_rt requires gamma_prime = 0");
    lossy_fano_rt(p, lambda)
}

/// Two-mode model with the loss width `gamma_prime` in the resonant
/// denominator; reduces to [`fano_rt`] at `gamma_prime = 0`.
pub fn lossy_fano_rt(p: &FanoParams, lambda: f64) -> TwoPortScattering {
    let sign = p.branch.sign();
    let denom = Complex64::new(p.gamma + p.gamma_prime, lambda - p.lambda0);
    let lorentz = Complex64::new(p.gamma, 0.0) / denom;
    let coupling = sign * p.r_d - p.t_d;
    TwoPortScattering {
        r: p.r_d + sign * lorentz * coupling,
        t: p.t_d + lorentz * coupling,
    }
}

/// Channel losses of the antisymmetric-branch lossy model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClosedFormLosses {
    /// Symmetric-channel loss; identically zero for the antisymmetric branch.
    pub l_plus: f64,
    /// Closed-form antisymmetric-channel loss,
    /// `4 gamma gamma' / ((gamma + gamma')^2 + (lambda - lambda0)^2)`.
    pub l_minus: f64,
    /// `L_-` evaluated directly from the model coefficients.
    pub l_minus_direct: f64,
    /// `|l_minus - l_minus_direct|`; zero for `r_d = 0`, reported otherwise.
    pub discrepancy: f64,
}

/// Closed-form channel losses for the antisymmetric branch, together with the
/// direct evaluation. The Lorentzian form is exact only for `r_d = 0`; the
/// discrepancy field quantifies the difference for any other input.
pub fn channel_losses_closed_form(p: &FanoParams, lambda: f64) -> ClosedFormLosses {
    assert_eq!(
        p.branch,
        FanoBranch::Antisymmetric,
        "closed-form losses apply to the antisymmetric branch"
    );
    let delta = lambda - p.lambda0;
    let width = p.gamma + p.gamma_prime;
    let l_minus = 4.0 * p.gamma * p.gamma_prime / (width * width + delta * delta);
    let (_, l_minus_direct) = lossy_fano_rt(p, lambda).channel_losses();
    ClosedFormLosses {
        l_plus: 0.0,
        l_minus,
        l_minus_direct,
        discrepancy: (l_minus - l_minus_direct).abs(),
    }
}

/// Deviation of the model from unitarity at `lambda`: `| |r|^2 + |t|^2 - 1 |`.
///
/// Nonzero away from the transmission zero whenever `r_d != 0`, even for
/// `gamma_prime = 0`; exposed as a diagnostic, never asserted to vanish.
pub fn unitarity_deviation(p: &FanoParams, lambda: f64) -> f64 {
    let s = lossy_fano_rt(p, lambda);
    (s.r.norm_sqr() + s.t.norm_sqr() - 1.0).abs()
}

/// Location of the transmission zero of the lossless model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZeroTransmission {
    /// Operational result: argmin of `|t(lambda)|`, refined to 1e-15 m.
    pub lambda1: f64,
    /// `|t|` at the minimum.
    pub t_abs: f64,
    /// Closed-form candidates `lambda0 +- gamma Re(i r_d / t_d)`.
    pub closed_form_plus: f64,
    pub closed_form_minus: f64,
    /// Sign of the closed-form candidate matching the numeric zero.
    pub matched_sign: i8,
}

/// Find the wavelength where the transmission of the lossless model vanishes.
///
/// The numeric minimum of `|t|` is the primary result; both closed-form sign
/// choices are evaluated and the matching one reported, since the matching
/// sign depends on the branch.
pub fn zero_transmission_wavelength(p: &FanoParams) -> Result<ZeroTransmission, FanoError> {
    assert!(p.t_d.norm() > 0.0, "t_d must be nonzero");
    let ratio = Complex64::new(0.0, 1.0) * p.r_d / p.t_d;
    if ratio.im.abs() > 1e-9 {
        return Err(FanoError::InvalidParams(format!(
            "i r_d / t_d = {ratio} is not real; direct process violates the lossless constraint"
        )));
    }
    let rho = ratio.re;

    // Coarse scan over a window that always contains both closed-form
    // candidates, then golden-section refinement.
    let half_span = p.gamma * (2.0 * rho.abs() + 10.0);
    let n = 4000;
    let mut best = (f64::INFINITY, p.lambda0);
    for i in 0..=n {
        let lambda = p.lambda0 - half_span + 2.0 * half_span * i as f64 / n as f64;
        let t_abs = lossy_fano_rt(p, lambda).t.norm();
        if t_abs < best.0 {
            best = (t_abs, lambda);
        }
    }
    let step = 2.0 * half_span / n as f64;
    let (mut lambda1, mut t_abs) = optim::golden_section_min(
        |lambda| lossy_fano_rt(p, lambda).t.norm(),
        best.1 - 2.0 * step,
        best.1 + 2.0 * step,
        1e-15,
    );
    if t_abs > 1e-6 {
        return Err(FanoError::NoZero { min_t_abs: t_abs });
    }

    // Newton polish on the complex transmission: near a true zero t(lambda)
    // is linear in lambda, so a few steps reach machine accuracy, far below
    // the golden-section bracket.
    let h = 1e-6 * p.gamma;
    for _ in 0..8 {
        let t0 = lossy_fano_rt(p, lambda1).t;
        let slope = (lossy_fano_rt(p, lambda1 + h).t - lossy_fano_rt(p, lambda1 - h).t)
            / Complex64::new(2.0 * h, 0.0);
        if slope.norm() == 0.0 {
            break;
        }
        let step = (t0 / slope).re;
        let candidate = lambda1 - step;
        let t_cand = lossy_fano_rt(p, candidate).t.norm();
        if t_cand < t_abs {
            lambda1 = candidate;
            t_abs = t_cand;
        } else {
            break;
        }
    }

    let plus = p.lambda0 + p.gamma * rho;
    let minus = p.lambda0 - p.gamma * rho;
    let matched_sign = if (lambda1 - plus).abs() <= (lambda1 - minus).abs() {
        1
    } else {
        -1
    };
    Ok(ZeroTransmission {
        lambda1,
        t_abs,
        closed_form_plus: plus,
        closed_form_minus: minus,
        matched_sign,
    })
}

/// Result of a Fano fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FanoFit {
    pub params: FanoParams,
    pub phi: f64,
    pub psi: f64,
    /// 1-sigma uncertainties of the fitted angles/widths, in fit order.
    pub sigmas: Vec<f64>,
    pub residual_rms: f64,
}

/// Count well-separated transmission dips: local minima deeper than a quarter
/// of the signal range, merged unless the barrier between two minima rises at
/// least a tenth of the range above them.
fn count_resonance_candidates(transmission: &[f64]) -> usize {
    let n = transmission.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &t in transmission {
        lo = lo.min(t);
        hi = hi.max(t);
    }
    if hi - lo <= 0.0 {
        return 0;
    }
    let threshold = hi - 0.25 * (hi - lo);
    let rise = 0.10 * (hi - lo);

    let mut minima = Vec::new();
    for i in 1..n - 1 {
        if transmission[i] < threshold
            && transmission[i] <= transmission[i - 1]
            && transmission[i] <= transmission[i + 1]
            && transmission[i] != transmission[i - 1]
        {
            minima.push(i);
        }
    }

    let mut count = 0;
    let mut kept: Option<usize> = None;
    for &m in &minima {
        match kept {
            None => {
                count += 1;
                kept = Some(m);
            }
            Some(k) => {
                let barrier = transmission[k..=m].iter().cloned().fold(f64::MIN, f64::max);
                if barrier > transmission[k].max(transmission[m]) + rise {
                    count += 1;
                    kept = Some(m);
                } else if transmission[m] < transmission[k] {
                    kept = Some(m);
                }
            }
        }
    }
    count
}

fn transmission_initial_guess(lambdas: &[f64], transmission: &[f64]) -> (f64, f64, f64) {
    let n = transmission.len();
    let mut i_min = 0;
    for i in 0..n {
        if transmission[i] < transmission[i_min] {
            i_min = i;
        }
    }
    let t_edge = 0.5 * (transmission[0] + transmission[n - 1]);
    let phi = t_edge.clamp(0.0, 1.0).sqrt().acos().max(0.05);
    let lambda0 = lambdas[i_min];

    // width of the dip at half depth
    let half = 0.5 * (t_edge + transmission[i_min]);
    let mut left = lambdas[0];
    for i in (0..i_min).rev() {
        if transmission[i] >= half {
            left = lambdas[i];
            break;
        }
    }
    let mut right = *lambdas.last().unwrap();
    for i in i_min..n {
        if transmission[i] >= half {
            right = lambdas[i];
            break;
        }
    }
    let gamma = ((right - left).abs()).max((lambdas[1] - lambdas[0]).abs());
    (phi, lambda0, gamma)
}

/// Starting points spread around the single-dip guess. The Fano cost surface
/// has narrow basins when the dip is asymmetric, so the fits try a small
/// grid and keep the best converged result.
fn start_grid(phi0: f64, lambda0: f64, width: f64) -> Vec<(f64, f64, f64)> {
    let mut starts = Vec::new();
    for &dl in &[0.0, -0.35, 0.35] {
        for &gf in &[1.0 / 6.0, 1.0 / 3.0, 2.0 / 3.0, 1.2] {
            for &phi in &[phi0, 0.55] {
                starts.push((phi, lambda0 + dl * width, width * gf));
            }
        }
    }
    starts
}

/// Fit the lossless model to a transmission spectrum `(lambda, T)` over a
/// window containing exactly one resonance. The lossless direct-process
/// constraint is enforced by construction through the `(phi, psi)`
/// parameterization; the fitted parameters are `(phi, lambda0, gamma)`.
pub fn fit_fano_transmission(
    samples: &[(f64, f64)],
    branch: FanoBranch,
) -> Result<FanoFit, FanoError> {
    if samples.len() < 20 {
        return Err(FanoError::InvalidInput(format!(
            "need at least 20 samples, got {}",
            samples.len()
        )));
    }
    let lambdas: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let candidates = count_resonance_candidates(&values);
    if candidates > 1 {
        return Err(FanoError::AmbiguousWindow { count: candidates });
    }

    let (phi0, lambda0, gamma0) = transmission_initial_guess(&lambdas, &values);
    let model = |p: &[f64], lambda: f64| -> f64 {
        let fp = FanoParams::from_angles(p[0], 0.0, p[1] * 1e-9, p[2].exp() * 1e-9, 0.0, branch);
        lossy_fano_rt(&fp, lambda).t.norm_sqr()
    };
    let mut best: Option<crate::optim::LevMarFit> = None;
    for (phi_s, l0_s, g_s) in start_grid(phi0, lambda0, gamma0) {
        // fit in nanometers for conditioning
        let initial = [phi_s, l0_s * 1e9, (g_s * 1e9).ln()];
        let fit = optim::levmar(
            |p, out| {
                for (k, (&lambda, &t)) in lambdas.iter().zip(&values).enumerate() {
                    out[k] = model(p, lambda) - t;
                }
            },
            samples.len(),
            &initial,
            &LevMarOptions::default(),
        );
        if let Ok(fit) = fit {
            if best.as_ref().is_none_or(|b| fit.cost < b.cost) {
                best = Some(fit);
            }
        }
    }
    let fit = best.ok_or_else(|| FanoError::FitDiverged("no start converged".into()))?;

    let phi = fit.params[0];
    let lambda0 = fit.params[1] * 1e-9;
    let gamma = fit.params[2].exp() * 1e-9;
    let sigmas = (0..3)
        .map(|i| fit.parameter_sigma(i).unwrap_or(f64::NAN))
        .collect();
    Ok(FanoFit {
        params: FanoParams::from_angles(phi, 0.0, lambda0, gamma, 0.0, branch),
        phi,
        psi: 0.0,
        sigmas,
        residual_rms: fit.residual_rms,
    })
}

/// Fit the lossless model to complex `(lambda, r, t)` samples. The global
/// phase `psi` is fitted along with `(phi, lambda0, gamma)`.
pub fn fit_fano_complex(
    samples: &[(f64, Complex64, Complex64)],
    branch: FanoBranch,
) -> Result<FanoFit, FanoError> {
    if samples.len() < 20 {
        return Err(FanoError::InvalidInput(format!(
            "need at least 20 samples, got {}",
            samples.len()
        )));
    }
    let lambdas: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let t_power: Vec<f64> = samples.iter().map(|s| s.2.norm_sqr()).collect();
    let candidates = count_resonance_candidates(&t_power);
    if candidates > 1 {
        return Err(FanoError::AmbiguousWindow { count: candidates });
    }

    let (phi0, lambda0, gamma0) = transmission_initial_guess(&lambdas, &t_power);
    // initial global phase from the off-resonant transmission
    let psi0 = samples[0].2.arg();
    let mut best: Option<crate::optim::LevMarFit> = None;
    for (phi_s, l0_s, g_s) in start_grid(phi0, lambda0, gamma0) {
        let initial = [phi_s, psi0, l0_s * 1e9, (g_s * 1e9).ln()];
        let attempt = optim::levmar(
            |p, out| {
                let fp = FanoParams::from_angles(
                    p[0],
                    p[1],
                    p[2] * 1e-9,
                    p[3].exp() * 1e-9,
                    0.0,
                    branch,
                );
                for (k, &(lambda, r, t)) in samples.iter().enumerate() {
                    let s = lossy_fano_rt(&fp, lambda);
                    out[4 * k] = s.r.re - r.re;
                    out[4 * k + 1] = s.r.im - r.im;
                    out[4 * k + 2] = s.t.re - t.re;
                    out[4 * k + 3] = s.t.im - t.im;
                }
            },
            4 * samples.len(),
            &initial,
            &LevMarOptions::default(),
        );
        if let Ok(attempt) = attempt {
            if best.as_ref().is_none_or(|b| attempt.cost < b.cost) {
                best = Some(attempt);
            }
        }
    }
    let fit = best.ok_or_else(|| FanoError::FitDiverged("no start converged".into()))?;

    let phi = fit.params[0];
    let psi = fit.params[1];
    let lambda0 = fit.params[2] * 1e-9;
    let gamma = fit.params[3].exp() * 1e-9;
    let sigmas = (0..4)
        .map(|i| fit.parameter_sigma(i).unwrap_or(f64::NAN))
        .collect();
    Ok(FanoFit {
        params: FanoParams::from_angles(phi, psi, lambda0, gamma, 0.0, branch),
        phi,
        psi,
        sigmas,
        residual_rms: fit.residual_rms,
    })
}

/// Serialized form of [`FanoParams`] with explicit units, used for JSON I/O.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanoParamsRecord {
    pub phi: f64,
    pub psi: f64,
    pub lambda0_nm: f64,
    pub gamma_nm: f64,
    pub gamma_prime_nm: f64,
    /// +1 symmetric, -1 antisymmetric.
    pub branch: i8,
}

impl From<&FanoParams> for FanoParamsRecord {
    fn from(p: &FanoParams) -> Self {
        let (phi, psi) = p.angles();
        Self {
            phi,
            psi,
            lambda0_nm: p.lambda0 * 1e9,
            gamma_nm: p.gamma * 1e9,
            gamma_prime_nm: p.gamma_prime * 1e9,
            branch: match p.branch {
                FanoBranch::Symmetric => 1,
                FanoBranch::Antisymmetric => -1,
            },
        }
    }
}

impl TryFrom<&FanoParamsRecord> for FanoParams {
    type Error = FanoError;

    fn try_from(rec: &FanoParamsRecord) -> Result<Self, FanoError> {
        let branch = match rec.branch {
            1 => FanoBranch::Symmetric,
            -1 => FanoBranch::Antisymmetric,
            other => {
                return Err(FanoError::InvalidParams(format!(
                    "branch must be +1 or -1, got {other}"
                )))
            }
        };
        let p = FanoParams::from_angles(
            rec.phi,
            rec.psi,
            rec.lambda0_nm * 1e-9,
            rec.gamma_nm * 1e-9,
            rec.gamma_prime_nm * 1e-9,
            branch,
        );
        p.validate()?;
        Ok(p)
    }
}
