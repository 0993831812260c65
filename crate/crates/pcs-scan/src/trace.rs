//! Synthetic transmission traces with sidebands, noise and scan-speed
//! distortion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use pcs_core::cavity::{
    airy_transmission, fsr_frequency, mim_transmission, MimCavity, SingleEndedCavity,
};
use pcs_core::SPEED_OF_LIGHT as C;

use crate::ScanError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    TimeSeconds,
    WavelengthMeters,
}

/// Modulation sidebands riding on the laser carrier.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SidebandSpec {
    pub offset_hz: f64,
    /// Power of each sideband relative to the carrier.
    pub power_ratio: f64,
}

impl Default for SidebandSpec {
    fn default() -> Self {
        Self {
            offset_hz: 50e6,
            power_ratio: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    /// RMS of the additive Gaussian detector noise, in signal units.
    pub rms: f64,
    /// Fractional amplitude of the smooth scan-speed modulation.
    pub scan_speed_jitter: f64,
}

/// Frequency span of the scan: samples are uniform in scan time, the laser
/// frequency moves at the (possibly jittered) scan speed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanAxisSpec {
    /// Laser frequency at scan start (Hz).
    pub nu_start: f64,
    /// Nominal frequency span (Hz).
    pub span: f64,
    pub samples: usize,
}

impl ScanAxisSpec {
    /// Span the scan over `n_fsr` free spectral ranges of a cavity of length
    /// `l`, starting from vacuum wavelength `lambda_start`.
    pub fn spanning_fsr(lambda_start: f64, l: f64, n_fsr: f64, samples: usize) -> Self {
        Self {
            nu_start: C / lambda_start,
            span: n_fsr * fsr_frequency(l),
            samples,
        }
    }
}

/// What the generator knew; carried for pipeline validation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanGroundTruth {
    pub fsr_hz: f64,
    pub rtl: f64,
    pub finesse: f64,
    pub resonant_transmission: f64,
    pub signal_scale: f64,
}

/// A recorded scan: monotonically increasing axis plus one signal sample per
/// point, with the sideband metadata needed for calibration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanTrace {
    pub axis: Vec<f64>,
    pub signal: Vec<f64>,
    pub axis_kind: AxisKind,
    pub sideband_offset_hz: f64,
    pub sideband_power_ratio: f64,
    /// Coarse absolute laser frequency at scan start (Hz).
    pub nu_start_hz: f64,
    pub noise: NoiseModel,
    pub ground_truth: Option<ScanGroundTruth>,
}

/// Cavity being scanned.
#[derive(Debug, Clone, Copy)]
pub enum CavityUnderTest<'a> {
    SingleEnded(&'a SingleEndedCavity),
    Mim(&'a MimCavity),
}

impl CavityUnderTest<'_> {
    pub fn transmission(&self, nu: f64) -> Result<f64, ScanError> {
        match self {
            CavityUnderTest::SingleEnded(cav) => Ok(airy_transmission(cav, C / nu)?),
            CavityUnderTest::Mim(cav) => Ok(mim_transmission(cav, nu)?),
        }
    }

    fn length(&self) -> f64 {
        match self {
            CavityUnderTest::SingleEnded(cav) => cav.length,
            // the mode comb of the coupled cavity is set by the sub-cavities
            CavityUnderTest::Mim(cav) => cav.sub_length,
        }
    }

    fn ground_truth(&self, lambda_center: f64, scale: f64) -> ScanGroundTruth {
        match self {
            CavityUnderTest::SingleEnded(cav) => {
                let end = cav.end.scattering(lambda_center);
                let one_minus_r = 1.0 - end.r.norm_sqr();
                let t_mem = end.t.norm_sqr();
                let rtl = cav.input.power_transmission + cav.input.excess_loss + one_minus_r;
                ScanGroundTruth {
                    fsr_hz: fsr_frequency(cav.length),
                    rtl,
                    finesse: pcs_core::cavity::finesse_from_rtl(rtl),
                    resonant_transmission: pcs_core::cavity::resonant_transmission(
                        cav.input.power_transmission,
                        t_mem,
                        rtl,
                    ),
                    signal_scale: scale,
                }
            }
            CavityUnderTest::Mim(cav) => {
                let membrane = cav.membrane.scattering(cav.lambda_c);
                let (l_plus, l_minus) = membrane.channel_losses();
                let mirror_loss = cav.mirror.power_transmission + cav.mirror.excess_loss;
                let rtl = mirror_loss + 0.5 * (l_plus + l_minus);
                ScanGroundTruth {
                    fsr_hz: fsr_frequency(cav.sub_length),
                    rtl,
                    finesse: pcs_core::cavity::finesse_from_rtl(rtl.max(1e-12)),
                    resonant_transmission: f64::NAN,
                    signal_scale: scale,
                }
            }
        }
    }
}

/// Generate a transmission trace: carrier plus two sidebands, additive
/// Gaussian noise, and a smooth scan-speed modulation distorting the time
/// axis (one slow sine lobe across the scan, random phase) to exercise the
/// sideband calibration.
pub fn synthesize_scan(
    cavity: &CavityUnderTest,
    axis: &ScanAxisSpec,
    sidebands: &SidebandSpec,
    noise: &NoiseModel,
    seed: u64,
) -> Result<ScanTrace, ScanError> {
    if axis.samples < 16 {
        return Err(ScanError::InvalidInput(format!(
            "{} samples is too few",
            axis.samples
        )));
    }
    let fsr = fsr_frequency(cavity.length());
    if axis.span < fsr {
        return Err(ScanError::InvalidInput(format!(
            "span {:.3e} Hz is below one free spectral range ({:.3e} Hz)",
            axis.span, fsr
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase0 = Uniform::new(0.0, 2.0 * std::f64::consts::PI)
        .map_err(|e| ScanError::InvalidInput(e.to_string()))?
        .sample(&mut rng);
    let normal = Normal::new(0.0, 1.0).map_err(|e| ScanError::InvalidInput(e.to_string()))?;

    let j = noise.scan_speed_jitter;
    // nu(t) = nu_start + span * (t + j/pi * (cos(phase0) - cos(pi t + phase0)))
    let nu_of_t = |t: f64| -> f64 {
        axis.nu_start
            + axis.span
                * (t + j / std::f64::consts::PI
                    * (phase0.cos() - (std::f64::consts::PI * t + phase0).cos()))
    };

    let n = axis.samples;
    let mut ax = Vec::with_capacity(n);
    let mut signal = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let nu = nu_of_t(t);
        let mut s = cavity.transmission(nu)?;
        if sidebands.offset_hz > 0.0 && sidebands.power_ratio > 0.0 {
            s += sidebands.power_ratio
                * (cavity.transmission(nu + sidebands.offset_hz)?
                    + cavity.transmission(nu - sidebands.offset_hz)?);
        }
        if noise.rms > 0.0 {
            s += noise.rms * normal.sample(&mut rng);
        }
        ax.push(t);
        signal.push(s);
    }

    let lambda_center = C / (axis.nu_start + 0.5 * axis.span);
    Ok(ScanTrace {
        axis: ax,
        signal,
        axis_kind: AxisKind::TimeSeconds,
        sideband_offset_hz: sidebands.offset_hz,
        sideband_power_ratio: sidebands.power_ratio,
        nu_start_hz: axis.nu_start,
        noise: *noise,
        ground_truth: Some(cavity.ground_truth(lambda_center, 1.0)),
    })
}
