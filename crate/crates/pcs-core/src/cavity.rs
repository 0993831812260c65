//! Fabry-Perot cavities with a scattering element as one mirror or as a
//! membrane in the middle.
//!
//! Transmission is always computed from the exact transfer-matrix chain
//! (the full multiple-reflection sum), so the analytic coupled-cavity
//! eigenmode formulas in [`mim_eigenmodes`] stay independent of it and can be
//! used as an oracle: for two identical mirrors of amplitude reflectivity
//! `r'` separated from the membrane by equal sub-cavities of length `l`, the
//! symmetric/antisymmetric modes satisfy
//!
//! ```text
//! omega_{p,+-} = -(c / 2l) (arg[(r +- t) r'] + 2 p pi)
//! gamma_+-     = -(c / l)  ln(|r +- t| |r'|)
//! delta_nu     =  (c / 4 pi l) arg((r - t) / (r + t))
//! ```
//!
//! with `gamma_+-` the full width at half maximum of the modes and `delta_nu`
//! the symmetric/antisymmetric splitting of one longitudinal order.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fano::FanoParams;
use crate::scattering::{chain, propagation, MirrorSpec, ScatteringError, TwoPortScattering};
use crate::SPEED_OF_LIGHT as C;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CavityError {
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error("membrane table is empty")]
    EmptyTable,
}

/// Wavelength-indexed scattering response of the intracavity element.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum MembraneModel {
    /// Wavelength-independent element.
    Fixed(TwoPortScattering),
    /// Two-mode Fano model evaluated at the requested wavelength.
    Fano(FanoParams),
    /// Tabulated response, linearly interpolated in wavelength (sorted by
    /// wavelength, clamped at the ends).
    Table(Vec<(f64, TwoPortScattering)>),
}

impl MembraneModel {
    pub fn scattering(&self, lambda: f64) -> TwoPortScattering {
        match self {
            MembraneModel::Fixed(s) => *s,
            MembraneModel::Fano(p) => p.scattering(lambda),
            MembraneModel::Table(rows) => {
                assert!(!rows.is_empty(), "membrane table is empty");
                if lambda <= rows[0].0 {
                    return rows[0].1;
                }
                if lambda >= rows[rows.len() - 1].0 {
                    return rows[rows.len() - 1].1;
                }
                let i = rows.partition_point(|(l, _)| *l <= lambda).min(rows.len() - 1);
                let (l0, s0) = rows[i - 1];
                let (l1, s1) = rows[i];
                let w = (lambda - l0) / (l1 - l0);
                TwoPortScattering {
                    r: s0.r + (s1.r - s0.r) * w,
                    t: s0.t + (s1.t - s0.t) * w,
                }
            }
        }
    }
}

/// Cavity with a conventional input coupler and a scattering element as the
/// end mirror.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingleEndedCavity {
    /// Mirror-to-membrane length (m).
    pub length: f64,
    pub input: MirrorSpec,
    pub end: MembraneModel,
}

/// Two identical mirrors with the membrane between them; displacing the
/// membrane by `delta_l` makes the sub-cavity lengths `l + delta_l/2` and
/// `l - delta_l/2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MimCavity {
    /// Common sub-cavity length `l` (m).
    pub sub_length: f64,
    /// Membrane displacement from the midpoint (m).
    pub delta_l: f64,
    pub mirror: MirrorSpec,
    pub membrane: MembraneModel,
    /// Scan center wavelength (m); the membrane response is frozen at this
    /// wavelength across a map, matching the eigenmode formulas.
    pub lambda_c: f64,
}

/// Coupled-cavity eigenmode pair of one longitudinal order.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModePair {
    /// Angular frequencies of the symmetric/antisymmetric modes (rad/s).
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// Full widths at half maximum (rad/s).
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    /// Splitting `(omega_plus - omega_minus) / 2 pi` (Hz).
    pub delta_nu: f64,
    /// Longitudinal mode number.
    pub p: i64,
}

/// Free spectral range in wavelength: `lambda^2 / (2 l0)`.
pub fn fsr_wavelength(lambda: f64, l0: f64) -> f64 {
    debug_assert!(l0 > 0.0);
    lambda * lambda / (2.0 * l0)
}

/// Free spectral range in frequency: `c / (2 l)`.
pub fn fsr_frequency(l: f64) -> f64 {
    debug_assert!(l > 0.0);
    C / (2.0 * l)
}

/// Finesse from the total round-trip loss: `2 pi / Gamma_RTL`.
pub fn finesse_from_rtl(rtl: f64) -> f64 {
    debug_assert!(rtl > 0.0);
    2.0 * std::f64::consts::PI / rtl
}

/// Round-trip loss from the finesse: `2 pi / F`. Exact inverse of
/// [`finesse_from_rtl`].
pub fn round_trip_loss(finesse: f64) -> f64 {
    debug_assert!(finesse > 0.0);
    2.0 * std::f64::consts::PI / finesse
}

/// Cavity half bandwidth `kappa / 2 = c / (4 l F)` (Hz).
pub fn half_bandwidth(l: f64, finesse: f64) -> f64 {
    debug_assert!(l > 0.0 && finesse > 0.0);
    C / (4.0 * l * finesse)
}

/// Resonant transmission of a two-mirror cavity with small losses:
/// `4 T_c T_mem / Gamma_RTL^2`.
pub fn resonant_transmission(t_c: f64, t_mem: f64, rtl: f64) -> f64 {
    4.0 * t_c * t_mem / (rtl * rtl)
}

/// Upper bound on the membrane power transmission at the Fano resonance,
/// `T <= (1 - sqrt(R))^2`, from `|t| <= 1 - |r|` when `r` and `t` are in
/// phase.
pub fn transmission_upper_bound(r_power: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&r_power));
    let d = 1.0 - r_power.sqrt();
    d * d
}

/// Power transmission of the single-ended cavity at `lambda`, from the chain
/// input mirror -> propagation -> end scatterer.
pub fn airy_transmission(cav: &SingleEndedCavity, lambda: f64) -> Result<f64, CavityError> {
    let k = 2.0 * std::f64::consts::PI / lambda;
    let input = cav.input.scattering().to_transfer()?;
    let end = cav.end.scattering(lambda).to_transfer()?;
    let m = end.compose(&propagation(k, cav.length)).compose(&input);
    Ok(m.power_transmission())
}

fn eigenchannel_or_degenerate(
    s: &TwoPortScattering,
) -> Result<(Complex64, Complex64), CavityError> {
    let (plus, minus) = s.eigenchannels();
    if plus.norm() < 1e-12 {
        return Err(ScatteringError::DegenerateChannel { sign: '+' }.into());
    }
    if minus.norm() < 1e-12 {
        return Err(ScatteringError::DegenerateChannel { sign: '-' }.into());
    }
    Ok((plus, minus))
}

/// Symmetric/antisymmetric eigenmodes of the membrane-in-the-middle cavity
/// for longitudinal order `p`, from the analytic round-trip condition of the
/// two coupled sub-cavities of length `l`.
pub fn mim_eigenmodes(
    s: &TwoPortScattering,
    mirror: &MirrorSpec,
    l: f64,
    p: i64,
) -> Result<ModePair, CavityError> {
    let (plus, minus) = eigenchannel_or_degenerate(s)?;
    let r_mirror = mirror.amplitude_reflectivity();
    let two_pi_p = 2.0 * std::f64::consts::PI * p as f64;
    let omega_plus = -(C / (2.0 * l)) * (plus.arg() + two_pi_p);
    let omega_minus = -(C / (2.0 * l)) * (minus.arg() + two_pi_p);
    let gamma_plus = -(C / l) * (plus.norm() * r_mirror).ln();
    let gamma_minus = -(C / l) * (minus.norm() * r_mirror).ln();
    Ok(ModePair {
        omega_plus,
        omega_minus,
        gamma_plus,
        gamma_minus,
        delta_nu: mode_splitting(s, l)?,
        p,
    })
}

/// Frequency splitting between the symmetric and antisymmetric modes of one
/// longitudinal order: `(c / 4 pi l) arg((r - t) / (r + t))`, principal
/// branch.
pub fn mode_splitting(s: &TwoPortScattering, l: f64) -> Result<f64, CavityError> {
    let (plus, minus) = eigenchannel_or_degenerate(s)?;
    Ok(C / (4.0 * std::f64::consts::PI * l) * (minus / plus).arg())
}

/// Splitting along a sweep of membrane responses, unwrapped so the curve is
/// continuous except at the physical sign change.
pub fn mode_splitting_sweep(
    samples: &[(f64, TwoPortScattering)],
    l: f64,
) -> Result<Vec<(f64, f64)>, CavityError> {
    let scale = C / (4.0 * std::f64::consts::PI * l);
    let mut out = Vec::with_capacity(samples.len());
    let mut prev_arg: Option<f64> = None;
    for (x, s) in samples {
        let (plus, minus) = eigenchannel_or_degenerate(s)?;
        let mut a = (minus / plus).arg();
        if let Some(p) = prev_arg {
            while a - p > std::f64::consts::PI {
                a -= 2.0 * std::f64::consts::PI;
            }
            while p - a > std::f64::consts::PI {
                a += 2.0 * std::f64::consts::PI;
            }
        }
        prev_arg = Some(a);
        out.push((*x, scale * a));
    }
    Ok(out)
}

/// Longitudinal order whose symmetric mode lies closest to the angular
/// frequency `omega`.
pub fn longitudinal_index_near(
    omega: f64,
    s: &TwoPortScattering,
    l: f64,
) -> Result<i64, CavityError> {
    let (plus, _) = eigenchannel_or_degenerate(s)?;
    let p = -(omega * 2.0 * l / C + plus.arg()) / (2.0 * std::f64::consts::PI);
    Ok(p.round() as i64)
}

/// Transmission of the membrane-in-the-middle chain at laser frequency `nu`
/// (Hz), with the membrane response frozen at the scan center wavelength.
pub fn mim_transmission(cav: &MimCavity, nu: f64) -> Result<f64, CavityError> {
    let membrane = cav.membrane.scattering(cav.lambda_c).to_transfer()?;
    let mirror = cav.mirror.scattering().to_transfer()?;
    let k = 2.0 * std::f64::consts::PI * nu / C;
    let l1 = cav.sub_length + 0.5 * cav.delta_l;
    let l2 = cav.sub_length - 0.5 * cav.delta_l;
    let m = chain(&[
        mirror,
        propagation(k, l1),
        membrane,
        propagation(k, l2),
        mirror,
    ]);
    Ok(m.power_transmission())
}

/// Transmission map of the membrane-in-the-middle cavity over membrane
/// displacement and laser detuning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MimMap {
    /// Membrane displacements (m).
    pub delta_l: Vec<f64>,
    /// Laser detunings from `c / lambda_c` (Hz).
    pub detuning: Vec<f64>,
    /// Sub-cavity free spectral range `c / 2l` (Hz).
    pub fsr: f64,
    /// Transmission, row-major: `values[i_delta_l * detuning.len() + j]`.
    pub values: Vec<f64>,
}

impl MimMap {
    pub fn value(&self, i_delta_l: usize, j_detuning: usize) -> f64 {
        self.values[i_delta_l * self.detuning.len() + j_detuning]
    }

    /// Transmission along the detuning axis at one displacement column.
    pub fn column(&self, i_delta_l: usize) -> &[f64] {
        let n = self.detuning.len();
        &self.values[i_delta_l * n..(i_delta_l + 1) * n]
    }
}

/// Compute the transmission map on the given grids. Grid points are
/// independent; output ordering is fixed by the grids.
pub fn mim_transmission_map(
    cav: &MimCavity,
    delta_l_grid: &[f64],
    detuning_grid: &[f64],
) -> Result<MimMap, CavityError> {
    let membrane = cav.membrane.scattering(cav.lambda_c).to_transfer()?;
    let mirror = cav.mirror.scattering().to_transfer()?;
    let nu_c = C / cav.lambda_c;
    let mut values = Vec::with_capacity(delta_l_grid.len() * detuning_grid.len());
    for &dl in delta_l_grid {
        let l1 = cav.sub_length + 0.5 * dl;
        let l2 = cav.sub_length - 0.5 * dl;
        for &dnu in detuning_grid {
            let k = 2.0 * std::f64::consts::PI * (nu_c + dnu) / C;
            let m = chain(&[
                mirror,
                propagation(k, l1),
                membrane,
                propagation(k, l2),
                mirror,
            ]);
            values.push(m.power_transmission());
        }
    }
    Ok(MimMap {
        delta_l: delta_l_grid.to_vec(),
        detuning: detuning_grid.to_vec(),
        fsr: fsr_frequency(cav.sub_length),
        values,
    })
}
