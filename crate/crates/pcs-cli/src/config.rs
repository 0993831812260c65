//! TOML run configuration. Unknown keys are rejected so a typo cannot
//! silently fall back to a default.

use serde::{Deserialize, Serialize};

use pcs_core::fano::{FanoBranch, FanoParams};
use pcs_core::guided_modes::SlabSpec;
use pcs_core::scattering::MirrorSpec;
use pcs_rcwa::{CrystalSpec, IndexModel, Polarization, Truncation};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub crystal: Option<CrystalConfig>,
    pub truncation: Option<TruncationConfig>,
    pub guided_bands: Option<GuidedBandsConfig>,
    pub band_map: Option<BandMapConfig>,
    pub fano_fit: Option<FanoFitConfig>,
    pub fano_params: Option<FanoParamsConfig>,
    pub cavity_scan: Option<CavityScanConfig>,
    pub mim_map: Option<MimMapConfig>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn crystal_spec(&self) -> Result<CrystalSpec, CliError> {
        let c = self.crystal.clone().unwrap_or_default();
        let spec = c.to_spec()?;
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn truncation(&self) -> Truncation {
        Truncation {
            n: self.truncation.as_ref().map_or(5, |t| t.n),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalConfig {
    pub lattice_nm: f64,
    pub radius_nm: f64,
    pub thickness_nm: f64,
    /// "sellmeier" (built-in coefficients), "constant", or "table".
    pub index_model: String,
    pub n_constant: Option<f64>,
    /// Rows of `(lambda_nm, n)` for the table model.
    pub index_table: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub im_n: f64,
    #[serde(default = "default_ambient")]
    pub n_ambient: f64,
}

fn default_ambient() -> f64 {
    1.0
}

impl Default for CrystalConfig {
    fn default() -> Self {
        Self {
            lattice_nm: 884.4,
            radius_nm: 276.0,
            thickness_nm: 200.0,
            index_model: "sellmeier".into(),
            n_constant: None,
            index_table: None,
            im_n: 0.0,
            n_ambient: 1.0,
        }
    }
}

impl CrystalConfig {
    pub fn to_spec(&self) -> Result<CrystalSpec, CliError> {
        let index_model = match self.index_model.as_str() {
            "sellmeier" => IndexModel::si3n4_sellmeier(),
            "constant" => IndexModel::Constant {
                n: self.n_constant.ok_or_else(|| {
                    CliError::Config("index_model = \"constant\" requires n_constant".into())
                })?,
            },
            "table" => {
                let rows = self.index_table.clone().ok_or_else(|| {
                    CliError::Config("index_model = \"table\" requires index_table".into())
                })?;
                IndexModel::Table {
                    rows: rows.iter().map(|(l, n)| (l * 1e-9, *n)).collect(),
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown index_model \"{other}\" (expected sellmeier | constant | table)"
                )))
            }
        };
        Ok(CrystalSpec {
            lattice: self.lattice_nm * 1e-9,
            hole_radius: self.radius_nm * 1e-9,
            thickness: self.thickness_nm * 1e-9,
            index_model,
            im_n: self.im_n,
            n_ambient: self.n_ambient,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidedBandsConfig {
    /// Effective permittivity of the homogenized membrane.
    pub epsilon_eff: f64,
    /// Largest `k_x` as a fraction of `2 pi / lattice`.
    pub kx_max_fraction: f64,
    pub kx_points: usize,
}

impl GuidedBandsConfig {
    pub fn slab(&self, thickness: f64) -> Result<SlabSpec, CliError> {
        SlabSpec::new(thickness, self.epsilon_eff).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandMapConfig {
    pub kx_max_fraction: f64,
    pub kx_points: usize,
    /// Frequency axis `nu / c` in 1/um.
    pub nu_over_c_min_per_um: f64,
    pub nu_over_c_max_per_um: f64,
    pub nu_points: usize,
    /// "s" or "p".
    pub polarization: String,
    /// Also emit a map convolved with this spectrometer response (nm).
    pub convolve_fwhm_nm: Option<f64>,
}

impl BandMapConfig {
    pub fn polarization(&self) -> Result<Polarization, CliError> {
        match self.polarization.as_str() {
            "s" => Ok(Polarization::S),
            "p" => Ok(Polarization::P),
            other => Err(CliError::Config(format!(
                "unknown polarization \"{other}\" (expected s | p)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanoFitConfig {
    pub lambda_min_nm: f64,
    pub lambda_max_nm: f64,
    pub samples: usize,
    /// +1 symmetric, -1 antisymmetric.
    pub branch: i8,
    /// Optional CSV file `(lambda_nm, transmission)` to fit instead of an
    /// RCWA sweep.
    pub spectrum_path: Option<String>,
}

pub fn branch_from_i8(branch: i8) -> Result<FanoBranch, CliError> {
    match branch {
        1 => Ok(FanoBranch::Symmetric),
        -1 => Ok(FanoBranch::Antisymmetric),
        other => Err(CliError::Config(format!(
            "branch must be +1 or -1, got {other}"
        ))),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanoParamsConfig {
    pub phi: f64,
    pub psi: f64,
    pub lambda0_nm: f64,
    pub gamma_nm: f64,
    pub gamma_prime_nm: f64,
    pub branch: i8,
}

impl FanoParamsConfig {
    pub fn to_params(&self) -> Result<FanoParams, CliError> {
        let p = FanoParams::from_angles(
            self.phi,
            self.psi,
            self.lambda0_nm * 1e-9,
            self.gamma_nm * 1e-9,
            self.gamma_prime_nm * 1e-9,
            branch_from_i8(self.branch)?,
        );
        p.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityScanConfig {
    pub length_mm: f64,
    pub input_transmission_ppm: f64,
    #[serde(default)]
    pub input_excess_loss_ppm: f64,
    /// "fixed" (uses the *_ppm fields) or "fano" (uses [fano_params]).
    pub membrane: String,
    pub membrane_one_minus_r_ppm: Option<f64>,
    pub membrane_transmission_ppm: Option<f64>,
    pub lambda_start_nm: f64,
    pub span_fsr: f64,
    pub samples: usize,
    #[serde(default = "default_sideband_mhz")]
    pub sideband_offset_mhz: f64,
    #[serde(default = "default_sideband_ratio")]
    pub sideband_power_ratio: f64,
    #[serde(default)]
    pub noise_rms: f64,
    #[serde(default)]
    pub scan_speed_jitter: f64,
    /// Peak detection threshold as a fraction of the tallest peak.
    #[serde(default = "default_prominence")]
    pub prominence_fraction: f64,
}

fn default_sideband_mhz() -> f64 {
    50.0
}
fn default_sideband_ratio() -> f64 {
    0.1
}
fn default_prominence() -> f64 {
    0.3
}

impl CavityScanConfig {
    pub fn input_mirror(&self) -> Result<MirrorSpec, CliError> {
        MirrorSpec::new(
            self.input_transmission_ppm * 1e-6,
            self.input_excess_loss_ppm * 1e-6,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MimMapConfig {
    pub sub_length_mm: f64,
    pub mirror_transmission_ppm: f64,
    #[serde(default)]
    pub mirror_excess_loss_ppm: f64,
    pub lambda_c_nm: f64,
    pub delta_l_span_nm: f64,
    pub delta_l_points: usize,
    pub detuning_span_fsr: f64,
    pub detuning_points: usize,
    /// Optional scan-center sweep for the loss-width inference:
    /// `[first_nm, last_nm]` with `lambda_c_points` entries.
    pub lambda_c_scan_nm: Option<[f64; 2]>,
    pub lambda_c_points: Option<usize>,
}

impl MimMapConfig {
    pub fn mirror(&self) -> Result<MirrorSpec, CliError> {
        MirrorSpec::new(
            self.mirror_transmission_ppm * 1e-6,
            self.mirror_excess_loss_ppm * 1e-6,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }
}
