//! Crystal geometry, material dispersion and the Fourier transform of the
//! permittivity profile.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_j1;
use crate::RcwaError;

/// Refractive-index model of the slab material (real part; a constant
/// imaginary part is added separately by [`CrystalSpec::im_n`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndexModel {
    Constant {
        n: f64,
    },
    /// Two-term Sellmeier, wavelengths in micrometers:
    /// `n^2 = 1 + b1 l^2/(l^2 - c1^2) + b2 l^2/(l^2 - c2^2)`.
    Sellmeier {
        b1: f64,
        c1_um: f64,
        b2: f64,
        c2_um: f64,
    },
    /// Tabulated `(wavelength m, n)`, linearly interpolated, clamped at the
    /// ends. Rows must be sorted by wavelength.
    Table {
        rows: Vec<(f64, f64)>,
    },
}

impl IndexModel {
    /// Default coefficients for stoichiometric silicon nitride; editable
    /// through the config, not asserted as ground truth.
    pub fn si3n4_sellmeier() -> Self {
        IndexModel::Sellmeier {
            b1: 3.0249,
            c1_um: 0.1353406,
            b2: 40314.0,
            c2_um: 1239.842,
        }
    }

    pub fn real_index(&self, wavelength: f64) -> f64 {
        match self {
            IndexModel::Constant { n } => *n,
            IndexModel::Sellmeier { b1, c1_um, b2, c2_um } => {
                let l2 = (wavelength * 1e6) * (wavelength * 1e6);
                let n2 = 1.0 + b1 * l2 / (l2 - c1_um * c1_um) + b2 * l2 / (l2 - c2_um * c2_um);
                n2.max(0.0).sqrt()
            }
            IndexModel::Table { rows } => {
                assert!(!rows.is_empty(), "index table is empty");
                if wavelength <= rows[0].0 {
                    return rows[0].1;
                }
                if wavelength >= rows[rows.len() - 1].0 {
                    return rows[rows.len() - 1].1;
                }
                let i = rows.partition_point(|(l, _)| *l <= wavelength);
                let (l0, n0) = rows[i - 1];
                let (l1, n1) = rows[i];
                n0 + (n1 - n0) * (wavelength - l0) / (l1 - l0)
            }
        }
    }
}

/// Slab geometry and material: square lattice of circular holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalSpec {
    /// Lattice period (m).
    pub lattice: f64,
    /// Hole radius (m).
    pub hole_radius: f64,
    /// Slab thickness (m).
    pub thickness: f64,
    pub index_model: IndexModel,
    /// Constant imaginary part of the slab refractive index (absorption).
    pub im_n: f64,
    /// Real ambient index on both sides.
    pub n_ambient: f64,
}

impl CrystalSpec {
    /// Geometry used throughout this workspace unless overridden: the
    /// 884.4 nm period follows from the 30.6 % fill factor at a 276 nm hole
    /// radius, the 200 nm thickness is the nominal film.
    pub fn default_pcs() -> Self {
        Self {
            lattice: 884.4e-9,
            hole_radius: 276e-9,
            thickness: 200e-9,
            index_model: IndexModel::si3n4_sellmeier(),
            im_n: 0.0,
            n_ambient: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), RcwaError> {
        let ok = self.lattice > 0.0 && self.hole_radius >= 0.0;
        if !ok || self.thickness <= 0.0 {
            return Err(RcwaError::InvalidSpec(format!(
                "lattice {:e}, radius {:e}, thickness {:e}",
                self.lattice, self.hole_radius, self.thickness
            )));
        }
        if 2.0 * self.hole_radius >= self.lattice * std::f64::consts::SQRT_2 {
            return Err(RcwaError::InvalidSpec(format!(
                "holes of radius {:e} overlap beyond the cell of period {:e}",
                self.hole_radius, self.lattice
            )));
        }
        if self.im_n < 0.0 {
            return Err(RcwaError::InvalidSpec(format!(
                "Im(n) = {} must be non-negative (passive material)",
                self.im_n
            )));
        }
        if self.n_ambient <= 0.0 {
            return Err(RcwaError::InvalidSpec(format!(
                "ambient index {} must be positive",
                self.n_ambient
            )));
        }
        Ok(())
    }

    /// Air fill factor `eta = pi r_h^2 / lattice^2`.
    pub fn fill_factor(&self) -> f64 {
        std::f64::consts::PI * self.hole_radius * self.hole_radius / (self.lattice * self.lattice)
    }

    /// Complex slab permittivity at `wavelength`.
    pub fn epsilon_slab(&self, wavelength: f64) -> Complex64 {
        let n = Complex64::new(self.index_model.real_index(wavelength), self.im_n);
        n * n
    }

    pub fn epsilon_ambient(&self) -> f64 {
        self.n_ambient * self.n_ambient
    }
}

/// Area-weighted average permittivity `eta eps_air + (1 - eta) eps_slab`.
pub fn effective_epsilon(eta: f64, eps_air: f64, eps_slab: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&eta));
    eta * eps_air + (1.0 - eta) * eps_slab
}

/// Analytic Fourier coefficient of the permittivity profile at the
/// reciprocal-lattice vector `g = (g_x, g_y)` (rad/m):
///
/// - `g = 0`: the average `eta eps_air + (1 - eta) eps_slab`;
/// - `g != 0`: `(eps_air - eps_slab) (2 pi r_h) J1(|g| r_h) / (lattice^2 |g|)`.
///
/// Valid for non-overlapping holes (`2 r_h <= lattice`); beyond that the
/// solver switches to a line-based numerical transform of the union profile.
pub fn epsilon_fourier(spec: &CrystalSpec, g: (f64, f64), wavelength: f64) -> Complex64 {
    let eps_slab = spec.epsilon_slab(wavelength);
    let eps_air = Complex64::new(spec.epsilon_ambient(), 0.0);
    let g_norm = (g.0 * g.0 + g.1 * g.1).sqrt();
    if g_norm == 0.0 {
        let eta = spec.fill_factor();
        return eps_slab + (eps_air - eps_slab) * eta;
    }
    let factor = 2.0 * std::f64::consts::PI * spec.hole_radius * bessel_j1(g_norm * spec.hole_radius)
        / (spec.lattice * spec.lattice * g_norm);
    (eps_air - eps_slab) * factor
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_epsilon_limits() {
        assert_eq!(effective_epsilon(0.0, 1.0, 4.1), 4.1);
        assert_eq!(effective_epsilon(1.0, 1.0, 4.1), 1.0);
    }

    #[test]
    fn effective_epsilon_reproduces_the_design_average() {
        // 2.95 corresponds to the design hole radius (293 nm -> eta = 34.5 %)
        // with n = 2.0, not to the fitted 30.6 % fill factor; both exposed
        let design = CrystalSpec {
            hole_radius: 293e-9,
            index_model: IndexModel::Constant { n: 2.0 },
            ..CrystalSpec::default_pcs()
        };
        let eps = effective_epsilon(design.fill_factor(), 1.0, 4.0);
        assert!((eps - 2.95).abs() < 0.02, "eps_eff = {eps}");
        let fitted = CrystalSpec {
            index_model: IndexModel::Constant { n: 2.0 },
            ..CrystalSpec::default_pcs()
        };
        let eps_fitted = effective_epsilon(fitted.fill_factor(), 1.0, 4.0);
        assert!((eps_fitted - 3.08).abs() < 0.02, "eps_eff = {eps_fitted}");
    }

    #[test]
    fn fill_factor_examples() {
        // lattice from the 30.6 % fill factor at r_h = 276 nm
        let lattice = 276e-9 * (std::f64::consts::PI / 0.306).sqrt();
        assert!((lattice - 884.4e-9).abs() < 0.1e-9, "lattice = {lattice:e}");

        let spec = CrystalSpec {
            hole_radius: 285e-9,
            ..CrystalSpec::default_pcs()
        };
        assert!((spec.fill_factor() - 0.326).abs() < 1e-3);

        let no_holes = CrystalSpec {
            hole_radius: 0.0,
            ..CrystalSpec::default_pcs()
        };
        assert_eq!(no_holes.fill_factor(), 0.0);
    }

    #[test]
    fn zero_g_reduces_to_average() {
        let spec = CrystalSpec {
            index_model: IndexModel::Constant { n: 2.0 },
            ..CrystalSpec::default_pcs()
        };
        let got = epsilon_fourier(&spec, (0.0, 0.0), 1076e-9);
        let eta = spec.fill_factor();
        let want = effective_epsilon(eta, 1.0, 4.0);
        assert!((got.re - want).abs() < 1e-12 && got.im.abs() < 1e-15);
    }

    #[test]
    fn coefficients_vanish_with_hole_radius() {
        let g = 2.0 * std::f64::consts::PI / 884.4e-9;
        for &r in &[1e-9, 1e-10, 1e-11] {
            let spec = CrystalSpec {
                hole_radius: r,
                index_model: IndexModel::Constant { n: 2.0 },
                ..CrystalSpec::default_pcs()
            };
            let c = epsilon_fourier(&spec, (g, 0.0), 1076e-9);
            assert!(c.norm() < 4.0 * std::f64::consts::PI * r * r / (884.4e-9 * 884.4e-9) * 3.1);
        }
    }

    /// Independent oracle: the disk Fourier integral evaluated in polar
    /// coordinates, angular trapezoid (spectral for the periodic integrand)
    /// times radial composite Simpson. No Bessel functions involved.
    fn disk_fourier_quadrature(g_norm: f64, r_h: f64) -> f64 {
        let n_theta = 2048;
        let n_r = 4096; // Simpson panels
        let h_r = r_h / n_r as f64;
        let mut integral = 0.0;
        for i in 0..=n_r {
            let r = i as f64 * h_r;
            // angular average of exp(-i g r cos(theta)) is real
            let mut ang = 0.0;
            for j in 0..n_theta {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64;
                ang += (g_norm * r * theta.cos()).cos();
            }
            ang /= n_theta as f64;
            let w = if i == 0 || i == n_r {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            integral += w * r * ang;
        }
        integral * h_r / 3.0 * 2.0 * std::f64::consts::PI
    }

    #[test]
    fn nonzero_g_matches_polar_quadrature() {
        let spec = CrystalSpec {
            index_model: IndexModel::Constant { n: 2.0 },
            ..CrystalSpec::default_pcs()
        };
        let lambda = 1076e-9;
        let eps_contrast = 1.0 - 4.0; // eps_air - eps_slab
        let g_unit = 2.0 * std::f64::consts::PI / spec.lattice;
        for (mx, my) in [(1, 0), (1, 1), (2, 1), (3, 2)] {
            let g = (mx as f64 * g_unit, my as f64 * g_unit);
            let g_norm = (g.0 * g.0 + g.1 * g.1).sqrt();
            let got = epsilon_fourier(&spec, g, lambda);
            let disk = disk_fourier_quadrature(g_norm, spec.hole_radius);
            let want = eps_contrast * disk / (spec.lattice * spec.lattice);
            assert!(
                (got.re - want).abs() <= 1e-8 * want.abs().max(1e-3),
                "g = ({mx},{my}): got {:.12e}, want {want:.12e}",
                got.re
            );
        }
    }

    #[test]
    fn sellmeier_index_near_two_in_the_near_infrared() {
        let model = IndexModel::si3n4_sellmeier();
        let n = model.real_index(1076e-9);
        assert!(n > 1.95 && n < 2.07, "n(1076 nm) = {n}");
    }

    #[test]
    fn table_index_interpolates() {
        let model = IndexModel::Table {
            rows: vec![(1000e-9, 2.02), (1100e-9, 2.00)],
        };
        assert!((model.real_index(1050e-9) - 2.01).abs() < 1e-12);
        assert!((model.real_index(900e-9) - 2.02).abs() < 1e-15);
        assert!((model.real_index(1200e-9) - 2.00).abs() < 1e-15);
    }

    #[test]
    fn overlapping_holes_are_rejected() {
        let spec = CrystalSpec {
            hole_radius: 700e-9,
            ..CrystalSpec::default_pcs()
        };
        assert!(spec.validate().is_err());
    }
}
