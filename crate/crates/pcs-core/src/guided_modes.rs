//! Analytic guided-mode bands of the homogenized (unpatterned) membrane.
//!
//! The patterned slab is replaced by a uniform film with an effective
//! permittivity. Its guided modes are plane waves bouncing between the two
//! faces by total internal reflection; a mode exists when the internal
//! round-trip phase closes:
//!
//! ```text
//! r_j^2 exp(-2 i k_zm d) = 1,        j = TE or TM
//! ```
//!
//! with `r_j` the internal Fresnel reflection coefficient. The lattice enters
//! only through the transverse wavevector `k_t` of the diffraction order
//! folded to the first zone, which maps each root `k_zm` to a frequency via
//! `eps_eff * (omega/c)^2 = k_t^2 + k_zm^2`. The sign of the half-round-trip
//! coefficient `r_j exp(-i k_zm d)` classifies the mode symmetry with respect
//! to the slab mid-plane.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SPEED_OF_LIGHT as C;

/// Residual bound enforced on every returned root.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Grid points used to bracket roots of the round-trip phase.
const SCAN_POINTS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuidedModeError {
    #[error("no guided root in the scanned window for {pol:?}({p_x},{p_y}) at k_x = {k_x:.4e}")]
    NoRoot {
        pol: Polarization,
        p_x: i32,
        p_y: i32,
        k_x: f64,
    },
    #[error("half-round-trip coefficient {value} is not within 1e-6 of +-1")]
    Inconsistent { value: Complex64 },
    #[error("invalid slab: thickness {thickness} m, eps_eff {epsilon_eff}")]
    InvalidSlab { thickness: f64, epsilon_eff: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum Polarization {
    TE,
    TM,
}

/// Homogenized slab: thickness and effective permittivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabSpec {
    pub thickness: f64,
    pub epsilon_eff: f64,
}

impl SlabSpec {
    pub fn new(thickness: f64, epsilon_eff: f64) -> Result<Self, GuidedModeError> {
        if thickness > 0.0 && epsilon_eff > 1.0 {
            Ok(Self {
                thickness,
                epsilon_eff,
            })
        } else {
            Err(GuidedModeError::InvalidSlab {
                thickness,
                epsilon_eff,
            })
        }
    }
}

/// In-plane diffraction order `(p_x, p_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DiffractionOrder {
    pub p_x: i32,
    pub p_y: i32,
}

impl DiffractionOrder {
    pub fn new(p_x: i32, p_y: i32) -> Self {
        Self { p_x, p_y }
    }

    /// The four first-order diffracted directions, in canonical output order.
    pub fn first_order() -> [Self; 4] {
        [
            Self::new(1, 0),
            Self::new(-1, 0),
            Self::new(0, 1),
            Self::new(0, -1),
        ]
    }
}

/// One guided-mode root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidedModeSolution {
    pub polarization: Polarization,
    pub order: DiffractionOrder,
    pub k_x: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// Longitudinal wavevector inside the membrane (rad/m), real positive.
    pub k_zm: f64,
    /// Longitudinal wavevector in air; on the negative imaginary axis for a
    /// guided (evanescent) mode.
    pub k_zair: Complex64,
    /// Mid-plane symmetry of the mode: +1 symmetric, -1 antisymmetric.
    pub symmetry: i8,
}

/// Internal TE Fresnel reflection coefficient `(k_zair - k_zm) / (k_zm + k_zair)`.
pub fn fresnel_te(k_zm: f64, k_zair: Complex64) -> Complex64 {
    debug_assert!(k_zm > 0.0);
    (k_zair - k_zm) / (k_zair + k_zm)
}

/// Internal TM Fresnel reflection coefficient
/// `(k_zm - eps_eff k_zair) / (k_zm + eps_eff k_zair)`.
pub fn fresnel_tm(k_zm: f64, k_zair: Complex64, epsilon_eff: f64) -> Complex64 {
    debug_assert!(k_zm > 0.0);
    (k_zm - epsilon_eff * k_zair) / (k_zm + epsilon_eff * k_zair)
}

/// Transverse wavevector magnitude squared of the folded order.
fn k_t_sqr(k_x: f64, order: DiffractionOrder, lattice: f64) -> f64 {
    let g = 2.0 * std::f64::consts::PI / lattice;
    let kx = k_x + f64::from(order.p_x) * g;
    let ky = f64::from(order.p_y) * g;
    kx * kx + ky * ky
}

/// Frequency of the mode branch at internal wavevector `k_zm`:
/// `omega = c sqrt((k_t^2 + k_zm^2) / eps_eff)`.
///
/// The permittivity divides the full internal dispersion so that `k_zm` is
/// the longitudinal wavevector inside the membrane.
pub fn dispersion_omega(
    k_x: f64,
    order: DiffractionOrder,
    k_zm: f64,
    lattice: f64,
    epsilon_eff: f64,
) -> f64 {
    debug_assert!(lattice > 0.0);
    C * ((k_t_sqr(k_x, order, lattice) + k_zm * k_zm) / epsilon_eff).sqrt()
}

/// Air-side longitudinal wavevector for a guided mode, on the negative
/// imaginary axis: `-i sqrt(k_t^2 - (omega/c)^2)`.
fn k_zair_evanescent(k_t2: f64, omega: f64) -> Complex64 {
    let k0 = omega / C;
    Complex64::new(0.0, -(k_t2 - k0 * k0).max(0.0).sqrt())
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a % two_pi;
    if w > std::f64::consts::PI {
        w -= two_pi;
    } else if w <= -std::f64::consts::PI {
        w += two_pi;
    }
    w
}

/// Wrapped phase of the round-trip coefficient at internal wavevector `k_zm`.
fn round_trip_phase(
    pol: Polarization,
    k_t2: f64,
    k_zm: f64,
    slab: &SlabSpec,
    epsilon_eff: f64,
) -> f64 {
    let omega = C * ((k_t2 + k_zm * k_zm) / epsilon_eff).sqrt();
    let k_zair = k_zair_evanescent(k_t2, omega);
    let r = match pol {
        Polarization::TE => fresnel_te(k_zm, k_zair),
        Polarization::TM => fresnel_tm(k_zm, k_zair, epsilon_eff),
    };
    wrap_angle(2.0 * r.arg() - 2.0 * k_zm * slab.thickness)
}

/// Round-trip residual `|r_j^2 exp(-2 i k_zm d) - 1|` at a trial root.
pub fn round_trip_residual(
    pol: Polarization,
    order: DiffractionOrder,
    k_x: f64,
    k_zm: f64,
    slab: &SlabSpec,
    lattice: f64,
) -> f64 {
    let k_t2 = k_t_sqr(k_x, order, lattice);
    let omega = C * ((k_t2 + k_zm * k_zm) / slab.epsilon_eff).sqrt();
    let k_zair = k_zair_evanescent(k_t2, omega);
    let r = match pol {
        Polarization::TE => fresnel_te(k_zm, k_zair),
        Polarization::TM => fresnel_tm(k_zm, k_zair, slab.epsilon_eff),
    };
    let phase = Complex64::from_polar(1.0, -2.0 * k_zm * slab.thickness);
    (r * r * phase - 1.0).norm()
}

/// Solve the round-trip resonance condition for the fundamental (lowest
/// frequency) guided mode of the given polarization and order.
pub fn solve_guided_mode(
    pol: Polarization,
    order: DiffractionOrder,
    k_x: f64,
    slab: &SlabSpec,
    lattice: f64,
) -> Result<GuidedModeSolution, GuidedModeError> {
    let eps = slab.epsilon_eff;
    let k_t2 = k_t_sqr(k_x, order, lattice);
    let no_root = || GuidedModeError::NoRoot {
        pol,
        p_x: order.p_x,
        p_y: order.p_y,
        k_x,
    };
    if k_t2 <= 0.0 {
        return Err(no_root());
    }

    // Guided modes require evanescence in air, which bounds k_zm from above;
    // the first phase branch bounds it by pi/d as well.
    let k_guided = (k_t2 * (eps - 1.0)).sqrt();
    let k_hi = k_guided.min(std::f64::consts::PI / slab.thickness) * (1.0 - 1e-12);
    if k_hi <= 0.0 || k_hi.is_nan() {
        return Err(no_root());
    }
    let k_lo = k_hi * 1e-9;

    // Bracket sign changes of the wrapped round-trip phase, skipping the
    // wrap discontinuities.
    let mut bracket = None;
    let mut prev_k = k_lo;
    let mut prev_phase = round_trip_phase(pol, k_t2, prev_k, slab, eps);
    for i in 1..=SCAN_POINTS {
        let k = k_lo + (k_hi - k_lo) * i as f64 / SCAN_POINTS as f64;
        let phase = round_trip_phase(pol, k_t2, k, slab, eps);
        if prev_phase == 0.0 {
            bracket = Some((prev_k, prev_k));
            break;
        }
        if phase.signum() != prev_phase.signum() && (phase - prev_phase).abs() < std::f64::consts::PI {
            bracket = Some((prev_k, k));
            break;
        }
        prev_k = k;
        prev_phase = phase;
    }
    let (lo, hi) = bracket.ok_or_else(no_root)?;

    let root = if lo == hi {
        lo
    } else {
        crate::optim::bisect(
            |k| round_trip_phase(pol, k_t2, k, slab, eps),
            lo,
            hi,
            1e-12 * k_hi,
        )
        .ok_or_else(no_root)?
    };

    let omega = C * ((k_t2 + root * root) / eps).sqrt();
    let k_zair = k_zair_evanescent(k_t2, omega);
    let residual = round_trip_residual(pol, order, k_x, root, slab, lattice);
    if residual >= RESIDUAL_TOL {
        return Err(no_root());
    }
    debug_assert!(k_t2.sqrt() > omega / C, "mode must lie below the air light line");

    let mut solution = GuidedModeSolution {
        polarization: pol,
        order,
        k_x,
        omega,
        k_zm: root,
        k_zair,
        symmetry: 0,
    };
    solution.symmetry = classify_symmetry(&solution, slab)?;
    Ok(solution)
}

/// Sign of the half-round-trip propagation coefficient `r_j exp(-i k_zm d)`.
///
/// `+1` marks a mode symmetric with respect to the slab mid-plane, `-1` an
/// antisymmetric one. Fails if the coefficient is not within 1e-6 of either.
pub fn classify_symmetry(
    sol: &GuidedModeSolution,
    slab: &SlabSpec,
) -> Result<i8, GuidedModeError> {
    let r = match sol.polarization {
        Polarization::TE => fresnel_te(sol.k_zm, sol.k_zair),
        Polarization::TM => fresnel_tm(sol.k_zm, sol.k_zair, slab.epsilon_eff),
    };
    let half = r * Complex64::from_polar(1.0, -sol.k_zm * slab.thickness);
    if (half - 1.0).norm() < 1e-6 {
        Ok(1)
    } else if (half + 1.0).norm() < 1e-6 {
        Ok(-1)
    } else {
        Err(GuidedModeError::Inconsistent { value: half })
    }
}

/// One row of the band overlay; `solution` is `None` where no guided root
/// exists at that `k_x`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandEntry {
    pub polarization: Polarization,
    pub order: DiffractionOrder,
    pub k_x: f64,
    pub solution: Option<GuidedModeSolution>,
}

/// Fundamental bands of the eight first-order modes (TE/TM x four orders)
/// over a `k_x` grid, in deterministic `(polarization, order, k_x)` order.
pub fn band_overlay(k_x_grid: &[f64], slab: &SlabSpec, lattice: f64) -> Vec<BandEntry> {
    let mut rows = Vec::with_capacity(8 * k_x_grid.len());
    for pol in [Polarization::TE, Polarization::TM] {
        for order in DiffractionOrder::first_order() {
            for &k_x in k_x_grid {
                let solution = solve_guided_mode(pol, order, k_x, slab, lattice).ok();
                rows.push(BandEntry {
                    polarization: pol,
                    order,
                    k_x,
                    solution,
                });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_slab() -> SlabSpec {
        SlabSpec::new(200e-9, 2.95).unwrap()
    }

    const LATTICE: f64 = 884.4e-9;

    #[test]
    fn fresnel_te_index_matched_is_zero() {
        let r = fresnel_te(1e7, Complex64::new(1e7, 0.0));
        assert!(r.norm() < 1e-15);
    }

    #[test]
    fn fresnel_te_total_internal_reflection_has_unit_modulus() {
        let r = fresnel_te(1e7, Complex64::new(0.0, -1e7));
        assert!((r.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fresnel_te_direct_value() {
        let r = fresnel_te(1e7, Complex64::new(0.0, -0.5e7));
        let expect = (Complex64::new(0.0, -0.5) - 1.0) / (Complex64::new(0.0, -0.5) + 1.0);
        assert!((r - expect).norm() < 1e-14);
        assert!((r.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fresnel_tm_cases() {
        let eps = 2.95;
        let matched = fresnel_tm(eps * 1e7, Complex64::new(1e7, 0.0), eps);
        assert!(matched.norm() < 1e-15);

        let evanescent = fresnel_tm(1e7, Complex64::new(0.0, -0.5e7), eps);
        assert!((evanescent.norm() - 1.0).abs() < 1e-12);
        let expect = (Complex64::new(1.0, 0.0) - eps * Complex64::new(0.0, -0.5))
            / (Complex64::new(1.0, 0.0) + eps * Complex64::new(0.0, -0.5));
        assert!((evanescent - expect).norm() < 1e-14);
    }

    #[test]
    fn dispersion_square_lattice_degeneracy() {
        let w_x = dispersion_omega(0.0, DiffractionOrder::new(1, 0), 3e6, LATTICE, 2.95);
        let w_y = dispersion_omega(0.0, DiffractionOrder::new(0, 1), 3e6, LATTICE, 2.95);
        assert!((w_x - w_y).abs() / w_x < 1e-15);
    }

    #[test]
    fn dispersion_cutoff_limit() {
        let w = dispersion_omega(0.0, DiffractionOrder::new(1, 0), 0.0, LATTICE, 2.95);
        let expect = C * (2.0 * std::f64::consts::PI / LATTICE) / 2.95_f64.sqrt();
        assert!((w - expect).abs() / expect < 1e-14);
    }

    #[test]
    fn dispersion_kx_lifts_degeneracy() {
        let k_x = 0.1 * 2.0 * std::f64::consts::PI / LATTICE;
        let w_p = dispersion_omega(k_x, DiffractionOrder::new(1, 0), 3e6, LATTICE, 2.95);
        let w_m = dispersion_omega(k_x, DiffractionOrder::new(-1, 0), 3e6, LATTICE, 2.95);
        assert!((w_p - w_m).abs() / w_p > 1e-3);
    }

    #[test]
    fn te_fundamental_below_tm() {
        let slab = paper_slab();
        let order = DiffractionOrder::new(1, 0);
        let te = solve_guided_mode(Polarization::TE, order, 0.0, &slab, LATTICE).unwrap();
        let tm = solve_guided_mode(Polarization::TM, order, 0.0, &slab, LATTICE).unwrap();
        assert!(te.omega < tm.omega);
    }

    #[test]
    fn mirror_orders_coincide_at_normal_incidence() {
        let slab = paper_slab();
        for pol in [Polarization::TE, Polarization::TM] {
            let a = solve_guided_mode(pol, DiffractionOrder::new(1, 0), 0.0, &slab, LATTICE)
                .unwrap();
            let b = solve_guided_mode(pol, DiffractionOrder::new(-1, 0), 0.0, &slab, LATTICE)
                .unwrap();
            assert!((a.omega - b.omega).abs() / a.omega < 1e-12);
        }
    }

    #[test]
    fn fundamental_symmetry_classes() {
        let slab = paper_slab();
        let order = DiffractionOrder::new(1, 0);
        let te = solve_guided_mode(Polarization::TE, order, 0.0, &slab, LATTICE).unwrap();
        let tm = solve_guided_mode(Polarization::TM, order, 0.0, &slab, LATTICE).unwrap();
        assert_eq!(te.symmetry, -1);
        assert_eq!(tm.symmetry, 1);
        // square of the half-round-trip sign closes the full round trip
        assert_eq!(i32::from(te.symmetry) * i32::from(te.symmetry), 1);
    }

    #[test]
    fn residual_bound_holds() {
        let slab = paper_slab();
        for pol in [Polarization::TE, Polarization::TM] {
            for order in DiffractionOrder::first_order() {
                for i in 0..5 {
                    let k_x = i as f64 * 0.02 * 2.0 * std::f64::consts::PI / LATTICE;
                    let sol = solve_guided_mode(pol, order, k_x, &slab, LATTICE).unwrap();
                    let res = round_trip_residual(pol, order, k_x, sol.k_zm, &slab, LATTICE);
                    assert!(res < RESIDUAL_TOL, "{pol:?} {order:?} k_x={k_x:.3e}: {res:.3e}");
                    // below the air light line
                    let k_t = k_t_sqr(k_x, order, LATTICE).sqrt();
                    assert!(k_t > sol.omega / C);
                }
            }
        }
    }

    /// Brute-force oracle: densely scan the residual over k_zm and require the
    /// solver root to coincide with the global residual minimum.
    #[test]
    fn solver_matches_brute_force_scan() {
        let slab = paper_slab();
        for pol in [Polarization::TE, Polarization::TM] {
            let order = DiffractionOrder::new(1, 0);
            let sol = solve_guided_mode(pol, order, 0.0, &slab, LATTICE).unwrap();

            let k_t2 = k_t_sqr(0.0, order, LATTICE);
            let k_hi =
                (k_t2 * (slab.epsilon_eff - 1.0)).sqrt().min(std::f64::consts::PI / slab.thickness);
            let n = 200_000;
            let mut best = (f64::INFINITY, 0.0);
            for i in 1..n {
                let k = k_hi * i as f64 / n as f64;
                let res = round_trip_residual(pol, order, 0.0, k, &slab, LATTICE);
                if res < best.0 {
                    best = (res, k);
                }
            }
            assert!(
                (best.1 - sol.k_zm).abs() < 2.0 * k_hi / n as f64,
                "{pol:?}: scan {:.6e} vs solver {:.6e}",
                best.1,
                sol.k_zm
            );
        }
    }

    #[test]
    fn zero_order_has_no_guided_root() {
        let slab = paper_slab();
        let err = solve_guided_mode(
            Polarization::TE,
            DiffractionOrder::new(0, 0),
            0.0,
            &slab,
            LATTICE,
        )
        .unwrap_err();
        assert!(matches!(err, GuidedModeError::NoRoot { .. }));
    }

    #[test]
    fn overlay_covers_eight_bands_and_y_orders_are_flat() {
        let slab = paper_slab();
        let g = 2.0 * std::f64::consts::PI / LATTICE;
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.01 * g).collect();
        let rows = band_overlay(&grid, &slab, LATTICE);
        assert_eq!(rows.len(), 8 * grid.len());
        assert!(rows.iter().all(|r| r.solution.is_some()));

        let rel_span = |pol: Polarization, order: DiffractionOrder| -> f64 {
            let omegas: Vec<f64> = rows
                .iter()
                .filter(|r| r.polarization == pol && r.order == order)
                .map(|r| r.solution.unwrap().omega)
                .collect();
            let w0 = omegas[0];
            omegas
                .iter()
                .map(|w| (w - w0).abs() / w0)
                .fold(0.0, f64::max)
        };
        for pol in [Polarization::TE, Polarization::TM] {
            let along_x = rel_span(pol, DiffractionOrder::new(1, 0));
            let along_y = rel_span(pol, DiffractionOrder::new(0, 1));
            assert!(
                along_y < along_x,
                "{pol:?}: y-band span {along_y:.3e} should be flatter than x-band {along_x:.3e}"
            );
        }
    }

    #[test]
    fn degeneracy_of_opposite_orders_at_gamma() {
        let slab = paper_slab();
        for (a, b) in [((1, 0), (-1, 0)), ((0, 1), (0, -1))] {
            let wa = solve_guided_mode(
                Polarization::TM,
                DiffractionOrder::new(a.0, a.1),
                0.0,
                &slab,
                LATTICE,
            )
            .unwrap()
            .omega;
            let wb = solve_guided_mode(
                Polarization::TM,
                DiffractionOrder::new(b.0, b.1),
                0.0,
                &slab,
                LATTICE,
            )
            .unwrap()
            .omega;
            assert!((wa - wb).abs() / wa < 1e-12);
        }
    }
}
