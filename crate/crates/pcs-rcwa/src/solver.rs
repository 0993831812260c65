//! Modal eigenproblem of the patterned layer and the boundary matching that
//! turns it into reflection and transmission amplitudes.
//!
//! Fields are expanded over the Bloch harmonics of the square lattice. In
//! the layer, the transverse electric field obeys a second-order system whose
//! eigenvectors propagate as `exp(+- i q z)`; backward amplitudes are
//! referenced to the exit face so all stored exponentials decay. Matching
//! tangential fields to the Rayleigh expansions of the two half spaces gives
//! one dense linear system per excitation. With the same ambient on both
//! sides and a z-symmetric layer, a single factorization answers both
//! left and right incidence.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use pcs_core::scattering::TwoPortScattering;

use crate::crystal::CrystalSpec;
use crate::factor::{epsilon_toeplitz, flat_order, li_factor_matrices};
use crate::RcwaError;

/// Incident polarization: `S` has the electric field along y, `P` in the
/// plane of incidence (xz).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    S,
    P,
}

/// Incident plane wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveExcitation {
    /// Vacuum wavelength (m).
    pub wavelength: f64,
    /// In-plane wavevector along x (rad/m), within the first zone.
    pub k_x: f64,
    pub polarization: Polarization,
}

/// Fourier truncation: orders `-n..=n` along both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub n: usize,
}

impl Truncation {
    pub fn order_count(&self) -> usize {
        let s = 2 * self.n + 1;
        s * s
    }
}

/// Permittivity factorization used for the layer eigenproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Factorization {
    /// Inverse rule across the hole walls (correct convergence).
    LiInverseRule,
    /// Plain direct rule, kept for convergence comparisons.
    Laurent,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub factorization: Factorization,
    /// Transverse samples for the line-based factorization integrals.
    pub line_samples: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            factorization: Factorization::LiInverseRule,
            line_samples: 1024,
        }
    }
}

/// Far-field power carried by one diffraction order (normalized to the
/// incident power). Evanescent orders carry exactly zero.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OrderPower {
    pub m: i32,
    pub n: i32,
    pub reflected: f64,
    pub transmitted: f64,
    pub propagating: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// Infinity-norm condition estimate of the boundary system.
    pub condition_estimate: f64,
    /// Relative residual of the boundary solve.
    pub boundary_residual: f64,
    /// Smallest normalized ambient `k_z` over all orders (distance to a
    /// Rayleigh anomaly).
    pub min_ambient_kz: f64,
    /// Number of propagating ambient orders (2 x 1 for the sub-diffraction
    /// regime where only the zeroth order radiates).
    pub propagating_ambient_orders: usize,
}

/// Zeroth-order complex amplitudes and total far-field powers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RcwaResult {
    /// Co-polarized zeroth-order reflection/transmission; the slab is
    /// xOy-symmetric so this is a symmetric two-port.
    pub s00: TwoPortScattering,
    pub r_total: f64,
    pub t_total: f64,
    pub per_order: Vec<OrderPower>,
    pub diagnostics: SolveDiagnostics,
}

type C64 = Complex64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

struct Assembled {
    nn: i32,
    m: usize,
    q_amb: Vec<C64>,
    /// layer eigenvectors (E-part)
    w: Mat<C64>,
    phi: Vec<C64>,
    v_amb: Mat<C64>,
    /// P = A^-1 (B Phi)
    p: Mat<C64>,
    m_sys_lu: PartialPivLu<C64>,
    m_sys_norm: f64,
    boundary_residual_probe: f64,
    e_inc: Mat<C64>,
    inc_index: usize,
    inc_amplitude: C64,
}

fn sqrt_branch_up(z: C64) -> C64 {
    let mut q = z.sqrt();
    if q.im < 0.0 {
        q = -q;
    }
    if q.im.abs() <= 1e-12 * q.norm() && q.re < 0.0 {
        q = -q;
    }
    q
}

fn inf_norm(mat: &Mat<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..mat.nrows() {
        let mut row = 0.0;
        for j in 0..mat.ncols() {
            row += mat[(i, j)].norm();
        }
        worst = worst.max(row);
    }
    worst
}

fn assemble(
    spec: &CrystalSpec,
    exc: &PlaneWaveExcitation,
    trunc: &Truncation,
    opts: &SolveOptions,
) -> Result<Assembled, RcwaError> {
    spec.validate()?;
    if trunc.n < 1 {
        return Err(RcwaError::InvalidSpec(format!(
            "truncation order {} must be at least 1",
            trunc.n
        )));
    }
    if exc.wavelength <= 0.0 {
        return Err(RcwaError::InvalidSpec(format!(
            "wavelength {:e} must be positive",
            exc.wavelength
        )));
    }
    if exc.k_x.abs() >= std::f64::consts::PI / spec.lattice {
        return Err(RcwaError::InvalidSpec(format!(
            "k_x = {:e} outside the first zone (pi / lattice = {:e})",
            exc.k_x,
            std::f64::consts::PI / spec.lattice
        )));
    }

    let nn = trunc.n as i32;
    let m = trunc.order_count();
    let k0 = 2.0 * std::f64::consts::PI / exc.wavelength;
    let g_unit = 2.0 * std::f64::consts::PI / spec.lattice;
    let eps_ambient = spec.epsilon_ambient();

    let mut kx = vec![0.0; m];
    let mut ky = vec![0.0; m];
    for mi in -nn..=nn {
        for ni in -nn..=nn {
            let idx = flat_order(mi, ni, nn);
            kx[idx] = (exc.k_x + mi as f64 * g_unit) / k0;
            ky[idx] = (ni as f64 * g_unit) / k0;
        }
    }

    // ambient longitudinal wavevectors, normalized
    let mut q_amb = vec![C64::new(0.0, 0.0); m];
    let mut min_kz = f64::INFINITY;
    for i in 0..m {
        let q2 = eps_ambient - kx[i] * kx[i] - ky[i] * ky[i];
        let q = if q2 >= 0.0 {
            C64::new(q2.sqrt(), 0.0)
        } else {
            C64::new(0.0, (-q2).sqrt())
        };
        min_kz = min_kz.min(q.norm());
        q_amb[i] = q;
    }
    if min_kz < 1e-7 * eps_ambient.sqrt() {
        return Err(RcwaError::SingularBoundary { min_kz });
    }

    // permittivity factorization matrices
    let eps = epsilon_toeplitz(spec, exc.wavelength, nn, opts.line_samples);
    let (fxx, fyy) = match opts.factorization {
        Factorization::LiInverseRule => {
            li_factor_matrices(spec, exc.wavelength, nn, opts.line_samples)
        }
        Factorization::Laurent => (eps.clone(), eps.clone()),
    };

    let eps_mat = Mat::<C64>::from_fn(m, m, |i, j| eps[i * m + j]);
    let eps_inv = eps_mat.partial_piv_lu().solve(Mat::<C64>::identity(m, m));

    // first-order system: e' = F h, h' = G e
    let two_m = 2 * m;
    let mut f_mat = Mat::<C64>::zeros(two_m, two_m);
    let mut g_mat = Mat::<C64>::zeros(two_m, two_m);
    for i in 0..m {
        for j in 0..m {
            let e_inv = eps_inv[(i, j)];
            f_mat[(i, j)] = C64::new(kx[i], 0.0) * e_inv * ky[j];
            f_mat[(i, j + m)] = -C64::new(kx[i], 0.0) * e_inv * kx[j]
                + if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            f_mat[(i + m, j)] = C64::new(ky[i], 0.0) * e_inv * ky[j]
                - if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            f_mat[(i + m, j + m)] = -C64::new(ky[i], 0.0) * e_inv * kx[j];

            g_mat[(i, j + m)] = fyy[i * m + j]
                - if i == j {
                    C64::new(kx[i] * kx[i], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
            g_mat[(i + m, j)] = -fxx[i * m + j]
                + if i == j {
                    C64::new(ky[i] * ky[i], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
        }
        g_mat[(i, i)] = C64::new(kx[i] * ky[i], 0.0);
        g_mat[(i + m, i + m)] = C64::new(-ky[i] * kx[i], 0.0);
    }

    let second_order = &f_mat * &g_mat;
    let evd = second_order
        .eigen()
        .map_err(|e| RcwaError::Eigen(format!("{e:?}")))?;
    let w = evd.U().to_owned();
    let s = evd.S();

    let mut q_layer = vec![C64::new(0.0, 0.0); two_m];
    for j in 0..two_m {
        let q = sqrt_branch_up(-s[j]);
        if q.norm() < 1e-10 {
            return Err(RcwaError::DegenerateLayerMode {
                q_norm: q.norm(),
            });
        }
        q_layer[j] = q;
    }

    // h-part of each mode and the decaying exponentials across the layer
    let gw = &g_mat * &w;
    let mut v = Mat::<C64>::zeros(two_m, two_m);
    for j in 0..two_m {
        let scale = C64::new(1.0, 0.0) / (I * q_layer[j]);
        for i in 0..two_m {
            v[(i, j)] = gw[(i, j)] * scale;
        }
    }
    let d_norm = k0 * spec.thickness;
    let phi: Vec<C64> = q_layer.iter().map(|q| (I * q * d_norm).exp()).collect();

    // ambient admittance blocks
    let mut v_amb = Mat::<C64>::zeros(two_m, two_m);
    for i in 0..m {
        let inv_iq = C64::new(1.0, 0.0) / (I * q_amb[i]);
        v_amb[(i, i)] = C64::new(kx[i] * ky[i], 0.0) * inv_iq;
        v_amb[(i, i + m)] = C64::new(eps_ambient - kx[i] * kx[i], 0.0) * inv_iq;
        v_amb[(i + m, i)] = C64::new(ky[i] * ky[i] - eps_ambient, 0.0) * inv_iq;
        v_amb[(i + m, i + m)] = C64::new(-ky[i] * kx[i], 0.0) * inv_iq;
    }

    let v_amb_w = &v_amb * &w;
    let mut a_mat = Mat::<C64>::zeros(two_m, two_m);
    let mut b_phi = Mat::<C64>::zeros(two_m, two_m);
    for i in 0..two_m {
        for j in 0..two_m {
            a_mat[(i, j)] = v_amb_w[(i, j)] + v[(i, j)];
            b_phi[(i, j)] = (v_amb_w[(i, j)] - v[(i, j)]) * phi[j];
        }
    }

    let lu_a = a_mat.partial_piv_lu();
    let p = lu_a.solve(&b_phi);
    let m_sys = &a_mat - &(&b_phi * &p);
    let m_sys_norm = inf_norm(&m_sys);
    let m_sys_lu = m_sys.partial_piv_lu();

    // incident field: unit-amplitude E, transverse components only
    let zero_index = flat_order(0, 0, nn);
    let mut e_inc = Mat::<C64>::zeros(two_m, 1);
    let (inc_index, inc_amplitude) = match exc.polarization {
        Polarization::S => (zero_index + m, C64::new(1.0, 0.0)),
        Polarization::P => (
            zero_index,
            q_amb[zero_index] / C64::new(eps_ambient.sqrt(), 0.0),
        ),
    };
    e_inc[(inc_index, 0)] = inc_amplitude;

    // residual probe for the diagnostics: solve against the incident rhs
    let rhs = &v_amb * &e_inc * faer::Scale(C64::new(2.0, 0.0));
    let probe = m_sys_lu.solve(&rhs);
    let back = &m_sys * &probe;
    let mut res = 0.0f64;
    let mut rhs_norm = 0.0f64;
    for i in 0..two_m {
        res = res.max((back[(i, 0)] - rhs[(i, 0)]).norm());
        rhs_norm = rhs_norm.max(rhs[(i, 0)].norm());
    }

    let _ = (&kx, &ky, &v);
    Ok(Assembled {
        nn,
        m,
        q_amb,
        w,
        phi,
        v_amb,
        p,
        m_sys_lu,
        m_sys_norm,
        boundary_residual_probe: res / rhs_norm.max(1e-300),
        e_inc,
        inc_index,
        inc_amplitude,
    })
}

/// Which side the plane wave comes from. With identical half spaces and a
/// z-symmetric layer both give the same response; the right-side path is kept
/// as an independent code path for symmetry checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncidenceSide {
    Left,
    Right,
}

fn scale_columns(mat: &Mat<C64>, weights: &[C64]) -> Mat<C64> {
    Mat::from_fn(mat.nrows(), mat.ncols(), |i, j| mat[(i, j)] * weights[j])
}

struct FieldSolution {
    e_reflected: Mat<C64>,
    e_transmitted: Mat<C64>,
}

fn boundary_solve(asm: &Assembled, side: IncidenceSide) -> FieldSolution {
    let rhs = &asm.v_amb * &asm.e_inc * faer::Scale(C64::new(2.0, 0.0));
    let first = asm.m_sys_lu.solve(&rhs);
    let second = -&(&asm.p * &first);
    // left incidence: first = a (modes referenced at z = 0), second = b;
    // right incidence: first = b, second = a.
    let (a, b) = match side {
        IncidenceSide::Left => (&first, &second),
        IncidenceSide::Right => (&second, &first),
    };
    let phi_a = scale_columns(&asm.w, &asm.phi);
    // E at z = 0: W (a + Phi b); E at z = d: W (Phi a + b)
    let e_bottom = &asm.w * a + &phi_a * b;
    let e_top = &phi_a * a + &asm.w * b;
    let (mut e_reflected, e_transmitted) = match side {
        IncidenceSide::Left => (e_bottom, e_top),
        IncidenceSide::Right => (e_top, e_bottom),
    };
    for i in 0..asm.e_inc.nrows() {
        let v = asm.e_inc[(i, 0)];
        if v.norm_sqr() != 0.0 {
            e_reflected[(i, 0)] -= v;
        }
    }
    FieldSolution {
        e_reflected,
        e_transmitted,
    }
}

/// z-component of the Poynting flux of one order from its transverse E and h.
fn order_flux(ex: C64, ey: C64, hx: C64, hy: C64) -> f64 {
    -(ex * hy.conj() - ey * hx.conj()).im
}

fn extract(asm: &Assembled, fields: &FieldSolution) -> (TwoPortScattering, f64, f64, Vec<OrderPower>, usize) {
    let m = asm.m;
    // h of outgoing waves: away from the slab on each side
    let h_refl = -&(&asm.v_amb * &fields.e_reflected);
    let h_trans = &asm.v_amb * &fields.e_transmitted;
    let h_inc = &asm.v_amb * &asm.e_inc;

    let zero = flat_order(0, 0, asm.nn);
    let flux_inc = order_flux(
        asm.e_inc[(zero, 0)],
        asm.e_inc[(zero + m, 0)],
        h_inc[(zero, 0)],
        h_inc[(zero + m, 0)],
    );

    let mut per_order = Vec::with_capacity(m);
    let mut r_total = 0.0;
    let mut t_total = 0.0;
    let mut propagating_count = 0;
    for mi in -asm.nn..=asm.nn {
        for ni in -asm.nn..=asm.nn {
            let i = flat_order(mi, ni, asm.nn);
            let propagating = asm.q_amb[i].im == 0.0;
            let (r_pow, t_pow) = if propagating {
                propagating_count += 1;
                let fr = order_flux(
                    fields.e_reflected[(i, 0)],
                    fields.e_reflected[(i + m, 0)],
                    h_refl[(i, 0)],
                    h_refl[(i + m, 0)],
                );
                let ft = order_flux(
                    fields.e_transmitted[(i, 0)],
                    fields.e_transmitted[(i + m, 0)],
                    h_trans[(i, 0)],
                    h_trans[(i + m, 0)],
                );
                // reflected flux points away from the slab (negative z)
                (-fr / flux_inc, ft / flux_inc)
            } else {
                (0.0, 0.0)
            };
            r_total += r_pow;
            t_total += t_pow;
            per_order.push(OrderPower {
                m: mi,
                n: ni,
                reflected: r_pow,
                transmitted: t_pow,
                propagating,
            });
        }
    }

    let pick = match asm.inc_index < m {
        true => zero,      // P polarization reads the x component
        false => zero + m, // S polarization reads the y component
    };
    let r00 = fields.e_reflected[(pick, 0)] / asm.inc_amplitude;
    let t00 = fields.e_transmitted[(pick, 0)] / asm.inc_amplitude;

    (
        TwoPortScattering::new(r00, t00),
        r_total,
        t_total,
        per_order,
        propagating_count,
    )
}

/// Solve one plane-wave excitation with default options.
pub fn solve(
    spec: &CrystalSpec,
    exc: &PlaneWaveExcitation,
    trunc: &Truncation,
) -> Result<RcwaResult, RcwaError> {
    solve_with(spec, exc, trunc, &SolveOptions::default())
}

pub fn solve_with(
    spec: &CrystalSpec,
    exc: &PlaneWaveExcitation,
    trunc: &Truncation,
    opts: &SolveOptions,
) -> Result<RcwaResult, RcwaError> {
    let asm = assemble(spec, exc, trunc, opts)?;
    let fields = boundary_solve(&asm, IncidenceSide::Left);
    let (s00, r_total, t_total, per_order, propagating) = extract(&asm, &fields);
    Ok(RcwaResult {
        s00,
        r_total,
        t_total,
        per_order,
        diagnostics: diagnostics(&asm, propagating),
    })
}

/// Solve the same excitation from both sides (symmetry check path).
pub fn solve_two_sided(
    spec: &CrystalSpec,
    exc: &PlaneWaveExcitation,
    trunc: &Truncation,
    opts: &SolveOptions,
) -> Result<(RcwaResult, RcwaResult), RcwaError> {
    let asm = assemble(spec, exc, trunc, opts)?;
    let mut out = Vec::with_capacity(2);
    for side in [IncidenceSide::Left, IncidenceSide::Right] {
        let fields = boundary_solve(&asm, side);
        let (s00, r_total, t_total, per_order, propagating) = extract(&asm, &fields);
        out.push(RcwaResult {
            s00,
            r_total,
            t_total,
            per_order,
            diagnostics: diagnostics(&asm, propagating),
        });
    }
    let right = out.pop().unwrap();
    let left = out.pop().unwrap();
    Ok((left, right))
}

fn diagnostics(asm: &Assembled, propagating: usize) -> SolveDiagnostics {
    // cheap infinity-norm condition estimate from a couple of probe solves
    let two_m = 2 * asm.m;
    let mut inv_norm_est = 0.0f64;
    for probe_kind in 0..2 {
        let rhs = Mat::<C64>::from_fn(two_m, 1, |i, _| {
            let sign = if (i / (probe_kind + 1)) % 2 == 0 { 1.0 } else { -1.0 };
            C64::new(sign / two_m as f64, 0.0)
        });
        let x = asm.m_sys_lu.solve(&rhs);
        let mut xn = 0.0f64;
        let mut bn = 0.0f64;
        for i in 0..two_m {
            xn = xn.max(x[(i, 0)].norm());
            bn = bn.max(rhs[(i, 0)].norm());
        }
        inv_norm_est = inv_norm_est.max(xn / bn.max(1e-300));
    }
    let mut min_kz = f64::INFINITY;
    for q in &asm.q_amb {
        min_kz = min_kz.min(q.norm());
    }
    SolveDiagnostics {
        condition_estimate: asm.m_sys_norm * inv_norm_est,
        boundary_residual: asm.boundary_residual_probe,
        min_ambient_kz: min_kz,
        propagating_ambient_orders: propagating,
    }
}

/// One point of a reflectivity/transmission map.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MapPoint {
    pub k_x: f64,
    /// `nu / c = 1 / lambda` (1/m).
    pub nu_over_c: f64,
    pub r_power: f64,
    pub t_power: f64,
    pub r00: Complex64,
    pub t00: Complex64,
}

/// Reflectivity map over `(k_x, nu/c)`, row-major with `k_x` outer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandMap {
    pub k_x: Vec<f64>,
    pub nu_over_c: Vec<f64>,
    pub points: Vec<MapPoint>,
}

impl BandMap {
    pub fn point(&self, i_kx: usize, j_nu: usize) -> &MapPoint {
        &self.points[i_kx * self.nu_over_c.len() + j_nu]
    }
}

/// Sweep the solver over a `(k_x, nu/c)` grid. Points are independent and
/// run on the rayon pool; output ordering is fixed by the grids regardless
/// of the worker count.
pub fn band_map(
    spec: &CrystalSpec,
    k_x_grid: &[f64],
    nu_over_c_grid: &[f64],
    pol: Polarization,
    trunc: &Truncation,
) -> Result<BandMap, RcwaError> {
    use rayon::prelude::*;
    for g in [k_x_grid, nu_over_c_grid] {
        if g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RcwaError::InvalidSpec(
                "map grids must be strictly increasing".into(),
            ));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..k_x_grid.len())
        .flat_map(|i| (0..nu_over_c_grid.len()).map(move |j| (i, j)))
        .collect();
    let points: Result<Vec<MapPoint>, RcwaError> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let exc = PlaneWaveExcitation {
                wavelength: 1.0 / nu_over_c_grid[j],
                k_x: k_x_grid[i],
                polarization: pol,
            };
            let res = solve(spec, &exc, trunc)?;
            Ok(MapPoint {
                k_x: k_x_grid[i],
                nu_over_c: nu_over_c_grid[j],
                r_power: res.r_total,
                t_power: res.t_total,
                r00: res.s00.r,
                t00: res.s00.t,
            })
        })
        .collect();
    Ok(BandMap {
        k_x: k_x_grid.to_vec(),
        nu_over_c: nu_over_c_grid.to_vec(),
        points: points?,
    })
}

/// Convolve a wavelength-sampled spectrum with the Gaussian response of the
/// spectrometer (FWHM in meters, default 4 nm at the call sites).
///
/// The kernel is renormalized per output sample, so a constant input maps to
/// itself exactly, including at the edges. The sampling step must not exceed
/// `fwhm / 4`.
pub fn convolve_spectrometer(
    wavelengths: &[f64],
    values: &[f64],
    fwhm: f64,
) -> Result<Vec<f64>, RcwaError> {
    if wavelengths.len() != values.len() || wavelengths.len() < 2 {
        return Err(RcwaError::InvalidSpec(
            "convolution needs matching wavelength/value arrays".into(),
        ));
    }
    let mut max_step = 0.0f64;
    for w in wavelengths.windows(2) {
        max_step = max_step.max(w[1] - w[0]);
    }
    if max_step > fwhm / 4.0 {
        return Err(RcwaError::GridTooCoarse {
            step: max_step,
            fwhm,
        });
    }
    let sigma = fwhm / (2.0 * (2.0 * (2.0f64).ln()).sqrt());
    let cut = 5.0 * sigma;
    let n = values.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        let mut norm = 0.0;
        // walk outward over the window around sample i
        let mut j = i;
        loop {
            let d = wavelengths[i] - wavelengths[j];
            if d > cut {
                break;
            }
            let w = (-0.5 * (d / sigma) * (d / sigma)).exp();
            acc += w * values[j];
            norm += w;
            if j == 0 {
                break;
            }
            j -= 1;
        }
        let mut j = i + 1;
        while j < n {
            let d = wavelengths[j] - wavelengths[i];
            if d > cut {
                break;
            }
            let w = (-0.5 * (d / sigma) * (d / sigma)).exp();
            acc += w * values[j];
            norm += w;
            j += 1;
        }
        out[i] = acc / norm;
    }
    Ok(out)
}

/// Change in the zeroth-order transmission when the truncation is raised
/// from `n` to `n + 2`, for convergence documentation.
pub fn convergence_step(
    spec: &CrystalSpec,
    exc: &PlaneWaveExcitation,
    n: usize,
) -> Result<f64, RcwaError> {
    let a = solve(spec, exc, &Truncation { n })?;
    let b = solve(spec, exc, &Truncation { n: n + 2 })?;
    Ok((a.s00.t - b.s00.t).norm())
}

/// Imaginary refractive index that reproduces a target scattering loss
/// `1 - R - T` at the given excitation, by a bracketed secant iteration.
pub fn absorption_for_loss(
    spec: &CrystalSpec,
    exc: &PlaneWaveExcitation,
    trunc: &Truncation,
    target_loss: f64,
) -> Result<f64, RcwaError> {
    let loss_at = |im_n: f64| -> Result<f64, RcwaError> {
        let mut s = spec.clone();
        s.im_n = im_n;
        let res = solve(&s, exc, trunc)?;
        Ok(1.0 - res.r_total - res.t_total)
    };
    let mut lo = 0.0f64;
    let mut f_lo = loss_at(lo)?;
    let mut hi = 1e-6f64;
    let mut f_hi = loss_at(hi)?;
    let mut grow = 0;
    while f_hi < target_loss && grow < 24 {
        hi *= 2.0;
        f_hi = loss_at(hi)?;
        grow += 1;
    }
    if f_hi < target_loss {
        return Err(RcwaError::InvalidSpec(format!(
            "target loss {target_loss:e} not reachable by absorption"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f_mid = loss_at(mid)?;
        if (f_mid - target_loss).abs() <= 1e-3 * target_loss {
            return Ok(mid);
        }
        if f_mid < target_loss {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let _ = (f_lo, f_hi);
    Ok(0.5 * (lo + hi))
}
