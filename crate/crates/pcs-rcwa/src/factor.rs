//! Fourier factorization of the permittivity for the modal eigenproblem.
//!
//! The plain Laurent (direct) rule builds the block-Toeplitz matrix of the
//! 2-D permittivity coefficients. The inverse-rule variant applies the
//! correct factorization for field components normal to the hole walls: for
//! each grid line across the cell, the 1-D Toeplitz matrix of `1/eps` along
//! the discontinuous axis is inverted, and the result is Fourier-transformed
//! along the other axis. For the circular hole both mixed matrices follow
//! from a single line construction thanks to the x/y symmetry of the cell.

use num_complex::Complex64;

use crate::crystal::CrystalSpec;

/// Flat index of order `(m, n)` with `m, n` in `-nn..=nn`: `m` outer.
#[inline]
pub(crate) fn flat_order(m: i32, n: i32, nn: i32) -> usize {
    debug_assert!(m.abs() <= nn && n.abs() <= nn);
    ((m + nn) as usize) * (2 * nn as usize + 1) + (n + nn) as usize
}

/// Half-width of the air interval cut by the hole pattern along a line at
/// transverse offset `u` from the hole center, with the periodic images of
/// the neighboring holes merged in and clamped to the half cell.
pub(crate) fn row_half_width(spec: &CrystalSpec, u: f64) -> f64 {
    let r = spec.hole_radius;
    let cell = spec.lattice;
    let central = if u.abs() < r {
        (r * r - u * u).sqrt()
    } else {
        0.0
    };
    let d_neighbor = cell - u.abs();
    let neighbor = if d_neighbor < r {
        (r * r - d_neighbor * d_neighbor).sqrt()
    } else {
        0.0
    };
    central.max(neighbor).min(0.5 * cell)
}

/// Fourier coefficient of the indicator of `[-w, w]` over the cell,
/// `int_{-w}^{w} exp(-2 pi i d x / cell) dx / cell`.
#[inline]
fn interval_ft(d: i32, w: f64, cell: f64) -> f64 {
    if d == 0 {
        2.0 * w / cell
    } else {
        let a = 2.0 * std::f64::consts::PI * d as f64 * w / cell;
        a.sin() / (std::f64::consts::PI * d as f64)
    }
}

/// Dense in-place inverse of a small complex matrix (Gauss-Jordan with
/// partial pivoting). Sizes here are at most 2N+1.
fn invert_small(a: &mut [Complex64], n: usize) -> Option<Vec<Complex64>> {
    let mut inv: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        inv[i * n + i] = Complex64::new(1.0, 0.0);
    }
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].norm_sqr() > a[pivot * n + col].norm_sqr() {
                pivot = row;
            }
        }
        if a[pivot * n + col].norm_sqr() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
                inv.swap(col * n + j, pivot * n + j);
            }
        }
        let inv_pivot = Complex64::new(1.0, 0.0) / a[col * n + col];
        for j in 0..n {
            a[col * n + j] *= inv_pivot;
            inv[col * n + j] *= inv_pivot;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row * n + col];
            if f.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..n {
                let acj = a[col * n + j];
                let icj = inv[col * n + j];
                a[row * n + j] -= f * acj;
                inv[row * n + j] -= f * icj;
            }
        }
    }
    Some(inv)
}

/// 2-D block-Toeplitz permittivity matrix (Laurent rule), `M x M` row-major
/// with `M = (2 nn + 1)^2`.
///
/// Coefficients come from the analytic disk transform for non-overlapping
/// holes; when the holes reach past the half cell the exact union profile is
/// transformed line by line instead.
pub(crate) fn epsilon_toeplitz(
    spec: &CrystalSpec,
    wavelength: f64,
    nn: i32,
    line_samples: usize,
) -> Vec<Complex64> {
    let size = 2 * nn as usize + 1;
    let m_total = size * size;
    let n_delta = 4 * nn as usize + 1;
    let mut coeff = vec![Complex64::new(0.0, 0.0); n_delta * n_delta];

    let g_unit = 2.0 * std::f64::consts::PI / spec.lattice;
    if 2.0 * spec.hole_radius <= spec.lattice {
        for dm in -2 * nn..=2 * nn {
            for dn in -2 * nn..=2 * nn {
                coeff[(dm + 2 * nn) as usize * n_delta + (dn + 2 * nn) as usize] =
                    crate::crystal::epsilon_fourier(
                        spec,
                        (dm as f64 * g_unit, dn as f64 * g_unit),
                        wavelength,
                    );
            }
        }
    } else {
        // union profile: Laurent transform along x per line, then along y
        let eps_slab = spec.epsilon_slab(wavelength);
        let eps_air = Complex64::new(spec.epsilon_ambient(), 0.0);
        let contrast = eps_air - eps_slab;
        let ny = line_samples;
        for q in 0..ny {
            let y = (q as f64 + 0.5) / ny as f64 * spec.lattice - 0.5 * spec.lattice;
            let w = row_half_width(spec, y);
            for dm in -2 * nn..=2 * nn {
                let line = if dm == 0 {
                    eps_slab + contrast * interval_ft(0, w, spec.lattice)
                } else {
                    contrast * interval_ft(dm, w, spec.lattice)
                };
                for dn in -2 * nn..=2 * nn {
                    let phase = Complex64::from_polar(
                        1.0,
                        -2.0 * std::f64::consts::PI * dn as f64 * y / spec.lattice,
                    );
                    coeff[(dm + 2 * nn) as usize * n_delta + (dn + 2 * nn) as usize] +=
                        line * phase / ny as f64;
                }
            }
        }
    }

    let mut mat = vec![Complex64::new(0.0, 0.0); m_total * m_total];
    for m in -nn..=nn {
        for n in -nn..=nn {
            let row = flat_order(m, n, nn);
            for mp in -nn..=nn {
                for np in -nn..=nn {
                    let col = flat_order(mp, np, nn);
                    mat[row * m_total + col] =
                        coeff[(m - mp + 2 * nn) as usize * n_delta + (n - np + 2 * nn) as usize];
                }
            }
        }
    }
    mat
}

/// Mixed inverse-rule matrices `(FXX, FYY)` for the products `eps * Ex` and
/// `eps * Ey`, `M x M` row-major.
///
/// `FXX` applies the inverse rule along x (where `Ex` crosses the hole wall
/// discontinuously) and the direct rule along y; `FYY` is the transpose
/// arrangement. Both derive from the same line construction by the x/y
/// symmetry of the circular hole.
pub(crate) fn li_factor_matrices(
    spec: &CrystalSpec,
    wavelength: f64,
    nn: i32,
    line_samples: usize,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let size = 2 * nn as usize + 1;
    let m_total = size * size;
    let n_delta = 4 * nn as usize + 1;
    let eps_slab = spec.epsilon_slab(wavelength);
    let inv_slab = Complex64::new(1.0, 0.0) / eps_slab;
    let inv_air = Complex64::new(1.0, 0.0) / Complex64::new(spec.epsilon_ambient(), 0.0);
    let inv_contrast = inv_air - inv_slab;

    // c[delta][a * size + b] = (1/N) sum_q A(u_q)[a, b] exp(-2 pi i delta u_q / cell)
    let mut c = vec![vec![Complex64::new(0.0, 0.0); size * size]; n_delta];
    let ny = line_samples;
    let mut toeplitz = vec![Complex64::new(0.0, 0.0); size * size];
    for q in 0..ny {
        let u = (q as f64 + 0.5) / ny as f64 * spec.lattice - 0.5 * spec.lattice;
        let w = row_half_width(spec, u);
        let inv_line: Vec<Complex64> = if w == 0.0 {
            Vec::new()
        } else {
            // Toeplitz of 1/eps along the line, then invert
            for a in 0..size {
                for b in 0..size {
                    let d = a as i32 - b as i32;
                    let mut v = inv_contrast * interval_ft(d, w, spec.lattice);
                    if d == 0 {
                        v += inv_slab;
                    }
                    toeplitz[a * size + b] = v;
                }
            }
            invert_small(&mut toeplitz, size).expect("line Toeplitz of 1/eps is invertible")
        };
        for (delta_idx, block) in c.iter_mut().enumerate() {
            let delta = delta_idx as i32 - 2 * nn;
            let phase = Complex64::from_polar(
                1.0,
                -2.0 * std::f64::consts::PI * delta as f64 * u / spec.lattice,
            ) / ny as f64;
            if w == 0.0 {
                // uniform slab line: A = eps_slab * I
                let v = eps_slab * phase;
                for a in 0..size {
                    block[a * size + a] += v;
                }
            } else {
                for (dst, src) in block.iter_mut().zip(inv_line.iter()) {
                    *dst += src * phase;
                }
            }
        }
    }

    let mut fxx = vec![Complex64::new(0.0, 0.0); m_total * m_total];
    let mut fyy = vec![Complex64::new(0.0, 0.0); m_total * m_total];
    for m in -nn..=nn {
        for n in -nn..=nn {
            let row = flat_order(m, n, nn);
            for mp in -nn..=nn {
                for np in -nn..=nn {
                    let col = flat_order(mp, np, nn);
                    let dyn_idx = (n - np + 2 * nn) as usize;
                    let dxm_idx = (m - mp + 2 * nn) as usize;
                    fxx[row * m_total + col] =
                        c[dyn_idx][(m + nn) as usize * size + (mp + nn) as usize];
                    fyy[row * m_total + col] =
                        c[dxm_idx][(n + nn) as usize * size + (np + nn) as usize];
                }
            }
        }
    }
    (fxx, fyy)
}
