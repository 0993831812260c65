//! Finesse/round-trip-loss extraction and the loss/transmission interval
//! decomposition.

use serde::{Deserialize, Serialize};

use pcs_core::SPEED_OF_LIGHT as C;

use crate::{PeakFit, ScanError, ScanTrace};

/// Per-peak reduction: wavelength label, finesse, round-trip loss and the
/// (uncalibrated) resonant transmission.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PeakRecord {
    pub axis_center: f64,
    /// Absolute frequency of the peak from the integrated calibrated speed
    /// (Hz).
    pub nu: f64,
    pub lambda: f64,
    pub fsr_hz: f64,
    pub finesse: f64,
    pub rtl: f64,
    pub rtl_sigma: f64,
    /// Peak height above offset, proportional to the cavity resonant
    /// transmission.
    pub resonant_transmission: f64,
}

/// Weighted least-squares polynomial fit, low degree, plain normal
/// equations. Empty weights mean uniform.
fn polyfit(xs: &[f64], ys: &[f64], weights: &[f64], degree: usize) -> Vec<f64> {
    let n = degree + 1;
    let mut ata = vec![0.0; n * n];
    let mut atb = vec![0.0; n];
    for (k_pt, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let w = if weights.is_empty() { 1.0 } else { weights[k_pt] };
        let mut pow = vec![1.0; n];
        for k in 1..n {
            pow[k] = pow[k - 1] * x;
        }
        for i in 0..n {
            atb[i] += w * pow[i] * y;
            for j in 0..n {
                ata[i * n + j] += w * pow[i] * pow[j];
            }
        }
    }
    // Gaussian elimination
    let mut a = ata;
    let mut b = atb;
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[piv * n + col].abs() {
                piv = row;
            }
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let inv = 1.0 / a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] * inv;
            for j in col..n {
                a[row * n + j] -= f * a[col * n + j];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for j in col + 1..n {
            s -= a[col * n + j] * b[j];
        }
        b[col] = s / a[col * n + col];
    }
    b
}

#[cfg(test)]
fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_integral(coeffs: &[f64], a: f64, b: f64) -> f64 {
    let anti = |x: f64| -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * x.powi(k as i32 + 1) / (k as f64 + 1.0))
            .sum()
    };
    anti(b) - anti(a)
}

/// Turn fitted peaks into per-peak finesse and round-trip loss.
///
/// The sideband-calibrated local speeds at the peak centers are interpolated
/// by a low-order polynomial; its integral maps the axis onto absolute
/// frequency (anchored at the trace's coarse `nu_start`), which yields the
/// free spectral range between neighbors and the wavelength label of every
/// peak.
pub fn extract_finesse(
    peaks: &[PeakFit],
    trace: &ScanTrace,
) -> Result<Vec<PeakRecord>, ScanError> {
    let mut calibrated: Vec<&PeakFit> = peaks.iter().filter(|p| p.calibrated).collect();
    if calibrated.len() < 2 {
        return Err(ScanError::InsufficientPeaks {
            needed: 2,
            found: calibrated.len(),
        });
    }
    calibrated.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());

    let xs: Vec<f64> = calibrated.iter().map(|p| p.center).collect();
    // prefer the per-gap speed samples (two per peak) for the profile fit,
    // weighted by their fit uncertainties
    let mut sample_x = Vec::new();
    let mut sample_s = Vec::new();
    let mut sample_w = Vec::new();
    for p in &calibrated {
        if p.speed_samples.is_empty() {
            sample_x.push(p.center);
            sample_s.push(p.speed_hz_per_axis.unwrap());
            sample_w.push(1.0);
        } else {
            for &(x, v, sigma) in &p.speed_samples {
                sample_x.push(x);
                sample_s.push(v);
                sample_w.push(1.0 / (sigma * sigma).max(1e-300));
            }
        }
    }
    // normalize weights to a sane scale
    let w_max = sample_w.iter().cloned().fold(0.0f64, f64::max);
    for w in &mut sample_w {
        *w /= w_max;
    }
    let degree = (sample_x.len() - 1).min(3);
    let speed_poly = polyfit(&sample_x, &sample_s, &sample_w, degree);

    // free spectral range between adjacent peaks from the integrated speed
    let n = calibrated.len();
    let mut pair_fsr = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        pair_fsr.push(poly_integral(&speed_poly, xs[k], xs[k + 1]));
    }

    let mut records = Vec::with_capacity(n);
    for (k, peak) in calibrated.iter().enumerate() {
        let fsr = if k == 0 {
            pair_fsr[0]
        } else if k == n - 1 {
            pair_fsr[n - 2]
        } else {
            0.5 * (pair_fsr[k - 1] + pair_fsr[k])
        };
        let nu = trace.nu_start_hz + poly_integral(&speed_poly, 0.0, peak.center);
        let fwhm_hz = peak.fwhm_hz.unwrap();
        let rtl = 2.0 * std::f64::consts::PI * fwhm_hz / fsr;
        records.push(PeakRecord {
            axis_center: peak.center,
            nu,
            lambda: C / nu,
            fsr_hz: fsr,
            finesse: fsr / fwhm_hz,
            rtl,
            rtl_sigma: 2.0 * std::f64::consts::PI * peak.width_sigma_hz / fsr,
            resonant_transmission: peak.height,
        });
    }
    Ok(records)
}

/// Loss/transmission bands for one wavelength.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BudgetRow {
    pub lambda: f64,
    pub rtl: f64,
    pub rtl_sigma: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub l_lo: f64,
    pub l_hi: f64,
}

/// Interval decomposition of the round-trip loss into membrane transmission
/// and loss.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossBudget {
    pub rows: Vec<BudgetRow>,
    /// Bounds on the signal scale factor.
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    /// `Gamma_RTL(lambda_res) - T_c`, the membrane's `1 - R` at the
    /// round-trip-loss minimum.
    pub one_minus_r_at_resonance: f64,
    pub lambda_resonance: f64,
}

/// Split the measured round-trip loss into membrane transmission and loss
/// bands.
///
/// The transmitted peak height is only known up to a scale `alpha`; assuming
/// the membrane loss at the highest sampled wavelength lies within
/// `[0, Gamma_RTL(lambda_res)]` bounds `alpha`, and with it `T(lambda)` and
/// `L(lambda) = Gamma_RTL - T_c - T` everywhere. Passing a known
/// `alpha_override` collapses the bands.
pub fn loss_decomposition(
    records: &[PeakRecord],
    t_c: f64,
    alpha_override: Option<f64>,
) -> Result<LossBudget, ScanError> {
    if records.len() < 2 {
        return Err(ScanError::InsufficientPeaks {
            needed: 2,
            found: records.len(),
        });
    }
    let mut rows: Vec<&PeakRecord> = records.iter().collect();
    rows.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());

    let resonance = rows
        .iter()
        .min_by(|a, b| a.rtl.partial_cmp(&b.rtl).unwrap())
        .unwrap();
    let rtl_min = resonance.rtl;
    let lambda_resonance = resonance.lambda;

    let last = rows.last().unwrap();
    let (alpha_lo, alpha_hi) = match alpha_override {
        Some(alpha) => (alpha, alpha),
        None => {
            // L(lambda_max) in [0, rtl_min] brackets alpha through
            // T = s Gamma^2 / (4 T_c alpha)
            let t_hi = last.rtl - t_c; // L = 0
            let t_lo = last.rtl - t_c - rtl_min; // L = rtl_min
            if t_hi <= 0.0 {
                return Err(ScanError::InconsistentBand(format!(
                    "round-trip loss {:.3e} at the band edge does not exceed the input coupler {t_c:.3e}",
                    last.rtl
                )));
            }
            let s = last.resonant_transmission;
            let alpha_lo = s * last.rtl * last.rtl / (4.0 * t_c * t_hi);
            // when even a fully loss-dominated edge cannot reach the
            // resonance loss level, the interval is one-sided
            let alpha_hi = if t_lo > 0.0 {
                s * last.rtl * last.rtl / (4.0 * t_c * t_lo)
            } else {
                f64::INFINITY
            };
            (alpha_lo, alpha_hi)
        }
    };

    let budget_rows = rows
        .iter()
        .map(|r| {
            let base = r.resonant_transmission * r.rtl * r.rtl / (4.0 * t_c);
            let t_lo = base / alpha_hi;
            let t_hi = base / alpha_lo;
            BudgetRow {
                lambda: r.lambda,
                rtl: r.rtl,
                rtl_sigma: r.rtl_sigma,
                t_lo,
                t_hi,
                l_lo: (r.rtl - t_c - t_hi).max(0.0),
                l_hi: (r.rtl - t_c - t_lo).max(0.0),
            }
        })
        .collect();

    Ok(LossBudget {
        rows: budget_rows,
        alpha_lo,
        alpha_hi,
        one_minus_r_at_resonance: rtl_min - t_c,
        lambda_resonance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyfit_recovers_a_cubic() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 0.5 * x + 2.0 * x * x * x).collect();
        let c = polyfit(&xs, &ys, &[], 3);
        assert!((c[0] - 1.0).abs() < 1e-9);
        assert!((c[1] + 0.5).abs() < 1e-8);
        assert!(c[2].abs() < 1e-8);
        assert!((c[3] - 2.0).abs() < 1e-8);
        assert!((poly_eval(&c, 0.7) - (1.0 - 0.35 + 2.0 * 0.343)).abs() < 1e-9);
        assert!((poly_integral(&c, 0.0, 1.0) - (1.0 - 0.25 + 0.5)).abs() < 1e-9);
    }

    fn synthetic_records(lambdas_nm: &[f64], rtls: &[f64], t_mem: &[f64], t_c: f64, alpha: f64) -> Vec<PeakRecord> {
        lambdas_nm
            .iter()
            .zip(rtls)
            .zip(t_mem)
            .map(|((&l, &rtl), &t)| {
                let height = alpha * 4.0 * t_c * t / (rtl * rtl);
                PeakRecord {
                    axis_center: 0.0,
                    nu: C / (l * 1e-9),
                    lambda: l * 1e-9,
                    fsr_hz: 8.6e9,
                    finesse: 2.0 * std::f64::consts::PI / rtl,
                    rtl,
                    rtl_sigma: 1e-6,
                    resonant_transmission: height,
                }
            })
            .collect()
    }

    #[test]
    fn known_alpha_collapses_the_band_onto_truth() {
        let t_c = 455e-6;
        let lambdas = [1066.0, 1068.0, 1070.9, 1073.0, 1075.0];
        let t_mem = [300e-6, 180e-6, 100e-6, 220e-6, 400e-6];
        let losses = [900e-6, 700e-6, 430e-6, 800e-6, 1400e-6];
        let rtls: Vec<f64> = t_mem
            .iter()
            .zip(&losses)
            .map(|(t, l)| t_c + t + l)
            .collect();
        let records = synthetic_records(&lambdas, &rtls, &t_mem, t_c, 2.7);
        let budget = loss_decomposition(&records, t_c, Some(2.7)).unwrap();
        for (row, (&t, &l)) in budget.rows.iter().zip(t_mem.iter().zip(&losses)) {
            assert!((row.t_lo - t).abs() < 1e-12 && (row.t_hi - t).abs() < 1e-12);
            assert!((row.l_lo - l).abs() < 1e-9 && (row.l_hi - l).abs() < 1e-9);
        }
    }

    #[test]
    fn unknown_alpha_band_brackets_truth() {
        let t_c = 455e-6;
        let lambdas = [1066.0, 1068.0, 1070.9, 1073.0, 1075.0];
        let t_mem = [300e-6, 180e-6, 100e-6, 220e-6, 400e-6];
        // the edge-row loss stays below the resonance total, as the
        // decomposition assumes
        let losses = [900e-6, 700e-6, 430e-6, 800e-6, 900e-6];
        let rtls: Vec<f64> = t_mem
            .iter()
            .zip(&losses)
            .map(|(t, l)| t_c + t + l)
            .collect();
        let records = synthetic_records(&lambdas, &rtls, &t_mem, t_c, 2.7);
        let budget = loss_decomposition(&records, t_c, None).unwrap();
        assert!(budget.alpha_lo <= 2.7 && 2.7 <= budget.alpha_hi);
        for (row, (&t, &l)) in budget.rows.iter().zip(t_mem.iter().zip(&losses)) {
            assert!(row.t_lo <= t && t <= row.t_hi, "T band misses truth");
            assert!(row.l_lo <= l + 1e-12 && l <= row.l_hi + 1e-12, "L band misses truth");
            // bands + coupler always bracket the measured round-trip loss
            assert!(row.t_lo + row.l_lo + t_c <= row.rtl + 1e-12);
            assert!(row.t_hi + row.l_hi + t_c >= row.rtl - 1e-12);
        }
        // the resonance row reproduces 1 - R = Gamma_min - T_c
        let one_minus_r = 100e-6 + 430e-6;
        assert!((budget.one_minus_r_at_resonance - one_minus_r).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_band_is_flagged() {
        let t_c = 455e-6;
        // round-trip loss below the coupler alone: no nonnegative T fits
        let lambdas = [1066.0, 1075.0];
        let t_mem = [1e-6, 1e-6];
        let rtls = [400e-6, 400e-6];
        let records = synthetic_records(&lambdas, &rtls, &t_mem, t_c, 1.0);
        assert!(matches!(
            loss_decomposition(&records, t_c, None),
            Err(ScanError::InconsistentBand(_))
        ));
    }

    #[test]
    fn one_sided_interval_when_edge_loss_cannot_reach_resonance_level() {
        let t_c = 455e-6;
        // round-trip loss nearly flat: Gamma(max) - T_c < Gamma(min)
        let lambdas = [1066.0, 1070.0, 1075.0];
        let t_mem = [100e-6, 100e-6, 100e-6];
        let rtls = [1000e-6, 985e-6, 1000e-6];
        let records = synthetic_records(&lambdas, &rtls, &t_mem, t_c, 1.0);
        let budget = loss_decomposition(&records, t_c, None).unwrap();
        assert!(budget.alpha_hi.is_infinite());
        assert!(budget.rows.iter().all(|r| r.t_lo == 0.0));
    }
}
