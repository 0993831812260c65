//! Avoided-crossing fits on membrane-in-the-middle maps and the loss-width
//! inference.

use serde::{Deserialize, Serialize};

use pcs_core::cavity::MimMap;
use pcs_core::optim::{self, LevMarOptions};
use pcs_core::SPEED_OF_LIGHT as C;

use crate::ScanError;

/// Two-mode fit along the detuning axis of one map column.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CrossingFit {
    /// Unsigned branch separation (Hz); zero when unresolved.
    pub splitting: f64,
    pub splitting_sigma: f64,
    /// Full width at half maximum of the upper/lower branch (Hz, linear
    /// frequency).
    pub gamma_upper_hz: f64,
    pub gamma_lower_hz: f64,
    pub gamma_upper_sigma: f64,
    pub gamma_lower_sigma: f64,
    /// False when the branches were closer than half their mean width and a
    /// single-peak fit was returned instead.
    pub resolved: bool,
}

/// Splitting with the sign convention of the eigenmode formulas: positive
/// below the transmission zero (symmetric branch on top), negative above.
pub fn signed_delta_nu(fit: &CrossingFit, lambda_c: f64, lambda1: f64) -> f64 {
    if lambda_c < lambda1 {
        fit.splitting
    } else {
        -fit.splitting
    }
}

fn lorentzian(x: f64, center: f64, fwhm: f64, height: f64) -> f64 {
    let hw = 0.5 * fwhm;
    height * hw * hw / ((x - center) * (x - center) + hw * hw)
}

struct ColumnFit {
    upper_center: f64,
    lower_center: f64,
    upper_fwhm: f64,
    lower_fwhm: f64,
    resolved: bool,
}

fn fit_column(detuning: &[f64], values: &[f64]) -> Result<ColumnFit, ScanError> {
    // two tallest separated local maxima as starting points
    let mut maxima: Vec<usize> = (1..values.len() - 1)
        .filter(|&i| values[i] >= values[i - 1] && values[i] > values[i + 1])
        .collect();
    maxima.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    if maxima.is_empty() {
        return Err(ScanError::NoPeaks);
    }
    let first = maxima[0];
    let floor = values.iter().cloned().fold(f64::INFINITY, f64::min);

    // crude width of the tallest peak
    let half = floor + 0.5 * (values[first] - floor);
    let mut l = first;
    while l > 0 && values[l] > half {
        l -= 1;
    }
    let mut r = first;
    while r + 1 < values.len() && values[r] > half {
        r += 1;
    }
    let w0 = (detuning[r] - detuning[l]).abs().max(f64::EPSILON);

    let second = maxima
        .iter()
        .skip(1)
        .find(|&&i| {
            (detuning[i] - detuning[first]).abs() > 1.5 * w0
                && values[i] - floor > 0.01 * (values[first] - floor)
        })
        .copied();

    let Some(second) = second else {
        // single-peak fallback
        let fit = optim::levmar(
            |p, out| {
                for (k, (&x, &y)) in detuning.iter().zip(values).enumerate() {
                    out[k] = p[3] + lorentzian(x, p[0], p[1].exp(), p[2]) - y;
                }
            },
            values.len(),
            &[detuning[first], w0.ln(), values[first] - floor, floor],
            &LevMarOptions::default(),
        )
        .map_err(|e| ScanError::FitDiverged(e.to_string()))?;
        let c = fit.params[0];
        let w = fit.params[1].exp();
        return Ok(ColumnFit {
            upper_center: c,
            lower_center: c,
            upper_fwhm: w,
            lower_fwhm: w,
            resolved: false,
        });
    };

    // two Lorentzians: [c1, c2, ln w1, ln w2, h1, h2, offset]
    let fit = optim::levmar(
        |p, out| {
            for (k, (&x, &y)) in detuning.iter().zip(values).enumerate() {
                out[k] = p[6]
                    + lorentzian(x, p[0], p[2].exp(), p[4])
                    + lorentzian(x, p[1], p[3].exp(), p[5])
                    - y;
            }
        },
        values.len(),
        &[
            detuning[first],
            detuning[second],
            w0.ln(),
            w0.ln(),
            values[first] - floor,
            values[second] - floor,
            floor,
        ],
        &LevMarOptions::default(),
    )
    .map_err(|e| ScanError::FitDiverged(e.to_string()))?;

    let (c1, c2) = (fit.params[0], fit.params[1]);
    let (w1, w2) = (fit.params[2].exp(), fit.params[3].exp());
    let resolved = (c1 - c2).abs() >= 0.25 * (w1 + w2);
    let (upper, lower) = if c1 >= c2 {
        ((c1, w1), (c2, w2))
    } else {
        ((c2, w2), (c1, w1))
    };
    Ok(ColumnFit {
        upper_center: upper.0,
        lower_center: lower.0,
        upper_fwhm: upper.1,
        lower_fwhm: lower.1,
        resolved,
    })
}

/// Fit the symmetric/antisymmetric doublet along the detuning axis at the
/// membrane position closest to zero displacement; parameter uncertainties
/// come from the spread of the same fit over the neighboring displacement
/// columns (up to three on each side).
pub fn fit_avoided_crossing(map: &MimMap) -> Result<CrossingFit, ScanError> {
    if map.delta_l.is_empty() || map.detuning.len() < 16 {
        return Err(ScanError::InvalidInput("map too small".into()));
    }
    let center_col = map
        .delta_l
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();

    let central = fit_column(&map.detuning, map.column(center_col))?;
    if !central.resolved {
        return Ok(CrossingFit {
            splitting: 0.0,
            splitting_sigma: f64::NAN,
            gamma_upper_hz: central.upper_fwhm,
            gamma_lower_hz: central.lower_fwhm,
            gamma_upper_sigma: f64::NAN,
            gamma_lower_sigma: f64::NAN,
            resolved: false,
        });
    }

    let lo = center_col.saturating_sub(3);
    let hi = (center_col + 3).min(map.delta_l.len() - 1);
    let mut splittings = Vec::new();
    let mut uppers = Vec::new();
    let mut lowers = Vec::new();
    for col in lo..=hi {
        if let Ok(f) = fit_column(&map.detuning, map.column(col)) {
            if f.resolved {
                splittings.push(f.upper_center - f.lower_center);
                uppers.push(f.upper_fwhm);
                lowers.push(f.lower_fwhm);
            }
        }
    }
    let sigma = |v: &[f64]| -> f64 {
        if v.len() < 2 {
            return f64::NAN;
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };

    Ok(CrossingFit {
        splitting: central.upper_center - central.lower_center,
        splitting_sigma: sigma(&splittings),
        gamma_upper_hz: central.upper_fwhm,
        gamma_lower_hz: central.lower_fwhm,
        gamma_upper_sigma: sigma(&uppers),
        gamma_lower_sigma: sigma(&lowers),
        resolved: true,
    })
}

/// Result of the loss-width inference.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GammaPrimeFit {
    /// Inferred loss width (m).
    pub gamma_prime: f64,
    pub sigma: f64,
    /// Mean deviation of the lossless-channel width from the mirror-only
    /// prediction (Hz); compatible with zero when the model holds.
    pub gamma_plus_residual_hz: f64,
    pub points_used: usize,
}

/// Infer the loss width from fitted branch linewidths versus the scan center
/// wavelength.
///
/// The branch whose damping is set by the mirrors alone is identified
/// through the sign convention (`lambda_c` against `lambda1`); the other
/// follows the Lorentzian loss profile
/// `L = 4 gamma gamma' / ((gamma + gamma')^2 + (lambda_c - lambda1)^2)`
/// centered on the transmission zero, on top of the mirror loss.
pub fn infer_gamma_prime(
    records: &[(f64, CrossingFit)],
    gamma: f64,
    lambda1: f64,
    mirror_loss: f64,
    sub_length: f64,
) -> Result<GammaPrimeFit, ScanError> {
    let usable: Vec<(f64, f64, f64)> = records
        .iter()
        .filter(|(_, fit)| fit.resolved)
        .map(|(lc, fit)| {
            let (plus, minus) = if *lc < lambda1 {
                (fit.gamma_upper_hz, fit.gamma_lower_hz)
            } else {
                (fit.gamma_lower_hz, fit.gamma_upper_hz)
            };
            (*lc, plus, minus)
        })
        .collect();
    if usable.len() < 3 {
        return Err(ScanError::InsufficientPeaks {
            needed: 3,
            found: usable.len(),
        });
    }

    let hz_per_loss = C / (2.0 * sub_length) / (2.0 * std::f64::consts::PI);
    let model = |gamma_prime: f64, lambda_c: f64| -> f64 {
        let gp = gamma_prime.max(0.0);
        let width = gamma + gp;
        let delta = lambda_c - lambda1;
        let l_minus = 4.0 * gamma * gp / (width * width + delta * delta);
        hz_per_loss * (l_minus + mirror_loss)
    };

    let fit = optim::levmar(
        |p, out| {
            for (k, &(lc, _, minus)) in usable.iter().enumerate() {
                out[k] = model(p[0], lc) - minus;
            }
        },
        usable.len(),
        &[0.01 * gamma],
        &LevMarOptions::default(),
    )
    .map_err(|e| ScanError::FitDiverged(e.to_string()))?;

    let mirror_only = hz_per_loss * mirror_loss;
    let plus_residual = usable
        .iter()
        .map(|&(_, plus, _)| plus - mirror_only)
        .sum::<f64>()
        / usable.len() as f64;

    Ok(GammaPrimeFit {
        gamma_prime: fit.params[0].max(0.0),
        sigma: fit.parameter_sigma(0).unwrap_or(f64::NAN),
        gamma_plus_residual_hz: plus_residual,
        points_used: usable.len(),
    })
}
