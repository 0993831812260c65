//! Carrier detection and Lorentzian triplet fits with sideband calibration.

use serde::{Deserialize, Serialize};

use pcs_core::optim::{self, LevMarOptions};

use crate::{ScanError, ScanTrace};

/// Index window around one carrier peak.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PeakWindow {
    pub center_index: usize,
    pub lo: usize,
    pub hi: usize,
    /// Crude full width at half maximum in axis units, from the half-max
    /// crossings.
    pub fwhm_estimate: f64,
}

/// One fitted carrier (with sidebands when available).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakFit {
    /// Carrier center (axis units).
    pub center: f64,
    /// Shared full width at half maximum (axis units).
    pub fwhm: f64,
    /// Carrier height above the offset.
    pub height: f64,
    pub offset: f64,
    /// Fitted carrier-to-sideband spacing (axis units); zero when
    /// uncalibrated.
    pub sideband_spacing: f64,
    pub residual_rms: f64,
    /// Width in frequency units, `fwhm * sideband_offset / sideband_spacing`.
    pub fwhm_hz: Option<f64>,
    /// Local scan speed from the sideband ruler (Hz per axis unit).
    pub speed_hz_per_axis: Option<f64>,
    /// Half the difference of the two sideband gaps from the free-centers
    /// refit (axis units); the local nonlinearity of the scan.
    pub off_centering: f64,
    /// Width uncertainty propagated from the off-centering (Hz).
    pub width_sigma_hz: f64,
    /// False when the trace carries no usable sidebands and the fit fell
    /// back to a single Lorentzian.
    pub calibrated: bool,
    /// Local scan-speed samples `(axis position, Hz per axis unit, sigma)`
    /// from the individual sideband gaps; two per calibrated peak.
    pub speed_samples: Vec<(f64, f64, f64)>,
}

fn local_maxima(signal: &[f64], lo: usize, hi: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for i in lo.max(1)..hi.min(signal.len() - 1) {
        if signal[i] >= signal[i - 1] && signal[i] > signal[i + 1] {
            out.push(i);
        }
    }
    out
}

fn half_max_width(trace: &ScanTrace, peak: usize, baseline: f64) -> (usize, usize) {
    let half = baseline + 0.5 * (trace.signal[peak] - baseline);
    let mut left = peak;
    while left > 0 && trace.signal[left] > half {
        left -= 1;
    }
    let mut right = peak;
    while right + 1 < trace.signal.len() && trace.signal[right] > half {
        right += 1;
    }
    (left, right)
}

/// Find carrier peaks at least `prominence` above the baseline and return
/// non-overlapping fit windows sized to contain the sidebands.
pub fn detect_peaks(trace: &ScanTrace, prominence: f64) -> Result<Vec<PeakWindow>, ScanError> {
    let n = trace.signal.len();
    if n < 8 {
        return Err(ScanError::InvalidInput("trace too short".into()));
    }
    // robust baseline: median of the samples
    let mut sorted = trace.signal.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let baseline = sorted[n / 2];
    let threshold = baseline + prominence;

    let mut candidates: Vec<usize> = local_maxima(&trace.signal, 0, n)
        .into_iter()
        .filter(|&i| trace.signal[i] > threshold)
        .collect();
    if candidates.is_empty() {
        return Err(ScanError::NoPeaks);
    }
    candidates.sort_by(|&a, &b| trace.signal[b].partial_cmp(&trace.signal[a]).unwrap());

    // FWHM scale from the tallest candidate
    let (l0, r0) = half_max_width(trace, candidates[0], baseline);
    let fwhm_idx = (r0 - l0).max(2);

    // keep the tallest of any cluster of near-coincident maxima (noise on a
    // peak top, or the sidebands themselves)
    let min_separation = 8 * fwhm_idx;
    let mut kept: Vec<usize> = Vec::new();
    for &c in &candidates {
        if kept.iter().all(|&k| k.abs_diff(c) > min_separation) {
            kept.push(c);
        }
    }
    kept.sort_unstable();

    // drop sideband maxima: anything much weaker than its tallest neighbor
    // within the expected sideband reach
    let tallest = trace.signal[candidates[0]] - baseline;
    let carriers: Vec<usize> = kept
        .iter()
        .copied()
        .filter(|&i| trace.signal[i] - baseline > 0.5 * tallest)
        .collect();
    if carriers.is_empty() {
        return Err(ScanError::NoPeaks);
    }

    // window half-width: enough for the carrier plus the sidebands (if the
    // trace has them), bounded by the midpoints to the neighbors
    let mut windows = Vec::with_capacity(carriers.len());
    for (k, &c) in carriers.iter().enumerate() {
        let mut half = 3 * fwhm_idx;
        if trace.sideband_offset_hz > 0.0 && trace.sideband_power_ratio > 0.0 {
            // find the sideband sub-peak to size the window
            let search_hi = (c + (n - 1 - c).min(n / (2 * carriers.len()).max(1))).min(n - 1);
            let side = local_maxima(&trace.signal, c + 2 * fwhm_idx, search_hi)
                .into_iter()
                .filter(|&i| {
                    let h = trace.signal[i] - baseline;
                    h > 0.02 * tallest && h < 0.7 * tallest
                })
                .max_by(|&a, &b| trace.signal[a].partial_cmp(&trace.signal[b]).unwrap());
            if let Some(s) = side {
                half = ((s - c) as f64 * 1.35) as usize + 3 * fwhm_idx;
            }
        }
        let mut lo = c.saturating_sub(half);
        let mut hi = (c + half).min(n - 1);
        if k > 0 {
            lo = lo.max((carriers[k - 1] + c) / 2);
        }
        if k + 1 < carriers.len() {
            hi = hi.min((carriers[k + 1] + c) / 2);
        }
        windows.push(PeakWindow {
            center_index: c,
            lo,
            hi,
            fwhm_estimate: (fwhm_idx as f64) * (trace.axis[1] - trace.axis[0]),
        });
    }
    Ok(windows)
}

fn lorentzian(x: f64, center: f64, fwhm: f64, height: f64) -> f64 {
    let hw = 0.5 * fwhm;
    height * hw * hw / ((x - center) * (x - center) + hw * hw)
}

/// Robust noise floor from the median absolute sample-to-sample difference
/// (the narrow peaks only occupy a small fraction of the window).
fn noise_sigma(ys: &[f64]) -> f64 {
    let mut diffs: Vec<f64> = ys.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if diffs.is_empty() {
        return 0.0;
    }
    diffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // median |d| of d ~ N(0, 2 sigma^2) is 0.9539 sigma
    diffs[diffs.len() / 2] / 0.9539
}

/// Find the symmetric pair of sideband sub-peaks in the carrier-subtracted
/// residual; returns the mean gap in axis units. Subtracting the fitted
/// carrier first keeps noise excursions on its shoulders from masquerading
/// as sidebands.
fn sideband_gap(
    xs: &[f64],
    residual: &[f64],
    x_peak: f64,
    w0: f64,
    sigma: f64,
) -> Option<f64> {
    let rel_center = xs.partition_point(|&x| x < x_peak);
    let min_height = 6.0 * sigma;
    let candidates = |range: std::ops::Range<usize>| -> Vec<usize> {
        local_maxima(residual, range.start, range.end)
            .into_iter()
            .filter(|&i| residual[i] > min_height && (xs[i] - x_peak).abs() > 3.0 * w0)
            .collect()
    };
    let right = candidates(rel_center + 2..xs.len());
    let left = candidates(0..rel_center.saturating_sub(1));
    // tallest mirror-symmetric pair with consistent heights
    let mut best: Option<(f64, f64)> = None; // (total height, gap)
    for &r in &right {
        for &l in &left {
            let gr = xs[r] - x_peak;
            let gl = x_peak - xs[l];
            let asym = (gr - gl).abs() / gr.max(gl);
            if asym > 0.2 {
                continue;
            }
            let (hr, hl) = (residual[r], residual[l]);
            if hr / hl > 2.0 || hl / hr > 2.0 {
                continue;
            }
            let total = hr + hl;
            if best.is_none_or(|(h, _)| total > h) {
                best = Some((total, 0.5 * (gr + gl)));
            }
        }
    }
    best.map(|(_, gap)| gap)
}

fn single_lorentzian_fallback(
    xs: &[f64],
    ys: &[f64],
    x_peak: f64,
    w0: f64,
    h0: f64,
    floor: f64,
) -> Result<PeakFit, ScanError> {
    let fit = optim::levmar(
        |p, out| {
            for (k, (&x, &y)) in xs.iter().zip(ys).enumerate() {
                out[k] = p[3] + lorentzian(x, p[0], p[1].exp(), p[2]) - y;
            }
        },
        xs.len(),
        &[x_peak, w0.ln(), h0, floor],
        &LevMarOptions::default(),
    )
    .map_err(|e| ScanError::FitDiverged(e.to_string()))?;
    Ok(PeakFit {
        center: fit.params[0],
        fwhm: fit.params[1].exp(),
        height: fit.params[2],
        offset: fit.params[3],
        sideband_spacing: 0.0,
        residual_rms: fit.residual_rms,
        fwhm_hz: None,
        speed_hz_per_axis: None,
        off_centering: 0.0,
        width_sigma_hz: f64::NAN,
        calibrated: false,
        speed_samples: Vec::new(),
    })
}

/// Fit one carrier window with a triplet of Lorentzians sharing a width, the
/// sideband spacing as a single parameter; rescale the width into frequency
/// units with the 50-MHz ruler.
///
/// Falls back to a single-Lorentzian fit, flagged `calibrated: false`, when
/// the trace carries no sidebands or the sideband sub-peaks are unusable.
pub fn fit_lorentzian_triplet(
    trace: &ScanTrace,
    window: &PeakWindow,
) -> Result<PeakFit, ScanError> {
    let xs = &trace.axis[window.lo..=window.hi];
    let ys = &trace.signal[window.lo..=window.hi];
    if xs.len() < 12 {
        return Err(ScanError::InvalidInput("fit window too short".into()));
    }
    let x_peak = trace.axis[window.center_index];
    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = trace.signal[window.center_index];
    let h0 = (y_max - y_min).max(1e-12);
    let w0 = window.fwhm_estimate.max(f64::EPSILON);

    // peel the carrier, then look for the sideband pair in the residual
    let sigma = noise_sigma(ys);
    let carrier = single_lorentzian_fallback(xs, ys, x_peak, w0, h0, y_min)?;
    let gap0 = if trace.sideband_offset_hz > 0.0 && trace.sideband_power_ratio > 0.0 {
        let residual: Vec<f64> = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| {
                y - carrier.offset - lorentzian(x, carrier.center, carrier.fwhm, carrier.height)
            })
            .collect();
        sideband_gap(xs, &residual, carrier.center, carrier.fwhm, sigma)
    } else {
        None
    };

    let Some(delta0) = gap0 else {
        return Ok(carrier);
    };
    // triplet: [center, ln delta, ln fwhm, h_carrier, h_side, offset]
    let model = |p: &[f64], x: f64| -> f64 {
        let (c, delta, w) = (p[0], p[1].exp(), p[2].exp());
        p[5] + lorentzian(x, c, w, p[3])
            + lorentzian(x, c - delta, w, p[4])
            + lorentzian(x, c + delta, w, p[4])
    };
    let fit = optim::levmar(
        |p, out| {
            for (k, (&x, &y)) in xs.iter().zip(ys).enumerate() {
                out[k] = model(p, x) - y;
            }
        },
        xs.len(),
        &[
            x_peak,
            delta0.ln(),
            w0.ln(),
            h0,
            trace.sideband_power_ratio * h0,
            y_min,
        ],
        &LevMarOptions::default(),
    )
    .map_err(|e| ScanError::FitDiverged(e.to_string()))?;

    // a triplet fit that cannot explain the data down to the noise floor or
    // that wandered away from the detected spacing latched onto something
    // wrong: degrade to the uncalibrated single fit
    if fit.residual_rms > (8.0 * sigma).max(2e-3 * h0)
        || fit.params[1].exp() < 0.5 * delta0
        || fit.params[1].exp() > 2.0 * delta0
    {
        return Ok(carrier);
    }

    let center = fit.params[0];
    let delta = fit.params[1].exp();
    let fwhm = fit.params[2].exp();
    let speed = trace.sideband_offset_hz / delta;

    // free-centers refit for the off-centering diagnostic:
    // [c_left, c_center, c_right, ln fwhm, h_c, h_l, h_r, offset]
    let refit = optim::levmar(
        |p, out| {
            let w = p[3].exp();
            for (k, (&x, &y)) in xs.iter().zip(ys).enumerate() {
                out[k] = p[7]
                    + lorentzian(x, p[1], w, p[4])
                    + lorentzian(x, p[0], w, p[5])
                    + lorentzian(x, p[2], w, p[6])
                    - y;
            }
        },
        xs.len(),
        &[
            center - delta,
            center,
            center + delta,
            fit.params[2],
            fit.params[3],
            fit.params[4],
            fit.params[4],
            fit.params[5],
        ],
        &LevMarOptions::default(),
    );
    let (off_centering, speed_samples) = match &refit {
        Ok(r) => {
            let left_gap = r.params[1] - r.params[0];
            let right_gap = r.params[2] - r.params[1];
            // gap variance from the center uncertainties of the refit
            let sig = |i: usize| r.parameter_sigma(i).unwrap_or(0.0);
            let gap_sigma =
                |a: usize, b: usize| (sig(a) * sig(a) + sig(b) * sig(b)).sqrt().max(1e-300);
            let left_speed = trace.sideband_offset_hz / left_gap;
            let right_speed = trace.sideband_offset_hz / right_gap;
            let samples = vec![
                (
                    0.5 * (r.params[0] + r.params[1]),
                    left_speed,
                    left_speed * gap_sigma(0, 1) / left_gap,
                ),
                (
                    0.5 * (r.params[1] + r.params[2]),
                    right_speed,
                    right_speed * gap_sigma(1, 2) / right_gap,
                ),
            ];
            (0.5 * (left_gap - right_gap).abs(), samples)
        }
        Err(_) => (f64::NAN, vec![(center, speed, speed * 1e-6)]),
    };
    let fwhm_hz = fwhm * speed;
    Ok(PeakFit {
        center,
        fwhm,
        height: fit.params[3],
        offset: fit.params[5],
        sideband_spacing: delta,
        residual_rms: fit.residual_rms,
        fwhm_hz: Some(fwhm_hz),
        speed_hz_per_axis: Some(speed),
        off_centering,
        width_sigma_hz: fwhm_hz * off_centering / delta,
        calibrated: true,
        speed_samples,
    })
}
