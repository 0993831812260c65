//! One function per subcommand.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use pcs_core::cavity::{
    fsr_frequency, half_bandwidth, mim_eigenmodes, mim_transmission_map, longitudinal_index_near,
    MembraneModel, MimCavity, ModePair, SingleEndedCavity,
};
use pcs_core::fano::{fit_fano_transmission, zero_transmission_wavelength, FanoParamsRecord};
use pcs_core::guided_modes::band_overlay;
use pcs_core::scattering::TwoPortScattering;
use pcs_core::{Complex64, SPEED_OF_LIGHT as C};
use pcs_rcwa::{convolve_spectrometer, solve, PlaneWaveExcitation, Polarization};
use pcs_scan::{
    detect_peaks, extract_finesse, fit_avoided_crossing, fit_lorentzian_triplet, infer_gamma_prime,
    loss_decomposition, signed_delta_nu, synthesize_scan, CavityUnderTest, CrossingFit,
    LossBudget, NoiseModel, PeakRecord, ScanAxisSpec, SidebandSpec,
};

use crate::config::{branch_from_i8, RunConfig};
use crate::{atomic_write, CliError};

pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub json_tables: bool,
}

impl Context {
    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn seed(&self) -> u64 {
        self.seed_override.or(self.config.seed).unwrap_or(1)
    }
}

fn write_report<T: Serialize>(ctx: &Context, name: &str, report: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Io(e.to_string()))?;
    atomic_write(&ctx.out(name), &text)
}

/// Write a table as CSV (default) or as a JSON object with `columns` and
/// `rows`, per the --format flag. `comments` become `#` header lines in the
/// CSV form and a `meta` array in the JSON form.
fn write_table(
    ctx: &Context,
    basename: &str,
    comments: &[String],
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<(), CliError> {
    if ctx.json_tables {
        #[derive(Serialize)]
        struct Table<'a> {
            meta: &'a [String],
            columns: &'a [&'a str],
            rows: &'a [Vec<f64>],
        }
        let text = serde_json::to_string_pretty(&Table {
            meta: comments,
            columns,
            rows,
        })
        .map_err(|e| CliError::Io(e.to_string()))?;
        atomic_write(&ctx.out(&format!("{basename}.json")), &text)
    } else {
        let mut csv = String::new();
        for c in comments {
            let _ = writeln!(csv, "# {c}");
        }
        let _ = writeln!(csv, "{}", columns.join(","));
        for row in rows {
            let formatted: Vec<String> = row.iter().map(|v| format!("{v:.10e}")).collect();
            let _ = writeln!(csv, "{}", formatted.join(","));
        }
        atomic_write(&ctx.out(&format!("{basename}.csv")), &csv)
    }
}

fn numeric<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numeric(e.to_string())
}

// ---------------------------------------------------------------------------
// guided-bands

pub fn guided_bands(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.config.guided_bands.clone().ok_or_else(|| {
        CliError::Config("missing [guided_bands] section".into())
    })?;
    if cfg.kx_points < 1 {
        return Err(CliError::Config("kx_points must be at least 1".into()));
    }
    let crystal = ctx.config.crystal_spec()?;
    let slab = cfg.slab(crystal.thickness)?;
    let g = 2.0 * std::f64::consts::PI / crystal.lattice;
    let grid: Vec<f64> = (0..cfg.kx_points)
        .map(|i| {
            if cfg.kx_points == 1 {
                0.0
            } else {
                cfg.kx_max_fraction * g * i as f64 / (cfg.kx_points - 1) as f64
            }
        })
        .collect();

    let rows = band_overlay(&grid, &slab, crystal.lattice);
    let missing = rows.iter().filter(|r| r.solution.is_none()).count();

    let comments = [
        "guided-mode bands of the homogenized membrane".to_string(),
        format!(
            "thickness_nm = {:.3}, epsilon_eff = {:.4}, lattice_nm = {:.3}",
            slab.thickness * 1e9,
            slab.epsilon_eff,
            crystal.lattice * 1e9
        ),
        "k_x in rad/m, omega_over_2pi_c in 1/m".to_string(),
    ];
    let table_rows: Vec<(String, i32, i32, f64, f64, i8)> = rows
        .iter()
        .map(|row| {
            let (freq, sym) = match &row.solution {
                Some(sol) => (sol.omega / (2.0 * std::f64::consts::PI * C), sol.symmetry),
                None => (f64::NAN, 0),
            };
            (
                format!("{:?}", row.polarization),
                row.order.p_x,
                row.order.p_y,
                row.k_x,
                freq,
                sym,
            )
        })
        .collect();
    if ctx.json_tables {
        #[derive(Serialize)]
        struct Row<'a> {
            pol: &'a str,
            p_x: i32,
            p_y: i32,
            k_x: f64,
            omega_over_2pi_c: f64,
            symmetry: i8,
        }
        let json_rows: Vec<Row> = table_rows
            .iter()
            .map(|(pol, px, py, kx, f, s)| Row {
                pol,
                p_x: *px,
                p_y: *py,
                k_x: *kx,
                omega_over_2pi_c: *f,
                symmetry: *s,
            })
            .collect();
        let text =
            serde_json::to_string_pretty(&json_rows).map_err(|e| CliError::Io(e.to_string()))?;
        atomic_write(&ctx.out("guided_bands.json"), &text)?;
    } else {
        let mut csv = String::new();
        for c in &comments {
            let _ = writeln!(csv, "# {c}");
        }
        let _ = writeln!(csv, "pol,p_x,p_y,k_x,omega_over_2pi_c,symmetry");
        for (pol, px, py, kx, f, sym) in &table_rows {
            let _ = writeln!(csv, "{pol},{px},{py},{kx:.10e},{f:.10e},{sym}");
        }
        atomic_write(&ctx.out("guided_bands.csv"), &csv)?;
    }

    #[derive(Serialize)]
    struct Report<'a> {
        config: &'a RunConfig,
        bands: usize,
        points_per_band: usize,
        unsolved_points: usize,
    }
    write_report(
        ctx,
        "guided_bands_report.json",
        &Report {
            config: &ctx.config,
            bands: 8,
            points_per_band: grid.len(),
            unsolved_points: missing,
        },
    )
}

// ---------------------------------------------------------------------------
// band-map

pub fn band_map(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx
        .config
        .band_map
        .clone()
        .ok_or_else(|| CliError::Config("missing [band_map] section".into()))?;
    let crystal = ctx.config.crystal_spec()?;
    let trunc = ctx.config.truncation();
    let pol = cfg.polarization()?;
    if cfg.kx_points < 1 || cfg.nu_points < 2 {
        return Err(CliError::Config("band_map grids too small".into()));
    }
    let g = 2.0 * std::f64::consts::PI / crystal.lattice;
    let kx: Vec<f64> = (0..cfg.kx_points)
        .map(|i| {
            if cfg.kx_points == 1 {
                0.0
            } else {
                cfg.kx_max_fraction * g * i as f64 / (cfg.kx_points - 1) as f64
            }
        })
        .collect();
    let nu: Vec<f64> = (0..cfg.nu_points)
        .map(|i| {
            (cfg.nu_over_c_min_per_um
                + (cfg.nu_over_c_max_per_um - cfg.nu_over_c_min_per_um) * i as f64
                    / (cfg.nu_points - 1) as f64)
                * 1e6
        })
        .collect();

    let map = pcs_rcwa::band_map(&crystal, &kx, &nu, pol, &trunc).map_err(numeric)?;

    let rows: Vec<Vec<f64>> = map
        .points
        .iter()
        .map(|p| vec![p.k_x, p.nu_over_c, p.r_power, p.t_power])
        .collect();
    write_table(
        ctx,
        "band_map",
        &["reflectivity/transmission map, k_x in rad/m, nu_over_c in 1/m".to_string()],
        &["k_x", "nu_over_c", "R", "T"],
        &rows,
    )?;

    // per-point complex amplitudes
    #[derive(Serialize)]
    struct PointRecord {
        k_x: f64,
        nu_over_c: f64,
        r_re: f64,
        r_im: f64,
        t_re: f64,
        t_im: f64,
    }
    let records: Vec<PointRecord> = map
        .points
        .iter()
        .map(|p| PointRecord {
            k_x: p.k_x,
            nu_over_c: p.nu_over_c,
            r_re: p.r00.re,
            r_im: p.r00.im,
            t_re: p.t00.re,
            t_im: p.t00.im,
        })
        .collect();
    let json = serde_json::to_string_pretty(&records).map_err(|e| CliError::Io(e.to_string()))?;
    atomic_write(&ctx.out("band_map_points.json"), &json)?;

    if let Some(fwhm_nm) = cfg.convolve_fwhm_nm {
        // convolve each k_x row along wavelength (= descending frequency)
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(map.points.len());
        for (i, &kxi) in kx.iter().enumerate() {
            let mut lambdas: Vec<f64> = Vec::with_capacity(nu.len());
            let mut r_row: Vec<f64> = Vec::with_capacity(nu.len());
            let mut t_row: Vec<f64> = Vec::with_capacity(nu.len());
            for j in (0..nu.len()).rev() {
                let p = map.point(i, j);
                lambdas.push(1.0 / p.nu_over_c);
                r_row.push(p.r_power);
                t_row.push(p.t_power);
            }
            let r_conv = convolve_spectrometer(&lambdas, &r_row, fwhm_nm * 1e-9).map_err(numeric)?;
            let t_conv = convolve_spectrometer(&lambdas, &t_row, fwhm_nm * 1e-9).map_err(numeric)?;
            for (k, &lambda) in lambdas.iter().enumerate().rev() {
                rows.push(vec![kxi, 1.0 / lambda, r_conv[k], t_conv[k]]);
            }
        }
        write_table(
            ctx,
            "band_map_convolved",
            &[format!(
                "map convolved with a {fwhm_nm} nm FWHM Gaussian spectrometer response"
            )],
            &["k_x", "nu_over_c", "R", "T"],
            &rows,
        )?;
    }

    #[derive(Serialize)]
    struct Report<'a> {
        config: &'a RunConfig,
        points: usize,
        truncation_orders: usize,
    }
    write_report(
        ctx,
        "band_map_report.json",
        &Report {
            config: &ctx.config,
            points: map.points.len(),
            truncation_orders: trunc.order_count(),
        },
    )
}

// ---------------------------------------------------------------------------
// fano-fit

fn read_spectrum_csv(path: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("lambda") {
            continue;
        }
        let mut parts = line.split(',');
        let lambda_nm: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| CliError::Config(format!("bad spectrum row: {line}")))?;
        let t: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| CliError::Config(format!("bad spectrum row: {line}")))?;
        rows.push((lambda_nm * 1e-9, t));
    }
    Ok(rows)
}

pub fn fano_fit(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx
        .config
        .fano_fit
        .clone()
        .ok_or_else(|| CliError::Config("missing [fano_fit] section".into()))?;
    let branch = branch_from_i8(cfg.branch)?;

    let samples: Vec<(f64, f64)> = match &cfg.spectrum_path {
        Some(path) => read_spectrum_csv(path)?,
        None => {
            let crystal = ctx.config.crystal_spec()?;
            let trunc = ctx.config.truncation();
            if cfg.samples < 20 {
                return Err(CliError::Config("fano_fit.samples must be at least 20".into()));
            }
            use rayon::prelude::*;
            let lambdas: Vec<f64> = (0..cfg.samples)
                .map(|i| {
                    (cfg.lambda_min_nm
                        + (cfg.lambda_max_nm - cfg.lambda_min_nm) * i as f64
                            / (cfg.samples - 1) as f64)
                        * 1e-9
                })
                .collect();
            let result: Result<Vec<(f64, f64)>, CliError> = lambdas
                .par_iter()
                .map(|&lambda| {
                    let exc = PlaneWaveExcitation {
                        wavelength: lambda,
                        k_x: 0.0,
                        polarization: Polarization::S,
                    };
                    let res = solve(&crystal, &exc, &trunc).map_err(numeric)?;
                    Ok((lambda, res.t_total))
                })
                .collect();
            result?
        }
    };

    let fit = fit_fano_transmission(&samples, branch).map_err(numeric)?;
    let zero = zero_transmission_wavelength(&fit.params).map_err(numeric)?;

    #[derive(Serialize)]
    struct Report<'a> {
        config: &'a RunConfig,
        fano_params: FanoParamsRecord,
        lambda1_nm: f64,
        closed_form_lambda1_nm: [f64; 2],
        matched_sign: i8,
        residual_rms: f64,
        samples: usize,
    }
    write_report(
        ctx,
        "fano_fit.json",
        &Report {
            config: &ctx.config,
            fano_params: FanoParamsRecord::from(&fit.params),
            lambda1_nm: zero.lambda1 * 1e9,
            closed_form_lambda1_nm: [zero.closed_form_plus * 1e9, zero.closed_form_minus * 1e9],
            matched_sign: zero.matched_sign,
            residual_rms: fit.residual_rms,
            samples: samples.len(),
        },
    )
}

// ---------------------------------------------------------------------------
// cavity-scan

pub fn cavity_scan(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx
        .config
        .cavity_scan
        .clone()
        .ok_or_else(|| CliError::Config("missing [cavity_scan] section".into()))?;
    let input = cfg.input_mirror()?;
    let end = match cfg.membrane.as_str() {
        "fixed" => {
            let one_minus_r = cfg.membrane_one_minus_r_ppm.ok_or_else(|| {
                CliError::Config("fixed membrane requires membrane_one_minus_r_ppm".into())
            })? * 1e-6;
            let t_mem = cfg.membrane_transmission_ppm.ok_or_else(|| {
                CliError::Config("fixed membrane requires membrane_transmission_ppm".into())
            })? * 1e-6;
            if t_mem > one_minus_r {
                return Err(CliError::Config(
                    "membrane transmission exceeds its total 1 - R".into(),
                ));
            }
            MembraneModel::Fixed(TwoPortScattering {
                r: Complex64::new((1.0 - one_minus_r).sqrt(), 0.0),
                t: Complex64::new(0.0, t_mem.sqrt()),
            })
        }
        "fano" => {
            let params = ctx
                .config
                .fano_params
                .clone()
                .ok_or_else(|| {
                    CliError::Config("membrane = \"fano\" requires [fano_params]".into())
                })?
                .to_params()?;
            MembraneModel::Fano(params)
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown membrane \"{other}\" (expected fixed | fano)"
            )))
        }
    };

    let cavity = SingleEndedCavity {
        length: cfg.length_mm * 1e-3,
        input,
        end,
    };
    let axis = ScanAxisSpec::spanning_fsr(
        cfg.lambda_start_nm * 1e-9,
        cavity.length,
        cfg.span_fsr,
        cfg.samples,
    );
    let trace = synthesize_scan(
        &CavityUnderTest::SingleEnded(&cavity),
        &axis,
        &SidebandSpec {
            offset_hz: cfg.sideband_offset_mhz * 1e6,
            power_ratio: cfg.sideband_power_ratio,
        },
        &NoiseModel {
            rms: cfg.noise_rms,
            scan_speed_jitter: cfg.scan_speed_jitter,
        },
        ctx.seed(),
    )
    .map_err(numeric)?;

    // trace file
    let mut csv = String::new();
    let _ = writeln!(csv, "# axis_type = time");
    let _ = writeln!(csv, "# sideband_offset_hz = {:.6e}", trace.sideband_offset_hz);
    let _ = writeln!(
        csv,
        "# sideband_power_ratio = {:.6e}",
        trace.sideband_power_ratio
    );
    let _ = writeln!(csv, "# nu_start_hz = {:.10e}", trace.nu_start_hz);
    let _ = writeln!(csv, "axis,signal");
    for (x, s) in trace.axis.iter().zip(&trace.signal) {
        let _ = writeln!(csv, "{x:.10e},{s:.10e}");
    }
    atomic_write(&ctx.out("cavity_scan_trace.csv"), &csv)?;

    // reduction pipeline
    let max = trace.signal.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let windows = detect_peaks(&trace, cfg.prominence_fraction * max).map_err(numeric)?;
    let peaks: Vec<_> = windows
        .iter()
        .map(|w| fit_lorentzian_triplet(&trace, w))
        .collect::<Result<_, _>>()
        .map_err(numeric)?;
    let records = extract_finesse(&peaks, &trace).map_err(numeric)?;
    let budget = loss_decomposition(&records, input.power_transmission, None)
        .map_err(|e| CliError::Numeric(e.to_string()));

    let mean_rtl = records.iter().map(|r| r.rtl).sum::<f64>() / records.len() as f64;
    let mean_finesse = records.iter().map(|r| r.finesse).sum::<f64>() / records.len() as f64;

    #[derive(Serialize)]
    struct Report<'a> {
        config: &'a RunConfig,
        seed: u64,
        peaks: Vec<PeakRecord>,
        mean_rtl: f64,
        mean_finesse: f64,
        half_bandwidth_hz: f64,
        loss_budget: Option<LossBudget>,
        loss_budget_error: Option<String>,
        ground_truth: Option<pcs_scan::ScanGroundTruth>,
    }
    let (loss_budget, loss_budget_error) = match budget {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e.message().to_string())),
    };
    write_report(
        ctx,
        "cavity_scan_report.json",
        &Report {
            config: &ctx.config,
            seed: ctx.seed(),
            mean_rtl,
            mean_finesse,
            half_bandwidth_hz: half_bandwidth(cavity.length, mean_finesse),
            peaks: records,
            loss_budget,
            loss_budget_error,
            ground_truth: trace.ground_truth,
        },
    )
}

// ---------------------------------------------------------------------------
// mim-map

fn mim_map_grids(
    cav: &MimCavity,
    span_fsr: f64,
    detuning_points: usize,
    adaptive: bool,
) -> Result<Vec<f64>, CliError> {
    // center the detuning window between the two predicted branches
    let s = cav.membrane.scattering(cav.lambda_c);
    let nu_c = C / cav.lambda_c;
    let p_idx = longitudinal_index_near(2.0 * std::f64::consts::PI * nu_c, &s, cav.sub_length)
        .map_err(numeric)?;
    let modes = mim_eigenmodes(&s, &cav.mirror, cav.sub_length, p_idx).map_err(numeric)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let center = 0.5 * (modes.omega_plus + modes.omega_minus) / two_pi - nu_c;
    let fsr = fsr_frequency(cav.sub_length);
    let (span, points) = if adaptive {
        // widen to keep both branches inside, densify to resolve the
        // narrower one
        let splitting = (modes.omega_plus - modes.omega_minus).abs() / two_pi;
        let width_max = modes.gamma_plus.max(modes.gamma_minus) / two_pi;
        let width_min = modes.gamma_plus.min(modes.gamma_minus).abs() / two_pi;
        let span = (span_fsr * fsr).max(1.6 * splitting + 30.0 * width_max);
        let points = detuning_points
            .max((span / width_min.max(1e3) * 10.0) as usize)
            .min(120_001);
        (span, points)
    } else {
        (span_fsr * fsr, detuning_points)
    };
    let half = 0.5 * span;
    Ok((0..points)
        .map(|i| center - half + 2.0 * half * i as f64 / (points - 1) as f64)
        .collect())
}

pub fn mim_map(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx
        .config
        .mim_map
        .clone()
        .ok_or_else(|| CliError::Config("missing [mim_map] section".into()))?;
    if cfg.delta_l_points < 1 || cfg.detuning_points < 16 {
        return Err(CliError::Config("mim_map grids too small".into()));
    }
    let mirror = cfg.mirror()?;
    let params = ctx
        .config
        .fano_params
        .clone()
        .ok_or_else(|| CliError::Config("mim-map requires [fano_params]".into()))?
        .to_params()?;

    let build_cavity = |lambda_c: f64| MimCavity {
        sub_length: cfg.sub_length_mm * 1e-3,
        delta_l: 0.0,
        mirror,
        membrane: MembraneModel::Fano(params),
        lambda_c,
    };

    // main map at the configured center wavelength
    let cav = build_cavity(cfg.lambda_c_nm * 1e-9);
    let delta_l: Vec<f64> = (0..cfg.delta_l_points)
        .map(|i| {
            if cfg.delta_l_points == 1 {
                0.0
            } else {
                (-0.5 + i as f64 / (cfg.delta_l_points - 1) as f64) * cfg.delta_l_span_nm * 1e-9
            }
        })
        .collect();
    let detuning = mim_map_grids(&cav, cfg.detuning_span_fsr, cfg.detuning_points, false)?;
    let map = mim_transmission_map(&cav, &delta_l, &detuning).map_err(numeric)?;

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(map.values.len());
    for (i, &dl) in map.delta_l.iter().enumerate() {
        for (j, &dn) in map.detuning.iter().enumerate() {
            rows.push(vec![dl * 1e9, dn / map.fsr, map.value(i, j)]);
        }
    }
    write_table(
        ctx,
        "mim_map",
        &[
            "membrane-in-the-middle transmission map".to_string(),
            format!(
                "sub_length_mm = {}, lambda_c_nm = {}",
                cfg.sub_length_mm, cfg.lambda_c_nm
            ),
        ],
        &["delta_l_nm", "detuning_over_fsr", "transmission"],
        &rows,
    )?;

    let crossing = fit_avoided_crossing(&map).map_err(numeric)?;

    // eigenmode pairs and the loss-width inference over the scan-center sweep
    let lambda_cs: Vec<f64> = match (cfg.lambda_c_scan_nm, cfg.lambda_c_points) {
        (Some([first, last]), Some(points)) if points >= 2 => (0..points)
            .map(|i| (first + (last - first) * i as f64 / (points - 1) as f64) * 1e-9)
            .collect(),
        _ => vec![cfg.lambda_c_nm * 1e-9],
    };

    use rayon::prelude::*;
    let sweep: Result<Vec<(f64, ModePair, CrossingFit)>, CliError> = lambda_cs
        .par_iter()
        .map(|&lambda_c| {
            let cav = build_cavity(lambda_c);
            let s = cav.membrane.scattering(lambda_c);
            let nu_c = C / lambda_c;
            let p_idx =
                longitudinal_index_near(2.0 * std::f64::consts::PI * nu_c, &s, cav.sub_length)
                    .map_err(numeric)?;
            let modes = mim_eigenmodes(&s, &cav.mirror, cav.sub_length, p_idx).map_err(numeric)?;
            let detuning = mim_map_grids(&cav, cfg.detuning_span_fsr, cfg.detuning_points, true)?;
            let dl7: Vec<f64> = (-3..=3).map(|i| i as f64 * 0.05e-9).collect();
            let small_map = mim_transmission_map(&cav, &dl7, &detuning).map_err(numeric)?;
            let fit = fit_avoided_crossing(&small_map).map_err(numeric)?;
            Ok((lambda_c, modes, fit))
        })
        .collect();
    let sweep = sweep?;

    // lambda1 of the lossless version of the membrane model
    let lossless = pcs_core::fano::FanoParams {
        gamma_prime: 0.0,
        ..params
    };
    let lambda1 = zero_transmission_wavelength(&lossless)
        .map(|z| z.lambda1)
        .unwrap_or(params.lambda0);

    let gamma_prime = if sweep.len() >= 3 {
        let records: Vec<(f64, CrossingFit)> =
            sweep.iter().map(|(lc, _, fit)| (*lc, *fit)).collect();
        infer_gamma_prime(
            &records,
            params.gamma,
            lambda1,
            mirror.power_transmission + mirror.excess_loss,
            cfg.sub_length_mm * 1e-3,
        )
        .ok()
    } else {
        None
    };

    #[derive(Serialize)]
    struct SweepRow {
        lambda_c_nm: f64,
        mode_pair: ModePair,
        splitting_hz: f64,
        signed_delta_nu_hz: f64,
        gamma_upper_hz: f64,
        gamma_lower_hz: f64,
        resolved: bool,
    }
    #[derive(Serialize)]
    struct Report<'a> {
        config: &'a RunConfig,
        fsr_hz: f64,
        crossing_at_center: CrossingFit,
        sweep: Vec<SweepRow>,
        lambda1_nm: f64,
        gamma_prime_fit: Option<pcs_scan::GammaPrimeFit>,
    }
    let sweep_rows: Vec<SweepRow> = sweep
        .iter()
        .map(|(lc, modes, fit)| SweepRow {
            lambda_c_nm: lc * 1e9,
            mode_pair: *modes,
            splitting_hz: fit.splitting,
            signed_delta_nu_hz: signed_delta_nu(fit, *lc, lambda1),
            gamma_upper_hz: fit.gamma_upper_hz,
            gamma_lower_hz: fit.gamma_lower_hz,
            resolved: fit.resolved,
        })
        .collect();
    write_report(
        ctx,
        "mim_map_report.json",
        &Report {
            config: &ctx.config,
            fsr_hz: map.fsr,
            crossing_at_center: crossing,
            sweep: sweep_rows,
            lambda1_nm: lambda1 * 1e9,
            gamma_prime_fit: gamma_prime,
        },
    )
}
