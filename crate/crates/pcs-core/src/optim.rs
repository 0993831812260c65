//! Small dense nonlinear least-squares engine and scalar solvers.
//!
//! The fit problems in this workspace are low-dimensional (at most ~8
//! parameters), so a plain Levenberg-Marquardt loop with a finite-difference
//! Jacobian and a dense normal-equation solve is both sufficient and easy to
//! keep deterministic.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("fit diverged: {0}")]
    Diverged(String),
    #[error("invalid fit setup: {0}")]
    InvalidSetup(String),
}

/// Options for [`levmar`].
#[derive(Debug, Clone)]
pub struct LevMarOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease falls below this.
    pub cost_tol: f64,
    /// Stop when the scaled step norm falls below this.
    pub step_tol: f64,
    pub initial_damping: f64,
}

impl Default for LevMarOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            cost_tol: 1e-14,
            step_tol: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

/// Result of a converged Levenberg-Marquardt run.
#[derive(Debug, Clone)]
pub struct LevMarFit {
    pub params: Vec<f64>,
    /// Final cost, `0.5 * sum(residual^2)`.
    pub cost: f64,
    pub residual_rms: f64,
    pub iterations: usize,
    /// Covariance of the parameters, `sigma^2 (J^T J)^-1`, row-major;
    /// `None` when the normal matrix is singular at the optimum.
    pub covariance: Option<Vec<f64>>,
}

impl LevMarFit {
    /// 1-sigma uncertainty of parameter `i` from the covariance diagonal.
    pub fn parameter_sigma(&self, i: usize) -> Option<f64> {
        let n = self.params.len();
        self.covariance
            .as_ref()
            .map(|c| c[i * n + i].max(0.0).sqrt())
    }
}

/// Minimize `0.5 * ||residuals(params)||^2` starting from `initial`.
///
/// `residuals` writes `n_residuals` values into its output slice.
pub fn levmar<F>(
    mut residuals: F,
    n_residuals: usize,
    initial: &[f64],
    opts: &LevMarOptions,
) -> Result<LevMarFit, FitError>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = initial.len();
    if n == 0 || n_residuals < n {
        return Err(FitError::InvalidSetup(format!(
            "{n_residuals} residuals for {n} parameters"
        )));
    }

    let mut params = initial.to_vec();
    let mut res = vec![0.0; n_residuals];
    let mut res_trial = vec![0.0; n_residuals];
    residuals(&params, &mut res);
    let mut cost = 0.5 * res.iter().map(|r| r * r).sum::<f64>();
    if !cost.is_finite() {
        return Err(FitError::Diverged("non-finite cost at start".into()));
    }

    let mut damping = opts.initial_damping;
    let mut jac = vec![0.0; n_residuals * n];
    let mut iterations = 0;

    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        numeric_jacobian(&mut residuals, &params, &res, &mut jac, n_residuals);

        // Normal equations J^T J and gradient J^T r.
        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for k in 0..n_residuals {
            for i in 0..n {
                let jki = jac[k * n + i];
                jtr[i] += jki * res[k];
                for j in i..n {
                    jtj[i * n + j] += jki * jac[k * n + j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                jtj[i * n + j] = jtj[j * n + i];
            }
        }

        let grad_norm = jtr.iter().map(|g| g.abs()).fold(0.0, f64::max);
        if grad_norm < 1e-16 * (1.0 + cost) {
            break;
        }

        let mut improved = false;
        for _ in 0..24 {
            // (J^T J + damping * diag(J^T J)) step = -J^T r
            let mut a = jtj.clone();
            for i in 0..n {
                let d = jtj[i * n + i];
                a[i * n + i] = d + damping * d.max(1e-30);
            }
            let step = match solve_dense(&mut a, &jtr, n) {
                Some(mut s) => {
                    for v in &mut s {
                        *v = -*v;
                    }
                    s
                }
                None => {
                    damping *= 10.0;
                    continue;
                }
            };

            let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + s).collect();
            residuals(&trial, &mut res_trial);
            let trial_cost = 0.5 * res_trial.iter().map(|r| r * r).sum::<f64>();

            if trial_cost.is_finite() && trial_cost < cost {
                let step_small = step
                    .iter()
                    .zip(&params)
                    .all(|(s, p)| s.abs() <= opts.step_tol * (p.abs() + opts.step_tol));
                let cost_drop = (cost - trial_cost) / cost.max(1e-300);
                params = trial;
                std::mem::swap(&mut res, &mut res_trial);
                cost = trial_cost;
                damping = (damping * 0.3).max(1e-14);
                improved = true;
                if step_small || cost_drop < opts.cost_tol {
                    iterations = iter + 1;
                    return finish(residuals, params, res, cost, iterations, n_residuals);
                }
                break;
            }
            damping *= 10.0;
            if damping > 1e14 {
                break;
            }
        }
        if !improved {
            break;
        }
    }

    finish(residuals, params, res, cost, iterations, n_residuals)
}

fn finish<F>(
    mut residuals: F,
    params: Vec<f64>,
    res: Vec<f64>,
    cost: f64,
    iterations: usize,
    n_residuals: usize,
) -> Result<LevMarFit, FitError>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if !cost.is_finite() {
        return Err(FitError::Diverged("non-finite cost".into()));
    }
    let n = params.len();
    let mut jac = vec![0.0; n_residuals * n];
    numeric_jacobian(&mut residuals, &params, &res, &mut jac, n_residuals);
    let mut jtj = vec![0.0; n * n];
    for k in 0..n_residuals {
        for i in 0..n {
            for j in 0..n {
                jtj[i * n + j] += jac[k * n + i] * jac[k * n + j];
            }
        }
    }
    let dof = (n_residuals - n).max(1);
    let sigma2 = 2.0 * cost / dof as f64;
    let covariance = invert_dense(&jtj, n).map(|inv| inv.iter().map(|v| v * sigma2).collect());

    Ok(LevMarFit {
        residual_rms: (2.0 * cost / n_residuals as f64).sqrt(),
        params,
        cost,
        iterations,
        covariance,
    })
}

/// Central-difference Jacobian. `base` is the residual at `params` (used only
/// to scale the steps).
fn numeric_jacobian<F>(
    residuals: &mut F,
    params: &[f64],
    _base: &[f64],
    jac: &mut [f64],
    n_residuals: usize,
) where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = params.len();
    let mut plus = vec![0.0; n_residuals];
    let mut minus = vec![0.0; n_residuals];
    let mut probe = params.to_vec();
    for i in 0..n {
        let h = 1e-6 * params[i].abs().max(1e-9);
        probe[i] = params[i] + h;
        residuals(&probe, &mut plus);
        probe[i] = params[i] - h;
        residuals(&probe, &mut minus);
        probe[i] = params[i];
        let inv = 1.0 / (2.0 * h);
        for k in 0..n_residuals {
            jac[k * n + i] = (plus[k] - minus[k]) * inv;
        }
    }
}

/// Gaussian elimination with partial pivoting; consumes `a` (n x n, row
/// major). Returns `None` on a (numerically) singular system.
fn solve_dense(a: &mut [f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut x = b.to_vec();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            x.swap(col, pivot);
        }
        let inv = 1.0 / a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= f * a[col * n + j];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for j in col + 1..n {
            s -= a[col * n + j] * x[j];
        }
        x[col] = s / a[col * n + col];
    }
    Some(x)
}

fn invert_dense(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let mut work = a.to_vec();
        let x = solve_dense(&mut work, &e, n)?;
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    Some(inv)
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
///
/// Returns `(x_min, f(x_min))` once the bracket is narrower than `tol`. Note
/// the usual caveat for smooth minima with f(x_min) != 0: once the function
/// values become indistinguishable in double precision the abscissa is only
/// resolved to about sqrt(eps) times its scale, whatever `tol` says.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Bisection root of a sign-changing function on `[a, b]` to absolute
/// tolerance `tol` on the abscissa.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Option<f64> {
    let (mut lo, mut hi) = (a, b);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid == 0.0 {
            return Some(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
