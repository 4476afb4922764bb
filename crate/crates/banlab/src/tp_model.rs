//! Training-performance model: session performance is normal around a
//! line in preparedness, observed through per-session measurement noise.
//!
//! ```text
//! value_i ~ N(alpha + beta * W(day_i),  sigma^2 + lambda_i)
//! ```
//!
//! The six free parameters (alpha, beta, sigma, k_f, tau_a, tau_f) are
//! estimated by maximum likelihood. The measurement variances lambda_i
//! come from the metric stage and are never re-estimated here; sigma and
//! a common inflation of the lambdas would not be separately
//! identifiable.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::banister::{preparedness, BanisterParams};
use crate::error::{Error, Result};
use crate::metrics::MetricSeries;
use crate::optim::{nelder_mead_restarted, numerical_hessian, NelderMeadOptions};
use crate::training_load::DailyLoadSeries;

/// Grid of fatigue scales probed when seeding the optimiser.
pub const SEED_GRID_KF: [f64; 5] = [1.25, 1.5, 2.0, 3.0, 4.0];
/// Grid of fitness time constants (days).
pub const SEED_GRID_TAU_A: [f64; 5] = [15.0, 30.0, 60.0, 90.0, 150.0];
/// Grid of fatigue time constants (days).
pub const SEED_GRID_TAU_F: [f64; 5] = [1.0, 3.0, 7.0, 15.0, 30.0];

/// Multi-start log-parameter jitter half-width.
const JITTER: f64 = 0.3;

/// Two converged starts must agree in log-likelihood within this for the
/// fit to be declared converged.
const START_AGREEMENT: f64 = 1e-4;

/// Relative step for the standard-error Hessian.
const HESSIAN_REL_STEP: f64 = 1e-4;

/// All parameters of the training-performance model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TpParams {
    /// Location of the performance metric (its units).
    pub alpha: f64,
    /// Metric units per unit preparedness.
    pub beta: f64,
    /// Latent performance standard deviation (metric units).
    pub sigma: f64,
    /// Impulse-response shape.
    pub banister: BanisterParams,
}

impl TpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidParams(format!(
                "sigma must be positive and finite, got {}",
                self.sigma
            )));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::InvalidParams("alpha and beta must be finite".into()));
        }
        self.banister.validate()
    }
}

/// Preparedness at each metric day under the given shape parameters.
fn w_at_days(
    loads: &DailyLoadSeries,
    banister: &BanisterParams,
    days: &[u32],
) -> Result<Vec<f64>> {
    let horizon = days.iter().copied().max().unwrap_or(1);
    let series = preparedness(loads, banister, horizon)?;
    Ok(days.iter().map(|&d| series.on_day(d)).collect())
}

/// Log-likelihood of the observed metric series: only days with a
/// recorded session contribute, and each contributes a normal term with
/// variance sigma^2 + lambda_i.
pub fn log_likelihood(
    metrics: &MetricSeries,
    loads: &DailyLoadSeries,
    params: &TpParams,
) -> Result<f64> {
    params.validate()?;
    check_days(metrics, loads)?;
    let w = w_at_days(loads, &params.banister, &metrics.day_numbers)?;
    log_likelihood_given_w(metrics, &w, params.alpha, params.beta, params.sigma * params.sigma)
}

fn check_days(metrics: &MetricSeries, loads: &DailyLoadSeries) -> Result<()> {
    let max_day = metrics.day_numbers.iter().copied().max().unwrap_or(0);
    if max_day > loads.horizon() {
        return Err(Error::InvalidParams(format!(
            "metric day {max_day} lies beyond the {}-day load series",
            loads.horizon()
        )));
    }
    Ok(())
}

fn log_likelihood_given_w(
    metrics: &MetricSeries,
    w: &[f64],
    alpha: f64,
    beta: f64,
    sigma_sq: f64,
) -> Result<f64> {
    let n = metrics.len() as f64;
    let mut acc = -0.5 * n * (2.0 * std::f64::consts::PI).ln();
    for ((value, lambda), wi) in metrics.values.iter().zip(&metrics.variances).zip(w) {
        let var = sigma_sq + lambda;
        if !(var.is_finite() && var > 0.0) {
            return Err(Error::InvalidParams(format!(
                "non-positive observation variance {var}"
            )));
        }
        let resid = value - alpha - beta * wi;
        acc -= 0.5 * (var.ln() + resid * resid / var);
    }
    Ok(acc)
}

/// Weighted-least-squares optimum of (alpha, beta) for fixed shape and
/// sigma; profiling these two out exactly leaves a 4-dimensional search.
fn profile_alpha_beta(metrics: &MetricSeries, w: &[f64], sigma_sq: f64) -> (f64, f64) {
    let mut sum_u = 0.0;
    let mut sum_uw = 0.0;
    let mut sum_uy = 0.0;
    for ((value, lambda), wi) in metrics.values.iter().zip(&metrics.variances).zip(w) {
        let u = 1.0 / (sigma_sq + lambda);
        sum_u += u;
        sum_uw += u * wi;
        sum_uy += u * value;
    }
    let w_bar = sum_uw / sum_u;
    let y_bar = sum_uy / sum_u;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((value, lambda), wi) in metrics.values.iter().zip(&metrics.variances).zip(w) {
        let u = 1.0 / (sigma_sq + lambda);
        sxx += u * (wi - w_bar) * (wi - w_bar);
        sxy += u * (wi - w_bar) * (value - y_bar);
    }
    if sxx <= 0.0 || !sxx.is_finite() {
        // constant preparedness: the slope is unidentified, fall back to a
        // pure location fit
        return (y_bar, 0.0);
    }
    let beta = sxy / sxx;
    (y_bar - beta * w_bar, beta)
}

/// Starting point chosen by correlating the metric with preparedness
/// over a coarse parameter grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSeed {
    pub params: BanisterParams,
    /// Signed Pearson correlation at the best grid point; negative for
    /// metrics that fall as fitness rises.
    pub correlation: f64,
}

/// Pick starting shape parameters by maximising |corr(value, W)| over the
/// coarse grid, then sliding each axis to the vertex of a local parabola
/// in log-parameter space (clamped to the grid's bounding box). Exact
/// ties keep the lexicographically smallest grid point.
pub fn seed_by_grid(metrics: &MetricSeries, loads: &DailyLoadSeries) -> Result<GridSeed> {
    if metrics.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "{} sessions are too few to correlate against the grid (need 8)",
            metrics.len()
        )));
    }
    check_days(metrics, loads)?;
    let y = &metrics.values;
    let n = y.len() as f64;
    let y_bar = y.iter().sum::<f64>() / n;
    let syy: f64 = y.iter().map(|v| (v - y_bar) * (v - y_bar)).sum();
    if syy <= 0.0 {
        return Err(Error::Degenerate(
            "metric series has zero variance; no correlation exists".into(),
        ));
    }

    let mut corr = [[[f64::NAN; 5]; 5]; 5];
    let mut best: Option<(usize, usize, usize, f64)> = None;
    for (i, &k_f) in SEED_GRID_KF.iter().enumerate() {
        for (j, &tau_a) in SEED_GRID_TAU_A.iter().enumerate() {
            for (k, &tau_f) in SEED_GRID_TAU_F.iter().enumerate() {
                let params = BanisterParams { k_f, tau_a, tau_f };
                let w = w_at_days(loads, &params, &metrics.day_numbers)?;
                let w_bar = w.iter().sum::<f64>() / n;
                let sww: f64 = w.iter().map(|v| (v - w_bar) * (v - w_bar)).sum();
                if sww <= 0.0 {
                    continue;
                }
                let swy: f64 = w.iter().zip(y).map(|(wi, yi)| (wi - w_bar) * (yi - y_bar)).sum();
                let r = swy / (sww * syy).sqrt();
                corr[i][j][k] = r;
                if best.is_none_or(|(_, _, _, b)| r.abs() > b.abs()) {
                    best = Some((i, j, k, r));
                }
            }
        }
    }
    let (bi, bj, bk, r) = best.ok_or_else(|| {
        Error::Degenerate("no grid point produced varying preparedness".into())
    })?;

    let axis = |grid: &[f64; 5], idx: usize, value_at: &dyn Fn(usize) -> f64| -> f64 {
        if idx == 0 || idx == 4 {
            return grid[idx];
        }
        let z = [grid[idx - 1].ln(), grid[idx].ln(), grid[idx + 1].ln()];
        let f = [
            value_at(idx - 1).abs(),
            value_at(idx).abs(),
            value_at(idx + 1).abs(),
        ];
        if f.iter().any(|v| !v.is_finite()) {
            return grid[idx];
        }
        let d1 = z[1] - z[0];
        let d2 = z[1] - z[2];
        let num = d1 * d1 * (f[1] - f[2]) - d2 * d2 * (f[1] - f[0]);
        let den = d1 * (f[1] - f[2]) - d2 * (f[1] - f[0]);
        if den.abs() < 1e-12 {
            return grid[idx];
        }
        let vertex = z[1] - 0.5 * num / den;
        vertex.clamp(z[0], z[2]).exp()
    };

    let params = BanisterParams::new(
        axis(&SEED_GRID_KF, bi, &|i| corr[i][bj][bk]),
        axis(&SEED_GRID_TAU_A, bj, &|j| corr[bi][j][bk]),
        axis(&SEED_GRID_TAU_F, bk, &|k| corr[bi][bj][k]),
    )?;
    Ok(GridSeed {
        params,
        correlation: r,
    })
}

/// Options controlling the multi-start maximum-likelihood fit.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Seed for every stochastic element (start jitter); identical inputs
    /// and seed give a bit-identical result.
    pub rng_seed: u64,
    /// Grid seed plus this many minus one jittered restarts.
    pub n_starts: usize,
    /// Run starts on threads; the merge rule makes the result identical
    /// to the serial one.
    pub parallel: bool,
    pub max_iter: usize,
    /// Simplex log-likelihood spread at convergence.
    pub f_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            rng_seed: 42,
            n_starts: 9,
            parallel: false,
            max_iter: 4000,
            f_tol: 1e-8,
        }
    }
}

/// Per-start outcome, kept for diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartDiagnostic {
    pub start: usize,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Standard errors on the natural scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StandardErrors {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub k_f: f64,
    pub tau_a: f64,
    pub tau_f: f64,
}

/// Maximum-likelihood estimates with uncertainty and diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub params: TpParams,
    /// Absent when the observed information is not positive definite.
    pub standard_errors: Option<StandardErrors>,
    /// 6x6 covariance in (alpha, beta, sigma, k_f, tau_a, tau_f) order.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub log_likelihood: f64,
    /// True when the two best converged starts agree in log-likelihood.
    pub converged: bool,
    pub n_starts: usize,
    pub best_start: usize,
    /// Fitted performance change between the least and most trained
    /// session days: beta * (max W - min W).
    pub delta_w_progress: f64,
    pub grid_seed: GridSeed,
    pub starts: Vec<StartDiagnostic>,
    pub warnings: Vec<String>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent substream seed, stable across platforms.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Search coordinates: (ln sigma, ln k_f, ln tau_a, ln tau_f). Alpha and
/// beta are profiled out exactly at every evaluation.
fn unpack(x: &[f64]) -> (f64, BanisterParams) {
    (
        x[0].exp(),
        BanisterParams {
            k_f: x[1].exp(),
            tau_a: x[2].exp(),
            tau_f: x[3].exp(),
        },
    )
}

/// Fit the model by profiled, multi-start maximum likelihood.
pub fn fit(metrics: &MetricSeries, loads: &DailyLoadSeries, options: &FitOptions) -> Result<FitResult> {
    if options.n_starts == 0 {
        return Err(Error::InvalidParams("need at least one start".into()));
    }
    check_days(metrics, loads)?;
    let mut warnings = Vec::new();
    if metrics.len() < 10 {
        warnings.push(format!(
            "only {} usable sessions; estimates may be unstable",
            metrics.len()
        ));
    }
    let grid_seed = seed_by_grid(metrics, loads)?;

    // Data-driven sigma start: unweighted residual variance around the
    // seed-shape line, less the average measurement variance.
    let w_seed = w_at_days(loads, &grid_seed.params, &metrics.day_numbers)?;
    let (a0, b0) = profile_alpha_beta(metrics, &w_seed, 0.0);
    let n = metrics.len() as f64;
    let resid_var = metrics
        .values
        .iter()
        .zip(&w_seed)
        .map(|(y, w)| {
            let r = y - a0 - b0 * w;
            r * r
        })
        .sum::<f64>()
        / n;
    let mean_lambda = metrics.variances.iter().sum::<f64>() / n;
    let sigma0_sq = (resid_var - mean_lambda).max(0.1 * resid_var).max(1e-12);

    let base = [
        0.5 * sigma0_sq.ln(),
        grid_seed.params.k_f.ln(),
        grid_seed.params.tau_a.ln(),
        grid_seed.params.tau_f.ln(),
    ];
    let starts: Vec<[f64; 4]> = (0..options.n_starts)
        .map(|k| {
            if k == 0 {
                return base;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(options.rng_seed, k as u64));
            let mut x = base;
            for v in &mut x {
                *v += rng.gen_range(-JITTER..JITTER);
            }
            x
        })
        .collect();

    let objective = |x: &[f64]| -> f64 {
        let (sigma, banister) = unpack(x);
        let Ok(w) = w_at_days(loads, &banister, &metrics.day_numbers) else {
            return f64::INFINITY;
        };
        let sigma_sq = sigma * sigma;
        let (alpha, beta) = profile_alpha_beta(metrics, &w, sigma_sq);
        match log_likelihood_given_w(metrics, &w, alpha, beta, sigma_sq) {
            Ok(ll) => -ll,
            Err(_) => f64::INFINITY,
        }
    };
    let nm_opts = NelderMeadOptions {
        max_iter: options.max_iter,
        f_tol: options.f_tol,
        initial_step: 0.25,
    };
    let run_start = |x0: &[f64; 4]| nelder_mead_restarted(objective, x0, &nm_opts, 6);

    let results: Vec<crate::optim::NelderMeadResult> = if options.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = starts
                .iter()
                .map(|x0| scope.spawn(move || run_start(x0)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("start panicked")).collect()
        })
    } else {
        starts.iter().map(run_start).collect()
    };

    let diagnostics: Vec<StartDiagnostic> = results
        .iter()
        .enumerate()
        .map(|(k, r)| StartDiagnostic {
            start: k,
            log_likelihood: -r.f,
            converged: r.converged && r.f.is_finite(),
            iterations: r.iterations,
        })
        .collect();

    let mut converged_starts: Vec<&StartDiagnostic> =
        diagnostics.iter().filter(|d| d.converged).collect();
    if converged_starts.is_empty() {
        let detail: Vec<String> = diagnostics
            .iter()
            .map(|d| format!("start {}: logL={:.6} after {} iterations", d.start, d.log_likelihood, d.iterations))
            .collect();
        return Err(Error::NonConvergence(format!(
            "no start converged: {}",
            detail.join("; ")
        )));
    }
    converged_starts.sort_by(|a, b| {
        b.log_likelihood
            .total_cmp(&a.log_likelihood)
            .then(a.start.cmp(&b.start))
    });
    let best_start = converged_starts[0].start;
    let converged = if options.n_starts == 1 {
        converged_starts[0].converged
    } else {
        converged_starts.len() >= 2
            && (converged_starts[0].log_likelihood - converged_starts[1].log_likelihood).abs()
                <= START_AGREEMENT
    };

    let best_x = &results[best_start].x;
    let (sigma, banister) = unpack(best_x);
    let w = w_at_days(loads, &banister, &metrics.day_numbers)?;
    let (alpha, beta) = profile_alpha_beta(metrics, &w, sigma * sigma);
    let params = TpParams {
        alpha,
        beta,
        sigma,
        banister,
    };
    let best_ll = log_likelihood_given_w(metrics, &w, alpha, beta, sigma * sigma)?;

    // Standard errors: numerical Hessian of the full six-parameter
    // log-likelihood in (alpha, beta, log sigma, log k_f, log tau_a,
    // log tau_f), inverted and mapped to the natural scale.
    let eta = [
        alpha,
        beta,
        sigma.ln(),
        banister.k_f.ln(),
        banister.tau_a.ln(),
        banister.tau_f.ln(),
    ];
    let full_ll = |e: &[f64]| -> f64 {
        let p = TpParams {
            alpha: e[0],
            beta: e[1],
            sigma: e[2].exp(),
            banister: BanisterParams {
                k_f: e[3].exp(),
                tau_a: e[4].exp(),
                tau_f: e[5].exp(),
            },
        };
        match w_at_days(loads, &p.banister, &metrics.day_numbers) {
            Ok(wd) => log_likelihood_given_w(metrics, &wd, p.alpha, p.beta, p.sigma * p.sigma)
                .unwrap_or(f64::NEG_INFINITY),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    // The primary step can leave second differences near the evaluation
    // noise floor along weakly curved log-coordinates; escalate to
    // coarser steps when the information matrix comes out indefinite.
    let mut chol_opt = None;
    for (attempt, step) in [HESSIAN_REL_STEP, 1e-3, 1e-2].into_iter().enumerate() {
        let hessian = numerical_hessian(full_ll, &eta, step);
        if let Some(chol) = (-hessian).cholesky() {
            if attempt > 0 {
                warnings.push(format!(
                    "observed information needed a coarser differencing step ({step:e})"
                ));
            }
            chol_opt = Some(chol);
            break;
        }
    }
    let (standard_errors, covariance) = match chol_opt {
        Some(chol) => {
            let mut cov_eta = DMatrix::<f64>::identity(6, 6);
            chol.solve_mut(&mut cov_eta);
            // Jacobian of natural w.r.t. transformed coordinates
            let jac = [1.0, 1.0, sigma, banister.k_f, banister.tau_a, banister.tau_f];
            let mut cov_nat = vec![vec![0.0; 6]; 6];
            for r in 0..6 {
                for c in 0..6 {
                    cov_nat[r][c] = jac[r] * cov_eta[(r, c)] * jac[c];
                }
            }
            let diag_ok = (0..6).all(|k| cov_nat[k][k].is_finite() && cov_nat[k][k] >= 0.0);
            if diag_ok {
                let se = StandardErrors {
                    alpha: cov_nat[0][0].sqrt(),
                    beta: cov_nat[1][1].sqrt(),
                    sigma: cov_nat[2][2].sqrt(),
                    k_f: cov_nat[3][3].sqrt(),
                    tau_a: cov_nat[4][4].sqrt(),
                    tau_f: cov_nat[5][5].sqrt(),
                };
                (Some(se), Some(cov_nat))
            } else {
                warnings.push("observed information gave non-finite variances".into());
                (None, None)
            }
        }
        None => {
            warnings.push("observed information is not positive definite; no standard errors".into());
            (None, None)
        }
    };

    let w_max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w_min = w.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(FitResult {
        params,
        standard_errors,
        covariance,
        log_likelihood: best_ll,
        converged,
        n_starts: options.n_starts,
        best_start,
        delta_w_progress: beta * (w_max - w_min),
        grid_seed,
        starts: diagnostics,
        warnings,
    })
}

/// One day of the progression report.
#[derive(Debug, Clone, Serialize)]
pub struct ProgressionRow {
    pub day: u32,
    pub preparedness: f64,
    /// Fitted expected performance alpha + beta * W.
    pub fitted: f64,
    /// 95% pointwise band, when the parameter covariance is available.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Fitted trajectory with confidence bands and progression summaries.
#[derive(Debug, Clone, Serialize)]
pub struct ProgressionReport {
    pub delta_w_progress: f64,
    /// Progression relative to the least-trained expected performance.
    pub relative_progression: f64,
    pub rows: Vec<ProgressionRow>,
}

/// Expand a converged fit into per-day fitted values with 95% bands from
/// the parameter covariance (band variance by the delta method, with the
/// preparedness sensitivities to the shape parameters taken numerically).
pub fn progression_report(
    fit: &FitResult,
    metrics: &MetricSeries,
    loads: &DailyLoadSeries,
) -> Result<ProgressionReport> {
    if !fit.converged {
        return Err(Error::NonConvergence(
            "progression report requires a converged fit".into(),
        ));
    }
    let params = &fit.params;
    let horizon = loads
        .horizon()
        .max(metrics.day_numbers.iter().copied().max().unwrap_or(1));
    let series = preparedness(loads, &params.banister, horizon)?;

    // dW/d(shape) by central differences, one series per probe.
    let shape = [params.banister.k_f, params.banister.tau_a, params.banister.tau_f];
    let mut sensitivities: Vec<Vec<f64>> = Vec::with_capacity(3);
    for dim in 0..3 {
        let h = 1e-4 * shape[dim].abs().max(1.0);
        let mut plus = shape;
        let mut minus = shape;
        plus[dim] += h;
        minus[dim] -= h;
        let sp = preparedness(
            loads,
            &BanisterParams { k_f: plus[0], tau_a: plus[1], tau_f: plus[2] },
            horizon,
        )?;
        let sm = preparedness(
            loads,
            &BanisterParams { k_f: minus[0], tau_a: minus[1], tau_f: minus[2] },
            horizon,
        )?;
        sensitivities.push(
            sp.values()
                .iter()
                .zip(sm.values())
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect(),
        );
    }

    let rows: Vec<ProgressionRow> = (1..=horizon)
        .map(|day| {
            let idx = day as usize - 1;
            let w = series.values()[idx];
            let fitted = params.alpha + params.beta * w;
            let (lower, upper) = match &fit.covariance {
                Some(cov) => {
                    // gradient in (alpha, beta, sigma, k_f, tau_a, tau_f)
                    let grad = [
                        1.0,
                        w,
                        0.0,
                        params.beta * sensitivities[0][idx],
                        params.beta * sensitivities[1][idx],
                        params.beta * sensitivities[2][idx],
                    ];
                    let mut var = 0.0;
                    for r in 0..6 {
                        for c in 0..6 {
                            var += grad[r] * cov[r][c] * grad[c];
                        }
                    }
                    let half = 1.96 * var.max(0.0).sqrt();
                    (Some(fitted - half), Some(fitted + half))
                }
                None => (None, None),
            };
            ProgressionRow {
                day,
                preparedness: w,
                fitted,
                lower,
                upper,
            }
        })
        .collect();

    let w_days = w_at_days(loads, &params.banister, &metrics.day_numbers)?;
    let w_min = w_days.iter().copied().fold(f64::INFINITY, f64::min);
    let least_trained = params.alpha + params.beta * w_min;
    Ok(ProgressionReport {
        delta_w_progress: fit.delta_w_progress,
        relative_progression: fit.delta_w_progress / least_trained,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricKind;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn series(days: Vec<u32>, values: Vec<f64>, variances: Vec<f64>) -> MetricSeries {
        let indices = (1..=days.len()).collect();
        MetricSeries::new(MetricKind::Synthetic, indices, days, values, variances).unwrap()
    }

    fn simple_loads(n_days: u32, every: u32, magnitude: f64) -> DailyLoadSeries {
        let loads: Vec<f64> = (1..=n_days)
            .map(|d| if d % every == 0 { magnitude } else { 0.0 })
            .collect();
        DailyLoadSeries::raw(loads).unwrap()
    }

    /// Direct re-implementation of the likelihood for cross-checking.
    fn direct_log_likelihood(
        metrics: &MetricSeries,
        loads: &DailyLoadSeries,
        p: &TpParams,
    ) -> f64 {
        let (r_a, r_f) = (p.banister.rate_a(), p.banister.rate_f());
        let mut acc = -0.5 * metrics.len() as f64 * (2.0 * std::f64::consts::PI).ln();
        for k in 0..metrics.len() {
            let day = metrics.day_numbers[k];
            let mut w = 0.0;
            for j in 1..day {
                let lag = f64::from(day - j);
                w += loads.load_on_day(j)
                    * ((-r_a * lag).exp() - p.banister.k_f * (-r_f * lag).exp());
            }
            let var = p.sigma * p.sigma + metrics.variances[k];
            let resid = metrics.values[k] - p.alpha - p.beta * w;
            acc -= 0.5 * (var.ln() + resid * resid / var);
        }
        acc
    }

    #[test]
    fn likelihood_matches_direct_evaluation() {
        let mut rng = StdRng::seed_from_u64(101);
        let loads = DailyLoadSeries::raw((0..40).map(|_| rng.gen_range(0.0..2.0)).collect()).unwrap();
        let metrics = series(
            vec![5, 11, 18, 26, 33],
            (0..5).map(|_| rng.gen_range(180.0..260.0)).collect(),
            (0..5).map(|_| rng.gen_range(4.0..30.0)).collect(),
        );
        let p = TpParams {
            alpha: 210.0,
            beta: 4.0,
            sigma: 7.0,
            banister: BanisterParams::new(2.0, 30.0, 8.0).unwrap(),
        };
        let got = log_likelihood(&metrics, &loads, &p).unwrap();
        let want = direct_log_likelihood(&metrics, &loads, &p);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn single_exact_observation() {
        let loads = simple_loads(10, 3, 1.0);
        let p = TpParams {
            alpha: 200.0,
            beta: 5.0,
            sigma: 2.0,
            banister: BanisterParams::new(2.0, 20.0, 5.0).unwrap(),
        };
        let w = w_at_days(&loads, &p.banister, &[7]).unwrap()[0];
        let metrics = series(vec![7], vec![p.alpha + p.beta * w], vec![1e-12]);
        let ll = log_likelihood(&metrics, &loads, &p).unwrap();
        let expect = -0.5 * (2.0 * std::f64::consts::PI * p.sigma * p.sigma).ln();
        assert!((ll - expect).abs() < 1e-9, "{ll} vs {expect}");
    }

    #[test]
    fn zero_beta_ignores_shape_parameters() {
        let loads = simple_loads(60, 2, 1.5);
        let metrics = series(
            vec![4, 10, 16, 22, 30, 38, 44, 52],
            vec![201.0, 199.5, 200.2, 200.8, 199.1, 200.4, 200.0, 199.8],
            vec![9.0; 8],
        );
        let mk = |banister| TpParams {
            alpha: 200.0,
            beta: 0.0,
            sigma: 3.0,
            banister,
        };
        let a = log_likelihood(&metrics, &loads, &mk(BanisterParams::new(2.0, 40.0, 10.0).unwrap()))
            .unwrap();
        let b = log_likelihood(&metrics, &loads, &mk(BanisterParams::new(3.5, 90.0, 2.0).unwrap()))
            .unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn seed_recovers_grid_point_truth() {
        let truth = BanisterParams::new(2.0, 60.0, 7.0).unwrap();
        let loads = simple_loads(200, 2, 1.0);
        let days: Vec<u32> = (1..=40).map(|k| k * 5).collect();
        let w = w_at_days(&loads, &truth, &days).unwrap();
        let values: Vec<f64> = w.iter().map(|wi| 200.0 + 5.0 * wi).collect();
        let metrics = series(days, values, vec![1e-6; 40]);
        let seed = seed_by_grid(&metrics, &loads).unwrap();
        // within one grid cell of the truth on every axis
        assert!(seed.params.k_f >= 1.5 && seed.params.k_f <= 3.0, "{:?}", seed.params);
        assert!(seed.params.tau_a >= 30.0 && seed.params.tau_a <= 90.0, "{:?}", seed.params);
        assert!(seed.params.tau_f >= 3.0 && seed.params.tau_f <= 15.0, "{:?}", seed.params);
        assert!(seed.correlation > 0.99);
    }

    #[test]
    fn constant_metric_series_is_degenerate() {
        let loads = simple_loads(60, 2, 1.0);
        let metrics = series(
            (1..=10).map(|k| k * 5).collect(),
            vec![200.0; 10],
            vec![4.0; 10],
        );
        assert!(seed_by_grid(&metrics, &loads).is_err());
    }

    #[test]
    fn anti_correlated_series_has_negative_sign() {
        let truth = BanisterParams::new(2.0, 60.0, 7.0).unwrap();
        let loads = simple_loads(150, 2, 1.0);
        let days: Vec<u32> = (1..=30).map(|k| k * 5).collect();
        let w = w_at_days(&loads, &truth, &days).unwrap();
        let values: Vec<f64> = w.iter().map(|wi| 100.0 - wi).collect();
        let metrics = series(days, values, vec![1e-6; 30]);
        let seed = seed_by_grid(&metrics, &loads).unwrap();
        assert!(seed.correlation < -0.99, "corr = {}", seed.correlation);
    }

    #[test]
    fn optimum_dominates_grid_and_seeds() {
        let mut rng = StdRng::seed_from_u64(300);
        let truth = TpParams {
            alpha: 220.0,
            beta: 6.0,
            sigma: 4.0,
            banister: BanisterParams::new(2.2, 45.0, 9.0).unwrap(),
        };
        let loads = simple_loads(180, 2, 1.0);
        let days: Vec<u32> = (1..=45).map(|k| k * 4).collect();
        let w = w_at_days(&loads, &truth.banister, &days).unwrap();
        let values: Vec<f64> = w
            .iter()
            .map(|wi| truth.alpha + truth.beta * wi + rng.gen_range(-6.0..6.0))
            .collect();
        let metrics = series(days, values, vec![4.0; 45]);
        let result = fit(&metrics, &loads, &FitOptions::default()).unwrap();

        for &k_f in &SEED_GRID_KF {
            for &tau_a in &SEED_GRID_TAU_A {
                for &tau_f in &SEED_GRID_TAU_F {
                    let banister = BanisterParams { k_f, tau_a, tau_f };
                    let wg = w_at_days(&loads, &banister, &metrics.day_numbers).unwrap();
                    let (a, b) = profile_alpha_beta(&metrics, &wg, result.params.sigma.powi(2));
                    let ll = log_likelihood_given_w(
                        &metrics,
                        &wg,
                        a,
                        b,
                        result.params.sigma.powi(2),
                    )
                    .unwrap();
                    assert!(
                        result.log_likelihood >= ll - 1e-9,
                        "grid point ({k_f},{tau_a},{tau_f}) beats the optimum"
                    );
                }
            }
        }
        for d in &result.starts {
            assert!(result.log_likelihood >= d.log_likelihood - 1e-9);
        }
    }

    #[test]
    fn fit_recovers_low_noise_truth() {
        let mut rng = StdRng::seed_from_u64(55);
        let truth = TpParams {
            alpha: 200.0,
            beta: 5.0,
            sigma: 1.0,
            banister: BanisterParams::new(2.0, 40.0, 12.0).unwrap(),
        };
        let loads = DailyLoadSeries::raw(
            (1..=200u32)
                .map(|_| if rng.gen_bool(0.55) { rng.gen_range(0.3..2.0) } else { 0.0 })
                .collect(),
        )
        .unwrap();
        let days: Vec<u32> = (1..=66).map(|k| k * 3).collect();
        let w = w_at_days(&loads, &truth.banister, &days).unwrap();
        let values: Vec<f64> = w
            .iter()
            .map(|wi| truth.alpha + truth.beta * wi + rng.gen_range(-1.5..1.5))
            .collect();
        let metrics = series(days, values, vec![0.25; 66]);
        let result = fit(&metrics, &loads, &FitOptions::default()).unwrap();
        assert!(result.converged);
        assert!((result.params.alpha - truth.alpha).abs() / truth.alpha < 0.05);
        assert!((result.params.beta - truth.beta).abs() / truth.beta < 0.10);
        assert!(
            (result.params.banister.tau_a - truth.banister.tau_a).abs() / truth.banister.tau_a
                < 0.25
        );
        assert!(result.standard_errors.is_some());
    }

    #[test]
    fn parallel_and_serial_fits_are_identical() {
        let mut rng = StdRng::seed_from_u64(700);
        let truth = BanisterParams::new(2.0, 35.0, 6.0).unwrap();
        let loads = simple_loads(120, 2, 1.0);
        let days: Vec<u32> = (1..=30).map(|k| k * 4).collect();
        let w = w_at_days(&loads, &truth, &days).unwrap();
        let values: Vec<f64> = w.iter().map(|wi| 150.0 + 4.0 * wi + rng.gen_range(-3.0..3.0)).collect();
        let metrics = series(days, values, vec![2.0; 30]);
        let serial = fit(&metrics, &loads, &FitOptions { parallel: false, ..Default::default() }).unwrap();
        let parallel = fit(&metrics, &loads, &FitOptions { parallel: true, ..Default::default() }).unwrap();
        assert_eq!(
            serde_json::to_string(&serial).unwrap(),
            serde_json::to_string(&parallel).unwrap()
        );
    }

    #[test]
    fn report_rows_cover_every_day() {
        let mut rng = StdRng::seed_from_u64(900);
        let truth = BanisterParams::new(2.0, 35.0, 6.0).unwrap();
        let loads = simple_loads(90, 2, 1.0);
        let days: Vec<u32> = (1..=22).map(|k| k * 4).collect();
        let w = w_at_days(&loads, &truth, &days).unwrap();
        let values: Vec<f64> = w.iter().map(|wi| 150.0 + 4.0 * wi + rng.gen_range(-2.0..2.0)).collect();
        let metrics = series(days, values, vec![1.0; 22]);
        let result = fit(&metrics, &loads, &FitOptions::default()).unwrap();
        let report = progression_report(&result, &metrics, &loads).unwrap();
        assert_eq!(report.rows.len(), 90);
        for row in &report.rows {
            assert!((row.fitted - (result.params.alpha + result.params.beta * row.preparedness)).abs() < 1e-9);
            if let (Some(lo), Some(hi)) = (row.lower, row.upper) {
                assert!(lo <= row.fitted && row.fitted <= hi);
            }
        }
        assert!(report.relative_progression.is_finite());
    }

    #[test]
    fn zero_beta_progression_is_zero() {
        let loads = simple_loads(60, 2, 1.0);
        let metrics = series(
            (1..=12).map(|k| k * 5).collect(),
            (0..12).map(|k| 200.0 + f64::from(k % 3)).collect(),
            vec![4.0; 12],
        );
        // values barely correlate with W, so beta lands near zero and the
        // progression must scale with it exactly
        if let Ok(result) = fit(&metrics, &loads, &FitOptions::default()) {
            let w = w_at_days(&loads, &result.params.banister, &metrics.day_numbers).unwrap();
            let w_max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w_min = w.iter().copied().fold(f64::INFINITY, f64::min);
            let expected = result.params.beta * (w_max - w_min);
            assert!((result.delta_w_progress - expected).abs() < 1e-9);
        }
    }
}
