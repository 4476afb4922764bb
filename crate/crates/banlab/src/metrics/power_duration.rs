//! Power-duration models fitted to a session's sustained-power points.
//!
//! Two forms: a log-log line giving the d-second "maximum" power, and an
//! exponential decay to an asymptote (the critical-power form) whose
//! peak-power intercept is itself a performance metric.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead_restarted, NelderMeadOptions};
use crate::session::SessionRecord;

use super::mmp::power_duration_points;

/// d-second maximum power estimated from the log-log fit
/// `ln p = a + b ln d`.
#[derive(Debug, Clone, Copy)]
pub struct MaxPowerEstimate {
    /// Estimated power at the requested duration, watts.
    pub value_w: f64,
    /// Delta-method variance of the estimate, watts^2.
    pub lambda: f64,
    /// Log-log intercept.
    pub intercept: f64,
    /// Log-log slope; negative for physiological data.
    pub log_slope: f64,
    /// Points the line was fitted to.
    pub n_points: usize,
}

/// Peak power from the critical-power fit
/// `p = (p0 - p_inf) e^(-theta d) + p_inf`.
#[derive(Debug, Clone, Copy)]
pub struct PeakPowerEstimate {
    /// Peak power p0, watts.
    pub value_w: f64,
    /// Variance of p0 from the inverse observed information, watts^2.
    pub lambda: f64,
    /// Critical power: the asymptote notionally sustainable indefinitely.
    pub critical_power_w: f64,
    /// Decay rate per second of duration.
    pub theta: f64,
    /// Residual sum of squares at the optimum.
    pub rss: f64,
    pub n_points: usize,
}

/// Fit the log-log power-duration line and evaluate it at `duration_s`.
pub fn max_power_metric(session: &SessionRecord, duration_s: f64) -> Result<MaxPowerEstimate> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::InvalidParams(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    let points = power_duration_points(session);
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "session {} has only {} sustained-power points (need 3)",
            session.session_index,
            points.len()
        )));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(_, d)| d.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(p, _)| p.ln()).collect();
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let det = m * sxx - sx * sx;
    if det.abs() < 1e-12 {
        return Err(Error::Degenerate(
            "sustained durations are too similar for a log-log fit".into(),
        ));
    }
    let slope = (m * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / m;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let s2 = rss / (m - 2.0);
    // covariance of (intercept, slope) = s2 * inv([[m, sx], [sx, sxx]])
    let cov_aa = s2 * sxx / det;
    let cov_ab = -s2 * sx / det;
    let cov_bb = s2 * m / det;

    let x0 = duration_s.ln();
    let value_w = (intercept + slope * x0).exp();
    let log_var = (cov_aa + 2.0 * x0 * cov_ab + x0 * x0 * cov_bb).max(0.0);
    let lambda = value_w * value_w * log_var;
    Ok(MaxPowerEstimate {
        value_w,
        lambda,
        intercept,
        log_slope: slope,
        n_points: points.len(),
    })
}

/// Iteration cap for the critical-power least squares.
const PEAK_POWER_MAX_ITER: usize = 2000;

/// Fit the critical-power curve and report peak power with its variance.
///
/// Positivity of (p0 - p_inf, p_inf, theta) is kept by searching in log
/// space; starting values come straight from the points (asymptote at the
/// lowest level, peak at the highest, rate from the median duration).
pub fn peak_power_metric(session: &SessionRecord) -> Result<PeakPowerEstimate> {
    let points = power_duration_points(session);
    fit_peak_power(&points, session.session_index)
}

/// Critical-power fit on explicit (power, duration) points.
pub fn fit_peak_power(points: &[(f64, f64)], session_index: usize) -> Result<PeakPowerEstimate> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "session {session_index} has only {} sustained-power points (need 4)",
            points.len()
        )));
    }
    let p_min = points.iter().map(|&(p, _)| p).fold(f64::INFINITY, f64::min);
    let p_max = points.iter().map(|&(p, _)| p).fold(f64::NEG_INFINITY, f64::max);
    let mut durations: Vec<f64> = points.iter().map(|&(_, d)| d).collect();
    durations.sort_by(f64::total_cmp);
    let median_d = durations[durations.len() / 2];
    if !(p_max > p_min && median_d > 0.0) {
        return Err(Error::Degenerate(
            "sustained-power points cannot seed the critical-power fit".into(),
        ));
    }

    let rss_of = |phi: &[f64]| -> f64 {
        let span = phi[0].exp();
        let p_inf = phi[1].exp();
        let theta = phi[2].exp();
        points
            .iter()
            .map(|&(p, d)| {
                let fitted = span * (-theta * d).exp() + p_inf;
                (p - fitted) * (p - fitted)
            })
            .sum()
    };
    let start = [
        (p_max - p_min).max(1e-6).ln(),
        p_min.ln(),
        (1.0 / median_d).ln(),
    ];
    let f0 = rss_of(&start);
    let opts = NelderMeadOptions {
        max_iter: PEAK_POWER_MAX_ITER,
        f_tol: 1e-12 * (1.0 + f0),
        initial_step: 0.2,
    };
    let res = nelder_mead_restarted(rss_of, &start, &opts, 2);
    if !res.converged {
        return Err(Error::NonConvergence(format!(
            "critical-power fit for session {session_index} hit {PEAK_POWER_MAX_ITER} iterations"
        )));
    }
    let span = res.x[0].exp();
    let p_inf = res.x[1].exp();
    let theta = res.x[2].exp();
    let p0 = span + p_inf;
    let rss = res.f;

    // Gauss-Newton observed information in the natural (p0, p_inf, theta)
    // parameterisation; the p0 variance is its inverse's leading entry.
    let m = points.len();
    let mut jtj = DMatrix::<f64>::zeros(3, 3);
    for &(_, d) in points {
        let decay = (-theta * d).exp();
        let grad = DVector::from_column_slice(&[decay, 1.0 - decay, -span * d * decay]);
        jtj += &grad * grad.transpose();
    }
    let s2 = rss / (m - 3) as f64;
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular information matrix in critical-power fit".into()))?
        * s2;
    let lambda = cov[(0, 0)].max(0.0);

    Ok(PeakPowerEstimate {
        value_w: p0,
        lambda,
        critical_power_w: p_inf,
        theta,
        rss,
        n_points: m,
    })
}
