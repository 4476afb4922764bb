//! Per-session performance metrics with measurement variances.
//!
//! Each metric turns a session into a point estimate plus a variance; the
//! variance is what lets the training-performance fit weigh noisy session
//! estimates honestly.

mod hr_power;
mod mmp;
mod power_duration;

pub use hr_power::{
    fit_hr_power, fit_hr_power_opts, hr_at_power, power_at_hr, HrPowerFit, HrPowerOptions,
    SessionCoeffs,
};
pub use mmp::{mean_maximal_power, mmp_curve, power_duration_points};
pub use power_duration::{
    fit_peak_power, max_power_metric, peak_power_metric, MaxPowerEstimate, PeakPowerEstimate,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::RiderHistory;

/// Variances are floored here so downstream weights stay finite even for
/// noise-free synthetic data.
pub const LAMBDA_FLOOR: f64 = 1e-12;

/// Which per-session performance estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Power at a heart-rate threshold (higher is fitter).
    PowerAtHr,
    /// Heart rate needed for a power threshold (lower is fitter).
    HrAtPower,
    /// d-second maximum power from the log-log duration curve.
    MaxPowerD,
    /// Peak power from the critical-power curve.
    PeakPower,
    /// Directly generated series with known ground truth.
    Synthetic,
}

impl MetricKind {
    /// Short CLI code: phq | hpq | pd | p0.
    pub fn code(&self) -> &'static str {
        match self {
            MetricKind::PowerAtHr => "phq",
            MetricKind::HrAtPower => "hpq",
            MetricKind::MaxPowerD => "pd",
            MetricKind::PeakPower => "p0",
            MetricKind::Synthetic => "synthetic",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "phq" => Some(MetricKind::PowerAtHr),
            "hpq" => Some(MetricKind::HrAtPower),
            "pd" => Some(MetricKind::MaxPowerD),
            "p0" => Some(MetricKind::PeakPower),
            "synthetic" => Some(MetricKind::Synthetic),
            _ => None,
        }
    }
}

/// Knobs for the estimators; defaults follow the recommended field setup
/// (15 s lag, one-hour reference at 20 degC, 75th-percentile thresholds,
/// 10 s sprint duration).
#[derive(Debug, Clone, Copy)]
pub struct MetricOptions {
    pub lag_s: u32,
    pub t_r_s: f64,
    pub temp_r_c: f64,
    /// Heart-rate threshold percentile when `h_q` is not given.
    pub hq_percentile: f64,
    pub h_q: Option<f64>,
    /// Power threshold percentile when `p_q` is not given.
    pub pq_percentile: f64,
    pub p_q: Option<f64>,
    /// Duration for the d-second maximum power metric.
    pub duration_s: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            lag_s: 15,
            t_r_s: 3600.0,
            temp_r_c: 20.0,
            hq_percentile: 75.0,
            h_q: None,
            pq_percentile: 75.0,
            p_q: None,
            duration_s: 10.0,
        }
    }
}

/// One value and variance per usable session, aligned by position.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSeries {
    pub kind: MetricKind,
    pub session_indices: Vec<usize>,
    /// Day number of each retained session; the fit sums over these days.
    pub day_numbers: Vec<u32>,
    pub values: Vec<f64>,
    pub variances: Vec<f64>,
    /// Sessions without a usable estimate, with reasons.
    pub omitted: Vec<(usize, String)>,
    /// Retained sessions that look physiologically odd.
    pub flags: Vec<(usize, String)>,
}

impl MetricSeries {
    pub fn new(
        kind: MetricKind,
        session_indices: Vec<usize>,
        day_numbers: Vec<u32>,
        values: Vec<f64>,
        variances: Vec<f64>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("metric series has no sessions".into()));
        }
        if values.len() != variances.len()
            || values.len() != session_indices.len()
            || values.len() != day_numbers.len()
        {
            return Err(Error::InvalidParams("metric series fields differ in length".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("metric values must be finite".into()));
        }
        if variances.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidParams("variances must be positive and finite".into()));
        }
        Ok(Self {
            kind,
            session_indices,
            day_numbers,
            values,
            variances,
            omitted: Vec::new(),
            flags: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Run the chosen estimator over every session of the history.
///
/// Sessions that cannot produce an estimate are listed in `omitted` with a
/// reason rather than failing the whole series; an error is returned only
/// when nothing usable remains.
pub fn build_metric_series(
    history: &RiderHistory,
    kind: MetricKind,
    options: &MetricOptions,
) -> Result<MetricSeries> {
    let mut indices = Vec::new();
    let mut days = Vec::new();
    let mut values = Vec::new();
    let mut variances = Vec::new();
    let mut omitted: Vec<(usize, String)> = Vec::new();
    let mut flags: Vec<(usize, String)> = Vec::new();

    match kind {
        MetricKind::PowerAtHr | MetricKind::HrAtPower => {
            let fit = fit_hr_power(history, options.lag_s)?;
            omitted.extend(fit.excluded.iter().cloned());
            let threshold = match kind {
                MetricKind::PowerAtHr => match options.h_q {
                    Some(h) => h,
                    None => history.hr_percentile(options.hq_percentile)?,
                },
                _ => match options.p_q {
                    Some(p) => p,
                    None => history.power_percentile(options.pq_percentile)?,
                },
            };
            for session in &history.sessions {
                let idx = session.session_index;
                if fit.slot_of(idx).is_none() {
                    continue; // already in omitted
                }
                let outcome = match kind {
                    MetricKind::PowerAtHr => {
                        power_at_hr(&fit, idx, threshold, options.temp_r_c, options.t_r_s)
                    }
                    _ => hr_at_power(&fit, idx, threshold, options.temp_r_c, options.t_r_s),
                };
                match outcome {
                    Ok((value, lambda)) => {
                        let coeffs = fit.coeffs(idx).unwrap();
                        if coeffs.slope <= 0.0 {
                            flags.push((idx, "non-positive heart-rate/power slope".into()));
                        }
                        indices.push(idx);
                        days.push(session.day_number);
                        values.push(value);
                        variances.push(lambda.max(LAMBDA_FLOOR));
                    }
                    Err(e) => omitted.push((idx, e.to_string())),
                }
            }
        }
        MetricKind::MaxPowerD => {
            for session in &history.sessions {
                match max_power_metric(session, options.duration_s) {
                    Ok(est) => {
                        if est.log_slope > 0.0 {
                            flags.push((
                                session.session_index,
                                "power rises with duration".into(),
                            ));
                        }
                        indices.push(session.session_index);
                        days.push(session.day_number);
                        values.push(est.value_w);
                        variances.push(est.lambda.max(LAMBDA_FLOOR));
                    }
                    Err(e) => omitted.push((session.session_index, e.to_string())),
                }
            }
        }
        MetricKind::PeakPower => {
            for session in &history.sessions {
                match peak_power_metric(session) {
                    Ok(est) => {
                        indices.push(session.session_index);
                        days.push(session.day_number);
                        values.push(est.value_w);
                        variances.push(est.lambda.max(LAMBDA_FLOOR));
                    }
                    Err(e) => omitted.push((session.session_index, e.to_string())),
                }
            }
        }
        MetricKind::Synthetic => {
            return Err(Error::InvalidParams(
                "synthetic series come from the generator, not from session data".into(),
            ));
        }
    }

    let mut series = MetricSeries::new(kind, indices, days, values, variances)?;
    series.omitted = omitted;
    series.flags = flags;
    Ok(series)
}
