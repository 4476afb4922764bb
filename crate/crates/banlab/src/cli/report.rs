//! Side-by-side reporting across the four performance metrics.

use serde::Serialize;

use crate::error::Result;
use crate::metrics::{build_metric_series, MetricKind, MetricOptions};
use crate::session::RiderHistory;
use crate::tp_model::{fit, progression_report, FitOptions, FitResult, ProgressionReport};
use crate::training_load::{build_daily_loads, DailyLoadSeries};

/// The four field metrics, in report order.
pub const REPORT_KINDS: [MetricKind; 4] = [
    MetricKind::PowerAtHr,
    MetricKind::HrAtPower,
    MetricKind::MaxPowerD,
    MetricKind::PeakPower,
];

/// One metric's full pipeline outcome.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub kind: MetricKind,
    /// Present when the pipeline ran to a fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub progression: Option<ProgressionReport>,
    /// Why the metric failed, when it did.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Everything `banlab report` emits.
#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub rider_id: String,
    pub seed: u64,
    pub normalization_constant: f64,
    pub metrics: Vec<MetricReport>,
}

impl ReportBundle {
    pub fn all_succeeded(&self) -> bool {
        self.metrics.iter().all(|m| m.error.is_none())
    }
}

/// Run load building, metric estimation, and the maximum-likelihood fit
/// for each requested metric. Failures are captured per metric so a
/// partial table can still be reported.
pub fn report_metrics(
    history: &RiderHistory,
    kinds: &[MetricKind],
    metric_options: &MetricOptions,
    fit_options: &FitOptions,
) -> Result<(ReportBundle, DailyLoadSeries)> {
    let loads = build_daily_loads(history, true)?;
    let mut reports = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let outcome = build_metric_series(history, kind, metric_options)
            .and_then(|series| fit(&series, &loads, fit_options).map(|f| (series, f)));
        match outcome {
            Ok((series, fit_result)) => {
                let progression = progression_report(&fit_result, &series, &loads).ok();
                reports.push(MetricReport {
                    kind,
                    fit: Some(fit_result),
                    progression,
                    error: None,
                });
            }
            Err(e) => reports.push(MetricReport {
                kind,
                fit: None,
                progression: None,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok((
        ReportBundle {
            rider_id: history.rider_id.clone(),
            seed: fit_options.rng_seed,
            normalization_constant: loads.normalization_constant,
            metrics: reports,
        },
        loads,
    ))
}

/// Run the full pipeline for all four metrics.
pub fn report_all_metrics(
    history: &RiderHistory,
    metric_options: &MetricOptions,
    fit_options: &FitOptions,
) -> Result<(ReportBundle, DailyLoadSeries)> {
    report_metrics(history, &REPORT_KINDS, metric_options, fit_options)
}

/// "12.3 (4.5)" — estimate with standard error, one decimal each.
pub fn format_estimate(value: f64, se: Option<f64>) -> String {
    match se {
        Some(se) => format!("{value:.1} ({se:.1})"),
        None => format!("{value:.1} (-)"),
    }
}

/// Human-readable comparison lines: one row per metric with the six
/// estimates and the fitted progression.
pub fn comparison_table(bundle: &ReportBundle) -> Vec<String> {
    let mut lines = Vec::new();
    lines.push(format!(
        "{:<5} {:>16} {:>16} {:>14} {:>12} {:>14} {:>14} {:>12} {:>10}",
        "kind", "alpha", "beta", "sigma", "k_f", "tau_a", "tau_f", "logL", "b*dWmax"
    ));
    for metric in &bundle.metrics {
        match &metric.fit {
            Some(fit) => {
                let se = fit.standard_errors;
                lines.push(format!(
                    "{:<5} {:>16} {:>16} {:>14} {:>12} {:>14} {:>14} {:>12.2} {:>10.1}",
                    metric.kind.code(),
                    format_estimate(fit.params.alpha, se.map(|s| s.alpha)),
                    format_estimate(fit.params.beta, se.map(|s| s.beta)),
                    format_estimate(fit.params.sigma, se.map(|s| s.sigma)),
                    format_estimate(fit.params.banister.k_f, se.map(|s| s.k_f)),
                    format_estimate(fit.params.banister.tau_a, se.map(|s| s.tau_a)),
                    format_estimate(fit.params.banister.tau_f, se.map(|s| s.tau_f)),
                    fit.log_likelihood,
                    fit.delta_w_progress,
                ));
            }
            None => {
                lines.push(format!(
                    "{:<5} failed: {}",
                    metric.kind.code(),
                    metric.error.as_deref().unwrap_or("unknown")
                ));
            }
        }
    }
    lines
}
