//! Command-line front end tying the pipeline stages into reproducible
//! runs: ingest, trimp, preparedness, timing, metrics, fit, simulate,
//! report.
//!
//! Exit codes: 0 success, 1 validation/data error, 2 numeric
//! non-convergence, 64 usage.

mod manifest;
mod report;

pub use manifest::{atomic_write, fnv1a_hex, RunManifest};
pub use report::{
    comparison_table, format_estimate, report_all_metrics, report_metrics, MetricReport,
    ReportBundle, REPORT_KINDS,
};

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::banister::{preparedness, timing_quantities, BanisterParams, PreparednessSeries};
use crate::error::{Error, Result};
use crate::metrics::{build_metric_series, MetricKind, MetricOptions, MetricSeries};
use crate::session::load_history;
use crate::synth::{generate_metric_level, generate_raw_level, write_history_files, SynthConfig};
use crate::tp_model::{fit, progression_report, FitOptions, FitResult, ProgressionReport};
use crate::training_load::{build_daily_loads, DailyLoadSeries};

const EXIT_OK: i32 = 0;
const EXIT_NONCONVERGENCE: i32 = 2;
const EXIT_USAGE: i32 = 64;

#[derive(Parser)]
#[command(
    name = "banlab",
    version,
    about = "Training-load and performance analysis for cycling field data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct HistoryArgs {
    /// Directory holding one sub-directory of session files per rider.
    #[arg(long)]
    dir: PathBuf,
    /// Rider identifier (the sub-directory name).
    #[arg(long)]
    rider: String,
}

#[derive(Args)]
struct MetricArgs {
    /// Duration in seconds for the pd metric.
    #[arg(long, default_value_t = 10.0)]
    d: f64,
    /// Heart-rate threshold percentile for phq.
    #[arg(long, default_value_t = 75.0)]
    hq_pct: f64,
    /// Explicit heart-rate threshold (bpm), overriding the percentile.
    #[arg(long)]
    hq: Option<f64>,
    /// Power threshold percentile for hpq.
    #[arg(long, default_value_t = 75.0)]
    pq_pct: f64,
    /// Explicit power threshold (watts), overriding the percentile.
    #[arg(long)]
    pq: Option<f64>,
    /// Heart-rate lag in seconds.
    #[arg(long, default_value_t = 15)]
    lag: u32,
}

impl MetricArgs {
    fn options(&self) -> MetricOptions {
        MetricOptions {
            lag_s: self.lag,
            duration_s: self.d,
            hq_percentile: self.hq_pct,
            h_q: self.hq,
            pq_percentile: self.pq_pct,
            p_q: self.pq,
            ..MetricOptions::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Seed for every stochastic element; BANLAB_SEED, then 42, when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of optimiser starts (grid seed plus jittered restarts).
    #[arg(long, default_value_t = 9)]
    starts: usize,
    /// Run the starts on threads (the result is identical either way).
    #[arg(long)]
    parallel: bool,
}

impl FitArgs {
    fn options(&self) -> FitOptions {
        FitOptions {
            rng_seed: resolve_seed(self.seed),
            n_starts: self.starts,
            parallel: self.parallel,
            ..FitOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a rider's session files, one summary line each.
    Ingest {
        #[command(flatten)]
        history: HistoryArgs,
    },
    /// Per-day training loads as CSV (day,load).
    Trimp {
        #[command(flatten)]
        history: HistoryArgs,
        /// Emit raw TRIMP units instead of normalized loads.
        #[arg(long)]
        raw: bool,
        /// Also write trimp.csv / trimp.json / run_manifest.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Preparedness trajectory for given shape parameters (day,W).
    Preparedness {
        #[command(flatten)]
        history: HistoryArgs,
        #[arg(long)]
        kf: f64,
        #[arg(long)]
        taua: f64,
        #[arg(long)]
        tauf: f64,
        /// Extend beyond the training period.
        #[arg(long)]
        horizon: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Baseline-return, peak, and half-decay times of a single bout.
    Timing {
        #[arg(long)]
        kf: f64,
        #[arg(long)]
        taua: f64,
        #[arg(long)]
        tauf: f64,
        /// Print full-precision JSON instead of the one-decimal line.
        #[arg(long)]
        json: bool,
    },
    /// Per-session performance estimates as CSV (session,day,value,lambda).
    Metrics {
        #[command(flatten)]
        history: HistoryArgs,
        /// Metric: phq | hpq | pd | p0.
        #[arg(long, value_parser = ["phq", "hpq", "pd", "p0"])]
        kind: String,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximum-likelihood fit of the training-performance model.
    Fit {
        #[command(flatten)]
        history: HistoryArgs,
        #[arg(long, value_parser = ["phq", "hpq", "pd", "p0"])]
        kind: String,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Artifact directory for fit.json, preparedness.csv,
        /// fitted_with_bands.csv, run_manifest.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Generate synthetic rider data from a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Force raw 5 s sample generation even if the config has no raw block.
        #[arg(long)]
        raw: bool,
    },
    /// Fit one or all metrics and print the comparison table.
    Report {
        #[command(flatten)]
        history: HistoryArgs,
        /// Restrict to one metric; all four when omitted.
        #[arg(long, value_parser = ["phq", "hpq", "pd", "p0"])]
        kind: Option<String>,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve_seed(explicit: Option<u64>) -> u64 {
    explicit
        .or_else(|| std::env::var("BANLAB_SEED").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(42)
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    EXIT_OK
                }
                _ => {
                    eprint!("{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Ingest { history } => {
            let loaded = load_history(&history.dir, &history.rider)?;
            for s in loaded.summaries() {
                let hr = s
                    .mean_hr_bpm
                    .map(|h| format!("{h:6.1} bpm"))
                    .unwrap_or_else(|| "  no hr".to_string());
                println!(
                    "session {:>3}  day {:>3}  {:>5.1} C  {:>6} samples  {} segment(s)  {:>7.1} min  {:>6.1} W  {}",
                    s.session_index,
                    s.day_number,
                    s.temperature_c,
                    s.samples,
                    s.segments,
                    s.duration_min,
                    s.mean_power_w,
                    hr
                );
            }
            println!(
                "rider {}: {} sessions over {} days",
                loaded.rider_id,
                loaded.len(),
                loaded.training_period
            );
            Ok(EXIT_OK)
        }

        Command::Trimp { history, raw, out } => {
            let loaded = load_history(&history.dir, &history.rider)?;
            let loads = build_daily_loads(&loaded, !raw)?;
            let csv = loads_csv(&loads);
            print!("{csv}");
            if let Some(out) = out {
                ensure_dir(&out)?;
                let rows: Vec<_> = loads
                    .loads
                    .iter()
                    .enumerate()
                    .map(|(k, w)| json!({"day": k + 1, "load": w}))
                    .collect();
                let mirror = json!({
                    "rider_id": loaded.rider_id,
                    "normalization_constant": loads.normalization_constant,
                    "rows": rows,
                });
                write_table(&out, "trimp", &csv, &mirror)?;
                let mut manifest = RunManifest::new("trimp", &[format!("--rider {}", history.rider)]);
                manifest.add_input_dir(&history.dir.join(&history.rider))?;
                manifest.write(&out)?;
            }
            Ok(EXIT_OK)
        }

        Command::Preparedness {
            history,
            kf,
            taua,
            tauf,
            horizon,
            out,
        } => {
            let loaded = load_history(&history.dir, &history.rider)?;
            let loads = build_daily_loads(&loaded, true)?;
            let params = BanisterParams::new(kf, taua, tauf)?;
            let horizon = horizon.unwrap_or(loaded.training_period).max(1);
            let series = preparedness(&loads, &params, horizon)?;
            let csv = preparedness_csv(&series);
            print!("{csv}");
            if let Some(out) = out {
                ensure_dir(&out)?;
                let rows: Vec<_> = series
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(k, w)| json!({"day": k + 1, "preparedness": w}))
                    .collect();
                let mirror = json!({
                    "rider_id": loaded.rider_id,
                    "k_f": kf, "tau_a": taua, "tau_f": tauf,
                    "rows": rows,
                });
                write_table(&out, "preparedness", &csv, &mirror)?;
                let mut manifest =
                    RunManifest::new("preparedness", &[format!("--rider {}", history.rider)]);
                manifest.add_input_dir(&history.dir.join(&history.rider))?;
                manifest.write(&out)?;
            }
            Ok(EXIT_OK)
        }

        Command::Timing { kf, taua, tauf, json } => {
            let params = BanisterParams::new(kf, taua, tauf)?;
            let timing = timing_quantities(&params)?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&timing).expect("timing serializes")
                );
            } else {
                let t_half = timing
                    .t_half
                    .map(|t| format!("{t:.1}"))
                    .unwrap_or_else(|| "n/a".to_string());
                println!(
                    "t0={:.1} t*={:.1} t_half={t_half}",
                    timing.t_zero, timing.t_star
                );
                if !timing.crosses_baseline {
                    println!("note: response never crosses baseline (k_f <= 1 or slow fatigue)");
                }
            }
            Ok(EXIT_OK)
        }

        Command::Metrics {
            history,
            kind,
            metric,
            out,
        } => {
            let loaded = load_history(&history.dir, &history.rider)?;
            let kind = MetricKind::from_code(&kind).expect("clap restricts the codes");
            let series = build_metric_series(&loaded, kind, &metric.options())?;
            let csv = metrics_csv(&series);
            print!("{csv}");
            for (idx, why) in &series.omitted {
                eprintln!("session {idx} omitted: {why}");
            }
            if let Some(out) = out {
                ensure_dir(&out)?;
                let mirror = serde_json::to_value(&series).expect("series serializes");
                write_table(&out, "metrics", &csv, &mirror)?;
                let mut manifest = RunManifest::new(
                    "metrics",
                    &[format!("--rider {}", history.rider), format!("--kind {}", kind.code())],
                );
                manifest.add_input_dir(&history.dir.join(&history.rider))?;
                manifest.write(&out)?;
            }
            Ok(EXIT_OK)
        }

        Command::Fit {
            history,
            kind,
            metric,
            fit: fit_args,
            out,
        } => {
            let loaded = load_history(&history.dir, &history.rider)?;
            let kind = MetricKind::from_code(&kind).expect("clap restricts the codes");
            let loads = build_daily_loads(&loaded, true)?;
            let series = build_metric_series(&loaded, kind, &metric.options())?;
            let options = fit_args.options();
            let result = fit(&series, &loads, &options)?;

            for warning in &result.warnings {
                eprintln!("warning: {warning}");
            }
            print_fit_row(kind, &result);

            ensure_dir(&out)?;
            write_fit_artifacts(&out, &loaded.rider_id, kind, &options, &loads, &series, &result, "")?;
            let mut manifest = RunManifest::new(
                "fit",
                &[
                    format!("--rider {}", history.rider),
                    format!("--kind {}", kind.code()),
                    format!("--starts {}", options.n_starts),
                ],
            )
            .with_seed(options.rng_seed);
            manifest.add_input_dir(&history.dir.join(&history.rider))?;
            manifest.write(&out)?;

            if result.converged {
                Ok(EXIT_OK)
            } else {
                eprintln!("fit did not converge; artifacts carry per-start diagnostics");
                Ok(EXIT_NONCONVERGENCE)
            }
        }

        Command::Simulate { config, out, raw } => {
            let text = std::fs::read_to_string(&config).map_err(|source| Error::Io {
                path: config.clone(),
                source,
            })?;
            let mut synth_config: SynthConfig =
                serde_json::from_str(&text).map_err(|e| Error::Parse {
                    path: config.clone(),
                    line: 1,
                    message: e.to_string(),
                })?;
            if raw && synth_config.raw.is_none() {
                synth_config.raw = Some(Default::default());
            }
            for warning in synth_config.validate()? {
                eprintln!("warning: {warning}");
            }
            ensure_dir(&out)?;
            if synth_config.raw.is_some() {
                let history = generate_raw_level(&synth_config)?;
                write_history_files(&history, &out)?;
                println!(
                    "wrote {} raw sessions for rider {} under {}",
                    history.len(),
                    history.rider_id,
                    out.display()
                );
            } else {
                let data = generate_metric_level(&synth_config)?;
                let csv = metrics_csv(&data.metrics);
                write_table(
                    &out,
                    "metrics",
                    &csv,
                    &serde_json::to_value(&data.metrics).expect("series serializes"),
                )?;
                let loads_csv_text = loads_csv(&data.loads);
                let rows: Vec<_> = data
                    .loads
                    .loads
                    .iter()
                    .enumerate()
                    .map(|(k, w)| json!({"day": k + 1, "load": w}))
                    .collect();
                write_table(&out, "loads", &loads_csv_text, &json!({ "rows": rows }))?;
                atomic_write(
                    &out.join("truth.json"),
                    serde_json::to_string_pretty(&data.truth)
                        .expect("params serialize")
                        .as_bytes(),
                )?;
                println!(
                    "wrote {} metric-level sessions to {}",
                    data.metrics.len(),
                    out.display()
                );
            }
            let mut manifest =
                RunManifest::new("simulate", &[format!("--config {}", config.display())])
                    .with_seed(synth_config.rng_seed);
            manifest.add_input(&config)?;
            manifest.write(&out)?;
            Ok(EXIT_OK)
        }

        Command::Report {
            history,
            kind,
            metric,
            fit: fit_args,
            out,
        } => {
            let loaded = load_history(&history.dir, &history.rider)?;
            let kinds: Vec<MetricKind> = match kind {
                Some(code) => vec![MetricKind::from_code(&code).expect("clap restricts the codes")],
                None => REPORT_KINDS.to_vec(),
            };
            let options = fit_args.options();
            let (bundle, loads) = report_metrics(&loaded, &kinds, &metric.options(), &options)?;

            for line in comparison_table(&bundle) {
                println!("{line}");
            }
            println!();
            println!("progression (beta x dWmax, relative to least-trained expectation):");
            for m in &bundle.metrics {
                match (&m.fit, &m.progression) {
                    (Some(f), Some(p)) => println!(
                        "{:<5} {:>8.1}  {:>7.1}%",
                        m.kind.code(),
                        f.delta_w_progress,
                        100.0 * p.relative_progression
                    ),
                    (Some(f), None) => {
                        println!("{:<5} {:>8.1}  (no bands: fit not converged)", m.kind.code(), f.delta_w_progress)
                    }
                    _ => println!("{:<5} failed", m.kind.code()),
                }
            }

            if let Some(out) = &out {
                ensure_dir(out)?;
                atomic_write(
                    &out.join("report.json"),
                    serde_json::to_string_pretty(&bundle)
                        .expect("bundle serializes")
                        .as_bytes(),
                )?;
                for m in &bundle.metrics {
                    if let Some(f) = &m.fit {
                        let suffix = format!("_{}", m.kind.code());
                        let series = build_metric_series(&loaded, m.kind, &metric.options())?;
                        write_fit_artifacts(
                            out,
                            &loaded.rider_id,
                            m.kind,
                            &options,
                            &loads,
                            &series,
                            f,
                            &suffix,
                        )?;
                    }
                }
                let mut manifest = RunManifest::new(
                    "report",
                    &[format!("--rider {}", history.rider)],
                )
                .with_seed(options.rng_seed);
                manifest.add_input_dir(&history.dir.join(&history.rider))?;
                manifest.write(out)?;
            }

            let clean = bundle.all_succeeded()
                && bundle
                    .metrics
                    .iter()
                    .all(|m| m.fit.as_ref().is_some_and(|f| f.converged));
            Ok(if clean { EXIT_OK } else { EXIT_NONCONVERGENCE })
        }
    }
}

/// Shortest round-tripping float text, for machine CSV output.
fn fmt(x: f64) -> String {
    format!("{x}")
}

fn loads_csv(loads: &DailyLoadSeries) -> String {
    let mut out = String::from("day,load\n");
    for (k, w) in loads.loads.iter().enumerate() {
        out.push_str(&format!("{},{}\n", k + 1, fmt(*w)));
    }
    out
}

fn preparedness_csv(series: &PreparednessSeries) -> String {
    let mut out = String::from("day,W\n");
    for (k, w) in series.values().iter().enumerate() {
        out.push_str(&format!("{},{}\n", k + 1, fmt(*w)));
    }
    out
}

fn metrics_csv(series: &MetricSeries) -> String {
    let mut out = String::from("session,day,value,lambda\n");
    for k in 0..series.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            series.session_indices[k],
            series.day_numbers[k],
            fmt(series.values[k]),
            fmt(series.variances[k]),
        ));
    }
    out
}

fn bands_csv(report: &ProgressionReport) -> String {
    let mut out = String::from("day,fitted,lower,upper\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.day,
            fmt(row.fitted),
            row.lower.map(fmt).unwrap_or_default(),
            row.upper.map(fmt).unwrap_or_default(),
        ));
    }
    out
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Write `<name>.csv` and the JSON mirror `<name>.json`.
fn write_table(dir: &Path, name: &str, csv: &str, mirror: &serde_json::Value) -> Result<()> {
    atomic_write(&dir.join(format!("{name}.csv")), csv.as_bytes())?;
    atomic_write(
        &dir.join(format!("{name}.json")),
        serde_json::to_string_pretty(mirror)
            .expect("mirror serializes")
            .as_bytes(),
    )
}

fn print_fit_row(kind: MetricKind, result: &FitResult) {
    let se = result.standard_errors;
    println!(
        "{:<5} alpha={} beta={} sigma={} kf={} taua={} tauf={} logL={:.3} converged={}",
        kind.code(),
        format_estimate(result.params.alpha, se.map(|s| s.alpha)),
        format_estimate(result.params.beta, se.map(|s| s.beta)),
        format_estimate(result.params.sigma, se.map(|s| s.sigma)),
        format_estimate(result.params.banister.k_f, se.map(|s| s.k_f)),
        format_estimate(result.params.banister.tau_a, se.map(|s| s.tau_a)),
        format_estimate(result.params.banister.tau_f, se.map(|s| s.tau_f)),
        result.log_likelihood,
        result.converged,
    );
}

/// fit.json plus the two trajectory CSVs (suffix distinguishes metrics
/// inside a combined report).
#[allow(clippy::too_many_arguments)]
fn write_fit_artifacts(
    dir: &Path,
    rider_id: &str,
    kind: MetricKind,
    options: &FitOptions,
    loads: &DailyLoadSeries,
    series: &MetricSeries,
    result: &FitResult,
    suffix: &str,
) -> Result<()> {
    let artifact = json!({
        "rider_id": rider_id,
        "metric": kind.code(),
        "seed": options.rng_seed,
        "n_starts": options.n_starts,
        "normalization_constant": loads.normalization_constant,
        "fit": result,
    });
    atomic_write(
        &dir.join(format!("fit{suffix}.json")),
        serde_json::to_string_pretty(&artifact)
            .expect("artifact serializes")
            .as_bytes(),
    )?;
    if let Ok(report) = progression_report(result, series, loads) {
        let prep = {
            let mut out = String::from("day,W\n");
            for row in &report.rows {
                out.push_str(&format!("{},{}\n", row.day, fmt(row.preparedness)));
            }
            out
        };
        let prep_rows: Vec<_> = report
            .rows
            .iter()
            .map(|r| json!({"day": r.day, "preparedness": r.preparedness}))
            .collect();
        write_table(
            dir,
            &format!("preparedness{suffix}"),
            &prep,
            &json!({ "rows": prep_rows }),
        )?;
        let mirror = serde_json::to_value(&report).expect("report serializes");
        write_table(
            dir,
            &format!("fitted_with_bands{suffix}"),
            &bands_csv(&report),
            &mirror,
        )?;
    }
    Ok(())
}
