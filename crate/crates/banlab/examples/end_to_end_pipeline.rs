//! The complete pipeline on raw 5-second files: generate a synthetic
//! rider, write session CSVs, ingest them back, build loads and metrics,
//! fit the model, and summarise the progression.
//!
//! ```bash
//! cargo run -p banlab --example end_to_end_pipeline
//! ```

use banlab::banister::BanisterParams;
use banlab::metrics::{build_metric_series, MetricKind, MetricOptions};
use banlab::session::load_history;
use banlab::synth::{
    generate_raw_level, write_history_files, LambdaPolicy, RawLevelConfig, ScheduleSpec,
    SynthConfig,
};
use banlab::tp_model::{fit, progression_report, FitOptions, TpParams};
use banlab::training_load::build_daily_loads;

fn main() {
    let truth = TpParams {
        alpha: 250.0,
        beta: 1.5e-4, // raw TRIMP units of preparedness
        sigma: 4.0,
        banister: BanisterParams::new(2.0, 40.0, 10.0).unwrap(),
    };
    let raw = RawLevelConfig::default();
    let config = SynthConfig {
        truth,
        schedule: ScheduleSpec::Recipe {
            sessions_per_week: 4,
            load_lo: 0.5,
            load_hi: 1.5,
        },
        n_days: 180,
        lambda: LambdaPolicy::Constant(1.0),
        raw: Some(raw),
        rng_seed: 314,
    };

    // 1. generate and write raw files
    let generated = generate_raw_level(&config).unwrap();
    let dir = std::env::temp_dir().join(format!("banlab-e2e-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    let files = write_history_files(&generated, &dir).unwrap();
    println!("wrote {} files under {}", files.len(), dir.display());

    // 2. ingest them back, exactly like `banlab ingest`
    let history = load_history(&dir, &generated.rider_id).unwrap();
    println!(
        "ingested {} sessions over {} days",
        history.len(),
        history.training_period
    );

    // 3. daily training loads (normalized for the fit)
    let loads = build_daily_loads(&history, true).unwrap();
    println!(
        "load normalization constant: {:.0} TRIMP units",
        loads.normalization_constant
    );

    // 4. per-session performance metric with measurement variances
    let series = build_metric_series(
        &history,
        MetricKind::PowerAtHr,
        &MetricOptions {
            h_q: Some(raw.hr_threshold),
            ..MetricOptions::default()
        },
    )
    .unwrap();
    println!("metric series: {} usable sessions, {} omitted", series.len(), series.omitted.len());

    // 5. maximum-likelihood fit
    let result = fit(&series, &loads, &FitOptions::default()).unwrap();
    let se = result.standard_errors.expect("standard errors available");
    println!();
    println!("truth:  k_f 2.00, tau_a 40.0 d, tau_f 10.0 d");
    println!(
        "fitted: k_f {:.2} ({:.2}), tau_a {:.1} ({:.1}) d, tau_f {:.1} ({:.1}) d",
        result.params.banister.k_f,
        se.k_f,
        result.params.banister.tau_a,
        se.tau_a,
        result.params.banister.tau_f,
        se.tau_f
    );

    // 6. progression summary
    let report = progression_report(&result, &series, &loads).unwrap();
    println!();
    println!(
        "fitted performance change between least and most trained: {:.1} W ({:.1}%)",
        report.delta_w_progress,
        100.0 * report.relative_progression
    );
    let peak = report
        .rows
        .iter()
        .max_by(|a, b| a.preparedness.total_cmp(&b.preparedness))
        .unwrap();
    println!("preparedness peaked on day {}", peak.day);

    std::fs::remove_dir_all(&dir).ok();
}
