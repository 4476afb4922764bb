//! The pooled heart-rate/power fit and the two metrics derived from it.
//!
//! ```bash
//! cargo run -p banlab --example hr_power_metrics
//! ```

use banlab::banister::BanisterParams;
use banlab::metrics::{fit_hr_power, hr_at_power, power_at_hr};
use banlab::synth::{generate_raw_level, LambdaPolicy, RawLevelConfig, ScheduleSpec, SynthConfig};
use banlab::tp_model::TpParams;

fn main() {
    // a synthetic rider whose fitness genuinely improves over 90 days
    let config = SynthConfig {
        truth: TpParams {
            alpha: 250.0,
            beta: 1.5e-4, // preparedness is in raw TRIMP units here
            sigma: 3.0,
            banister: BanisterParams::new(2.0, 40.0, 10.0).unwrap(),
        },
        schedule: ScheduleSpec::Recipe {
            sessions_per_week: 4,
            load_lo: 0.5,
            load_hi: 1.5,
        },
        n_days: 90,
        lambda: LambdaPolicy::Constant(1.0),
        raw: Some(RawLevelConfig::default()),
        rng_seed: 99,
    };
    let history = generate_raw_level(&config).unwrap();
    println!("rider {}: {} sessions", history.rider_id, history.len());

    let fit = fit_hr_power(&history, 15).unwrap();
    println!(
        "joint fit over {} lag-aligned samples: drift c = {:.2e} bpm/(degC s), residual sd {:.2} bpm",
        fit.n_rows,
        fit.c,
        fit.tau_sq.sqrt()
    );
    for (idx, why) in &fit.excluded {
        println!("  session {idx} excluded: {why}");
    }
    println!();

    let h_q = history.hr_percentile(75.0).unwrap();
    let p_q = history.power_percentile(75.0).unwrap();
    println!("thresholds: h_75 = {h_q:.1} bpm, p_75 = {p_q:.1} W");
    println!();
    println!(
        "{:>7} {:>5} {:>9} {:>7} {:>9} {:>7}",
        "session", "day", "p@h75 W", "sd", "h@p75bpm", "sd"
    );
    for session in history.sessions.iter().step_by(4) {
        let idx = session.session_index;
        let (p_hat, p_var) = power_at_hr(&fit, idx, h_q, 20.0, 3600.0).unwrap();
        let (h_hat, h_var) = hr_at_power(&fit, idx, p_q, 20.0, 3600.0).unwrap();
        println!(
            "{idx:>7} {:>5} {p_hat:>9.1} {:>7.2} {h_hat:>9.1} {:>7.2}",
            session.day_number,
            p_var.sqrt(),
            h_var.sqrt()
        );
    }
    println!();
    println!(
        "power at the heart-rate threshold rises with fitness; the heart rate \
         needed for a fixed power falls"
    );
}
