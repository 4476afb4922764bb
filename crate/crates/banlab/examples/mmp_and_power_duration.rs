//! Mean-maximal power and the two power-duration fits on one session.
//!
//! ```bash
//! cargo run -p banlab --example mmp_and_power_duration
//! ```

use banlab::metrics::{
    max_power_metric, mean_maximal_power, peak_power_metric, power_duration_points,
};
use banlab::session::{Sample, SessionRecord};

fn main() {
    // an interval session: sprints, threshold blocks, endurance riding
    let mut powers: Vec<f64> = Vec::new();
    for _ in 0..3 {
        powers.extend(std::iter::repeat_n(620.0, 3)); // 15 s sprint
        powers.extend(std::iter::repeat_n(140.0, 36)); // 3 min recovery
    }
    for _ in 0..4 {
        powers.extend(std::iter::repeat_n(340.0, 60)); // 5 min threshold
        powers.extend(std::iter::repeat_n(150.0, 36));
    }
    powers.extend(std::iter::repeat_n(210.0, 480)); // 40 min steady
    let samples: Vec<Sample> = powers
        .iter()
        .enumerate()
        .map(|(k, &p)| Sample {
            t_s: k as u64 * 5,
            power_w: p,
            hr_bpm: None,
        })
        .collect();
    let session = SessionRecord::new(1, 1, 18.0, 5, samples).unwrap();
    println!("session: {:.0} min, max {:.0} W", session.duration_min(), 620.0);
    println!();

    println!("mean-maximal power:");
    for d in [10u32, 30, 60, 300, 1200] {
        println!("  best {d:>5} s: {:>6.1} W", mean_maximal_power(&session, d).unwrap());
    }
    println!();

    let points = power_duration_points(&session);
    println!("sustained power levels ({} points):", points.len());
    println!("{:>8} {:>10}", "p (W)", "d (s)");
    for &(p, d) in points.iter().step_by(points.len().div_ceil(10).max(1)) {
        println!("{p:>8.0} {d:>10.0}");
    }
    println!();

    let sprint = max_power_metric(&session, 10.0).unwrap();
    let endurance = max_power_metric(&session, 300.0).unwrap();
    println!("log-log duration curve (slope {:.3}):", sprint.log_slope);
    println!(
        "  10 s maximum power: {:>6.1} W (sd {:.1})",
        sprint.value_w,
        sprint.lambda.sqrt()
    );
    println!(
        "  300 s maximum power: {:>5.1} W (sd {:.1})",
        endurance.value_w,
        endurance.lambda.sqrt()
    );
    println!();

    let peak = peak_power_metric(&session).unwrap();
    println!("critical-power curve:");
    println!("  peak power p0     = {:.1} W (sd {:.1})", peak.value_w, peak.lambda.sqrt());
    println!("  critical power    = {:.1} W", peak.critical_power_w);
    println!("  decay rate theta  = {:.4} / s", peak.theta);
}
