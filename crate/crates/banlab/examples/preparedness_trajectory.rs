//! Daily preparedness over a periodized block of training.
//!
//! ```bash
//! cargo run -p banlab --example preparedness_trajectory
//! ```

use banlab::banister::{preparedness, BanisterParams};
use banlab::training_load::DailyLoadSeries;

fn main() {
    // twelve weeks: three loaded weeks then a taper week, load 1.0 on
    // Tue/Thu/Sat/Sun of loaded weeks, a single light ride in tapers
    let n_days = 84u32;
    let loads: Vec<f64> = (1..=n_days)
        .map(|d| {
            let week = (d - 1) / 7;
            let dow = (d - 1) % 7;
            if week % 4 == 3 {
                if dow == 2 { 0.4 } else { 0.0 }
            } else if matches!(dow, 1 | 3 | 5 | 6) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let loads = DailyLoadSeries::raw(loads).unwrap();
    let params = BanisterParams::new(2.0, 40.0, 10.0).unwrap();
    let series = preparedness(&loads, &params, n_days + 14).unwrap();

    println!("{:>4} {:>6} {:>9}", "day", "load", "W");
    for day in 1..=series.horizon() {
        let w = series.on_day(day);
        let load = loads.load_on_day(day);
        let marker = if load > 0.0 { "*" } else { " " };
        let bar = ((w + 2.0).max(0.0) * 8.0).round() as usize;
        println!("{day:>4} {load:>6.1}{marker} {w:>8.3} {}", "=".repeat(bar));
    }

    let (mut best_day, mut best_w) = (0, f64::NEG_INFINITY);
    for day in 1..=series.horizon() {
        if series.on_day(day) > best_w {
            best_w = series.on_day(day);
            best_day = day;
        }
    }
    println!();
    println!("preparedness peaks on day {best_day} at {best_w:.3} (taper weeks show the rebound)");
}
