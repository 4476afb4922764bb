//! Session TRIMP and the daily load series, from parsed session files.
//!
//! ```bash
//! cargo run -p banlab --example trimp_loads
//! ```

use banlab::session::{Sample, SessionRecord, RiderHistory};
use banlab::training_load::{build_daily_loads, session_trimp};

fn ride(index: usize, day: u32, minutes: usize, hr: f64, power: f64) -> SessionRecord {
    let samples: Vec<Sample> = (0..minutes * 12)
        .map(|k| Sample {
            t_s: k as u64 * 5,
            power_w: power,
            hr_bpm: Some(hr),
        })
        .collect();
    SessionRecord::new(index, day, 18.0, 5, samples).unwrap()
}

fn main() {
    // two weeks: a fast group ride, intervals, a long weekend ride, and a
    // double day
    let sessions = vec![
        ride(1, 2, 75, 152.0, 235.0),
        ride(2, 4, 60, 148.0, 220.0),
        ride(3, 6, 180, 135.0, 190.0),
        ride(4, 9, 45, 158.0, 250.0),
        ride(5, 11, 90, 146.0, 215.0),
        ride(6, 13, 60, 150.0, 225.0),
        ride(7, 13, 40, 128.0, 170.0), // second session the same day
    ];

    println!("{:>7} {:>5} {:>9} {:>9} {:>10}", "session", "day", "min", "mean hr", "TRIMP");
    for s in &sessions {
        println!(
            "{:>7} {:>5} {:>9.0} {:>9.1} {:>10.0}",
            s.session_index,
            s.day_number,
            s.duration_min(),
            s.mean_hr_bpm().unwrap(),
            session_trimp(s).unwrap()
        );
    }

    let history = RiderHistory::new("demo", sessions).unwrap();
    let raw = build_daily_loads(&history, false).unwrap();
    let normalized = build_daily_loads(&history, true).unwrap();
    println!();
    println!(
        "daily loads (raw and normalized by the mean nonzero load {:.0}):",
        normalized.normalization_constant
    );
    println!("{:>4} {:>10} {:>12}", "day", "raw", "normalized");
    for day in 1..=history.training_period {
        println!(
            "{day:>4} {:>10.0} {:>12.3}",
            raw.load_on_day(day),
            normalized.load_on_day(day)
        );
    }
    println!();
    println!("day 13 sums both sessions; rest days are zero");
}
