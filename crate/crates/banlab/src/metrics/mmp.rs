//! Mean-maximal power: best window-mean power per duration.
//!
//! Windows are contiguous runs of samples inside one recording segment;
//! a dropout gap never contributes to a "sustained" effort.

use crate::error::{Error, Result};
use crate::session::SessionRecord;

/// Highest mean power over any contiguous within-segment window of
/// `duration_s` seconds. The duration must be a positive multiple of the
/// sampling interval and at least one segment must be that long.
pub fn mean_maximal_power(session: &SessionRecord, duration_s: u32) -> Result<f64> {
    let dt = session.sampling_interval_s;
    if duration_s == 0 || !duration_s.is_multiple_of(dt) {
        return Err(Error::InvalidParams(format!(
            "duration {duration_s}s is not a positive multiple of the {dt}s sampling interval"
        )));
    }
    let window = (duration_s / dt) as usize;
    let mut best: Option<f64> = None;
    for segment in &session.segments {
        let powers = &session.samples[segment.clone()];
        if powers.len() < window {
            continue;
        }
        for start in 0..=(powers.len() - window) {
            let mut sum = 0.0;
            for s in &powers[start..start + window] {
                sum += s.power_w;
            }
            let mean = sum / window as f64;
            if best.is_none_or(|b| mean > b) {
                best = Some(mean);
            }
        }
    }
    best.ok_or_else(|| {
        Error::InsufficientData(format!(
            "no contiguous segment of at least {duration_s}s"
        ))
    })
}

/// Mean-maximal power for every window length from one sample up to the
/// longest segment: `curve[m-1]` is the best mean over windows of `m`
/// samples. Computed with per-segment prefix sums.
pub fn mmp_curve(session: &SessionRecord) -> Vec<f64> {
    let longest = session
        .segments
        .iter()
        .map(|s| s.len())
        .max()
        .unwrap_or(0);
    let mut curve = vec![f64::NEG_INFINITY; longest];
    for segment in &session.segments {
        let powers = &session.samples[segment.clone()];
        let mut prefix = Vec::with_capacity(powers.len() + 1);
        prefix.push(0.0);
        for s in powers {
            prefix.push(prefix.last().unwrap() + s.power_w);
        }
        for m in 1..=powers.len() {
            let mut best = f64::NEG_INFINITY;
            for start in 0..=(powers.len() - m) {
                let mean = (prefix[start + m] - prefix[start]) / m as f64;
                if mean > best {
                    best = mean;
                }
            }
            if best > curve[m - 1] {
                curve[m - 1] = best;
            }
        }
    }
    curve
}

/// Minimum duration a power level must be held to count as sustained.
pub const MIN_SUSTAIN_S: f64 = 10.0;

/// Lowest power level probed.
pub const POWER_GRID_START_W: f64 = 50.0;

/// Power grid spacing.
pub const POWER_GRID_STEP_W: f64 = 10.0;

/// The session's (power, longest-sustained-duration) pairs.
///
/// Power levels run from 50 W up to the session maximum in 10 W steps;
/// for each level the duration is the longest window whose mean power
/// reaches it. Durations under 10 s are dropped and duplicate durations
/// keep their highest power level, so the result is strictly increasing
/// in power and strictly decreasing in duration.
pub fn power_duration_points(session: &SessionRecord) -> Vec<(f64, f64)> {
    let dt = f64::from(session.sampling_interval_s);
    let max_power = session
        .samples
        .iter()
        .map(|s| s.power_w)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max_power.is_finite() || max_power < POWER_GRID_START_W {
        return Vec::new();
    }
    let curve = mmp_curve(session);
    let mut points: Vec<(f64, f64)> = Vec::new();
    let steps = ((max_power - POWER_GRID_START_W) / POWER_GRID_STEP_W).floor() as usize;
    for k in 0..=steps {
        let level = POWER_GRID_START_W + POWER_GRID_STEP_W * k as f64;
        // longest window sustaining this level
        let Some(m) = (1..=curve.len()).rev().find(|&m| curve[m - 1] >= level) else {
            continue;
        };
        let duration_s = m as f64 * dt;
        if duration_s < MIN_SUSTAIN_S {
            continue;
        }
        match points.last_mut() {
            Some(last) if last.1 == duration_s => *last = (level, duration_s),
            _ => points.push((level, duration_s)),
        }
    }
    points
}
