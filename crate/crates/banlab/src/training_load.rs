//! Training impulse (TRIMP) and the daily load series.
//!
//! Session load is duration in minutes times mean heart rate; the daily
//! series sums the loads of all sessions on a day and is zero on days
//! with no recorded session.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::session::{RiderHistory, SessionRecord};

/// Per-day training loads over the training period.
#[derive(Debug, Clone, Serialize)]
pub struct DailyLoadSeries {
    /// Load for day j at index j-1; zero on rest/unrecorded days.
    pub loads: Vec<f64>,
    /// Divisor applied to the raw loads; 1.0 means raw TRIMP units.
    pub normalization_constant: f64,
}

impl DailyLoadSeries {
    /// Wrap a raw (unnormalized) load vector.
    pub fn raw(loads: Vec<f64>) -> Result<Self> {
        Self::with_constant(loads, 1.0)
    }

    pub fn with_constant(loads: Vec<f64>, normalization_constant: f64) -> Result<Self> {
        if !(normalization_constant.is_finite() && normalization_constant > 0.0) {
            return Err(Error::InvalidParams(
                "normalization constant must be positive and finite".into(),
            ));
        }
        if loads.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidParams("loads must be non-negative and finite".into()));
        }
        Ok(Self {
            loads,
            normalization_constant,
        })
    }

    /// Number of days covered.
    pub fn horizon(&self) -> u32 {
        self.loads.len() as u32
    }

    /// Load on 1-based `day`; zero beyond the recorded period.
    pub fn load_on_day(&self, day: u32) -> f64 {
        if day == 0 {
            return 0.0;
        }
        self.loads.get(day as usize - 1).copied().unwrap_or(0.0)
    }

    /// Undo normalization, recovering raw TRIMP units.
    pub fn to_raw(&self) -> Self {
        Self {
            loads: self.loads.iter().map(|w| w * self.normalization_constant).collect(),
            normalization_constant: 1.0,
        }
    }
}

/// TRIMP of one session: duration (minutes) x mean heart rate (bpm).
pub fn session_trimp(session: &SessionRecord) -> Result<f64> {
    let mean_hr = session.mean_hr_bpm().ok_or_else(|| {
        Error::InsufficientData(format!(
            "session {} has no heart-rate data",
            session.session_index
        ))
    })?;
    Ok(session.duration_min() * mean_hr)
}

/// Sum session TRIMPs into a per-day series over the training period.
///
/// With `normalize` set, every day is divided by the mean of the nonzero
/// raw loads and that mean is recorded as the normalization constant, so
/// fits run on well-conditioned unit-scale loads while reports can state
/// results in raw TRIMP units.
pub fn build_daily_loads(history: &RiderHistory, normalize: bool) -> Result<DailyLoadSeries> {
    let mut loads = vec![0.0; history.training_period as usize];
    let mut failed: Vec<usize> = Vec::new();
    for session in &history.sessions {
        match session_trimp(session) {
            Ok(w) => loads[session.day_number as usize - 1] += w,
            Err(_) => failed.push(session.session_index),
        }
    }
    if !failed.is_empty() {
        return Err(Error::InsufficientData(format!(
            "sessions without heart-rate data cannot contribute a load: {failed:?}"
        )));
    }
    if !normalize {
        return DailyLoadSeries::raw(loads);
    }
    let nonzero: Vec<f64> = loads.iter().copied().filter(|&w| w > 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::InsufficientData("all daily loads are zero".into()));
    }
    let mean = nonzero.iter().sum::<f64>() / nonzero.len() as f64;
    for w in &mut loads {
        *w /= mean;
    }
    DailyLoadSeries::with_constant(loads, mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::Sample;

    fn session_with(
        index: usize,
        day: u32,
        minutes: f64,
        hr: &[Option<f64>],
    ) -> SessionRecord {
        let n = (minutes * 60.0 / 5.0).round() as usize;
        let samples: Vec<Sample> = (0..n)
            .map(|k| Sample {
                t_s: k as u64 * 5,
                power_w: 150.0,
                hr_bpm: hr[k % hr.len()],
            })
            .collect();
        SessionRecord::new(index, day, 20.0, 5, samples).unwrap()
    }

    #[test]
    fn trimp_is_duration_times_mean_hr() {
        let s = session_with(1, 1, 60.0, &[Some(150.0)]);
        assert!((session_trimp(&s).unwrap() - 9000.0).abs() < 1e-9);
    }

    #[test]
    fn tiny_session_trimp() {
        let samples = vec![
            Sample { t_s: 0, power_w: 100.0, hr_bpm: Some(90.0) },
            Sample { t_s: 5, power_w: 120.0, hr_bpm: Some(95.0) },
            Sample { t_s: 10, power_w: 110.0, hr_bpm: Some(96.0) },
        ];
        let s = SessionRecord::new(1, 1, 17.3, 5, samples).unwrap();
        let expected = 0.25 * (90.0 + 95.0 + 96.0) / 3.0;
        assert!((session_trimp(&s).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 23.417).abs() < 5e-4);
    }

    #[test]
    fn power_only_session_errors() {
        let s = session_with(1, 1, 10.0, &[None]);
        let err = session_trimp(&s).unwrap_err();
        assert!(err.to_string().contains("no heart-rate data"), "{err}");
    }

    #[test]
    fn same_day_sessions_add() {
        let a = session_with(1, 3, 60.0, &[Some(150.0)]); // 9000
        let b = session_with(2, 3, 20.0, &[Some(150.0)]); // 3000
        let hist = RiderHistory::new("r", vec![a, b]).unwrap();
        let loads = build_daily_loads(&hist, false).unwrap();
        assert!((loads.load_on_day(3) - 12000.0).abs() < 1e-9);
    }

    #[test]
    fn rest_days_are_zero() {
        let a = session_with(1, 1, 60.0, &[Some(150.0)]);
        let b = session_with(2, 5, 60.0, &[Some(150.0)]);
        let hist = RiderHistory::new("r", vec![a, b]).unwrap();
        let loads = build_daily_loads(&hist, false).unwrap();
        for day in 2..=4 {
            assert_eq!(loads.load_on_day(day), 0.0);
        }
        assert_eq!(loads.horizon(), 5);
    }

    #[test]
    fn normalization_divides_by_mean_of_nonzero() {
        // raw {0, 8000, 12000, 0, 10000} -> {0, 0.8, 1.2, 0, 1.0}, constant 10000
        let mk = |idx: usize, day: u32, hr: f64| session_with(idx, day, 60.0, &[Some(hr)]);
        let hist = RiderHistory::new(
            "r",
            vec![mk(1, 2, 8000.0 / 60.0), mk(2, 3, 200.0), mk(3, 5, 10000.0 / 60.0)],
        );
        // hr 8000/60 = 133.3 bpm, 200 bpm, 166.7 bpm over 60 min -> 8000, 12000, 10000
        let hist = hist.unwrap();
        let loads = build_daily_loads(&hist, true).unwrap();
        assert!((loads.normalization_constant - 10000.0).abs() < 1e-6);
        let expect = [0.0, 0.8, 1.2, 0.0, 1.0];
        for (got, want) in loads.loads.iter().zip(expect) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn sum_preserved_and_denormalization_recovers_raw() {
        let sessions = vec![
            session_with(1, 1, 45.0, &[Some(140.0)]),
            session_with(2, 4, 90.0, &[Some(120.0), Some(160.0)]),
            session_with(3, 4, 30.0, &[Some(100.0)]),
        ];
        let total: f64 = sessions.iter().map(|s| session_trimp(s).unwrap()).sum();
        let hist = RiderHistory::new("r", sessions).unwrap();
        let raw = build_daily_loads(&hist, false).unwrap();
        assert!((raw.loads.iter().sum::<f64>() - total).abs() < 1e-9);

        let norm = build_daily_loads(&hist, true).unwrap();
        let recovered = norm.to_raw();
        for (a, b) in recovered.loads.iter().zip(&raw.loads) {
            let rel = (a - b).abs() / b.abs().max(1.0);
            assert!(rel < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn missing_hr_session_is_reported_not_skipped() {
        let ok = session_with(1, 1, 60.0, &[Some(150.0)]);
        let bad = session_with(2, 2, 60.0, &[None]);
        let hist = RiderHistory::new("r", vec![ok, bad]).unwrap();
        let err = build_daily_loads(&hist, false).unwrap_err();
        assert!(err.to_string().contains('2'), "{err}");
    }
}
