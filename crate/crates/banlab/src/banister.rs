//! Fitness-fatigue impulse response model.
//!
//! Preparedness on day i is the benefit of all prior training decayed at
//! rate 1/tau_a, minus k_f times the detriment decayed at the faster rate
//! 1/tau_f:
//!
//! ```text
//! W_i = sum_{j<i} w_j e^(-(i-j)/tau_a)  -  k_f * sum_{j<i} w_j e^(-(i-j)/tau_f)
//! ```
//!
//! The benefit scale is fixed at 1 and the baseline at 0; only the
//! relative size k_f and the two time constants matter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training_load::DailyLoadSeries;

/// Tolerance for the numeric half-decay solve, in days.
const T_HALF_TOL_DAYS: f64 = 1e-8;

/// The three free shape parameters of the impulse response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanisterParams {
    /// Fatigue scale relative to fitness; > 1 means training's immediate
    /// net effect is negative.
    pub k_f: f64,
    /// Fitness (benefit) time constant in days.
    pub tau_a: f64,
    /// Fatigue (detriment) time constant in days.
    pub tau_f: f64,
}

impl BanisterParams {
    pub fn new(k_f: f64, tau_a: f64, tau_f: f64) -> Result<Self> {
        let p = Self { k_f, tau_a, tau_f };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k_f", self.k_f), ("tau_a", self.tau_a), ("tau_f", self.tau_f)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Benefit decay rate, 1/tau_a.
    pub fn rate_a(&self) -> f64 {
        1.0 / self.tau_a
    }

    /// Detriment decay rate, 1/tau_f.
    pub fn rate_f(&self) -> f64 {
        1.0 / self.tau_f
    }
}

/// Daily preparedness trajectory; index 0 is day 1, which is always zero
/// because training before day 1 is unquantified.
#[derive(Debug, Clone)]
pub struct PreparednessSeries {
    values: Vec<f64>,
}

impl PreparednessSeries {
    /// Preparedness on 1-based `day`.
    pub fn on_day(&self, day: u32) -> f64 {
        self.values[day as usize - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> u32 {
        self.values.len() as u32
    }
}

/// Daily preparedness over `horizon` days, by the single-pass recursion
///
/// ```text
/// A_i = e^(-1/tau_a) (A_{i-1} + w_{i-1}),   A_1 = 0
/// F_i = e^(-1/tau_f) (F_{i-1} + w_{i-1}),   F_1 = 0
/// W_i = A_i - k_f F_i
/// ```
///
/// Loads beyond the series are treated as zero, so the horizon may extend
/// past the recorded period.
pub fn preparedness(
    loads: &DailyLoadSeries,
    params: &BanisterParams,
    horizon: u32,
) -> Result<PreparednessSeries> {
    params.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidParams("horizon must be at least one day".into()));
    }
    let decay_a = (-params.rate_a()).exp();
    let decay_f = (-params.rate_f()).exp();
    let mut values = Vec::with_capacity(horizon as usize);
    let mut benefit = 0.0;
    let mut detriment = 0.0;
    values.push(0.0);
    for day in 2..=horizon {
        let w_prev = loads.load_on_day(day - 1);
        benefit = decay_a * (benefit + w_prev);
        detriment = decay_f * (detriment + w_prev);
        values.push(benefit - params.k_f * detriment);
    }
    Ok(PreparednessSeries { values })
}

/// Response at time `t` days to a single bout of load `w` at time 0:
/// `w (e^(-t/tau_a) - k_f e^(-t/tau_f))`.
pub fn single_bout_response(w: f64, params: &BanisterParams, t: f64) -> Result<f64> {
    params.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParams(format!("t must be >= 0, got {t}")));
    }
    Ok(w * ((-params.rate_a() * t).exp() - params.k_f * (-params.rate_f() * t).exp()))
}

/// Response at time `t` to two unit bouts, the second `s` days after the
/// first: `W_t + W_{t-s}`.
pub fn two_session_response(params: &BanisterParams, t: f64, s: f64) -> Result<f64> {
    if !(s.is_finite() && (0.0..=t).contains(&s)) {
        return Err(Error::InvalidParams(format!("spacing s={s} outside [0, t={t}]")));
    }
    Ok(single_bout_response(1.0, params, t)? + single_bout_response(1.0, params, t - s)?)
}

/// Timing of the single-bout response curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimingQuantities {
    /// Time the response returns to baseline (zero crossing from below);
    /// meaningful only when `crosses_baseline` is set.
    pub t_zero: f64,
    /// Time of maximum response.
    pub t_star: f64,
    /// Time, past the peak, at which the response has decayed to half its
    /// maximum; absent when there is no positive peak.
    pub t_half: Option<f64>,
    /// Whether the response starts negative and crosses zero (k_f > 1 with
    /// fatigue decaying faster than fitness).
    pub crosses_baseline: bool,
}

/// Closed-form peak/crossing times plus the numerically solved half-decay
/// time of the single-bout response.
pub fn timing_quantities(params: &BanisterParams) -> Result<TimingQuantities> {
    params.validate()?;
    let r_a = params.rate_a();
    let r_f = params.rate_f();
    let dr = r_f - r_a;
    if dr.abs() < 1e-12 * r_f.max(r_a) {
        return Err(Error::Degenerate(
            "tau_a equals tau_f: timing quantities are undefined".into(),
        ));
    }
    let t_zero = params.k_f.ln() / dr;
    let t_star = (params.k_f * r_f / r_a).ln() / dr;
    let crosses_baseline = params.k_f > 1.0 && dr > 0.0;

    let t_half = if t_star > 0.0 {
        let peak = single_bout_response(1.0, params, t_star)?;
        if peak > 0.0 {
            Some(bisect_half(params, t_star, peak))
        } else {
            None
        }
    } else {
        None
    };

    Ok(TimingQuantities {
        t_zero,
        t_star,
        t_half,
        crosses_baseline,
    })
}

/// Solve W(t) = peak/2 for t > t_star by bisection. Past the peak the
/// response decays monotonically to zero, so the root is bracketed on
/// (t_star, t_star + 20 tau_a).
fn bisect_half(params: &BanisterParams, t_star: f64, peak: f64) -> f64 {
    let target = peak / 2.0;
    let mut lo = t_star;
    let mut hi = t_star + 20.0 * params.tau_a;
    while hi - lo > T_HALF_TOL_DAYS {
        let mid = 0.5 * (lo + hi);
        let w = single_bout_response(1.0, params, mid).expect("params already validated");
        if w > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn params(k_f: f64, tau_a: f64, tau_f: f64) -> BanisterParams {
        BanisterParams::new(k_f, tau_a, tau_f).unwrap()
    }

    /// Direct evaluation of the double sum defining W_i.
    fn direct_double_sum(loads: &[f64], p: &BanisterParams, horizon: u32) -> Vec<f64> {
        let (r_a, r_f) = (p.rate_a(), p.rate_f());
        (1..=horizon)
            .map(|i| {
                let mut w = 0.0;
                for j in 1..i {
                    let load = loads.get(j as usize - 1).copied().unwrap_or(0.0);
                    let lag = f64::from(i - j);
                    w += load * ((-r_a * lag).exp() - p.k_f * (-r_f * lag).exp());
                }
                w
            })
            .collect()
    }

    #[test]
    fn zero_loads_zero_preparedness() {
        let loads = DailyLoadSeries::raw(vec![0.0; 30]).unwrap();
        let series = preparedness(&loads, &params(2.0, 8.0, 2.0), 30).unwrap();
        assert!(series.values().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn single_load_matches_single_bout_formula() {
        let p = params(2.0, 8.0, 2.0);
        let mut loads = vec![0.0; 40];
        loads[0] = 1.0;
        let loads = DailyLoadSeries::raw(loads).unwrap();
        let series = preparedness(&loads, &p, 40).unwrap();
        for t in 1..=30u32 {
            let expect = single_bout_response(1.0, &p, f64::from(t)).unwrap();
            let got = series.on_day(1 + t);
            assert!((got - expect).abs() < 1e-12, "t={t}: {got} vs {expect}");
        }
    }

    #[test]
    fn recursion_matches_double_sum_on_random_loads() {
        let mut rng = StdRng::seed_from_u64(7);
        let loads_raw: Vec<f64> = (0..60)
            .map(|_| if rng.gen_bool(0.6) { rng.gen_range(0.0..3.0) } else { 0.0 })
            .collect();
        let p = params(1.7, 35.0, 9.0);
        let loads = DailyLoadSeries::raw(loads_raw.clone()).unwrap();
        let series = preparedness(&loads, &p, 60).unwrap();
        let direct = direct_double_sum(&loads_raw, &p, 60);
        for (a, b) in series.values().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn preparedness_is_linear_in_loads() {
        let mut rng = StdRng::seed_from_u64(11);
        let w: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..2.0)).collect();
        let v: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..2.0)).collect();
        let (a, b) = (1.75, 0.6);
        let combo: Vec<f64> = w.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let p = params(2.5, 40.0, 5.0);
        let horizon = 70;
        let sw = preparedness(&DailyLoadSeries::raw(w).unwrap(), &p, horizon).unwrap();
        let sv = preparedness(&DailyLoadSeries::raw(v).unwrap(), &p, horizon).unwrap();
        let sc = preparedness(&DailyLoadSeries::raw(combo).unwrap(), &p, horizon).unwrap();
        for i in 0..horizon as usize {
            let expect = a * sw.values()[i] + b * sv.values()[i];
            assert!((sc.values()[i] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn immediate_response_is_one_minus_kf() {
        let p = params(2.0, 8.0, 2.0);
        assert!((single_bout_response(1.0, &p, 0.0).unwrap() - (1.0 - 2.0)).abs() < 1e-15);
        assert_eq!(single_bout_response(0.0, &p, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn paper_example_timing() {
        // k_f = 2, tau_a = 8, tau_f = 2 gives t0 = 1.8, t* = 5.5, t_half = 13.3
        let p = params(2.0, 8.0, 2.0);
        let t = timing_quantities(&p).unwrap();
        assert!((t.t_zero - 2.0f64.ln() / 0.375).abs() < 1e-12);
        assert!((t.t_zero - 1.8).abs() < 0.05);
        assert!((t.t_star - 5.5).abs() < 0.05);
        assert!((t.t_half.unwrap() - 13.3).abs() < 0.05);
        assert!(t.crosses_baseline);
    }

    #[test]
    fn t_star_is_the_grid_maximum() {
        let p = params(2.0, 8.0, 2.0);
        let t = timing_quantities(&p).unwrap();
        let w_star = single_bout_response(1.0, &p, t.t_star).unwrap();
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..20000 {
            let x = k as f64 * 1e-3;
            let w = single_bout_response(1.0, &p, x).unwrap();
            if w > best.1 {
                best = (x, w);
            }
        }
        assert!((best.0 - 5.5).abs() < 0.05);
        assert!(w_star >= best.1 - 1e-9);
    }

    #[test]
    fn kf_one_has_no_crossing() {
        let p = params(1.0, 8.0, 2.0);
        let t = timing_quantities(&p).unwrap();
        assert!(!t.crosses_baseline);
        assert_eq!(t.t_zero, 0.0);
        // response stays positive for t > 0
        for k in 1..200 {
            let w = single_bout_response(1.0, &p, k as f64 * 0.25).unwrap();
            assert!(w > 0.0);
        }
        // a positive peak still exists, so the half-decay time is defined
        assert!(t.t_half.is_some());
    }

    #[test]
    fn equal_time_constants_are_degenerate() {
        let p = params(2.0, 5.0, 5.0);
        assert!(timing_quantities(&p).is_err());
    }

    #[test]
    fn zero_crossing_sign_change_at_t_zero() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..20 {
            let p = params(
                rng.gen_range(1.1..4.0),
                rng.gen_range(20.0..120.0),
                rng.gen_range(1.0..15.0),
            );
            let t = timing_quantities(&p).unwrap();
            assert!(t.crosses_baseline);
            let eps = 1e-6;
            let before = single_bout_response(1.0, &p, t.t_zero - eps).unwrap();
            let after = single_bout_response(1.0, &p, t.t_zero + eps).unwrap();
            assert!(before < 0.0 && after > 0.0, "crossing not at t0 for {p:?}");
        }
    }

    #[test]
    fn response_vanishes_at_long_times() {
        let p = params(2.0, 8.0, 2.0);
        let t = timing_quantities(&p).unwrap();
        let peak = single_bout_response(1.0, &p, t.t_star).unwrap();
        let tail = single_bout_response(1.0, &p, 50.0 * p.tau_a).unwrap();
        assert!(tail.abs() < 1e-6 * peak.abs());
    }

    #[test]
    fn two_sessions_coincident_doubles_response() {
        let p = params(2.0, 8.0, 2.0);
        let w_t = single_bout_response(1.0, &p, 7.0).unwrap();
        assert!((two_session_response(&p, 7.0, 0.0).unwrap() - 2.0 * w_t).abs() < 1e-15);
    }

    #[test]
    fn second_session_at_evaluation_time() {
        let p = params(2.0, 8.0, 2.0);
        let w_t = single_bout_response(1.0, &p, 7.0).unwrap();
        let got = two_session_response(&p, 7.0, 7.0).unwrap();
        assert!((got - (w_t + (1.0 - p.k_f))).abs() < 1e-15);
    }

    #[test]
    fn spacing_outside_range_errors() {
        let p = params(2.0, 8.0, 2.0);
        assert!(two_session_response(&p, 5.0, 6.0).is_err());
        assert!(two_session_response(&p, 5.0, -0.5).is_err());
    }

    #[test]
    fn two_session_grid_argmax_is_t_star_and_zero_spacing() {
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..20 {
            let p = params(
                rng.gen_range(1.1..4.0),
                rng.gen_range(15.0..100.0),
                rng.gen_range(1.0..12.0),
            );
            let t = timing_quantities(&p).unwrap();
            let mut ts: Vec<f64> = (0..=300).map(|k| k as f64 * (3.0 * t.t_star) / 300.0).collect();
            ts.push(t.t_star);
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            let mut best = (f64::NAN, f64::NAN, f64::NEG_INFINITY);
            for &tv in &ts {
                for &sv in ts.iter().filter(|&&s| s <= tv) {
                    let w = two_session_response(&p, tv, sv).unwrap();
                    if w > best.2 {
                        best = (tv, sv, w);
                    }
                }
            }
            let peak = single_bout_response(1.0, &p, t.t_star).unwrap();
            assert_eq!(best.1, 0.0, "argmax spacing for {p:?}");
            assert!((best.0 - t.t_star).abs() < 1e-12, "argmax time for {p:?}");
            assert!((best.2 - 2.0 * peak).abs() < 1e-12);
        }
    }
}
