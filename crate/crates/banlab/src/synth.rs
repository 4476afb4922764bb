//! Synthetic rider data with known ground truth.
//!
//! Two levels: metric-level series (performance values straight from the
//! model, for estimator oracles) and raw-level histories (5 s power and
//! heart-rate traces that ingest like real recordings, for end-to-end
//! pipeline tests).

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::banister::preparedness;
#[cfg(test)]
use crate::banister::BanisterParams;
use crate::error::{Error, Result};
use crate::metrics::{MetricKind, MetricSeries, LAMBDA_FLOOR};
use crate::session::{RiderHistory, Sample, SessionRecord};
use crate::tp_model::TpParams;
use crate::training_load::{session_trimp, DailyLoadSeries};

/// When each training day happens and how hard it is.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleSpec {
    /// Daily loads given outright (index 0 = day 1); days with positive
    /// load carry a session.
    Explicit(Vec<f64>),
    /// Sessions drawn per week with loads uniform in the given range.
    Recipe {
        sessions_per_week: u32,
        load_lo: f64,
        load_hi: f64,
    },
}

/// How measurement variances are assigned to sessions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPolicy {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
}

/// Extra settings for raw 5 s sample generation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RawLevelConfig {
    /// Heart-rate/power slope b, bpm per watt; must be positive.
    pub hr_slope: f64,
    /// Cardiac drift coefficient c, bpm per degC-second.
    pub drift: f64,
    /// Heart-rate noise standard deviation, bpm.
    pub hr_noise_sd: f64,
    /// Heart-rate threshold the intercept linkage targets, bpm.
    pub hr_threshold: f64,
    pub temp_lo_c: f64,
    pub temp_hi_c: f64,
    pub session_minutes_lo: u32,
    pub session_minutes_hi: u32,
    pub power_lo_w: f64,
    pub power_hi_w: f64,
    pub sampling_interval_s: u32,
    pub lag_s: u32,
    /// Reference time and temperature the linkage evaluates at.
    pub t_r_s: f64,
    pub temp_r_c: f64,
}

impl Default for RawLevelConfig {
    fn default() -> Self {
        Self {
            hr_slope: 0.3,
            drift: 1e-5,
            hr_noise_sd: 3.0,
            hr_threshold: 150.0,
            temp_lo_c: 8.0,
            temp_hi_c: 28.0,
            session_minutes_lo: 45,
            session_minutes_hi: 120,
            power_lo_w: 80.0,
            power_hi_w: 380.0,
            sampling_interval_s: 5,
            lag_s: 15,
            t_r_s: 3600.0,
            temp_r_c: 20.0,
        }
    }
}

/// Complete description of one synthetic rider.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub truth: TpParams,
    pub schedule: ScheduleSpec,
    pub n_days: u32,
    pub lambda: LambdaPolicy,
    /// Present when 5 s sample streams should be generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<RawLevelConfig>,
    pub rng_seed: u64,
}

impl SynthConfig {
    /// Validate and collect non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.truth.validate()?;
        if self.n_days == 0 {
            return Err(Error::InvalidParams("n_days must be at least 1".into()));
        }
        match &self.schedule {
            ScheduleSpec::Explicit(loads) => {
                if loads.is_empty() {
                    return Err(Error::InvalidParams("explicit schedule is empty".into()));
                }
                if loads.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(Error::InvalidParams("explicit loads must be >= 0".into()));
                }
            }
            ScheduleSpec::Recipe {
                sessions_per_week,
                load_lo,
                load_hi,
            } => {
                if *sessions_per_week == 0 || *sessions_per_week > 7 {
                    return Err(Error::InvalidParams(
                        "sessions_per_week must be between 1 and 7".into(),
                    ));
                }
                if !(*load_lo > 0.0 && load_hi >= load_lo) {
                    return Err(Error::InvalidParams("load range must be positive".into()));
                }
            }
        }
        match self.lambda {
            LambdaPolicy::Constant(l) if !(l.is_finite() && l >= 0.0) => {
                return Err(Error::InvalidParams("lambda must be >= 0".into()));
            }
            LambdaPolicy::Uniform { lo, hi } if !(lo >= 0.0 && hi >= lo) => {
                return Err(Error::InvalidParams("lambda range must be non-negative".into()));
            }
            _ => {}
        }
        if let Some(raw) = &self.raw {
            if !(raw.hr_slope.is_finite() && raw.hr_slope > 0.0) {
                return Err(Error::InvalidParams(
                    "raw generation needs a positive heart-rate/power slope".into(),
                ));
            }
            if raw.sampling_interval_s == 0 || raw.lag_s % raw.sampling_interval_s != 0 {
                return Err(Error::InvalidParams(
                    "lag must be a multiple of the sampling interval".into(),
                ));
            }
            if !(raw.power_lo_w >= 0.0 && raw.power_hi_w > raw.power_lo_w) {
                return Err(Error::InvalidParams("power range must be increasing".into()));
            }
            if raw.session_minutes_lo == 0 || raw.session_minutes_hi < raw.session_minutes_lo {
                return Err(Error::InvalidParams("session length range must be increasing".into()));
            }
        }
        let mut warnings = Vec::new();
        if self.n_days < 30 {
            warnings.push(format!(
                "{} days is short for a meaningful fit; 30 or more recommended",
                self.n_days
            ));
        }
        Ok(warnings)
    }
}

/// Metric-level output: a performance series, the load series behind it,
/// and the exact parameters that produced them.
#[derive(Debug, Clone)]
pub struct MetricLevelData {
    pub metrics: MetricSeries,
    pub loads: DailyLoadSeries,
    pub truth: TpParams,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent per-day random stream, so generation order (or
/// parallelism) cannot change the output.
fn day_rng(seed: u64, day: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(u64::from(day))))
}

/// Materialise the schedule as a daily load vector over `n_days`.
fn schedule_loads(config: &SynthConfig) -> Vec<f64> {
    match &config.schedule {
        ScheduleSpec::Explicit(loads) => {
            let mut out = loads.clone();
            out.resize(config.n_days as usize, 0.0);
            out
        }
        ScheduleSpec::Recipe {
            sessions_per_week,
            load_lo,
            load_hi,
        } => {
            let mut out = vec![0.0; config.n_days as usize];
            let weeks = config.n_days.div_ceil(7);
            for week in 0..weeks {
                let mut rng = day_rng(config.rng_seed, u32::MAX - week);
                let mut days: Vec<u32> = (0..7).map(|d| week * 7 + d + 1).collect();
                // partial shuffle picking sessions_per_week distinct days
                for k in 0..(*sessions_per_week as usize).min(days.len()) {
                    let j = rng.gen_range(k..days.len());
                    days.swap(k, j);
                    let day = days[k];
                    if day <= config.n_days {
                        out[day as usize - 1] = rng.gen_range(*load_lo..=*load_hi);
                    }
                }
            }
            out
        }
    }
}

/// Draw a session's measurement variance under the policy.
fn draw_lambda(policy: &LambdaPolicy, rng: &mut ChaCha8Rng) -> f64 {
    let l = match policy {
        LambdaPolicy::Constant(l) => *l,
        LambdaPolicy::Uniform { lo, hi } => {
            if hi > lo {
                rng.gen_range(*lo..*hi)
            } else {
                *lo
            }
        }
    };
    l.max(LAMBDA_FLOOR)
}

/// Generate a performance series straight from the model: latent
/// performance normal around alpha + beta W, observed through the
/// per-session measurement variance.
pub fn generate_metric_level(config: &SynthConfig) -> Result<MetricLevelData> {
    config.validate()?;
    let loads = DailyLoadSeries::raw(schedule_loads(config))?;
    let series = preparedness(&loads, &config.truth.banister, loads.horizon())?;

    let mut indices = Vec::new();
    let mut days = Vec::new();
    let mut values = Vec::new();
    let mut variances = Vec::new();
    for day in 1..=loads.horizon() {
        if loads.load_on_day(day) <= 0.0 {
            continue;
        }
        let mut rng = day_rng(config.rng_seed, day);
        let lambda = draw_lambda(&config.lambda, &mut rng);
        let w = series.on_day(day);
        let latent = config.truth.alpha
            + config.truth.beta * w
            + config.truth.sigma * standard_normal(&mut rng);
        let observed = latent + lambda.sqrt() * standard_normal(&mut rng);
        indices.push(indices.len() + 1);
        days.push(day);
        values.push(observed);
        variances.push(lambda);
    }
    let metrics = MetricSeries::new(MetricKind::Synthetic, indices, days, values, variances)?;
    Ok(MetricLevelData {
        metrics,
        loads,
        truth: config.truth,
    })
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sample(rng)
}

/// Generate a full raw-level history: per-session power traces, heart
/// rate responding to lagged power with drift and noise, and intercepts
/// linked to preparedness so that the power-at-heart-rate metric tracks
/// alpha + beta W.
///
/// Sessions are generated in day order: each day's preparedness depends
/// only on the loads (session TRIMPs) of earlier days, so the emitted
/// history is exactly consistent with the ingest + load pipeline.
pub fn generate_raw_level(config: &SynthConfig) -> Result<RiderHistory> {
    config.validate()?;
    let raw = config.raw.as_ref().ok_or_else(|| {
        Error::InvalidParams("raw-level generation needs the raw config block".into())
    })?;
    let session_days: Vec<u32> = {
        let loads = schedule_loads(config);
        (1..=config.n_days)
            .filter(|&d| loads[d as usize - 1] > 0.0)
            .collect()
    };
    if session_days.is_empty() {
        return Err(Error::InvalidParams("schedule contains no session days".into()));
    }

    let decay_a = (-config.truth.banister.rate_a()).exp();
    let decay_f = (-config.truth.banister.rate_f()).exp();
    let mut benefit = 0.0;
    let mut detriment = 0.0;
    let mut sessions = Vec::with_capacity(session_days.len());
    let mut next_day_iter = session_days.iter().copied().peekable();

    for day in 1..=config.n_days {
        if day > 1 {
            // roll preparedness state forward over yesterday's load
            let w_prev = sessions
                .last()
                .filter(|s: &&SessionRecord| s.day_number == day - 1)
                .map(|s| session_trimp(s).expect("generated sessions have heart rate"))
                .unwrap_or(0.0);
            benefit = decay_a * (benefit + w_prev);
            detriment = decay_f * (detriment + w_prev);
        }
        if next_day_iter.peek() != Some(&day) {
            continue;
        }
        next_day_iter.next();

        let w_today = benefit - config.truth.banister.k_f * detriment;
        let mut rng = day_rng(config.rng_seed, day);
        let record = generate_session(
            sessions.len() + 1,
            day,
            w_today,
            &config.truth,
            raw,
            &mut rng,
        )?;
        sessions.push(record);
    }

    RiderHistory::new(format!("synthetic-{}", config.rng_seed), sessions)
}

/// One synthetic session: block-structured power, heart rate from the
/// lagged linear response.
fn generate_session(
    session_index: usize,
    day: u32,
    w_today: f64,
    truth: &TpParams,
    raw: &RawLevelConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SessionRecord> {
    let dt = raw.sampling_interval_s;
    let minutes = rng.gen_range(raw.session_minutes_lo..=raw.session_minutes_hi);
    let n = (minutes * 60 / dt) as usize;
    let lag_samples = (raw.lag_s / dt) as usize;

    // the session's latent performance: on the line, plus sigma scatter
    let target_power = truth.alpha
        + truth.beta * w_today
        + truth.sigma * standard_normal(rng);

    // power: random steady blocks of 1-5 minutes, scaled with the day's
    // latent performance so the power-only metrics carry signal too
    let fitness_factor = (target_power / truth.alpha).max(0.1);
    let mut powers = Vec::with_capacity(n);
    while powers.len() < n {
        let block_len = rng.gen_range(60 / dt..=300 / dt) as usize;
        let level = rng.gen_range(raw.power_lo_w..raw.power_hi_w) * fitness_factor;
        for _ in 0..block_len.min(n - powers.len()) {
            powers.push(level);
        }
    }

    // intercept linked to preparedness: power at the heart-rate threshold
    // equals the latent performance at the reference time and temperature
    let intercept =
        raw.hr_threshold - raw.drift * raw.temp_r_c * raw.t_r_s - raw.hr_slope * target_power;
    let temperature = rng.gen_range(raw.temp_lo_c..=raw.temp_hi_c);
    let noise = Normal::new(0.0, raw.hr_noise_sd.max(1e-300)).unwrap();

    let samples: Vec<Sample> = (0..n)
        .map(|k| {
            let t_s = k as u64 * u64::from(dt);
            let lagged = powers[k.saturating_sub(lag_samples)];
            let mut hr = intercept
                + raw.hr_slope * lagged
                + raw.drift * temperature * t_s as f64;
            if raw.hr_noise_sd > 0.0 {
                hr += noise.sample(rng);
            }
            Sample {
                t_s,
                power_w: powers[k],
                hr_bpm: Some(hr.clamp(21.0, 249.0)),
            }
        })
        .collect();
    SessionRecord::new(session_index, day, temperature, dt, samples)
}

/// Write a history to `<dir>/<rider_id>/session_NNN.csv` (+ sidecars) in
/// the exact format the ingest stage reads.
pub fn write_history_files(history: &RiderHistory, dir: &Path) -> Result<Vec<PathBuf>> {
    let rider_dir = dir.join(&history.rider_id);
    std::fs::create_dir_all(&rider_dir).map_err(|source| Error::Io {
        path: rider_dir.clone(),
        source,
    })?;
    let mut written = Vec::new();
    for session in &history.sessions {
        let csv_path = rider_dir.join(format!("session_{:03}.csv", session.session_index));
        crate::session::write_session_csv(session, &csv_path)?;
        let meta_path = crate::session::meta_path_for(&csv_path);
        crate::session::write_session_meta(session, &meta_path)?;
        written.push(csv_path);
        written.push(meta_path);
    }
    Ok(written)
}
