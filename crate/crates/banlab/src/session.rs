//! Session files, validation, and rider histories.
//!
//! A session is a power/heart-rate trace sampled at a fixed interval
//! (5 s by default). Sessions are stored one per CSV file with a JSON
//! sidecar carrying the day number, ambient temperature, and sampling
//! interval. A rider history is the ordered collection of all sessions
//! for one rider over the training period.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Expected CSV header of a session file.
pub const SESSION_CSV_HEADER: &str = "t_s,power_w,hr_bpm";

/// Default sampling interval in seconds.
pub const DEFAULT_SAMPLING_INTERVAL_S: u32 = 5;

/// Physiological bounds for a plausible heart-rate sample (exclusive).
pub const HR_MIN_BPM: f64 = 20.0;
pub const HR_MAX_BPM: f64 = 250.0;

/// One recorded sample: time from session start, power, and optional
/// heart rate (heart-rate straps drop out more often than power meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Seconds from session start; a multiple of the sampling interval.
    pub t_s: u64,
    /// Power output in watts, non-negative.
    pub power_w: f64,
    /// Heart rate in beats per minute, if recorded.
    pub hr_bpm: Option<f64>,
}

/// Sidecar metadata for one session file (`<name>.meta.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionMeta {
    /// Days since the rider's day 1 (1-based).
    pub day_number: u32,
    /// Ambient outside temperature in degrees Celsius.
    pub temperature_c: f64,
    /// Sampling interval in seconds.
    #[serde(default = "default_interval")]
    pub sampling_interval_s: u32,
    /// Optional explicit ordinal; assigned from sort order when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_index: Option<usize>,
}

fn default_interval() -> u32 {
    DEFAULT_SAMPLING_INTERVAL_S
}

/// One validated ride.
#[derive(Debug, Clone)]
pub struct SessionRecord {
    /// 1-based ordinal within the rider history.
    pub session_index: usize,
    /// Days since the rider's day 1 (1-based).
    pub day_number: u32,
    /// Ambient outside temperature in degrees Celsius.
    pub temperature_c: f64,
    /// Sampling interval in seconds.
    pub sampling_interval_s: u32,
    /// Samples in strictly increasing time order.
    pub samples: Vec<Sample>,
    /// Contiguous runs of samples with exact interval spacing. Recording
    /// dropouts split the trace; window scans never cross a split.
    pub segments: Vec<Range<usize>>,
}

impl SessionRecord {
    /// Validate samples and build the segment index.
    pub fn new(
        session_index: usize,
        day_number: u32,
        temperature_c: f64,
        sampling_interval_s: u32,
        samples: Vec<Sample>,
    ) -> Result<Self> {
        if sampling_interval_s == 0 {
            return Err(Error::Validation("sampling interval must be positive".into()));
        }
        if day_number == 0 {
            return Err(Error::Validation("day_number must be >= 1".into()));
        }
        if samples.is_empty() {
            return Err(Error::Validation("empty session file".into()));
        }
        let dt = u64::from(sampling_interval_s);
        for (k, s) in samples.iter().enumerate() {
            if s.t_s % dt != 0 {
                return Err(Error::Validation(format!(
                    "timestamp {} is not a multiple of the {}s sampling interval",
                    s.t_s, dt
                )));
            }
            if k > 0 && s.t_s <= samples[k - 1].t_s {
                return Err(Error::Validation(format!(
                    "non-monotone timestamps at t={}",
                    s.t_s
                )));
            }
            if !s.power_w.is_finite() || s.power_w < 0.0 {
                return Err(Error::Validation(format!(
                    "power {} out of range at t={}",
                    s.power_w, s.t_s
                )));
            }
            if let Some(hr) = s.hr_bpm {
                if !hr.is_finite() || hr <= HR_MIN_BPM || hr >= HR_MAX_BPM {
                    return Err(Error::Validation(format!(
                        "heart rate {} out of range at t={}",
                        hr, s.t_s
                    )));
                }
            }
        }
        let segments = split_segments(&samples, dt);
        Ok(Self {
            session_index,
            day_number,
            temperature_c,
            sampling_interval_s,
            samples,
            segments,
        })
    }

    /// Recording duration in minutes: samples x interval / 60.
    pub fn duration_min(&self) -> f64 {
        self.samples.len() as f64 * f64::from(self.sampling_interval_s) / 60.0
    }

    /// Mean power over the whole session.
    pub fn mean_power_w(&self) -> f64 {
        self.samples.iter().map(|s| s.power_w).sum::<f64>() / self.samples.len() as f64
    }

    /// Mean of the present heart-rate samples, if any.
    pub fn mean_hr_bpm(&self) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for s in &self.samples {
            if let Some(hr) = s.hr_bpm {
                sum += hr;
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// Count of samples with a heart-rate value.
    pub fn hr_sample_count(&self) -> usize {
        self.samples.iter().filter(|s| s.hr_bpm.is_some()).count()
    }
}

fn split_segments(samples: &[Sample], dt: u64) -> Vec<Range<usize>> {
    let mut segments = Vec::new();
    let mut start = 0usize;
    for k in 1..samples.len() {
        if samples[k].t_s - samples[k - 1].t_s > dt {
            segments.push(start..k);
            start = k;
        }
    }
    segments.push(start..samples.len());
    segments
}

/// Cached per-session summary, printed by `banlab ingest`.
#[derive(Debug, Clone, Serialize)]
pub struct SessionSummary {
    pub session_index: usize,
    pub day_number: u32,
    pub temperature_c: f64,
    pub samples: usize,
    pub segments: usize,
    pub duration_min: f64,
    pub mean_power_w: f64,
    pub mean_hr_bpm: Option<f64>,
}

/// All sessions of one rider over the training period.
#[derive(Debug, Clone)]
pub struct RiderHistory {
    pub rider_id: String,
    /// Sorted by day number then session index.
    pub sessions: Vec<SessionRecord>,
    /// Days spanned: the largest day number seen.
    pub training_period: u32,
    pooled_hr_sorted: Vec<f64>,
    pooled_power_sorted: Vec<f64>,
    summaries: Vec<SessionSummary>,
}

impl RiderHistory {
    /// Sort, validate, and cache pooled statistics.
    pub fn new(rider_id: impl Into<String>, mut sessions: Vec<SessionRecord>) -> Result<Self> {
        if sessions.is_empty() {
            return Err(Error::Validation("rider history has no sessions".into()));
        }
        sessions.sort_by_key(|s| (s.day_number, s.session_index));
        for w in sessions.windows(2) {
            if w[0].session_index == w[1].session_index {
                return Err(Error::Validation(format!(
                    "duplicate session_index {}",
                    w[0].session_index
                )));
            }
        }
        let mut by_index: Vec<_> = sessions.iter().map(|s| (s.session_index, s.day_number)).collect();
        by_index.sort_unstable();
        for w in by_index.windows(2) {
            if w[1].1 < w[0].1 {
                return Err(Error::Validation(format!(
                    "day_number decreases from session {} to session {}",
                    w[0].0, w[1].0
                )));
            }
        }
        let training_period = sessions.iter().map(|s| s.day_number).max().unwrap();
        let mut pooled_hr: Vec<f64> = sessions
            .iter()
            .flat_map(|s| s.samples.iter().filter_map(|x| x.hr_bpm))
            .collect();
        pooled_hr.sort_by(f64::total_cmp);
        let mut pooled_power: Vec<f64> = sessions
            .iter()
            .flat_map(|s| s.samples.iter().map(|x| x.power_w))
            .collect();
        pooled_power.sort_by(f64::total_cmp);
        let summaries = sessions
            .iter()
            .map(|s| SessionSummary {
                session_index: s.session_index,
                day_number: s.day_number,
                temperature_c: s.temperature_c,
                samples: s.samples.len(),
                segments: s.segments.len(),
                duration_min: s.duration_min(),
                mean_power_w: s.mean_power_w(),
                mean_hr_bpm: s.mean_hr_bpm(),
            })
            .collect();
        Ok(Self {
            rider_id: rider_id.into(),
            sessions,
            training_period,
            pooled_hr_sorted: pooled_hr,
            pooled_power_sorted: pooled_power,
            summaries,
        })
    }

    /// Number of sessions.
    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// Cached per-session summaries in history order.
    pub fn summaries(&self) -> &[SessionSummary] {
        &self.summaries
    }

    pub fn session_by_index(&self, session_index: usize) -> Option<&SessionRecord> {
        self.sessions.iter().find(|s| s.session_index == session_index)
    }

    /// Empirical q-th percentile of all heart-rate samples pooled over
    /// the history, by linear interpolation between closest ranks.
    pub fn hr_percentile(&self, q: f64) -> Result<f64> {
        if self.pooled_hr_sorted.is_empty() {
            return Err(Error::InsufficientData(
                "no heart-rate samples anywhere in the history".into(),
            ));
        }
        percentile_sorted(&self.pooled_hr_sorted, q)
    }

    /// Empirical q-th percentile of all power samples pooled over the history.
    pub fn power_percentile(&self, q: f64) -> Result<f64> {
        percentile_sorted(&self.pooled_power_sorted, q)
    }
}

/// Linear-interpolation percentile of an ascending slice.
fn percentile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&q) || !q.is_finite() {
        return Err(Error::InvalidParams(format!("percentile {q} outside [0, 100]")));
    }
    if sorted.is_empty() {
        return Err(Error::InsufficientData("no samples to take a percentile of".into()));
    }
    let h = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        Ok(sorted[lo])
    } else {
        Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
    }
}

/// Parse one session CSV (`t_s,power_w,hr_bpm`) with its metadata.
///
/// Rows with an empty heart-rate field are kept with `hr_bpm = None`
/// so power-only metrics can still use the session.
pub fn parse_session(path: &Path, meta: &SessionMeta) -> Result<SessionRecord> {
    let raw = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = raw.strip_prefix('\u{feff}').unwrap_or(&raw);
    let mut lines = text.lines();
    let header = lines.next().map(str::trim);
    if header.is_none() || text.trim().is_empty() {
        return Err(Error::Validation(format!(
            "empty session file {}",
            path.display()
        )));
    }
    if header != Some(SESSION_CSV_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header '{SESSION_CSV_HEADER}'"),
        });
    }
    let mut samples = Vec::new();
    for (k, line) in lines.enumerate() {
        let line_no = k + 2;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (t, p, h) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(p), Some(h), None) => (t.trim(), p.trim(), h.trim()),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: "expected exactly 3 comma-separated fields".into(),
                })
            }
        };
        let t_s: u64 = t.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("bad timestamp '{t}'"),
        })?;
        let power_w: f64 = p.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("bad power '{p}'"),
        })?;
        let hr_bpm = if h.is_empty() {
            None
        } else {
            Some(h.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("bad heart rate '{h}'"),
            })?)
        };
        samples.push(Sample { t_s, power_w, hr_bpm });
    }
    if samples.is_empty() {
        return Err(Error::Validation(format!(
            "empty session file {}",
            path.display()
        )));
    }
    SessionRecord::new(
        meta.session_index.unwrap_or(1),
        meta.day_number,
        meta.temperature_c,
        meta.sampling_interval_s,
        samples,
    )
}

/// Write a session back to CSV in the canonical format.
pub fn write_session_csv(session: &SessionRecord, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(session.samples.len() * 16 + 24);
    out.push_str(SESSION_CSV_HEADER);
    out.push('\n');
    for s in &session.samples {
        out.push_str(&s.t_s.to_string());
        out.push(',');
        out.push_str(&format_float(s.power_w));
        out.push(',');
        if let Some(hr) = s.hr_bpm {
            out.push_str(&format_float(hr));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write the metadata sidecar next to a session CSV.
pub fn write_session_meta(session: &SessionRecord, path: &Path) -> Result<()> {
    let meta = SessionMeta {
        day_number: session.day_number,
        temperature_c: session.temperature_c,
        sampling_interval_s: session.sampling_interval_s,
        session_index: Some(session.session_index),
    };
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Shortest decimal representation that round-trips through f64.
pub(crate) fn format_float(x: f64) -> String {
    format!("{x}")
}

/// Sidecar path for a session CSV: `ride.csv` -> `ride.meta.json`.
pub fn meta_path_for(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Load every session of `rider_id` from `dir/<rider_id>/*.csv`.
///
/// The result does not depend on directory enumeration order: sessions
/// are sorted by day number (file name breaking ties) and indices are
/// taken from the sidecars when declared, or assigned from sort order.
pub fn load_history(dir: &Path, rider_id: &str) -> Result<RiderHistory> {
    let rider_dir = dir.join(rider_id);
    if !rider_dir.is_dir() {
        return Err(Error::HistoryNotFound(rider_id.to_string()));
    }
    let mut csv_paths: Vec<PathBuf> = fs::read_dir(&rider_dir)
        .map_err(|source| Error::Io {
            path: rider_dir.clone(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    if csv_paths.is_empty() {
        return Err(Error::HistoryNotFound(rider_id.to_string()));
    }
    csv_paths.sort();

    let mut loaded = Vec::with_capacity(csv_paths.len());
    for path in &csv_paths {
        let meta_path = meta_path_for(path);
        let meta_text = fs::read_to_string(&meta_path).map_err(|_| {
            Error::Validation(format!("missing metadata sidecar {}", meta_path.display()))
        })?;
        let meta: SessionMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
            path: meta_path.clone(),
            line: 1,
            message: e.to_string(),
        })?;
        let record = parse_session(path, &meta)?;
        loaded.push((meta.session_index, path.clone(), record));
    }

    let declared = loaded.iter().filter(|(i, _, _)| i.is_some()).count();
    if declared > 0 && declared < loaded.len() {
        return Err(Error::Validation(
            "session_index declared for some session files but not all".into(),
        ));
    }
    if declared > 0 {
        let mut seen: Vec<usize> = loaded.iter().map(|(i, _, _)| i.unwrap()).collect();
        seen.sort_unstable();
        for w in seen.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Validation(format!("duplicate session_index {}", w[0])));
            }
        }
    } else {
        loaded.sort_by(|a, b| (a.2.day_number, &a.1).cmp(&(b.2.day_number, &b.1)));
        for (k, (_, _, record)) in loaded.iter_mut().enumerate() {
            record.session_index = k + 1;
        }
    }

    RiderHistory::new(rider_id, loaded.into_iter().map(|(_, _, r)| r).collect())
}
