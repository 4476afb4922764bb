//! Joint heart-rate/power model over a rider history.
//!
//! Heart rate at time t responds linearly to power l seconds earlier,
//! with a per-session intercept and slope and one shared cardiac-drift
//! coefficient:
//!
//! ```text
//! hr[i, t] = a_i + b_i * power[i, t - l] + c * temp_i * t + noise
//! ```
//!
//! Under normal i.i.d. noise the maximum-likelihood fit is one linear
//! least-squares solve over the pooled history. The coefficient
//! covariance from that solve is what the per-session performance
//! metrics propagate through the delta method.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::session::{RiderHistory, SessionRecord};

/// Treat a session's power regressor as constant (rank-deficient) below
/// this sum of squared deviations.
const MIN_POWER_SSD: f64 = 1e-7;

/// Minimum lag-aligned (hr, power) pairs for a session to enter the fit.
const MIN_PAIRS_PER_SESSION: usize = 10;

/// Slopes smaller than this cannot be inverted into a power estimate.
const MIN_SLOPE: f64 = 1e-9;

/// Per-session coefficients of the joint fit.
#[derive(Debug, Clone)]
pub struct SessionCoeffs {
    pub session_index: usize,
    /// Intercept a_i in bpm.
    pub intercept: f64,
    /// Slope b_i in bpm per watt.
    pub slope: f64,
    /// Lag-aligned pairs this session contributed.
    pub n_pairs: usize,
}

/// Result of the joint fit: per-session (a_i, b_i), the shared drift
/// coefficient, and the full coefficient covariance.
#[derive(Debug, Clone)]
pub struct HrPowerFit {
    /// Retained sessions in history order.
    pub sessions: Vec<SessionCoeffs>,
    /// Cardiac drift in bpm per degree-Celsius-second.
    pub c: f64,
    /// Residual variance (maximum-likelihood estimate, RSS/N) in bpm^2.
    pub tau_sq: f64,
    /// Covariance of (a_1, b_1, ..., a_n, b_n, c), unbiased scale.
    pub covariance: DMatrix<f64>,
    /// Heart-rate lag in seconds.
    pub lag_s: u32,
    /// Sessions left out of the fit, with reasons.
    pub excluded: Vec<(usize, String)>,
    /// Total rows in the design.
    pub n_rows: usize,
}

/// Options for [`fit_hr_power_opts`]; the plain [`fit_hr_power`] uses the
/// defaults with a caller-supplied lag.
#[derive(Debug, Clone, Copy)]
pub struct HrPowerOptions {
    pub lag_s: u32,
    /// Include the shared drift column. Disabled only for diagnostics
    /// (reduces a single-session fit to simple linear regression).
    pub include_drift: bool,
}

impl Default for HrPowerOptions {
    fn default() -> Self {
        Self {
            lag_s: 15,
            include_drift: true,
        }
    }
}

/// Lag-aligned (hr, lagged power, drift) rows of one session.
type SessionRows = Vec<(f64, f64, f64)>;

/// One lag-aligned regression row.
struct Row {
    slot: usize,
    hr: f64,
    lagged_power: f64,
    drift: f64,
}

/// Fit the pooled heart-rate/power model with lag `lag_s` seconds.
pub fn fit_hr_power(history: &RiderHistory, lag_s: u32) -> Result<HrPowerFit> {
    fit_hr_power_opts(
        history,
        &HrPowerOptions {
            lag_s,
            ..HrPowerOptions::default()
        },
    )
}

pub fn fit_hr_power_opts(history: &RiderHistory, opts: &HrPowerOptions) -> Result<HrPowerFit> {
    let mut excluded: Vec<(usize, String)> = Vec::new();
    let mut usable: Vec<(&SessionRecord, SessionRows)> = Vec::new();

    for session in &history.sessions {
        match session_pairs(session, opts.lag_s) {
            Ok(pairs) => {
                if pairs.len() < MIN_PAIRS_PER_SESSION {
                    excluded.push((
                        session.session_index,
                        format!("only {} lag-aligned pairs", pairs.len()),
                    ));
                    continue;
                }
                let mean_p = pairs.iter().map(|r| r.1).sum::<f64>() / pairs.len() as f64;
                let ssd: f64 = pairs.iter().map(|r| (r.1 - mean_p).powi(2)).sum();
                if ssd < MIN_POWER_SSD {
                    excluded.push((session.session_index, "rank-deficient".into()));
                    continue;
                }
                usable.push((session, pairs));
            }
            Err(reason) => excluded.push((session.session_index, reason)),
        }
    }

    let min_sessions = if opts.include_drift { 2 } else { 1 };
    if usable.len() < min_sessions {
        return Err(Error::InsufficientData(format!(
            "only {} usable sessions for the heart-rate/power fit (need {})",
            usable.len(),
            min_sessions
        )));
    }

    let n = usable.len();
    let p = if opts.include_drift { 2 * n + 1 } else { 2 * n };
    let rows = || {
        usable.iter().enumerate().flat_map(|(slot, (_, pairs))| {
            pairs.iter().map(move |&(hr, lagged_power, drift)| Row {
                slot,
                hr,
                lagged_power,
                drift,
            })
        })
    };
    let n_rows: usize = usable.iter().map(|(_, pairs)| pairs.len()).sum();
    if n_rows <= p {
        return Err(Error::InsufficientData(format!(
            "{n_rows} rows cannot identify {p} coefficients"
        )));
    }

    // Normal equations, accumulated sparsely: each row touches its
    // session's intercept and slope columns plus the shared drift column.
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for row in rows() {
        let ia = 2 * row.slot;
        let ib = ia + 1;
        let mut idx = [ia, ib, usize::MAX];
        let mut val = [1.0, row.lagged_power, 0.0];
        let terms = if opts.include_drift {
            idx[2] = p - 1;
            val[2] = row.drift;
            3
        } else {
            2
        };
        for k in 0..terms {
            xty[idx[k]] += val[k] * row.hr;
            for l in k..terms {
                xtx[(idx[k], idx[l])] += val[k] * val[l];
            }
        }
    }
    for k in 0..p {
        for l in (k + 1)..p {
            xtx[(l, k)] = xtx[(k, l)];
        }
    }

    // Column scaling keeps the solve well conditioned: the drift regressor
    // (degC x seconds) is orders of magnitude larger than the dummies.
    let scale: Vec<f64> = (0..p).map(|k| xtx[(k, k)].sqrt()).collect();
    if scale.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(Error::Degenerate(
            "a regression column is identically zero (drift needs nonzero temperatures)".into(),
        ));
    }
    let mut scaled = xtx.clone();
    let mut rhs = xty.clone();
    for k in 0..p {
        rhs[k] /= scale[k];
        for l in 0..p {
            scaled[(k, l)] /= scale[k] * scale[l];
        }
    }
    let chol = scaled
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("normal equations are singular".into()))?;
    let gamma = chol.solve(&rhs);
    let beta: Vec<f64> = (0..p).map(|k| gamma[k] / scale[k]).collect();
    let mut inv_scaled = DMatrix::<f64>::identity(p, p);
    chol.solve_mut(&mut inv_scaled);

    // Second pass for the residual sum of squares; avoids the cancellation
    // of the y'y - b'X'y shortcut when residuals are tiny.
    let c = if opts.include_drift { beta[p - 1] } else { 0.0 };
    let mut rss = 0.0;
    for row in rows() {
        let fitted = beta[2 * row.slot] + beta[2 * row.slot + 1] * row.lagged_power + c * row.drift;
        rss += (row.hr - fitted) * (row.hr - fitted);
    }
    let tau_sq = rss / n_rows as f64;
    let sigma_sq_unbiased = rss / (n_rows - p) as f64;
    let mut covariance = DMatrix::<f64>::zeros(p, p);
    for k in 0..p {
        for l in 0..p {
            covariance[(k, l)] = sigma_sq_unbiased * inv_scaled[(k, l)] / (scale[k] * scale[l]);
        }
    }

    let sessions = usable
        .iter()
        .enumerate()
        .map(|(slot, (session, pairs))| SessionCoeffs {
            session_index: session.session_index,
            intercept: beta[2 * slot],
            slope: beta[2 * slot + 1],
            n_pairs: pairs.len(),
        })
        .collect();

    // Without the drift column, pad the covariance with a zero row and
    // column for c so the (a_i, b_i, c) block indexing stays uniform.
    let covariance = if opts.include_drift {
        covariance
    } else {
        let mut padded = DMatrix::<f64>::zeros(p + 1, p + 1);
        padded.view_mut((0, 0), (p, p)).copy_from(&covariance);
        padded
    };

    Ok(HrPowerFit {
        sessions,
        c,
        tau_sq,
        covariance,
        lag_s: opts.lag_s,
        excluded,
        n_rows,
    })
}

/// Lag-aligned (hr, lagged power, drift) triples for one session. The
/// first lag worth of samples in each segment has no lagged power and is
/// dropped rather than imputed.
fn session_pairs(
    session: &SessionRecord,
    lag_s: u32,
) -> std::result::Result<SessionRows, String> {
    let dt = session.sampling_interval_s;
    if !lag_s.is_multiple_of(dt) {
        return Err(format!(
            "lag {lag_s}s is not a multiple of the {dt}s sampling interval"
        ));
    }
    let lag_samples = (lag_s / dt) as usize;
    let mut pairs = Vec::new();
    for segment in &session.segments {
        for j in segment.clone().skip(lag_samples) {
            if let Some(hr) = session.samples[j].hr_bpm {
                let lagged_power = session.samples[j - lag_samples].power_w;
                let drift = session.temperature_c * session.samples[j].t_s as f64;
                pairs.push((hr, lagged_power, drift));
            }
        }
    }
    if pairs.is_empty() {
        return Err("no lag-aligned heart-rate/power pairs".into());
    }
    Ok(pairs)
}

impl HrPowerFit {
    /// Position of `session_index` among the retained sessions.
    pub fn slot_of(&self, session_index: usize) -> Option<usize> {
        self.sessions.iter().position(|s| s.session_index == session_index)
    }

    pub fn coeffs(&self, session_index: usize) -> Option<&SessionCoeffs> {
        self.slot_of(session_index).map(|k| &self.sessions[k])
    }

    /// 3x3 covariance of (a_i, b_i, c) for the session at `slot`.
    fn sub_covariance(&self, slot: usize) -> [[f64; 3]; 3] {
        let p = self.covariance.nrows();
        let idx = [2 * slot, 2 * slot + 1, p - 1];
        let mut out = [[0.0; 3]; 3];
        for (r, &i) in idx.iter().enumerate() {
            for (q, &j) in idx.iter().enumerate() {
                out[r][q] = self.covariance[(i, j)];
            }
        }
        out
    }
}

fn quadratic_form(m: &[[f64; 3]; 3], v: &[f64; 3]) -> f64 {
    let mut acc = 0.0;
    for r in 0..3 {
        for q in 0..3 {
            acc += v[r] * m[r][q] * v[q];
        }
    }
    // The covariance is positive semi-definite; tiny negatives are
    // floating-point residue.
    acc.max(0.0)
}

/// Expected power at heart rate `h_q` for one session, with its
/// delta-method variance.
///
/// The point estimate inverts the fitted line at the reference time and
/// temperature; the variance propagates the (a_i, b_i, c) covariance
/// through the gradient of that inversion.
pub fn power_at_hr(
    fit: &HrPowerFit,
    session_index: usize,
    h_q: f64,
    temp_r_c: f64,
    t_r_s: f64,
) -> Result<(f64, f64)> {
    let slot = fit.slot_of(session_index).ok_or_else(|| {
        Error::InsufficientData(format!("session {session_index} is not in the fit"))
    })?;
    let coeffs = &fit.sessions[slot];
    if coeffs.slope.abs() < MIN_SLOPE {
        return Err(Error::Degenerate(format!(
            "session {session_index} has a degenerate heart-rate/power slope"
        )));
    }
    let ref_drift = temp_r_c * t_r_s;
    let estimate = (h_q - coeffs.intercept - fit.c * ref_drift) / coeffs.slope;
    let gradient = [
        -1.0 / coeffs.slope,
        -estimate / coeffs.slope,
        -ref_drift / coeffs.slope,
    ];
    let lambda = quadratic_form(&fit.sub_covariance(slot), &gradient);
    Ok((estimate, lambda))
}

/// Expected heart rate needed to hold power `p_q` in one session, with
/// its delta-method variance. This is the fitted line evaluated forwards,
/// so the variance is an exact quadratic form, not an approximation.
pub fn hr_at_power(
    fit: &HrPowerFit,
    session_index: usize,
    p_q: f64,
    temp_r_c: f64,
    t_r_s: f64,
) -> Result<(f64, f64)> {
    let slot = fit.slot_of(session_index).ok_or_else(|| {
        Error::InsufficientData(format!("session {session_index} is not in the fit"))
    })?;
    let coeffs = &fit.sessions[slot];
    let ref_drift = temp_r_c * t_r_s;
    let estimate = coeffs.intercept + coeffs.slope * p_q + fit.c * ref_drift;
    let v = [1.0, p_q, ref_drift];
    let lambda = quadratic_form(&fit.sub_covariance(slot), &v);
    Ok((estimate, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::Sample;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    /// Synthetic session generated exactly from the model.
    #[allow(clippy::too_many_arguments)]
    fn exact_session(
        index: usize,
        day: u32,
        temp: f64,
        a: f64,
        b: f64,
        c: f64,
        n: usize,
        noise_sd: f64,
        rng: &mut StdRng,
    ) -> SessionRecord {
        let lag_samples = 3usize; // 15 s at 5 s spacing
        let powers: Vec<f64> = (0..n).map(|_| rng.gen_range(80.0..360.0)).collect();
        let noise = Normal::new(0.0, noise_sd.max(1e-300)).unwrap();
        let samples: Vec<Sample> = (0..n)
            .map(|k| {
                let t_s = k as u64 * 5;
                let lagged = powers[k.saturating_sub(lag_samples)];
                let mut hr = a + b * lagged + c * temp * t_s as f64;
                if noise_sd > 0.0 {
                    hr += noise.sample(rng);
                }
                Sample {
                    t_s,
                    power_w: powers[k],
                    hr_bpm: Some(hr.clamp(21.0, 249.0)),
                }
            })
            .collect();
        SessionRecord::new(index, day, temp, 5, samples).unwrap()
    }

    #[test]
    fn zero_noise_recovers_coefficients() {
        let mut rng = StdRng::seed_from_u64(5);
        let c = 1e-5;
        let truths = [(62.0, 0.28), (70.0, 0.25), (58.0, 0.31)];
        let sessions: Vec<SessionRecord> = truths
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                exact_session(k + 1, (k + 1) as u32, 15.0 + k as f64, a, b, c, 600, 0.0, &mut rng)
            })
            .collect();
        let history = RiderHistory::new("r", sessions).unwrap();
        let fit = fit_hr_power(&history, 15).unwrap();
        assert_eq!(fit.sessions.len(), 3);
        for (coeffs, &(a, b)) in fit.sessions.iter().zip(&truths) {
            assert!((coeffs.intercept - a).abs() / a < 1e-8, "a: {}", coeffs.intercept);
            assert!((coeffs.slope - b).abs() / b < 1e-8, "b: {}", coeffs.slope);
        }
        assert!((fit.c - c).abs() / c < 1e-6, "c: {}", fit.c);
        assert!(fit.tau_sq < 1e-12);
    }

    #[test]
    fn default_lag_is_three_samples_at_5s() {
        let opts = HrPowerOptions::default();
        assert_eq!(opts.lag_s, 15);
        assert_eq!(opts.lag_s / 5, 3);
    }

    #[test]
    fn constant_power_session_is_excluded() {
        let mut rng = StdRng::seed_from_u64(9);
        let c = 1e-5;
        let mut sessions = vec![
            exact_session(1, 1, 15.0, 62.0, 0.28, c, 400, 1.0, &mut rng),
            exact_session(2, 2, 18.0, 60.0, 0.30, c, 400, 1.0, &mut rng),
        ];
        let flat: Vec<Sample> = (0..400)
            .map(|k| Sample {
                t_s: k as u64 * 5,
                power_w: 200.0,
                hr_bpm: Some(140.0),
            })
            .collect();
        sessions.push(SessionRecord::new(3, 3, 20.0, 5, flat).unwrap());
        let history = RiderHistory::new("r", sessions).unwrap();
        let fit = fit_hr_power(&history, 15).unwrap();
        assert_eq!(fit.sessions.len(), 2);
        assert!(fit
            .excluded
            .iter()
            .any(|(idx, why)| *idx == 3 && why.contains("rank-deficient")));
    }

    #[test]
    fn too_few_usable_sessions_errors() {
        let mut rng = StdRng::seed_from_u64(13);
        let sessions = vec![exact_session(1, 1, 15.0, 62.0, 0.28, 1e-5, 400, 1.0, &mut rng)];
        let history = RiderHistory::new("r", sessions).unwrap();
        assert!(fit_hr_power(&history, 15).is_err());
    }

    #[test]
    fn single_session_no_drift_matches_simple_regression() {
        let mut rng = StdRng::seed_from_u64(17);
        let session = exact_session(1, 1, 15.0, 64.0, 0.27, 0.0, 500, 2.5, &mut rng);
        let history = RiderHistory::new("r", vec![session]).unwrap();
        let fit = fit_hr_power_opts(
            &history,
            &HrPowerOptions {
                lag_s: 15,
                include_drift: false,
            },
        )
        .unwrap();

        // two-variable least squares oracle on the same pairs
        let pairs = session_pairs(&history.sessions[0], 15).unwrap();
        let n = pairs.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &(hr, pw, _) in &pairs {
            sx += pw;
            sy += hr;
            sxx += pw * pw;
            sxy += pw * hr;
        }
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        assert!((fit.sessions[0].slope - slope).abs() < 1e-10);
        assert!((fit.sessions[0].intercept - intercept).abs() < 1e-10);
    }

    #[test]
    fn power_at_hr_hand_example() {
        // a=60, b=0.3, c=1e-5, h_q=150, T_R=20, t_R=3600 -> (150-60-0.72)/0.3
        let fit = HrPowerFit {
            sessions: vec![SessionCoeffs {
                session_index: 1,
                intercept: 60.0,
                slope: 0.3,
                n_pairs: 100,
            }],
            c: 1e-5,
            tau_sq: 0.0,
            covariance: DMatrix::zeros(3, 3),
            lag_s: 15,
            excluded: vec![],
            n_rows: 100,
        };
        let (estimate, lambda) = power_at_hr(&fit, 1, 150.0, 20.0, 3600.0).unwrap();
        assert!((estimate - 297.6).abs() < 1e-10);
        assert_eq!(lambda, 0.0); // zero covariance carries no uncertainty
    }

    #[test]
    fn hr_at_power_hand_example() {
        let fit = HrPowerFit {
            sessions: vec![SessionCoeffs {
                session_index: 1,
                intercept: 60.0,
                slope: 0.3,
                n_pairs: 100,
            }],
            c: 1e-5,
            tau_sq: 0.0,
            covariance: DMatrix::zeros(3, 3),
            lag_s: 15,
            excluded: vec![],
            n_rows: 100,
        };
        let (estimate, _) = hr_at_power(&fit, 1, 300.0, 20.0, 3600.0).unwrap();
        assert!((estimate - 150.72).abs() < 1e-10);
        let (at_zero, _) = hr_at_power(&fit, 1, 0.0, 20.0, 0.0).unwrap();
        assert!((at_zero - 60.0).abs() < 1e-12);
    }

    #[test]
    fn larger_intercept_needs_higher_hr() {
        let mk = |a: f64| HrPowerFit {
            sessions: vec![SessionCoeffs {
                session_index: 1,
                intercept: a,
                slope: 0.3,
                n_pairs: 100,
            }],
            c: 0.0,
            tau_sq: 0.0,
            covariance: DMatrix::zeros(3, 3),
            lag_s: 15,
            excluded: vec![],
            n_rows: 100,
        };
        let (low, _) = hr_at_power(&mk(60.0), 1, 300.0, 20.0, 3600.0).unwrap();
        let (high, _) = hr_at_power(&mk(70.0), 1, 300.0, 20.0, 3600.0).unwrap();
        assert!(high > low);
    }

    #[test]
    fn degenerate_slope_rejected() {
        let fit = HrPowerFit {
            sessions: vec![SessionCoeffs {
                session_index: 1,
                intercept: 60.0,
                slope: 1e-12,
                n_pairs: 100,
            }],
            c: 0.0,
            tau_sq: 0.0,
            covariance: DMatrix::zeros(3, 3),
            lag_s: 15,
            excluded: vec![],
            n_rows: 100,
        };
        assert!(power_at_hr(&fit, 1, 150.0, 20.0, 3600.0).is_err());
    }

    #[test]
    fn forward_and_inverse_metrics_agree_on_the_fitted_line() {
        let mut rng = StdRng::seed_from_u64(21);
        let sessions = vec![
            exact_session(1, 1, 15.0, 62.0, 0.28, 1e-5, 400, 2.0, &mut rng),
            exact_session(2, 3, 18.0, 60.0, 0.30, 1e-5, 400, 2.0, &mut rng),
        ];
        let history = RiderHistory::new("r", sessions).unwrap();
        let fit = fit_hr_power(&history, 15).unwrap();
        let h_q = 152.0;
        let (p_hat, _) = power_at_hr(&fit, 2, h_q, 20.0, 3600.0).unwrap();
        let (h_back, _) = hr_at_power(&fit, 2, p_hat, 20.0, 3600.0).unwrap();
        assert!((h_back - h_q).abs() < 1e-9);
    }
}
