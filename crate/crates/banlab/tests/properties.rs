//! Property tests for the structural invariants.

use banlab::banister::{preparedness, single_bout_response, BanisterParams};
use banlab::metrics::{hr_at_power, power_at_hr, HrPowerFit, SessionCoeffs};
use banlab::session::{RiderHistory, Sample, SessionRecord};
use banlab::training_load::DailyLoadSeries;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn params_strategy() -> impl Strategy<Value = BanisterParams> {
    (0.2f64..5.0, 5.0f64..150.0, 0.5f64..40.0)
        .prop_map(|(k_f, tau_a, tau_f)| BanisterParams { k_f, tau_a, tau_f })
}

proptest! {
    /// Preparedness is linear in the loads.
    #[test]
    fn preparedness_linear_in_loads(
        w in prop::collection::vec(0.0f64..3.0, 10..80),
        v in prop::collection::vec(0.0f64..3.0, 10..80),
        a in 0.1f64..3.0,
        b in 0.1f64..3.0,
        params in params_strategy(),
    ) {
        let len = w.len().min(v.len());
        let w = &w[..len];
        let v = &v[..len];
        let combo: Vec<f64> = w.iter().zip(v).map(|(x, y)| a * x + b * y).collect();
        let horizon = len as u32;
        let sw = preparedness(&DailyLoadSeries::raw(w.to_vec()).unwrap(), &params, horizon).unwrap();
        let sv = preparedness(&DailyLoadSeries::raw(v.to_vec()).unwrap(), &params, horizon).unwrap();
        let sc = preparedness(&DailyLoadSeries::raw(combo).unwrap(), &params, horizon).unwrap();
        for k in 0..len {
            let expect = a * sw.values()[k] + b * sv.values()[k];
            prop_assert!((sc.values()[k] - expect).abs() < 1e-9);
        }
    }

    /// A single bout's response fades to nothing once the slower of the
    /// two components has had many lifetimes.
    #[test]
    fn single_bout_response_decays(params in params_strategy()) {
        let slow = params.tau_a.max(params.tau_f);
        let far = single_bout_response(1.0, &params, 60.0 * slow).unwrap();
        prop_assert!(far.abs() < 1e-6);
    }

    /// Normalizing then denormalizing the load series is the identity.
    #[test]
    fn normalization_round_trip(loads in prop::collection::vec(0.0f64..20_000.0, 5..60)) {
        prop_assume!(loads.iter().any(|&w| w > 0.0));
        let nonzero: Vec<f64> = loads.iter().copied().filter(|&w| w > 0.0).collect();
        let constant = nonzero.iter().sum::<f64>() / nonzero.len() as f64;
        prop_assume!(constant > 0.0);
        let normalized = DailyLoadSeries::with_constant(
            loads.iter().map(|w| w / constant).collect(),
            constant,
        )
        .unwrap();
        let recovered = normalized.to_raw();
        for (a, b) in recovered.loads.iter().zip(&loads) {
            let rel = (a - b).abs() / b.abs().max(1.0);
            prop_assert!(rel < 1e-12);
        }
    }

    /// Pooled heart-rate percentiles are monotone in q and bounded by the
    /// sample extremes.
    #[test]
    fn hr_percentile_monotone_and_bounded(
        hrs in prop::collection::vec(21.0f64..249.0, 1..200),
        q1 in 0.0f64..100.0,
        q2 in 0.0f64..100.0,
    ) {
        let samples: Vec<Sample> = hrs
            .iter()
            .enumerate()
            .map(|(k, &hr)| Sample { t_s: k as u64 * 5, power_w: 0.0, hr_bpm: Some(hr) })
            .collect();
        let history = RiderHistory::new(
            "r",
            vec![SessionRecord::new(1, 1, 20.0, 5, samples).unwrap()],
        )
        .unwrap();
        let (lo_q, hi_q) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let lo = history.hr_percentile(lo_q).unwrap();
        let hi = history.hr_percentile(hi_q).unwrap();
        prop_assert!(lo <= hi);
        let min = hrs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = hrs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((min..=max).contains(&lo) && (min..=max).contains(&hi));
    }

    /// Delta-method variances are non-negative and finite whenever the
    /// coefficient covariance is positive semi-definite.
    #[test]
    fn delta_method_variance_non_negative(
        seed_matrix in prop::collection::vec(-2.0f64..2.0, 9),
        intercept in 40.0f64..90.0,
        slope in 0.05f64..0.6,
        drift in -1e-4f64..1e-4,
        h_q in 100.0f64..220.0,
        p_q in 50.0f64..450.0,
    ) {
        // PSD by construction: A' A
        let a = DMatrix::from_row_slice(3, 3, &seed_matrix);
        let cov = a.transpose() * &a;
        let fit = HrPowerFit {
            sessions: vec![SessionCoeffs {
                session_index: 1,
                intercept,
                slope,
                n_pairs: 50,
            }],
            c: drift,
            tau_sq: 1.0,
            covariance: cov,
            lag_s: 15,
            excluded: vec![],
            n_rows: 50,
        };
        let (_, lambda_p) = power_at_hr(&fit, 1, h_q, 20.0, 3600.0).unwrap();
        prop_assert!(lambda_p.is_finite() && lambda_p >= 0.0);
        let (_, lambda_h) = hr_at_power(&fit, 1, p_q, 20.0, 3600.0).unwrap();
        prop_assert!(lambda_h.is_finite() && lambda_h >= 0.0);
    }
}
