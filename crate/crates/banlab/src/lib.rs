//! Training-load and performance analysis for endurance field data.
//!
//! `banlab` turns raw power/heart-rate recordings into quantified
//! training loads, estimates per-session performance with honest
//! measurement variances, and fits the fitness-fatigue impulse-response
//! model of training by maximum likelihood, with standard errors.
//!
//! The pipeline has four stages, each usable on its own:
//!
//! 1. [`session`] — parse and validate 5-second session files into a
//!    rider history.
//! 2. [`training_load`] — TRIMP per session and the per-day load series.
//! 3. [`metrics`] — per-session performance estimates (power at a
//!    heart-rate threshold, heart rate at a power threshold, d-second
//!    maximum power, critical-power peak) with delta-method variances.
//! 4. [`tp_model`] — the six-parameter training-performance fit:
//!    profiled, multi-start maximum likelihood with grid-correlation
//!    seeding and observed-information standard errors.
//!
//! [`banister`] holds the forward model (preparedness trajectories and
//! the analytic timing of a single bout), and [`synth`] generates
//! synthetic riders with known ground truth at both the metric level and
//! the raw 5-second sample level.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```text
//! examples/
//! ├── timing_and_response.rs     # single-bout response and t0 / t* / t_half
//! ├── two_session_degeneracy.rs  # why the model cannot plan schedules
//! ├── preparedness_trajectory.rs # daily W over a periodized block
//! ├── trimp_loads.rs             # session TRIMP and the daily load series
//! ├── mmp_and_power_duration.rs  # MMP scans and both duration-curve fits
//! ├── hr_power_metrics.rs        # pooled HR/power fit and its two metrics
//! ├── synthetic_recovery.rs      # metric-level truth recovery with SEs
//! └── end_to_end_pipeline.rs     # raw files -> ingest -> metrics -> fit
//! ```
//!
//! ```bash
//! cargo run -p banlab --example timing_and_response
//! cargo run -p banlab --example synthetic_recovery
//! cargo run -p banlab --example end_to_end_pipeline
//! ```
//!
//! The same pipeline is scriptable through the `banlab` binary
//! (`ingest | trimp | preparedness | timing | metrics | fit | simulate |
//! report`); see [`cli`].
//!
//! Every stochastic step is keyed to one seed integer: identical inputs
//! and seed give bit-identical results, including across serial and
//! parallel multi-start execution.

pub mod banister;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod optim;
pub mod session;
pub mod synth;
pub mod tp_model;
pub mod training_load;

pub use error::{Error, Result};
