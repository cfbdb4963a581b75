//! Adaptive-memory multi-batch L-BFGS.
//!
//! Stochastic L-BFGS trains on random batches whose consecutive members
//! overlap, so that curvature pairs are measured on shared samples. This
//! crate adds two knobs on top of that scheme:
//!
//! * **adaptive memory** – the number of stored curvature pairs starts small
//!   and doubles each time the validation loss shows strictly shrinking
//!   improvements, so second-order information is trusted more as training
//!   settles near a minimum;
//! * **resetting** – while memory is still small, a full store is wiped
//!   instead of rolling over.
//!
//! The four variants (`MB`, `MB-AM`, `MB-R`, `MB-AMR`) and an Adam baseline
//! train a one-hidden-layer MLP; [`harness::monte_carlo`] compares them over
//! repeated seeded runs.
//!
//! ```
//! use amlbfgs::data::synth_gaussian_blobs;
//! use amlbfgs::config::ExperimentConfig;
//! use amlbfgs::harness::run_repetition;
//! use amlbfgs::optim::Method;
//!
//! let data = synth_gaussian_blobs(2, 60, 3, 6.0, 1);
//! let mut cfg = ExperimentConfig::default();
//! cfg.dataset.test_count = 20;
//! cfg.model.hidden = 4;
//! cfg.lbfgs.batch_size = 40;
//! cfg.lbfgs.iterations = 30;
//! cfg.run.methods = vec![Method::MbAm];
//! let runs = run_repetition(&data, &cfg, 0).unwrap();
//! assert!(runs[0].final_ccr.unwrap() > 90.0);
//! ```

pub mod batching;
pub mod config;
pub mod curvature;
pub mod data;
pub mod direction;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod optim;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use linalg::ParamVector;
pub use rng::RngState;
