//! Fixed-budget training runs for a single method on a prepared problem.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{AbortContext, Error, Result};
use crate::linalg::ParamVector;
use crate::model::MlpSpec;
use crate::objective::MlpObjective;
use crate::optim::{AdamParams, AdamState, IterationRecord, LbfgsParams, Method, MlpMonitor, TrainState};
use crate::rng::RngState;

/// Train, validation and test sets sharing one feature space.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: MlpSpec,
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

impl Problem {
    /// Digest of all three partitions; equal digests mean identical data.
    pub fn fingerprint(&self) -> u64 {
        let parts = [
            self.train.fingerprint(),
            self.validation.fingerprint(),
            self.test.fingerprint(),
        ];
        parts
            .iter()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, p| (h ^ p).wrapping_mul(0x0100_0000_01b3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub lbfgs: LbfgsParams,
    pub lbfgs_iterations: usize,
    pub adam: AdamParams,
    pub adam_iterations: usize,
    /// Evaluate the test set every iteration rather than only at the end.
    pub record_test_metrics: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            lbfgs: LbfgsParams::default(),
            lbfgs_iterations: 200,
            adam: AdamParams::default(),
            adam_iterations: 200,
            record_test_metrics: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortRecord {
    pub reason: String,
    pub context: AbortContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    pub repetition: usize,
    pub seed: u64,
    /// Fingerprint of the data the run saw.
    pub data_fingerprint: u64,
    pub history: Vec<IterationRecord>,
    /// Test CCR (%) of the final parameters; `None` for aborted runs.
    pub final_ccr: Option<f64>,
    pub final_test_loss: Option<f64>,
    pub final_theta: ParamVector,
    pub abort: Option<AbortRecord>,
}

impl RunResult {
    pub fn is_aborted(&self) -> bool {
        self.abort.is_some()
    }
}

/// Identifies a run inside a Monte Carlo experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunTag {
    pub repetition: usize,
    pub seed: u64,
}

/// Checks method settings against the problem before any computation.
pub fn check_options(opts: &TrainOptions, method: Method, problem: &Problem) -> Result<()> {
    let n_train = problem.train.len();
    match method.lbfgs_variant() {
        Some(variant) => {
            opts.lbfgs.validate(variant)?;
            if opts.lbfgs.batch_size > n_train {
                return Err(Error::config(
                    "lbfgs.batch_size",
                    format!("{} exceeds the {n_train} training rows", opts.lbfgs.batch_size),
                ));
            }
            if variant.is_adaptive() && problem.validation.is_empty() {
                return Err(Error::config(
                    "dataset.validation_fraction",
                    format!("{method} needs a non-empty validation set"),
                ));
            }
        }
        None => {
            opts.adam.validate()?;
            if opts.adam.batch_size > n_train {
                return Err(Error::config(
                    "adam.batch_size",
                    format!("{} exceeds the {n_train} training rows", opts.adam.batch_size),
                ));
            }
        }
    }
    if problem.spec.param_count() == 0 || problem.spec.n_in != problem.train.n_features {
        return Err(Error::Dimension {
            expected: problem.spec.n_in,
            actual: problem.train.n_features,
        });
    }
    Ok(())
}

/// Runs `method` for its fixed iteration budget from `theta0`.
///
/// Configuration problems are returned as errors before any work is done.
/// Numeric failures during training end the run early and are reported in
/// [`RunResult::abort`] together with the partial history.
pub fn train(
    opts: &TrainOptions,
    method: Method,
    problem: &Problem,
    theta0: ParamVector,
    batch_rng: RngState,
    tag: RunTag,
) -> Result<RunResult> {
    check_options(opts, method, problem)?;
    if theta0.len() != problem.spec.param_count() {
        return Err(Error::Dimension {
            expected: problem.spec.param_count(),
            actual: theta0.len(),
        });
    }
    let objective = MlpObjective::new(problem.spec, &problem.train)?;
    let mut monitor = MlpMonitor {
        spec: problem.spec,
        validation: Some(&problem.validation),
        test: opts.record_test_metrics.then_some(&problem.test),
    };

    let (theta, history, abort) = match method.lbfgs_variant() {
        Some(variant) => {
            let mut state = TrainState::new(variant, opts.lbfgs, theta0, problem.train.len(), batch_rng)?;
            let abort = drive(opts.lbfgs_iterations, |_| {
                state.step(&objective, &mut monitor).map(|_| ())
            });
            (state.theta, state.history, abort)
        }
        None => {
            let mut rng = batch_rng;
            let mut state = AdamState::new(theta0, opts.adam);
            let n_train = problem.train.len();
            let abort = drive(opts.adam_iterations, |_| {
                let samples = rng.uniform_indices(n_train, opts.adam.batch_size)?;
                state.step(&objective, &samples, &mut monitor).map(|_| ())
            });
            (state.theta, state.history, abort)
        }
    };

    let abort = abort.map(|e| abort_record(e, history.len()));
    let finals = match abort {
        Some(_) => None,
        None => Some(MlpMonitor::evaluate(&problem.spec, &theta, &problem.test)?),
    };
    Ok(RunResult {
        method,
        repetition: tag.repetition,
        seed: tag.seed,
        data_fingerprint: problem.fingerprint(),
        history,
        final_ccr: finals.map(|f| f.1),
        final_test_loss: finals.map(|f| f.0),
        final_theta: theta,
        abort,
    })
}

fn drive(iterations: usize, mut step: impl FnMut(usize) -> Result<()>) -> Option<Error> {
    (0..iterations).find_map(|k| step(k).err())
}

fn abort_record(err: Error, iteration: usize) -> AbortRecord {
    let context = match &err {
        Error::Numeric { context, .. } => context.clone(),
        _ => AbortContext {
            iteration,
            memory: 0,
            stored_pairs: 0,
        },
    };
    AbortRecord {
        reason: err.to_string(),
        context,
    }
}
