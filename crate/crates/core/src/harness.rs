//! Monte Carlo comparison of training methods.
//!
//! Each repetition derives its own weight-initialization and batch-sampling
//! streams from the master seed. All methods inside a repetition start from
//! the same `θ_0`, use the same batch stream, and see the same partition, so
//! the comparison is paired.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::data::{split, standardize, Dataset, SplitSpec};
use crate::error::Result;
use crate::metrics::{rnk, MeanStd};
use crate::model::MlpSpec;
use crate::optim::Method;
use crate::rng::RngState;
use crate::train::{check_options, train, Problem, RunResult, RunTag, TrainOptions};

const STREAM_SPLIT: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_BATCH: u64 = 3;

/// Independent stream for `purpose` in repetition `rep`.
fn stream(seed: u64, purpose: u64, rep: usize) -> RngState {
    RngState::with_stream(seed, (purpose << 32) | rep as u64)
}

impl ExperimentConfig {
    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            lbfgs: self.lbfgs.params(),
            lbfgs_iterations: self.lbfgs.iterations,
            adam: self.adam.params(),
            adam_iterations: self.adam.iterations,
            record_test_metrics: self.run.record_test_metrics,
        }
    }

    /// Partition seed used by repetition `rep`.
    pub fn split_seed_for(&self, rep: usize) -> u64 {
        use rand::RngCore;
        if self.run.resplit_each_repetition {
            stream(self.run.seed, STREAM_SPLIT, rep).next_u64()
        } else {
            self.split_spec().split_seed
        }
    }
}

/// Partitions `dataset`, standardizes it with training statistics when
/// requested, and sizes the MLP to it.
pub fn prepare(dataset: &Dataset, config: &ExperimentConfig, split_seed: u64) -> Result<Problem> {
    dataset.validate()?;
    let spec = SplitSpec {
        split_seed,
        ..config.split_spec()
    };
    let parts = split(dataset, config.dataset.test_count, &spec)?;
    let data = if config.dataset.standardize {
        standardize(dataset, &parts.train)?
    } else {
        dataset.clone()
    };
    Ok(Problem {
        spec: MlpSpec::new(
            dataset.n_features,
            config.model.hidden,
            dataset.class_count,
            config.model.activation,
        ),
        train: data.subset(&parts.train),
        validation: data.subset(&parts.validation),
        test: data.subset(&parts.test),
    })
}

/// Every configured method on one repetition, in configuration order.
pub fn run_repetition(dataset: &Dataset, config: &ExperimentConfig, rep: usize) -> Result<Vec<RunResult>> {
    let problem = prepare(dataset, config, config.split_seed_for(rep))?;
    let opts = config.train_options();
    let seed = config.run.seed;
    let theta0 = problem.spec.init_params(&mut stream(seed, STREAM_INIT, rep));
    config
        .run
        .methods
        .iter()
        .map(|&method| {
            train(
                &opts,
                method,
                &problem,
                theta0.clone(),
                stream(seed, STREAM_BATCH, rep),
                RunTag { repetition: rep, seed },
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub ccr: Option<MeanStd>,
    pub rnk: Option<MeanStd>,
    pub completed: usize,
    pub aborted: usize,
}

/// Mean and standard deviation of final CCR and per-repetition rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub repetitions: usize,
    /// Repetitions in which every method finished; only these are ranked.
    pub ranked_repetitions: usize,
    /// Runs left out of the aggregates because they aborted.
    pub excluded_runs: usize,
    pub rows: Vec<MethodSummary>,
}

impl AggregateTable {
    pub fn row(&self, method: Method) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// `runs[rep][i]` is the result of `methods[i]` in repetition `rep`.
    pub fn from_runs(methods: &[Method], runs: &[Vec<RunResult>]) -> Self {
        let mut ccrs = vec![Vec::new(); methods.len()];
        let mut ranks = vec![Vec::new(); methods.len()];
        let mut aborted = vec![0; methods.len()];
        let mut ranked_repetitions = 0;
        for rep in runs {
            let finals: Vec<Option<f64>> = rep.iter().map(|r| r.final_ccr).collect();
            for (i, f) in finals.iter().enumerate() {
                match f {
                    Some(c) => ccrs[i].push(*c),
                    None => aborted[i] += 1,
                }
            }
            if let Some(all) = finals.into_iter().collect::<Option<Vec<f64>>>() {
                ranked_repetitions += 1;
                for (i, r) in rnk(&all).into_iter().enumerate() {
                    ranks[i].push(r);
                }
            }
        }
        let rows = methods
            .iter()
            .enumerate()
            .map(|(i, &method)| MethodSummary {
                method,
                ccr: MeanStd::of(&ccrs[i]),
                rnk: MeanStd::of(&ranks[i]),
                completed: ccrs[i].len(),
                aborted: aborted[i],
            })
            .collect();
        Self {
            repetitions: runs.len(),
            ranked_repetitions,
            excluded_runs: aborted.iter().sum(),
            rows,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    /// Indexed by repetition, then by position in `config.run.methods`.
    pub runs: Vec<Vec<RunResult>>,
    pub table: AggregateTable,
}

/// Runs `config.run.repetitions` repetitions of every configured method.
pub fn monte_carlo(dataset: &Dataset, config: &ExperimentConfig) -> Result<MonteCarloReport> {
    config.validate()?;
    // surface data-dependent config errors before spending any compute
    let probe = prepare(dataset, config, config.split_seed_for(0))?;
    for &m in &config.run.methods {
        check_options(&config.train_options(), m, &probe)?;
    }

    let reps = config.run.repetitions;
    let runs = run_all(reps, config.run.parallelism, |rep| run_repetition(dataset, config, rep))?;
    Ok(MonteCarloReport {
        table: AggregateTable::from_runs(&config.run.methods, &runs),
        runs,
    })
}

#[cfg(feature = "parallel")]
fn run_all<F>(reps: usize, threads: usize, job: F) -> Result<Vec<Vec<RunResult>>>
where
    F: Fn(usize) -> Result<Vec<RunResult>> + Sync,
{
    use rayon::prelude::*;
    if threads <= 1 {
        return (0..reps).map(job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::error::Error::config("run.parallelism", e.to_string()))?;
    pool.install(|| (0..reps).into_par_iter().map(&job).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_all<F>(reps: usize, _threads: usize, job: F) -> Result<Vec<Vec<RunResult>>>
where
    F: Fn(usize) -> Result<Vec<RunResult>>,
{
    (0..reps).map(job).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_gaussian_blobs;
    use crate::error::{AbortContext, Error};
    use crate::linalg::ParamVector;
    use crate::train::AbortRecord;

    fn fake(method: Method, ccr: Option<f64>) -> RunResult {
        RunResult {
            method,
            repetition: 0,
            seed: 0,
            data_fingerprint: 0,
            history: Vec::new(),
            final_ccr: ccr,
            final_test_loss: ccr.map(|_| 0.1),
            final_theta: ParamVector::zeros(1),
            abort: ccr.is_none().then(|| AbortRecord {
                reason: "boom".into(),
                context: AbortContext {
                    iteration: 3,
                    memory: 1,
                    stored_pairs: 0,
                },
            }),
        }
    }

    #[test]
    fn aggregate_single_repetition() {
        let methods = Method::ALL;
        let rep: Vec<RunResult> = methods
            .iter()
            .zip([90.0, 85.0, 88.0, 70.0, 80.0])
            .map(|(&m, c)| fake(m, Some(c)))
            .collect();
        let table = AggregateTable::from_runs(&methods, &[rep]);
        assert_eq!(table.ranked_repetitions, 1);
        let mb = table.row(Method::Mb).unwrap();
        assert_eq!(mb.ccr.unwrap().mean, 90.0);
        assert_eq!(mb.ccr.unwrap().std, 0.0);
        assert_eq!(mb.rnk.unwrap().mean, 1.0);
        assert_eq!(table.row(Method::MbAmr).unwrap().rnk.unwrap().mean, 5.0);
    }

    #[test]
    fn aborted_runs_are_excluded_and_counted() {
        let methods = [Method::Mb, Method::Adam];
        let runs = vec![
            vec![fake(Method::Mb, None), fake(Method::Adam, Some(90.0))],
            vec![fake(Method::Mb, Some(80.0)), fake(Method::Adam, Some(70.0))],
        ];
        let table = AggregateTable::from_runs(&methods, &runs);
        assert_eq!(table.excluded_runs, 1);
        assert_eq!(table.ranked_repetitions, 1);
        let mb = table.row(Method::Mb).unwrap();
        assert_eq!((mb.completed, mb.aborted), (1, 1));
        assert_eq!(mb.rnk.unwrap().mean, 1.0);
        assert_eq!(table.row(Method::Adam).unwrap().ccr.unwrap().mean, 80.0);
    }

    fn blob_config() -> (Dataset, ExperimentConfig) {
        let ds = synth_gaussian_blobs(3, 40, 4, 3.0, 5);
        let mut cfg = ExperimentConfig::default();
        cfg.dataset.test_count = 30;
        cfg.model.hidden = 6;
        cfg.lbfgs.iterations = 15;
        cfg.lbfgs.batch_size = 32;
        cfg.adam.iterations = 15;
        cfg.adam.batch_size = 16;
        cfg.run.repetitions = 2;
        (ds, cfg)
    }

    #[test]
    fn methods_share_data_within_repetition() {
        let (ds, cfg) = blob_config();
        let report = monte_carlo(&ds, &cfg).unwrap();
        for rep in &report.runs {
            let fp = rep[0].data_fingerprint;
            assert!(rep.iter().all(|r| r.data_fingerprint == fp));
            assert_eq!(rep.len(), 5);
        }
        // fixed split: identical data across repetitions too
        assert_eq!(report.runs[0][0].data_fingerprint, report.runs[1][0].data_fingerprint);
    }

    #[test]
    fn resplit_changes_partitions() {
        let (ds, mut cfg) = blob_config();
        cfg.run.resplit_each_repetition = true;
        cfg.run.methods = vec![Method::Adam];
        let report = monte_carlo(&ds, &cfg).unwrap();
        assert_ne!(report.runs[0][0].data_fingerprint, report.runs[1][0].data_fingerprint);
    }

    #[test]
    fn reproducible_and_parallel_safe() {
        let (ds, cfg) = blob_config();
        let a = monte_carlo(&ds, &cfg).unwrap();
        let b = monte_carlo(&ds, &cfg).unwrap();
        assert_eq!(a.table, b.table);
        let mut par = cfg.clone();
        par.run.parallelism = 2;
        let c = monte_carlo(&ds, &par).unwrap();
        assert_eq!(a.runs, c.runs);
    }

    #[test]
    fn oversized_batch_is_a_config_error() {
        let (ds, mut cfg) = blob_config();
        cfg.lbfgs.batch_size = 500;
        assert!(matches!(monte_carlo(&ds, &cfg), Err(Error::Config { .. })));
    }
}
