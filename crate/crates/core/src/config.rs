//! Declarative experiment description.
//!
//! Every field has a default; the defaults reproduce the CANCER / MLP
//! experiment (`h = 35`, `r = 256`, `η = 0.5`, `o = 0.45`, 200 iterations,
//! Adam with `r = 64`, `η = 0.02`) with memory settings `α = 2`, `m_0 = 1`,
//! `m_max = 32`, `m_val = 5`, `m_reset = 8`, `m̄ = 10`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{CsvOptions, LabelColumn, SplitSpec};
use crate::error::{Error, Result};
use crate::model::Activation;
use crate::optim::{AdamParams, CurvatureBatch, LbfgsParams, Method};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub lbfgs: LbfgsConfig,
    pub adam: AdamConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub label_column: LabelColumn,
    pub delimiter: String,
    pub has_header: bool,
    pub test_count: usize,
    /// Share of the non-test rows held out to compute validation losses.
    pub validation_fraction: f64,
    pub standardize: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("data/cancer.csv"),
            label_column: LabelColumn::Name("diagnosis".into()),
            delimiter: ",".into(),
            has_header: true,
            test_count: 85,
            validation_fraction: 0.1,
            standardize: true,
        }
    }
}

impl DatasetConfig {
    pub fn csv_options(&self) -> Result<CsvOptions> {
        let delimiter = match self.delimiter.as_bytes() {
            [b] => *b,
            _ => {
                return Err(Error::config(
                    "dataset.delimiter",
                    format!("`{}` is not a single byte", self.delimiter),
                ))
            }
        };
        Ok(CsvOptions {
            delimiter,
            has_header: self.has_header,
            label: self.label_column.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: usize,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 35,
            activation: Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub eta: f64,
    pub overlap: f64,
    pub m_bar: usize,
    pub alpha: f64,
    pub m0: usize,
    pub m_max: usize,
    pub m_val: usize,
    pub m_reset: usize,
    pub curvature_batch: CurvatureBatch,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        let p = LbfgsParams::default();
        Self {
            iterations: 200,
            batch_size: p.batch_size,
            eta: p.eta,
            overlap: p.overlap,
            m_bar: p.m_bar,
            alpha: p.alpha,
            m0: p.m0,
            m_max: p.m_max,
            m_val: p.m_val,
            m_reset: p.m_reset,
            curvature_batch: p.curvature_batch,
        }
    }
}

impl LbfgsConfig {
    pub fn params(&self) -> LbfgsParams {
        LbfgsParams {
            eta: self.eta,
            batch_size: self.batch_size,
            overlap: self.overlap,
            m_bar: self.m_bar,
            m0: self.m0,
            m_max: self.m_max,
            m_reset: self.m_reset,
            alpha: self.alpha,
            m_val: self.m_val,
            curvature_batch: self.curvature_batch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        let p = AdamParams::default();
        Self {
            iterations: 200,
            batch_size: p.batch_size,
            eta: p.eta,
            beta1: p.beta1,
            beta2: p.beta2,
            eps: p.eps,
        }
    }
}

impl AdamConfig {
    pub fn params(&self) -> AdamParams {
        AdamParams {
            eta: self.eta,
            batch_size: self.batch_size,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub methods: Vec<Method>,
    /// Master seed; weight init and batch sampling streams derive from it.
    pub seed: u64,
    /// Seed of the data partition; the master seed when absent.
    pub split_seed: Option<u64>,
    pub repetitions: usize,
    /// Worker threads for repetitions.
    pub parallelism: usize,
    /// Draw a fresh train/validation/test partition for each repetition.
    pub resplit_each_repetition: bool,
    /// Evaluate the test set after every iteration (otherwise only at the end).
    pub record_test_metrics: bool,
    /// Keep every n-th iteration in trace files; the last one is always kept.
    pub trace_every: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            seed: 0,
            split_seed: None,
            repetitions: 60,
            parallelism: 1,
            resplit_each_repetition: false,
            record_test_metrics: true,
            trace_every: 1,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            validation_fraction: self.dataset.validation_fraction,
            split_seed: self.run.split_seed.unwrap_or(self.run.seed),
        }
    }

    /// Range checks that need no data. Dataset-dependent checks (batch
    /// sizes against the training split) happen when runs are prepared.
    pub fn validate(&self) -> Result<()> {
        if self.run.methods.is_empty() {
            return Err(Error::config("run.methods", "no methods selected"));
        }
        if self.run.repetitions == 0 {
            return Err(Error::config("run.repetitions", "must be at least 1"));
        }
        if self.run.parallelism == 0 {
            return Err(Error::config("run.parallelism", "must be at least 1"));
        }
        if self.run.trace_every == 0 {
            return Err(Error::config("run.trace_every", "must be at least 1"));
        }
        if self.model.hidden == 0 {
            return Err(Error::config("model.hidden", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dataset.validation_fraction) {
            return Err(Error::config(
                "dataset.validation_fraction",
                format!("{} is outside [0, 1)", self.dataset.validation_fraction),
            ));
        }
        self.dataset.csv_options()?;
        let lbfgs = self.lbfgs.params();
        for method in &self.run.methods {
            match method.lbfgs_variant() {
                Some(variant) => {
                    lbfgs.validate(variant).map_err(|e| prefix(e, "lbfgs"))?;
                    if variant.is_adaptive() && self.dataset.validation_fraction == 0.0 {
                        return Err(Error::config(
                            "dataset.validation_fraction",
                            format!("{method} needs validation losses; set a positive fraction"),
                        ));
                    }
                }
                None => self.adam.params().validate().map_err(|e| prefix(e, "adam"))?,
            }
        }
        Ok(())
    }
}

fn prefix(err: Error, section: &str) -> Error {
    match err {
        Error::Config { field, reason } => Error::Config {
            field: format!("{section}.{field}"),
            reason,
        },
        other => other,
    }
}
