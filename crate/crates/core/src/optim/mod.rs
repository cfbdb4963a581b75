//! Training drivers: the multi-batch L-BFGS family and Adam.

mod adam;
mod lbfgs;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use adam::{AdamParams, AdamState};
pub use lbfgs::{CurvatureBatch, LbfgsParams, TrainState, CURVATURE_TOL};

use crate::curvature::AdmitOutcome;
use crate::data::Dataset;
use crate::error::{AbortContext, Error, Result};
use crate::metrics::ccr;
use crate::model::MlpSpec;

/// The five compared training methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MB")]
    Mb,
    #[serde(rename = "MB-AM")]
    MbAm,
    #[serde(rename = "MB-R")]
    MbR,
    #[serde(rename = "MB-AMR")]
    MbAmr,
    #[serde(rename = "Adam")]
    Adam,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Mb, Method::MbAm, Method::MbR, Method::MbAmr, Method::Adam];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mb => "MB",
            Method::MbAm => "MB-AM",
            Method::MbR => "MB-R",
            Method::MbAmr => "MB-AMR",
            Method::Adam => "Adam",
        }
    }

    pub fn lbfgs_variant(self) -> Option<LbfgsVariant> {
        match self {
            Method::Mb => Some(LbfgsVariant::Mb),
            Method::MbAm => Some(LbfgsVariant::MbAm),
            Method::MbR => Some(LbfgsVariant::MbR),
            Method::MbAmr => Some(LbfgsVariant::MbAmr),
            Method::Adam => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s) || m.name().replace('-', "_").eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("methods", format!("unknown method `{s}`")))
    }
}

/// Memory behavior of a multi-batch L-BFGS run.
///
/// | variant | capacity            | when full                     |
/// |---------|---------------------|-------------------------------|
/// | MB      | fixed `m̄`           | evict oldest                  |
/// | MB-AM   | `m_0 → m_max`, grows | evict oldest                  |
/// | MB-R    | fixed `m̄`           | drop everything               |
/// | MB-AMR  | `m_0 → m_max`, grows | drop everything while `m_k ≤ m_reset` |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LbfgsVariant {
    Mb,
    MbAm,
    MbR,
    MbAmr,
}

impl LbfgsVariant {
    pub fn is_adaptive(self) -> bool {
        matches!(self, LbfgsVariant::MbAm | LbfgsVariant::MbAmr)
    }

    pub fn method(self) -> Method {
        match self {
            LbfgsVariant::Mb => Method::Mb,
            LbfgsVariant::MbAm => Method::MbAm,
            LbfgsVariant::MbR => Method::MbR,
            LbfgsVariant::MbAmr => Method::MbAmr,
        }
    }
}

/// What happened to the iteration's curvature pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairEvent {
    Stored(AdmitOutcome),
    /// Rejected by the positive-curvature filter.
    Skipped,
    /// Adam iterations have no curvature pairs.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `C_k`, batch loss at the start of the iteration.
    pub train_loss: f64,
    /// `v_k`, validation loss after the update.
    pub validation_loss: Option<f64>,
    pub test_loss: Option<f64>,
    pub test_ccr: Option<f64>,
    /// `m_k` after this iteration's growth check.
    pub memory: usize,
    /// `q_k` after this iteration's admission.
    pub stored_pairs: usize,
    pub grad_norm: f64,
    pub pair: PairEvent,
    pub grew: bool,
}

/// Held-out evaluation hooks called once per iteration on the updated
/// parameters.
pub trait Monitor {
    fn validation_loss(&mut self, theta: &[f64]) -> Result<Option<f64>>;

    /// `(loss, CCR %)` on the test set.
    fn test_metrics(&mut self, theta: &[f64]) -> Result<Option<(f64, f64)>>;
}

/// Records nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoMonitor;

impl Monitor for NoMonitor {
    fn validation_loss(&mut self, _theta: &[f64]) -> Result<Option<f64>> {
        Ok(None)
    }

    fn test_metrics(&mut self, _theta: &[f64]) -> Result<Option<(f64, f64)>> {
        Ok(None)
    }
}

/// Validation and test evaluation for an MLP.
#[derive(Debug, Clone, Copy)]
pub struct MlpMonitor<'a> {
    pub spec: MlpSpec,
    pub validation: Option<&'a Dataset>,
    pub test: Option<&'a Dataset>,
}

impl<'a> MlpMonitor<'a> {
    pub fn evaluate(spec: &MlpSpec, theta: &[f64], data: &Dataset) -> Result<(f64, f64)> {
        let batch = data.batch()?;
        let loss = spec.loss(theta, &batch)?;
        let pred = spec.predict(theta, &batch)?;
        Ok((loss, ccr(&pred, &data.labels)?))
    }
}

impl Monitor for MlpMonitor<'_> {
    fn validation_loss(&mut self, theta: &[f64]) -> Result<Option<f64>> {
        match self.validation {
            Some(v) if !v.is_empty() => Ok(Some(self.spec.loss(theta, &v.batch()?)?)),
            _ => Ok(None),
        }
    }

    fn test_metrics(&mut self, theta: &[f64]) -> Result<Option<(f64, f64)>> {
        match self.test {
            Some(t) if !t.is_empty() => Ok(Some(Self::evaluate(&self.spec, theta, t)?)),
            _ => Ok(None),
        }
    }
}

/// Rewraps objective-level numeric failures with the optimizer state.
pub(crate) fn with_context(err: Error, context: AbortContext) -> Error {
    match err {
        Error::NonFinite(what) => Error::Numeric { what, context },
        other => other,
    }
}
