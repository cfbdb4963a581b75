use serde::{Deserialize, Serialize};

use super::{with_context, IterationRecord, LbfgsVariant, Monitor, PairEvent};
use crate::batching::{overlap_of, OverlapSampler};
use crate::curvature::{CurvaturePair, CurvatureStore, DevTracker, MemoryPolicy};
use crate::direction::two_loop_direction;
use crate::error::{AbortContext, Error, Result};
use crate::linalg::{axpy_into, ParamVector};
use crate::objective::Objective;
use crate::rng::RngState;

/// Pairs with `t·s <= CURVATURE_TOL·‖t‖·‖s‖` are not stored.
pub const CURVATURE_TOL: f64 = 1e-10;

/// Which samples the gradient difference `t_k` is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurvatureBatch {
    /// Gradients of the whole batch `S_k` at `θ_k` and `θ_{k+1}`.
    #[default]
    Full,
    /// Only the overlap `S_k ∩ S_{k+1}`; costs one more gradient evaluation.
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsParams {
    pub eta: f64,
    pub batch_size: usize,
    pub overlap: f64,
    /// Capacity of the constant-memory variants.
    pub m_bar: usize,
    pub m0: usize,
    pub m_max: usize,
    pub m_reset: usize,
    pub alpha: f64,
    pub m_val: usize,
    pub curvature_batch: CurvatureBatch,
}

impl Default for LbfgsParams {
    fn default() -> Self {
        Self {
            eta: 0.5,
            batch_size: 256,
            overlap: 0.45,
            m_bar: 10,
            m0: 1,
            m_max: 32,
            m_reset: 8,
            alpha: 2.0,
            m_val: 5,
            curvature_batch: CurvatureBatch::Full,
        }
    }
}

impl LbfgsParams {
    pub fn policy(&self, variant: LbfgsVariant) -> MemoryPolicy {
        match variant {
            LbfgsVariant::Mb => MemoryPolicy::fixed(self.m_bar),
            LbfgsVariant::MbR => MemoryPolicy {
                m_reset: self.m_bar,
                ..MemoryPolicy::fixed(self.m_bar)
            },
            LbfgsVariant::MbAm => MemoryPolicy {
                m0: self.m0,
                m_max: self.m_max,
                m_reset: 0,
                alpha: self.alpha,
            },
            LbfgsVariant::MbAmr => MemoryPolicy {
                m0: self.m0,
                m_max: self.m_max,
                m_reset: self.m_reset,
                alpha: self.alpha,
            },
        }
    }

    /// Checks the ranges a training run requires, including `0 < o < 0.5`.
    pub fn validate(&self, variant: LbfgsVariant) -> Result<()> {
        if self.eta.is_nan() || self.eta <= 0.0 || !self.eta.is_finite() {
            return Err(Error::config("eta", format!("{} must be positive", self.eta)));
        }
        if !(self.overlap > 0.0 && self.overlap < 0.5) {
            return Err(Error::config(
                "overlap",
                format!("{} is outside (0, 0.5)", self.overlap),
            ));
        }
        if self.m_val < 2 {
            return Err(Error::config("m_val", format!("{} must be at least 2", self.m_val)));
        }
        self.policy(variant).validate()
    }
}

/// State of one multi-batch L-BFGS run between iterations.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub theta: ParamVector,
    pub k: usize,
    pub store: CurvatureStore,
    pub tracker: DevTracker,
    pub sampler: OverlapSampler,
    pub history: Vec<IterationRecord>,
    variant: LbfgsVariant,
    params: LbfgsParams,
    batch: Vec<usize>,
}

impl TrainState {
    /// Initializes memory at `m_0` (or `m̄`) and draws the first batch.
    ///
    /// The overlap ratio is only required to lie in `[0, 1)` here; callers
    /// wanting the training range use [`LbfgsParams::validate`].
    pub fn new(
        variant: LbfgsVariant,
        params: LbfgsParams,
        theta0: ParamVector,
        sample_count: usize,
        rng: RngState,
    ) -> Result<Self> {
        let store = CurvatureStore::new(params.policy(variant))?;
        let tracker = DevTracker::new(params.m_val)?;
        let mut sampler = OverlapSampler::new(sample_count, params.batch_size, params.overlap, rng)?;
        let batch = sampler.next_batch();
        Ok(Self {
            theta: theta0,
            k: 0,
            store,
            tracker,
            sampler,
            history: Vec::new(),
            variant,
            params,
            batch,
        })
    }

    pub fn variant(&self) -> LbfgsVariant {
        self.variant
    }

    pub fn params(&self) -> &LbfgsParams {
        &self.params
    }

    /// `S_k`, the batch the next step will use.
    pub fn current_batch(&self) -> &[usize] {
        &self.batch
    }

    fn context(&self) -> AbortContext {
        AbortContext {
            iteration: self.k,
            memory: self.store.capacity(),
            stored_pairs: self.store.len(),
        }
    }

    /// One full iteration: gradient on `S_k`, two-loop direction, fixed-step
    /// update, next overlapping batch, curvature pair, validation loss,
    /// capacity growth, pair admission.
    pub fn step<O, M>(&mut self, objective: &O, monitor: &mut M) -> Result<&IterationRecord>
    where
        O: Objective + ?Sized,
        M: Monitor + ?Sized,
    {
        let ctx = self.context();
        let wrap = |e: Error| with_context(e, ctx.clone());

        let current = objective.loss_and_grad(&self.theta, &self.batch).map_err(wrap)?;
        let direction = two_loop_direction(&self.store, &current.grad).map_err(wrap)?;

        let mut next = self.theta.clone();
        axpy_into(self.params.eta, &direction.direction, &mut next);
        if !next.is_finite() {
            return Err(Error::Numeric {
                what: "parameter update",
                context: ctx,
            });
        }

        let next_batch = self.sampler.next_batch();

        let s = next.sub(&self.theta)?;
        let t = match self.params.curvature_batch {
            CurvatureBatch::Full => {
                let moved = objective.loss_and_grad(&next, &self.batch).map_err(wrap)?;
                moved.grad.sub(&current.grad)?
            }
            CurvatureBatch::Overlap => {
                let shared = overlap_of(&self.batch, &next_batch);
                let shared = if shared.is_empty() { self.batch.clone() } else { shared };
                let before = objective.loss_and_grad(&self.theta, &shared).map_err(wrap)?;
                let after = objective.loss_and_grad(&next, &shared).map_err(wrap)?;
                after.grad.sub(&before.grad)?
            }
        };

        let validation_loss = monitor.validation_loss(&next).map_err(wrap)?;
        if let Some(v) = validation_loss {
            self.tracker.push(v);
        }

        let grew = self.variant.is_adaptive() && self.store.maybe_grow(self.tracker.q_condition());

        let pair = match CurvaturePair::try_new(s, t, CURVATURE_TOL)? {
            Some(p) => PairEvent::Stored(self.store.admit_pair(p)),
            None => PairEvent::Skipped,
        };

        let test = monitor.test_metrics(&next).map_err(wrap)?;

        self.history.push(IterationRecord {
            k: self.k,
            train_loss: current.loss,
            validation_loss,
            test_loss: test.map(|t| t.0),
            test_ccr: test.map(|t| t.1),
            memory: self.store.capacity(),
            stored_pairs: self.store.len(),
            grad_norm: current.grad.norm(),
            pair,
            grew,
        });
        self.theta = next;
        self.batch = next_batch;
        self.k += 1;
        Ok(self.history.last().expect("record just pushed"))
    }
}
