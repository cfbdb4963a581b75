use serde::{Deserialize, Serialize};

use super::{with_context, IterationRecord, Monitor, PairEvent};
use crate::error::{AbortContext, Error, Result};
use crate::linalg::ParamVector;
use crate::objective::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub eta: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            eta: 0.02,
            batch_size: 64,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        if self.eta.is_nan() || self.eta <= 0.0 || !self.eta.is_finite() {
            return Err(Error::config("eta", format!("{} must be positive", self.eta)));
        }
        for (field, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(field, format!("{b} is outside [0, 1)")));
            }
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::config("eps", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        Ok(())
    }
}

/// Adam with bias-corrected first and second moments.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub theta: ParamVector,
    pub first_moment: ParamVector,
    pub second_moment: ParamVector,
    pub k: usize,
    pub history: Vec<IterationRecord>,
    params: AdamParams,
}

impl AdamState {
    pub fn new(theta0: ParamVector, params: AdamParams) -> Self {
        let d = theta0.len();
        Self {
            theta: theta0,
            first_moment: ParamVector::zeros(d),
            second_moment: ParamVector::zeros(d),
            k: 0,
            history: Vec::new(),
            params,
        }
    }

    pub fn params(&self) -> &AdamParams {
        &self.params
    }

    /// One update on the given sample indices.
    pub fn step<O, M>(&mut self, objective: &O, samples: &[usize], monitor: &mut M) -> Result<&IterationRecord>
    where
        O: Objective + ?Sized,
        M: Monitor + ?Sized,
    {
        let ctx = AbortContext {
            iteration: self.k,
            memory: 0,
            stored_pairs: 0,
        };
        let wrap = |e: Error| with_context(e, ctx.clone());
        let AdamParams {
            eta, beta1, beta2, eps, ..
        } = self.params;

        let lg = objective.loss_and_grad(&self.theta, samples).map_err(wrap)?;
        let t = (self.k + 1) as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        let mut next = self.theta.clone();
        for i in 0..next.len() {
            let g = lg.grad[i];
            let m = beta1 * self.first_moment[i] + (1.0 - beta1) * g;
            let v = beta2 * self.second_moment[i] + (1.0 - beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            next[i] -= eta * (m / bias1) / ((v / bias2).sqrt() + eps);
        }
        if !next.is_finite() {
            return Err(Error::Numeric {
                what: "parameter update",
                context: ctx,
            });
        }

        let validation_loss = monitor.validation_loss(&next).map_err(wrap)?;
        let test = monitor.test_metrics(&next).map_err(wrap)?;
        self.history.push(IterationRecord {
            k: self.k,
            train_loss: lg.loss,
            validation_loss,
            test_loss: test.map(|t| t.0),
            test_ccr: test.map(|t| t.1),
            memory: 0,
            stored_pairs: 0,
            grad_norm: lg.grad.norm(),
            pair: PairEvent::None,
            grew: false,
        });
        self.theta = next;
        self.k += 1;
        Ok(self.history.last().expect("record just pushed"))
    }
}
