//! Curvature-pair memory with adaptive capacity and resetting.
//!
//! The capacity `m_k` starts at `m_0` and is multiplied by `α` (capped at
//! `m_max`) whenever the last `m_val` validation losses show strictly
//! shrinking improvements. When the store is full, a capacity at or below
//! `m_reset` wipes every pair; a larger capacity evicts only the oldest.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot_unchecked, norm, ParamVector};

/// One displacement / gradient-difference pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    s: ParamVector,
    t: ParamVector,
    rho: f64,
}

impl CurvaturePair {
    /// Builds the pair when `t·s > tol·‖t‖·‖s‖`; `None` otherwise or when
    /// `1/(t·s)` is not finite.
    pub fn try_new(s: ParamVector, t: ParamVector, tol: f64) -> Result<Option<Self>> {
        if s.len() != t.len() {
            return Err(Error::Dimension {
                expected: s.len(),
                actual: t.len(),
            });
        }
        let ts = dot_unchecked(&t, &s);
        let rho = 1.0 / ts;
        if ts.is_nan() || ts <= tol * norm(&t) * norm(&s) || !rho.is_finite() {
            return Ok(None);
        }
        Ok(Some(Self { s, t, rho }))
    }

    pub fn s(&self) -> &ParamVector {
        &self.s
    }

    pub fn t(&self) -> &ParamVector {
        &self.t
    }

    /// `1 / (t·s)`.
    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Capacity schedule for a [`CurvatureStore`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryPolicy {
    pub m0: usize,
    pub m_max: usize,
    /// Capacities `<= m_reset` clear the whole store when full; 0 disables.
    pub m_reset: usize,
    pub alpha: f64,
}

impl MemoryPolicy {
    /// Constant capacity `m`, evicting the oldest pair when full.
    pub fn fixed(m: usize) -> Self {
        Self {
            m0: m,
            m_max: m,
            m_reset: 0,
            alpha: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m0 == 0 {
            return Err(Error::config("m0", "memory must hold at least one pair"));
        }
        if self.m0 > self.m_max {
            return Err(Error::config(
                "m_max",
                format!("m_max = {} is below m0 = {}", self.m_max, self.m0),
            ));
        }
        if self.alpha.is_nan() || self.alpha < 1.0 || !self.alpha.is_finite() {
            return Err(Error::config("alpha", format!("{} must be >= 1", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdmitOutcome {
    /// Store was full at `m_k <= m_reset`; all pairs dropped before appending.
    Reset,
    /// Store was full; the oldest pair was dropped.
    Evict,
    PlainAppend,
}

#[derive(Debug, Clone)]
pub struct CurvatureStore {
    pairs: VecDeque<CurvaturePair>,
    capacity: usize,
    policy: MemoryPolicy,
}

impl CurvatureStore {
    pub fn new(policy: MemoryPolicy) -> Result<Self> {
        policy.validate()?;
        Ok(Self {
            pairs: VecDeque::with_capacity(policy.m_max.min(64)),
            capacity: policy.m0,
            policy,
        })
    }

    /// `m_k`.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// `q_k`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn policy(&self) -> &MemoryPolicy {
        &self.policy
    }

    /// Oldest first.
    pub fn pairs(&self) -> impl DoubleEndedIterator<Item = &CurvaturePair> + ExactSizeIterator {
        self.pairs.iter()
    }

    pub fn newest(&self) -> Option<&CurvaturePair> {
        self.pairs.back()
    }

    /// Multiplies the capacity by `α` (rounded, capped at `m_max`) when
    /// `q_holds` and there is room to grow. Returns whether it changed.
    pub fn maybe_grow(&mut self, q_holds: bool) -> bool {
        if !q_holds || self.capacity >= self.policy.m_max {
            return false;
        }
        let grown = (self.policy.alpha * self.capacity as f64).round() as usize;
        let next = grown.min(self.policy.m_max);
        let changed = next != self.capacity;
        self.capacity = next;
        changed
    }

    pub fn admit_pair(&mut self, pair: CurvaturePair) -> AdmitOutcome {
        let outcome = if self.pairs.len() >= self.capacity {
            if self.capacity <= self.policy.m_reset {
                self.pairs.clear();
                AdmitOutcome::Reset
            } else {
                while self.pairs.len() >= self.capacity {
                    self.pairs.pop_front();
                }
                AdmitOutcome::Evict
            }
        } else {
            AdmitOutcome::PlainAppend
        };
        self.pairs.push_back(pair);
        outcome
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }
}

/// Sliding window over the most recent validation losses.
#[derive(Debug, Clone)]
pub struct DevTracker {
    window: VecDeque<f64>,
    m_val: usize,
}

impl DevTracker {
    pub fn new(m_val: usize) -> Result<Self> {
        if m_val < 2 {
            return Err(Error::config("m_val", format!("{m_val} must be at least 2")));
        }
        Ok(Self {
            window: VecDeque::with_capacity(m_val),
            m_val,
        })
    }

    pub fn m_val(&self) -> usize {
        self.m_val
    }

    pub fn push(&mut self, loss: f64) {
        if self.window.len() == self.m_val {
            self.window.pop_front();
        }
        self.window.push_back(loss);
    }

    pub fn is_full(&self) -> bool {
        self.window.len() == self.m_val
    }

    pub fn window(&self) -> impl ExactSizeIterator<Item = &f64> {
        self.window.iter()
    }

    /// `Δ_j = v_{j-1} − v_j` over the window, oldest first (`m_val − 1`
    /// values). `None` until the window is full.
    pub fn delta_sequence(&self) -> Option<Vec<f64>> {
        if !self.is_full() {
            return None;
        }
        Some(deltas(self.window.iter().copied()))
    }

    /// Improvements strictly shrinking across the full window.
    pub fn q_condition(&self) -> bool {
        self.delta_sequence().is_some_and(|d| strictly_decreasing(&d))
    }
}

fn deltas(losses: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let losses: Vec<f64> = losses.into_iter().collect();
    losses.windows(2).map(|w| w[0] - w[1]).collect()
}

/// `d[0] > d[1] > … > d[n-1]`. Vacuously true for fewer than two values.
pub fn strictly_decreasing(d: &[f64]) -> bool {
    d.windows(2).all(|w| w[0] > w[1])
}
