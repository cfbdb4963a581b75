//! Stochastic objectives: a loss that can be evaluated on any subset of
//! sample indices.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot_unchecked, ParamVector};
use crate::model::{LossAndGrad, MlpSpec};

pub trait Objective {
    fn dim(&self) -> usize;

    /// Size of the index universe batches are drawn from.
    fn sample_count(&self) -> usize;

    /// Mean loss over `samples` and its gradient.
    fn loss_and_grad(&self, theta: &[f64], samples: &[usize]) -> Result<LossAndGrad>;
}

/// Cross-entropy of an MLP over the rows of a training set.
#[derive(Debug, Clone, Copy)]
pub struct MlpObjective<'a> {
    spec: MlpSpec,
    data: &'a Dataset,
}

impl<'a> MlpObjective<'a> {
    pub fn new(spec: MlpSpec, data: &'a Dataset) -> Result<Self> {
        if spec.n_in != data.n_features {
            return Err(Error::Dimension {
                expected: spec.n_in,
                actual: data.n_features,
            });
        }
        Ok(Self { spec, data })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }
}

impl Objective for MlpObjective<'_> {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn sample_count(&self) -> usize {
        self.data.len()
    }

    fn loss_and_grad(&self, theta: &[f64], samples: &[usize]) -> Result<LossAndGrad> {
        let batch = self.data.gather(samples);
        self.spec.loss_and_grad(theta, &batch.view()?)
    }
}

/// `f(θ) = ½ θᵀAθ − bᵀθ` with symmetric `A`; sample indices are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Quadratic {
    /// `a` is row-major `d×d` and must be symmetric.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let d = b.len();
        if a.len() != d * d {
            return Err(Error::Dimension {
                expected: d * d,
                actual: a.len(),
            });
        }
        for i in 0..d {
            for j in 0..i {
                if (a[i * d + j] - a[j * d + i]).abs() > 1e-12 * (a[i * d + j].abs().max(1.0)) {
                    return Err(Error::config("a", "matrix is not symmetric"));
                }
            }
        }
        Ok(Self { a, b })
    }

    pub fn hessian(&self) -> &[f64] {
        &self.a
    }

    pub fn hessian_vec(&self, v: &[f64]) -> ParamVector {
        let d = self.b.len();
        (0..d).map(|i| dot_unchecked(&self.a[i * d..(i + 1) * d], v)).collect()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        0.5 * dot_unchecked(theta, &self.hessian_vec(theta)) - dot_unchecked(&self.b, theta)
    }

    pub fn gradient(&self, theta: &[f64]) -> ParamVector {
        let mut g = self.hessian_vec(theta);
        for (gi, bi) in g.iter_mut().zip(&self.b) {
            *gi -= bi;
        }
        g
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn sample_count(&self) -> usize {
        1
    }

    fn loss_and_grad(&self, theta: &[f64], _samples: &[usize]) -> Result<LossAndGrad> {
        if theta.len() != self.b.len() {
            return Err(Error::Dimension {
                expected: self.b.len(),
                actual: theta.len(),
            });
        }
        Ok(LossAndGrad {
            loss: self.value(theta),
            grad: self.gradient(theta),
        })
    }
}
