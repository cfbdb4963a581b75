//! Single-hidden-layer MLP classifier with hand-written backpropagation.
//!
//! Parameters are stored flat, in this order:
//!
//! ```text
//! W1 (hidden × n_in, row-major) | b1 (hidden) | W2 (classes × hidden, row-major) | b2 (classes)
//! ```
//!
//! so `d = (n_in + 1)·hidden + (hidden + 1)·classes`. The output layer is a
//! softmax trained with categorical cross-entropy, which for two classes is
//! the usual binary cross-entropy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ParamVector;
use crate::rng::RngState;

/// Floor applied to the target-class probability before taking its log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

/// Row-major feature matrix with one integer label per row.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    inputs: &'a [f64],
    labels: &'a [usize],
    n_features: usize,
}

impl<'a> Batch<'a> {
    pub fn new(inputs: &'a [f64], n_features: usize, labels: &'a [usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Batch("batch has no rows".into()));
        }
        if inputs.len() != labels.len() * n_features {
            return Err(Error::Batch(format!(
                "{} inputs cannot form {} rows of {} features",
                inputs.len(),
                labels.len(),
                n_features
            )));
        }
        Ok(Self {
            inputs,
            labels,
            n_features,
        })
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn labels(&self) -> &'a [usize] {
        self.labels
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.inputs[i * self.n_features..(i + 1) * self.n_features]
    }
}

/// Rows copied out of a larger matrix; see [`OwnedBatch::view`].
#[derive(Debug, Clone, PartialEq)]
pub struct OwnedBatch {
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
    pub n_features: usize,
}

impl OwnedBatch {
    pub fn view(&self) -> Result<Batch<'_>> {
        Batch::new(&self.inputs, self.n_features, &self.labels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grad: ParamVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub n_in: usize,
    pub hidden: usize,
    pub n_classes: usize,
    #[serde(default)]
    pub activation: Activation,
}

/// Borrowed views of the four parameter blocks.
struct Layers<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
}

impl MlpSpec {
    pub fn new(n_in: usize, hidden: usize, n_classes: usize, activation: Activation) -> Self {
        Self {
            n_in,
            hidden,
            n_classes,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        (self.n_in + 1) * self.hidden + (self.hidden + 1) * self.n_classes
    }

    /// Offset of the output-layer bias block inside the flat vector.
    pub fn output_bias_offset(&self) -> usize {
        (self.n_in + 1) * self.hidden + self.hidden * self.n_classes
    }

    fn split<'a>(&self, theta: &'a [f64]) -> Layers<'a> {
        let (w1, rest) = theta.split_at(self.hidden * self.n_in);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.n_classes * self.hidden);
        Layers { w1, b1, w2, b2 }
    }

    fn check(&self, theta: &[f64], batch: &Batch<'_>) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                actual: theta.len(),
            });
        }
        if batch.n_features() != self.n_in {
            return Err(Error::Dimension {
                expected: self.n_in,
                actual: batch.n_features(),
            });
        }
        if let Some(&bad) = batch.labels().iter().find(|&&l| l >= self.n_classes) {
            return Err(Error::Batch(format!("label {bad} outside 0..{}", self.n_classes)));
        }
        Ok(())
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init_params(&self, rng: &mut RngState) -> ParamVector {
        let mut theta = ParamVector::zeros(self.param_count());
        let a1 = (6.0 / (self.n_in + self.hidden) as f64).sqrt();
        let a2 = (6.0 / (self.hidden + self.n_classes) as f64).sqrt();
        let w1_len = self.hidden * self.n_in;
        let w2_start = w1_len + self.hidden;
        let w2_len = self.n_classes * self.hidden;
        for w in &mut theta[..w1_len] {
            *w = rng.random_range(-a1..=a1);
        }
        for w in &mut theta[w2_start..w2_start + w2_len] {
            *w = rng.random_range(-a2..=a2);
        }
        theta
    }

    /// Hidden activations and output log-probabilities for one row.
    fn forward_row(
        &self,
        layers: &Layers<'_>,
        x: &[f64],
        z1: &mut [f64],
        a1: &mut [f64],
        log_probs: &mut [f64],
    ) -> Result<()> {
        for j in 0..self.hidden {
            let w = &layers.w1[j * self.n_in..(j + 1) * self.n_in];
            let z = layers.b1[j] + w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
            z1[j] = z;
            a1[j] = self.activation.apply(z);
        }
        for (c, out) in log_probs.iter_mut().enumerate().take(self.n_classes) {
            let w = &layers.w2[c * self.hidden..(c + 1) * self.hidden];
            *out = layers.b2[c] + w.iter().zip(a1.iter()).map(|(w, a)| w * a).sum::<f64>();
        }
        let max = log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::NonFinite("activation"));
        }
        let lse = max + log_probs.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        for lp in log_probs.iter_mut() {
            *lp -= lse;
        }
        Ok(())
    }

    /// Softmax class probabilities, `rows × n_classes`, row-major.
    pub fn forward(&self, theta: &[f64], batch: &Batch<'_>) -> Result<Vec<f64>> {
        self.check(theta, batch)?;
        let layers = self.split(theta);
        let mut z1 = vec![0.0; self.hidden];
        let mut a1 = vec![0.0; self.hidden];
        let mut out = vec![0.0; batch.rows() * self.n_classes];
        for (i, row_out) in out.chunks_exact_mut(self.n_classes).enumerate() {
            self.forward_row(&layers, batch.row(i), &mut z1, &mut a1, row_out)?;
            for p in row_out.iter_mut() {
                *p = p.exp();
            }
        }
        Ok(out)
    }

    /// Mean cross-entropy over the batch and its exact gradient.
    pub fn loss_and_grad(&self, theta: &[f64], batch: &Batch<'_>) -> Result<LossAndGrad> {
        self.evaluate(theta, batch, true)
    }

    /// Mean cross-entropy only; skips backpropagation.
    pub fn loss(&self, theta: &[f64], batch: &Batch<'_>) -> Result<f64> {
        Ok(self.evaluate(theta, batch, false)?.loss)
    }

    fn evaluate(&self, theta: &[f64], batch: &Batch<'_>, with_grad: bool) -> Result<LossAndGrad> {
        self.check(theta, batch)?;
        let layers = self.split(theta);
        let (h, c_n, n_in) = (self.hidden, self.n_classes, self.n_in);
        let log_floor = PROB_FLOOR.ln();

        let mut grad = if with_grad {
            ParamVector::zeros(theta.len())
        } else {
            ParamVector::default()
        };
        let mut z1 = vec![0.0; h];
        let mut a1 = vec![0.0; h];
        let mut log_probs = vec![0.0; c_n];
        let mut dz2 = vec![0.0; c_n];
        let mut dz1 = vec![0.0; h];
        let mut total = 0.0;

        for (i, &label) in batch.labels().iter().enumerate() {
            let x = batch.row(i);
            self.forward_row(&layers, x, &mut z1, &mut a1, &mut log_probs)?;
            let target = log_probs[label];
            let clamped = target < log_floor;
            total -= target.max(log_floor);

            // the floor is flat, so clamped samples contribute no gradient
            if !with_grad || clamped {
                continue;
            }
            for (c, d) in dz2.iter_mut().enumerate() {
                *d = log_probs[c].exp() - if c == label { 1.0 } else { 0.0 };
            }
            let (gw1, rest) = grad.split_at_mut(h * n_in);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(c_n * h);
            for c in 0..c_n {
                gb2[c] += dz2[c];
                let row = &mut gw2[c * h..(c + 1) * h];
                for (g, a) in row.iter_mut().zip(&a1) {
                    *g += dz2[c] * a;
                }
            }
            for j in 0..h {
                let back: f64 = (0..c_n).map(|c| layers.w2[c * h + j] * dz2[c]).sum();
                dz1[j] = back * self.activation.derivative(z1[j], a1[j]);
                gb1[j] += dz1[j];
                let row = &mut gw1[j * n_in..(j + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += dz1[j] * xi;
                }
            }
        }

        let scale = 1.0 / batch.rows() as f64;
        let loss = total * scale;
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        for g in grad.iter_mut() {
            *g *= scale;
        }
        if with_grad && !grad.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        Ok(LossAndGrad { loss, grad })
    }

    /// Arg-max class per row; ties go to the lowest class index.
    pub fn predict(&self, theta: &[f64], batch: &Batch<'_>) -> Result<Vec<usize>> {
        let probs = self.forward(theta, batch)?;
        Ok(probs
            .chunks_exact(self.n_classes)
            .map(|row| {
                let mut best = 0;
                for (c, &p) in row.iter().enumerate().skip(1) {
                    if p > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toy_batch() -> (Vec<f64>, Vec<usize>) {
        (vec![0.5, -1.0, 2.0, 0.25, -0.3, 0.8], vec![0, 1, 1])
    }

    #[test]
    fn param_count_formula() {
        let spec = MlpSpec::new(30, 35, 2, Activation::Tanh);
        assert_eq!(spec.param_count(), 31 * 35 + 36 * 2);
    }

    #[test]
    fn zero_theta_gives_uniform_rows() {
        let spec = MlpSpec::new(2, 4, 3, Activation::Tanh);
        let (x, y) = toy_batch();
        let batch = Batch::new(&x, 2, &y).unwrap();
        let probs = spec.forward(&vec![0.0; spec.param_count()], &batch).unwrap();
        for p in probs {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_theta_binary_loss_is_ln2() {
        let spec = MlpSpec::new(2, 4, 2, Activation::Tanh);
        let (x, y) = toy_batch();
        let batch = Batch::new(&x, 2, &y).unwrap();
        let loss = spec.loss(&vec![0.0; spec.param_count()], &batch).unwrap();
        assert_abs_diff_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn hand_evaluated_forward_pass() {
        // one input, one tanh unit, two classes
        // theta = [w1, b1, w2_0, w2_1, b2_0, b2_1]
        let spec = MlpSpec::new(1, 1, 2, Activation::Tanh);
        let theta = [2.0, -0.5, 1.5, -1.0, 0.1, 0.3];
        let x = [0.75];
        let batch = Batch::new(&x, 1, &[1]).unwrap();
        let a = (2.0f64 * 0.75 - 0.5).tanh();
        let z0 = 1.5 * a + 0.1;
        let z1 = -a + 0.3;
        let p1 = z1.exp() / (z0.exp() + z1.exp());
        let probs = spec.forward(&theta, &batch).unwrap();
        assert_abs_diff_eq!(probs[1], p1, epsilon = 1e-14);
        assert_abs_diff_eq!(probs[0], 1.0 - p1, epsilon = 1e-14);
        let loss = spec.loss(&theta, &batch).unwrap();
        assert_abs_diff_eq!(loss, -p1.ln(), epsilon = 1e-14);
    }

    #[test]
    fn rows_are_distributions_on_random_theta() {
        let spec = MlpSpec::new(2, 5, 4, Activation::Sigmoid);
        let mut rng = RngState::new(5);
        let theta: Vec<f64> = (0..spec.param_count()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (x, y) = toy_batch();
        let probs = spec.forward(&theta, &Batch::new(&x, 2, &y).unwrap()).unwrap();
        for row in probs.chunks(4) {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ties_pick_lowest_class() {
        let spec = MlpSpec::new(2, 3, 4, Activation::Relu);
        let (x, y) = toy_batch();
        let batch = Batch::new(&x, 2, &y).unwrap();
        let pred = spec.predict(&vec![0.0; spec.param_count()], &batch).unwrap();
        assert_eq!(pred, vec![0, 0, 0]);
    }

    #[test]
    fn hand_built_separator_classifies() {
        // hidden unit = tanh(x0 - x1); class 1 logit = 4·a, class 0 logit = -4·a
        let spec = MlpSpec::new(2, 1, 2, Activation::Tanh);
        let theta = [1.0, -1.0, 0.0, -4.0, 4.0, 0.0, 0.0];
        let x = [2.0, 0.0, 0.0, 2.0];
        let batch = Batch::new(&x, 2, &[1, 0]).unwrap();
        let pred = spec.predict(&theta, &batch).unwrap();
        assert_eq!(pred.len(), batch.rows());
        assert_eq!(pred, vec![1, 0]);
    }

    #[test]
    fn clamped_probability_stays_finite() {
        let spec = MlpSpec::new(1, 1, 2, Activation::Tanh);
        // logit gap of 200 drives p(label) far below the floor
        let theta = [0.0, 0.0, 0.0, 0.0, 100.0, -100.0];
        let x = [1.0];
        let batch = Batch::new(&x, 1, &[1]).unwrap();
        let lg = spec.loss_and_grad(&theta, &batch).unwrap();
        assert_abs_diff_eq!(lg.loss, -PROB_FLOOR.ln(), epsilon = 1e-12);
        assert!(lg.grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn bad_shapes_rejected() {
        let spec = MlpSpec::new(2, 3, 2, Activation::Tanh);
        let (x, y) = toy_batch();
        let batch = Batch::new(&x, 2, &y).unwrap();
        assert!(matches!(spec.forward(&[0.0; 3], &batch), Err(Error::Dimension { .. })));
        assert!(Batch::new(&x, 4, &y).is_err());
        assert!(Batch::new(&[], 2, &[]).is_err());
        let theta = vec![0.0; spec.param_count()];
        let bad = Batch::new(&x, 2, &[0, 2, 1]).unwrap();
        assert!(matches!(spec.forward(&theta, &bad), Err(Error::Batch(_))));
    }

    #[test]
    fn non_finite_inputs_are_reported() {
        let spec = MlpSpec::new(1, 1, 2, Activation::Tanh);
        let theta = [0.0, 0.0, 1.0, 1.0, 0.0, f64::INFINITY];
        let batch = Batch::new(&[1.0], 1, &[0]).unwrap();
        assert!(matches!(spec.loss(&theta, &batch), Err(Error::NonFinite(_))));
    }
}
