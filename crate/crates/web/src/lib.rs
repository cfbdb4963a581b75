//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string so the page can plot it directly.

use amlbfgs::config::ExperimentConfig;
use amlbfgs::data::synth_gaussian_blobs;
use amlbfgs::harness::run_repetition;
use amlbfgs::model::LossAndGrad;
use amlbfgs::objective::Objective;
use amlbfgs::optim::{AdamParams, AdamState, LbfgsParams, Method, Monitor, TrainState};
use amlbfgs::train::RunResult;
use amlbfgs::{ParamVector, Result as CoreResult, RngState};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Per-iteration curves of one training run.
#[derive(Debug, Serialize)]
pub struct Curves {
    pub method: String,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<Option<f64>>,
    pub test_ccr: Vec<Option<f64>>,
    pub memory: Vec<usize>,
    pub stored_pairs: Vec<usize>,
    pub final_ccr: Option<f64>,
    pub aborted: Option<String>,
}

impl From<&RunResult> for Curves {
    fn from(run: &RunResult) -> Self {
        let h = &run.history;
        Self {
            method: run.method.name().to_string(),
            train_loss: h.iter().map(|r| r.train_loss).collect(),
            validation_loss: h.iter().map(|r| r.validation_loss).collect(),
            test_ccr: h.iter().map(|r| r.test_ccr).collect(),
            memory: h.iter().map(|r| r.memory).collect(),
            stored_pairs: h.iter().map(|r| r.stored_pairs).collect(),
            final_ccr: run.final_ccr,
            aborted: run.abort.as_ref().map(|a| a.reason.clone()),
        }
    }
}

fn blobs_runs(methods: Vec<Method>, separation: f64, iterations: usize, seed: u64) -> CoreResult<Vec<Curves>> {
    let data = synth_gaussian_blobs(3, 200, 4, separation, seed);
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.test_count = 150;
    cfg.model.hidden = 10;
    cfg.lbfgs.iterations = iterations;
    cfg.lbfgs.batch_size = 128;
    cfg.adam.iterations = iterations;
    cfg.run.methods = methods;
    cfg.run.seed = seed;
    cfg.validate()?;
    Ok(run_repetition(&data, &cfg, 0)?.iter().map(Curves::from).collect())
}

/// Trains one method on three Gaussian clusters.
pub fn blobs_curves(method: &str, separation: f64, iterations: usize, seed: u64) -> Result<Curves, String> {
    let method: Method = method.parse().map_err(|e| format!("{e}"))?;
    blobs_runs(vec![method], separation, iterations, seed)
        .map(|mut runs| runs.remove(0))
        .map_err(|e| e.to_string())
}

/// All five methods from the same initial weights and batches.
pub fn blobs_comparison(separation: f64, iterations: usize, seed: u64) -> Result<Vec<Curves>, String> {
    blobs_runs(Method::ALL.to_vec(), separation, iterations, seed).map_err(|e| e.to_string())
}

/// Stochastic least squares in two parameters: `½(aᵢᵀθ − yᵢ)²` averaged
/// over rows, with elongated, rotated inputs.
#[derive(Debug, Clone)]
pub struct LeastSquares2d {
    inputs: Vec<[f64; 2]>,
    targets: Vec<f64>,
}

impl LeastSquares2d {
    pub fn generate(rows: usize, condition: f64, noise: f64, rng: &mut RngState) -> Self {
        let (sin, cos) = 0.5f64.sin_cos();
        let minor = condition.max(1.0).sqrt().recip();
        let truth = [1.0, 0.5];
        let mut inputs = Vec::with_capacity(rows);
        let mut targets = Vec::with_capacity(rows);
        for _ in 0..rows {
            let u: f64 = StandardNormal.sample(rng);
            let v: f64 = StandardNormal.sample(rng);
            let e: f64 = StandardNormal.sample(rng);
            let a = [cos * u - sin * v * minor, sin * u + cos * v * minor];
            targets.push(a[0] * truth[0] + a[1] * truth[1] + noise * e);
            inputs.push(a);
        }
        Self { inputs, targets }
    }

    fn split_off(&mut self, count: usize) -> Self {
        let at = self.inputs.len() - count;
        Self {
            inputs: self.inputs.split_off(at),
            targets: self.targets.split_off(at),
        }
    }

    /// Hessian `[a11, a12, a22]` and minimizer of the mean loss.
    pub fn quadratic_form(&self) -> ([f64; 3], [f64; 2]) {
        let n = self.inputs.len() as f64;
        let (mut h, mut r) = ([0.0; 3], [0.0; 2]);
        for (a, y) in self.inputs.iter().zip(&self.targets) {
            h[0] += a[0] * a[0] / n;
            h[1] += a[0] * a[1] / n;
            h[2] += a[1] * a[1] / n;
            r[0] += a[0] * y / n;
            r[1] += a[1] * y / n;
        }
        let det = h[0] * h[2] - h[1] * h[1];
        let min = [(h[2] * r[0] - h[1] * r[1]) / det, (h[0] * r[1] - h[1] * r[0]) / det];
        (h, min)
    }

    fn all_rows(&self) -> Vec<usize> {
        (0..self.inputs.len()).collect()
    }
}

impl Objective for LeastSquares2d {
    fn dim(&self) -> usize {
        2
    }

    fn sample_count(&self) -> usize {
        self.inputs.len()
    }

    fn loss_and_grad(&self, theta: &[f64], samples: &[usize]) -> CoreResult<LossAndGrad> {
        let n = samples.len().max(1) as f64;
        let mut loss = 0.0;
        let mut grad = ParamVector::zeros(2);
        for &i in samples {
            let a = self.inputs[i];
            let r = a[0] * theta[0] + a[1] * theta[1] - self.targets[i];
            loss += 0.5 * r * r / n;
            grad[0] += r * a[0] / n;
            grad[1] += r * a[1] / n;
        }
        Ok(LossAndGrad { loss, grad })
    }
}

struct HeldOut<'a>(&'a LeastSquares2d);

impl Monitor for HeldOut<'_> {
    fn validation_loss(&mut self, theta: &[f64]) -> CoreResult<Option<f64>> {
        Ok(Some(self.0.loss_and_grad(theta, &self.0.all_rows())?.loss))
    }

    fn test_metrics(&mut self, _theta: &[f64]) -> CoreResult<Option<(f64, f64)>> {
        Ok(None)
    }
}

#[derive(Debug, Serialize)]
pub struct Path2d {
    pub method: String,
    /// Hessian `[a11, a12, a22]` of the full training loss.
    pub hessian: [f64; 3],
    pub minimizer: [f64; 2],
    pub path: Vec<[f64; 2]>,
    pub memory: Vec<usize>,
    pub loss: Vec<f64>,
}

/// Iterates of `method` on a 2-D stochastic least-squares problem.
pub fn least_squares_path(
    method: &str,
    condition: f64,
    noise: f64,
    iterations: usize,
    seed: u64,
) -> Result<Path2d, String> {
    let method: Method = method.parse().map_err(|e| format!("{e}"))?;
    let mut rng = RngState::new(seed);
    let mut train = LeastSquares2d::generate(500, condition, noise, &mut rng);
    let validation = train.split_off(100);
    let (hessian, minimizer) = train.quadratic_form();
    let theta0: ParamVector = vec![-2.0, 2.5].into();
    let batches = rng.split(1);
    let mut path = vec![[theta0[0], theta0[1]]];
    let mut memory = Vec::new();
    let mut loss = Vec::new();
    let mut monitor = HeldOut(&validation);
    let err = |e: amlbfgs::Error| e.to_string();

    match method.lbfgs_variant() {
        Some(variant) => {
            let params = LbfgsParams {
                eta: 1.0,
                batch_size: 32,
                overlap: 0.25,
                m_bar: 4,
                m_max: 8,
                m_reset: 2,
                m_val: 4,
                ..LbfgsParams::default()
            };
            params.validate(variant).map_err(err)?;
            let mut state = TrainState::new(variant, params, theta0, train.sample_count(), batches).map_err(err)?;
            for _ in 0..iterations {
                let rec = state.step(&train, &mut monitor).map_err(err)?;
                memory.push(rec.memory);
                loss.push(rec.train_loss);
                path.push([state.theta[0], state.theta[1]]);
            }
        }
        None => {
            let params = AdamParams {
                eta: 0.1,
                batch_size: 32,
                ..AdamParams::default()
            };
            params.validate().map_err(err)?;
            let mut state = AdamState::new(theta0, params);
            let mut batches = batches;
            for _ in 0..iterations {
                let rows = batches
                    .uniform_indices(train.sample_count(), params.batch_size)
                    .map_err(err)?;
                let rec = state.step(&train, &rows, &mut monitor).map_err(err)?;
                memory.push(rec.memory);
                loss.push(rec.train_loss);
                path.push([state.theta[0], state.theta[1]]);
            }
        }
    }
    Ok(Path2d {
        method: method.name().to_string(),
        hessian,
        minimizer,
        path,
        memory,
        loss,
    })
}

fn to_js<T: Serialize>(value: Result<T, String>) -> Result<String, JsValue> {
    value
        .and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// Loss, validation loss, CCR, `m_k` and `q_k` curves for one method.
#[wasm_bindgen(js_name = trainBlobs)]
pub fn train_blobs(method: &str, separation: f64, iterations: usize, seed: u64) -> Result<String, JsValue> {
    to_js(blobs_curves(method, separation, iterations, seed))
}

/// The same curves for all five methods.
#[wasm_bindgen(js_name = compareMethods)]
pub fn compare_methods(separation: f64, iterations: usize, seed: u64) -> Result<String, JsValue> {
    to_js(blobs_comparison(separation, iterations, seed))
}

/// Optimizer path on a 2-D least-squares problem, with its contours.
#[wasm_bindgen(js_name = optimizerPath)]
pub fn optimizer_path(
    method: &str,
    condition: f64,
    noise: f64,
    iterations: usize,
    seed: u64,
) -> Result<String, JsValue> {
    to_js(least_squares_path(method, condition, noise, iterations, seed))
}
