#![allow(dead_code)]

use std::path::PathBuf;

use amlbfgs::curvature::CurvaturePair;
use amlbfgs::data::{load_csv, CsvOptions, Dataset, LabelColumn};
use amlbfgs::linalg::dot;
use amlbfgs::model::{Activation, MlpSpec};
use amlbfgs::objective::{MlpObjective, Objective};
use amlbfgs::ParamVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cancer_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/cancer.csv")
}

pub fn load_cancer() -> Dataset {
    let opts = CsvOptions {
        delimiter: b',',
        has_header: true,
        label: LabelColumn::Name("diagnosis".into()),
    };
    load_csv(cancer_path(), &opts).expect("bundled dataset loads")
}

pub fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Row-major `I + MᵀM / d` for a random `M`; symmetric positive definite.
pub fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let m = random_vec(rng, d * d);
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += m[k * d + i] * m[k * d + j];
            }
            a[i * d + j] = acc / d as f64 + if i == j { 1.0 } else { 0.0 };
        }
    }
    a
}

pub fn matvec(a: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|i| dot(&a[i * d..(i + 1) * d], v).unwrap()).collect()
}

/// `count` pairs `(s, B s)` for one random SPD `B`, so all have `tᵀs > 0`.
pub fn random_pairs(rng: &mut ChaCha8Rng, d: usize, count: usize) -> Vec<CurvaturePair> {
    let b = random_spd(rng, d);
    (0..count)
        .map(|_| {
            let s = random_vec(rng, d);
            let t = matvec(&b, &s);
            CurvaturePair::try_new(s.into(), t.into(), 1e-10)
                .unwrap()
                .expect("positive curvature")
        })
        .collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(f64::MIN_POSITIVE)
}

/// Random small MLP with a random batch, for gradient checks.
pub struct MlpInstance {
    pub spec: MlpSpec,
    pub data: Dataset,
    pub theta: ParamVector,
}

pub fn random_mlp_instance(rng: &mut ChaCha8Rng, activation: Activation) -> MlpInstance {
    let n_in = rng.random_range(1..=6);
    let hidden = rng.random_range(1..=10);
    let classes = rng.random_range(2..=4);
    let rows = rng.random_range(1..=12);
    let spec = MlpSpec::new(n_in, hidden, classes, activation);
    let data = Dataset {
        name: "random".into(),
        features: random_vec(rng, rows * n_in).iter().map(|x| 2.0 * x).collect(),
        labels: (0..rows).map(|_| rng.random_range(0..classes)).collect(),
        n_features: n_in,
        class_count: classes,
        class_names: (0..classes).map(|c| c.to_string()).collect(),
    };
    let theta = random_vec(rng, spec.param_count()).into();
    MlpInstance { spec, data, theta }
}

impl MlpInstance {
    /// Largest relative error of backprop against central differences.
    pub fn max_gradient_error(&self, step: f64) -> f64 {
        let obj = MlpObjective::new(self.spec, &self.data).unwrap();
        let all: Vec<usize> = (0..self.data.len()).collect();
        let grad = obj.loss_and_grad(&self.theta, &all).unwrap().grad;
        let mut worst = 0.0f64;
        let mut probe = self.theta.clone();
        for i in 0..probe.len() {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = obj.loss_and_grad(&probe, &all).unwrap().loss;
            probe[i] = orig - step;
            let down = obj.loss_and_grad(&probe, &all).unwrap().loss;
            probe[i] = orig;
            let fd = (up - down) / (2.0 * step);
            let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            worst = worst.max(err);
        }
        worst
    }
}
