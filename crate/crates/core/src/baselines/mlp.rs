use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::GoldRecord;
use crate::linalg::{axpy, Matrix};
use crate::snn::{Layer, DEFAULT_DIMS};
use crate::training::{class_weights, cosine_lr, softmax, EvalReport};
use crate::{Error, Result, Severity};

/// Dense counterpart of the spiking net: same layer shapes, ReLU hidden
/// units, linear scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNet {
    pub layers: [Layer; 3],
}

impl MlpNet {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            layers: std::array::from_fn(|l| Layer::zeros(dims[l], dims[l + 1])),
        }
    }

    pub fn random(dims: [usize; 4], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            layers: std::array::from_fn(|l| Layer::random(dims[l], dims[l + 1], &mut rng)),
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        [
            self.layers[0].inputs(),
            self.layers[1].inputs(),
            self.layers[2].inputs(),
            self.layers[2].outputs(),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }
}

impl Default for MlpNet {
    fn default() -> Self {
        Self::random(DEFAULT_DIMS, 0)
    }
}

/// Activations of every layer; `acts[0]` is the input.
fn forward_all(net: &MlpNet, f: &[f64]) -> [Vec<f64>; 4] {
    let mut acts: [Vec<f64>; 4] = Default::default();
    acts[0] = f.to_vec();
    for l in 0..3 {
        let layer = &net.layers[l];
        let mut z = vec![0.0; layer.outputs()];
        layer.w.matvec_into(&acts[l], &mut z);
        for (zi, bi) in z.iter_mut().zip(&layer.b) {
            *zi += bi;
            if l < 2 {
                *zi = zi.max(0.0);
            }
        }
        acts[l + 1] = z;
    }
    acts
}

/// Class scores (pre-softmax).
pub fn mlp_forward(net: &MlpNet, features: &[f64]) -> Vec<f64> {
    let [_, _, _, out] = forward_all(net, features);
    out
}

/// Argmax of the scores, ties toward the more severe class.
pub fn mlp_predict(net: &MlpNet, features: &[f64]) -> Severity {
    let s = mlp_forward(net, features);
    let mut best = 0;
    for i in 1..s.len() {
        if s[i] >= s[best] {
            best = i;
        }
    }
    Severity::from_index(best).expect("three classes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpTrainConfig {
    pub epochs: usize,
    pub lr_init: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            lr_init: 0.05,
            momentum: 0.9,
            batch_size: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlpFit {
    /// Weights from the epoch with the best accuracy on the evaluation set.
    pub net: MlpNet,
    pub report: EvalReport,
    pub best_epoch: usize,
}

fn zero_layers(net: &MlpNet) -> [Layer; 3] {
    std::array::from_fn(|l| Layer::zeros(net.layers[l].inputs(), net.layers[l].outputs()))
}

pub(crate) fn evaluate_mlp(net: &MlpNet, records: &[GoldRecord]) -> EvalReport {
    let truth: Vec<Severity> = records.iter().map(|r| r.label).collect();
    let pred: Vec<Severity> = records
        .iter()
        .map(|r| mlp_predict(net, &r.features.0))
        .collect();
    EvalReport::from_predictions(&truth, &pred)
}

/// Minibatch SGD with momentum on the class-weighted cross-entropy, cosine
/// learning-rate decay. The returned report is on `eval`.
pub fn mlp_train(
    mut net: MlpNet,
    train: &[GoldRecord],
    eval: &[GoldRecord],
    cfg: &MlpTrainConfig,
) -> Result<MlpFit> {
    if train.is_empty() || eval.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.epochs == 0
        || cfg.batch_size == 0
        || !(cfg.lr_init > 0.0)
        || !(0.0..1.0).contains(&cfg.momentum)
    {
        return Err(Error::Config(format!("invalid MLP config {cfg:?}")));
    }
    let weights = class_weights(train.iter().map(|r| r.label))?;
    let mut velocity = zero_layers(&net);
    let mut grads = zero_layers(&net);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(MlpNet, EvalReport, usize)> = None;

    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(epoch, cfg.epochs, cfg.lr_init);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            for g in grads.iter_mut() {
                g.w.as_mut_slice().fill(0.0);
                g.b.fill(0.0);
            }
            let wsum: f64 = batch.iter().map(|&i| weights[train[i].label.index()]).sum();
            for &i in batch {
                let rec = &train[i];
                let y = rec.label.index();
                let acts = forward_all(&net, &rec.features.0);
                let p = softmax(&acts[3]);
                let scale = weights[y] / wsum;
                let mut delta: Vec<f64> = p
                    .iter()
                    .enumerate()
                    .map(|(k, pk)| scale * (pk - if k == y { 1.0 } else { 0.0 }))
                    .collect();
                for l in (0..3).rev() {
                    let g = &mut grads[l];
                    for (r, &d) in delta.iter().enumerate() {
                        if d != 0.0 {
                            axpy(d, &acts[l], g.w.row_mut(r));
                            g.b[r] += d;
                        }
                    }
                    if l > 0 {
                        let w = &net.layers[l].w;
                        let mut prev = vec![0.0; w.cols()];
                        for (r, &d) in delta.iter().enumerate() {
                            if d != 0.0 {
                                axpy(d, w.row(r), &mut prev);
                            }
                        }
                        // ReLU derivative from the stored activation
                        for (pv, &a) in prev.iter_mut().zip(&acts[l]) {
                            if a <= 0.0 {
                                *pv = 0.0;
                            }
                        }
                        delta = prev;
                    }
                }
            }
            for l in 0..3 {
                momentum_step(
                    &mut net.layers[l].w,
                    &mut velocity[l].w,
                    &grads[l].w,
                    lr,
                    cfg.momentum,
                );
                for ((p, v), g) in net.layers[l]
                    .b
                    .iter_mut()
                    .zip(velocity[l].b.iter_mut())
                    .zip(&grads[l].b)
                {
                    *v = cfg.momentum * *v + g;
                    *p -= lr * *v;
                }
            }
        }
        if net
            .layers
            .iter()
            .any(|l| l.w.as_slice().iter().chain(&l.b).any(|x| !x.is_finite()))
        {
            return Err(Error::Diverged(format!(
                "MLP weights non-finite after epoch {epoch}"
            )));
        }
        let rep = evaluate_mlp(&net, eval);
        if best.as_ref().is_none_or(|b| rep.accuracy > b.1.accuracy) {
            best = Some((net.clone(), rep, epoch));
        }
    }
    let (net, report, best_epoch) = best.expect("at least one epoch");
    Ok(MlpFit {
        net,
        report,
        best_epoch,
    })
}

fn momentum_step(w: &mut Matrix, v: &mut Matrix, g: &Matrix, lr: f64, momentum: f64) {
    for ((p, v), g) in w
        .as_mut_slice()
        .iter_mut()
        .zip(v.as_mut_slice())
        .zip(g.as_slice())
    {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
}
