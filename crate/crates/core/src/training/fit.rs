use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bptt::{batch_gradient, spike_input, SpikeMode, StepInput};
use super::config::TrainConfig;
use super::eval::evaluate;
use super::loss::class_weights;
use super::optim::{clip_global_norm, cosine_lr, rmaxprop_step, RMaxPropState};
use super::regularize::{balancing_penalty, eligibility_modulate, eligibility_traces};
use crate::dataset::GoldRecord;
use crate::snn::{encode_seeded, EncoderConfig, SpikeTensor, SpikingNet};
use crate::{Error, Result, Severity};

/// Stream reserved for the validation encoder, distinct from every epoch.
const VALIDATION_TAG: u64 = u64::MAX;

/// SplitMix64 finaliser over `a ⊕ golden·(b+1)`.
pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_acc: f64,
    #[serde(skip)]
    pub mean_hidden_synops: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Weights from the best validation epoch.
    pub net: SpikingNet,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Optimizer steps skipped for non-finite gradients.
    pub skipped_steps: u64,
}

/// Starting point for training: uniform `±1/√fan_in` weights and zero
/// biases, so no neuron is driven to fire by its bias alone.
pub fn init_net(dims: [usize; 4], seed: u64) -> SpikingNet {
    let mut net = SpikingNet::random(dims, seed);
    for l in net.layers.iter_mut() {
        l.b.fill(0.0);
    }
    net
}

/// Encoder seed used in `epoch`; training windows are re-encoded every epoch.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    mix_seed(seed, epoch as u64)
}

/// Trains `net` on `train`, tracking accuracy on `val` after each epoch.
///
/// `on_epoch` sees every history row as it is produced.
pub fn fit(
    mut net: SpikingNet,
    train: &[GoldRecord],
    val: &[GoldRecord],
    enc: &EncoderConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitResult> {
    cfg.validate()?;
    enc.validate()?;
    net.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let weights = class_weights(train.iter().map(|r| r.label))?;
    let mut opt = RMaxPropState::new(net.param_count(), cfg.rho);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let val_enc = EncoderConfig {
        seed: mix_seed(cfg.seed, VALIDATION_TAG),
        ..*enc
    };

    let mut history = Vec::new();
    let mut best = (net.clone(), 0usize, f64::NEG_INFINITY);

    for epoch in 0..cfg.epochs_max {
        let lr = cosine_lr(epoch, cfg.epochs_max, cfg.lr_init);
        let epoch_enc = EncoderConfig {
            seed: epoch_seed(cfg.seed, epoch),
            ..*enc
        };
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut synops_sum) = (0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            let tensors: Vec<SpikeTensor> = batch
                .iter()
                .map(|&i| encode_seeded(&train[i].features.0, &epoch_enc, i as u64))
                .collect::<Result<_>>()?;
            let inputs: Vec<StepInput> = tensors.iter().map(spike_input).collect();
            let labels: Vec<Severity> = batch.iter().map(|&i| train[i].label).collect();
            let mut bg = batch_gradient(
                &net,
                &inputs,
                &labels,
                &weights,
                SpikeMode::Hard,
                cfg.synops_lambda,
            )?;
            if !bg.data_loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss {} in epoch {epoch}",
                    bg.data_loss
                )));
            }
            eligibility_modulate(
                &mut bg.grads,
                &eligibility_traces(&tensors, cfg.trace_decay),
            );
            let penalty = balancing_penalty(&net, cfg.balance_lambda, Some(&mut bg.grads));
            clip_global_norm(&mut bg.grads, cfg.clip_norm);
            rmaxprop_step(&mut net, &bg.grads, &mut opt, lr)?;
            loss_sum += (bg.data_loss + bg.synops_penalty + penalty) * batch.len() as f64;
            synops_sum += bg.mean_hidden_synops * batch.len() as f64;
        }
        let val_acc = evaluate(&net, val, &val_enc, 1)?.accuracy;
        let rec = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / train.len() as f64,
            val_acc,
            mean_hidden_synops: synops_sum / train.len() as f64,
        };
        on_epoch(&rec);
        history.push(rec);
        if val_acc > best.2 {
            best = (net.clone(), epoch, val_acc);
        } else if epoch - best.1 >= cfg.patience {
            break;
        }
    }
    Ok(FitResult {
        net: best.0,
        history,
        best_epoch: best.1,
        best_val_acc: best.2,
        skipped_steps: opt.skipped,
    })
}

/// Writes `epoch,lr,train_loss,val_acc` rows.
pub fn write_history_csv<W: Write>(w: W, history: &[EpochRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["epoch", "lr", "train_loss", "val_acc"])?;
    for r in history {
        wr.write_record([
            r.epoch.to_string(),
            r.lr.to_string(),
            r.train_loss.to_string(),
            r.val_acc.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
