use rayon::prelude::*;

use super::grads::Grads;
use super::loss::softmax;
use crate::linalg::axpy;
use crate::snn::{
    fast_sigmoid_grad, ResetMode, SpikeTensor, SpikingNet, SURROGATE_SLOPE, V_THRESHOLD,
};
use crate::{Error, Result, Severity};

/// Samples per work unit; the reduction visits units in index order, so the
/// result does not depend on the thread count.
const CHUNK: usize = 32;

/// How the spike nonlinearity behaves in the unrolled graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeMode {
    /// Heaviside forward, fast-sigmoid surrogate backward. The reset is
    /// detached from the graph, as in snnTorch's default.
    Hard,
    /// Smooth stand-in `S(x) = ½ + ½·s·x/(1 + s|x|)` in both directions and no
    /// membrane reset, so `∂V/∂U = 1` exactly as with the detached reset of
    /// [`SpikeMode::Hard`]. `S'` is half the fast-sigmoid surrogate. This is the
    /// model finite differences are checked against; it ignores `net.reset`.
    Relaxed,
}

impl SpikeMode {
    #[inline]
    fn spike(self, x: f64) -> f64 {
        match self {
            SpikeMode::Hard => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeMode::Relaxed => {
                0.5 + 0.5 * SURROGATE_SLOPE * x / (1.0 + SURROGATE_SLOPE * x.abs())
            }
        }
    }

    #[inline]
    fn spike_grad(self, x: f64) -> f64 {
        match self {
            SpikeMode::Hard => fast_sigmoid_grad(x, SURROGATE_SLOPE),
            SpikeMode::Relaxed => 0.5 * fast_sigmoid_grad(x, SURROGATE_SLOPE),
        }
    }
}

/// Input activity per step, time-major: `x[t·features + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInput {
    features: usize,
    timesteps: usize,
    x: Vec<f64>,
}

impl StepInput {
    pub fn features(&self) -> usize {
        self.features
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    fn at(&self, t: usize) -> &[f64] {
        &self.x[t * self.features..(t + 1) * self.features]
    }
}

pub fn spike_input(s: &SpikeTensor) -> StepInput {
    let (f, t_max) = (s.features(), s.timesteps());
    let mut x = vec![0.0; f * t_max];
    for i in 0..f {
        for (t, &b) in s.row(i).iter().enumerate() {
            x[t * f + i] = b as f64;
        }
    }
    StepInput {
        features: f,
        timesteps: t_max,
        x,
    }
}

/// Noise-free rate input: each feature's value on every step after the delay.
pub fn deterministic_input(features: &[f64], timesteps: usize, delay: usize) -> StepInput {
    let f = features.len();
    let mut x = vec![0.0; f * timesteps];
    for t in delay..timesteps {
        x[t * f..(t + 1) * f].copy_from_slice(features);
    }
    StepInput {
        features: f,
        timesteps,
        x,
    }
}

#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub grads: Grads,
    /// Class-weighted cross-entropy normalised by the summed sample weights.
    pub data_loss: f64,
    /// Hidden-layer synaptic-event penalty (zero unless enabled).
    pub synops_penalty: f64,
    /// Mean hidden-layer SynOps per sample.
    pub mean_hidden_synops: f64,
}

struct Workspace {
    u: [Vec<f64>; 3],
    s: [Vec<f64>; 3],
    v: [Vec<f64>; 3],
    du: [Vec<f64>; 3],
    carry: [Vec<f64>; 3],
    gs: [Vec<f64>; 3],
    active: Vec<(usize, f64)>,
}

impl Workspace {
    fn new(dims: [usize; 4], t_max: usize) -> Self {
        let per = |l: usize| dims[l + 1];
        Self {
            u: std::array::from_fn(|l| vec![0.0; per(l) * t_max]),
            s: std::array::from_fn(|l| vec![0.0; per(l) * t_max]),
            v: std::array::from_fn(|l| vec![0.0; per(l)]),
            du: std::array::from_fn(|l| vec![0.0; per(l)]),
            carry: std::array::from_fn(|l| vec![0.0; per(l)]),
            gs: std::array::from_fn(|l| vec![0.0; per(l)]),
            active: Vec::new(),
        }
    }
}

struct SampleOut {
    ce: f64,
    hidden_synops: f64,
}

/// Forward through `T` steps, storing pre-reset membranes and spikes, then
/// backward through time. `loss_scale` multiplies the cross-entropy gradient
/// and `synops_scale` is the penalty per hidden synaptic event.
#[allow(clippy::too_many_arguments)]
fn sample_backward(
    net: &SpikingNet,
    x: &StepInput,
    label: usize,
    loss_scale: f64,
    synops_scale: f64,
    mode: SpikeMode,
    ws: &mut Workspace,
    g: &mut Grads,
) -> SampleOut {
    let dims = net.dims();
    let t_max = x.timesteps();
    let fanout = [dims[2] as f64, dims[3] as f64, 0.0];
    let mut counts = vec![0.0; dims[3]];
    let mut hidden_synops = 0.0;

    for v in ws.v.iter_mut() {
        v.fill(0.0);
    }
    for t in 0..t_max {
        for l in 0..3 {
            let n = dims[l + 1];
            let layer = &net.layers[l];
            let beta = net.betas[l];
            let (prev, rest) = ws.s.split_at_mut(l);
            let input: &[f64] = if l == 0 {
                x.at(t)
            } else {
                &prev[l - 1][t * dims[l]..(t + 1) * dims[l]]
            };
            let u = &mut ws.u[l][t * n..(t + 1) * n];
            u.copy_from_slice(&layer.b);
            layer.accumulate_sparse(input, u);
            let s = &mut rest[0][t * n..(t + 1) * n];
            for k in 0..n {
                let uk = beta * ws.v[l][k] + u[k];
                u[k] = uk;
                let sk = mode.spike(uk - V_THRESHOLD);
                s[k] = sk;
                ws.v[l][k] = match (mode, net.reset) {
                    (SpikeMode::Relaxed, _) => uk,
                    (SpikeMode::Hard, ResetMode::Subtract) => {
                        if sk != 0.0 {
                            uk - V_THRESHOLD * sk
                        } else {
                            uk
                        }
                    }
                    (SpikeMode::Hard, ResetMode::Zero) => uk * (1.0 - sk),
                };
            }
            if l == 2 {
                for (c, sk) in counts.iter_mut().zip(s.iter()) {
                    *c += sk;
                }
            } else {
                hidden_synops += fanout[l] * s.iter().sum::<f64>();
            }
        }
    }

    let p = softmax(&counts);
    let ce = {
        let m = counts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + counts.iter().map(|c| (c - m).exp()).sum::<f64>().ln() - counts[label]
    };
    let dcounts: Vec<f64> = p
        .iter()
        .enumerate()
        .map(|(k, pk)| loss_scale * (pk - if k == label { 1.0 } else { 0.0 }))
        .collect();

    for c in ws.carry.iter_mut() {
        c.fill(0.0);
    }
    for t in (0..t_max).rev() {
        ws.gs[2].copy_from_slice(&dcounts);
        for l in (0..3).rev() {
            let n = dims[l + 1];
            let beta = net.betas[l];
            let u = &ws.u[l][t * n..(t + 1) * n];
            let s = &ws.s[l][t * n..(t + 1) * n];
            for k in 0..n {
                let xk = u[k] - V_THRESHOLD;
                let sg = mode.spike_grad(xk);
                let dv_du = match (mode, net.reset) {
                    (SpikeMode::Hard, ResetMode::Zero) => 1.0 - s[k],
                    _ => 1.0,
                };
                let d = ws.gs[l][k] * sg + ws.carry[l][k] * dv_du;
                ws.du[l][k] = d;
                ws.carry[l][k] = beta * d;
            }

            let input: &[f64] = if l == 0 {
                x.at(t)
            } else {
                &ws.s[l - 1][t * dims[l]..(t + 1) * dims[l]]
            };
            ws.active.clear();
            ws.active.extend(
                input
                    .iter()
                    .enumerate()
                    .filter(|(_, &xj)| xj != 0.0)
                    .map(|(j, &xj)| (j, xj)),
            );
            let cols = dims[l];
            let gw = g.w[l].as_mut_slice();
            for (k, &d) in ws.du[l].iter().enumerate() {
                let row = &mut gw[k * cols..(k + 1) * cols];
                for &(j, xj) in &ws.active {
                    row[j] += d * xj;
                }
            }
            for (gb, &d) in g.b[l].iter_mut().zip(&ws.du[l]) {
                *gb += d;
            }

            if l > 0 {
                let gprev = &mut ws.gs[l - 1];
                gprev.fill(synops_scale * fanout[l - 1]);
                let w = &net.layers[l].w;
                for (k, &d) in ws.du[l].iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, w.row(k), gprev);
                    }
                }
            }
        }
    }
    SampleOut { ce, hidden_synops }
}

/// Loss and gradient over one batch. The data term is
/// `Σ w_y·CE / Σ w_y`; the optional SynOps term is
/// `synops_lambda · mean hidden SynOps`. Regularisers on the weights are not
/// included.
pub fn batch_gradient(
    net: &SpikingNet,
    inputs: &[StepInput],
    labels: &[Severity],
    class_weights: &[f64; 3],
    mode: SpikeMode,
    synops_lambda: f64,
) -> Result<BatchGradient> {
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if inputs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} inputs but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    let dims = net.dims();
    if dims[3] != 3 {
        return Err(Error::Shape(format!(
            "training needs 3 output classes, net has {}",
            dims[3]
        )));
    }
    let t_max = inputs[0].timesteps();
    if inputs
        .iter()
        .any(|x| x.features() != dims[0] || x.timesteps() != t_max)
    {
        return Err(Error::Shape(
            "batch inputs must share shape and match the net".into(),
        ));
    }
    let weight_sum: f64 = labels.iter().map(|l| class_weights[l.index()]).sum();
    let synops_scale = synops_lambda / inputs.len() as f64;

    let idx: Vec<usize> = (0..inputs.len()).collect();
    let partials: Vec<(Grads, f64, f64)> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut ws = Workspace::new(dims, t_max);
            let mut g = Grads::zeros_like(net);
            let (mut loss, mut synops) = (0.0, 0.0);
            for &i in chunk {
                let y = labels[i].index();
                let w = class_weights[y];
                let out = sample_backward(
                    net,
                    &inputs[i],
                    y,
                    w / weight_sum,
                    synops_scale,
                    mode,
                    &mut ws,
                    &mut g,
                );
                loss += w * out.ce;
                synops += out.hidden_synops;
            }
            (g, loss, synops)
        })
        .collect();

    let mut it = partials.into_iter();
    let (mut grads, mut loss, mut synops) = it.next().expect("non-empty batch");
    for (g, l, s) in it {
        grads.add_assign(&g);
        loss += l;
        synops += s;
    }
    let mean_synops = synops / inputs.len() as f64;
    Ok(BatchGradient {
        grads,
        data_loss: loss / weight_sum,
        synops_penalty: synops_lambda * mean_synops,
        mean_hidden_synops: mean_synops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{encode_seeded, EncoderConfig};

    #[test]
    fn hard_forward_matches_inference() {
        let net = SpikingNet::random([10, 128, 64, 3], 5);
        let enc = EncoderConfig::default();
        for stream in 0..20 {
            let f: Vec<f64> = (0..10)
                .map(|i| ((i * 7 + stream as usize * 3) % 11) as f64 / 10.0)
                .collect();
            let x = encode_seeded(&f, &enc, stream).unwrap();
            let want = net.forward(&x).unwrap();
            let mut ws = Workspace::new(net.dims(), enc.timesteps);
            let mut g = Grads::zeros_like(&net);
            sample_backward(
                &net,
                &spike_input(&x),
                0,
                1.0,
                0.0,
                SpikeMode::Hard,
                &mut ws,
                &mut g,
            );
            for k in 0..3 {
                let got: f64 = (0..enc.timesteps).map(|t| ws.s[2][t * 3 + k]).sum();
                assert_eq!(got, want.counts[k] as f64);
            }
            let h1: f64 = ws.s[0].iter().sum();
            assert_eq!(h1 as u64, want.spikes.hidden1);
        }
    }

    #[test]
    fn chunking_does_not_change_result() {
        let net = SpikingNet::random([10, 8, 6, 3], 2);
        let enc = EncoderConfig {
            timesteps: 12,
            ..EncoderConfig::default()
        };
        let inputs: Vec<StepInput> = (0..70)
            .map(|s| spike_input(&encode_seeded(&[0.5; 10], &enc, s).unwrap()))
            .collect();
        let labels: Vec<Severity> = (0..70)
            .map(|i| Severity::from_index(i % 3).unwrap())
            .collect();
        let a = batch_gradient(
            &net,
            &inputs,
            &labels,
            &[1.0, 1.2, 2.0],
            SpikeMode::Hard,
            0.0,
        )
        .unwrap();
        // same samples, manual sequential accumulation
        let mut g = Grads::zeros_like(&net);
        let mut ws = Workspace::new(net.dims(), 12);
        let wsum: f64 = labels.iter().map(|l| [1.0, 1.2, 2.0][l.index()]).sum();
        for (x, l) in inputs.iter().zip(&labels) {
            let w = [1.0, 1.2, 2.0][l.index()];
            sample_backward(
                &net,
                x,
                l.index(),
                w / wsum,
                0.0,
                SpikeMode::Hard,
                &mut ws,
                &mut g,
            );
        }
        for (x, y) in a.grads.iter().zip(g.iter()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}
