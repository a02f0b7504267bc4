use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::SpikeTensor;
use super::lif::ResetMode;
use crate::linalg::Matrix;
use crate::{Error, Result, Severity};

/// Membrane threshold shared by every layer.
pub const V_THRESHOLD: f64 = 1.0;
/// Layer widths: inputs, hidden 1, hidden 2, classes.
pub const DEFAULT_DIMS: [usize; 4] = [10, 128, 64, 3];
/// Per-layer membrane decay, slow to fast.
pub const DEFAULT_BETAS: [f64; 3] = [0.95, 0.90, 0.80];
/// Slope of the fast-sigmoid surrogate.
pub const SURROGATE_SLOPE: f64 = 25.0;

/// A fully connected projection `out = W·x + b`, `W` is `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Matrix::zeros(outputs, inputs),
            b: vec![0.0; outputs],
        }
    }

    /// Uniform in `±1/√fan_in`, for weights and biases alike.
    pub fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let w = Matrix::from_fn(outputs, inputs, |_, _| rng.random_range(-bound..bound));
        let b = (0..outputs)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self { w, b }
    }

    pub fn inputs(&self) -> usize {
        self.w.cols()
    }

    pub fn outputs(&self) -> usize {
        self.w.rows()
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    /// `acc += W[:, j]` for every `j` with `x[j] != 0`, scaled by `x[j]`.
    #[inline]
    pub(crate) fn accumulate_sparse(&self, x: &[f64], acc: &mut [f64]) {
        let cols = self.w.cols();
        let data = self.w.as_slice();
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (r, a) in acc.iter_mut().enumerate() {
                *a += data[r * cols + j] * xj;
            }
        }
    }
}

/// Three fully connected projections, each feeding a LIF population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikingNet {
    pub layers: [Layer; 3],
    pub betas: [f64; 3],
    #[serde(default)]
    pub reset: ResetMode,
}

/// Spike totals per population over one forward pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpikes {
    pub input: u64,
    pub hidden1: u64,
    pub hidden2: u64,
    pub output: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardOutput {
    /// Output spikes per class summed over all steps.
    pub counts: Vec<u32>,
    pub spikes: LayerSpikes,
}

impl ForwardOutput {
    /// Panics unless the net has exactly three outputs.
    pub fn counts3(&self) -> [u32; 3] {
        [self.counts[0], self.counts[1], self.counts[2]]
    }
}

/// Per-step spike rasters, `raster[t][neuron]`, for each population.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Raster {
    pub input: Vec<Vec<u8>>,
    pub hidden1: Vec<Vec<u8>>,
    pub hidden2: Vec<Vec<u8>>,
    pub output: Vec<Vec<u8>>,
}

impl SpikingNet {
    /// Zero weights with the given widths and default betas.
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            layers: [
                Layer::zeros(dims[0], dims[1]),
                Layer::zeros(dims[1], dims[2]),
                Layer::zeros(dims[2], dims[3]),
            ],
            betas: DEFAULT_BETAS,
            reset: ResetMode::Subtract,
        }
    }

    pub fn random(dims: [usize; 4], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            layers: [
                Layer::random(dims[0], dims[1], &mut rng),
                Layer::random(dims[1], dims[2], &mut rng),
                Layer::random(dims[2], dims[3], &mut rng),
            ],
            betas: DEFAULT_BETAS,
            reset: ResetMode::Subtract,
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        [
            self.layers[0].inputs(),
            self.layers[0].outputs(),
            self.layers[1].outputs(),
            self.layers[2].outputs(),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Checks that consecutive layers chain and biases match their rows.
    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if l.b.len() != l.outputs() {
                return Err(Error::Shape(format!(
                    "fc{} bias length {} != rows {}",
                    i + 1,
                    l.b.len(),
                    l.outputs()
                )));
            }
        }
        for i in 1..3 {
            if self.layers[i].inputs() != self.layers[i - 1].outputs() {
                return Err(Error::Shape(format!(
                    "fc{} expects {} inputs but fc{} has {} outputs",
                    i + 1,
                    self.layers[i].inputs(),
                    i,
                    self.layers[i - 1].outputs()
                )));
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &SpikeTensor) -> Result<ForwardOutput> {
        self.run(x, None)
    }

    /// Forward pass that also records every population's spike raster.
    pub fn forward_traced(&self, x: &SpikeTensor) -> Result<(ForwardOutput, Raster)> {
        let mut raster = Raster::default();
        let out = self.run(x, Some(&mut raster))?;
        Ok((out, raster))
    }

    fn run(&self, x: &SpikeTensor, mut raster: Option<&mut Raster>) -> Result<ForwardOutput> {
        let dims = self.dims();
        if x.features() != dims[0] {
            return Err(Error::Shape(format!(
                "input has {} features, net expects {}",
                x.features(),
                dims[0]
            )));
        }
        let mut v: [Vec<f64>; 3] = [vec![0.0; dims[1]], vec![0.0; dims[2]], vec![0.0; dims[3]]];
        let mut cur: [Vec<f64>; 3] = v.clone();
        let mut spk: [Vec<f64>; 4] = [
            vec![0.0; dims[0]],
            vec![0.0; dims[1]],
            vec![0.0; dims[2]],
            vec![0.0; dims[3]],
        ];
        let mut counts = vec![0u32; dims[3]];
        let mut totals = [0u64; 4];

        for t in 0..x.timesteps() {
            #[allow(clippy::needless_range_loop)]
            for i in 0..dims[0] {
                spk[0][i] = x.get(i, t) as f64;
            }
            for l in 0..3 {
                let layer = &self.layers[l];
                cur[l].copy_from_slice(&layer.b);
                layer.accumulate_sparse(&spk[l], &mut cur[l]);
                let beta = self.betas[l];
                for (n, vn) in v[l].iter_mut().enumerate() {
                    *vn = beta * *vn + cur[l][n];
                    let fired = *vn >= V_THRESHOLD;
                    if fired {
                        *vn = match self.reset {
                            ResetMode::Subtract => *vn - V_THRESHOLD,
                            ResetMode::Zero => 0.0,
                        };
                    }
                    spk[l + 1][n] = if fired { 1.0 } else { 0.0 };
                }
            }
            for (k, s) in spk.iter().enumerate() {
                totals[k] += s.iter().filter(|&&x| x != 0.0).count() as u64;
            }
            for (c, s) in counts.iter_mut().zip(&spk[3]) {
                *c += *s as u32;
            }
            if let Some(r) = raster.as_deref_mut() {
                let bits = |s: &Vec<f64>| s.iter().map(|&x| x as u8).collect::<Vec<u8>>();
                r.input.push(bits(&spk[0]));
                r.hidden1.push(bits(&spk[1]));
                r.hidden2.push(bits(&spk[2]));
                r.output.push(bits(&spk[3]));
            }
        }
        Ok(ForwardOutput {
            counts,
            spikes: LayerSpikes {
                input: totals[0],
                hidden1: totals[1],
                hidden2: totals[2],
                output: totals[3],
            },
        })
    }
}

/// Spike-count argmax; ties go to the more severe class.
pub fn classify(counts: [u32; 3]) -> Severity {
    let mut best = 0;
    for i in 1..3 {
        if counts[i] >= counts[best] {
            best = i;
        }
    }
    Severity::from_index(best).expect("index below 3")
}

/// Fast-sigmoid surrogate derivative `s / (1 + |s·x|)²`.
#[inline]
pub fn fast_sigmoid_grad(x: f64, slope: f64) -> f64 {
    let d = 1.0 + (slope * x).abs();
    slope / (d * d)
}

/// Synaptic events: every spike travels across each outgoing weight of its
/// source neuron. Output-layer spikes have no fan-out.
pub fn count_synops(net: &SpikingNet, spikes: &LayerSpikes) -> u64 {
    let d = net.dims();
    spikes.input * d[1] as u64 + spikes.hidden1 * d[2] as u64 + spikes.hidden2 * d[3] as u64
}

/// SynOps if every presynaptic neuron fired on every step.
pub fn max_synops(net: &SpikingNet, timesteps: usize) -> u64 {
    let d = net.dims();
    timesteps as u64 * (d[0] * d[1] + d[1] * d[2] + d[2] * d[3]) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{encode_seeded, EncoderConfig};

    #[test]
    fn default_parameter_count() {
        let net = SpikingNet::zeros(DEFAULT_DIMS);
        assert_eq!(net.param_count(), 9_859);
        assert!(net.betas[0] > net.betas[1] && net.betas[1] > net.betas[2]);
    }

    #[test]
    fn silent_input_gives_zero_counts() {
        let net = SpikingNet::zeros(DEFAULT_DIMS);
        let out = net.forward(&SpikeTensor::zeros(10, 50)).unwrap();
        assert_eq!(out.counts, vec![0, 0, 0]);
        assert_eq!(out.spikes, LayerSpikes::default());
    }

    #[test]
    fn forward_is_deterministic() {
        let net = SpikingNet::random(DEFAULT_DIMS, 3);
        let x = encode_seeded(&[0.3; 10], &EncoderConfig::default(), 1).unwrap();
        assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }

    #[test]
    fn single_chain_matches_scalar_simulation() {
        let mut net = SpikingNet::zeros([1, 1, 1, 1]);
        for l in &mut net.layers {
            l.w.set(0, 0, 1.5);
        }
        net.betas = [0.8, 0.8, 0.8];
        let t_steps = 40;
        let x = SpikeTensor::from_rows(&[vec![1; t_steps]]).unwrap();
        let out = net.forward(&x).unwrap();

        let (mut v1, mut v2, mut v3, mut count) = (0.0f64, 0.0f64, 0.0f64, 0u32);
        for _ in 0..t_steps {
            v1 = 0.8 * v1 + 1.5;
            let s1 = if v1 >= 1.0 {
                v1 -= 1.0;
                1.0
            } else {
                0.0
            };
            v2 = 0.8 * v2 + 1.5 * s1;
            let s2 = if v2 >= 1.0 {
                v2 -= 1.0;
                1.0
            } else {
                0.0
            };
            v3 = 0.8 * v3 + 1.5 * s2;
            if v3 >= 1.0 {
                v3 -= 1.0;
                count += 1;
            }
        }
        assert_eq!(out.counts, vec![count]);
        assert!(count > 0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let net = SpikingNet::zeros(DEFAULT_DIMS);
        assert!(net.forward(&SpikeTensor::zeros(9, 50)).is_err());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify([10, 3, 2]), Severity::Low);
        assert_eq!(classify([5, 5, 2]), Severity::Medium);
        assert_eq!(classify([0, 0, 0]), Severity::High);
        assert_eq!(classify([1, 7, 7]), Severity::High);
    }

    #[test]
    fn surrogate_shape() {
        assert_eq!(fast_sigmoid_grad(0.0, SURROGATE_SLOPE), 25.0);
        assert!(fast_sigmoid_grad(1e9, SURROGATE_SLOPE) < 1e-12);
        assert!(fast_sigmoid_grad(-1e9, SURROGATE_SLOPE) < 1e-12);
        for x in [0.01, 0.3, 2.0] {
            assert_eq!(fast_sigmoid_grad(x, 25.0), fast_sigmoid_grad(-x, 25.0));
        }
    }

    #[test]
    fn synops_arithmetic() {
        let net = SpikingNet::zeros(DEFAULT_DIMS);
        assert_eq!(count_synops(&net, &LayerSpikes::default()), 0);
        let s = LayerSpikes {
            input: 100,
            hidden1: 50,
            hidden2: 10,
            output: 4,
        };
        assert_eq!(count_synops(&net, &s), 16_030);
        assert_eq!(max_synops(&net, 50), 483_200);
    }

    #[test]
    fn synops_match_raster_recount() {
        let net = SpikingNet::random(DEFAULT_DIMS, 9);
        let x = encode_seeded(&[0.6; 10], &EncoderConfig::default(), 2).unwrap();
        let (out, raster) = net.forward_traced(&x).unwrap();
        let mut recount = 0u64;
        for t in 0..raster.input.len() {
            recount += raster.input[t].iter().map(|&s| s as u64 * 128).sum::<u64>();
            recount += raster.hidden1[t]
                .iter()
                .map(|&s| s as u64 * 64)
                .sum::<u64>();
            recount += raster.hidden2[t].iter().map(|&s| s as u64 * 3).sum::<u64>();
        }
        assert_eq!(count_synops(&net, &out.spikes), recount);
        assert_eq!(out.spikes.input, x.total_spikes());
    }
}
