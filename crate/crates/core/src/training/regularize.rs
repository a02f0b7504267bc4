use super::grads::Grads;
use crate::snn::{SpikeTensor, SpikingNet};

/// Homeostatic penalty `λ·Σ_n (in_n − out_n)²` over hidden neurons, where
/// `in_n` is the squared incoming weight mass of neuron `n` and `out_n` its
/// squared outgoing mass. Biases do not count. The gradient is added to
/// `grads` when given.
pub fn balancing_penalty(net: &SpikingNet, lambda: f64, mut grads: Option<&mut Grads>) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    // hidden layer h sits between layers[h] (incoming rows) and layers[h+1] (outgoing columns)
    for h in 0..2 {
        let w_in = &net.layers[h].w;
        let w_out = &net.layers[h + 1].w;
        for n in 0..w_in.rows() {
            let p_in: f64 = w_in.row(n).iter().map(|w| w * w).sum();
            let p_out: f64 = (0..w_out.rows()).map(|k| w_out.get(k, n).powi(2)).sum();
            let d = p_in - p_out;
            total += d * d;
            if let Some(g) = grads.as_deref_mut() {
                let k2 = 4.0 * lambda * d;
                for (gw, &w) in g.w[h].row_mut(n).iter_mut().zip(w_in.row(n)) {
                    *gw += k2 * w;
                }
                for k in 0..w_out.rows() {
                    let cur = g.w[h + 1].get(k, n);
                    g.w[h + 1].set(k, n, cur - k2 * w_out.get(k, n));
                }
            }
        }
    }
    lambda * total
}

/// Low-pass presynaptic traces per input feature, `z_i = Σ_t γ^{T−t}·s_i[t]`
/// summed over the batch and normalised to mean 1. A silent batch yields all
/// ones.
pub fn eligibility_traces(batch: &[SpikeTensor], decay: f64) -> Vec<f64> {
    let Some(first) = batch.first() else {
        return Vec::new();
    };
    let (f, t_max) = (first.features(), first.timesteps());
    let weights: Vec<f64> = (0..t_max).map(|t| decay.powi((t_max - t) as i32)).collect();
    let mut z = vec![0.0; f];
    for x in batch {
        for (i, zi) in z.iter_mut().enumerate() {
            *zi += x
                .row(i)
                .iter()
                .zip(&weights)
                .filter(|(s, _)| **s != 0)
                .map(|(_, w)| w)
                .sum::<f64>();
        }
    }
    let mean = z.iter().sum::<f64>() / f as f64;
    if mean <= 1e-12 {
        return vec![1.0; f];
    }
    z.iter_mut().for_each(|zi| *zi /= mean);
    z
}

/// Scales column `i` of the first-layer weight gradient by `traces[i]`.
pub fn eligibility_modulate(grads: &mut Grads, traces: &[f64]) {
    let w = &mut grads.w[0];
    assert_eq!(w.cols(), traces.len(), "one trace per input feature");
    for r in 0..w.rows() {
        for (g, z) in w.row_mut(r).iter_mut().zip(traces) {
            *g *= z;
        }
    }
}
