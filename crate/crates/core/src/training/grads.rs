use crate::linalg::Matrix;
use crate::snn::SpikingNet;

/// Gradients laid out like the network: one weight matrix and bias vector per
/// layer. Flat iteration order is fc1.w, fc1.b, fc2.w, fc2.b, fc3.w, fc3.b.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub w: [Matrix; 3],
    pub b: [Vec<f64>; 3],
}

impl Grads {
    pub fn zeros_like(net: &SpikingNet) -> Self {
        Self {
            w: std::array::from_fn(|l| {
                Matrix::zeros(net.layers[l].w.rows(), net.layers[l].w.cols())
            }),
            b: std::array::from_fn(|l| vec![0.0; net.layers[l].b.len()]),
        }
    }

    pub fn fill(&mut self, x: f64) {
        self.iter_mut().for_each(|g| *g = x);
    }

    pub fn len(&self) -> usize {
        self.w.iter().map(Matrix::len).sum::<usize>() + self.b.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        (0..3).flat_map(move |l| self.w[l].as_slice().iter().chain(self.b[l].iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w
            .iter_mut()
            .zip(self.b.iter_mut())
            .flat_map(|(w, b)| w.as_mut_slice().iter_mut().chain(b.iter_mut()))
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.iter_mut().for_each(|g| *g *= k);
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|g| g.is_finite())
    }
}

/// Network parameters in [`Grads`] flat order.
pub(crate) fn params_mut(net: &mut SpikingNet) -> impl Iterator<Item = &mut f64> {
    net.layers
        .iter_mut()
        .flat_map(|l| l.w.as_mut_slice().iter_mut().chain(l.b.iter_mut()))
}

#[cfg(test)]
pub(crate) fn params(net: &SpikingNet) -> impl Iterator<Item = &f64> {
    net.layers
        .iter()
        .flat_map(|l| l.w.as_slice().iter().chain(l.b.iter()))
}
