use serde::{Deserialize, Serialize};

use super::net::V_THRESHOLD;

/// What happens to the membrane after a spike.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    /// `v ← v − threshold`
    #[default]
    Subtract,
    /// `v ← 0`
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifState {
    pub v: Vec<f64>,
}

impl LifState {
    pub fn zeros(n: usize) -> Self {
        Self { v: vec![0.0; n] }
    }
}

/// One leaky integrate-and-fire update: `v' = β·v + I`, spike where `v' ≥ 1`.
///
/// Panics if `input` and `state` differ in length.
pub fn lif_step(state: &mut LifState, input: &[f64], beta: f64, reset: ResetMode) -> Vec<u8> {
    assert_eq!(state.v.len(), input.len(), "lif_step dimension mismatch");
    state
        .v
        .iter_mut()
        .zip(input)
        .map(|(v, &i)| {
            *v = beta * *v + i;
            if *v >= V_THRESHOLD {
                *v = match reset {
                    ResetMode::Subtract => *v - V_THRESHOLD,
                    ResetMode::Zero => 0.0,
                };
                1
            } else {
                0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unrolled_trace() {
        let mut s = LifState::zeros(1);
        let mut trace = Vec::new();
        for _ in 0..3 {
            let spk = lif_step(&mut s, &[0.5], 0.8, ResetMode::Subtract);
            trace.push((spk[0], s.v[0]));
        }
        assert_eq!(trace[0].0, 0);
        assert!((trace[0].1 - 0.5).abs() < 1e-12);
        assert_eq!(trace[1].0, 0);
        assert!((trace[1].1 - 0.9).abs() < 1e-12);
        assert_eq!(trace[2].0, 1);
        assert!((trace[2].1 - 0.22).abs() < 1e-12);
    }

    #[test]
    fn silent_without_input() {
        let mut s = LifState::zeros(4);
        for _ in 0..100 {
            assert!(lif_step(&mut s, &[0.0; 4], 0.95, ResetMode::Subtract)
                .iter()
                .all(|&x| x == 0));
        }
    }

    #[test]
    fn memoryless_neuron_fires_every_step() {
        let mut s = LifState::zeros(1);
        for _ in 0..20 {
            assert_eq!(lif_step(&mut s, &[1.5], 0.0, ResetMode::Subtract), vec![1]);
            assert!((s.v[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_reset() {
        let mut s = LifState::zeros(1);
        lif_step(&mut s, &[1.3], 0.9, ResetMode::Zero);
        assert_eq!(s.v[0], 0.0);
    }
}
