use crate::{Error, Result, Severity};

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// `w_label · −ln softmax(scores)[label]`, unnormalised.
pub fn weighted_cross_entropy(scores: &[f64], label: usize, class_weights: &[f64]) -> f64 {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    class_weights[label] * (lse - scores[label])
}

/// Inverse-frequency weights `w_c = N / (3·N_c)`; a class without support
/// is an error.
pub fn class_weights(labels: impl IntoIterator<Item = Severity>) -> Result<[f64; 3]> {
    let mut counts = [0usize; 3];
    for l in labels {
        counts[l.index()] += 1;
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut w = [0.0; 3];
    for c in 0..3 {
        if counts[c] == 0 {
            return Err(Error::EmptyClass(c));
        }
        w[c] = n as f64 / (3.0 * counts[c] as f64);
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_scores_give_ln3() {
        let l = weighted_cross_entropy(&[7.0, 7.0, 7.0], 1, &[1.0; 3]);
        assert!((l - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confident_prediction_vanishes() {
        let mut prev = f64::INFINITY;
        for margin in [1.0, 5.0, 20.0, 50.0] {
            let l = weighted_cross_entropy(&[margin, 0.0, 0.0], 0, &[1.0; 3]);
            assert!(l < prev);
            prev = l;
        }
        assert!(prev < 1e-20);
    }

    #[test]
    fn inverse_frequency_weights() {
        // 42.63 / 38.98 / 18.39 percent
        let mut labels = Vec::new();
        labels.extend(std::iter::repeat_n(Severity::Low, 4263));
        labels.extend(std::iter::repeat_n(Severity::Medium, 3898));
        labels.extend(std::iter::repeat_n(Severity::High, 1839));
        let w = class_weights(labels).unwrap();
        assert!((w[2] - 1.0 / (3.0 * 0.1839)).abs() < 1e-9);
        assert!((w[2] - 1.8126).abs() < 1e-3);
        assert!(matches!(
            class_weights([Severity::Low, Severity::High]),
            Err(Error::EmptyClass(1))
        ));
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 1000.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-12 && p[2] >= 0.0);
    }
}
