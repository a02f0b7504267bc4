use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::mix_seed;
use crate::dataset::GoldRecord;
use crate::snn::{classify, encode_seeded, EncoderConfig, ForwardOutput, SpikingNet};
use crate::{Result, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: u64,
    pub accuracy: f64,
    /// Indexed by class: LOW, MEDIUM, HIGH.
    pub per_class: [ClassMetrics; 3],
    /// `confusion[true][predicted]`.
    pub confusion: [[u64; 3]; 3],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Recall on HIGH, the safety-critical class.
    pub high_recall: f64,
}

impl EvalReport {
    /// Metrics from paired labels. A class never predicted has precision 0;
    /// one with no support has recall 0.
    pub fn from_predictions(truth: &[Severity], pred: &[Severity]) -> Self {
        assert_eq!(truth.len(), pred.len(), "one prediction per label");
        let mut confusion = [[0u64; 3]; 3];
        for (t, p) in truth.iter().zip(pred) {
            confusion[t.index()][p.index()] += 1;
        }
        let n = truth.len() as u64;
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let per_class: [ClassMetrics; 3] = std::array::from_fn(|c| {
            let tp = confusion[c][c];
            let support: u64 = confusion[c].iter().sum();
            let predicted: u64 = (0..3).map(|r| confusion[r][c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            }
        });
        let correct: u64 = (0..3).map(|c| confusion[c][c]).sum();
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / 3.0;
        Self {
            n,
            accuracy: ratio(correct, n),
            per_class,
            confusion,
            macro_precision: mean(|m| m.precision),
            macro_recall: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            high_recall: per_class[Severity::High.index()].recall,
        }
    }

    /// Plain-text per-class table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<8} {:>7} {:>7} {:>7} {:>7}\n",
            "class", "prec", "rec", "f1", "supp"
        );
        for (c, m) in Severity::ALL.iter().zip(&self.per_class) {
            s += &format!(
                "{:<8} {:>7.4} {:>7.4} {:>7.4} {:>7}\n",
                c.to_string(),
                m.precision,
                m.recall,
                m.f1,
                m.support
            );
        }
        s += &format!(
            "{:<8} {:>7.4} {:>7.4} {:>7.4} {:>7}\n",
            "macro", self.macro_precision, self.macro_recall, self.macro_f1, self.n
        );
        s += &format!(
            "accuracy {:.4}   HIGH recall {:.4}\n",
            self.accuracy, self.high_recall
        );
        s
    }
}

/// One stochastic forward pass on a feature vector.
pub fn predict(
    net: &SpikingNet,
    features: &[f64],
    enc: &EncoderConfig,
    stream: u64,
) -> Result<(Severity, ForwardOutput)> {
    let x = encode_seeded(features, enc, stream)?;
    let out = net.forward(&x)?;
    Ok((classify(out.counts3()), out))
}

/// Classifies every record with the encoder seeded from `enc.seed` (record `i`
/// uses stream `i`). With `n_repeats > 1` each window is encoded that many
/// times under derived seeds and the majority class wins, ties toward the
/// more severe class.
pub fn evaluate(
    net: &SpikingNet,
    records: &[GoldRecord],
    enc: &EncoderConfig,
    n_repeats: usize,
) -> Result<EvalReport> {
    let n_repeats = n_repeats.max(1);
    let encoders: Vec<EncoderConfig> = (0..n_repeats)
        .map(|r| EncoderConfig {
            seed: if r == 0 {
                enc.seed
            } else {
                mix_seed(enc.seed, r as u64)
            },
            ..*enc
        })
        .collect();
    let pred: Vec<Severity> = records
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let mut votes = [0u32; 3];
            for e in &encoders {
                let (c, _) = predict(net, &rec.features.0, e, i as u64)?;
                votes[c.index()] += 1;
            }
            Ok(classify(votes))
        })
        .collect::<Result<_>>()?;
    let truth: Vec<Severity> = records.iter().map(|r| r.label).collect();
    Ok(EvalReport::from_predictions(&truth, &pred))
}
