use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::GoldRecord;
use crate::snn::{count_synops, encode_seeded, EncoderConfig, SpikingNet};
use crate::{Error, Result};

/// Energy per multiply-accumulate: the reference MLP figure (8.7 nJ) spread
/// over its 9,664 MACs.
pub const DEFAULT_E_MAC: f64 = 8.7e-9 / 9_664.0;
/// Energy per synaptic event; equal to the MAC cost unless overridden.
pub const DEFAULT_E_SYNOP: f64 = DEFAULT_E_MAC;

/// Published figures the measured numbers are shown against. None of them is
/// computed here except the ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFigures {
    pub snn_energy_j: f64,
    pub lstm_energy_j: f64,
    pub mlp_energy_j: f64,
    pub lstm_params: u64,
    pub lstm_accuracy: f64,
    pub mlp_accuracy: f64,
    pub snn_accuracy: f64,
    pub snn_high_recall: f64,
    /// LSTM ÷ SNN energy ratio as printed alongside the energies.
    pub reported_lstm_over_snn: f64,
}

pub const REFERENCE: ReferenceFigures = ReferenceFigures {
    snn_energy_j: 1_551e-15,
    lstm_energy_j: 122.9e-9,
    mlp_energy_j: 8.7e-9,
    lstm_params: 138_627,
    lstm_accuracy: 0.9906,
    mlp_accuracy: 0.9900,
    snn_accuracy: 0.8590,
    snn_high_recall: 0.9072,
    reported_lstm_over_snn: 79_267.0,
};

impl ReferenceFigures {
    pub fn lstm_over_snn(&self) -> f64 {
        self.lstm_energy_j / self.snn_energy_j
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    /// Joules per synaptic event.
    pub e_synop: f64,
    /// Joules per multiply-accumulate.
    pub e_mac: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            e_synop: DEFAULT_E_SYNOP,
            e_mac: DEFAULT_E_MAC,
        }
    }
}

impl EnergyModel {
    /// Back-solves both constants from the reference energies: `e_mac` from
    /// the MLP figure over `macs`, `e_synop` from the SNN figure over the
    /// measured SynOps per inference.
    pub fn calibrated(measured_synops: f64, macs: u64) -> Self {
        Self {
            e_synop: if measured_synops > 0.0 {
                REFERENCE.snn_energy_j / measured_synops
            } else {
                0.0
            },
            e_mac: REFERENCE.mlp_energy_j / macs as f64,
        }
    }
}

/// MACs of a dense feed-forward net with the given layer widths.
pub fn count_macs(dims: &[usize]) -> u64 {
    dims.windows(2).map(|w| (w[0] * w[1]) as u64).sum()
}

/// Worst-case synaptic events of a spiking net of the same widths over `T`
/// steps: one dense pass per step.
pub fn snn_dense_equivalent_macs(dims: &[usize], timesteps: usize) -> u64 {
    timesteps as u64 * count_macs(dims)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub model: EnergyModel,
    pub calibrated: bool,
    pub synops_per_inference: f64,
    pub worst_case_synops: u64,
    /// Measured SynOps ÷ worst case.
    pub sparsity: f64,
    pub mlp_macs: u64,
    pub energy_snn_j: f64,
    pub energy_mlp_j: f64,
    /// `energy_snn_j / energy_mlp_j`.
    pub snn_over_mlp: f64,
    /// Per-event cost that would reproduce the reference SNN energy.
    pub implied_e_synop: f64,
    /// Published reference figures and the ratio recomputed from them.
    pub reference: ReferenceFigures,
    pub reference_lstm_over_snn: f64,
}

pub fn energy_report(
    synops_per_inference: f64,
    worst_case_synops: u64,
    mlp_macs: u64,
    model: EnergyModel,
    calibrated: bool,
) -> EnergyReport {
    let energy_snn_j = synops_per_inference * model.e_synop;
    let energy_mlp_j = mlp_macs as f64 * model.e_mac;
    EnergyReport {
        model,
        calibrated,
        synops_per_inference,
        worst_case_synops,
        sparsity: if worst_case_synops == 0 {
            0.0
        } else {
            synops_per_inference / worst_case_synops as f64
        },
        mlp_macs,
        energy_snn_j,
        energy_mlp_j,
        snn_over_mlp: if energy_mlp_j > 0.0 {
            energy_snn_j / energy_mlp_j
        } else {
            f64::NAN
        },
        implied_e_synop: if synops_per_inference > 0.0 {
            REFERENCE.snn_energy_j / synops_per_inference
        } else {
            f64::NAN
        },
        reference: REFERENCE,
        reference_lstm_over_snn: REFERENCE.lstm_over_snn(),
    }
}

impl EnergyReport {
    /// Plain-text table: measured rows first, then the published reference rows.
    pub fn table(&self) -> String {
        let r = &self.reference;
        let mut s = String::new();
        s += &format!(
            "{:<28} {:>14} {:>16}\n",
            "model", "ops/inference", "energy/inference"
        );
        s += &format!(
            "{:<28} {:>14.0} {:>16}\n",
            "SNN (measured SynOps)",
            self.synops_per_inference,
            joules(self.energy_snn_j)
        );
        s += &format!(
            "{:<28} {:>14} {:>16}\n",
            "MLP (MACs)",
            self.mlp_macs,
            joules(self.energy_mlp_j)
        );
        s += &format!(
            "{:<28} {:>14} {:>16}\n",
            "SNN worst case",
            self.worst_case_synops,
            joules(self.worst_case_synops as f64 * self.model.e_synop)
        );
        s += &format!(
            "{:<28} {:>14} {:>16}\n",
            "SNN (published)",
            "-",
            joules(r.snn_energy_j)
        );
        s += &format!(
            "{:<28} {:>14} {:>16}\n",
            "Bi-LSTM (published)",
            "-",
            joules(r.lstm_energy_j)
        );
        s += &format!(
            "{:<28} {:>14} {:>16}\n",
            "MLP (published)",
            "-",
            joules(r.mlp_energy_j)
        );
        s += &format!(
            "e_synop {}  e_mac {}{}\n",
            joules(self.model.e_synop),
            joules(self.model.e_mac),
            if self.calibrated {
                "  (calibrated to published energies)"
            } else {
                ""
            }
        );
        s += &format!(
            "sparsity {:.4} of worst case; SNN/MLP energy {:.3}\n",
            self.sparsity, self.snn_over_mlp
        );
        s += &format!(
            "implied e_synop for the published SNN energy: {}\n",
            joules(self.implied_e_synop)
        );
        s += &format!(
            "LSTM/SNN ratio from published energies {:.0} (printed as {:.0})\n",
            self.reference_lstm_over_snn, r.reported_lstm_over_snn
        );
        s
    }
}

fn joules(x: f64) -> String {
    if !x.is_finite() {
        return "n/a".into();
    }
    let (v, unit) = match x.abs() {
        0.0 => (0.0, "J"),
        a if a < 1e-12 => (x * 1e15, "fJ"),
        a if a < 1e-9 => (x * 1e12, "pJ"),
        a if a < 1e-6 => (x * 1e9, "nJ"),
        a if a < 1e-3 => (x * 1e6, "uJ"),
        _ => (x, "J"),
    };
    format!("{v:.3} {unit}")
}

/// Mean SynOps per inference over `records`, encoder stream = record index.
pub fn measure_synops(
    net: &SpikingNet,
    records: &[GoldRecord],
    enc: &EncoderConfig,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let x = encode_seeded(&r.features.0, enc, i as u64)?;
            Ok::<u64, Error>(count_synops(net, &net.forward(&x)?.spikes))
        })
        .try_reduce(|| 0u64, |a, b| Ok(a + b))?;
    Ok(total as f64 / records.len() as f64)
}
