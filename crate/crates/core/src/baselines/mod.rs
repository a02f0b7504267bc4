//! Comparison points for the spiking classifier: the static ADA rule table,
//! a parameter-matched dense MLP, and the SynOps/MAC energy estimate.

mod energy;
mod mlp;
mod rule;

pub use energy::{
    count_macs, energy_report, measure_synops, snn_dense_equivalent_macs, EnergyModel,
    EnergyReport, ReferenceFigures, DEFAULT_E_MAC, DEFAULT_E_SYNOP, REFERENCE,
};
pub use mlp::{mlp_forward, mlp_predict, mlp_train, MlpFit, MlpNet, MlpTrainConfig};
pub use rule::{rule_assess, rule_assess_window};
