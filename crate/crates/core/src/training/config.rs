use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub patience: usize,
    pub lr_init: f64,
    pub clip_norm: f64,
    pub rho: f64,
    pub balance_lambda: f64,
    pub trace_decay: f64,
    pub batch_size: usize,
    /// Penalty per hidden-layer synaptic event, averaged over the batch.
    /// Zero disables it.
    pub synops_lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_max: 200,
            patience: 15,
            lr_init: 5e-4,
            clip_norm: 1.0,
            rho: 0.9,
            balance_lambda: 1e-4,
            trace_decay: 0.9,
            batch_size: 256,
            synops_lambda: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs_max == 0 || self.batch_size == 0 || self.patience == 0 {
            return bad("epochs_max, patience and batch_size must be positive".into());
        }
        if self.patience >= self.epochs_max {
            return bad(format!(
                "patience {} must be below epochs_max {}",
                self.patience, self.epochs_max
            ));
        }
        for (name, x) in [("lr_init", self.lr_init), ("clip_norm", self.clip_norm)] {
            if !(x.is_finite() && x > 0.0) {
                return bad(format!("{name} must be positive, got {x}"));
            }
        }
        for (name, x) in [("rho", self.rho), ("trace_decay", self.trace_decay)] {
            if !(x > 0.0 && x <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {x}"));
            }
        }
        for (name, x) in [
            ("balance_lambda", self.balance_lambda),
            ("synops_lambda", self.synops_lambda),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                return bad(format!("{name} must be non-negative, got {x}"));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_partial_and_unknown() {
        let c = TrainConfig::from_toml_str("epochs_max = 20\npatience = 5\n").unwrap();
        assert_eq!((c.epochs_max, c.patience, c.lr_init), (20, 5, 5e-4));
        assert!(TrainConfig::from_toml_str("epochs = 20").is_err());
        assert!(TrainConfig::from_toml_str("epochs_max = 5\npatience = 5").is_err());
    }
}
