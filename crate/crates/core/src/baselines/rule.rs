use crate::dataset::{ada_rules, window_slope, Window};
use crate::Severity;

/// Stateless ADA threshold assessment from the latest reading and slope.
/// Same table as [`crate::dataset::ada_label`] minus the annotation override.
pub fn rule_assess(last_mgdl: f64, slope_mgdl_per_min: f64) -> Severity {
    ada_rules(last_mgdl, slope_mgdl_per_min)
}

pub fn rule_assess_window(w: &Window) -> Severity {
    rule_assess(w.last(), window_slope(w))
}
