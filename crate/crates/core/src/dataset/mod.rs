//! Windows, Gold-layer features, labelling, the synthetic trace generator and
//! patient-level splitting.

mod features;
mod gold;
mod label;
mod split;
mod synth;
mod window;

pub use features::{
    extract_features, window_slope, FeatureVector, FEATURE_NAMES, GLUCOSE_DIVISOR, SLOPE_DIVISOR,
};
pub use gold::{
    build_gold, read_gold, read_gold_file, write_gold, write_gold_file, GoldRecord, Source,
    WindowId,
};
pub use label::{ada_label, ada_rules};
pub use split::{split_by_patient, Split, DEFAULT_SPLIT_FRACTIONS};
pub use synth::{synth_generate, PatientTrace, SynthConfig};
pub use window::{slide_windows, Window, CADENCE_MIN, WINDOW_LEN};
