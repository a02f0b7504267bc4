#![no_main]

use libfuzzer_sys::fuzz_target;
use pdds_core::dataset::SynthConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = SynthConfig::from_toml_str(s) {
        cfg.validate().unwrap();
    }
});
