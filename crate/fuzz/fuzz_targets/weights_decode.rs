#![no_main]

use libfuzzer_sys::fuzz_target;
use pdds_core::snn::{decode_weights, encode_weights};

fuzz_target!(|data: &[u8]| {
    let Ok(net) = decode_weights(data) else {
        return;
    };
    // decoded weights are f32-exact, so a second pass is lossless
    let again = decode_weights(&encode_weights(&net)).unwrap();
    assert_eq!(again, net);
});
