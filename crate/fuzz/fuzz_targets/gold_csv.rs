#![no_main]

use libfuzzer_sys::fuzz_target;
use pdds_core::dataset::{read_gold, write_gold};

fuzz_target!(|data: &[u8]| {
    let Ok(recs) = read_gold(data) else { return };
    for r in &recs {
        assert!(r.features.0.iter().all(|x| x.is_finite()));
    }
    let mut buf = Vec::new();
    write_gold(&mut buf, &recs).unwrap();
    assert_eq!(read_gold(buf.as_slice()).unwrap().len(), recs.len());
});
