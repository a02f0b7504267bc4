#![no_main]

use libfuzzer_sys::fuzz_target;
use pdds_core::signal::{read_trace, write_trace};

fuzz_target!(|data: &[u8]| {
    let Ok(rows) = read_trace(data) else { return };
    for w in rows.windows(2) {
        assert!(w[1].t_min > w[0].t_min, "accepted a non-monotone trace");
    }
    let mut buf = Vec::new();
    write_trace(&mut buf, &rows).unwrap();
    assert_eq!(read_trace(buf.as_slice()).unwrap(), rows);
});
