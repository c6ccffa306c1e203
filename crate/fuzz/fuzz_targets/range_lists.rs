#![no_main]

use bilmax::harness::{parse_delta_list, parse_jmax_list};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(deltas) = parse_delta_list(s) {
            assert!(deltas.iter().all(|d| *d > 0.0 && d.is_finite()));
        }
        let _ = parse_jmax_list(s);
    }
});
