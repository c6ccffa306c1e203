#![no_main]

use bilmax::covering::{parse_intervals, union_measure, vitali_select};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(intervals) = parse_intervals(s) else {
        return;
    };
    if intervals.len() > 128 {
        return;
    }
    let Ok(picked) = vitali_select(&intervals) else {
        return;
    };
    for a in 0..picked.len() {
        for b in (a + 1)..picked.len() {
            assert!(!picked[a].overlaps(&picked[b]), "selection not disjoint");
        }
    }
    let union = union_measure(&intervals);
    let selected: f64 = picked.iter().map(|iv| iv.measure()).sum();
    if union.is_finite() {
        assert!(
            selected >= union / 3.0 - 1e-9 * union.max(1.0),
            "third-of-union bound violated"
        );
    }
});
