#![no_main]

use bilmax::sampling::{sample_function, FunctionSpec, Grid1D};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(spec) = s.parse::<FunctionSpec>() {
            // Accepted specs round-trip through their text form.
            let back: FunctionSpec = spec
                .to_string()
                .parse()
                .expect("displayed spec failed to re-parse");
            assert_eq!(spec, back);
            // And sampling an accepted spec never panics.
            let grid = Grid1D::new(-5.0, 5.0, 64).unwrap();
            let _ = sample_function(&spec, &grid);
        }
    }
});
