#![no_main]
use hartl_core::classical::{parse_labeled_matrix, parse_matrix};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = parse_matrix(text) {
            assert!(m.iter().all(|v| v.is_finite()));
        }
        if let Ok((x, y)) = parse_labeled_matrix(text) {
            assert_eq!(x.nrows(), y.len());
        }
    }
});
