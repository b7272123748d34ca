#![no_main]
use hartl_core::data::{decode_window_set, encode_window_set};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = decode_window_set(data) {
        let bytes = encode_window_set(&set);
        let again = decode_window_set(&bytes).expect("re-decode");
        assert_eq!(again.len(), set.len());
    }
});
