#![no_main]
use hartl_core::model::{decode_tensors, encode_tensors};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(tensors) = decode_tensors(data) {
        let again = decode_tensors(&encode_tensors(&tensors)).expect("re-decode");
        assert_eq!(again.len(), tensors.len());
    }
});
