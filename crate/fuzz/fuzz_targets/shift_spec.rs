#![no_main]
use hartl_core::synthgen::ShiftSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ShiftSpec::from_toml_str(text);
    }
});
