#![no_main]
use hartl_core::data::Manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = Manifest::from_toml_str(text) {
            let again = Manifest::from_toml_str(&m.to_toml_string()).expect("round trip");
            assert_eq!(again.hash(), m.hash());
        }
    }
});
