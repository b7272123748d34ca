#![no_main]
use hartl::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
            let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).expect("round trip");
            assert_eq!(again.hash(), cfg.hash());
        }
    }
});
