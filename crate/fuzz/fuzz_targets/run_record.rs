#![no_main]
use hartl_core::trainers::RunRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(r) = RunRecord::from_jsonl(text) {
            let _ = r.max_target_f1();
            let _ = RunRecord::from_jsonl(&r.to_jsonl());
        }
    }
});
