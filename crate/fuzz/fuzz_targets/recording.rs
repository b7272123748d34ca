#![no_main]
use std::sync::OnceLock;

use hartl_core::data::{parse_recording, ChannelRange, LabelEntry, LabelMap, Manifest, RunId};
use libfuzzer_sys::fuzz_target;

/// Four columns: time, two channels, label.
fn small() -> &'static Manifest {
    static M: OnceLock<Manifest> = OnceLock::new();
    M.get_or_init(|| Manifest {
        label_column: 3,
        channels: Vec::new(),
        channel_ranges: vec![ChannelRange { first: 1, last: 2, prefix: "acc".into() }],
        labels: LabelMap::new(vec![
            LabelEntry { code: 1, class_id: 1, name: "a".into() },
            LabelEntry { code: 2, class_id: 2, name: "b".into() },
        ])
        .unwrap(),
        ..Manifest::opportunity()
    })
}

fuzz_target!(|data: &[u8]| {
    if let Ok(rec) = parse_recording(data, small(), 1, RunId::Adl(1)) {
        assert_eq!(rec.labels.len(), rec.len());
        assert_eq!(rec.channel_count(), 2);
    }
    let _ = parse_recording(data, &Manifest::opportunity(), 3, RunId::Drill);
});
