#![no_main]
use hartl::SweepGrid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(grid) = SweepGrid::from_toml_str(text) {
            if grid.axes.iter().map(|(_, v)| v.len()).product::<usize>() <= 4096 {
                let _ = grid.points();
            }
        }
    }
});
