#![no_main]

use libfuzzer_sys::fuzz_target;
use ricci_core::snapshot::SliceSnapshot;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(snap) = SliceSnapshot::parse(text) {
            let _ = SliceSnapshot::parse(&snap.to_text()).expect("written snapshot parses");
        }
    }
});
