#![no_main]

use libfuzzer_sys::fuzz_target;
use ricci_harness::Report;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(report) = Report::from_json(text) {
            let _ = report.summary();
        }
    }
});
