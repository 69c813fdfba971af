#![no_main]

use libfuzzer_sys::fuzz_target;
use ricci_core::geometry::GeometryModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = GeometryModel::from_toml_str(text);
    }
});
