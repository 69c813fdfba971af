#![no_main]

use libfuzzer_sys::fuzz_target;
use ricci_harness::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ScenarioConfig::from_toml_str(text) {
            let again = ScenarioConfig::from_toml_str(&cfg.canonical()).expect("canonical form parses");
            assert_eq!(cfg.input_hash(), again.input_hash());
        }
    }
});
