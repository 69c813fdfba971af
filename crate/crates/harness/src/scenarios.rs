//! Scenarios shipped with the binary.

use crate::config::{ConfigError, ScenarioConfig};

const BUNDLED: [(&str, &str); 3] = [
    ("euclidean-calibration", include_str!("../scenarios/euclidean-calibration.toml")),
    ("sphere-shrinker", include_str!("../scenarios/sphere-shrinker.toml")),
    ("torus-bumpy", include_str!("../scenarios/torus-bumpy.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn bundled(name: &str) -> Option<Result<ScenarioConfig, ConfigError>> {
    source(name).map(ScenarioConfig::from_toml_str)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_under_their_own_names() {
        for name in names() {
            let cfg = bundled(name).unwrap().unwrap();
            assert_eq!(cfg.name, name);
        }
        assert!(bundled("missing").is_none());
    }
}
