//! Named configurations, one or more per acceptance experiment. The TOML
//! sources live in `crates/cli/presets` and are compiled into the binary.

use roughfrob::{Error, Result};

pub const PRESETS: &[(&str, &str)] = &[
    ("corrector", include_str!("../presets/corrector.toml")),
    ("exp2d", include_str!("../presets/exp2d.toml")),
    ("exp2d-order", include_str!("../presets/exp2d-order.toml")),
    ("frob1", include_str!("../presets/frob1.toml")),
    ("frob1-mollify", include_str!("../presets/frob1-mollify.toml")),
    ("frob2-orders", include_str!("../presets/frob2-orders.toml")),
    ("gronwall", include_str!("../presets/gronwall.toml")),
    ("implicit-cubic", include_str!("../presets/implicit-cubic.toml")),
    ("implicit-degenerate", include_str!("../presets/implicit-degenerate.toml")),
    ("jet-roundtrip", include_str!("../presets/jet-roundtrip.toml")),
    ("parts", include_str!("../presets/parts.toml")),
    ("sewing-06", include_str!("../presets/sewing-06.toml")),
    ("sewing-08", include_str!("../presets/sewing-08.toml")),
    ("young-oracle", include_str!("../presets/young-oracle.toml")),
    ("young-order", include_str!("../presets/young-order.toml")),
    ("zust-curl", include_str!("../presets/zust-curl.toml")),
    ("zust-rotational", include_str!("../presets/zust-rotational.toml")),
    ("zust-wedge", include_str!("../presets/zust-wedge.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown preset {name:?}; available: {}",
                names().collect::<Vec<_>>().join(", ")
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn every_preset_parses_and_names_a_command() {
        for (name, text) in PRESETS {
            let cfg = ExperimentConfig::from_toml(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(cfg.command.is_some(), "{name}");
            for slot in ["f", "g", "y", "u"] {
                cfg.signal_spec(slot).unwrap_or_else(|e| panic!("{name}: {e}"));
            }
        }
        assert!(source("nope").is_err());
    }
}
