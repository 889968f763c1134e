//! Named scenario files shipped with the crate.
//!
//! Each figure of the reference study has a preset holding its caption
//! parameters. Names prefixed `calibrated-` use diffusion and drift scaled
//! by 1000 (see the README for why).

use crate::config::{parse_scenario, DEFAULT_SCENARIO_TOML};
use crate::error::ConfigError;
use crate::model::{MolecularLinkConfig, Scenario, Vector3};

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        /// `(name, TOML text)` of every bundled preset.
        pub const PRESETS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../../presets/", $name, ".toml")))),*
        ];
    };
}

presets!(
    "table3",
    "fig4",
    "fig5-t3",
    "fig5-t4",
    "fig6-wx10-t4.2",
    "fig6-wx10-t4.4",
    "fig6-wx70-t4.2",
    "fig7",
    "fig8-wx10",
    "fig8-wx70",
    "calibrated-fig4",
    "calibrated-fig7",
    "calibrated-fig8-wx10",
    "calibrated-fig8-wx70",
);

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Result<Scenario, ConfigError> {
    let text = preset_text(name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        ConfigError::invalid("preset", format!("unknown preset `{name}`; known: {}", known.join(", ")))
    })?;
    parse_scenario(text)
}

/// The default molecular link with the geometry and drift of the figure
/// captions: relay at `(100, relay_y, 10)` μm, destination at
/// `(200, 100, 20)` μm, drift `(wx, wy, 20)` μm/s.
pub fn caption_link(relay_y_um: f64, wx_um: f64, wy_um: f64, t_dmc: f64) -> MolecularLinkConfig {
    let base = parse_scenario(DEFAULT_SCENARIO_TOML).expect("bundled default parses");
    MolecularLinkConfig {
        relay_pos: Vector3::from_micro(100.0, relay_y_um, 10.0),
        dest_pos: Vector3::from_micro(200.0, 100.0, 20.0),
        drift: Vector3::from_micro(wx_um, wy_um, 20.0),
        t_dmc,
        ..base.molecular
    }
}
