//! Experiment specs bundled with the crate.

use super::ExperimentSpec;
use crate::error::{Error, Result};

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        /// `(name, toml text)` for every bundled preset.
        pub const PRESETS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../presets/", $name, ".toml"))),)*
        ];
    };
}

presets!(
    "apck_size",
    "apck_beta",
    "apkp_size",
    "apkp_beta",
    "apu_pca_ucb_size",
    "apu_pca_ucb_beta",
    "apu_pca_ts_size",
    "apu_pca_ts_beta",
    "edge_correlated",
    "apkp_desk",
);

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset(name: &str) -> Result<ExperimentSpec> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
    ExperimentSpec::from_toml(text)
}
