//! Shipped demo configurations.

use crate::config::ExperimentConfig;
use crate::HarnessError;

pub const DEMOS: &[(&str, &str)] = &[
    ("quad2d", include_str!("../demos/quad2d.toml")),
    ("quad-overlap", include_str!("../demos/quad-overlap.toml")),
    ("lasso-bcd", include_str!("../demos/lasso-bcd.toml")),
    ("slap-1d", include_str!("../demos/slap-1d.toml")),
    ("slap-2d", include_str!("../demos/slap-2d.toml")),
    ("obstacle-2d", include_str!("../demos/obstacle-2d.toml")),
    ("logistic-dual", include_str!("../demos/logistic-dual.toml")),
    (
        "logistic-duality-check",
        include_str!("../demos/logistic-duality-check.toml"),
    ),
];

pub fn names() -> Vec<&'static str> {
    DEMOS.iter().map(|(n, _)| *n).collect()
}

pub fn demo_text(name: &str) -> Option<&'static str> {
    DEMOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn demo_config(name: &str) -> Result<ExperimentConfig, HarnessError> {
    let text = demo_text(name).ok_or_else(|| {
        HarnessError::Config(format!(
            "unknown demo `{name}` (available: {})",
            names().join(", ")
        ))
    })?;
    ExperimentConfig::from_toml(text, &format!("demo {name}"))
}
