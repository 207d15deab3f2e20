use std::path::PathBuf;

use clap::Args;
use dualq_core::scenario::ScenarioConfig;

use crate::error::Result;

/// How a scenario is assembled: a file and/or a preset, then overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Scenario file (TOML).
    #[arg(short, long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Bandwidth-delay preset: low, medium or high.
    #[arg(long)]
    pub preset: Option<String>,

    /// AQM parameter set: default or refined.
    #[arg(long)]
    pub params: Option<String>,

    /// Traffic mix: l4s, classic or dual.
    #[arg(long)]
    pub pattern: Option<String>,

    /// Link mode: bursty or smooth.
    #[arg(long)]
    pub mode: Option<String>,

    /// Run length, e.g. 30s.
    #[arg(long)]
    pub duration: Option<String>,

    /// Scenario key override, e.g. aqm.step_thresh=5ms. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ScenarioArgs {
    pub fn preset(name: &str) -> Self {
        ScenarioArgs {
            preset: Some(name.to_string()),
            ..Default::default()
        }
    }

    /// Flags are applied after the file, `--set` overrides last.
    pub fn resolve(&self) -> Result<ScenarioConfig> {
        let mut overrides = Vec::new();
        let flags = [
            ("preset", &self.preset),
            ("params", &self.params),
            ("pattern", &self.pattern),
            ("link.mode", &self.mode),
            ("duration", &self.duration),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                overrides.push(format!("{key}=\"{v}\""));
            }
        }
        overrides.extend(self.overrides.iter().cloned());
        let cfg = match &self.config {
            Some(path) => ScenarioConfig::from_file(path, &overrides)?,
            None => ScenarioConfig::from_toml_str("", &overrides, None)?,
        };
        Ok(cfg)
    }
}
