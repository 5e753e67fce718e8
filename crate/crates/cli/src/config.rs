//! Scenario files: one `key = value` pair per line, keys spelled exactly like
//! the scenario fields in camelCase. Blank lines and `#` comments are
//! ignored; unknown or repeated keys are errors.

use std::collections::BTreeSet;
use std::path::Path;

use coloc_core::sim::SpeedPerturbation;
use coloc_core::{ScenarioConfig, TemporalSource};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("invalid scenario: {0}")]
    Invalid(#[from] coloc_core::Error),
}

fn syntax(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| syntax(line, format!("{key}: cannot parse {value:?}")))
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    let mut seen = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| syntax(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(syntax(line, format!("duplicate key {key}")));
        }
        match key {
            "areaMin" => cfg.area_min = num(line, key, value)?,
            "areaMax" => cfg.area_max = num(line, key, value)?,
            "agentAreaMin" => cfg.agent_area_min = num(line, key, value)?,
            "agentAreaMax" => cfg.agent_area_max = num(line, key, value)?,
            "anchorCount" => cfg.anchor_count = num(line, key, value)?,
            "agentCount" => cfg.agent_count = num(line, key, value)?,
            "commRadius" => cfg.comm_radius = num(line, key, value)?,
            "deltaT" => cfg.delta_t = num(line, key, value)?,
            "initialSpeed" => cfg.initial_speed = num(line, key, value)?,
            "speedStd" => cfg.speed_std = num(line, key, value)?,
            "rangeNoiseCoeff" => cfg.range_noise_coeff = num(line, key, value)?,
            "internalNoiseCoeff" => cfg.internal_noise_coeff = num(line, key, value)?,
            "lMax" => cfg.l_max = num(line, key, value)?,
            "slots" => cfg.slots = num(line, key, value)?,
            "mcRuns" => cfg.mc_runs = num(line, key, value)?,
            "seed" => cfg.seed = num(line, key, value)?,
            "particleCount" => cfg.particle_count = num(line, key, value)?,
            "priorPositionStd" => cfg.prior_position_std = num(line, key, value)?,
            "priorVelocityKnown" => cfg.prior_velocity_known = num(line, key, value)?,
            "speedPerturbation" => {
                cfg.speed_perturbation = match value {
                    "component" => SpeedPerturbation::Component,
                    "magnitude" => SpeedPerturbation::Magnitude,
                    _ => {
                        return Err(syntax(
                            line,
                            format!("speedPerturbation: unknown mode {value:?}"),
                        ))
                    }
                }
            }
            "temporalSource" => {
                cfg.temporal_source = match value {
                    "refined" => TemporalSource::Refined,
                    "fused" => TemporalSource::Fused,
                    _ => {
                        return Err(syntax(
                            line,
                            format!("temporalSource: unknown source {value:?}"),
                        ))
                    }
                }
            }
            _ => return Err(syntax(line, format!("unknown key {key:?}"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}
