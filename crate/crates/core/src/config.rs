//! INI-style scenario files.
//!
//! ```ini
//! [general]
//! name = steady_state
//! controller = PI+MPCC, PI+IMMPCC
//! duration_s = 0.2
//! ts_us = 50
//!
//! [profile]
//! speed_rpm = 0:1000
//! load_nm = 0:0, 0.06:5
//! ```
//!
//! Keys carry their unit in the name. Every key can also be set from the
//! command line as `section.key=value`; keys of `[general]` may omit the
//! section. A comma-separated controller list expands into one scenario per
//! controller.

use std::path::Path;

use ini::Ini;

use crate::error::{Error, Result};
use crate::multistep::CostMode;
use crate::sim::{ControllerKind, Profile, ScenarioConfig};

/// Every accepted key, as `section.key`.
pub const KEYS: &[&str] = &[
    "general.name",
    "general.controller",
    "general.duration_s",
    "general.ts_us",
    "general.substeps",
    "general.delay_model",
    "general.id_ref_a",
    "general.initial_speed_rpm",
    "general.noise_a",
    "general.seed",
    "machine.vdc_v",
    "machine.rs_ohm",
    "machine.ld_h",
    "machine.lq_h",
    "machine.psi_f_wb",
    "machine.pole_pairs",
    "machine.j_kgm2",
    "machine.b_nms",
    "mpcc.horizon",
    "mpcc.i_max_a",
    "mpcc.penalty",
    "mpcc.cost_mode",
    "speed.limit_a",
    "pi.kp_a_s_per_rad",
    "pi.ki_a_per_rad",
    "dc.kp_per_s",
    "dc.beta1_per_s",
    "dc.beta2_per_s2",
    "dc.jn_kgm2",
    "profile.speed_rpm",
    "profile.load_nm",
];

/// Canonical `section.key` form; bare keys belong to `[general]`.
pub fn canonical_key(key: &str) -> Result<String> {
    let key = key.trim();
    let full = if key.contains('.') {
        key.to_string()
    } else {
        format!("general.{key}")
    };
    if KEYS.contains(&full.as_str()) {
        Ok(full)
    } else {
        Err(Error::UnknownKey(key.to_string()))
    }
}

/// Splits `key=value`.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{text}` is not of the form key=value")))?;
    Ok((canonical_key(k)?, v.trim().to_string()))
}

/// Parses `t0:v0, t1:v1, ...`.
pub fn parse_profile(text: &str) -> std::result::Result<Profile, String> {
    let mut points = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (t, v) = item
            .split_once(':')
            .ok_or_else(|| format!("breakpoint `{item}` is not time:value"))?;
        let t: f64 = t.trim().parse().map_err(|e| format!("time `{t}`: {e}"))?;
        let v: f64 = v.trim().parse().map_err(|e| format!("value `{v}`: {e}"))?;
        points.push((t, v));
    }
    Profile::new(points).map_err(|e| e.to_string())
}

pub fn parse_controllers(text: &str) -> std::result::Result<Vec<ControllerKind>, String> {
    let list: Vec<ControllerKind> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()?;
    if list.is_empty() {
        return Err("no controller given".into());
    }
    Ok(list)
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| Error::BadValue {
        key: key.to_string(),
        reason: format!("`{value}`: {e}"),
    })
}

/// Sets one key on a config. `general.controller` must name exactly one
/// controller here; lists are expanded by [`parse_config`].
pub fn set_key(cfg: &mut ScenarioConfig, key: &str, value: &str) -> Result<()> {
    let key = canonical_key(key)?;
    let k = key.as_str();
    let bad = |reason: String| Error::BadValue {
        key: key.clone(),
        reason,
    };
    match k {
        "general.name" => cfg.name = value.trim().to_string(),
        "general.controller" => {
            let list = parse_controllers(value).map_err(bad)?;
            if list.len() != 1 {
                return Err(Error::BadValue {
                    key,
                    reason: "expected a single controller".into(),
                });
            }
            cfg.controller = list[0];
        }
        "general.duration_s" => cfg.duration = num(k, value)?,
        "general.ts_us" => cfg.ts = num::<f64>(k, value)? / 1e6,
        "general.substeps" => cfg.substeps = num(k, value)?,
        "general.delay_model" => cfg.delay_model = value.parse().map_err(bad)?,
        "general.id_ref_a" => cfg.id_ref = num(k, value)?,
        "general.initial_speed_rpm" => cfg.initial_speed_rpm = num(k, value)?,
        "general.noise_a" => cfg.noise_amplitude = num(k, value)?,
        "general.seed" => cfg.seed = num(k, value)?,
        "machine.vdc_v" => cfg.machine.vdc = num(k, value)?,
        "machine.rs_ohm" => cfg.machine.rs = num(k, value)?,
        "machine.ld_h" => cfg.machine.ld = num(k, value)?,
        "machine.lq_h" => cfg.machine.lq = num(k, value)?,
        "machine.psi_f_wb" => cfg.machine.psi_f = num(k, value)?,
        "machine.pole_pairs" => cfg.machine.pole_pairs = num(k, value)?,
        "machine.j_kgm2" => cfg.machine.inertia = num(k, value)?,
        "machine.b_nms" => cfg.machine.friction = num(k, value)?,
        "mpcc.horizon" => cfg.horizon = num(k, value)?,
        "mpcc.i_max_a" => cfg.cost.i_max = num(k, value)?,
        "mpcc.penalty" => cfg.cost.penalty = num(k, value)?,
        "mpcc.cost_mode" => {
            cfg.cost_mode = match value.trim() {
                "final_step" => CostMode::FinalStep,
                "accumulated" => CostMode::Accumulated,
                other => return Err(bad(format!("`{other}` (expected final_step or accumulated)"))),
            }
        }
        "speed.limit_a" => cfg.pi.limit = num(k, value)?,
        "pi.kp_a_s_per_rad" => cfg.pi.kp = num(k, value)?,
        "pi.ki_a_per_rad" => cfg.pi.ki = num(k, value)?,
        "dc.kp_per_s" => cfg.dc.kp = num(k, value)?,
        "dc.beta1_per_s" => cfg.dc.beta1 = num(k, value)?,
        "dc.beta2_per_s2" => cfg.dc.beta2 = num(k, value)?,
        "dc.jn_kgm2" => cfg.dc.nominal_inertia = Some(num(k, value)?),
        "profile.speed_rpm" => cfg.speed_ref_rpm = parse_profile(value).map_err(bad)?,
        "profile.load_nm" => cfg.load_nm = parse_profile(value).map_err(bad)?,
        _ => unreachable!("key list and setter disagree on `{k}`"),
    }
    Ok(())
}

/// Parses a scenario file and applies overrides (later ones win). Returns one
/// validated config per listed controller.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<Vec<ScenarioConfig>> {
    let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut entries: Vec<(String, String)> = Vec::new();
    for (section, props) in &ini {
        let section = section.unwrap_or("general");
        for (k, v) in props.iter() {
            let full = format!("{section}.{k}");
            entries.push((canonical_key(&full)?, v.to_string()));
        }
    }
    for (k, v) in overrides {
        entries.push((canonical_key(k)?, v.clone()));
    }

    let mut cfg = ScenarioConfig::default();
    let mut controllers = vec![cfg.controller];
    for (k, v) in &entries {
        if k == "general.controller" {
            controllers = parse_controllers(v).map_err(|reason| Error::BadValue { key: k.clone(), reason })?;
        } else {
            set_key(&mut cfg, k, v)?;
        }
    }
    controllers
        .into_iter()
        .map(|controller| {
            let c = ScenarioConfig {
                controller,
                ..cfg.clone()
            };
            c.validate()?;
            Ok(c)
        })
        .collect()
}

pub fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<Vec<ScenarioConfig>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, overrides)
}
