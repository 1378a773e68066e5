//! Text serialization of expanded maps.
//!
//! A map file is a small TOML document with a fixed key order:
//!
//! ```text
//! id = "I-n10-r0.5-v2-s00"
//! width_m = 50.0
//! height_m = 50.0
//! seed = 1234
//! dataset_tag = "DatasetI"
//! profile = { kind = "ConstantVelocity" }
//!
//! [[obstacles]]
//! id = 0
//! x = 12.3456789
//! y = 40.0
//! vx = 1.41421356
//! vy = -1.41421356
//! r = 0.5
//! ```
//!
//! Every number is written with 9 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use toml::Value;

use super::{DatasetTag, DynamicMap, MotionProfile, ObstacleInit, RvoParams};
use crate::error::{Error, Result};
use crate::geometry::{Bounds, Vec2};

/// Formats `x` with 9 significant digits, always as a float literal.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0.0".to_string();
    }
    let sci = format!("{x:.8e}");
    let (_, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let mut s = if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    };
    if let Some(epos) = s.find('e') {
        let (mant, e) = s.split_at(epos);
        let mant = trim_zeros(mant);
        return format!("{mant}{e}");
    }
    if !s.contains('.') {
        s.push_str(".0");
    }
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0');
    if t.ends_with('.') {
        format!("{t}0")
    } else {
        t.to_string()
    }
}

/// Rounds `x` to the precision used in map files.
pub fn quantize(x: f64) -> f64 {
    format_sig9(x).parse().expect("formatted float parses")
}

pub fn to_string(map: &DynamicMap) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "id = {}", Value::String(map.id.clone()));
    let _ = writeln!(out, "width_m = {}", format_sig9(map.bounds.width));
    let _ = writeln!(out, "height_m = {}", format_sig9(map.bounds.height));
    let _ = writeln!(out, "seed = {}", map.seed);
    let _ = writeln!(out, "dataset_tag = \"{}\"", map.dataset_tag.as_str());
    match map.profile {
        MotionProfile::ConstantVelocity => {
            let _ = writeln!(out, "profile = {{ kind = \"ConstantVelocity\" }}");
        }
        MotionProfile::Rvo(p) => {
            let _ = writeln!(
                out,
                "profile = {{ kind = \"RVO\", time_horizon = {}, neighbor_dist = {}, preferred_speed = {} }}",
                format_sig9(p.time_horizon),
                format_sig9(p.neighbor_dist),
                format_sig9(p.preferred_speed)
            );
        }
    }
    for o in &map.obstacles {
        out.push('\n');
        out.push_str("[[obstacles]]\n");
        let _ = writeln!(out, "id = {}", o.id);
        let _ = writeln!(out, "x = {}", format_sig9(o.position.x));
        let _ = writeln!(out, "y = {}", format_sig9(o.position.y));
        let _ = writeln!(out, "vx = {}", format_sig9(o.velocity.x));
        let _ = writeln!(out, "vy = {}", format_sig9(o.velocity.y));
        let _ = writeln!(out, "r = {}", format_sig9(o.radius));
    }
    out
}

pub fn from_str(text: &str) -> Result<DynamicMap> {
    let root: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::MapFormat(e.to_string()))?;
    check_keys(
        &root,
        &["id", "width_m", "height_m", "seed", "dataset_tag", "profile", "obstacles"],
        "map",
    )?;
    let id = get_str(&root, "id")?.to_string();
    let bounds = Bounds::new(get_f64(&root, "width_m")?, get_f64(&root, "height_m")?);
    if !(bounds.width > 0.0 && bounds.height > 0.0) {
        return Err(Error::MapFormat("map dimensions must be positive".into()));
    }
    let seed = match root.get("seed") {
        Some(Value::Integer(i)) if *i >= 0 => *i as u64,
        _ => return Err(Error::MapFormat("seed must be a non-negative integer".into())),
    };
    let tag = get_str(&root, "dataset_tag")?;
    let dataset_tag = DatasetTag::parse(tag)
        .ok_or_else(|| Error::MapFormat(format!("unknown dataset_tag {tag:?}")))?;
    let profile = parse_profile(root.get("profile"))?;

    let obstacles = match root.get("obstacles") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(parse_obstacle)
            .collect::<Result<Vec<_>>>()?,
        Some(_) => return Err(Error::MapFormat("obstacles must be an array of tables".into())),
    };
    Ok(DynamicMap {
        id,
        bounds,
        seed,
        dataset_tag,
        profile,
        obstacles,
    })
}

fn parse_profile(v: Option<&Value>) -> Result<MotionProfile> {
    let Some(Value::Table(t)) = v else {
        return Err(Error::MapFormat("profile must be an inline table".into()));
    };
    match get_str(t, "kind")? {
        "ConstantVelocity" => {
            check_keys(t, &["kind"], "profile")?;
            Ok(MotionProfile::ConstantVelocity)
        }
        "RVO" => {
            check_keys(
                t,
                &["kind", "time_horizon", "neighbor_dist", "preferred_speed"],
                "profile",
            )?;
            Ok(MotionProfile::Rvo(RvoParams {
                time_horizon: get_f64(t, "time_horizon")?,
                neighbor_dist: get_f64(t, "neighbor_dist")?,
                preferred_speed: get_f64(t, "preferred_speed")?,
            }))
        }
        other => Err(Error::MapFormat(format!("unknown profile kind {other:?}"))),
    }
}

fn parse_obstacle(v: &Value) -> Result<ObstacleInit> {
    let Value::Table(t) = v else {
        return Err(Error::MapFormat("obstacle entries must be tables".into()));
    };
    check_keys(t, &["id", "x", "y", "vx", "vy", "r"], "obstacle")?;
    let id = match t.get("id") {
        Some(Value::Integer(i)) if *i >= 0 && *i <= u32::MAX as i64 => *i as u32,
        _ => return Err(Error::MapFormat("obstacle id must be a non-negative integer".into())),
    };
    let radius = get_f64(t, "r")?;
    if !(radius > 0.0) {
        return Err(Error::MapFormat(format!("obstacle {id}: radius must be positive")));
    }
    Ok(ObstacleInit {
        id,
        position: Vec2::new(get_f64(t, "x")?, get_f64(t, "y")?),
        velocity: Vec2::new(get_f64(t, "vx")?, get_f64(t, "vy")?),
        radius,
    })
}

fn check_keys(t: &toml::Table, allowed: &[&str], what: &str) -> Result<()> {
    match t.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::MapFormat(format!("unknown {what} field {k:?}"))),
        None => Ok(()),
    }
}

fn get_str<'a>(t: &'a toml::Table, key: &str) -> Result<&'a str> {
    t.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| Error::MapFormat(format!("missing string field {key:?}")))
}

fn get_f64(t: &toml::Table, key: &str) -> Result<f64> {
    let x = match t.get(key) {
        Some(Value::Float(f)) => *f,
        Some(Value::Integer(i)) => *i as f64,
        _ => return Err(Error::MapFormat(format!("missing numeric field {key:?}"))),
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::MapFormat(format!("field {key:?} is not finite")))
    }
}

pub fn write(map: &DynamicMap, path: &Path) -> Result<()> {
    fs::write(path, to_string(map))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<DynamicMap> {
    let text = fs::read_to_string(path)?;
    from_str(&text).map_err(|e| match e {
        Error::MapFormat(msg) => Error::MapFormat(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Loads every `*.toml` map in a directory, sorted by file name.
pub fn read_dir(dir: &Path) -> Result<Vec<DynamicMap>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read(p)).collect()
}
