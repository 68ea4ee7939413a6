//! Plot-data emission: CSV tables only.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use choquard::calculus::{fmt17, LatticeFunction};
use choquard::cayley::{Ball, GroupSpec};
use choquard::solver::SWEEP_HEADER;
use choquard::{Error, Result};

use crate::config::{PlotKind, RunConfig};
use crate::run::{shell_means, Outcome};

pub fn emit(c: &RunConfig) -> Result<Outcome> {
    let kind = c
        .kind
        .ok_or_else(|| Error::Invalid("plot needs --kind radial-profile, trace or sweep-table".into()))?;
    if c.inputs.is_empty() {
        return Err(Error::Invalid("plot needs at least one --input".into()));
    }
    let mut artifacts = Vec::new();
    for (k, input) in c.inputs.iter().enumerate() {
        if !input.exists() {
            return Err(Error::Invalid(format!("input {} does not exist", input.display())));
        }
        let suffix = if c.inputs.len() > 1 { format!("_{k}") } else { String::new() };
        let (name, text) = match kind {
            PlotKind::RadialProfile => ("radial_profile", radial_profile(c, input)?),
            PlotKind::Trace => ("trace", trace(input)?),
            PlotKind::SweepTable => ("sweep_table", sweep_table(input)?),
        };
        let path = c.out_dir.join(format!("{name}{suffix}.csv"));
        std::fs::write(&path, text)?;
        artifacts.push(path);
    }
    Ok(Outcome { artifacts, seeds: vec![], summary: json!({ "files": c.inputs.len() }) })
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

/// The `u_star` CSV beside a solve JSON, or the CSV itself on the configured ball.
fn radial_profile(c: &RunConfig, input: &Path) -> Result<String> {
    let (spec, radius, csv): (GroupSpec, u32, PathBuf) = if input.extension().is_some_and(|e| e == "json") {
        let doc = read_json(input)?;
        let bad = || Error::Invalid(format!("{} is not a solve summary", input.display()));
        let spec = doc["group"].as_str().ok_or_else(bad)?.parse()?;
        let radius = doc["radius"].as_u64().ok_or_else(bad)? as u32;
        let stem = input.file_stem().unwrap().to_string_lossy();
        (spec, radius, input.with_file_name(format!("{stem}_u_star.csv")))
    } else {
        (c.group.parse()?, c.radius, input.to_path_buf())
    };
    let ball = Ball::centered(spec, radius)?;
    let u = LatticeFunction::load_csv(ball, &csv).map_err(|e| match e {
        Error::Io(e) => Error::Invalid(format!("{}: {e}", csv.display())),
        Error::Csv(e) => Error::Invalid(format!("{}: {e}", csv.display())),
        e => e,
    })?;
    let mut text = String::from("distance,mean,count\n");
    for (d, m, n) in shell_means(u.domain().distances(), u.values()) {
        text.push_str(&format!("{d},{},{n}\n", fmt17(m)));
    }
    Ok(text)
}

fn trace(input: &Path) -> Result<String> {
    let doc = read_json(input)?;
    let entries = doc["trace"]
        .as_array()
        .ok_or_else(|| Error::Invalid(format!("{} has no trace", input.display())))?;
    let mut text = String::from("iteration,phase,Q\n");
    for e in entries {
        let (Some(it), Some(phase), Some(q)) = (e["iteration"].as_u64(), e["phase"].as_str(), e["value"].as_f64()) else {
            return Err(Error::Invalid(format!("{}: malformed trace entry {e}", input.display())));
        };
        text.push_str(&format!("{it},{phase},{}\n", fmt17(q)));
    }
    Ok(text)
}

fn sweep_table(input: &Path) -> Result<String> {
    let text = std::fs::read_to_string(input)?;
    if text.lines().next() != Some(SWEEP_HEADER) {
        return Err(Error::Invalid(format!("{} is not a sweep table", input.display())));
    }
    Ok(text)
}
