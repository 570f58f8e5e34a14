//! CSV and JSON writers. Floats are written with 17 significant digits.

use std::fs::{self, File};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use tlb_core::{Sample, Trajectory};

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_events(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "kind", "level", "ell_pre", "ell_post"])?;
    for e in &traj.events {
        w.write_record([
            float(e.t),
            e.kind.as_str().to_owned(),
            e.level.to_string(),
            e.ell_pre.to_string(),
            e.ell_post.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `t, ell, u_n, q_1 .. q_{L+1}, v_j...` where `L` is the highest level reached.
pub fn write_samples(path: &Path, traj: &Trajectory, v_levels: &[u32]) -> Result<()> {
    let top = traj.max_level() + 1;
    let mut w = writer(path)?;
    let mut header = vec!["t".to_owned(), "ell".to_owned(), "u_n".to_owned()];
    header.extend((1..=top).map(|i| format!("q_{i}")));
    header.extend(v_levels.iter().map(|j| format!("v_{j}")));
    w.write_record(&header)?;
    for s in &traj.samples {
        w.write_record(sample_row(s, top, v_levels))?;
    }
    w.flush()?;
    Ok(())
}

fn sample_row(s: &Sample, top: usize, v_levels: &[u32]) -> Vec<String> {
    let mut row = vec![float(s.t), s.ell.to_string(), float(s.total_mass())];
    row.extend((1..=top).map(|i| float(s.occupancy.q(i))));
    row.extend(v_levels.iter().map(|&j| float(s.tail_mass(j as usize))));
    row
}
