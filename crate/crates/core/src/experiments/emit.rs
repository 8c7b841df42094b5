//! Output writers shared by the experiment runner and the CLI.
//!
//! All tables are CSV with a single header line, LF newlines, and reals
//! rendered with 17 significant digits, so a rerun with the same config
//! produces byte-identical files.  Run metadata goes into a JSON manifest
//! next to the tables.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

use crate::lattice::{LatticeState, Species};

use super::config::ExperimentConfig;
use super::ExperimentError;

/// Render a real with 17 significant digits; round-trips through parsing.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Compact label for a time value used in file names (`0.02` -> "0.02").
pub fn time_label(t: f64) -> String {
    format!("{t:?}")
}

pub fn real_row(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| fmt_real(*v)).collect()
}

fn render_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "row width mismatch");
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// Collects everything a run produces and writes the manifest at the end,
/// whether the run succeeded or died partway.
pub struct Emitter {
    out_dir: PathBuf,
    files: Vec<String>,
    seeds: Vec<Value>,
    extras: Map<String, Value>,
    config_echo: Value,
    started: Instant,
}

impl Emitter {
    pub fn new(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Self, ExperimentError> {
        fs::create_dir_all(out_dir)
            .map_err(|e| ExperimentError::Io(format!("create {}: {e}", out_dir.display())))?;
        Ok(Emitter {
            out_dir: out_dir.to_path_buf(),
            files: Vec::new(),
            seeds: Vec::new(),
            extras: Map::new(),
            config_echo: serde_json::to_value(cfg).expect("config serializes"),
            started: Instant::now(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn elapsed_seconds(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), ExperimentError> {
        let path = self.out_dir.join(name);
        fs::write(&path, render_csv(header, rows))
            .map_err(|e| ExperimentError::Io(format!("write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Occupied sites of one configuration, ascending by site index.
    pub fn write_occupancy_csv(
        &mut self,
        name: &str,
        state: &LatticeState,
    ) -> Result<(), ExperimentError> {
        let mut rows: Vec<(u32, &'static str)> = state
            .particles
            .iter()
            .map(|p| {
                (p.site, match p.species {
                    Species::Red => "red",
                    Species::Blue => "blue",
                })
            })
            .collect();
        rows.sort_unstable();
        let rendered: Vec<Vec<String>> =
            rows.iter().map(|(site, sp)| vec![site.to_string(), sp.to_string()]).collect();
        self.write_csv(name, &["site", "species"], &rendered)
    }

    /// Record the RNG seed used for one unit of work.
    pub fn record_seed(&mut self, label: &str, seed: u64, streams: usize) {
        self.seeds.push(json!({ "label": label, "seed": seed, "streams": streams }));
    }

    /// Attach run-specific metadata to the manifest.
    pub fn note(&mut self, key: &str, value: Value) {
        self.extras.insert(key.to_string(), value);
    }

    /// Write `manifest.json`.  Called exactly once, on both success and
    /// failure paths, so partial output is always accounted for.
    pub fn finalize(&mut self, error: Option<&str>) -> Result<(), ExperimentError> {
        let manifest = json!({
            "status": if error.is_none() { "success" } else { "failed" },
            "error": error,
            "config": self.config_echo,
            "conventions": {
                "error_bars": "plotted as 2 * stderr",
                "reals": "17 significant digits",
                "newlines": "LF",
            },
            "seeds": self.seeds,
            "files": self.files,
            "wall_clock_seconds": self.started.elapsed().as_secs_f64(),
            "version": env!("CARGO_PKG_VERSION"),
            "extra": Value::Object(self.extras.clone()),
        });
        let path = self.out_dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text)
            .map_err(|e| ExperimentError::Io(format!("write {}: {e}", path.display())))?;
        Ok(())
    }
}
