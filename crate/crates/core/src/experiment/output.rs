use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::ExperimentConfig;
use crate::error::Result;

/// Sidecar written next to every output file as `<stem>.meta.json`.
#[derive(Serialize)]
struct Sidecar<'a> {
    file: &'a str,
    version: &'static str,
    system: &'a str,
    dt: f64,
    config: &'a ExperimentConfig,
}

/// Where outputs go and what each sidecar records.
pub(super) struct OutputDir<'a> {
    pub dir: &'a Path,
    pub cfg: &'a ExperimentConfig,
    pub system_id: &'a str,
    pub dt: f64,
}

impl OutputDir<'_> {
    /// Writes `bytes` to `name` plus its sidecar and returns the data path.
    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        fs::create_dir_all(self.dir)?;
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        let meta = Sidecar {
            file: name,
            version: env!("CARGO_PKG_VERSION"),
            system: self.system_id,
            dt: self.dt,
            config: self.cfg,
        };
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(name);
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        fs::write(self.dir.join(format!("{stem}.meta.json")), text)?;
        Ok(path)
    }

    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(header)?;
        for row in rows {
            wtr.write_record(row)?;
        }
        let bytes = wtr.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        self.write(name, &bytes)
    }
}

pub(super) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(super) fn opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
