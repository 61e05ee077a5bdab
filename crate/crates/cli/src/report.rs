//! Output provenance and small report helpers.

use serde::Serialize;
use stationkeep::error::Result;
use std::io::Write;
use std::path::Path;

/// Provenance block attached to every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool_version: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Meta {
    pub fn new(config_sha256: String, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256,
            seed,
        }
    }

    /// `# key=value` comment lines for CSV outputs.
    pub fn csv_header(&self) -> String {
        format!(
            "# tool_version={}\n# config_sha256={}\n# seed={}\n",
            self.tool_version, self.config_sha256, self.seed
        )
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn write_csv(path: &Path, meta: &Meta, header: &str, rows: &[String]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(meta.csv_header().as_bytes())?;
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn format_time_utc(epoch_s: i64) -> String {
    chrono::DateTime::from_timestamp(epoch_s, 0)
        .map(|dt| dt.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| epoch_s.to_string())
}
