//! Forecast interchange format.
//!
//! A grid on disk is a JSON header plus a flat payload file:
//!
//! - `<name>.json`: axes, units, grid kind, payload descriptor.
//! - payload: `u` values then `v` values (then per-cell altitudes when the
//!   header sets `per_cell_altitude`), each block in `[time][level][lat][lon]`
//!   row-major order. Binary encoding is little-endian 32-bit floats; the CSV
//!   encoding is one decimal value per line in the same order.
//!
//! The loader validates axis ordering, payload extent, and value finiteness
//! before handing out a [`WindGrid`].

use crate::error::{Error, Result};
use crate::grid::{GridKind, Levels, WindGrid};
use ndarray::Array4;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const FORMAT_TAG: &str = "windgrid-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadEncoding {
    Binary,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelEntry {
    Altitude { altitude_m: f64 },
    Pressure { pressure_hpa: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PayloadSpec {
    pub encoding: PayloadEncoding,
    /// Payload file name, relative to the header's directory.
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridHeader {
    pub format: String,
    pub kind: GridKind,
    pub latitudes: Vec<f64>,
    pub longitudes: Vec<f64>,
    pub levels: Vec<LevelEntry>,
    pub per_cell_altitude: bool,
    /// RFC 3339 UTC timestamps.
    pub times_utc: Vec<String>,
    pub units: Units,
    pub payload: PayloadSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Units {
    pub wind: String,
    pub altitude: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            wind: "m s-1".into(),
            altitude: "m".into(),
        }
    }
}

fn format_time(epoch_s: i64) -> String {
    chrono::DateTime::from_timestamp(epoch_s, 0)
        .map(|dt| dt.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| epoch_s.to_string())
}

fn parse_time(s: &str) -> Result<i64> {
    chrono::DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.timestamp())
        .map_err(|e| Error::Data(format!("bad timestamp {s:?}: {e}")))
}

/// Write a grid as `<stem>.json` plus `<stem>.bin` (or `.csv`).
pub fn write_grid(grid: &WindGrid, header_path: &Path, encoding: PayloadEncoding) -> Result<()> {
    let stem = header_path
        .file_stem()
        .ok_or_else(|| Error::Config(format!("bad output path {}", header_path.display())))?
        .to_string_lossy()
        .to_string();
    let payload_name = match encoding {
        PayloadEncoding::Binary => format!("{stem}.bin"),
        PayloadEncoding::Csv => format!("{stem}.csv"),
    };

    let (levels, per_cell_altitude) = match grid.levels() {
        Levels::Altitude(alts) => (
            alts.iter().map(|&a| LevelEntry::Altitude { altitude_m: a }).collect(),
            false,
        ),
        Levels::Pressure { pressures_hpa, .. } => (
            pressures_hpa
                .iter()
                .map(|&p| LevelEntry::Pressure { pressure_hpa: p })
                .collect(),
            true,
        ),
    };

    let header = GridHeader {
        format: FORMAT_TAG.into(),
        kind: grid.kind(),
        latitudes: grid.latitudes().to_vec(),
        longitudes: grid.longitudes().to_vec(),
        levels,
        per_cell_altitude,
        times_utc: grid.times().iter().map(|&t| format_time(t)).collect(),
        units: Units::default(),
        payload: PayloadSpec {
            encoding,
            file: payload_name.clone(),
        },
    };

    if let Some(dir) = header_path.parent() {
        fs::create_dir_all(dir)?;
    }
    let json = serde_json::to_string_pretty(&header)?;
    fs::write(header_path, json + "\n")?;

    let payload_path = sibling(header_path, &payload_name);
    let mut blocks: Vec<&Array4<f64>> = vec![grid.u(), grid.v()];
    if let Levels::Pressure { altitudes, .. } = grid.levels() {
        blocks.push(altitudes);
    }
    let mut out = BufWriter::new(fs::File::create(&payload_path)?);
    match encoding {
        PayloadEncoding::Binary => {
            for block in blocks {
                for &x in block.iter() {
                    out.write_all(&(x as f32).to_le_bytes())?;
                }
            }
        }
        PayloadEncoding::Csv => {
            for block in blocks {
                for &x in block.iter() {
                    writeln!(out, "{}", x as f32)?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Load a grid from its JSON header.
pub fn read_grid(header_path: &Path) -> Result<WindGrid> {
    let text = fs::read_to_string(header_path)?;
    let header: GridHeader = serde_json::from_str(&text)?;
    if header.format != FORMAT_TAG {
        return Err(Error::Data(format!(
            "unsupported grid format {:?} (expected {FORMAT_TAG:?})",
            header.format
        )));
    }

    let times: Vec<i64> = header
        .times_utc
        .iter()
        .map(|s| parse_time(s))
        .collect::<Result<_>>()?;

    let shape = (
        times.len(),
        header.levels.len(),
        header.latitudes.len(),
        header.longitudes.len(),
    );
    let cells = shape.0 * shape.1 * shape.2 * shape.3;
    let n_blocks = if header.per_cell_altitude { 3 } else { 2 };

    let payload_path = sibling(header_path, &header.payload.file);
    let values = match header.payload.encoding {
        PayloadEncoding::Binary => {
            let bytes = fs::read(&payload_path)?;
            if bytes.len() != cells * n_blocks * 4 {
                return Err(Error::Data(format!(
                    "payload {} holds {} bytes, expected {}",
                    payload_path.display(),
                    bytes.len(),
                    cells * n_blocks * 4
                )));
            }
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect::<Vec<f32>>()
        }
        PayloadEncoding::Csv => {
            let reader = BufReader::new(fs::File::open(&payload_path)?);
            let mut values = Vec::with_capacity(cells * n_blocks);
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    continue;
                }
                let x: f32 = trimmed.parse().map_err(|e| Error::Parse {
                    line: idx + 1,
                    detail: format!("bad payload value {trimmed:?}: {e}"),
                })?;
                values.push(x);
            }
            if values.len() != cells * n_blocks {
                return Err(Error::Data(format!(
                    "payload {} holds {} values, expected {}",
                    payload_path.display(),
                    values.len(),
                    cells * n_blocks
                )));
            }
            values
        }
    };

    let block = |k: usize| -> Result<Array4<f64>> {
        let widened: Vec<f64> = values[k * cells..(k + 1) * cells]
            .iter()
            .map(|&x| x as f64)
            .collect();
        Array4::from_shape_vec(shape, widened)
            .map_err(|e| Error::Data(format!("payload reshape: {e}")))
    };
    let u = block(0)?;
    let v = block(1)?;

    let levels = if header.per_cell_altitude {
        let pressures = header
            .levels
            .iter()
            .map(|l| match l {
                LevelEntry::Pressure { pressure_hpa } => Ok(*pressure_hpa),
                LevelEntry::Altitude { .. } => Err(Error::Data(
                    "per_cell_altitude set but levels are altitude entries".into(),
                )),
            })
            .collect::<Result<Vec<f64>>>()?;
        Levels::Pressure {
            pressures_hpa: pressures,
            altitudes: block(2)?,
        }
    } else {
        let alts = header
            .levels
            .iter()
            .map(|l| match l {
                LevelEntry::Altitude { altitude_m } => Ok(*altitude_m),
                LevelEntry::Pressure { .. } => Err(Error::Data(
                    "pressure levels require per_cell_altitude payload".into(),
                )),
            })
            .collect::<Result<Vec<f64>>>()?;
        Levels::Altitude(alts)
    };

    WindGrid::new(
        header.latitudes,
        header.longitudes,
        levels,
        times,
        u,
        v,
        header.kind,
    )
}

fn sibling(header_path: &Path, name: &str) -> PathBuf {
    header_path
        .parent()
        .map(|d| d.join(name))
        .unwrap_or_else(|| PathBuf::from(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::WindVector;

    fn sample_grid() -> WindGrid {
        WindGrid::from_fn(
            vec![34.0, 34.5, 35.0],
            vec![-107.0, -106.5],
            vec![16000.0, 17000.0],
            vec![1_692_748_800, 1_692_792_000],
            GridKind::Synthetic,
            |t, l, j, i| WindVector::new((t + l) as f64, (j as f64) - (i as f64) * 0.5),
        )
        .unwrap()
    }

    #[test]
    fn binary_roundtrip_preserves_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.json");
        let grid = sample_grid();
        write_grid(&grid, &path, PayloadEncoding::Binary).unwrap();
        let loaded = read_grid(&path).unwrap();
        assert_eq!(loaded.u(), grid.u());
        assert_eq!(loaded.v(), grid.v());
        assert_eq!(loaded.times(), grid.times());
        assert_eq!(loaded.kind(), grid.kind());
    }

    #[test]
    fn csv_roundtrip_preserves_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.json");
        let grid = sample_grid();
        write_grid(&grid, &path, PayloadEncoding::Csv).unwrap();
        let loaded = read_grid(&path).unwrap();
        assert_eq!(loaded.u(), grid.u());
        assert_eq!(loaded.v(), grid.v());
    }

    #[test]
    fn truncated_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.json");
        write_grid(&sample_grid(), &path, PayloadEncoding::Binary).unwrap();
        let payload = dir.path().join("grid.bin");
        let bytes = fs::read(&payload).unwrap();
        fs::write(&payload, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(read_grid(&path), Err(Error::Data(_))));
    }

    #[test]
    fn rewrite_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        let grid = sample_grid();
        write_grid(&grid, &a, PayloadEncoding::Binary).unwrap();
        write_grid(&grid, &b, PayloadEncoding::Binary).unwrap();
        let ja = fs::read(&a).unwrap();
        let jb = fs::read(&b).unwrap();
        // Headers differ only in the payload file name.
        assert_eq!(
            String::from_utf8(ja).unwrap().replace("a.bin", "X"),
            String::from_utf8(jb).unwrap().replace("b.bin", "X")
        );
        assert_eq!(fs::read(dir.path().join("a.bin")).unwrap(), fs::read(dir.path().join("b.bin")).unwrap());
    }
}
