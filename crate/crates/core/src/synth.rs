//! Synthetic wind-field generation from radiosonde soundings.
//!
//! The pipeline runs per launch time: bin each station's profile into fixed
//! 250 m altitude bins (taking the sample nearest each bin center), fill empty
//! bins by vertical linear interpolation, spread station values horizontally
//! with a nearest-neighbor (Voronoi) rasterization, smooth every level with a
//! separable Gaussian, and finally densify the 12-hourly launch times down to
//! a 3-hour step by linear interpolation in time.
//!
//! Sounding files are a simple CSV dialect:
//!
//! ```text
//! # station_id = ABQ
//! # latitude = 35.04
//! # longitude = -106.62
//! # launch_time = 2023-08-23T12:00:00Z
//! altitude_m,wind_dir_deg,wind_speed_ms
//! 15998,270,10.3
//! ...
//! ```
//!
//! The column header may instead be `altitude_m,u_ms,v_ms` for files that
//! already carry wind components. Direction follows the meteorological "from"
//! convention: a 270 degree (westerly) wind blows toward the east.

use crate::error::{Error, Result};
use crate::geo::{GeoCoord, WindVector};
use crate::grid::{GridKind, LatLonBounds, Levels, WindGrid};
use ndarray::{Array2, Array4};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One station's vertical profile of wind observations.
#[derive(Debug, Clone)]
pub struct RadiosondeSounding {
    pub station_id: String,
    /// Launch site, surface coordinate.
    pub location: GeoCoord,
    /// UTC epoch seconds.
    pub launch_time: i64,
    /// Sorted strictly ascending in altitude.
    pub samples: Vec<WindSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindSample {
    pub altitude_m: f64,
    pub u_ms: f64,
    pub v_ms: f64,
}

impl WindSample {
    pub fn wind(&self) -> WindVector {
        WindVector::new(self.u_ms, self.v_ms)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub bin_height_m: f64,
    /// `[floor, ceiling]` in meters; `(ceiling - floor) / bin_height` bins.
    pub altitude_window_m: [f64; 2],
    pub grid_resolution_deg: f64,
    pub smoothing_sigma_cells: f64,
    pub temporal_step_hours: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            bin_height_m: 250.0,
            altitude_window_m: [15_000.0, 26_500.0],
            grid_resolution_deg: 0.25,
            smoothing_sigma_cells: 2.0,
            temporal_step_hours: 3.0,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bin_height_m <= 0.0 {
            return Err(Error::Config("bin_height must be positive".into()));
        }
        let [floor, ceiling] = self.altitude_window_m;
        if floor >= ceiling {
            return Err(Error::Config("altitude window floor must be below ceiling".into()));
        }
        let n = (ceiling - floor) / self.bin_height_m;
        if (n - n.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "altitude window span {} is not a multiple of bin height {}",
                ceiling - floor,
                self.bin_height_m
            )));
        }
        if self.grid_resolution_deg <= 0.0 {
            return Err(Error::Config("grid resolution must be positive".into()));
        }
        if self.smoothing_sigma_cells < 0.0 {
            return Err(Error::Config("smoothing sigma must be non-negative".into()));
        }
        if self.temporal_step_hours <= 0.0 {
            return Err(Error::Config("temporal step must be positive".into()));
        }
        Ok(())
    }

    pub fn bin_count(&self) -> usize {
        ((self.altitude_window_m[1] - self.altitude_window_m[0]) / self.bin_height_m).round() as usize
    }

    /// Bin centers: `floor + k * bin_height` for `k = 0..bin_count`.
    pub fn bin_centers(&self) -> Vec<f64> {
        (0..self.bin_count())
            .map(|k| self.altitude_window_m[0] + k as f64 * self.bin_height_m)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinFill {
    /// Value copied from the raw sample nearest the bin center.
    Observed,
    /// Value filled by vertical interpolation or constant extension.
    Interpolated,
}

/// A station profile resampled onto the fixed bin centers.
#[derive(Debug, Clone)]
pub struct BinnedProfile {
    pub station_id: String,
    pub bin_centers_m: Vec<f64>,
    pub u_ms: Vec<f64>,
    pub v_ms: Vec<f64>,
    pub fill_mask: Vec<BinFill>,
}

/// Parse one sounding file. When metadata lines are absent, `station_id` and
/// `launch_time` fall back to the provided defaults (typically taken from the
/// `STATIONID_YYYYMMDDHH.csv` file name).
pub fn parse_sounding(
    text: &str,
    default_station: Option<&str>,
    default_launch_time: Option<i64>,
) -> Result<RadiosondeSounding> {
    let mut station_id: Option<String> = default_station.map(str::to_string);
    let mut latitude: Option<f64> = None;
    let mut longitude: Option<f64> = None;
    let mut launch_time: Option<i64> = default_launch_time;

    #[derive(PartialEq)]
    enum Columns {
        DirSpeed,
        Components,
    }
    let mut columns: Option<Columns> = None;
    let mut samples: Vec<WindSample> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let (key, value) = meta.split_once('=').ok_or(Error::Parse {
                line: line_no,
                detail: format!("metadata line {line:?} is not `# key = value`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "station_id" => station_id = Some(value.to_string()),
                "latitude" => latitude = Some(parse_f64(value, line_no)?),
                "longitude" => longitude = Some(parse_f64(value, line_no)?),
                "launch_time" => {
                    launch_time = Some(
                        chrono::DateTime::parse_from_rfc3339(value)
                            .map(|dt| dt.timestamp())
                            .map_err(|e| Error::Parse {
                                line: line_no,
                                detail: format!("bad launch_time {value:?}: {e}"),
                            })?,
                    )
                }
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        detail: format!("unknown metadata key {other:?}"),
                    })
                }
            }
            continue;
        }
        if columns.is_none() {
            columns = Some(match line {
                "altitude_m,wind_dir_deg,wind_speed_ms" => Columns::DirSpeed,
                "altitude_m,u_ms,v_ms" => Columns::Components,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        detail: format!("unknown column header {other:?}"),
                    })
                }
            });
            continue;
        }

        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                detail: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let altitude_m = parse_f64(fields[0], line_no)?;
        let (u_ms, v_ms) = match columns.as_ref().unwrap() {
            Columns::DirSpeed => {
                let dir = parse_f64(fields[1], line_no)?;
                let speed = parse_f64(fields[2], line_no)?;
                if speed < 0.0 {
                    return Err(Error::Parse {
                        line: line_no,
                        detail: format!("negative wind speed {speed}"),
                    });
                }
                let rad = dir.to_radians();
                (-speed * rad.sin(), -speed * rad.cos())
            }
            Columns::Components => (parse_f64(fields[1], line_no)?, parse_f64(fields[2], line_no)?),
        };
        samples.push(WindSample { altitude_m, u_ms, v_ms });
    }

    if samples.is_empty() {
        return Err(Error::EmptyInput("sounding file holds no data rows".into()));
    }

    // Collapse duplicate altitudes keeping the first occurrence, then sort.
    let mut seen: Vec<f64> = Vec::new();
    samples.retain(|s| {
        if seen.iter().any(|&a| a == s.altitude_m) {
            false
        } else {
            seen.push(s.altitude_m);
            true
        }
    });
    samples.sort_by(|a, b| a.altitude_m.total_cmp(&b.altitude_m));

    let station_id = station_id.ok_or_else(|| Error::Data("sounding is missing a station_id".into()))?;
    let launch_time = launch_time.ok_or_else(|| Error::Data("sounding is missing a launch_time".into()))?;
    let (lat, lon) = match (latitude, longitude) {
        (Some(lat), Some(lon)) => (lat, lon),
        _ => return Err(Error::Data(format!("station {station_id}: missing latitude/longitude metadata"))),
    };

    Ok(RadiosondeSounding {
        station_id,
        location: GeoCoord::new(lat, lon, 0.0),
        launch_time,
        samples,
    })
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|e| Error::Parse {
        line,
        detail: format!("bad number {s:?}: {e}"),
    })
}

/// Derive `(station_id, launch_time)` from a `STATIONID_YYYYMMDDHH.csv` name.
pub fn parse_sounding_filename(name: &str) -> Option<(String, i64)> {
    let stem = name.strip_suffix(".csv")?;
    let (station, stamp) = stem.rsplit_once('_')?;
    if stamp.len() != 10 || !stamp.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let dt = chrono::NaiveDateTime::parse_from_str(&format!("{stamp}0000"), "%Y%m%d%H%M%S").ok()?;
    Some((station.to_string(), dt.and_utc().timestamp()))
}

/// Bin a sounding onto the configured centers.
///
/// Each bin takes the u/v of the sample falling inside it that lies nearest
/// the bin center (ties go to the lower altitude). Bins without any sample
/// are filled by linear interpolation between the nearest observed bins;
/// beyond the outermost observed bins values extend as constants.
pub fn bin_profile(sounding: &RadiosondeSounding, cfg: &SynthesisConfig) -> Result<BinnedProfile> {
    cfg.validate()?;
    let [floor, ceiling] = cfg.altitude_window_m;
    let in_window: Vec<&WindSample> = sounding
        .samples
        .iter()
        .filter(|s| s.altitude_m >= floor && s.altitude_m < ceiling)
        .collect();
    if in_window.len() < 2 {
        return Err(Error::Rejected {
            station: sounding.station_id.clone(),
            detail: format!(
                "only {} samples inside altitude window [{floor}, {ceiling})",
                in_window.len()
            ),
        });
    }

    let centers = cfg.bin_centers();
    let half = cfg.bin_height_m / 2.0;
    let n = centers.len();
    let mut u = vec![f64::NAN; n];
    let mut v = vec![f64::NAN; n];
    let mut mask = vec![BinFill::Interpolated; n];

    for (k, &center) in centers.iter().enumerate() {
        let mut best: Option<&WindSample> = None;
        for s in &in_window {
            // Half-open membership keeps every sample in exactly one bin.
            if s.altitude_m < center - half || s.altitude_m >= center + half {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let d_new = (s.altitude_m - center).abs();
                    let d_old = (b.altitude_m - center).abs();
                    d_new < d_old || (d_new == d_old && s.altitude_m < b.altitude_m)
                }
            };
            if better {
                best = Some(s);
            }
        }
        if let Some(s) = best {
            u[k] = s.u_ms;
            v[k] = s.v_ms;
            mask[k] = BinFill::Observed;
        }
    }

    let observed: Vec<usize> = (0..n).filter(|&k| mask[k] == BinFill::Observed).collect();
    if observed.is_empty() {
        return Err(Error::Rejected {
            station: sounding.station_id.clone(),
            detail: "no bin captured a sample".into(),
        });
    }
    for k in 0..n {
        if mask[k] == BinFill::Observed {
            continue;
        }
        let next = observed.iter().copied().find(|&o| o > k);
        let prev = observed.iter().copied().rev().find(|&o| o < k);
        let (uk, vk) = match (prev, next) {
            (Some(p), Some(q)) => {
                let w = (centers[k] - centers[p]) / (centers[q] - centers[p]);
                (u[p] + (u[q] - u[p]) * w, v[p] + (v[q] - v[p]) * w)
            }
            (Some(p), None) => (u[p], v[p]),
            (None, Some(q)) => (u[q], v[q]),
            (None, None) => unreachable!("observed is non-empty"),
        };
        u[k] = uk;
        v[k] = vk;
    }

    Ok(BinnedProfile {
        station_id: sounding.station_id.clone(),
        bin_centers_m: centers,
        u_ms: u,
        v_ms: v,
        fill_mask: mask,
    })
}

/// Spread station bin values across a horizontal plane: every cell takes the
/// value of the nearest station in degree space (ties to the lower station
/// index). Output is piecewise constant (a Voronoi partition).
pub fn rasterize_level(
    stations: &[(GeoCoord, &BinnedProfile)],
    level: usize,
    latitudes: &[f64],
    longitudes: &[f64],
) -> Result<(Array2<f64>, Array2<f64>)> {
    if stations.is_empty() {
        return Err(Error::EmptyInput("rasterize_level needs at least one station".into()));
    }
    let mut u = Array2::<f64>::zeros((latitudes.len(), longitudes.len()));
    let mut v = Array2::<f64>::zeros((latitudes.len(), longitudes.len()));
    for (j, &lat) in latitudes.iter().enumerate() {
        for (i, &lon) in longitudes.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (s, (loc, _)) in stations.iter().enumerate() {
                let dlat = loc.latitude_deg - lat;
                let dlon = loc.longitude_deg - lon;
                let d = dlat * dlat + dlon * dlon;
                if d < best_d {
                    best_d = d;
                    best = s;
                }
            }
            u[[j, i]] = stations[best].1.u_ms[level];
            v[[j, i]] = stations[best].1.v_ms[level];
        }
    }
    Ok((u, v))
}

/// Separable Gaussian smoothing with kernel radius `ceil(3 sigma)` and
/// reflect padding. `sigma == 0` returns the input unchanged; reflect padding
/// makes constant planes fixed points.
pub fn smooth_level(plane: &Array2<f64>, sigma: f64) -> Array2<f64> {
    if sigma == 0.0 {
        return plane.clone();
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for k in -radius..=radius {
        kernel.push((-((k * k) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let total: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= total;
    }

    let (rows, cols) = plane.dim();
    let reflect = |idx: i64, n: i64| -> usize {
        // Edge-inclusive mirror, folded until inside (robust for tiny planes).
        let mut x = idx;
        loop {
            if x < 0 {
                x = -x - 1;
            } else if x >= n {
                x = 2 * n - x - 1;
            } else {
                return x as usize;
            }
        }
    };

    let mut pass1 = Array2::<f64>::zeros((rows, cols));
    for j in 0..rows {
        for i in 0..cols {
            let mut acc = 0.0;
            for (off, w) in kernel.iter().enumerate() {
                let src = reflect(i as i64 + off as i64 - radius, cols as i64);
                acc += w * plane[[j, src]];
            }
            pass1[[j, i]] = acc;
        }
    }
    let mut out = Array2::<f64>::zeros((rows, cols));
    for j in 0..rows {
        for i in 0..cols {
            let mut acc = 0.0;
            for (off, w) in kernel.iter().enumerate() {
                let src = reflect(j as i64 + off as i64 - radius, rows as i64);
                acc += w * pass1[[src, i]];
            }
            out[[j, i]] = acc;
        }
    }
    out
}

/// Non-fatal events recorded while synthesizing a forecast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SynthWarning {
    StationRejected { launch_time: i64, station: String, detail: String },
    LaunchTimeDropped { launch_time: i64 },
}

/// Run the full pipeline over a set of soundings, producing one grid with one
/// time frame per launch time that yielded at least one usable profile.
pub fn synthesize_forecast(
    soundings: &[RadiosondeSounding],
    cfg: &SynthesisConfig,
    area: &LatLonBounds,
) -> Result<(WindGrid, Vec<SynthWarning>)> {
    cfg.validate()?;
    if soundings.is_empty() {
        return Err(Error::EmptyInput("no soundings supplied".into()));
    }

    let mut by_time: BTreeMap<i64, Vec<&RadiosondeSounding>> = BTreeMap::new();
    for s in soundings {
        by_time.entry(s.launch_time).or_default().push(s);
    }

    let latitudes = axis_points(area.min_lat, area.max_lat, cfg.grid_resolution_deg);
    let longitudes = axis_points(area.min_lon, area.max_lon, cfg.grid_resolution_deg);
    let centers = cfg.bin_centers();
    let n_levels = centers.len();

    let mut warnings = Vec::new();
    let mut frames: Vec<(i64, Vec<(Array2<f64>, Array2<f64>)>)> = Vec::new();

    for (&launch_time, group) in &by_time {
        // Deterministic station order: the tie-break index is the rank of the
        // station id, independent of input order.
        let mut group: Vec<&RadiosondeSounding> = group.clone();
        group.sort_by(|a, b| a.station_id.cmp(&b.station_id));

        let mut profiles: Vec<(GeoCoord, BinnedProfile)> = Vec::new();
        for s in &group {
            match bin_profile(s, cfg) {
                Ok(p) => profiles.push((s.location, p)),
                Err(Error::Rejected { station, detail }) => warnings.push(SynthWarning::StationRejected {
                    launch_time,
                    station,
                    detail,
                }),
                Err(other) => return Err(other),
            }
        }
        if profiles.is_empty() {
            warnings.push(SynthWarning::LaunchTimeDropped { launch_time });
            continue;
        }

        let station_refs: Vec<(GeoCoord, &BinnedProfile)> =
            profiles.iter().map(|(loc, p)| (*loc, p)).collect();
        let mut planes = Vec::with_capacity(n_levels);
        for level in 0..n_levels {
            let (u, v) = rasterize_level(&station_refs, level, &latitudes, &longitudes)?;
            planes.push((
                smooth_level(&u, cfg.smoothing_sigma_cells),
                smooth_level(&v, cfg.smoothing_sigma_cells),
            ));
        }
        frames.push((launch_time, planes));
    }

    if frames.is_empty() {
        return Err(Error::EmptyInput("every launch time was dropped".into()));
    }

    let times: Vec<i64> = frames.iter().map(|(t, _)| *t).collect();
    let shape = (times.len(), n_levels, latitudes.len(), longitudes.len());
    let mut u = Array4::<f64>::zeros(shape);
    let mut v = Array4::<f64>::zeros(shape);
    for (t, (_, planes)) in frames.iter().enumerate() {
        for (l, (up, vp)) in planes.iter().enumerate() {
            for j in 0..latitudes.len() {
                for i in 0..longitudes.len() {
                    u[[t, l, j, i]] = up[[j, i]];
                    v[[t, l, j, i]] = vp[[j, i]];
                }
            }
        }
    }

    let grid = WindGrid::new(
        latitudes,
        longitudes,
        Levels::Altitude(centers),
        times,
        u,
        v,
        GridKind::Synthetic,
    )?;
    Ok((grid, warnings))
}

/// Insert linearly interpolated time frames so consecutive frames sit
/// `step_hours` apart. Native frames are copied bit for bit.
pub fn densify_time(grid: &WindGrid, step_hours: f64) -> Result<WindGrid> {
    if grid.times().len() < 2 {
        return Err(Error::Config("densify_time needs at least 2 time frames".into()));
    }
    if step_hours <= 0.0 {
        return Err(Error::Config("temporal step must be positive".into()));
    }
    let step_s = (step_hours * 3600.0).round() as i64;
    let times = grid.times();
    let mut new_times: Vec<i64> = Vec::new();
    // (native frame, native frame, weight) per output frame
    let mut plan: Vec<(usize, usize, f64)> = Vec::new();
    for w in 0..times.len() - 1 {
        let gap = times[w + 1] - times[w];
        if gap % step_s != 0 {
            return Err(Error::Config(format!(
                "step {step_hours} h does not divide the native gap of {gap} s"
            )));
        }
        let pieces = (gap / step_s) as usize;
        for p in 0..pieces {
            new_times.push(times[w] + p as i64 * step_s);
            plan.push((w, w + 1, p as f64 / pieces as f64));
        }
    }
    new_times.push(*times.last().unwrap());
    plan.push((times.len() - 1, times.len() - 1, 0.0));

    let levels = match grid.levels() {
        Levels::Altitude(a) => Levels::Altitude(a.clone()),
        Levels::Pressure { pressures_hpa, altitudes } => Levels::Pressure {
            pressures_hpa: pressures_hpa.clone(),
            altitudes: expand_time(altitudes, &plan),
        },
    };
    WindGrid::new(
        grid.latitudes().to_vec(),
        grid.longitudes().to_vec(),
        levels,
        new_times,
        expand_time(grid.u(), &plan),
        expand_time(grid.v(), &plan),
        grid.kind(),
    )
}

fn expand_time(a: &Array4<f64>, plan: &[(usize, usize, f64)]) -> Array4<f64> {
    let (_, l, j, i) = a.dim();
    let mut out = Array4::<f64>::zeros((plan.len(), l, j, i));
    for (t, &(t0, t1, w)) in plan.iter().enumerate() {
        let f0 = a.index_axis(ndarray::Axis(0), t0);
        if w == 0.0 {
            out.index_axis_mut(ndarray::Axis(0), t).assign(&f0);
        } else {
            let f1 = a.index_axis(ndarray::Axis(0), t1);
            let mixed = f0.mapv(|x| x * (1.0 - w)) + f1.mapv(|x| x * w);
            out.index_axis_mut(ndarray::Axis(0), t).assign(&mixed);
        }
    }
    out
}

fn axis_points(min: f64, max: f64, resolution: f64) -> Vec<f64> {
    let n = ((max - min) / resolution).floor() as usize + 1;
    (0..n).map(|k| min + k as f64 * resolution).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SynthesisConfig {
        SynthesisConfig::default()
    }

    fn sounding_from_rows(rows: &str) -> RadiosondeSounding {
        let text = format!(
            "# station_id = TST\n# latitude = 35.0\n# longitude = -106.0\n# launch_time = 2023-08-23T12:00:00Z\naltitude_m,wind_dir_deg,wind_speed_ms\n{rows}"
        );
        parse_sounding(&text, None, None).unwrap()
    }

    #[test]
    fn direction_speed_rows_follow_from_convention() {
        let s = sounding_from_rows("16000,270,10\n17000,0,5\n");
        assert!((s.samples[0].u_ms - 10.0).abs() < 1e-9, "westerly blows east");
        assert!(s.samples[0].v_ms.abs() < 1e-9);
        assert!(s.samples[1].u_ms.abs() < 1e-9);
        assert!((s.samples[1].v_ms + 5.0).abs() < 1e-9, "northerly blows south");
    }

    #[test]
    fn duplicate_altitudes_keep_first() {
        let s = sounding_from_rows("16000,270,10\n16000,90,99\n17000,0,5\n");
        assert_eq!(s.samples.len(), 2);
        assert!((s.samples[0].u_ms - 10.0).abs() < 1e-9);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let text = "# station_id = X\n# latitude = 1\n# longitude = 2\n# launch_time = 2023-08-23T00:00:00Z\naltitude_m,wind_dir_deg,wind_speed_ms\n16000,270,10\nnot,a,row\n";
        match parse_sounding(text, None, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_input() {
        let text = "# station_id = X\n# latitude = 1\n# longitude = 2\n# launch_time = 2023-08-23T00:00:00Z\naltitude_m,u_ms,v_ms\n";
        assert!(matches!(parse_sounding(text, None, None), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn filename_parsing() {
        let (id, t) = parse_sounding_filename("ABQ_2023082312.csv").unwrap();
        assert_eq!(id, "ABQ");
        assert_eq!(t, 1_692_792_000);
        assert!(parse_sounding_filename("notasounding.txt").is_none());
    }

    #[test]
    fn binning_takes_nearest_sample_to_center() {
        // The worked example: readings at 15998 and 16103 m both fall in the
        // 16000 m bin; the closer one (15998) wins.
        let s = sounding_from_rows("15998,270,10\n16103,90,4\n20000,180,3\n");
        let profile = bin_profile(&s, &cfg()).unwrap();
        let k = profile
            .bin_centers_m
            .iter()
            .position(|&c| c == 16000.0)
            .unwrap();
        assert_eq!(profile.fill_mask[k], BinFill::Observed);
        assert!((profile.u_ms[k] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn empty_bins_fill_linearly_between_observed() {
        let s = sounding_from_rows("16000,270,0\n16500,270,10\n");
        // u at 16000 is 0 (dir 270, speed 0), at 16500 is +10; bin 16250 is
        // empty and must take the midpoint.
        let profile = bin_profile(&s, &cfg()).unwrap();
        let k = profile.bin_centers_m.iter().position(|&c| c == 16250.0).unwrap();
        assert_eq!(profile.fill_mask[k], BinFill::Interpolated);
        assert!((profile.u_ms[k] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn edges_extend_constantly() {
        let s = sounding_from_rows("18000,270,10\n18250,270,12\n");
        let profile = bin_profile(&s, &cfg()).unwrap();
        assert!((profile.u_ms[0] - 10.0).abs() < 1e-9);
        assert!((profile.u_ms.last().unwrap() - 12.0).abs() < 1e-9);
    }

    #[test]
    fn fill_mask_matches_brute_force_membership() {
        let s = sounding_from_rows("15100,270,10\n15210,270,11\n17800,90,4\n17930,90,5\n21000,0,2.5\n");
        let profile = bin_profile(&s, &cfg()).unwrap();
        let c = cfg();
        let half = c.bin_height_m / 2.0;
        for (k, &center) in profile.bin_centers_m.iter().enumerate() {
            let any_inside = s
                .samples
                .iter()
                .any(|smp| smp.altitude_m >= center - half && smp.altitude_m < center + half);
            let expected = if any_inside { BinFill::Observed } else { BinFill::Interpolated };
            assert_eq!(profile.fill_mask[k], expected, "bin {k} at {center}");
        }
    }

    #[test]
    fn too_few_samples_rejected_with_station_name() {
        let s = sounding_from_rows("16000,270,10\n");
        match bin_profile(&s, &cfg()) {
            Err(Error::Rejected { station, .. }) => assert_eq!(station, "TST"),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn profile_with_constant(station: &str, u: f64, v: f64, c: &SynthesisConfig) -> BinnedProfile {
        let n = c.bin_count();
        BinnedProfile {
            station_id: station.to_string(),
            bin_centers_m: c.bin_centers(),
            u_ms: vec![u; n],
            v_ms: vec![v; n],
            fill_mask: vec![BinFill::Observed; n],
        }
    }

    #[test]
    fn single_station_rasterizes_constant_plane() {
        let c = cfg();
        let p = profile_with_constant("A", 3.0, -1.0, &c);
        let loc = GeoCoord::new(35.0, -106.0, 0.0);
        let (u, v) = rasterize_level(&[(loc, &p)], 0, &[34.0, 35.0, 36.0], &[-107.0, -106.0]).unwrap();
        assert!(u.iter().all(|&x| x == 3.0));
        assert!(v.iter().all(|&x| x == -1.0));
    }

    #[test]
    fn nearest_station_wins_near_midpoint() {
        let c = cfg();
        let pa = profile_with_constant("A", 1.0, 0.0, &c);
        let pb = profile_with_constant("B", 2.0, 0.0, &c);
        let a = GeoCoord::new(35.0, -107.0, 0.0);
        let b = GeoCoord::new(35.0, -105.0, 0.0);
        // Query column just left of the midpoint longitude.
        let (u, _) = rasterize_level(&[(a, &pa), (b, &pb)], 0, &[35.0], &[-106.001]).unwrap();
        assert_eq!(u[[0, 0]], 1.0);
    }

    #[test]
    fn rasterization_matches_exhaustive_nearest_scan() {
        use rand::Rng;
        let c = cfg();
        let mut rng = crate::rng::SeededRng::new(99, 0);
        let stations = [
            (GeoCoord::new(34.2, -106.8, 0.0), profile_with_constant("A", 1.0, 10.0, &c)),
            (GeoCoord::new(35.6, -105.9, 0.0), profile_with_constant("B", 2.0, 20.0, &c)),
            (GeoCoord::new(33.9, -104.7, 0.0), profile_with_constant("C", 3.0, 30.0, &c)),
        ];
        let refs: Vec<(GeoCoord, &BinnedProfile)> = stations.iter().map(|(l, p)| (*l, p)).collect();
        for _ in 0..100 {
            let lat = rng.random_range(33.0..36.0);
            let lon = rng.random_range(-108.0..-104.0);
            let (u, _) = rasterize_level(&refs, 0, &[lat], &[lon]).unwrap();
            // Independent scan over stations.
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (s, (loc, _)) in stations.iter().enumerate() {
                let d = (loc.latitude_deg - lat).powi(2) + (loc.longitude_deg - lon).powi(2);
                if d < best_d {
                    best_d = d;
                    best = s;
                }
            }
            assert_eq!(u[[0, 0]], stations[best].1.u_ms[0]);
        }
    }

    #[test]
    fn zero_sigma_smoothing_is_identity() {
        let plane = Array2::from_shape_fn((5, 7), |(j, i)| (j * 10 + i) as f64);
        let out = smooth_level(&plane, 0.0);
        assert_eq!(out, plane);
    }

    #[test]
    fn constant_plane_is_smoothing_fixed_point() {
        let plane = Array2::from_elem((9, 9), 4.25);
        let out = smooth_level(&plane, 2.0);
        for &x in out.iter() {
            assert!((x - 4.25).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_response_matches_direct_convolution() {
        let sigma = 2.0;
        let n = 41;
        let mut plane = Array2::<f64>::zeros((n, n));
        plane[[n / 2, n / 2]] = 1.0;
        let out = smooth_level(&plane, sigma);

        // Independent oracle: truncated kernel weight product at the center.
        let radius = (3.0 * sigma).ceil() as i64;
        let weights: Vec<f64> = (-radius..=radius)
            .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let center_1d = weights[radius as usize] / total;
        let expected = center_1d * center_1d;
        assert!((out[[n / 2, n / 2]] - expected).abs() < 1e-12);
        // And the truncated-kernel center stays close to the continuous
        // normalization 1/(2 pi sigma^2).
        let continuous = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
        assert!((expected - continuous).abs() / continuous < 5e-3);
    }

    #[test]
    fn smoothing_cannot_overshoot_plane_range() {
        use rand::Rng;
        let mut rng = crate::rng::SeededRng::new(4, 0);
        let plane = Array2::from_shape_fn((12, 12), |_| rng.random_range(-10.0..10.0));
        let out = smooth_level(&plane, 1.5);
        let min = plane.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = plane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for &x in out.iter() {
            assert!(x >= min - 1e-12 && x <= max + 1e-12);
        }
    }

    fn constant_sounding(station: &str, lat: f64, lon: f64, t: i64, u: f64, v: f64) -> RadiosondeSounding {
        let samples = (0..24)
            .map(|k| WindSample {
                altitude_m: 15_050.0 + k as f64 * 500.0,
                u_ms: u,
                v_ms: v,
            })
            .collect();
        RadiosondeSounding {
            station_id: station.to_string(),
            location: GeoCoord::new(lat, lon, 0.0),
            launch_time: t,
            samples,
        }
    }

    fn test_area() -> LatLonBounds {
        LatLonBounds {
            min_lat: 34.0,
            max_lat: 36.0,
            min_lon: -107.0,
            max_lon: -105.0,
        }
    }

    #[test]
    fn constant_wind_synthesizes_uniform_grid() {
        let soundings = vec![constant_sounding("A", 35.0, -106.0, 0, 3.0, 4.0)];
        let (grid, warnings) = synthesize_forecast(&soundings, &cfg(), &test_area()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(grid.level_count(), 46);
        for &x in grid.u().iter() {
            assert!((x - 3.0).abs() < 1e-5);
        }
        for &x in grid.v().iter() {
            assert!((x - 4.0).abs() < 1e-5);
        }
    }

    #[test]
    fn default_window_yields_46_levels() {
        assert_eq!(cfg().bin_count(), 46);
    }

    #[test]
    fn voronoi_identity_at_station_with_smoothing_off() {
        let mut c = cfg();
        c.smoothing_sigma_cells = 0.0;
        let soundings = vec![
            constant_sounding("A", 35.0, -106.0, 0, 1.0, 0.0),
            constant_sounding("B", 34.25, -105.25, 0, 7.0, 0.0),
        ];
        let (grid, _) = synthesize_forecast(&soundings, &c, &test_area()).unwrap();
        let w = grid
            .sample(&GeoCoord::new(35.0, -106.0, 16_000.0), 0)
            .unwrap();
        assert!((w.u_ms - 1.0).abs() < 1e-6);
        let w = grid
            .sample(&GeoCoord::new(34.25, -105.25, 16_000.0), 0)
            .unwrap();
        assert!((w.u_ms - 7.0).abs() < 1e-6);
    }

    #[test]
    fn station_order_does_not_change_output() {
        let a = constant_sounding("A", 35.0, -106.3, 0, 1.0, 2.0);
        let b = constant_sounding("B", 34.4, -105.4, 0, -3.0, 5.0);
        let (g1, _) = synthesize_forecast(&[a.clone(), b.clone()], &cfg(), &test_area()).unwrap();
        let (g2, _) = synthesize_forecast(&[b, a], &cfg(), &test_area()).unwrap();
        assert_eq!(g1.u(), g2.u());
        assert_eq!(g1.v(), g2.v());
    }

    #[test]
    fn synthesized_values_bounded_by_raw_samples_per_level() {
        let mut soundings = Vec::new();
        for (id, lat, lon, u) in [
            ("A", 34.3, -106.5, -8.0),
            ("B", 35.2, -106.0, 2.0),
            ("C", 34.8, -105.3, 11.0),
        ] {
            soundings.push(constant_sounding(id, lat, lon, 0, u, 0.0));
        }
        let (grid, _) = synthesize_forecast(&soundings, &cfg(), &test_area()).unwrap();
        for &x in grid.u().iter() {
            assert!(x >= -8.0 - 1e-4 && x <= 11.0 + 1e-4);
        }
    }

    #[test]
    fn densify_12h_to_3h_inserts_three_frames_per_gap() {
        let soundings = vec![
            constant_sounding("A", 35.0, -106.0, 0, 1.0, 0.0),
            constant_sounding("A", 35.0, -106.0, 43_200, 5.0, 0.0),
        ];
        let (grid, _) = synthesize_forecast(&soundings, &cfg(), &test_area()).unwrap();
        let dense = densify_time(&grid, 3.0).unwrap();
        assert_eq!(dense.times().len(), 5);
        assert_eq!(dense.times(), &[0, 10_800, 21_600, 32_400, 43_200]);

        // Native frames are byte-equal.
        assert_eq!(
            dense.u().index_axis(ndarray::Axis(0), 0),
            grid.u().index_axis(ndarray::Axis(0), 0)
        );
        assert_eq!(
            dense.u().index_axis(ndarray::Axis(0), 4),
            grid.u().index_axis(ndarray::Axis(0), 1)
        );

        // Midpoint frame is the arithmetic mean.
        for &x in dense.u().index_axis(ndarray::Axis(0), 2).iter() {
            assert!((x - 3.0).abs() < 1e-5);
        }
    }

    #[test]
    fn densify_rejects_non_dividing_step() {
        let soundings = vec![
            constant_sounding("A", 35.0, -106.0, 0, 1.0, 0.0),
            constant_sounding("A", 35.0, -106.0, 43_200, 5.0, 0.0),
        ];
        let (grid, _) = synthesize_forecast(&soundings, &cfg(), &test_area()).unwrap();
        assert!(matches!(densify_time(&grid, 5.0), Err(Error::Config(_))));
    }
}
