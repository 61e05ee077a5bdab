//! Gridded 4D wind fields and their sampling.
//!
//! A [`WindGrid`] stores dense `u`/`v` component arrays indexed
//! `[time][level][lat][lon]`. The vertical axis is either a set of fixed
//! altitudes (synthetic fields) or pressure levels with a per-cell altitude
//! array (forecast-like fields, where the height of a pressure surface varies
//! across the grid). Vertical interpolation always works in meters: for
//! pressure-based grids the level altitudes are first interpolated to the
//! query point, then the wind column is interpolated in altitude.
//!
//! Grids are immutable after construction and safe to share across episode
//! workers; sampling is pure.

use crate::error::{Error, Result};
use crate::geo::{GeoCoord, WindVector};
use ndarray::Array4;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    ForecastLike,
    Synthetic,
}

/// Vertical axis of a grid.
#[derive(Debug, Clone)]
pub enum Levels {
    /// Fixed altitudes in meters, strictly ascending.
    Altitude(Vec<f64>),
    /// Pressure levels (hPa) with a per-cell altitude array
    /// `[time][level][lat][lon]` in meters. Ordered by ascending altitude.
    Pressure {
        pressures_hpa: Vec<f64>,
        altitudes: Array4<f64>,
    },
}

impl Levels {
    pub fn count(&self) -> usize {
        match self {
            Levels::Altitude(a) => a.len(),
            Levels::Pressure { pressures_hpa, .. } => pressures_hpa.len(),
        }
    }

    pub fn per_cell_altitude(&self) -> bool {
        matches!(self, Levels::Pressure { .. })
    }
}

/// Maximum deviation of per-cell altitudes from the level mean, meters.
pub const DEFAULT_LEVEL_ALTITUDE_SPREAD_M: f64 = 500.0;

/// Dense 4D wind field.
#[derive(Debug, Clone)]
pub struct WindGrid {
    latitudes: Vec<f64>,
    longitudes: Vec<f64>,
    levels: Levels,
    /// UTC timestamps, epoch seconds, strictly ascending.
    times: Vec<i64>,
    u: Array4<f64>,
    v: Array4<f64>,
    kind: GridKind,
    level_mean_altitudes: Vec<f64>,
}

/// Horizontal bounding box in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLonBounds {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl LatLonBounds {
    pub fn contains(&self, c: &GeoCoord) -> bool {
        c.latitude_deg >= self.min_lat
            && c.latitude_deg <= self.max_lat
            && c.longitude_deg >= self.min_lon
            && c.longitude_deg <= self.max_lon
    }

    pub fn intersect(&self, other: &LatLonBounds) -> Option<LatLonBounds> {
        let b = LatLonBounds {
            min_lat: self.min_lat.max(other.min_lat),
            max_lat: self.max_lat.min(other.max_lat),
            min_lon: self.min_lon.max(other.min_lon),
            max_lon: self.max_lon.min(other.max_lon),
        };
        (b.min_lat <= b.max_lat && b.min_lon <= b.max_lon).then_some(b)
    }
}

impl WindGrid {
    pub fn new(
        latitudes: Vec<f64>,
        longitudes: Vec<f64>,
        levels: Levels,
        times: Vec<i64>,
        u: Array4<f64>,
        v: Array4<f64>,
        kind: GridKind,
    ) -> Result<Self> {
        Self::with_spread_bound(
            latitudes,
            longitudes,
            levels,
            times,
            u,
            v,
            kind,
            DEFAULT_LEVEL_ALTITUDE_SPREAD_M,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_spread_bound(
        latitudes: Vec<f64>,
        longitudes: Vec<f64>,
        levels: Levels,
        times: Vec<i64>,
        u: Array4<f64>,
        v: Array4<f64>,
        kind: GridKind,
        altitude_spread_bound_m: f64,
    ) -> Result<Self> {
        require_ascending("latitudes", &latitudes)?;
        require_ascending("longitudes", &longitudes)?;
        let times_f: Vec<f64> = times.iter().map(|&t| t as f64).collect();
        require_ascending("times", &times_f)?;

        let shape = [times.len(), levels.count(), latitudes.len(), longitudes.len()];
        for (name, arr) in [("u", &u), ("v", &v)] {
            if arr.shape() != shape {
                return Err(Error::Data(format!(
                    "{name} array shape {:?} does not match axes {:?}",
                    arr.shape(),
                    shape
                )));
            }
            if arr.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data(format!("{name} array contains non-finite values")));
            }
        }

        let level_mean_altitudes = match &levels {
            Levels::Altitude(alts) => {
                require_ascending("levels", alts)?;
                alts.clone()
            }
            Levels::Pressure {
                pressures_hpa,
                altitudes,
            } => {
                if altitudes.shape() != shape {
                    return Err(Error::Data(format!(
                        "altitude array shape {:?} does not match axes {:?}",
                        altitudes.shape(),
                        shape
                    )));
                }
                if pressures_hpa.is_empty() {
                    return Err(Error::Data("no pressure levels".into()));
                }
                let mut means = Vec::with_capacity(pressures_hpa.len());
                for l in 0..pressures_hpa.len() {
                    let lvl = altitudes.index_axis(ndarray::Axis(1), l);
                    let mut min = f64::INFINITY;
                    let mut max = f64::NEG_INFINITY;
                    let mut sum = 0.0;
                    let mut n = 0usize;
                    for &a in lvl.iter() {
                        if !a.is_finite() {
                            return Err(Error::Data("altitude array contains non-finite values".into()));
                        }
                        min = min.min(a);
                        max = max.max(a);
                        sum += a;
                        n += 1;
                    }
                    if (max - min) / 2.0 > altitude_spread_bound_m {
                        return Err(Error::Data(format!(
                            "level {l}: per-cell altitude spread {:.1} m exceeds ±{altitude_spread_bound_m} m",
                            (max - min) / 2.0
                        )));
                    }
                    means.push(sum / n as f64);
                }
                require_ascending("level altitudes", &means)?;
                means
            }
        };

        if times.is_empty() || latitudes.is_empty() || longitudes.is_empty() {
            return Err(Error::Data("grid axes must be non-empty".into()));
        }

        Ok(Self {
            latitudes,
            longitudes,
            levels,
            times,
            u,
            v,
            kind,
            level_mean_altitudes,
        })
    }

    /// Grid with a single constant wind everywhere. Test and fixture helper.
    pub fn uniform(
        latitudes: Vec<f64>,
        longitudes: Vec<f64>,
        level_altitudes: Vec<f64>,
        times: Vec<i64>,
        wind: WindVector,
        kind: GridKind,
    ) -> Result<Self> {
        let shape = (times.len(), level_altitudes.len(), latitudes.len(), longitudes.len());
        let u = Array4::from_elem(shape, wind.u_ms);
        let v = Array4::from_elem(shape, wind.v_ms);
        Self::new(latitudes, longitudes, Levels::Altitude(level_altitudes), times, u, v, kind)
    }

    /// Grid filled from a closure of `(time_idx, level_idx, lat_idx, lon_idx)`.
    pub fn from_fn(
        latitudes: Vec<f64>,
        longitudes: Vec<f64>,
        level_altitudes: Vec<f64>,
        times: Vec<i64>,
        kind: GridKind,
        mut f: impl FnMut(usize, usize, usize, usize) -> WindVector,
    ) -> Result<Self> {
        let shape = (times.len(), level_altitudes.len(), latitudes.len(), longitudes.len());
        let mut u = Array4::<f64>::zeros(shape);
        let mut v = Array4::<f64>::zeros(shape);
        for t in 0..shape.0 {
            for l in 0..shape.1 {
                for j in 0..shape.2 {
                    for i in 0..shape.3 {
                        let w = f(t, l, j, i);
                        u[[t, l, j, i]] = w.u_ms;
                        v[[t, l, j, i]] = w.v_ms;
                    }
                }
            }
        }
        Self::new(latitudes, longitudes, Levels::Altitude(level_altitudes), times, u, v, kind)
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn latitudes(&self) -> &[f64] {
        &self.latitudes
    }

    pub fn longitudes(&self) -> &[f64] {
        &self.longitudes
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn levels(&self) -> &Levels {
        &self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.count()
    }

    /// Mean altitude of a level in meters (exact for altitude-based grids).
    pub fn level_mean_altitude(&self, level: usize) -> f64 {
        self.level_mean_altitudes[level]
    }

    pub fn u(&self) -> &Array4<f64> {
        &self.u
    }

    pub fn v(&self) -> &Array4<f64> {
        &self.v
    }

    pub fn bounds(&self) -> LatLonBounds {
        LatLonBounds {
            min_lat: self.latitudes[0],
            max_lat: *self.latitudes.last().unwrap(),
            min_lon: self.longitudes[0],
            max_lon: *self.longitudes.last().unwrap(),
        }
    }

    /// Bounding box shrunk by one grid cell on each side (where possible).
    pub fn interior_bounds(&self) -> LatLonBounds {
        let b = self.bounds();
        let (lat0, lat1) = inset(&self.latitudes);
        let (lon0, lon1) = inset(&self.longitudes);
        LatLonBounds {
            min_lat: lat0.unwrap_or(b.min_lat),
            max_lat: lat1.unwrap_or(b.max_lat),
            min_lon: lon0.unwrap_or(b.min_lon),
            max_lon: lon1.unwrap_or(b.max_lon),
        }
    }

    pub fn time_span(&self) -> (i64, i64) {
        (self.times[0], *self.times.last().unwrap())
    }

    /// 4-linear wind sample with out-of-range queries clamped to the nearest
    /// grid boundary.
    pub fn sample(&self, at: &GeoCoord, when: i64) -> Result<WindVector> {
        self.sample_with(at, when, true)
    }

    /// As [`WindGrid::sample`], but with clamping configurable. With clamping
    /// disabled an out-of-range query reports the offending axis.
    pub fn sample_with(&self, at: &GeoCoord, when: i64, clamp: bool) -> Result<WindVector> {
        let t = axis_lookup("time", &self.times_f64(), when as f64, clamp)?;
        let j = axis_lookup("latitude", &self.latitudes, at.latitude_deg, clamp)?;
        let i = axis_lookup("longitude", &self.longitudes, at.longitude_deg, clamp)?;

        // Altitude column at the horizontal/temporal query point.
        let n_levels = self.level_count();
        let alt_at = |l: usize| -> f64 {
            match &self.levels {
                Levels::Altitude(alts) => alts[l],
                Levels::Pressure { altitudes, .. } => trilinear(altitudes, l, &t, &j, &i),
            }
        };

        let query_alt = at.altitude_m;
        // Locate the bracketing levels in the (ascending) altitude column.
        let mut hi = n_levels;
        for l in 0..n_levels {
            if alt_at(l) >= query_alt {
                hi = l;
                break;
            }
        }
        let (l0, l1, wl) = if hi == 0 {
            if !clamp && query_alt < alt_at(0) {
                return Err(Error::Bounds {
                    axis: "altitude",
                    detail: format!("{query_alt} m below lowest level"),
                });
            }
            (0, 0, 0.0)
        } else if hi == n_levels {
            if !clamp {
                return Err(Error::Bounds {
                    axis: "altitude",
                    detail: format!("{query_alt} m above highest level"),
                });
            }
            (n_levels - 1, n_levels - 1, 0.0)
        } else {
            let a0 = alt_at(hi - 1);
            let a1 = alt_at(hi);
            let w = if a1 > a0 { (query_alt - a0) / (a1 - a0) } else { 0.0 };
            (hi - 1, hi, w)
        };

        let u0 = trilinear(&self.u, l0, &t, &j, &i);
        let v0 = trilinear(&self.v, l0, &t, &j, &i);
        let (u, v) = if l1 == l0 {
            (u0, v0)
        } else {
            let u1 = trilinear(&self.u, l1, &t, &j, &i);
            let v1 = trilinear(&self.v, l1, &t, &j, &i);
            (u0 + (u1 - u0) * wl, v0 + (v1 - v0) * wl)
        };
        Ok(WindVector::new(u, v))
    }

    /// Wind and local level altitude at one vertical level, interpolated
    /// horizontally and in time (clamped). Used for observation columns and
    /// forecast scoring, which work level-by-level.
    pub fn sample_level(&self, level: usize, at: &GeoCoord, when: i64) -> Result<(WindVector, f64)> {
        if level >= self.level_count() {
            return Err(Error::Bounds {
                axis: "level",
                detail: format!("index {level} out of {}", self.level_count()),
            });
        }
        let t = axis_lookup("time", &self.times_f64(), when as f64, true)?;
        let j = axis_lookup("latitude", &self.latitudes, at.latitude_deg, true)?;
        let i = axis_lookup("longitude", &self.longitudes, at.longitude_deg, true)?;
        let u = trilinear(&self.u, level, &t, &j, &i);
        let v = trilinear(&self.v, level, &t, &j, &i);
        let alt = match &self.levels {
            Levels::Altitude(alts) => alts[level],
            Levels::Pressure { altitudes, .. } => trilinear(altitudes, level, &t, &j, &i),
        };
        Ok((WindVector::new(u, v), alt))
    }

    /// True when the grid covers `bounds` horizontally and `[t0, t1]` in time.
    pub fn covers(&self, bounds: &LatLonBounds, t0: i64, t1: i64) -> Result<()> {
        let b = self.bounds();
        if bounds.min_lat < b.min_lat || bounds.max_lat > b.max_lat {
            return Err(Error::Coverage {
                axis: "latitude",
                detail: format!("need [{}, {}], have [{}, {}]", bounds.min_lat, bounds.max_lat, b.min_lat, b.max_lat),
            });
        }
        if bounds.min_lon < b.min_lon || bounds.max_lon > b.max_lon {
            return Err(Error::Coverage {
                axis: "longitude",
                detail: format!("need [{}, {}], have [{}, {}]", bounds.min_lon, bounds.max_lon, b.min_lon, b.max_lon),
            });
        }
        let (g0, g1) = self.time_span();
        if t0 < g0 || t1 > g1 {
            return Err(Error::Coverage {
                axis: "time",
                detail: format!("need [{t0}, {t1}], have [{g0}, {g1}]"),
            });
        }
        Ok(())
    }

    fn times_f64(&self) -> Vec<f64> {
        self.times.iter().map(|&t| t as f64).collect()
    }
}

/// Bracketing index pair and interpolation weight for one axis.
#[derive(Debug, Clone, Copy)]
struct AxisPos {
    i0: usize,
    i1: usize,
    w: f64,
}

fn axis_lookup(axis: &'static str, values: &[f64], x: f64, clamp: bool) -> Result<AxisPos> {
    let n = values.len();
    if x < values[0] {
        if !clamp {
            return Err(Error::Bounds {
                axis,
                detail: format!("{x} below axis start {}", values[0]),
            });
        }
        return Ok(AxisPos { i0: 0, i1: 0, w: 0.0 });
    }
    if x > values[n - 1] {
        if !clamp {
            return Err(Error::Bounds {
                axis,
                detail: format!("{x} above axis end {}", values[n - 1]),
            });
        }
        return Ok(AxisPos { i0: n - 1, i1: n - 1, w: 0.0 });
    }
    let hi = values.partition_point(|&v| v < x);
    if hi == 0 {
        return Ok(AxisPos { i0: 0, i1: 0, w: 0.0 });
    }
    if values[hi.min(n - 1)] == x {
        let k = hi.min(n - 1);
        return Ok(AxisPos { i0: k, i1: k, w: 0.0 });
    }
    let lo = hi - 1;
    let w = (x - values[lo]) / (values[hi] - values[lo]);
    Ok(AxisPos { i0: lo, i1: hi, w })
}

impl AxisPos {
    /// Index/weight terms, one for a degenerate bracket, two otherwise.
    fn terms(&self) -> [(usize, f64); 2] {
        if self.i0 == self.i1 {
            [(self.i0, 1.0), (self.i0, 0.0)]
        } else {
            [(self.i0, 1.0 - self.w), (self.i1, self.w)]
        }
    }
}

/// Trilinear interpolation over (time, lat, lon) within one level.
fn trilinear(a: &Array4<f64>, level: usize, t: &AxisPos, j: &AxisPos, i: &AxisPos) -> f64 {
    let mut acc = 0.0;
    for (ti, tw) in t.terms() {
        if tw == 0.0 {
            continue;
        }
        for (ji, jw) in j.terms() {
            if jw == 0.0 {
                continue;
            }
            for (ii, iw) in i.terms() {
                if iw == 0.0 {
                    continue;
                }
                acc += tw * jw * iw * a[[ti, level, ji, ii]];
            }
        }
    }
    acc
}

fn require_ascending(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Data(format!("{name} axis is empty")));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Data(format!("{name} axis is not strictly ascending")));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data(format!("{name} axis contains non-finite values")));
    }
    Ok(())
}

fn inset(axis: &[f64]) -> (Option<f64>, Option<f64>) {
    if axis.len() >= 3 {
        (Some(axis[1]), Some(axis[axis.len() - 2]))
    } else {
        (None, None)
    }
}

/// Simulation arena: a horizontal box around a station coordinate plus a
/// vertical slab.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArenaSpec {
    pub center: GeoCoord,
    pub extent_east_km: f64,
    pub extent_north_km: f64,
    pub floor_m: f64,
    pub ceiling_m: f64,
}

impl ArenaSpec {
    pub fn new(center: GeoCoord, extent_east_km: f64, extent_north_km: f64, floor_m: f64, ceiling_m: f64) -> Result<Self> {
        if extent_east_km <= 0.0 || extent_north_km <= 0.0 {
            return Err(Error::Config("arena extents must be positive".into()));
        }
        if floor_m >= ceiling_m {
            return Err(Error::Config("arena floor must be below ceiling".into()));
        }
        Ok(Self { center, extent_east_km, extent_north_km, floor_m, ceiling_m })
    }

    /// 150 x 150 km box, 15-25 km vertical slab.
    pub fn default_at(center: GeoCoord) -> Self {
        Self {
            center,
            extent_east_km: 150.0,
            extent_north_km: 150.0,
            floor_m: 15_000.0,
            ceiling_m: 25_000.0,
        }
    }

    pub fn with_center(&self, center: GeoCoord) -> Self {
        Self { center, ..*self }
    }

    /// Horizontal bounding box of the arena.
    pub fn bounds(&self) -> LatLonBounds {
        let half_north_deg = self.extent_north_km * 1000.0 / 2.0 / crate::geo::METERS_PER_DEG;
        let coslat = self.center.latitude_deg.to_radians().cos().max(1e-9);
        let half_east_deg = self.extent_east_km * 1000.0 / 2.0 / (crate::geo::METERS_PER_DEG * coslat);
        LatLonBounds {
            min_lat: self.center.latitude_deg - half_north_deg,
            max_lat: self.center.latitude_deg + half_north_deg,
            min_lon: self.center.longitude_deg - half_east_deg,
            max_lon: self.center.longitude_deg + half_east_deg,
        }
    }

    pub fn clamp_altitude(&self, altitude_m: f64) -> f64 {
        altitude_m.clamp(self.floor_m, self.ceiling_m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_axes() -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<i64>) {
        (
            vec![34.0, 34.5, 35.0],
            vec![-107.0, -106.5, -106.0],
            vec![16000.0, 17000.0, 18000.0],
            vec![0, 3600, 7200],
        )
    }

    #[test]
    fn uniform_grid_samples_constant() {
        let (lats, lons, alts, times) = small_axes();
        let g = WindGrid::uniform(lats, lons, alts, times, WindVector::new(5.0, 0.0), GridKind::Synthetic).unwrap();
        for (lat, lon, alt, t) in [
            (34.2, -106.7, 16500.0, 1800),
            (34.0, -107.0, 16000.0, 0),
            (90.0, 20.0, 99999.0, 999999), // clamped far out of range
        ] {
            let w = g.sample(&GeoCoord::new(lat, lon, alt), t).unwrap();
            assert_eq!((w.u_ms, w.v_ms), (5.0, 0.0));
        }
    }

    #[test]
    fn node_query_returns_stored_value() {
        let (lats, lons, alts, times) = small_axes();
        let g = WindGrid::from_fn(lats.clone(), lons.clone(), alts.clone(), times.clone(), GridKind::Synthetic, |t, l, j, i| {
            WindVector::new((t * 1000 + l * 100 + j * 10 + i) as f64, 1.0)
        })
        .unwrap();
        let w = g
            .sample(&GeoCoord::new(lats[2], lons[1], alts[1]), times[1])
            .unwrap();
        assert_eq!(w.u_ms, 1121.0); // t=1, l=1, j=2, i=1
    }

    #[test]
    fn altitude_interpolation_is_linear() {
        let lats = vec![34.0, 35.0];
        let lons = vec![-107.0, -106.0];
        let alts = vec![16000.0, 17000.0];
        let times = vec![0];
        let g = WindGrid::from_fn(lats, lons, alts, times, GridKind::Synthetic, |_, l, _, _| {
            WindVector::new(if l == 0 { 0.0 } else { 10.0 }, 0.0)
        })
        .unwrap();
        let w = g.sample(&GeoCoord::new(34.5, -106.5, 16250.0), 0).unwrap();
        assert!((w.u_ms - 2.5).abs() < 1e-12, "got {}", w.u_ms);
    }

    #[test]
    fn out_of_bounds_errors_name_the_axis() {
        let (lats, lons, alts, times) = small_axes();
        let g = WindGrid::uniform(lats, lons, alts, times, WindVector::default(), GridKind::Synthetic).unwrap();
        let err = g
            .sample_with(&GeoCoord::new(50.0, -106.5, 16500.0), 0, false)
            .unwrap_err();
        match err {
            Error::Bounds { axis, .. } => assert_eq!(axis, "latitude"),
            other => panic!("unexpected error {other:?}"),
        }
        let err = g
            .sample_with(&GeoCoord::new(34.5, -106.5, 16500.0), -5, false)
            .unwrap_err();
        match err {
            Error::Bounds { axis, .. } => assert_eq!(axis, "time"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn pressure_levels_interpolate_on_local_altitude() {
        // Two pressure levels whose heights tilt across the grid; the query
        // altitude sits exactly halfway between the local level altitudes.
        let lats = vec![0.0, 1.0];
        let lons = vec![0.0, 1.0];
        let times = vec![0];
        let mut altitudes = Array4::<f64>::zeros((1, 2, 2, 2));
        for j in 0..2 {
            for i in 0..2 {
                let tilt = (j as f64) * 100.0 + (i as f64) * 50.0;
                altitudes[[0, 0, j, i]] = 16000.0 + tilt;
                altitudes[[0, 1, j, i]] = 18000.0 + tilt;
            }
        }
        let mut u = Array4::<f64>::zeros((1, 2, 2, 2));
        u.index_axis_mut(ndarray::Axis(1), 1).fill(10.0);
        let v = Array4::<f64>::zeros((1, 2, 2, 2));
        let g = WindGrid::new(
            lats,
            lons,
            Levels::Pressure { pressures_hpa: vec![100.0, 70.0], altitudes },
            times,
            u,
            v,
            GridKind::ForecastLike,
        )
        .unwrap();
        // At (0.5, 0.5) the local altitudes are 16075 and 18075.
        let w = g.sample(&GeoCoord::new(0.5, 0.5, 17075.0), 0).unwrap();
        assert!((w.u_ms - 5.0).abs() < 1e-6, "got {}", w.u_ms);
    }

    #[test]
    fn excessive_altitude_spread_rejected() {
        let mut altitudes = Array4::<f64>::zeros((1, 1, 2, 2));
        altitudes[[0, 0, 0, 0]] = 16000.0;
        altitudes[[0, 0, 0, 1]] = 16000.0;
        altitudes[[0, 0, 1, 0]] = 16000.0;
        altitudes[[0, 0, 1, 1]] = 17500.0;
        let u = Array4::<f64>::zeros((1, 1, 2, 2));
        let v = Array4::<f64>::zeros((1, 1, 2, 2));
        let err = WindGrid::new(
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            Levels::Pressure { pressures_hpa: vec![70.0], altitudes },
            vec![0],
            u,
            v,
            GridKind::ForecastLike,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    proptest! {
        /// 4-linear sampling is a convex combination: the result never
        /// exceeds the extremes of the stored values.
        #[test]
        fn sampling_is_bounded_by_grid_extremes(
            seed in 0u64..1000,
            lat in 34.0f64..35.0, lon in -107.0f64..-106.0,
            alt in 15500.0f64..18500.0, t in 0i64..7200,
        ) {
            use rand::Rng;
            let (lats, lons, alts, times) = small_axes();
            let mut rng = crate::rng::SeededRng::new(seed, 0);
            let g = WindGrid::from_fn(lats, lons, alts, times, GridKind::Synthetic, |_, _, _, _| {
                WindVector::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0))
            }).unwrap();
            let w = g.sample(&GeoCoord::new(lat, lon, alt), t).unwrap();
            let umax = g.u().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let umin = g.u().iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(w.u_ms <= umax + 1e-9 && w.u_ms >= umin - 1e-9);
        }
    }
}
