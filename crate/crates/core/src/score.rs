//! Opposing-winds Forecast Score.
//!
//! Wind bearings in an altitude column are sorted into `N_b` directional bins
//! offset so that north sits at the center of bin 1. Levels whose bins face
//! each other (bin `i` against bin `i + N_b/2`) can carry a balloon back and
//! forth, so the score counts matchable opposing level pairs,
//! `sum_i min(C_i, C_{i + N_b/2})`, normalized by `floor(N_a / 2)` (the
//! maximum number of disjoint level pairs), giving a value in `[0, 1]`.
//! A column whose non-calm winds all share one bin scores exactly zero.
//! The per-coordinate Forecast Score averages this over evaluated timestamps.

use crate::error::{Error, Result};
use crate::geo::{GeoCoord, WindVector};
use crate::grid::{GridKind, WindGrid};
use crate::rng::{streams, SeededRng};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreConfig {
    /// Number of directional bins, even and at least 4.
    pub num_bins: usize,
    /// Rotation applied to the bin edges so a cardinal direction is centered
    /// in bin 1 (22.5 degrees for 8 bins).
    pub center_offset_deg: f64,
    /// Only levels inside `[floor, ceiling]` meters enter the column.
    pub altitude_window_m: [f64; 2],
    /// Number of evaluated timestamps per coordinate.
    pub timestamps: usize,
    /// Levels slower than this are ignored: near-zero winds have unstable
    /// bearings.
    pub calm_threshold_ms: f64,
    pub include_calm: bool,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            num_bins: 8,
            center_offset_deg: 22.5,
            altitude_window_m: [15_000.0, 26_500.0],
            timestamps: 7,
            calm_threshold_ms: 2.0,
            include_calm: false,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_bins < 4 || self.num_bins % 2 != 0 {
            return Err(Error::Config("num_bins must be even and at least 4".into()));
        }
        let width = 360.0 / self.num_bins as f64;
        if self.center_offset_deg < 0.0 || self.center_offset_deg >= 2.0 * width {
            return Err(Error::Config(format!(
                "center_offset must lie in [0, {})",
                2.0 * width
            )));
        }
        if self.timestamps == 0 {
            return Err(Error::Config("timestamps must be at least 1".into()));
        }
        if self.calm_threshold_ms < 0.0 {
            return Err(Error::Config("calm threshold must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-bin counts for one column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinHistogram {
    /// `counts[i]` is bin `i + 1` in 1-based terms.
    pub counts: Vec<u32>,
    /// Number of levels binned (calm levels excluded by default).
    pub levels_counted: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpposingScore {
    /// Matchable opposing pairs over `floor(N_a / 2)`, in `[0, 1]`.
    pub t_norm: f64,
    pub histogram: BinHistogram,
}

/// Classifier output for one coordinate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastScore {
    pub value: f64,
    pub per_timestamp: Vec<f64>,
    pub coordinate: GeoCoord,
    pub source_kind: GridKind,
}

/// 1-based bin index for a bearing in `[0, 360)`. Edges are lower-inclusive:
/// with defaults, bin 1 covers `[-22.5, 22.5)`.
pub fn bin_direction(bearing_deg: f64, cfg: &ScoreConfig) -> usize {
    let width = 360.0 / cfg.num_bins as f64;
    let shifted = crate::geo::normalize_bearing(bearing_deg + cfg.center_offset_deg);
    let idx = (shifted / width).floor() as usize;
    idx.min(cfg.num_bins - 1) + 1
}

/// Score one altitude column at a single timestamp.
pub fn opposing_score(column: &[WindVector], cfg: &ScoreConfig) -> Result<OpposingScore> {
    cfg.validate()?;
    if column.is_empty() {
        return Err(Error::EmptyInput("opposing_score needs a non-empty column".into()));
    }
    let mut counts = vec![0u32; cfg.num_bins];
    let mut levels_counted = 0u32;
    for w in column {
        if !cfg.include_calm && w.speed_ms() < cfg.calm_threshold_ms {
            continue;
        }
        counts[bin_direction(w.bearing_deg(), cfg) - 1] += 1;
        levels_counted += 1;
    }
    let half = cfg.num_bins / 2;
    let pairs: u32 = (0..half).map(|i| counts[i].min(counts[i + half])).sum();
    let max_pairs = levels_counted / 2;
    let t_norm = if max_pairs == 0 {
        0.0
    } else {
        pairs as f64 / max_pairs as f64
    };
    Ok(OpposingScore {
        t_norm,
        histogram: BinHistogram {
            counts,
            levels_counted,
        },
    })
}

/// Extract the wind column at a coordinate: one entry per grid level whose
/// local altitude falls inside the configured window.
pub fn wind_column(grid: &WindGrid, coordinate: &GeoCoord, when: i64, cfg: &ScoreConfig) -> Result<Vec<WindVector>> {
    let [floor, ceiling] = cfg.altitude_window_m;
    let mut column = Vec::new();
    for level in 0..grid.level_count() {
        let (wind, altitude) = grid.sample_level(level, coordinate, when)?;
        if altitude >= floor && altitude <= ceiling {
            column.push(wind);
        }
    }
    Ok(column)
}

/// Forecast Score for one coordinate over a set of timestamps.
pub fn forecast_score(
    grid: &WindGrid,
    coordinate: &GeoCoord,
    times: &[i64],
    cfg: &ScoreConfig,
) -> Result<ForecastScore> {
    cfg.validate()?;
    if times.is_empty() {
        return Err(Error::EmptyInput("forecast_score needs at least one timestamp".into()));
    }
    let mut per_timestamp = Vec::with_capacity(times.len());
    for &t in times {
        let column = wind_column(grid, coordinate, t, cfg)?;
        if column.is_empty() {
            return Err(Error::Coverage {
                axis: "altitude",
                detail: format!(
                    "no grid levels inside the scoring window [{}, {}] m",
                    cfg.altitude_window_m[0], cfg.altitude_window_m[1]
                ),
            });
        }
        per_timestamp.push(opposing_score(&column, cfg)?.t_norm);
    }
    let value = per_timestamp.iter().sum::<f64>() / per_timestamp.len() as f64;
    Ok(ForecastScore {
        value,
        per_timestamp,
        coordinate: *coordinate,
        source_kind: grid.kind(),
    })
}

/// Evenly spaced evaluation instants across `[t0, t1]`.
pub fn evaluation_times(t0: i64, t1: i64, n: usize) -> Vec<i64> {
    if n <= 1 || t1 <= t0 {
        return vec![t0];
    }
    (0..n)
        .map(|k| t0 + ((t1 - t0) as f64 * k as f64 / (n - 1) as f64).round() as i64)
        .collect()
}

/// One coordinate scored against every supplied grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreSample {
    pub coordinate: GeoCoord,
    /// One score per grid, in input order.
    pub scores: Vec<f64>,
}

/// Distribution summary for one grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreDistribution {
    /// Raw scores (zeros removed when `filter_zero` was set).
    pub scores: Vec<f64>,
    /// Fraction of *all* sampled coordinates that scored exactly zero.
    pub zero_fraction: f64,
}

/// Monte Carlo score distributions over random coordinates.
///
/// Every coordinate is drawn once inside the intersection of the grids'
/// interiors and scored against every grid at the same timestamps, so
/// multi-grid calls are paired by construction. Each coordinate draws from
/// its own RNG substream of `seed`.
pub fn score_distribution(
    grids: &[&WindGrid],
    samples: usize,
    seed: u64,
    cfg: &ScoreConfig,
    filter_zero: bool,
) -> Result<(Vec<ScoreSample>, Vec<ScoreDistribution>)> {
    cfg.validate()?;
    if grids.is_empty() {
        return Err(Error::EmptyInput("score_distribution needs at least one grid".into()));
    }
    if samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }

    let mut bounds = grids[0].interior_bounds();
    let (mut t0, mut t1) = grids[0].time_span();
    for g in &grids[1..] {
        bounds = bounds.intersect(&g.interior_bounds()).ok_or(Error::Coverage {
            axis: "latitude",
            detail: "grids do not overlap horizontally".into(),
        })?;
        let (g0, g1) = g.time_span();
        t0 = t0.max(g0);
        t1 = t1.min(g1);
    }
    if t1 < t0 {
        return Err(Error::Coverage {
            axis: "time",
            detail: "grids do not overlap in time".into(),
        });
    }
    let times = evaluation_times(t0, t1, cfg.timestamps);

    let mut records = Vec::with_capacity(samples);
    for k in 0..samples {
        let mut rng = SeededRng::new(seed, streams::SCORE_SAMPLE_BASE + k as u64);
        let lat = rng.random_range(bounds.min_lat..=bounds.max_lat);
        let lon = rng.random_range(bounds.min_lon..=bounds.max_lon);
        let coordinate = GeoCoord::new(lat, lon, cfg.altitude_window_m[0]);
        let mut scores = Vec::with_capacity(grids.len());
        for g in grids {
            scores.push(forecast_score(g, &coordinate, &times, cfg)?.value);
        }
        records.push(ScoreSample { coordinate, scores });
    }

    let distributions = (0..grids.len())
        .map(|gi| {
            let all: Vec<f64> = records.iter().map(|r| r.scores[gi]).collect();
            let zero_fraction = all.iter().filter(|&&s| s == 0.0).count() as f64 / all.len() as f64;
            let scores = if filter_zero {
                all.into_iter().filter(|&s| s != 0.0).collect()
            } else {
                all
            };
            ScoreDistribution {
                scores,
                zero_fraction,
            }
        })
        .collect();

    Ok((records, distributions))
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}
