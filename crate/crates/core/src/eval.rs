//! Evaluation campaigns and forecast-model comparison statistics.
//!
//! A campaign replays a trained policy greedily for many episodes per month,
//! tagging every episode with the Forecast Score of its station coordinate
//! (computed from the forecast grid, the side the agent can observe). The
//! joint TWR50-versus-score histogram and the per-month summary tables come
//! straight from those records. Episodes are independent, so campaigns can
//! fan out across worker threads; per-episode RNG substreams keep the
//! results identical at any worker count.

use crate::dqn::{argmax, q_forward, Checkpoint};
use crate::error::{Error, Result};
use crate::geo::fold_angle_deg;
use crate::grid::WindGrid;
use crate::rng::{streams, SeededRng};
use crate::score::{evaluation_times, forecast_score, mean_and_std, ScoreConfig};
use crate::sim::{
    Action, Observation, RewardConfig, SimConfig, Simulator, TrajectoryPoint,
    TwrReport,
};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// One evaluation month: a truth grid driving motion and a forecast grid
/// feeding observations and scores.
pub struct MonthPair<'a> {
    pub label: String,
    pub truth: &'a WindGrid,
    pub forecast: &'a WindGrid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub episodes_per_month: usize,
    pub seed: u64,
    pub score: ScoreConfig,
    /// Worker threads; 1 is the single-threaded reference (results are
    /// identical at any count).
    pub workers: usize,
    pub keep_trajectories: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            episodes_per_month: 100,
            seed: 0,
            score: ScoreConfig::default(),
            workers: 1,
            keep_trajectories: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub month: String,
    pub episode: usize,
    pub seed: u64,
    pub center: crate::geo::GeoCoord,
    pub start_time_s: i64,
    pub twr: TwrReport,
    pub forecast_score: f64,
    pub total_reward: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

/// Run a trained policy through `episodes_per_month` greedy episodes per
/// month. Deterministic for a given seed at any worker count.
pub fn run_campaign(
    checkpoint: &Checkpoint,
    months: &[MonthPair<'_>],
    sim_cfg: &SimConfig,
    reward_cfg: &RewardConfig,
    cfg: &CampaignConfig,
) -> Result<Vec<EpisodeRecord>> {
    run_campaign_with_offset(checkpoint, months, sim_cfg, reward_cfg, cfg, 0)
}

/// As [`run_campaign`], with episode RNG streams shifted by
/// `episode_stream_offset`. Splitting a campaign into chunks run with the
/// right offsets reproduces the single-shot campaign exactly.
pub fn run_campaign_with_offset(
    checkpoint: &Checkpoint,
    months: &[MonthPair<'_>],
    sim_cfg: &SimConfig,
    reward_cfg: &RewardConfig,
    cfg: &CampaignConfig,
    episode_stream_offset: usize,
) -> Result<Vec<EpisodeRecord>> {
    if months.is_empty() {
        return Err(Error::EmptyInput("campaign needs at least one month".into()));
    }
    if cfg.episodes_per_month == 0 {
        return Err(Error::Config("episodes_per_month must be at least 1".into()));
    }
    cfg.score.validate()?;
    sim_cfg.validate()?;
    reward_cfg.validate()?;
    let net = checkpoint.network()?;
    let norm = checkpoint.normalization.clone();

    let total = months.len() * cfg.episodes_per_month;
    let workers = cfg.workers.max(1).min(total);

    let job = |global: usize| -> Result<EpisodeRecord> {
        let month_idx = global / cfg.episodes_per_month;
        let episode = global % cfg.episodes_per_month;
        let month = &months[month_idx];
        let stream = streams::EVAL_EPISODE_BASE + 2 * (episode_stream_offset + global) as u64;
        let mut rng = SeededRng::new(cfg.seed, stream);
        let setup = crate::dqn::sample_episode_setup(
            &mut rng,
            cfg.seed,
            stream + 1,
            &crate::dqn::GridPair {
                label: month.label.clone(),
                truth: month.truth,
                forecast: month.forecast,
            },
            sim_cfg,
        )?;
        let mut sim = Simulator::new(month.truth, month.forecast, sim_cfg, reward_cfg)?;
        let greedy = |obs: &Observation| -> Action {
            let q = q_forward(&net, &norm.normalize(obs)).expect("observation matches checkpoint");
            Action::from_index(argmax(&q)).expect("3 actions")
        };
        let report = sim.run_episode(&setup, greedy)?;

        let episode_s = (sim_cfg.episode_hours * 3600.0).round() as i64;
        let times = evaluation_times(
            setup.start_time_s,
            setup.start_time_s + episode_s,
            cfg.score.timestamps,
        );
        // Clamp scoring instants into the forecast's span (the episode end
        // may touch the final frame exactly).
        let (f0, f1) = month.forecast.time_span();
        let times: Vec<i64> = times.iter().map(|&t| t.clamp(f0, f1)).collect();
        let fs = forecast_score(month.forecast, &setup.center, &times, &cfg.score)?;

        Ok(EpisodeRecord {
            month: month.label.clone(),
            episode,
            seed: cfg.seed,
            center: setup.center,
            start_time_s: setup.start_time_s,
            twr: report.twr,
            forecast_score: fs.value,
            total_reward: report.total_reward,
            trajectory: cfg.keep_trajectories.then_some(report.trajectory),
        })
    };

    if workers == 1 {
        (0..total).map(job).collect()
    } else {
        let mut slots: Vec<Option<Result<EpisodeRecord>>> = Vec::new();
        slots.resize_with(total, || None);
        std::thread::scope(|scope| {
            let mut handles = Vec::with_capacity(workers);
            for w in 0..workers {
                let job = &job;
                handles.push(scope.spawn(move || {
                    let mut out = Vec::new();
                    let mut g = w;
                    while g < total {
                        out.push((g, job(g)));
                        g += workers;
                    }
                    out
                }));
            }
            for h in handles {
                for (g, r) in h.join().expect("campaign worker panicked") {
                    slots[g] = Some(r);
                }
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every episode slot filled"))
            .collect()
    }
}

/// Per-month mean/std of TWR50 and Forecast Score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthSummary {
    pub month: String,
    pub episodes: usize,
    pub mean_twr50: f64,
    pub sd_twr50: f64,
    pub mean_fs: f64,
    pub sd_fs: f64,
}

pub fn summarize(records: &[EpisodeRecord]) -> Vec<MonthSummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.month.as_str()) {
            order.push(&r.month);
        }
    }
    order
        .iter()
        .map(|&m| {
            let twr: Vec<f64> = records
                .iter()
                .filter(|r| r.month == m)
                .map(|r| r.twr.twr50)
                .collect();
            let fs: Vec<f64> = records
                .iter()
                .filter(|r| r.month == m)
                .map(|r| r.forecast_score)
                .collect();
            let (mean_twr50, sd_twr50) = mean_and_std(&twr);
            let (mean_fs, sd_fs) = mean_and_std(&fs);
            MonthSummary {
                month: m.to_string(),
                episodes: twr.len(),
                mean_twr50,
                sd_twr50,
                mean_fs,
                sd_fs,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct HistogramOptions {
    pub fs_bin_width: f64,
    pub twr_bin_width: f64,
    /// Cells with fewer records than this are reported as empty.
    pub min_count: u32,
    /// Drop records whose Forecast Score is exactly zero before binning.
    pub exclude_zero_fs: bool,
}

impl Default for HistogramOptions {
    fn default() -> Self {
        Self {
            fs_bin_width: 0.1,
            twr_bin_width: 0.1,
            min_count: 5,
            exclude_zero_fs: true,
        }
    }
}

/// Joint frequency distribution of (Forecast Score, TWR50).
#[derive(Debug, Clone)]
pub struct JointHistogram {
    pub fs_edges: Vec<f64>,
    pub twr_edges: Vec<f64>,
    /// Raw counts indexed `[twr_bin][fs_bin]`.
    pub counts: Array2<u32>,
    pub min_count: u32,
    pub excluded_zero_fs: usize,
}

impl JointHistogram {
    /// Counts with under-populated cells blanked.
    pub fn filtered_counts(&self) -> Array2<u32> {
        self.counts.mapv(|c| if c < self.min_count { 0 } else { c })
    }

    /// CSV matrix: header row of FS bin starts, one row per TWR bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("twr50_bin_start");
        for w in self.fs_edges.windows(2) {
            out.push_str(&format!(",fs_{:.2}", w[0]));
        }
        out.push('\n');
        let filtered = self.filtered_counts();
        for (ti, w) in self.twr_edges.windows(2).enumerate() {
            out.push_str(&format!("{:.2}", w[0]));
            for fi in 0..self.fs_edges.len() - 1 {
                out.push_str(&format!(",{}", filtered[[ti, fi]]));
            }
            out.push('\n');
        }
        out
    }
}

pub fn joint_histogram(records: &[EpisodeRecord], opts: &HistogramOptions) -> Result<JointHistogram> {
    if records.is_empty() {
        return Err(Error::EmptyInput("joint_histogram needs at least one record".into()));
    }
    if opts.fs_bin_width <= 0.0 || opts.twr_bin_width <= 0.0 || opts.fs_bin_width > 1.0 || opts.twr_bin_width > 1.0 {
        return Err(Error::Config("histogram bin widths must lie in (0, 1]".into()));
    }
    let edges = |width: f64| -> Vec<f64> {
        let n = (1.0 / width).round();
        if n >= 1.0 && (n * width - 1.0).abs() < 1e-9 {
            // Evenly dividing widths get exact rational edges (0.7, not
            // 7 * 0.1 = 0.7000...1), keeping bin membership intuitive.
            let n = n as usize;
            (0..=n).map(|k| k as f64 / n as f64).collect()
        } else {
            let n = (1.0 / width).ceil() as usize;
            (0..=n).map(|k| (k as f64 * width).min(1.0)).collect()
        }
    };
    let fs_edges = edges(opts.fs_bin_width);
    let twr_edges = edges(opts.twr_bin_width);
    let mut counts = Array2::<u32>::zeros((twr_edges.len() - 1, fs_edges.len() - 1));
    let mut excluded = 0usize;
    for r in records {
        if opts.exclude_zero_fs && r.forecast_score == 0.0 {
            excluded += 1;
            continue;
        }
        let fi = bin_of(r.forecast_score, &fs_edges);
        let ti = bin_of(r.twr.twr50, &twr_edges);
        counts[[ti, fi]] += 1;
    }
    Ok(JointHistogram {
        fs_edges,
        twr_edges,
        counts,
        min_count: opts.min_count,
        excluded_zero_fs: excluded,
    })
}

/// Bin index with the final edge inclusive.
fn bin_of(x: f64, edges: &[f64]) -> usize {
    let n = edges.len() - 1;
    for i in 0..n {
        if x < edges[i + 1] {
            return i;
        }
    }
    n - 1
}

/// Per-level angular and magnitude differences between two wind models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelDiff {
    pub level: String,
    pub reference_altitude_m: f64,
    pub samples: usize,
    pub mean_angular_deg: f64,
    pub std_angular_deg: f64,
    pub mean_magnitude_ms: f64,
    pub std_magnitude_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDiffReport {
    pub per_level: Vec<LevelDiff>,
    pub overall_mean_angular_deg: f64,
    pub overall_std_angular_deg: f64,
}

/// Compare model `a` (typically forecast-like) against model `b` (typically
/// synthetic). Every grid node of `a` inside the shared coverage is paired
/// with the nearest-altitude level of `b` sampled at the same place and
/// time; differences are the folded angle between the wind vectors and the
/// absolute speed difference.
pub fn compare_models(a: &WindGrid, b: &WindGrid) -> Result<ModelDiffReport> {
    let overlap = a.bounds().intersect(&b.bounds()).ok_or(Error::Coverage {
        axis: "latitude",
        detail: "models do not overlap horizontally".into(),
    })?;
    let (b0, b1) = b.time_span();
    let times: Vec<i64> = a
        .times()
        .iter()
        .copied()
        .filter(|&t| t >= b0 && t <= b1)
        .collect();
    if times.is_empty() {
        return Err(Error::Coverage {
            axis: "time",
            detail: "models do not overlap in time".into(),
        });
    }

    // Nearest-altitude level mapping a -> b.
    let mapping: Vec<usize> = (0..a.level_count())
        .map(|la| {
            let alt = a.level_mean_altitude(la);
            (0..b.level_count())
                .min_by(|&x, &y| {
                    (b.level_mean_altitude(x) - alt)
                        .abs()
                        .total_cmp(&(b.level_mean_altitude(y) - alt).abs())
                })
                .expect("b has levels")
        })
        .collect();

    let time_index: Vec<usize> = times
        .iter()
        .map(|t| a.times().iter().position(|x| x == t).expect("native time"))
        .collect();

    let mut per_level = Vec::with_capacity(a.level_count());
    let mut all_angular: Vec<f64> = Vec::new();
    for la in 0..a.level_count() {
        let mut angular = Vec::new();
        let mut magnitude = Vec::new();
        for (&t, &ti) in times.iter().zip(&time_index) {
            for (j, &lat) in a.latitudes().iter().enumerate() {
                for (i, &lon) in a.longitudes().iter().enumerate() {
                    let coord = crate::geo::GeoCoord::new(lat, lon, a.level_mean_altitude(la));
                    if !overlap.contains(&coord) {
                        continue;
                    }
                    let wa = crate::geo::WindVector::new(a.u()[[ti, la, j, i]], a.v()[[ti, la, j, i]]);
                    let (wb, _) = b.sample_level(mapping[la], &coord, t)?;
                    angular.push(fold_angle_deg(wa.bearing_deg() - wb.bearing_deg()));
                    magnitude.push((wa.speed_ms() - wb.speed_ms()).abs());
                }
            }
        }
        if angular.is_empty() {
            return Err(Error::Coverage {
                axis: "latitude",
                detail: "no grid nodes inside the shared coverage".into(),
            });
        }
        let (mean_angular_deg, std_angular_deg) = mean_and_std(&angular);
        let (mean_magnitude_ms, std_magnitude_ms) = mean_and_std(&magnitude);
        all_angular.extend_from_slice(&angular);
        per_level.push(LevelDiff {
            level: level_label(a, la),
            reference_altitude_m: a.level_mean_altitude(la),
            samples: angular.len(),
            mean_angular_deg,
            std_angular_deg,
            mean_magnitude_ms,
            std_magnitude_ms,
        });
    }
    let (overall_mean_angular_deg, overall_std_angular_deg) = mean_and_std(&all_angular);
    Ok(ModelDiffReport {
        per_level,
        overall_mean_angular_deg,
        overall_std_angular_deg,
    })
}

fn level_label(g: &WindGrid, level: usize) -> String {
    match g.levels() {
        crate::grid::Levels::Altitude(alts) => format!("{:.0} m", alts[level]),
        crate::grid::Levels::Pressure { pressures_hpa, .. } => {
            format!("{:.0} hPa", pressures_hpa[level])
        }
    }
}

/// Per-month zero-score fractions for a forecast-like/synthetic pair,
/// computed over paired random coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroScoreRow {
    pub month: String,
    pub forecast_like_zero_fraction: f64,
    pub synthetic_zero_fraction: f64,
    pub samples: usize,
}

pub fn zero_score_table(
    months: &[(String, &WindGrid, &WindGrid)],
    samples: usize,
    seed: u64,
    cfg: &ScoreConfig,
) -> Result<Vec<ZeroScoreRow>> {
    let mut rows = Vec::with_capacity(months.len());
    for (label, forecast_like, synthetic) in months {
        let (_, dists) =
            crate::score::score_distribution(&[forecast_like, synthetic], samples, seed, cfg, false)?;
        rows.push(ZeroScoreRow {
            month: label.clone(),
            forecast_like_zero_fraction: dists[0].zero_fraction,
            synthetic_zero_fraction: dists[1].zero_fraction,
            samples,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dqn::{DqnHyperparams, Normalization};
    use crate::geo::{GeoCoord, WindVector};
    use crate::grid::GridKind;
    use crate::nn::Mlp;

    fn center() -> GeoCoord {
        GeoCoord::new(35.0, -106.0, 0.0)
    }

    fn calm_grid() -> WindGrid {
        WindGrid::uniform(
            vec![31.0, 35.0, 39.0],
            vec![-110.0, -106.0, -102.0],
            vec![15_000.0, 20_000.0, 25_000.0],
            vec![0, 43_200, 86_400],
            WindVector::new(0.0, 0.0),
            GridKind::Synthetic,
        )
        .unwrap()
    }

    fn stay_checkpoint(sim_cfg: &SimConfig, reward_cfg: &RewardConfig) -> Checkpoint {
        // A zero network: all Q equal, so the greedy tie-break always picks
        // action 0 (ascend). Good enough for plumbing tests.
        let norm = Normalization::for_configs(sim_cfg, reward_cfg);
        let layer_sizes = vec![3 + 3 * sim_cfg.obs_levels, 8, 3];
        Checkpoint {
            params: Mlp::zeros(&layer_sizes).unwrap().params,
            layer_sizes,
            hyperparams: DqnHyperparams::default(),
            normalization: norm,
            seed: 0,
            rng: crate::rng::SeededRng::new(0, 0).snapshot(),
            env_steps: 0,
            grad_steps: 0,
            episodes: 0,
        }
    }

    fn quick_campaign_cfg(episodes: usize, workers: usize) -> CampaignConfig {
        CampaignConfig {
            episodes_per_month: episodes,
            seed: 5,
            score: ScoreConfig::default(),
            workers,
            keep_trajectories: false,
        }
    }

    fn quick_sim_cfg() -> SimConfig {
        let mut cfg = SimConfig::default_at(center());
        cfg.episode_hours = 0.5;
        cfg
    }

    #[test]
    fn calm_month_yields_perfect_twr_and_zero_scores() {
        let truth = calm_grid();
        let forecast = calm_grid();
        let months = [MonthPair {
            label: "calm".into(),
            truth: &truth,
            forecast: &forecast,
        }];
        let sim_cfg = quick_sim_cfg();
        let reward_cfg = RewardConfig::default();
        let ckpt = stay_checkpoint(&sim_cfg, &reward_cfg);
        let records = run_campaign(&ckpt, &months, &sim_cfg, &reward_cfg, &quick_campaign_cfg(6, 1)).unwrap();
        assert_eq!(records.len(), 6);
        for r in &records {
            assert_eq!(r.twr.twr50, 1.0);
            assert_eq!(r.forecast_score, 0.0);
        }
        let summary = summarize(&records);
        assert_eq!(summary.len(), 1);
        assert_eq!(summary[0].mean_twr50, 1.0);
        assert_eq!(summary[0].sd_twr50, 0.0);
    }

    #[test]
    fn record_count_is_months_times_episodes() {
        let truth = calm_grid();
        let forecast = calm_grid();
        let months = [
            MonthPair { label: "jan".into(), truth: &truth, forecast: &forecast },
            MonthPair { label: "jul".into(), truth: &truth, forecast: &forecast },
        ];
        let sim_cfg = quick_sim_cfg();
        let reward_cfg = RewardConfig::default();
        let ckpt = stay_checkpoint(&sim_cfg, &reward_cfg);
        let records = run_campaign(&ckpt, &months, &sim_cfg, &reward_cfg, &quick_campaign_cfg(4, 1)).unwrap();
        assert_eq!(records.len(), 8);
        let summary = summarize(&records);
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[0].month, "jan");
        assert_eq!(summary[1].month, "jul");
        assert_eq!(summary[0].episodes, 4);
    }

    #[test]
    fn campaign_is_deterministic_across_worker_counts() {
        let truth = calm_grid();
        let forecast = calm_grid();
        let months = [MonthPair { label: "m".into(), truth: &truth, forecast: &forecast }];
        let sim_cfg = quick_sim_cfg();
        let reward_cfg = RewardConfig::default();
        let ckpt = stay_checkpoint(&sim_cfg, &reward_cfg);
        let r1 = run_campaign(&ckpt, &months, &sim_cfg, &reward_cfg, &quick_campaign_cfg(9, 1)).unwrap();
        let r3 = run_campaign(&ckpt, &months, &sim_cfg, &reward_cfg, &quick_campaign_cfg(9, 3)).unwrap();
        for (a, b) in r1.iter().zip(&r3) {
            assert_eq!(a.center, b.center);
            assert_eq!(a.twr.twr50, b.twr.twr50);
            assert_eq!(a.total_reward, b.total_reward);
        }
    }

    fn record(fs: f64, twr50: f64) -> EpisodeRecord {
        EpisodeRecord {
            month: "m".into(),
            episode: 0,
            seed: 0,
            center: center(),
            start_time_s: 0,
            twr: TwrReport { twr25: twr50, twr50, twr75: twr50 },
            forecast_score: fs,
            total_reward: 0.0,
            trajectory: None,
        }
    }

    #[test]
    fn all_zero_scores_filter_to_an_empty_histogram() {
        let records: Vec<EpisodeRecord> = (0..10).map(|_| record(0.0, 0.5)).collect();
        let h = joint_histogram(&records, &HistogramOptions::default()).unwrap();
        assert_eq!(h.excluded_zero_fs, 10);
        assert_eq!(h.counts.iter().sum::<u32>(), 0);
    }

    #[test]
    fn unfiltered_counts_sum_to_record_count() {
        let records: Vec<EpisodeRecord> = (0..25)
            .map(|k| record(k as f64 / 25.0 + 0.001, (k % 10) as f64 / 10.0))
            .collect();
        let opts = HistogramOptions {
            exclude_zero_fs: false,
            min_count: 0,
            ..HistogramOptions::default()
        };
        let h = joint_histogram(&records, &opts).unwrap();
        assert_eq!(h.counts.iter().sum::<u32>(), 25);
    }

    #[test]
    fn single_record_lands_in_one_cell() {
        let records = vec![record(0.55, 0.7)];
        let opts = HistogramOptions {
            min_count: 0,
            ..HistogramOptions::default()
        };
        let h = joint_histogram(&records, &opts).unwrap();
        assert_eq!(h.counts.iter().sum::<u32>(), 1);
        assert_eq!(h.counts[[7, 5]], 1);
        // Boundary values land in the last bin, not out of range.
        let edge = vec![record(1.0, 1.0)];
        let h = joint_histogram(&edge, &opts).unwrap();
        assert_eq!(h.counts[[9, 9]], 1);
    }

    #[test]
    fn min_count_filter_blanks_sparse_cells() {
        let mut records: Vec<EpisodeRecord> = (0..6).map(|_| record(0.55, 0.75)).collect();
        records.push(record(0.15, 0.15));
        let h = joint_histogram(&records, &HistogramOptions::default()).unwrap();
        let filtered = h.filtered_counts();
        assert_eq!(filtered[[7, 5]], 6);
        assert_eq!(filtered[[1, 1]], 0, "sparse cell blanked");
        assert_eq!(h.counts[[1, 1]], 1, "raw counts intact");
        let csv = h.to_csv();
        assert!(csv.starts_with("twr50_bin_start,fs_0.00,"));
        assert_eq!(csv.lines().count(), 11);
    }

    fn rotated(grid: &WindGrid, deg: f64) -> WindGrid {
        let rad = deg.to_radians();
        WindGrid::from_fn(
            grid.latitudes().to_vec(),
            grid.longitudes().to_vec(),
            match grid.levels() {
                crate::grid::Levels::Altitude(a) => a.clone(),
                _ => unreachable!(),
            },
            grid.times().to_vec(),
            grid.kind(),
            |t, l, j, i| {
                let u = grid.u()[[t, l, j, i]];
                let v = grid.v()[[t, l, j, i]];
                WindVector::new(u * rad.cos() + v * rad.sin(), -u * rad.sin() + v * rad.cos())
            },
        )
        .unwrap()
    }

    fn breezy_grid() -> WindGrid {
        WindGrid::from_fn(
            vec![34.0, 35.0, 36.0],
            vec![-107.0, -106.0, -105.0],
            vec![16_000.0, 18_000.0, 20_000.0],
            vec![0, 43_200],
            GridKind::Synthetic,
            |t, l, j, i| {
                WindVector::new(
                    3.0 + t as f64 + l as f64 * 0.5 + j as f64 * 0.1,
                    -2.0 + i as f64 * 0.3,
                )
            },
        )
        .unwrap()
    }

    #[test]
    fn identical_models_have_zero_differences() {
        let a = breezy_grid();
        let report = compare_models(&a, &a).unwrap();
        for lvl in &report.per_level {
            assert!(lvl.mean_angular_deg.abs() < 1e-9);
            assert!(lvl.std_angular_deg.abs() < 1e-9);
            assert!(lvl.mean_magnitude_ms.abs() < 1e-9);
        }
        assert!(report.overall_mean_angular_deg.abs() < 1e-9);
    }

    #[test]
    fn uniform_rotation_shows_up_as_pure_angular_shift() {
        let a = breezy_grid();
        let b = rotated(&a, 30.0);
        let report = compare_models(&a, &b).unwrap();
        for lvl in &report.per_level {
            assert!((lvl.mean_angular_deg - 30.0).abs() < 1e-6, "got {}", lvl.mean_angular_deg);
            assert!(lvl.std_angular_deg < 1e-6);
            assert!(lvl.mean_magnitude_ms.abs() < 1e-6);
        }
    }

    #[test]
    fn doubled_magnitudes_show_up_as_speed_difference() {
        let a = breezy_grid();
        let doubled = WindGrid::from_fn(
            a.latitudes().to_vec(),
            a.longitudes().to_vec(),
            match a.levels() {
                crate::grid::Levels::Altitude(x) => x.clone(),
                _ => unreachable!(),
            },
            a.times().to_vec(),
            a.kind(),
            |t, l, j, i| WindVector::new(a.u()[[t, l, j, i]] * 2.0, a.v()[[t, l, j, i]] * 2.0),
        )
        .unwrap();
        let report = compare_models(&a, &doubled).unwrap();
        // |s - 2s| = s: the magnitude difference equals the mean speed of a.
        let mut speeds = Vec::new();
        for t in 0..a.times().len() {
            for l in 0..a.level_count() {
                for j in 0..a.latitudes().len() {
                    for i in 0..a.longitudes().len() {
                        speeds.push(
                            WindVector::new(a.u()[[t, l, j, i]], a.v()[[t, l, j, i]]).speed_ms(),
                        );
                    }
                }
            }
        }
        let (mean_speed, _) = mean_and_std(&speeds);
        let total: f64 = report
            .per_level
            .iter()
            .map(|l| l.mean_magnitude_ms * l.samples as f64)
            .sum();
        let n: usize = report.per_level.iter().map(|l| l.samples).sum();
        assert!((total / n as f64 - mean_speed).abs() < 1e-9);
        assert!(report.overall_mean_angular_deg.abs() < 1e-9);
    }

    #[test]
    fn zero_score_table_on_identical_uniform_pair() {
        let g = WindGrid::uniform(
            vec![34.0, 35.0, 36.0],
            vec![-107.0, -106.0, -105.0],
            (0..8).map(|k| 15_500.0 + k as f64 * 1000.0).collect(),
            vec![0, 43_200],
            WindVector::new(6.0, 2.0),
            GridKind::ForecastLike,
        )
        .unwrap();
        let rows = zero_score_table(&[("aug".into(), &g, &g)], 40, 3, &ScoreConfig::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].forecast_like_zero_fraction, 1.0);
        assert_eq!(rows[0].synthetic_zero_fraction, 1.0);
        // Deterministic under the same seed.
        let again = zero_score_table(&[("aug".into(), &g, &g)], 40, 3, &ScoreConfig::default()).unwrap();
        assert_eq!(rows[0].forecast_like_zero_fraction, again[0].forecast_like_zero_fraction);
    }

    #[test]
    fn synthetic_with_added_opposition_scores_fewer_zeros() {
        // Forecast-like: one direction everywhere. Synthetic: same flow plus
        // interleaved opposing levels.
        let fl = WindGrid::uniform(
            vec![34.0, 35.0, 36.0],
            vec![-107.0, -106.0, -105.0],
            vec![16_000.0, 18_000.0, 20_000.0],
            vec![0, 43_200],
            WindVector::new(8.0, 0.0),
            GridKind::ForecastLike,
        )
        .unwrap();
        let synth = WindGrid::from_fn(
            vec![34.0, 35.0, 36.0],
            vec![-107.0, -106.0, -105.0],
            vec![16_000.0, 17_000.0, 18_000.0, 19_000.0, 20_000.0, 21_000.0],
            vec![0, 43_200],
            GridKind::Synthetic,
            |_, l, _, _| {
                if l % 2 == 0 {
                    WindVector::new(8.0, 0.0)
                } else {
                    WindVector::new(-8.0, 0.0)
                }
            },
        )
        .unwrap();
        let rows = zero_score_table(&[("x".into(), &fl, &synth)], 30, 11, &ScoreConfig::default()).unwrap();
        assert!(rows[0].synthetic_zero_fraction <= rows[0].forecast_like_zero_fraction);
        assert_eq!(rows[0].forecast_like_zero_fraction, 1.0);
        assert_eq!(rows[0].synthetic_zero_fraction, 0.0);
    }
}
