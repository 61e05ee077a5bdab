//! Subcommand implementations.

use crate::config::RunConfig;
use crate::report::{format_time_utc, write_csv, write_json, Meta};
use serde::Serialize;
use stationkeep::dqn::{
    Checkpoint, CurvePoint, GridPair, Trainer, TrainSink, TrainState,
};
use stationkeep::error::{Error, Result};
use stationkeep::eval::{
    compare_models, joint_histogram, run_campaign_with_offset, summarize, CampaignConfig,
    EpisodeRecord, MonthPair,
};
use stationkeep::geo::GeoCoord;
use stationkeep::grid::{LatLonBounds, WindGrid};
use stationkeep::grid_io::{read_grid, write_grid, PayloadEncoding};
use stationkeep::score::{
    evaluation_times, forecast_score, mean_and_std, opposing_score, score_distribution,
    wind_column, BinHistogram,
};
use stationkeep::synth::{
    densify_time, parse_sounding, parse_sounding_filename, synthesize_forecast, RadiosondeSounding,
    SynthWarning,
};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub struct Ctx {
    pub config: RunConfig,
    pub seed: u64,
    pub meta: Meta,
    pub out_dir: PathBuf,
}

impl Ctx {
    pub fn new(config: RunConfig, seed: u64, out_dir: PathBuf) -> Self {
        let meta = Meta::new(config.digest(), seed);
        Self {
            config,
            seed,
            meta,
            out_dir,
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn load_grid(path: &Path) -> Result<WindGrid> {
    read_grid(path).map_err(|e| match e {
        Error::Io(io) => Error::Data(format!("{}: {io}", path.display())),
        other => other,
    })
}

/// Template station coordinate for commands where the true center is drawn
/// per episode: the middle of the grid's coverage.
fn bounds_center(grid: &WindGrid) -> GeoCoord {
    let b = grid.bounds();
    GeoCoord::new(
        (b.min_lat + b.max_lat) / 2.0,
        (b.min_lon + b.max_lon) / 2.0,
        0.0,
    )
}

// ---------------------------------------------------------------- synth ----

pub fn cmd_synth(ctx: &Ctx, soundings_dir: &Path, area: Option<LatLonBounds>, name: &str) -> Result<()> {
    let synth_cfg = ctx.config.synthesis_config()?;

    let mut files: Vec<PathBuf> = fs::read_dir(soundings_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "csv").unwrap_or(false))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no soundings found in {}",
            soundings_dir.display()
        )));
    }

    let mut soundings: Vec<RadiosondeSounding> = Vec::with_capacity(files.len());
    for path in &files {
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        let (station, launch) = match parse_sounding_filename(&name) {
            Some((s, t)) => (Some(s), Some(t)),
            None => (None, None),
        };
        let text = fs::read_to_string(path)?;
        let sounding = parse_sounding(&text, station.as_deref(), launch).map_err(|e| match e {
            Error::Parse { line, detail } => Error::Parse {
                line,
                detail: format!("{}: {detail}", path.display()),
            },
            other => other,
        })?;
        println!(
            "ingested {}: station {} at ({:.2}, {:.2}), launch {}, {} samples",
            name,
            sounding.station_id,
            sounding.location.latitude_deg,
            sounding.location.longitude_deg,
            format_time_utc(sounding.launch_time),
            sounding.samples.len()
        );
        soundings.push(sounding);
    }

    let area = area.unwrap_or_else(|| {
        let lats: Vec<f64> = soundings.iter().map(|s| s.location.latitude_deg).collect();
        let lons: Vec<f64> = soundings.iter().map(|s| s.location.longitude_deg).collect();
        let pad = 1.0;
        LatLonBounds {
            min_lat: lats.iter().cloned().fold(f64::INFINITY, f64::min) - pad,
            max_lat: lats.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + pad,
            min_lon: lons.iter().cloned().fold(f64::INFINITY, f64::min) - pad,
            max_lon: lons.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + pad,
        }
    });

    let (grid, warnings) = synthesize_forecast(&soundings, &synth_cfg, &area)?;
    for w in &warnings {
        match w {
            SynthWarning::StationRejected {
                launch_time,
                station,
                detail,
            } => eprintln!(
                "warning: station {station} rejected at {}: {detail}",
                format_time_utc(*launch_time)
            ),
            SynthWarning::LaunchTimeDropped { launch_time } => {
                eprintln!("warning: launch time {} dropped", format_time_utc(*launch_time))
            }
        }
    }

    let native_path = ctx.out(&format!("{name}_native.json"));
    write_grid(&grid, &native_path, PayloadEncoding::Binary)?;
    println!(
        "wrote {} ({} levels, {} frames, {}x{} cells)",
        native_path.display(),
        grid.level_count(),
        grid.times().len(),
        grid.latitudes().len(),
        grid.longitudes().len()
    );

    let mut outputs = vec![native_path.clone()];
    if grid.times().len() >= 2 {
        let dense = densify_time(&grid, synth_cfg.temporal_step_hours)?;
        let dense_path = ctx.out(&format!("{name}_dense.json"));
        write_grid(&dense, &dense_path, PayloadEncoding::Binary)?;
        println!("wrote {} ({} frames)", dense_path.display(), dense.times().len());
        outputs.push(dense_path);
    }

    #[derive(Serialize)]
    struct SynthReport<'a> {
        meta: &'a Meta,
        stations: Vec<String>,
        launch_times_utc: Vec<String>,
        levels: usize,
        warnings: Vec<String>,
        outputs: Vec<String>,
    }
    let mut stations: Vec<String> = soundings.iter().map(|s| s.station_id.clone()).collect();
    stations.sort();
    stations.dedup();
    let mut launches: Vec<i64> = soundings.iter().map(|s| s.launch_time).collect();
    launches.sort();
    launches.dedup();
    write_json(
        &ctx.out(&format!("{name}_report.json")),
        &SynthReport {
            meta: &ctx.meta,
            stations,
            launch_times_utc: launches.iter().map(|&t| format_time_utc(t)).collect(),
            levels: grid.level_count(),
            warnings: warnings.iter().map(|w| format!("{w:?}")).collect(),
            outputs: outputs
                .iter()
                .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().to_string()))
                .collect(),
        },
    )
}

// ---------------------------------------------------------------- score ----

pub fn cmd_score(
    ctx: &Ctx,
    grid_paths: &[PathBuf],
    coordinate: Option<(f64, f64)>,
    random: Option<usize>,
    filter_zero: bool,
) -> Result<()> {
    let score_cfg = ctx.config.score_config()?;
    let grids: Vec<WindGrid> = grid_paths.iter().map(|p| load_grid(p)).collect::<Result<_>>()?;
    let grid_refs: Vec<&WindGrid> = grids.iter().collect();

    match (coordinate, random) {
        (Some((lat, lon)), None) => {
            let coord = GeoCoord::new(lat, lon, score_cfg.altitude_window_m[0]);
            #[derive(Serialize)]
            struct CoordScore {
                grid: String,
                coordinate: GeoCoord,
                forecast_score: f64,
                per_timestamp: Vec<f64>,
                times_utc: Vec<String>,
                histogram: BinHistogram,
            }
            #[derive(Serialize)]
            struct Out<'a> {
                meta: &'a Meta,
                results: Vec<CoordScore>,
            }
            let mut results = Vec::new();
            for (g, path) in grid_refs.iter().zip(grid_paths) {
                let (t0, t1) = g.time_span();
                let times = evaluation_times(t0, t1, score_cfg.timestamps);
                let fs = forecast_score(g, &coord, &times, &score_cfg)?;
                // Aggregate histogram over the evaluated timestamps.
                let mut counts = vec![0u32; score_cfg.num_bins];
                let mut levels = 0u32;
                for &t in &times {
                    let column = wind_column(g, &coord, t, &score_cfg)?;
                    let s = opposing_score(&column, &score_cfg)?;
                    for (acc, c) in counts.iter_mut().zip(&s.histogram.counts) {
                        *acc += c;
                    }
                    levels += s.histogram.levels_counted;
                }
                println!("{}: FS = {:.4}", path.display(), fs.value);
                results.push(CoordScore {
                    grid: path.display().to_string(),
                    coordinate: coord,
                    forecast_score: fs.value,
                    per_timestamp: fs.per_timestamp,
                    times_utc: times.iter().map(|&t| format_time_utc(t)).collect(),
                    histogram: BinHistogram {
                        counts,
                        levels_counted: levels,
                    },
                });
            }
            write_json(&ctx.out("score.json"), &Out { meta: &ctx.meta, results })
        }
        (None, Some(samples)) => {
            let (records, dists) =
                score_distribution(&grid_refs, samples, ctx.seed, &score_cfg, filter_zero)?;
            #[derive(Serialize)]
            struct GridSummary {
                grid: String,
                samples: usize,
                zero_fraction: f64,
                mean: f64,
                std: f64,
                returned_scores: usize,
            }
            #[derive(Serialize)]
            struct Out<'a> {
                meta: &'a Meta,
                paired: bool,
                grids: Vec<GridSummary>,
                mean_difference: Option<f64>,
            }
            let mut summaries = Vec::new();
            for ((path, dist), _) in grid_paths.iter().zip(&dists).zip(0..) {
                let (mean, std) = mean_and_std(&dist.scores);
                println!(
                    "{}: zero fraction {:.4}, mean {:.4}, std {:.4}",
                    path.display(),
                    dist.zero_fraction,
                    mean,
                    std
                );
                summaries.push(GridSummary {
                    grid: path.display().to_string(),
                    samples,
                    zero_fraction: dist.zero_fraction,
                    mean,
                    std,
                    returned_scores: dist.scores.len(),
                });
            }
            let mean_difference = (grids.len() == 2).then(|| {
                let diffs: Vec<f64> = records.iter().map(|r| r.scores[1] - r.scores[0]).collect();
                mean_and_std(&diffs).0
            });
            write_json(
                &ctx.out("score_distribution.json"),
                &Out {
                    meta: &ctx.meta,
                    paired: grids.len() > 1,
                    grids: summaries,
                    mean_difference,
                },
            )?;
            if grids.len() == 2 {
                // Zero-score fractions for both models over the same
                // coordinates, one row per grid pair.
                let stem = |p: &PathBuf| {
                    p.file_stem()
                        .map(|s| s.to_string_lossy().to_string())
                        .unwrap_or_default()
                };
                write_csv(
                    &ctx.out("zero_score.csv"),
                    &ctx.meta,
                    "pair,samples,zero_fraction_a,zero_fraction_b",
                    &[format!(
                        "{}:{},{samples},{},{}",
                        stem(&grid_paths[0]),
                        stem(&grid_paths[1]),
                        dists[0].zero_fraction,
                        dists[1].zero_fraction
                    )],
                )?;
            }
            // One score per line, paired across columns.
            let header: Vec<String> = (0..grids.len()).map(|k| format!("fs_grid{k}")).collect();
            let rows: Vec<String> = records
                .iter()
                .map(|r| {
                    r.scores
                        .iter()
                        .map(|s| s.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect();
            write_csv(
                &ctx.out("score_samples.csv"),
                &ctx.meta,
                &format!("lat,lon,{}", header.join(",")),
                &records
                    .iter()
                    .zip(&rows)
                    .map(|(r, row)| {
                        format!("{},{},{row}", r.coordinate.latitude_deg, r.coordinate.longitude_deg)
                    })
                    .collect::<Vec<_>>(),
            )
        }
        _ => Err(Error::Config(
            "score needs exactly one of --coordinate or --random".into(),
        )),
    }
}

// ---------------------------------------------------------------- train ----

struct FileSink {
    curve_path: PathBuf,
    state_stem: PathBuf,
    checkpoint_every: Option<u64>,
    wrote_header: bool,
    meta_header: String,
}

impl FileSink {
    fn new(curve_path: PathBuf, state_stem: PathBuf, checkpoint_every: Option<u64>, meta: &Meta, append: bool) -> Result<Self> {
        if append && !curve_path.exists() {
            return Err(Error::Config(format!(
                "--resume expects an existing learning curve at {}",
                curve_path.display()
            )));
        }
        Ok(Self {
            curve_path,
            state_stem,
            checkpoint_every,
            wrote_header: append,
            meta_header: meta.csv_header(),
        })
    }
}

impl TrainSink for FileSink {
    fn on_eval(&mut self, point: &CurvePoint) -> Result<()> {
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.curve_path)?;
        if !self.wrote_header {
            file.write_all(self.meta_header.as_bytes())?;
            writeln!(file, "step,mean_reward,twr25,twr50,twr75,epsilon,loss")?;
            self.wrote_header = true;
        }
        writeln!(
            file,
            "{},{},{},{},{},{},{}",
            point.step, point.mean_reward, point.twr25, point.twr50, point.twr75, point.epsilon, point.loss
        )?;
        Ok(())
    }

    fn checkpoint_interval(&self) -> Option<u64> {
        self.checkpoint_every
    }

    fn on_checkpoint(&mut self, state: &TrainState) -> Result<()> {
        state.checkpoint().save(&self.state_stem)?;
        state.save(&self.state_stem)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_train(
    ctx: &Ctx,
    truth_paths: &[PathBuf],
    forecast_paths: &[PathBuf],
    steps: Option<u64>,
    stop_after: Option<u64>,
    resume: Option<&Path>,
    checkpoint_every: Option<u64>,
) -> Result<()> {
    if truth_paths.len() != forecast_paths.len() || truth_paths.is_empty() {
        return Err(Error::Config(
            "train needs matching --truth/--forecast grid lists (at least one pair)".into(),
        ));
    }
    let mut hp = ctx.config.dqn_hyperparams()?;
    if let Some(s) = steps {
        hp.total_steps = s;
    }
    hp.validate()?;

    let truths: Vec<WindGrid> = truth_paths.iter().map(|p| load_grid(p)).collect::<Result<_>>()?;
    let forecasts: Vec<WindGrid> = forecast_paths.iter().map(|p| load_grid(p)).collect::<Result<_>>()?;
    let pairs: Vec<GridPair> = truths
        .iter()
        .zip(&forecasts)
        .zip(truth_paths)
        .map(|((t, f), p)| GridPair {
            label: p
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_default(),
            truth: t,
            forecast: f,
        })
        .collect();

    let center = ctx.config.arena_center().unwrap_or_else(|| bounds_center(&truths[0]));
    let sim_cfg = ctx.config.sim_config(center)?;
    let reward_cfg = ctx.config.reward_config()?;

    let stem = ctx.out("checkpoint");
    let curve_path = ctx.out("learning_curve.csv");
    let default_ckpt_every = hp.eval_interval.saturating_mul(4).max(1);
    let mut sink = FileSink::new(
        curve_path.clone(),
        stem.clone(),
        Some(checkpoint_every.unwrap_or(default_ckpt_every)),
        &ctx.meta,
        resume.is_some(),
    )?;

    fs::create_dir_all(&ctx.out_dir)?;
    let trainer = Trainer::new(&pairs, &sim_cfg, &reward_cfg, hp, ctx.seed)?;
    let run = match resume {
        None => trainer.train_until(stop_after, &mut sink)?,
        Some(state_stem) => {
            let state = TrainState::load(state_stem)?;
            trainer.resume_until(state, stop_after, &mut sink)?
        }
    };

    run.checkpoint().save(&stem)?;
    run.state.save(&stem)?;
    // The policy at the best evaluation point, kept separately: evaluation
    // campaigns run against the best-performing model.
    run.best_checkpoint().save(&ctx.out("checkpoint_best"))?;

    #[derive(Serialize)]
    struct TrainReport<'a> {
        meta: &'a Meta,
        env_steps: u64,
        grad_steps: u64,
        episodes: u64,
        final_eval: Option<&'a CurvePoint>,
        checkpoint: String,
        learning_curve: String,
    }
    write_json(
        &ctx.out("train_report.json"),
        &TrainReport {
            meta: &ctx.meta,
            env_steps: run.state.env_steps,
            grad_steps: run.state.grad_steps,
            episodes: run.state.episodes,
            final_eval: run.curve.last(),
            checkpoint: "checkpoint".into(),
            learning_curve: "learning_curve.csv".into(),
        },
    )?;
    println!(
        "trained {} env steps ({} gradient steps, {} episodes); checkpoint at {}",
        run.state.env_steps,
        run.state.grad_steps,
        run.state.episodes,
        stem.display()
    );
    if let Some(p) = run.curve.last() {
        println!(
            "final eval: mean reward {:.3}, TWR50 {:.3}, epsilon {:.3}",
            p.mean_reward, p.twr50, p.epsilon
        );
    }
    Ok(())
}

// ----------------------------------------------------------------- eval ----

#[derive(Debug, Clone)]
pub struct MonthArg {
    pub label: String,
    pub truth: PathBuf,
    pub forecast: PathBuf,
}

pub fn parse_month_arg(s: &str) -> std::result::Result<MonthArg, String> {
    let (label, rest) = s
        .split_once('=')
        .ok_or_else(|| format!("expected LABEL=TRUTH:FORECAST, got {s:?}"))?;
    let (truth, forecast) = rest
        .split_once(':')
        .ok_or_else(|| format!("expected LABEL=TRUTH:FORECAST, got {s:?}"))?;
    Ok(MonthArg {
        label: label.to_string(),
        truth: PathBuf::from(truth),
        forecast: PathBuf::from(forecast),
    })
}

pub fn cmd_eval(
    ctx: &Ctx,
    checkpoint_stem: &Path,
    months: &[MonthArg],
    episodes: Option<usize>,
    workers: usize,
    export_trajectories: bool,
) -> Result<()> {
    if months.is_empty() {
        return Err(Error::Config("eval needs at least one --month".into()));
    }
    let checkpoint = Checkpoint::load(checkpoint_stem)?;
    let score_cfg = ctx.config.score_config()?;
    let (default_episodes, hist_opts) = ctx.config.eval_options();

    let mut loaded: Vec<(String, WindGrid, WindGrid)> = Vec::with_capacity(months.len());
    for m in months {
        loaded.push((m.label.clone(), load_grid(&m.truth)?, load_grid(&m.forecast)?));
    }
    let month_pairs: Vec<MonthPair> = loaded
        .iter()
        .map(|(label, t, f)| MonthPair {
            label: label.clone(),
            truth: t,
            forecast: f,
        })
        .collect();

    let center = ctx.config.arena_center().unwrap_or_else(|| bounds_center(&loaded[0].1));
    let sim_cfg = ctx.config.sim_config(center)?;
    let reward_cfg = ctx.config.reward_config()?;
    let campaign = CampaignConfig {
        episodes_per_month: episodes.unwrap_or(default_episodes),
        seed: ctx.seed,
        score: score_cfg,
        workers,
        keep_trajectories: export_trajectories,
    };

    // Months run one at a time and the per-episode table is rewritten after
    // each, so an interruption keeps every completed month's results.
    let episode_row = |r: &EpisodeRecord| {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            r.month,
            r.episode,
            r.center.latitude_deg,
            r.center.longitude_deg,
            format_time_utc(r.start_time_s),
            r.twr.twr25,
            r.twr.twr50,
            r.twr.twr75,
            r.forecast_score,
            r.total_reward
        )
    };
    const EPISODE_HEADER: &str =
        "month,episode,center_lat,center_lon,start_time_utc,twr25,twr50,twr75,forecast_score,total_reward";
    let mut records: Vec<EpisodeRecord> = Vec::new();
    for (idx, month) in month_pairs.iter().enumerate() {
        // Episode RNG streams are addressed by the global episode index, so
        // per-month runs reproduce the all-at-once campaign exactly.
        let one = std::slice::from_ref(month);
        let month_records = run_campaign_with_offset(
            &checkpoint,
            one,
            &sim_cfg,
            &reward_cfg,
            &campaign,
            idx * campaign.episodes_per_month,
        )?;
        records.extend(month_records);
        let rows: Vec<String> = records.iter().map(episode_row).collect();
        write_csv(&ctx.out("episodes.csv"), &ctx.meta, EPISODE_HEADER, &rows)?;
    }

    // Per-month summary table.
    let summary = summarize(&records);
    let rows: Vec<String> = summary
        .iter()
        .map(|s| {
            format!(
                "{},{},{},{},{},{}",
                s.month, s.episodes, s.mean_twr50, s.sd_twr50, s.mean_fs, s.sd_fs
            )
        })
        .collect();
    write_csv(
        &ctx.out("summary.csv"),
        &ctx.meta,
        "month,episodes,mean_twr50,sd_twr50,mean_fs,sd_fs",
        &rows,
    )?;
    for s in &summary {
        println!(
            "{}: mean TWR50 {:.3} (sd {:.3}), mean FS {:.3} (sd {:.3}) over {} episodes",
            s.month, s.mean_twr50, s.sd_twr50, s.mean_fs, s.sd_fs, s.episodes
        );
    }

    // Joint TWR50-vs-FS heatmaps, one per month plus the pooled one.
    let write_heatmap = |name: String, recs: &[EpisodeRecord]| -> Result<()> {
        let h = joint_histogram(recs, &hist_opts)?;
        let path = ctx.out(&name);
        let mut text = ctx.meta.csv_header();
        text.push_str(&h.to_csv());
        fs::write(&path, text)?;
        Ok(())
    };
    write_heatmap("heatmap_all.csv".into(), &records)?;
    for (label, _, _) in &loaded {
        let recs: Vec<EpisodeRecord> = records.iter().filter(|r| &r.month == label).cloned().collect();
        write_heatmap(format!("heatmap_{label}.csv"), &recs)?;
    }

    if export_trajectories {
        for r in &records {
            let Some(traj) = &r.trajectory else { continue };
            let rows: Vec<String> = traj
                .iter()
                .map(|p| {
                    format!(
                        "{},{},{},{},{},{},{}",
                        format_time_utc(p.time_s),
                        p.position.latitude_deg,
                        p.position.longitude_deg,
                        p.position.altitude_m,
                        p.action.label(),
                        p.reward,
                        p.distance_km
                    )
                })
                .collect();
            write_csv(
                &ctx.out(&format!("trajectories/{}_{:04}.csv", r.month, r.episode)),
                &ctx.meta,
                "time_utc,lat,lon,alt_m,action,reward,distance_km",
                &rows,
            )?;
        }
    }

    // Per-episode summaries as JSON (without trajectories, which get their
    // own CSV files above).
    #[derive(Serialize)]
    struct EpisodesOut<'a> {
        meta: &'a Meta,
        episodes: Vec<EpisodeRecord>,
    }
    let slim: Vec<EpisodeRecord> = records
        .iter()
        .map(|r| EpisodeRecord {
            trajectory: None,
            ..r.clone()
        })
        .collect();
    write_json(
        &ctx.out("episodes.json"),
        &EpisodesOut {
            meta: &ctx.meta,
            episodes: slim,
        },
    )?;

    #[derive(Serialize)]
    struct EvalReport<'a> {
        meta: &'a Meta,
        months: Vec<stationkeep::eval::MonthSummary>,
        episodes_per_month: usize,
        records: usize,
    }
    write_json(
        &ctx.out("eval_report.json"),
        &EvalReport {
            meta: &ctx.meta,
            months: summary,
            episodes_per_month: campaign.episodes_per_month,
            records: records.len(),
        },
    )
}

// -------------------------------------------------------------- compare ----

pub fn cmd_compare(ctx: &Ctx, grid_a: &Path, grid_b: &Path) -> Result<()> {
    let a = load_grid(grid_a)?;
    let b = load_grid(grid_b)?;
    let report = compare_models(&a, &b)?;
    let mut rows: Vec<String> = report
        .per_level
        .iter()
        .map(|l| {
            format!(
                "{},{},{},{},{},{},{}",
                l.level,
                l.reference_altitude_m,
                l.samples,
                l.mean_angular_deg,
                l.std_angular_deg,
                l.mean_magnitude_ms,
                l.std_magnitude_ms
            )
        })
        .collect();
    rows.push(format!(
        "overall,,,{},{},,",
        report.overall_mean_angular_deg, report.overall_std_angular_deg
    ));
    write_csv(
        &ctx.out("model_diff.csv"),
        &ctx.meta,
        "level,reference_altitude_m,samples,mean_angular_deg,std_angular_deg,mean_magnitude_ms,std_magnitude_ms",
        &rows,
    )?;
    println!(
        "angular difference: mean {:.2} deg, std {:.2} deg over {} levels",
        report.overall_mean_angular_deg,
        report.overall_std_angular_deg,
        report.per_level.len()
    );

    #[derive(Serialize)]
    struct CompareReport<'a> {
        meta: &'a Meta,
        grid_a: String,
        grid_b: String,
        report: stationkeep::eval::ModelDiffReport,
    }
    write_json(
        &ctx.out("compare_report.json"),
        &CompareReport {
            meta: &ctx.meta,
            grid_a: grid_a.display().to_string(),
            grid_b: grid_b.display().to_string(),
            report,
        },
    )
}
