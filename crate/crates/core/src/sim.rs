//! Discrete-time balloon episode simulator.
//!
//! Each 60 s step the agent picks ascend/stay/descend; the realized vertical
//! rate is drawn from the action's normal distribution and the balloon is
//! advected horizontally by the *truth* grid wind sampled at its pre-step
//! position ("match the wind instantaneously"). Observations are built solely
//! from the *forecast* grid and the balloon's own state; the truth winds
//! stay hidden from the agent. Episodes never terminate early: the balloon
//! may leave and re-enter the region any number of times.

use crate::error::{Error, Result};
use crate::geo::{bearing_between, displace, fold_angle_deg, haversine_distance_km, GeoCoord};
use crate::grid::{ArenaSpec, WindGrid};
use crate::rng::SeededRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Ascend = 0,
    Stay = 1,
    Descend = 2,
}

pub const ACTIONS: [Action; 3] = [Action::Ascend, Action::Stay, Action::Descend];

impl Action {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        ACTIONS.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Action::Ascend => "ascend",
            Action::Stay => "stay",
            Action::Descend => "descend",
        }
    }
}

/// Vertical-rate distribution for one action, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateDist {
    pub mean_ms: f64,
    pub sd_ms: f64,
}

/// Per-action vertical-rate distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionModel {
    pub ascend: RateDist,
    pub descend: RateDist,
    pub stay: RateDist,
}

impl Default for ActionModel {
    fn default() -> Self {
        Self {
            ascend: RateDist { mean_ms: 1.80, sd_ms: 0.14 },
            descend: RateDist { mean_ms: -2.80, sd_ms: 0.30 },
            stay: RateDist { mean_ms: 0.00, sd_ms: 1.25 },
        }
    }
}

impl ActionModel {
    pub fn rate_dist(&self, action: Action) -> RateDist {
        match action {
            Action::Ascend => self.ascend,
            Action::Stay => self.stay,
            Action::Descend => self.descend,
        }
    }

    /// Deterministic variant with every standard deviation forced to zero.
    pub fn deterministic(&self) -> Self {
        Self {
            ascend: RateDist { sd_ms: 0.0, ..self.ascend },
            descend: RateDist { sd_ms: 0.0, ..self.descend },
            stay: RateDist { sd_ms: 0.0, ..self.stay },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub step_dt_s: f64,
    pub episode_hours: f64,
    pub arena: ArenaSpec,
    /// Episodes start at a uniform random altitude inside this range.
    pub init_altitude_range_m: [f64; 2],
    pub action_model: ActionModel,
    /// Number of wind-column levels in the observation.
    pub obs_levels: usize,
}

impl SimConfig {
    pub fn default_at(center: GeoCoord) -> Self {
        let arena = ArenaSpec::default_at(center);
        Self {
            step_dt_s: 60.0,
            episode_hours: 20.0,
            init_altitude_range_m: [arena.floor_m, arena.ceiling_m],
            arena,
            action_model: ActionModel::default(),
            obs_levels: 7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.step_dt_s <= 0.0 {
            return Err(Error::Config("step_dt must be positive".into()));
        }
        let steps = self.episode_hours * 3600.0 / self.step_dt_s;
        if (steps - steps.round()).abs() > 1e-9 || steps < 1.0 {
            return Err(Error::Config(format!(
                "episode length {} h is not a whole number of {} s steps",
                self.episode_hours, self.step_dt_s
            )));
        }
        let [lo, hi] = self.init_altitude_range_m;
        if lo > hi || lo < self.arena.floor_m || hi > self.arena.ceiling_m {
            return Err(Error::Config("init altitude range must sit inside the arena".into()));
        }
        if self.obs_levels == 0 {
            return Err(Error::Config("obs_levels must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.episode_hours * 3600.0 / self.step_dt_s).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardVariant {
    Loon,
    Piecewise,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub variant: RewardVariant,
    pub rho50_km: f64,
    pub rho25_km: f64,
    pub c_cliff: f64,
    pub tau_km: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            variant: RewardVariant::Piecewise,
            rho50_km: 50.0,
            rho25_km: 25.0,
            c_cliff: 0.4,
            tau_km: 100.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rho25_km >= self.rho50_km {
            return Err(Error::Config("rho25 must be smaller than rho50".into()));
        }
        if !(self.c_cliff > 0.0 && self.c_cliff <= 1.0) {
            return Err(Error::Config("c_cliff must lie in (0, 1]".into()));
        }
        if self.tau_km <= 0.0 {
            return Err(Error::Config("tau must be positive".into()));
        }
        Ok(())
    }
}

/// Distance-based step reward.
pub fn reward(delta_km: f64, cfg: &RewardConfig) -> f64 {
    let cliff = |d: f64| cfg.c_cliff * 2f64.powf(-(d - cfg.rho50_km) / cfg.tau_km);
    match cfg.variant {
        RewardVariant::Loon => {
            if delta_km < cfg.rho50_km {
                1.0
            } else {
                cliff(delta_km)
            }
        }
        RewardVariant::Piecewise => {
            if delta_km <= cfg.rho25_km {
                2.0
            } else if delta_km <= cfg.rho50_km {
                1.0
            } else {
                cliff(delta_km)
            }
        }
        RewardVariant::Euclidean => {
            if delta_km < cfg.rho50_km {
                delta_km.abs()
            } else {
                cliff(delta_km)
            }
        }
    }
}

/// One wind-column entry of the observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindLevelObs {
    pub level_altitude_m: f64,
    pub magnitude_ms: f64,
    /// Angle between the wind direction at this level and the direction from
    /// the balloon to the station, folded to `[0, 180]`.
    pub relative_bearing_deg: f64,
}

/// The agent-visible slice of the simulator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub altitude_m: f64,
    pub relative_distance_km: f64,
    /// Angle between the balloon's drift direction and the direction to the
    /// station, folded to `[0, 180]`; 180 means drifting straight away.
    pub relative_bearing_deg: f64,
    pub wind_column: Vec<WindLevelObs>,
}

impl Observation {
    pub fn flattened_len(&self) -> usize {
        3 + 3 * self.wind_column.len()
    }

    /// Flatten to `[altitude, distance, bearing, (alt, mag, bearing)...]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flattened_len());
        out.push(self.altitude_m);
        out.push(self.relative_distance_km);
        out.push(self.relative_bearing_deg);
        for lvl in &self.wind_column {
            out.push(lvl.level_altitude_m);
            out.push(lvl.magnitude_ms);
            out.push(lvl.relative_bearing_deg);
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time_s: i64,
    pub position: GeoCoord,
    pub action: Action,
    pub reward: f64,
    pub distance_km: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub position: GeoCoord,
    pub step_index: usize,
    pub cumulative_reward: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    /// Bearing of the last horizontal displacement, if any.
    pub last_motion_bearing_deg: Option<f64>,
    pub start_time_s: i64,
    pub done: bool,
}

impl EpisodeState {
    pub fn current_time_s(&self, dt_s: f64) -> i64 {
        self.start_time_s + (self.step_index as f64 * dt_s).round() as i64
    }
}

/// Per-episode initialization.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeSetup {
    pub seed: u64,
    pub rng_stream: u64,
    /// Station coordinate; the arena is re-centered here.
    pub center: GeoCoord,
    pub start_time_s: i64,
}

/// Time-within-region fractions over one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwrReport {
    pub twr25: f64,
    pub twr50: f64,
    pub twr75: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeReport {
    pub twr: TwrReport,
    pub trajectory: Vec<TrajectoryPoint>,
    pub total_reward: f64,
}

pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
}

/// Episode simulator bound to a truth/forecast grid pair.
pub struct Simulator<'a> {
    pub truth: &'a WindGrid,
    pub forecast: &'a WindGrid,
    pub cfg: &'a SimConfig,
    pub reward_cfg: &'a RewardConfig,
    arena: ArenaSpec,
    rng: SeededRng,
}

impl<'a> Simulator<'a> {
    pub fn new(
        truth: &'a WindGrid,
        forecast: &'a WindGrid,
        cfg: &'a SimConfig,
        reward_cfg: &'a RewardConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        reward_cfg.validate()?;
        Ok(Self {
            truth,
            forecast,
            cfg,
            reward_cfg,
            arena: cfg.arena,
            rng: SeededRng::new(0, 0),
        })
    }

    pub fn arena(&self) -> &ArenaSpec {
        &self.arena
    }

    /// Place the balloon at the station coordinate at a random altitude and
    /// build the first observation. Both grids must cover the arena and the
    /// episode window.
    pub fn reset(&mut self, setup: &EpisodeSetup) -> Result<(EpisodeState, Observation)> {
        self.arena = self.cfg.arena.with_center(setup.center);
        let t_end = setup.start_time_s + (self.cfg.episode_hours * 3600.0).round() as i64;
        let bounds = self.arena.bounds();
        self.truth.covers(&bounds, setup.start_time_s, t_end)?;
        self.forecast.covers(&bounds, setup.start_time_s, t_end)?;

        self.rng = SeededRng::new(setup.seed, setup.rng_stream);
        let [lo, hi] = self.cfg.init_altitude_range_m;
        let altitude = if hi > lo {
            use rand::Rng;
            self.rng.random_range(lo..=hi)
        } else {
            lo
        };
        let state = EpisodeState {
            position: setup.center.with_altitude(altitude),
            step_index: 0,
            cumulative_reward: 0.0,
            trajectory: Vec::with_capacity(self.cfg.steps()),
            last_motion_bearing_deg: None,
            start_time_s: setup.start_time_s,
            done: false,
        };
        let obs = self.observe(&state)?;
        Ok((state, obs))
    }

    /// Advance one step. The wind driving the displacement is sampled from
    /// the truth grid at the pre-step position and step start time.
    pub fn step(&mut self, state: &mut EpisodeState, action: Action) -> Result<StepOutcome> {
        if state.done {
            return Err(Error::State("episode is already done".into()));
        }
        let t = state.current_time_s(self.cfg.step_dt_s);
        let wind = self.truth.sample(&state.position, t)?;

        let dist = self.cfg.action_model.rate_dist(action);
        let rate = if dist.sd_ms == 0.0 {
            dist.mean_ms
        } else {
            Normal::new(dist.mean_ms, dist.sd_ms)
                .expect("valid normal parameters")
                .sample(&mut self.rng)
        };
        let new_altitude = self
            .arena
            .clamp_altitude(state.position.altitude_m + rate * self.cfg.step_dt_s);

        let old_position = state.position;
        let mut new_position = displace(&old_position, &wind, self.cfg.step_dt_s);
        new_position.altitude_m = new_altitude;

        let motion = bearing_between(&old_position, &new_position);
        if motion.defined {
            state.last_motion_bearing_deg = Some(motion.degrees);
        }

        let distance_km = haversine_distance_km(&new_position, &self.arena.center);
        let r = reward(distance_km, self.reward_cfg);

        state.position = new_position;
        state.step_index += 1;
        state.cumulative_reward += r;
        state.done = state.step_index >= self.cfg.steps();
        state.trajectory.push(TrajectoryPoint {
            time_s: state.current_time_s(self.cfg.step_dt_s),
            position: new_position,
            action,
            reward: r,
            distance_km,
        });

        let observation = self.observe(state)?;
        Ok(StepOutcome {
            observation,
            reward: r,
            done: state.done,
        })
    }

    /// Build the observation from the forecast grid and the episode state.
    /// The truth grid is deliberately not visible here.
    pub fn observe(&self, state: &EpisodeState) -> Result<Observation> {
        build_observation(
            self.forecast,
            &self.arena,
            self.cfg,
            state,
            state.current_time_s(self.cfg.step_dt_s),
        )
    }

    /// Run a policy through a full episode.
    pub fn run_episode(
        &mut self,
        setup: &EpisodeSetup,
        mut policy: impl FnMut(&Observation) -> Action,
    ) -> Result<EpisodeReport> {
        let (mut state, mut obs) = self.reset(setup)?;
        loop {
            let action = policy(&obs);
            let out = self.step(&mut state, action)?;
            obs = out.observation;
            if out.done {
                break;
            }
        }
        Ok(EpisodeReport {
            twr: twr_from_trajectory(&state.trajectory),
            total_reward: state.cumulative_reward,
            trajectory: state.trajectory,
        })
    }
}

/// TWR fractions: share of steps spent within 25/50/75 km.
pub fn twr_from_trajectory(trajectory: &[TrajectoryPoint]) -> TwrReport {
    let n = trajectory.len().max(1) as f64;
    let count = |radius: f64| trajectory.iter().filter(|p| p.distance_km <= radius).count() as f64 / n;
    TwrReport {
        twr25: count(25.0),
        twr50: count(50.0),
        twr75: count(75.0),
    }
}

/// Observation builder shared by the simulator and evaluation tooling.
///
/// The wind column uses the forecast grid's own levels when their count
/// matches `cfg.obs_levels` (reporting each level's local altitude), and
/// falls back to `obs_levels` fixed altitudes evenly spanning the arena's
/// vertical range otherwise.
pub fn build_observation(
    forecast: &WindGrid,
    arena: &ArenaSpec,
    cfg: &SimConfig,
    state: &EpisodeState,
    when: i64,
) -> Result<Observation> {
    let position = &state.position;
    let relative_distance_km = haversine_distance_km(position, &arena.center);
    let to_station = bearing_between(position, &arena.center);

    let relative_bearing_deg = match (state.last_motion_bearing_deg, to_station.defined) {
        (Some(motion), true) => fold_angle_deg(motion - to_station.degrees),
        _ => 0.0,
    };

    let n = cfg.obs_levels;
    let mut wind_column = Vec::with_capacity(n);
    if forecast.level_count() == n {
        for level in 0..n {
            let (wind, altitude) = forecast.sample_level(level, position, when)?;
            wind_column.push(level_obs(wind, altitude, &to_station));
        }
    } else {
        for k in 0..n {
            let frac = if n == 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
            let altitude = arena.floor_m + frac * (arena.ceiling_m - arena.floor_m);
            let wind = forecast.sample(&position.with_altitude(altitude), when)?;
            wind_column.push(level_obs(wind, altitude, &to_station));
        }
    }

    Ok(Observation {
        altitude_m: position.altitude_m,
        relative_distance_km,
        relative_bearing_deg,
        wind_column,
    })
}

fn level_obs(wind: crate::geo::WindVector, altitude: f64, to_station: &crate::geo::Bearing) -> WindLevelObs {
    let relative = if to_station.defined {
        fold_angle_deg(wind.bearing_deg() - to_station.degrees)
    } else {
        0.0
    };
    WindLevelObs {
        level_altitude_m: altitude,
        magnitude_ms: wind.speed_ms(),
        relative_bearing_deg: relative,
    }
}
