//! Declarative run configuration.
//!
//! A TOML document with one optional section per subsystem; every field has
//! a default matching the library's. Unknown keys are rejected. Values are
//! validated against the module invariants at load time, before any compute.
//! Precedence: CLI flags > config file > defaults.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stationkeep::dqn::DqnHyperparams;
use stationkeep::error::{Error, Result};
use stationkeep::geo::GeoCoord;
use stationkeep::grid::ArenaSpec;
use stationkeep::score::ScoreConfig;
use stationkeep::sim::{ActionModel, RateDist, RewardConfig, RewardVariant, SimConfig};
use stationkeep::synth::SynthesisConfig;
use std::path::Path;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub arena: ArenaSection,
    #[serde(default)]
    pub actions: ActionSection,
    #[serde(default)]
    pub reward: RewardSection,
    #[serde(default)]
    pub synthesis: SynthesisSection,
    #[serde(default)]
    pub score: ScoreSection,
    #[serde(default)]
    pub dqn: DqnSection,
    #[serde(default)]
    pub eval: EvalSection,
}

macro_rules! optional_section {
    ($name:ident { $($field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Debug, Clone, Default, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $(pub $field: Option<$ty>,)*
        }
    };
}

optional_section!(SimSection {
    step_dt_s: f64,
    episode_hours: f64,
    obs_levels: usize,
    init_altitude_floor_m: f64,
    init_altitude_ceiling_m: f64,
});

optional_section!(ArenaSection {
    center_lat: f64,
    center_lon: f64,
    extent_east_km: f64,
    extent_north_km: f64,
    floor_m: f64,
    ceiling_m: f64,
});

optional_section!(ActionSection {
    ascend_mean_ms: f64,
    ascend_sd_ms: f64,
    descend_mean_ms: f64,
    descend_sd_ms: f64,
    stay_mean_ms: f64,
    stay_sd_ms: f64,
});

optional_section!(RewardSection {
    variant: String,
    rho50_km: f64,
    rho25_km: f64,
    c_cliff: f64,
    tau_km: f64,
});

optional_section!(SynthesisSection {
    bin_height_m: f64,
    altitude_floor_m: f64,
    altitude_ceiling_m: f64,
    grid_resolution_deg: f64,
    smoothing_sigma_cells: f64,
    temporal_step_hours: f64,
});

optional_section!(ScoreSection {
    num_bins: usize,
    center_offset_deg: f64,
    altitude_floor_m: f64,
    altitude_ceiling_m: f64,
    timestamps: usize,
    calm_threshold_ms: f64,
    include_calm: bool,
});

optional_section!(DqnSection {
    gamma: f64,
    learning_rate: f64,
    batch_size: usize,
    target_update_interval: u64,
    epsilon_start: f64,
    epsilon_end: f64,
    epsilon_decay_fraction: f64,
    total_steps: u64,
    train_every: u64,
    warmup_steps: u64,
    buffer_capacity: usize,
    hidden_sizes: Vec<usize>,
    eval_interval: u64,
    eval_episodes: usize,
});

optional_section!(EvalSection {
    episodes_per_month: usize,
    fs_bin_width: f64,
    twr_bin_width: f64,
    min_count: u32,
    exclude_zero_fs: bool,
});

macro_rules! apply {
    ($target:expr, $section:expr, $($field:ident),* $(,)?) => {
        $(if let Some(v) = $section.$field.clone() { $target.$field = v; })*
    };
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                let cfg: RunConfig = toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }

    /// Validate by instantiating every module config.
    pub fn validate(&self) -> Result<()> {
        let center = self.arena_center().unwrap_or(GeoCoord::new(0.0, 0.0, 0.0));
        self.sim_config(center)?.validate()?;
        self.reward_config()?.validate()?;
        self.synthesis_config()?.validate()?;
        self.score_config()?.validate()?;
        self.dqn_hyperparams()?.validate()?;
        let e = self.eval_options();
        if e.0 == 0 {
            return Err(Error::Config("episodes_per_month must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding of the resolved document.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn arena_center(&self) -> Option<GeoCoord> {
        match (self.arena.center_lat, self.arena.center_lon) {
            (Some(lat), Some(lon)) => Some(GeoCoord::new(lat, lon, 0.0)),
            _ => None,
        }
    }

    pub fn sim_config(&self, center: GeoCoord) -> Result<SimConfig> {
        let mut arena = ArenaSpec::default_at(center);
        apply!(arena, self.arena, extent_east_km, extent_north_km, floor_m, ceiling_m);
        if arena.extent_east_km <= 0.0 || arena.extent_north_km <= 0.0 || arena.floor_m >= arena.ceiling_m {
            return Err(Error::Config("invalid arena geometry".into()));
        }

        let mut model = ActionModel::default();
        let a = &self.actions;
        model.ascend = RateDist {
            mean_ms: a.ascend_mean_ms.unwrap_or(model.ascend.mean_ms),
            sd_ms: a.ascend_sd_ms.unwrap_or(model.ascend.sd_ms),
        };
        model.descend = RateDist {
            mean_ms: a.descend_mean_ms.unwrap_or(model.descend.mean_ms),
            sd_ms: a.descend_sd_ms.unwrap_or(model.descend.sd_ms),
        };
        model.stay = RateDist {
            mean_ms: a.stay_mean_ms.unwrap_or(model.stay.mean_ms),
            sd_ms: a.stay_sd_ms.unwrap_or(model.stay.sd_ms),
        };

        let mut cfg = SimConfig::default_at(center);
        cfg.arena = arena;
        cfg.init_altitude_range_m = [
            self.sim.init_altitude_floor_m.unwrap_or(arena.floor_m),
            self.sim.init_altitude_ceiling_m.unwrap_or(arena.ceiling_m),
        ];
        cfg.action_model = model;
        apply!(cfg, self.sim, step_dt_s, episode_hours, obs_levels);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn reward_config(&self) -> Result<RewardConfig> {
        let mut cfg = RewardConfig::default();
        if let Some(v) = &self.reward.variant {
            cfg.variant = match v.as_str() {
                "loon" => RewardVariant::Loon,
                "piecewise" => RewardVariant::Piecewise,
                "euclidean" => RewardVariant::Euclidean,
                other => {
                    return Err(Error::Config(format!(
                        "unknown reward variant {other:?} (expected loon | piecewise | euclidean)"
                    )))
                }
            };
        }
        apply!(cfg, self.reward, rho50_km, rho25_km, c_cliff, tau_km);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn synthesis_config(&self) -> Result<SynthesisConfig> {
        let mut cfg = SynthesisConfig::default();
        apply!(
            cfg,
            self.synthesis,
            bin_height_m,
            grid_resolution_deg,
            smoothing_sigma_cells,
            temporal_step_hours
        );
        if let Some(f) = self.synthesis.altitude_floor_m {
            cfg.altitude_window_m[0] = f;
        }
        if let Some(c) = self.synthesis.altitude_ceiling_m {
            cfg.altitude_window_m[1] = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn score_config(&self) -> Result<ScoreConfig> {
        let mut cfg = ScoreConfig::default();
        apply!(
            cfg,
            self.score,
            num_bins,
            center_offset_deg,
            timestamps,
            calm_threshold_ms,
            include_calm
        );
        if let Some(f) = self.score.altitude_floor_m {
            cfg.altitude_window_m[0] = f;
        }
        if let Some(c) = self.score.altitude_ceiling_m {
            cfg.altitude_window_m[1] = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dqn_hyperparams(&self) -> Result<DqnHyperparams> {
        let mut hp = DqnHyperparams::default();
        apply!(
            hp,
            self.dqn,
            gamma,
            learning_rate,
            batch_size,
            target_update_interval,
            epsilon_start,
            epsilon_end,
            epsilon_decay_fraction,
            total_steps,
            train_every,
            warmup_steps,
            buffer_capacity,
            hidden_sizes,
            eval_interval,
            eval_episodes
        );
        hp.validate()?;
        Ok(hp)
    }

    /// `(episodes_per_month, histogram options)`.
    pub fn eval_options(&self) -> (usize, stationkeep::eval::HistogramOptions) {
        let mut opts = stationkeep::eval::HistogramOptions::default();
        apply!(opts, self.eval, fs_bin_width, twr_bin_width, min_count, exclude_zero_fs);
        (self.eval.episodes_per_month.unwrap_or(100), opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.dqn_hyperparams().unwrap().batch_size, 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let toml = "[dqn]\nlearning_rat = 0.1\n";
        assert!(toml::from_str::<RunConfig>(toml).is_err());
    }

    #[test]
    fn invalid_learning_rate_fails_validation() {
        let toml = "[dqn]\nlearning_rate = 2.0\n";
        let cfg: RunConfig = toml::from_str(toml).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a: RunConfig = toml::from_str("[dqn]\nlearning_rate = 3e-5\n").unwrap();
        let b: RunConfig = toml::from_str("[dqn]\nlearning_rate = 3e-5\n").unwrap();
        let c: RunConfig = toml::from_str("[dqn]\nlearning_rate = 4e-5\n").unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }
}
