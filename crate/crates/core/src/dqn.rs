//! Deep Q-Network training for station-keeping policies.
//!
//! A from-scratch DQN: epsilon-greedy exploration with linear decay, a
//! uniform-replay ring buffer, a periodically synced target network, Adam
//! updates on the [`crate::nn::Mlp`] Q-network, and a random hyperparameter
//! search over the ranges that matter (learning rate, exploration schedule).
//!
//! Training advances in whole episodes until the requested step budget is
//! reached. All state needed to continue (networks, optimizer moments,
//! replay contents, counters, RNG positions) lives in [`TrainState`], so a
//! run checkpointed at an episode boundary and resumed is bit-identical to an
//! uninterrupted one.

use crate::error::{Error, Result};
use crate::grid::WindGrid;
use crate::nn::{Adam, Mlp};
use crate::rng::{streams, RngSnapshot, SeededRng};
use crate::sim::{Action, EpisodeSetup, Observation, RewardConfig, SimConfig, Simulator, ACTIONS};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnHyperparams {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Environment steps between target-network syncs.
    pub target_update_interval: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of `total_steps` over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    pub total_steps: u64,
    /// Environment steps per gradient step.
    pub train_every: u64,
    /// Environment steps before learning starts.
    pub warmup_steps: u64,
    pub buffer_capacity: usize,
    pub hidden_sizes: Vec<usize>,
    /// Environment steps between evaluation points on the learning curve.
    pub eval_interval: u64,
    pub eval_episodes: usize,
}

impl Default for DqnHyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 3e-5,
            batch_size: 64,
            target_update_interval: 5_000,
            epsilon_start: 0.4,
            epsilon_end: 0.15,
            epsilon_decay_fraction: 1.0 / 3.0,
            total_steps: 200_000,
            train_every: 4,
            warmup_steps: 10_000,
            buffer_capacity: 500_000,
            hidden_sizes: vec![128, 128],
            eval_interval: 5_000,
            eval_episodes: 20,
        }
    }
}

impl DqnHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return Err(Error::Config("learning rate must lie in (0, 1)".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::Config("buffer capacity must hold at least one batch".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err(Error::Config("epsilon bounds must lie in [0, 1]".into()));
        }
        if self.epsilon_end > self.epsilon_start {
            return Err(Error::Config("epsilon_end must not exceed epsilon_start".into()));
        }
        if !(self.epsilon_decay_fraction > 0.0 && self.epsilon_decay_fraction <= 1.0) {
            return Err(Error::Config("epsilon decay fraction must lie in (0, 1]".into()));
        }
        if self.total_steps == 0 || self.train_every == 0 || self.target_update_interval == 0 || self.eval_interval == 0 {
            return Err(Error::Config("step intervals must be positive".into()));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden sizes must be non-empty and positive".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be at least 1".into()));
        }
        Ok(())
    }
}

/// Fixed, invertible affine map from raw observation fields to network
/// inputs. Saved inside every checkpoint so policies stay portable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub altitude_floor_m: f64,
    pub altitude_ceiling_m: f64,
    pub distance_scale_km: f64,
    pub bearing_scale_deg: f64,
    pub magnitude_scale_ms: f64,
}

impl Normalization {
    pub fn for_configs(sim: &SimConfig, reward: &RewardConfig) -> Self {
        Self {
            altitude_floor_m: sim.arena.floor_m,
            altitude_ceiling_m: sim.arena.ceiling_m,
            distance_scale_km: reward.rho50_km,
            bearing_scale_deg: 180.0,
            magnitude_scale_ms: 20.0,
        }
    }

    fn alt(&self, altitude_m: f64) -> f64 {
        (altitude_m - self.altitude_floor_m) / (self.altitude_ceiling_m - self.altitude_floor_m)
    }

    pub fn normalize(&self, obs: &Observation) -> Vec<f32> {
        let mut out = Vec::with_capacity(obs.flattened_len());
        out.push(self.alt(obs.altitude_m) as f32);
        out.push((obs.relative_distance_km / self.distance_scale_km) as f32);
        out.push((obs.relative_bearing_deg / self.bearing_scale_deg) as f32);
        for lvl in &obs.wind_column {
            out.push(self.alt(lvl.level_altitude_m) as f32);
            out.push((lvl.magnitude_ms / self.magnitude_scale_ms) as f32);
            out.push((lvl.relative_bearing_deg / self.bearing_scale_deg) as f32);
        }
        out
    }
}

/// One stored experience. Observations are kept in normalized form.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f32>,
    pub action: u8,
    pub reward: f32,
    pub next_state: Vec<f32>,
    pub done: bool,
}

/// Uniform-replay ring buffer. Once full, new experiences overwrite the
/// oldest ones.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            storage: Vec::new(),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.storage[idx]
    }

    /// Uniform sample of distinct storage indices.
    pub fn sample_indices(&self, batch: usize, rng: &mut SeededRng) -> Vec<usize> {
        assert!(batch <= self.storage.len(), "batch larger than buffer");
        let mut chosen = Vec::with_capacity(batch);
        let mut seen = HashSet::with_capacity(batch);
        while chosen.len() < batch {
            let idx = rng.random_range(0..self.storage.len());
            if seen.insert(idx) {
                chosen.push(idx);
            }
        }
        chosen
    }
}

/// Linear epsilon schedule: decays from start to end over
/// `decay_fraction * total_steps`, constant afterwards.
pub fn epsilon_at(step: u64, hp: &DqnHyperparams) -> f64 {
    let horizon = (hp.total_steps as f64 * hp.epsilon_decay_fraction).max(1.0);
    if step as f64 >= horizon {
        return hp.epsilon_end;
    }
    hp.epsilon_start + (hp.epsilon_end - hp.epsilon_start) * (step as f64 / horizon)
}

/// Epsilon-greedy action selection; greedy ties break toward the lowest
/// action index.
pub fn select_action(net: &Mlp, obs_norm: &[f32], epsilon: f64, rng: &mut SeededRng) -> Result<usize> {
    if epsilon > 0.0 && rng.random_range(0.0..1.0) < epsilon {
        return Ok(rng.random_range(0..net.output_len()));
    }
    let q = q_forward(net, obs_norm)?;
    Ok(argmax(&q))
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Q-values for a normalized observation.
pub fn q_forward(net: &Mlp, obs_norm: &[f32]) -> Result<Vec<f64>> {
    let input: Vec<f64> = obs_norm.iter().map(|&x| x as f64).collect();
    net.forward(&input)
}

/// One-step TD targets: `r` for terminal transitions, else
/// `r + gamma * max_a' Q_target(s', a')`.
pub fn td_targets(batch: &[&Transition], target_net: &Mlp, gamma: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("td_targets needs a non-empty batch".into()));
    }
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        let mut y = t.reward as f64;
        if !t.done {
            let q_next = q_forward(target_net, &t.next_state)?;
            let max_q = q_next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            y += gamma * max_q;
        }
        targets.push(y);
    }
    Ok(targets)
}

/// Mean-squared-error loss over the selected-action Q-values and its
/// gradient with respect to the network parameters.
pub fn batch_loss_and_grads(net: &Mlp, batch: &[&Transition], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    assert_eq!(batch.len(), targets.len());
    let mut loss = 0.0;
    let mut grads = vec![0.0f64; net.params.len()];
    let scale = 1.0 / batch.len() as f64;
    for (t, &y) in batch.iter().zip(targets) {
        let input: Vec<f64> = t.state.iter().map(|&x| x as f64).collect();
        let cache = net.forward_cached(&input)?;
        let q = cache.output()[t.action as usize];
        let err = q - y;
        loss += err * err * scale;
        let mut dout = vec![0.0f64; net.output_len()];
        dout[t.action as usize] = 2.0 * err * scale;
        let g = net.backward(&cache, &dout);
        for (acc, gi) in grads.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    Ok((loss, grads))
}

/// A truth/forecast grid pair the trainer can draw episodes from.
pub struct GridPair<'a> {
    pub label: String,
    pub truth: &'a WindGrid,
    pub forecast: &'a WindGrid,
}

/// Saved policy: everything needed to act greedily, plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub layer_sizes: Vec<usize>,
    pub params: Vec<f32>,
    pub hyperparams: DqnHyperparams,
    pub normalization: Normalization,
    pub seed: u64,
    /// Replay-stream position at save time.
    pub rng: RngSnapshot,
    pub env_steps: u64,
    pub grad_steps: u64,
    pub episodes: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointManifest {
    format: String,
    layer_sizes: Vec<usize>,
    hyperparams: DqnHyperparams,
    normalization: Normalization,
    seed: u64,
    rng: RngSnapshot,
    env_steps: u64,
    grad_steps: u64,
    episodes: u64,
    param_count: usize,
    weights_file: String,
}

const CHECKPOINT_FORMAT: &str = "dqn-checkpoint-v1";
const STATE_FORMAT: &str = "dqn-train-state-v1";

impl Checkpoint {
    pub fn network(&self) -> Result<Mlp> {
        Mlp::from_params(&self.layer_sizes, self.params.clone())
    }

    /// Greedy policy over raw observations.
    pub fn policy(&self) -> Result<impl Fn(&Observation) -> Action + '_> {
        let net = self.network()?;
        let norm = self.normalization.clone();
        Ok(move |obs: &Observation| {
            let q = q_forward(&net, &norm.normalize(obs)).expect("observation length matches checkpoint");
            Action::from_index(argmax(&q)).expect("3 actions")
        })
    }

    /// Write `<stem>.json` and `<stem>.bin`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let manifest = CheckpointManifest {
            format: CHECKPOINT_FORMAT.into(),
            layer_sizes: self.layer_sizes.clone(),
            hyperparams: self.hyperparams.clone(),
            normalization: self.normalization.clone(),
            seed: self.seed,
            rng: self.rng.clone(),
            env_steps: self.env_steps,
            grad_steps: self.grad_steps,
            episodes: self.episodes,
            param_count: self.params.len(),
            weights_file: file_name(stem, "bin"),
        };
        if let Some(dir) = stem.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(
            with_ext(stem, "json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        let mut payload = Vec::with_capacity(self.params.len() * 4);
        write_f32s(&mut payload, &self.params)?;
        std::fs::write(with_ext(stem, "bin"), payload)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let manifest_path = if stem.extension().map(|e| e == "json").unwrap_or(false) {
            stem.to_path_buf()
        } else {
            with_ext(stem, "json")
        };
        let manifest: CheckpointManifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
        if manifest.format != CHECKPOINT_FORMAT {
            return Err(Error::Data(format!("unsupported checkpoint format {:?}", manifest.format)));
        }
        let weights_path = manifest_path
            .parent()
            .map(|d| d.join(&manifest.weights_file))
            .unwrap_or_else(|| PathBuf::from(&manifest.weights_file));
        let bytes = std::fs::read(&weights_path)?;
        let params = read_f32s(&bytes, manifest.param_count)?;
        Ok(Self {
            layer_sizes: manifest.layer_sizes,
            params,
            hyperparams: manifest.hyperparams,
            normalization: manifest.normalization,
            seed: manifest.seed,
            rng: manifest.rng,
            env_steps: manifest.env_steps,
            grad_steps: manifest.grad_steps,
            episodes: manifest.episodes,
        })
    }
}

/// Complete training state; resuming from it is bit-identical to never
/// having stopped.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub hp: DqnHyperparams,
    pub normalization: Normalization,
    pub layer_sizes: Vec<usize>,
    pub online_params: Vec<f32>,
    pub target_params: Vec<f32>,
    pub adam: Adam,
    pub buffer: ReplayBuffer,
    pub env_steps: u64,
    pub grad_steps: u64,
    pub episodes: u64,
    pub eval_points: u64,
    pub replay_rng: RngSnapshot,
    pub seed: u64,
    pub last_loss: f64,
    /// Parameters at the best evaluation point so far (empty = none yet).
    pub best_params: Vec<f32>,
    pub best_eval_twr50: f64,
    pub best_step: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateManifest {
    format: String,
    hp: DqnHyperparams,
    normalization: Normalization,
    layer_sizes: Vec<usize>,
    adam_t: u64,
    buffer_capacity: usize,
    buffer_len: usize,
    buffer_next: usize,
    obs_len: usize,
    env_steps: u64,
    grad_steps: u64,
    episodes: u64,
    eval_points: u64,
    replay_rng: RngSnapshot,
    seed: u64,
    last_loss: f64,
    has_best: bool,
    best_eval_twr50: f64,
    best_step: u64,
    payload_file: String,
}

impl TrainState {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            layer_sizes: self.layer_sizes.clone(),
            params: self.online_params.clone(),
            hyperparams: self.hp.clone(),
            normalization: self.normalization.clone(),
            seed: self.seed,
            rng: self.replay_rng.clone(),
            env_steps: self.env_steps,
            grad_steps: self.grad_steps,
            episodes: self.episodes,
        }
    }

    /// Write `<stem>.state.json` and `<stem>.state.bin`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let obs_len = self.layer_sizes[0];
        let manifest = StateManifest {
            format: STATE_FORMAT.into(),
            hp: self.hp.clone(),
            normalization: self.normalization.clone(),
            layer_sizes: self.layer_sizes.clone(),
            adam_t: self.adam.t,
            buffer_capacity: self.buffer.capacity,
            buffer_len: self.buffer.len(),
            buffer_next: self.buffer.next,
            obs_len,
            env_steps: self.env_steps,
            grad_steps: self.grad_steps,
            episodes: self.episodes,
            eval_points: self.eval_points,
            replay_rng: self.replay_rng.clone(),
            seed: self.seed,
            last_loss: self.last_loss,
            has_best: !self.best_params.is_empty(),
            best_eval_twr50: self.best_eval_twr50,
            best_step: self.best_step,
            payload_file: file_name(stem, "state.bin"),
        };
        if let Some(dir) = stem.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(
            with_ext(stem, "state.json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;

        let mut payload: Vec<u8> = Vec::new();
        write_f32s(&mut payload, &self.online_params)?;
        write_f32s(&mut payload, &self.target_params)?;
        write_f32s(&mut payload, &self.adam.m)?;
        write_f32s(&mut payload, &self.adam.v)?;
        write_f32s(&mut payload, &self.best_params)?;
        for t in &self.buffer.storage {
            write_f32s(&mut payload, &t.state)?;
            write_f32s(&mut payload, &t.next_state)?;
            payload.write_all(&t.reward.to_le_bytes())?;
            payload.push(t.action);
            payload.push(t.done as u8);
        }
        std::fs::write(with_ext(stem, "state.bin"), payload)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let manifest_path = if stem.extension().map(|e| e == "json").unwrap_or(false) {
            stem.to_path_buf()
        } else {
            with_ext(stem, "state.json")
        };
        let manifest: StateManifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
        if manifest.format != STATE_FORMAT {
            return Err(Error::Data(format!("unsupported train state format {:?}", manifest.format)));
        }
        let payload_path = manifest_path
            .parent()
            .map(|d| d.join(&manifest.payload_file))
            .unwrap_or_else(|| PathBuf::from(&manifest.payload_file));
        let bytes = std::fs::read(&payload_path)?;
        let mut cursor: &[u8] = &bytes;

        let param_count = Mlp::param_count_for(&manifest.layer_sizes);
        let online_params = take_f32s(&mut cursor, param_count)?;
        let target_params = take_f32s(&mut cursor, param_count)?;
        let m = take_f32s(&mut cursor, param_count)?;
        let v = take_f32s(&mut cursor, param_count)?;
        let best_params = if manifest.has_best {
            take_f32s(&mut cursor, param_count)?
        } else {
            Vec::new()
        };
        let mut adam = Adam::new(param_count);
        adam.m = m;
        adam.v = v;
        adam.t = manifest.adam_t;

        let mut buffer = ReplayBuffer::new(manifest.buffer_capacity);
        for _ in 0..manifest.buffer_len {
            let state = take_f32s(&mut cursor, manifest.obs_len)?;
            let next_state = take_f32s(&mut cursor, manifest.obs_len)?;
            let mut r = [0u8; 4];
            cursor.read_exact(&mut r)?;
            let mut flags = [0u8; 2];
            cursor.read_exact(&mut flags)?;
            buffer.storage.push(Transition {
                state,
                action: flags[0],
                reward: f32::from_le_bytes(r),
                next_state,
                done: flags[1] != 0,
            });
        }
        buffer.next = manifest.buffer_next;

        Ok(Self {
            hp: manifest.hp,
            normalization: manifest.normalization,
            layer_sizes: manifest.layer_sizes,
            online_params,
            target_params,
            adam,
            buffer,
            env_steps: manifest.env_steps,
            grad_steps: manifest.grad_steps,
            episodes: manifest.episodes,
            eval_points: manifest.eval_points,
            replay_rng: manifest.replay_rng,
            seed: manifest.seed,
            last_loss: manifest.last_loss,
            best_params,
            best_eval_twr50: manifest.best_eval_twr50,
            best_step: manifest.best_step,
        })
    }
}

/// One learning-curve row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub mean_reward: f64,
    pub twr25: f64,
    pub twr50: f64,
    pub twr75: f64,
    pub epsilon: f64,
    pub loss: f64,
}

pub struct TrainRun {
    pub state: TrainState,
    pub curve: Vec<CurvePoint>,
}

impl TrainRun {
    pub fn checkpoint(&self) -> Checkpoint {
        self.state.checkpoint()
    }

    /// The policy at the best evaluation point, the artifact evaluation
    /// campaigns run against. Falls back to the final parameters when no
    /// evaluation ever ran.
    pub fn best_checkpoint(&self) -> Checkpoint {
        let mut ckpt = self.state.checkpoint();
        if !self.state.best_params.is_empty() {
            ckpt.params = self.state.best_params.clone();
            ckpt.env_steps = self.state.best_step;
        }
        ckpt
    }
}

/// Callbacks for persisting progress mid-run. The default sink does nothing.
pub trait TrainSink {
    fn on_eval(&mut self, _point: &CurvePoint) -> Result<()> {
        Ok(())
    }
    /// Called at episode boundaries roughly every `checkpoint_interval` env
    /// steps when one is configured.
    fn checkpoint_interval(&self) -> Option<u64> {
        None
    }
    fn on_checkpoint(&mut self, _state: &TrainState) -> Result<()> {
        Ok(())
    }
}

pub struct NullSink;

impl TrainSink for NullSink {}

pub struct Trainer<'a> {
    pub pairs: &'a [GridPair<'a>],
    pub sim_cfg: &'a SimConfig,
    pub reward_cfg: &'a RewardConfig,
    pub hp: DqnHyperparams,
    pub seed: u64,
}

impl<'a> Trainer<'a> {
    pub fn new(
        pairs: &'a [GridPair<'a>],
        sim_cfg: &'a SimConfig,
        reward_cfg: &'a RewardConfig,
        hp: DqnHyperparams,
        seed: u64,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput("trainer needs at least one grid pair".into()));
        }
        hp.validate()?;
        sim_cfg.validate()?;
        reward_cfg.validate()?;
        Ok(Self {
            pairs,
            sim_cfg,
            reward_cfg,
            hp,
            seed,
        })
    }

    fn observation_len(&self) -> usize {
        3 + 3 * self.sim_cfg.obs_levels
    }

    fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.observation_len()];
        sizes.extend_from_slice(&self.hp.hidden_sizes);
        sizes.push(ACTIONS.len());
        sizes
    }

    pub fn fresh_state(&self) -> Result<TrainState> {
        let layer_sizes = self.layer_sizes();
        let mut init_rng = SeededRng::new(self.seed, streams::WEIGHT_INIT);
        let online = Mlp::new_random(&layer_sizes, &mut init_rng)?;
        let target = online.clone();
        let param_count = online.params.len();
        Ok(TrainState {
            normalization: Normalization::for_configs(self.sim_cfg, self.reward_cfg),
            layer_sizes,
            online_params: online.params,
            target_params: target.params,
            adam: Adam::new(param_count),
            buffer: ReplayBuffer::new(self.hp.buffer_capacity),
            env_steps: 0,
            grad_steps: 0,
            episodes: 0,
            eval_points: 0,
            replay_rng: SeededRng::new(self.seed, streams::REPLAY_SAMPLING).snapshot(),
            seed: self.seed,
            last_loss: f64::NAN,
            best_params: Vec::new(),
            best_eval_twr50: f64::NAN,
            best_step: 0,
            hp: self.hp.clone(),
        })
    }

    pub fn train(&self, sink: &mut dyn TrainSink) -> Result<TrainRun> {
        self.train_until(None, sink)
    }

    /// Train from scratch, pausing at the first episode boundary past
    /// `stop_after` env steps (the epsilon schedule and all counters still
    /// follow `hp.total_steps`, so a paused run resumes bit-identically).
    pub fn train_until(&self, stop_after: Option<u64>, sink: &mut dyn TrainSink) -> Result<TrainRun> {
        let state = self.fresh_state()?;
        self.run(state, stop_after, sink)
    }

    /// Continue a checkpointed run until `hp.total_steps`.
    pub fn resume(&self, state: TrainState, sink: &mut dyn TrainSink) -> Result<TrainRun> {
        self.resume_until(state, None, sink)
    }

    pub fn resume_until(
        &self,
        state: TrainState,
        stop_after: Option<u64>,
        sink: &mut dyn TrainSink,
    ) -> Result<TrainRun> {
        if state.layer_sizes != self.layer_sizes() {
            return Err(Error::Config(format!(
                "resume state has layer sizes {:?}, trainer expects {:?}",
                state.layer_sizes,
                self.layer_sizes()
            )));
        }
        if state.seed != self.seed {
            return Err(Error::Config("resume state was trained with a different seed".into()));
        }
        if state.normalization != Normalization::for_configs(self.sim_cfg, self.reward_cfg) {
            return Err(Error::Config(
                "resume state normalization does not match the current arena/reward configs".into(),
            ));
        }
        self.run(state, stop_after, sink)
    }

    fn run(&self, mut st: TrainState, stop_after: Option<u64>, sink: &mut dyn TrainSink) -> Result<TrainRun> {
        st.hp = self.hp.clone();
        let stop = stop_after.unwrap_or(self.hp.total_steps).min(self.hp.total_steps);
        let mut online = Mlp::from_params(&st.layer_sizes, std::mem::take(&mut st.online_params))?;
        let mut target = Mlp::from_params(&st.layer_sizes, std::mem::take(&mut st.target_params))?;
        let mut replay_rng = SeededRng::restore(&st.replay_rng);
        let mut curve: Vec<CurvePoint> = Vec::new();
        let mut last_checkpoint_step = st.env_steps;

        while st.env_steps < stop {
            let episode_idx = st.episodes;
            let (pair_idx, setup) = self.episode_setup(episode_idx)?;
            let pair = &self.pairs[pair_idx];
            let mut sim = Simulator::new(pair.truth, pair.forecast, self.sim_cfg, self.reward_cfg)?;
            let (mut ep_state, first_obs) = sim.reset(&setup)?;
            let mut obs_norm = st.normalization.normalize(&first_obs);
            let mut explore_rng = SeededRng::new(self.seed, streams::EXPLORATION_BASE + episode_idx);

            while !ep_state.done {
                let epsilon = epsilon_at(st.env_steps, &self.hp);
                let action_idx = select_action(&online, &obs_norm, epsilon, &mut explore_rng)?;
                let action = Action::from_index(action_idx).expect("valid action index");
                let out = sim.step(&mut ep_state, action)?;
                let next_norm = st.normalization.normalize(&out.observation);
                st.buffer.push(Transition {
                    state: std::mem::replace(&mut obs_norm, next_norm.clone()),
                    action: action_idx as u8,
                    reward: out.reward as f32,
                    next_state: next_norm,
                    done: out.done,
                });
                st.env_steps += 1;

                if st.env_steps >= self.hp.warmup_steps
                    && st.env_steps % self.hp.train_every == 0
                    && st.buffer.len() >= self.hp.batch_size
                {
                    let indices = st.buffer.sample_indices(self.hp.batch_size, &mut replay_rng);
                    let batch: Vec<&Transition> = indices.iter().map(|&i| st.buffer.get(i)).collect();
                    let targets = td_targets(&batch, &target, self.hp.gamma)?;
                    let (loss, grads) = batch_loss_and_grads(&online, &batch, &targets)?;
                    if !loss.is_finite() {
                        return Err(Error::Training(format!(
                            "non-finite loss at env step {} (grad step {})",
                            st.env_steps, st.grad_steps
                        )));
                    }
                    st.adam.step(&mut online.params, &grads, self.hp.learning_rate);
                    st.grad_steps += 1;
                    st.last_loss = loss;
                }

                if st.env_steps % self.hp.target_update_interval == 0 {
                    target.params.copy_from_slice(&online.params);
                }

                if st.env_steps % self.hp.eval_interval == 0 {
                    let point = self.evaluate(&online, &st, st.eval_points)?;
                    st.eval_points += 1;
                    if st.best_eval_twr50.is_nan() || point.twr50 > st.best_eval_twr50 {
                        st.best_eval_twr50 = point.twr50;
                        st.best_step = point.step;
                        st.best_params = online.params.clone();
                    }
                    sink.on_eval(&point)?;
                    curve.push(point);
                }
            }
            st.episodes += 1;

            if let Some(interval) = sink.checkpoint_interval() {
                if st.env_steps - last_checkpoint_step >= interval && st.env_steps < self.hp.total_steps {
                    last_checkpoint_step = st.env_steps;
                    self.pack_state(&mut st, &online, &target, &replay_rng);
                    sink.on_checkpoint(&st)?;
                    st.online_params.clear();
                    st.target_params.clear();
                }
            }
        }

        // Force a final curve point when the budget completed off-interval.
        if st.env_steps >= self.hp.total_steps && st.env_steps % self.hp.eval_interval != 0 {
            let point = self.evaluate(&online, &st, st.eval_points)?;
            st.eval_points += 1;
            if st.best_eval_twr50.is_nan() || point.twr50 > st.best_eval_twr50 {
                st.best_eval_twr50 = point.twr50;
                st.best_step = point.step;
                st.best_params = online.params.clone();
            }
            sink.on_eval(&point)?;
            curve.push(point);
        }

        self.pack_state(&mut st, &online, &target, &replay_rng);
        Ok(TrainRun { state: st, curve })
    }

    fn pack_state(&self, st: &mut TrainState, online: &Mlp, target: &Mlp, replay_rng: &SeededRng) {
        st.online_params = online.params.clone();
        st.target_params = target.params.clone();
        st.replay_rng = replay_rng.snapshot();
    }

    /// Deterministic per-episode randomization: grid pair, station
    /// coordinate inside the coverable interior, episode start time.
    fn episode_setup(&self, episode_idx: u64) -> Result<(usize, EpisodeSetup)> {
        let mut rng = SeededRng::new(self.seed, streams::EPISODE_SETUP_BASE + episode_idx);
        let pair_idx = if self.pairs.len() > 1 {
            rng.random_range(0..self.pairs.len())
        } else {
            0
        };
        let pair = &self.pairs[pair_idx];
        let setup = sample_episode_setup(
            &mut rng,
            self.seed,
            streams::EPISODE_DYNAMICS_BASE + episode_idx,
            pair,
            self.sim_cfg,
        )?;
        Ok((pair_idx, setup))
    }

    fn evaluate(&self, online: &Mlp, st: &TrainState, eval_idx: u64) -> Result<CurvePoint> {
        let norm = &st.normalization;
        let greedy = |obs: &Observation| -> Action {
            let q = q_forward(online, &norm.normalize(obs)).expect("observation matches network");
            Action::from_index(argmax(&q)).expect("3 actions")
        };
        let mut rewards = Vec::with_capacity(self.hp.eval_episodes);
        let mut twr25 = 0.0;
        let mut twr50 = 0.0;
        let mut twr75 = 0.0;
        for e in 0..self.hp.eval_episodes as u64 {
            let stream = streams::EVAL_EPISODE_BASE + eval_idx * 2_000_000 + 2 * e;
            let mut rng = SeededRng::new(self.seed, stream);
            let pair_idx = if self.pairs.len() > 1 {
                rng.random_range(0..self.pairs.len())
            } else {
                0
            };
            let pair = &self.pairs[pair_idx];
            let setup = sample_episode_setup(&mut rng, self.seed, stream + 1, pair, self.sim_cfg)?;
            let mut sim = Simulator::new(pair.truth, pair.forecast, self.sim_cfg, self.reward_cfg)?;
            let report = sim.run_episode(&setup, greedy)?;
            rewards.push(report.total_reward);
            twr25 += report.twr.twr25;
            twr50 += report.twr.twr50;
            twr75 += report.twr.twr75;
        }
        let n = self.hp.eval_episodes as f64;
        Ok(CurvePoint {
            step: st.env_steps,
            mean_reward: rewards.iter().sum::<f64>() / n,
            twr25: twr25 / n,
            twr50: twr50 / n,
            twr75: twr75 / n,
            epsilon: epsilon_at(st.env_steps, &self.hp),
            loss: st.last_loss,
        })
    }
}

/// Draw a station coordinate and start time such that the arena and episode
/// window fit inside both grids; falls back to the coverage center when a
/// grid is only just large enough.
pub fn sample_episode_setup(
    rng: &mut SeededRng,
    seed: u64,
    dynamics_stream: u64,
    pair: &GridPair<'_>,
    sim_cfg: &SimConfig,
) -> Result<EpisodeSetup> {
    let truth_b = pair.truth.bounds();
    let fore_b = pair.forecast.bounds();
    let b = truth_b
        .intersect(&fore_b)
        .ok_or(Error::Coverage {
            axis: "latitude",
            detail: "truth and forecast grids do not overlap".into(),
        })?;

    // Margins so the full arena box fits inside the shared bounds.
    let half_north_deg = sim_cfg.arena.extent_north_km * 1000.0 / 2.0 / crate::geo::METERS_PER_DEG;
    let worst_coslat = b
        .min_lat
        .abs()
        .max(b.max_lat.abs())
        .to_radians()
        .cos()
        .max(1e-9);
    let half_east_deg = sim_cfg.arena.extent_east_km * 1000.0 / 2.0 / (crate::geo::METERS_PER_DEG * worst_coslat);

    let lat_lo = b.min_lat + half_north_deg;
    let lat_hi = b.max_lat - half_north_deg;
    let lon_lo = b.min_lon + half_east_deg;
    let lon_hi = b.max_lon - half_east_deg;
    let lat = if lat_lo < lat_hi {
        rng.random_range(lat_lo..=lat_hi)
    } else {
        (b.min_lat + b.max_lat) / 2.0
    };
    let lon = if lon_lo < lon_hi {
        rng.random_range(lon_lo..=lon_hi)
    } else {
        (b.min_lon + b.max_lon) / 2.0
    };

    let episode_s = (sim_cfg.episode_hours * 3600.0).round() as i64;
    let (tt0, tt1) = pair.truth.time_span();
    let (ft0, ft1) = pair.forecast.time_span();
    let t0 = tt0.max(ft0);
    let t1 = tt1.min(ft1);
    let latest_start = t1 - episode_s;
    let start_time_s = if latest_start > t0 {
        rng.random_range(t0..=latest_start)
    } else {
        t0
    };

    Ok(EpisodeSetup {
        seed,
        rng_stream: dynamics_stream,
        center: crate::geo::GeoCoord::new(lat, lon, 0.0),
        start_time_s,
    })
}

/// Hyperparameter ranges for random search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Log-uniform bounds on the learning rate.
    pub learning_rate: [f64; 2],
    pub epsilon_start: [f64; 2],
    pub epsilon_end: [f64; 2],
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: [1e-5, 1e-4],
            epsilon_start: [0.25, 0.5],
            epsilon_end: [0.10, 0.20],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub hyperparams: DqnHyperparams,
    /// Final evaluation mean TWR50; NaN when the trial failed.
    pub score_twr50: f64,
    pub error: Option<String>,
}

/// Random hyperparameter search: learning rate log-uniform, exploration
/// endpoints uniform, short training runs, ranked by final mean TWR50
/// (failed trials sink to the end).
#[allow(clippy::too_many_arguments)]
pub fn hyperparameter_search(
    pairs: &[GridPair<'_>],
    sim_cfg: &SimConfig,
    reward_cfg: &RewardConfig,
    base_hp: &DqnHyperparams,
    space: &SearchSpace,
    budget: usize,
    seed: u64,
    persist_dir: Option<&Path>,
) -> Result<Vec<TrialResult>> {
    if budget == 0 {
        return Err(Error::Config("search budget must be at least 1".into()));
    }
    if let Some(dir) = persist_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut draw_rng = SeededRng::new(seed, streams::HYPERPARAM_SEARCH);
    let mut results = Vec::with_capacity(budget);
    for trial in 0..budget {
        let lr = {
            let lo = space.learning_rate[0].ln();
            let hi = space.learning_rate[1].ln();
            draw_rng.random_range(lo..=hi).exp()
        };
        let eps_start = draw_rng.random_range(space.epsilon_start[0]..=space.epsilon_start[1]);
        let eps_end = draw_rng.random_range(space.epsilon_end[0]..=space.epsilon_end[1]);
        let hp = DqnHyperparams {
            learning_rate: lr,
            epsilon_start: eps_start,
            epsilon_end: eps_end.min(eps_start),
            ..base_hp.clone()
        };
        let trial_seed = seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(trial as u64 + 1));
        let outcome = Trainer::new(pairs, sim_cfg, reward_cfg, hp.clone(), trial_seed)
            .and_then(|t| t.train(&mut NullSink));
        let result = match outcome {
            Ok(run) => TrialResult {
                trial,
                hyperparams: hp,
                score_twr50: run.curve.last().map(|p| p.twr50).unwrap_or(f64::NAN),
                error: None,
            },
            Err(e) => TrialResult {
                trial,
                hyperparams: hp,
                score_twr50: f64::NAN,
                error: Some(e.to_string()),
            },
        };
        if let Some(dir) = persist_dir {
            std::fs::write(
                dir.join(format!("trial_{trial:03}.json")),
                serde_json::to_string_pretty(&result)? + "\n",
            )?;
        }
        results.push(result);
    }
    results.sort_by(|a, b| {
        match (a.score_twr50.is_nan(), b.score_twr50.is_nan()) {
            (true, true) => a.trial.cmp(&b.trial),
            (true, false) => std::cmp::Ordering::Greater,
            (false, true) => std::cmp::Ordering::Less,
            (false, false) => b
                .score_twr50
                .partial_cmp(&a.score_twr50)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.trial.cmp(&b.trial)),
        }
    });
    Ok(results)
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut p = stem.as_os_str().to_os_string();
    p.push(".");
    p.push(ext);
    PathBuf::from(p)
}

fn file_name(stem: &Path, ext: &str) -> String {
    format!(
        "{}.{ext}",
        stem.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    )
}

fn write_f32s<W: Write>(out: &mut W, values: &[f32]) -> Result<()> {
    for &x in values {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_f32s(bytes: &[u8], count: usize) -> Result<Vec<f32>> {
    if bytes.len() != count * 4 {
        return Err(Error::Data(format!(
            "weight payload holds {} bytes, expected {}",
            bytes.len(),
            count * 4
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn take_f32s(cursor: &mut &[u8], count: usize) -> Result<Vec<f32>> {
    if cursor.len() < count * 4 {
        return Err(Error::Data("train state payload truncated".into()));
    }
    let (head, rest) = cursor.split_at(count * 4);
    *cursor = rest;
    Ok(head
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
