/*!
Station-keeping toolkit for altitude-controlled high-altitude balloons.

The library covers the full experiment pipeline:

- [`geo`]: coordinates, great-circle math, and wind-driven advection.
- [`grid`]: the shared 4D wind-field representation and its sampling.
- [`grid_io`]: the on-disk forecast interchange format (JSON header +
  flat f32 payload).
- [`synth`]: synthetic wind-field generation from radiosonde soundings
  (vertical binning, nearest-neighbor rasterization, Gaussian smoothing,
  temporal densification).
- [`score`]: the opposing-winds Forecast Score classifier.
- [`sim`]: the discrete-time balloon episode simulator with stochastic
  altitude actions and time-within-region metrics.
- [`nn`] / [`dqn`]: a from-scratch MLP Q-network, replay buffer, target
  network, training loop, checkpointing, and random hyperparameter search.
- [`eval`]: evaluation campaigns, TWR-vs-score joint statistics, and
  forecast-model comparison reports.

All randomness flows through [`rng::SeededRng`] substreams so that every
pipeline stage is reproducible bit-for-bit from a single seed.
*/

pub mod dqn;
pub mod error;
pub mod eval;
pub mod geo;
pub mod grid;
pub mod grid_io;
pub mod nn;
pub mod rng;
pub mod score;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
