//! Batches of independent scenario runs: randomized Monte Carlo configs and
//! a runner that fans them out over a thread pool when the `parallel`
//! feature is on.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::cueing::RollSource;
use crate::error::Result;
use crate::run::{simulate_discarding, RunMetrics};
use crate::scheduler::{FrameTimeModel, PipelineMode};

/// Derives `count` randomized variants of `base`. Each variant gets its own
/// run seed; the whole batch is a pure function of `batch_seed`.
pub fn randomized_configs(base: &RunConfig, count: usize, batch_seed: u64) -> Vec<RunConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(batch_seed);
    (0..count)
        .map(|_| {
            let mut c = base.clone();
            c.run.seed = rng.gen();
            c.scheduler.display_hz = *[72.0, 90.0, 120.0, 140.0].choose(&mut rng).unwrap();
            c.scheduler.mode = *[PipelineMode::PhysicsOnUpdate, PipelineMode::DefaultFixedStep]
                .choose(&mut rng)
                .unwrap();
            c.scheduler.frame_time = FrameTimeModel::Jittered {
                compute_ms: rng.gen_range(4.0..14.0),
                jitter_ms: rng.gen_range(0.0..4.0),
            };
            // Gains deliberately reach past the envelope so clamping and
            // rate limiting get exercised.
            c.cueing.pitch_gain = rng.gen_range(0.5..4.0);
            c.cueing.roll_gain = rng.gen_range(0.5..4.0);
            c.cueing.yaw_gain = rng.gen_range(0.5..3.0);
            c.cueing.roll_source = *[RollSource::Centripetal, RollSource::Differenced, RollSource::Sum]
                .choose(&mut rng)
                .unwrap();
            c.platform.dead_zone_deg = rng.gen_range(0.0..0.5);
            c.platform.smoothing_time_constant_s = *[0.0, 0.02, 0.05].choose(&mut rng).unwrap();
            c.driver.target_speed_mps = rng.gen_range(15.0..28.0);
            c
        })
        .collect()
}

/// Runs every config, preserving order.
#[cfg(feature = "parallel")]
pub fn run_many(configs: &[RunConfig]) -> Vec<Result<RunMetrics>> {
    use rayon::prelude::*;
    configs
        .par_iter()
        .map(|c| simulate_discarding(c).map(|o| o.metrics))
        .collect()
}

/// Runs every config, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn run_many(configs: &[RunConfig]) -> Vec<Result<RunMetrics>> {
    run_many_sequential(configs)
}

/// Single-threaded reference runner.
pub fn run_many_sequential(configs: &[RunConfig]) -> Vec<Result<RunMetrics>> {
    configs
        .iter()
        .map(|c| simulate_discarding(c).map(|o| o.metrics))
        .collect()
}
