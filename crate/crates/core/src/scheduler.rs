//! Discrete-event emulation of the engine frame loop.
//!
//! Two pipelines are modelled:
//!
//! * [`PipelineMode::DefaultFixedStep`]: physics runs inside the fixed-step
//!   phase, driven by an accumulator of elapsed frame time, so a frame may
//!   run zero, one or several physics steps. The rendered image shows the
//!   latest completed physics step, while the platform command is issued
//!   from the per-frame update and is stamped with the update time. The two
//!   differ by the accumulator remainder.
//! * [`PipelineMode::PhysicsOnUpdate`]: automatic physics is disabled and a
//!   single step of the actual frame duration runs at the start of every
//!   update, so the image and the platform command come from the same
//!   state.
//!
//! With vsync, frame starts and presents sit on the display refresh grid.
//! With `frame_buffers = B`, a frame started at tick `n` that finishes
//! within one period is presented at tick `n + B`, and the next frame starts
//! at tick `n + 1` while this one is queued. A frame whose compute time
//! spills past one period is presented late and flagged as dropped.
//! Without vsync, frames run back to back and present as soon as compute
//! finishes.
//!
//! Nothing here sleeps or reads a clock; all times are simulated seconds.

use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Mismatch below this many milliseconds counts as zero.
pub const MISMATCH_EPS_MS: f64 = 1e-6;

/// Relative slack when deciding whether the accumulator holds another whole
/// step. Without it, phase-locked configurations lose steps to rounding.
const STEP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    DefaultFixedStep,
    #[default]
    PhysicsOnUpdate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerConfig {
    pub display_hz: f64,
    pub fixed_step: f64,
    pub mode: PipelineMode,
    pub frame_buffers: u32,
    pub vsync: bool,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            display_hz: 90.0,
            fixed_step: 0.02,
            mode: PipelineMode::PhysicsOnUpdate,
            frame_buffers: 1,
            vsync: true,
        }
    }
}

impl SchedulerConfig {
    pub fn period(&self) -> f64 {
        1.0 / self.display_hz
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("display_hz", self.display_hz)?;
        require_positive("fixed_step", self.fixed_step)?;
        if self.vsync && self.frame_buffers == 0 {
            return Err(Error::invalid("frame_buffers", "vsync needs at least one frame buffer"));
        }
        Ok(())
    }
}

/// Per-frame compute durations, seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTimeTrace {
    durations: Vec<f64>,
}

impl FrameTimeTrace {
    pub fn new(durations: Vec<f64>) -> Result<Self> {
        if let Some(bad) = durations.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::invalid(
                "frame time trace",
                format!("durations must be > 0, got {bad}"),
            ));
        }
        Ok(Self { durations })
    }

    pub fn constant(frames: usize, duration: f64) -> Result<Self> {
        Self::new(vec![duration; frames])
    }

    /// Uniform jitter of `±jitter` around `base`, floored at 1 µs.
    pub fn jittered(frames: usize, base: f64, jitter: f64, seed: u64) -> Result<Self> {
        require_positive("frame time base", base)?;
        if !(jitter.is_finite() && jitter >= 0.0) {
            return Err(Error::invalid(
                "frame time jitter",
                format!("must be >= 0, got {jitter}"),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let durations = (0..frames)
            .map(|_| {
                let u: f64 = rng.gen_range(-1.0..=1.0);
                (base + jitter * u).max(1e-6)
            })
            .collect();
        Self::new(durations)
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }
}

/// How a run's frame-time trace is synthesized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrameTimeModel {
    Constant {
        compute_ms: f64,
    },
    Jittered {
        compute_ms: f64,
        jitter_ms: f64,
    },
    /// Explicit durations, repeated cyclically.
    List {
        compute_ms: Vec<f64>,
    },
}

impl Default for FrameTimeModel {
    fn default() -> Self {
        FrameTimeModel::Jittered {
            compute_ms: 8.0,
            jitter_ms: 2.0,
        }
    }
}

impl FrameTimeModel {
    pub fn generate(&self, frames: usize, seed: u64) -> Result<FrameTimeTrace> {
        match self {
            FrameTimeModel::Constant { compute_ms } => FrameTimeTrace::constant(frames, compute_ms / 1e3),
            FrameTimeModel::Jittered { compute_ms, jitter_ms } => {
                FrameTimeTrace::jittered(frames, compute_ms / 1e3, jitter_ms / 1e3, seed)
            }
            FrameTimeModel::List { compute_ms } => {
                if compute_ms.is_empty() {
                    return Err(Error::invalid("frame time list", "must not be empty"));
                }
                FrameTimeTrace::new(compute_ms.iter().cycle().take(frames).map(|ms| ms / 1e3).collect())
            }
        }
    }
}

/// Provenance of one presented frame. All times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameRecord {
    pub frame_index: u64,
    pub frame_start: f64,
    /// Time elapsed since the previous frame start.
    pub frame_dt: f64,
    pub input_sample_time: f64,
    pub physics_state_time_for_render: f64,
    pub physics_state_time_for_platform: f64,
    pub present_time: f64,
    pub physics_steps: u32,
    pub dropped: bool,
}

impl FrameRecord {
    pub fn input_latency(&self) -> f64 {
        self.present_time - self.input_sample_time
    }

    pub fn provenance_mismatch(&self) -> f64 {
        (self.physics_state_time_for_render - self.physics_state_time_for_platform).abs()
    }

    /// Age of the rendered physics state when it reaches the display.
    pub fn state_age(&self) -> f64 {
        self.present_time - self.physics_state_time_for_render
    }
}

/// Information available at the start of a frame, before physics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStart {
    pub frame_index: u64,
    pub time: f64,
    pub frame_dt: f64,
}

/// Callbacks the pipeline drives. `physics_step` advances the whole
/// simulated chain (vehicle, cueing, platform) by `dt`, ending at
/// `state_time`.
pub trait PipelineHooks {
    /// Input sampling happens here. Returning `Break` ends the run before
    /// this frame does any work.
    fn begin_frame(&mut self, _frame: &FrameStart) -> Result<ControlFlow<()>> {
        Ok(ControlFlow::Continue(()))
    }

    fn physics_step(&mut self, dt: f64, state_time: f64) -> Result<()>;

    /// Called once the frame's provenance is known. Returning `Break` ends
    /// the run after this frame.
    fn end_frame(&mut self, _record: &FrameRecord) -> Result<ControlFlow<()>> {
        Ok(ControlFlow::Continue(()))
    }
}

/// Hooks that do nothing, for timing-only runs.
#[derive(Debug, Default, Clone, Copy)]
pub struct TimingOnly;

impl PipelineHooks for TimingOnly {
    fn physics_step(&mut self, _dt: f64, _state_time: f64) -> Result<()> {
        Ok(())
    }
}

/// Accumulator update for one frame. Returns the number of fixed steps to
/// run and the remaining accumulator; zero steps is the skipped-frame case.
pub fn fixed_update_steps(accumulator: f64, frame_dt: f64, fixed_step: f64) -> (u32, f64) {
    let total = accumulator + frame_dt;
    let n = (total / fixed_step + STEP_EPS).floor().max(0.0);
    (n as u32, total - n * fixed_step)
}

/// Runs the frame loop over `trace`, one frame per entry.
pub fn run_pipeline<H: PipelineHooks + ?Sized>(
    cfg: &SchedulerConfig,
    trace: &FrameTimeTrace,
    hooks: &mut H,
) -> Result<Vec<FrameRecord>> {
    cfg.validate()?;
    let period = cfg.period();
    let mut records = Vec::with_capacity(trace.len());

    // Frame 0 starts one refresh after t = 0, as if a frame had just been shown.
    let mut tick: u64 = 1;
    let mut free_start = period;
    let mut prev_start = 0.0;
    let mut accumulator = 0.0;
    let mut fixed_steps_done: u64 = 0;

    for (index, &compute) in trace.durations().iter().enumerate() {
        let start = if cfg.vsync { tick as f64 * period } else { free_start };
        let frame_dt = start - prev_start;
        let frame_index = index as u64;
        let flow = hooks.begin_frame(&FrameStart {
            frame_index,
            time: start,
            frame_dt,
        })?;
        if flow.is_break() {
            break;
        }

        let (steps, render_time, platform_time) = match cfg.mode {
            PipelineMode::PhysicsOnUpdate => {
                hooks.physics_step(frame_dt, start)?;
                (1, start, start)
            }
            PipelineMode::DefaultFixedStep => {
                let (n, acc) = fixed_update_steps(accumulator, frame_dt, cfg.fixed_step);
                accumulator = acc;
                for _ in 0..n {
                    fixed_steps_done += 1;
                    hooks.physics_step(cfg.fixed_step, fixed_steps_done as f64 * cfg.fixed_step)?;
                }
                let latest = fixed_steps_done as f64 * cfg.fixed_step;
                (n, latest, start)
            }
        };

        let (present, dropped) = if cfg.vsync {
            let busy_ticks = ((compute / period) - STEP_EPS).ceil().max(1.0) as u64;
            let present_tick = tick + busy_ticks + u64::from(cfg.frame_buffers) - 1;
            tick += busy_ticks;
            (present_tick as f64 * period, busy_ticks > 1)
        } else {
            free_start = start + compute;
            (start + compute, false)
        };

        let record = FrameRecord {
            frame_index,
            frame_start: start,
            frame_dt,
            input_sample_time: start,
            physics_state_time_for_render: render_time,
            physics_state_time_for_platform: platform_time,
            present_time: present,
            physics_steps: steps,
            dropped,
        };
        prev_start = start;
        records.push(record);
        if hooks.end_frame(&record)?.is_break() {
            break;
        }
    }
    Ok(records)
}

/// Aggregate latency and synchrony metrics. Latencies are milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyReport {
    pub frames: usize,
    pub mean_input_latency_ms: f64,
    pub max_input_latency_ms: f64,
    pub mean_mismatch_ms: f64,
    pub max_mismatch_ms: f64,
    /// Fraction of frames whose render/platform provenance differs.
    pub mismatch_nonzero_fraction: f64,
    pub mean_state_age_ms: f64,
    pub max_state_age_ms: f64,
    pub dropped_frames: usize,
    pub physics_steps: u64,
}

pub fn latency_report(records: &[FrameRecord]) -> Result<LatencyReport> {
    if records.is_empty() {
        return Err(Error::invalid(
            "frame records",
            "latency report needs at least one frame",
        ));
    }
    let n = records.len() as f64;
    let mut lat_sum = 0.0;
    let mut lat_max = f64::NEG_INFINITY;
    let mut mis_sum = 0.0;
    let mut mis_max: f64 = 0.0;
    let mut mis_nonzero = 0usize;
    let mut age_sum = 0.0;
    let mut age_max = f64::NEG_INFINITY;
    let mut dropped = 0;
    let mut steps = 0u64;
    for r in records {
        let lat = r.input_latency() * 1e3;
        lat_sum += lat;
        lat_max = lat_max.max(lat);
        let mis = r.provenance_mismatch() * 1e3;
        mis_sum += mis;
        mis_max = mis_max.max(mis);
        if mis > MISMATCH_EPS_MS {
            mis_nonzero += 1;
        }
        let age = r.state_age() * 1e3;
        age_sum += age;
        age_max = age_max.max(age);
        dropped += usize::from(r.dropped);
        steps += u64::from(r.physics_steps);
    }
    Ok(LatencyReport {
        frames: records.len(),
        mean_input_latency_ms: lat_sum / n,
        max_input_latency_ms: lat_max,
        mean_mismatch_ms: mis_sum / n,
        max_mismatch_ms: mis_max,
        mismatch_nonzero_fraction: mis_nonzero as f64 / n,
        mean_state_age_ms: age_sum / n,
        max_state_age_ms: age_max,
        dropped_frames: dropped,
        physics_steps: steps,
    })
}

/// Per-frame provenance mismatch in milliseconds.
pub fn mismatch_series(records: &[FrameRecord]) -> Vec<f64> {
    records.iter().map(|r| r.provenance_mismatch() * 1e3).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo_ms: f64,
    pub hi_ms: f64,
    pub count: usize,
}

/// Histogram of per-frame mismatch with fixed-width bins starting at 0.
/// Exactly-zero frames land in the first bin.
pub fn mismatch_histogram(records: &[FrameRecord], bin_ms: f64) -> Result<Vec<HistogramBin>> {
    require_positive("histogram bin width", bin_ms)?;
    let series = mismatch_series(records);
    let max = series.iter().copied().fold(0.0, f64::max);
    let bins = ((max / bin_ms).floor() as usize + 1).max(1);
    let mut counts = vec![0usize; bins];
    for m in series {
        let i = ((m / bin_ms).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo_ms: i as f64 * bin_ms,
            hi_ms: (i + 1) as f64 * bin_ms,
            count,
        })
        .collect())
}
