//! End-to-end scenario runs: the scheduler drives a rig that wires pedal
//! conditioning, vehicle, cueing and platform together, with the scripted
//! driver at the wheel.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::cueing::{compose_cue_frame, CueTarget, CueingParams, YawWashoutState};
use crate::error::{Error, Result};
use crate::input::{condition_pedals, ConditionedCommand, ConditioningParams, DriverInput, PedalStates};
use crate::platform::{drive_platform, PlatformLimits, PlatformOutput, PlatformPose, PlatformState, ServoParams};
use crate::scenario::driver::{scripted_driver_step, starting_state, DriverParams, DriverScriptState};
use crate::scenario::track::{build_track, sample_track, SegmentKind, Track};
use crate::scheduler::{
    latency_report, mismatch_histogram, run_pipeline, FrameRecord, FrameStart, FrameTimeTrace, HistogramBin,
    LatencyReport, PipelineHooks, PipelineMode, SchedulerConfig,
};
use crate::telemetry::{TelemetryRow, TelemetryWriter, TELEMETRY_SCHEMA_VERSION};
use crate::vehicle::{
    accel_by_differencing, centripetal_accel, haptic_cue, BodyAccel, HapticCalibration, VehicleParams, VehicleState,
};

/// Version of the metrics and comparison JSON documents.
pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// Absolute slack on envelope and rate checks, degrees.
pub const SAFETY_TOL_DEG: f64 = 1e-9;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
}

impl AxisRange {
    fn empty() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn add(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    fn max_abs(&self) -> f64 {
        if self.min > self.max {
            0.0
        } else {
            self.min.abs().max(self.max.abs())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoseSummary {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
}

/// Aggregate results of one run; serialized as the metrics JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub schema_version: u32,
    pub telemetry_schema_version: u32,
    pub seed: u64,
    pub duration_s: f64,
    pub mode: PipelineMode,
    pub display_hz: f64,
    pub frames: usize,
    /// Absent when no frame was rendered.
    pub latency: Option<LatencyReport>,
    pub max_abs_pose_deg: PoseSummary,
    pub pose_range_deg: [AxisRange; 3],
    pub max_motor_step_deg: f64,
    pub rate_limit_saturations: u64,
    pub envelope_violations: u64,
    pub rate_violations: u64,
    pub crash_events: u32,
    pub laps_completed: u32,
    pub distance_m: f64,
    pub max_speed_mps: f64,
    /// Largest |offset from the driving-lane centre| seen on an arc.
    pub max_arc_lane_deviation_m: f64,
    pub max_haptic_frequency_hz: f64,
    pub telemetry_rows: u64,
    pub telemetry_sha256: String,
}

impl RunMetrics {
    pub fn violations(&self) -> u64 {
        self.envelope_violations + self.rate_violations
    }
}

/// Metrics plus the frame provenance records of a run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metrics: RunMetrics,
    pub records: Vec<FrameRecord>,
}

struct Params {
    conditioning: ConditioningParams,
    vehicle: VehicleParams,
    haptics: HapticCalibration,
    cueing: CueingParams,
    limits: PlatformLimits,
    servo: ServoParams,
    driver: DriverParams,
    duration: f64,
}

/// Mutable simulation state threaded through the scheduler hooks.
struct Rig<'a, W: Write> {
    p: Params,
    track: &'a Track,
    out: TelemetryWriter<W>,

    vehicle: VehicleState,
    pedals: PedalStates,
    washout: YawWashoutState,
    platform: PlatformState,
    driver: DriverScriptState,

    input: DriverInput,
    command: ConditionedCommand,
    accel: BodyAccel,
    cue: CueTarget,
    achieved: PlatformOutput,

    pose_range: [AxisRange; 3],
    max_motor_step: f64,
    saturations: u64,
    envelope_violations: u64,
    rate_violations: u64,
    crash_events: u32,
    max_speed: f64,
    max_arc_deviation: f64,
    max_haptic: f64,
    first_violation: Option<String>,
}

impl<W: Write> Rig<'_, W> {
    fn note_violation(&mut self, msg: impl FnOnce() -> String) {
        if self.first_violation.is_none() {
            self.first_violation = Some(msg());
        }
    }
}

impl<W: Write> PipelineHooks for Rig<'_, W> {
    fn begin_frame(&mut self, frame: &FrameStart) -> Result<ControlFlow<()>> {
        if frame.time > self.p.duration + TIME_EPS {
            return Ok(ControlFlow::Break(()));
        }
        // Input is sampled once per frame, at frame start.
        let idle = self.p.conditioning.idle;
        let (input, driver, obs) = scripted_driver_step(
            &self.driver,
            &self.vehicle,
            self.track,
            &self.p.driver,
            &self.p.vehicle,
            idle,
        );
        if self.track.segments()[obs.segment].is_arc() {
            self.max_arc_deviation = self.max_arc_deviation.max(obs.lane_deviation.abs());
        }
        if obs.crash_event {
            self.crash_events += 1;
        }
        self.input = input;
        self.driver = driver;
        Ok(ControlFlow::Continue(()))
    }

    fn physics_step(&mut self, dt: f64, state_time: f64) -> Result<()> {
        let conditioning = self.p.conditioning.with_step(dt)?;
        let (command, pedals) = condition_pedals(&self.input, self.pedals, &conditioning)?;
        let grade = sample_track(self.track, self.driver.last_s).grade;
        let next = crate::vehicle::step_vehicle_on_grade(
            &self.vehicle,
            &command,
            self.input.steering,
            &self.p.vehicle,
            grade,
            dt,
        )?;
        let accel = accel_by_differencing(&self.vehicle.velocity, &next.velocity, next.heading, dt)?;
        let (cue, washout) = compose_cue_frame(&accel, next.speed, next.yaw_rate, self.washout, &self.p.cueing, dt)?;
        let request = PlatformPose {
            pitch: cue.pitch,
            roll: cue.roll,
            yaw: cue.yaw,
        };
        let prev_motors = self.platform.motors;
        let (out, platform) = drive_platform(&request, self.platform, &self.p.limits, &self.p.servo, dt)?;

        let pose = out.achieved;
        if !pose.within(&self.p.limits, SAFETY_TOL_DEG) {
            self.envelope_violations += 1;
            self.note_violation(|| format!("pose {pose:?} outside the platform envelope at t = {state_time:.6} s"));
        }
        let allowed = self.p.limits.motor_rate * dt;
        for (a, b) in prev_motors.to_array().into_iter().zip(out.motors.to_array()) {
            let step = (b - a).abs();
            self.max_motor_step = self.max_motor_step.max(step);
            if step > allowed + SAFETY_TOL_DEG {
                self.rate_violations += 1;
                self.note_violation(|| format!("motor moved {step} deg in {dt} s at t = {state_time:.6} s"));
            }
        }
        for (range, v) in self.pose_range.iter_mut().zip([pose.pitch, pose.roll, pose.yaw]) {
            range.add(v);
        }
        self.saturations += out.rate_saturated as u64;
        self.max_speed = self.max_speed.max(next.speed);
        self.max_haptic = self.max_haptic.max(haptic_cue(next.speed, &self.p.haptics).frequency);

        self.command = command;
        self.pedals = pedals;
        self.vehicle = next;
        self.accel = accel;
        self.cue = cue;
        self.washout = washout;
        self.platform = platform;
        self.achieved = out;
        Ok(())
    }

    fn end_frame(&mut self, r: &FrameRecord) -> Result<ControlFlow<()>> {
        let v = &self.vehicle;
        let pose = self.achieved.achieved;
        let motors = self.achieved.motors;
        self.out.write_row(&TelemetryRow {
            frame_index: r.frame_index,
            sim_time_s: r.frame_start,
            throttle_raw: self.input.throttle,
            throttle_filtered: self.pedals.throttle.last_output,
            brake_filtered: self.command.brake_demand,
            steering_deg: self.input.steering,
            gear: self.input.gear.label(),
            speed_mps: v.speed,
            accel_long: self.accel.longitudinal,
            accel_lat: self.accel.lateral,
            centripetal: centripetal_accel(v.speed, v.yaw_rate),
            yaw_rate: v.yaw_rate,
            cue_pitch_deg: self.cue.pitch,
            cue_roll_deg: self.cue.roll,
            cue_yaw_deg: self.cue.yaw,
            pose_pitch_deg: pose.pitch,
            pose_roll_deg: pose.roll,
            pose_yaw_deg: pose.yaw,
            motor_fl_deg: motors.front_left,
            motor_fr_deg: motors.front_right,
            motor_rear_deg: motors.rear,
            input_latency_ms: r.input_latency() * 1e3,
            provenance_mismatch_ms: r.provenance_mismatch() * 1e3,
            crash_flag: u8::from(self.driver.crashed),
        })?;
        // A crash ends the trial.
        Ok(if self.driver.crashed {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        })
    }
}

/// Frame-time trace long enough to cover `duration`. Every model is
/// prefix-stable for a given seed, so growing the trace never changes the
/// frames already covered.
fn frame_trace(cfg: &RunConfig, sched: &SchedulerConfig) -> Result<FrameTimeTrace> {
    let model = &cfg.scheduler.frame_time;
    let seed = cfg.run.seed;
    let duration = cfg.run.duration_s;
    if sched.vsync {
        // Frames start on refresh ticks from t = P, so at most this many fit.
        let frames = (duration * sched.display_hz + TIME_EPS).floor() as usize;
        return model.generate(frames, seed);
    }
    let mut frames = ((duration * sched.display_hz).ceil() as usize).max(16);
    loop {
        let trace = model.generate(frames, seed)?;
        let covered = sched.period() + trace.durations().iter().sum::<f64>();
        if covered > duration + TIME_EPS {
            return Ok(trace);
        }
        frames *= 2;
    }
}

/// Runs one scenario, streaming telemetry CSV into `sink`. Safety
/// violations are counted in the metrics, not raised; see [`run_scenario`].
pub fn simulate<W: Write>(cfg: &RunConfig, sink: W) -> Result<(RunOutcome, W)> {
    cfg.validate()?;
    let sched = cfg.scheduler_config();
    let track = build_track(&cfg.track_params())?;
    let trace = frame_trace(cfg, &sched)?;

    let mut rig = Rig {
        p: Params {
            conditioning: cfg.conditioning(sched.period())?,
            vehicle: cfg.vehicle_params(),
            haptics: cfg.haptics(),
            cueing: cfg.cueing_params(),
            limits: cfg.platform_limits(),
            servo: cfg.servo_params(),
            driver: cfg.driver_params(),
            duration: cfg.run.duration_s,
        },
        track: &track,
        out: TelemetryWriter::new(sink)?,
        vehicle: starting_state(&track),
        pedals: PedalStates::default(),
        washout: YawWashoutState::default(),
        platform: PlatformState::default(),
        driver: DriverScriptState::default(),
        input: DriverInput::default(),
        command: ConditionedCommand::default(),
        accel: BodyAccel::default(),
        cue: CueTarget::default(),
        achieved: PlatformOutput::default(),
        pose_range: [AxisRange::empty(); 3],
        max_motor_step: 0.0,
        saturations: 0,
        envelope_violations: 0,
        rate_violations: 0,
        crash_events: 0,
        max_speed: 0.0,
        max_arc_deviation: 0.0,
        max_haptic: 0.0,
        first_violation: None,
    };

    let records = run_pipeline(&sched, &trace, &mut rig)?;
    let rows = rig.out.rows();
    let latency = if records.is_empty() {
        None
    } else {
        Some(latency_report(&records)?)
    };
    let [pitch, roll, yaw] = rig.pose_range;
    let metrics = RunMetrics {
        schema_version: METRICS_SCHEMA_VERSION,
        telemetry_schema_version: TELEMETRY_SCHEMA_VERSION,
        seed: cfg.run.seed,
        duration_s: cfg.run.duration_s,
        mode: sched.mode,
        display_hz: sched.display_hz,
        frames: records.len(),
        latency,
        max_abs_pose_deg: PoseSummary {
            pitch: pitch.max_abs(),
            roll: roll.max_abs(),
            yaw: yaw.max_abs(),
        },
        pose_range_deg: rig.pose_range.map(|r| {
            if r.min > r.max {
                AxisRange { min: 0.0, max: 0.0 }
            } else {
                r
            }
        }),
        max_motor_step_deg: rig.max_motor_step,
        rate_limit_saturations: rig.saturations,
        envelope_violations: rig.envelope_violations,
        rate_violations: rig.rate_violations,
        crash_events: rig.crash_events,
        laps_completed: rig.driver.laps_completed(&track),
        distance_m: rig.driver.progress,
        max_speed_mps: rig.max_speed,
        max_arc_lane_deviation_m: rig.max_arc_deviation,
        max_haptic_frequency_hz: rig.max_haptic,
        telemetry_rows: rows,
        telemetry_sha256: String::new(),
    };
    let first_violation = rig.first_violation.take();
    let (sink, digest) = rig.out.finish()?;
    let mut metrics = metrics;
    metrics.telemetry_sha256 = digest;
    if let Some(msg) = first_violation {
        debug_assert!(metrics.violations() > 0, "{msg}");
    }
    Ok((RunOutcome { metrics, records }, sink))
}

/// Runs a scenario without keeping the telemetry bytes.
pub fn simulate_discarding(cfg: &RunConfig) -> Result<RunOutcome> {
    simulate(cfg, io::sink()).map(|(outcome, _)| outcome)
}

/// Paths written by [`run_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub telemetry: PathBuf,
    pub metrics: PathBuf,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes `telemetry.csv` and `metrics.json` under `out_dir`. Outputs are
/// written before a safety violation is reported, so the failing run can
/// be inspected.
pub fn run_scenario(cfg: &RunConfig, out_dir: &Path) -> Result<(RunMetrics, RunFiles)> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let files = RunFiles {
        telemetry: out_dir.join("telemetry.csv"),
        metrics: out_dir.join("metrics.json"),
    };
    let sink = BufWriter::new(File::create(&files.telemetry)?);
    let (outcome, sink) = simulate(cfg, sink)?;
    sink.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    write_json(&files.metrics, &outcome.metrics)?;
    let m = outcome.metrics;
    if m.violations() > 0 {
        return Err(Error::Invariant(format!(
            "{} envelope and {} motor-rate violations; see {}",
            m.envelope_violations,
            m.rate_violations,
            files.metrics.display()
        )));
    }
    Ok((m, files))
}

/// Side-by-side results of the two execution pipelines on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineComparison {
    pub schema_version: u32,
    pub seed: u64,
    pub duration_s: f64,
    pub display_hz: f64,
    pub fixed_step_s: f64,
    pub histogram_bin_ms: f64,
    pub default_fixed_step: ModeSummary,
    pub physics_on_update: ModeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub latency: Option<LatencyReport>,
    pub mismatch_histogram: Vec<HistogramBin>,
    pub crash_events: u32,
    pub laps_completed: u32,
    pub violations: u64,
}

pub const HISTOGRAM_BIN_MS: f64 = 1.0;

/// Runs the same scenario under both pipelines.
pub fn compare_pipelines(cfg: &RunConfig) -> Result<PipelineComparison> {
    cfg.validate()?;
    let summary = |mode: PipelineMode| -> Result<ModeSummary> {
        let mut c = cfg.clone();
        c.scheduler.mode = mode;
        let outcome = simulate_discarding(&c)?;
        Ok(ModeSummary {
            latency: outcome.metrics.latency,
            mismatch_histogram: mismatch_histogram(&outcome.records, HISTOGRAM_BIN_MS)?,
            crash_events: outcome.metrics.crash_events,
            laps_completed: outcome.metrics.laps_completed,
            violations: outcome.metrics.violations(),
        })
    };
    Ok(PipelineComparison {
        schema_version: METRICS_SCHEMA_VERSION,
        seed: cfg.run.seed,
        duration_s: cfg.run.duration_s,
        display_hz: cfg.scheduler.display_hz,
        fixed_step_s: cfg.scheduler.fixed_step_s,
        histogram_bin_ms: HISTOGRAM_BIN_MS,
        default_fixed_step: summary(PipelineMode::DefaultFixedStep)?,
        physics_on_update: summary(PipelineMode::PhysicsOnUpdate)?,
    })
}

/// Writes `comparison.json` under `out_dir`.
pub fn write_comparison(cfg: &RunConfig, out_dir: &Path) -> Result<(PipelineComparison, PathBuf)> {
    let cmp = compare_pipelines(cfg)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("comparison.json");
    write_json(&path, &cmp)?;
    Ok((cmp, path))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcLabel {
    pub segment: usize,
    pub sweep_deg: f64,
    pub slope: crate::scenario::track::Slope,
    pub direction: crate::scenario::track::TurnDirection,
    pub grade: f64,
    pub radius_m: f64,
}

/// Exported track geometry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackExport {
    pub schema_version: u32,
    pub lap_length_m: f64,
    pub lane_width_m: f64,
    pub segments: Vec<crate::scenario::track::TrackSegment>,
    pub arcs: Vec<ArcLabel>,
    pub sample_spacing_m: f64,
    /// `[x, y, z]` centreline points; the last point is the lap end, which
    /// coincides with the first.
    pub centerline: Vec<[f64; 3]>,
}

pub const CENTERLINE_SPACING_M: f64 = 1.0;

pub fn track_export(cfg: &RunConfig) -> Result<TrackExport> {
    cfg.validate()?;
    let track = build_track(&cfg.track_params())?;
    let lap = track.lap_length();
    let n = (lap / CENTERLINE_SPACING_M).floor() as usize;
    let mut centerline: Vec<[f64; 3]> = (0..=n)
        .map(|k| {
            let p = sample_track(&track, k as f64 * CENTERLINE_SPACING_M).position;
            [p.x, p.y, p.z]
        })
        .collect();
    // Close the polyline with the unwrapped end of the last segment.
    let end = track.end_sample().position;
    if (lap - n as f64 * CENTERLINE_SPACING_M) > 1e-9 {
        centerline.push([end.x, end.y, end.z]);
    } else if let Some(last) = centerline.last_mut() {
        *last = [end.x, end.y, end.z];
    }
    let arcs = track
        .segments()
        .iter()
        .enumerate()
        .filter_map(|(i, seg)| match seg.kind {
            SegmentKind::Arc {
                radius,
                sweep_deg,
                direction,
                slope,
                grade,
            } => Some(ArcLabel {
                segment: i,
                sweep_deg,
                slope,
                direction,
                grade,
                radius_m: radius,
            }),
            SegmentKind::Straight { .. } => None,
        })
        .collect();
    Ok(TrackExport {
        schema_version: METRICS_SCHEMA_VERSION,
        lap_length_m: lap,
        lane_width_m: track.lane_width(),
        segments: track.segments().to_vec(),
        arcs,
        sample_spacing_m: CENTERLINE_SPACING_M,
        centerline,
    })
}

/// Writes `track.json` under `out_dir`.
pub fn export_track(cfg: &RunConfig, out_dir: &Path) -> Result<(TrackExport, PathBuf)> {
    let export = track_export(cfg)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("track.json");
    write_json(&path, &export)?;
    Ok((export, path))
}
