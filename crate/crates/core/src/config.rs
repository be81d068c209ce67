//! Run configuration, loaded from TOML.
//!
//! Every section has defaults, unknown keys are rejected, and validation
//! errors carry the dotted path of the offending key (e.g. `cueing.roll_gain`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cueing::{CueGains, CueingParams, RollSource};
use crate::error::{Error, Result};
use crate::input::ConditioningParams;
use crate::platform::{Interval, PlatformLimits, ServoParams};
use crate::scenario::driver::DriverParams;
use crate::scenario::track::{default_turn_order, TrackParams, TurnSpec};
use crate::scheduler::{FrameTimeModel, PipelineMode, SchedulerConfig};
use crate::vehicle::{HapticCalibration, VehicleParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub time_constant_s: f64,
    pub idle_drive: f64,
    /// Falls back to `time_constant_s` when absent.
    pub brake_time_constant_s: Option<f64>,
}

impl Default for InputSection {
    fn default() -> Self {
        Self {
            time_constant_s: 0.2,
            idle_drive: 0.05,
            brake_time_constant_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSection {
    pub wheelbase_m: f64,
    pub max_drive_accel: f64,
    pub max_brake_decel: f64,
    pub drag_coefficient: f64,
    pub max_steer_road_angle_deg: f64,
    pub reverse_speed_cap_mps: f64,
    pub haptic_freq_per_mps: f64,
    pub haptic_freq_cap_hz: f64,
    pub haptic_mag_per_mps: f64,
}

impl Default for VehicleSection {
    fn default() -> Self {
        let v = VehicleParams::default();
        let h = HapticCalibration::default();
        Self {
            wheelbase_m: v.wheelbase,
            max_drive_accel: v.max_drive_accel,
            max_brake_decel: v.max_brake_decel,
            drag_coefficient: v.drag_coefficient,
            max_steer_road_angle_deg: v.max_steer_road_angle,
            reverse_speed_cap_mps: v.reverse_speed_cap,
            haptic_freq_per_mps: h.freq_per_mps,
            haptic_freq_cap_hz: h.freq_cap_hz,
            haptic_mag_per_mps: h.mag_per_mps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CueingSection {
    pub pitch_gain: f64,
    pub roll_gain: f64,
    pub yaw_gain: f64,
    pub hp_time_constant_s: f64,
    pub subthreshold_deg_s: f64,
    pub roll_source: RollSource,
}

impl Default for CueingSection {
    fn default() -> Self {
        let c = CueingParams::defaults();
        Self {
            pitch_gain: c.gains.pitch_gain,
            roll_gain: c.gains.roll_gain,
            yaw_gain: c.gains.yaw_gain,
            hp_time_constant_s: c.hp_time_constant,
            subthreshold_deg_s: c.subthreshold_rate,
            roll_source: c.roll_source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatformSection {
    pub pitch_min_deg: f64,
    pub pitch_max_deg: f64,
    pub roll_min_deg: f64,
    pub roll_max_deg: f64,
    pub yaw_min_deg: f64,
    pub yaw_max_deg: f64,
    pub motor_range_deg: f64,
    pub motor_rate_deg_s: f64,
    pub dead_zone_deg: f64,
    pub clip_deg: f64,
    pub smoothing_time_constant_s: f64,
    /// Accepted for parity with the vendor servo tool; no kinematic effect.
    pub power_usage: f64,
}

impl Default for PlatformSection {
    fn default() -> Self {
        let l = PlatformLimits::default();
        let s = ServoParams::default();
        Self {
            pitch_min_deg: l.pitch.min,
            pitch_max_deg: l.pitch.max,
            roll_min_deg: l.roll.min,
            roll_max_deg: l.roll.max,
            yaw_min_deg: l.yaw.min,
            yaw_max_deg: l.yaw.max,
            motor_range_deg: l.motor_range,
            motor_rate_deg_s: l.motor_rate,
            dead_zone_deg: s.dead_zone,
            clip_deg: s.clip,
            smoothing_time_constant_s: s.smoothing_time_constant,
            power_usage: s.power_usage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerSection {
    pub display_hz: f64,
    pub fixed_step_s: f64,
    pub mode: PipelineMode,
    pub frame_buffers: u32,
    pub vsync: bool,
    pub frame_time: FrameTimeModel,
}

impl Default for SchedulerSection {
    fn default() -> Self {
        let s = SchedulerConfig::default();
        Self {
            display_hz: s.display_hz,
            fixed_step_s: s.fixed_step,
            mode: s.mode,
            frame_buffers: s.frame_buffers,
            vsync: s.vsync,
            frame_time: FrameTimeModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackSection {
    pub straight_length_m: f64,
    pub grade: f64,
    pub lane_width_m: f64,
    pub grade_transition_m: f64,
    pub turn_order: Vec<TurnSpec>,
}

impl Default for TrackSection {
    fn default() -> Self {
        let t = TrackParams::default();
        Self {
            straight_length_m: t.straight_length,
            grade: t.grade,
            lane_width_m: t.lane_width,
            grade_transition_m: t.grade_transition,
            turn_order: default_turn_order(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverSection {
    pub lookahead_m: f64,
    pub target_speed_mps: f64,
    pub speed_gain: f64,
    pub brake_gain: f64,
}

impl Default for DriverSection {
    fn default() -> Self {
        let d = DriverParams::default();
        Self {
            lookahead_m: d.lookahead,
            target_speed_mps: d.target_speed,
            speed_gain: d.speed_gain,
            brake_gain: d.brake_gain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub duration_s: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSection,
    pub vehicle: VehicleSection,
    pub cueing: CueingSection,
    pub platform: PlatformSection,
    pub scheduler: SchedulerSection,
    pub track: TrackSection,
    pub driver: DriverSection,
    pub run: RunSection,
}

/// Field checks that record the first failing dotted path.
struct Checker(Option<Error>);

impl Checker {
    fn check(&mut self, path: &str, ok: bool, msg: impl FnOnce() -> String) {
        if self.0.is_none() && !ok {
            self.0 = Some(Error::config(path, msg()));
        }
    }

    fn positive(&mut self, path: &str, v: f64) {
        self.check(path, v.is_finite() && v > 0.0, || {
            format!("must be finite and > 0, got {v}")
        });
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        self.check(path, v.is_finite() && v >= 0.0, || {
            format!("must be finite and >= 0, got {v}")
        });
    }

    /// Folds a module-level validation error in under `path`.
    fn module(&mut self, path: &str, r: Result<()>) {
        if self.0.is_none() {
            if let Err(e) = r {
                self.0 = Some(Error::config(path, e.to_string()));
            }
        }
    }

    fn finish(self) -> Result<()> {
        self.0.map_or(Ok(()), Err)
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::config(
                if path == "." { String::from("<root>") } else { path },
                inner.message().trim().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every field before anything runs.
    pub fn validate(&self) -> Result<()> {
        let mut c = Checker(None);

        let i = &self.input;
        c.positive("input.time_constant_s", i.time_constant_s);
        c.non_negative("input.idle_drive", i.idle_drive);
        c.check("input.idle_drive", i.idle_drive <= 1.0, || {
            format!("must be <= 1, got {}", i.idle_drive)
        });
        if let Some(b) = i.brake_time_constant_s {
            c.positive("input.brake_time_constant_s", b);
        }

        let v = &self.vehicle;
        c.positive("vehicle.wheelbase_m", v.wheelbase_m);
        c.positive("vehicle.max_drive_accel", v.max_drive_accel);
        c.positive("vehicle.max_brake_decel", v.max_brake_decel);
        c.positive("vehicle.drag_coefficient", v.drag_coefficient);
        c.positive("vehicle.max_steer_road_angle_deg", v.max_steer_road_angle_deg);
        c.check(
            "vehicle.max_steer_road_angle_deg",
            v.max_steer_road_angle_deg < 90.0,
            || "must be below 90 degrees".into(),
        );
        c.positive("vehicle.reverse_speed_cap_mps", v.reverse_speed_cap_mps);
        c.non_negative("vehicle.haptic_freq_per_mps", v.haptic_freq_per_mps);
        c.non_negative("vehicle.haptic_freq_cap_hz", v.haptic_freq_cap_hz);
        c.non_negative("vehicle.haptic_mag_per_mps", v.haptic_mag_per_mps);

        let q = &self.cueing;
        c.non_negative("cueing.pitch_gain", q.pitch_gain);
        c.non_negative("cueing.roll_gain", q.roll_gain);
        c.non_negative("cueing.yaw_gain", q.yaw_gain);
        c.positive("cueing.hp_time_constant_s", q.hp_time_constant_s);
        c.positive("cueing.subthreshold_deg_s", q.subthreshold_deg_s);

        let p = &self.platform;
        for (name, lo, hi) in [
            ("pitch", p.pitch_min_deg, p.pitch_max_deg),
            ("roll", p.roll_min_deg, p.roll_max_deg),
            ("yaw", p.yaw_min_deg, p.yaw_max_deg),
        ] {
            c.check(&format!("platform.{name}_min_deg"), lo.is_finite() && lo <= 0.0, || {
                format!("must be finite and <= 0, got {lo}")
            });
            c.check(
                &format!("platform.{name}_max_deg"),
                hi.is_finite() && hi > 0.0 && hi > lo,
                || format!("must be finite, > 0 and above the minimum, got {hi}"),
            );
        }
        c.positive("platform.motor_range_deg", p.motor_range_deg);
        c.positive("platform.motor_rate_deg_s", p.motor_rate_deg_s);
        c.non_negative("platform.dead_zone_deg", p.dead_zone_deg);
        c.check(
            "platform.clip_deg",
            p.clip_deg.is_finite() && p.clip_deg > 0.0 && p.clip_deg <= p.motor_range_deg,
            || format!("must lie in (0, motor_range_deg], got {}", p.clip_deg),
        );
        c.non_negative("platform.smoothing_time_constant_s", p.smoothing_time_constant_s);
        c.non_negative("platform.power_usage", p.power_usage);

        let s = &self.scheduler;
        c.positive("scheduler.display_hz", s.display_hz);
        c.positive("scheduler.fixed_step_s", s.fixed_step_s);
        c.check("scheduler.frame_buffers", !s.vsync || s.frame_buffers >= 1, || {
            "vsync needs at least one frame buffer".into()
        });
        match &s.frame_time {
            FrameTimeModel::Constant { compute_ms } => c.positive("scheduler.frame_time.compute_ms", *compute_ms),
            FrameTimeModel::Jittered { compute_ms, jitter_ms } => {
                c.positive("scheduler.frame_time.compute_ms", *compute_ms);
                c.non_negative("scheduler.frame_time.jitter_ms", *jitter_ms);
            }
            FrameTimeModel::List { compute_ms } => {
                c.check("scheduler.frame_time.compute_ms", !compute_ms.is_empty(), || {
                    "must not be empty".into()
                });
                for (k, ms) in compute_ms.iter().enumerate() {
                    c.positive(&format!("scheduler.frame_time.compute_ms[{k}]"), *ms);
                }
            }
        }

        let d = &self.driver;
        c.positive("driver.lookahead_m", d.lookahead_m);
        c.positive("driver.target_speed_mps", d.target_speed_mps);
        c.positive("driver.speed_gain", d.speed_gain);
        c.positive("driver.brake_gain", d.brake_gain);

        c.non_negative("run.duration_s", self.run.duration_s);

        let t = &self.track;
        c.positive("track.straight_length_m", t.straight_length_m);
        c.positive("track.lane_width_m", t.lane_width_m);
        c.positive("track.grade_transition_m", t.grade_transition_m);
        c.check(
            "track.grade",
            t.grade.is_finite() && (0.0..1.0).contains(&t.grade),
            || format!("must lie in [0, 1), got {}", t.grade),
        );
        // Geometry checks (turn coverage, closure) live with the track builder.
        if c.0.is_none() {
            c.module(
                "track",
                crate::scenario::track::build_track(&self.track_params()).map(|_| ()),
            );
        }
        c.finish()
    }

    pub fn conditioning(&self, step: f64) -> Result<ConditioningParams> {
        let i = &self.input;
        ConditioningParams::new(
            i.time_constant_s,
            i.brake_time_constant_s.unwrap_or(i.time_constant_s),
            i.idle_drive,
            step,
        )
    }

    pub fn vehicle_params(&self) -> VehicleParams {
        let v = &self.vehicle;
        VehicleParams {
            wheelbase: v.wheelbase_m,
            max_drive_accel: v.max_drive_accel,
            max_brake_decel: v.max_brake_decel,
            drag_coefficient: v.drag_coefficient,
            max_steer_road_angle: v.max_steer_road_angle_deg,
            reverse_speed_cap: v.reverse_speed_cap_mps,
        }
    }

    pub fn haptics(&self) -> HapticCalibration {
        HapticCalibration {
            freq_per_mps: self.vehicle.haptic_freq_per_mps,
            freq_cap_hz: self.vehicle.haptic_freq_cap_hz,
            mag_per_mps: self.vehicle.haptic_mag_per_mps,
        }
    }

    pub fn cueing_params(&self) -> CueingParams {
        let q = &self.cueing;
        CueingParams {
            gains: CueGains {
                pitch_gain: q.pitch_gain,
                roll_gain: q.roll_gain,
                yaw_gain: q.yaw_gain,
            },
            roll_source: q.roll_source,
            hp_time_constant: q.hp_time_constant_s,
            subthreshold_rate: q.subthreshold_deg_s,
        }
    }

    pub fn platform_limits(&self) -> PlatformLimits {
        let p = &self.platform;
        PlatformLimits {
            pitch: Interval::new(p.pitch_min_deg, p.pitch_max_deg),
            roll: Interval::new(p.roll_min_deg, p.roll_max_deg),
            yaw: Interval::new(p.yaw_min_deg, p.yaw_max_deg),
            motor_range: p.motor_range_deg,
            motor_rate: p.motor_rate_deg_s,
        }
    }

    pub fn servo_params(&self) -> ServoParams {
        let p = &self.platform;
        ServoParams {
            dead_zone: p.dead_zone_deg,
            clip: p.clip_deg,
            smoothing_time_constant: p.smoothing_time_constant_s,
            power_usage: p.power_usage,
        }
    }

    pub fn scheduler_config(&self) -> SchedulerConfig {
        let s = &self.scheduler;
        SchedulerConfig {
            display_hz: s.display_hz,
            fixed_step: s.fixed_step_s,
            mode: s.mode,
            frame_buffers: s.frame_buffers,
            vsync: s.vsync,
        }
    }

    pub fn track_params(&self) -> TrackParams {
        let t = &self.track;
        TrackParams {
            straight_length: t.straight_length_m,
            grade: t.grade,
            lane_width: t.lane_width_m,
            grade_transition: t.grade_transition_m,
            turn_order: t.turn_order.clone(),
        }
    }

    pub fn driver_params(&self) -> DriverParams {
        let d = &self.driver;
        DriverParams {
            lookahead: d.lookahead_m,
            target_speed: d.target_speed_mps,
            speed_gain: d.speed_gain,
            brake_gain: d.brake_gain,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_of(text: &str) -> String {
        match RunConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn default_round_trips_through_toml() {
        let text = RunConfig::default().to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_toml_str(
            "[cueing]\nroll_source = \"sum\"\n[scheduler]\nmode = \"default_fixed_step\"\n[scheduler.frame_time]\nkind = \"constant\"\ncompute_ms = 5.0\n",
        )
        .unwrap();
        assert_eq!(cfg.cueing.roll_source, RollSource::Sum);
        assert_eq!(cfg.scheduler.mode, PipelineMode::DefaultFixedStep);
        assert_eq!(cfg.scheduler.frame_time, FrameTimeModel::Constant { compute_ms: 5.0 });
    }

    #[test]
    fn unknown_keys_report_their_path() {
        assert_eq!(path_of("[cueing]\npitch_gian = 1.0\n"), "cueing.pitch_gian");
        assert_eq!(path_of("[nope]\n"), "nope");
    }

    #[test]
    fn bad_values_report_their_path() {
        assert_eq!(path_of("[cueing]\nroll_gain = -1.0\n"), "cueing.roll_gain");
        assert_eq!(path_of("[input]\ntime_constant_s = 0.0\n"), "input.time_constant_s");
        assert_eq!(path_of("[platform]\nclip_deg = 30.0\n"), "platform.clip_deg");
        assert_eq!(path_of("[scheduler]\nframe_buffers = 0\n"), "scheduler.frame_buffers");
        assert_eq!(path_of("[run]\nduration_s = -1.0\n"), "run.duration_s");
        assert_eq!(path_of("[cueing]\nroll_gain = \"high\"\n"), "cueing.roll_gain");
        assert_eq!(path_of("[track]\nstraight_length_m = 25.0\n"), "track");
    }
}
