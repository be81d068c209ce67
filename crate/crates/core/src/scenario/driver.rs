//! Scripted driver: pure-pursuit steering on the driving-lane centre and a
//! proportional speed controller with a drag/grade feed-forward.

use nalgebra::Vector2;

use super::track::{sample_track, Track};
use crate::error::{require_positive, Result};
use crate::input::{DriverInput, Gear};
use crate::vehicle::{VehicleParams, VehicleState, GRAVITY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverParams {
    /// Lookahead distance along the centreline, metres.
    pub lookahead: f64,
    pub target_speed: f64,
    /// Throttle per m/s of speed deficit.
    pub speed_gain: f64,
    /// Brake per m/s of excess speed.
    pub brake_gain: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        Self {
            lookahead: 15.0,
            target_speed: 25.0,
            speed_gain: 0.5,
            brake_gain: 0.2,
        }
    }
}

impl DriverParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("lookahead", self.lookahead)?;
        require_positive("target_speed", self.target_speed)?;
        require_positive("speed_gain", self.speed_gain)?;
        require_positive("brake_gain", self.brake_gain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriverScriptState {
    /// Segment of the last projection, used as a search hint.
    pub segment: Option<usize>,
    /// Centreline arclength of the last projection.
    pub last_s: f64,
    /// Unwrapped distance travelled along the centreline.
    pub progress: f64,
    pub crashed: bool,
}

impl DriverScriptState {
    pub fn laps_completed(&self, track: &Track) -> u32 {
        (self.progress / track.lap_length()).floor().max(0.0) as u32
    }
}

/// What the driver observed this step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverObservation {
    pub s: f64,
    pub segment: usize,
    /// Offset from the driving-lane centre, positive to the left.
    pub lane_deviation: f64,
    /// Set on the step the vehicle first leaves the paved road.
    pub crash_event: bool,
}

/// Vehicle placed at rest on the driving lane at the start line.
pub fn starting_state(track: &Track) -> VehicleState {
    let start = sample_track(track, 0.0);
    let left = Vector2::new(-start.heading.sin(), start.heading.cos());
    let xy = start.position.xy() + track.driving_lane_offset() * left;
    VehicleState::at_rest(nalgebra::Vector3::new(xy.x, xy.y, start.position.z), start.heading)
}

/// One driver decision.
pub fn scripted_driver_step(
    state: &DriverScriptState,
    vehicle: &VehicleState,
    track: &Track,
    params: &DriverParams,
    vehicle_params: &VehicleParams,
    idle: f64,
) -> (DriverInput, DriverScriptState, DriverObservation) {
    let pos = vehicle.position.xy();
    let proj = track.project(&pos, state.segment);

    let lap = track.lap_length();
    let mut ds = (proj.s - state.last_s).rem_euclid(lap);
    if ds > lap / 2.0 {
        ds -= lap;
    }
    let progress = if state.segment.is_some() {
        state.progress + ds
    } else {
        0.0
    };

    let lane_deviation = proj.lateral - track.driving_lane_offset();
    let off_road = proj.lateral.abs() > track.road_half_width();
    let crash_event = off_road && !state.crashed;

    // Pure pursuit toward the lane centre `lookahead` metres ahead.
    let target = sample_track(track, proj.s + params.lookahead);
    let target_left = Vector2::new(-target.heading.sin(), target.heading.cos());
    let aim = target.position.xy() + track.driving_lane_offset() * target_left;
    let d = aim - pos;
    let (sh, ch) = vehicle.heading.sin_cos();
    let ahead = d.x * ch + d.y * sh;
    let left = -d.x * sh + d.y * ch;
    let dist2 = ahead * ahead + left * left;
    let curvature = if dist2 > 0.0 { 2.0 * left / dist2 } else { 0.0 };
    let steering = vehicle_params.steering_for_road_angle((curvature * vehicle_params.wheelbase).atan());

    // Feed-forward holds the current speed against drag and slope; the
    // filtered throttle sits on top of the idle demand.
    let here = sample_track(track, proj.s);
    let slope = here.grade / (1.0 + here.grade * here.grade).sqrt();
    let v = vehicle.speed;
    let hold = (vehicle_params.drag_coefficient * v * v + GRAVITY * slope) / vehicle_params.max_drive_accel - idle;
    let error = params.target_speed - v;
    let throttle = (hold + params.speed_gain * error).clamp(0.0, 1.0);
    let brake = (-params.brake_gain * error - 0.1).clamp(0.0, 1.0);

    let input = DriverInput {
        throttle,
        brake,
        steering,
        gear: Gear::Drive,
    };
    let next = DriverScriptState {
        segment: Some(proj.segment),
        last_s: proj.s,
        progress,
        crashed: state.crashed || off_road,
    };
    (
        input,
        next,
        DriverObservation {
            s: proj.s,
            segment: proj.segment,
            lane_deviation,
            crash_event,
        },
    )
}
