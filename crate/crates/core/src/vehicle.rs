//! Kinematic bicycle model standing in for the full rigid-body vehicle.
//!
//! World frame: `x` east, `y` north, `z` up; heading is measured
//! counter-clockwise from `+x`. Body frame: longitudinal is forward,
//! lateral is positive to the driver's left, vertical is up. Positive yaw
//! rate is a left turn.

use nalgebra::{Vector2, Vector3};

use crate::error::{require_finite, require_positive, Error, Result};
use crate::input::{ConditionedCommand, Gear, STEERING_RANGE_DEG};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Radians, normalized to `(-pi, pi]`.
    pub heading: f64,
    pub yaw_rate: f64,
    /// Magnitude of the horizontal velocity.
    pub speed: f64,
}

impl Default for VehicleState {
    fn default() -> Self {
        Self::at_rest(Vector3::zeros(), 0.0)
    }
}

impl VehicleState {
    pub fn at_rest(position: Vector3<f64>, heading: f64) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            heading: wrap_angle(heading),
            yaw_rate: 0.0,
            speed: 0.0,
        }
    }

    /// Signed speed along the heading; negative when rolling backwards.
    pub fn longitudinal_speed(&self) -> f64 {
        self.velocity.xy().dot(&heading_unit(self.heading))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.position.iter().chain(self.velocity.iter()).all(|v| v.is_finite())
            && self.heading.is_finite()
            && self.yaw_rate.is_finite()
            && self.speed.is_finite();
        if !finite {
            return Err(Error::invalid("vehicle state", "contains non-finite values"));
        }
        if self.speed < 0.0 {
            return Err(Error::invalid("vehicle state", "speed is negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub max_drive_accel: f64,
    pub max_brake_decel: f64,
    /// Quadratic drag, 1/m: deceleration = drag * speed².
    pub drag_coefficient: f64,
    /// Road-wheel angle at full steering lock, degrees.
    pub max_steer_road_angle: f64,
    pub reverse_speed_cap: f64,
}

impl Default for VehicleParams {
    /// Passenger-car defaults; the drag term gives a top speed near 40 m/s
    /// at full throttle.
    fn default() -> Self {
        Self {
            wheelbase: 2.7,
            max_drive_accel: 4.0,
            max_brake_decel: 8.0,
            drag_coefficient: 0.0025,
            max_steer_road_angle: 35.0,
            reverse_speed_cap: 5.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("wheelbase", self.wheelbase)?;
        require_positive("max_drive_accel", self.max_drive_accel)?;
        require_positive("max_brake_decel", self.max_brake_decel)?;
        require_positive("drag_coefficient", self.drag_coefficient)?;
        require_positive("max_steer_road_angle", self.max_steer_road_angle)?;
        require_positive("reverse_speed_cap", self.reverse_speed_cap)?;
        if self.max_steer_road_angle >= 90.0 {
            return Err(Error::invalid("max_steer_road_angle", "must be below 90 degrees"));
        }
        Ok(())
    }

    /// Road-wheel angle in radians for a steering-wheel angle in degrees.
    pub fn road_wheel_angle(&self, steering_deg: f64) -> f64 {
        (steering_deg / STEERING_RANGE_DEG * self.max_steer_road_angle).to_radians()
    }

    /// Steering-wheel angle (degrees) that produces the given road-wheel
    /// angle (radians), saturated at the wheel's lock.
    pub fn steering_for_road_angle(&self, road_angle: f64) -> f64 {
        (road_angle.to_degrees() / self.max_steer_road_angle * STEERING_RANGE_DEG)
            .clamp(-STEERING_RANGE_DEG, STEERING_RANGE_DEG)
    }
}

/// Acceleration in the vehicle body frame, m/s².
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyAccel {
    pub longitudinal: f64,
    pub lateral: f64,
    pub vertical: f64,
}

impl BodyAccel {
    pub fn scaled(self, c: f64) -> Self {
        Self {
            longitudinal: self.longitudinal * c,
            lateral: self.lateral * c,
            vertical: self.vertical * c,
        }
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

fn heading_unit(heading: f64) -> Vector2<f64> {
    let (s, c) = heading.sin_cos();
    Vector2::new(c, s)
}

/// Advances the vehicle one frame on level road.
pub fn step_vehicle(
    state: &VehicleState,
    cmd: &ConditionedCommand,
    steering: f64,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState> {
    step_vehicle_on_grade(state, cmd, steering, params, 0.0, dt)
}

/// Advances the vehicle one frame on a road of the given grade (rise/run).
///
/// Speed is updated first (drive, gravity along the slope, then braking and
/// drag, which can bring the car to rest but never reverse it), and the new
/// speed drives the yaw rate, heading and position (semi-implicit Euler).
pub fn step_vehicle_on_grade(
    state: &VehicleState,
    cmd: &ConditionedCommand,
    steering: f64,
    params: &VehicleParams,
    grade: f64,
    dt: f64,
) -> Result<VehicleState> {
    require_positive("vehicle dt", dt)?;
    require_finite("road grade", grade)?;
    require_finite("steering", steering)?;

    let v0 = state.longitudinal_speed();
    let drive_sign = match cmd.gear {
        Gear::Drive => 1.0,
        Gear::Reverse => -1.0,
        Gear::Neutral => 0.0,
    };
    let slope = grade / (1.0 + grade * grade).sqrt();
    let mut v = v0 + (drive_sign * cmd.drive_demand * params.max_drive_accel - GRAVITY * slope) * dt;

    let resist = (cmd.brake_demand * params.max_brake_decel + params.drag_coefficient * v0 * v0) * dt;
    v = v.signum() * (v.abs() - resist).max(0.0);
    if v < -params.reverse_speed_cap {
        v = -params.reverse_speed_cap;
    }

    let delta = params.road_wheel_angle(steering);
    let yaw_rate = v * delta.tan() / params.wheelbase;
    let heading = wrap_angle(state.heading + yaw_rate * dt);
    let dir = heading_unit(heading);
    let velocity = Vector3::new(v * dir.x, v * dir.y, v * grade);

    Ok(VehicleState {
        position: state.position + velocity * dt,
        velocity,
        heading,
        yaw_rate,
        speed: v.abs(),
    })
}

/// Finite-difference acceleration between two successive velocity samples,
/// rotated into the body frame at `heading`.
///
/// This is deliberately not an analytic derivative: a velocity jump within
/// one frame shows up as a large spike that the platform stage must absorb.
pub fn accel_by_differencing(v_prev: &Vector3<f64>, v_curr: &Vector3<f64>, heading: f64, dt: f64) -> Result<BodyAccel> {
    require_positive("differencing dt", dt)?;
    let a = (v_curr - v_prev) / dt;
    let (s, c) = heading.sin_cos();
    Ok(BodyAccel {
        longitudinal: a.x * c + a.y * s,
        lateral: -a.x * s + a.y * c,
        vertical: a.z,
    })
}

/// Centripetal acceleration `speed * yaw_rate`, positive toward the left.
pub fn centripetal_accel(speed: f64, yaw_rate: f64) -> f64 {
    speed * yaw_rate
}

/// Steering-wheel vibration scaling with vehicle speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HapticCalibration {
    pub freq_per_mps: f64,
    pub freq_cap_hz: f64,
    pub mag_per_mps: f64,
}

impl Default for HapticCalibration {
    fn default() -> Self {
        Self {
            freq_per_mps: 2.0,
            freq_cap_hz: 60.0,
            mag_per_mps: 0.025,
        }
    }
}

impl HapticCalibration {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("haptic freq_per_mps", self.freq_per_mps),
            ("haptic freq_cap_hz", self.freq_cap_hz),
            ("haptic mag_per_mps", self.mag_per_mps),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(what, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HapticCue {
    pub frequency: f64,
    pub magnitude: f64,
}

pub fn haptic_cue(speed: f64, cal: &HapticCalibration) -> HapticCue {
    let speed = speed.max(0.0);
    HapticCue {
        frequency: (cal.freq_per_mps * speed).min(cal.freq_cap_hz),
        magnitude: (cal.mag_per_mps * speed).min(1.0),
    }
}
