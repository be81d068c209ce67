//! Three-motor moving base: pose limits, motor kinematics, servo shaping
//! and motor rate limiting.
//!
//! The two front motors share an axle. Driving them in the same direction
//! pitches the seat, driving them in opposite directions rolls it. The rear
//! motor swings the seat and front assembly in yaw. Motor maps are linear
//! and symmetric, so zero motor angles give a level pose; the asymmetric
//! pitch envelope is enforced in pose space by [`clamp_pose`].

use crate::error::{require_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatformLimits {
    pub pitch: Interval,
    pub roll: Interval,
    pub yaw: Interval,
    /// Symmetric motor travel, ± degrees.
    pub motor_range: f64,
    /// Maximum motor speed, degrees per second.
    pub motor_rate: f64,
}

impl Default for PlatformLimits {
    fn default() -> Self {
        Self {
            pitch: Interval::new(-4.4, 6.6),
            roll: Interval::new(-9.0, 9.0),
            yaw: Interval::new(-10.0, 10.0),
            motor_range: 20.0,
            motor_rate: 80.0,
        }
    }
}

impl PlatformLimits {
    pub fn validate(&self) -> Result<()> {
        for (what, iv) in [
            ("pitch range", self.pitch),
            ("roll range", self.roll),
            ("yaw range", self.yaw),
        ] {
            if !(iv.min.is_finite() && iv.max.is_finite() && iv.min <= 0.0 && 0.0 <= iv.max && iv.min < iv.max) {
                return Err(Error::invalid(
                    what,
                    format!("must be an ordered interval containing 0, got [{}, {}]", iv.min, iv.max),
                ));
            }
        }
        require_positive("motor_range", self.motor_range)?;
        require_positive("motor_rate", self.motor_rate)
    }

    /// Pitch degrees per degree of common-mode front motor travel.
    pub fn pitch_per_motor(&self) -> f64 {
        self.pitch.max / self.motor_range
    }

    /// Roll degrees per degree of differential front motor travel.
    pub fn roll_per_motor(&self) -> f64 {
        self.roll.max.max(-self.roll.min) / self.motor_range
    }

    /// Yaw degrees per degree of rear motor travel.
    pub fn yaw_per_motor(&self) -> f64 {
        self.yaw.max.max(-self.yaw.min) / self.motor_range
    }
}

/// Platform orientation, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlatformPose {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
}

impl PlatformPose {
    pub fn within(&self, limits: &PlatformLimits, tol: f64) -> bool {
        self.pitch >= limits.pitch.min - tol
            && self.pitch <= limits.pitch.max + tol
            && self.roll >= limits.roll.min - tol
            && self.roll <= limits.roll.max + tol
            && self.yaw >= limits.yaw.min - tol
            && self.yaw <= limits.yaw.max + tol
    }
}

/// Servo angles, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorAngles {
    pub front_left: f64,
    pub front_right: f64,
    pub rear: f64,
}

impl MotorAngles {
    pub fn to_array(self) -> [f64; 3] {
        [self.front_left, self.front_right, self.rear]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self {
            front_left: a[0],
            front_right: a[1],
            rear: a[2],
        }
    }

    fn map(self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_array(self.to_array().map(&mut f))
    }
}

pub fn clamp_pose(pose: &PlatformPose, limits: &PlatformLimits) -> PlatformPose {
    PlatformPose {
        pitch: limits.pitch.clamp(pose.pitch),
        roll: limits.roll.clamp(pose.roll),
        yaw: limits.yaw.clamp(pose.yaw),
    }
}

/// Pose to motor angles. When common-mode plus differential travel would
/// exceed the motor range, both are scaled down together so the requested
/// pitch:roll ratio is kept.
pub fn inverse_kinematics(pose: &PlatformPose, limits: &PlatformLimits) -> MotorAngles {
    let mut common = pose.pitch / limits.pitch_per_motor();
    let mut diff = pose.roll / limits.roll_per_motor();
    let travel = common.abs() + diff.abs();
    if travel > limits.motor_range {
        let k = limits.motor_range / travel;
        common *= k;
        diff *= k;
    }
    let rear = (pose.yaw / limits.yaw_per_motor()).clamp(-limits.motor_range, limits.motor_range);
    MotorAngles {
        front_left: common + diff,
        front_right: common - diff,
        rear,
    }
}

pub fn forward_kinematics(motors: &MotorAngles, limits: &PlatformLimits) -> PlatformPose {
    PlatformPose {
        pitch: limits.pitch_per_motor() * (motors.front_left + motors.front_right) / 2.0,
        roll: limits.roll_per_motor() * (motors.front_left - motors.front_right) / 2.0,
        yaw: limits.yaw_per_motor() * motors.rear,
    }
}

/// Moves each motor toward its target by at most `motor_rate * dt`.
/// Returns the achieved angles and how many motors were held back.
pub fn rate_limit_step(
    prev: &MotorAngles,
    target: &MotorAngles,
    dt: f64,
    limits: &PlatformLimits,
) -> (MotorAngles, usize) {
    let max_step = limits.motor_rate * dt;
    let mut saturated = 0;
    let p = prev.to_array();
    let t = target.to_array();
    let mut out = [0.0; 3];
    for i in 0..3 {
        let delta = t[i] - p[i];
        out[i] = if delta.abs() > max_step {
            saturated += 1;
            p[i] + max_step.copysign(delta)
        } else {
            t[i]
        };
    }
    (MotorAngles::from_array(out), saturated)
}

/// Per-motor command shaping as exposed by the vendor servo utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoParams {
    /// Commands with magnitude below this are zeroed, degrees.
    pub dead_zone: f64,
    /// Symmetric clip, degrees; may not exceed the motor range.
    pub clip: f64,
    /// First-order smoothing time constant, seconds; 0 disables.
    pub smoothing_time_constant: f64,
    /// Accepted for parity with the vendor tool; has no kinematic effect.
    pub power_usage: f64,
}

impl Default for ServoParams {
    fn default() -> Self {
        Self {
            dead_zone: 0.1,
            clip: 20.0,
            smoothing_time_constant: 0.0,
            power_usage: 100.0,
        }
    }
}

impl ServoParams {
    pub fn validate(&self, limits: &PlatformLimits) -> Result<()> {
        if !(self.dead_zone.is_finite() && self.dead_zone >= 0.0) {
            return Err(Error::invalid(
                "dead_zone",
                format!("must be >= 0, got {}", self.dead_zone),
            ));
        }
        if !(self.clip.is_finite() && self.clip > 0.0 && self.clip <= limits.motor_range) {
            return Err(Error::invalid(
                "clip",
                format!("must lie in (0, {}], got {}", limits.motor_range, self.clip),
            ));
        }
        if !(self.smoothing_time_constant.is_finite() && self.smoothing_time_constant >= 0.0) {
            return Err(Error::invalid(
                "smoothing_time_constant",
                format!("must be >= 0, got {}", self.smoothing_time_constant),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ServoState {
    pub smoothed: MotorAngles,
}

/// Dead zone, then clip, then optional first-order smoothing.
pub fn apply_servo_shaping(
    cmd: &MotorAngles,
    state: ServoState,
    params: &ServoParams,
    dt: f64,
) -> Result<(MotorAngles, ServoState)> {
    require_positive("servo dt", dt)?;
    let shaped = cmd.map(|theta| {
        let theta = if theta.abs() < params.dead_zone { 0.0 } else { theta };
        theta.clamp(-params.clip, params.clip)
    });
    let out = if params.smoothing_time_constant > 0.0 {
        let alpha = dt / (params.smoothing_time_constant + dt);
        let prev = state.smoothed.to_array();
        let target = shaped.to_array();
        MotorAngles::from_array(std::array::from_fn(|i| prev[i] + alpha * (target[i] - prev[i])))
    } else {
        shaped
    };
    Ok((out, ServoState { smoothed: out }))
}

/// Full per-step platform chain state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlatformState {
    pub servo: ServoState,
    pub motors: MotorAngles,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlatformOutput {
    pub clamped: PlatformPose,
    pub motors: MotorAngles,
    pub achieved: PlatformPose,
    /// Motors held back by the rate limiter this step.
    pub rate_saturated: usize,
}

/// Clamp, inverse kinematics, servo shaping, rate limit, forward kinematics.
pub fn drive_platform(
    request: &PlatformPose,
    state: PlatformState,
    limits: &PlatformLimits,
    servo: &ServoParams,
    dt: f64,
) -> Result<(PlatformOutput, PlatformState)> {
    let clamped = clamp_pose(request, limits);
    let target = inverse_kinematics(&clamped, limits);
    let (shaped, servo_state) = apply_servo_shaping(&target, state.servo, servo, dt)?;
    let (motors, rate_saturated) = rate_limit_step(&state.motors, &shaped, dt, limits);
    let achieved = forward_kinematics(&motors, limits);
    Ok((
        PlatformOutput {
            clamped,
            motors,
            achieved,
            rate_saturated,
        },
        PlatformState {
            servo: servo_state,
            motors,
        },
    ))
}
