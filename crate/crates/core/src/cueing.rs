//! Motion-cueing: maps vehicle motion to a requested platform pose.
//!
//! Pitch and roll are *tilt* cues: a scaled copy of this frame's
//! acceleration with no temporal filtering, so the platform never lags the
//! rendered image. Because nothing smooths them, differencing spikes pass
//! straight through to the platform stage, which owns limiting.
//!
//! Yaw uses a washout: the yaw rate is high-passed, integrated into a yaw
//! command, and the command is walked back toward zero at a fixed
//! subthreshold rate.
//!
//! Sign conventions for the produced pose:
//! - positive pitch tilts the seat forward (nose down), so forward
//!   acceleration yields negative pitch and braking yields positive pitch;
//! - positive roll lowers the right side, so a left turn (positive
//!   centripetal acceleration) yields positive roll and the occupant is
//!   pressed outward;
//! - positive yaw follows the vehicle's positive (left) yaw.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::vehicle::{centripetal_accel, BodyAccel};

/// Which signal feeds the roll channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RollSource {
    /// `speed * yaw_rate` from the simulated state.
    #[default]
    Centripetal,
    /// Lateral component of the differenced acceleration.
    Differenced,
    /// Both terms added.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CueGains {
    /// Degrees of pitch per m/s² of longitudinal acceleration.
    pub pitch_gain: f64,
    /// Degrees of roll per m/s² of lateral/centripetal acceleration.
    pub roll_gain: f64,
    /// Degrees of platform yaw per degree of washed-out vehicle yaw.
    pub yaw_gain: f64,
}

impl Default for CueGains {
    /// 1.5 deg/(m/s²) puts a 4 m/s² turn at 6° of roll, two thirds of the
    /// ±9° roll envelope.
    fn default() -> Self {
        Self {
            pitch_gain: 1.5,
            roll_gain: 1.5,
            yaw_gain: 1.0,
        }
    }
}

impl CueGains {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("pitch_gain", self.pitch_gain),
            ("roll_gain", self.roll_gain),
            ("yaw_gain", self.yaw_gain),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(what, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Unfiltered tilt cues for one frame. Returns `(pitch, roll)` in degrees.
pub fn tilt_cues(accel: &BodyAccel, centripetal: f64, gains: &CueGains, source: RollSource) -> (f64, f64) {
    let lateral = match source {
        RollSource::Centripetal => centripetal,
        RollSource::Differenced => accel.lateral,
        RollSource::Sum => centripetal + accel.lateral,
    };
    (-gains.pitch_gain * accel.longitudinal, gains.roll_gain * lateral)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HighPassState {
    pub last_input: f64,
    pub last_output: f64,
}

/// First-order high-pass: `y = beta * (y_prev + x - x_prev)` with
/// `beta = tau / (tau + dt)`.
pub fn high_pass_step(state: HighPassState, x: f64, time_constant: f64, dt: f64) -> (f64, HighPassState) {
    let beta = time_constant / (time_constant + dt);
    let y = beta * (state.last_output + (x - state.last_input));
    (
        y,
        HighPassState {
            last_input: x,
            last_output: y,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawWashoutParams {
    /// High-pass time constant, seconds.
    pub time_constant: f64,
    /// Return-to-centre rate, degrees per second.
    pub subthreshold_rate: f64,
    pub yaw_gain: f64,
}

impl Default for YawWashoutParams {
    fn default() -> Self {
        Self {
            time_constant: 1.0,
            subthreshold_rate: 2.0,
            yaw_gain: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct YawWashoutState {
    pub hp: HighPassState,
    /// Degrees.
    pub yaw_cmd: f64,
    /// Magnitude of the most recent return-to-centre step, degrees.
    pub last_return_step: f64,
}

/// Advances the yaw washout one frame. `yaw_rate` is in rad/s, the command
/// is in degrees.
pub fn yaw_washout_step(
    state: YawWashoutState,
    yaw_rate: f64,
    params: &YawWashoutParams,
    dt: f64,
) -> Result<(f64, YawWashoutState)> {
    require_positive("washout dt", dt)?;
    require_positive("subthreshold rate", params.subthreshold_rate)?;
    require_positive("washout time constant", params.time_constant)?;

    let (hp_out, hp) = high_pass_step(state.hp, yaw_rate, params.time_constant, dt);
    let driven = state.yaw_cmd + params.yaw_gain * (hp_out * dt).to_degrees();
    let max_return = params.subthreshold_rate * dt;
    let back = driven.abs().min(max_return);
    let yaw_cmd = driven - back * driven.signum();
    Ok((
        yaw_cmd,
        YawWashoutState {
            hp,
            yaw_cmd,
            last_return_step: back,
        },
    ))
}

/// Unclamped platform pose request, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CueTarget {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CueingParams {
    pub gains: CueGains,
    pub roll_source: RollSource,
    pub hp_time_constant: f64,
    pub subthreshold_rate: f64,
}

impl CueingParams {
    pub fn defaults() -> Self {
        Self {
            gains: CueGains::default(),
            roll_source: RollSource::Centripetal,
            hp_time_constant: 1.0,
            subthreshold_rate: 2.0,
        }
    }

    pub fn washout(&self) -> YawWashoutParams {
        YawWashoutParams {
            time_constant: self.hp_time_constant,
            subthreshold_rate: self.subthreshold_rate,
            yaw_gain: self.gains.yaw_gain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        require_positive("hp_time_constant", self.hp_time_constant)?;
        require_positive("subthreshold_rate", self.subthreshold_rate)
    }
}

/// Builds one frame's cue from the simulated state. No clamping happens
/// here; the platform model owns the limits.
pub fn compose_cue_frame(
    accel: &BodyAccel,
    speed: f64,
    yaw_rate: f64,
    state: YawWashoutState,
    params: &CueingParams,
    dt: f64,
) -> Result<(CueTarget, YawWashoutState)> {
    let centripetal = centripetal_accel(speed, yaw_rate);
    let (pitch, roll) = tilt_cues(accel, centripetal, &params.gains, params.roll_source);
    let (yaw, state) = yaw_washout_step(state, yaw_rate, &params.washout(), dt)?;
    Ok((CueTarget { pitch, roll, yaw }, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const FRAME: f64 = 1.0 / 90.0;

    #[test]
    fn tilt_examples() {
        let g = CueGains::default();
        assert_eq!(
            tilt_cues(&BodyAccel::default(), 0.0, &g, RollSource::Centripetal),
            (0.0, 0.0)
        );

        let a = BodyAccel {
            longitudinal: 2.0,
            ..Default::default()
        };
        let (pitch, roll) = tilt_cues(&a, 0.0, &g, RollSource::Centripetal);
        assert_relative_eq!(pitch, -3.0);
        assert_eq!(roll, 0.0);

        let (_, roll) = tilt_cues(&BodyAccel::default(), 4.0, &g, RollSource::Centripetal);
        assert_relative_eq!(roll, 6.0);
    }

    #[test]
    fn roll_source_routing() {
        let g = CueGains::default();
        let a = BodyAccel {
            lateral: 1.0,
            ..Default::default()
        };
        assert_eq!(tilt_cues(&a, 2.0, &g, RollSource::Centripetal).1, 3.0);
        assert_eq!(tilt_cues(&a, 2.0, &g, RollSource::Differenced).1, 1.5);
        assert_eq!(tilt_cues(&a, 2.0, &g, RollSource::Sum).1, 4.5);
    }

    #[test]
    fn high_pass_first_step() {
        let (y, _) = high_pass_step(HighPassState::default(), 1.0, 1.0, FRAME);
        assert_relative_eq!(y, 90.0 / 91.0, epsilon = 1e-15);
    }

    #[test]
    fn high_pass_rejects_dc() {
        let mut s = HighPassState::default();
        let mut prev = f64::INFINITY;
        for _ in 0..3000 {
            let (y, next) = high_pass_step(s, 0.5, 1.0, FRAME);
            assert!(y.abs() < prev);
            prev = y.abs();
            s = next;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn high_pass_passes_alternation() {
        // Steady state of the alternating recurrence is 2*beta / (1 + beta).
        let beta = 90.0 / 91.0;
        let steady = 2.0 * beta / (1.0 + beta);
        let mut s = HighPassState::default();
        let mut y = 0.0;
        for k in 0..2000 {
            let x = if k % 2 == 0 { 1.0 } else { -1.0 };
            (y, s) = high_pass_step(s, x, 1.0, FRAME);
        }
        assert_relative_eq!(y.abs(), steady, epsilon = 1e-9);
        assert!(y.abs() > 0.99);
    }

    #[test]
    fn washout_returns_at_subthreshold_rate() {
        let p = YawWashoutParams::default();
        let mut s = YawWashoutState {
            yaw_cmd: 5.0,
            ..Default::default()
        };
        let step = p.subthreshold_rate * FRAME;
        let mut frames = 0;
        while s.yaw_cmd > 1e-9 {
            let before = s.yaw_cmd;
            let (yaw, next) = yaw_washout_step(s, 0.0, &p, FRAME).unwrap();
            assert!(yaw >= 0.0);
            assert_relative_eq!(before - yaw, step.min(before), epsilon = 1e-12);
            s = next;
            frames += 1;
        }
        // 5 degrees at 2 deg/s
        assert_eq!(frames, 225);
    }

    #[test]
    fn washout_impulse() {
        let p = YawWashoutParams::default();
        let beta = 90.0 / 91.0;
        let (yaw, mut s) = yaw_washout_step(YawWashoutState::default(), 3.0, &p, FRAME).unwrap();
        let jump = (beta * 3.0 * FRAME).to_degrees();
        assert_relative_eq!(yaw, jump - p.subthreshold_rate * FRAME, epsilon = 1e-12);
        for _ in 0..400 {
            (_, s) = yaw_washout_step(s, 0.0, &p, FRAME).unwrap();
            assert!(s.last_return_step <= p.subthreshold_rate * FRAME + 1e-15);
        }
        assert!(s.yaw_cmd.abs() < 1e-9);
    }

    #[test]
    fn washout_rejects_bad_params() {
        let mut p = YawWashoutParams::default();
        assert!(yaw_washout_step(YawWashoutState::default(), 0.0, &p, 0.0).is_err());
        p.subthreshold_rate = 0.0;
        assert!(yaw_washout_step(YawWashoutState::default(), 0.0, &p, FRAME).is_err());
    }

    #[test]
    fn compose_decouples_channels() {
        let p = CueingParams::defaults();
        let (t, _) = compose_cue_frame(&BodyAccel::default(), 0.0, 0.0, YawWashoutState::default(), &p, FRAME).unwrap();
        assert_eq!(t, CueTarget::default());

        let braking = BodyAccel {
            longitudinal: -7.0,
            ..Default::default()
        };
        let (t, _) = compose_cue_frame(&braking, 15.0, 0.0, YawWashoutState::default(), &p, FRAME).unwrap();
        assert!(t.pitch > 0.0);
        assert_eq!(t.roll, 0.0);
        assert_eq!(t.yaw, 0.0);
    }

    proptest! {
        #[test]
        fn tilt_is_linear(
            lon in -20.0f64..20.0, lat in -20.0f64..20.0, cen in -20.0f64..20.0, c in -5.0f64..5.0,
        ) {
            let g = CueGains::default();
            let a = BodyAccel { longitudinal: lon, lateral: lat, vertical: 0.0 };
            for src in [RollSource::Centripetal, RollSource::Differenced, RollSource::Sum] {
                let (p1, r1) = tilt_cues(&a, cen, &g, src);
                let (p2, r2) = tilt_cues(&a.scaled(c), cen * c, &g, src);
                prop_assert!((p2 - c * p1).abs() <= 1e-9 * (1.0 + p1.abs() * c.abs()));
                prop_assert!((r2 - c * r1).abs() <= 1e-9 * (1.0 + r1.abs() * c.abs()));
            }
        }

        #[test]
        fn tilt_is_memoryless(
            frames in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..50),
        ) {
            let g = CueGains::default();
            let eval = |f: &(f64, f64)| {
                tilt_cues(&BodyAccel { longitudinal: f.0, lateral: 0.0, vertical: 0.0 }, f.1, &g, RollSource::Centripetal)
            };
            let forward: Vec<_> = frames.iter().map(eval).collect();
            let mut backward: Vec<_> = frames.iter().rev().map(eval).collect();
            backward.reverse();
            prop_assert_eq!(forward, backward);
        }

        #[test]
        fn return_step_is_bounded(
            rates in prop::collection::vec(-1.0f64..1.0, 1..300),
            subthreshold in 0.1f64..10.0,
        ) {
            let p = YawWashoutParams { subthreshold_rate: subthreshold, ..Default::default() };
            let mut s = YawWashoutState::default();
            for r in rates {
                let (_, next) = yaw_washout_step(s, r, &p, FRAME).unwrap();
                prop_assert!(next.last_return_step <= subthreshold * FRAME + 1e-15);
                s = next;
            }
        }
    }
}
