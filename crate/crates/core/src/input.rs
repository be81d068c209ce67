//! Pedal conditioning ahead of the physics step.
//!
//! Throttle and brake each pass through a first-order low-pass filter. The
//! filtered throttle is then offset by a constant idle demand while the
//! shifter is in Drive, which models automatic-transmission creep. Steering
//! is passed through untouched: the rendered image and the platform both
//! follow the exact simulated state, so only the pedals are smoothed.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_positive, Error, Result};

/// Physical lock-to-lock half range of the steering wheel, degrees.
pub const STEERING_RANGE_DEG: f64 = 450.0;

/// Shifter position. Only Drive, Neutral and Reverse exist; there is no
/// clutch and no manual gear selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Gear {
    #[default]
    Drive,
    Neutral,
    Reverse,
}

impl Gear {
    /// Single-letter label used in telemetry.
    pub fn label(self) -> &'static str {
        match self {
            Gear::Drive => "D",
            Gear::Neutral => "N",
            Gear::Reverse => "R",
        }
    }
}

impl fmt::Display for Gear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One raw sample of the driver's controls.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriverInput {
    /// Throttle pedal travel in `[0, 1]`.
    pub throttle: f64,
    /// Brake pedal travel in `[0, 1]`.
    pub brake: f64,
    /// Steering wheel angle in degrees, positive to the left, `[-450, 450]`.
    pub steering: f64,
    pub gear: Gear,
}

impl DriverInput {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [("throttle", self.throttle), ("brake", self.brake)] {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(Error::invalid(what, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.steering.is_finite() && self.steering.abs() <= STEERING_RANGE_DEG) {
            return Err(Error::invalid(
                "steering",
                format!("must lie in [-450, 450] degrees, got {}", self.steering),
            ));
        }
        Ok(())
    }
}

/// Low-pass filter configuration for one pedal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedalFilterParams {
    time_constant: f64,
    step: f64,
}

impl PedalFilterParams {
    pub fn new(time_constant: f64, step: f64) -> Result<Self> {
        require_positive("pedal filter time constant", time_constant)?;
        require_positive("pedal filter step", step)?;
        Ok(Self { time_constant, step })
    }

    pub fn time_constant(&self) -> f64 {
        self.time_constant
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Same time constant with a different frame period.
    pub fn with_step(&self, step: f64) -> Result<Self> {
        Self::new(self.time_constant, step)
    }

    /// Smoothing coefficient `step / (time_constant + step)`, always in `(0, 1)`.
    pub fn alpha(&self) -> f64 {
        self.step / (self.time_constant + self.step)
    }
}

/// Filter memory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PedalFilterState {
    pub last_output: f64,
}

/// Advances the first-order low-pass by one frame.
pub fn low_pass_step(state: PedalFilterState, x: f64, params: &PedalFilterParams) -> Result<(f64, PedalFilterState)> {
    require_finite("pedal filter input", x)?;
    let y = state.last_output + params.alpha() * (x - state.last_output);
    Ok((y, PedalFilterState { last_output: y }))
}

/// Everything the pedal stage needs besides the per-pedal memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditioningParams {
    pub throttle: PedalFilterParams,
    pub brake: PedalFilterParams,
    /// Constant demand added after the throttle filter while in Drive.
    pub idle: f64,
}

impl ConditioningParams {
    pub fn new(throttle_tau: f64, brake_tau: f64, idle: f64, step: f64) -> Result<Self> {
        if !(idle.is_finite() && idle >= 0.0) {
            return Err(Error::invalid("idle demand", format!("must be >= 0, got {idle}")));
        }
        Ok(Self {
            throttle: PedalFilterParams::new(throttle_tau, step)?,
            brake: PedalFilterParams::new(brake_tau, step)?,
            idle,
        })
    }

    /// Re-targets both filters at a new frame period.
    pub fn with_step(&self, step: f64) -> Result<Self> {
        Ok(Self {
            throttle: self.throttle.with_step(step)?,
            brake: self.brake.with_step(step)?,
            idle: self.idle,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PedalStates {
    pub throttle: PedalFilterState,
    pub brake: PedalFilterState,
}

/// Pedal demand handed to the vehicle model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConditionedCommand {
    /// Filtered throttle plus the idle term, `>= 0`.
    pub drive_demand: f64,
    /// Filtered brake, `[0, 1]`.
    pub brake_demand: f64,
    pub gear: Gear,
}

/// Filters both pedals one step and applies the idle demand in Drive.
pub fn condition_pedals(
    input: &DriverInput,
    states: PedalStates,
    params: &ConditioningParams,
) -> Result<(ConditionedCommand, PedalStates)> {
    input.validate()?;
    let (throttle, throttle_state) = low_pass_step(states.throttle, input.throttle, &params.throttle)?;
    let (brake, brake_state) = low_pass_step(states.brake, input.brake, &params.brake)?;
    let idle = if input.gear == Gear::Drive { params.idle } else { 0.0 };
    Ok((
        ConditionedCommand {
            drive_demand: throttle + idle,
            brake_demand: brake,
            gear: input.gear,
        },
        PedalStates {
            throttle: throttle_state,
            brake: brake_state,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const FRAME: f64 = 1.0 / 90.0;

    fn params() -> PedalFilterParams {
        PedalFilterParams::new(0.2, FRAME).unwrap()
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let (y, s) = low_pass_step(PedalFilterState::default(), 0.0, &params()).unwrap();
        assert_eq!(y, 0.0);
        assert_eq!(s.last_output, 0.0);
    }

    #[test]
    fn first_step_of_unit_input() {
        // alpha = (1/90) / (0.2 + 1/90), evaluated offline.
        let (y, _) = low_pass_step(PedalFilterState::default(), 1.0, &params()).unwrap();
        assert_relative_eq!(y, 0.052_631_578_947_368_42, epsilon = 1e-15);
    }

    #[test]
    fn constant_input_converges_monotonically() {
        let p = params();
        let mut s = PedalFilterState::default();
        let mut prev = 0.0;
        for _ in 0..2000 {
            let (y, next) = low_pass_step(s, 0.7, &p).unwrap();
            assert!(y >= prev && y <= 0.7);
            prev = y;
            s = next;
        }
        assert_relative_eq!(prev, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        assert!(low_pass_step(PedalFilterState::default(), f64::NAN, &params()).is_err());
        assert!(low_pass_step(PedalFilterState::default(), f64::INFINITY, &params()).is_err());
    }

    #[test]
    fn bad_params_are_rejected() {
        assert!(PedalFilterParams::new(0.0, FRAME).is_err());
        assert!(PedalFilterParams::new(0.2, -1.0).is_err());
        assert!(ConditioningParams::new(0.2, 0.2, -0.1, FRAME).is_err());
    }

    fn settled(gear: Gear, idle: f64) -> ConditionedCommand {
        let p = ConditioningParams::new(0.2, 0.2, idle, FRAME).unwrap();
        let input = DriverInput {
            gear,
            ..Default::default()
        };
        let mut states = PedalStates::default();
        let mut cmd = ConditionedCommand::default();
        for _ in 0..10 {
            (cmd, states) = condition_pedals(&input, states, &p).unwrap();
        }
        cmd
    }

    #[test]
    fn neutral_has_no_idle_demand() {
        assert_eq!(settled(Gear::Neutral, 0.05).drive_demand, 0.0);
    }

    #[test]
    fn drive_adds_idle_demand() {
        assert_eq!(settled(Gear::Drive, 0.05).drive_demand, 0.05);
    }

    #[test]
    fn drive_step_response_includes_idle() {
        let p = ConditioningParams::new(0.2, 0.2, 0.05, FRAME).unwrap();
        let input = DriverInput {
            throttle: 1.0,
            ..Default::default()
        };
        let (cmd, states) = condition_pedals(&input, PedalStates::default(), &p).unwrap();
        assert_relative_eq!(cmd.drive_demand, 0.102_631_578_947_368_42, epsilon = 1e-15);
        assert_eq!(cmd.brake_demand, 0.0);
        assert_relative_eq!(states.throttle.last_output, 0.052_631_578_947_368_42, epsilon = 1e-15);
    }

    #[test]
    fn invalid_driver_input_is_rejected() {
        let p = ConditioningParams::new(0.2, 0.2, 0.05, FRAME).unwrap();
        for bad in [
            DriverInput {
                throttle: 1.2,
                ..Default::default()
            },
            DriverInput {
                brake: -0.1,
                ..Default::default()
            },
            DriverInput {
                steering: 451.0,
                ..Default::default()
            },
        ] {
            assert!(condition_pedals(&bad, PedalStates::default(), &p).is_err());
        }
    }

    #[test]
    fn small_time_constant_passes_input_through() {
        let mut last = 0.0;
        for tau in [1.0, 0.1, 1e-3, 1e-6] {
            let p = PedalFilterParams::new(tau, FRAME).unwrap();
            let (y, _) = low_pass_step(PedalFilterState::default(), 1.0, &p).unwrap();
            assert!(y > last);
            last = y;
        }
        assert!(last > 0.9999);
    }

    proptest! {
        #[test]
        fn output_stays_in_unit_interval(
            xs in prop::collection::vec(0.0f64..=1.0, 1..200),
            tau in 1e-3f64..5.0,
        ) {
            let p = PedalFilterParams::new(tau, FRAME).unwrap();
            let mut s = PedalFilterState::default();
            for x in xs {
                let (y, next) = low_pass_step(s, x, &p).unwrap();
                prop_assert!((0.0..=1.0).contains(&y));
                s = next;
            }
        }

        #[test]
        fn monotone_input_gives_monotone_output(
            mut xs in prop::collection::vec(0.0f64..=1.0, 1..200),
            tau in 1e-3f64..5.0,
        ) {
            xs.sort_by(f64::total_cmp);
            let p = PedalFilterParams::new(tau, FRAME).unwrap();
            let mut s = PedalFilterState::default();
            let mut prev = 0.0;
            for x in xs {
                let (y, next) = low_pass_step(s, x, &p).unwrap();
                prop_assert!(y >= prev);
                prev = y;
                s = next;
            }
        }
    }
}
