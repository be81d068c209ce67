//! Driving-simulator motion cueing pipeline: pedal conditioning, vehicle
//! dynamics, tilt and yaw cueing, a three-motor platform model and a
//! vsync frame scheduler, plus a scripted closed-track scenario.

pub mod batch;
pub mod config;
pub mod cueing;
pub mod error;
pub mod input;
pub mod platform;
pub mod run;
pub mod scenario;
pub mod scheduler;
pub mod telemetry;
pub mod vehicle;

pub use error::{Error, Result};
