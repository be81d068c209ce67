//! Test track and the scripted driver that laps it.

pub mod driver;
pub mod track;

pub use driver::{scripted_driver_step, starting_state, DriverObservation, DriverParams, DriverScriptState};
pub use track::{build_track, sample_track, Track, TrackParams, TrackSample, TrackSegment};
