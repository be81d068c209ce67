//! Per-frame telemetry rows, the CSV writer, and a hashing writer used for
//! determinism digests.

use std::io::{self, Write};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Bumped whenever the column set or order changes.
pub const TELEMETRY_SCHEMA_VERSION: u32 = 1;

pub const COLUMNS: [&str; 24] = [
    "frame_index",
    "sim_time_s",
    "throttle_raw",
    "throttle_filtered",
    "brake_filtered",
    "steering_deg",
    "gear",
    "speed_mps",
    "accel_long",
    "accel_lat",
    "centripetal",
    "yaw_rate",
    "cue_pitch_deg",
    "cue_roll_deg",
    "cue_yaw_deg",
    "pose_pitch_deg",
    "pose_roll_deg",
    "pose_yaw_deg",
    "motor_fl_deg",
    "motor_fr_deg",
    "motor_rear_deg",
    "input_latency_ms",
    "provenance_mismatch_ms",
    "crash_flag",
];

/// One row per rendered frame. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TelemetryRow {
    pub frame_index: u64,
    pub sim_time_s: f64,
    pub throttle_raw: f64,
    pub throttle_filtered: f64,
    pub brake_filtered: f64,
    pub steering_deg: f64,
    pub gear: &'static str,
    pub speed_mps: f64,
    pub accel_long: f64,
    pub accel_lat: f64,
    pub centripetal: f64,
    /// rad/s
    pub yaw_rate: f64,
    pub cue_pitch_deg: f64,
    pub cue_roll_deg: f64,
    pub cue_yaw_deg: f64,
    pub pose_pitch_deg: f64,
    pub pose_roll_deg: f64,
    pub pose_yaw_deg: f64,
    pub motor_fl_deg: f64,
    pub motor_fr_deg: f64,
    pub motor_rear_deg: f64,
    pub input_latency_ms: f64,
    pub provenance_mismatch_ms: f64,
    pub crash_flag: u8,
}

/// Passes bytes through to `inner` while hashing them.
pub struct DigestWriter<W> {
    inner: W,
    hasher: Sha256,
    bytes: u64,
}

impl<W: Write> DigestWriter<W> {
    pub fn new(inner: W) -> Self {
        Self {
            inner,
            hasher: Sha256::new(),
            bytes: 0,
        }
    }

    /// Hex SHA-256 of everything written so far, and the byte count.
    pub fn finish(self) -> (W, String, u64) {
        let digest = self.hasher.finalize();
        let hex = digest.iter().map(|b| format!("{b:02x}")).collect();
        (self.inner, hex, self.bytes)
    }
}

impl<W: Write> Write for DigestWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// CSV telemetry stream. The header is written on creation so an empty run
/// still yields a header-only file.
pub struct TelemetryWriter<W: Write> {
    csv: csv::Writer<DigestWriter<W>>,
    rows: u64,
}

impl<W: Write> TelemetryWriter<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut csv = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(DigestWriter::new(inner));
        csv.write_record(COLUMNS)?;
        Ok(Self { csv, rows: 0 })
    }

    pub fn write_row(&mut self, row: &TelemetryRow) -> Result<()> {
        self.csv.serialize(row)?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    /// Flushes and returns the inner writer with the hex digest of the
    /// complete CSV.
    pub fn finish(self) -> Result<(W, String)> {
        let digest_writer = self.csv.into_inner().map_err(|e| e.into_error())?;
        let (mut inner, hex, _) = digest_writer.finish();
        inner.flush()?;
        Ok((inner, hex))
    }
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
