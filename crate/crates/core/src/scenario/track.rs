//! Closed highway loop with nine graded 100 m-radius turns.
//!
//! Every (sweep, slope) pair from {30°, 60°, 90°} × {incline, decline,
//! plateau} appears exactly once. Straights run between the turns and are
//! level except for short vertical transitions at each end, so the grade
//! only changes on straights. Closure is solved analytically: after laying
//! out the nominal loop, the final connector straight and one other
//! straight are resized so the loop returns to its start.
//!
//! Arclength is measured in the horizontal plane.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::vehicle::wrap_angle;

/// Radius of every stimulus turn, metres.
pub const TURN_RADIUS: f64 = 100.0;
pub const SWEEPS_DEG: [f64; 3] = [30.0, 60.0, 90.0];
pub const LANES: usize = 4;

/// Minimum length of the closure-adjusted straights beyond their vertical
/// transitions, metres.
const MIN_FLAT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnDirection {
    Left,
    Right,
}

impl TurnDirection {
    pub fn sign(self) -> f64 {
        match self {
            TurnDirection::Left => 1.0,
            TurnDirection::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slope {
    Incline,
    Decline,
    Plateau,
}

impl Slope {
    pub fn grade(self, magnitude: f64) -> f64 {
        match self {
            Slope::Incline => magnitude,
            Slope::Decline => -magnitude,
            Slope::Plateau => 0.0,
        }
    }
}

/// One stimulus turn in the loop order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnSpec {
    pub sweep_deg: f64,
    pub slope: Slope,
    pub direction: TurnDirection,
}

/// Default turn sequence. Seven left and two right turns give a net
/// rotation of one full lap, and this order keeps the closure adjustment
/// small with the default straight length.
pub fn default_turn_order() -> Vec<TurnSpec> {
    use Slope::*;
    use TurnDirection::*;
    [
        (90.0, Plateau, Left),
        (30.0, Incline, Left),
        (60.0, Incline, Left),
        (30.0, Decline, Right),
        (30.0, Plateau, Left),
        (90.0, Incline, Left),
        (90.0, Decline, Left),
        (60.0, Decline, Right),
        (60.0, Plateau, Left),
    ]
    .into_iter()
    .map(|(sweep_deg, slope, direction)| TurnSpec {
        sweep_deg,
        slope,
        direction,
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackParams {
    /// Nominal straight length between turns, metres.
    pub straight_length: f64,
    /// Grade magnitude of inclined and declined turns (rise/run).
    pub grade: f64,
    pub lane_width: f64,
    /// Length of each vertical transition on a straight, metres.
    pub grade_transition: f64,
    pub turn_order: Vec<TurnSpec>,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            straight_length: 150.0,
            grade: 0.05,
            lane_width: 3.5,
            grade_transition: 20.0,
            turn_order: default_turn_order(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SegmentKind {
    Straight {
        length: f64,
        /// Grade at the start and end of the straight; it ramps linearly to
        /// and from zero over the transition length.
        entry_grade: f64,
        exit_grade: f64,
        transition: f64,
    },
    Arc {
        radius: f64,
        sweep_deg: f64,
        direction: TurnDirection,
        slope: Slope,
        grade: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackSegment {
    #[serde(flatten)]
    pub kind: SegmentKind,
    /// Arclength at the segment start.
    pub start_s: f64,
    pub start: [f64; 3],
    pub start_heading: f64,
}

impl TrackSegment {
    pub fn length(&self) -> f64 {
        match self.kind {
            SegmentKind::Straight { length, .. } => length,
            SegmentKind::Arc { radius, sweep_deg, .. } => radius * sweep_deg.to_radians(),
        }
    }

    pub fn is_arc(&self) -> bool {
        matches!(self.kind, SegmentKind::Arc { .. })
    }

    fn start_xy(&self) -> Vector2<f64> {
        Vector2::new(self.start[0], self.start[1])
    }

    /// Grade and elevation gain at local arclength `u`.
    fn vertical(&self, u: f64) -> (f64, f64) {
        match self.kind {
            SegmentKind::Arc { grade, .. } => (grade, grade * u),
            SegmentKind::Straight {
                length,
                entry_grade,
                exit_grade,
                transition,
            } => {
                let t = transition;
                // Entry ramp: grade falls from entry_grade to 0 over [0, t].
                let entry_u = u.min(t);
                let mut dz = entry_grade * (entry_u - entry_u * entry_u / (2.0 * t));
                let mut grade = if u < t { entry_grade * (1.0 - u / t) } else { 0.0 };
                // Exit ramp: grade rises from 0 to exit_grade over [length - t, length].
                let ramp = u - (length - t);
                if ramp > 0.0 {
                    dz += exit_grade * ramp * ramp / (2.0 * t);
                    grade += exit_grade * ramp / t;
                }
                (grade, dz)
            }
        }
    }

    fn sample(&self, u: f64) -> TrackSample {
        let (grade, dz) = self.vertical(u);
        let p0 = self.start_xy();
        let (xy, heading) = match self.kind {
            SegmentKind::Straight { .. } => {
                let (s, c) = self.start_heading.sin_cos();
                (p0 + u * Vector2::new(c, s), self.start_heading)
            }
            SegmentKind::Arc { radius, direction, .. } => {
                let sign = direction.sign();
                let centre = self.centre(radius, sign);
                let heading = self.start_heading + sign * u / radius;
                (
                    centre + sign * radius * Vector2::new(heading.sin(), -heading.cos()),
                    heading,
                )
            }
        };
        TrackSample {
            position: Vector3::new(xy.x, xy.y, self.start[2] + dz),
            heading: wrap_angle(heading),
            grade,
        }
    }

    fn centre(&self, radius: f64, sign: f64) -> Vector2<f64> {
        let (s, c) = self.start_heading.sin_cos();
        self.start_xy() + sign * radius * Vector2::new(-s, c)
    }

    /// Closest point on this segment to `p`: (local arclength, signed
    /// lateral offset positive to the left, planar distance).
    fn project(&self, p: &Vector2<f64>) -> (f64, f64, f64) {
        match self.kind {
            SegmentKind::Straight { length, .. } => {
                let (s, c) = self.start_heading.sin_cos();
                let dir = Vector2::new(c, s);
                let d = p - self.start_xy();
                let along = d.dot(&dir);
                let lateral = dir.x * d.y - dir.y * d.x;
                let u = along.clamp(0.0, length);
                let dist = (p - (self.start_xy() + u * dir)).norm();
                (u, lateral, dist)
            }
            SegmentKind::Arc {
                radius,
                sweep_deg,
                direction,
                ..
            } => {
                let sign = direction.sign();
                let centre = self.centre(radius, sign);
                let r_vec = p - centre;
                let r = r_vec.norm();
                let start_vec = self.start_xy() - centre;
                let swept = sign * wrap_angle(r_vec.y.atan2(r_vec.x) - start_vec.y.atan2(start_vec.x));
                let sweep = sweep_deg.to_radians();
                // Outside the arc's angular span: snap to the nearer end.
                let theta = if (0.0..=sweep).contains(&swept) {
                    swept
                } else if wrap_angle(swept - sweep).abs() < swept.abs() {
                    sweep
                } else {
                    0.0
                };
                let u = theta * radius;
                let lateral = sign * (radius - r);
                let dist = (p - self.sample(u).position.xy()).norm();
                (u, lateral, dist)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub position: Vector3<f64>,
    pub heading: f64,
    pub grade: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub s: f64,
    /// Signed distance from the road centreline, positive to the left.
    pub lateral: f64,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    segments: Vec<TrackSegment>,
    lane_width: f64,
    lap_length: f64,
}

impl Track {
    pub fn segments(&self) -> &[TrackSegment] {
        &self.segments
    }

    pub fn lane_width(&self) -> f64 {
        self.lane_width
    }

    pub fn lap_length(&self) -> f64 {
        self.lap_length
    }

    /// Offset of the driving lane centre from the road centreline: the
    /// lane next to the median on the right-hand carriageway.
    pub fn driving_lane_offset(&self) -> f64 {
        -0.5 * self.lane_width
    }

    /// Half the paved width; beyond this the vehicle is off the road.
    pub fn road_half_width(&self) -> f64 {
        0.5 * LANES as f64 * self.lane_width
    }

    pub fn arcs(&self) -> impl Iterator<Item = &TrackSegment> {
        self.segments.iter().filter(|s| s.is_arc())
    }

    pub fn segment_at(&self, s: f64) -> usize {
        let s = s.rem_euclid(self.lap_length);
        match self.segments.binary_search_by(|seg| seg.start_s.total_cmp(&s)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    /// Evaluates the end of the last segment without wrapping, so callers
    /// can measure closure error directly.
    pub fn end_sample(&self) -> TrackSample {
        let last = self.segments.last().expect("track has segments");
        last.sample(last.length())
    }

    /// Closest centreline point to `p`, searching the segments around
    /// `hint` when one is given and the whole loop otherwise.
    pub fn project(&self, p: &Vector2<f64>, hint: Option<usize>) -> Projection {
        let n = self.segments.len();
        let candidates: Vec<usize> = match hint {
            Some(h) => vec![(h + n - 1) % n, h % n, (h + 1) % n],
            None => (0..n).collect(),
        };
        let mut best = (f64::INFINITY, 0, 0.0, 0.0);
        for i in candidates {
            let (u, lateral, dist) = self.segments[i].project(p);
            if dist < best.0 {
                best = (dist, i, u, lateral);
            }
        }
        let (_, segment, u, lateral) = best;
        Projection {
            s: (self.segments[segment].start_s + u).rem_euclid(self.lap_length),
            lateral,
            segment,
        }
    }
}

/// Position, heading and grade at arclength `s`, wrapping modulo the lap.
pub fn sample_track(track: &Track, s: f64) -> TrackSample {
    let s = s.rem_euclid(track.lap_length);
    let i = track.segment_at(s);
    let seg = &track.segments[i];
    seg.sample(s - seg.start_s)
}

fn validate(params: &TrackParams) -> Result<()> {
    require_positive("straight_length", params.straight_length)?;
    require_positive("lane_width", params.lane_width)?;
    require_positive("grade_transition", params.grade_transition)?;
    if !(params.grade.is_finite() && (0.0..1.0).contains(&params.grade)) {
        return Err(Error::invalid(
            "grade",
            format!("must lie in [0, 1), got {}", params.grade),
        ));
    }
    if params.turn_order.len() != 9 {
        return Err(Error::invalid(
            "turn_order",
            format!("needs exactly 9 turns, got {}", params.turn_order.len()),
        ));
    }
    for sweep in SWEEPS_DEG {
        for slope in [Slope::Incline, Slope::Decline, Slope::Plateau] {
            let count = params
                .turn_order
                .iter()
                .filter(|t| t.sweep_deg == sweep && t.slope == slope)
                .count();
            if count != 1 {
                return Err(Error::invalid(
                    "turn_order",
                    format!("({sweep}°, {slope:?}) must appear exactly once, found {count}"),
                ));
            }
        }
    }
    let net: f64 = params.turn_order.iter().map(|t| t.direction.sign() * t.sweep_deg).sum();
    if (net.abs() - 360.0).abs() > 1e-9 {
        return Err(Error::Closure(format!(
            "turns must add up to one full rotation, got {net}°"
        )));
    }
    Ok(())
}

/// Lays out the loop for the given straight lengths (nine leading
/// straights plus the final connector) and returns the segments and the
/// end point.
fn lay_out(params: &TrackParams, straights: &[f64; 10]) -> (Vec<TrackSegment>, Vector3<f64>, f64) {
    let mut segments = Vec::with_capacity(19);
    let mut s = 0.0;
    let mut pos = Vector3::zeros();
    let mut heading = 0.0;
    let t = params.grade_transition;
    let grades: Vec<f64> = params
        .turn_order
        .iter()
        .map(|turn| turn.slope.grade(params.grade))
        .collect();
    let mut push = |kind: SegmentKind, pos: &mut Vector3<f64>, heading: &mut f64, s: &mut f64| {
        let seg = TrackSegment {
            kind,
            start_s: *s,
            start: [pos.x, pos.y, pos.z],
            start_heading: *heading,
        };
        let len = seg.length();
        let end = seg.sample(len);
        *pos = end.position;
        // Keep the unwrapped heading so later segments see exact multiples.
        if let SegmentKind::Arc {
            sweep_deg, direction, ..
        } = kind
        {
            *heading += direction.sign() * sweep_deg.to_radians();
        }
        *s += len;
        segments.push(seg);
    };
    for (i, turn) in params.turn_order.iter().enumerate() {
        let entry = if i == 0 { 0.0 } else { grades[i - 1] };
        push(
            SegmentKind::Straight {
                length: straights[i],
                entry_grade: entry,
                exit_grade: grades[i],
                transition: t,
            },
            &mut pos,
            &mut heading,
            &mut s,
        );
        push(
            SegmentKind::Arc {
                radius: TURN_RADIUS,
                sweep_deg: turn.sweep_deg,
                direction: turn.direction,
                slope: turn.slope,
                grade: grades[i],
            },
            &mut pos,
            &mut heading,
            &mut s,
        );
    }
    push(
        SegmentKind::Straight {
            length: straights[9],
            entry_grade: grades[8],
            exit_grade: 0.0,
            transition: t,
        },
        &mut pos,
        &mut heading,
        &mut s,
    );
    (segments, pos, s)
}

/// Builds the closed loop.
pub fn build_track(params: &TrackParams) -> Result<Track> {
    validate(params)?;
    let min_len = 2.0 * params.grade_transition + MIN_FLAT;
    if params.straight_length < min_len {
        return Err(Error::Closure(format!(
            "straight_length {} is shorter than two grade transitions plus {MIN_FLAT} m",
            params.straight_length
        )));
    }

    // Nominal loop with a zero-length connector; the gap to close is -end.
    let mut lengths = [params.straight_length; 10];
    lengths[9] = 0.0;
    let (nominal, end, _) = lay_out(params, &lengths);
    let gap = -end.xy();
    let final_heading: f64 = params
        .turn_order
        .iter()
        .map(|t| t.direction.sign() * t.sweep_deg.to_radians())
        .sum();
    let connector_dir = Vector2::new(final_heading.cos(), final_heading.sin());

    // Solve connector * c_dir + extra * dir_j = gap for each leading straight j
    // and keep the smallest total adjustment that leaves every straight long enough.
    let mut best: Option<(f64, usize, f64, f64)> = None;
    for j in 0..9 {
        let h = nominal[2 * j].start_heading;
        let dir = Vector2::new(h.cos(), h.sin());
        let det = connector_dir.x * dir.y - connector_dir.y * dir.x;
        if det.abs() < 1e-6 {
            continue;
        }
        let connector = (gap.x * dir.y - gap.y * dir.x) / det;
        let extra = (connector_dir.x * gap.y - connector_dir.y * gap.x) / det;
        if connector < min_len || params.straight_length + extra < min_len {
            continue;
        }
        let cost = connector.abs() + extra.abs();
        if best.is_none_or(|b| cost < b.0) {
            best = Some((cost, j, connector, extra));
        }
    }
    let (_, j, connector, extra) =
        best.ok_or_else(|| Error::Closure("no pair of straights can be resized to close the loop".into()))?;
    lengths[j] += extra;
    lengths[9] = connector;

    let (segments, end, lap_length) = lay_out(params, &lengths);
    if end.norm() > 1e-6 {
        return Err(Error::Closure(format!("residual closure error {:.3e} m", end.norm())));
    }
    Ok(Track {
        segments,
        lane_width: params.lane_width,
        lap_length,
    })
}
