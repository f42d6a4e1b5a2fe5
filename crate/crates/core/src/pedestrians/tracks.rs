//! Pedestrian track reconstruction and smoothing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geo::{bearing_deg, bearing_unit, Vec2};
use crate::model::{Direction, Segment, SegmentTraversal};
use crate::series::{interp_angle_by, interp_by};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl TrackPoint {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PedestrianTrack {
    pub ped_id: String,
    /// Absolute positions in the network's planar frame.
    pub points: Vec<TrackPoint>,
    pub smoothed: Vec<TrackPoint>,
}

impl PedestrianTrack {
    pub fn duration(&self) -> f64 {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackConfig {
    /// Detections farther than this from the robot are ignored.
    pub range_m: f64,
    /// Corridor half-width beyond half the nominal width.
    pub corridor_margin_m: f64,
    pub min_points: usize,
    pub min_span_s: f64,
    /// Spacing of the global smoothing grid.
    pub tick_s: f64,
    /// Half-width of the smoothing window.
    pub half_window_s: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            range_m: 10.0,
            corridor_margin_m: 0.5,
            min_points: 4,
            min_span_s: 2.0,
            tick_s: 0.5,
            half_window_s: 0.5,
        }
    }
}

impl TrackConfig {
    pub fn qualifies(&self, track: &PedestrianTrack) -> bool {
        track.points.len() >= self.min_points && track.duration() >= self.min_span_s
    }
}

/// Robot-frame offset (x forward, y left) to an absolute position given the
/// robot position and compass heading.
pub fn to_absolute(robot: Vec2, heading_deg: f64, x: f64, y: f64) -> Vec2 {
    let fwd = bearing_unit(heading_deg);
    let left = Vec2::new(-fwd.y, fwd.x);
    robot.add(fwd.scale(x)).add(left.scale(y))
}

/// Robot position and heading at `t` from the map-matched path. The heading
/// comes from the velocity channel when present, else from the segment
/// tangent in the direction of travel.
pub fn robot_pose(trav: &SegmentTraversal, segment: &Segment, t: f64) -> Option<(Vec2, f64)> {
    let s = interp_by(&trav.path, t, |p| p.t, |p| p.s_m)?;
    let d = interp_by(&trav.path, t, |p| p.t, |p| p.d_m)?;
    let pos = segment.point_at(s, d);
    let headings: Vec<(f64, f64)> = trav
        .records
        .velocity
        .iter()
        .filter_map(|r| r.heading_deg.map(|h| (r.t, h)))
        .collect();
    let heading = interp_angle_by(&headings, t, |h| h.0, |h| h.1).unwrap_or_else(|| {
        let tan = segment.geometry().tangent_at(segment.to_planar_s(s));
        let dir = match trav.direction {
            Direction::Forward => tan,
            Direction::Reverse => tan.scale(-1.0),
        };
        bearing_deg(dir)
    });
    Some((pos, heading))
}

/// Absolute pedestrian tracks for one traversal. Detections beyond the range
/// gate or outside the segment corridor are discarded; every surviving id
/// yields a track, qualified or not.
pub fn build_tracks(trav: &SegmentTraversal, segment: &Segment, cfg: &TrackConfig) -> Vec<PedestrianTrack> {
    let half = segment.nominal_width_m / 2.0 + cfg.corridor_margin_m;
    let mut by_id: BTreeMap<&str, Vec<TrackPoint>> = BTreeMap::new();
    for det in &trav.records.peds {
        if det.x_m.hypot(det.y_m) > cfg.range_m {
            continue;
        }
        let Some((robot, heading)) = robot_pose(trav, segment, det.t) else { continue };
        let p = to_absolute(robot, heading, det.x_m, det.y_m);
        if segment.geometry().project(p).dist > half {
            continue;
        }
        by_id.entry(det.ped_id.as_str()).or_default().push(TrackPoint { t: det.t, x: p.x, y: p.y });
    }
    by_id
        .into_iter()
        .map(|(id, mut points)| {
            points.sort_by(|a, b| a.t.total_cmp(&b.t));
            points.dedup_by(|b, a| a.t == b.t);
            let smoothed = smooth_track(&points, cfg.tick_s, cfg.half_window_s);
            PedestrianTrack {
                ped_id: id.to_string(),
                points,
                smoothed,
            }
        })
        .collect()
}

/// Sliding-mean smoothing onto the global grid `k * tick_s`.
///
/// Each tick inside the raw time span averages the raw points within a
/// symmetric window of half-width `half_window_s`, narrowed near the ends so
/// the window never reaches past the first or last point. Ticks with no raw
/// point in their window are omitted.
pub fn smooth_track(points: &[TrackPoint], tick_s: f64, half_window_s: f64) -> Vec<TrackPoint> {
    const EPS: f64 = 1e-6;
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return Vec::new();
    };
    let (t0, t1) = (first.t, last.t);
    let k0 = ((t0 - EPS) / tick_s).ceil() as i64;
    let k1 = ((t1 + EPS) / tick_s).floor() as i64;
    let mut out = Vec::new();
    for k in k0..=k1 {
        let tk = k as f64 * tick_s;
        let h = half_window_s.min(tk - t0).min(t1 - tk).max(0.0);
        let lo = points.partition_point(|p| p.t < tk - h - EPS);
        let hi = points.partition_point(|p| p.t <= tk + h + EPS);
        if hi <= lo {
            continue;
        }
        let n = (hi - lo) as f64;
        let (sx, sy) = points[lo..hi].iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        out.push(TrackPoint {
            t: tk,
            x: sx / n,
            y: sy / n,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn frame_rotation_identity() {
        let p = to_absolute(Vec2::new(0.0, 0.0), 0.0, 2.0, 0.0);
        assert!(p.x.abs() < 1e-12 && (p.y - 2.0).abs() < 1e-12);
        // Heading east: forward is +x, left is +y.
        let p = to_absolute(Vec2::new(1.0, 1.0), 90.0, 2.0, 1.0);
        assert!((p.x - 3.0).abs() < 1e-12 && (p.y - 2.0).abs() < 1e-12);
    }

    fn walk(dt: f64, n: usize, v: f64) -> Vec<TrackPoint> {
        (0..n)
            .map(|i| TrackPoint {
                t: 10.0 + i as f64 * dt,
                x: v * i as f64 * dt,
                y: 0.0,
            })
            .collect()
    }

    #[test]
    fn stationary_track() {
        let pts: Vec<TrackPoint> = (0..20)
            .map(|i| TrackPoint {
                t: i as f64 * 0.2,
                x: 3.0,
                y: -1.0,
            })
            .collect();
        let s = smooth_track(&pts, 0.5, 0.5);
        assert!(s.iter().all(|p| p.x == 3.0 && p.y == -1.0));
    }

    #[test]
    fn straight_walk_spacing() {
        let s = smooth_track(&walk(0.2, 51, 1.0), 0.5, 0.5);
        assert_eq!(s.len(), 21);
        for w in s.windows(2) {
            assert!((w[1].pos().dist(w[0].pos()) - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn smoothing_reduces_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.2).unwrap();
        let truth = walk(0.2, 200, 1.2);
        let noisy: Vec<TrackPoint> = truth
            .iter()
            .map(|p| TrackPoint {
                t: p.t,
                x: p.x + noise.sample(&mut rng),
                y: p.y + noise.sample(&mut rng),
            })
            .collect();
        let err = |pts: &[TrackPoint]| {
            let se: f64 = pts
                .iter()
                .map(|p| {
                    let tx = 1.2 * (p.t - 10.0);
                    (p.x - tx).powi(2) + p.y.powi(2)
                })
                .sum();
            (se / pts.len() as f64).sqrt()
        };
        let smoothed = smooth_track(&noisy, 0.5, 0.5);
        assert!(err(&smoothed) < err(&noisy));
    }
}
