//! Per-trajectory walking behavior.

use serde::{Deserialize, Serialize};

use super::TrackPoint;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackMetrics {
    pub avg_speed: f64,
    pub speed_sd: f64,
    pub turns: usize,
    pub path_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Displacements at or below this length carry no bearing.
    pub bearing_min_step_m: f64,
    pub turn_threshold_deg: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            bearing_min_step_m: 0.1,
            turn_threshold_deg: 30.0,
        }
    }
}

/// Mean perpendicular distance of the points to the chord joining the first
/// and last point; zero when they coincide.
pub fn path_deviation(points: &[TrackPoint]) -> f64 {
    let (Some(a), Some(b)) = (points.first(), points.last()) else {
        return 0.0;
    };
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return 0.0;
    }
    let sum: f64 = points
        .iter()
        .map(|p| (dy * p.x - dx * p.y + b.x * a.y - b.y * a.x).abs() / len)
        .sum();
    sum / points.len() as f64
}

/// Speed, speed variation (population standard deviation of step speeds),
/// turn count and path deviation of a smoothed track. `None` for fewer than
/// three points.
pub fn track_metrics(points: &[TrackPoint], cfg: &MetricsConfig) -> Option<TrackMetrics> {
    if points.len() < 3 {
        return None;
    }
    let steps: Vec<(f64, f64, f64)> = points
        .windows(2)
        .map(|w| (w[1].x - w[0].x, w[1].y - w[0].y, w[1].t - w[0].t))
        .collect();
    let length: f64 = steps.iter().map(|s| s.0.hypot(s.1)).sum();
    if length == 0.0 {
        return Some(TrackMetrics::default());
    }
    let duration = points[points.len() - 1].t - points[0].t;
    let speeds: Vec<f64> = steps.iter().map(|s| s.0.hypot(s.1) / s.2).collect();
    let n = speeds.len() as f64;
    let mean = speeds.iter().sum::<f64>() / n;
    let var = speeds.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;

    let bearings: Vec<f64> = steps
        .iter()
        .filter(|s| s.0.hypot(s.1) > cfg.bearing_min_step_m)
        .map(|s| s.1.atan2(s.0).to_degrees())
        .collect();
    let turns = bearings
        .windows(2)
        .filter(|w| {
            let d = (w[1] - w[0]).abs();
            d.min(360.0 - d) > cfg.turn_threshold_deg
        })
        .count();

    Some(TrackMetrics {
        avg_speed: length / duration,
        speed_sd: var.sqrt(),
        turns,
        path_deviation: path_deviation(points),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(xy: &[(f64, f64)]) -> Vec<TrackPoint> {
        xy.iter()
            .enumerate()
            .map(|(i, &(x, y))| TrackPoint { t: i as f64 * 0.5, x, y })
            .collect()
    }

    #[test]
    fn straight_line() {
        let m = track_metrics(&pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]), &MetricsConfig::default()).unwrap();
        assert_eq!(m.turns, 0);
        assert_eq!(m.path_deviation, 0.0);
        assert!((m.avg_speed - 2.0).abs() < 1e-12);
        assert!(m.speed_sd.abs() < 1e-12);
    }

    #[test]
    fn right_angle() {
        let m = track_metrics(&pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 1.0), (2.0, 2.0)]), &MetricsConfig::default()).unwrap();
        assert_eq!(m.turns, 1);
    }

    #[test]
    fn three_point_deviation() {
        let d = path_deviation(&pts(&[(0.0, 0.0), (5.0, 1.0), (10.0, 0.0)]));
        assert!((d - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_and_short() {
        assert_eq!(
            track_metrics(&pts(&[(1.0, 1.0); 4]), &MetricsConfig::default()),
            Some(TrackMetrics::default())
        );
        assert_eq!(track_metrics(&pts(&[(0.0, 0.0), (1.0, 0.0)]), &MetricsConfig::default()), None);
    }

    #[test]
    fn sub_floor_jitter_is_not_a_turn() {
        let m = track_metrics(
            &pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.05), (2.0, 0.05), (3.0, 0.05)]),
            &MetricsConfig::default(),
        )
        .unwrap();
        assert_eq!(m.turns, 0);
    }

    proptest! {
        #[test]
        fn reversal_invariance(xy in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 3..30)) {
            let fwd = pts(&xy);
            let t_end = fwd.last().unwrap().t;
            let rev: Vec<TrackPoint> = fwd.iter().rev().map(|p| TrackPoint { t: t_end - p.t, ..*p }).collect();
            let cfg = MetricsConfig::default();
            let (a, b) = (track_metrics(&fwd, &cfg).unwrap(), track_metrics(&rev, &cfg).unwrap());
            prop_assert!((a.avg_speed - b.avg_speed).abs() < 1e-9);
            prop_assert!((a.speed_sd - b.speed_sd).abs() < 1e-9);
            prop_assert_eq!(a.turns, b.turns);
            prop_assert!((a.path_deviation - b.path_deviation).abs() < 1e-9);
        }
    }
}
