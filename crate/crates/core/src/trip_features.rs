//! Robot trip features: segment timing, distance, speed statistics, speed
//! drop and stops.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{SegmentTraversal, TripLog, VelocityRecord};
use crate::series::{interp_by, trapezoid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopConfig {
    /// Speeds strictly below this count as stopped.
    pub threshold_mps: f64,
    /// Minimum length of a stopped interval.
    pub min_dwell_s: f64,
}

impl Default for StopConfig {
    fn default() -> Self {
        Self {
            threshold_mps: 0.05,
            min_dwell_s: 1.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TripFeatureError {
    #[error("fewer than two velocity samples in the traversal window")]
    TooFewSamples,
    #[error("peak speed {v_peak} is below the observed maximum {observed}")]
    InconsistentPeak { v_peak: f64, observed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub duration_s: f64,
    pub distance_m: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub v_avg: f64,
}

/// Velocity profile over `[t0, t1]`: the in-window samples, with end values
/// held out to the window bounds.
pub fn velocity_profile(samples: &[VelocityRecord], t0: f64, t1: f64) -> (Vec<f64>, Vec<f64>) {
    let mut t = Vec::with_capacity(samples.len() + 2);
    let mut v = Vec::with_capacity(samples.len() + 2);
    let inside: Vec<&VelocityRecord> = samples.iter().filter(|r| r.t >= t0 && r.t <= t1).collect();
    if inside.is_empty() {
        return (t, v);
    }
    let at = |x: f64| interp_by(samples, x, |r| r.t, |r| r.v_mps).unwrap();
    if inside[0].t > t0 {
        t.push(t0);
        v.push(at(t0));
    }
    for r in &inside {
        t.push(r.t);
        v.push(r.v_mps);
    }
    if inside[inside.len() - 1].t < t1 {
        t.push(t1);
        v.push(at(t1));
    }
    (t, v)
}

fn profile(trav: &SegmentTraversal) -> Result<(Vec<f64>, Vec<f64>), TripFeatureError> {
    let n = trav
        .records
        .velocity
        .iter()
        .filter(|r| r.t >= trav.t_enter && r.t <= trav.t_exit)
        .count();
    if n < 2 {
        return Err(TripFeatureError::TooFewSamples);
    }
    Ok(velocity_profile(&trav.records.velocity, trav.t_enter, trav.t_exit))
}

/// Duration, integrated distance and speed extrema of one traversal.
pub fn compute_kinematics(trav: &SegmentTraversal) -> Result<Kinematics, TripFeatureError> {
    let (t, v) = profile(trav)?;
    let duration_s = trav.duration();
    let distance_m = trapezoid(&t, &v);
    Ok(Kinematics {
        duration_s,
        distance_m,
        v_max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        v_min: v.iter().copied().fold(f64::INFINITY, f64::min),
        v_avg: distance_m / duration_s,
    })
}

/// Stopped intervals `(start, end)` in a sampled speed profile. Threshold
/// crossings are located by linear interpolation between samples.
pub fn stop_intervals(t: &[f64], v: &[f64], cfg: &StopConfig) -> Vec<(f64, f64)> {
    let thr = cfg.threshold_mps;
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..t.len() {
        let below = v[i] < thr;
        match (start, below) {
            (None, true) => {
                start = Some(if i == 0 || v[i - 1] == v[i] {
                    t[i]
                } else {
                    let w = (v[i - 1] - thr) / (v[i - 1] - v[i]);
                    t[i - 1] + w * (t[i] - t[i - 1])
                });
            }
            (Some(s), false) => {
                let w = (thr - v[i - 1]) / (v[i] - v[i - 1]);
                let end = t[i - 1] + w * (t[i] - t[i - 1]);
                out.push((s, end));
                start = None;
            }
            _ => {}
        }
    }
    if let (Some(s), Some(&end)) = (start, t.last()) {
        out.push((s, end));
    }
    out.retain(|(a, b)| b - a >= cfg.min_dwell_s);
    out
}

/// Number of stops and total waiting time within the traversal window.
pub fn compute_stops(trav: &SegmentTraversal, cfg: &StopConfig) -> (usize, f64) {
    let (t, v) = velocity_profile(&trav.records.velocity, trav.t_enter, trav.t_exit);
    let stops = stop_intervals(&t, &v, cfg);
    (stops.len(), stops.iter().fold(0.0, |acc, (a, b)| acc + (b - a)))
}

/// Average shortfall of the speed below the trip's peak speed, m/s.
pub fn compute_speed_drop(trav: &SegmentTraversal, v_peak: f64) -> Result<f64, TripFeatureError> {
    let (t, v) = profile(trav)?;
    let observed = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if v_peak < observed {
        return Err(TripFeatureError::InconsistentPeak { v_peak, observed });
    }
    let deficit: Vec<f64> = v.iter().map(|x| v_peak - x).collect();
    Ok(trapezoid(&t, &deficit) / trav.duration())
}

/// Highest velocity sample over the whole trip.
pub fn compute_trip_peak(trip: &TripLog) -> Option<f64> {
    trip.channels.velocity.iter().map(|r| r.v_mps).reduce(f64::max)
}

/// Ratio of each value to the smallest present value. Missing entries stay
/// missing; the minimizing entry gets exactly 1.
pub fn relative_to_min(values: &[Option<f64>]) -> Vec<Option<f64>> {
    let min = values
        .iter()
        .flatten()
        .copied()
        .filter(|v| *v > 0.0)
        .reduce(f64::min);
    values
        .iter()
        .map(|v| match (v, min) {
            (Some(v), Some(m)) if *v > 0.0 => Some(v / m),
            _ => None,
        })
        .collect()
}

/// Robot trip feature block for one traversal. Relative duration and
/// distance need the whole dataset and are filled in afterwards.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TripFeatureBlock {
    pub segment_duration_s: Option<f64>,
    pub segment_distance_m: Option<f64>,
    pub relative_duration: Option<f64>,
    pub relative_distance: Option<f64>,
    pub segment_max_speed: Option<f64>,
    pub segment_min_speed: Option<f64>,
    pub segment_avg_speed: Option<f64>,
    pub speed_drop_avg: Option<f64>,
    pub trip_peak_speed: Option<f64>,
    pub num_stops: Option<usize>,
    pub total_wait_time_s: Option<f64>,
}

pub fn trip_feature_block(trav: &SegmentTraversal, v_peak: Option<f64>, cfg: &StopConfig) -> TripFeatureBlock {
    let mut b = TripFeatureBlock {
        segment_duration_s: Some(trav.duration()),
        trip_peak_speed: v_peak,
        ..Default::default()
    };
    if let Ok(k) = compute_kinematics(trav) {
        b.segment_distance_m = Some(k.distance_m);
        b.segment_max_speed = Some(k.v_max);
        b.segment_min_speed = Some(k.v_min);
        b.segment_avg_speed = Some(k.v_avg);
        b.speed_drop_avg = v_peak.and_then(|p| compute_speed_drop(trav, p).ok());
        let (n, wait) = compute_stops(trav, cfg);
        b.num_stops = Some(n);
        b.total_wait_time_s = Some(wait);
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Channels, Direction};
    use proptest::prelude::*;

    pub(crate) fn traversal(samples: &[(f64, f64)]) -> SegmentTraversal {
        let velocity: Vec<VelocityRecord> = samples
            .iter()
            .map(|&(t, v)| VelocityRecord {
                t,
                v_mps: v,
                heading_deg: None,
            })
            .collect();
        SegmentTraversal {
            trip_id: "trip".into(),
            segment: 0,
            segment_id: "A".into(),
            length_m: 100.0,
            t_enter: samples[0].0,
            t_exit: samples[samples.len() - 1].0,
            direction: Direction::Forward,
            path: Vec::new(),
            records: Channels {
                velocity,
                ..Default::default()
            },
        }
    }

    #[test]
    fn constant_profile() {
        let s: Vec<(f64, f64)> = (0..=300).map(|i| (i as f64 * 0.1, 1.0)).collect();
        let k = compute_kinematics(&traversal(&s)).unwrap();
        assert!((k.duration_s - 30.0).abs() < 1e-9);
        assert!((k.distance_m - 30.0).abs() < 1e-9);
        assert_eq!((k.v_max, k.v_min), (1.0, 1.0));
        assert!((k.v_avg - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_ramp() {
        let s: Vec<(f64, f64)> = (0..=2000).map(|i| (i as f64 * 0.01, 0.08 * i as f64 * 0.01)).collect();
        let k = compute_kinematics(&traversal(&s)).unwrap();
        assert!((k.distance_m - 16.0).abs() < 1e-9);
        assert!((k.v_avg - 0.8).abs() < 1e-9);
    }

    #[test]
    fn speed_drop_examples() {
        let flat: Vec<(f64, f64)> = (0..=100).map(|i| (i as f64 * 0.1, 0.6)).collect();
        assert!((compute_speed_drop(&traversal(&flat), 1.6).unwrap() - 1.0).abs() < 1e-12);
        assert!(compute_speed_drop(&traversal(&flat), 0.6).unwrap().abs() < 1e-12);
        let ramp: Vec<(f64, f64)> = (0..=100).map(|i| (i as f64 * 0.1, 1.6 - 0.01 * i as f64)).collect();
        assert!((compute_speed_drop(&traversal(&ramp), 1.6).unwrap() - 0.5).abs() < 0.01);
        assert!(matches!(
            compute_speed_drop(&traversal(&ramp), 1.5),
            Err(TripFeatureError::InconsistentPeak { .. })
        ));
    }

    #[test]
    fn stops() {
        let moving: Vec<(f64, f64)> = (0..=100).map(|i| (i as f64 * 0.1, 1.0)).collect();
        assert_eq!(compute_stops(&traversal(&moving), &StopConfig::default()), (0, 0.0));

        // 5 s at rest between two moving phases, with instantaneous transitions.
        let mut s = vec![(0.0, 1.0), (10.0, 1.0)];
        s.extend([(10.0 + 1e-9, 0.0), (15.0, 0.0), (15.0 + 1e-9, 1.0), (25.0, 1.0)]);
        let (n, wait) = compute_stops(&traversal(&s), &StopConfig::default());
        assert_eq!(n, 1);
        assert!((wait - 5.0).abs() < 1e-6);
    }

    #[test]
    fn short_dip_is_not_a_stop() {
        let s = [(0.0, 1.0), (1.0, 1.0), (1.2, 0.0), (1.6, 0.0), (1.8, 1.0), (3.0, 1.0)];
        assert_eq!(compute_stops(&traversal(&s), &StopConfig::default()).0, 0);
    }

    #[test]
    fn trip_peak_is_max() {
        let trip = TripLog::from_records(
            "x",
            [0.2, 1.55, 1.3].iter().enumerate().map(|(i, &v)| {
                crate::model::SensorRecord::Velocity(VelocityRecord {
                    t: i as f64,
                    v_mps: v,
                    heading_deg: None,
                })
            }),
        );
        assert_eq!(compute_trip_peak(&trip), Some(1.55));
    }

    #[test]
    fn relative_ratios() {
        let r = relative_to_min(&[Some(30.0), Some(45.0), Some(60.0), None]);
        assert_eq!(r, vec![Some(1.0), Some(1.5), Some(2.0), None]);
        assert_eq!(relative_to_min(&[Some(7.0)]), vec![Some(1.0)]);
    }

    fn profile_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.01f64..1.0, 0.0f64..2.0), 2..60).prop_map(|steps| {
            let mut t = 0.0;
            steps
                .into_iter()
                .map(|(dt, v)| {
                    t += dt;
                    (t, v)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn block_invariants(s in profile_strategy(), alpha in 0.1f64..3.0) {
            let trav = traversal(&s);
            let peak = s.iter().map(|p| p.1).fold(0.0, f64::max);
            let b = trip_feature_block(&trav, Some(peak), &StopConfig::default());
            let (vmin, vavg, vmax) = (b.segment_min_speed.unwrap(), b.segment_avg_speed.unwrap(), b.segment_max_speed.unwrap());
            prop_assert!(vmin <= vavg + 1e-12 && vavg <= vmax + 1e-12 && vmax <= peak);
            prop_assert!(b.speed_drop_avg.unwrap() >= -1e-12);
            prop_assert!(b.total_wait_time_s.unwrap() <= b.segment_duration_s.unwrap() + 1e-9);
            if b.num_stops == Some(0) {
                prop_assert_eq!(b.total_wait_time_s, Some(0.0));
            }

            let scaled: Vec<(f64, f64)> = s.iter().map(|&(t, v)| (t, alpha * v)).collect();
            let bs = trip_feature_block(&traversal(&scaled), Some(alpha * peak), &StopConfig::default());
            for (a, b) in [
                (b.segment_avg_speed, bs.segment_avg_speed),
                (b.segment_max_speed, bs.segment_max_speed),
                (b.segment_min_speed, bs.segment_min_speed),
                (b.speed_drop_avg, bs.speed_drop_avg),
            ] {
                prop_assert!((alpha * a.unwrap() - b.unwrap()).abs() < 1e-9);
            }
            prop_assert_eq!(b.segment_duration_s, bs.segment_duration_s);
        }
    }
}
