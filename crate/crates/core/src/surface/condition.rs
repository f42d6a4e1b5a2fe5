//! Continuous condition features: unevenness, slope, width and lighting.

use crate::model::{Direction, SegmentTraversal};
use crate::series::{interp_by, mean, median};

/// Speed-normalized RMS of the low-passed vertical acceleration over a
/// traversal.
///
/// `t`/`low` hold the trip-level low-passed signal; samples inside the
/// traversal window are used. The window mean is removed first so gravity
/// does not dominate. `None` when the robot moves at `v_floor` or faster for
/// less than `min_moving_fraction` of the samples.
pub fn unevenness_rms(
    trav: &SegmentTraversal,
    t: &[f64],
    low: &[f64],
    v_floor: f64,
    min_moving_fraction: f64,
) -> Option<f64> {
    let lo = t.partition_point(|&s| s < trav.t_enter);
    let hi = t.partition_point(|&s| s <= trav.t_exit);
    if hi <= lo {
        return None;
    }
    let vel = &trav.records.velocity;
    let v: Vec<f64> = t[lo..hi]
        .iter()
        .map(|&ti| interp_by(vel, ti, |r| r.t, |r| r.v_mps))
        .collect::<Option<_>>()?;
    let moving = v.iter().filter(|&&x| x >= v_floor).count();
    if (moving as f64) < min_moving_fraction * v.len() as f64 {
        return None;
    }
    let window = &low[lo..hi];
    let m = mean(window)?;
    let ms = window
        .iter()
        .zip(&v)
        .map(|(a, v)| ((a - m) / v.max(v_floor)).powi(2))
        .sum::<f64>()
        / window.len() as f64;
    Some(ms.sqrt())
}

/// Min-max scaling onto [0, 1]; all-equal inputs map to 0.
pub fn min_max_normalize(values: &[Option<f64>]) -> Vec<Option<f64>> {
    let present = values.iter().flatten().copied();
    let lo = present.clone().reduce(f64::min);
    let hi = present.reduce(f64::max);
    values
        .iter()
        .map(|v| {
            let (v, lo, hi) = (v.as_ref()?, lo?, hi?);
            Some(if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        })
        .collect()
}

/// Grade in the direction of travel: altitude change between the first and
/// last GNSS fixes of the traversal over the along-segment distance between
/// them. `None` without altitude at both ends or when the fixes are too close.
pub fn travel_slope(trav: &SegmentTraversal) -> Option<f64> {
    let fixes: Vec<_> = trav.records.gnss.iter().filter(|g| g.alt_m.is_some()).collect();
    let (first, last) = (fixes.first()?, fixes.last()?);
    let (a0, a1) = (first.alt_m?, last.alt_m?);
    let run = (trav.progress_at(last.t)? - trav.progress_at(first.t)?).abs();
    if run < 1.0 {
        return None;
    }
    Some((a1 - a0) / run)
}

/// Travel-direction grade expressed in the segment's own direction.
pub fn segment_frame_slope(slope: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Forward => slope,
        Direction::Reverse => -slope,
    }
}

/// Median of direction-corrected slopes across a segment's traversals.
pub fn segment_slope(values: &[(f64, Direction)]) -> Option<f64> {
    let v: Vec<f64> = values.iter().map(|&(s, d)| segment_frame_slope(s, d)).collect();
    median(&v)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WidthFeatures {
    pub min_effective_width_m: Option<f64>,
    pub avg_effective_width_m: Option<f64>,
    pub lighting_condition: Option<f64>,
}

pub fn width_features(trav: &SegmentTraversal) -> WidthFeatures {
    let w: Vec<f64> = trav.records.width.iter().map(|r| r.w_m).collect();
    let l: Vec<f64> = trav.records.light.iter().map(|r| r.level).collect();
    WidthFeatures {
        min_effective_width_m: w.iter().copied().reduce(f64::min),
        avg_effective_width_m: mean(&w),
        lighting_condition: mean(&l),
    }
}
