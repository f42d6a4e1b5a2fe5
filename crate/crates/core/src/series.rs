//! Irregularly sampled time-series utilities.

/// Linear interpolation over records sorted by time, holding the end values
/// outside the sampled range. `None` when `recs` is empty.
pub fn interp_by<T>(recs: &[T], t: f64, time: impl Fn(&T) -> f64, value: impl Fn(&T) -> f64) -> Option<f64> {
    let first = recs.first()?;
    let last = recs.last()?;
    if t <= time(first) {
        return Some(value(first));
    }
    if t >= time(last) {
        return Some(value(last));
    }
    let hi = recs.partition_point(|r| time(r) <= t);
    let (a, b) = (&recs[hi - 1], &recs[hi]);
    let (ta, tb) = (time(a), time(b));
    if tb <= ta {
        return Some(value(b));
    }
    let w = (t - ta) / (tb - ta);
    Some(value(a) + w * (value(b) - value(a)))
}

/// Linear interpolation of a compass angle in degrees, taking the short way round.
pub fn interp_angle_by<T>(recs: &[T], t: f64, time: impl Fn(&T) -> f64, angle: impl Fn(&T) -> f64) -> Option<f64> {
    let first = recs.first()?;
    let last = recs.last()?;
    if t <= time(first) {
        return Some(angle(first));
    }
    if t >= time(last) {
        return Some(angle(last));
    }
    let hi = recs.partition_point(|r| time(r) <= t);
    let (a, b) = (&recs[hi - 1], &recs[hi]);
    let (ta, tb) = (time(a), time(b));
    let (aa, ab) = (angle(a), angle(b));
    let delta = (ab - aa + 540.0).rem_euclid(360.0) - 180.0;
    let w = if tb > ta { (t - ta) / (tb - ta) } else { 1.0 };
    Some((aa + w * delta).rem_euclid(360.0))
}

/// Trapezoid rule over paired samples.
pub fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2)
        .zip(v.windows(2))
        .map(|(tw, vw)| 0.5 * (vw[0] + vw[1]) * (tw[1] - tw[0]))
        .sum()
}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Median via linear interpolation; `None` for an empty slice.
pub fn median(xs: &[f64]) -> Option<f64> {
    quantile(xs, 0.5)
}

/// Quantile with linear interpolation between order statistics
/// (position `(n - 1) * q`), the common "type 7" definition.
pub fn quantile(xs: &[f64], q: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile_sorted(&v, q))
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
