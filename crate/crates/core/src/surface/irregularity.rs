//! Event-based irregularity detection on the high-passed vertical acceleration.

use serde::{Deserialize, Serialize};

use crate::model::SegmentTraversal;
use crate::series::interp_by;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsWindow {
    pub t_start: f64,
    pub t_center: f64,
    pub rms: f64,
}

/// RMS over overlapping windows `[t0, t0 + window_s)` advanced by `step_s`.
/// Windows must fit inside the sampled span.
pub fn sliding_rms(t: &[f64], x: &[f64], window_s: f64, step_s: f64) -> Vec<RmsWindow> {
    let (Some(&first), Some(&last)) = (t.first(), t.last()) else {
        return Vec::new();
    };
    // Sample spacing lets the final window include the last sample.
    let dt = if t.len() > 1 { (last - first) / (t.len() - 1) as f64 } else { 0.0 };
    let mut sq = Vec::with_capacity(x.len() + 1);
    sq.push(0.0);
    for v in x {
        sq.push(sq.last().unwrap() + v * v);
    }
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t0 = first + k as f64 * step_s;
        if t0 + window_s > last + dt + 1e-9 {
            break;
        }
        let lo = t.partition_point(|&s| s < t0 - 1e-9);
        let hi = t.partition_point(|&s| s < t0 + window_s - 1e-9);
        if hi > lo {
            let ms = (sq[hi] - sq[lo]) / (hi - lo) as f64;
            out.push(RmsWindow {
                t_start: t0,
                t_center: t0 + 0.5 * window_s,
                rms: ms.max(0.0).sqrt(),
            });
        }
        k += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularityEvent {
    pub trip_id: String,
    pub segment_id: String,
    pub s_m: f64,
    /// Window RMS divided by speed.
    pub value: f64,
    pub t: f64,
    pub window_rms: f64,
    pub v_at: f64,
}

/// Turns above-threshold RMS windows inside a traversal into events.
///
/// A window qualifies when its RMS exceeds `threshold` and the robot moves at
/// least `v_floor`. Runs of consecutive qualifying windows collapse onto their
/// peak-RMS window; time and speed are taken at that window's center.
pub fn detect_events(trav: &SegmentTraversal, rms: &[RmsWindow], threshold: f64, v_floor: f64) -> Vec<IrregularityEvent> {
    let vel = &trav.records.velocity;
    let mut out = Vec::new();
    let mut best: Option<(RmsWindow, f64)> = None;
    let mut flush = |best: &mut Option<(RmsWindow, f64)>| {
        if let Some((w, v)) = best.take() {
            let Some(s) = trav.s_at(w.t_center) else { return };
            out.push(IrregularityEvent {
                trip_id: trav.trip_id.clone(),
                segment_id: trav.segment_id.clone(),
                s_m: s.clamp(0.0, trav.length_m),
                value: w.rms / v.max(v_floor),
                t: w.t_center,
                window_rms: w.rms,
                v_at: v,
            });
        }
    };
    for w in rms {
        if w.t_center < trav.t_enter || w.t_center > trav.t_exit {
            continue;
        }
        let v = interp_by(vel, w.t_center, |r| r.t, |r| r.v_mps).unwrap_or(0.0);
        if w.rms > threshold && v >= v_floor {
            if best.is_none_or(|(b, _)| w.rms > b.rms) {
                best = Some((*w, v));
            }
        } else {
            flush(&mut best);
        }
    }
    flush(&mut best);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularityCluster {
    pub segment_id: String,
    pub center_s_m: f64,
    pub extent_l_m: f64,
    pub mean_value: f64,
    pub event_count: usize,
    pub trips: Vec<String>,
}

/// Single-linkage grouping of events along the segment: neighbors no more
/// than `eps_m` apart share a cluster. Extents are floored at `min_extent_m`.
pub fn cluster_events(events: &[IrregularityEvent], eps_m: f64, min_extent_m: f64) -> Vec<IrregularityCluster> {
    let mut sorted: Vec<&IrregularityEvent> = events.iter().collect();
    sorted.sort_by(|a, b| a.s_m.total_cmp(&b.s_m).then_with(|| a.trip_id.cmp(&b.trip_id)));
    let mut groups: Vec<Vec<&IrregularityEvent>> = Vec::new();
    for e in sorted {
        match groups.last_mut() {
            Some(g) if e.s_m - g.last().unwrap().s_m <= eps_m => g.push(e),
            _ => groups.push(vec![e]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let n = g.len() as f64;
            let lo = g[0].s_m;
            let hi = g[g.len() - 1].s_m;
            let mut trips: Vec<String> = g.iter().map(|e| e.trip_id.clone()).collect();
            trips.sort();
            trips.dedup();
            IrregularityCluster {
                segment_id: g[0].segment_id.clone(),
                center_s_m: g.iter().map(|e| e.s_m).sum::<f64>() / n,
                extent_l_m: (hi - lo).max(min_extent_m),
                mean_value: g.iter().map(|e| e.value).sum::<f64>() / n,
                event_count: g.len(),
                trips,
            }
        })
        .collect()
}

/// Length-weighted sum of cluster values.
pub fn irregularity_index(clusters: &[IrregularityCluster]) -> f64 {
    clusters.iter().fold(0.0, |acc, c| acc + c.mean_value * c.extent_l_m)
}
