use serde::{Deserialize, Serialize};

use super::{GnssRecord, SidewalkNetwork};
use crate::geo::Vec2;

/// Fixes farther than this outside the network bounding box are rejected outright.
const BBOX_MARGIN_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Maximum perpendicular distance for a fix to be assigned to a segment.
    pub gate_m: f64,
    /// A competitor must be closer than the previous segment by more than this.
    pub hysteresis_m: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            gate_m: 5.0,
            hysteresis_m: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentMatch {
    /// Index into [`SidewalkNetwork::segments`].
    pub segment: usize,
    /// Along-segment distance of the projection, meters.
    pub s_m: f64,
    /// Signed cross-track offset, positive left of the polyline direction.
    pub d_m: f64,
    pub dist_m: f64,
}

/// Assigns a GNSS fix to the nearest segment within the gate.
///
/// With `prev` set, the previous segment is kept unless another candidate is
/// closer by more than the hysteresis margin. Exact distance ties resolve to
/// the segment listed first in the network.
pub fn match_position(
    network: &SidewalkNetwork,
    fix: &GnssRecord,
    prev: Option<usize>,
    cfg: &MatchConfig,
) -> Option<SegmentMatch> {
    let p = network.frame().to_local(fix.point());
    match_local(network, p, prev, cfg)
}

pub(crate) fn project_onto(network: &SidewalkNetwork, idx: usize, p: Vec2) -> SegmentMatch {
    let seg = network.segment(idx);
    let proj = seg.geometry().project(p);
    SegmentMatch {
        segment: idx,
        s_m: seg.to_segment_s(proj.s),
        d_m: proj.d,
        dist_m: proj.dist,
    }
}

pub(crate) fn match_local(
    network: &SidewalkNetwork,
    p: Vec2,
    prev: Option<usize>,
    cfg: &MatchConfig,
) -> Option<SegmentMatch> {
    let (lo, hi) = network.bbox();
    if p.x < lo.x - BBOX_MARGIN_M
        || p.y < lo.y - BBOX_MARGIN_M
        || p.x > hi.x + BBOX_MARGIN_M
        || p.y > hi.y + BBOX_MARGIN_M
    {
        return None;
    }

    let mut best: Option<SegmentMatch> = None;
    let mut kept: Option<SegmentMatch> = None;
    for idx in 0..network.len() {
        let m = project_onto(network, idx, p);
        if m.dist_m > cfg.gate_m {
            continue;
        }
        if Some(idx) == prev {
            kept = Some(m);
        }
        if best.is_none_or(|b| m.dist_m < b.dist_m) {
            best = Some(m);
        }
    }
    match (kept, best) {
        (Some(k), Some(b)) if k.dist_m - b.dist_m <= cfg.hysteresis_m => Some(k),
        (_, b) => b,
    }
}
