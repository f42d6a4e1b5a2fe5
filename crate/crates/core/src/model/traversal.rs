use serde::{Deserialize, Serialize};

use super::matching::{match_local, project_onto};
use super::{Channels, MatchConfig, SidewalkNetwork, TripLog};
use crate::geo::Vec2;
use crate::series::interp_by;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub matching: MatchConfig,
    /// Runs shorter than this (seconds) are merged into a neighbor or dropped.
    pub min_duration_s: f64,
    /// Runs covering less than this distance (meters) are merged or dropped.
    pub min_distance_m: f64,
    /// A run whose progress backs off its extreme by more than this (meters)
    /// is split there: the robot turned around on the segment.
    pub reversal_m: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            matching: MatchConfig::default(),
            min_duration_s: 3.0,
            min_distance_m: 3.0,
            reversal_m: 3.0,
        }
    }
}

/// Travel direction relative to the segment polyline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

/// A map-matched robot position. `s_m` is measured from the polyline start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub s_m: f64,
    pub d_m: f64,
}

/// The slice of one trip spent on one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentTraversal {
    pub trip_id: String,
    pub segment: usize,
    pub segment_id: String,
    pub length_m: f64,
    pub t_enter: f64,
    pub t_exit: f64,
    pub direction: Direction,
    pub path: Vec<PathPoint>,
    pub records: Channels,
}

impl SegmentTraversal {
    pub fn duration(&self) -> f64 {
        self.t_exit - self.t_enter
    }

    /// Distance along the direction of travel for a segment position.
    pub fn progress_of(&self, s_m: f64) -> f64 {
        match self.direction {
            Direction::Forward => s_m,
            Direction::Reverse => self.length_m - s_m,
        }
    }

    /// Segment position for a distance along the direction of travel.
    pub fn s_of_progress(&self, progress: f64) -> f64 {
        match self.direction {
            Direction::Forward => progress,
            Direction::Reverse => self.length_m - progress,
        }
    }

    /// Interpolated robot position along the direction of travel.
    pub fn progress_at(&self, t: f64) -> Option<f64> {
        interp_by(&self.path, t, |p| p.t, |p| self.progress_of(p.s_m))
    }

    /// Interpolated robot position on the segment polyline.
    pub fn s_at(&self, t: f64) -> Option<f64> {
        self.progress_at(t).map(|p| self.s_of_progress(p))
    }

    /// First time the robot's progress reaches `progress`, by interpolation
    /// along the path.
    pub fn time_at_progress(&self, progress: f64) -> Option<f64> {
        let mut prev: Option<(f64, f64)> = None;
        for p in &self.path {
            let cur = (p.t, self.progress_of(p.s_m));
            if cur.1 >= progress {
                return Some(match prev {
                    Some((t0, p0)) if cur.1 > p0 => t0 + (progress - p0) / (cur.1 - p0) * (cur.0 - t0),
                    _ => cur.0,
                });
            }
            prev = Some(cur);
        }
        None
    }
}

/// Output of [`split_traversals`].
#[derive(Debug, Clone, Default)]
pub struct Split {
    pub traversals: Vec<SegmentTraversal>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone)]
struct Run {
    segment: usize,
    /// Indices into the trip's GNSS channel.
    fixes: Vec<usize>,
}

/// Indices at which a new pass starts, for a sequence of along-segment
/// positions. A turn is confirmed once the position retreats more than
/// `min_m` from the running extreme; the pass ends at that extreme.
fn reversal_points(s: &[f64], min_m: f64) -> Vec<usize> {
    let mut cuts = Vec::new();
    let (mut lo, mut hi) = (0, 0);
    let mut dir = 0i8;
    let mut ext = 0;
    for i in 1..s.len() {
        match dir {
            0 => {
                if s[i] < s[lo] {
                    lo = i;
                }
                if s[i] > s[hi] {
                    hi = i;
                }
                if s[hi] - s[lo] > min_m {
                    dir = if hi > lo { 1 } else { -1 };
                    ext = if dir > 0 { hi } else { lo };
                }
            }
            _ => {
                let ahead = if dir > 0 { s[i] >= s[ext] } else { s[i] <= s[ext] };
                if ahead {
                    ext = i;
                } else if (s[ext] - s[i]).abs() > min_m {
                    cuts.push(ext + 1);
                    // The new pass heads the other way from its own extreme.
                    let seg = &s[ext + 1..=i];
                    let pick = |better: fn(f64, f64) -> bool| {
                        (0..seg.len()).fold(0, |b, k| if better(seg[k], seg[b]) { k } else { b })
                    };
                    ext = ext + 1 + if dir > 0 { pick(|a, b| a <= b) } else { pick(|a, b| a >= b) };
                    dir = -dir;
                }
            }
        }
    }
    cuts
}

/// Projections this close to a segment end count as clamped to it.
const END_TOL_M: f64 = 1e-6;

/// Splits a trip into per-segment traversals.
///
/// Fixes are matched sequentially with hysteresis. Maximal runs of fixes on
/// the same segment become traversals; runs briefer than the configured
/// minimum duration or distance are absorbed when both neighbors share a
/// segment and dropped otherwise. Entry and exit times are extrapolated from
/// the first and last fix of each run that projects inside the segment to
/// the segment ends using the robot speed, then clamped so neighboring
/// traversals never overlap. Between contiguous runs the handover is timed
/// by the entering run. A run that turns around on its segment is split
/// into one traversal per pass at the turning fix.
pub fn split_traversals(network: &SidewalkNetwork, trip: &TripLog, cfg: &SplitConfig) -> Split {
    let mut diagnostics = Vec::new();
    let gnss = &trip.channels.gnss;
    let local: Vec<Vec2> = gnss
        .iter()
        .map(|f| network.frame().to_local(f.point()))
        .collect();

    let mut prev = None;
    let matched: Vec<Option<usize>> = local
        .iter()
        .map(|&p| {
            let m = match_local(network, p, prev, &cfg.matching).map(|m| m.segment);
            if m.is_some() {
                prev = m;
            }
            m
        })
        .collect();

    if matched.iter().all(Option::is_none) {
        diagnostics.push(format!("trip {}: no GNSS fix matched the network", trip.trip_id));
        return Split {
            traversals: Vec::new(),
            diagnostics,
        };
    }

    // Maximal runs; an unmatched fix ends the current run.
    let mut runs: Vec<Run> = Vec::new();
    let mut open = false;
    for (i, m) in matched.iter().enumerate() {
        match m {
            Some(seg) => {
                match runs.last_mut() {
                    Some(r) if open && r.segment == *seg => r.fixes.push(i),
                    _ => runs.push(Run {
                        segment: *seg,
                        fixes: vec![i],
                    }),
                }
                open = true;
            }
            None => open = false,
        }
    }

    let t_of = |i: usize| gnss[i].t;
    let s_of = |seg: usize, i: usize| project_onto(network, seg, local[i]).s_m;
    let gap_unmatched = |a: &Run, b: &Run| *b.fixes.first().unwrap() > *a.fixes.last().unwrap() + 1;

    // Bridge brief unmatched gaps inside one segment.
    let mut i = 0;
    while i + 1 < runs.len() {
        let (a, b) = (&runs[i], &runs[i + 1]);
        let gap = t_of(b.fixes[0]) - t_of(*a.fixes.last().unwrap());
        if a.segment == b.segment && gap < cfg.min_duration_s {
            let tail = runs.remove(i + 1);
            runs[i].fixes.extend(tail.fixes);
        } else {
            i += 1;
        }
    }

    let split_reversals = |runs: Vec<Run>| -> Vec<Run> {
        let mut out = Vec::with_capacity(runs.len());
        for r in runs {
            let s: Vec<f64> = r.fixes.iter().map(|&i| s_of(r.segment, i)).collect();
            let mut start = 0;
            for cut in reversal_points(&s, cfg.reversal_m).into_iter().chain([s.len()]) {
                out.push(Run {
                    segment: r.segment,
                    fixes: r.fixes[start..cut].to_vec(),
                });
                start = cut;
            }
        }
        out
    };
    runs = split_reversals(runs);

    let is_short = |r: &Run| {
        let (first, last) = (r.fixes[0], *r.fixes.last().unwrap());
        let duration = t_of(last) - t_of(first);
        let (lo, hi) = r
            .fixes
            .iter()
            .map(|&i| s_of(r.segment, i))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
        duration < cfg.min_duration_s || hi - lo < cfg.min_distance_m
    };

    loop {
        let Some(k) = runs.iter().position(is_short) else { break };
        let same_neighbors = k > 0 && k + 1 < runs.len() && runs[k - 1].segment == runs[k + 1].segment;
        if same_neighbors {
            let mid = runs.remove(k);
            let next = runs.remove(k);
            runs[k - 1].fixes.extend(mid.fixes);
            runs[k - 1].fixes.extend(next.fixes);
        } else {
            let dropped = runs.remove(k);
            diagnostics.push(format!(
                "trip {}: dropped {}-fix run on segment {}",
                trip.trip_id,
                dropped.fixes.len(),
                network.segment(dropped.segment).id
            ));
        }
    }

    // Absorbing a brief excursion can join a pass with its return.
    runs = split_reversals(runs);

    if runs.is_empty() {
        diagnostics.push(format!("trip {}: no run long enough to form a traversal", trip.trip_id));
        return Split {
            traversals: Vec::new(),
            diagnostics,
        };
    }

    let (trip_lo, trip_hi) = trip.channels.time_span().unwrap_or((t_of(0), t_of(gnss.len() - 1)));

    struct Bounds {
        direction: Direction,
        entry_extrap: f64,
        exit_extrap: f64,
        first_t: f64,
        last_t: f64,
    }

    let speed_at = |t: f64, r: &Run| {
        let v = interp_by(&trip.channels.velocity, t, |v| v.t, |v| v.v_mps).unwrap_or(0.0);
        if v >= 0.1 {
            return v;
        }
        let (a, b) = (r.fixes[0], *r.fixes.last().unwrap());
        let dt = t_of(b) - t_of(a);
        if dt > 0.0 {
            (s_of(r.segment, b) - s_of(r.segment, a)).abs() / dt
        } else {
            0.0
        }
    };

    let bounds: Vec<Bounds> = runs
        .iter()
        .map(|r| {
            let seg = network.segment(r.segment);
            // Fixes matched to this segment but already past one of its ends
            // (hysteresis keeps them here after a turn) project onto the end
            // point and carry no timing information; bound from the interior.
            let interior: Vec<usize> = r
                .fixes
                .iter()
                .copied()
                .filter(|&i| {
                    let s = s_of(r.segment, i);
                    s > END_TOL_M && s < seg.length_m - END_TOL_M
                })
                .collect();
            let fixes = if interior.is_empty() { &r.fixes } else { &interior };
            let (first, last) = (fixes[0], *fixes.last().unwrap());
            let (s_first, s_last) = (s_of(r.segment, first), s_of(r.segment, last));
            let direction = if s_last >= s_first {
                Direction::Forward
            } else {
                Direction::Reverse
            };
            let (to_entry, to_exit) = match direction {
                Direction::Forward => (s_first, seg.length_m - s_last),
                Direction::Reverse => (seg.length_m - s_first, s_last),
            };
            let extrap = |dist: f64, t: f64| {
                let v = speed_at(t, r);
                if v >= 0.1 {
                    dist / v
                } else {
                    0.0
                }
            };
            Bounds {
                direction,
                entry_extrap: t_of(first) - extrap(to_entry, t_of(first)),
                exit_extrap: t_of(last) + extrap(to_exit, t_of(last)),
                first_t: t_of(first),
                last_t: t_of(last),
            }
        })
        .collect();

    let n = runs.len();
    let mut enter = vec![0.0; n];
    let mut exit = vec![0.0; n];
    enter[0] = bounds[0].entry_extrap.max(trip_lo);
    exit[n - 1] = bounds[n - 1].exit_extrap.min(trip_hi);
    for k in 0..n.saturating_sub(1) {
        let (a, b) = (&bounds[k], &bounds[k + 1]);
        let contiguous = !gap_unmatched(&runs[k], &runs[k + 1]);
        if contiguous && runs[k].segment == runs[k + 1].segment {
            // Turned around on the segment: the pass ends at the turning fix.
            let turn = t_of(*runs[k].fixes.last().unwrap());
            exit[k] = turn;
            enter[k + 1] = turn;
        } else if contiguous {
            // Hysteresis only ever delays leaving a segment, so the tail of
            // `a` may already lie past the node while the head of `b` is
            // genuinely on `b`: time the handover from the entering side.
            let boundary = b.entry_extrap.clamp(a.first_t, b.first_t);
            exit[k] = boundary;
            enter[k + 1] = boundary;
        } else {
            exit[k] = a.exit_extrap.clamp(a.last_t, b.first_t);
            enter[k + 1] = b.entry_extrap.clamp(exit[k], b.first_t);
        }
    }

    let traversals = runs
        .iter()
        .zip(&bounds)
        .enumerate()
        .filter_map(|(k, (r, b))| {
            let seg = network.segment(r.segment);
            let (t_enter, t_exit) = (enter[k], exit[k]);
            if t_exit <= t_enter {
                return None;
            }
            let (entry_s, exit_s) = match b.direction {
                Direction::Forward => (0.0, seg.length_m),
                Direction::Reverse => (seg.length_m, 0.0),
            };
            let mut path = Vec::with_capacity(r.fixes.len() + 2);
            // Anchor the path at the segment ends when the boundary sits where
            // the extrapolation put it.
            if t_enter < b.first_t && (t_enter - b.entry_extrap).abs() < 0.5 {
                path.push(PathPoint {
                    t: t_enter,
                    s_m: entry_s,
                    d_m: 0.0,
                });
            }
            for &i in r.fixes.iter().filter(|&&i| (t_enter..=t_exit).contains(&t_of(i))) {
                let m = project_onto(network, r.segment, local[i]);
                path.push(PathPoint {
                    t: t_of(i),
                    s_m: m.s_m,
                    d_m: m.d_m,
                });
            }
            if t_exit > b.last_t && (t_exit - b.exit_extrap).abs() < 0.5 {
                path.push(PathPoint {
                    t: t_exit,
                    s_m: exit_s,
                    d_m: 0.0,
                });
            }
            Some(SegmentTraversal {
                trip_id: trip.trip_id.clone(),
                segment: r.segment,
                segment_id: seg.id.clone(),
                length_m: seg.length_m,
                t_enter,
                t_exit,
                direction: b.direction,
                path,
                records: trip.channels.slice(t_enter, t_exit),
            })
        })
        .collect();

    Split {
        traversals,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::EARTH_RADIUS_M;
    use crate::model::{load_network, GnssRecord, SensorRecord, VelocityRecord};
    use serde_json::json;

    fn deg(m: f64) -> f64 {
        (m / EARTH_RADIUS_M).to_degrees()
    }

    #[test]
    fn reversal_points_find_turns() {
        let s: Vec<f64> = (0..=40).map(f64::from).chain((0..40).rev().map(f64::from)).collect();
        assert_eq!(reversal_points(&s, 3.0), vec![41]);
        // Jitter below the threshold is not a turn.
        let jitter: Vec<f64> = (0..50).map(|i| i as f64 + if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(reversal_points(&jitter, 3.0).is_empty());
        // Out, back, out again.
        let zig: Vec<f64> = (0..=10).chain((0..10).rev()).chain(1..=10).map(f64::from).collect();
        assert_eq!(reversal_points(&zig, 3.0), vec![11, 21]);
    }

    /// A: (0,0)->(0,40) north; B: (0,40)->(40,40) east.
    fn corner() -> SidewalkNetwork {
        let src = json!({"type": "FeatureCollection", "features": [
            {"type": "Feature", "geometry": {"type": "LineString", "coordinates": [[0.0, 0.0], [0.0, deg(40.0)]]},
             "properties": {"id": "A", "kind": "sidewalk", "width_m": 3.0}},
            {"type": "Feature", "geometry": {"type": "LineString", "coordinates": [[0.0, deg(40.0)], [deg(40.0), deg(40.0)]]},
             "properties": {"id": "B", "kind": "sidewalk", "width_m": 3.0}},
        ]});
        load_network(&src.to_string()).unwrap()
    }

    /// Drives `waypoints` (planar) at 1 m/s with 1 Hz GNSS and 10 Hz velocity.
    fn drive(net: &SidewalkNetwork, waypoints: &[Vec2]) -> TripLog {
        let mut recs = Vec::new();
        let mut t = 0.0;
        for w in waypoints.windows(2) {
            let len = w[0].dist(w[1]);
            let steps = (len * 10.0).round() as usize;
            for k in 0..steps {
                let p = w[0].add(w[1].sub(w[0]).scale(k as f64 / steps as f64));
                let tk = t + k as f64 * 0.1;
                if k % 10 == 0 {
                    let g = net.frame().to_geo(p);
                    recs.push(SensorRecord::Gnss(GnssRecord {
                        t: tk,
                        lat: g.lat,
                        lon: g.lon,
                        alt_m: Some(0.0),
                    }));
                }
                recs.push(SensorRecord::Velocity(VelocityRecord {
                    t: tk,
                    v_mps: 1.0,
                    heading_deg: None,
                }));
            }
            t += len;
        }
        TripLog::from_records("trip", recs)
    }

    #[test]
    fn a_then_b() {
        let net = corner();
        let trip = drive(&net, &[Vec2::new(0.0, 0.0), Vec2::new(0.0, 40.0), Vec2::new(40.0, 40.0)]);
        let split = split_traversals(&net, &trip, &SplitConfig::default());
        let ids: Vec<&str> = split.traversals.iter().map(|t| t.segment_id.as_str()).collect();
        assert_eq!(ids, ["A", "B"]);
        let (a, b) = (&split.traversals[0], &split.traversals[1]);
        assert!((a.t_exit - 40.0).abs() <= 1.0, "boundary {}", a.t_exit);
        assert_eq!(a.t_exit, b.t_enter);
        assert_eq!(a.direction, Direction::Forward);
    }

    #[test]
    fn reentry_gives_two_traversals() {
        let net = corner();
        let trip = drive(
            &net,
            &[
                Vec2::new(0.0, 0.0),
                Vec2::new(0.0, 40.0),
                Vec2::new(20.0, 40.0),
                Vec2::new(0.0, 40.0),
                Vec2::new(0.0, 10.0),
            ],
        );
        let split = split_traversals(&net, &trip, &SplitConfig::default());
        let ids: Vec<&str> = split.traversals.iter().map(|t| t.segment_id.as_str()).collect();
        // Out and back on B is two passes.
        assert_eq!(ids, ["A", "B", "B", "A"]);
        let dirs: Vec<Direction> = split.traversals.iter().map(|t| t.direction).collect();
        assert_eq!(dirs, [Direction::Forward, Direction::Forward, Direction::Reverse, Direction::Reverse]);
        let (out, back) = (&split.traversals[1], &split.traversals[2]);
        assert_eq!(out.t_exit, back.t_enter);
        assert!((out.t_exit - 60.0).abs() <= 1.0, "turn at {}", out.t_exit);
    }

    #[test]
    fn off_network_trip_yields_diagnostic() {
        let net = corner();
        let trip = drive(&net, &[Vec2::new(500.0, 500.0), Vec2::new(520.0, 500.0)]);
        let split = split_traversals(&net, &trip, &SplitConfig::default());
        assert!(split.traversals.is_empty());
        assert_eq!(split.diagnostics.len(), 1);
    }

    #[test]
    fn traversals_cover_matched_fixes_without_overlap() {
        let net = corner();
        let trip = drive(&net, &[Vec2::new(0.0, 0.0), Vec2::new(0.0, 40.0), Vec2::new(40.0, 40.0)]);
        let split = split_traversals(&net, &trip, &SplitConfig::default());
        for w in split.traversals.windows(2) {
            assert!(w[0].t_exit <= w[1].t_enter);
        }
        for fix in &trip.channels.gnss {
            if match_position(&net, fix, None, &MatchConfig::default()).is_some() {
                assert!(split
                    .traversals
                    .iter()
                    .any(|t| fix.t >= t.t_enter && fix.t <= t.t_exit));
            }
        }
        for t in &split.traversals {
            let progress: Vec<f64> = t.path.iter().map(|p| t.progress_of(p.s_m)).collect();
            assert!(progress.windows(2).all(|w| w[1] >= w[0] - 1.0));
            assert!(t.path.iter().all(|p| p.s_m >= 0.0 && p.s_m <= t.length_m + 2.0));
        }
    }

    use crate::model::match_position;
}
