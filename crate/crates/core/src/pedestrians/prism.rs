//! Moving-observer density over the detection prism.

use serde::{Deserialize, Serialize};

use super::PedestrianTrack;
use crate::model::{Segment, SegmentTraversal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrismConfig {
    /// Forward depth of the detection plane.
    pub depth_m: f64,
    /// Occupancy sampling step, aligned to the global grid.
    pub tick_s: f64,
}

impl Default for PrismConfig {
    fn default() -> Self {
        Self {
            depth_m: 10.0,
            tick_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionPrism {
    pub b_m: f64,
    pub c_m: f64,
    /// Robot time from segment entry until it is `c` before the segment end.
    pub duration_s: f64,
    /// Occupancy time per track id, tracks never inside omitted.
    pub occupancy: Vec<(String, f64)>,
    /// Pedestrians inside the plane at each tick.
    pub counts: Vec<usize>,
}

impl DetectionPrism {
    pub fn area(&self) -> f64 {
        self.b_m * self.c_m
    }

    pub fn volume(&self) -> f64 {
        self.duration_s * self.area()
    }

    pub fn k_avg(&self) -> f64 {
        self.occupancy.iter().map(|o| o.1).sum::<f64>() / self.volume()
    }

    pub fn k_max(&self) -> f64 {
        self.counts.iter().copied().max().unwrap_or(0) as f64 / self.area()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrismError {
    NonPositiveWidth,
    SegmentShorterThanDepth,
    EndNotReached,
}

impl std::fmt::Display for PrismError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PrismError::NonPositiveWidth => "segment width must be positive",
            PrismError::SegmentShorterThanDepth => "segment is shorter than the detection depth",
            PrismError::EndNotReached => "robot never came within the detection depth of the segment end",
        })
    }
}

/// Builds the detection prism for a traversal and accumulates occupancy of
/// the smoothed tracks.
///
/// Ticks run over the global grid in `[t_enter, t_enter + T)`. A pedestrian is
/// inside at a tick when its smoothed position is between zero and `c` meters
/// ahead of the robot along the segment and within `b/2` of the centerline.
pub fn prism_density(
    trav: &SegmentTraversal,
    segment: &Segment,
    tracks: &[PedestrianTrack],
    cfg: &PrismConfig,
) -> Result<DetectionPrism, PrismError> {
    let b = segment.nominal_width_m;
    let c = cfg.depth_m;
    if b <= 0.0 {
        return Err(PrismError::NonPositiveWidth);
    }
    if trav.length_m < c {
        return Err(PrismError::SegmentShorterThanDepth);
    }
    let t_end = trav.time_at_progress(trav.length_m - c).ok_or(PrismError::EndNotReached)?;
    let duration_s = t_end - trav.t_enter;
    if duration_s <= 0.0 {
        return Err(PrismError::EndNotReached);
    }

    // Pedestrian positions in travel coordinates, per track, keyed by tick index.
    let located: Vec<Vec<(i64, f64, f64)>> = tracks
        .iter()
        .map(|tr| {
            tr.smoothed
                .iter()
                .map(|p| {
                    let proj = segment.geometry().project(p.pos());
                    let s = segment.to_segment_s(proj.s);
                    ((p.t / cfg.tick_s).round() as i64, trav.progress_of(s), proj.d)
                })
                .collect()
        })
        .collect();

    let k0 = (trav.t_enter / cfg.tick_s - 1e-9).ceil() as i64;
    let mut counts = Vec::new();
    let mut ticks_inside = vec![0usize; tracks.len()];
    let mut k = k0;
    while (k as f64) * cfg.tick_s < t_end - 1e-9 {
        let tk = k as f64 * cfg.tick_s;
        let robot = trav.progress_at(tk).unwrap_or(0.0);
        let mut n = 0;
        for (i, pts) in located.iter().enumerate() {
            let Ok(j) = pts.binary_search_by(|p| p.0.cmp(&k)) else { continue };
            let (_, prog, d) = pts[j];
            let ahead = prog - robot;
            if (0.0..=c).contains(&ahead) && d.abs() <= b / 2.0 {
                n += 1;
                ticks_inside[i] += 1;
            }
        }
        counts.push(n);
        k += 1;
    }
    let occupancy = tracks
        .iter()
        .zip(&ticks_inside)
        .filter(|(_, &n)| n > 0)
        .map(|(tr, &n)| (tr.ped_id.clone(), n as f64 * cfg.tick_s))
        .collect();
    Ok(DetectionPrism {
        b_m: b,
        c_m: c,
        duration_s,
        occupancy,
        counts,
    })
}
