//! Sidewalk utilization: pedestrian tracks, walking behavior and density.

mod metrics;
mod prism;
mod tracks;

pub use metrics::{path_deviation, track_metrics, MetricsConfig, TrackMetrics};
pub use prism::{prism_density, DetectionPrism, PrismConfig, PrismError};
pub use tracks::{build_tracks, robot_pose, smooth_track, to_absolute, PedestrianTrack, TrackConfig, TrackPoint};

use serde::{Deserialize, Serialize};

use crate::model::{Segment, SegmentTraversal};
use crate::series::mean;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PedestrianConfig {
    pub tracks: TrackConfig,
    pub metrics: MetricsConfig,
    pub prism: PrismConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilizationFeatureBlock {
    pub total_ped_count: usize,
    pub avg_ped_speed: Option<f64>,
    pub ped_speed_variation: Option<f64>,
    pub ped_turns: Option<f64>,
    pub ped_path_deviation: Option<f64>,
    pub max_ped_density: Option<f64>,
    pub avg_ped_density: Option<f64>,
    /// Prism duration `T`, when the prism is defined.
    pub prism_duration_s: Option<f64>,
    pub qualified_tracks: usize,
}

/// Utilization features of one traversal plus an optional diagnostic when
/// the density prism is undefined.
pub fn utilization_block(
    trav: &SegmentTraversal,
    segment: &Segment,
    cfg: &PedestrianConfig,
) -> (UtilizationFeatureBlock, Vec<PedestrianTrack>, Option<String>) {
    let tracks = build_tracks(trav, segment, &cfg.tracks);
    let metrics: Vec<TrackMetrics> = tracks
        .iter()
        .filter(|t| cfg.tracks.qualifies(t))
        .filter_map(|t| track_metrics(&t.smoothed, &cfg.metrics))
        .collect();
    let avg = |f: fn(&TrackMetrics) -> f64| mean(&metrics.iter().map(f).collect::<Vec<_>>());
    let mut block = UtilizationFeatureBlock {
        total_ped_count: tracks.len(),
        avg_ped_speed: avg(|m| m.avg_speed),
        ped_speed_variation: avg(|m| m.speed_sd),
        ped_turns: avg(|m| m.turns as f64),
        ped_path_deviation: avg(|m| m.path_deviation),
        qualified_tracks: metrics.len(),
        ..Default::default()
    };
    let diag = match prism_density(trav, segment, &tracks, &cfg.prism) {
        Ok(p) => {
            block.max_ped_density = Some(p.k_max());
            block.avg_ped_density = Some(p.k_avg());
            block.prism_duration_s = Some(p.duration_s);
            None
        }
        Err(e) => Some(format!(
            "trip {} segment {}: density undefined, {e}",
            trav.trip_id, trav.segment_id
        )),
    };
    (block, tracks, diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{Vec2, EARTH_RADIUS_M};
    use crate::model::{load_network, Channels, Direction, PathPoint, PedRecord, SidewalkNetwork, VelocityRecord};
    use serde_json::json;

    fn deg(m: f64) -> f64 {
        (m / EARTH_RADIUS_M).to_degrees()
    }

    /// One northbound segment of length `a` and width `b`.
    fn straight(a: f64, b: f64) -> SidewalkNetwork {
        let src = json!({"type": "FeatureCollection", "features": [
            {"type": "Feature", "geometry": {"type": "LineString", "coordinates": [[0.0, 0.0], [0.0, deg(a)]]},
             "properties": {"id": "A", "kind": "sidewalk", "width_m": b}},
        ]});
        load_network(&src.to_string()).unwrap()
    }

    /// Robot drives the whole segment north at 1 m/s, heading 0.
    fn traversal(net: &SidewalkNetwork, peds: Vec<PedRecord>) -> SegmentTraversal {
        let a = net.segment(0).length_m;
        SegmentTraversal {
            trip_id: "x".into(),
            segment: 0,
            segment_id: "A".into(),
            length_m: a,
            t_enter: 0.0,
            t_exit: a,
            direction: Direction::Forward,
            path: vec![
                PathPoint { t: 0.0, s_m: 0.0, d_m: 0.0 },
                PathPoint { t: a, s_m: a, d_m: 0.0 },
            ],
            records: Channels {
                velocity: (0..=(a as usize * 10))
                    .map(|i| VelocityRecord {
                        t: i as f64 * 0.1,
                        v_mps: 1.0,
                        heading_deg: Some(0.0),
                    })
                    .collect(),
                peds,
                ..Default::default()
            },
        }
    }

    /// Detections of a pedestrian walking alongside the robot `ahead` meters in front.
    fn companion(id: &str, ahead: f64, lateral: f64, until: f64) -> Vec<PedRecord> {
        (0..=(until * 5.0) as usize)
            .map(|i| PedRecord {
                t: i as f64 * 0.2,
                ped_id: id.into(),
                x_m: ahead,
                y_m: lateral,
            })
            .collect()
    }

    #[test]
    fn empty_prism() {
        let net = straight(30.0, 3.0);
        let (b, tracks, diag) = utilization_block(&traversal(&net, vec![]), net.segment(0), &PedestrianConfig::default());
        assert!(tracks.is_empty() && diag.is_none());
        assert_eq!(b.total_ped_count, 0);
        assert_eq!((b.avg_ped_density, b.max_ped_density), (Some(0.0), Some(0.0)));
        assert_eq!(b.avg_ped_speed, None);
    }

    #[test]
    fn one_pedestrian_whole_time() {
        let net = straight(30.0, 3.0);
        let trav = traversal(&net, companion("p", 5.0, 0.0, 30.0));
        let tracks = build_tracks(&trav, net.segment(0), &TrackConfig::default());
        let prism = prism_density(&trav, net.segment(0), &tracks, &PrismConfig::default()).unwrap();
        assert!((prism.duration_s - 20.0).abs() < 1e-6);
        assert!((prism.volume() - prism.duration_s * prism.area()).abs() < 1e-9);
        // Tick-counting oracle: 40 ticks of 0.5 s in [0, 20).
        assert_eq!(prism.counts.len(), 40);
        assert!((prism.k_avg() - 20.0 / 600.0).abs() < 1e-6);
        assert!(prism.k_max() >= prism.k_avg());
    }

    #[test]
    fn range_and_corridor_gates() {
        let net = straight(30.0, 3.0);
        let mut peds = companion("far", 12.0, 0.0, 30.0);
        peds.extend(companion("side", 3.0, 4.0, 30.0));
        peds.extend(companion("in", 3.0, 1.0, 30.0));
        let trav = traversal(&net, peds);
        let tracks = build_tracks(&trav, net.segment(0), &TrackConfig::default());
        let ids: Vec<&str> = tracks.iter().map(|t| t.ped_id.as_str()).collect();
        assert_eq!(ids, ["in"]);
        let p = tracks[0].points[10];
        assert!((p.x + 1.0).abs() < 1e-6 && (p.y - (p.t + 3.0)).abs() < 1e-6);
    }

    #[test]
    fn duplicates_double_density() {
        let net = straight(30.0, 3.0);
        let mut peds = companion("a", 5.0, 0.0, 30.0);
        peds.extend(companion("b", 7.0, -0.5, 12.0));
        let trav = traversal(&net, peds.clone());
        let mut doubled = peds.clone();
        doubled.extend(peds.iter().map(|p| PedRecord {
            ped_id: format!("{}'", p.ped_id),
            ..p.clone()
        }));
        let cfg = PedestrianConfig::default();
        let (b1, _, _) = utilization_block(&trav, net.segment(0), &cfg);
        let (b2, _, _) = utilization_block(&traversal(&net, doubled), net.segment(0), &cfg);
        assert!((b2.avg_ped_density.unwrap() - 2.0 * b1.avg_ped_density.unwrap()).abs() < 1e-12);
        assert!((b2.max_ped_density.unwrap() - 2.0 * b1.max_ped_density.unwrap()).abs() < 1e-12);
        assert!((b2.avg_ped_speed.unwrap() - b1.avg_ped_speed.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn short_segment_has_no_prism() {
        let net = straight(8.0, 3.0);
        let (b, _, diag) = utilization_block(&traversal(&net, vec![]), net.segment(0), &PedestrianConfig::default());
        assert!(diag.is_some());
        assert_eq!(b.avg_ped_density, None);
    }

    #[test]
    fn absolute_position_of_forward_detection() {
        let net = straight(30.0, 3.0);
        let trav = traversal(&net, vec![]);
        let (pos, h) = robot_pose(&trav, net.segment(0), 0.0).unwrap();
        assert!(pos.norm() < 1e-9 && h == 0.0);
        let p = to_absolute(pos, h, 2.0, 0.0);
        assert!(p.dist(Vec2::new(0.0, 2.0)) < 1e-9);
    }
}
