//! Built-in nine-segment campus network and a scenario calibrated to it.

use std::collections::BTreeMap;

use super::spec::{BumpSpec, PedestrianSpec, PinchSpec, ScenarioSpec, SurfaceSpec};
use crate::geo::{GeoPoint, LocalFrame, Vec2};
use crate::model::{
    Feature, Geometry, NetworkDocument, Properties, SegmentKind, SidewalkNetwork,
};

pub const CAMPUS_ORIGIN: GeoPoint = GeoPoint {
    lat: 59.35,
    lon: 18.07,
};

/// (id, local vertices east/north in meters, width)
const SEGMENTS: [(&str, &[(f64, f64)], f64); 9] = [
    ("S1", &[(0.0, 0.0), (0.0, 48.0)], 2.4),
    ("S2", &[(0.0, 48.0), (42.0, 48.0)], 2.6),
    ("S3", &[(42.0, 48.0), (42.0, 100.0)], 2.2),
    ("S4", &[(42.0, 100.0), (60.0, 112.0), (90.0, 112.0)], 2.8),
    ("S5", &[(90.0, 112.0), (90.0, 60.0)], 6.5),
    ("S6", &[(90.0, 60.0), (150.0, 60.0)], 8.0),
    ("S7", &[(150.0, 60.0), (150.0, 125.0)], 2.5),
    ("S8", &[(150.0, 125.0), (215.0, 125.0)], 10.0),
    ("S9", &[(215.0, 125.0), (215.0, 55.0)], 5.5),
];

fn round_deg(x: f64) -> f64 {
    (x * 1e8).round() / 1e8
}

pub fn campus_network_document() -> NetworkDocument {
    let frame = LocalFrame::new(CAMPUS_ORIGIN);
    let features = SEGMENTS
        .iter()
        .map(|(id, pts, width)| Feature {
            kind: "Feature".into(),
            geometry: Geometry {
                kind: "LineString".into(),
                coordinates: pts
                    .iter()
                    .map(|&(x, y)| {
                        let g = frame.to_geo(Vec2::new(x, y));
                        vec![round_deg(g.lon), round_deg(g.lat)]
                    })
                    .collect(),
            },
            properties: Properties {
                id: (*id).into(),
                kind: SegmentKind::Sidewalk,
                width_m: *width,
                length_m: None,
            },
        })
        .collect();
    NetworkDocument {
        kind: "FeatureCollection".into(),
        features,
    }
}

pub fn campus_network() -> SidewalkNetwork {
    campus_network_document()
        .build()
        .expect("built-in network is valid")
}

fn bumps(at: &[f64], magnitude: f64) -> Vec<BumpSpec> {
    at.iter().map(|&s_m| BumpSpec { s_m, magnitude }).collect()
}

/// Campus scenario: S7 carries four paving transitions, S3 a ramp and a
/// pinch, S8 is a busy plaza.
pub fn campus_scenario() -> ScenarioSpec {
    let mut surfaces = BTreeMap::new();
    let mut put = |id: &str, s: SurfaceSpec| {
        surfaces.insert(id.to_string(), s);
    };
    put("S1", SurfaceSpec {
        bumps: bumps(&[20.0], 5.0),
        grade: 0.01,
        light_level: 0.8,
        ..SurfaceSpec::default()
    });
    put("S2", SurfaceSpec::default());
    put("S3", SurfaceSpec {
        bumps: bumps(&[30.0], 4.5),
        grade: 0.03,
        pinches: vec![PinchSpec {
            from_m: 20.0,
            to_m: 26.0,
            width_m: 1.3,
        }],
        light_level: 0.55,
        ..SurfaceSpec::default()
    });
    put("S4", SurfaceSpec {
        undulation_amp_mps2: 0.3,
        light_level: 0.6,
        ..SurfaceSpec::default()
    });
    put("S5", SurfaceSpec {
        grade: -0.02,
        ..SurfaceSpec::default()
    });
    put("S6", SurfaceSpec {
        bumps: bumps(&[15.0, 45.0], 5.0),
        light_level: 0.85,
        ..SurfaceSpec::default()
    });
    put("S7", SurfaceSpec {
        bumps: bumps(&[10.0, 25.0, 40.0, 55.0], 5.5),
        light_level: 0.5,
        ..SurfaceSpec::default()
    });
    put("S8", SurfaceSpec {
        light_level: 0.9,
        ..SurfaceSpec::default()
    });
    put("S9", SurfaceSpec {
        undulation_amp_mps2: 0.15,
        grade: 0.015,
        ..SurfaceSpec::default()
    });

    let crowd = PedestrianSpec {
        zigzag_fraction: 0.3,
        jam_density: Some(0.6),
        ..PedestrianSpec::default()
    };
    let pedestrians = [
        ("S1", 0.02),
        ("S2", 0.03),
        ("S3", 0.05),
        ("S4", 0.04),
        ("S5", 0.08),
        ("S6", 0.12),
        ("S7", 0.06),
        ("S8", 0.2),
        ("S9", 0.05),
    ]
    .into_iter()
    .map(|(id, density)| {
        (
            id.to_string(),
            PedestrianSpec {
                density,
                ..crowd.clone()
            },
        )
    })
    .collect();

    ScenarioSpec {
        surfaces,
        default_pedestrians: crowd,
        pedestrians,
        ..ScenarioSpec::default()
    }
}
