use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{geodesic_length_m, GeoPoint, LocalFrame, Polyline, Vec2};

/// Endpoints closer than this are considered connected.
const ADJACENCY_TOLERANCE_M: f64 = 1.0;
/// Allowed disagreement between a declared length and the polyline arc length.
const LENGTH_TOLERANCE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("cannot read network: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed network document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("network has no segments")]
    Empty,
    #[error("duplicate segment id `{0}`")]
    DuplicateId(String),
    #[error("segment `{0}`: polyline needs at least two distinct points")]
    EmptyPolyline(String),
    #[error("segment `{id}`: width must be positive, got {width}")]
    NonPositiveWidth { id: String, width: f64 },
    #[error("segment `{id}`: declared length {declared} m differs from polyline length {measured:.3} m by more than 1%")]
    LengthMismatch { id: String, declared: f64, measured: f64 },
    #[error("segment `{id}`: unsupported geometry type `{kind}`")]
    UnsupportedGeometry { id: String, kind: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Sidewalk,
    Crossing,
}

impl SegmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Sidewalk => "sidewalk",
            SegmentKind::Crossing => "crossing",
        }
    }
}

/// A network segment with its planar geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: String,
    pub kind: SegmentKind,
    pub polyline: Vec<GeoPoint>,
    pub length_m: f64,
    pub nominal_width_m: f64,
    geometry: Polyline,
}

impl Segment {
    /// Planar geometry in the network's local frame.
    pub fn geometry(&self) -> &Polyline {
        &self.geometry
    }

    /// Ratio from planar arc length to reported `length_m`.
    fn s_scale(&self) -> f64 {
        self.length_m / self.geometry.length()
    }

    /// Converts planar arc length to segment distance in `[0, length_m]` units.
    pub fn to_segment_s(&self, planar_s: f64) -> f64 {
        planar_s * self.s_scale()
    }

    pub fn to_planar_s(&self, s_m: f64) -> f64 {
        s_m / self.s_scale()
    }

    /// Planar point at segment distance `s_m` with lateral offset `d_m` (left positive).
    pub fn point_at(&self, s_m: f64, d_m: f64) -> Vec2 {
        self.geometry.offset_point(self.to_planar_s(s_m), d_m)
    }
}

#[derive(Debug, Clone)]
pub struct SidewalkNetwork {
    frame: LocalFrame,
    segments: Vec<Segment>,
    index: HashMap<String, usize>,
    adjacency: BTreeSet<(usize, usize)>,
    bbox: (Vec2, Vec2),
}

impl SidewalkNetwork {
    pub fn frame(&self) -> &LocalFrame {
        &self.frame
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, idx: usize) -> &Segment {
        &self.segments[idx]
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn by_id(&self, id: &str) -> Option<&Segment> {
        self.index_of(id).map(|i| &self.segments[i])
    }

    /// Symmetric adjacency as ordered index pairs, both directions present.
    pub fn adjacency(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().copied()
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency.contains(&(a, b))
    }

    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency
            .range((idx, 0)..=(idx, usize::MAX))
            .map(|&(_, b)| b)
    }

    /// Planar bounding box of all segment vertices.
    pub fn bbox(&self) -> (Vec2, Vec2) {
        self.bbox
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            kind: "FeatureCollection".into(),
            features: self
                .segments
                .iter()
                .map(|s| Feature {
                    kind: "Feature".into(),
                    geometry: Geometry {
                        kind: "LineString".into(),
                        coordinates: s.polyline.iter().map(|p| vec![p.lon, p.lat]).collect(),
                    },
                    properties: Properties {
                        id: s.id.clone(),
                        kind: s.kind,
                        width_m: s.nominal_width_m,
                        length_m: Some(s.length_m),
                    },
                })
                .collect(),
        }
    }
}

/// GeoJSON-style FeatureCollection with one LineString per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    #[serde(rename = "type", default = "feature_collection")]
    pub kind: String,
    pub features: Vec<Feature>,
}

fn feature_collection() -> String {
    "FeatureCollection".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    #[serde(rename = "type", default)]
    pub kind: String,
    pub geometry: Geometry,
    pub properties: Properties,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    #[serde(rename = "type")]
    pub kind: String,
    /// `[lon, lat]` or `[lon, lat, alt]` positions.
    pub coordinates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Properties {
    pub id: String,
    pub kind: SegmentKind,
    pub width_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_m: Option<f64>,
}

impl NetworkDocument {
    /// Validates the document and builds the network.
    pub fn build(&self) -> Result<SidewalkNetwork, NetworkError> {
        if self.features.is_empty() {
            return Err(NetworkError::Empty);
        }
        let mut index = HashMap::new();
        let mut raw = Vec::with_capacity(self.features.len());
        for f in &self.features {
            let id = f.properties.id.clone();
            if f.geometry.kind != "LineString" {
                return Err(NetworkError::UnsupportedGeometry {
                    id,
                    kind: f.geometry.kind.clone(),
                });
            }
            if index.insert(id.clone(), raw.len()).is_some() {
                return Err(NetworkError::DuplicateId(id));
            }
            let width = f.properties.width_m;
            if !(width > 0.0) {
                return Err(NetworkError::NonPositiveWidth { id, width });
            }
            let pts: Vec<GeoPoint> = f
                .geometry
                .coordinates
                .iter()
                .filter(|c| c.len() >= 2)
                .map(|c| GeoPoint::new(c[1], c[0]))
                .collect();
            if pts.len() < 2 || pts.len() != f.geometry.coordinates.len() {
                return Err(NetworkError::EmptyPolyline(id));
            }
            raw.push((f, pts));
        }

        let origin = raw[0].1[0];
        let frame = LocalFrame::new(origin);
        let mut segments = Vec::with_capacity(raw.len());
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (f, pts) in raw {
            let id = f.properties.id.clone();
            let local: Vec<Vec2> = pts.iter().map(|&p| frame.to_local(p)).collect();
            for p in &local {
                lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
            }
            let geometry =
                Polyline::new(local).ok_or_else(|| NetworkError::EmptyPolyline(id.clone()))?;
            let measured = geodesic_length_m(&pts);
            let length_m = match f.properties.length_m {
                Some(declared) => {
                    if !(declared > 0.0) || (declared - measured).abs() > LENGTH_TOLERANCE * measured {
                        return Err(NetworkError::LengthMismatch {
                            id,
                            declared,
                            measured,
                        });
                    }
                    declared
                }
                None => measured,
            };
            segments.push(Segment {
                id,
                kind: f.properties.kind,
                polyline: pts,
                length_m,
                nominal_width_m: f.properties.width_m,
                geometry,
            });
        }

        let mut adjacency = BTreeSet::new();
        for i in 0..segments.len() {
            for j in (i + 1)..segments.len() {
                let (a, b) = (segments[i].geometry(), segments[j].geometry());
                let touching = [a.start(), a.end()]
                    .iter()
                    .any(|p| [b.start(), b.end()].iter().any(|q| p.dist(*q) < ADJACENCY_TOLERANCE_M));
                if touching {
                    adjacency.insert((i, j));
                    adjacency.insert((j, i));
                }
            }
        }

        Ok(SidewalkNetwork {
            frame,
            segments,
            index,
            adjacency,
            bbox: (lo, hi),
        })
    }
}

/// Parses and validates a network document.
pub fn load_network(source: &str) -> Result<SidewalkNetwork, NetworkError> {
    let doc: NetworkDocument = serde_json::from_str(source)?;
    doc.build()
}

pub fn load_network_file(path: impl AsRef<Path>) -> Result<SidewalkNetwork, NetworkError> {
    load_network(&std::fs::read_to_string(path)?)
}
