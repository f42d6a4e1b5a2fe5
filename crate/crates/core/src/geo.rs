//! Geodesy and planar polyline helpers.
//!
//! All along-track work happens in a local tangent-plane frame (x east,
//! y north, meters) anchored at the network origin. At campus scale the
//! equirectangular approximation is accurate to well under a centimeter.

use serde::{Deserialize, Serialize};

/// Mean Earth radius (IUGG), meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (la1, la2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = la2 - la1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Sum of great-circle distances between consecutive vertices.
pub fn geodesic_length_m(points: &[GeoPoint]) -> f64 {
    points.windows(2).map(|w| haversine_m(w[0], w[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2-D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        self.sub(o).norm()
    }
}

/// Equirectangular projection around a fixed origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    origin: GeoPoint,
    cos_lat0: f64,
}

impl LocalFrame {
    pub fn new(origin: GeoPoint) -> Self {
        Self {
            origin,
            cos_lat0: origin.lat.to_radians().cos(),
        }
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn to_local(&self, p: GeoPoint) -> Vec2 {
        Vec2::new(
            EARTH_RADIUS_M * self.cos_lat0 * (p.lon - self.origin.lon).to_radians(),
            EARTH_RADIUS_M * (p.lat - self.origin.lat).to_radians(),
        )
    }

    pub fn to_geo(&self, v: Vec2) -> GeoPoint {
        GeoPoint::new(
            self.origin.lat + (v.y / EARTH_RADIUS_M).to_degrees(),
            self.origin.lon + (v.x / (EARTH_RADIUS_M * self.cos_lat0)).to_degrees(),
        )
    }
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length from the first vertex to the foot point.
    pub s: f64,
    /// Signed cross-track offset, positive to the left of the polyline direction.
    pub d: f64,
    /// Unsigned distance to the foot point.
    pub dist: f64,
}

/// A planar polyline with cumulative arc lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Vec2>,
    cum: Vec<f64>,
}

impl Polyline {
    /// Builds a polyline; consecutive duplicate vertices are collapsed.
    /// Returns `None` for fewer than two distinct vertices.
    pub fn new(points: Vec<Vec2>) -> Option<Self> {
        let mut pts: Vec<Vec2> = Vec::with_capacity(points.len());
        for p in points {
            if pts.last().is_none_or(|q| q.dist(p) > 1e-9) {
                pts.push(p);
            }
        }
        if pts.len() < 2 {
            return None;
        }
        let mut cum = Vec::with_capacity(pts.len());
        cum.push(0.0);
        for w in pts.windows(2) {
            let last = *cum.last().unwrap();
            cum.push(last + w[0].dist(w[1]));
        }
        Some(Self { points: pts, cum })
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn start(&self) -> Vec2 {
        self.points[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.points.last().unwrap()
    }

    pub fn project(&self, p: Vec2) -> Projection {
        let mut best = Projection {
            s: 0.0,
            d: 0.0,
            dist: f64::INFINITY,
        };
        for (i, w) in self.points.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let ab = b.sub(a);
            let len = self.cum[i + 1] - self.cum[i];
            let u = ab.scale(1.0 / len);
            let along = p.sub(a).dot(u).clamp(0.0, len);
            let foot = a.add(u.scale(along));
            let off = p.sub(foot);
            let dist = off.norm();
            if dist < best.dist {
                let side = u.cross(off);
                best = Projection {
                    s: self.cum[i] + along,
                    d: if side < 0.0 { -dist } else { dist },
                    dist,
                };
            }
        }
        best
    }

    fn edge_at(&self, s: f64) -> usize {
        let n = self.points.len() - 1;
        match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    /// Unit direction of travel at arc length `s` (clamped to the end edges).
    pub fn tangent_at(&self, s: f64) -> Vec2 {
        let i = self.edge_at(s);
        let d = self.points[i + 1].sub(self.points[i]);
        d.scale(1.0 / d.norm())
    }

    /// Point at arc length `s`; outside `[0, length]` the end edges are
    /// extended as straight lines.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let i = self.edge_at(s);
        let u = self.tangent_at(s);
        self.points[i].add(u.scale(s - self.cum[i]))
    }

    /// Point at arc length `s` displaced laterally by `d` (positive left).
    pub fn offset_point(&self, s: f64, d: f64) -> Vec2 {
        let u = self.tangent_at(s);
        let left = Vec2::new(-u.y, u.x);
        self.point_at(s).add(left.scale(d))
    }
}

/// Compass bearing (degrees clockwise from north) of a planar direction.
pub fn bearing_deg(dir: Vec2) -> f64 {
    dir.x.atan2(dir.y).to_degrees().rem_euclid(360.0)
}

/// Planar unit vector for a compass bearing.
pub fn bearing_unit(bearing_deg: f64) -> Vec2 {
    let r = bearing_deg.to_radians();
    Vec2::new(r.sin(), r.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn haversine_north_50m() {
        let a = GeoPoint::new(0.0, 0.0);
        let b = GeoPoint::new((50.0 / EARTH_RADIUS_M).to_degrees(), 0.0);
        assert_abs_diff_eq!(haversine_m(a, b), 50.0, epsilon = 1e-9);
    }

    #[test]
    fn local_frame_round_trip() {
        let f = LocalFrame::new(GeoPoint::new(59.35, 18.07));
        let p = GeoPoint::new(59.3512, 18.0734);
        let q = f.to_geo(f.to_local(p));
        assert_abs_diff_eq!(p.lat, q.lat, epsilon = 1e-12);
        assert_abs_diff_eq!(p.lon, q.lon, epsilon = 1e-12);
    }

    #[test]
    fn projection_sign_is_left_positive() {
        let pl = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)]).unwrap();
        let left = pl.project(Vec2::new(4.0, 2.0));
        assert_abs_diff_eq!(left.s, 4.0);
        assert_abs_diff_eq!(left.d, 2.0);
        let right = pl.project(Vec2::new(4.0, -3.0));
        assert_abs_diff_eq!(right.d, -3.0);
    }

    #[test]
    fn point_at_extends_past_ends() {
        let pl = Polyline::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 0.0),
            Vec2::new(10.0, 10.0),
        ])
        .unwrap();
        assert_eq!(pl.point_at(15.0), Vec2::new(10.0, 5.0));
        assert_eq!(pl.point_at(25.0), Vec2::new(10.0, 15.0));
        assert_eq!(pl.point_at(-2.0), Vec2::new(-2.0, 0.0));
        assert_eq!(pl.offset_point(5.0, 1.0), Vec2::new(5.0, 1.0));
    }

    #[test]
    fn bearings() {
        assert_abs_diff_eq!(bearing_deg(Vec2::new(0.0, 1.0)), 0.0);
        assert_abs_diff_eq!(bearing_deg(Vec2::new(1.0, 0.0)), 90.0);
        let u = bearing_unit(270.0);
        assert_abs_diff_eq!(u.x, -1.0, epsilon = 1e-12);
    }
}
