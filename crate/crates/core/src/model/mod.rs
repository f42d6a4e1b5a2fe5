//! Sidewalk network, trip data model, map matching and traversal splitting.

mod matching;
mod network;
mod traversal;

pub use matching::{match_position, MatchConfig, SegmentMatch};
pub use network::{
    load_network, load_network_file, Feature, Geometry, NetworkDocument, NetworkError, Properties,
    Segment, SegmentKind,
    SidewalkNetwork,
};
pub use traversal::{split_traversals, Direction, PathPoint, SegmentTraversal, Split, SplitConfig};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnssRecord {
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
    pub alt_m: Option<f64>,
}

impl GnssRecord {
    pub fn point(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityRecord {
    pub t: f64,
    pub v_mps: f64,
    /// Compass heading, degrees clockwise from north.
    pub heading_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImuRecord {
    pub t: f64,
    /// Vertical acceleration, gravity included.
    pub az_mps2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthRecord {
    pub t: f64,
    pub w_m: f64,
}

/// A pedestrian detection in the robot frame: `x_m` forward, `y_m` to the left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedRecord {
    pub t: f64,
    pub ped_id: String,
    pub x_m: f64,
    pub y_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightRecord {
    pub t: f64,
    pub level: f64,
}

/// One record of any channel.
#[derive(Debug, Clone, PartialEq)]
pub enum SensorRecord {
    Gnss(GnssRecord),
    Velocity(VelocityRecord),
    Imu(ImuRecord),
    Width(WidthRecord),
    Ped(PedRecord),
    Light(LightRecord),
}

impl SensorRecord {
    pub fn t(&self) -> f64 {
        match self {
            SensorRecord::Gnss(r) => r.t,
            SensorRecord::Velocity(r) => r.t,
            SensorRecord::Imu(r) => r.t,
            SensorRecord::Width(r) => r.t,
            SensorRecord::Ped(r) => r.t,
            SensorRecord::Light(r) => r.t,
        }
    }

    pub fn channel(&self) -> Channel {
        match self {
            SensorRecord::Gnss(_) => Channel::Gnss,
            SensorRecord::Velocity(_) => Channel::Velocity,
            SensorRecord::Imu(_) => Channel::Imu,
            SensorRecord::Width(_) => Channel::Width,
            SensorRecord::Ped(_) => Channel::Ped,
            SensorRecord::Light(_) => Channel::Light,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Gnss,
    Velocity,
    Imu,
    Width,
    Ped,
    Light,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::Gnss,
        Channel::Velocity,
        Channel::Imu,
        Channel::Width,
        Channel::Ped,
        Channel::Light,
    ];

    /// The `type` tag used on the wire.
    pub fn wire_name(self) -> &'static str {
        match self {
            Channel::Gnss => "gnss",
            Channel::Velocity => "vel",
            Channel::Imu => "imu",
            Channel::Width => "width",
            Channel::Ped => "ped",
            Channel::Light => "light",
        }
    }
}

/// Time-sorted records split by channel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Channels {
    pub gnss: Vec<GnssRecord>,
    pub velocity: Vec<VelocityRecord>,
    pub imu: Vec<ImuRecord>,
    pub width: Vec<WidthRecord>,
    pub peds: Vec<PedRecord>,
    pub light: Vec<LightRecord>,
}

fn window<T>(v: &[T], t0: f64, t1: f64, t: impl Fn(&T) -> f64) -> &[T] {
    let lo = v.partition_point(|r| t(r) < t0);
    let hi = v.partition_point(|r| t(r) <= t1);
    &v[lo..hi.max(lo)]
}

impl Channels {
    pub fn push(&mut self, rec: SensorRecord) {
        match rec {
            SensorRecord::Gnss(r) => self.gnss.push(r),
            SensorRecord::Velocity(r) => self.velocity.push(r),
            SensorRecord::Imu(r) => self.imu.push(r),
            SensorRecord::Width(r) => self.width.push(r),
            SensorRecord::Ped(r) => self.peds.push(r),
            SensorRecord::Light(r) => self.light.push(r),
        }
    }

    pub fn sort(&mut self) {
        self.gnss.sort_by(|a, b| a.t.total_cmp(&b.t));
        self.velocity.sort_by(|a, b| a.t.total_cmp(&b.t));
        self.imu.sort_by(|a, b| a.t.total_cmp(&b.t));
        self.width.sort_by(|a, b| a.t.total_cmp(&b.t));
        self.peds.sort_by(|a, b| a.t.total_cmp(&b.t));
        self.light.sort_by(|a, b| a.t.total_cmp(&b.t));
    }

    pub fn count(&self, ch: Channel) -> usize {
        match ch {
            Channel::Gnss => self.gnss.len(),
            Channel::Velocity => self.velocity.len(),
            Channel::Imu => self.imu.len(),
            Channel::Width => self.width.len(),
            Channel::Ped => self.peds.len(),
            Channel::Light => self.light.len(),
        }
    }

    pub fn len(&self) -> usize {
        Channel::ALL.iter().map(|&c| self.count(c)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copies every record with `t0 <= t <= t1`.
    pub fn slice(&self, t0: f64, t1: f64) -> Channels {
        Channels {
            gnss: window(&self.gnss, t0, t1, |r| r.t).to_vec(),
            velocity: window(&self.velocity, t0, t1, |r| r.t).to_vec(),
            imu: window(&self.imu, t0, t1, |r| r.t).to_vec(),
            width: window(&self.width, t0, t1, |r| r.t).to_vec(),
            peds: window(&self.peds, t0, t1, |r| r.t).to_vec(),
            light: window(&self.light, t0, t1, |r| r.t).to_vec(),
        }
    }

    /// Earliest and latest timestamp over all channels.
    pub fn time_span(&self) -> Option<(f64, f64)> {
        let firsts = [
            self.gnss.first().map(|r| r.t),
            self.velocity.first().map(|r| r.t),
            self.imu.first().map(|r| r.t),
            self.width.first().map(|r| r.t),
            self.peds.first().map(|r| r.t),
            self.light.first().map(|r| r.t),
        ];
        let lasts = [
            self.gnss.last().map(|r| r.t),
            self.velocity.last().map(|r| r.t),
            self.imu.last().map(|r| r.t),
            self.width.last().map(|r| r.t),
            self.peds.last().map(|r| r.t),
            self.light.last().map(|r| r.t),
        ];
        let lo = firsts.iter().flatten().copied().reduce(f64::min)?;
        let hi = lasts.iter().flatten().copied().reduce(f64::max)?;
        Some((lo, hi))
    }

    /// All records merged into one time-ordered sequence. Ties keep channel
    /// order (gnss, vel, imu, width, ped, light) and then arrival order.
    pub fn merged(&self) -> Vec<SensorRecord> {
        let mut out: Vec<SensorRecord> = Vec::with_capacity(self.len());
        out.extend(self.gnss.iter().cloned().map(SensorRecord::Gnss));
        out.extend(self.velocity.iter().cloned().map(SensorRecord::Velocity));
        out.extend(self.imu.iter().cloned().map(SensorRecord::Imu));
        out.extend(self.width.iter().cloned().map(SensorRecord::Width));
        out.extend(self.peds.iter().cloned().map(SensorRecord::Ped));
        out.extend(self.light.iter().cloned().map(SensorRecord::Light));
        out.sort_by(|a, b| a.t().total_cmp(&b.t()));
        out
    }
}

/// Daily weather covariates joined onto a trip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weather {
    pub date: NaiveDate,
    pub avg_temperature: f64,
    pub avg_wind_speed: f64,
    pub pressure: f64,
    pub precipitation: f64,
}

/// All sensor data recorded during one robot trip.
#[derive(Debug, Clone, PartialEq)]
pub struct TripLog {
    pub trip_id: String,
    pub start_time: DateTime<Utc>,
    pub channels: Channels,
    pub meta: Option<Weather>,
}

impl TripLog {
    /// Builds a trip from records; `start_time` is the earliest timestamp.
    pub fn from_records(trip_id: impl Into<String>, records: impl IntoIterator<Item = SensorRecord>) -> Self {
        let mut channels = Channels::default();
        for r in records {
            channels.push(r);
        }
        channels.sort();
        let t0 = channels.time_span().map_or(0.0, |(lo, _)| lo);
        Self {
            trip_id: trip_id.into(),
            start_time: epoch_to_utc(t0),
            channels,
            meta: None,
        }
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_time.date_naive()
    }
}

/// Converts epoch seconds to a UTC timestamp (millisecond precision).
pub fn epoch_to_utc(t: f64) -> DateTime<Utc> {
    let ms = (t * 1000.0).floor() as i64;
    DateTime::<Utc>::from_timestamp_millis(ms).unwrap_or(DateTime::<Utc>::UNIX_EPOCH)
}
