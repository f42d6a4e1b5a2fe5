//! Line-delimited JSON trip logs and the daily weather table.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Channel, GnssRecord, ImuRecord, LightRecord, PedRecord, SensorRecord, TripLog, VelocityRecord,
    Weather, WidthRecord,
};

/// Fraction of dropped lines above which a log is rejected.
pub const MAX_DROP_FRACTION: f64 = 0.10;
pub const MAX_SPAN_S: f64 = 24.0 * 3600.0;
pub const MAX_ABS_ACCEL: f64 = 50.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read log: {0}")]
    Io(#[from] io::Error),
    #[error("log is empty")]
    Empty,
    #[error("{dropped} of {total} lines malformed (limit 10%)")]
    TooManyMalformed { dropped: usize, total: usize },
    #[error("log has no GNSS records")]
    NoGnss,
    #[error("log has no velocity records")]
    NoVelocity,
    #[error("log spans {0:.0} s, more than 24 h")]
    SpanTooLong(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedLine {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub total_lines: usize,
    pub kept: usize,
    pub counts: BTreeMap<Channel, usize>,
    pub dropped: Vec<DroppedLine>,
    pub time_span: Option<(f64, f64)>,
    pub warnings: Vec<String>,
}

impl IngestReport {
    pub fn count(&self, ch: Channel) -> usize {
        self.counts.get(&ch).copied().unwrap_or(0)
    }

    /// Dropped-line tallies keyed by reason.
    pub fn reasons(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for d in &self.dropped {
            *out.entry(d.reason.as_str()).or_insert(0) += 1;
        }
        out
    }
}

#[derive(Deserialize)]
struct RawLine {
    t: Option<f64>,
    #[serde(rename = "type")]
    kind: Option<String>,
    lat: Option<f64>,
    lon: Option<f64>,
    alt: Option<f64>,
    v: Option<f64>,
    heading: Option<f64>,
    az: Option<f64>,
    w: Option<f64>,
    id: Option<serde_json::Value>,
    x: Option<f64>,
    y: Option<f64>,
    level: Option<f64>,
}

fn need(v: Option<f64>, name: &str) -> Result<f64, String> {
    let v = v.ok_or_else(|| format!("missing field {name}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("non-finite value".into())
    }
}

fn optional(v: Option<f64>) -> Result<Option<f64>, String> {
    match v {
        Some(x) if !x.is_finite() => Err("non-finite value".into()),
        other => Ok(other),
    }
}

fn parse_line(line: &str) -> Result<SensorRecord, String> {
    if line.trim().is_empty() {
        return Err("empty line".into());
    }
    let raw: RawLine = serde_json::from_str(line).map_err(|_| "invalid json".to_string())?;
    let t = need(raw.t, "t")?;
    let kind = raw.kind.as_deref().ok_or("missing field type")?;
    let rec = match kind {
        "gnss" => SensorRecord::Gnss(GnssRecord {
            t,
            lat: need(raw.lat, "lat")?,
            lon: need(raw.lon, "lon")?,
            alt_m: optional(raw.alt)?,
        }),
        "vel" => {
            let v = need(raw.v, "v")?;
            if v < 0.0 {
                return Err("negative speed".into());
            }
            SensorRecord::Velocity(VelocityRecord {
                t,
                v_mps: v,
                heading_deg: optional(raw.heading)?,
            })
        }
        "imu" => {
            let az = need(raw.az, "az")?;
            if az.abs() >= MAX_ABS_ACCEL {
                return Err("acceleration out of range".into());
            }
            SensorRecord::Imu(ImuRecord { t, az_mps2: az })
        }
        "width" => {
            let w = need(raw.w, "w")?;
            if w < 0.0 {
                return Err("negative width".into());
            }
            SensorRecord::Width(WidthRecord { t, w_m: w })
        }
        "ped" => {
            let id = match raw.id {
                Some(serde_json::Value::String(s)) => s,
                Some(serde_json::Value::Number(n)) => n.to_string(),
                Some(_) => return Err("invalid json".into()),
                None => return Err("missing field id".into()),
            };
            SensorRecord::Ped(PedRecord {
                t,
                ped_id: id,
                x_m: need(raw.x, "x")?,
                y_m: need(raw.y, "y")?,
            })
        }
        "light" => SensorRecord::Light(LightRecord {
            t,
            level: need(raw.level, "level")?,
        }),
        _ => return Err("unknown type".into()),
    };
    Ok(rec)
}

/// Duplicate detection key: pedestrian detections are unique per (id, t),
/// every other channel per t.
fn dup_key(rec: &SensorRecord) -> (Channel, String, u64) {
    let id = match rec {
        SensorRecord::Ped(p) => p.ped_id.clone(),
        _ => String::new(),
    };
    (rec.channel(), id, rec.t().to_bits())
}

/// Parses a line-delimited trip log.
///
/// Malformed lines are dropped with one reason each; the log is rejected when
/// more than 10% of lines drop, when GNSS or velocity is missing, or when it
/// spans more than 24 hours.
pub fn parse_trip(trip_id: &str, reader: impl Read) -> Result<(TripLog, IngestReport), IngestError> {
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        report.total_lines += 1;
        let parsed = parse_line(&line).and_then(|r| {
            if seen.insert(dup_key(&r)) {
                Ok(r)
            } else {
                Err("duplicate timestamp".into())
            }
        });
        match parsed {
            Ok(r) => records.push(r),
            Err(reason) => report.dropped.push(DroppedLine { line: i + 1, reason }),
        }
    }
    if report.total_lines == 0 {
        return Err(IngestError::Empty);
    }
    let dropped = report.dropped.len();
    if dropped as f64 > MAX_DROP_FRACTION * report.total_lines as f64 {
        return Err(IngestError::TooManyMalformed {
            dropped,
            total: report.total_lines,
        });
    }
    report.kept = records.len();

    let trip = TripLog::from_records(trip_id, records);
    if trip.channels.gnss.is_empty() {
        return Err(IngestError::NoGnss);
    }
    if trip.channels.velocity.is_empty() {
        return Err(IngestError::NoVelocity);
    }
    report.time_span = trip.channels.time_span();
    if let Some((lo, hi)) = report.time_span {
        if hi - lo > MAX_SPAN_S {
            return Err(IngestError::SpanTooLong(hi - lo));
        }
    }
    for ch in Channel::ALL {
        report.counts.insert(ch, trip.channels.count(ch));
    }
    for ch in [Channel::Imu, Channel::Width] {
        if trip.channels.count(ch) == 0 {
            report.warnings.push(format!("no {} records", ch.wire_name()));
        }
    }
    if dropped > 0 {
        report.warnings.push(format!("{dropped} malformed lines dropped"));
    }
    Ok((trip, report))
}

/// Reads a log file; the trip id is the file stem.
pub fn parse_trip_file(path: &Path) -> Result<(TripLog, IngestReport), IngestError> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_trip(&id, File::open(path)?)
}

// Per-variant wire structs keep the field order `t, type, ...` on output.
#[derive(Serialize)]
struct GnssLine<'a> {
    t: f64,
    #[serde(rename = "type")]
    kind: &'a str,
    lat: f64,
    lon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    alt: Option<f64>,
}

#[derive(Serialize)]
struct VelLine<'a> {
    t: f64,
    #[serde(rename = "type")]
    kind: &'a str,
    v: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    heading: Option<f64>,
}

#[derive(Serialize)]
struct ImuLine<'a> {
    t: f64,
    #[serde(rename = "type")]
    kind: &'a str,
    az: f64,
}

#[derive(Serialize)]
struct WidthLine<'a> {
    t: f64,
    #[serde(rename = "type")]
    kind: &'a str,
    w: f64,
}

#[derive(Serialize)]
struct PedLine<'a> {
    t: f64,
    #[serde(rename = "type")]
    kind: &'a str,
    id: &'a str,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct LightLine<'a> {
    t: f64,
    #[serde(rename = "type")]
    kind: &'a str,
    level: f64,
}

/// Serializes one record as a log line (no trailing newline).
pub fn record_to_line(rec: &SensorRecord) -> String {
    let kind = rec.channel().wire_name();
    let res = match rec {
        SensorRecord::Gnss(r) => serde_json::to_string(&GnssLine {
            t: r.t,
            kind,
            lat: r.lat,
            lon: r.lon,
            alt: r.alt_m,
        }),
        SensorRecord::Velocity(r) => serde_json::to_string(&VelLine {
            t: r.t,
            kind,
            v: r.v_mps,
            heading: r.heading_deg,
        }),
        SensorRecord::Imu(r) => serde_json::to_string(&ImuLine {
            t: r.t,
            kind,
            az: r.az_mps2,
        }),
        SensorRecord::Width(r) => serde_json::to_string(&WidthLine { t: r.t, kind, w: r.w_m }),
        SensorRecord::Ped(r) => serde_json::to_string(&PedLine {
            t: r.t,
            kind,
            id: &r.ped_id,
            x: r.x_m,
            y: r.y_m,
        }),
        SensorRecord::Light(r) => serde_json::to_string(&LightLine {
            t: r.t,
            kind,
            level: r.level,
        }),
    };
    res.expect("plain structs always serialize")
}

/// Writes a trip in time order, one record per line.
pub fn write_trip(trip: &TripLog, mut out: impl Write) -> io::Result<()> {
    for rec in trip.channels.merged() {
        out.write_all(record_to_line(&rec).as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum WeatherError {
    #[error("cannot read weather table: {0}")]
    Io(#[from] io::Error),
    #[error("weather table: {0}")]
    Csv(#[from] csv::Error),
    #[error("weather table row {row}: {msg}")]
    Invalid { row: usize, msg: String },
}

#[derive(Deserialize)]
struct WeatherRow {
    date: NaiveDate,
    avg_temperature: f64,
    avg_wind_speed: f64,
    pressure: f64,
    precipitation: f64,
}

/// Daily weather keyed by calendar date.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeatherTable {
    rows: BTreeMap<NaiveDate, Weather>,
}

impl WeatherTable {
    pub fn from_rows(rows: impl IntoIterator<Item = Weather>) -> Result<Self, WeatherError> {
        let mut out = BTreeMap::new();
        for (i, w) in rows.into_iter().enumerate() {
            let vals = [w.avg_temperature, w.avg_wind_speed, w.pressure, w.precipitation];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(WeatherError::Invalid {
                    row: i + 1,
                    msg: "non-finite value".into(),
                });
            }
            if out.insert(w.date, w).is_some() {
                return Err(WeatherError::Invalid {
                    row: i + 1,
                    msg: format!("duplicate date {}", w.date),
                });
            }
        }
        Ok(Self { rows: out })
    }

    /// Reads `date,avg_temperature,avg_wind_speed,pressure,precipitation`.
    pub fn from_csv(reader: impl Read) -> Result<Self, WeatherError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let rows = rdr
            .deserialize::<WeatherRow>()
            .map(|r| {
                r.map(|r| Weather {
                    date: r.date,
                    avg_temperature: r.avg_temperature,
                    avg_wind_speed: r.avg_wind_speed,
                    pressure: r.pressure,
                    precipitation: r.precipitation,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rows(rows)
    }

    pub fn from_path(path: &Path) -> Result<Self, WeatherError> {
        Self::from_csv(File::open(path)?)
    }

    pub fn get(&self, date: NaiveDate) -> Option<&Weather> {
        self.rows.get(&date)
    }

    /// Rows in date order.
    pub fn rows(&self) -> impl Iterator<Item = &Weather> {
        self.rows.values()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), WeatherError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "avg_temperature", "avg_wind_speed", "pressure", "precipitation"])?;
        for r in self.rows.values() {
            w.write_record([
                r.date.to_string(),
                r.avg_temperature.to_string(),
                r.avg_wind_speed.to_string(),
                r.pressure.to_string(),
                r.precipitation.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Attaches the weather row for the trip's UTC start date, if any.
pub fn join_weather(mut trip: TripLog, table: &WeatherTable) -> TripLog {
    trip.meta = table.get(trip.start_date()).copied();
    trip
}
