//! The extraction pipeline: trips in, one feature row per traversal out.
//!
//! Trips are processed independently (in parallel); segment-level values
//! that pool traversals (relative duration/distance, irregularity and
//! unevenness indices, slope) are reduced afterwards.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{FeatureMatrix, MatrixError};
use crate::ingest::{join_weather, parse_trip_file, IngestReport, WeatherTable};
use crate::model::{split_traversals, Direction, SidewalkNetwork, SplitConfig, TripLog, Weather};
use crate::pedestrians::{utilization_block, PedestrianConfig, UtilizationFeatureBlock};
use crate::report::{box_stats, BoxStats};
use crate::series::mean;
use crate::surface::{
    cluster_events, detect_events, filter_trip, irregularity_index, min_max_normalize, segment_slope,
    travel_slope, unevenness_rms, width_features, IrregularityCluster, IrregularityEvent, SurfaceConfig,
    WidthFeatures,
};
use crate::trip_features::{compute_trip_peak, relative_to_min, trip_feature_block, StopConfig, TripFeatureBlock};

/// Identifier columns, in order, ahead of the features.
pub const ID_COLUMNS: [&str; 5] = ["trip_id", "segment_id", "direction", "t_enter", "t_exit"];

/// Feature columns in output order: the 26-feature catalog, the normalized
/// unevenness index, then daily weather.
pub const FEATURE_COLUMNS: [&str; 31] = [
    "segment_duration",
    "segment_distance",
    "relative_duration",
    "relative_distance",
    "segment_max_speed",
    "segment_min_speed",
    "segment_avg_speed",
    "speed_drop_avg",
    "trip_peak_speed",
    "num_stops",
    "total_wait_time",
    "segment_length",
    "segment_width",
    "min_effective_width",
    "avg_effective_width",
    "segment_slope",
    "lighting_condition",
    "irregularity_index",
    "unevenness_index",
    "total_ped_count",
    "avg_ped_speed",
    "ped_speed_variation",
    "ped_turns",
    "ped_path_deviation",
    "max_ped_density",
    "avg_ped_density",
    "unevenness_norm",
    "avg_temperature",
    "avg_wind_speed",
    "pressure",
    "precipitation",
];

/// Free-text trailing column listing row flags.
pub const FLAGS_COLUMN: &str = "flags";
/// Set when the robot stood still for a large share of the density window.
pub const FLAG_HIGH_WAIT: &str = "high_wait_share";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub split: SplitConfig,
    pub stops: StopConfig,
    pub surface: SurfaceConfig,
    pub pedestrians: PedestrianConfig,
    /// Rows whose waiting time exceeds this share of the prism duration are flagged.
    pub wait_flag_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            split: SplitConfig::default(),
            stops: StopConfig::default(),
            surface: SurfaceConfig::default(),
            pedestrians: PedestrianConfig::default(),
            wait_flag_fraction: 0.3,
        }
    }
}

/// Per-traversal results before dataset-wide reductions.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversalFeatures {
    pub trip_id: String,
    pub segment: usize,
    pub segment_id: String,
    pub direction: Direction,
    pub t_enter: f64,
    pub t_exit: f64,
    pub trip: TripFeatureBlock,
    pub travel_slope: Option<f64>,
    pub width: WidthFeatures,
    pub unevenness: Option<f64>,
    pub utilization: UtilizationFeatureBlock,
    pub weather: Option<Weather>,
    pub events: Vec<IrregularityEvent>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripResult {
    pub trip_id: String,
    pub traversals: Vec<TraversalFeatures>,
    pub diagnostics: Vec<String>,
}

/// Splits one trip and computes everything that needs only that trip.
pub fn process_trip(trip: &TripLog, network: &SidewalkNetwork, cfg: &PipelineConfig) -> TripResult {
    let split = split_traversals(network, trip, &cfg.split);
    let mut diagnostics: Vec<String> = split
        .diagnostics
        .iter()
        .map(|d| format!("trip {}: {d}", trip.trip_id))
        .collect();
    let v_peak = compute_trip_peak(trip);
    let filtered = match filter_trip(trip, &cfg.surface) {
        Ok(f) => Some(f),
        Err(e) => {
            diagnostics.push(format!("trip {}: IMU not filtered, {e}", trip.trip_id));
            None
        }
    };
    let sc = &cfg.surface;
    let traversals = split
        .traversals
        .iter()
        .map(|trav| {
            let segment = network.segment(trav.segment);
            let (utilization, _, diag) = utilization_block(trav, segment, &cfg.pedestrians);
            diagnostics.extend(diag);
            let (events, unevenness) = match &filtered {
                Some(f) => (
                    detect_events(trav, &f.rms, sc.event_threshold, sc.v_floor),
                    unevenness_rms(trav, &f.t, &f.low, sc.v_floor, sc.min_moving_fraction),
                ),
                None => (Vec::new(), None),
            };
            TraversalFeatures {
                trip_id: trip.trip_id.clone(),
                segment: trav.segment,
                segment_id: trav.segment_id.clone(),
                direction: trav.direction,
                t_enter: trav.t_enter,
                t_exit: trav.t_exit,
                trip: trip_feature_block(trav, v_peak, &cfg.stops),
                travel_slope: travel_slope(trav),
                width: width_features(trav),
                unevenness,
                utilization,
                weather: trip.meta.clone(),
                events,
            }
        })
        .collect();
    TripResult {
        trip_id: trip.trip_id.clone(),
        traversals,
        diagnostics,
    }
}

/// One output row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub trip_id: String,
    pub segment_id: String,
    pub direction: Direction,
    pub t_enter: f64,
    pub t_exit: f64,
    /// Aligned with `FEATURE_COLUMNS`.
    pub values: Vec<Option<f64>>,
    pub flags: Vec<&'static str>,
}

impl FeatureRecord {
    pub fn get(&self, column: &str) -> Option<f64> {
        let j = FEATURE_COLUMNS.iter().position(|c| *c == column)?;
        self.values[j]
    }
}

/// Pooled per-segment values and distribution summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentSummary {
    pub segment_id: String,
    pub kind: String,
    pub length_m: f64,
    pub nominal_width_m: f64,
    pub traversals: usize,
    pub irregularity_index: Option<f64>,
    pub unevenness_index: Option<f64>,
    pub unevenness_norm: Option<f64>,
    pub segment_slope: Option<f64>,
    pub clusters: Vec<IrregularityCluster>,
    pub features: Vec<FeatureStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureStats {
    pub feature: String,
    #[serde(flatten)]
    pub stats: BoxStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config: PipelineConfig,
    pub trips: usize,
    pub traversals: usize,
    pub segments: Vec<SegmentSummary>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<FeatureRecord>,
    pub events: Vec<IrregularityEvent>,
    pub summary: Summary,
}

fn count(v: Option<usize>) -> Option<f64> {
    v.map(|n| n as f64)
}

/// Dataset-wide reductions over per-trip results, in the given trip order.
pub fn assemble(results: Vec<TripResult>, network: &SidewalkNetwork, cfg: &PipelineConfig) -> Dataset {
    let trips = results.len();
    let mut diagnostics = Vec::new();
    let mut travs: Vec<TraversalFeatures> = Vec::new();
    for r in results {
        diagnostics.extend(r.diagnostics);
        travs.extend(r.traversals);
    }

    let nseg = network.len();
    let mut by_seg: Vec<Vec<usize>> = vec![Vec::new(); nseg];
    for (i, t) in travs.iter().enumerate() {
        by_seg[t.segment].push(i);
    }

    let mut rel_dur = vec![None; travs.len()];
    let mut rel_dist = vec![None; travs.len()];
    let mut i_seg = vec![None; nseg];
    let mut u_seg = vec![None; nseg];
    let mut slope = vec![None; nseg];
    let mut clusters = vec![Vec::new(); nseg];
    let mut events = Vec::new();
    let sc = &cfg.surface;
    for (s, idx) in by_seg.iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let durs: Vec<Option<f64>> = idx.iter().map(|&i| travs[i].trip.segment_duration_s).collect();
        let dists: Vec<Option<f64>> = idx.iter().map(|&i| travs[i].trip.segment_distance_m).collect();
        for ((&i, d), x) in idx.iter().zip(relative_to_min(&durs)).zip(relative_to_min(&dists)) {
            rel_dur[i] = d;
            rel_dist[i] = x;
        }
        let seg_events: Vec<IrregularityEvent> =
            idx.iter().flat_map(|&i| travs[i].events.iter().cloned()).collect();
        clusters[s] = cluster_events(&seg_events, sc.cluster_eps_m, sc.min_extent_m);
        i_seg[s] = Some(irregularity_index(&clusters[s]));
        events.extend(seg_events);
        let u: Vec<f64> = idx.iter().filter_map(|&i| travs[i].unevenness).collect();
        u_seg[s] = mean(&u);
        let slopes: Vec<(f64, Direction)> = idx
            .iter()
            .filter_map(|&i| travs[i].travel_slope.map(|v| (v, travs[i].direction)))
            .collect();
        slope[s] = segment_slope(&slopes);
    }
    let u_norm = min_max_normalize(&u_seg);

    let records: Vec<FeatureRecord> = travs
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let seg = network.segment(t.segment);
            let s = t.segment;
            let b = &t.trip;
            let u = &t.utilization;
            let w = t.weather.as_ref();
            let values = vec![
                b.segment_duration_s,
                b.segment_distance_m,
                rel_dur[i],
                rel_dist[i],
                b.segment_max_speed,
                b.segment_min_speed,
                b.segment_avg_speed,
                b.speed_drop_avg,
                b.trip_peak_speed,
                count(b.num_stops),
                b.total_wait_time_s,
                Some(seg.length_m),
                Some(seg.nominal_width_m),
                t.width.min_effective_width_m,
                t.width.avg_effective_width_m,
                slope[s],
                t.width.lighting_condition,
                i_seg[s],
                u_seg[s],
                Some(u.total_ped_count as f64),
                u.avg_ped_speed,
                u.ped_speed_variation,
                u.ped_turns,
                u.ped_path_deviation,
                u.max_ped_density,
                u.avg_ped_density,
                u_norm[s],
                w.map(|w| w.avg_temperature),
                w.map(|w| w.avg_wind_speed),
                w.map(|w| w.pressure),
                w.map(|w| w.precipitation),
            ];
            let mut flags = Vec::new();
            if let (Some(wait), Some(dur)) = (b.total_wait_time_s, u.prism_duration_s) {
                if dur > 0.0 && wait / dur > cfg.wait_flag_fraction {
                    flags.push(FLAG_HIGH_WAIT);
                }
            }
            FeatureRecord {
                trip_id: t.trip_id.clone(),
                segment_id: t.segment_id.clone(),
                direction: t.direction,
                t_enter: t.t_enter,
                t_exit: t.t_exit,
                values,
                flags,
            }
        })
        .collect();

    let segments = (0..nseg)
        .map(|s| {
            let seg = network.segment(s);
            let features = FEATURE_COLUMNS
                .iter()
                .enumerate()
                .filter_map(|(j, name)| {
                    let vals: Vec<f64> = by_seg[s].iter().filter_map(|&i| records[i].values[j]).collect();
                    box_stats(&vals).map(|stats| FeatureStats {
                        feature: (*name).to_string(),
                        stats,
                    })
                })
                .collect();
            SegmentSummary {
                segment_id: seg.id.clone(),
                kind: seg.kind.as_str().to_string(),
                length_m: seg.length_m,
                nominal_width_m: seg.nominal_width_m,
                traversals: by_seg[s].len(),
                irregularity_index: i_seg[s],
                unevenness_index: u_seg[s],
                unevenness_norm: u_norm[s],
                segment_slope: slope[s],
                clusters: std::mem::take(&mut clusters[s]),
                features,
            }
        })
        .collect();

    Dataset {
        summary: Summary {
            config: *cfg,
            trips,
            traversals: records.len(),
            segments,
            diagnostics,
        },
        records,
        events,
    }
}

/// Processes in-memory trips in parallel, keeping their order.
pub fn extract(trips: &[TripLog], network: &SidewalkNetwork, cfg: &PipelineConfig) -> Dataset {
    let results = trips.par_iter().map(|t| process_trip(t, network, cfg)).collect();
    assemble(results, network, cfg)
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("no inputs")]
    NoInputs,
    #[error("no valid traversals in {0} trip(s)")]
    NoTraversals(usize),
}

/// Outcome of reading one log file.
#[derive(Debug, Clone)]
pub struct FileReport {
    pub path: PathBuf,
    pub report: Option<IngestReport>,
    pub error: Option<String>,
}

/// Parses and processes log files in parallel. Files that fail to parse
/// are reported and skipped. Rows follow the order of `paths`.
pub fn extract_files(
    paths: &[PathBuf],
    network: &SidewalkNetwork,
    weather: Option<&WeatherTable>,
    cfg: &PipelineConfig,
) -> Result<(Dataset, Vec<FileReport>), ExtractError> {
    if paths.is_empty() {
        return Err(ExtractError::NoInputs);
    }
    let outcomes: Vec<(Option<TripResult>, FileReport)> = paths
        .par_iter()
        .map(|p| match parse_trip_file(p) {
            Ok((trip, report)) => {
                let trip = match weather {
                    Some(table) => join_weather(trip, table),
                    None => trip,
                };
                let mut result = process_trip(&trip, network, cfg);
                if weather.is_some() && trip.meta.is_none() {
                    result
                        .diagnostics
                        .push(format!("trip {}: no weather for {}", trip.trip_id, trip.start_date()));
                }
                (
                    Some(result),
                    FileReport {
                        path: p.clone(),
                        report: Some(report),
                        error: None,
                    },
                )
            }
            Err(e) => (
                None,
                FileReport {
                    path: p.clone(),
                    report: None,
                    error: Some(e.to_string()),
                },
            ),
        })
        .collect();
    let mut results = Vec::new();
    let mut reports = Vec::new();
    for (r, f) in outcomes {
        if let Some(e) = &f.error {
            log::warn!("{}: {e}", f.path.display());
        }
        results.extend(r);
        reports.push(f);
    }
    let n = results.len();
    let mut ds = assemble(results, network, cfg);
    for f in &reports {
        if let Some(e) = &f.error {
            ds.summary.diagnostics.push(format!("{}: {e}", f.path.display()));
        }
    }
    if ds.records.is_empty() {
        return Err(ExtractError::NoTraversals(n));
    }
    Ok((ds, reports))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn direction_str(d: Direction) -> &'static str {
    match d {
        Direction::Forward => "forward",
        Direction::Reverse => "reverse",
    }
}

/// Writes the feature table; missing values are empty cells.
pub fn write_features_csv(records: &[FeatureRecord], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = ID_COLUMNS
        .iter()
        .chain(FEATURE_COLUMNS.iter())
        .copied()
        .chain(std::iter::once(FLAGS_COLUMN))
        .collect();
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.trip_id.clone(),
            r.segment_id.clone(),
            direction_str(r.direction).to_string(),
            r.t_enter.to_string(),
            r.t_exit.to_string(),
        ];
        row.extend(r.values.iter().map(|v| cell(*v)));
        row.push(r.flags.join(";"));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_events_csv(events: &[IrregularityEvent], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["segment_id", "s_m", "value", "trip_id"])?;
    for e in events {
        w.write_record([e.segment_id.clone(), e.s_m.to_string(), e.value.to_string(), e.trip_id.clone()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_clusters_csv(segments: &[SegmentSummary], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["segment_id", "center_s", "extent", "mean_value", "count"])?;
    for c in segments.iter().flat_map(|s| &s.clusters) {
        w.write_record([
            c.segment_id.clone(),
            c.center_s_m.to_string(),
            c.extent_l_m.to_string(),
            c.mean_value.to_string(),
            c.event_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("feature table: {0}")]
    Csv(#[from] csv::Error),
    #[error("feature table: {0}")]
    Io(#[from] std::io::Error),
    #[error("feature table row {row}, column `{column}`: `{value}` is not a number")]
    NotNumeric { row: usize, column: String, value: String },
    #[error("feature table: {0}")]
    Matrix(#[from] MatrixError),
}

/// A feature table read back from CSV: numeric columns plus row identity.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub trip_ids: Vec<String>,
    pub segment_ids: Vec<String>,
    pub matrix: FeatureMatrix,
}

impl FeatureTable {
    /// Column values, or all-missing when the column is absent.
    pub fn column(&self, name: &str) -> Vec<Option<f64>> {
        self.matrix
            .column(name)
            .unwrap_or_else(|_| vec![None; self.matrix.n_rows()])
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.n_rows()
    }
}

const TEXT_COLUMNS: [&str; 4] = ["trip_id", "segment_id", "direction", FLAGS_COLUMN];

/// Reads a feature CSV. Every column other than the identifiers and flags
/// must be numeric or empty; `t_enter`/`t_exit` are kept out of the matrix.
pub fn read_feature_table(reader: impl Read) -> Result<FeatureTable, TableError> {
    let mut r = csv::Reader::from_reader(reader);
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let pos = |name: &str| headers.iter().position(|h| h == name);
    let (trip_col, seg_col) = (pos("trip_id"), pos("segment_id"));
    let numeric: Vec<usize> = (0..headers.len())
        .filter(|&j| !TEXT_COLUMNS.contains(&headers[j].as_str()) && !["t_enter", "t_exit"].contains(&headers[j].as_str()))
        .collect();
    let mut trip_ids = Vec::new();
    let mut segment_ids = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let get = |j: Option<usize>| j.and_then(|j| rec.get(j)).unwrap_or("").to_string();
        trip_ids.push(get(trip_col));
        segment_ids.push(get(seg_col));
        let mut row = Vec::with_capacity(numeric.len());
        for &j in &numeric {
            let raw = rec.get(j).unwrap_or("").trim();
            if raw.is_empty() {
                row.push(None);
            } else {
                row.push(Some(raw.parse::<f64>().map_err(|_| TableError::NotNumeric {
                    row: i + 1,
                    column: headers[j].clone(),
                    value: raw.to_string(),
                })?));
            }
        }
        rows.push(row);
    }
    let labels = trip_ids
        .iter()
        .zip(&segment_ids)
        .map(|(t, s)| format!("{t}/{s}"))
        .collect();
    let columns = numeric.iter().map(|&j| headers[j].clone()).collect();
    let matrix = FeatureMatrix::new(columns, labels, rows)?;
    Ok(FeatureTable {
        trip_ids,
        segment_ids,
        matrix,
    })
}

pub fn read_feature_table_file(path: &Path) -> Result<FeatureTable, TableError> {
    read_feature_table(std::fs::File::open(path)?)
}

/// Per-segment mapping used by tests and reports.
pub fn rows_by_segment(records: &[FeatureRecord]) -> BTreeMap<&str, Vec<&FeatureRecord>> {
    let mut out: BTreeMap<&str, Vec<&FeatureRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.segment_id.as_str()).or_default().push(r);
    }
    out
}
