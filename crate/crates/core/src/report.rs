//! Plot-ready data: per-segment box statistics and density-speed pairs.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::features::FeatureTable;
use crate::series::{mean, quantile_sorted};

/// Box-plot statistics with Tukey whiskers (furthest points within 1.5 IQR).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: usize,
}

/// `None` for an empty sample. Quartiles interpolate linearly between order
/// statistics.
pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| (lo..=hi).contains(x)).collect();
    Some(BoxStats {
        count: v.len(),
        mean: mean(&v)?,
        min: v[0],
        q1,
        median: quantile_sorted(&v, 0.5),
        q3,
        max: v[v.len() - 1],
        whisker_low: inside[0],
        whisker_high: inside[inside.len() - 1],
        outliers: v.len() - inside.len(),
    })
}

/// One traversal's point on the density-speed diagram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub k_avg: f64,
    pub v_avg_ped: f64,
    pub segment_id: String,
}

/// Traversals with both average density and average pedestrian speed.
pub fn fd_scatter(table: &FeatureTable) -> Vec<ScatterPoint> {
    let k = table.column("avg_ped_density");
    let v = table.column("avg_ped_speed");
    k.iter()
        .zip(&v)
        .zip(&table.segment_ids)
        .filter_map(|((k, v), seg)| {
            Some(ScatterPoint {
                k_avg: (*k)?,
                v_avg_ped: (*v)?,
                segment_id: seg.clone(),
            })
        })
        .collect()
}

/// Least-squares slope of speed on density; `None` with fewer than two
/// distinct densities.
pub fn scatter_slope(points: &[ScatterPoint]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.k_avg).sum::<f64>() / n;
    let my = points.iter().map(|p| p.v_avg_ped).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.k_avg - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.k_avg - mx) * (p.v_avg_ped - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn write_fd_scatter(points: &[ScatterPoint], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k_avg", "v_avg_ped", "segment_id"])?;
    for p in points {
        w.write_record([p.k_avg.to_string(), p.v_avg_ped.to_string(), p.segment_id.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// feature -> segment -> box statistics, features in table order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentBoxes {
    pub features: Vec<FeatureBoxes>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureBoxes {
    pub feature: String,
    pub segments: BTreeMap<String, BoxStats>,
}

pub fn segment_boxes(table: &FeatureTable) -> SegmentBoxes {
    let features = table
        .matrix
        .columns()
        .iter()
        .map(|name| {
            let col = table.column(name);
            let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for (v, seg) in col.iter().zip(&table.segment_ids) {
                if let Some(v) = v {
                    groups.entry(seg.clone()).or_default().push(*v);
                }
            }
            FeatureBoxes {
                feature: name.clone(),
                segments: groups
                    .into_iter()
                    .filter_map(|(seg, vals)| box_stats(&vals).map(|b| (seg, b)))
                    .collect(),
            }
        })
        .collect();
    SegmentBoxes { features }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::FeatureMatrix;

    #[test]
    fn tukey_whiskers() {
        let b = box_stats(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        assert_eq!((b.whisker_low, b.whisker_high), (1.0, 4.0));
        assert_eq!(b.outliers, 1);
        assert_eq!(b.max, 100.0);
        assert!(box_stats(&[]).is_none());
    }

    #[test]
    fn quartiles_match_direct_percentiles() {
        // Independent percentile: rank r = q (n - 1), interpolate by hand.
        let xs: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 * 0.37).collect();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let pct = |q: f64| {
            let r = q * (sorted.len() - 1) as f64;
            let f = r.floor() as usize;
            let c = (f + 1).min(sorted.len() - 1);
            sorted[f] * (1.0 - (r - f as f64)) + sorted[c] * (r - f as f64)
        };
        let b = box_stats(&xs).unwrap();
        assert!((b.q1 - pct(0.25)).abs() < 1e-9);
        assert!((b.median - pct(0.5)).abs() < 1e-9);
        assert!((b.q3 - pct(0.75)).abs() < 1e-9);
    }

    fn table(rows: &[(&str, Option<f64>, Option<f64>)]) -> FeatureTable {
        let matrix = FeatureMatrix::new(
            vec!["avg_ped_density".into(), "avg_ped_speed".into()],
            Vec::new(),
            rows.iter().map(|r| vec![r.1, r.2]).collect(),
        )
        .unwrap();
        FeatureTable {
            trip_ids: rows.iter().map(|_| "t".to_string()).collect(),
            segment_ids: rows.iter().map(|r| r.0.to_string()).collect(),
            matrix,
        }
    }

    #[test]
    fn scatter_skips_incomplete_rows() {
        let t = table(&[("A", Some(0.1), Some(1.2)), ("B", None, Some(1.0)), ("A", Some(0.3), Some(0.9))]);
        let pts = fd_scatter(&t);
        assert_eq!(pts.len(), 2);
        assert!(scatter_slope(&pts).unwrap() < 0.0);
        let one = table(&[("A", Some(0.1), Some(1.2))]);
        assert_eq!(fd_scatter(&one).len(), 1);
    }

    #[test]
    fn boxes_grouped_by_segment() {
        let t = table(&[("A", Some(1.0), None), ("B", Some(2.0), None), ("A", Some(3.0), None)]);
        let boxes = segment_boxes(&t);
        let dens = &boxes.features[0];
        assert_eq!(dens.feature, "avg_ped_density");
        assert_eq!(dens.segments["A"].median, 2.0);
        assert_eq!(dens.segments["B"].count, 1);
        assert!(boxes.features[1].segments.is_empty());
    }
}
