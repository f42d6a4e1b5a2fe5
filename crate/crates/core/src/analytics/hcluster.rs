//! Agglomerative hierarchical clustering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::iqr::iqr_filter;
use super::ttest::{student_ttest, welch_ttest};
use super::{FeatureMatrix, MatrixError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    Complete,
    Average,
    #[default]
    Ward,
}

/// One agglomeration step. Cluster ids follow the usual convention: leaves
/// are `0..n`, the cluster formed at step `i` is `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Lance-Williams update of the distance from `k` to the union of `i` and `j`.
fn lance_williams(method: Linkage, dki: f64, dkj: f64, dij: f64, ni: f64, nj: f64, nk: f64) -> f64 {
    match method {
        Linkage::Single => dki.min(dkj),
        Linkage::Complete => dki.max(dkj),
        Linkage::Average => (ni * dki + nj * dkj) / (ni + nj),
        Linkage::Ward => {
            let t = ni + nj + nk;
            (((ni + nk) * dki * dki + (nj + nk) * dkj * dkj - nk * dij * dij) / t)
                .max(0.0)
                .sqrt()
        }
    }
}

/// Full agglomeration of `points` using the nearest-neighbor chain
/// algorithm. Merges are returned in order of increasing height.
pub fn linkage(points: &[Vec<f64>], method: Linkage) -> Vec<Merge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = euclid(&points[i], &points[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::new();

    while raw.len() < n - 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).unwrap());
        }
        loop {
            let a = *chain.last().unwrap();
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            // Nearest active neighbor; the previous chain element wins ties.
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| d[a * n + p]);
            for k in 0..n {
                if k != a && active[k] && d[a * n + k] < best_d {
                    best = Some(k);
                    best_d = d[a * n + k];
                }
            }
            let b = best.unwrap();
            if Some(b) == prev {
                break;
            }
            chain.push(b);
        }
        let a = chain.pop().unwrap();
        let b = chain.pop().unwrap();
        let (i, j) = (a.min(b), a.max(b));
        let dij = d[i * n + j];
        raw.push((i, j, dij));
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let v = lance_williams(method, d[k * n + i], d[k * n + j], dij, ni, nj, size[k] as f64);
            d[k * n + i] = v;
            d[i * n + k] = v;
        }
        // The union lives on in slot `i`.
        active[j] = false;
        size[i] += size[j];
    }

    // Relabel in height order: leaves 0..n, merge step s creates n + s.
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&x, &y| raw[x].2.total_cmp(&raw[y].2));
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut label: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; 2 * n];
    let mut out = Vec::with_capacity(n - 1);
    for (step, &r) in order.iter().enumerate() {
        let (i, j, h) = raw[r];
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        let (la, lb) = (label[ri], label[rj]);
        let id = n + step;
        parent[rj] = ri;
        label[ri] = id;
        sizes[id] = sizes[la] + sizes[lb];
        out.push(Merge {
            a: la.min(lb),
            b: la.max(lb),
            height: h,
            size: sizes[id],
        });
    }
    out
}

/// Flat clustering from the first `n - k` merges. Labels are numbered by
/// first appearance in row order.
pub fn cut_tree(merges: &[Merge], n: usize, k: usize) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (step, m) in merges.iter().take(n.saturating_sub(k)).enumerate() {
        let id = n + step;
        let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
        parent[ra] = id;
        parent[rb] = id;
    }
    let mut ids: Vec<usize> = Vec::new();
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            match ids.iter().position(|&x| x == r) {
                Some(p) => p,
                None => {
                    ids.push(r);
                    ids.len() - 1
                }
            }
        })
        .collect()
}

/// Column-wise z-scores using the sample standard deviation; constant
/// columns become zero.
pub fn zscore(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let dims = points[0].len();
    let mut out = points.to_vec();
    for j in 0..dims {
        let m = points.iter().map(|p| p[j]).sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (points.iter().map(|p| (p[j] - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        for p in out.iter_mut() {
            p[j] = if sd > 0.0 { (p[j] - m) / sd } else { 0.0 };
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub k: usize,
    pub linkage: Linkage,
    /// Behavior features that define the clustering space.
    pub features: Vec<String>,
    /// Column pruned with the IQR rule before clustering.
    pub iqr_column: Option<String>,
    /// Labels are ordered by the mean of this column; 0 is the lowest.
    pub reference_column: String,
    /// Columns summarized per cluster and tested against cluster 0.
    pub describe: Vec<String>,
    /// Pooled-variance tests instead of Welch.
    pub student: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        Self {
            k: 3,
            linkage: Linkage::Ward,
            features: s(&["ped_speed_variation", "ped_turns", "ped_path_deviation"]),
            iqr_column: Some("ped_turns".into()),
            reference_column: "ped_speed_variation".into(),
            describe: s(&[
                "ped_speed_variation",
                "ped_turns",
                "ped_path_deviation",
                "segment_slope",
                "avg_effective_width",
                "irregularity_index",
                "unevenness_index",
                "avg_ped_density",
                "avg_ped_speed",
            ]),
            student: false,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("{rows} complete rows, need at least {k}")]
    TooFewRows { rows: usize, k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStats {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    /// Two-sided p-value against cluster 0; absent for cluster 0 itself.
    pub p_value: Option<f64>,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSummary {
    pub feature: String,
    pub clusters: Vec<CellStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterResult {
    /// Per input row; `None` for rows dropped as incomplete or outlying.
    pub assignments: Vec<Option<usize>>,
    pub sizes: Vec<usize>,
    pub summary: Vec<FeatureSummary>,
    pub merges: Vec<Merge>,
    pub linkage: Linkage,
    pub test: &'static str,
}

/// Significance stars for `*`, `**` and `***` at 0.05, 0.01 and 0.001.
pub fn stars(p: Option<f64>) -> String {
    match p {
        Some(p) if p < 0.001 => "***".into(),
        Some(p) if p < 0.01 => "**".into(),
        Some(p) if p < 0.05 => "*".into(),
        _ => String::new(),
    }
}

/// Sample standard deviation.
fn sd(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    Some((x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt())
}

/// Behavioral clustering: IQR pruning, z-scoring, agglomeration, a cut at
/// `k` clusters, and per-cluster descriptive statistics with tests against
/// the reference cluster.
pub fn hcluster(m: &FeatureMatrix, cfg: &ClusterConfig) -> Result<ClusterResult, ClusterError> {
    let names: Vec<&str> = cfg.features.iter().map(String::as_str).collect();
    let mut rows = m.complete_rows(&names)?;
    if let Some(col) = &cfg.iqr_column {
        let keep = iqr_filter(&m.column(col)?);
        rows.retain(|&i| keep[i]);
    }
    if rows.len() < cfg.k || cfg.k == 0 {
        return Err(ClusterError::TooFewRows {
            rows: rows.len(),
            k: cfg.k,
        });
    }
    let idx: Vec<usize> = names.iter().map(|n| m.index(n)).collect::<Result<_, _>>()?;
    let points: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| idx.iter().map(|&j| m.get(i, j).unwrap()).collect())
        .collect();
    let z = zscore(&points);
    let merges = linkage(&z, cfg.linkage);
    let raw = cut_tree(&merges, z.len(), cfg.k);

    // Order labels: lowest reference mean first, then descending.
    let ref_col = m.column(&cfg.reference_column)?;
    let k = raw.iter().max().map_or(0, |x| x + 1);
    let ref_mean = |c: usize| {
        let v: Vec<f64> = rows
            .iter()
            .zip(&raw)
            .filter(|(_, &l)| l == c)
            .filter_map(|(&i, _)| ref_col[i])
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    let means: Vec<f64> = (0..k).map(ref_mean).collect();
    let lowest = (0..k).min_by(|&a, &b| means[a].total_cmp(&means[b])).unwrap_or(0);
    let mut order: Vec<usize> = (0..k).filter(|&c| c != lowest).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]));
    order.insert(0, lowest);
    let relabel: Vec<usize> = (0..k).map(|c| order.iter().position(|&o| o == c).unwrap()).collect();

    let mut assignments = vec![None; m.n_rows()];
    let mut sizes = vec![0usize; k];
    for (&i, &l) in rows.iter().zip(&raw) {
        let l = relabel[l];
        assignments[i] = Some(l);
        sizes[l] += 1;
    }

    let test = if cfg.student { student_ttest } else { welch_ttest };
    let mut summary = Vec::new();
    for feat in &cfg.describe {
        let Ok(col) = m.column(feat) else { continue };
        let groups: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                rows.iter()
                    .filter(|&&i| assignments[i] == Some(c))
                    .filter_map(|&i| col[i])
                    .collect()
            })
            .collect();
        let clusters = groups
            .iter()
            .enumerate()
            .map(|(c, g)| {
                let p = if c == 0 { None } else { test(g, &groups[0]).and_then(|t| t.p) };
                CellStats {
                    mean: (!g.is_empty()).then(|| g.iter().sum::<f64>() / g.len() as f64),
                    sd: sd(g),
                    p_value: p,
                    stars: stars(p),
                }
            })
            .collect();
        summary.push(FeatureSummary {
            feature: feat.clone(),
            clusters,
        });
    }

    Ok(ClusterResult {
        assignments,
        sizes,
        summary,
        merges,
        linkage: cfg.linkage,
        test: if cfg.student { "student" } else { "welch" },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64, per: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let centers = [[0.0, 0.0, 0.0], [0.15, 0.15, 0.15], [0.30, 0.0, 0.30]];
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, ctr) in centers.iter().enumerate() {
            for _ in 0..per {
                pts.push(ctr.iter().map(|v| v + noise.sample(&mut rng)).collect());
                truth.push(c);
            }
        }
        (pts, truth)
    }

    /// Agreement after the best label permutation.
    fn accuracy(labels: &[usize], truth: &[usize]) -> f64 {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        perms
            .iter()
            .map(|p| labels.iter().zip(truth).filter(|(l, t)| p[**l] == **t).count())
            .max()
            .unwrap() as f64
            / labels.len() as f64
    }

    #[test]
    fn recovers_separated_blobs() {
        // Blobs this tight relative to their spacing should be recovered exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let centers = [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 0.0, 2.0]];
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, ctr) in centers.iter().enumerate() {
            for _ in 0..40 {
                pts.push(ctr.iter().map(|v| v + noise.sample(&mut rng)).collect::<Vec<f64>>());
                truth.push(c);
            }
        }
        for method in [Linkage::Ward, Linkage::Single, Linkage::Complete, Linkage::Average] {
            let labels = cut_tree(&linkage(&pts, method), pts.len(), 3);
            assert_eq!(accuracy(&labels, &truth), 1.0, "{method:?}");
        }
    }

    #[test]
    fn heights_are_monotone_for_ward() {
        let (pts, _) = blobs(2, 30);
        let m = linkage(&pts, Linkage::Ward);
        assert_eq!(m.len(), pts.len() - 1);
        assert!(m.windows(2).all(|w| w[0].height <= w[1].height));
        assert_eq!(m.last().unwrap().size, pts.len());
    }

    #[test]
    fn ward_matches_brute_force() {
        // Naive O(n^3) Ward: merge the pair with the smallest increase in
        // within-cluster sum of squares, height sqrt(2 * increase).
        let (pts, _) = blobs(5, 8);
        let fast: Vec<f64> = linkage(&pts, Linkage::Ward).iter().map(|m| m.height).collect();
        let mut clusters: Vec<Vec<usize>> = (0..pts.len()).map(|i| vec![i]).collect();
        let centroid = |c: &[usize]| -> Vec<f64> {
            (0..3).map(|d| c.iter().map(|&i| pts[i][d]).sum::<f64>() / c.len() as f64).collect()
        };
        let mut slow = Vec::new();
        while clusters.len() > 1 {
            let mut best = (0, 0, f64::INFINITY);
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let (na, nb) = (clusters[a].len() as f64, clusters[b].len() as f64);
                    let d2: f64 = centroid(&clusters[a])
                        .iter()
                        .zip(centroid(&clusters[b]))
                        .map(|(x, y)| (x - y).powi(2))
                        .sum();
                    let inc = na * nb / (na + nb) * d2;
                    if inc < best.2 {
                        best = (a, b, inc);
                    }
                }
            }
            slow.push((2.0 * best.2).sqrt());
            let merged = clusters.remove(best.1);
            clusters[best.0].extend(merged);
        }
        slow.sort_by(f64::total_cmp);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn duplicate_rows_share_labels() {
        let (pts, _) = blobs(3, 10);
        let mut doubled = pts.clone();
        doubled.extend(pts.iter().cloned());
        let labels = cut_tree(&linkage(&doubled, Linkage::Ward), doubled.len(), 3);
        for i in 0..pts.len() {
            assert_eq!(labels[i], labels[i + pts.len()]);
        }
    }

    #[test]
    fn permutation_invariance() {
        let (pts, _) = blobs(4, 15);
        let base = cut_tree(&linkage(&zscore(&pts), Linkage::Ward), pts.len(), 3);
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let labels = cut_tree(&linkage(&zscore(&shuffled), Linkage::Ward), pts.len(), 3);
        let back: Vec<usize> = {
            let mut v = vec![0; pts.len()];
            for (pos, &i) in perm.iter().enumerate() {
                v[i] = labels[pos];
            }
            v
        };
        assert_eq!(accuracy(&back, &base), 1.0);
        // Per-feature affine rescaling is removed by z-scoring.
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| vec![3.0 * p[0] + 1.0, 0.2 * p[1], 10.0 * p[2] - 4.0]).collect();
        let labels = cut_tree(&linkage(&zscore(&scaled), Linkage::Ward), pts.len(), 3);
        assert_eq!(accuracy(&labels, &base), 1.0);
    }

    #[test]
    fn reference_cluster_is_lowest() {
        let (pts, _) = blobs(6, 20);
        let cols: Vec<(&str, Vec<f64>)> = vec![
            ("ped_speed_variation", pts.iter().map(|p| p[0]).collect()),
            ("ped_turns", pts.iter().map(|p| p[1]).collect()),
            ("ped_path_deviation", pts.iter().map(|p| p[2]).collect()),
        ];
        let m = FeatureMatrix::from_columns(&cols).unwrap();
        let cfg = ClusterConfig {
            iqr_column: None,
            describe: vec!["ped_speed_variation".into()],
            ..Default::default()
        };
        let r = hcluster(&m, &cfg).unwrap();
        assert_eq!(r.sizes.iter().sum::<usize>(), pts.len());
        let means: Vec<f64> = r.summary[0].clusters.iter().map(|c| c.mean.unwrap()).collect();
        assert!(means[0] < means[1] && means[0] < means[2]);
        assert!(means[1] >= means[2]);
    }

    #[test]
    fn too_few_rows() {
        let m = FeatureMatrix::from_columns(&[
            ("ped_speed_variation", vec![1.0, 2.0]),
            ("ped_turns", vec![1.0, 2.0]),
            ("ped_path_deviation", vec![1.0, 2.0]),
        ])
        .unwrap();
        assert!(matches!(hcluster(&m, &ClusterConfig::default()), Err(ClusterError::TooFewRows { .. })));
    }
}
