//! Ordinary least squares with classical inference.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::special::{f_sf, t_two_sided_p};
use super::{FeatureMatrix, MatrixError};

pub const INTERCEPT: &str = "(Intercept)";
/// Added to densities before the log transform so zero densities stay finite.
pub const DENSITY_LOG_EPS: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum OlsError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("{n} observations for {p} parameters")]
    TooFewObservations { n: usize, p: usize },
    #[error("design matrix is rank deficient; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub response: String,
    /// Intercept first, then predictors in input order.
    pub terms: Vec<Term>,
    pub n_obs: usize,
    pub df_residual: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: Option<f64>,
    pub f_p_value: Option<f64>,
    pub ss_tot: f64,
    pub ss_reg: f64,
    pub ss_res: f64,
    pub diagnostics: Vec<String>,
    #[serde(skip)]
    pub fitted: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl RegressionResult {
    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn predictors(&self) -> Vec<&str> {
        self.terms.iter().skip(1).map(|t| t.name.as_str()).collect()
    }
}

/// Regression-style stars, including `.` for p < 0.1.
pub fn reg_stars(p: f64) -> String {
    match p {
        p if p < 0.001 => "***",
        p if p < 0.01 => "**",
        p if p < 0.05 => "*",
        p if p < 0.1 => ".",
        _ => "",
    }
    .into()
}

/// Regression inputs after listwise deletion and scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub response: String,
    pub names: Vec<String>,
    pub y: Vec<f64>,
    /// Column-major predictor values.
    pub x: Vec<Vec<f64>>,
    /// Source rows kept by listwise deletion.
    pub rows: Vec<usize>,
}

impl RegressionData {
    /// Keeps only the named predictors.
    pub fn subset(&self, keep: &[&str]) -> RegressionData {
        let idx: Vec<usize> = keep
            .iter()
            .filter_map(|k| self.names.iter().position(|n| n == k))
            .collect();
        RegressionData {
            response: self.response.clone(),
            names: idx.iter().map(|&i| self.names[i].clone()).collect(),
            y: self.y.clone(),
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            rows: self.rows.clone(),
        }
    }
}

/// Min-max scaling onto [0, 1]; a constant column maps to zeros.
pub fn min_max(x: &[f64]) -> Vec<f64> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    x.iter().map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }).collect()
}

/// Listwise deletion over the response and predictors, then per-predictor
/// transform and [0, 1] scaling over the retained rows. Columns listed in
/// `log_columns` are mapped through `ln(x + 1e-4)` before scaling.
pub fn prepare(
    m: &FeatureMatrix,
    response: &str,
    predictors: &[&str],
    log_columns: &[&str],
) -> Result<RegressionData, OlsError> {
    let mut all = vec![response];
    all.extend_from_slice(predictors);
    let rows = m.complete_rows(&all)?;
    let yj = m.index(response)?;
    let y = rows.iter().map(|&i| m.get(i, yj).unwrap()).collect();
    let mut x = Vec::with_capacity(predictors.len());
    for p in predictors {
        let j = m.index(p)?;
        let col: Vec<f64> = rows
            .iter()
            .map(|&i| {
                let v = m.get(i, j).unwrap();
                if log_columns.contains(p) {
                    (v + DENSITY_LOG_EPS).ln()
                } else {
                    v
                }
            })
            .collect();
        x.push(min_max(&col));
    }
    Ok(RegressionData {
        response: response.to_string(),
        names: predictors.iter().map(|s| s.to_string()).collect(),
        y,
        x,
        rows,
    })
}

const RANK_TOL: f64 = 1e-10;

/// Columns of `cols` (indices into the design) that `target` depends on.
fn collinear_with(design: &DMatrix<f64>, target: usize) -> Vec<usize> {
    let prev = design.columns(0, target).into_owned();
    let y = design.column(target).into_owned();
    let svd = prev.svd(true, true);
    let Ok(beta) = svd.solve(&y, 1e-12) else { return vec![target] };
    let scale = beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let mut out: Vec<usize> = (0..target).filter(|&j| beta[j].abs() > 1e-8 * scale.max(1.0)).collect();
    out.push(target);
    out
}

/// Fits `y = b0 + X b` by Householder QR.
pub fn ols(data: &RegressionData) -> Result<RegressionResult, OlsError> {
    let n = data.y.len();
    let p = data.x.len() + 1;
    if n <= p {
        return Err(OlsError::TooFewObservations { n, p });
    }
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(data.names.iter().cloned());
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { data.x[j - 1][i] });
    let y = DVector::from_column_slice(&data.y);

    let qr = design.clone().qr();
    let r = qr.r();
    let diag_max = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if let Some(j) = (0..p).find(|&j| r[(j, j)].abs() <= RANK_TOL * diag_max.max(1.0)) {
        let cols = collinear_with(&design, j);
        return Err(OlsError::RankDeficient(cols.into_iter().map(|c| names[c].clone()).collect()));
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| OlsError::RankDeficient(names.clone()))?;
    let fitted = &design * &beta;
    let resid = &y - &fitted;

    let mean_y = data.y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = data.y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let ss_res: f64 = resid.iter().map(|e| e * e).sum();
    let ss_reg: f64 = fitted.iter().map(|f| (f - mean_y).powi(2)).sum();
    let df_res = n - p;
    let sigma2 = ss_res / df_res as f64;

    // (X'X)^-1 = R^-1 R^-T.
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| OlsError::RankDeficient(names.clone()))?;
    let cov_unscaled = &r_inv * r_inv.transpose();

    let terms = (0..p)
        .map(|j| {
            let se = (sigma2 * cov_unscaled[(j, j)]).sqrt();
            let t = beta[j] / se;
            let pv = if se > 0.0 { t_two_sided_p(t, df_res as f64) } else { 0.0 };
            Term {
                name: names[j].clone(),
                estimate: beta[j],
                std_error: se,
                t_value: t,
                p_value: pv,
                stars: reg_stars(pv),
            }
        })
        .collect();

    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    let adj = 1.0 - (1.0 - r2) * (n - 1) as f64 / df_res as f64;
    let k = p - 1;
    let (f, fp) = if k > 0 && ss_res > 0.0 {
        let f = (ss_reg / k as f64) / sigma2;
        (Some(f), Some(f_sf(f, k as f64, df_res as f64)))
    } else if k > 0 {
        (None, Some(0.0))
    } else {
        (None, None)
    };

    Ok(RegressionResult {
        response: data.response.clone(),
        terms,
        n_obs: n,
        df_residual: df_res,
        r_squared: r2,
        adj_r_squared: adj,
        f_statistic: f,
        f_p_value: fp,
        ss_tot,
        ss_reg,
        ss_res,
        diagnostics: Vec::new(),
        fitted: fitted.iter().copied().collect(),
        residuals: resid.iter().copied().collect(),
    })
}

/// Drops every predictor with `p > threshold` from the full model in one
/// pass and refits on the same rows.
pub fn reduce_model(full: &RegressionResult, data: &RegressionData, threshold: f64) -> Result<RegressionResult, OlsError> {
    let keep: Vec<&str> = full
        .terms
        .iter()
        .skip(1)
        .filter(|t| t.p_value <= threshold)
        .map(|t| t.name.as_str())
        .collect();
    let removed: Vec<&str> = full
        .terms
        .iter()
        .skip(1)
        .filter(|t| !(t.p_value <= threshold))
        .map(|t| t.name.as_str())
        .collect();
    let mut out = ols(&data.subset(&keep))?;
    if !removed.is_empty() {
        out.diagnostics.push(format!("removed at p > {threshold}: {}", removed.join(", ")));
    }
    if keep.is_empty() {
        out.diagnostics.push("every predictor removed; intercept-only model".into());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionConfig {
    pub response: String,
    pub predictors: Vec<String>,
    pub log_columns: Vec<String>,
    pub threshold: f64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        Self {
            response: "avg_ped_speed".into(),
            predictors: s(&[
                "avg_ped_density",
                "segment_avg_speed",
                "speed_drop_avg",
                "num_stops",
                "relative_duration",
                "min_effective_width",
                "avg_effective_width",
                "segment_slope",
                "unevenness_index",
                "irregularity_index",
                "lighting_condition",
                "avg_temperature",
                "avg_wind_speed",
                "pressure",
                "precipitation",
            ]),
            log_columns: s(&["avg_ped_density"]),
            threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    pub full: RegressionResult,
    pub reduced: RegressionResult,
    pub threshold: f64,
    pub log_columns: Vec<String>,
    pub log_epsilon: f64,
    pub scaling: &'static str,
}

pub fn regress(m: &FeatureMatrix, cfg: &RegressionConfig) -> Result<RegressionReport, OlsError> {
    let preds: Vec<&str> = cfg.predictors.iter().map(String::as_str).collect();
    let logs: Vec<&str> = cfg.log_columns.iter().map(String::as_str).collect();
    let data = prepare(m, &cfg.response, &preds, &logs)?;
    let full = ols(&data)?;
    let reduced = reduce_model(&full, &data, cfg.threshold)?;
    Ok(RegressionReport {
        full,
        reduced,
        threshold: cfg.threshold,
        log_columns: cfg.log_columns.clone(),
        log_epsilon: DENSITY_LOG_EPS,
        scaling: "min-max to [0, 1] over complete rows",
    })
}
