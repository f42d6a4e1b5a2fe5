use crate::series::quantile_sorted;

/// Tukey fences `[Q1 - k*IQR, Q3 + k*IQR]` with linearly interpolated quartiles.
pub fn tukey_fences(values: &[f64], k: f64) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, q3) = (quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.75));
    let iqr = q3 - q1;
    Some((q1 - k * iqr, q3 + k * iqr))
}

/// Rows kept by the 1.5 IQR rule. Missing values are not retained; with
/// fewer than four present values nothing is filtered.
pub fn iqr_filter(values: &[Option<f64>]) -> Vec<bool> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.len() < 4 {
        return values.iter().map(Option::is_some).collect();
    }
    let (lo, hi) = tukey_fences(&present, 1.5).unwrap();
    values
        .iter()
        .map(|v| v.is_some_and(|v| v >= lo && v <= hi))
        .collect()
}
