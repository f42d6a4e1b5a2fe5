use serde::Serialize;

use super::{FeatureMatrix, MatrixError};

/// Minimum jointly complete rows for a correlation.
pub const MIN_PAIRS: usize = 3;

/// Pearson correlation over rows where both values are present. `None`
/// with fewer than three pairs or a constant column.
pub fn pearson(x: &[Option<f64>], y: &[Option<f64>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = x.iter().zip(y).filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
    if pairs.len() < MIN_PAIRS {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub features: Vec<String>,
    /// Row-major, `features.len()` squared entries.
    pub values: Vec<Option<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.features.len() + j]
    }

    pub fn by_name(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.features.iter().position(|f| f == a)?;
        let j = self.features.iter().position(|f| f == b)?;
        self.get(i, j)
    }
}

/// Symmetric pairwise-complete correlation matrix over `features`. The
/// diagonal is 1 unless the column is constant or too sparse.
pub fn pearson_matrix(m: &FeatureMatrix, features: &[&str]) -> Result<CorrelationMatrix, MatrixError> {
    let cols: Vec<Vec<Option<f64>>> = features.iter().map(|f| m.column(f)).collect::<Result<_, _>>()?;
    let k = cols.len();
    let mut values = vec![None; k * k];
    for i in 0..k {
        for j in i..k {
            let r = pearson(&cols[i], &cols[j]).map(|r| if i == j { 1.0 } else { r });
            values[i * k + j] = r;
            values[j * k + i] = r;
        }
    }
    Ok(CorrelationMatrix {
        features: features.iter().map(|s| s.to_string()).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn some(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().copied().map(Some).collect()
    }

    #[test]
    fn perfect_line() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson(&some(&x), &some(&y)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shuffled_is_uncorrelated() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
            let mut y = x.clone();
            y.shuffle(&mut rng);
            assert!(pearson(&some(&x), &some(&y)).unwrap().abs() < 0.1);
        }
    }

    #[test]
    fn constant_and_sparse_are_null() {
        assert_eq!(pearson(&some(&[1.0, 2.0, 3.0]), &some(&[4.0, 4.0, 4.0])), None);
        assert_eq!(pearson(&[Some(1.0), None, Some(3.0)], &some(&[1.0, 2.0, 5.0])), None);
    }

    #[test]
    fn matrix_is_symmetric() {
        let m = FeatureMatrix::from_columns(&[
            ("a", vec![1.0, 2.0, 3.0, 4.0, 5.0]),
            ("b", vec![2.0, 1.0, 4.0, 3.0, 6.0]),
            ("c", vec![7.0, 7.0, 7.0, 7.0, 7.0]),
        ])
        .unwrap();
        let c = pearson_matrix(&m, &["a", "b", "c"]).unwrap();
        assert_eq!(c.get(0, 0), Some(1.0));
        assert_eq!(c.get(0, 1), c.get(1, 0));
        assert_eq!(c.get(2, 2), None);
    }

    proptest! {
        #[test]
        fn affine_invariance(
            xy in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 5..40),
            alpha in 0.1f64..10.0,
            beta in -50.0f64..50.0,
        ) {
            let x: Vec<Option<f64>> = xy.iter().map(|p| Some(p.0)).collect();
            let y: Vec<Option<f64>> = xy.iter().map(|p| Some(p.1)).collect();
            if let Some(r) = pearson(&x, &y) {
                let xs: Vec<Option<f64>> = x.iter().map(|v| v.map(|v| alpha * v + beta)).collect();
                let xn: Vec<Option<f64>> = x.iter().map(|v| v.map(|v| -alpha * v + beta)).collect();
                prop_assert!((pearson(&xs, &y).unwrap() - r).abs() < 1e-9);
                prop_assert!((pearson(&xn, &y).unwrap() + r).abs() < 1e-9);
            }
        }
    }
}
