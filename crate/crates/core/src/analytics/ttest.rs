use serde::Serialize;

use super::special::t_two_sided_p;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub dof: f64,
    /// Two-sided; `None` when the statistic is undefined.
    pub p: Option<f64>,
}

fn moments(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (n, m, v)
}

fn finish(diff: f64, se2: f64, dof: f64) -> TTest {
    if se2 <= 0.0 {
        return TTest {
            t: f64::NAN,
            dof,
            p: None,
        };
    }
    let t = diff / se2.sqrt();
    TTest {
        t,
        dof,
        p: Some(t_two_sided_p(t, dof)),
    }
}

/// Welch's unequal-variance t test. `None` for samples with fewer than two
/// values; `p` is `None` when both samples have zero variance.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Option<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (na, ma, va) = moments(a);
    let (nb, mb, vb) = moments(b);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let dof = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Some(finish(ma - mb, se2, dof))
}

/// Student's pooled-variance t test.
pub fn student_ttest(a: &[f64], b: &[f64]) -> Option<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (na, ma, va) = moments(a);
    let (nb, mb, vb) = moments(b);
    let dof = na + nb - 2.0;
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / dof;
    let se2 = pooled * (1.0 / na + 1.0 / nb);
    Some(finish(ma - mb, se2, dof))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = welch_ttest(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, Some(1.0));
    }

    #[test]
    fn hand_worked_pair() {
        // Direct evaluation: t = -1/sqrt(5/12 + 5/12), df = 6.
        let r = welch_ttest(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((r.t + 1.0954451150103324).abs() < 1e-12);
        assert!((r.dof - 6.0).abs() < 1e-12);
        assert!((r.p.unwrap() - 0.3153335962012296).abs() < 1e-10);
    }

    #[test]
    fn unequal_variances_reference() {
        let a = [2.1, 3.4, 1.9, 5.6, 4.4, 3.3];
        let b = [6.1, 5.2, 7.3, 4.9];
        let r = welch_ttest(&a, &b).unwrap();
        assert!((r.t + 3.0885872837366746).abs() < 1e-10);
        assert!((r.dof - 7.69463540634973).abs() < 1e-9);
        assert!((r.p.unwrap() - 0.015648865199970247).abs() < 1e-10);
        let s = welch_ttest(&b, &a).unwrap();
        assert_eq!(s.p, r.p);
        assert_eq!(s.t, -r.t);
    }

    #[test]
    fn detects_unit_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n0 = Normal::new(0.0, 1.0).unwrap();
        let n1 = Normal::new(1.0, 1.0).unwrap();
        let a: Vec<f64> = (0..200).map(|_| n0.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..200).map(|_| n1.sample(&mut rng)).collect();
        assert!(welch_ttest(&a, &b).unwrap().p.unwrap() < 1e-3);
    }

    #[test]
    fn zero_variance_both() {
        assert_eq!(welch_ttest(&[1.0, 1.0], &[2.0, 2.0]).unwrap().p, None);
    }

    #[test]
    fn student_equal_sizes_matches_welch_t() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 3.0, 4.0, 5.0];
        let (s, w) = (student_ttest(&a, &b).unwrap(), welch_ttest(&a, &b).unwrap());
        assert!((s.t - w.t).abs() < 1e-12);
        assert_eq!(s.dof, 6.0);
    }
}
