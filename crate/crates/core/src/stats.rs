//! One-sided tests used to compare modes.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::metrics::TimeStats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Pooled two-proportion z-test of `H1: p_a > p_b`, with `k` successes
/// out of `n` trials per group.
pub fn two_proportion_greater(k_a: usize, n_a: usize, k_b: usize, n_b: usize) -> TestResult {
    assert!(n_a > 0 && n_b > 0, "both groups need at least one trial");
    let (na, nb) = (n_a as f64, n_b as f64);
    let (pa, pb) = (k_a as f64 / na, k_b as f64 / nb);
    let pooled = (k_a + k_b) as f64 / (na + nb);
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    let z = if se > 0.0 {
        (pa - pb) / se
    } else if pa > pb {
        f64::INFINITY
    } else if pa < pb {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    let normal = Normal::standard();
    TestResult {
        statistic: z,
        p_value: normal.sf(z),
    }
}

/// Welch's t-test of `H1: mean_a > mean_b`.
pub fn welch_greater(a: &TimeStats, b: &TimeStats) -> TestResult {
    assert!(a.n > 1 && b.n > 1, "both samples need at least two values");
    let va = a.sd * a.sd / a.n as f64;
    let vb = b.sd * b.sd / b.n as f64;
    let se = (va + vb).sqrt();
    let diff = a.mean - b.mean;
    if se == 0.0 {
        let p = if diff > 0.0 { 0.0 } else { 1.0 };
        return TestResult {
            statistic: diff.signum() * f64::INFINITY,
            p_value: p,
        };
    }
    let t = diff / se;
    let df = (va + vb).powi(2) / (va * va / (a.n as f64 - 1.0) + vb * vb / (b.n as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    TestResult {
        statistic: t,
        p_value: dist.sf(t),
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn proportions_match_hand_values() {
        // 30/100 vs 15/100: pooled 0.225, se = sqrt(0.225*0.775*0.02)
        let r = two_proportion_greater(30, 100, 15, 100);
        let se = (0.225f64 * 0.775 * 0.02).sqrt();
        assert_abs_diff_eq!(r.statistic, 0.15 / se, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 0.005_542_583, epsilon = 1e-8);
        let flipped = two_proportion_greater(15, 100, 30, 100);
        assert_abs_diff_eq!(flipped.p_value, 1.0 - r.p_value, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_proportions() {
        assert_eq!(two_proportion_greater(0, 10, 0, 10).p_value, 0.5);
        assert_eq!(two_proportion_greater(10, 10, 10, 10).p_value, 0.5);
    }

    #[test]
    fn welch_matches_hand_values() {
        let a = TimeStats::from_values(&[10.0, 12.0, 14.0, 16.0]);
        let b = TimeStats::from_values(&[9.0, 10.0, 11.0]);
        let r = welch_greater(&a, &b);
        // var_a = 20/3, var_b = 1; se^2 = 20/12 + 1/3 = 2
        assert_abs_diff_eq!(r.statistic, 3.0 / 2f64.sqrt(), epsilon = 1e-12);
        // upper tail of t at df = 4.0755, from statistical tables software
        assert_abs_diff_eq!(r.p_value, 0.049_956_432, epsilon = 1e-7);
    }
}
