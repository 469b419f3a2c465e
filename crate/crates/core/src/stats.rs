//! Fisher's exact test, the Mann-Whitney U test and Spearman's rank
//! correlation, all two-sided.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 pairs, got {0}")]
    TooFew(usize),
    #[error("ranks have zero variance")]
    ZeroVariance,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub test: &'static str,
    /// Serialised as `null` when infinite.
    pub statistic: f64,
    pub p_value: f64,
    /// Exact p-value where the test provides one.
    #[serde(skip_serializing_if = "Option::is_none", with = "rational::serde_str_opt")]
    pub exact_p: Option<Rational>,
    pub n1: usize,
    pub n2: usize,
}

fn binom(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Table `[[a, b], [c, d]]`. The two-sided p-value sums the hypergeometric
/// probabilities of all tables with the observed margins that are no more
/// likely than the observed one. The statistic is the sample odds ratio.
pub fn fisher_exact_2x2(a: u64, b: u64, c: u64, d: u64) -> TestResult {
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let n = r1 + r2;
    let odds = (a as f64 * d as f64) / (b as f64 * c as f64);
    let statistic = if odds.is_nan() { 1.0 } else { odds };
    if r1 == 0 || r2 == 0 || c1 == 0 || c1 == n {
        return TestResult {
            test: "fisher_exact",
            statistic,
            p_value: 1.0,
            exact_p: Some(Rational::one()),
            n1: r1 as usize,
            n2: r2 as usize,
        };
    }
    let weight = |x: u64| binom(r1, x) * binom(r2, c1 - x);
    let observed = weight(a);
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let tail: BigUint = (lo..=hi).map(weight).filter(|w| *w <= observed).sum();
    let total = binom(n, c1);
    let exact = Rational::new(tail.into(), total.into());
    TestResult {
        test: "fisher_exact",
        statistic,
        p_value: rational::to_f64(&exact).min(1.0),
        exact_p: Some(exact),
        n1: r1 as usize,
        n2: r2 as usize,
    }
}

/// Midranks (1-based) and the tie sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// U for the first sample; normal approximation with tie-corrected variance
/// and continuity correction.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let all: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&all);
    let r1: f64 = ranks[..x.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - n1 * n2 / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::standard();
        (2.0 * (1.0 - normal.cdf(z))).min(1.0)
    };
    Ok(TestResult { test: "mann_whitney_u", statistic: u, p_value, exact_p: None, n1: x.len(), n2: y.len() })
}

/// Pearson correlation of midranks; p-value from Student's t with `n − 2`
/// degrees of freedom.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFew(n));
    }
    let (rx, _) = midranks(x);
    let (ry, _) = midranks(y);
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if (1.0 - rho.abs()) < 1e-15 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(TestResult { test: "spearman_rho", statistic: rho, p_value, exact_p: None, n1: n, n2: n })
}

/// Counts as `f64` samples.
pub fn as_samples(values: &[usize]) -> Vec<f64> {
    values.iter().map(|&v| v.to_f64().unwrap_or(f64::NAN)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct hypergeometric summation in floating point.
    fn fisher_oracle(a: u64, b: u64, c: u64, d: u64) -> f64 {
        fn ln_fact(n: u64) -> f64 {
            (1..=n).map(|k| (k as f64).ln()).sum()
        }
        let (r1, r2, c1, c2) = (a + b, c + d, a + c, b + d);
        let n = r1 + r2;
        let p = |x: u64| {
            let (b, c) = (r1 - x, c1 - x);
            let d = r2 - c;
            (ln_fact(r1) + ln_fact(r2) + ln_fact(c1) + ln_fact(c2)
                - ln_fact(n)
                - ln_fact(x)
                - ln_fact(b)
                - ln_fact(c)
                - ln_fact(d))
            .exp()
        };
        let obs = p(a);
        (c1.saturating_sub(r2)..=r1.min(c1)).map(p).filter(|&q| q <= obs * (1.0 + 1e-9)).sum()
    }

    #[test]
    fn fisher_cases() {
        assert!(fisher_exact_2x2(106, 202, 177, 131).p_value < 0.001);
        assert_eq!(fisher_exact_2x2(5, 5, 5, 5).p_value, 1.0);
        let r = fisher_exact_2x2(3, 7, 7, 3);
        assert_eq!(r.exact_p, Some(rational::ratio(33_052, 184_756)));
        assert!((r.p_value - fisher_oracle(3, 7, 7, 3)).abs() < 1e-12);
        assert_eq!(fisher_exact_2x2(0, 0, 4, 5).p_value, 1.0);
        assert_eq!(fisher_exact_2x2(0, 0, 0, 0).p_value, 1.0);
    }

    #[test]
    fn fisher_symmetries() {
        for (a, b, c, d) in [(3, 1, 4, 9), (12, 5, 2, 7), (0, 6, 3, 3)] {
            let p = fisher_exact_2x2(a, b, c, d).exact_p;
            assert_eq!(fisher_exact_2x2(a, c, b, d).exact_p, p);
            assert_eq!(fisher_exact_2x2(c, d, a, b).exact_p, p);
            assert_eq!(fisher_exact_2x2(b, a, d, c).exact_p, p);
            assert!((fisher_exact_2x2(a, b, c, d).p_value - fisher_oracle(a, b, c, d)).abs() < 1e-9);
        }
    }

    #[test]
    fn mann_whitney_cases() {
        let s = [1.0, 2.0, 2.0, 3.0];
        let r = mann_whitney_u(&s, &s).unwrap();
        assert_eq!(r.statistic, 8.0);
        assert_eq!(r.p_value, 1.0);
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        let swapped = mann_whitney_u(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(swapped.statistic, 9.0);
        assert!((swapped.p_value - r.p_value).abs() < 1e-12);
        assert_eq!(mann_whitney_u(&[2.0, 2.0], &[2.0]).unwrap().p_value, 1.0);
        assert_eq!(mann_whitney_u(&[], &[1.0]), Err(StatsError::EmptySample));
    }

    #[test]
    fn mann_whitney_shift_monotone() {
        let base: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let mut last = 1.1;
        for shift in [0.0, 0.5, 1.0, 2.0] {
            let other: Vec<f64> = base.iter().map(|v| v + shift).collect();
            let p = mann_whitney_u(&base, &other).unwrap().p_value;
            assert!(p <= last);
            last = p;
        }
        assert!(last < 0.001);
    }

    #[test]
    fn spearman_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman_rho(&x, &x).unwrap().statistic, 1.0);
        assert_eq!(spearman_rho(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap().statistic, -1.0);
        let y = [2.0, 1.0, 4.0, 3.0];
        let rho = spearman_rho(&x, &y).unwrap().statistic;
        // 1 − 6Σd²/(n(n²−1)) with Σd² = 4
        let oracle = 1.0 - 6.0 * 4.0 / (4.0 * 15.0);
        assert!((rho - oracle).abs() < 1e-12);
        assert!((rho - 0.6).abs() < 1e-12);
        assert_eq!(spearman_rho(&x, &[1.0; 4]), Err(StatsError::ZeroVariance));
        assert_eq!(spearman_rho(&x[..2], &y[..2]), Err(StatsError::TooFew(2)));
        assert_eq!(spearman_rho(&x, &y[..3]), Err(StatsError::LengthMismatch(4, 3)));
    }
}
