//! Small statistics kit for the verification harness: sample summaries,
//! Kolmogorov-Smirnov tests, and the asymptotic Kolmogorov tail.
//!
//! Everything here is deterministic given its inputs; ensemble code feeds
//! it pre-sorted or raw samples and gets back numbers that go straight
//! into reports.

use crate::error::{MsleError, Result};
use statrs::distribution::{ContinuousCDF, Normal};

/// Sample mean and standard error (unbiased variance, `n >= 2`).
pub fn mean_se(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(MsleError::Stats(format!(
            "need at least two samples, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    // Unit normal is always constructible.
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(t) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 t^2)`.
pub fn kolmogorov_q(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..200 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        sum += sign * term;
        if term < 1e-14 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size entering the p-value.
    pub n_eff: f64,
}

/// Finite-sample correction of Stephens: the asymptotic tail evaluated at
/// `(sqrt(n) + 0.12 + 0.11/sqrt(n)) D` is accurate down to small n.
fn ks_p(d: f64, n_eff: f64) -> f64 {
    let rn = n_eff.sqrt();
    kolmogorov_q((rn + 0.12 + 0.11 / rn) * d)
}

/// One-sample KS test of `xs` against the continuous CDF `cdf`.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if xs.len() < 8 {
        return Err(MsleError::Stats(format!(
            "KS needs a real sample, got {} points",
            xs.len()
        )));
    }
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p(d, n),
        n_eff: n,
    })
}

/// Two-sample KS test; effective size `n1 n2 / (n1 + n2)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < 8 || b.len() < 8 {
        return Err(MsleError::Stats(format!(
            "KS needs real samples, got {} and {} points",
            a.len(),
            b.len()
        )));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    let by_value = |x: &f64, y: &f64| x.partial_cmp(y).expect("samples must not contain NaN");
    sa.sort_by(by_value);
    sb.sort_by(by_value);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    // The ECDF gap is measured just after each distinct value, consuming
    // ties from both samples first.
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] == x {
            i += 1;
        }
        while j < sb.len() && sb[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(KsResult {
        statistic: d,
        p_value: ks_p(d, n_eff),
        n_eff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::task_rng;
    use rand::Rng;

    /// Hand value: sample {0.1, 0.3, 0.5, 0.7, 0.9, 0.2, 0.4, 0.6}
    /// against Uniform[0,1]. Sorted, the empirical CDF steps by 1/8; the
    /// largest gap is at 0.7, where F = 0.7 against a post-step height of
    /// 7/8.
    #[test]
    fn one_sample_statistic_matches_hand_computation() {
        let xs = [0.1, 0.3, 0.5, 0.7, 0.9, 0.2, 0.4, 0.6];
        let r = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        let expect = [
            (0.1f64, 0.0f64, 0.125f64),
            (0.2, 0.125, 0.25),
            (0.3, 0.25, 0.375),
            (0.4, 0.375, 0.5),
            (0.5, 0.5, 0.625),
            (0.6, 0.625, 0.75),
            (0.7, 0.75, 0.875),
            (0.9, 0.875, 1.0),
        ]
        .iter()
        .map(|&(x, lo, hi)| (x - lo).max(hi - x))
        .fold(0.0f64, f64::max);
        assert!((r.statistic - expect).abs() < 1e-15);
        assert!((r.statistic - 0.175).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_tail_brackets_known_values() {
        // Q(0.8276) ~ 0.5 and Q(1.2238) ~ 0.1 (classical tables).
        assert!((kolmogorov_q(0.8276) - 0.5).abs() < 2e-3);
        assert!((kolmogorov_q(1.2238) - 0.1).abs() < 2e-3);
        assert!(kolmogorov_q(0.0) == 1.0);
        assert!(kolmogorov_q(3.0) < 1e-6);
        // Monotone decreasing.
        let mut prev = 1.0;
        for k in 1..30 {
            let q = kolmogorov_q(k as f64 * 0.1);
            assert!(q <= prev + 1e-15);
            prev = q;
        }
    }

    #[test]
    fn identical_samples_are_indistinguishable() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let r = ks_two_sample(&xs, &xs).unwrap();
        assert!(r.statistic < 1e-12);
        assert!(r.p_value > 0.999);
    }

    /// Calibration: under the null, p-values are roughly uniform. 300
    /// replicates of n = 100 standard normal samples; the fraction with
    /// p < 0.1 should sit near 0.1.
    #[test]
    fn null_p_values_are_calibrated() {
        let mut rng = task_rng(77, 0);
        let mut low = 0;
        let reps = 300;
        for _ in 0..reps {
            let xs: Vec<f64> = (0..100)
                .map(|_| crate::loewner::standard_normal(&mut rng))
                .collect();
            let r = ks_one_sample(&xs, normal_cdf).unwrap();
            if r.p_value < 0.1 {
                low += 1;
            }
        }
        let frac = low as f64 / reps as f64;
        assert!(
            (0.04..=0.18).contains(&frac),
            "fraction of p < 0.1 under the null: {frac}"
        );
    }

    #[test]
    fn shifted_samples_are_detected() {
        let mut rng = task_rng(78, 0);
        let a: Vec<f64> = (0..400)
            .map(|_| crate::loewner::standard_normal(&mut rng))
            .collect();
        let b: Vec<f64> = (0..400)
            .map(|_| crate::loewner::standard_normal(&mut rng) + 0.5)
            .collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value < 1e-6);
        assert!(ks_one_sample(&b, normal_cdf).unwrap().p_value < 1e-6);
        // The unshifted sample is accepted.
        assert!(ks_one_sample(&a, normal_cdf).unwrap().p_value > 0.01);
    }

    #[test]
    fn mean_se_shrinks_at_root_n() {
        let mut rng = task_rng(79, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let (m, se) = mean_se(&xs).unwrap();
        assert!((m - 0.5).abs() < 4.0 * se);
        // Uniform sd is sqrt(1/12); SE = sd / 100.
        assert!((se - (1.0f64 / 12.0).sqrt() / 100.0).abs() < 2e-4);
        assert!(mean_se(&[1.0]).is_err());
    }
}
