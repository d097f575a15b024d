//! Two-sample statistics: Kolmogorov–Smirnov and Student's t.
//!
//! The KS p-value uses the asymptotic Kolmogorov distribution at the
//! effective sample size n_e = |x||y|/(|x|+|y|). [`ks_exact_p`] computes
//! the exact permutation p by lattice-path counting and serves as the
//! small-sample oracle for the asymptotic route.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Two-sample KS result: `d` is sup |ECDF_x − ECDF_y|, `p` the two-sided
/// asymptotic probability of a statistic at least this large.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ks2Sample {
    pub d: f64,
    pub p: f64,
}

/// Two-sample t result. `df` is m+n−2 for the pooled-variance form and
/// the Welch–Satterthwaite approximation for the Welch variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// D = sup over the real line of |ECDF_x − ECDF_y|, by a merge sweep over
/// the sorted samples.
pub fn ks_statistic(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput("KS test needs nonempty samples"));
    }
    let xs = sorted(x);
    let ys = sorted(y);
    let (m, n) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < m && j < n {
        let step = xs[i].min(ys[j]);
        while i < m && xs[i] <= step {
            i += 1;
        }
        while j < n && ys[j] <= step {
            j += 1;
        }
        let diff = (i as f64 / m as f64 - j as f64 / n as f64).abs();
        d = d.max(diff);
    }
    Ok(d)
}

/// Survival function of the asymptotic Kolmogorov distribution,
/// Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}, with the theta-series form for
/// small λ where the alternating series converges slowly.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        // CDF via Jacobi theta: P = (√(2π)/λ) Σ exp(−(2k−1)²π²/(8λ²))
        let f = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 0..10 {
            let odd = (2 * k + 1) as f64;
            sum += (-odd * odd * f).exp();
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
            sum += sign * term;
            sign = -sign;
            if term < 1e-17 {
                break;
            }
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test, asymptotic p at
/// n_e = |x||y|/(|x|+|y|).
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<Ks2Sample> {
    let d = ks_statistic(x, y)?;
    let ne = (x.len() * y.len()) as f64 / (x.len() + y.len()) as f64;
    let p = kolmogorov_sf(ne.sqrt() * d);
    Ok(Ks2Sample { d, p })
}

/// Exact two-sided p for sample sizes m and n: the fraction of the
/// C(m+n, m) equally-likely orderings whose path max |i/m − j/n| reaches
/// `d`. Intended for m, n ≤ ~12 (the DP is O(m·n) but the statistic grid
/// is only meaningful for small samples); the internal oracle for
/// [`ks_two_sample`]'s asymptotic p.
pub fn ks_exact_p(m: usize, n: usize, d: f64) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    // Paths never touching |i·n − j·m| ≥ d·m·n (small slack for float d).
    let threshold = d * (m * n) as f64 - 1e-9;
    let allowed = |i: usize, j: usize| {
        ((i * n) as f64 - (j * m) as f64).abs() < threshold
    };
    let mut col = vec![0f64; n + 1];
    if !allowed(0, 0) {
        return 1.0;
    }
    col[0] = 1.0;
    for j in 1..=n {
        col[j] = if allowed(0, j) { col[j - 1] } else { 0.0 };
    }
    for i in 1..=m {
        let mut next = vec![0f64; n + 1];
        next[0] = if allowed(i, 0) { col[0] } else { 0.0 };
        for j in 1..=n {
            next[j] = if allowed(i, j) {
                col[j] + next[j - 1]
            } else {
                0.0
            };
        }
        col = next;
    }
    // C(m+n, m) computed multiplicatively; exact in f64 for m+n ≤ 24.
    let mut total = 1.0f64;
    for k in 0..m {
        total = total * (n + k + 1) as f64 / (k + 1) as f64;
    }
    (1.0 - col[n] / total).clamp(0.0, 1.0)
}

/// Student's two-sample t test, two-sided. Pooled variance with
/// df = m+n−2 by default; `welch` switches to the unequal-variance form.
pub fn t_test(x: &[f64], y: &[f64], welch: bool) -> Result<TTest> {
    let (m, n) = (x.len(), y.len());
    if m < 2 || n < 2 {
        return Err(Error::EmptyInput("t test needs at least 2 values per sample"));
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let var = |s: &[f64], mu: f64| {
        s.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (s.len() - 1) as f64
    };
    let (mx, my) = (mean(x), mean(y));
    let (vx, vy) = (var(x, mx), var(y, my));

    let (t, df) = if welch {
        let se2 = vx / m as f64 + vy / n as f64;
        if se2 == 0.0 {
            return zero_variance_case(mx, my);
        }
        let df = se2 * se2
            / ((vx / m as f64).powi(2) / (m as f64 - 1.0)
                + (vy / n as f64).powi(2) / (n as f64 - 1.0));
        ((mx - my) / se2.sqrt(), df)
    } else {
        let pooled = ((m as f64 - 1.0) * vx + (n as f64 - 1.0) * vy) / (m + n - 2) as f64;
        if pooled == 0.0 {
            return zero_variance_case(mx, my);
        }
        let se = (pooled * (1.0 / m as f64 + 1.0 / n as f64)).sqrt();
        ((mx - my) / se, (m + n - 2) as f64)
    };

    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Internal(format!("t distribution with df={df}: {e}")))?;
    let p = (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0);
    Ok(TTest { t, p, df })
}

fn zero_variance_case(mx: f64, my: f64) -> Result<TTest> {
    if mx == my {
        Ok(TTest {
            t: 0.0,
            p: 1.0,
            df: f64::NAN,
        })
    } else {
        Err(Error::data(
            "zero variance with unequal means: t statistic is undefined",
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ks_identical_samples() {
        let x = [0.3, 0.7, 0.1];
        let r = ks_two_sample(&x, &x).unwrap();
        assert_eq!(r.d, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_disjoint_samples() {
        let r = ks_two_sample(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.d, 1.0);
    }

    #[test]
    fn ks_frozen_quarter_case() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.5, 2.5, 3.5, 4.5];
        let r = ks_two_sample(&x, &y).unwrap();
        assert_eq!(r.d, 0.25);
    }

    #[test]
    fn ks_empty_sample_is_error() {
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn ks_handles_ties() {
        // x = {0,0,1}, y = {0,1,1}: at 0, |2/3 - 1/3| = 1/3; at 1, 0.
        let r = ks_statistic(&[0.0, 0.0, 1.0], &[0.0, 1.0, 1.0]).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_sf_reference_values() {
        // Q(λ) reference values.
        assert!((kolmogorov_sf(1.0) - 0.269999671677).abs() < 1e-9);
        assert!((kolmogorov_sf(1.36) - 0.049485876755).abs() < 1e-9);
        assert!((kolmogorov_sf(0.3) - 0.999990694199).abs() < 1e-9);
        assert!(kolmogorov_sf(3.0) < 1e-7);
        // continuity at the series switch point
        let below = kolmogorov_sf(1.18 - 1e-12);
        let above = kolmogorov_sf(1.18 + 1e-12);
        assert!((below - above).abs() < 1e-10);
    }

    #[test]
    fn ks_exact_all_or_nothing_paths() {
        // D = 1 requires one sample entirely before the other:
        // 2·(3!·3!)/6! = 2/20 = 0.1
        let p = ks_exact_p(3, 3, 1.0);
        assert!((p - 0.1).abs() < 1e-12);
        // D ≥ 0 always holds
        assert_eq!(ks_exact_p(5, 5, 0.0), 1.0);
    }

    #[test]
    fn ks_exact_matches_brute_force_enumeration() {
        // Enumerate all C(m+n, m) orderings for small m, n and compare.
        fn brute(m: usize, n: usize, d: f64) -> f64 {
            let total = m + n;
            let mut hits = 0u64;
            let mut count = 0u64;
            // iterate over bitmasks choosing positions of x-steps
            for mask in 0u32..(1 << total) {
                if mask.count_ones() as usize != m {
                    continue;
                }
                count += 1;
                let mut i = 0usize;
                let mut j = 0usize;
                let mut max = 0.0f64;
                for b in 0..total {
                    if mask >> b & 1 == 1 {
                        i += 1;
                    } else {
                        j += 1;
                    }
                    max = max.max((i as f64 / m as f64 - j as f64 / n as f64).abs());
                }
                if max >= d - 1e-12 {
                    hits += 1;
                }
            }
            hits as f64 / count as f64
        }
        for (m, n) in [(3, 3), (4, 3), (5, 5), (6, 4)] {
            for d_step in 1..=(m * n) {
                let d = d_step as f64 / (m * n) as f64;
                let exact = ks_exact_p(m, n, d);
                let enumerated = brute(m, n, d);
                assert!(
                    (exact - enumerated).abs() < 1e-10,
                    "m={m} n={n} d={d}: exact={exact} brute={enumerated}"
                );
            }
        }
    }

    #[test]
    fn ks_asymptotic_close_to_exact_at_moderate_sizes() {
        // The asymptotic p is known to be conservative at small n; check
        // it tracks the exact permutation p within a coarse band on the
        // n = m = 12 grid.
        let m = 12;
        let n = 12;
        for d_step in [3usize, 4, 5, 6, 7, 8] {
            let d = d_step as f64 / 12.0;
            let exact = ks_exact_p(m, n, d);
            let ne = (m * n) as f64 / (m + n) as f64;
            let asymp = kolmogorov_sf(ne.sqrt() * d);
            assert!(
                (asymp - exact).abs() < 0.12,
                "d={d}: asymp={asymp} exact={exact}"
            );
        }
    }

    #[test]
    fn t_identical_samples() {
        let x = [1.0, 2.0, 3.0];
        let r = t_test(&x, &x, false).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t_frozen_pooled_case() {
        let r = t_test(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], false).unwrap();
        assert!((r.t - (-1.224745)).abs() < 1e-6, "t = {}", r.t);
        assert_eq!(r.df, 4.0);
        // p for |t|=1.2247 at df=4 is ≈ 0.2879
        assert!((r.p - 0.2879).abs() < 1e-3, "p = {}", r.p);
    }

    #[test]
    fn t_antisymmetric_in_sample_order() {
        let x = [1.0, 2.0, 3.5, 0.5];
        let y = [2.0, 2.5, 4.0];
        let a = t_test(&x, &y, false).unwrap();
        let b = t_test(&y, &x, false).unwrap();
        assert!((a.t + b.t).abs() < 1e-12);
        assert!((a.p - b.p).abs() < 1e-12);
    }

    #[test]
    fn t_zero_variance_cases() {
        let r = t_test(&[2.0, 2.0], &[2.0, 2.0], false).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
        assert!(t_test(&[2.0, 2.0], &[3.0, 3.0], false).is_err());
    }

    #[test]
    fn t_too_small_samples_error() {
        assert!(t_test(&[1.0], &[1.0, 2.0], false).is_err());
    }

    #[test]
    fn welch_variant_runs_and_matches_pooled_for_equal_sizes_and_vars() {
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 3.0, 4.0];
        let pooled = t_test(&x, &y, false).unwrap();
        let welch = t_test(&x, &y, true).unwrap();
        assert!((pooled.t - welch.t).abs() < 1e-12);
        assert!((welch.df - 4.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn ks_d_invariant_under_increasing_transform(
            x in proptest::collection::vec(-50.0f64..50.0, 1..30),
            y in proptest::collection::vec(-50.0f64..50.0, 1..30),
        ) {
            let d1 = ks_statistic(&x, &y).unwrap();
            let f = |v: f64| (v / 10.0).exp() + 0.5 * v; // strictly increasing
            let xt: Vec<f64> = x.iter().map(|&v| f(v)).collect();
            let yt: Vec<f64> = y.iter().map(|&v| f(v)).collect();
            let d2 = ks_statistic(&xt, &yt).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-12);
        }

        #[test]
        fn ks_d_bounds(
            x in proptest::collection::vec(-5.0f64..5.0, 1..20),
            y in proptest::collection::vec(-5.0f64..5.0, 1..20),
        ) {
            let r = ks_two_sample(&x, &y).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.d));
            prop_assert!((0.0..=1.0).contains(&r.p));
        }
    }
}
