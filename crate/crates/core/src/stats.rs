//! Small statistics toolkit: confidence intervals and goodness-of-fit tests
//! used by the sweeps and by the Monte-Carlo test suites.

use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if successes == 0 { 0.0 } else { (centre - half).clamp(0.0, p) };
    let high = if successes as f64 == n { 1.0 } else { (centre + half).clamp(p, 1.0) };
    (low, high)
}

/// 95% Wilson interval.
pub fn wilson95(successes: u64, n: u64) -> (f64, f64) {
    wilson_interval(successes, n, 1.959_963_984_540_054)
}

/// Upper-tail probability of a χ² statistic.
pub fn chi_square_sf(statistic: f64, dof: f64) -> f64 {
    let dist = ChiSquared::new(dof).expect("positive degrees of freedom");
    1.0 - dist.cdf(statistic)
}

/// p-value of Pearson's test that `counts` are equiprobable.
pub fn chi_square_uniform_p_value(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    chi_square_sf(stat, (counts.len() - 1) as f64)
}

/// Pearson χ² test of `samples` against Binomial(n, p). Adjacent outcomes are
/// pooled until every bin expects at least five observations.
pub fn binomial_gof_p_value(samples: &[u64], n: u64, p: f64) -> f64 {
    let dist = Binomial::new(p, n).expect("valid binomial");
    let m = samples.len() as f64;
    let mut observed = vec![0u64; n as usize + 1];
    for &s in samples {
        observed[s.min(n) as usize] += 1;
    }

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut exp_acc, mut obs_acc) = (0.0, 0.0);
    for k in 0..=n {
        exp_acc += m * dist.pmf(k);
        obs_acc += observed[k as usize] as f64;
        if exp_acc >= 5.0 {
            bins.push((obs_acc, exp_acc));
            exp_acc = 0.0;
            obs_acc = 0.0;
        }
    }
    if exp_acc > 0.0 || obs_acc > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += obs_acc;
                last.1 += exp_acc;
            }
            None => bins.push((obs_acc, exp_acc)),
        }
    }
    if bins.len() < 2 {
        return 1.0;
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    chi_square_sf(stat, (bins.len() - 1) as f64)
}

/// One-sample Kolmogorov–Smirnov statistic D of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at significance 1%.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
