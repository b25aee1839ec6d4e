//! Small statistics helpers shared by the experiment runners and tests.

/// Pairwise (cascade) summation. Deterministic for a given slice ordering
/// and much better conditioned than a running sum on long Monte-Carlo
/// vectors.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Jackknife standard error of the sample mean (leave-one-out estimator).
/// Returns 0 for fewer than two samples.
pub fn jackknife_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let total = pairwise_sum(xs);
    let nf = n as f64;
    // Leave-one-out means and their spread around the full mean.
    let loo_mean_dev: Vec<f64> = xs
        .iter()
        .map(|&x| (total - x) / (nf - 1.0) - total / nf)
        .collect();
    let ss = pairwise_sum(&loo_mean_dev.iter().map(|d| d * d).collect::<Vec<_>>());
    ((nf - 1.0) / nf * ss).sqrt()
}

/// Kolmogorov-Smirnov statistic of `samples` against the unit-mean
/// exponential distribution. Sorts the input in place.
pub fn ks_statistic_exp1(samples: &mut [f64]) -> f64 {
    assert!(!samples.is_empty());
    samples.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let cdf = 1.0 - (-x).exp();
        let above = (i as f64 + 1.0) / n - cdf;
        let below = cdf - i as f64 / n;
        d = d.max(above).max(below);
    }
    d
}

/// Asymptotic Kolmogorov-Smirnov critical value at significance 0.01.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jackknife_matches_classic_se_of_mean() {
        // For the plain mean the jackknife reduces to s / sqrt(n) exactly.
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let m = mean(&xs);
        let var: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
        let classic = (var / xs.len() as f64).sqrt();
        assert!((jackknife_se(&xs) - classic).abs() < 1e-12);
    }

    #[test]
    fn ks_detects_wrong_distribution() {
        // Uniform(0,1) samples are far from Exp(1).
        let mut uni: Vec<f64> = (0..2000).map(|i| (i as f64 + 0.5) / 2000.0).collect();
        let d = ks_statistic_exp1(&mut uni);
        assert!(d > ks_critical_1pct(2000));
    }
}
