//! Statistical utilities shared by the Monte Carlo studies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// One-pass mean/variance accumulator (Welford) with exact pairwise merge
/// (Chan, Golub & LeVeque).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamingMoments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl StreamingMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &StreamingMoments) -> StreamingMoments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        let delta = other.mean - self.mean;
        StreamingMoments {
            count: self.count + other.count,
            mean: self.mean + delta * n_b / n,
            m2: self.m2 + other.m2 + delta * delta * n_a * n_b / n,
        }
    }

    /// Unbiased sample variance `M2 / (count - 1)`; NaN below two points.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn mean_se(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for StreamingMoments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = StreamingMoments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Sorts a copy of `samples` in ascending order (NaN last).
pub fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Kolmogorov–Smirnov distance between the empirical law of `sorted_samples`
/// and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted_samples: &[f64], cdf: F) -> Result<f64> {
    if sorted_samples.is_empty() {
        return Err(Error::precondition("ks_statistic needs at least one sample"));
    }
    if sorted_samples.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::precondition("ks_statistic needs sorted samples"));
    }
    let n = sorted_samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted_samples.iter().enumerate() {
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Numerical(format!("distribution function returned {f} at {x}")));
        }
        let upper = (i + 1) as f64 / n - f;
        let lower = f - i as f64 / n;
        d = d.max(upper.abs()).max(lower.abs());
    }
    Ok(d)
}

/// Large-sample 1% critical value of the one-sample KS distance.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Quantile of already sorted data by linear interpolation at rank
/// `h = (n - 1) q + 1` (1-based).
pub fn quantile_sorted(sorted_samples: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level {q} outside (0, 1)")));
    }
    let n = sorted_samples.len();
    if n < 2 {
        return Err(Error::precondition("empirical quantile needs at least two samples"));
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        return Ok(sorted_samples[n - 1]);
    }
    Ok(sorted_samples[lo] + frac * (sorted_samples[lo + 1] - sorted_samples[lo]))
}

/// Empirical quantile of unsorted data; same convention as [`quantile_sorted`].
pub fn empirical_quantile(samples: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level {q} outside (0, 1)")));
    }
    if samples.len() < 2 {
        return Err(Error::precondition("empirical quantile needs at least two samples"));
    }
    let mut v = samples.to_vec();
    quantile_in_place(&mut v, q)
}

/// Quantile by selection; reorders `samples`.
pub fn quantile_in_place(samples: &mut [f64], q: f64) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::precondition("empirical quantile needs at least two samples"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level {q} outside (0, 1)")));
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let (_, &mut x_lo, upper) = samples.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || upper.is_empty() {
        return Ok(x_lo);
    }
    let x_hi = upper.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(x_lo + frac * (x_hi - x_lo))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::domain("log-log regression needs positive coordinates"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if logs.len() < 2 || !(sxx > 0.0) {
        return Err(Error::precondition("log-log regression needs two distinct x values"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Sample Pearson correlation of the pairs.
pub fn pearson_correlation(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::precondition("correlation needs at least two pairs"));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::precondition("correlation of a constant sample"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Bootstrap standard error of `statistic`: the standard deviation of the
/// statistic over `n_boot` resamples drawn with replacement from `stream`.
pub fn bootstrap_se<T, F>(samples: &[T], statistic: F, n_boot: usize, stream: RandomStream) -> Result<f64>
where
    T: Copy,
    F: Fn(&mut [T]) -> f64,
{
    if samples.is_empty() {
        return Err(Error::precondition("bootstrap needs a non-empty sample"));
    }
    if n_boot < 100 {
        return Err(Error::precondition(format!(
            "bootstrap needs at least 100 resamples, got {n_boot}"
        )));
    }
    let mut rng = stream.rng();
    let n = samples.len();
    let mut buf = vec![samples[0]; n];
    let mut acc = StreamingMoments::new();
    for _ in 0..n_boot {
        for slot in buf.iter_mut() {
            *slot = samples[rng.random_range(0..n)];
        }
        acc.push(statistic(&mut buf));
    }
    Ok(acc.variance().max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn pearson_examples() {
        let line: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        assert!((pearson_correlation(&line).unwrap() + 1.0).abs() < 1e-14);
        let pts = [(1.0, 2.0), (2.0, 1.0), (3.0, 4.0), (4.0, 3.0)];
        // sxy = 3, sxx = syy = 5
        assert!((pearson_correlation(&pts).unwrap() - 0.6).abs() < 1e-14);
        assert!(pearson_correlation(&[(1.0, 1.0)]).is_err());
        assert!(pearson_correlation(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn ks_rejects_invalid_cdf_values() {
        assert!(ks_statistic(&[0.0, 1.0], |_| f64::NAN).is_err());
    }

    #[test]
    fn ks_hand_example() {
        let d = ks_statistic(&[0.1, 0.5, 0.9], |x| x).unwrap();
        assert!((d - 7.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn ks_single_point_at_median() {
        assert_eq!(ks_statistic(&[3.0], |_| 0.5).unwrap(), 0.5);
    }

    #[test]
    fn ks_best_case_alignment() {
        let n = 40;
        let xs: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x).unwrap();
        assert!((d - 0.5 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn ks_rejects_unsorted() {
        assert!(matches!(
            ks_statistic(&[0.2, 0.1], |x| x),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn ks_consistency_on_uniform_draws() {
        let mut rng = RandomStream::new(1, 0).rng();
        let xs: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let d = ks_statistic(&sorted(&xs), |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 0.01, "D = {d}");
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(empirical_quantile(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.5);
        assert_eq!(empirical_quantile(&[4.0, 3.0, 1.0, 2.0], 0.5).unwrap(), 2.5);
        let top = empirical_quantile(&[1.0, 2.0, 3.0, 4.0], 1.0 - 1e-12).unwrap();
        assert!((top - 4.0).abs() < 1e-10);
        assert!(matches!(
            empirical_quantile(&[5.0], 0.3),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            empirical_quantile(&[1.0, 2.0], 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn loglog_examples() {
        let fit = loglog_slope(&[(1.0, 1.0), (10.0, 100.0)]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        let e = std::f64::consts::E;
        let fit = loglog_slope(&[(1.0, 3.0), (e, 3.0)]).unwrap();
        assert!(fit.slope.abs() < 1e-15);
        let pts: Vec<(f64, f64)> = [1e2, 1e4, 1e6].iter().map(|&n: &f64| (n, n.powf(0.1716))).collect();
        let fit = loglog_slope(&pts).unwrap();
        assert!((fit.slope - 0.1716).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(matches!(loglog_slope(&[(0.0, 1.0), (1.0, 1.0)]), Err(Error::Domain(_))));
        assert!(loglog_slope(&[(2.0, 1.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn bootstrap_examples() {
        let s = RandomStream::auxiliary(3, 0);
        let constant = vec![2.5; 500];
        let mean = |v: &mut [f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert_eq!(bootstrap_se(&constant, mean, 200, s).unwrap(), 0.0);
        assert!(bootstrap_se(&constant, mean, 10, s).is_err());
        assert!(bootstrap_se(&[], mean, 200, s).is_err());

        let n = 10_000;
        let mut rng = RandomStream::new(3, 1).rng();
        let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let se = bootstrap_se(&xs, mean, 200, s).unwrap();
        let expected = 1.0 / (n as f64).sqrt();
        assert!((se / expected - 1.0).abs() < 0.2, "se = {se}");
        // Deterministic given the stream.
        assert_eq!(se, bootstrap_se(&xs, mean, 200, s).unwrap());
    }

    #[test]
    fn moments_match_two_pass() {
        let xs = [1.0, 4.0, 9.0, 16.0, 25.0];
        let m: StreamingMoments = xs.iter().copied().collect();
        assert!((m.mean - 11.0).abs() < 1e-14);
        let var = xs.iter().map(|x| (x - 11.0f64).powi(2)).sum::<f64>() / 4.0;
        assert!((m.variance() - var).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn merge_is_order_independent(
            xs in prop::collection::vec(-1e3f64..1e3, 3..200),
            cut1 in 0usize..1000, cut2 in 0usize..1000,
        ) {
            let n = xs.len();
            let (a, b) = (cut1 % n, cut2 % n);
            let (i, j) = (a.min(b), a.max(b));
            let p: StreamingMoments = xs[..i].iter().copied().collect();
            let q: StreamingMoments = xs[i..j].iter().copied().collect();
            let r: StreamingMoments = xs[j..].iter().copied().collect();
            let left = p.merge(&q).merge(&r);
            let right = r.merge(&p.merge(&q.clone()));
            let other = q.merge(&r).merge(&p);
            let whole: StreamingMoments = xs.iter().copied().collect();
            for m in [left, right, other] {
                prop_assert_eq!(m.count, whole.count);
                prop_assert!((m.mean - whole.mean).abs() <= 1e-12 * (1.0 + whole.mean.abs()));
                prop_assert!((m.m2 - whole.m2).abs() <= 1e-12 * (1.0 + whole.m2.abs()));
            }
        }

        #[test]
        fn quantile_is_monotone_in_level(
            xs in prop::collection::vec(-1e3f64..1e3, 2..100),
            q1 in 0.001f64..0.999, q2 in 0.001f64..0.999,
        ) {
            let (lo, hi) = (q1.min(q2), q1.max(q2));
            let s = sorted(&xs);
            prop_assert!(quantile_sorted(&s, lo).unwrap() <= quantile_sorted(&s, hi).unwrap());
            prop_assert_eq!(quantile_sorted(&s, lo).unwrap(), empirical_quantile(&xs, lo).unwrap());
        }
    }
}
