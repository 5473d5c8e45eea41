//! Small Monte-Carlo estimators shared by the noise verifiers, validators
//! and the harness.

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.575_829_303_548_901;

/// Number of blocks used by median-of-means estimators.
pub const MOM_BLOCKS: usize = 32;

/// Sample mean and 99% normal-approximation half-width.
pub fn mean_ci99(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::INFINITY);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, Z99 * (var / n as f64).sqrt())
}

/// Running-sum accumulator that produces the same result as [`mean_ci99`]
/// without storing samples.
#[derive(Clone, Copy, Debug, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn ci99(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        Z99 * (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median-of-means from precomputed block means, with a 99% half-width.
///
/// The spread of the block means is measured by the normalized median
/// absolute deviation; the median of k normal block means has standard
/// error ≈ √(π/2)·s/√k.
pub fn median_of_block_means(block_means: &[f64]) -> (f64, f64) {
    let k = block_means.len();
    let med = median(block_means);
    if k < 2 {
        return (med, f64::INFINITY);
    }
    let dev: Vec<f64> = block_means.iter().map(|b| (b - med).abs()).collect();
    let s = 1.4826 * median(&dev);
    let hw = Z99 * (std::f64::consts::PI / 2.0).sqrt() * s / (k as f64).sqrt();
    (med, hw)
}

/// Median-of-means over `blocks` contiguous blocks of `values`; any
/// remainder is spread one sample per leading block.
pub fn median_of_means(values: &[f64], blocks: usize) -> (f64, f64) {
    let blocks = blocks.clamp(1, values.len().max(1));
    let n = values.len();
    let base = n / blocks;
    let extra = n % blocks;
    let mut means = Vec::with_capacity(blocks);
    let mut start = 0;
    for b in 0..blocks {
        let len = base + usize::from(b < extra);
        let s = &values[start..start + len];
        means.push(s.iter().sum::<f64>() / len as f64);
        start += len;
    }
    median_of_block_means(&means)
}

/// Order statistic at 1-based rank ⌈q·n⌉ (rank clamped to [1, n]); no
/// interpolation.
pub fn order_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    v[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_ci_of_constant_is_exact() {
        let (m, hw) = mean_ci99(&[2.0; 10]);
        assert_eq!(m, 2.0);
        assert_eq!(hw, 0.0);
    }

    #[test]
    fn welford_matches_two_pass() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let (m, hw) = mean_ci99(&v);
        let mut w = Welford::default();
        v.iter().for_each(|x| w.push(*x));
        assert!((w.mean() - m).abs() < 1e-12);
        assert!((w.ci99() - hw).abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn mom_of_constant_blocks() {
        let (m, hw) = median_of_means(&[1.5; 320], 32);
        assert_eq!(m, 1.5);
        assert_eq!(hw, 0.0);
    }

    #[test]
    fn quantile_ranks() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(order_quantile(&v, 0.9), 90.0);
        assert_eq!(order_quantile(&v, 0.99), 99.0);
        assert_eq!(order_quantile(&v, 0.5), 50.0);
        assert_eq!(order_quantile(&v, 1.0), 100.0);
        assert_eq!(order_quantile(&[5.0, 1.0, 3.0], 0.9), 5.0);
        assert_eq!(order_quantile(&[7.0], 0.01), 7.0);
    }
}
