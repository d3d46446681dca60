//! Summary statistics and the goodness-of-fit tests used by the simulation
//! reports. Integer-valued outcomes are accumulated as exact histograms so
//! that summaries do not depend on how replications were scheduled.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Mean, variance and standard error of a count distribution given as a
/// dense histogram (`hist[c]` = number of replications with count `c`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    /// Fourth central moment, used by the variance comparison.
    pub m4: f64,
}

pub fn histogram_moments(hist: &[u64]) -> Moments {
    let n: u64 = hist.iter().sum();
    if n == 0 {
        return Moments { n, mean: f64::NAN, variance: f64::NAN, se: f64::NAN, m4: f64::NAN };
    }
    let nf = n as f64;
    let sum: u128 = hist.iter().enumerate().map(|(c, &h)| c as u128 * h as u128).sum();
    let mean = sum as f64 / nf;
    let (mut m2, mut m4) = (0.0, 0.0);
    for (c, &h) in hist.iter().enumerate() {
        if h > 0 {
            let d = c as f64 - mean;
            m2 += h as f64 * d * d;
            m4 += h as f64 * d * d * d * d;
        }
    }
    let variance = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
    Moments {
        n,
        mean,
        variance,
        se: (variance / nf).sqrt(),
        m4: m4 / nf,
    }
}

pub fn sparse_histogram(hist: &[u64]) -> BTreeMap<usize, u64> {
    hist.iter()
        .enumerate()
        .filter(|(_, &h)| h > 0)
        .map(|(c, &h)| (c, h))
        .collect()
}

/// Streaming mean and variance of real observations (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        }
    }

    pub fn se(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Kolmogorov-Smirnov distance between the empirical law of `sample` and a
/// continuous CDF. Sorts `sample` in place.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sample.len() {
        let x = sample[i];
        let mut j = i;
        while j < sample.len() && sample[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    d
}

/// Half-width of the 99% asymptotic KS acceptance band for `n` draws.
pub fn ks_band_99(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// KS distance between a lattice distribution on `offset, offset+1, …`
/// (`hist[c]` counts value `c`) mapped through `z = (c − center)/scale`
/// and the standard normal law.
pub fn ks_lattice_vs_normal(hist: &[u64], center: f64, scale: f64) -> f64 {
    let normal = Normal::standard();
    let total: u64 = hist.iter().sum();
    let mut below = 0u64;
    let mut d: f64 = 0.0;
    for (c, &h) in hist.iter().enumerate() {
        if h == 0 {
            continue;
        }
        let phi = normal.cdf((c as f64 - center) / scale);
        let before = below as f64 / total as f64;
        below += h;
        let after = below as f64 / total as f64;
        d = d.max((phi - before).abs()).max((after - phi).abs());
    }
    d
}

/// Same comparison with the normal CDF evaluated at half-integers, i.e. the
/// lattice law against the normal law discretized to the same lattice.
pub fn ks_lattice_vs_normal_corrected(hist: &[u64], center: f64, scale: f64) -> f64 {
    let normal = Normal::standard();
    let total: u64 = hist.iter().sum();
    let mut below = 0u64;
    let mut d: f64 = 0.0;
    for (c, &h) in hist.iter().enumerate() {
        below += h;
        let phi = normal.cdf((c as f64 + 0.5 - center) / scale);
        d = d.max((below as f64 / total as f64 - phi).abs());
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Two-sample chi-square test of homogeneity on integer-valued outcomes.
/// Adjacent cells are pooled until each pooled cell has expected count at
/// least 5 in both samples.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquareResult {
    let len = a.len().max(b.len());
    let get = |h: &[u64], i: usize| h.get(i).copied().unwrap_or(0);
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let ntot = (na + nb) as f64;
    let (pa, pb) = (na as f64 / ntot, nb as f64 / ntot);

    let mut cells: Vec<(u64, u64)> = Vec::new();
    let mut cur = (0u64, 0u64);
    for i in 0..len {
        cur.0 += get(a, i);
        cur.1 += get(b, i);
        let pooled = (cur.0 + cur.1) as f64;
        if pooled * pa.min(pb) >= 5.0 {
            cells.push(cur);
            cur = (0, 0);
        }
    }
    if cur.0 + cur.1 > 0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += cur.0;
                last.1 += cur.1;
            }
            None => cells.push(cur),
        }
    }
    if cells.len() < 2 {
        return ChiSquareResult { statistic: 0.0, df: 0, p_value: 1.0 };
    }
    let mut stat = 0.0;
    for &(ca, cb) in &cells {
        let pooled = (ca + cb) as f64;
        let ea = pooled * pa;
        let eb = pooled * pb;
        stat += (ca as f64 - ea).powi(2) / ea + (cb as f64 - eb).powi(2) / eb;
    }
    let df = cells.len() - 1;
    let p_value = ChiSquared::new(df as f64).map(|c| c.sf(stat)).unwrap_or(f64::NAN);
    ChiSquareResult { statistic: stat, df, p_value }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZTest {
    pub z: f64,
    pub p_value: f64,
}

fn two_sided(z: f64) -> ZTest {
    if !z.is_finite() {
        return ZTest { z: 0.0, p_value: 1.0 };
    }
    let p = 2.0 * Normal::standard().sf(z.abs());
    ZTest { z, p_value: p.min(1.0) }
}

pub fn z_test_means(a: &Moments, b: &Moments) -> ZTest {
    let se = (a.variance / a.n as f64 + b.variance / b.n as f64).sqrt();
    if se == 0.0 {
        return if a.mean == b.mean { ZTest { z: 0.0, p_value: 1.0 } } else { ZTest { z: f64::INFINITY, p_value: 0.0 } };
    }
    two_sided((a.mean - b.mean) / se)
}

/// Large-sample comparison of variances using `Var(s²) ≈ (μ₄ − σ⁴)/n`.
pub fn z_test_variances(a: &Moments, b: &Moments) -> ZTest {
    let va = (a.m4 - a.variance * a.variance).max(0.0) / a.n as f64;
    let vb = (b.m4 - b.variance * b.variance).max(0.0) / b.n as f64;
    let se = (va + vb).sqrt();
    if se == 0.0 {
        return if a.variance == b.variance { ZTest { z: 0.0, p_value: 1.0 } } else { ZTest { z: f64::INFINITY, p_value: 0.0 } };
    }
    two_sided((a.variance - b.variance) / se)
}

pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_moments_small() {
        // values 1,1,2,4
        let m = histogram_moments(&[0, 2, 1, 0, 1]);
        assert_eq!(m.n, 4);
        assert_eq!(m.mean, 2.0);
        assert!((m.variance - 2.0).abs() < 1e-15);
    }

    #[test]
    fn running_moments_agree_with_histogram() {
        let mut r = RunningMoments::default();
        for x in [1.0, 1.0, 2.0, 4.0] {
            r.push(x);
        }
        assert!((r.mean() - 2.0).abs() < 1e-15);
        assert!((r.variance() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ks_of_exact_grid_is_small() {
        let n = 1000;
        let mut xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&mut xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn chi_square_identical_samples() {
        let h = [100, 300, 600, 300, 100];
        let r = chi_square_two_sample(&h, &h);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.df, 4);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_detects_shift() {
        let a = [500, 500, 0];
        let b = [0, 500, 500];
        assert!(chi_square_two_sample(&a, &b).p_value < 1e-10);
    }

    #[test]
    fn chi_square_degenerate_single_cell() {
        let r = chi_square_two_sample(&[1000], &[1000]);
        assert_eq!(r.df, 0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn z_tests_equal_inputs() {
        let m = histogram_moments(&[10, 20, 10]);
        assert_eq!(z_test_means(&m, &m).p_value, 1.0);
        assert_eq!(z_test_variances(&m, &m).p_value, 1.0);
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
    }
}
