//! Random streams, a deterministic parallel Monte Carlo driver and the
//! summary statistics used by the samplers' checks.
//!
//! Stream `i` of a run with master seed `m` is a ChaCha8 generator keyed by
//! `splitmix64(m, i)`. Work is split into a fixed number of chunks that does
//! not depend on the thread count, and chunk results are merged in chunk
//! order, so output is identical for any degree of parallelism.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Generator type used throughout the crate.
pub type McRng = ChaCha8Rng;

/// Chunks per Monte Carlo run.
pub const DEFAULT_CHUNKS: usize = 64;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for worker `index` under `master`.
pub fn stream(master: u64, index: u64) -> McRng {
    let mut state = splitmix64(master) ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d));
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    McRng::from_seed(seed)
}

/// Splits `n` samples into `chunks` contiguous blocks and runs `work(rng,
/// count)` on each with its own stream. Results come back in chunk order.
pub fn run_chunked<A, F>(n: usize, master: u64, chunks: usize, work: F) -> Vec<A>
where
    A: Send,
    F: Fn(&mut McRng, usize) -> A + Sync,
{
    let chunks = chunks.max(1);
    let base = n / chunks;
    let extra = n % chunks;
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = base + usize::from(c < extra);
            let mut rng = stream(master, c as u64);
            work(&mut rng, count)
        })
        .collect()
}

/// Runs `sample` `n` times across [`DEFAULT_CHUNKS`] streams and returns the
/// draws in a fixed order.
pub fn collect_samples<T, F>(n: usize, master: u64, sample: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut McRng) -> T + Sync,
{
    run_chunked(n, master, DEFAULT_CHUNKS, |rng, count| (0..count).map(|_| sample(rng)).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect()
}

/// Like [`collect_samples`] for fallible draws; the first error in chunk
/// order wins.
pub fn try_collect_samples<T, F>(n: usize, master: u64, sample: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut McRng) -> Result<T> + Sync,
{
    let parts = run_chunked(n, master, DEFAULT_CHUNKS, |rng, count| {
        (0..count).map(|_| sample(rng)).collect::<Result<Vec<_>>>()
    });
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Streaming mean and variance (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanVar {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for MeanVar {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = MeanVar::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Sample covariance and correlation of paired draws, with a delta-method
/// standard error for the correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub n: usize,
    pub cov: f64,
    pub corr: f64,
    pub corr_se: f64,
}

pub fn pair_stats(x: &[f64], y: &[f64]) -> PairStats {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let cov = sxy / (nf - 1.0);
    let corr = sxy / (sxx * syy).sqrt();
    // asymptotic variance of the sample correlation for general distributions
    let (sx, sy) = ((sxx / nf).sqrt(), (syy / nf).sqrt());
    let (mut m22, mut m40, mut m04, mut m31, mut m13) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let u = (a - mx) / sx;
        let v = (b - my) / sy;
        m22 += u * u * v * v;
        m40 += u.powi(4);
        m04 += v.powi(4);
        m31 += u.powi(3) * v;
        m13 += u * v.powi(3);
    }
    let (m22, m40, m04, m31, m13) = (m22 / nf, m40 / nf, m04 / nf, m31 / nf, m13 / nf);
    let r = corr;
    let avar = (1.0 + r * r / 2.0) * m22 + r * r / 4.0 * (m40 + m04) - r * (m31 + m13);
    PairStats { n, cov, corr, corr_se: (avar.max(0.0) / nf).sqrt() }
}

/// Empirical pmf on `0..=max`, with everything above `max` pooled in an
/// overflow bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CountHistogram {
    counts: Vec<u64>,
    overflow: u64,
    total: u64,
}

impl CountHistogram {
    pub fn new(max: usize) -> Self {
        Self { counts: vec![0; max + 1], overflow: 0, total: 0 }
    }

    pub fn from_values<I: IntoIterator<Item = u64>>(max: usize, values: I) -> Self {
        let mut h = Self::new(max);
        for v in values {
            h.push(v);
        }
        h
    }

    pub fn push(&mut self, v: u64) {
        self.total += 1;
        match self.counts.get_mut(v as usize) {
            Some(c) => *c += 1,
            None => self.overflow += 1,
        }
    }

    /// Adds the counts of a histogram over the same bins.
    pub fn merge(&mut self, other: &CountHistogram) {
        assert_eq!(self.max(), other.max(), "histograms must share bins");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn max(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    /// Relative frequencies of `0..=max` followed by the overflow bin.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total.max(1) as f64;
        self.counts.iter().chain(std::iter::once(&self.overflow)).map(|&c| c as f64 / n).collect()
    }
}

/// Total-variation distance with a linearized standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvEstimate {
    pub tv: f64,
    pub se: f64,
    /// Largest pointwise gap over the bins.
    pub sup_gap: f64,
}

/// Appends the overflow mass `1 − Σ p` to an exact pmf on `0..=max`.
fn with_tail(exact: &[f64], max: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..=max).map(|n| exact.get(n).copied().unwrap_or(0.0)).collect();
    let s: f64 = p.iter().sum();
    p.push((1.0 - s).max(0.0));
    p
}

/// Half of `Var(g(X))/N` for `g = sign(diff)` under bin probabilities `q`.
fn sign_variance(diff: &[f64], q: &[f64]) -> f64 {
    let g = |d: f64| if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 };
    let m: f64 = diff.iter().zip(q).map(|(&d, &w)| g(d) * w).sum();
    let m2: f64 = diff.iter().zip(q).map(|(&d, &w)| g(d) * g(d) * w).sum();
    (m2 - m * m).max(0.0)
}

/// TV between an empirical histogram and an exact pmf (`exact[n] = Pr{N=n}`),
/// where the overflow bin is compared with the exact tail mass beyond `max`.
pub fn tv_vs_exact(h: &CountHistogram, exact: &[f64]) -> TvEstimate {
    let emp = h.frequencies();
    let p = with_tail(exact, h.max());
    let diff: Vec<f64> = emp.iter().zip(&p).map(|(a, b)| a - b).collect();
    let tv = 0.5 * diff.iter().map(|d| d.abs()).sum::<f64>();
    let sup_gap = diff.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let se = 0.5 * (sign_variance(&diff, &emp) / h.total().max(1) as f64).sqrt();
    TvEstimate { tv, se, sup_gap }
}

/// TV between two empirical histograms over the same bins.
pub fn tv_two_sample(a: &CountHistogram, b: &CountHistogram) -> TvEstimate {
    assert_eq!(a.max(), b.max(), "histograms must share bins");
    let fa = a.frequencies();
    let fb = b.frequencies();
    let diff: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| x - y).collect();
    let tv = 0.5 * diff.iter().map(|d| d.abs()).sum::<f64>();
    let sup_gap = diff.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let var = sign_variance(&diff, &fa) / a.total().max(1) as f64 + sign_variance(&diff, &fb) / b.total().max(1) as f64;
    TvEstimate { tv, se: 0.5 * var.sqrt(), sup_gap }
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F₁ − F₂|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample KS statistic at level 1%.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.6276 * ((n + m) / (n * m)).sqrt()
}

/// Ordinary least squares `y = a + b x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit(format!("need at least two paired points, got {} and {}", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(LinearFit { intercept, slope, rms_residual: (rss / n).sqrt() })
}

/// `n` points spaced evenly in log between `lo` and `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 3), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 3), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 4), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn chunked_output_independent_of_pool_size() {
        let run = || collect_samples(1000, 42, |r| r.random::<f64>());
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
        assert_eq!(one, four);
        assert_eq!(one.len(), 1000);
    }

    #[test]
    fn welford_merge_matches_direct() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let all: MeanVar = xs.iter().copied().collect();
        let mut left: MeanVar = xs[..30].iter().copied().collect();
        left.merge(&xs[30..].iter().copied().collect());
        assert!((all.mean() - left.mean()).abs() < 1e-15);
        assert!((all.variance() - left.variance()).abs() < 1e-14);
        let mean = xs.iter().sum::<f64>() / 100.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 99.0;
        assert!((all.variance() - var).abs() < 1e-14);
    }

    #[test]
    fn tv_of_identical_is_zero() {
        let h = CountHistogram::from_values(3, [0, 1, 1, 2]);
        let t = tv_vs_exact(&h, &[0.25, 0.5, 0.25]);
        assert!(t.tv.abs() < 1e-15);
        let t = tv_vs_exact(&h, &[0.5, 0.5]);
        assert!((t.tv - 0.25).abs() < 1e-15);
        assert!((t.sup_gap - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ks_statistic() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 2.0 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-14 && (f.intercept - 1.5).abs() < 1e-14);
        let g = log_space(1e2, 1e4, 20);
        assert_eq!((g[0], g[19], g.len()), (1e2, 1e4, 20));
    }

    #[test]
    fn correlation_of_linear_pair() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        let p = pair_stats(&x, &y);
        assert!((p.corr - 1.0).abs() < 1e-12);
    }
}
