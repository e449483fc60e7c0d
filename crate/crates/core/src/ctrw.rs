//! Scaled continuous-time random walk whose single-time law converges to
//! that of the fractional counting process.
//!
//! Waiting times are Pareto, `Pr{W > w} = w^{−α}` for `w ≥ 1`. With
//! `b_n = (nΓ(1−α))^{−1/α}` the sums `b_n(W₁+…+W_n)` tend to `D(1)` with
//! Laplace transform `e^{−sᵅ}`, and `b̃(c) = cᵅ/Γ(1−α)` is the matching
//! inverse scale, so `R(ct)/b̃(c) → Y(t)` for the renewal count `R`. The walk
//! keeps each of `⌊Λ R(ct)⌋` jumps independently with probability
//! `p = 1/b̃(c)`, which turns the count into a Poisson one in the limit.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gfcp::pmf_table;
use crate::mc::{collect_samples, try_collect_samples, tv_vs_exact, CountHistogram, MeanVar};
use crate::params::GfcpParams;
use crate::specfun::gamma;

/// Default ceiling on the renewal count of one sample.
pub const DEFAULT_MAX_RENEWALS: u64 = 100_000_000;

/// Validated walk configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CtrwConfig {
    params: GfcpParams,
    c: f64,
    b_tilde: f64,
    keep_prob: f64,
    max_renewals: u64,
}

impl CtrwConfig {
    pub fn new(params: GfcpParams, c: f64) -> Result<Self> {
        Self::with_budget(params, c, DEFAULT_MAX_RENEWALS)
    }

    pub fn with_budget(params: GfcpParams, c: f64, max_renewals: u64) -> Result<Self> {
        let a = params.alpha();
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::validation("alpha", format!("the walk needs 0 < alpha < 1, got {a}")));
        }
        if !(c >= 1.0 && c.is_finite()) {
            return Err(Error::validation("c", format!("must be finite and at least 1, got {c}")));
        }
        let b_tilde = b_tilde(a, c);
        let keep_prob = 1.0 / b_tilde;
        if keep_prob > 1.0 {
            return Err(Error::validation(
                "c",
                format!("thinning probability 1/b̃(c) = {keep_prob} exceeds 1; increase c"),
            ));
        }
        Ok(Self { params, c, b_tilde, keep_prob, max_renewals })
    }

    pub fn params(&self) -> &GfcpParams {
        &self.params
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn b_tilde(&self) -> f64 {
        self.b_tilde
    }

    /// `p = 1/b̃(c)`.
    pub fn keep_prob(&self) -> f64 {
        self.keep_prob
    }
}

/// `b_n = (nΓ(1−α))^{−1/α}`.
pub fn b_n(alpha: f64, n: u64) -> f64 {
    (n as f64 * gamma(1.0 - alpha)).powf(-1.0 / alpha)
}

/// `b̃(c) = cᵅ/Γ(1−α)`.
pub fn b_tilde(alpha: f64, c: f64) -> f64 {
    c.powf(alpha) / gamma(1.0 - alpha)
}

/// `c` at which `b̃(c) = 1`, i.e. no thinning.
pub fn unit_thinning_scale(alpha: f64) -> f64 {
    gamma(1.0 - alpha).powf(1.0 / alpha)
}

/// Pareto waiting time `U^{−1/α} ≥ 1`.
pub fn pareto_wait<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    // 1 − U lies in (0, 1], so the power is finite
    let u = 1.0 - rng.random::<f64>();
    u.powf(-1.0 / alpha)
}

/// `R(x) = max{n : W₁+…+W_n ≤ x}`.
pub fn renewal_count<R: Rng + ?Sized>(alpha: f64, x: f64, cap: u64, rng: &mut R) -> Result<u64> {
    let mut total = 0.0;
    let mut n = 0u64;
    loop {
        total += pareto_wait(alpha, rng);
        if total > x {
            return Ok(n);
        }
        n += 1;
        if n > cap {
            return Err(Error::Budget(format!("renewal count exceeded {cap} before reaching {x}")));
        }
    }
}

/// One draw of `Σ_{i ≤ ⌊Λ R(ct)⌋} XᵢVᵢ`.
pub fn ctrw_sample<R: Rng + ?Sized>(cfg: &CtrwConfig, t: f64, rng: &mut R) -> Result<u64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let p = &cfg.params;
    let r = renewal_count(p.alpha(), cfg.c * t, cfg.max_renewals, rng)?;
    let n = (p.lambda_sum() * r as f64).floor() as u64;
    let jumps = p.jump_distribution();
    let mut total = 0u64;
    for _ in 0..n {
        let x = jumps.sample(rng);
        if rng.random::<f64>() < cfg.keep_prob {
            total += u64::from(x);
        }
    }
    Ok(total)
}

/// One row of the convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub c: f64,
    pub tv: f64,
    pub tv_se: f64,
    pub sup_gap: f64,
}

/// Empirical CTRW pmf against the exact pmf on `0..=n_max` (plus the tail
/// as one bin), for each `c`. Each `c` uses its own seed derived from `seed`.
pub fn convergence_report(
    params: &GfcpParams,
    c_grid: &[f64],
    t: f64,
    n_samples: usize,
    n_max: usize,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    if n_samples < 10_000 {
        return Err(Error::validation("n_samples", format!("need at least 10000 samples, got {n_samples}")));
    }
    let exact = pmf_table(params, n_max, t)?;
    c_grid
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let cfg = CtrwConfig::new(params.clone(), c)?;
            let draws = try_collect_samples(n_samples, seed.wrapping_add(i as u64), |rng| ctrw_sample(&cfg, t, rng))?;
            let h = CountHistogram::from_values(n_max, draws);
            let tv = tv_vs_exact(&h, &exact);
            Ok(ConvergenceRow { c, tv: tv.tv, tv_se: tv.se, sup_gap: tv.sup_gap })
        })
        .collect()
}

/// Monte Carlo `E[e^{−s b_n(W₁+…+W_n)}]` with its standard error, one entry
/// per `s`; the limit is `e^{−sᵅ}`.
pub fn normalization_laplace(alpha: f64, n: u64, s_values: &[f64], samples: usize, seed: u64) -> Vec<(f64, f64)> {
    let bn = b_n(alpha, n);
    let sums = collect_samples(samples, seed, |rng| bn * (0..n).map(|_| pareto_wait(alpha, rng)).sum::<f64>());
    s_values
        .iter()
        .map(|&s| {
            let acc: MeanVar = sums.iter().map(|x| (-s * x).exp()).collect();
            (acc.mean(), acc.std_error())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::stream;

    fn cfg(c: f64) -> CtrwConfig {
        CtrwConfig::new(GfcpParams::new(0.5, vec![1.0]).unwrap(), c).unwrap()
    }

    #[test]
    fn short_time_is_zero() {
        let c = cfg(100.0);
        let mut rng = stream(1, 0);
        for _ in 0..100 {
            assert_eq!(ctrw_sample(&c, 0.5 / 100.0, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn unit_thinning() {
        let a = 0.5;
        let c0 = unit_thinning_scale(a);
        assert!((b_tilde(a, c0) - 1.0).abs() < 1e-14);
        let c = CtrwConfig::new(GfcpParams::new(a, vec![1.0]).unwrap(), c0 * (1.0 + 1e-12)).unwrap();
        assert!(c.keep_prob() <= 1.0 && c.keep_prob() > 1.0 - 1e-11);
    }

    #[test]
    fn rejects_bad_config() {
        let p = GfcpParams::new(0.5, vec![1.0]).unwrap();
        assert!(CtrwConfig::new(p.clone(), 0.5).is_err());
        assert!(CtrwConfig::new(p, 1.5).is_err());
        let q = GfcpParams::new(1.0, vec![1.0]).unwrap();
        assert!(CtrwConfig::new(q, 100.0).is_err());
    }

    #[test]
    fn budget_enforced() {
        let c = CtrwConfig::with_budget(GfcpParams::new(0.5, vec![1.0]).unwrap(), 1e6, 10).unwrap();
        assert!(matches!(ctrw_sample(&c, 1.0, &mut stream(2, 0)), Err(Error::Budget(_))));
    }

    #[test]
    fn pareto_tail() {
        let mut rng = stream(3, 0);
        let n = 200_000;
        let above = (0..n).filter(|_| pareto_wait(0.5, &mut rng) > 4.0).count() as f64 / n as f64;
        // Pr{W > 4} = 1/2
        assert!((above - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }
}
