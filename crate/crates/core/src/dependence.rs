//! Long-range dependence of `M` and short-range dependence of its
//! increments `Z_h(t) = M(t+h) − M(t)`: exact correlations, their
//! asymptotes, Monte Carlo estimates and fitted decay exponents.
//!
//! Differences of covariances at large `t` cancel to many digits, so the
//! exact increment quantities are not formed by subtraction. Writing
//! `F(α; s, t) = Σ_{n≥1} cₙ s^{α+n} t^{α−n}` turns the four-term increment
//! covariance into `S² Σ cₙ Δₛ(s^{α+n}) Δₜ(t^{α−n})`, and the increment
//! variance reduces to
//!
//! ```text
//! Var Z_h(t) = T Δ + S² (2α (t+h)^{2α} B(α+1, α; h/(t+h)) − Δ²),   Δ = (t+h)ᵅ − tᵅ.
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gfcp::{correlation, covariance, default_x_step, mean_var, sample, SampleMethod};
use crate::mc::{log_space, pair_stats, run_chunked, linear_fit, DEFAULT_CHUNKS};
use crate::params::GfcpParams;
use crate::specfun::{beta_fn, gamma, incomplete_beta};
use crate::subordinator::{cross_term_coefficients, SERIES_RATIO};

/// Exact increment covariance with the large-`t` asymptote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementCov {
    pub exact: f64,
    /// `α²h(1−α)/(α+1) · ((s+h)^{α+1} − s^{α+1}) S² t^{α−2}`.
    pub asymptote: f64,
}

/// Exact increment variance with two large-`t` forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementVar {
    pub exact: f64,
    /// `αhT t^{α−1}`, which keeps only the `T` part of the leading order.
    pub asymptote: f64,
    /// `(αhT + 2α h^{α+1} S²/(α+1)) t^{α−1}`, the complete leading order.
    pub leading_order: f64,
}

fn check_increment(s: f64, t: f64, h: f64) -> Result<()> {
    if !(s > 0.0 && h > 0.0 && s.is_finite() && h.is_finite() && t.is_finite()) {
        return Err(Error::Domain(format!("need s > 0 and h > 0, got s={s}, h={h}")));
    }
    if s + h > t {
        return Err(Error::Domain(format!("increment covariance requires s + h <= t, got s={s}, h={h}, t={t}")));
    }
    Ok(())
}

/// `Cov(Z_h(s), Z_h(t))` from four process covariances, without the
/// cancellation-free rearrangement.
pub fn increment_cov_direct(p: &GfcpParams, s: f64, t: f64, h: f64) -> Result<f64> {
    check_increment(s, t, h)?;
    Ok(covariance(p, s + h, t + h)? + covariance(p, s, t)? - covariance(p, s + h, t)? - covariance(p, s, t + h)?)
}

/// `Σ cₙ ((s+h)^{α+n} − s^{α+n})((t+h)^{α−n} − t^{α−n})` for `(s+h)/t ≤ 1/2`.
fn cross_term_second_difference(alpha: f64, s: f64, t: f64, h: f64) -> f64 {
    let sh = s + h;
    let x = sh / t;
    let ln_u = (s / sh).ln();
    let ln_v = (h / t).ln_1p();
    let scale = (sh * t).powf(alpha);
    let mut sum = 0.0;
    let mut xn = 1.0;
    for (n, c) in cross_term_coefficients(alpha) {
        let nf = n as f64;
        xn *= x;
        let ds = -((alpha + nf) * ln_u).exp_m1();
        let dt = ((alpha - nf) * ln_v).exp_m1();
        let term = c * xn * ds * dt;
        sum += term;
        if n > 2 && term.abs() <= 1e-17 * sum.abs() || n > 200 {
            break;
        }
    }
    scale * sum
}

/// `Cov(Z_h(s), Z_h(t))` for `0 < s`, `s + h ≤ t`.
pub fn increment_cov(p: &GfcpParams, s: f64, t: f64, h: f64) -> Result<IncrementCov> {
    check_increment(s, t, h)?;
    let a = p.alpha();
    let s2 = p.s() * p.s();
    let asymptote =
        a * a * h * (1.0 - a) / (a + 1.0) * ((s + h).powf(a + 1.0) - s.powf(a + 1.0)) * s2 * t.powf(a - 2.0);
    let exact = if p.is_alpha_one() {
        0.0
    } else if (s + h) / t <= SERIES_RATIO {
        s2 * cross_term_second_difference(a, s, t, h)
    } else {
        increment_cov_direct(p, s, t, h)?
    };
    Ok(IncrementCov { exact, asymptote })
}

/// `Var Z_h(t)` from process variances and one covariance, without the
/// rearrangement.
pub fn increment_var_direct(p: &GfcpParams, t: f64, h: f64) -> Result<f64> {
    let (_, v1) = mean_var(p, t + h);
    let (_, v0) = mean_var(p, t);
    Ok(v1 + v0 - 2.0 * covariance(p, t, t + h)?)
}

/// `Var Z_h(t)` for `t > 0`, `h > 0`.
pub fn increment_var(p: &GfcpParams, t: f64, h: f64) -> Result<IncrementVar> {
    if !(t > 0.0 && h > 0.0 && t.is_finite() && h.is_finite()) {
        return Err(Error::Domain(format!("need t > 0 and h > 0, got t={t}, h={h}")));
    }
    let a = p.alpha();
    let s2 = p.s() * p.s();
    let asymptote = a * h * p.t() * t.powf(a - 1.0);
    let leading_order = (a * h * p.t() + 2.0 * a * h.powf(a + 1.0) * s2 / (a + 1.0)) * t.powf(a - 1.0);
    let exact = if p.is_alpha_one() {
        p.second_moment_rate() * h
    } else {
        let d = t.powf(a) * (a * (h / t).ln_1p()).exp_m1();
        let th = t + h;
        let tail = incomplete_beta(a + 1.0, a, h / th)?;
        p.t() * d + s2 * (2.0 * a * th.powf(2.0 * a) * tail - d * d)
    };
    Ok(IncrementVar { exact, asymptote, leading_order })
}

/// `Corr(Z_h(s), Z_h(t))`.
pub fn increment_correlation(p: &GfcpParams, s: f64, t: f64, h: f64) -> Result<f64> {
    let c = increment_cov(p, s, t, h)?.exact;
    let vs = increment_var(p, s, h)?.exact;
    let vt = increment_var(p, t, h)?.exact;
    Ok(c / (vs * vt).sqrt())
}

/// Prefactor of `Corr(M(s), M(t)) ~ c₀(s) t^{−α}`, evaluated as
/// `(Γ(2α+1) T sᵅ + (Σjλⱼ)² s^{2α}) / (Γ(2α+1) √(Var M(s) · R))`.
pub fn c0(p: &GfcpParams, s: f64) -> f64 {
    let a = p.alpha();
    let g = gamma(2.0 * a + 1.0);
    let m1 = p.first_moment_rate();
    let (_, v) = mean_var(p, s);
    (g * p.t() * s.powf(a) + m1 * m1 * s.powf(2.0 * a)) / (g * (v * p.r()).sqrt())
}

/// Prefactor of `Corr(Z_h(s), Z_h(t)) ~ c₁(s) t^{−(3−α)/2}`, evaluated as
/// `α²h(1−α)((s+h)^{α+1} − s^{α+1}) S² / ((α+1) √(Var Z_h(s)) √(αhT))`.
pub fn c1(p: &GfcpParams, s: f64, h: f64) -> Result<f64> {
    let a = p.alpha();
    let vz = increment_var(p, s, h)?.exact;
    Ok(a * a * h * (1.0 - a) * ((s + h).powf(a + 1.0) - s.powf(a + 1.0)) * p.s() * p.s()
        / ((a + 1.0) * vz.sqrt() * (a * h * p.t()).sqrt()))
}

/// Dependence class from a decay exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DependenceClass {
    Lrd,
    Srd,
    Neither,
}

impl DependenceClass {
    pub fn of(theta: f64) -> Self {
        if theta > 0.0 && theta < 1.0 {
            DependenceClass::Lrd
        } else if theta > 1.0 && theta < 2.0 {
            DependenceClass::Srd
        } else {
            DependenceClass::Neither
        }
    }
}

/// Where the fitted correlations come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationSource {
    Exact,
    MonteCarlo { paths: usize, seed: u64, x_step: Option<f64> },
}

/// Correlation grid, fitted exponent and asymptotic prefactor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceReport {
    pub s: f64,
    /// Increment lag; 0 for the process itself.
    pub h: f64,
    pub t_grid: Vec<f64>,
    pub corr_exact: Vec<f64>,
    /// Monte Carlo correlations with standard errors, when requested.
    pub corr_mc: Option<Vec<(f64, f64)>>,
    pub fitted_theta: f64,
    pub fit_rms_residual: f64,
    pub target_theta: f64,
    /// `c₀(s)` for `h = 0`, `c₁(s)` otherwise.
    pub prefactor: f64,
    pub classification: DependenceClass,
}

/// The default fit grid: 20 log-spaced points over `t/s ∈ [10², 10⁴]`.
pub fn default_fit_grid(s: f64) -> Vec<f64> {
    log_space(1e2 * s, 1e4 * s, 20)
}

/// Exact correlation at each grid time: of `M` for `h = 0`, of `Z_h` otherwise.
pub fn exact_correlations(p: &GfcpParams, s: f64, h: f64, t_grid: &[f64]) -> Result<Vec<f64>> {
    t_grid
        .iter()
        .map(|&t| if h == 0.0 { correlation(p, s, t) } else { increment_correlation(p, s, t, h) })
        .collect()
}

/// Monte Carlo correlations from path-coupled samples of the time-changed
/// process, one inverse-subordinator path per sample.
pub fn mc_correlations(
    p: &GfcpParams,
    s: f64,
    h: f64,
    t_grid: &[f64],
    paths: usize,
    seed: u64,
    x_step: Option<f64>,
) -> Result<Vec<(f64, f64)>> {
    if paths < 3 {
        return Err(Error::validation("paths", "need at least 3 paths"));
    }
    let mut times: Vec<f64> = vec![s, s + h];
    for &t in t_grid {
        times.push(t);
        times.push(t + h);
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let idx = |x: f64| times.iter().position(|&v| v == x).expect("time on grid");
    let step = x_step.unwrap_or_else(|| default_x_step(p.alpha(), &times));
    let parts = run_chunked(paths, seed, DEFAULT_CHUNKS, |rng, count| {
        (0..count)
            .map(|_| sample(p, &times, SampleMethod::TimeChange, Some(step), rng))
            .collect::<Result<Vec<_>>>()
    });
    let mut rows = Vec::with_capacity(paths);
    for part in parts {
        rows.extend(part?);
    }
    let value = |row: &Vec<u64>, t: f64| -> f64 {
        if h == 0.0 {
            row[idx(t)] as f64
        } else {
            row[idx(t + h)] as f64 - row[idx(t)] as f64
        }
    };
    let x: Vec<f64> = rows.iter().map(|r| value(r, s)).collect();
    Ok(t_grid
        .iter()
        .map(|&t| {
            let y: Vec<f64> = rows.iter().map(|r| value(r, t)).collect();
            let st = pair_stats(&x, &y);
            (st.corr, st.corr_se)
        })
        .collect())
}

/// Fits `log Corr ~ log c − θ log t` over `t_grid` and reports it against the
/// theoretical exponent (`α` for `h = 0`, `(3−α)/2` for `h > 0`).
pub fn fit_decay_exponent(
    p: &GfcpParams,
    s: f64,
    h: f64,
    t_grid: &[f64],
    source: CorrelationSource,
) -> Result<DependenceReport> {
    if t_grid.len() < 2 {
        return Err(Error::Fit("need at least two grid points".into()));
    }
    if !(h >= 0.0) {
        return Err(Error::Domain(format!("lag must be non-negative, got {h}")));
    }
    let a = p.alpha();
    let corr_exact = exact_correlations(p, s, h, t_grid)?;
    let corr_mc = match source {
        CorrelationSource::Exact => None,
        CorrelationSource::MonteCarlo { paths, seed, x_step } => {
            Some(mc_correlations(p, s, h, t_grid, paths, seed, x_step)?)
        }
    };
    let fitted: Vec<f64> = match &corr_mc {
        None => corr_exact.clone(),
        Some(v) => v.iter().map(|(c, _)| *c).collect(),
    };
    if let Some((t, c)) = t_grid.iter().zip(&fitted).find(|(_, c)| !(**c > 0.0)) {
        return Err(Error::Fit(format!("correlation {c} at t = {t} is not positive; log-log fit undefined")));
    }
    let lx: Vec<f64> = t_grid.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = fitted.iter().map(|c| c.ln()).collect();
    let fit = linear_fit(&lx, &ly)?;
    let theta = -fit.slope;
    let (target_theta, prefactor) = if h == 0.0 { (a, c0(p, s)) } else { ((3.0 - a) / 2.0, c1(p, s, h)?) };
    Ok(DependenceReport {
        s,
        h,
        t_grid: t_grid.to_vec(),
        corr_exact,
        corr_mc,
        fitted_theta: theta,
        fit_rms_residual: fit.rms_residual,
        target_theta,
        prefactor,
        classification: DependenceClass::of(theta),
    })
}

/// `αB(α, α+1) = Γ(α+1)²/Γ(2α+1)`, exposed for consistency checks.
pub fn alpha_beta_identity(alpha: f64) -> (f64, f64) {
    let g = gamma(alpha + 1.0);
    (alpha * beta_fn(alpha, alpha + 1.0), g * g / gamma(2.0 * alpha + 1.0))
}
