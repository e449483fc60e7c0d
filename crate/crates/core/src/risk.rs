//! Surplus process `U(t) = u + ct − Σ_{i ≤ M(t)} Zᵢ` with claim arrivals
//! driven by the `α = 1` counting process. A jump of size `j` brings `j`
//! independent claims, so the expected outflow rate is `μ Σ jλⱼ`.
//!
//! With `H(x) = Λ⁻¹ Σⱼ λⱼ F^{*j}(x)`, the probability of ruin with deficit at
//! most `y` from zero capital is `G(0, y) = (Λ/c) ∫₀ʸ (1 − H(u)) du`, and
//! `ψ(0) = G(0, ∞) = μ Σ jλⱼ / c`.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::gcp::gcp_sample_path;
use crate::mc::{run_chunked, DEFAULT_CHUNKS};
use crate::params::GfcpParams;
use crate::quad::{integrate_with_breaks, QuadTolerance};

/// Claim size law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClaimDistribution {
    Exponential { mean: f64 },
    Deterministic { value: f64 },
    /// Resampled uniformly from the listed sizes.
    Empirical { values: Vec<f64> },
}

impl ClaimDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            ClaimDistribution::Exponential { mean } => positive("mean", *mean),
            ClaimDistribution::Deterministic { value } => positive("value", *value),
            ClaimDistribution::Empirical { values } => {
                if values.is_empty() {
                    return Err(Error::validation("values", "empirical claim list is empty"));
                }
                for (i, v) in values.iter().enumerate() {
                    positive(&format!("values[{i}]"), *v)?;
                }
                Ok(())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ClaimDistribution::Exponential { mean } => *mean,
            ClaimDistribution::Deterministic { value } => *value,
            ClaimDistribution::Empirical { values } => values.iter().sum::<f64>() / values.len() as f64,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ClaimDistribution::Exponential { mean } => Exp::new(1.0 / mean).expect("positive mean").sample(rng),
            ClaimDistribution::Deterministic { value } => *value,
            ClaimDistribution::Empirical { values } => values[rng.random_range(0..values.len())],
        }
    }

    /// `F^{*j}(x)`: Erlang(j) for exponential claims, a unit step at `jμ`
    /// for deterministic ones.
    pub fn convolution_cdf(&self, j: usize, x: f64) -> Result<f64> {
        if let ClaimDistribution::Empirical { .. } = self {
            return Err(Error::UnsupportedDist("empirical claims have no analytic convolution; use Monte Carlo".into()));
        }
        if x <= 0.0 {
            return Ok(0.0);
        }
        match self {
            ClaimDistribution::Exponential { mean } => Ok(gamma_lr(j as f64, x / mean)),
            ClaimDistribution::Deterministic { value } => Ok(if x >= j as f64 * value { 1.0 } else { 0.0 }),
            ClaimDistribution::Empirical { .. } => unreachable!(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be positive and finite, got {v}")))
    }
}

/// Premium rate, claim law and claim-arrival process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskModel {
    gcp: GfcpParams,
    premium: f64,
    claims: ClaimDistribution,
    initial_capital: f64,
    horizon: f64,
}

impl RiskModel {
    /// Builds a model with the default Monte Carlo horizon
    /// `max(10³/Λ, 10³ μ/(c − μΣjλⱼ))` (the first term alone when the loading
    /// is not positive).
    pub fn new(gcp: GfcpParams, premium: f64, claims: ClaimDistribution, initial_capital: f64) -> Result<Self> {
        let mut m = Self { gcp, premium, claims, initial_capital, horizon: 1.0 };
        m.validate()?;
        m.horizon = m.default_horizon();
        Ok(m)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        positive("horizon", horizon)?;
        self.horizon = horizon;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !self.gcp.is_alpha_one() {
            return Err(Error::validation("alpha", "the risk model uses the alpha = 1 process"));
        }
        positive("c", self.premium)?;
        self.claims.validate()?;
        if !(self.initial_capital >= 0.0 && self.initial_capital.is_finite()) {
            return Err(Error::validation("u", format!("must be non-negative, got {}", self.initial_capital)));
        }
        Ok(())
    }

    pub fn default_horizon(&self) -> f64 {
        let base = 1e3 / self.gcp.lambda_sum();
        let margin = self.premium - self.outflow_rate();
        if margin > 0.0 {
            base.max(1e3 * self.claims.mean() / margin)
        } else {
            base
        }
    }

    pub fn gcp(&self) -> &GfcpParams {
        &self.gcp
    }

    pub fn premium(&self) -> f64 {
        self.premium
    }

    pub fn claims(&self) -> &ClaimDistribution {
        &self.claims
    }

    pub fn initial_capital(&self) -> f64 {
        self.initial_capital
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `μ Σ jλⱼ`.
    pub fn outflow_rate(&self) -> f64 {
        self.claims.mean() * self.gcp.first_moment_rate()
    }

    pub fn has_positive_loading(&self) -> bool {
        self.premium > self.outflow_rate()
    }
}

/// `η = c/(μ Σ jλⱼ) − 1`.
pub fn safety_loading(m: &RiskModel) -> f64 {
    m.premium / m.outflow_rate() - 1.0
}

/// `H(x) = Λ⁻¹ Σⱼ λⱼ F^{*j}(x)`.
pub fn mixture_h(m: &RiskModel, x: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (j, l) in m.gcp.levy_atoms() {
        acc += l * m.claims.convolution_cdf(j, x)?;
    }
    Ok((acc / m.gcp.lambda_sum()).clamp(0.0, 1.0))
}

/// `G(0, y) = (Λ/c) ∫₀ʸ (1 − H(u)) du`.
pub fn g_zero(m: &RiskModel, y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::Domain(format!("deficit bound must be non-negative, got {y}")));
    }
    // surface UnsupportedDist before integrating
    mixture_h(m, 0.0)?;
    if y == 0.0 {
        return Ok(0.0);
    }
    let breaks: Vec<f64> = match &m.claims {
        ClaimDistribution::Deterministic { value } => m.gcp.levy_atoms().iter().map(|(j, _)| *j as f64 * value).collect(),
        _ => Vec::new(),
    };
    let tol = QuadTolerance { abs_tol: 1e-10, rel_tol: 1e-13, max_intervals: 4000 };
    let r = integrate_with_breaks(|u| 1.0 - mixture_h(m, u).unwrap_or(f64::NAN), 0.0, y, &breaks, tol)?;
    Ok(m.gcp.lambda_sum() / m.premium * r.value)
}

/// `ψ(0) = μ Σ jλⱼ / c`, clamped to 1 (with a warning) without positive loading.
pub fn psi_zero(m: &RiskModel) -> f64 {
    let v = m.outflow_rate() / m.premium;
    if v >= 1.0 {
        log::warn!("safety loading is not positive (psi(0) formula gives {v}); ruin is certain, returning 1");
        1.0
    } else {
        v
    }
}

/// Outcome of one simulated surplus path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuinSample {
    pub ruined: bool,
    pub ruin_time: Option<f64>,
    /// `|U(τ)|`.
    pub deficit: Option<f64>,
}

/// Surplus right after one claim epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurplusEvent {
    pub time: f64,
    pub claims: u32,
    pub claim_total: f64,
    pub cumulative_claims: f64,
    pub surplus: f64,
}

/// Simulates the surplus up to the model horizon or ruin, recording each
/// claim epoch.
pub fn simulate_surplus_trace<R: Rng + ?Sized>(m: &RiskModel, rng: &mut R) -> Result<(RuinSample, Vec<SurplusEvent>)> {
    let path = gcp_sample_path(&m.gcp, m.horizon, rng)?;
    let mut trace = Vec::with_capacity(path.events().len());
    let mut cumulative = 0.0;
    for e in path.events() {
        let claim_total: f64 = (0..e.jump).map(|_| m.claims.sample(rng)).sum();
        cumulative += claim_total;
        let surplus = m.initial_capital + m.premium * e.time - cumulative;
        trace.push(SurplusEvent { time: e.time, claims: e.jump, claim_total, cumulative_claims: cumulative, surplus });
        if surplus < 0.0 {
            return Ok((RuinSample { ruined: true, ruin_time: Some(e.time), deficit: Some(-surplus) }, trace));
        }
    }
    Ok((RuinSample { ruined: false, ruin_time: None, deficit: None }, trace))
}

/// Simulates one surplus path up to the model horizon or ruin.
pub fn simulate_surplus<R: Rng + ?Sized>(m: &RiskModel, rng: &mut R) -> Result<RuinSample> {
    simulate_surplus_trace(m, rng).map(|(s, _)| s)
}

/// Monte Carlo estimate of `Pr{τ ≤ T, D ≤ y}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuinEstimate {
    /// `None` for `y = ∞`.
    pub y: Option<f64>,
    pub estimate: f64,
    pub se: f64,
}

/// Estimates `G(u, y)` for each `y` (`None` meaning `ψ(u)`) from one set of
/// paths. The horizon is finite, so the estimates are biased low relative to
/// the infinite-horizon quantities.
pub fn ruin_mc(m: &RiskModel, ys: &[Option<f64>], n_paths: usize, seed: u64) -> Result<Vec<RuinEstimate>> {
    if n_paths < 1000 {
        return Err(Error::validation("paths", format!("need at least 1000 paths, got {n_paths}")));
    }
    let parts = run_chunked(n_paths, seed, DEFAULT_CHUNKS, |rng, count| {
        let mut hits = vec![0u64; ys.len()];
        for _ in 0..count {
            let s = simulate_surplus(m, rng)?;
            if let Some(d) = s.deficit {
                for (h, y) in hits.iter_mut().zip(ys) {
                    if y.is_none_or(|y| d <= y) {
                        *h += 1;
                    }
                }
            }
        }
        Ok::<_, Error>(hits)
    });
    let mut hits = vec![0u64; ys.len()];
    for part in parts {
        for (h, v) in hits.iter_mut().zip(part?) {
            *h += v;
        }
    }
    let n = n_paths as f64;
    Ok(ys
        .iter()
        .zip(hits)
        .map(|(&y, h)| {
            let p = h as f64 / n;
            RuinEstimate { y, estimate: p, se: (p * (1.0 - p) / n).sqrt() }
        })
        .collect())
}
