//! Canonical parameterization of the counting process and the factories for
//! its named special cases.
//!
//! A parameter set is the fractional index `alpha ∈ (0, 1]` plus one rate per
//! jump size `1..=k`. Rates may be zero (which removes that jump size) as long
//! as their total `Λ` is positive. The moment constants
//!
//! ```text
//! S = Σ jλⱼ / Γ(α+1)
//! T = Σ j²λⱼ / Γ(α+1)
//! R = (2/Γ(2α+1) − 1/Γ(α+1)²) (Σ jλⱼ)²
//! ```
//!
//! are computed once at validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::gamma;

/// Default ceiling on the number of jump sizes produced by truncating an
/// infinite-support special case.
pub const DEFAULT_TRUNCATION_CAP: usize = 10_000;

/// Validated, immutable process parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GfcpParams {
    alpha: f64,
    lambdas: Vec<f64>,
    lambda_sum: f64,
    first_moment_rate: f64,
    second_moment_rate: f64,
    s: f64,
    r: f64,
    t: f64,
    discarded_mass: f64,
}

impl GfcpParams {
    /// Validates `alpha` and the rate vector and precomputes `Λ, S, R, T`.
    pub fn new(alpha: f64, lambdas: Vec<f64>) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
            return Err(Error::validation("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        if lambdas.is_empty() {
            return Err(Error::validation("lambdas", "at least one rate is required"));
        }
        for (i, &l) in lambdas.iter().enumerate() {
            if !l.is_finite() {
                return Err(Error::validation(format!("lambdas[{i}]"), format!("must be finite, got {l}")));
            }
            if l < 0.0 {
                return Err(Error::validation(format!("lambdas[{i}]"), format!("must be non-negative, got {l}")));
            }
        }
        let lambda_sum: f64 = lambdas.iter().sum();
        if lambda_sum <= 0.0 {
            return Err(Error::validation("lambdas", "all rates are zero"));
        }
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (j, &l) in (1..).zip(lambdas.iter()) {
            let jf = j as f64;
            m1 += jf * l;
            m2 += jf * jf * l;
        }
        let g1 = gamma(alpha + 1.0);
        let r = if alpha == 1.0 { 0.0 } else { (2.0 / gamma(2.0 * alpha + 1.0) - 1.0 / (g1 * g1)) * m1 * m1 };
        Ok(Self {
            alpha,
            lambdas,
            lambda_sum,
            first_moment_rate: m1,
            second_moment_rate: m2,
            s: m1 / g1,
            r,
            t: m2 / g1,
            discarded_mass: 0.0,
        })
    }

    /// Same rates with a different fractional index.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut p = Self::new(alpha, self.lambdas.clone())?;
        p.discarded_mass = self.discarded_mass;
        Ok(p)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Number of jump sizes `k`.
    pub fn order(&self) -> usize {
        self.lambdas.len()
    }

    /// `Λ = Σ λⱼ`.
    pub fn lambda_sum(&self) -> f64 {
        self.lambda_sum
    }

    /// `Σ j λⱼ`, the mean growth rate of the non-fractional process.
    pub fn first_moment_rate(&self) -> f64 {
        self.first_moment_rate
    }

    /// `Σ j² λⱼ`.
    pub fn second_moment_rate(&self) -> f64 {
        self.second_moment_rate
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Rate mass dropped when an infinite-support case was truncated (0 otherwise).
    pub fn discarded_mass(&self) -> f64 {
        self.discarded_mass
    }

    pub fn is_alpha_one(&self) -> bool {
        self.alpha == 1.0
    }

    /// Jump-size law `Pr{X = j} = λⱼ / Λ`.
    pub fn jump_distribution(&self) -> JumpDistribution {
        JumpDistribution::new(&self.lambdas, self.lambda_sum)
    }

    /// Lévy measure atoms `(j, λⱼ)` with non-zero mass.
    pub fn levy_atoms(&self) -> Vec<(usize, f64)> {
        (1..).zip(self.lambdas.iter().copied()).filter(|&(_, l)| l > 0.0).collect()
    }
}

/// Discrete law on `{1, ..., k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpDistribution {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl JumpDistribution {
    fn new(lambdas: &[f64], total: f64) -> Self {
        let k = lambdas.len();
        let mut probs: Vec<f64> = lambdas.iter().map(|l| l / total).collect();
        let partial: f64 = probs[..k - 1].iter().sum();
        probs[k - 1] = (1.0 - partial).max(0.0);
        let mut cdf = Vec::with_capacity(k);
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        cdf[k - 1] = 1.0;
        Self { probs, cdf }
    }

    /// `probs()[j-1] = Pr{X = j}`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Draws a jump size in `1..=k` by inversion.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u);
        let idx = idx.min(self.cdf.len() - 1);
        // skip zero-probability sizes that inversion could land on through ties
        let idx = if self.probs[idx] == 0.0 {
            self.probs[..idx].iter().rposition(|&p| p > 0.0).unwrap_or(idx)
        } else {
            idx
        };
        idx as u32 + 1
    }

    pub fn mean(&self) -> f64 {
        (1..).zip(self.probs.iter()).map(|(j, p)| j as f64 * p).sum()
    }
}

/// Named members of the family. Infinite-support cases carry a relative
/// tail tolerance used to truncate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", deny_unknown_fields)]
pub enum SpecialCase {
    /// Time-fractional Poisson process: a single jump size.
    #[serde(rename = "TFPP")]
    Tfpp { lambda: f64 },
    /// Poisson process of order k: `λⱼ = λ`.
    #[serde(rename = "PPoK")]
    PPoK { k: usize, lambda: f64 },
    /// Pólya–Aeppli process of order k: `λⱼ = λ(1−ρ)ρ^{j−1}/(1−ρᵏ)`.
    #[serde(rename = "PAPoK")]
    PAPoK { k: usize, lambda: f64, rho: f64 },
    /// Pólya–Aeppli process: `λⱼ = λ(1−ρ)ρ^{j−1}`, `j ≥ 1`.
    #[serde(rename = "PAP")]
    Pap {
        lambda: f64,
        rho: f64,
        #[serde(default = "default_tail_eps")]
        tail_eps: f64,
    },
    /// Negative binomial process: `λⱼ = (1−p)ʲ/j`, `Λ = ln(1/p)`.
    #[serde(rename = "NBP")]
    Nbp {
        p: f64,
        #[serde(default = "default_tail_eps")]
        tail_eps: f64,
    },
    /// Convoluted Poisson process: `λⱼ = βⱼ₋₁ − βⱼ` for a strictly decreasing
    /// positive sequence. `betas` lists β₀, β₁, …, β_m explicitly; beyond
    /// β_m the sequence continues geometrically, `βⱼ₊₁ = tail_ratio · βⱼ`.
    #[serde(rename = "CPP")]
    Cpp {
        betas: Vec<f64>,
        tail_ratio: f64,
        #[serde(default = "default_tail_eps")]
        tail_eps: f64,
    },
}

fn default_tail_eps() -> f64 {
    1e-12
}

fn check_rate(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be positive and finite, got {v}")))
    }
}

fn check_tail_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::validation("tail_eps", format!("must lie in (0, 1), got {eps}")))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::validation("rho", format!("must lie in [0, 1), got {rho}")))
    }
}

fn check_k(k: usize) -> Result<()> {
    if k >= 1 {
        Ok(())
    } else {
        Err(Error::validation("k", "must be at least 1"))
    }
}

impl SpecialCase {
    pub fn tag(&self) -> &'static str {
        match self {
            SpecialCase::Tfpp { .. } => "TFPP",
            SpecialCase::PPoK { .. } => "PPoK",
            SpecialCase::PAPoK { .. } => "PAPoK",
            SpecialCase::Pap { .. } => "PAP",
            SpecialCase::Nbp { .. } => "NBP",
            SpecialCase::Cpp { .. } => "CPP",
        }
    }

    /// Total rate of the untruncated process.
    pub fn limiting_lambda_sum(&self) -> f64 {
        match self {
            SpecialCase::Tfpp { lambda } | SpecialCase::PAPoK { lambda, .. } | SpecialCase::Pap { lambda, .. } => {
                *lambda
            }
            SpecialCase::PPoK { k, lambda } => *k as f64 * lambda,
            SpecialCase::Nbp { p, .. } => -p.ln(),
            SpecialCase::Cpp { betas, .. } => betas[0],
        }
    }

    pub fn to_params(&self, alpha: f64) -> Result<GfcpParams> {
        from_special_case_with_cap(self, alpha, DEFAULT_TRUNCATION_CAP)
    }
}

/// Validates a raw `(alpha, lambdas)` pair. Same as [`GfcpParams::new`].
pub fn validate(alpha: f64, lambdas: Vec<f64>) -> Result<GfcpParams> {
    GfcpParams::new(alpha, lambdas)
}

/// Builds parameters for a special case with the default truncation cap.
pub fn from_special_case(sc: &SpecialCase, alpha: f64) -> Result<GfcpParams> {
    from_special_case_with_cap(sc, alpha, DEFAULT_TRUNCATION_CAP)
}

/// Builds parameters for a special case. Infinite-support cases are cut at
/// the smallest `k*` whose tail rate `Σ_{j>k*} λⱼ` is at most
/// `tail_eps · Λ_∞`; the dropped rate is recorded in
/// [`GfcpParams::discarded_mass`].
pub fn from_special_case_with_cap(sc: &SpecialCase, alpha: f64, cap: usize) -> Result<GfcpParams> {
    let too_long = |k: usize| {
        Error::Truncation(format!("{} needs more than {cap} jump sizes (reached {k})", sc.tag()))
    };
    let (lambdas, discarded) = match sc {
        SpecialCase::Tfpp { lambda } => {
            check_rate("lambda", *lambda)?;
            (vec![*lambda], 0.0)
        }
        SpecialCase::PPoK { k, lambda } => {
            check_k(*k)?;
            check_rate("lambda", *lambda)?;
            (vec![*lambda; *k], 0.0)
        }
        SpecialCase::PAPoK { k, lambda, rho } => {
            check_k(*k)?;
            check_rate("lambda", *lambda)?;
            check_rho(*rho)?;
            let norm = 1.0 - rho.powi(*k as i32);
            let l = (0..*k).map(|j| lambda * ((1.0 - rho) * rho.powi(j as i32) / norm)).collect();
            (l, 0.0)
        }
        SpecialCase::Pap { lambda, rho, tail_eps } => {
            check_rate("lambda", *lambda)?;
            check_rho(*rho)?;
            check_tail_eps(*tail_eps)?;
            // tail beyond k* is λρ^{k*}
            let mut lambdas = Vec::new();
            let mut tail = *lambda;
            while tail > tail_eps * lambda {
                if lambdas.len() >= cap {
                    return Err(too_long(lambdas.len()));
                }
                lambdas.push(tail * (1.0 - rho));
                tail *= rho;
            }
            (lambdas, tail)
        }
        SpecialCase::Nbp { p, tail_eps } => {
            if !(*p > 0.0 && *p < 1.0) {
                return Err(Error::validation("p", format!("must lie in (0, 1), got {p}")));
            }
            check_tail_eps(*tail_eps)?;
            let q = 1.0 - p;
            let total = -p.ln();
            let mut lambdas = Vec::new();
            let mut pow = 1.0;
            loop {
                let j = lambdas.len() + 1;
                pow *= q;
                lambdas.push(pow / j as f64);
                // Σ_{i>j} qⁱ/i ≤ q^{j+1} / ((j+1) p)
                let bound = pow * q / ((j + 1) as f64 * p);
                if bound <= tail_eps * total {
                    break;
                }
                if lambdas.len() >= cap {
                    return Err(too_long(lambdas.len()));
                }
            }
            let kept: f64 = lambdas.iter().sum();
            (lambdas, (total - kept).max(0.0))
        }
        SpecialCase::Cpp { betas, tail_ratio, tail_eps } => {
            check_tail_eps(*tail_eps)?;
            if betas.is_empty() {
                return Err(Error::validation("betas", "at least β₀ is required"));
            }
            for (i, b) in betas.iter().enumerate() {
                check_rate(&format!("betas[{i}]"), *b)?;
            }
            if betas.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::validation("betas", "must be strictly decreasing"));
            }
            if !(*tail_ratio > 0.0 && *tail_ratio < 1.0) {
                return Err(Error::validation("tail_ratio", format!("must lie in (0, 1), got {tail_ratio}")));
            }
            // λⱼ = βⱼ₋₁ − βⱼ telescopes: Λ_∞ = β₀ and the tail beyond k* is β_{k*}
            let beta0 = betas[0];
            let mut lambdas = Vec::new();
            let mut prev = beta0;
            let mut j = 1;
            loop {
                let next = if j < betas.len() { betas[j] } else { prev * tail_ratio };
                lambdas.push(prev - next);
                prev = next;
                j += 1;
                if prev <= tail_eps * beta0 {
                    break;
                }
                if lambdas.len() >= cap {
                    return Err(too_long(lambdas.len()));
                }
            }
            (lambdas, prev)
        }
    };
    let mut p = GfcpParams::new(alpha, lambdas)?;
    p.discarded_mass = discarded;
    Ok(p)
}

/// JSON parameter document accepted by the command line:
/// `{"alpha": .., "lambdas": [..]}` or `{"alpha": .., "special_case": {"tag": .., ..}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamsSpec {
    Explicit {
        alpha: f64,
        lambdas: Vec<f64>,
    },
    Special {
        alpha: f64,
        special_case: SpecialCase,
    },
}

impl ParamsSpec {
    pub fn resolve(&self) -> Result<GfcpParams> {
        match self {
            ParamsSpec::Explicit { alpha, lambdas } => GfcpParams::new(*alpha, lambdas.clone()),
            ParamsSpec::Special { alpha, special_case } => from_special_case(special_case, *alpha),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation("params", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn poisson_constants() {
        let p = GfcpParams::new(1.0, vec![1.0]).unwrap();
        assert_eq!(p.lambda_sum(), 1.0);
        assert!((p.s() - 1.0).abs() < 1e-15);
        assert_eq!(p.r(), 0.0);
        assert!((p.t() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn half_alpha_two_rates() {
        let p = GfcpParams::new(0.5, vec![1.0, 1.0]).unwrap();
        let g = gamma(1.5);
        assert!((p.s() - 3.0 / g).abs() < 1e-14);
        assert!((p.t() - 5.0 / g).abs() < 1e-14);
        assert!((p.r() - (2.0 / gamma(2.0) - 1.0 / (g * g)) * 9.0).abs() < 1e-13);
        assert!(p.t() >= p.s());
    }

    #[test]
    fn rejects_bad_parameters() {
        let field = |r: Result<GfcpParams>| match r {
            Err(Error::Validation { field, .. }) => field,
            other => panic!("expected validation error, got {other:?}"),
        };
        assert_eq!(field(GfcpParams::new(0.0, vec![1.0])), "alpha");
        assert_eq!(field(GfcpParams::new(1.2, vec![1.0])), "alpha");
        assert_eq!(field(GfcpParams::new(0.5, vec![0.0, 0.0])), "lambdas");
        assert_eq!(field(GfcpParams::new(0.5, vec![])), "lambdas");
        assert_eq!(field(GfcpParams::new(0.5, vec![1.0, f64::NAN])), "lambdas[1]");
        assert_eq!(field(GfcpParams::new(0.5, vec![-1.0, 2.0])), "lambdas[0]");
    }

    #[test]
    fn ppok_rates() {
        let p = from_special_case(&SpecialCase::PPoK { k: 3, lambda: 2.0 }, 1.0).unwrap();
        assert_eq!(p.lambdas(), &[2.0, 2.0, 2.0]);
        assert_eq!(p.lambda_sum(), 6.0);
        let q = from_special_case(&SpecialCase::PPoK { k: 4, lambda: 0.3 }, 0.5).unwrap().jump_distribution();
        for &x in q.probs() {
            assert!((x - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn papok_degenerate_rho() {
        let p = from_special_case(&SpecialCase::PAPoK { k: 2, lambda: 1.0, rho: 0.0 }, 1.0).unwrap();
        assert_eq!(p.lambdas(), &[1.0, 0.0]);
        assert_eq!(p.lambda_sum(), 1.0);
    }

    #[test]
    fn papok_jump_law() {
        let p = from_special_case(&SpecialCase::PAPoK { k: 2, lambda: 1.0, rho: 0.5 }, 0.7).unwrap();
        let q = p.jump_distribution();
        assert!((q.probs()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((q.probs()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.lambda_sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn papok_order_one_is_tfpp() {
        let a = from_special_case(&SpecialCase::PAPoK { k: 1, lambda: 1.7, rho: 0.4 }, 0.6).unwrap();
        let b = from_special_case(&SpecialCase::Tfpp { lambda: 1.7 }, 0.6).unwrap();
        assert_eq!(a.lambdas(), b.lambdas());
    }

    #[test]
    fn nbp_truncation() {
        let p = from_special_case(&SpecialCase::Nbp { p: 0.5, tail_eps: 1e-12 }, 1.0).unwrap();
        // partial-sum oracle: Σ_{j≤k} 0.5ʲ/j summed independently
        let k = p.order();
        let partial: f64 = (1..=k).map(|j| 0.5f64.powi(j as i32) / j as f64).sum();
        assert!((p.lambda_sum() - partial).abs() < 1e-15);
        assert!((p.lambda_sum() - std::f64::consts::LN_2).abs() <= 1e-12 * std::f64::consts::LN_2);
        assert!(p.discarded_mass() <= 1e-12 * std::f64::consts::LN_2);
        for (j, &l) in (1..).zip(p.lambdas()) {
            assert!((l - 0.5f64.powi(j) / j as f64).abs() < 1e-18);
        }
    }

    #[test]
    fn pap_truncation_is_proportional_to_papok() {
        let (lambda, rho) = (2.0, 0.6);
        let pap = from_special_case(&SpecialCase::Pap { lambda, rho, tail_eps: 1e-9 }, 1.0).unwrap();
        let k = pap.order();
        let papok = from_special_case(
            &SpecialCase::PAPoK { k, lambda: lambda * (1.0 - rho.powi(k as i32)), rho },
            1.0,
        )
        .unwrap();
        let ratio = pap.lambdas()[0] / papok.lambdas()[0];
        for (a, b) in pap.lambdas().iter().zip(papok.lambdas()) {
            assert!((a / b - ratio).abs() < 1e-12);
        }
        assert!((pap.discarded_mass() - lambda * rho.powi(k as i32)).abs() < 1e-15);
        assert!(pap.discarded_mass() <= 1e-9 * lambda);
    }

    #[test]
    fn cpp_telescopes() {
        let sc = SpecialCase::Cpp { betas: vec![3.0, 2.0, 1.5], tail_ratio: 0.5, tail_eps: 1e-6 };
        let p = from_special_case(&sc, 1.0).unwrap();
        assert_eq!(&p.lambdas()[..2], &[1.0, 0.5]);
        assert!((p.lambda_sum() + p.discarded_mass() - 3.0).abs() < 1e-14);
        assert!(p.discarded_mass() <= 3e-6);
        let bad = SpecialCase::Cpp { betas: vec![1.0, 1.0], tail_ratio: 0.5, tail_eps: 1e-6 };
        assert!(from_special_case(&bad, 1.0).is_err());
    }

    #[test]
    fn truncation_cap() {
        let sc = SpecialCase::Pap { lambda: 1.0, rho: 0.999, tail_eps: 1e-12 };
        assert!(matches!(from_special_case_with_cap(&sc, 1.0, 100), Err(Error::Truncation(_))));
    }

    #[test]
    fn json_round_trip() {
        let spec = ParamsSpec::from_json(r#"{"alpha":0.5,"lambdas":[1,2]}"#).unwrap();
        assert_eq!(spec.resolve().unwrap().lambdas(), &[1.0, 2.0]);
        let spec = ParamsSpec::from_json(r#"{"alpha":1,"special_case":{"tag":"PPoK","k":2,"lambda":0.5}}"#).unwrap();
        assert_eq!(spec.resolve().unwrap().lambdas(), &[0.5, 0.5]);
        let spec = ParamsSpec::from_json(r#"{"alpha":1,"special_case":{"tag":"NBP","p":0.3}}"#).unwrap();
        assert!((spec.resolve().unwrap().lambda_sum() - (1.0f64 / 0.3).ln()).abs() < 1e-11);
        assert!(ParamsSpec::from_json(r#"{"alpha":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn jump_law_sums_to_one(lambdas in prop::collection::vec(0.0f64..5.0, 1..12), alpha in 0.05f64..=1.0) {
            prop_assume!(lambdas.iter().sum::<f64>() > 1e-3);
            let p = GfcpParams::new(alpha, lambdas).unwrap();
            let q = p.jump_distribution();
            let total: f64 = q.probs().iter().sum();
            prop_assert!((total - 1.0).abs() <= 2.0 * f64::EPSILON);
            prop_assert!(q.probs().iter().all(|&x| x >= 0.0));
            prop_assert_eq!(p.with_alpha(1.0).unwrap().r(), 0.0);
        }

        #[test]
        fn factories_match_stated_totals(k in 1usize..8, lambda in 0.1f64..4.0, rho in 0.0f64..0.95, pp in 0.05f64..0.95) {
            let a = from_special_case(&SpecialCase::PPoK { k, lambda }, 0.8).unwrap();
            prop_assert!((a.lambda_sum() - k as f64 * lambda).abs() < 1e-12 * k as f64 * lambda);
            let b = from_special_case(&SpecialCase::PAPoK { k, lambda, rho }, 0.8).unwrap();
            prop_assert!((b.lambda_sum() - lambda).abs() < 1e-12 * lambda);
            let c = from_special_case(&SpecialCase::Pap { lambda, rho, tail_eps: 1e-10 }, 0.8).unwrap();
            prop_assert!((c.lambda_sum() - lambda).abs() <= 1.01e-10 * lambda);
            let d = from_special_case(&SpecialCase::Nbp { p: pp, tail_eps: 1e-10 }, 0.8).unwrap();
            prop_assert!((d.lambda_sum() + pp.ln()).abs() <= 1.01e-10 * (-pp.ln()));
        }
    }
}
