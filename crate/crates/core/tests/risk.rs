use gfcp_core::mc::{collect_samples, stream, MeanVar};
use gfcp_core::params::GfcpParams;
use gfcp_core::risk::{
    g_zero, mixture_h, psi_zero, ruin_mc, safety_loading, simulate_surplus_trace, ClaimDistribution, RiskModel,
};
use gfcp_core::Error;
use proptest::prelude::*;

fn model(l: &[f64], c: f64, claims: ClaimDistribution, u: f64) -> RiskModel {
    RiskModel::new(GfcpParams::new(1.0, l.to_vec()).unwrap(), c, claims, u).unwrap()
}

fn erlang_cdf(j: usize, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..j {
        term *= x / i as f64;
        sum += term;
    }
    1.0 - (-x).exp() * sum
}

#[test]
fn mixture_of_erlang_laws() {
    let l = [0.5, 1.5, 1.0];
    let mu = 2.0;
    let m = model(&l, 20.0, ClaimDistribution::Exponential { mean: mu }, 0.0);
    for x in [0.1, 1.0, 3.0, 8.0, 20.0] {
        let want: f64 = (1..).zip(l).map(|(j, lam)| lam * erlang_cdf(j, x / mu)).sum::<f64>() / 3.0;
        assert!((mixture_h(&m, x).unwrap() - want).abs() < 1e-13, "x = {x}");
    }
}

#[test]
fn mixture_by_sampling() {
    // H is the law of a sum of J claims with Pr{J = j} = λⱼ/Λ
    let l = [1.0, 0.5, 0.5];
    let claims = ClaimDistribution::Exponential { mean: 1.5 };
    let m = model(&l, 20.0, claims.clone(), 0.0);
    let jumps = m.gcp().jump_distribution();
    let sums = collect_samples(200_000, 81, |rng| {
        let j = jumps.sample(rng);
        (0..j).map(|_| claims.sample(rng)).sum::<f64>()
    });
    for x in [0.5, 2.0, 5.0] {
        let acc: MeanVar = sums.iter().map(|&s| f64::from(u8::from(s <= x))).collect();
        let want = mixture_h(&m, x).unwrap();
        assert!((acc.mean() - want).abs() < 4.0 * acc.std_error(), "x = {x}: {} vs {want}", acc.mean());
    }
}

#[test]
fn deficit_law_exponential_closed_form() {
    // 1 − F(u) = e^{−u/μ}, 1 − F^{*2}(u) = e^{−u/μ}(1 + u/μ)
    let (l1, l2, mu, c) = (1.0, 0.7, 1.3, 5.0);
    let m = model(&[l1, l2], c, ClaimDistribution::Exponential { mean: mu }, 0.0);
    for y in [0.2, 1.0, 4.0, 30.0] {
        let e = (-y / mu).exp();
        let one = mu * (1.0 - e);
        let two = one + mu * (1.0 - e * (1.0 + y / mu));
        let want = (l1 * one + l2 * two) / c;
        assert!((g_zero(&m, y).unwrap() - want).abs() < 1e-11, "y = {y}");
    }
}

#[test]
fn deficit_law_deterministic_closed_form() {
    // 1 − H(u) = Λ⁻¹ Σ λⱼ 1{u < jμ}
    let l = [1.0, 0.0, 2.0];
    let (mu, c) = (0.8, 10.0);
    let m = model(&l, c, ClaimDistribution::Deterministic { value: mu }, 0.0);
    for y in [0.3f64, 0.8, 1.7, 2.4, 5.0] {
        let want: f64 = (1..).zip(l).map(|(j, lam)| lam * y.min(j as f64 * mu)).sum::<f64>() / c;
        assert!((g_zero(&m, y).unwrap() - want).abs() < 1e-10, "y = {y}");
    }
}

#[test]
fn deficit_law_tends_to_ruin_probability() {
    for claims in [ClaimDistribution::Exponential { mean: 1.0 }, ClaimDistribution::Deterministic { value: 1.0 }] {
        let m = model(&[1.0, 1.0], 6.0, claims, 0.0);
        assert!((g_zero(&m, 100.0).unwrap() - psi_zero(&m)).abs() < 1e-9);
        assert_eq!(psi_zero(&m), 0.5);
        assert_eq!(g_zero(&m, 0.0).unwrap(), 0.0);
    }
}

#[test]
fn ruin_probability_depends_on_claim_mean_only() {
    let ys = [None, Some(0.0)];
    let mut est = Vec::new();
    for claims in [ClaimDistribution::Exponential { mean: 1.0 }, ClaimDistribution::Deterministic { value: 1.0 }] {
        let m = model(&[1.0, 1.0], 6.0, claims, 0.0);
        let r = ruin_mc(&m, &ys, 20_000, 83).unwrap();
        assert_eq!(r[1].estimate, 0.0);
        est.push(r[0]);
    }
    let gap = (est[0].estimate - est[1].estimate).abs();
    assert!(gap < 4.0 * est[0].se.hypot(est[1].se), "{est:?}");
    for e in &est {
        // finite horizon biases low
        assert!(e.estimate < 0.5 + 4.0 * e.se && e.estimate > 0.5 - 4.0 * e.se - 0.01, "{e:?}");
    }
}

#[test]
fn deficit_distribution_by_simulation() {
    let m = model(&[1.0, 0.5], 4.0, ClaimDistribution::Exponential { mean: 1.0 }, 0.0);
    let ys: Vec<Option<f64>> = [0.5, 1.0, 3.0].iter().map(|&y| Some(y)).collect();
    for (r, y) in ruin_mc(&m, &ys, 40_000, 85).unwrap().iter().zip([0.5, 1.0, 3.0]) {
        let want = g_zero(&m, y).unwrap();
        assert!((r.estimate - want).abs() < 4.0 * r.se + 0.005, "y = {y}: {} vs {want}", r.estimate);
    }
}

#[test]
fn empirical_claims_are_simulation_only() {
    let m = model(&[1.0], 5.0, ClaimDistribution::Empirical { values: vec![0.5, 1.0, 2.5] }, 1.0);
    assert!(matches!(g_zero(&m, 1.0), Err(Error::UnsupportedDist(_))));
    assert!((m.claims().mean() - 4.0 / 3.0).abs() < 1e-15);
    let r = ruin_mc(&m, &[None], 2_000, 87).unwrap();
    assert!(r[0].estimate > 0.0 && r[0].estimate < 1.0);
}

#[test]
fn construction_checks() {
    let fractional = GfcpParams::new(0.5, vec![1.0]).unwrap();
    assert!(RiskModel::new(fractional, 5.0, ClaimDistribution::Exponential { mean: 1.0 }, 0.0).is_err());
    let p = GfcpParams::new(1.0, vec![1.0]).unwrap();
    assert!(RiskModel::new(p.clone(), 0.0, ClaimDistribution::Exponential { mean: 1.0 }, 0.0).is_err());
    assert!(RiskModel::new(p.clone(), 2.0, ClaimDistribution::Exponential { mean: -1.0 }, 0.0).is_err());
    assert!(RiskModel::new(p.clone(), 2.0, ClaimDistribution::Empirical { values: vec![] }, 0.0).is_err());
    assert!(RiskModel::new(p.clone(), 2.0, ClaimDistribution::Deterministic { value: 1.0 }, -1.0).is_err());
    let m = RiskModel::new(p, 2.0, ClaimDistribution::Deterministic { value: 1.0 }, 0.0).unwrap();
    assert!(ruin_mc(&m, &[None], 999, 0).is_err());
    assert!(g_zero(&m, -1.0).is_err());
    assert_eq!(m.horizon(), 1e3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn deficit_law_monotone_and_bounded(l in prop::collection::vec(0.1f64..2.0, 1..4), mu in 0.2f64..3.0, load in 0.05f64..2.0, y1 in 0.0f64..10.0, dy in 0.0f64..10.0) {
        let outflow: f64 = (1..).zip(&l).map(|(j, x)| j as f64 * x).sum::<f64>() * mu;
        let m = model(&l, outflow * (1.0 + load), ClaimDistribution::Exponential { mean: mu }, 0.0);
        let a = g_zero(&m, y1).unwrap();
        let b = g_zero(&m, y1 + dy).unwrap();
        prop_assert!(a >= 0.0 && a <= b + 1e-12 && b <= psi_zero(&m) + 1e-12);
    }

    #[test]
    fn loading_sign_matches_ruin(l in prop::collection::vec(0.1f64..2.0, 1..4), mu in 0.2f64..3.0, c in 0.1f64..20.0) {
        let m = model(&l, c, ClaimDistribution::Deterministic { value: mu }, 0.0);
        prop_assert_eq!(safety_loading(&m) > 0.0, psi_zero(&m) < 1.0);
        prop_assert_eq!(m.has_positive_loading(), safety_loading(&m) > 0.0);
    }

    #[test]
    fn surplus_accounting(seed in any::<u64>(), u in 0.0f64..5.0, mu in 0.2f64..2.0) {
        let m = model(&[1.0, 0.5], 2.0, ClaimDistribution::Deterministic { value: mu }, u).with_horizon(30.0).unwrap();
        let mut rng = stream(seed, 0);
        let (outcome, trace) = simulate_surplus_trace(&m, &mut rng).unwrap();
        let mut total = 0.0;
        for (i, e) in trace.iter().enumerate() {
            prop_assert!((e.claim_total - f64::from(e.claims) * mu).abs() < 1e-12);
            total += e.claim_total;
            prop_assert!((e.cumulative_claims - total).abs() < 1e-9);
            prop_assert!((e.surplus - (u + 2.0 * e.time - total)).abs() < 1e-9);
            // only the last epoch can be below zero
            prop_assert!(e.surplus >= 0.0 || i + 1 == trace.len());
        }
        prop_assert_eq!(outcome.ruined, trace.last().is_some_and(|e| e.surplus < 0.0));
        if let (Some(d), Some(last)) = (outcome.deficit, trace.last()) {
            prop_assert_eq!(d, -last.surplus);
        }
    }
}
