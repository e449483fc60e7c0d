use gfcp_core::mc::{collect_samples, ks_critical_1pct, ks_two_sample, stream, MeanVar};
use gfcp_core::subordinator::{
    cross_term_quadrature, cross_term_series, inverse_cov, inverse_cov_asymptotic, inverse_marginal_sample,
    inverse_mean, inverse_path, inverse_second_moment, stable_sample,
};
use proptest::prelude::*;
use rand_distr::{Distribution, Normal};
use statrs::function::gamma::gamma;

const ALPHAS: [f64; 4] = [0.3, 0.5, 0.7, 0.9];

#[test]
fn stable_laplace_transform() {
    for alpha in ALPHAS {
        let d = collect_samples(200_000, 41, |rng| stable_sample(alpha, rng));
        for s in [0.3f64, 1.0, 2.5] {
            let acc: MeanVar = d.iter().map(|x| (-s * x).exp()).collect();
            let want = (-s.powf(alpha)).exp();
            assert!((acc.mean() - want).abs() < 4.0 * acc.std_error(), "α = {alpha}, s = {s}: {} vs {want}", acc.mean());
        }
    }
}

#[test]
fn marginal_is_self_similar() {
    for alpha in ALPHAS {
        let n = 100_000;
        let y1 = collect_samples(n, 43, |rng| 10f64.powf(alpha) * inverse_marginal_sample(alpha, 1.0, rng));
        let y10 = collect_samples(n, 44, |rng| inverse_marginal_sample(alpha, 10.0, rng));
        let d = ks_two_sample(&y1, &y10);
        assert!(d < ks_critical_1pct(n, n), "α = {alpha}: KS {d}");
    }
}

#[test]
fn half_order_marginal_is_half_normal() {
    // Y(t) for α = 1/2 is |N(0, 2t)|
    let t = 3.0;
    let n = 100_000;
    let y = collect_samples(n, 45, |rng| inverse_marginal_sample(0.5, t, rng));
    let normal = Normal::new(0.0, (2.0 * t).sqrt()).unwrap();
    let z = collect_samples(n, 46, |rng| normal.sample(rng).abs());
    assert!(ks_two_sample(&y, &z) < ks_critical_1pct(n, n));
}

#[test]
fn marginal_moments() {
    for alpha in ALPHAS {
        let t = 2.0;
        let y = collect_samples(200_000, 47, |rng| inverse_marginal_sample(alpha, t, rng));
        let m1: MeanVar = y.iter().copied().collect();
        let m2: MeanVar = y.iter().map(|v| v * v).collect();
        let want1 = t.powf(alpha) / gamma(alpha + 1.0);
        let want2 = 2.0 * t.powf(2.0 * alpha) / gamma(2.0 * alpha + 1.0);
        assert!((inverse_mean(alpha, t) - want1).abs() < 1e-13 * want1);
        assert!((inverse_second_moment(alpha, t) - want2).abs() < 1e-13 * want2);
        assert!((m1.mean() - want1).abs() < 4.0 * m1.std_error(), "α = {alpha}");
        assert!((m2.mean() - want2).abs() < 4.0 * m2.std_error(), "α = {alpha}");
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let steps = 20_000;
    let h = (b - a) / steps as f64;
    let mut acc = f(a) + f(b);
    for i in 1..steps {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

// α ∫₀^{x} u^{α−1}(1−u)^α du. Below 1/2 substitute u = v^{4/α}; above it
// 1 − u = y⁴. Both make the integrand smooth at the endpoints.
fn incomplete_beta_oracle(alpha: f64, x: f64) -> f64 {
    let mid = x.min(0.5);
    let low = simpson(|v| 4.0 * v.powi(3) * (1.0 - v.powf(4.0 / alpha)).powf(alpha), 0.0, mid.powf(alpha / 4.0));
    if x <= 0.5 {
        return low;
    }
    let high = simpson(
        |y| 4.0 * y.powf(4.0 * alpha + 3.0) * (1.0 - y.powi(4)).powf(alpha - 1.0),
        (1.0 - x).powf(0.25),
        0.5f64.powf(0.25),
    );
    low + alpha * high
}

#[test]
fn covariance_by_direct_integration() {
    for alpha in ALPHAS {
        for (s, t) in [(1.0f64, 1.0f64), (1.0, 1.5), (0.5, 4.0), (2.0, 50.0)] {
            let g = gamma(alpha + 1.0);
            let full = gamma(alpha) * gamma(alpha + 1.0) / gamma(2.0 * alpha + 1.0);
            let cross = t.powf(2.0 * alpha) * incomplete_beta_oracle(alpha, s / t);
            let want = (alpha * s.powf(2.0 * alpha) * full + cross - (s * t).powf(alpha)) / (g * g);
            let got = inverse_cov(alpha, s, t).unwrap();
            assert!((got - want).abs() < 1e-9 * want.abs().max(1e-3), "α = {alpha}, s = {s}, t = {t}: {got} vs {want}");
        }
    }
}

#[test]
fn cross_term_routes_agree() {
    for alpha in ALPHAS {
        for ratio in [0.01, 0.1, 0.3, 0.5] {
            let a = cross_term_series(alpha, ratio, 1.0).unwrap();
            let b = cross_term_quadrature(alpha, ratio, 1.0).unwrap();
            assert!((a - b).abs() < 1e-12, "α = {alpha}, s/t = {ratio}: {a} vs {b}");
        }
    }
}

#[test]
fn variance_scales_as_two_alpha() {
    for alpha in ALPHAS {
        let ts = [1.0f64, 10.0, 100.0, 1000.0];
        let lv: Vec<f64> = ts.iter().map(|&t| inverse_cov(alpha, t, t).unwrap().ln()).collect();
        for w in lv.windows(2) {
            let slope = (w[1] - w[0]) / 10f64.ln();
            assert!((slope - 2.0 * alpha).abs() < 0.01, "α = {alpha}: {slope}");
        }
    }
}

#[test]
fn asymptote_within_five_percent() {
    for alpha in ALPHAS {
        let (s, t) = (1.0, 100.0);
        let exact = inverse_cov(alpha, s, t).unwrap();
        let approx = inverse_cov_asymptotic(alpha, s, t).unwrap();
        assert!((approx - exact).abs() < 0.05 * exact, "α = {alpha}: {approx} vs {exact}");
    }
}

#[test]
fn path_is_monotone_and_matches_marginal_mean() {
    let alpha = 0.6;
    let grid = [0.0, 0.5, 1.0, 2.0];
    let paths = collect_samples(20_000, 48, |rng| inverse_path(alpha, &grid, 1e-3, rng).unwrap().values);
    for p in &paths {
        assert_eq!(p[0], 0.0);
        assert!(p.windows(2).all(|w| w[0] <= w[1]));
    }
    for (i, &t) in grid.iter().enumerate().skip(1) {
        let acc: MeanVar = paths.iter().map(|p| p[i]).collect();
        // first passage overshoots by less than one step
        let bias = (acc.mean() - inverse_mean(alpha, t)).abs() - 1e-3;
        assert!(bias < 4.0 * acc.std_error(), "t = {t}: {} vs {}", acc.mean(), inverse_mean(alpha, t));
    }
}

#[test]
fn rejects_bad_input() {
    assert!(inverse_cov(1.0, 1.0, 2.0).is_err());
    assert!(inverse_cov(0.5, 2.0, 1.0).is_err());
    assert!(inverse_cov(0.5, 0.0, 1.0).is_err());
    assert!(cross_term_series(0.5, 0.9, 1.0).is_err());
    assert!(inverse_path(0.5, &[1.0, 0.5], 1e-3, &mut stream(0, 0)).is_err());
    assert!(inverse_path(0.5, &[1.0], 0.0, &mut stream(0, 0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_is_bounded_by_variances(alpha in 0.05f64..0.95, s in 0.01f64..10.0, r in 1.0f64..1e4) {
        let t = s * r;
        let c = inverse_cov(alpha, s, t).unwrap();
        let vs = inverse_cov(alpha, s, s).unwrap();
        let vt = inverse_cov(alpha, t, t).unwrap();
        prop_assert!(c > 0.0);
        prop_assert!(c <= (vs * vt).sqrt() * (1.0 + 1e-12));
    }
}
