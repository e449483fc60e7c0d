use gfcp_core::specfun::{beta_fn, gamma, incomplete_beta, ml_derivative, ml_three, MlAccuracy};
use proptest::prelude::*;

fn acc() -> MlAccuracy {
    MlAccuracy::default()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn two_parameter_closed_forms() {
    for &x in &[-15.0f64, -3.0, -0.5, 0.7, 4.0, 12.0] {
        // E_{1,2}(x) = (eˣ − 1)/x
        assert!(rel(ml_three(1.0, 2.0, 1.0, x, &acc()).unwrap(), x.exp_m1() / x) < 1e-11, "x = {x}");
        // E_{2,1}(x) = cosh √x, or cos √(−x) for x < 0
        let want = if x > 0.0 { x.sqrt().cosh() } else { (-x).sqrt().cos() };
        let got = ml_three(2.0, 1.0, 1.0, x, &acc()).unwrap();
        assert!((got - want).abs() < 1e-11 * want.abs().max(1.0), "x = {x}: {got} vs {want}");
    }
}

#[test]
fn half_order_against_erfc() {
    // E_{1/2,1}(−z) = e^{z²} erfc(z), evaluated in 40-digit arithmetic
    let cases = [
        (0.1f64, 0.8964569799691266374098386541184678628865f64),
        (0.5, 0.6156903441929258748707934226837419367823),
        (1.0, 0.4275835761558070044107503444905151808202),
        (2.0, 0.2553956763105057438650885809085427633026),
        (3.0, 0.179001151181389950419294815313620987228),
        (4.5, 0.1224848042738414175492254544846529190937),
    ];
    for (z, want) in cases {
        let got = ml_three(0.5, 1.0, 1.0, -z, &acc()).unwrap();
        assert!(rel(got, want) < 1e-12, "z = {z}: {got} vs {want}");
    }
}

#[test]
fn three_parameter_confluent_case() {
    // E^2_{1,1}(x) = ₁F₁(2; 1; x) = eˣ(1 + x)
    for &x in &[-18.0f64, -4.0, -0.5, 0.3, 6.0] {
        let want = x.exp() * (1.0 + x);
        let got = ml_three(1.0, 1.0, 2.0, x, &acc()).unwrap();
        assert!((got - want).abs() < 1e-11 * x.exp().max(want.abs()), "x = {x}: {got} vs {want}");
    }
}

#[test]
fn exponential_on_acceptance_range() {
    let mut x = -20.0;
    while x <= 20.0 {
        assert!(rel(ml_three(1.0, 1.0, 1.0, x, &acc()).unwrap(), x.exp()) < 1e-12, "x = {x}");
        x += 0.25;
    }
}

#[test]
fn incomplete_beta_power_cases() {
    // B(a, 1; x) = xᵃ/a and B(1, b; x) = (1 − (1−x)ᵇ)/b
    for &(a, x) in &[(0.3, 0.2), (2.5, 0.9), (1.0, 0.5)] {
        assert!(rel(incomplete_beta(a, 1.0, x).unwrap(), x.powf(a) / a) < 1e-12);
        assert!(rel(incomplete_beta(1.0, a, x).unwrap(), (1.0 - (1.0 - x).powf(a)) / a) < 1e-12);
    }
}

// Richardson-extrapolated central difference of order n; `scale` is the
// local rate of growth, so the step shrinks where f behaves like exp(x^{1/β})
fn fd(f: &dyn Fn(f64) -> f64, n: u32, x: f64, scale: f64) -> f64 {
    let d = |h: f64| match n {
        1 => (f(x + h) - f(x - h)) / (2.0 * h),
        2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
        _ => (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h),
    };
    let h = [1e-2, 2e-2, 4e-2][n as usize - 1] / scale.max(1.0);
    let (d1, d2, d3) = (d(h), d(h / 2.0), d(h / 4.0));
    let (r1, r2) = ((4.0 * d2 - d1) / 3.0, (4.0 * d3 - d2) / 3.0);
    (16.0 * r2 - r1) / 15.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn value_at_zero(beta in 0.1f64..2.0, gam in 0.1f64..5.0, delta in 0.1f64..5.0) {
        let v = ml_three(beta, gam, delta, 0.0, &acc()).unwrap();
        prop_assert!(rel(v, 1.0 / gamma(gam)) < 1e-14);
    }

    #[test]
    fn derivative_identity(beta in 0.3f64..1.5, gam in 0.5f64..3.0, x in -5.0f64..5.0, n in 1u32..=3) {
        let f = |y: f64| ml_three(beta, gam, 1.0, y, &acc()).unwrap();
        let d = ml_derivative(beta, gam, n, x, &acc()).unwrap();
        let scale = if x > 0.0 { x.powf(1.0 / beta - 1.0) / beta } else { 1.0 };
        let approx = fd(&f, n, x, scale);
        prop_assert!((d - approx).abs() <= 1e-6 * d.abs().max(1.0), "{} vs {}", d, approx);
    }

    #[test]
    fn incomplete_beta_monotone(a in 0.2f64..4.0, b in 0.2f64..4.0, x in 0.0f64..1.0, dx in 0.0f64..0.3) {
        let y = (x + dx).min(1.0);
        prop_assert!(incomplete_beta(a, b, x).unwrap() <= incomplete_beta(a, b, y).unwrap() + 1e-15);
    }

    #[test]
    fn incomplete_beta_reflection(a in 0.2f64..4.0, b in 0.2f64..4.0, x in 0.01f64..0.99) {
        let lhs = incomplete_beta(a, b, x).unwrap();
        let rhs = beta_fn(a, b) - incomplete_beta(b, a, 1.0 - x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * beta_fn(a, b).max(1.0), "{} vs {}", lhs, rhs);
    }
}
