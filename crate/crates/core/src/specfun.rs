//! Three-parameter (Prabhakar) Mittag-Leffler function, its derivative
//! identity, Gamma-function ratios and the unregularized incomplete beta
//! function.
//!
//! The Mittag-Leffler series
//!
//! ```text
//! E^δ_{β,γ}(x) = Σ_{k≥0} (δ)_k x^k / (k! Γ(kβ + γ))
//! ```
//!
//! is summed term by term. Successive terms are built from their ratio, so no
//! Gamma function of a large argument is ever formed; the Gamma ratio
//! `Γ(a)/Γ(a+β)` comes from [`ln_gamma_ratio`]. Summation is compensated
//! (Neumaier). For `β = 1` and `x < 0` the series is first passed through
//! Kummer's transformation `₁F₁(δ;γ;x) = eˣ ₁F₁(γ−δ;γ;−x)`, which turns the
//! alternating series into one without cancellation.
//!
//! For `0 < β < 1`, `x < 0` the series cancels badly once `|x|` or `δ` grow.
//! When `γ = β(δ−1) + 1` (the shape that appears in the counting-process pmf
//! and pgf) there is a representation with a positive integrand,
//!
//! ```text
//! E^δ_{β,β(δ−1)+1}(−z) = E[Y^{δ−1} e^{−zY}] / Γ(δ),   Y = (E / A(U))^{1−β},
//! A(φ) = (sin(βφ)^β sin((1−β)φ)^{1−β} / sin φ)^{1/(1−β)},
//! ```
//!
//! with `U ~ U(0, π)` and `E ~ Exp(1)` (`Y` is the inverse stable subordinator
//! at time 1), and that double integral is used whenever the series fails.
//!
//! For a positive integer `δ = m` the function is a derivative,
//! `E^m_{β,(m−1)β+γ₀} = E^{(m−1)}_{β,γ₀} / (m−1)!`, and collapsing the Hankel
//! representation onto the rays `arg ζ = ±βπ` and the unit arc gives
//!
//! ```text
//! E^{n+1}_{β,nβ+γ₀}(x) = 1/(2πiβ) ∫ exp(ζ^{1/β}) ζ^{(1−γ₀)/β} (ζ − x)^{−n−1} dζ,
//! ```
//!
//! valid for `x < 0` because no pole lies inside the sector. That is the
//! second fallback. Other shapes with `|x|` above
//! [`MlAccuracy::arg_magnitude_cap`] are refused, and so is any evaluation
//! whose estimated rounding error exceeds `sqrt(rel_tol)` relative to the
//! result.

use statrs::function::gamma::{gamma as stat_gamma, ln_gamma as stat_ln_gamma};

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_with_breaks, QuadTolerance};

/// Controls evaluation of [`ml_three`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlAccuracy {
    pub rel_tol: f64,
    pub max_terms: usize,
    pub arg_magnitude_cap: f64,
}

impl Default for MlAccuracy {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_terms: 10_000, arg_magnitude_cap: 50.0 }
    }
}

impl MlAccuracy {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::validation("rel_tol", "must be positive and finite"));
        }
        if self.max_terms == 0 {
            return Err(Error::validation("max_terms", "must be at least 1"));
        }
        if !(self.arg_magnitude_cap > 0.0) {
            return Err(Error::validation("arg_magnitude_cap", "must be positive"));
        }
        Ok(())
    }
}

/// A Mittag-Leffler value together with diagnostics from the summation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlEvaluation {
    pub value: f64,
    pub terms: usize,
    /// Estimated absolute rounding error (cancellation in the series).
    pub rounding_error: f64,
}

// (n−1)! is exact in double precision up to n = 23
fn exact_factorial(x: f64) -> Option<f64> {
    ((1.0..=23.0).contains(&x) && x.fract() == 0.0).then(|| (1..x as u32).map(f64::from).product())
}

pub fn gamma(x: f64) -> f64 {
    exact_factorial(x).unwrap_or_else(|| stat_gamma(x))
}

pub fn ln_gamma(x: f64) -> f64 {
    exact_factorial(x).map_or_else(|| stat_ln_gamma(x), f64::ln)
}

/// `1/Γ(x)` for `x > 0`, without overflow for large `x`.
pub fn recip_gamma(x: f64) -> f64 {
    if x < 170.0 {
        1.0 / gamma(x)
    } else {
        (-stat_ln_gamma(x)).exp()
    }
}

// Stirling series correction  lnΓ(x) − [(x−½)ln x − x + ½ln 2π],  x ≥ STIRLING_MIN.
fn stirling_correction(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    r * (1.0 / 12.0
        - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0)))))
}

const STIRLING_MIN: f64 = 12.0;

/// `lnΓ(a + b) − lnΓ(a)` for `a > 0`, `a + b > 0`, accurate in relative terms
/// even when both log-Gammas are large.
pub fn ln_gamma_ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    if a < STIRLING_MIN || a + b < STIRLING_MIN {
        // shift up with Γ(z+1) = zΓ(z)
        let shift = (STIRLING_MIN - a.min(a + b)).ceil().max(0.0) as usize;
        let mut acc = 0.0;
        for i in 0..shift {
            let ai = a + i as f64;
            acc += (b / ai).ln_1p();
        }
        return ln_gamma_ratio(a + shift as f64, b) - acc;
    }
    (a - 0.5) * (b / a).ln_1p() + b * (a + b).ln() - b + stirling_correction(a + b)
        - stirling_correction(a)
}

/// `Γ(a) / Γ(a + b)`.
pub fn gamma_ratio(a: f64, b: f64) -> f64 {
    if b == 1.0 {
        return 1.0 / a;
    }
    (-ln_gamma_ratio(a, b)).exp()
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Sums Σ_k (poch)_k x^k / (k! Γ(kβ+γ)).
fn pochhammer_series(poch: f64, beta: f64, gamma_p: f64, x: f64, acc: &MlAccuracy) -> Result<MlEvaluation> {
    let mut term = recip_gamma(gamma_p);
    let mut sum = Neumaier::default();
    let mut abs_sum = 0.0;
    for k in 0..acc.max_terms {
        sum.add(term);
        abs_sum += term.abs();
        let kf = k as f64;
        let a = kf * beta + gamma_p;
        let ratio = (poch + kf) / (kf + 1.0) * x * gamma_ratio(a, beta);
        let next = term * ratio;
        if !next.is_finite() {
            return Err(Error::Convergence(format!(
                "Mittag-Leffler series overflowed at term {k} (x = {x}, beta = {beta})"
            )));
        }
        if next == 0.0 {
            let value = sum.value();
            return Ok(MlEvaluation {
                value,
                terms: k + 1,
                rounding_error: rounding_estimate(abs_sum, k + 1),
            });
        }
        // Every later ratio is bounded by `bound`: Γ(a)/Γ(a+β) decreases in a and
        // |(poch+j)/(j+1)| ≤ max(1, (poch+k+1)/(k+2)) once poch+k+1 ≥ 0.
        if poch + kf + 1.0 >= 0.0 {
            let factor = ((poch + kf + 1.0) / (kf + 2.0)).max(1.0);
            let bound = factor * x.abs() * gamma_ratio(a + beta, beta);
            if bound < 1.0 {
                let tail = next.abs() / (1.0 - bound);
                let current = sum.value();
                if tail <= acc.rel_tol * current.abs() || tail < f64::MIN_POSITIVE {
                    sum.add(next);
                    abs_sum += next.abs();
                    return Ok(MlEvaluation {
                        value: sum.value(),
                        terms: k + 2,
                        rounding_error: rounding_estimate(abs_sum, k + 2) + tail,
                    });
                }
            }
        }
        term = next;
    }
    Err(Error::Convergence(format!(
        "Mittag-Leffler series did not meet rel_tol {} within {} terms (x = {x}, beta = {beta})",
        acc.rel_tol, acc.max_terms
    )))
}

fn rounding_estimate(abs_sum: f64, terms: usize) -> f64 {
    // each term carries O(terms) accumulated ratio roundings
    4.0 * f64::EPSILON * abs_sum * (1.0 + (terms as f64).sqrt())
}

/// Evaluates `E^δ_{β,γ}(x)` and returns the diagnostics. For the integral
/// fallback, `terms` counts quadrature panels and `rounding_error` is the
/// quadrature error estimate.
pub fn ml_three_eval(beta: f64, gamma_p: f64, delta: f64, x: f64, acc: &MlAccuracy) -> Result<MlEvaluation> {
    let fallback = || {
        if has_subordinated_form(beta, gamma_p, delta, x) {
            Some(ml_subordinated(beta, delta, -x, acc.rel_tol))
        } else {
            contour_form(beta, gamma_p, delta, x).map(|(g0, n)| ml_contour(beta, g0, n, x, acc.rel_tol))
        }
    };
    match ml_series_eval(beta, gamma_p, delta, x, acc) {
        Ok(e) if e.rounding_error > FALLBACK_FACTOR * acc.rel_tol * e.value.abs() => fallback().unwrap_or(Ok(e)),
        Err(Error::Convergence(msg)) => fallback().unwrap_or(Err(Error::Convergence(msg))),
        other => other,
    }
}

/// Series evaluation alone, without the integral fallback.
pub fn ml_series_eval(beta: f64, gamma_p: f64, delta: f64, x: f64, acc: &MlAccuracy) -> Result<MlEvaluation> {
    check_positive("beta", beta)?;
    check_positive("gamma", gamma_p)?;
    check_positive("delta", delta)?;
    acc.validate()?;
    if !x.is_finite() {
        return Err(Error::Domain(format!("argument must be finite, got {x}")));
    }
    if x.abs() > acc.arg_magnitude_cap {
        return Err(Error::Convergence(format!(
            "|x| = {} exceeds the Mittag-Leffler argument cap {}",
            x.abs(),
            acc.arg_magnitude_cap
        )));
    }
    if x == 0.0 {
        return Ok(MlEvaluation { value: recip_gamma(gamma_p), terms: 1, rounding_error: 0.0 });
    }
    let eval = if beta == 1.0 && x < 0.0 {
        let inner = pochhammer_series(gamma_p - delta, 1.0, gamma_p, -x, acc)?;
        let scale = x.exp();
        MlEvaluation {
            value: scale * inner.value,
            terms: inner.terms,
            rounding_error: scale * inner.rounding_error + 2.0 * f64::EPSILON * (scale * inner.value).abs(),
        }
    } else {
        pochhammer_series(delta, beta, gamma_p, x, acc)?
    };
    if eval.rounding_error > acc.rel_tol.sqrt() * eval.value.abs() {
        return Err(Error::Convergence(format!(
            "catastrophic cancellation in the Mittag-Leffler series at x = {x} (beta = {beta}): \
             estimated error {:e} vs value {:e}",
            eval.rounding_error, eval.value
        )));
    }
    Ok(eval)
}

/// The rounding estimate is a worst case; series results are kept while it
/// stays within this multiple of `rel_tol`.
const FALLBACK_FACTOR: f64 = 100.0;

/// True when `E^δ_{β,γ}(x)` has the integral representation in the module docs.
fn has_subordinated_form(beta: f64, gamma_p: f64, delta: f64, x: f64) -> bool {
    beta > 0.0 && beta < 1.0 && x < 0.0 && (gamma_p - (beta * (delta - 1.0) + 1.0)).abs() <= 1e-12 * gamma_p
}

/// `(γ₀, n)` with `δ = n + 1` and `γ = nβ + γ₀` when the contour form applies.
fn contour_form(beta: f64, gamma_p: f64, delta: f64, x: f64) -> Option<(f64, u32)> {
    let m = delta.round();
    if !(beta > 0.0 && beta < 1.0 && x < 0.0 && (1.0..=MAX_CONTOUR_ORDER).contains(&m) && (delta - m).abs() <= 1e-12 * m) {
        return None;
    }
    let n = m - 1.0;
    let g0 = gamma_p - n * beta;
    (g0 > 0.0).then_some((g0, n as u32))
}

const MAX_CONTOUR_ORDER: f64 = 64.0;

/// `E^{n+1}_{β,nβ+γ₀}(x) = E^{(n)}_{β,γ₀}(x)/n!` for `0 < β < 1`, `x < 0`, from
/// the collapsed Hankel contour (rays `arg ζ = ±βπ` beyond the unit circle
/// and the arc of the unit circle between them).
pub fn ml_contour(beta: f64, gamma0: f64, n: u32, x: f64, rel_tol: f64) -> Result<MlEvaluation> {
    use num_complex::Complex64;
    use std::f64::consts::PI;

    check_positive("gamma", gamma0)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(x < 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("x must be negative and finite, got {x}")));
    }
    let p = f64::from(n) + 1.0;
    let expo = (1.0 - gamma0) / beta;
    let b = beta * PI;
    let ray_phase = Complex64::from_polar(1.0, PI * (1.0 - gamma0) + b);
    let ray_dir = Complex64::from_polar(1.0, b);
    let tol = QuadTolerance { abs_tol: 1e-300, rel_tol: 0.1 * rel_tol, max_intervals: 4000 };

    // Im[e^{i(π(1−γ₀)+βπ)} (χe^{iβπ} − x)^{−n−1}] e^{−χ^{1/β}} χ^{(1−γ₀)/β} / (βπ)
    let ray = |chi: f64| {
        let w = (ray_dir * chi - x).powf(-p);
        (ray_phase * w).im * (-chi.powf(1.0 / beta) + expo * chi.ln()).exp() / b
    };
    // twice the real part over half the arc, symmetric in φ
    let arc = |phi: f64| {
        let zeta = Complex64::from_polar(1.0, phi);
        let g = Complex64::from_polar(1.0, phi / beta).exp() * Complex64::from_polar(1.0, phi * (expo + 1.0));
        (g * (zeta - x).powf(-p)).re / (PI * beta)
    };
    let upper = 750f64.powf(beta).max(2.0);
    let breaks: Vec<f64> = [-x].into_iter().filter(|&c| c > 1.0 && c < upper).collect();
    let r_ray = integrate_with_breaks(ray, 1.0, upper, &breaks, tol)?;
    let r_arc = integrate(arc, 0.0, b, tol)?;
    let value = r_ray.value + r_arc.value;
    let rounding = 8.0 * f64::EPSILON * (r_ray.value.abs() + r_arc.value.abs());
    Ok(MlEvaluation {
        value,
        terms: r_ray.intervals + r_arc.intervals,
        rounding_error: r_ray.abs_error + r_arc.abs_error + rounding,
    })
}

/// `E^δ_{β,β(δ−1)+1}(−z)` for `0 < β < 1`, `z > 0`, by adaptive quadrature
/// of `E[Y^{δ−1} e^{−zY}] / Γ(δ)` over `(φ, e) ∈ (0, π) × (0, ∞)`.
pub fn ml_subordinated(beta: f64, delta: f64, z: f64, rel_tol: f64) -> Result<MlEvaluation> {
    check_positive("delta", delta)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("z must be non-negative and finite, got {z}")));
    }
    let c = 1.0 - beta;
    let m = delta - 1.0;
    let shift = -ln_gamma(delta);
    let peak = (m * c).max(0.0);
    let e_hi = peak + 50.0 + 10.0 * (peak + 1.0).sqrt();
    let inner_tol = QuadTolerance { abs_tol: 1e-300, rel_tol: 0.1 * rel_tol, max_intervals: 2000 };
    let outer_tol = QuadTolerance { abs_tol: 1e-300, rel_tol, max_intervals: 2000 };
    let inner_err = std::cell::Cell::new(0.0f64);
    let inner_fail = std::cell::Cell::new(None);
    let outer = |phi: f64| -> f64 {
        let ln_a = (beta * (beta * phi).sin().ln() + c * (c * phi).sin().ln() - phi.sin().ln()) / c;
        let f = |e: f64| {
            let ln_y = c * (e.ln() - ln_a);
            let expo = -e + m * ln_y - z * ln_y.exp() + shift;
            if m == 0.0 && e == 0.0 { (-z * (-c * ln_a).exp()).exp() } else { expo.exp() }
        };
        match integrate_with_breaks(f, 0.0, e_hi, &[peak], inner_tol) {
            Ok(r) => {
                inner_err.set(inner_err.get().max(r.abs_error));
                r.value
            }
            Err(e) => {
                inner_fail.set(Some(e));
                f64::NAN
            }
        }
    };
    let r = integrate(outer, 0.0, std::f64::consts::PI, outer_tol);
    if let Some(e) = inner_fail.take() {
        return Err(e);
    }
    let r = r?;
    let value = r.value / std::f64::consts::PI;
    Ok(MlEvaluation {
        value,
        terms: r.intervals,
        rounding_error: (r.abs_error + inner_err.get()) / std::f64::consts::PI,
    })
}

/// Three-parameter Mittag-Leffler function `E^δ_{β,γ}(x)`.
pub fn ml_three(beta: f64, gamma_p: f64, delta: f64, x: f64, acc: &MlAccuracy) -> Result<f64> {
    ml_three_eval(beta, gamma_p, delta, x, acc).map(|e| e.value)
}

/// `n`th derivative of the two-parameter function `E_{β,γ}` at `x`, via
/// `E^{(n)}_{β,γ}(x) = n! E^{n+1}_{β, nβ+γ}(x)`.
pub fn ml_derivative(beta: f64, gamma_p: f64, n: u32, x: f64, acc: &MlAccuracy) -> Result<f64> {
    let nf = n as f64;
    let factorial: f64 = (1..=n).map(|i| i as f64).product();
    Ok(factorial * ml_three(beta, nf * beta + gamma_p, nf + 1.0, x, acc)?)
}

/// Complete beta function `B(a, b)`.
pub fn beta_fn(a: f64, b: f64) -> f64 {
    if a + b < 170.0 {
        stat_gamma(a) * stat_gamma(b) / stat_gamma(a + b)
    } else {
        (stat_ln_gamma(a) + stat_ln_gamma(b) - stat_ln_gamma(a + b)).exp()
    }
}

// ∫₀ˣ u^{a−1}(1−u)^{b−1} du = xᵃ Σₙ (1−b)ₙ xⁿ / (n!(a+n)) for x ≤ 1/2, where
// the terms shrink at least geometrically with ratio x.
fn lower_part(a: f64, b: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut coef = 1.0;
    let mut sum = 1.0 / a;
    for n in 0..5000 {
        let nf = f64::from(n);
        coef *= (nf + 1.0 - b) * x / (nf + 1.0);
        let term = coef / (a + nf + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            return Ok(x.powf(a) * sum);
        }
    }
    Err(Error::Convergence(format!("incomplete beta series for a={a}, b={b}, x={x} did not converge")))
}

/// Unregularized incomplete beta `B(a, b; x) = ∫₀ˣ u^{a−1}(1−u)^{b−1} du`.
/// At `x = 1` returns the complete beta function.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("incomplete beta needs x in [0, 1], got {x}")));
    }
    if x == 1.0 {
        return Ok(beta_fn(a, b));
    }
    if x <= 0.5 {
        return lower_part(a, b, x);
    }
    // split at 1/2 and mirror the right piece: ∫_{1/2}^{x} = ∫_{1−x}^{1/2} of the mirrored integrand
    let left = lower_part(a, b, 0.5)?;
    let right = lower_part(b, a, 0.5)? - lower_part(b, a, 1.0 - x)?;
    Ok(left + right)
}
