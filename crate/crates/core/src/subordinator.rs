//! The α-stable subordinator `D` with `E[e^{−sD(1)}] = e^{−sᵅ}` and its
//! first-passage inverse `Y(t) = inf{x > 0 : D(x) > t}`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun::{beta_fn, gamma, incomplete_beta};

/// Default ceiling on the number of cells of a simulated subordinator grid.
pub const DEFAULT_MAX_GRID_CELLS: usize = 100_000_000;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("stable index must lie in (0, 1), got {alpha}")))
    }
}

/// One draw of `D(1)` by Kanter's representation:
/// `sin(αU)/sin(U)^{1/α} · (sin((1−α)U)/E)^{(1−α)/α}` with `U ~ U(0, π)`,
/// `E ~ Exp(1)`.
pub fn stable_sample<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    debug_assert!(alpha > 0.0 && alpha < 1.0);
    loop {
        let u = PI * rng.random::<f64>();
        if u == 0.0 {
            continue;
        }
        let e: f64 = Exp1.sample(rng);
        let d = (alpha * u).sin() / u.sin().powf(1.0 / alpha)
            * (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
        // underflow/overflow at the extreme ends of U is possible for small alpha
        if d > 0.0 && d.is_finite() {
            return d;
        }
    }
}

/// Exact draw of `Y(t)` for a single `t`, via `Y(t) =ᵈ (t/D(1))ᵅ`.
pub fn inverse_marginal_sample<R: Rng + ?Sized>(alpha: f64, t: f64, rng: &mut R) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (t / stable_sample(alpha, rng)).powf(alpha)
}

/// Subordinator values on the grid `0, dt, 2dt, …`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StableGrid {
    alpha: f64,
    dt: f64,
    values: Vec<f64>,
}

impl StableGrid {
    /// Simulates `D` on step `dt` until it first exceeds `level`.
    pub fn simulate<R: Rng + ?Sized>(alpha: f64, dt: f64, level: f64, max_cells: usize, rng: &mut R) -> Result<Self> {
        check_alpha(alpha)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("grid step must be positive, got {dt}")));
        }
        let scale = dt.powf(1.0 / alpha);
        let mut values = vec![0.0];
        let mut d = 0.0;
        while d <= level {
            if values.len() > max_cells {
                return Err(Error::Grid(format!(
                    "subordinator stayed below {level} after {max_cells} cells of size {dt}"
                )));
            }
            d += scale * stable_sample(alpha, rng);
            values.push(d);
        }
        Ok(Self { alpha, dt, values })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The same path seen on the grid of step `2·dt`.
    pub fn coarsen(&self) -> Self {
        Self { alpha: self.alpha, dt: 2.0 * self.dt, values: self.values.iter().step_by(2).copied().collect() }
    }

    /// `dt · min{m : D(m·dt) > t}`, or `None` if the grid ends first.
    pub fn first_passage(&self, t: f64) -> Option<f64> {
        if t < 0.0 {
            return Some(0.0);
        }
        let m = self.values.partition_point(|&d| d <= t);
        (m < self.values.len()).then_some(m as f64 * self.dt)
    }
}

/// Inverse subordinator values `Y(tᵢ)` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InversePath {
    pub alpha: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Domain("time grid is empty".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Domain("time grid must be finite and non-negative".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Inverse path by first passage of `D` simulated with step `x_step`:
/// `Y(t) = x_step · min{m : D(m·x_step) > t}` (and `Y(0) = 0`). The
/// discretization overstates `Y` by less than one step.
pub fn inverse_path<R: Rng + ?Sized>(alpha: f64, t_grid: &[f64], x_step: f64, rng: &mut R) -> Result<InversePath> {
    inverse_path_capped(alpha, t_grid, x_step, DEFAULT_MAX_GRID_CELLS, rng)
}

/// [`inverse_path`] with an explicit grid-length cap. The grid is streamed,
/// not stored.
pub fn inverse_path_capped<R: Rng + ?Sized>(
    alpha: f64,
    t_grid: &[f64],
    x_step: f64,
    max_cells: usize,
    rng: &mut R,
) -> Result<InversePath> {
    check_alpha(alpha)?;
    check_grid(t_grid)?;
    if !(x_step > 0.0 && x_step.is_finite()) {
        return Err(Error::Domain(format!("x_step must be positive, got {x_step}")));
    }
    let scale = x_step.powf(1.0 / alpha);
    let mut values = Vec::with_capacity(t_grid.len());
    let mut d = 0.0;
    let mut m = 0usize;
    for &t in t_grid {
        if t == 0.0 {
            values.push(0.0);
            continue;
        }
        while d <= t {
            if m >= max_cells {
                return Err(Error::Grid(format!(
                    "subordinator stayed below {t} after {max_cells} cells of size {x_step}"
                )));
            }
            d += scale * stable_sample(alpha, rng);
            m += 1;
        }
        values.push(m as f64 * x_step);
    }
    Ok(InversePath { alpha, times: t_grid.to_vec(), values })
}

/// `E[Y(t)] = tᵅ / Γ(α+1)`.
pub fn inverse_mean(alpha: f64, t: f64) -> f64 {
    t.powf(alpha) / gamma(alpha + 1.0)
}

/// `E[Y(t)²] = 2 t^{2α} / Γ(2α+1)`.
pub fn inverse_second_moment(alpha: f64, t: f64) -> f64 {
    2.0 * t.powf(2.0 * alpha) / gamma(2.0 * alpha + 1.0)
}

fn check_pair(alpha: f64, s: f64, t: f64) -> Result<()> {
    check_alpha(alpha)?;
    if !(s > 0.0 && s.is_finite() && t.is_finite()) {
        return Err(Error::Domain(format!("times must be positive and finite, got s={s}, t={t}")));
    }
    if s > t {
        return Err(Error::Domain(format!("covariance requires s <= t, got s={s}, t={t}")));
    }
    Ok(())
}

/// Ratio `s/t` up to which [`cross_term`] uses its power series.
pub(crate) const SERIES_RATIO: f64 = 0.5;

/// Coefficients `cₙ = α(−α)ₙ / (n!(α+n))`, `n ≥ 1`, of
/// `α t^{2α} B(α, α+1; s/t) − (st)ᵅ = Σ_{n≥1} cₙ s^{α+n} t^{α−n}`.
pub(crate) fn cross_term_coefficients(alpha: f64) -> impl Iterator<Item = (i32, f64)> {
    let mut q = 1.0;
    (1..).map(move |n: i32| {
        q *= (n as f64 - 1.0 - alpha) / n as f64;
        (n, alpha * q / (alpha + n as f64))
    })
}

/// `F(α; s, t) = α t^{2α} B(α, α+1; s/t) − (st)ᵅ` for `0 < s ≤ t`, by the
/// incomplete beta function.
pub fn cross_term_quadrature(alpha: f64, s: f64, t: f64) -> Result<f64> {
    check_pair(alpha, s, t)?;
    Ok(alpha * t.powf(2.0 * alpha) * incomplete_beta(alpha, alpha + 1.0, s / t)? - (s * t).powf(alpha))
}

/// `F(α; s, t)` by its power series in `s/t`; the leading `(st)ᵅ` terms
/// cancel analytically. Requires `s/t ≤ 1/2`.
pub fn cross_term_series(alpha: f64, s: f64, t: f64) -> Result<f64> {
    check_pair(alpha, s, t)?;
    let x = s / t;
    if x > SERIES_RATIO {
        return Err(Error::Domain(format!("series needs s/t <= {SERIES_RATIO}, got {x}")));
    }
    let mut sum = 0.0;
    let mut xn = 1.0;
    for (n, c) in cross_term_coefficients(alpha) {
        xn *= x;
        let term = c * xn;
        sum += term;
        if n > 2 && term.abs() <= 1e-17 * sum.abs() || n > 200 {
            break;
        }
    }
    Ok((s * t).powf(alpha) * sum)
}

/// `F(α; s, t)` by whichever route is accurate for the ratio `s/t`.
pub fn cross_term(alpha: f64, s: f64, t: f64) -> Result<f64> {
    if s / t <= SERIES_RATIO {
        cross_term_series(alpha, s, t)
    } else {
        cross_term_quadrature(alpha, s, t)
    }
}

/// `Cov(Y(s), Y(t))` for `0 < s ≤ t`:
/// `(α s^{2α} B(α, α+1) + α t^{2α} B(α, α+1; s/t) − (st)ᵅ) / Γ(α+1)²`.
pub fn inverse_cov(alpha: f64, s: f64, t: f64) -> Result<f64> {
    check_pair(alpha, s, t)?;
    let g = gamma(alpha + 1.0);
    let b = beta_fn(alpha, alpha + 1.0);
    Ok((alpha * s.powf(2.0 * alpha) * b + cross_term(alpha, s, t)?) / (g * g))
}

/// Large-`t` form of [`inverse_cov`] at fixed `s`:
/// `(α s^{2α} B(α, α+1) − α²/(α+1) · s^{α+1} / t^{1−α}) / Γ(α+1)²`.
pub fn inverse_cov_asymptotic(alpha: f64, s: f64, t: f64) -> Result<f64> {
    check_pair(alpha, s, t)?;
    let g = gamma(alpha + 1.0);
    let b = beta_fn(alpha, alpha + 1.0);
    let lead = alpha * s.powf(2.0 * alpha) * b;
    let corr = alpha * alpha / (alpha + 1.0) * s.powf(alpha + 1.0) / t.powf(1.0 - alpha);
    Ok((lead - corr) / (g * g))
}
