//! Numerical acceptance checks shared by the `selftest` subcommand and the
//! acceptance test target. Each check returns one verdict plus the measured
//! quantities behind it.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::ctrw::{convergence_report, normalization_laplace};
use crate::dependence::{default_fit_grid, fit_decay_exponent, CorrelationSource};
use crate::error::Result;
use crate::gcp::gcp_pmf_table;
use crate::gfcp::{self, MomentKind, OdeScheme, PmfOptions, SampleMethod};
use crate::mc::{run_chunked, tv_two_sample, tv_vs_exact, CountHistogram, MeanVar, DEFAULT_CHUNKS};
use crate::params::GfcpParams;
use crate::risk::{g_zero, psi_zero, ruin_mc, ClaimDistribution, RiskModel};
use crate::specfun::{ml_derivative, ml_three, MlAccuracy};
use crate::subordinator::{inverse_cov, inverse_cov_asymptotic, inverse_marginal_sample, inverse_mean, inverse_path};

/// How much work a check may do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckBudget {
    /// The stated sample sizes.
    Full,
    /// Only the checks that need no Monte Carlo.
    Fast,
}

pub const CHECK_IDS: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

/// Checks that involve no sampling.
pub const FAST_IDS: [u8; 5] = [1, 2, 3, 6, 9];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    /// Set when the check aborted.
    pub error: Option<String>,
    #[serde(serialize_with = "secs")]
    pub elapsed: Duration,
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl CheckOutcome {
    /// `"PASS"` or `"FAIL"`.
    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Measurement> {
        self.measurements.iter().filter(|m| !m.passed)
    }
}

#[derive(Default)]
struct Tally(Vec<Measurement>);

impl Tally {
    fn push(&mut self, label: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.0.push(Measurement { label: label.into(), passed, detail: detail.into() });
    }
}

pub fn name(id: u8) -> &'static str {
    match id {
        1 => "mittag-leffler",
        2 => "pmf-equivalence",
        3 => "normalization-moments",
        4 => "sampler-agreement",
        5 => "inverse-subordinator",
        6 => "dependence-exponents",
        7 => "ctrw-limit",
        8 => "ruin",
        9 => "governing-equation",
        _ => "unknown",
    }
}

/// Runs check `id`. The seed only affects the sampling checks.
pub fn run(id: u8, budget: CheckBudget, seed: u64) -> CheckOutcome {
    let start = Instant::now();
    let mut tally = Tally::default();
    let res = match id {
        1 => mittag_leffler(&mut tally),
        2 => pmf_equivalence(&mut tally),
        3 => normalization_moments(&mut tally),
        4 => sampler_agreement(&mut tally, budget, seed),
        5 => inverse_subordinator(&mut tally, budget, seed),
        6 => dependence_exponents(&mut tally),
        7 => ctrw_limit(&mut tally, budget, seed),
        8 => ruin(&mut tally, budget, seed),
        9 => governing_equation(&mut tally),
        _ => Err(crate::Error::validation("check", format!("no check numbered {id}"))),
    };
    let error = res.err().map(|e| e.to_string());
    let passed = error.is_none() && !tally.0.is_empty() && tally.0.iter().all(|m| m.passed);
    CheckOutcome { id, name: name(id), passed, measurements: tally.0, error, elapsed: start.elapsed() }
}

fn params(alpha: f64, lambdas: &[f64]) -> GfcpParams {
    GfcpParams::new(alpha, lambdas.to_vec()).expect("check parameters are valid")
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn mittag_leffler(tally: &mut Tally) -> Result<()> {
    let acc = MlAccuracy::default();
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..=800 {
        let x = -20.0 + 0.05 * i as f64;
        let e = ml_three(1.0, 1.0, 1.0, x, &acc)?;
        let r = (e - x.exp()).abs() / x.exp();
        if r > worst.0 {
            worst = (r, x);
        }
    }
    tally.push(
        "E_{1,1}(x) = exp(x) on [-20, 20]",
        worst.0 <= 1e-12,
        format!("max relative error {:.3e} at x = {} (tol 1e-12)", worst.0, worst.1),
    );

    // Richardson-extrapolated central differences of E_{β,γ}
    let stencil = |f: &dyn Fn(f64) -> Result<f64>, n: u32, x: f64, h: f64| -> Result<f64> {
        Ok(match n {
            1 => (f(x + h)? - f(x - h)?) / (2.0 * h),
            2 => (f(x + h)? - 2.0 * f(x)? + f(x - h)?) / (h * h),
            _ => (f(x + 2.0 * h)? - 2.0 * f(x + h)? + 2.0 * f(x - h)? - f(x - 2.0 * h)?) / (2.0 * h * h * h),
        })
    };
    let mut worst = (0.0f64, String::new());
    for &(beta, gam) in &[(0.5, 1.0), (0.8, 1.3), (1.0, 1.0), (0.7, 2.5)] {
        let f = |x: f64| ml_three(beta, gam, 1.0, x, &acc);
        for &x in &[-2.0, -0.5, 0.3, 1.5] {
            for n in 1..=3u32 {
                let h = if n == 3 { 1e-2 } else { 1e-3 };
                let coarse = stencil(&f, n, x, h)?;
                let fine = stencil(&f, n, x, h / 2.0)?;
                let fd = fine + (fine - coarse) / 3.0;
                let d = ml_derivative(beta, gam, n, x, &acc)?;
                let g = rel_gap(d, fd);
                if g > worst.0 {
                    worst = (g, format!("beta {beta}, gamma {gam}, n {n}, x {x}"));
                }
            }
        }
    }
    tally.push(
        "derivative identity vs finite differences, n <= 3",
        worst.0 <= 1e-6,
        format!("max relative gap {:.3e} ({}) (tol 1e-6)", worst.0, worst.1),
    );
    Ok(())
}

fn pmf_equivalence(tally: &mut Tally) -> Result<()> {
    let rates = [0.8, 0.5, 0.3, 0.2, 0.1];
    for k in 1..=5 {
        let p = params(1.0, &rates[..k]);
        let mut worst = 0.0f64;
        for &t in &[0.1, 1.0, 5.0] {
            let a = gfcp::pmf_table(&p, 30, t)?;
            let b = gcp_pmf_table(&p, 30, t)?;
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
        }
        tally.push(format!("k = {k}"), worst <= 1e-10, format!("max |diff| {worst:.3e} over n <= 30 (tol 1e-10)"));
    }
    Ok(())
}

fn normalization_moments(tally: &mut Tally) -> Result<()> {
    let cases: [(f64, &[f64]); 5] =
        [(0.5, &[1.0, 1.0]), (0.6, &[0.5, 0.3, 0.2]), (0.8, &[1.2, 0.4]), (0.9, &[0.7]), (1.0, &[1.0, 0.5, 0.25])];
    // wide enough that the truncated moment sums are complete to double precision
    let n_max = 120;
    let opts = PmfOptions { n_cap: n_max, ..PmfOptions::default() };
    for (alpha, lambdas) in cases {
        let p = params(alpha, lambdas);
        let label = format!("alpha {alpha}, lambdas {lambdas:?}");
        for &t in &[0.5, 1.0, 2.0] {
            let table = gfcp::pmf_table_with(&p, n_max, t, &opts)?;
            let total: f64 = table.iter().sum();
            // Markov bound on the mass beyond n_max from the highest available raw moment
            let tail = (1..=10u32)
                .map(|r| Ok(gfcp::raw_moment(&p, r, t)? / ((n_max + 1) as f64).powi(r as i32)))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            tally.push(
                format!("{label}, t {t}: normalization"),
                (1.0 - total).abs() <= tail + 1e-12,
                format!("1 - sum = {:.3e}, tail bound {tail:.3e}", 1.0 - total),
            );
            let weighted = |f: &dyn Fn(f64) -> f64| table.iter().enumerate().map(|(n, q)| q * f(n as f64)).sum::<f64>();
            let (mean, var) = gfcp::mean_var(&p, t);
            let m1 = weighted(&|n| n);
            let m2 = weighted(&|n| n * n);
            let gap_mean = rel_gap(m1, mean);
            let gap_var = rel_gap(m2 - m1 * m1, var);
            tally.push(
                format!("{label}, t {t}: mean and variance"),
                gap_mean <= 1e-8 && gap_var <= 1e-8,
                format!("relative gaps {gap_mean:.3e}, {gap_var:.3e} (tol 1e-8)"),
            );
            for r in 1..=3u32 {
                let ff = weighted(&|n| (0..r).map(|i| n - i as f64).product());
                let raw = weighted(&|n| n.powi(r as i32));
                let gf = rel_gap(ff, gfcp::moment(&p, MomentKind::Factorial, r, t)?);
                let gr = rel_gap(raw, gfcp::moment(&p, MomentKind::Raw, r, t)?);
                tally.push(
                    format!("{label}, t {t}: moments r = {r}"),
                    gf <= 1e-8 && gr <= 1e-8,
                    format!("factorial gap {gf:.3e}, raw gap {gr:.3e} (tol 1e-8)"),
                );
            }
        }
    }
    Ok(())
}

fn histogram(p: &GfcpParams, t: f64, method: SampleMethod, n: usize, n_max: usize, seed: u64) -> Result<CountHistogram> {
    let parts = run_chunked(n, seed, DEFAULT_CHUNKS, |rng, count| {
        let mut h = CountHistogram::new(n_max);
        for _ in 0..count {
            h.push(gfcp::sample(p, &[t], method, None, rng)?[0]);
        }
        Ok::<_, crate::Error>(h)
    });
    let mut h = CountHistogram::new(n_max);
    for part in parts {
        h.merge(&part?);
    }
    Ok(h)
}

fn sampler_agreement(tally: &mut Tally, budget: CheckBudget, seed: u64) -> Result<()> {
    let n = match budget {
        CheckBudget::Full => 1_000_000,
        CheckBudget::Fast => 100_000,
    };
    let n_max = 30;
    let t = 1.0;
    let cases: [(f64, &[f64]); 3] = [(1.0, &[1.0, 0.5, 0.5]), (0.6, &[1.0, 1.0]), (0.8, &[0.5, 0.3, 0.2, 0.4])];
    for (ci, (alpha, lambdas)) in cases.into_iter().enumerate() {
        let p = params(alpha, lambdas);
        let label = format!("alpha {alpha}, lambdas {lambdas:?}");
        let exact = gfcp::pmf_table(&p, n_max, t)?;
        let mut methods = vec![SampleMethod::TimeChange, SampleMethod::Compound];
        if p.is_alpha_one() {
            methods.push(SampleMethod::SuperposeGcp);
        }
        let mut hists = Vec::new();
        for (mi, &m) in methods.iter().enumerate() {
            let h = histogram(&p, t, m, n, n_max, seed.wrapping_add((10 * ci + mi) as u64))?;
            let tv = tv_vs_exact(&h, &exact);
            tally.push(
                format!("{label}: {m:?} vs exact"),
                tv.tv < 0.01,
                format!("TV {:.4e} (se {:.1e}) (tol 1e-2)", tv.tv, tv.se),
            );
            hists.push(h);
        }
        for i in 0..hists.len() {
            for j in i + 1..hists.len() {
                let tv = tv_two_sample(&hists[i], &hists[j]);
                tally.push(
                    format!("{label}: {:?} vs {:?}", methods[i], methods[j]),
                    tv.tv < 0.01,
                    format!("TV {:.4e} (se {:.1e}) (tol 1e-2)", tv.tv, tv.se),
                );
            }
        }
    }
    Ok(())
}

fn inverse_subordinator(tally: &mut Tally, budget: CheckBudget, seed: u64) -> Result<()> {
    let (n_marginal, n_paths) = match budget {
        CheckBudget::Full => (1_000_000, 100_000),
        CheckBudget::Fast => (100_000, 20_000),
    };
    for (ai, &alpha) in [0.5, 0.7].iter().enumerate() {
        for &t in &[1.0, 2.0] {
            let parts = run_chunked(n_marginal, seed.wrapping_add(ai as u64), DEFAULT_CHUNKS, |rng, count| {
                (0..count).map(|_| inverse_marginal_sample(alpha, t, rng)).collect::<MeanVar>()
            });
            let mut acc = MeanVar::new();
            for part in &parts {
                acc.merge(part);
            }
            let want = inverse_mean(alpha, t);
            let z = (acc.mean() - want) / acc.std_error();
            tally.push(
                format!("alpha {alpha}: E[Y({t})]"),
                z.abs() <= 4.0,
                format!("MC {:.6} (se {:.1e}) vs {want:.6}, {z:+.2} SE (tol 4 SE)", acc.mean(), acc.std_error()),
            );
        }

        let x_step = 1e-3;
        let parts = run_chunked(n_paths, seed.wrapping_add(100 + ai as u64), DEFAULT_CHUNKS, |rng, count| {
            (0..count)
                .map(|_| inverse_path(alpha, &[1.0, 2.0], x_step, rng).map(|p| (p.values[0], p.values[1])))
                .collect::<Result<Vec<_>>>()
        });
        let mut xs = Vec::with_capacity(n_paths);
        let mut ys = Vec::with_capacity(n_paths);
        for part in parts {
            for (x, y) in part? {
                xs.push(x);
                ys.push(y);
            }
        }
        let st = crate::mc::pair_stats(&xs, &ys);
        let want = inverse_cov(alpha, 1.0, 2.0)?;
        let rel = (st.cov - want).abs() / want;
        tally.push(
            format!("alpha {alpha}: Cov(Y(1), Y(2))"),
            rel <= 0.05,
            format!("MC {:.6} vs {want:.6}, relative gap {rel:.3e} (tol 5%)", st.cov),
        );

        let exact = inverse_cov(alpha, 1.0, 100.0)?;
        let asym = inverse_cov_asymptotic(alpha, 1.0, 100.0)?;
        let rel = (asym - exact).abs() / exact;
        tally.push(
            format!("alpha {alpha}: asymptote at t/s = 100"),
            rel <= 0.05,
            format!("asymptote {asym:.6} vs exact {exact:.6}, relative gap {rel:.3e} (tol 5%)"),
        );
    }
    Ok(())
}

fn dependence_exponents(tally: &mut Tally) -> Result<()> {
    let grid = default_fit_grid(1.0);
    for &alpha in &[0.3, 0.5, 0.7, 0.9] {
        for lambdas in [&[1.0][..], &[1.0, 1.0], &[1.0, 1.0, 1.0]] {
            let p = params(alpha, lambdas);
            let k = lambdas.len();
            let lrd = fit_decay_exponent(&p, 1.0, 0.0, &grid, CorrelationSource::Exact)?;
            tally.push(
                format!("LRD alpha {alpha}, k {k}"),
                (lrd.fitted_theta - lrd.target_theta).abs() <= 0.02,
                format!("slope {:.4} vs {:.4} (tol 0.02)", -lrd.fitted_theta, -lrd.target_theta),
            );
            let srd = fit_decay_exponent(&p, 1.0, 1.0, &grid, CorrelationSource::Exact)?;
            tally.push(
                format!("SRD alpha {alpha}, k {k}"),
                (srd.fitted_theta - srd.target_theta).abs() <= 0.05,
                format!("slope {:.4} vs {:.4} (tol 0.05)", -srd.fitted_theta, -srd.target_theta),
            );
        }
    }
    Ok(())
}

fn ctrw_limit(tally: &mut Tally, budget: CheckBudget, seed: u64) -> Result<()> {
    let (n, laplace_samples) = match budget {
        CheckBudget::Full => (1_000_000, 4000),
        CheckBudget::Fast => (100_000, 500),
    };
    let p = params(0.5, &[1.0, 1.0]);
    let rows = convergence_report(&p, &[1e2, 1e3, 1e4], 1.0, n, 60, seed)?;
    for w in rows.windows(2) {
        let allowance = 2.0 * (w[0].tv_se.powi(2) + w[1].tv_se.powi(2)).sqrt();
        tally.push(
            format!("TV c = {} -> {}", w[0].c, w[1].c),
            w[1].tv <= w[0].tv + allowance,
            format!("{:.4e} -> {:.4e} (allowance {allowance:.1e})", w[0].tv, w[1].tv),
        );
    }
    let s_values = [0.5, 1.0, 2.0];
    let est = normalization_laplace(0.5, 100_000, &s_values, laplace_samples, seed.wrapping_add(1000));
    for (&s, (mean, se)) in s_values.iter().zip(est) {
        let want = (-s.powf(0.5)).exp();
        let z = (mean - want) / se;
        tally.push(
            format!("Laplace transform at s = {s}"),
            z.abs() <= 4.0,
            format!("MC {mean:.6} (se {se:.1e}) vs {want:.6}, {z:+.2} SE (tol 4 SE)"),
        );
    }
    Ok(())
}

fn ruin(tally: &mut Tally, budget: CheckBudget, seed: u64) -> Result<()> {
    let n_paths = match budget {
        CheckBudget::Full => 100_000,
        CheckBudget::Fast => 10_000,
    };
    let families = [ClaimDistribution::Exponential { mean: 1.0 }, ClaimDistribution::Deterministic { value: 1.0 }];
    for (fi, claims) in families.into_iter().enumerate() {
        let label = format!("{claims:?}");
        let m = RiskModel::new(params(1.0, &[1.0, 1.0]), 6.0, claims, 0.0)?;
        let psi = psi_zero(&m);
        let ys = [Some(0.5), Some(1.0), Some(2.0), None];
        let est = ruin_mc(&m, &ys, n_paths, seed.wrapping_add(fi as u64))?;
        let psi_mc = est[3];
        tally.push(
            format!("{label}: psi(0)"),
            (psi_mc.estimate - psi).abs() <= 0.01,
            format!("MC {:.5} (se {:.1e}) vs {psi}, horizon {:.1} (tol 0.01)", psi_mc.estimate, psi_mc.se, m.horizon()),
        );
        for e in &est[..3] {
            let y = e.y.expect("finite y");
            let exact = g_zero(&m, y)?;
            let z = (e.estimate - exact) / e.se;
            tally.push(
                format!("{label}: G(0, {y})"),
                z.abs() <= 4.0,
                format!("MC {:.5} (se {:.1e}) vs {exact:.6}, {z:+.2} SE (tol 4 SE)", e.estimate, e.se),
            );
        }
        let far = g_zero(&m, 50.0)?;
        tally.push(format!("{label}: G(0, 50) -> psi(0)"), (far - psi).abs() <= 1e-6, format!("{far:.10} vs {psi}"));
    }
    Ok(())
}

fn governing_equation(tally: &mut Tally) -> Result<()> {
    let p = params(1.0, &[1.0, 0.5, 0.25]);
    let mut worst = 0.0f64;
    for &t in &[0.1, 0.5, 1.0, 2.0, 5.0] {
        for n in 0..=10 {
            worst = worst.max(gfcp::ode_residual(&p, n, t, OdeScheme::ExactAlpha1)?);
        }
    }
    tally.push("alpha 1, n <= 10", worst < 1e-6, format!("max residual {worst:.3e} (tol 1e-6)"));
    for &alpha in &[0.5, 0.7] {
        let p = params(alpha, &[1.0, 0.5]);
        let mut worst = 0.0f64;
        for &t in &[0.5, 1.0, 2.0] {
            for n in 0..=3 {
                worst = worst.max(gfcp::ode_residual(&p, n, t, OdeScheme::l1_default())?);
            }
        }
        tally.push(format!("alpha {alpha} (L1), n <= 3"), worst < 1e-2, format!("max residual {worst:.3e} (tol 1e-2)"));
    }
    Ok(())
}
