//! The `α = 1` process: a Lévy process equal to `Σ j Nⱼ(t)` for independent
//! Poisson processes `Nⱼ` with rates `λⱼ`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::GfcpParams;

/// Above this value of `Λt` the recurrence is carried in log space.
const LOG_SPACE_THRESHOLD: f64 = 700.0;

fn require_alpha_one(p: &GfcpParams) -> Result<()> {
    if p.is_alpha_one() {
        Ok(())
    } else {
        Err(Error::Domain(format!("operation requires alpha = 1, got {}", p.alpha())))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be finite and non-negative, got {t}")))
    }
}

/// `p(0..=n_max, t)` by the recurrence `p(n) = (t/n) Σⱼ jλⱼ p(n−j)`.
pub fn gcp_pmf_table(p: &GfcpParams, n_max: usize, t: f64) -> Result<Vec<f64>> {
    require_alpha_one(p)?;
    check_time(t)?;
    let lam = p.lambdas();
    let lt = p.lambda_sum() * t;
    if t == 0.0 {
        let mut out = vec![0.0; n_max + 1];
        out[0] = 1.0;
        return Ok(out);
    }
    if lt <= LOG_SPACE_THRESHOLD {
        let mut out = Vec::with_capacity(n_max + 1);
        out.push((-lt).exp());
        for n in 1..=n_max {
            let mut acc = 0.0;
            for (j, &l) in (1..=n.min(lam.len())).zip(lam) {
                acc += j as f64 * l * out[n - j];
            }
            out.push(t / n as f64 * acc);
        }
        return Ok(out);
    }
    let log = gcp_log_pmf_table(p, n_max, t)?;
    Ok(log.into_iter().map(f64::exp).collect())
}

/// `ln p(0..=n_max, t)`; entries for impossible counts are `-inf`.
pub fn gcp_log_pmf_table(p: &GfcpParams, n_max: usize, t: f64) -> Result<Vec<f64>> {
    require_alpha_one(p)?;
    check_time(t)?;
    if t == 0.0 {
        let mut out = vec![f64::NEG_INFINITY; n_max + 1];
        out[0] = 0.0;
        return Ok(out);
    }
    let lam = p.lambdas();
    let log_t = t.ln();
    let log_w: Vec<f64> = (1..).zip(lam).map(|(j, &l)| (j as f64 * l).ln()).collect();
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(-p.lambda_sum() * t);
    let mut terms = Vec::with_capacity(lam.len());
    for n in 1..=n_max {
        terms.clear();
        for j in 1..=n.min(lam.len()) {
            let v = log_w[j - 1] + out[n - j];
            if v.is_finite() {
                terms.push(v);
            }
        }
        let v = if terms.is_empty() {
            f64::NEG_INFINITY
        } else {
            let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + terms.iter().map(|x| (x - m).exp()).sum::<f64>().ln() + log_t - (n as f64).ln()
        };
        out.push(v);
    }
    Ok(out)
}

/// `Pr{M(t) = n}` for the `α = 1` process.
pub fn gcp_pmf(p: &GfcpParams, n: usize, t: f64) -> Result<f64> {
    Ok(gcp_pmf_table(p, n, t)?[n].clamp(0.0, 1.0))
}

/// `E[e^{iξM(t)}] = exp(−t Σⱼ (1 − e^{iξj}) λⱼ)`.
pub fn gcp_char_fn(p: &GfcpParams, xi: f64, t: f64) -> Result<Complex64> {
    require_alpha_one(p)?;
    check_time(t)?;
    let mut expo = Complex64::new(0.0, 0.0);
    for (j, l) in p.levy_atoms() {
        expo += (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, xi * j as f64)) * l;
    }
    Ok((-expo * t).exp())
}

/// Lévy measure as atoms `(j, λⱼ)`.
pub fn levy_atoms(p: &GfcpParams) -> Vec<(usize, f64)> {
    p.levy_atoms()
}

/// One jump of a counting path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub jump: u32,
}

/// Right-continuous piecewise-constant counting path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePath {
    horizon: f64,
    events: Vec<Event>,
    cumulative: Vec<u64>,
}

impl SamplePath {
    /// Builds a path from events sorted by strictly increasing time.
    pub fn new(horizon: f64, events: Vec<Event>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon must be positive and finite, got {horizon}")));
        }
        if events.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::Domain("event times must be strictly increasing".into()));
        }
        if events.iter().any(|e| e.jump == 0 || !(e.time > 0.0 && e.time <= horizon)) {
            return Err(Error::Domain("events must have positive jumps at times in (0, horizon]".into()));
        }
        let mut acc = 0u64;
        let cumulative = events
            .iter()
            .map(|e| {
                acc += u64::from(e.jump);
                acc
            })
            .collect();
        Ok(Self { horizon, events, cumulative })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Running totals after each event.
    pub fn cumulative(&self) -> &[u64] {
        &self.cumulative
    }

    /// `M(t)`: total of jumps at times `≤ t`.
    pub fn value(&self, t: f64) -> u64 {
        let i = self.events.partition_point(|e| e.time <= t);
        if i == 0 {
            0
        } else {
            self.cumulative[i - 1]
        }
    }

    /// Rows `(time, jump, cumulative value)`.
    pub fn rows(&self) -> impl Iterator<Item = (f64, u32, u64)> + '_ {
        self.events.iter().zip(&self.cumulative).map(|(e, &c)| (e.time, e.jump, c))
    }
}

/// Exact path on `[0, horizon]` by superposing one Poisson stream per jump
/// size.
pub fn gcp_sample_path<R: Rng + ?Sized>(p: &GfcpParams, horizon: f64, rng: &mut R) -> Result<SamplePath> {
    require_alpha_one(p)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive and finite, got {horizon}")));
    }
    let mut events = Vec::new();
    for (j, l) in p.levy_atoms() {
        let gap = Exp::new(l).expect("positive rate");
        let mut clock = gap.sample(rng);
        while clock <= horizon {
            events.push(Event { time: clock, jump: j as u32 });
            clock += gap.sample(rng);
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    // ties have probability zero but are possible in floating point
    events.dedup_by(|b, a| {
        if a.time == b.time {
            a.jump += b.jump;
            true
        } else {
            false
        }
    });
    SamplePath::new(horizon, events)
}

/// `M(t)` at a single time, drawn as `Σ j·Poisson(λⱼ t)`. Valid for any
/// rate vector regardless of `α`; the caller supplies the operational time.
pub fn gcp_sample_count<R: Rng + ?Sized>(p: &GfcpParams, t: f64, rng: &mut R) -> u64 {
    let mut total = 0u64;
    if t <= 0.0 {
        return 0;
    }
    for (j, l) in p.levy_atoms() {
        let mean = l * t;
        let draw: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
        total += j as u64 * draw as u64;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::stream;

    fn gcp(l: Vec<f64>) -> GfcpParams {
        GfcpParams::new(1.0, l).unwrap()
    }

    #[test]
    fn poisson_reduction() {
        let v = gcp_pmf(&gcp(vec![1.0]), 2, 1.0).unwrap();
        assert!((v - (-1.0f64).exp() / 2.0).abs() < 1e-16);
        let p = gcp(vec![0.3, 1.2, 0.5]);
        assert!((gcp_pmf(&p, 0, 2.5).unwrap() - (-2.0 * 2.5f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn requires_alpha_one() {
        let p = GfcpParams::new(0.5, vec![1.0]).unwrap();
        assert!(matches!(gcp_pmf(&p, 1, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn log_space_agrees_with_direct() {
        let p = gcp(vec![1.0, 0.5, 2.0]);
        let direct = gcp_pmf_table(&p, 40, 3.0).unwrap();
        let log = gcp_log_pmf_table(&p, 40, 3.0).unwrap();
        for (a, b) in direct.iter().zip(&log) {
            assert!((a - b.exp()).abs() <= 1e-14 * a.max(1e-300) + 1e-300, "{a} {}", b.exp());
        }
    }

    #[test]
    fn large_intensity_does_not_underflow_to_zero_everywhere() {
        let p = gcp(vec![1.0]);
        let t = 1000.0;
        let tab = gcp_pmf_table(&p, 1100, t).unwrap();
        let mass: f64 = tab.iter().sum();
        assert!(mass > 0.99, "{mass}");
        // Poisson(1000) mode value ≈ 1/sqrt(2π·1000)
        assert!((tab[1000] - 0.012_614_6).abs() < 1e-6);
    }

    #[test]
    fn char_fn_poisson() {
        let p = gcp(vec![1.5]);
        let (xi, t) = (0.7, 2.0);
        let got = gcp_char_fn(&p, xi, t).unwrap();
        let want = (Complex64::new(0.0, xi).exp() - 1.0).scale(1.5 * t).exp();
        assert!((got - want).norm() < 1e-14);
        assert!((gcp_char_fn(&p, 0.0, t).unwrap() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn path_only_largest_jump() {
        let p = gcp(vec![0.0, 0.0, 2.0]);
        let path = gcp_sample_path(&p, 10.0, &mut stream(1, 0)).unwrap();
        assert!(!path.events().is_empty());
        assert!(path.events().iter().all(|e| e.jump == 3));
        assert_eq!(path.value(10.0), 3 * path.events().len() as u64);
        assert_eq!(path.value(0.0), 0);
    }

    #[test]
    fn path_is_monotone() {
        let p = gcp(vec![1.0, 2.0]);
        let path = gcp_sample_path(&p, 5.0, &mut stream(2, 0)).unwrap();
        let mut last = 0;
        for i in 0..=500 {
            let v = path.value(i as f64 / 100.0);
            assert!(v >= last);
            last = v;
        }
        assert_eq!(path.cumulative().last().copied().unwrap_or(0), path.value(5.0));
    }
}
