use std::ops::RangeInclusive;

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};

use gfcp_core::checks::{self, CheckBudget, CHECK_IDS, FAST_IDS};
use gfcp_core::ctrw::convergence_report;
use gfcp_core::dependence::{default_fit_grid, fit_decay_exponent, CorrelationSource};
use gfcp_core::gcp::{gcp_char_fn, gcp_sample_path};
use gfcp_core::gfcp::{self, MomentKind, PmfOptions, SampleMethod};
use gfcp_core::mc::{run_chunked, DEFAULT_CHUNKS};
use gfcp_core::params::{GfcpParams, ParamsSpec};
use gfcp_core::risk::{g_zero, psi_zero, ruin_mc, safety_loading, ClaimDistribution, RiskModel};
use gfcp_core::specfun::{ml_derivative, ml_three, MlAccuracy};
use gfcp_core::subordinator::{inverse_cov, inverse_cov_asymptotic, inverse_mean};

use crate::output::{digest, Cell, Document, Table};
use crate::{CliError, Command, Global};

type CmdResult = Result<(Document, usize), CliError>;

#[derive(Debug, Args, Serialize)]
pub struct MlArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Comma-separated arguments.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    x: Vec<f64>,
    /// Order of the derivative of E_{β,γ}; `--delta` must then be 1.
    #[arg(long)]
    derivative: Option<u32>,
    #[arg(long, default_value_t = 1e-12)]
    rel_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PmfArgs {
    /// Counts: `a..b` (inclusive), a single value, or a comma-separated list.
    #[arg(long, default_value = "0..10")]
    n: String,
    #[arg(long, value_delimiter = ',', required = true)]
    t: Vec<f64>,
    /// Largest count served by the composition sum.
    #[arg(long, default_value_t = gfcp::DEFAULT_PMF_CAP)]
    n_cap: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct MomentsArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    t: Vec<f64>,
    /// Highest factorial and raw moment order.
    #[arg(long, default_value_t = 3)]
    order: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct CovArgs {
    #[arg(long)]
    s: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    t: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum MethodArg {
    TimeChange,
    Compound,
    SuperposeGcp,
}

impl From<MethodArg> for SampleMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::TimeChange => SampleMethod::TimeChange,
            MethodArg::Compound => SampleMethod::Compound,
            MethodArg::SuperposeGcp => SampleMethod::SuperposeGcp,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    /// Increasing time grid.
    #[arg(long, value_delimiter = ',', required_unless_present = "events")]
    t: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    paths: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::TimeChange)]
    method: MethodArg,
    /// Inverse-subordinator grid step for the time-change method.
    #[arg(long)]
    x_step: Option<f64>,
    /// Emit jump events up to `--horizon` instead of grid values (alpha = 1).
    #[arg(long, requires = "horizon")]
    events: bool,
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct CharfnArgs {
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    xi: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    t: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SubordinatorArgs {
    /// Stability index; taken from `--params` when omitted.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    t: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct DependenceArgs {
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    /// Increment lag; 0 studies the process itself.
    #[arg(long, default_value_t = 0.0)]
    h: f64,
    /// Fit grid (default: 20 log-spaced points over [100 s, 10000 s]).
    #[arg(long, value_delimiter = ',')]
    t: Vec<f64>,
    /// Adds Monte Carlo correlations from this many paths.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    x_step: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct CtrwArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
    c_grid: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Counts above this share one tail bin.
    #[arg(long, default_value_t = 60)]
    n_max: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ClaimsArg {
    Exponential,
    Deterministic,
    Empirical,
}

#[derive(Debug, Args, Serialize)]
pub struct RuinArgs {
    /// Premium rate.
    #[arg(long)]
    c: f64,
    /// Claim mean (exponential and deterministic claims).
    #[arg(long, required_unless_present = "claim_values")]
    mu: Option<f64>,
    #[arg(long, value_enum, default_value_t = ClaimsArg::Exponential)]
    claims: ClaimsArg,
    /// Claim sizes resampled by the empirical family.
    #[arg(long, value_delimiter = ',')]
    claim_values: Vec<f64>,
    /// Initial capital.
    #[arg(long, default_value_t = 0.0)]
    u: f64,
    /// Deficit bounds (default: half, one and two claim means).
    #[arg(long, value_delimiter = ',')]
    y: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    /// Simulation horizon (default: max(1e3/Λ, 1e3 μ/(c − μΣjλⱼ))).
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SelftestArgs {
    /// Runs every check at its full sample size.
    #[arg(long)]
    full: bool,
    /// Restricts the run to these check numbers.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
}

pub fn dispatch(global: &Global, command: &Command) -> CmdResult {
    match command {
        Command::Ml(a) => ml(global, a),
        Command::Pmf(a) => pmf(global, a),
        Command::Moments(a) => moments(global, a),
        Command::Cov(a) => cov(global, a),
        Command::Sample(a) => sample(global, a),
        Command::Charfn(a) => charfn(global, a),
        Command::Subordinator(a) => subordinator(global, a),
        Command::Dependence(a) => dependence(global, a),
        Command::Ctrw(a) => ctrw(global, a),
        Command::Ruin(a) => ruin(global, a),
        Command::Selftest(a) => selftest(global, a),
    }
}

fn load_params(global: &Global) -> Result<Option<GfcpParams>, CliError> {
    let Some(src) = &global.params else { return Ok(None) };
    let text = if src.trim_start().starts_with('{') {
        src.clone()
    } else {
        std::fs::read_to_string(src).map_err(|e| CliError::Input(format!("cannot read params file `{src}`: {e}")))?
    };
    Ok(Some(ParamsSpec::from_json(&text)?.resolve()?))
}

fn require_params(global: &Global) -> Result<GfcpParams, CliError> {
    load_params(global)?.ok_or_else(|| CliError::Usage("this subcommand needs --params".into()))
}

/// Header shared by every output: the resolved configuration, seed and a
/// digest of the resolved parameters.
fn document<A: Serialize>(command: &str, args: &A, global: &Global, params: Option<&GfcpParams>) -> Document {
    let mut meta = Map::new();
    meta.insert("tool".into(), Value::from(format!("gfcp {}", env!("CARGO_PKG_VERSION"))));
    meta.insert("command".into(), Value::from(command));
    meta.insert("seed".into(), Value::from(global.seed));
    meta.insert("config".into(), serde_json::to_value(args).expect("arguments serialize"));
    if let Some(p) = params {
        meta.insert("params".into(), serde_json::to_value(p).expect("params serialize"));
        meta.insert("params_sha256".into(), Value::from(digest(p)));
    }
    Document { meta, ..Document::default() }
}

fn parse_counts(spec: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse counts `{spec}`; use a..b, n or a comma-separated list"));
    if let Some((a, b)) = spec.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok(RangeInclusive::new(a, b).collect());
    }
    spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn ml(global: &Global, a: &MlArgs) -> CmdResult {
    let acc = MlAccuracy { rel_tol: a.rel_tol, ..MlAccuracy::default() };
    acc.validate()?;
    if a.derivative.is_some() && a.delta != 1.0 {
        return Err(CliError::Usage("--derivative applies to the two-parameter function; drop --delta".into()));
    }
    let mut doc = document("ml", a, global, None);
    let mut table = Table::new(&["x", "value"]);
    for &x in &a.x {
        let v = match a.derivative {
            Some(n) => ml_derivative(a.beta, a.gamma, n, x, &acc)?,
            None => ml_three(a.beta, a.gamma, a.delta, x, &acc)?,
        };
        table.push(vec![x.into(), v.into()]);
    }
    doc.table = Some(table);
    Ok((doc, 0))
}

fn pmf(global: &Global, a: &PmfArgs) -> CmdResult {
    let p = require_params(global)?;
    let ns = parse_counts(&a.n)?;
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let opts = PmfOptions { n_cap: a.n_cap, ..PmfOptions::default() };
    let mut doc = document("pmf", a, global, Some(&p));
    let mut table = Table::new(&["n", "t", "value"]);
    for &t in &a.t {
        let values = gfcp::pmf_table_with(&p, n_max, t, &opts)?;
        for &n in &ns {
            table.push(vec![n.into(), t.into(), values[n].into()]);
        }
    }
    doc.table = Some(table);
    Ok((doc, 0))
}

const FACTORIAL_COLUMNS: [&str; 10] = [
    "factorial_1", "factorial_2", "factorial_3", "factorial_4", "factorial_5", "factorial_6", "factorial_7",
    "factorial_8", "factorial_9", "factorial_10",
];
const RAW_COLUMNS: [&str; 10] = ["raw_1", "raw_2", "raw_3", "raw_4", "raw_5", "raw_6", "raw_7", "raw_8", "raw_9", "raw_10"];

fn moments(global: &Global, a: &MomentsArgs) -> CmdResult {
    let p = require_params(global)?;
    if !(1..=10).contains(&a.order) {
        return Err(CliError::Usage("--order must lie in 1..=10".into()));
    }
    let r = a.order as usize;
    let mut columns = vec!["t", "mean", "var"];
    columns.extend_from_slice(&FACTORIAL_COLUMNS[..r]);
    columns.extend_from_slice(&RAW_COLUMNS[..r]);
    let mut doc = document("moments", a, global, Some(&p));
    let mut table = Table::new(&columns);
    for &t in &a.t {
        let (mean, var) = gfcp::mean_var(&p, t);
        let mut row: Vec<Cell> = vec![t.into(), mean.into(), var.into()];
        for kind in [MomentKind::Factorial, MomentKind::Raw] {
            for k in 1..=a.order {
                row.push(gfcp::moment(&p, kind, k, t)?.into());
            }
        }
        table.push(row);
    }
    doc.table = Some(table);
    Ok((doc, 0))
}

fn cov(global: &Global, a: &CovArgs) -> CmdResult {
    let p = require_params(global)?;
    let mut doc = document("cov", a, global, Some(&p));
    let mut table = Table::new(&["s", "t", "mean", "var", "cov", "corr"]);
    for &t in &a.t {
        let (mean, var) = gfcp::mean_var(&p, t);
        table.push(vec![
            a.s.into(),
            t.into(),
            mean.into(),
            var.into(),
            gfcp::covariance(&p, a.s, t)?.into(),
            gfcp::correlation(&p, a.s, t)?.into(),
        ]);
    }
    doc.table = Some(table);
    Ok((doc, 0))
}

fn sample(global: &Global, a: &SampleArgs) -> CmdResult {
    let p = require_params(global)?;
    if a.paths == 0 {
        return Err(CliError::Usage("--paths must be at least 1".into()));
    }
    let mut doc = document("sample", a, global, Some(&p));
    if a.events {
        let horizon = a.horizon.expect("clap enforces --horizon");
        let parts = run_chunked(a.paths, global.seed, DEFAULT_CHUNKS, |rng, count| {
            (0..count).map(|_| gcp_sample_path(&p, horizon, rng)).collect::<gfcp_core::Result<Vec<_>>>()
        });
        let mut table = Table::new(&["path", "time", "jump", "cumulative"]);
        let mut index = 0usize;
        for part in parts {
            for path in part? {
                for (time, jump, cumulative) in path.rows() {
                    table.push(vec![index.into(), time.into(), jump.into(), cumulative.into()]);
                }
                index += 1;
            }
        }
        doc.table = Some(table);
        return Ok((doc, 0));
    }
    let method = SampleMethod::from(a.method);
    let parts = run_chunked(a.paths, global.seed, DEFAULT_CHUNKS, |rng, count| {
        (0..count).map(|_| gfcp::sample(&p, &a.t, method, a.x_step, rng)).collect::<gfcp_core::Result<Vec<_>>>()
    });
    let mut table = Table::new(&["path", "t", "value"]);
    let mut index = 0usize;
    for part in parts {
        for values in part? {
            for (&t, v) in a.t.iter().zip(values) {
                table.push(vec![index.into(), t.into(), v.into()]);
            }
            index += 1;
        }
    }
    doc.table = Some(table);
    Ok((doc, 0))
}

fn charfn(global: &Global, a: &CharfnArgs) -> CmdResult {
    let p = require_params(global)?;
    let mut doc = document("charfn", a, global, Some(&p));
    let mut table = Table::new(&["xi", "t", "re", "im"]);
    for &t in &a.t {
        for &xi in &a.xi {
            let z = gcp_char_fn(&p, xi, t)?;
            table.push(vec![xi.into(), t.into(), z.re.into(), z.im.into()]);
        }
    }
    doc.table = Some(table);
    Ok((doc, 0))
}

fn subordinator(global: &Global, a: &SubordinatorArgs) -> CmdResult {
    let params = load_params(global)?;
    let alpha = match (a.alpha, &params) {
        (Some(x), _) => x,
        (None, Some(p)) => p.alpha(),
        (None, None) => return Err(CliError::Usage("give --alpha or --params".into())),
    };
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Input(format!("the subordinator needs 0 < alpha < 1, got {alpha}")));
    }
    let mut doc = document("subordinator", a, global, params.as_ref());
    doc.meta.insert("alpha".into(), Value::from(alpha));
    let mut table = Table::new(&["t", "mean", "cov_exact", "cov_asymptotic"]);
    for &t in &a.t {
        let (c, ca) = if t >= a.s {
            (inverse_cov(alpha, a.s, t)?, inverse_cov_asymptotic(alpha, a.s, t)?)
        } else {
            (inverse_cov(alpha, t, a.s)?, inverse_cov_asymptotic(alpha, t, a.s)?)
        };
        table.push(vec![t.into(), inverse_mean(alpha, t).into(), c.into(), ca.into()]);
    }
    doc.table = Some(table);
    Ok((doc, 0))
}

fn dependence(global: &Global, a: &DependenceArgs) -> CmdResult {
    let p = require_params(global)?;
    let grid = if a.t.is_empty() { default_fit_grid(a.s) } else { a.t.clone() };
    let source = match a.paths {
        Some(paths) => CorrelationSource::MonteCarlo { paths, seed: global.seed, x_step: a.x_step },
        None => CorrelationSource::Exact,
    };
    let report = fit_decay_exponent(&p, a.s, a.h, &grid, source)?;
    let mut doc = document("dependence", a, global, Some(&p));
    doc.summary.insert("fitted_theta".into(), Value::from(report.fitted_theta));
    doc.summary.insert("target_theta".into(), Value::from(report.target_theta));
    doc.summary.insert("fit_rms_residual".into(), Value::from(report.fit_rms_residual));
    doc.summary.insert("prefactor".into(), Value::from(report.prefactor));
    doc.summary.insert("classification".into(), serde_json::to_value(report.classification).expect("enum serializes"));
    let mut table = Table::new(&["t", "corr_exact", "corr_mc", "se"]);
    for (i, (&t, &exact)) in report.t_grid.iter().zip(&report.corr_exact).enumerate() {
        let (mc, se) = match &report.corr_mc {
            Some(v) => (Some(v[i].0), Some(v[i].1)),
            None => (None, None),
        };
        table.push(vec![t.into(), exact.into(), mc.into(), se.into()]);
    }
    doc.table = Some(table);
    Ok((doc, 0))
}

fn ctrw(global: &Global, a: &CtrwArgs) -> CmdResult {
    let p = require_params(global)?;
    let rows = convergence_report(&p, &a.c_grid, a.t, a.samples, a.n_max, global.seed)?;
    let mut doc = document("ctrw", a, global, Some(&p));
    let mut table = Table::new(&["c", "tv", "tv_se", "sup_gap"]);
    for r in rows {
        table.push(vec![r.c.into(), r.tv.into(), r.tv_se.into(), r.sup_gap.into()]);
    }
    doc.table = Some(table);
    Ok((doc, 0))
}

fn ruin(global: &Global, a: &RuinArgs) -> CmdResult {
    let p = require_params(global)?;
    let claims = match a.claims {
        ClaimsArg::Empirical => ClaimDistribution::Empirical { values: a.claim_values.clone() },
        ClaimsArg::Exponential | ClaimsArg::Deterministic => {
            let mean = a.mu.ok_or_else(|| CliError::Usage("--mu is required for this claim family".into()))?;
            if matches!(a.claims, ClaimsArg::Exponential) {
                ClaimDistribution::Exponential { mean }
            } else {
                ClaimDistribution::Deterministic { value: mean }
            }
        }
    };
    let mut model = RiskModel::new(p.clone(), a.c, claims, a.u)?;
    if let Some(h) = a.horizon {
        model = model.with_horizon(h)?;
    }
    let mu = model.claims().mean();
    let ys = if a.y.is_empty() { vec![0.5 * mu, mu, 2.0 * mu] } else { a.y.clone() };
    let mut targets: Vec<Option<f64>> = ys.iter().copied().map(Some).collect();
    targets.push(None);
    let est = ruin_mc(&model, &targets, a.paths, global.seed)?;
    let psi_mc = est[ys.len()];
    // the closed forms hold at zero capital; G(0, y) also needs an analytic claim law
    let zero_capital = a.u == 0.0;
    let analytic = zero_capital && !matches!(a.claims, ClaimsArg::Empirical);

    let mut doc = document("ruin", a, global, Some(&p));
    doc.summary.insert("eta".into(), Value::from(safety_loading(&model)));
    doc.summary.insert("psi0_exact".into(), if zero_capital { Value::from(psi_zero(&model)) } else { Value::Null });
    doc.summary.insert("psi0_mc".into(), Value::from(psi_mc.estimate));
    doc.summary.insert("se".into(), Value::from(psi_mc.se));
    doc.summary.insert("horizon".into(), Value::from(model.horizon()));
    doc.summary.insert("finite_horizon_bias".into(), Value::from("mc estimates underestimate infinite-horizon ruin"));
    let mut table = Table::new(&["y", "exact", "mc", "se"]).keyed("G0y_table");
    for (y, e) in ys.iter().zip(&est) {
        let exact = if analytic { Some(g_zero(&model, *y)?) } else { None };
        table.push(vec![(*y).into(), exact.into(), e.estimate.into(), e.se.into()]);
    }
    doc.table = Some(table);
    Ok((doc, 0))
}

fn selftest(global: &Global, a: &SelftestArgs) -> CmdResult {
    let budget = if a.full { CheckBudget::Full } else { CheckBudget::Fast };
    let ids: Vec<u8> = if !a.only.is_empty() {
        if let Some(bad) = a.only.iter().find(|i| !CHECK_IDS.contains(i)) {
            return Err(CliError::Usage(format!("no check numbered {bad}")));
        }
        a.only.clone()
    } else if a.full {
        CHECK_IDS.to_vec()
    } else {
        FAST_IDS.to_vec()
    };
    let mut doc = document("selftest", a, global, None);
    let mut table = Table::new(&["check", "name", "measurement", "passed", "detail"]);
    let mut failed = 0;
    for id in ids {
        let o = checks::run(id, budget, global.seed);
        // timings go to stderr so that stdout stays reproducible
        eprintln!("check {id} {} {} in {:.1}s", o.name, o.verdict(), o.elapsed.as_secs_f64());
        for m in &o.measurements {
            table.push(vec![u32::from(id).into(), o.name.into(), m.label.clone().into(), m.passed.into(), m.detail.clone().into()]);
        }
        if let Some(e) = &o.error {
            table.push(vec![u32::from(id).into(), o.name.into(), "error".into(), false.into(), e.clone().into()]);
        }
        doc.summary.insert(format!("check_{id}"), Value::from(format!("{} {}", o.verdict(), o.name)));
        if !o.passed {
            failed += 1;
        }
    }
    doc.table = Some(table);
    Ok((doc, failed))
}
