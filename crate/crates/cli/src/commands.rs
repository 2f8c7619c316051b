use std::io::Write;

use renewal_limits::distributions::stable::{cf_from_alpha, StableParams};
use renewal_limits::limits::{limit_constant, stable_abs_moment, stable_abs_moment_quadrature};
use renewal_limits::mc::{compensated_sum, replicate};
use renewal_limits::scaling::{residual, solve_c, DEFAULT_TOL};
use renewal_limits::table::{write_csv, ConvergenceRow};
use renewal_limits::{
    renewal, subordinator, CaseKind, Error, InterarrivalSpec, LimitCase, McEstimate, SlowlyVarying, SubordinatorSpec,
};

use crate::config::{require, ExperimentConfig, Method, OutputTarget, Side};
use crate::CliError;

const DEFAULT_MC_SAMPLES: usize = 100_000;
const DEFAULT_QUADRATURE_TOL: f64 = 1e-12;

/// Scalars print in the shortest form that parses back to the same bits.
fn fmt_scalar(x: f64) -> String {
    if x == 0.0 || (1e-5..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Parameter problems become usage errors that name the flag; anything else
/// is a computational failure.
fn blame(flag: &'static str) -> impl Fn(Error) -> CliError {
    move |e| match e {
        Error::Pole(_)
        | Error::Domain(_)
        | Error::InvalidParameter(_)
        | Error::Parse { .. }
        | Error::NoBracket { .. }
        | Error::ParameterMismatch(_)
        | Error::CaseMismatch(_) => CliError::usage(format!("--{flag}: {e}")),
        _ => CliError::failure(e.to_string()),
    }
}

fn print_pairs(pairs: &[(&str, String)]) {
    let mut out = std::io::stdout().lock();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k} = {v}");
    }
}

/// Writes the whole table or nothing: files go through a temporary sibling
/// that is renamed into place, stdout gets a single buffered write.
fn emit_csv(target: &OutputTarget, rows: &[ConvergenceRow]) -> Result<(), CliError> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory cannot fail");
    match target {
        OutputTarget::Stdout => {
            let mut out = std::io::stdout().lock();
            out.write_all(&buf).and_then(|()| out.flush()).map_err(|e| CliError::failure(format!("stdout: {e}")))
        }
        OutputTarget::File(path) => {
            let fail = |e: std::io::Error| CliError::failure(format!("--csv: cannot write {}: {e}", path.display()));
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => std::path::Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
            tmp.write_all(&buf).map_err(fail)?;
            tmp.as_file().sync_all().map_err(fail)?;
            tmp.persist(path).map_err(|e| fail(e.error))?;
            Ok(())
        }
    }
}

/// The theorem case a renewal law belongs to, with the slowly varying
/// function read off its tail or truncated second moment.
pub fn natural_renewal_case(spec: &InterarrivalSpec) -> (CaseKind, Option<SlowlyVarying>) {
    match *spec {
        // P(xi > x) = x_min^alpha x^-alpha
        InterarrivalSpec::Pareto { alpha, x_min } => (CaseKind::A3, SlowlyVarying::constant(x_min.powf(alpha)).ok()),
        // E xi^2 1{xi <= x} = 2 x_min^2 ln(x / x_min) ~ 2 x_min^2 ln x
        InterarrivalSpec::ParetoBoundary { x_min } => {
            (CaseKind::A2, SlowlyVarying::log_power(2.0 * x_min * x_min, 1.0).ok())
        }
        _ => (CaseKind::A1, None),
    }
}

/// As [`natural_renewal_case`], for the Levy measure `rate * F_jump`.
pub fn natural_passage_case(spec: &SubordinatorSpec) -> (CaseKind, Option<SlowlyVarying>) {
    match *spec {
        SubordinatorSpec::CompoundPoisson { rate, jump } => {
            let (kind, ell) = natural_renewal_case(&jump);
            let ell = ell.and_then(|l| match l {
                SlowlyVarying::Constant { k } => SlowlyVarying::constant(rate * k).ok(),
                SlowlyVarying::LogPower { k, p } => SlowlyVarying::log_power(rate * k, p).ok(),
                SlowlyVarying::LogShifted { k, shift } => SlowlyVarying::log_shifted(rate * k, shift).ok(),
            });
            let kind = match kind {
                CaseKind::A3 => CaseKind::B3,
                CaseKind::A2 => CaseKind::B2,
                _ => CaseKind::B1,
            };
            (kind, ell)
        }
        SubordinatorSpec::Gamma { .. } => (CaseKind::B1, None),
    }
}

pub fn moment(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let alpha = require(cfg.alpha, "alpha")?;
    let r = require(cfg.r, "r")?;
    let tol = cfg.tol.unwrap_or(DEFAULT_QUADRATURE_TOL);
    let mut methods = cfg.method.clone().unwrap_or_else(|| vec![Method::Closed, Method::Quadrature]);
    methods.dedup();
    if methods.is_empty() {
        return Err(CliError::usage("--method: at least one method is required"));
    }

    let mut pairs = Vec::new();
    let mut closed = None;
    let mut quad = None;
    let mut mc: Option<McEstimate> = None;
    for m in &methods {
        match m {
            Method::Closed => closed = Some(stable_abs_moment(alpha, r).map_err(blame("r"))?),
            Method::Quadrature => quad = Some(stable_abs_moment_quadrature(alpha, r, tol).map_err(blame("tol"))?),
            Method::Mc => {
                let params = StableParams::from_alpha(alpha).map_err(blame("alpha"))?;
                if !(r > 0.0 && 2.0 * r < alpha) {
                    return Err(CliError::usage(format!(
                        "--r: Monte Carlo needs 0 < 2r < alpha for a finite-variance estimator, got r = {r}"
                    )));
                }
                let n = cfg.n.unwrap_or(DEFAULT_MC_SAMPLES);
                let seed = cfg.seed.unwrap_or(0);
                let samples = replicate(n, seed, |_, rng| params.sample(rng).abs().powf(r));
                mc = Some(McEstimate::from_samples(&samples, seed).map_err(blame("n"))?);
            }
        }
    }
    if let Some(v) = closed {
        pairs.push(("closed", fmt_scalar(v)));
    }
    if let Some(v) = quad {
        pairs.push(("quadrature", fmt_scalar(v)));
    }
    if let Some(e) = mc {
        pairs.push(("mc", fmt_scalar(e.mean)));
        pairs.push(("mc_stderr", fmt_scalar(e.std_error)));
    }
    if let (Some(c), Some(q)) = (closed, quad) {
        pairs.push(("rel_diff_quadrature_closed", fmt_scalar((q - c).abs() / c)));
    }
    if let (Some(reference), Some(e)) = (closed.or(quad), mc) {
        pairs.push(("z_mc", fmt_scalar(e.z_score(reference))));
    }
    print_pairs(&pairs);
    Ok(())
}

pub fn limit(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let kind = require(cfg.case, "case")?;
    let mu = require(cfg.mu, "mu")?;
    let spread =
        if matches!(kind, CaseKind::A1 | CaseKind::B1) { Some(require(cfg.sigma, "sigma")?) } else { cfg.sigma };
    let alpha = if kind.is_stable() { Some(require(cfg.alpha, "alpha")?) } else { cfg.alpha };
    let case = LimitCase::new(kind, mu, spread, alpha).map_err(blame("case"))?;
    let value = limit_constant(&case).map_err(blame("alpha"))?;
    println!("{}", fmt_scalar(value));
    Ok(())
}

pub fn scaling(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let alpha = require(cfg.alpha, "alpha")?;
    let ell = require(cfg.ell, "ell")?;
    let x = require(cfg.x, "x")?;
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    let c = solve_c(alpha, &ell, x, tol).map_err(blame("x"))?;
    print_pairs(&[("c", fmt_scalar(c)), ("residual", fmt_scalar(residual(alpha, &ell, x, c)))]);
    Ok(())
}

fn ell_for(
    kind: CaseKind,
    given: Option<SlowlyVarying>,
    natural: (CaseKind, Option<SlowlyVarying>),
) -> Option<SlowlyVarying> {
    given.or(if natural.0 == kind { natural.1 } else { None })
}

fn table(
    side: Side,
    cfg: &ExperimentConfig,
    kind: Option<CaseKind>,
    grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<(CaseKind, Vec<ConvergenceRow>), CliError> {
    // Levels and counts are checked here so the diagnostic names the right flag.
    let grid_flag = if grid.len() == 1 { "s" } else { "s-grid" };
    if let Some(bad) = grid.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(CliError::usage(format!("--{grid_flag}: levels must be positive and finite, got {bad}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::usage(format!("--{grid_flag}: levels must be strictly increasing")));
    }
    if reps < 2 {
        return Err(CliError::usage(format!("--reps: need at least 2 replications, got {reps}")));
    }
    match side {
        Side::Renewal => {
            let spec = require(cfg.dist, "dist")?;
            let natural = natural_renewal_case(&spec);
            let kind = kind.unwrap_or(natural.0);
            renewal::renewal_case(&spec, kind).map_err(blame("case"))?;
            let ell = ell_for(kind, cfg.ell, natural);
            let rows = renewal::convergence_table(&spec, kind, ell.as_ref(), grid, reps, seed).map_err(blame("ell"))?;
            Ok((kind, rows))
        }
        Side::Passage => {
            let spec = require(cfg.sub, "sub")?;
            let natural = natural_passage_case(&spec);
            let kind = kind.unwrap_or(natural.0);
            subordinator::passage_case(&spec, kind).map_err(blame("case"))?;
            let ell = ell_for(kind, cfg.ell, natural);
            let rows =
                subordinator::convergence_table(&spec, kind, ell.as_ref(), grid, reps, seed).map_err(blame("ell"))?;
            Ok((kind, rows))
        }
    }
}

pub fn simulate(cfg: &ExperimentConfig, side: Side) -> Result<(), CliError> {
    let s = require(cfg.s, "s")?;
    let reps = require(cfg.reps, "reps")?;
    let seed = require(cfg.seed, "seed")?;
    let (kind, rows) = table(side, cfg, None, &[s], reps, seed)?;
    if let Some(target) = &cfg.csv {
        emit_csv(target, &rows)?;
        if *target == OutputTarget::Stdout {
            return Ok(());
        }
    }
    let row = rows[0];
    print_pairs(&[
        ("case", kind.to_string()),
        ("s", fmt_scalar(row.s)),
        ("n_reps", row.n_reps.to_string()),
        ("estimate", fmt_scalar(row.estimate)),
        ("stderr", fmt_scalar(row.std_error)),
        ("normalizer", fmt_scalar(row.normalizer)),
        ("ratio", fmt_scalar(row.ratio)),
        ("limit", fmt_scalar(row.limit)),
        ("rel_gap", fmt_scalar(row.rel_gap)),
    ]);
    Ok(())
}

pub fn converge(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let side = match (cfg.side, cfg.dist.is_some(), cfg.sub.is_some()) {
        (Some(side), _, _) => side,
        (None, true, false) => Side::Renewal,
        (None, false, true) => Side::Passage,
        _ => return Err(CliError::usage("--side is required (renewal or passage)")),
    };
    let kind = require(cfg.case, "case")?;
    let grid = require(cfg.s_grid.clone(), "s-grid")?;
    let reps = require(cfg.reps, "reps")?;
    let seed = require(cfg.seed, "seed")?;
    let target = require(cfg.csv.clone(), "csv")?;
    if grid.is_empty() {
        return Err(CliError::usage("--s-grid: at least one level is required"));
    }
    let (_, rows) = table(side, cfg, Some(kind), &grid, reps, seed)?;
    emit_csv(&target, &rows)
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn fail(e: Error) -> CliError {
    CliError::failure(e.to_string())
}

/// Closed form against quadrature on the (alpha, r) grid.
fn check_moment_triangle() -> Result<Check, CliError> {
    let mut worst: f64 = 0.0;
    for alpha in [1.1, 1.5, 1.9] {
        for r in [0.25, 0.5, 1.0] {
            let c = stable_abs_moment(alpha, r).map_err(fail)?;
            let q = stable_abs_moment_quadrature(alpha, r, DEFAULT_QUADRATURE_TOL).map_err(fail)?;
            worst = worst.max((c - q).abs() / c);
        }
    }
    Ok(check("moment-triangle", worst <= 1e-6, format!("max relative gap {worst:.3e} (limit 1e-6)")))
}

/// Sampler against the characteristic function and the r = 1/2 moment.
fn check_stable_sampler(seed: u64) -> Result<Check, CliError> {
    const N: usize = 200_000;
    let alpha = 1.5;
    let params = StableParams::from_alpha(alpha).map_err(fail)?;
    let draws = replicate(N, seed, |_, rng| params.sample(rng));
    let band = 4.0 / (N as f64).sqrt();
    let mut worst_cf: f64 = 0.0;
    for t in [0.5, 1.0, 2.0] {
        let re = compensated_sum(draws.iter().map(|w| (t * w).cos())) / N as f64;
        let im = compensated_sum(draws.iter().map(|w| (t * w).sin())) / N as f64;
        let exact = cf_from_alpha(alpha, t).map_err(fail)?;
        worst_cf = worst_cf.max(((re - exact.re).powi(2) + (im - exact.im).powi(2)).sqrt());
    }
    let halves: Vec<f64> = draws.iter().map(|w| w.abs().sqrt()).collect();
    let est = McEstimate::from_samples(&halves, seed).map_err(fail)?;
    let z = est.z_score(stable_abs_moment_quadrature(alpha, 0.5, DEFAULT_QUADRATURE_TOL).map_err(fail)?);
    Ok(check(
        "stable-sampler",
        worst_cf <= band && z.abs() <= 4.0,
        format!("cf gap {worst_cf:.3e} (band {band:.3e}), E|W|^0.5 z = {z:.2}"),
    ))
}

fn check_poisson_oracle(seed: u64) -> Result<Check, CliError> {
    let s = 1e3;
    let spec = InterarrivalSpec::exponential(1.0).map_err(fail)?;
    let est = renewal::mc_abs_deviation(&spec, s, 20_000, seed).map_err(fail)?;
    let z = est.z_score(renewal::exact_abs_deviation_poisson(s).map_err(fail)?);
    Ok(check("poisson-oracle", z.abs() <= 4.0, format!("exp:1 at s = 1e3, z = {z:.2}")))
}

fn check_coupling(seed: u64) -> Result<Check, CliError> {
    let mut worst: f64 = 0.0;
    for jump in ["exp:1", "pareto:1.5,1"] {
        let spec = SubordinatorSpec::compound_poisson(1.0, jump.parse().map_err(fail)?).map_err(fail)?;
        for s in [1e2, 1e3] {
            worst = worst.max(subordinator::coupling_check(&spec, s, 2_000, seed).map_err(fail)?);
        }
    }
    Ok(check("coupling", worst == 0.0, format!("violation fraction {worst}")))
}

fn check_wald(seed: u64) -> Result<Check, CliError> {
    let mut worst: f64 = 0.0;
    for dist in ["exp:1", "det:1", "unif:0,2", "pareto:1.5,1", "pareto2:1"] {
        let spec: InterarrivalSpec = dist.parse().map_err(fail)?;
        worst = worst.max(renewal::wald_residual(&spec, 1e2, 20_000, seed).map_err(fail)?.abs());
    }
    Ok(check("wald", worst <= 4.0, format!("max |z| = {worst:.2} over the distribution zoo")))
}

fn check_scaling() -> Result<Check, CliError> {
    let ell = SlowlyVarying::log_shifted(2.0, std::f64::consts::E).map_err(fail)?;
    let mut worst: f64 = 0.0;
    for x in [1e4, 1e6, 1e8] {
        let c = solve_c(2.0, &ell, x, DEFAULT_TOL).map_err(fail)?;
        worst = worst.max(residual(2.0, &ell, x, c));
    }
    let one = SlowlyVarying::constant(1.0).map_err(fail)?;
    let c = solve_c(1.5, &one, 64.0, DEFAULT_TOL).map_err(fail)?;
    let closed = (c - 16.0).abs() / 16.0;
    Ok(check(
        "scaling",
        worst <= DEFAULT_TOL && closed <= 1e-12,
        format!("max residual {worst:.3e}, constant-ell gap {closed:.3e}"),
    ))
}

fn check_limits() -> Result<Check, CliError> {
    use std::f64::consts::PI;
    let a1 = limit_constant(&LimitCase::a1(1.0, 1.0).map_err(fail)?).map_err(fail)?;
    let b1 = limit_constant(&LimitCase::b1(1.0, 2f64.sqrt()).map_err(fail)?).map_err(fail)?;
    let gap = ((a1 - (2.0 / PI).sqrt()).abs()).max((b1 - 2.0 / PI.sqrt()).abs());
    Ok(check("limit-constants", gap <= 1e-15, format!("max gap {gap:.1e}")))
}

pub fn selfcheck(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let seed = cfg.seed.unwrap_or(1);
    let checks = [
        check_moment_triangle()?,
        check_limits()?,
        check_scaling()?,
        check_stable_sampler(seed)?,
        check_poisson_oracle(seed.wrapping_add(1))?,
        check_coupling(seed.wrapping_add(2))?,
        check_wald(seed.wrapping_add(3))?,
    ];
    let mut out = std::io::stdout().lock();
    for c in &checks {
        let _ = writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::failure(format!("selfcheck: {failed} of {} checks failed", checks.len())));
    }
    Ok(())
}
