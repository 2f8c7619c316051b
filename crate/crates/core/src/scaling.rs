//! Slowly varying functions and the scaling function c(x).
//!
//! c(x) is defined pointwise as the root of `x * ell(c) / c^alpha = 1`, i.e.
//! `c^alpha / ell(c) = x`. Only the asymptotics of c matter for the limit
//! theorems; this residual equation is one admissible finite-x convention.
//! The root is found by bisection on the map `c -> c^alpha / ell(c)`, which
//! is strictly increasing on the domain recorded by each [`SlowlyVarying`].

use std::f64::consts::E;
use std::fmt;
use std::str::FromStr;

use crate::distributions::parse_numbers;
use crate::error::{Error, Result};
use crate::limits::{CaseKind, LimitCase};

/// Default relative residual for [`solve_c`].
pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest bracket inflation factor tried before giving up.
const MAX_BRACKET_FACTOR: f64 = 1e12;

/// A slowly varying function ell.
///
/// * `Constant { k }`: ell(x) = k.
/// * `LogPower { k, p }`: ell(x) = k (ln x)^p for x > e.
/// * `LogShifted { k, shift }`: ell(x) = k ln(x + shift).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlowlyVarying {
    Constant { k: f64 },
    LogPower { k: f64, p: f64 },
    LogShifted { k: f64, shift: f64 },
}

impl SlowlyVarying {
    pub fn constant(k: f64) -> Result<Self> {
        check_k(k)?;
        Ok(Self::Constant { k })
    }

    pub fn log_power(k: f64, p: f64) -> Result<Self> {
        check_k(k)?;
        if !(p.is_finite() && p != 0.0) {
            return Err(Error::InvalidParameter(format!("log power must be finite and non-zero, got {p}")));
        }
        Ok(Self::LogPower { k, p })
    }

    pub fn log_shifted(k: f64, shift: f64) -> Result<Self> {
        check_k(k)?;
        if !shift.is_finite() {
            return Err(Error::InvalidParameter(format!("shift must be finite, got {shift}")));
        }
        Ok(Self::LogShifted { k, shift })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Constant { k } => k,
            Self::LogPower { k, p } => k * x.ln().powf(p),
            Self::LogShifted { k, shift } => k * (x + shift).ln(),
        }
    }

    /// Lower end x0 of the region where ell is positive and `c^alpha / ell(c)`
    /// is strictly increasing for every alpha >= 1.
    pub fn domain_start(&self) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            // d ln ell / d ln c = p / ln c, below 1 once ln c > p.
            Self::LogPower { p, .. } => E.max(p.exp()),
            // d ln ell / d ln c = c / ((c + shift) ln(c + shift)).
            Self::LogShifted { shift, .. } => {
                if shift >= E {
                    0.0
                } else if shift >= 0.0 {
                    E - shift
                } else {
                    (E * E - shift).max(-2.0 * shift)
                }
            }
        }
    }
}

fn check_k(k: f64) -> Result<()> {
    if k.is_finite() && k > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("ell scale K must be positive and finite, got {k}")))
    }
}

impl fmt::Display for SlowlyVarying {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Constant { k } => write!(f, "const:{k:?}"),
            Self::LogPower { k, p } => write!(f, "logpow:{k:?},{p:?}"),
            Self::LogShifted { k, shift } => write!(f, "logshift:{k:?},{shift:?}"),
        }
    }
}

impl FromStr for SlowlyVarying {
    type Err = Error;

    /// Grammar: `const:K`, `logpow:K,P`, `logshift:K,SHIFT`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').ok_or_else(|| Error::Parse {
            kind: "ell",
            input: s.to_string(),
            reason: "expected NAME:ARGS".into(),
        })?;
        let nums = |n| parse_numbers("ell", s, args, n);
        let ell = match name.trim() {
            "const" => Self::constant(nums(1)?[0]),
            "logpow" => {
                let v = nums(2)?;
                Self::log_power(v[0], v[1])
            }
            "logshift" => {
                let v = nums(2)?;
                Self::log_shifted(v[0], v[1])
            }
            other => {
                return Err(Error::Parse {
                    kind: "ell",
                    input: s.to_string(),
                    reason: format!("unknown slowly varying function `{other}`"),
                })
            }
        };
        ell.map_err(|e| Error::Parse { kind: "ell", input: s.to_string(), reason: e.to_string() })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("scaling index alpha must lie in (1, 2], got {alpha}")))
    }
}

/// `x * ell(c) / c^alpha - 1`.
pub fn residual(alpha: f64, ell: &SlowlyVarying, x: f64, c: f64) -> f64 {
    x * ell.eval(c) / c.powf(alpha) - 1.0
}

/// Solves `x * ell(c) / c^alpha = 1` for c with `|residual| <= tol`.
pub fn solve_c(alpha: f64, ell: &SlowlyVarying, x: f64, tol: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::InvalidParameter(format!("x must be positive and finite, got {x}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    if let SlowlyVarying::Constant { k } = *ell {
        let target = k * x;
        let c = target.powf(1.0 / alpha);
        // One Newton step on c^alpha = kx removes the last-ulp error of powf.
        let polished = c * (1.0 + (target / c.powf(alpha) - 1.0) / alpha);
        let c = if residual(alpha, ell, x, polished).abs() < residual(alpha, ell, x, c).abs() { polished } else { c };
        if residual(alpha, ell, x, c).abs() <= tol {
            return Ok(c);
        }
    }

    let x0 = ell.domain_start();
    // g(c) = ln(c^alpha / ell(c)) - ln x, increasing in c on (x0, inf).
    let g = |c: f64| alpha * c.ln() - ell.eval(c).ln() - x.ln();
    let centre = x.powf(1.0 / alpha);
    let mut factor = 2.0;
    let floor = next_up(x0);
    let (mut lo, mut hi) = loop {
        let lo = (centre / factor).max(floor);
        let hi = (centre * factor).max(2.0 * floor);
        let g_lo = g(lo);
        if g_lo <= 0.0 && g(hi) >= 0.0 {
            break (lo, hi);
        }
        if lo == floor && g_lo > 0.0 {
            // The root would sit below the monotone regime.
            return Err(Error::NoBracket { x });
        }
        factor *= 2.0;
        if factor > MAX_BRACKET_FACTOR {
            return Err(Error::NoBracket { x });
        }
    };

    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if residual(alpha, ell, x, mid).abs() <= tol {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = [lo, hi]
        .into_iter()
        .min_by(|a, b| residual(alpha, ell, x, *a).abs().total_cmp(&residual(alpha, ell, x, *b).abs()))
        .expect("two candidates");
    if residual(alpha, ell, x, best).abs() <= tol {
        Ok(best)
    } else {
        Err(Error::ToleranceNotMet { tol, estimate: residual(alpha, ell, x, best).abs() })
    }
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        f64::MIN_POSITIVE
    } else {
        x * (1.0 + 4.0 * f64::EPSILON)
    }
}

/// The scaling function c(x) for a fixed (alpha, ell), evaluated on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingSolution {
    alpha: f64,
    ell: SlowlyVarying,
    residual_tol: f64,
}

impl ScalingSolution {
    pub fn new(alpha: f64, ell: SlowlyVarying, residual_tol: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(residual_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("residual_tol must be positive, got {residual_tol}")));
        }
        Ok(Self { alpha, ell, residual_tol })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn ell(&self) -> &SlowlyVarying {
        &self.ell
    }
    pub fn residual_tol(&self) -> f64 {
        self.residual_tol
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        solve_c(self.alpha, &self.ell, x, self.residual_tol)
    }

    pub fn residual(&self, x: f64) -> Result<f64> {
        Ok(residual(self.alpha, &self.ell, x, self.eval(x)?))
    }
}

/// c(lambda x) / c(x); tends to lambda^(1/alpha).
pub fn regvar_ratio_check(solution: &ScalingSolution, x: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if lambda == 1.0 {
        return Ok(1.0);
    }
    if let SlowlyVarying::Constant { .. } = solution.ell {
        return Ok(lambda.powf(1.0 / solution.alpha));
    }
    Ok(solution.eval(lambda * x)? / solution.eval(x)?)
}

fn check_level(s: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidParameter(format!("s must be positive and finite, got {s}")));
    }
    Ok(())
}

/// The denominator in the theorem's limit: `sqrt(s)` for A1/B1, `c(s)` with
/// alpha = 2 for A2/B2 and with the case's alpha for A3/B3.
///
/// E|N(s) - s/mu| / moment_scale(s) tends to `limit_constant(case)`.
pub fn moment_scale(case: &LimitCase, ell: Option<&SlowlyVarying>, s: f64, tol: f64) -> Result<f64> {
    check_level(s)?;
    let need_ell =
        || ell.ok_or_else(|| Error::ParameterMismatch(format!("case {} needs a slowly varying function", case.kind())));
    match case.kind() {
        CaseKind::A1 | CaseKind::B1 => Ok(s.sqrt()),
        CaseKind::A2 | CaseKind::B2 => solve_c(2.0, need_ell()?, s, tol),
        CaseKind::A3 | CaseKind::B3 => solve_c(case.alpha().expect("validated at construction"), need_ell()?, s, tol),
    }
}

/// The normalizer g(s) under which (N(s) - s/mu) / g(s) converges in law to W.
///
/// A1/B1: `sqrt(sigma^2 mu^-3 s)`; A2/B2: `mu^(-3/2) c(s)` with alpha = 2;
/// A3/B3: `mu^(-(1+alpha)/alpha) c(s)`. It already carries the mean and spread
/// factors of the limit constant, so E|N(s) - s/mu| / g(s) tends to E|W|,
/// not to `limit_constant(case)`.
pub fn normalizer(case: &LimitCase, ell: Option<&SlowlyVarying>, s: f64, tol: f64) -> Result<f64> {
    let scale = moment_scale(case, ell, s, tol)?;
    let mean = case.mean();
    Ok(match case.kind() {
        CaseKind::A1 | CaseKind::B1 => {
            let spread = case.spread().expect("validated at construction");
            (spread * spread * s / mean.powi(3)).sqrt()
        }
        CaseKind::A2 | CaseKind::B2 => scale / mean.powf(1.5),
        CaseKind::A3 | CaseKind::B3 => {
            let alpha = case.alpha().expect("validated at construction");
            scale * mean.powf(-(1.0 + alpha) / alpha)
        }
    })
}
