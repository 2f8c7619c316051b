//! Subordinators, their first-passage times T(s) = inf{t >= 0 : S(t) > s}
//! and the integer-skeleton count N*(s) = #{k >= 0 : S(k) <= s}.
//!
//! Compound Poisson paths are simulated exactly. The gamma subordinator is
//! simulated exactly on the integer skeleton; inside the unit interval where
//! the path crosses s it is refined by gamma-bridge bisection down to a dyadic
//! mesh no wider than `grid_step`, and T(s) is the first mesh point where the
//! path exceeds s. That is the same law as stepping the whole path on that
//! mesh, with T(s) biased upward by at most one mesh width.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::distributions::{parse_numbers, InterarrivalSpec};
use crate::error::{Error, Result};
use crate::limits::{limit_constant, CaseKind, LimitCase};
use crate::mc::{check_reps, try_replicate, McEstimate};
use crate::renewal::MAX_STEPS;
use crate::scaling::{moment_scale, SlowlyVarying, DEFAULT_TOL};
use crate::table::ConvergenceRow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubordinatorSpec {
    /// Jumps at Poisson(rate) epochs with i.i.d. sizes drawn from `jump`.
    CompoundPoisson { rate: f64, jump: InterarrivalSpec },
    /// Levy measure `shape x^-1 e^{-rate x} dx`; S(1) ~ Gamma(shape, rate).
    Gamma { shape: f64, rate: f64, grid_step: f64 },
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Exponential integral E1(z) for z > 0.
fn exp_integral_e1(z: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    if z <= 1.0 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..200 {
            term *= -z / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        -EULER_GAMMA - z.ln() + sum
    } else {
        // Continued fraction, modified Lentz.
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    }
}

impl SubordinatorSpec {
    pub fn compound_poisson(rate: f64, jump: InterarrivalSpec) -> Result<Self> {
        Ok(Self::CompoundPoisson { rate: positive("rate", rate)?, jump })
    }

    pub fn gamma(shape: f64, rate: f64, grid_step: f64) -> Result<Self> {
        Ok(Self::Gamma {
            shape: positive("shape", shape)?,
            rate: positive("rate", rate)?,
            grid_step: positive("grid", grid_step)?,
        })
    }

    /// m = E S(1).
    pub fn mean(&self) -> f64 {
        match *self {
            Self::CompoundPoisson { rate, jump } => rate * jump.mean(),
            Self::Gamma { shape, rate, .. } => shape / rate,
        }
    }

    /// b^2 = integral of x^2 against the Levy measure = Var S(1); may be infinite.
    pub fn b_squared(&self) -> f64 {
        match *self {
            Self::CompoundPoisson { rate, jump } => rate * jump.second_moment(),
            Self::Gamma { shape, rate, .. } => shape / (rate * rate),
        }
    }

    /// nu(x, inf), the rate of jumps larger than x.
    pub fn levy_tail(&self, x: f64) -> f64 {
        match *self {
            Self::CompoundPoisson { rate, jump } => rate * jump.tail(x),
            Self::Gamma { shape, rate, .. } => {
                if x <= 0.0 {
                    f64::INFINITY
                } else {
                    shape * exp_integral_e1(rate * x)
                }
            }
        }
    }

    /// Integral of y^2 over [0, x] against the Levy measure.
    pub fn levy_truncated_second_moment(&self, x: f64) -> f64 {
        match *self {
            Self::CompoundPoisson { rate, jump } => rate * jump.truncated_second_moment(x),
            Self::Gamma { shape, rate, .. } => {
                let z = rate * x;
                // shape / rate^2 * P(2, z)
                shape / (rate * rate) * (-(-z).exp_m1() - z * (-z).exp())
            }
        }
    }

    /// Tail index of the Levy measure for Pareto-type jumps.
    pub fn tail_index(&self) -> Option<f64> {
        match self {
            Self::CompoundPoisson { jump, .. } => jump.tail_index(),
            Self::Gamma { .. } => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Self::CompoundPoisson { .. })
    }

    /// One draw of S(1).
    pub fn sample_unit_increment<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::CompoundPoisson { rate, jump } => {
                let mut time = exp_draw(rng, rate);
                let mut sum = 0.0;
                while time <= 1.0 {
                    sum += jump.sample(rng);
                    time += exp_draw(rng, rate);
                }
                sum
            }
            Self::Gamma { shape, rate, .. } => Gamma::new(shape, 1.0 / rate).expect("validated").sample(rng),
        }
    }
}

fn exp_draw<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.sample(Open01);
    -u.ln() / rate
}

/// ln of a Gamma(shape, 1) draw, finite even when the draw underflows.
fn ln_gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("shape >= 1").sample(rng).ln()
    } else {
        // G(a) = G(a + 1) U^(1/a).
        let g = Gamma::new(shape + 1.0, 1.0).expect("shape > 0").sample(rng);
        let u: f64 = rng.sample(Open01);
        g.ln() + u.ln() / shape
    }
}

/// Beta(a, b) draw computed as 1 / (1 + Y/X) in log space.
fn beta_draw<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let lx = ln_gamma_draw(rng, a);
    let ly = ln_gamma_draw(rng, b);
    1.0 / (1.0 + (ly - lx).exp())
}

impl fmt::Display for SubordinatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::CompoundPoisson { rate, jump } => write!(f, "cp:rate={rate:?},jump={jump}"),
            Self::Gamma { shape, rate, grid_step } => {
                write!(f, "gamma:shape={shape:?},rate={rate:?},grid={grid_step:?}")
            }
        }
    }
}

impl FromStr for SubordinatorSpec {
    type Err = Error;

    /// Grammar: `cp:rate=R,jump=DIST` and `gamma:shape=A,rate=R,grid=H`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Parse { kind: "subordinator", input: s.to_string(), reason: reason.into() };
        let (name, args) = s.split_once(':').ok_or_else(|| bad("expected NAME:ARGS"))?;
        let spec = match name.trim() {
            "cp" => {
                let rest = args.trim().strip_prefix("rate=").ok_or_else(|| bad("expected rate=R,jump=DIST"))?;
                let (rate, jump) = rest.split_once(",jump=").ok_or_else(|| bad("expected rate=R,jump=DIST"))?;
                let rate = parse_numbers("subordinator", s, rate, 1)?[0];
                let jump: InterarrivalSpec = jump.parse()?;
                Self::compound_poisson(rate, jump)
            }
            "gamma" => {
                let mut values = [None; 3];
                for part in args.split(',') {
                    let (key, value) = part.split_once('=').ok_or_else(|| bad("expected key=value pairs"))?;
                    let slot = match key.trim() {
                        "shape" => 0,
                        "rate" => 1,
                        "grid" => 2,
                        _ => return Err(bad(&format!("unknown key `{}`", key.trim()))),
                    };
                    if values[slot].is_some() {
                        return Err(bad(&format!("duplicate key `{}`", key.trim())));
                    }
                    values[slot] = Some(parse_numbers("subordinator", s, value, 1)?[0]);
                }
                match values {
                    [Some(a), Some(r), Some(h)] => Self::gamma(a, r, h),
                    _ => return Err(bad("gamma needs shape, rate and grid")),
                }
            }
            other => return Err(bad(&format!("unknown subordinator `{other}`"))),
        };
        spec.map_err(|e| bad(&e.to_string()))
    }
}

/// First passage of a subordinator path above `s_level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassageObservation {
    /// T(s).
    pub t_passage: f64,
    /// N*(s) = #{k >= 0 : S(k) <= s}.
    pub n_star: u64,
    pub s_level: f64,
    /// Upper bound on T(s) minus the true passage time: 0 for exact paths.
    pub time_bias_bound: f64,
}

impl PassageObservation {
    /// Whether `N*(s) - T(s)` lies in [0, 1].
    pub fn coupling_holds(&self) -> bool {
        let d = self.n_star as f64 - self.t_passage;
        (0.0..=1.0).contains(&d)
    }
}

/// Number of integers k >= 0 with k < t.
fn integers_below(t: f64) -> u64 {
    if t <= 0.0 {
        0
    } else {
        t.ceil() as u64
    }
}

/// One path stopped at the first passage above `s`.
pub fn simulate_passage<R: Rng + ?Sized>(spec: &SubordinatorSpec, s: f64, rng: &mut R) -> Result<PassageObservation> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidParameter(format!("level must be positive and finite, got {s}")));
    }
    match *spec {
        SubordinatorSpec::CompoundPoisson { rate, jump } => {
            let mut time = 0.0f64;
            let mut sum = 0.0f64;
            // Integers in [0, next_k) have been compared against s already.
            let mut next_k: u64 = 0;
            let mut n_star: u64 = 0;
            for _ in 0..MAX_STEPS {
                time += exp_draw(rng, rate);
                // S is constant (= sum <= s) on [previous epoch, time).
                let upto = integers_below(time);
                if upto > next_k {
                    n_star += upto - next_k;
                    next_k = upto;
                }
                sum += jump.sample(rng);
                if sum > s {
                    let obs = PassageObservation { t_passage: time, n_star, s_level: s, time_bias_bound: 0.0 };
                    debug_assert!(obs.coupling_holds(), "coupling violated: {obs:?}");
                    return Ok(obs);
                }
            }
            Err(Error::IterationCap { cap: MAX_STEPS })
        }
        SubordinatorSpec::Gamma { shape, rate, grid_step } => {
            let unit = Gamma::new(shape, 1.0 / rate).expect("validated");
            // Exact integer skeleton until the first k with S(k + 1) > s.
            let mut sum = 0.0f64;
            let mut k: u64 = 0;
            let next = loop {
                if k >= MAX_STEPS {
                    return Err(Error::IterationCap { cap: MAX_STEPS });
                }
                let next = sum + unit.sample(rng);
                if next > s {
                    break next;
                }
                sum = next;
                k += 1;
            };
            // S(j) <= s for j = 0..=k, so N*(s) = k + 1; the crossing lies in (k, k + 1].
            let n_star = k + 1;
            let (mut lo_t, mut hi_t) = (k as f64, k as f64 + 1.0);
            let (mut lo_s, mut hi_s) = (sum, next);
            let mut width = 1.0;
            while width > grid_step {
                let mid_t = 0.5 * (lo_t + hi_t);
                let frac = beta_draw(rng, shape * (mid_t - lo_t), shape * (hi_t - mid_t));
                let mid_s = lo_s + (hi_s - lo_s) * frac;
                if mid_s > s {
                    hi_t = mid_t;
                    hi_s = mid_s;
                } else {
                    lo_t = mid_t;
                    lo_s = mid_s;
                }
                width *= 0.5;
            }
            Ok(PassageObservation { t_passage: hi_t, n_star, s_level: s, time_bias_bound: width })
        }
    }
}

/// Monte Carlo estimate of E|T(s) - s / m|.
pub fn mc_abs_deviation_t(spec: &SubordinatorSpec, s: f64, n_reps: usize, master_seed: u64) -> Result<McEstimate> {
    check_reps(n_reps)?;
    let centre = s / spec.mean();
    let samples =
        try_replicate(n_reps, master_seed, |_, rng| Ok((simulate_passage(spec, s, rng)?.t_passage - centre).abs()))?;
    McEstimate::from_samples(&samples, master_seed)
}

/// Fraction of replications with `N*(s) - T(s)` outside [0, 1].
/// Only compound Poisson paths are exact, so other specs are rejected.
pub fn coupling_check(spec: &SubordinatorSpec, s: f64, n_reps: usize, master_seed: u64) -> Result<f64> {
    check_reps(n_reps)?;
    if !spec.is_exact() {
        return Err(Error::Precondition(format!("coupling check needs exact compound Poisson paths, got {spec}")));
    }
    let flags = try_replicate(n_reps, master_seed, |_, rng| Ok(!simulate_passage(spec, s, rng)?.coupling_holds()))?;
    Ok(flags.iter().filter(|&&v| v).count() as f64 / n_reps as f64)
}

/// Builds the theorem case implied by a subordinator.
pub fn passage_case(spec: &SubordinatorSpec, kind: CaseKind) -> Result<LimitCase> {
    let m = spec.mean();
    let b2 = spec.b_squared();
    let mismatch = |why: &str| Err(Error::CaseMismatch(format!("case {kind} does not apply to {spec}: {why}")));
    match kind {
        CaseKind::B1 => {
            if !b2.is_finite() {
                return mismatch("b^2 is infinite");
            }
            LimitCase::b1(m, b2.sqrt())
        }
        CaseKind::B2 => {
            if b2.is_finite() {
                return mismatch("b^2 is finite; use b1");
            }
            match spec.tail_index() {
                Some(2.0) => LimitCase::b2(m),
                _ => mismatch("truncated second moment of the Levy measure is not slowly varying"),
            }
        }
        CaseKind::B3 => match spec.tail_index() {
            Some(a) if a < 2.0 => LimitCase::b3(m, a),
            _ => mismatch("Levy tail is not regularly varying with index in (1, 2)"),
        },
        _ => mismatch("renewal cases need an inter-arrival spec"),
    }
}

/// Scaled estimates of E|T(s) - s/m| along a grid of levels. Every level
/// reruns the same replication streams.
pub fn convergence_table(
    spec: &SubordinatorSpec,
    kind: CaseKind,
    ell: Option<&SlowlyVarying>,
    s_grid: &[f64],
    n_reps: usize,
    master_seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    check_reps(n_reps)?;
    if s_grid.is_empty() {
        return Err(Error::InvalidParameter("s_grid must not be empty".into()));
    }
    let case = passage_case(spec, kind)?;
    let limit = limit_constant(&case)?;
    s_grid
        .iter()
        .map(|&s| {
            let g = moment_scale(&case, ell, s, DEFAULT_TOL)?;
            let est = mc_abs_deviation_t(spec, s, n_reps, master_seed)?;
            Ok(ConvergenceRow::new(s, n_reps, est.mean, est.std_error, g, limit))
        })
        .collect()
}
