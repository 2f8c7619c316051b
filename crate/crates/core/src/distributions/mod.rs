//! Positive inter-arrival (and jump) laws with exact moment and tail
//! functionals, plus the totally skewed stable limit law in [`stable`].
//!
//! Every variant has closed-form mean, variance, tail, truncated second
//! moment and truncated mean, so simulation output can always be checked
//! against an analytic value.

pub mod stable;

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;

use crate::error::{Error, Result};

/// Law of a positive random variable xi.
///
/// `Pareto { alpha, x_min }` has tail `(x_min / x)^alpha` for `x >= x_min`.
/// `ParetoBoundary { x_min }` is the `alpha = 2` member with density
/// `2 x_min^2 y^-3` on `[x_min, inf)`: infinite variance, but its truncated
/// second moment `2 x_min^2 ln(x / x_min)` is slowly varying.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterarrivalSpec {
    Exponential { rate: f64 },
    Deterministic { d: f64 },
    Uniform { a: f64, b: f64 },
    Pareto { alpha: f64, x_min: f64 },
    ParetoBoundary { x_min: f64 },
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// P(3, z) = 1 - e^-z (1 + z + z^2 / 2), the regularized lower incomplete gamma at shape 3.
fn lower_gamma_p3(z: f64) -> f64 {
    if z < 1.0 {
        let mut term = z * z * z / 6.0;
        let mut sum = 0.0f64;
        let mut k = 3.0;
        while term > 1e-18 * sum.max(f64::MIN_POSITIVE) {
            sum += term;
            k += 1.0;
            term *= z / k;
        }
        (-z).exp() * sum
    } else {
        1.0 - (-z).exp() * (1.0 + z + 0.5 * z * z)
    }
}

impl InterarrivalSpec {
    pub fn exponential(rate: f64) -> Result<Self> {
        Ok(Self::Exponential { rate: positive("rate", rate)? })
    }

    pub fn deterministic(d: f64) -> Result<Self> {
        Ok(Self::Deterministic { d: positive("d", d)? })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b) {
            return Err(Error::InvalidParameter(format!("uniform needs 0 <= a < b, got a={a}, b={b}")));
        }
        Ok(Self::Uniform { a, b })
    }

    pub fn pareto(alpha: f64, x_min: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::InvalidParameter(format!("pareto alpha must lie in (1, 2], got {alpha}")));
        }
        Ok(Self::Pareto { alpha, x_min: positive("x_min", x_min)? })
    }

    pub fn pareto_boundary(x_min: f64) -> Result<Self> {
        Ok(Self::ParetoBoundary { x_min: positive("x_min", x_min)? })
    }

    /// Pareto tail index, treating the boundary law as index 2.
    pub fn tail_index(&self) -> Option<f64> {
        match *self {
            Self::Pareto { alpha, .. } => Some(alpha),
            Self::ParetoBoundary { .. } => Some(2.0),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Deterministic { d } => d,
            Self::Uniform { a, b } => 0.5 * (a + b),
            Self::Pareto { alpha, x_min } => alpha * x_min / (alpha - 1.0),
            Self::ParetoBoundary { x_min } => 2.0 * x_min,
        }
    }

    /// E xi^2, infinite for the Pareto family.
    pub fn second_moment(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 2.0 / (rate * rate),
            Self::Deterministic { d } => d * d,
            Self::Uniform { a, b } => (a * a + a * b + b * b) / 3.0,
            Self::Pareto { .. } | Self::ParetoBoundary { .. } => f64::INFINITY,
        }
    }

    /// Var xi, with `f64::INFINITY` as the infinite-variance marker.
    pub fn variance(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / (rate * rate),
            Self::Deterministic { .. } => 0.0,
            Self::Uniform { a, b } => (b - a) * (b - a) / 12.0,
            Self::Pareto { .. } | Self::ParetoBoundary { .. } => f64::INFINITY,
        }
    }

    /// P{xi > x}.
    pub fn tail(&self, x: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Self::Deterministic { d } => {
                if x < d {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Uniform { a, b } => {
                if x <= a {
                    1.0
                } else if x >= b {
                    0.0
                } else {
                    (b - x) / (b - a)
                }
            }
            Self::Pareto { alpha, x_min } => {
                if x <= x_min {
                    1.0
                } else {
                    (x_min / x).powf(alpha)
                }
            }
            Self::ParetoBoundary { x_min } => {
                if x <= x_min {
                    1.0
                } else {
                    let q = x_min / x;
                    q * q
                }
            }
        }
    }

    /// The integral of y^2 over [0, x] against the law of xi.
    pub fn truncated_second_moment(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => 2.0 / (rate * rate) * lower_gamma_p3(rate * x),
            Self::Deterministic { d } => {
                if x >= d {
                    d * d
                } else {
                    0.0
                }
            }
            Self::Uniform { a, b } => {
                if x <= a {
                    0.0
                } else {
                    let hi = x.min(b);
                    (hi * hi * hi - a * a * a) / (3.0 * (b - a))
                }
            }
            Self::Pareto { alpha, x_min } => {
                if x <= x_min {
                    0.0
                } else if alpha == 2.0 {
                    2.0 * x_min * x_min * (x / x_min).ln()
                } else {
                    alpha * x_min.powf(alpha) * (x.powf(2.0 - alpha) - x_min.powf(2.0 - alpha)) / (2.0 - alpha)
                }
            }
            Self::ParetoBoundary { x_min } => {
                if x <= x_min {
                    0.0
                } else {
                    2.0 * x_min * x_min * (x / x_min).ln()
                }
            }
        }
    }

    /// E min(xi, cap), the mean of the capped variable.
    pub fn truncated_mean(&self, cap: f64) -> f64 {
        if cap <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => -(-rate * cap).exp_m1() / rate,
            Self::Deterministic { d } => d.min(cap),
            Self::Uniform { a, b } => {
                if cap <= a {
                    cap
                } else if cap >= b {
                    0.5 * (a + b)
                } else {
                    a + ((b - a) * (b - a) - (b - cap) * (b - cap)) / (2.0 * (b - a))
                }
            }
            Self::Pareto { alpha, x_min } => {
                if cap <= x_min {
                    cap
                } else {
                    x_min + x_min.powf(alpha) * (x_min.powf(1.0 - alpha) - cap.powf(1.0 - alpha)) / (alpha - 1.0)
                }
            }
            Self::ParetoBoundary { x_min } => {
                if cap <= x_min {
                    cap
                } else {
                    x_min + x_min * x_min * (1.0 / x_min - 1.0 / cap)
                }
            }
        }
    }

    /// Span of the lattice the law lives on, if any.
    pub fn lattice_span(&self) -> Option<f64> {
        match *self {
            Self::Deterministic { d } => Some(d),
            _ => None,
        }
    }

    pub fn is_lattice(&self) -> bool {
        self.lattice_span().is_some()
    }

    /// One draw, by inversion of the closed-form quantile.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => {
                let u: f64 = rng.sample(Open01);
                -u.ln() / rate
            }
            Self::Deterministic { d } => d,
            Self::Uniform { a, b } => {
                let u: f64 = rng.sample(Open01);
                a + (b - a) * u
            }
            Self::Pareto { alpha, x_min } => {
                let u: f64 = rng.sample(Open01);
                x_min * u.powf(-1.0 / alpha)
            }
            Self::ParetoBoundary { x_min } => {
                let u: f64 = rng.sample(Open01);
                x_min / u.sqrt()
            }
        }
    }
}

impl fmt::Display for InterarrivalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Exponential { rate } => write!(f, "exp:{rate:?}"),
            Self::Deterministic { d } => write!(f, "det:{d:?}"),
            Self::Uniform { a, b } => write!(f, "unif:{a:?},{b:?}"),
            Self::Pareto { alpha, x_min } => write!(f, "pareto:{alpha:?},{x_min:?}"),
            Self::ParetoBoundary { x_min } => write!(f, "pareto2:{x_min:?}"),
        }
    }
}

pub(crate) fn parse_numbers(kind: &'static str, input: &str, args: &str, expected: usize) -> Result<Vec<f64>> {
    let bad = |reason: String| Error::Parse { kind, input: input.to_string(), reason };
    let values = args
        .split(',')
        .map(|a| a.trim().parse::<f64>().map_err(|e| bad(format!("`{a}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(bad(format!("expected {expected} argument(s), got {}", values.len())));
    }
    Ok(values)
}

impl FromStr for InterarrivalSpec {
    type Err = Error;

    /// Grammar: `exp:RATE`, `det:D`, `unif:A,B`, `pareto:ALPHA,XMIN`, `pareto2:XMIN`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').ok_or_else(|| Error::Parse {
            kind: "distribution",
            input: s.to_string(),
            reason: "expected NAME:ARGS".into(),
        })?;
        let nums = |n| parse_numbers("distribution", s, args, n);
        let spec = match name.trim() {
            "exp" => Self::exponential(nums(1)?[0]),
            "det" => Self::deterministic(nums(1)?[0]),
            "unif" => {
                let v = nums(2)?;
                Self::uniform(v[0], v[1])
            }
            "pareto" => {
                let v = nums(2)?;
                Self::pareto(v[0], v[1])
            }
            "pareto2" => Self::pareto_boundary(nums(1)?[0]),
            other => {
                return Err(Error::Parse {
                    kind: "distribution",
                    input: s.to_string(),
                    reason: format!("unknown distribution `{other}`"),
                })
            }
        };
        spec.map_err(|e| Error::Parse { kind: "distribution", input: s.to_string(), reason: e.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::replication_stream;
    use crate::quadrature::integrate;
    use proptest::prelude::*;

    fn zoo() -> Vec<InterarrivalSpec> {
        vec![
            InterarrivalSpec::exponential(1.0).unwrap(),
            InterarrivalSpec::exponential(2.5).unwrap(),
            InterarrivalSpec::deterministic(2.0).unwrap(),
            InterarrivalSpec::uniform(0.0, 1.0).unwrap(),
            InterarrivalSpec::uniform(0.5, 3.0).unwrap(),
            InterarrivalSpec::pareto(1.5, 1.0).unwrap(),
            InterarrivalSpec::pareto(1.2, 0.5).unwrap(),
            InterarrivalSpec::pareto_boundary(1.0).unwrap(),
        ]
    }

    #[test]
    fn means() {
        assert_eq!(InterarrivalSpec::exponential(1.0).unwrap().mean(), 1.0);
        assert_eq!(InterarrivalSpec::pareto(1.5, 1.0).unwrap().mean(), 3.0);
        assert_eq!(InterarrivalSpec::deterministic(2.0).unwrap().mean(), 2.0);
        assert_eq!(InterarrivalSpec::pareto_boundary(1.0).unwrap().mean(), 2.0);
    }

    #[test]
    fn variances() {
        assert_eq!(InterarrivalSpec::exponential(1.0).unwrap().variance(), 1.0);
        assert!(InterarrivalSpec::pareto(1.5, 1.0).unwrap().variance().is_infinite());
        assert!(InterarrivalSpec::pareto_boundary(1.0).unwrap().variance().is_infinite());
        assert!((InterarrivalSpec::uniform(0.0, 1.0).unwrap().variance() - 1.0 / 12.0).abs() < 1e-16);
    }

    #[test]
    fn tails() {
        assert_eq!(InterarrivalSpec::pareto(1.5, 1.0).unwrap().tail(4.0), 0.125);
        assert_eq!(InterarrivalSpec::exponential(1.0).unwrap().tail(0.0), 1.0);
        let det = InterarrivalSpec::deterministic(2.0).unwrap();
        assert_eq!(det.tail(1.0), 1.0);
        assert_eq!(det.tail(3.0), 0.0);
        assert_eq!(det.tail(2.0), 0.0);
    }

    #[test]
    fn truncated_second_moments() {
        let pb = InterarrivalSpec::pareto_boundary(1.0).unwrap();
        for x in [1.0, 2.0, 10.0, 1e6] {
            assert!((pb.truncated_second_moment(x) - 2.0 * f64::ln(x)).abs() < 1e-12);
        }
        let det = InterarrivalSpec::deterministic(2.0).unwrap();
        assert_eq!(det.truncated_second_moment(1.0), 0.0);
        assert_eq!(det.truncated_second_moment(3.0), 4.0);

        // Pareto(1.5, 1): integral of 1.5 y^-2.5 y^2 over [1, 4] by adaptive quadrature.
        let oracle = integrate(|y: f64| 1.5 * y.powf(-0.5), 1.0, 4.0, 1e-14, 0.0).unwrap().value;
        let p = InterarrivalSpec::pareto(1.5, 1.0).unwrap();
        assert!((p.truncated_second_moment(4.0) - oracle).abs() < 1e-10);
        assert!((oracle - 3.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_second_moment_matches_density_quadrature() {
        let e = InterarrivalSpec::exponential(2.5).unwrap();
        for x in [1e-3, 0.3, 2.0, 9.0] {
            let q = integrate(|y: f64| y * y * 2.5 * (-2.5 * y).exp(), 0.0, x, 1e-16, 1e-14).unwrap().value;
            assert!((e.truncated_second_moment(x) - q).abs() <= 1e-12 * q.max(1e-300), "x={x}");
        }
        let u = InterarrivalSpec::uniform(0.5, 3.0).unwrap();
        let q = integrate(|y: f64| y * y / 2.5, 0.5, 1.7, 1e-15, 0.0).unwrap().value;
        assert!((u.truncated_second_moment(1.7) - q).abs() < 1e-13);
        assert!((u.truncated_second_moment(10.0) - u.second_moment()).abs() < 1e-13);
    }

    #[test]
    fn truncated_mean_is_integral_of_tail() {
        for spec in zoo() {
            for cap in [0.3, 1.0, 2.5, 7.0] {
                // Split at the lattice point / support edges to keep the integrand smooth per piece.
                let mut knots = vec![0.0, cap];
                for k in [0.5, 1.0, 2.0, 3.0] {
                    if k < cap {
                        knots.push(k);
                    }
                }
                knots.sort_by(f64::total_cmp);
                let q: f64 =
                    knots.windows(2).map(|w| integrate(|y| spec.tail(y), w[0], w[1], 1e-14, 0.0).unwrap().value).sum();
                assert!((spec.truncated_mean(cap) - q).abs() < 1e-11, "{spec} cap={cap}");
            }
        }
    }

    #[test]
    fn lattice_flags() {
        for spec in zoo() {
            let lattice = matches!(spec, InterarrivalSpec::Deterministic { .. });
            assert_eq!(spec.is_lattice(), lattice);
        }
        assert_eq!(InterarrivalSpec::deterministic(2.0).unwrap().lattice_span(), Some(2.0));
    }

    #[test]
    fn deterministic_sample() {
        let mut rng = replication_stream(1, 0);
        assert_eq!(InterarrivalSpec::deterministic(2.0).unwrap().sample(&mut rng), 2.0);
    }

    #[test]
    fn exponential_tail_frequency() {
        let spec = InterarrivalSpec::exponential(1.0).unwrap();
        let mut rng = replication_stream(11, 0);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| spec.sample(&mut rng) > 1.0).count();
        let p = (-1.0f64).exp();
        let phat = hits as f64 / n as f64;
        assert!((phat - p).abs() <= 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn pareto_truncated_sample_mean() {
        // The raw mean has infinite-variance summands; capping makes the check valid.
        let spec = InterarrivalSpec::pareto(1.5, 1.0).unwrap();
        let cap = 1e4;
        let mut rng = replication_stream(12, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| spec.sample(&mut rng).min(cap)).collect();
        let est = crate::mc::McEstimate::from_samples(&xs, 12).unwrap();
        assert!(est.z_score(spec.truncated_mean(cap)).abs() <= 4.0);
        // The capped mean sits within 1% of the full mean 3 at this cap.
        assert!((spec.truncated_mean(cap) - 3.0).abs() < 0.031);
    }

    #[test]
    fn capped_means_match_for_whole_zoo() {
        for (i, spec) in zoo().into_iter().enumerate() {
            let cap = 5.0 * spec.mean();
            let mut rng = replication_stream(99, i as u64);
            let xs: Vec<f64> = (0..1_000_000).map(|_| spec.sample(&mut rng).min(cap)).collect();
            let est = crate::mc::McEstimate::from_samples(&xs, 99).unwrap();
            let target = spec.truncated_mean(cap);
            assert!(est.z_score(target).abs() <= 4.0, "{spec}: {est:?} vs {target}");
        }
    }

    #[test]
    fn parsing() {
        assert_eq!("exp:1.0".parse::<InterarrivalSpec>().unwrap(), InterarrivalSpec::Exponential { rate: 1.0 });
        assert_eq!("det:2.0".parse::<InterarrivalSpec>().unwrap(), InterarrivalSpec::Deterministic { d: 2.0 });
        assert_eq!("unif:0,1".parse::<InterarrivalSpec>().unwrap(), InterarrivalSpec::Uniform { a: 0.0, b: 1.0 });
        assert_eq!(
            "pareto:1.5,1.0".parse::<InterarrivalSpec>().unwrap(),
            InterarrivalSpec::Pareto { alpha: 1.5, x_min: 1.0 }
        );
        assert_eq!("pareto2:1.0".parse::<InterarrivalSpec>().unwrap(), InterarrivalSpec::ParetoBoundary { x_min: 1.0 });
        for bad in
            ["gauss:1", "exp", "exp:", "exp:1,2", "unif:1,0", "pareto:0.9,1", "pareto:2.5,1", "det:-1", "exp:abc"]
        {
            assert!(bad.parse::<InterarrivalSpec>().is_err(), "{bad}");
        }
    }

    fn arb_spec() -> impl Strategy<Value = InterarrivalSpec> {
        prop_oneof![
            (1e-6f64..1e6).prop_map(|r| InterarrivalSpec::exponential(r).unwrap()),
            (1e-6f64..1e6).prop_map(|d| InterarrivalSpec::deterministic(d).unwrap()),
            (0.0f64..10.0, 1e-6f64..10.0).prop_map(|(a, w)| InterarrivalSpec::uniform(a, a + w).unwrap()),
            (1.0001f64..=2.0, 1e-3f64..1e3).prop_map(|(a, x)| InterarrivalSpec::pareto(a, x).unwrap()),
            (1e-3f64..1e3).prop_map(|x| InterarrivalSpec::pareto_boundary(x).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(spec in arb_spec()) {
            let back: InterarrivalSpec = spec.to_string().parse().unwrap();
            prop_assert_eq!(back, spec);
        }

        #[test]
        fn samples_are_positive_and_reproducible(spec in arb_spec(), seed in any::<u64>(), idx in 0u64..1000) {
            let a = spec.sample(&mut replication_stream(seed, idx));
            let b = spec.sample(&mut replication_stream(seed, idx));
            prop_assert!(a > 0.0 && a.is_finite());
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }

        #[test]
        fn tail_is_a_survival_function(spec in arb_spec(), x in 0.0f64..100.0, dx in 0.0f64..10.0) {
            let (t0, t1) = (spec.tail(x), spec.tail(x + dx));
            prop_assert!((0.0..=1.0).contains(&t0));
            prop_assert!(t1 <= t0);
        }
    }
}
