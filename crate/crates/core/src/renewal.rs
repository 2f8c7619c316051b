//! Renewal counting process N(t) = #{k >= 0 : S_k <= t} and Monte Carlo
//! estimators built on it.

use rand::Rng;

use crate::distributions::InterarrivalSpec;
use crate::error::{Error, Result};
use crate::limits::{limit_constant, CaseKind, LimitCase};
use crate::mc::{check_reps, compensated_sum, try_replicate, McEstimate};
use crate::scaling::{moment_scale, SlowlyVarying, DEFAULT_TOL};
use crate::special::poisson_pmf;
use crate::table::ConvergenceRow;

/// Hard cap on increments drawn along one path.
pub const MAX_STEPS: u64 = 1_000_000_000;

/// State of a renewal path at the first passage above level t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalObservation {
    /// N(t), which counts S_0 = 0 and so is at least 1.
    pub n_of_t: u64,
    /// S_{N(t)} - t, strictly positive.
    pub overshoot: f64,
    /// S_{N(t)}.
    pub total: f64,
    /// xi_{N(t)}, the increment that crossed t.
    pub last_increment: f64,
}

impl RenewalObservation {
    /// Checks the pathwise invariants against level `t`.
    pub fn is_consistent(&self, t: f64) -> bool {
        self.n_of_t >= 1 && self.overshoot > 0.0 && self.total > t && self.total - self.last_increment <= t
    }
}

fn check_level(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("level must be positive and finite, got {t}")))
    }
}

/// Runs one path and records the first passage above each level in `levels`,
/// which must be increasing.
pub fn simulate_renewal_levels<R: Rng + ?Sized>(
    spec: &InterarrivalSpec,
    levels: &[f64],
    rng: &mut R,
) -> Result<Vec<RenewalObservation>> {
    for w in levels.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::InvalidParameter("levels must be strictly increasing".into()));
        }
    }
    levels.iter().try_for_each(|&t| check_level(t))?;

    let mut out = Vec::with_capacity(levels.len());
    let mut sum = 0.0f64;
    // #{k : S_k <= t} among the partial sums already classified.
    let mut count: u64 = 1;
    // Last increment, whose partial sum has not been compared with the current level yet.
    let mut pending: Option<f64> = None;
    let mut steps: u64 = 0;
    for &t in levels {
        loop {
            if let Some(xi) = pending {
                if sum > t {
                    out.push(RenewalObservation { n_of_t: count, overshoot: sum - t, total: sum, last_increment: xi });
                    break;
                }
                count += 1;
            }
            if steps >= MAX_STEPS {
                return Err(Error::IterationCap { cap: MAX_STEPS });
            }
            steps += 1;
            let xi = spec.sample(rng);
            sum += xi;
            pending = Some(xi);
        }
    }
    for (obs, &t) in out.iter().zip(levels) {
        debug_assert!(obs.is_consistent(t), "renewal path invariant violated: {obs:?} at t={t}");
    }
    Ok(out)
}

/// One path of the renewal process stopped at the first passage above `t`.
pub fn simulate_renewal<R: Rng + ?Sized>(spec: &InterarrivalSpec, t: f64, rng: &mut R) -> Result<RenewalObservation> {
    Ok(simulate_renewal_levels(spec, &[t], rng)?[0])
}

/// Monte Carlo estimate of E|N(s) - s / mu|.
pub fn mc_abs_deviation(spec: &InterarrivalSpec, s: f64, n_reps: usize, master_seed: u64) -> Result<McEstimate> {
    check_reps(n_reps)?;
    let centre = s / spec.mean();
    let samples =
        try_replicate(
            n_reps,
            master_seed,
            |_, rng| Ok((simulate_renewal(spec, s, rng)?.n_of_t as f64 - centre).abs()),
        )?;
    McEstimate::from_samples(&samples, master_seed)
}

/// Monte Carlo estimate of the mean overshoot E(S_{N(s)} - s).
pub fn mc_overshoot_mean(spec: &InterarrivalSpec, s: f64, n_reps: usize, master_seed: u64) -> Result<McEstimate> {
    check_reps(n_reps)?;
    let samples = try_replicate(n_reps, master_seed, |_, rng| Ok(simulate_renewal(spec, s, rng)?.overshoot))?;
    McEstimate::from_samples(&samples, master_seed)
}

/// Wald's identity E S_{N(t)} = mu E N(t), checked on coupled replications.
///
/// Returns the mean of `S_{N(t)} - mu N(t)` in units of its standard error.
/// A degenerate (zero-SE) sample returns 0 when the mean is exactly 0.
pub fn wald_residual(spec: &InterarrivalSpec, t: f64, n_reps: usize, master_seed: u64) -> Result<f64> {
    check_reps(n_reps)?;
    let mu = spec.mean();
    let samples = try_replicate(n_reps, master_seed, |_, rng| {
        let obs = simulate_renewal(spec, t, rng)?;
        Ok(obs.total - mu * obs.n_of_t as f64)
    })?;
    Ok(McEstimate::from_samples(&samples, master_seed)?.z_score(0.0))
}

/// Lower-tail Chernoff bound P{P <= k} for P ~ Poisson(mean), k < mean.
fn poisson_lower_tail_bound(k: f64, mean: f64) -> f64 {
    if k < 0.0 {
        return 0.0;
    }
    if k == 0.0 {
        return (-mean).exp();
    }
    (-mean + k + k * (mean / k).ln()).exp()
}

/// E|N(s) - s| for Exponential(1) inter-arrivals, where N(s) - 1 ~ Poisson(s).
///
/// Uses `E|1 + P - s| = 1 + 2 E(s - 1 - P)^+`, a finite sum over k < s - 1.
/// Terms further than about 12 standard deviations below the mean are
/// dropped only while a Chernoff bound keeps the omitted mass under 1e-13.
pub fn exact_abs_deviation_poisson(s: f64) -> Result<f64> {
    check_level(s)?;
    let shift = s - 1.0;
    if shift <= 0.0 {
        return Ok(1.0);
    }
    // Largest k with k < s - 1.
    let k_hi = (shift.ceil() - 1.0).max(0.0);
    let mut k_lo = (shift - 12.0 * s.sqrt() - 10.0).floor().max(0.0);
    while k_lo > 0.0 && shift * poisson_lower_tail_bound(k_lo - 1.0, s) > 1e-13 {
        k_lo = (k_lo - s.sqrt().max(1.0)).floor().max(0.0);
    }
    let (lo, hi) = (k_lo as u64, k_hi as u64);
    let positive_part = compensated_sum((lo..=hi).map(|k| (shift - k as f64) * poisson_pmf(k, s)));
    Ok(1.0 + 2.0 * positive_part)
}

/// Builds the theorem case implied by an inter-arrival law.
pub fn renewal_case(spec: &InterarrivalSpec, kind: CaseKind) -> Result<LimitCase> {
    let mu = spec.mean();
    let var = spec.variance();
    let mismatch = |why: &str| Err(Error::CaseMismatch(format!("case {kind} does not apply to {spec}: {why}")));
    match kind {
        CaseKind::A1 => {
            if !var.is_finite() {
                return mismatch("variance is infinite");
            }
            if var <= 0.0 {
                return mismatch("variance is zero, so the normalizer vanishes");
            }
            LimitCase::a1(mu, var.sqrt())
        }
        CaseKind::A2 => {
            if var.is_finite() {
                return mismatch("variance is finite; use a1");
            }
            match spec.tail_index() {
                Some(2.0) => LimitCase::a2(mu),
                _ => mismatch("truncated second moment is not slowly varying"),
            }
        }
        CaseKind::A3 => match spec.tail_index() {
            Some(a) if a < 2.0 => LimitCase::a3(mu, a),
            _ => mismatch("tail is not regularly varying with index in (1, 2)"),
        },
        _ => mismatch("subordinator cases need a subordinator spec"),
    }
}

/// Scaled estimates of E|N(s) - s/mu| along an increasing grid of levels,
/// each divided by [`moment_scale`] and compared with the limit constant of `kind`.
///
/// Each replication runs a single path and reads N(s) at every grid level,
/// so rows are correlated across s but each row is an unbiased estimate.
pub fn convergence_table(
    spec: &InterarrivalSpec,
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
    let case = renewal_case(spec, kind)?;
    let limit = limit_constant(&case)?;
    let norms = s_grid.iter().map(|&s| moment_scale(&case, ell, s, DEFAULT_TOL)).collect::<Result<Vec<_>>>()?;

    let mu = spec.mean();
    let per_rep = try_replicate(n_reps, master_seed, |_, rng| {
        let obs = simulate_renewal_levels(spec, s_grid, rng)?;
        Ok(obs.iter().zip(s_grid).map(|(o, &s)| (o.n_of_t as f64 - s / mu).abs()).collect::<Vec<f64>>())
    })?;

    s_grid
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let column: Vec<f64> = per_rep.iter().map(|row| row[j]).collect();
            let est = McEstimate::from_samples(&column, master_seed)?;
            Ok(ConvergenceRow::new(s, n_reps, est.mean, est.std_error, norms[j], limit))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::replication_stream;
    use std::f64::consts::PI;

    #[test]
    fn deterministic_path() {
        let det = InterarrivalSpec::deterministic(1.0).unwrap();
        let obs = simulate_renewal(&det, 2.5, &mut replication_stream(0, 0)).unwrap();
        assert_eq!(obs.n_of_t, 3);
        assert_eq!(obs.overshoot, 0.5);
        assert_eq!(obs.total, 3.0);
    }

    #[test]
    fn lattice_count_is_floor_plus_one() {
        for d in [0.5, 1.0, 3.0] {
            let det = InterarrivalSpec::deterministic(d).unwrap();
            for t in [0.2, 0.7, 1.3, 2.9, 10.1, 99.7] {
                if (t / d).fract() == 0.0 {
                    continue;
                }
                let obs = simulate_renewal(&det, t, &mut replication_stream(0, 0)).unwrap();
                assert_eq!(obs.n_of_t, (t / d).floor() as u64 + 1, "d={d} t={t}");
            }
        }
    }

    #[test]
    fn multi_level_matches_single_level() {
        let spec = InterarrivalSpec::pareto(1.5, 1.0).unwrap();
        let levels = [5.0, 50.0, 51.0, 500.0];
        let all = simulate_renewal_levels(&spec, &levels, &mut replication_stream(4, 4)).unwrap();
        let last = simulate_renewal(&spec, 500.0, &mut replication_stream(4, 4)).unwrap();
        assert_eq!(all[3], last);
        for (o, t) in all.iter().zip(levels) {
            assert!(o.is_consistent(t));
        }
        assert!(simulate_renewal_levels(&spec, &[5.0, 5.0], &mut replication_stream(0, 0)).is_err());

        let det = InterarrivalSpec::deterministic(1.0).unwrap();
        let obs = simulate_renewal_levels(&det, &[2.5, 2.7, 3.5, 10.2], &mut replication_stream(0, 0)).unwrap();
        let counts: Vec<u64> = obs.iter().map(|o| o.n_of_t).collect();
        assert_eq!(counts, [3, 3, 4, 11]);
        assert!((obs[1].overshoot - 0.3).abs() < 1e-15);
    }

    #[test]
    fn invariants_across_zoo() {
        let zoo = [
            InterarrivalSpec::exponential(1.0).unwrap(),
            InterarrivalSpec::uniform(0.0, 1.0).unwrap(),
            InterarrivalSpec::deterministic(0.3).unwrap(),
            InterarrivalSpec::pareto(1.2, 1.0).unwrap(),
            InterarrivalSpec::pareto_boundary(1.0).unwrap(),
        ];
        for spec in zoo {
            for i in 0..200 {
                let obs = simulate_renewal(&spec, 37.0, &mut replication_stream(9, i)).unwrap();
                assert!(obs.is_consistent(37.0), "{spec}: {obs:?}");
            }
        }
    }

    #[test]
    fn deterministic_estimates_are_exact() {
        let det = InterarrivalSpec::deterministic(1.0).unwrap();
        let est = mc_abs_deviation(&det, 2.5, 10, 123).unwrap();
        assert_eq!(est.mean, 0.5);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(mc_overshoot_mean(&det, 2.5, 10, 5).unwrap().mean, 0.5);
        assert_eq!(wald_residual(&det, 2.5, 10, 5).unwrap(), 0.0);
    }

    #[test]
    fn poisson_counts_chi_square() {
        // N(10) - 1 ~ Poisson(10) for Exponential(1) gaps.
        let spec = InterarrivalSpec::exponential(1.0).unwrap();
        let n = 100_000;
        let counts = crate::mc::replicate(n, 31, |_, rng| simulate_renewal(&spec, 10.0, rng).unwrap().n_of_t - 1);
        // Bins 0..=3 merged, 4..=19 single, >= 20 merged.
        let bin = |k: u64| (k.clamp(3, 20) - 3) as usize;
        let mut observed = [0f64; 18];
        for k in counts {
            observed[bin(k)] += 1.0;
        }
        let mut expected = [0f64; 18];
        for k in 0..200 {
            expected[bin(k)] += n as f64 * poisson_pmf(k, 10.0);
        }
        let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
        // 17 degrees of freedom; the 0.1% critical value is 40.79.
        assert!(chi2 < 40.79, "chi2 = {chi2}");
    }

    #[test]
    fn exponential_overshoot_is_exponential() {
        let spec = InterarrivalSpec::exponential(1.0).unwrap();
        let est = mc_overshoot_mean(&spec, 50.0, 100_000, 8).unwrap();
        assert!(est.z_score(1.0).abs() <= 3.0, "{est:?}");
    }

    #[test]
    fn poisson_oracle_limits() {
        assert_eq!(exact_abs_deviation_poisson(1e-6).unwrap(), 1.0);
        let v = exact_abs_deviation_poisson(1e4).unwrap();
        assert!(((v / 100.0) / (2.0 / PI).sqrt() - 1.0).abs() < 0.01);
        // s = 0.5: E|1 + P - 0.5| = 0.5 + E P = 1.
        assert!((exact_abs_deviation_poisson(0.5).unwrap() - 1.0).abs() < 1e-15);
        // s = 3: 1 + 2 [2 p0 + 1 p1].
        let direct = 1.0 + 2.0 * (2.0 * (-3.0f64).exp() + 3.0 * (-3.0f64).exp());
        assert!((exact_abs_deviation_poisson(3.0).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn poisson_oracle_matches_brute_force_pmf_sum() {
        // Two-sided sum E|1 + P - s| over a wide window.
        for s in [2.5f64, 17.0, 123.4, 2000.0] {
            let hi = (s + 40.0 * s.sqrt() + 50.0) as u64;
            let brute = compensated_sum((0..=hi).map(|k| (1.0 + k as f64 - s).abs() * poisson_pmf(k, s)));
            let oracle = exact_abs_deviation_poisson(s).unwrap();
            assert!((brute - oracle).abs() < 1e-11 * s.max(1.0), "s={s}: {brute} vs {oracle}");
        }
    }

    #[test]
    fn monte_carlo_matches_poisson_oracle() {
        let spec = InterarrivalSpec::exponential(1.0).unwrap();
        let est = mc_abs_deviation(&spec, 100.0, 200_000, 77).unwrap();
        let exact = exact_abs_deviation_poisson(100.0).unwrap();
        assert!(est.z_score(exact).abs() <= 4.0, "{est:?} vs {exact}");
    }

    #[test]
    fn wald_identity_light_and_heavy() {
        let e = InterarrivalSpec::exponential(1.0).unwrap();
        assert!(wald_residual(&e, 100.0, 50_000, 1).unwrap().abs() <= 4.0);
        let p = InterarrivalSpec::pareto(1.5, 1.0).unwrap();
        assert!(wald_residual(&p, 1000.0, 50_000, 2).unwrap().abs() <= 4.0);
    }

    #[test]
    fn case_mismatches() {
        let det = InterarrivalSpec::deterministic(1.0).unwrap();
        assert!(matches!(renewal_case(&det, CaseKind::A1), Err(Error::CaseMismatch(_))));
        let p = InterarrivalSpec::pareto(1.5, 1.0).unwrap();
        assert!(matches!(renewal_case(&p, CaseKind::A1), Err(Error::CaseMismatch(_))));
        assert!(matches!(renewal_case(&p, CaseKind::A2), Err(Error::CaseMismatch(_))));
        assert!(matches!(renewal_case(&p, CaseKind::B3), Err(Error::CaseMismatch(_))));
        let pb = InterarrivalSpec::pareto_boundary(1.0).unwrap();
        assert!(matches!(renewal_case(&pb, CaseKind::A3), Err(Error::CaseMismatch(_))));
        assert_eq!(renewal_case(&pb, CaseKind::A2).unwrap(), LimitCase::a2(2.0).unwrap());
        let err = convergence_table(&det, CaseKind::A1, None, &[10.0], 10, 0).unwrap_err();
        assert!(matches!(err, Error::CaseMismatch(_)));
    }

    #[test]
    fn small_convergence_table() {
        let spec = InterarrivalSpec::exponential(1.0).unwrap();
        let rows = convergence_table(&spec, CaseKind::A1, None, &[100.0, 1000.0], 4000, 3).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!((r.limit - (2.0 / PI).sqrt()).abs() < 1e-15);
            assert!((r.normalizer - r.s.sqrt()).abs() < 1e-12);
            assert!(r.rel_gap.abs() < 0.1, "{r:?}");
        }
    }

    #[test]
    fn table_scale_for_a_non_unit_mean() {
        // Exp(1/2): mu = sigma = 2 and N(s) - 1 ~ Poisson(s / 2), so the exact
        // E|N(s) - s/mu| is the Poisson oracle at s / 2.
        let spec = InterarrivalSpec::exponential(0.5).unwrap();
        let s = 2e4;
        let rows = convergence_table(&spec, CaseKind::A1, None, &[s], 20_000, 9).unwrap();
        let r = rows[0];
        let exact = exact_abs_deviation_poisson(s / 2.0).unwrap();
        assert!(((r.estimate - exact) / r.std_error).abs() <= 4.0, "{r:?} vs {exact}");
        assert!((r.limit - 2.0 * (2.0 / (PI * 8.0)).sqrt()).abs() < 1e-15);
        assert!((exact / s.sqrt() / r.limit - 1.0).abs() < 0.01);
        assert!(r.rel_gap.abs() < 0.03, "{r:?}");
    }
}
