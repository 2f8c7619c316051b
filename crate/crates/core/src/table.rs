//! Convergence-table rows and their CSV encoding.

use std::io::{self, Write};

pub const CSV_HEADER: &str = "s,n_reps,estimate,stderr,normalizer,ratio,limit,rel_gap";

/// One row of a convergence study at level `s`.
///
/// `normalizer` is the theorem's scale (sqrt(s) or c(s)), `ratio = estimate / normalizer`
/// and `rel_gap = ratio / limit - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub s: f64,
    pub n_reps: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub normalizer: f64,
    pub ratio: f64,
    pub limit: f64,
    pub rel_gap: f64,
}

impl ConvergenceRow {
    pub fn new(s: f64, n_reps: usize, estimate: f64, std_error: f64, normalizer: f64, limit: f64) -> Self {
        let ratio = estimate / normalizer;
        Self { s, n_reps, estimate, std_error, normalizer, ratio, limit, rel_gap: ratio / limit - 1.0 }
    }
}

/// 17 significant digits, scientific notation: exact round trip, no locale.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(rows: &[ConvergenceRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            format_float(r.s),
            r.n_reps,
            format_float(r.estimate),
            format_float(r.std_error),
            format_float(r.normalizer),
            format_float(r.ratio),
            format_float(r.limit),
            format_float(r.rel_gap),
        )?;
    }
    Ok(())
}
