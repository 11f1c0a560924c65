//! Human-readable summary of a results file.

use std::fmt::Write;

use crate::results::Results;
use crate::{BenchError, Result};

/// Render the per-cell table and the speedup column. Values are recomputed
/// from the session and episode rows.
pub fn summarize(results: &Results) -> Result<String> {
    let cells = results.cells();
    if cells.is_empty() {
        return Err(BenchError::NoData);
    }
    let (aggregates, speedups) = results.compute_aggregates();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<7} {:>4} {:>14} {:>10} {:>24} {:>16}",
        "planner", "m", "metric", "n", "mean [95% CI]", "std"
    );
    for a in &aggregates {
        let _ = writeln!(
            s,
            "{:<7} {:>4} {:>14} {:>10} {:>24} {:>16.6}",
            a.planner.name(),
            a.particles,
            a.metric.name(),
            a.summary.n,
            format!(
                "{:.4} [{:.4}, {:.4}]",
                a.summary.mean, a.summary.ci_low, a.summary.ci_high
            ),
            a.summary.std,
        );
    }
    if !speedups.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "{:>4} {:>12} {:>12} {:>8}", "m", "pft ms", "irpft ms", "speedup");
        for r in &speedups {
            let _ = writeln!(
                s,
                "{:>4} {:>12.4} {:>12.4} {:>8.4}",
                r.particles, r.pft_ms, r.irpft_ms, r.speedup
            );
        }
    }
    Ok(s)
}
