//! Post-run metric derivation. Everything here is computed from primary
//! counters; nothing re-simulates, so energy and cost can be re-derived
//! after the fact under different price or energy constants.

use crate::cost::CostReport;
use crate::execution::RunResult;
use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub app: String,
    pub wall_cycles: u64,
    pub time_s: f64,
    /// Traversed elements (edges / non-zeros / inputs).
    pub m: u64,
    pub teps: f64,
    pub ops_per_s: f64,
    pub flops_per_s: f64,
    /// Bytes touched per second, from the task cost counters.
    pub avg_mem_bandwidth: f64,
    pub arithmetic_intensity: f64,
    pub energy_j: f64,
    pub power_w: f64,
    pub node_cost: f64,
    pub teps_per_dollar: f64,
    pub teps_per_watt: f64,
    pub total_hops: u64,
    pub hit_rate: f64,
}

#[derive(Debug)]
pub struct ZeroTimeRun;

impl fmt::Display for ZeroTimeRun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run finished in zero simulated time; no rates to report")
    }
}

impl std::error::Error for ZeroTimeRun {}

pub fn compute_metrics(
    run: &RunResult,
    m: u64,
    cost: &CostReport,
) -> Result<RunMetrics, ZeroTimeRun> {
    if run.time_ps == 0 {
        return Err(ZeroTimeRun);
    }
    let time_s = run.time_ps as f64 * 1e-12;
    let teps = m as f64 / time_s;
    let energy_j = run.energy.total_joules();
    let power_w = energy_j / time_s;
    Ok(RunMetrics {
        app: run.app.name().to_string(),
        wall_cycles: run.noc_cycles,
        time_s,
        m,
        teps,
        ops_per_s: run.exec.ops as f64 / time_s,
        flops_per_s: run.exec.flops as f64 / time_s,
        avg_mem_bandwidth: run.exec.bytes as f64 / time_s,
        arithmetic_intensity: if run.exec.bytes > 0 {
            run.exec.flops as f64 / run.exec.bytes as f64
        } else {
            0.0
        },
        energy_j,
        power_w,
        node_cost: cost.node_cost,
        teps_per_dollar: teps / cost.node_cost,
        teps_per_watt: if power_w > 0.0 { teps / power_w } else { 0.0 },
        total_hops: run.noc.total_hops,
        hit_rate: run.hit_rate(),
    })
}

/// Geometric mean; zero for an empty slice.
pub fn geomean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let log_sum: f64 = xs.iter().map(|x| x.max(f64::MIN_POSITIVE).ln()).sum();
    (log_sum / xs.len() as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geomean_examples() {
        assert!((geomean(&[2.0, 8.0]) - 4.0).abs() < 1e-12);
        assert!((geomean(&[3.0]) - 3.0).abs() < 1e-12);
        assert_eq!(geomean(&[]), 0.0);
    }

    #[test]
    fn teps_formula() {
        // m = 1.3e9 edges in one second: 1.3 GTEPS.
        let m = 1_300_000_000u64;
        let time_s = 1.0;
        assert!((m as f64 / time_s - 1.3e9).abs() < 1.0);
    }
}
