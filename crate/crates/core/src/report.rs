//! Report emission: a self-contained human-readable text report per run
//! (every metric re-derivable from the echoed counters) plus one
//! comma-separated summary row for tabular tooling.

use crate::cost::CostReport;
use crate::energy::CATEGORIES;
use crate::execution::RunResult;
use crate::metrics::RunMetrics;
use crate::sysconfig::SystemConfig;

pub const SUMMARY_HEADER: &str = "app,dataset,seed,grid,topology,m,time_s,cycles,teps,flops_per_s,ops_per_s,bytes_per_s,intensity,energy_j,power_w,teps_per_watt,node_cost,teps_per_dollar,hops,hit_rate,status";

#[derive(Debug, Clone)]
pub struct ReportInputs<'a> {
    pub cfg: &'a SystemConfig,
    pub dataset_name: &'a str,
    pub seed: u64,
    pub run: &'a RunResult,
    pub metrics: &'a RunMetrics,
    pub cost: &'a CostReport,
    /// Wall-clock timestamp; excluded from determinism comparisons.
    pub timestamp: String,
}

pub fn render_report(r: &ReportInputs) -> String {
    let mut out = String::new();
    let push = |out: &mut String, s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    push(&mut out, "# tilesim run report".into());
    push(&mut out, format!("timestamp: {}", r.timestamp));
    push(&mut out, format!("app: {}", r.run.app.name()));
    push(&mut out, format!("dataset: {}", r.dataset_name));
    push(&mut out, format!("seed: {}", r.seed));
    push(&mut out, String::new());

    push(&mut out, "## configuration".into());
    let echoed = toml::to_string_pretty(r.cfg).unwrap_or_else(|e| format!("<echo failed: {e}>"));
    for line in echoed.lines() {
        push(&mut out, format!("  {line}"));
    }

    push(&mut out, "## dataset".into());
    push(&mut out, format!("  footprint_bytes: {}", r.run.footprint_bytes));
    push(&mut out, format!("  load_time_ps: {}", r.run.load_time_ps));

    push(&mut out, "## run".into());
    push(&mut out, format!("  time_ps: {}", r.run.time_ps));
    push(&mut out, format!("  noc_cycles: {}", r.run.noc_cycles));
    push(&mut out, format!("  pu_cycles: {}", r.run.pu_cycles));
    push(&mut out, format!("  tasks_run: {:?}", r.run.exec.tasks_run));
    push(&mut out, format!("  elements: {}", r.run.exec.elements));
    push(&mut out, format!("  flops: {}", r.run.exec.flops));
    push(&mut out, format!("  ops: {}", r.run.exec.ops));
    push(&mut out, format!("  bytes: {}", r.run.exec.bytes));
    push(&mut out, format!("  stall_ps: {}", r.run.exec.stall_ps));
    push(&mut out, format!("  messages_spawned: {}", r.run.exec.spawned_msgs));
    push(&mut out, format!("  messages_executed: {}", r.run.exec.executed_msgs));
    push(&mut out, format!("  barrier_events: {}", r.run.exec.barrier_events));

    push(&mut out, "## memory".into());
    let m = &r.run.mem;
    push(&mut out, format!("  hits: {}", m.hits));
    push(&mut out, format!("  misses: {}", m.misses));
    push(&mut out, format!("  evictions: {}", m.evictions));
    push(&mut out, format!("  writebacks: {}", m.writebacks));
    push(&mut out, format!("  prefetch_issued: {}", m.prefetch_issued));
    push(&mut out, format!("  prefetch_useful: {}", m.prefetch_useful));
    push(&mut out, format!("  scratchpad_accesses: {}", m.scratchpad_accesses));
    push(&mut out, format!("  hit_rate: {:.6}", r.run.hit_rate()));
    for h in &r.run.hbm_power {
        push(
            &mut out,
            format!(
                "  hbm die {}: powered_until_ps {} (last miss {})",
                h.die, h.powered_until_ps, h.last_miss_ps
            ),
        );
    }

    push(&mut out, "## network".into());
    let n = &r.run.noc;
    push(&mut out, format!("  injected_msgs: {}", n.injected_msgs));
    push(&mut out, format!("  delivered_msgs: {}", n.delivered_msgs));
    push(&mut out, format!("  injected_flits: {}", n.injected_flits));
    push(&mut out, format!("  delivered_flits: {}", n.delivered_flits));
    push(&mut out, format!("  total_hops: {}", n.total_hops));
    push(&mut out, format!("  die_noc_msgs: {}", n.die_noc_msgs));

    push(&mut out, "## energy".into());
    for cat in CATEGORIES {
        push(
            &mut out,
            format!("  {}_pj: {:.6}", cat.name(), r.run.energy.category_pj(cat)),
        );
    }
    push(&mut out, format!("  total_pj: {:.6}", r.run.energy.total_pj()));

    push(&mut out, "## cost".into());
    push(&mut out, format!("  die_area_mm2: {:.6}", r.cost.die_area_mm2));
    push(&mut out, format!("  placements_per_wafer: {}", r.cost.placements_per_wafer));
    push(&mut out, format!("  die_yield: {:.9}", r.cost.die_yield));
    push(&mut out, format!("  die_cost: {:.6}", r.cost.die_cost));
    push(&mut out, format!("  package_total: {:.6}", r.cost.package.total));
    push(&mut out, format!("  node_cost: {:.6}", r.cost.node_cost));

    push(&mut out, "## metrics".into());
    let mm = r.metrics;
    push(&mut out, format!("  m: {}", mm.m));
    push(&mut out, format!("  time_s: {:.9}", mm.time_s));
    push(&mut out, format!("  teps: {:.6}", mm.teps));
    push(&mut out, format!("  flops_per_s: {:.6}", mm.flops_per_s));
    push(&mut out, format!("  ops_per_s: {:.6}", mm.ops_per_s));
    push(&mut out, format!("  avg_mem_bandwidth: {:.6}", mm.avg_mem_bandwidth));
    push(&mut out, format!("  arithmetic_intensity: {:.6}", mm.arithmetic_intensity));
    push(&mut out, format!("  energy_j: {:.12}", mm.energy_j));
    push(&mut out, format!("  power_w: {:.12}", mm.power_w));
    push(&mut out, format!("  teps_per_watt: {:.6}", mm.teps_per_watt));
    push(&mut out, format!("  teps_per_dollar: {:.6}", mm.teps_per_dollar));
    push(&mut out, format!("  total_hops: {}", mm.total_hops));
    push(&mut out, format!("  hit_rate: {:.6}", mm.hit_rate));
    out
}

pub fn summary_row(
    cfg: &SystemConfig,
    dataset_name: &str,
    seed: u64,
    metrics: &RunMetrics,
) -> String {
    format!(
        "{},{},{},{}x{},{:?}/{:?},{},{:.9},{},{:.3},{:.3},{:.3},{:.3},{:.6},{:.9e},{:.9e},{:.3},{:.6},{:.3},{},{:.6},ok",
        metrics.app,
        dataset_name,
        seed,
        cfg.compile.grid_x,
        cfg.compile.grid_y,
        cfg.compile.topology_tile_noc,
        cfg.compile.topology_die_noc,
        metrics.m,
        metrics.time_s,
        metrics.wall_cycles,
        metrics.teps,
        metrics.flops_per_s,
        metrics.ops_per_s,
        metrics.avg_mem_bandwidth,
        metrics.arithmetic_intensity,
        metrics.energy_j,
        metrics.power_w,
        metrics.teps_per_watt,
        metrics.node_cost,
        metrics.teps_per_dollar,
        metrics.total_hops,
        metrics.hit_rate,
    )
}

/// Drop the timestamp line so byte comparisons ignore wall-clock time.
pub fn without_timestamp(report: &str) -> String {
    report
        .lines()
        .filter(|l| !l.starts_with("timestamp:"))
        .collect::<Vec<_>>()
        .join("\n")
}
