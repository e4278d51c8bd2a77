use std::time::Instant;
use tilesim::dataset::generate_rmat;
use tilesim::energy::Category;
use tilesim::execution::{prepare_dataset, Simulation};
use tilesim::sysconfig::{SystemConfig, ValidatedSystem, KIB};
use tilesim::workloads::{count_traversed_edges, oracle, App, WorkloadArgs, ALL_APPS};

fn sys_scratch(grid: u32) -> ValidatedSystem {
    let mut cfg = SystemConfig::default();
    cfg.tapeout.tiles_per_die_x = 8;
    cfg.tapeout.tiles_per_die_y = 8;
    cfg.packaging.dies_x = 2;
    cfg.packaging.dies_y = 2;
    cfg.packaging.hbm_per_die = 0;
    cfg.compile.grid_x = grid;
    cfg.compile.grid_y = grid;
    ValidatedSystem::validate(cfg).unwrap()
}

fn sys_cached(grid: u32, cache_kib: u64) -> ValidatedSystem {
    let mut cfg = SystemConfig::default();
    cfg.tapeout.tiles_per_die_x = 8;
    cfg.tapeout.tiles_per_die_y = 8;
    cfg.packaging.dies_x = 2;
    cfg.packaging.dies_y = 2;
    cfg.compile.grid_x = grid;
    cfg.compile.grid_y = grid;
    cfg.compile.cached_arrays =
        ["row_ptr", "col_idx", "values", "vertex", "output"].map(String::from).to_vec();
    cfg.compile.cache_lines = cache_kib * KIB / 64;
    ValidatedSystem::validate(cfg).unwrap()
}

fn main() {
    // 1. intensity + oracle equivalence at scale 12 on 8x8
    let ds12 = generate_rmat(12, 16, 1, &SystemConfig::default().dataset);
    println!("== scale-12 apps on 8x8 scratchpad ==");
    for app in ALL_APPS {
        let t0 = Instant::now();
        let prepared = prepare_dataset(app, &ds12, 7);
        let args = WorkloadArgs::default();
        let mut sim = Simulation::new(sys_scratch(8), app, prepared.clone(), args).unwrap();
        match sim.run() {
            Ok(r) => {
                let expect = oracle(app, &prepared, &args);
                let ok = r.result.matches(&expect, 1e-9).is_ok();
                let ai = r.exec.flops as f64 / r.exec.bytes as f64;
                let m = count_traversed_edges(app, &ds12, &r.result);
                println!(
                    "{app:>9}: {:>8} cyc  ai={ai:.3}  m={m}  oracle={}  wall={:?}",
                    r.noc_cycles,
                    if ok { "OK" } else { "MISMATCH" },
                    t0.elapsed()
                );
            }
            Err(e) => println!("{app:>9}: ERR {e}"),
        }
    }

    // 2. cache size ladder at scale 14
    println!("== scale-14 bfs on 8x8, cache ladder ==");
    let ds14 = generate_rmat(14, 16, 2, &SystemConfig::default().dataset);
    for kib in [16u64, 64, 256] {
        let t0 = Instant::now();
        let app = App::Bfs;
        let prepared = prepare_dataset(app, &ds14, 7);
        let mut sim =
            Simulation::new(sys_cached(8, kib), app, prepared, WorkloadArgs::default()).unwrap();
        match sim.run() {
            Ok(r) => println!(
                "{kib:>4} KiB: {:>9} cyc  hit={:.4}  misses={}  wb={}  pf={}  wall={:?}",
                r.noc_cycles,
                r.hit_rate(),
                r.mem.misses,
                r.mem.writebacks,
                r.mem.prefetch_issued,
                t0.elapsed()
            ),
            Err(e) => println!("{kib:>4} KiB: ERR {e}"),
        }
    }

    // 3. pagerank epochs scale 10
    println!("== pagerank scale-10, 10 epochs ==");
    let ds10 = generate_rmat(10, 16, 3, &SystemConfig::default().dataset);
    let t0 = Instant::now();
    let prepared = prepare_dataset(App::Pagerank, &ds10, 7);
    let args = WorkloadArgs { epochs: 10, ..Default::default() };
    let mut sim = Simulation::new(sys_scratch(8), App::Pagerank, prepared.clone(), args).unwrap();
    let r = sim.run().unwrap();
    let expect = oracle(App::Pagerank, &prepared, &args);
    println!(
        "  {} cyc, barriers {}, oracle {:?}, wall {:?}",
        r.noc_cycles,
        r.exec.barrier_events,
        r.result.matches(&expect, 1e-6).map(|_| "OK"),
        t0.elapsed()
    );

    // 4. energy shift 4x4 -> 16x16, scale 14, cached
    println!("== energy shift, scale-14 histogram ==");
    for grid in [4u32, 16] {
        let t0 = Instant::now();
        let app = App::Histogram;
        let prepared = prepare_dataset(app, &ds14, 7);
        let mut sim =
            Simulation::new(sys_cached(grid, 64), app, prepared, WorkloadArgs::default()).unwrap();
        match sim.run() {
            Ok(r) => {
                let total = r.energy.total_pj();
                let noc = (r.energy.category_pj(Category::NocWire)
                    + r.energy.category_pj(Category::NocRouter)
                    + r.energy.category_pj(Category::DieCrossing))
                    / total;
                let dram = (r.energy.category_pj(Category::Dram)
                    + r.energy.category_pj(Category::Refresh))
                    / total;
                println!(
                    "{grid:>2}x{grid:<2}: {:>9} cyc  noc={:.3} dram={:.3} hbm_off={:?} wall={:?}",
                    r.noc_cycles,
                    noc,
                    dram,
                    r.hbm_power.iter().map(|h| h.powered_until_ps).collect::<Vec<_>>(),
                    t0.elapsed()
                );
            }
            Err(e) => println!("{grid}: ERR {e}"),
        }
    }
}
