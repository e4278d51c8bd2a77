use tilesim::dataset::generate_rmat;
use tilesim::execution::{prepare_dataset, Simulation};
use tilesim::sysconfig::{SystemConfig, ValidatedSystem};
use tilesim::workloads::{App, WorkloadArgs};

fn main() {
    let mut cfg = SystemConfig::default();
    cfg.tapeout.tiles_per_die_x = 4;
    cfg.tapeout.tiles_per_die_y = 4;
    cfg.packaging.dies_x = 1;
    cfg.packaging.dies_y = 1;
    cfg.packaging.hbm_per_die = 0;
    cfg.compile.grid_x = 4;
    cfg.compile.grid_y = 4;
    cfg.sim.watchdog_cycles = 200_000;
    cfg.sim.progress_every = 20_000;
    cfg.sim.record_events = true;
    let sys = ValidatedSystem::validate(cfg).unwrap();
    let ds = generate_rmat(8, 8, 3, &sys.cfg.dataset);
    let prepared = prepare_dataset(App::Bfs, &ds, 7);
    let mut sim = Simulation::new(sys, App::Bfs, prepared, WorkloadArgs::default()).unwrap();
    match sim.run() {
        Ok(r) => println!("ok: {} cycles, tasks {:?}", r.noc_cycles, r.exec.tasks_run),
        Err(e) => println!("ERR: {e}"),
    }
}
