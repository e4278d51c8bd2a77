use tilesim::energy::{EnergyConstants, EnergyLedger};
use tilesim::noc::synthetic::{run_traffic, TrafficSpec};
use tilesim::noc::{Extent, Network, NocParams, TopologySpec};
use tilesim::sysconfig::Topology;

fn net(n: u32, mode: Topology, buf: u32, width: u32) -> Network {
    Network::new(NocParams {
        grid_x: n,
        grid_y: n,
        grid_origin_x: 0,
        grid_origin_y: 0,
        tiles_per_die_x: n,
        tiles_per_die_y: n,
        width_bits: width,
        buffer_msgs: buf,
        topology: TopologySpec {
            tile_mode: mode,
            die_mode: mode,
            extent: Extent { x0: 0, y0: 0, w: n, h: n },
        },
        die_threshold: 2,
        wire_ps_per_mm: 0.0,
        die_to_die_ps: 0.0,
        cycle_ps: 1000.0,
        hop_mm_tile: 1.0,
        hop_mm_die: 4.0,
    })
}

fn main() {
    for n in [8u32, 16] {
        for buf in [4u32, 8] {
            for words in [1u32, 2] {
                for mode in [Topology::Mesh, Topology::Torus] {
                    let mut network = net(n, mode, buf, 32);
                    let mut energy = EnergyLedger::new(EnergyConstants::default(), n * n, false);
                    let spec = TrafficSpec {
                        rate: 1.0,
                        payload_words: words,
                        inject_cycles: 3000,
                        drain_cycles: 3_000_000,
                        seed: 9,
                        ..Default::default()
                    };
                    let r = run_traffic(&mut network, &spec, &mut energy);
                    println!(
                        "n={n} buf={buf} words={words} {mode:?}: thr={:.4} lat={:.1} hops/msg={:.2} drained={} cycles={}",
                        r.accepted_throughput,
                        r.mean_latency,
                        r.total_hops as f64 / r.delivered_msgs.max(1) as f64,
                        r.drained,
                        r.cycles_run
                    );
                }
            }
        }
    }
}
