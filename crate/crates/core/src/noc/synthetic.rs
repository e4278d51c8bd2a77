//! Synthetic traffic generation for standalone NoC characterization:
//! uniform-random and hotspot patterns with per-tile Bernoulli injection,
//! plus a drain watchdog for liveness checks.

use super::{CountingSink, Extent, Leg, Network, NocMessage};
use crate::energy::EnergyLedger;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    UniformRandom,
    /// A fraction (per mille) of messages target one hot tile; the rest are
    /// uniform random.
    Hotspot { tile: u32, per_mille: u32 },
}

#[derive(Debug, Clone)]
pub struct TrafficSpec {
    pub pattern: Pattern,
    /// Injection probability per tile per cycle.
    pub rate: f64,
    pub payload_words: u32,
    /// Cycles of active injection.
    pub inject_cycles: u64,
    /// Give-up horizon for draining after injection stops.
    pub drain_cycles: u64,
    pub seed: u64,
    /// Audit flit conservation every cycle (walks all buffers; slow).
    pub audit_every_cycle: bool,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        Self {
            pattern: Pattern::UniformRandom,
            rate: 0.1,
            payload_words: 2,
            inject_cycles: 10_000,
            drain_cycles: 1_000_000,
            seed: 1,
            audit_every_cycle: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrafficResult {
    pub offered_msgs: u64,
    pub injected_msgs: u64,
    pub injected_flits: u64,
    pub delivered_msgs: u64,
    pub delivered_flits: u64,
    /// Flits delivered while injection was still active.
    pub delivered_flits_during_injection: u64,
    pub total_hops: u64,
    pub cycles_run: u64,
    pub drained: bool,
    pub mean_latency: f64,
    /// Sustained accepted throughput: flits delivered per tile per cycle
    /// during the injection window (the drain tail does not count).
    pub accepted_throughput: f64,
}

/// Drive a network with synthetic traffic and drain it. Sources are
/// unbounded queues in front of each tile's local port, so offered load
/// beyond what the network accepts just piles up (accepted throughput is
/// what gets delivered).
pub fn run_traffic(net: &mut Network, spec: &TrafficSpec, energy: &mut EnergyLedger) -> TrafficResult {
    let ext = net.params.topology.extent;
    let tiles: Vec<u32> = tiles_in(ext, net.params.grid_x);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut sink = CountingSink::default();
    let mut sources: Vec<std::collections::VecDeque<NocMessage>> =
        tiles.iter().map(|_| Default::default()).collect();
    let size_flits = net.params.size_flits(spec.payload_words);
    let mut offered = 0u64;

    let mut cycle = 0u64;
    let mut last_progress = 0u64;
    let mut drained = true;
    let mut delivered_at_stop = 0u64;
    loop {
        let injecting = cycle < spec.inject_cycles;
        if cycle == spec.inject_cycles {
            delivered_at_stop = net.counters.delivered_flits;
        }
        if !injecting && net.in_flight_msgs() == 0 && sources.iter().all(|s| s.is_empty()) {
            break;
        }
        if injecting {
            for (si, &src) in tiles.iter().enumerate() {
                if rng.gen::<f64>() >= spec.rate {
                    continue;
                }
                offered += 1;
                let dst = pick_destination(&tiles, src, spec.pattern, &mut rng);
                let id = net.next_message_id();
                sources[si].push_back(NocMessage {
                    id,
                    size_flits,
                    src,
                    dst,
                    task: 0,
                    payload: [0; 3],
                    leg: Leg::Direct,
                    hops: 0,
                    injected_cycle: 0,
                });
            }
        }
        // One injection attempt per tile per cycle.
        for (si, &src) in tiles.iter().enumerate() {
            if let Some(front) = sources[si].front() {
                if net.try_inject(src, front.clone(), cycle) {
                    sources[si].pop_front();
                }
            }
        }
        net.step(cycle, &mut sink, energy);
        if spec.audit_every_cycle {
            assert_eq!(
                net.counters.injected_flits,
                net.audit_flits() + net.counters.delivered_flits,
                "flit conservation broken at cycle {cycle}"
            );
        }
        if sink.delivered.len() as u64 != last_progress {
            last_progress = sink.delivered.len() as u64;
        }
        cycle += 1;
        if !injecting && cycle > spec.inject_cycles + spec.drain_cycles {
            drained = false; // watchdog: the network failed to drain
            break;
        }
    }

    if cycle < spec.inject_cycles {
        // Finished draining before the injection window closed.
        delivered_at_stop = net.counters.delivered_flits;
    }
    let c = &net.counters;
    TrafficResult {
        offered_msgs: offered,
        injected_msgs: c.injected_msgs,
        injected_flits: c.injected_flits,
        delivered_msgs: c.delivered_msgs,
        delivered_flits: c.delivered_flits,
        delivered_flits_during_injection: delivered_at_stop,
        total_hops: c.total_hops,
        cycles_run: cycle,
        drained,
        mean_latency: if c.delivered_msgs > 0 {
            c.latency_cycles_sum as f64 / c.delivered_msgs as f64
        } else {
            0.0
        },
        accepted_throughput: if spec.inject_cycles > 0 && !tiles.is_empty() {
            delivered_at_stop as f64 / spec.inject_cycles as f64 / tiles.len() as f64
        } else {
            0.0
        },
    }
}

fn tiles_in(ext: Extent, grid_x: u32) -> Vec<u32> {
    let mut v = Vec::with_capacity((ext.w * ext.h) as usize);
    for y in ext.y0..ext.y0 + ext.h {
        for x in ext.x0..ext.x0 + ext.w {
            v.push(y * grid_x + x);
        }
    }
    v
}

fn pick_destination(tiles: &[u32], src: u32, pattern: Pattern, rng: &mut ChaCha8Rng) -> u32 {
    match pattern {
        Pattern::UniformRandom => loop {
            let d = tiles[rng.gen_range(0..tiles.len())];
            if d != src || tiles.len() == 1 {
                return d;
            }
        },
        Pattern::Hotspot { tile, per_mille } => {
            if rng.gen_range(0..1000) < per_mille && tile != src {
                tile
            } else {
                loop {
                    let d = tiles[rng.gen_range(0..tiles.len())];
                    if d != src || tiles.len() == 1 {
                        return d;
                    }
                }
            }
        }
    }
}

/// Convenience: cross-die-heavy pattern for hierarchical-routing studies.
/// Every message goes from a tile to the tile mirrored across the grid, so
/// most traffic spans several dies.
pub fn mirrored_pairs(net: &mut Network, msgs_per_tile: u32, payload_words: u32) -> Vec<NocMessage> {
    let ext = net.params.topology.extent;
    let tiles = tiles_in(ext, net.params.grid_x);
    let size_flits = net.params.size_flits(payload_words);
    let mut out = Vec::new();
    for &src in &tiles {
        let x = src % net.params.grid_x;
        let y = src / net.params.grid_x;
        let mx = ext.x0 + (ext.w - 1 - (x - ext.x0));
        let my = ext.y0 + (ext.h - 1 - (y - ext.y0));
        let dst = my * net.params.grid_x + mx;
        if dst == src {
            continue;
        }
        for _ in 0..msgs_per_tile {
            let id = net.next_message_id();
            out.push(NocMessage {
                id,
                size_flits,
                src,
                dst,
                task: 0,
                payload: [0; 3],
                leg: Leg::Direct,
                hops: 0,
                injected_cycle: 0,
            });
        }
    }
    out
}

/// Push a fixed message list through the network until it drains; returns
/// (delivered, total_hops, cycles).
pub fn run_fixed_load(
    net: &mut Network,
    msgs: Vec<NocMessage>,
    drain_cycles: u64,
    energy: &mut EnergyLedger,
) -> (u64, u64, u64, bool) {
    let mut sink = CountingSink::default();
    let mut pending: std::collections::VecDeque<NocMessage> = msgs.into();
    let mut cycle = 0u64;
    loop {
        // Inject as many heads as currently fit (one attempt per message).
        let mut still_pending = std::collections::VecDeque::new();
        while let Some(m) = pending.pop_front() {
            let src = m.src;
            if !net.try_inject(src, m.clone(), cycle) {
                still_pending.push_back(m);
            }
        }
        pending = still_pending;
        net.step(cycle, &mut sink, energy);
        cycle += 1;
        if pending.is_empty() && net.in_flight_msgs() == 0 {
            return (net.counters.delivered_msgs, net.counters.total_hops, cycle, true);
        }
        if cycle > drain_cycles {
            return (net.counters.delivered_msgs, net.counters.total_hops, cycle, false);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyConstants;
    use crate::noc::NocParams;
    use crate::sysconfig::Topology;

    fn net(nx: u32, ny: u32, mode: Topology) -> Network {
        let mut p = NocParams {
            grid_x: nx,
            grid_y: ny,
            grid_origin_x: 0,
            grid_origin_y: 0,
            tiles_per_die_x: nx,
            tiles_per_die_y: ny,
            width_bits: 32,
            buffer_msgs: 4,
            topology: super::super::TopologySpec {
                tile_mode: mode,
                die_mode: mode,
                extent: Extent { x0: 0, y0: 0, w: nx, h: ny },
            },
            die_threshold: 2,
            wire_ps_per_mm: 50.0,
            die_to_die_ps: 4000.0,
            cycle_ps: 1000.0,
            hop_mm_tile: 1.0,
            hop_mm_die: 4.0,
        };
        p.wire_ps_per_mm = 0.0;
        Network::new(p)
    }

    #[test]
    fn adversarial_all_to_all_drains_with_conservation() {
        let mut n = net(4, 4, Topology::Torus);
        let mut energy = EnergyLedger::new(EnergyConstants::default(), 16, false);
        let spec = TrafficSpec {
            rate: 0.9,
            inject_cycles: 10_000,
            drain_cycles: 100_000,
            audit_every_cycle: true,
            ..Default::default()
        };
        let r = run_traffic(&mut n, &spec, &mut energy);
        assert!(r.drained, "torus with bubble flow control must not deadlock");
        assert_eq!(r.injected_msgs, r.delivered_msgs);
        assert_eq!(r.injected_flits, r.delivered_flits);
        assert!(r.delivered_msgs > 1000);
    }

    #[test]
    fn hotspot_traffic_drains() {
        let mut n = net(8, 8, Topology::Torus);
        let mut energy = EnergyLedger::new(EnergyConstants::default(), 64, false);
        let spec = TrafficSpec {
            pattern: Pattern::Hotspot { tile: 27, per_mille: 300 },
            rate: 0.5,
            inject_cycles: 5_000,
            drain_cycles: 200_000,
            seed: 3,
            ..Default::default()
        };
        let r = run_traffic(&mut n, &spec, &mut energy);
        assert!(r.drained);
        assert_eq!(r.injected_msgs, r.delivered_msgs);
    }

    #[test]
    fn determinism_same_seed_same_schedule() {
        let run = || {
            let mut n = net(8, 8, Topology::Torus);
            let mut energy = EnergyLedger::new(EnergyConstants::default(), 64, false);
            let spec = TrafficSpec { rate: 0.4, inject_cycles: 3000, seed: 42, ..Default::default() };
            let r = run_traffic(&mut n, &spec, &mut energy);
            (r.injected_msgs, r.delivered_msgs, r.total_hops, r.cycles_run, energy.total_pj().to_bits())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn torus_beats_mesh_on_uniform_random_at_saturation() {
        let throughput = |mode| {
            let mut n = net(16, 16, mode);
            let mut energy = EnergyLedger::new(EnergyConstants::default(), 256, false);
            let spec = TrafficSpec {
                rate: 1.0,
                inject_cycles: 4_000,
                drain_cycles: 2_000_000,
                seed: 9,
                ..Default::default()
            };
            run_traffic(&mut n, &spec, &mut energy).accepted_throughput
        };
        let mesh = throughput(Topology::Mesh);
        let torus = throughput(Topology::Torus);
        assert!(
            torus > mesh,
            "torus accepted throughput {torus} should beat mesh {mesh}"
        );
    }
}
