//! Per-tile SRAM as scratchpad and/or direct-mapped cache backed by a
//! private DRAM vault slice, with scheduler-driven and next-line prefetch.
//!
//! The cache models metadata and timing (tags, valid/dirty bits, line fills,
//! evictions, channel queueing); array values live in the workload state and
//! are not duplicated per line. Each die's DRAM is served by a fixed number
//! of channels; tiles stripe onto channels by index.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::fmt;

use crate::dataset::{ArrayId, PgasLayout};
use crate::energy::{EnergyEvent, EnergyLedger};
use crate::sysconfig::ValidatedSystem;
use crate::workloads::TaskProgram;

/// Cache line width: equals the memory controller bitline width.
pub const LINE_BYTES: u64 = 64;
pub const LINE_BITS: u64 = LINE_BYTES * 8;
/// Per-line metadata (tag + valid + dirty) kept in SRAM.
pub const LINE_META_BYTES: u64 = 8;

/// DRAM device timing; fixed access latency plus per-channel bandwidth.
#[derive(Debug, Clone, Copy)]
pub struct MemTimings {
    pub dram_latency_ps: u64,
    pub channel_bytes_per_s: f64,
}

impl Default for MemTimings {
    fn default() -> Self {
        Self { dram_latency_ps: 50_000, channel_bytes_per_s: 64e9 }
    }
}

impl MemTimings {
    /// Time one 512-bit transfer occupies a channel.
    pub fn service_ps(&self) -> u64 {
        (LINE_BYTES as f64 / self.channel_bytes_per_s * 1e12).round() as u64
    }
}

/// FIFO service model for every DRAM channel on the node.
#[derive(Debug, Clone)]
pub struct MemChannels {
    next_free_ps: Vec<u64>,
    channels_per_die: u32,
    pub timings: MemTimings,
}

impl MemChannels {
    pub fn new(num_dies: u32, channels_per_die: u32, timings: MemTimings) -> Self {
        Self {
            next_free_ps: vec![0; (num_dies * channels_per_die) as usize],
            channels_per_die,
            timings,
        }
    }

    /// Book one line transfer; returns its completion time.
    pub fn book(&mut self, die: u32, channel: u32, now_ps: u64) -> u64 {
        let idx = (die * self.channels_per_die + channel) as usize;
        let slot = self.next_free_ps[idx].max(now_ps);
        self.next_free_ps[idx] = slot + self.timings.service_ps();
        slot + self.timings.dram_latency_ps
    }
}

/// SRAM read/write latency in PU cycles: ~0.82 ns at up to 512 KiB, one
/// extra nanosecond per four-fold capacity increase beyond that.
pub fn sram_latency_cycles(sram_bytes: u64, pu_freq_hz: f64) -> u64 {
    let mut extra_ns = 0.0;
    let mut size = 512 * 1024u64;
    while sram_bytes > size {
        extra_ns += 1.0;
        size *= 4;
    }
    (((0.82 + extra_ns) * pu_freq_hz / 1e9).ceil() as u64).max(1)
}

/// Reported effective bandwidth blend.
pub fn effective_bandwidth(hit_rate: f64, sram_bw: f64, dram_bw: f64) -> f64 {
    assert!((0.0..=1.0).contains(&hit_rate));
    sram_bw * hit_rate + dram_bw * (1.0 - hit_rate)
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub array: ArrayId,
    pub elem_bytes: u32,
    pub first_idx: u64,
    pub count: u64,
    pub cached: bool,
    pub base_addr: u64,
}

/// The tile's SRAM budget split into scratchpad segments, one optional
/// cache region, and the program/queue reservation.
#[derive(Debug, Clone)]
pub struct SramPlan {
    pub total_bytes: u64,
    pub reserved_bytes: u64,
    pub segments: Vec<Segment>,
    pub cache_lines: u64,
    pub scratchpad_bytes: u64,
}

#[derive(Debug)]
pub enum MemError {
    NotMapped { array: ArrayId },
    OutOfRange { array: ArrayId, index: u64, first: u64, count: u64 },
    SramOverflow { tile: u32, needed: u64, available: u64 },
    VaultOverflow { tile: u32, needed: u64, capacity: u64 },
}

impl fmt::Display for MemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemError::NotMapped { array } => write!(f, "array {array:?} not mapped on this tile"),
            MemError::OutOfRange { array, index, first, count } => write!(
                f,
                "access {array:?}[{index}] outside tile extent [{first}, {})",
                first + count
            ),
            MemError::SramOverflow { tile, needed, available } => write!(
                f,
                "tile {tile}: SRAM plan needs {needed} B of {available} B"
            ),
            MemError::VaultOverflow { tile, needed, capacity } => write!(
                f,
                "tile {tile}: cached segments need {needed} B of the {capacity} B vault slice"
            ),
        }
    }
}

impl std::error::Error for MemError {}

impl SramPlan {
    /// Lay out the arrays a program touches on one tile. Arrays named in
    /// `cached_arrays` go behind the data cache; the rest map directly to
    /// scratchpad.
    pub fn build(
        sys: &ValidatedSystem,
        program: &TaskProgram,
        layout: &PgasLayout,
        tile: u32,
    ) -> Result<SramPlan, MemError> {
        let c = &sys.cfg.compile;
        let cached: BTreeSet<ArrayId> = c
            .cached_arrays
            .iter()
            .filter_map(|n| ArrayId::from_config_name(n))
            .collect();
        let mut segments = Vec::new();
        let mut base = 0u64;
        let mut scratch = 0u64;
        for (array, elem_bytes) in program_arrays(program) {
            let (lo, hi) = layout.extent_of(array, tile);
            let count = hi - lo;
            let is_cached = cached.contains(&array) && sys.cfg.packaging.hbm_per_die > 0;
            let bytes = count * elem_bytes as u64;
            segments.push(Segment {
                array,
                elem_bytes,
                first_idx: lo,
                count,
                cached: is_cached,
                base_addr: base,
            });
            base += bytes.next_multiple_of(LINE_BYTES);
            if !is_cached {
                scratch += bytes;
            }
        }
        let cache_lines = if segments.iter().any(|s| s.cached) { c.cache_lines } else { 0 };
        let plan = SramPlan {
            total_bytes: sys.cfg.tapeout.sram_per_tile,
            reserved_bytes: c.sram_reserved,
            segments,
            cache_lines,
            scratchpad_bytes: scratch,
        };
        let needed = plan.sram_needed();
        if needed > plan.total_bytes {
            return Err(MemError::SramOverflow { tile, needed, available: plan.total_bytes });
        }
        let vault_needed: u64 = plan
            .segments
            .iter()
            .filter(|s| s.cached)
            .map(|s| s.count * s.elem_bytes as u64)
            .sum();
        let vault = sys.vault_capacity();
        if vault_needed > 0 && vault_needed > vault {
            return Err(MemError::VaultOverflow { tile, needed: vault_needed, capacity: vault });
        }
        Ok(plan)
    }

    pub fn sram_needed(&self) -> u64 {
        self.reserved_bytes
            + self.scratchpad_bytes
            + self.cache_lines * (LINE_BYTES + LINE_META_BYTES)
    }

    fn segment(&self, array: ArrayId) -> Result<&Segment, MemError> {
        self.segments
            .iter()
            .find(|s| s.array == array)
            .ok_or(MemError::NotMapped { array })
    }

    /// Local byte address of an element; errors outside the owned extent.
    pub fn addr_of(&self, array: ArrayId, index: u64) -> Result<(u64, &Segment), MemError> {
        let seg = self.segment(array)?;
        if index < seg.first_idx || index >= seg.first_idx + seg.count {
            return Err(MemError::OutOfRange {
                array,
                index,
                first: seg.first_idx,
                count: seg.count,
            });
        }
        Ok((seg.base_addr + (index - seg.first_idx) * seg.elem_bytes as u64, seg))
    }
}

/// Arrays a program touches, with their element widths.
pub fn program_arrays(program: &TaskProgram) -> Vec<(ArrayId, u32)> {
    let mut out = Vec::new();
    let routes_row_ptr = program.tasks.iter().any(|t| t.routing_array == ArrayId::RowPtr);
    if routes_row_ptr {
        out.push((ArrayId::RowPtr, 8));
    }
    out.push((ArrayId::ColIdx, 4));
    if program.app.weighted() {
        out.push((ArrayId::EdgeVal, 4));
    }
    if program.vertex_a_bytes > 0 {
        out.push((ArrayId::VertexA, program.vertex_a_bytes));
    }
    if program.vertex_b_bytes > 0 {
        out.push((ArrayId::VertexB, program.vertex_b_bytes));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AccessResult {
    /// Extra cycles the PU pipeline blocks beyond the nominal SRAM latency.
    pub stall_ps: u64,
    /// Nominal latency of this access (SRAM latency, or the DRAM round trip
    /// on a miss), for inspection in tests.
    pub latency_ps: u64,
    pub hit: Option<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct MemCounters {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub writebacks: u64,
    pub prefetch_issued: u64,
    pub prefetch_useful: u64,
    pub scratchpad_accesses: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct LineMeta {
    tag: u64,
    valid: bool,
    dirty: bool,
    /// Filled by a prefetch and not yet demanded.
    prefetched: bool,
}

/// One tile's memory-side state: scratchpad timing plus the direct-mapped
/// cache over the vault-backed segments.
#[derive(Debug, Clone)]
pub struct TileMemory {
    pub plan: SramPlan,
    lines: Vec<LineMeta>,
    /// line address -> fill completion time (MSHR-style coalescing).
    in_flight: HashMap<u64, u64>,
    /// Dirty lines whose vault copy is stale; must be empty after a flush.
    stale_in_vault: BTreeSet<u64>,
    pub counters: MemCounters,
    sram_latency_ps: u64,
    die: u32,
    channel: u32,
    tile: u32,
    /// Recorded (line-granular address, is_write) demand trace.
    pub trace: Option<Vec<(u64, bool)>>,
}

impl TileMemory {
    pub fn new(plan: SramPlan, sys: &ValidatedSystem, tile: u32) -> Self {
        let coords = sys.tile_coords(tile).expect("tile in grid");
        let t = &sys.cfg.tapeout;
        let die = coords.die_y * (sys.cfg.packaging.dies_x * sys.cfg.packaging.packages_x)
            + coords.die_x;
        let in_die_x = (sys.cfg.compile.grid_origin_x + coords.x) % t.tiles_per_die_x;
        let in_die_y = (sys.cfg.compile.grid_origin_y + coords.y) % t.tiles_per_die_y;
        let tile_in_die = in_die_y * t.tiles_per_die_x + in_die_x;
        let pu_freq = sys.cfg.compile.pu_freq_used;
        let lat_cycles = sram_latency_cycles(t.sram_per_tile, pu_freq);
        let lines = plan.cache_lines as usize;
        Self {
            plan,
            lines: vec![LineMeta::default(); lines],
            in_flight: HashMap::new(),
            stale_in_vault: BTreeSet::new(),
            counters: MemCounters::default(),
            sram_latency_ps: lat_cycles * (1e12 / pu_freq) as u64,
            die,
            channel: tile_in_die % t.mem_channels_per_die,
            tile,
            trace: sys.cfg.sim.record_events.then(Vec::new),
        }
    }

    pub fn sram_latency_ps(&self) -> u64 {
        self.sram_latency_ps
    }

    pub fn die_index(&self) -> u32 {
        self.die
    }

    fn line_slot(&self, line_addr: u64) -> (usize, u64) {
        let idx = (line_addr % self.plan.cache_lines) as usize;
        let tag = line_addr / self.plan.cache_lines;
        (idx, tag)
    }

    /// Install a fetched line, evicting the previous occupant.
    fn install(&mut self, line_addr: u64, prefetched: bool, energy: &mut EnergyLedger) {
        let (idx, tag) = self.line_slot(line_addr);
        let old = self.lines[idx];
        if old.valid {
            self.counters.evictions += 1;
            if old.dirty {
                self.writeback(idx, energy);
            }
        }
        self.lines[idx] = LineMeta { tag, valid: true, dirty: false, prefetched };
        // Line fill into SRAM.
        energy.record(EnergyEvent::SramWrite { tile: self.tile, bits: LINE_BITS });
    }

    fn writeback(&mut self, idx: usize, energy: &mut EnergyLedger) {
        self.counters.writebacks += 1;
        let line_addr = self.lines[idx].tag * self.plan.cache_lines + idx as u64;
        self.stale_in_vault.remove(&line_addr);
        energy.record(EnergyEvent::SramRead { tile: self.tile, bits: LINE_BITS });
        energy.record(EnergyEvent::Dram { tile: self.tile, bits: LINE_BITS });
        self.lines[idx].dirty = false;
    }

    /// One element access at virtual time `now_ps`. Scratchpad segments pay
    /// SRAM latency only; cached segments do a direct-mapped lookup with
    /// write-allocate misses that block until the line fill completes.
    pub fn access(
        &mut self,
        array: ArrayId,
        index: u64,
        kind: AccessKind,
        now_ps: u64,
        channels: &mut MemChannels,
        energy: &mut EnergyLedger,
    ) -> Result<AccessResult, MemError> {
        let (addr, seg) = self.plan.addr_of(array, index)?;
        let elem_bits = seg.elem_bytes as u64 * 8;
        if !seg.cached {
            self.counters.scratchpad_accesses += 1;
            match kind {
                AccessKind::Read => energy.record(EnergyEvent::SramRead { tile: self.tile, bits: elem_bits }),
                AccessKind::Write => energy.record(EnergyEvent::SramWrite { tile: self.tile, bits: elem_bits }),
            }
            return Ok(AccessResult { stall_ps: 0, latency_ps: self.sram_latency_ps, hit: None });
        }

        let line_addr = addr / LINE_BYTES;
        if let Some(t) = &mut self.trace {
            t.push((line_addr, kind == AccessKind::Write));
        }
        energy.record(EnergyEvent::TagLookup { tile: self.tile });
        let (idx, tag) = self.line_slot(line_addr);
        let present = self.lines[idx].valid && self.lines[idx].tag == tag;

        let (stall_ps, hit) = if present {
            (0, true)
        } else if let Some(&done) = self.in_flight.get(&line_addr) {
            if done <= now_ps {
                // Arrived but not yet installed: counts as a prefetch hit.
                self.in_flight.remove(&line_addr);
                self.install(line_addr, true, energy);
                (0, true)
            } else {
                // Wait out the in-flight fill.
                self.in_flight.remove(&line_addr);
                self.install(line_addr, false, energy);
                (done - now_ps, false)
            }
        } else {
            // Demand miss: full DRAM round trip through the tile's channel.
            let done = channels.book(self.die, self.channel, now_ps);
            energy.record(EnergyEvent::Dram { tile: self.tile, bits: LINE_BITS });
            self.install(line_addr, false, energy);
            (done - now_ps, false)
        };

        let (idx, _) = self.line_slot(line_addr);
        if hit {
            self.counters.hits += 1;
            if self.lines[idx].prefetched {
                self.counters.prefetch_useful += 1;
            }
        } else {
            self.counters.misses += 1;
        }
        self.lines[idx].prefetched = false;
        match kind {
            AccessKind::Read => energy.record(EnergyEvent::SramRead { tile: self.tile, bits: elem_bits }),
            AccessKind::Write => {
                energy.record(EnergyEvent::SramWrite { tile: self.tile, bits: elem_bits });
                self.lines[idx].dirty = true;
                self.stale_in_vault.insert(line_addr);
            }
        }
        Ok(AccessResult {
            stall_ps,
            latency_ps: self.sram_latency_ps + stall_ps,
            hit: Some(hit),
        })
    }

    /// Non-blocking line fetch for `array[index]`; duplicates coalesce.
    /// Scratchpad segments never prefetch.
    pub fn prefetch(
        &mut self,
        array: ArrayId,
        index: u64,
        now_ps: u64,
        channels: &mut MemChannels,
        energy: &mut EnergyLedger,
    ) {
        let Ok((addr, seg)) = self.plan.addr_of(array, index) else { return };
        if !seg.cached {
            return;
        }
        let line_addr = addr / LINE_BYTES;
        let (idx, tag) = self.line_slot(line_addr);
        if (self.lines[idx].valid && self.lines[idx].tag == tag)
            || self.in_flight.contains_key(&line_addr)
        {
            return;
        }
        let done = channels.book(self.die, self.channel, now_ps);
        energy.record(EnergyEvent::Dram { tile: self.tile, bits: LINE_BITS });
        self.in_flight.insert(line_addr, done);
        self.counters.prefetch_issued += 1;
    }

    /// Write every dirty line back to the vault; after this the DRAM copy
    /// equals the logical arrays.
    pub fn flush_dirty(&mut self, energy: &mut EnergyLedger) {
        for idx in 0..self.lines.len() {
            if self.lines[idx].valid && self.lines[idx].dirty {
                self.writeback(idx, energy);
            }
        }
    }

    /// Lines whose vault copy is stale; empty iff writeback metadata is
    /// complete.
    pub fn stale_vault_lines(&self) -> usize {
        self.stale_in_vault.len()
    }

    pub fn has_cache(&self) -> bool {
        self.plan.cache_lines > 0
    }
}
