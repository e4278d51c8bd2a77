//! Event-based energy accounting.
//!
//! Every simulated event (queue/SRAM traffic, cache tag lookups, DRAM line
//! transfers, NoC hops) deposits `quantity x per-bit-constant` picojoules
//! into a category ledger. Idle components are gated and deposit nothing;
//! the only time-driven term is DRAM refresh, accrued pro rata over the
//! bitline refresh period while an HBM device is powered.

use serde::{Deserialize, Serialize};
use std::fmt;

pub const PS_PER_MS: f64 = 1e9;

/// Per-event energy constants. Defaults are the wire/memory table values
/// assumed for the evaluation (7 nm SRAM, HBM2E, MCM links).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConstants {
    pub sram_read_pj_bit: f64,
    pub sram_write_pj_bit: f64,
    /// Cache tag read + compare, per lookup.
    pub tag_read_cmp_pj: f64,
    pub dram_rw_pj_bit: f64,
    /// Refresh energy per active bit per refresh period.
    pub refresh_pj_bit: f64,
    pub refresh_period_ms: f64,
    pub noc_wire_pj_bit_mm: f64,
    pub noc_router_pj_bit: f64,
    pub die_to_die_pj_bit: f64,
    pub off_package_pj_bit: f64,
    /// PU energy per operation; a calibration placeholder, tune per core.
    pub pu_op_pj: f64,
    /// (frequency Hz, (V/V0)^2 factor) points for frequency/voltage scaling.
    pub freq_scale: Vec<FreqScalePoint>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FreqScalePoint {
    pub freq: f64,
    pub factor: f64,
}

impl Default for EnergyConstants {
    fn default() -> Self {
        Self {
            sram_read_pj_bit: 0.18,
            sram_write_pj_bit: 0.28,
            tag_read_cmp_pj: 6.3,
            dram_rw_pj_bit: 3.7,
            refresh_pj_bit: 0.22,
            refresh_period_ms: 32.0,
            noc_wire_pj_bit_mm: 0.15,
            noc_router_pj_bit: 0.1,
            die_to_die_pj_bit: 0.55,
            off_package_pj_bit: 1.17,
            pu_op_pj: 1.0,
            freq_scale: vec![
                FreqScalePoint { freq: 0.25e9, factor: 0.49 },
                FreqScalePoint { freq: 1e9, factor: 1.0 },
                FreqScalePoint { freq: 2e9, factor: 1.5625 },
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleDomain {
    Pu,
    Noc,
}

#[derive(Debug)]
pub enum EnergyError {
    UnsupportedFrequency { domain: &'static str, freq: f64 },
    EmptyRun,
}

impl fmt::Display for EnergyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnergyError::UnsupportedFrequency { domain, freq } => {
                write!(f, "no frequency/voltage scale point for {freq} Hz ({domain} domain)")
            }
            EnergyError::EmptyRun => write!(f, "cannot break down an empty ledger"),
        }
    }
}

impl std::error::Error for EnergyError {}

impl EnergyConstants {
    pub fn any_negative(&self) -> bool {
        [
            self.sram_read_pj_bit,
            self.sram_write_pj_bit,
            self.tag_read_cmp_pj,
            self.dram_rw_pj_bit,
            self.refresh_pj_bit,
            self.refresh_period_ms,
            self.noc_wire_pj_bit_mm,
            self.noc_router_pj_bit,
            self.die_to_die_pj_bit,
            self.off_package_pj_bit,
            self.pu_op_pj,
        ]
        .iter()
        .any(|x| *x < 0.0)
    }

    pub fn scale_factor(&self, freq: f64) -> Option<f64> {
        self.freq_scale
            .iter()
            .find(|p| (p.freq - freq).abs() <= 1e-6 * freq.abs().max(1.0))
            .map(|p| p.factor)
    }

    /// Scale the per-bit/op energies of one clock domain for operation at
    /// frequency `freq`, using the (V/V0)^2 factor table.
    pub fn scale_for_frequency(&self, freq: f64, domain: ScaleDomain) -> Result<Self, EnergyError> {
        let factor = self.scale_factor(freq).ok_or(EnergyError::UnsupportedFrequency {
            domain: match domain {
                ScaleDomain::Pu => "pu",
                ScaleDomain::Noc => "noc",
            },
            freq,
        })?;
        let mut out = self.clone();
        match domain {
            ScaleDomain::Pu => {
                out.pu_op_pj *= factor;
            }
            ScaleDomain::Noc => {
                out.noc_wire_pj_bit_mm *= factor;
                out.noc_router_pj_bit *= factor;
                out.die_to_die_pj_bit *= factor;
                out.off_package_pj_bit *= factor;
            }
        }
        Ok(out)
    }
}

pub const NUM_CATEGORIES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Pu,
    Sram,
    CacheTag,
    Dram,
    Refresh,
    NocWire,
    NocRouter,
    DieCrossing,
    OffPackage,
}

pub const CATEGORIES: [Category; NUM_CATEGORIES] = [
    Category::Pu,
    Category::Sram,
    Category::CacheTag,
    Category::Dram,
    Category::Refresh,
    Category::NocWire,
    Category::NocRouter,
    Category::DieCrossing,
    Category::OffPackage,
];

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Pu => "pu",
            Category::Sram => "sram",
            Category::CacheTag => "cache_tag",
            Category::Dram => "dram",
            Category::Refresh => "refresh",
            Category::NocWire => "noc_wire",
            Category::NocRouter => "noc_router",
            Category::DieCrossing => "die_crossing",
            Category::OffPackage => "off_package",
        }
    }

    fn index(self) -> usize {
        CATEGORIES.iter().position(|c| *c == self).expect("category listed")
    }
}

/// Raw event record; energy is recomputed from quantities on replay so a
/// second pass must agree bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyEvent {
    SramRead { tile: u32, bits: u64 },
    SramWrite { tile: u32, bits: u64 },
    TagLookup { tile: u32 },
    Dram { tile: u32, bits: u64 },
    NocWire { tile: u32, bits: u64, mm: f64 },
    NocRouter { tile: u32, bits: u64 },
    DieCrossing { tile: u32, bits: u64 },
    OffPackage { tile: u32, bits: u64 },
    PuOps { tile: u32, ops: u64 },
    Refresh { bits: u64, span_ps: u64 },
}

/// Per-category picojoule accumulators with an optional replayable log.
#[derive(Debug, Clone)]
pub struct EnergyLedger {
    constants: EnergyConstants,
    categories_pj: [f64; NUM_CATEGORIES],
    per_tile_pj: Vec<f64>,
    log: Option<Vec<EnergyEvent>>,
}

impl EnergyLedger {
    pub fn new(constants: EnergyConstants, num_tiles: u32, record: bool) -> Self {
        Self {
            constants,
            categories_pj: [0.0; NUM_CATEGORIES],
            per_tile_pj: vec![0.0; num_tiles as usize],
            log: record.then(Vec::new),
        }
    }

    pub fn constants(&self) -> &EnergyConstants {
        &self.constants
    }

    fn event_energy(c: &EnergyConstants, ev: &EnergyEvent) -> (Category, f64) {
        match *ev {
            EnergyEvent::SramRead { bits, .. } => (Category::Sram, bits as f64 * c.sram_read_pj_bit),
            EnergyEvent::SramWrite { bits, .. } => (Category::Sram, bits as f64 * c.sram_write_pj_bit),
            EnergyEvent::TagLookup { .. } => (Category::CacheTag, c.tag_read_cmp_pj),
            EnergyEvent::Dram { bits, .. } => (Category::Dram, bits as f64 * c.dram_rw_pj_bit),
            EnergyEvent::NocWire { bits, mm, .. } => (Category::NocWire, bits as f64 * c.noc_wire_pj_bit_mm * mm),
            EnergyEvent::NocRouter { bits, .. } => (Category::NocRouter, bits as f64 * c.noc_router_pj_bit),
            EnergyEvent::DieCrossing { bits, .. } => (Category::DieCrossing, bits as f64 * c.die_to_die_pj_bit),
            EnergyEvent::OffPackage { bits, .. } => (Category::OffPackage, bits as f64 * c.off_package_pj_bit),
            EnergyEvent::PuOps { ops, .. } => (Category::Pu, ops as f64 * c.pu_op_pj),
            EnergyEvent::Refresh { bits, span_ps } => {
                let periods = span_ps as f64 / (c.refresh_period_ms * PS_PER_MS);
                (Category::Refresh, bits as f64 * c.refresh_pj_bit * periods)
            }
        }
    }

    pub fn record(&mut self, ev: EnergyEvent) {
        let (cat, pj) = Self::event_energy(&self.constants, &ev);
        self.categories_pj[cat.index()] += pj;
        let tile = match ev {
            EnergyEvent::SramRead { tile, .. }
            | EnergyEvent::SramWrite { tile, .. }
            | EnergyEvent::TagLookup { tile }
            | EnergyEvent::Dram { tile, .. }
            | EnergyEvent::NocWire { tile, .. }
            | EnergyEvent::NocRouter { tile, .. }
            | EnergyEvent::DieCrossing { tile, .. }
            | EnergyEvent::OffPackage { tile, .. }
            | EnergyEvent::PuOps { tile, .. } => Some(tile),
            EnergyEvent::Refresh { .. } => None,
        };
        if let Some(t) = tile {
            if let Some(slot) = self.per_tile_pj.get_mut(t as usize) {
                *slot += pj;
            }
        }
        if let Some(log) = &mut self.log {
            log.push(ev);
        }
    }

    /// Refresh accrued over a wall-time span for the active bits of powered
    /// DRAM devices. Gated components contribute nothing by construction.
    pub fn accrue_idle(&mut self, span_ps: u64, powered_dram_bits: u64) {
        if span_ps == 0 || powered_dram_bits == 0 {
            return;
        }
        self.record(EnergyEvent::Refresh { bits: powered_dram_bits, span_ps });
    }

    pub fn category_pj(&self, cat: Category) -> f64 {
        self.categories_pj[cat.index()]
    }

    pub fn total_pj(&self) -> f64 {
        self.categories_pj.iter().sum()
    }

    pub fn total_joules(&self) -> f64 {
        self.total_pj() * 1e-12
    }

    pub fn per_tile_pj(&self) -> &[f64] {
        &self.per_tile_pj
    }

    pub fn events(&self) -> Option<&[EnergyEvent]> {
        self.log.as_deref()
    }

    /// Percentage share per category; defined only for non-empty ledgers.
    pub fn breakdown(&self) -> Result<Vec<(Category, f64)>, EnergyError> {
        let total = self.total_pj();
        if total <= 0.0 {
            return Err(EnergyError::EmptyRun);
        }
        Ok(CATEGORIES
            .iter()
            .map(|c| (*c, 100.0 * self.categories_pj[c.index()] / total))
            .collect())
    }

    /// Recompute a ledger from a recorded event log; used to cross-check
    /// conservation (must match the live ledger bit-exactly).
    pub fn replay(constants: &EnergyConstants, events: &[EnergyEvent], num_tiles: u32) -> Self {
        let mut fresh = Self::new(constants.clone(), num_tiles, false);
        for ev in events {
            fresh.record(*ev);
        }
        fresh
    }

    /// Associative, commutative merge for sweep aggregation.
    pub fn merge(&mut self, other: &EnergyLedger) {
        for i in 0..NUM_CATEGORIES {
            self.categories_pj[i] += other.categories_pj[i];
        }
        for (a, b) in self.per_tile_pj.iter_mut().zip(&other.per_tile_pj) {
            *a += b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger() -> EnergyLedger {
        EnergyLedger::new(EnergyConstants::default(), 4, true)
    }

    #[test]
    fn table_constant_examples() {
        let mut l = ledger();
        l.record(EnergyEvent::NocRouter { tile: 0, bits: 64 });
        assert!((l.category_pj(Category::NocRouter) - 6.4).abs() < 1e-12);

        l.record(EnergyEvent::NocWire { tile: 0, bits: 64, mm: 2.0 });
        assert!((l.category_pj(Category::NocWire) - 19.2).abs() < 1e-12);

        l.record(EnergyEvent::Dram { tile: 1, bits: 512 });
        assert!((l.category_pj(Category::Dram) - 1894.4).abs() < 1e-12);
    }

    #[test]
    fn refresh_full_window_hand_value() {
        // 8 GiB powered over one full 32 ms window: ~15.1 mJ.
        let mut l = ledger();
        let bits = 8u64 * (1 << 30) * 8;
        l.accrue_idle((32.0 * PS_PER_MS) as u64, bits);
        let mj = l.category_pj(Category::Refresh) / 1e9;
        assert!((mj - 15.11828488192).abs() / 15.11828488192 < 1e-6, "got {mj} mJ");
    }

    #[test]
    fn idle_gated_components_add_nothing() {
        let mut l = ledger();
        l.accrue_idle(1_000_000, 0); // no powered DRAM
        assert_eq!(l.total_pj(), 0.0);
    }

    #[test]
    fn per_bit_linearity() {
        let mut a = ledger();
        let mut b = ledger();
        a.record(EnergyEvent::NocWire { tile: 0, bits: 128, mm: 1.5 });
        a.record(EnergyEvent::NocRouter { tile: 0, bits: 128 });
        b.record(EnergyEvent::NocWire { tile: 0, bits: 256, mm: 1.5 });
        b.record(EnergyEvent::NocRouter { tile: 0, bits: 256 });
        assert!((2.0 * a.total_pj() - b.total_pj()).abs() < 1e-12);
    }

    #[test]
    fn breakdown_sums_to_hundred() {
        let mut l = ledger();
        l.record(EnergyEvent::SramRead { tile: 0, bits: 32 });
        l.record(EnergyEvent::Dram { tile: 0, bits: 512 });
        l.record(EnergyEvent::PuOps { tile: 0, ops: 10 });
        let b = l.breakdown().unwrap();
        let sum: f64 = b.iter().map(|(_, p)| p).sum();
        assert!((sum - 100.0).abs() < 1e-9);
        // percentages x total re-sum to per-category picojoules
        for (cat, pct) in b {
            assert!((pct / 100.0 * l.total_pj() - l.category_pj(cat)).abs() < 1e-9);
        }
    }

    #[test]
    fn single_category_run_is_hundred_percent() {
        let mut l = ledger();
        l.record(EnergyEvent::PuOps { tile: 0, ops: 3 });
        let b = l.breakdown().unwrap();
        assert_eq!(b.iter().find(|(c, _)| *c == Category::Pu).unwrap().1, 100.0);
    }

    #[test]
    fn empty_breakdown_is_an_error() {
        assert!(ledger().breakdown().is_err());
    }

    #[test]
    fn replay_matches_bit_exactly() {
        let mut l = ledger();
        l.record(EnergyEvent::SramWrite { tile: 2, bits: 32 });
        l.record(EnergyEvent::NocWire { tile: 1, bits: 64, mm: 0.9759 });
        l.record(EnergyEvent::TagLookup { tile: 2 });
        l.accrue_idle(123_456_789, 1 << 20);
        let replayed = EnergyLedger::replay(l.constants(), l.events().unwrap(), 4);
        for c in CATEGORIES {
            assert_eq!(l.category_pj(c).to_bits(), replayed.category_pj(c).to_bits());
        }
    }

    #[test]
    fn frequency_scaling() {
        let c = EnergyConstants::default();
        let same = c.scale_for_frequency(1e9, ScaleDomain::Noc).unwrap();
        assert_eq!(same.noc_router_pj_bit, c.noc_router_pj_bit);

        let fast = c.scale_for_frequency(2e9, ScaleDomain::Noc).unwrap();
        assert!((fast.noc_router_pj_bit / c.noc_router_pj_bit - 1.5625).abs() < 1e-12);
        assert_eq!(fast.pu_op_pj, c.pu_op_pj); // other domain untouched

        let fast_pu = c.scale_for_frequency(2e9, ScaleDomain::Pu).unwrap();
        assert!((fast_pu.pu_op_pj / c.pu_op_pj - 1.5625).abs() < 1e-12);

        assert!(c.scale_for_frequency(3e9, ScaleDomain::Pu).is_err());
    }
}
