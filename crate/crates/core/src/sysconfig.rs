//! Configuration knobs (tapeout / packaging / compile tiers), validation, and
//! derived die geometry.
//!
//! Everything downstream of this module takes a [`ValidatedSystem`]; raw
//! configs never escape unvalidated.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use crate::cost::CostConstants;
use crate::energy::EnergyConstants;

pub const KIB: u64 = 1024;
pub const MIB: u64 = 1024 * KIB;
pub const GIB: u64 = 1024 * MIB;
pub const GHZ: f64 = 1e9;
pub const MHZ: f64 = 1e6;

/// SRAM density used for area derivation, in bytes per mm².
pub const SRAM_BYTES_PER_MM2: f64 = 3.5 * MIB as f64;

/// Names of the dataset arrays a compile config may place in the cache.
pub const ARRAY_NAMES: [&str; 5] = ["row_ptr", "col_idx", "values", "vertex", "output"];

/// Silicon-time knobs: fixed once the die is taped out.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TapeoutConfig {
    pub tiles_per_die_x: u32,
    pub tiles_per_die_y: u32,
    pub pus_per_tile: u32,
    /// SRAM capacity per tile in bytes.
    pub sram_per_tile: u64,
    /// NoC link width in bits; one flit per link per cycle.
    pub noc_width: u32,
    /// Operating and maximum PU frequency in Hz.
    pub pu_freq: f64,
    pub pu_freq_max: f64,
    /// Operating and maximum NoC frequency in Hz.
    pub noc_freq: f64,
    pub noc_freq_max: f64,
    pub mem_channels_per_die: u32,
    /// Router input-buffer depth in messages, per port.
    pub router_buffer_msgs: u32,
    /// Fraction of tile area occupied by SRAM; the rest is PU, scheduler,
    /// router, and PHY.
    pub sram_area_fraction: f64,
}

impl Default for TapeoutConfig {
    fn default() -> Self {
        Self {
            tiles_per_die_x: 8,
            tiles_per_die_y: 8,
            pus_per_tile: 1,
            sram_per_tile: 512 * KIB,
            noc_width: 64,
            pu_freq: GHZ,
            pu_freq_max: 2.0 * GHZ,
            noc_freq: GHZ,
            noc_freq_max: 2.0 * GHZ,
            mem_channels_per_die: 8,
            router_buffer_msgs: 4,
            sram_area_fraction: 0.6,
        }
    }
}

/// Package-integration knobs: chosen when dies are bonded into a product.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PackagingConfig {
    pub dies_x: u32,
    pub dies_y: u32,
    /// DRAM capacity attached to each compute die in bytes; 0 = no DRAM.
    pub hbm_per_die: u64,
    /// Off-package bandwidth in bytes/s; used for dataset-load time.
    pub io_bandwidth: f64,
    pub packages_x: u32,
    pub packages_y: u32,
}

impl Default for PackagingConfig {
    fn default() -> Self {
        Self {
            dies_x: 2,
            dies_y: 2,
            hbm_per_die: 8 * GIB,
            io_bandwidth: 64e9,
            packages_x: 1,
            packages_y: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    Mesh,
    Torus,
}

/// Software-time knobs: set per run without touching silicon.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileConfig {
    /// Tiles used by the run; must fit inside the node.
    pub grid_x: u32,
    pub grid_y: u32,
    /// Placement of the grid inside the node, in tiles.
    pub grid_origin_x: u32,
    pub grid_origin_y: u32,
    /// Input-queue depth per task type, in messages.
    pub iq_capacity: u32,
    /// Output-queue depth per task type, in messages.
    pub oq_capacity: u32,
    /// Depth of the vertex-update output queue as a multiple of
    /// `oq_capacity`; the invocation ratio between the streaming task and the
    /// update task roughly equals the mean degree, so ratios above 1 payoff
    /// on dense graphs.
    pub oq_update_ratio: u32,
    /// Arrays backed by the data cache; everything else maps to scratchpad.
    pub cached_arrays: Vec<String>,
    /// Data-cache size in 512-bit lines.
    pub cache_lines: u64,
    pub topology_tile_noc: Topology,
    pub topology_die_noc: Topology,
    /// Minimum die-hop distance at which traffic takes the die-level NoC.
    pub die_noc_threshold: u32,
    pub pu_freq_used: f64,
    pub noc_freq_used: f64,
    /// SRAM bytes reserved per tile for program text and queue storage.
    pub sram_reserved: u64,
    /// Lines fetched ahead of a streaming access pattern.
    pub stream_prefetch_depth: u32,
    /// Enable scheduler-driven and streaming prefetch.
    pub prefetch: bool,
}

impl Default for CompileConfig {
    fn default() -> Self {
        Self {
            grid_x: 16,
            grid_y: 16,
            grid_origin_x: 0,
            grid_origin_y: 0,
            iq_capacity: 64,
            oq_capacity: 12,
            oq_update_ratio: 1,
            cached_arrays: Vec::new(),
            cache_lines: 1024,
            topology_tile_noc: Topology::Torus,
            topology_die_noc: Topology::Torus,
            die_noc_threshold: 2,
            pu_freq_used: GHZ,
            noc_freq_used: GHZ,
            sram_reserved: 16 * KIB,
            stream_prefetch_depth: 2,
            prefetch: true,
        }
    }
}

/// Dataset element widths (bytes) used for footprint accounting, plus the
/// Kronecker quadrant probabilities for graph generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetParams {
    pub offset_width: u32,
    pub index_width: u32,
    pub value_width: u32,
    pub output_width: u32,
    pub rmat_a: f64,
    pub rmat_b: f64,
    pub rmat_c: f64,
    /// Edge-array ownership rule: "even" (equal index blocks) or "by_row"
    /// (edges follow their source row's owner).
    pub edge_ownership: String,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            offset_width: 8,
            index_width: 4,
            value_width: 4,
            output_width: 4,
            rmat_a: 0.57,
            rmat_b: 0.19,
            rmat_c: 0.19,
            edge_ownership: "even".to_string(),
        }
    }
}

/// Run-harness knobs that are neither silicon nor workload.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Cycle cap before a run is reported as livelocked.
    pub watchdog_cycles: u64,
    /// Cycles without a cache miss after which a die's DRAM device powers
    /// off for good.
    pub hbm_powerdown_window: u64,
    /// A PU whose spawned messages are stuck on a full output queue retries
    /// the writes and only issues a new task every this many cycles.
    pub stall_shadow_period: u64,
    /// Emit one progress line to stderr every this many NoC cycles (0 = off).
    pub progress_every: u64,
    /// Record per-hop trace records (message id, tile, cycle).
    pub trace: bool,
    /// Record the memory access trace and energy event log for replay.
    pub record_events: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            watchdog_cycles: 1_000_000_000,
            hbm_powerdown_window: 100_000,
            stall_shadow_period: 4,
            progress_every: 0,
            trace: false,
            record_events: false,
        }
    }
}

/// The whole configuration file: three knob tiers plus model constants.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub tapeout: TapeoutConfig,
    pub packaging: PackagingConfig,
    pub compile: CompileConfig,
    pub dataset: DatasetParams,
    pub energy: EnergyConstants,
    pub cost: CostConstants,
    pub sim: SimParams,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintViolation {
    pub knob: String,
    pub rule: String,
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.knob, self.rule)
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse(String),
    Invalid(Vec<ConstraintViolation>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "config io error: {e}"),
            ConfigError::Parse(e) => write!(f, "config parse error: {e}"),
            ConfigError::Invalid(v) => {
                writeln!(f, "config violates {} constraint(s):", v.len())?;
                for c in v {
                    writeln!(f, "  {c}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

impl SystemConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        Self::from_toml(&text)
    }

    /// Apply `--set path.to.knob=value` overrides on top of this config.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut value =
            toml::Value::try_from(self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for (path, raw) in overrides {
            set_dotted(&mut value, path, raw)?;
        }
        value
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }
}

/// Insert `raw` (parsed as a TOML value) at a dotted path like
/// `compile.grid_x`.
fn set_dotted(root: &mut toml::Value, path: &str, raw: &str) -> Result<(), ConfigError> {
    let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .or_else(|_| toml::from_str::<toml::Table>(&format!("v = \"{raw}\"")))
        .map_err(|e| ConfigError::Parse(format!("override value {raw:?}: {e}")))?
        .remove("v")
        .expect("key v just inserted");

    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Parse(format!("bad override path {path:?}")));
    }
    for part in &parts[..parts.len() - 1] {
        node = node
            .as_table_mut()
            .ok_or_else(|| ConfigError::Parse(format!("{path}: not a table at {part}")))?
            .entry(part.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| ConfigError::Parse(format!("{path}: parent is not a table")))?;
    table.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

/// Physical dimensions derived from the tapeout knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub tile_pitch_mm: f64,
    pub die_width_mm: f64,
    pub die_height_mm: f64,
    pub die_area_mm2: f64,
    /// Folded-torus links skip one tile, so a hop covers two pitches.
    pub hop_length_tile_noc_mm: f64,
    /// Die-level hop: one die pitch.
    pub hop_length_die_noc_mm: f64,
    /// Grid-local ids of the tiles sitting on a die border (radix-9 routers).
    pub edge_router_tiles: BTreeSet<u32>,
}

/// A sealed, constraint-checked system description. All downstream modules
/// accept only this.
#[derive(Debug, Clone)]
pub struct ValidatedSystem {
    pub cfg: SystemConfig,
    pub geometry: Geometry,
}

impl ValidatedSystem {
    /// Check every knob constraint; either seal the config or report all
    /// violations at once.
    pub fn validate(cfg: SystemConfig) -> Result<ValidatedSystem, Vec<ConstraintViolation>> {
        let mut v: Vec<ConstraintViolation> = Vec::new();
        let mut fail = |knob: &str, rule: String| {
            v.push(ConstraintViolation {
                knob: knob.to_string(),
                rule,
            })
        };

        let t = &cfg.tapeout;
        if !t.tiles_per_die_x.is_power_of_two() || t.tiles_per_die_x < 1 {
            fail("tapeout.tiles_per_die_x", format!("must be a power of two >= 1, got {}", t.tiles_per_die_x));
        }
        if !t.tiles_per_die_y.is_power_of_two() || t.tiles_per_die_y < 1 {
            fail("tapeout.tiles_per_die_y", format!("must be a power of two >= 1, got {}", t.tiles_per_die_y));
        }
        if t.pus_per_tile == 0 {
            fail("tapeout.pus_per_tile", "must be >= 1".into());
        }
        if t.sram_per_tile == 0 {
            fail("tapeout.sram_per_tile", "must be > 0".into());
        }
        if ![32, 64, 128].contains(&t.noc_width) {
            fail("tapeout.noc_width", format!("must be one of 32, 64, 128, got {}", t.noc_width));
        }
        if t.pu_freq > t.pu_freq_max {
            fail("tapeout.pu_freq", format!("operating {} Hz exceeds max {} Hz", t.pu_freq, t.pu_freq_max));
        }
        if t.noc_freq > t.noc_freq_max {
            fail("tapeout.noc_freq", format!("operating {} Hz exceeds max {} Hz", t.noc_freq, t.noc_freq_max));
        }
        if t.pu_freq <= 0.0 || t.noc_freq <= 0.0 {
            fail("tapeout.pu_freq", "frequencies must be positive".into());
        }
        if t.mem_channels_per_die == 0 {
            fail("tapeout.mem_channels_per_die", "must be >= 1".into());
        }
        if t.router_buffer_msgs < 2 {
            fail("tapeout.router_buffer_msgs", "bubble flow control needs >= 2 message slots".into());
        }
        if !(t.sram_area_fraction > 0.0 && t.sram_area_fraction <= 1.0) {
            fail("tapeout.sram_area_fraction", "must be in (0, 1]".into());
        }

        let p = &cfg.packaging;
        for (name, val) in [
            ("packaging.dies_x", p.dies_x),
            ("packaging.dies_y", p.dies_y),
            ("packaging.packages_x", p.packages_x),
            ("packaging.packages_y", p.packages_y),
        ] {
            if val == 0 {
                fail(name, "must be >= 1".into());
            }
        }
        if p.io_bandwidth <= 0.0 {
            fail("packaging.io_bandwidth", "must be > 0".into());
        }

        let c = &cfg.compile;
        let node_x = p.dies_x * t.tiles_per_die_x * p.packages_x;
        let node_y = p.dies_y * t.tiles_per_die_y * p.packages_y;
        if c.grid_x == 0 || c.grid_y == 0 {
            fail("compile.grid_x", "grid must be non-empty".into());
        }
        if c.grid_origin_x + c.grid_x > node_x {
            fail("compile.grid_x", format!(
                "grid [{}, {}) exceeds node width {node_x}",
                c.grid_origin_x, c.grid_origin_x + c.grid_x
            ));
        }
        if c.grid_origin_y + c.grid_y > node_y {
            fail("compile.grid_y", format!(
                "grid [{}, {}) exceeds node height {node_y}",
                c.grid_origin_y, c.grid_origin_y + c.grid_y
            ));
        }
        if c.iq_capacity < 2 {
            fail("compile.iq_capacity", "queue depth < 2 leaves no slack for bubble injection".into());
        }
        if c.oq_capacity < 2 {
            fail("compile.oq_capacity", "queue depth < 2 leaves no slack for bubble injection".into());
        }
        if c.oq_update_ratio == 0 {
            fail("compile.oq_update_ratio", "must be >= 1".into());
        }
        if c.pu_freq_used > t.pu_freq_max {
            fail("compile.pu_freq_used", format!("{} Hz exceeds tapeout max {} Hz", c.pu_freq_used, t.pu_freq_max));
        }
        if c.noc_freq_used > t.noc_freq_max {
            fail("compile.noc_freq_used", format!("{} Hz exceeds tapeout max {} Hz", c.noc_freq_used, t.noc_freq_max));
        }
        if c.pu_freq_used <= 0.0 || c.noc_freq_used <= 0.0 {
            fail("compile.pu_freq_used", "used frequencies must be positive".into());
        }
        for name in &c.cached_arrays {
            if !ARRAY_NAMES.contains(&name.as_str()) {
                fail("compile.cached_arrays", format!("unknown array {name:?} (known: {ARRAY_NAMES:?})"));
            }
        }
        if !c.cached_arrays.is_empty() && p.hbm_per_die == 0 {
            fail("compile.cached_arrays", "cached segments configured but the package has no DRAM".into());
        }
        if !c.cached_arrays.is_empty() && c.cache_lines == 0 {
            fail("compile.cache_lines", "cache configured with zero lines".into());
        }
        // Hierarchical routing needs the grid to line up with die borders.
        let die_aligned = c.grid_origin_x % t.tiles_per_die_x == 0
            && c.grid_origin_y % t.tiles_per_die_y == 0
            && c.grid_x % t.tiles_per_die_x == 0
            && c.grid_y % t.tiles_per_die_y == 0;
        let single_die = c.grid_x <= t.tiles_per_die_x && c.grid_y <= t.tiles_per_die_y;
        if !die_aligned && !single_die {
            fail("compile.grid_origin_x", "multi-die grids must align to die boundaries".into());
        }
        if !c.edge_ownership_valid(&cfg.dataset) {
            fail("dataset.edge_ownership", format!(
                "must be \"even\" or \"by_row\", got {:?}",
                cfg.dataset.edge_ownership
            ));
        }

        let e = &cfg.energy;
        if e.any_negative() {
            fail("energy", "all per-bit/op constants must be >= 0".into());
        }
        let k = &cfg.cost;
        if k.any_nonpositive() {
            fail("cost", "all cost constants must be positive".into());
        }

        if !v.is_empty() {
            return Err(v);
        }
        let geometry = derive_geometry(&cfg);
        Ok(ValidatedSystem { cfg, geometry })
    }

    pub fn grid_x(&self) -> u32 {
        self.cfg.compile.grid_x
    }

    pub fn grid_y(&self) -> u32 {
        self.cfg.compile.grid_y
    }

    pub fn num_tiles(&self) -> u32 {
        self.grid_x() * self.grid_y()
    }

    pub fn tiles_per_die(&self) -> u32 {
        self.cfg.tapeout.tiles_per_die_x * self.cfg.tapeout.tiles_per_die_y
    }

    /// Dies covered by the compile grid, in each dimension.
    pub fn grid_dies_x(&self) -> u32 {
        self.grid_x().div_ceil(self.cfg.tapeout.tiles_per_die_x)
    }

    pub fn grid_dies_y(&self) -> u32 {
        self.grid_y().div_ceil(self.cfg.tapeout.tiles_per_die_y)
    }

    /// DRAM vault capacity private to one tile, in bytes.
    pub fn vault_capacity(&self) -> u64 {
        self.cfg.packaging.hbm_per_die / self.tiles_per_die() as u64
    }

    /// Global row-major coordinates and enclosing die indices of a grid tile.
    pub fn tile_coords(&self, tile_id: u32) -> Result<TileCoords, String> {
        if tile_id >= self.num_tiles() {
            return Err(format!(
                "tile id {tile_id} out of range (grid has {} tiles)",
                self.num_tiles()
            ));
        }
        let x = tile_id % self.grid_x();
        let y = tile_id / self.grid_x();
        let node_x = self.cfg.compile.grid_origin_x + x;
        let node_y = self.cfg.compile.grid_origin_y + y;
        Ok(TileCoords {
            x,
            y,
            die_x: node_x / self.cfg.tapeout.tiles_per_die_x,
            die_y: node_y / self.cfg.tapeout.tiles_per_die_y,
        })
    }

    /// Inverse of [`Self::tile_coords`]; round-trips for every valid id.
    pub fn tile_id(&self, x: u32, y: u32) -> Result<u32, String> {
        if x >= self.grid_x() || y >= self.grid_y() {
            return Err(format!("coords ({x}, {y}) outside {}x{} grid", self.grid_x(), self.grid_y()));
        }
        Ok(y * self.grid_x() + x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileCoords {
    pub x: u32,
    pub y: u32,
    pub die_x: u32,
    pub die_y: u32,
}

impl CompileConfig {
    fn edge_ownership_valid(&self, d: &DatasetParams) -> bool {
        matches!(d.edge_ownership.as_str(), "even" | "by_row")
    }

    /// Queue depth for the given task type's output queue.
    pub fn oq_capacity_for(&self, task: u8, update_task: u8) -> u32 {
        if task == update_task {
            self.oq_capacity * self.oq_update_ratio
        } else {
            self.oq_capacity
        }
    }
}

/// Derive tile pitch, die dimensions and edge-router placement from the
/// SRAM density model: tile area = sram area / sram_area_fraction.
pub fn derive_geometry(cfg: &SystemConfig) -> Geometry {
    let t = &cfg.tapeout;
    let sram_area = t.sram_per_tile as f64 / SRAM_BYTES_PER_MM2;
    let tile_area = sram_area / t.sram_area_fraction;
    let pitch = tile_area.sqrt();
    let die_w = pitch * t.tiles_per_die_x as f64;
    let die_h = pitch * t.tiles_per_die_y as f64;

    let c = &cfg.compile;
    let mut edge = BTreeSet::new();
    for y in 0..c.grid_y {
        for x in 0..c.grid_x {
            let nx = c.grid_origin_x + x;
            let ny = c.grid_origin_y + y;
            let dx = nx % t.tiles_per_die_x;
            let dy = ny % t.tiles_per_die_y;
            if dx == 0 || dx == t.tiles_per_die_x - 1 || dy == 0 || dy == t.tiles_per_die_y - 1 {
                edge.insert(y * c.grid_x + x);
            }
        }
    }

    Geometry {
        tile_pitch_mm: pitch,
        die_width_mm: die_w,
        die_height_mm: die_h,
        die_area_mm2: die_w * die_h,
        hop_length_tile_noc_mm: 2.0 * pitch,
        hop_length_die_noc_mm: die_w,
        edge_router_tiles: edge,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SystemConfig {
        SystemConfig::default()
    }

    #[test]
    fn default_config_validates() {
        ValidatedSystem::validate(base()).expect("defaults must be self-consistent");
    }

    #[test]
    fn paper_scale_grid_over_four_dies_is_valid() {
        // 32x32 tiles/die, 512 KiB/tile, grid 64x64 over 2x2 dies.
        let mut cfg = base();
        cfg.tapeout.tiles_per_die_x = 32;
        cfg.tapeout.tiles_per_die_y = 32;
        cfg.compile.grid_x = 64;
        cfg.compile.grid_y = 64;
        ValidatedSystem::validate(cfg).unwrap();
    }

    #[test]
    fn grid_exceeding_node_is_rejected() {
        let mut cfg = base();
        cfg.tapeout.tiles_per_die_x = 32;
        cfg.tapeout.tiles_per_die_y = 32;
        cfg.packaging.dies_x = 1;
        cfg.packaging.dies_y = 1;
        cfg.compile.grid_x = 64;
        cfg.compile.grid_y = 64;
        let err = ValidatedSystem::validate(cfg).unwrap_err();
        assert!(err.iter().any(|c| c.knob == "compile.grid_x"));
        assert!(err.iter().any(|c| c.knob == "compile.grid_y"));
    }

    #[test]
    fn queue_depth_below_two_is_rejected() {
        let mut cfg = base();
        cfg.compile.iq_capacity = 1;
        let err = ValidatedSystem::validate(cfg).unwrap_err();
        assert!(err.iter().any(|c| c.knob == "compile.iq_capacity"));
    }

    #[test]
    fn cached_arrays_without_dram_are_rejected() {
        let mut cfg = base();
        cfg.packaging.hbm_per_die = 0;
        cfg.compile.cached_arrays = vec!["col_idx".into()];
        let err = ValidatedSystem::validate(cfg).unwrap_err();
        assert!(err.iter().any(|c| c.knob == "compile.cached_arrays"));
    }

    #[test]
    fn validate_reports_every_violation_not_just_the_first() {
        let mut cfg = base();
        cfg.tapeout.noc_width = 48;
        cfg.tapeout.tiles_per_die_x = 3;
        cfg.compile.iq_capacity = 0;
        let err = ValidatedSystem::validate(cfg).unwrap_err();
        assert!(err.len() >= 3, "got {err:?}");
    }

    #[test]
    fn tile_coords_examples() {
        let mut cfg = base();
        cfg.tapeout.tiles_per_die_x = 32;
        cfg.tapeout.tiles_per_die_y = 32;
        cfg.compile.grid_x = 64;
        cfg.compile.grid_y = 64;
        let sys = ValidatedSystem::validate(cfg).unwrap();
        assert_eq!(
            sys.tile_coords(0).unwrap(),
            TileCoords { x: 0, y: 0, die_x: 0, die_y: 0 }
        );
        // id 33 in a 64-wide grid of 32-wide dies: x=33, y=0, second die.
        assert_eq!(
            sys.tile_coords(33).unwrap(),
            TileCoords { x: 33, y: 0, die_x: 1, die_y: 0 }
        );
        assert!(sys.tile_coords(64 * 64).is_err());
    }

    #[test]
    fn tile_coords_round_trip() {
        let mut cfg = base();
        cfg.compile.grid_x = 16;
        cfg.compile.grid_y = 16;
        let sys = ValidatedSystem::validate(cfg).unwrap();
        // Cheap LCG over 1000 ids; full coverage anyway for a 256-tile grid.
        let mut state = 12345u64;
        for _ in 0..1000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let id = (state >> 33) as u32 % sys.num_tiles();
            let c = sys.tile_coords(id).unwrap();
            assert_eq!(sys.tile_id(c.x, c.y).unwrap(), id);
        }
    }

    #[test]
    fn geometry_from_sram_density() {
        let cfg = base(); // 512 KiB, fraction 0.6
        let g = derive_geometry(&cfg);
        assert!((g.tile_pitch_mm - 0.4879500364742666).abs() < 1e-12);
        assert!((g.hop_length_tile_noc_mm - 2.0 * g.tile_pitch_mm).abs() < 1e-15);
    }

    #[test]
    fn pitch_scales_as_sqrt_of_sram() {
        let mut cfg = base();
        let g1 = derive_geometry(&cfg);
        cfg.tapeout.sram_per_tile *= 4;
        let g2 = derive_geometry(&cfg);
        assert!((g2.tile_pitch_mm - 2.0 * g1.tile_pitch_mm).abs() < 1e-12);
    }

    #[test]
    fn geometry_monotone_in_sram() {
        let mut cfg = base();
        let mut last = 0.0;
        for sram in [64 * KIB, 128 * KIB, 512 * KIB, 2 * MIB, 8 * MIB] {
            cfg.tapeout.sram_per_tile = sram;
            let g = derive_geometry(&cfg);
            assert!(g.tile_pitch_mm >= last);
            last = g.tile_pitch_mm;
        }
    }

    #[test]
    fn die_area_lands_near_published_chiplet() {
        // A 32x32-tile die at 512 KiB/tile should land within 2x of 255 mm².
        let mut cfg = base();
        cfg.tapeout.tiles_per_die_x = 32;
        cfg.tapeout.tiles_per_die_y = 32;
        let g = derive_geometry(&cfg);
        assert!(g.die_area_mm2 > 255.0 / 2.0 && g.die_area_mm2 < 255.0 * 2.0, "area {}", g.die_area_mm2);
    }

    #[test]
    fn edge_router_tiles_are_exactly_die_borders() {
        let mut cfg = base();
        cfg.tapeout.tiles_per_die_x = 4;
        cfg.tapeout.tiles_per_die_y = 4;
        cfg.compile.grid_x = 8;
        cfg.compile.grid_y = 8;
        let sys = ValidatedSystem::validate(cfg).unwrap();
        let g = &sys.geometry;
        // In an 8x8 grid of 4x4 dies, interior (non-border) tiles are those
        // with both coords in {1, 2} mod 4.
        for y in 0..8u32 {
            for x in 0..8u32 {
                let id = y * 8 + x;
                let interior = (1..3).contains(&(x % 4)) && (1..3).contains(&(y % 4));
                assert_eq!(g.edge_router_tiles.contains(&id), !interior, "tile {id}");
            }
        }
    }

    /// Every knob in the published configuration table maps to exactly one
    /// config field; setting all of them through the text format must parse.
    #[test]
    fn every_knob_is_a_config_field() {
        let text = r#"
            [tapeout]
            tiles_per_die_x = 32          # tiles per die
            tiles_per_die_y = 32
            pus_per_tile = 4              # PUs per tile
            pu_freq = 1e9                 # ... and their operating
            pu_freq_max = 2e9             # ... and max frequency
            sram_per_tile = 524288        # SRAM capacity per tile
            mem_channels_per_die = 8      # memory controller channels per die
            noc_width = 64                # NoC width
            noc_freq = 1e9                # ... operating
            noc_freq_max = 2e9            # ... and max frequency
            router_buffer_msgs = 4        # router buffer entries

            [packaging]
            dies_x = 2                    # compute dies per package
            dies_y = 2
            hbm_per_die = 8589934592      # DRAM dies per package and capacity
            packages_x = 1
            packages_y = 1
            io_bandwidth = 64e9           # I/O dies (off-package bandwidth)

            [compile]
            iq_capacity = 64              # input queue size per task type
            oq_capacity = 12              # output queue size per task type
            oq_update_ratio = 8
            grid_x = 64                   # size of the grid the workload uses
            grid_y = 64
            grid_origin_x = 0             # place of the grid
            grid_origin_y = 0
            cached_arrays = ["col_idx"]   # the address space that is cached
            cache_lines = 4096            # size of the data cache
            topology_tile_noc = "Torus"
            topology_die_noc = "Mesh"
            pu_freq_used = 1e9
            noc_freq_used = 1e9
        "#;
        let cfg = SystemConfig::from_toml(text).unwrap();
        assert_eq!(cfg.compile.grid_x, 64);
        assert_eq!(cfg.compile.oq_update_ratio, 8);
        assert_eq!(cfg.tapeout.pus_per_tile, 4);
        assert_eq!(cfg.compile.topology_die_noc, Topology::Mesh);
    }

    #[test]
    fn dotted_overrides() {
        let cfg = base();
        let out = cfg
            .with_overrides(&[
                ("compile.grid_x".into(), "64".into()),
                ("tapeout.noc_width".into(), "128".into()),
                ("compile.cached_arrays".into(), "[\"col_idx\", \"values\"]".into()),
                ("compile.topology_tile_noc".into(), "Mesh".into()),
            ])
            .unwrap();
        assert_eq!(out.compile.grid_x, 64);
        assert_eq!(out.tapeout.noc_width, 128);
        assert_eq!(out.compile.cached_arrays, vec!["col_idx", "values"]);
        assert_eq!(out.compile.topology_tile_noc, Topology::Mesh);
    }

    #[test]
    fn unknown_override_path_fails_to_deserialize() {
        let cfg = base();
        assert!(cfg
            .with_overrides(&[("compile.no_such_knob".into(), "1".into())])
            .is_err());
    }
}
