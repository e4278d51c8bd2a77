//! CSR datasets, Kronecker (RMAT) graph generation, and the static tile
//! ownership layout over the partitioned global address space.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::sysconfig::DatasetParams;

const CSR_MAGIC: &[u8; 8] = b"TILECSR\0";
const CSR_VERSION: u32 = 1;

/// Identifiers for the dataset arrays a task may route on or touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ArrayId {
    /// Row offsets; indexed by vertex, extent V+1.
    RowPtr,
    /// Column indices; indexed by edge.
    ColIdx,
    /// Edge weights; indexed by edge.
    EdgeVal,
    /// Primary per-vertex state (levels, distances, labels, ranks, x).
    VertexA,
    /// Secondary per-vertex state (accumulators, y, histogram bins).
    VertexB,
}

pub const ALL_ARRAYS: [ArrayId; 5] = [
    ArrayId::RowPtr,
    ArrayId::ColIdx,
    ArrayId::EdgeVal,
    ArrayId::VertexA,
    ArrayId::VertexB,
];

impl ArrayId {
    pub fn config_name(self) -> &'static str {
        match self {
            ArrayId::RowPtr => "row_ptr",
            ArrayId::ColIdx => "col_idx",
            ArrayId::EdgeVal => "values",
            ArrayId::VertexA => "vertex",
            ArrayId::VertexB => "output",
        }
    }

    pub fn from_config_name(name: &str) -> Option<Self> {
        ALL_ARRAYS.iter().copied().find(|a| a.config_name() == name)
    }
}

#[derive(Debug)]
pub enum DatasetError {
    Io(std::io::Error),
    BadHeader(String),
    NonMonotoneRowPtr { index: usize },
    RowPtrEndMismatch { last: u64, num_edges: u64 },
    ColIdxOutOfRange { index: usize, value: u64, num_vertices: u64 },
    BadEdgeList(String),
    TooManyTiles { num_tiles: u32, num_vertices: u64 },
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetError::Io(e) => write!(f, "dataset io: {e}"),
            DatasetError::BadHeader(s) => write!(f, "malformed header: {s}"),
            DatasetError::NonMonotoneRowPtr { index } => {
                write!(f, "row_ptr decreases at index {index}")
            }
            DatasetError::RowPtrEndMismatch { last, num_edges } => {
                write!(f, "row_ptr[V] = {last} but E = {num_edges}")
            }
            DatasetError::ColIdxOutOfRange { index, value, num_vertices } => {
                write!(f, "col_idx[{index}] = {value} >= V = {num_vertices}")
            }
            DatasetError::BadEdgeList(s) => write!(f, "bad edge list: {s}"),
            DatasetError::TooManyTiles { num_tiles, num_vertices } => {
                write!(f, "{num_tiles} tiles for only {num_vertices} vertices")
            }
        }
    }
}

impl std::error::Error for DatasetError {}

impl From<std::io::Error> for DatasetError {
    fn from(e: std::io::Error) -> Self {
        DatasetError::Io(e)
    }
}

/// A directed graph / sparse matrix in compressed sparse row form.
/// Duplicate edges and self-loops are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrDataset {
    pub num_vertices: u64,
    pub num_edges: u64,
    pub row_ptr: Vec<u64>,
    pub col_idx: Vec<u32>,
    pub values: Option<Vec<f32>>,
    pub name: String,
}

impl CsrDataset {
    pub fn from_edges(num_vertices: u64, edges: &[(u32, u32)], weights: Option<&[f32]>) -> Self {
        let v = num_vertices as usize;
        let mut counts = vec![0u64; v + 1];
        for &(src, _) in edges {
            counts[src as usize + 1] += 1;
        }
        for i in 0..v {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut col_idx = vec![0u32; edges.len()];
        let mut values = weights.map(|_| vec![0f32; edges.len()]);
        let mut cursor = row_ptr.clone();
        for (i, &(src, dst)) in edges.iter().enumerate() {
            let at = cursor[src as usize] as usize;
            col_idx[at] = dst;
            if let (Some(vals), Some(w)) = (&mut values, weights) {
                vals[at] = w[i];
            }
            cursor[src as usize] += 1;
        }
        CsrDataset {
            num_vertices,
            num_edges: edges.len() as u64,
            row_ptr,
            col_idx,
            values,
            name: String::new(),
        }
    }

    pub fn check_invariants(&self) -> Result<(), DatasetError> {
        let v = self.num_vertices as usize;
        if self.row_ptr.len() != v + 1 {
            return Err(DatasetError::BadHeader(format!(
                "row_ptr has {} entries for V = {v}",
                self.row_ptr.len()
            )));
        }
        if self.row_ptr[0] != 0 {
            return Err(DatasetError::BadHeader("row_ptr[0] != 0".into()));
        }
        for i in 0..v {
            if self.row_ptr[i + 1] < self.row_ptr[i] {
                return Err(DatasetError::NonMonotoneRowPtr { index: i + 1 });
            }
        }
        if self.row_ptr[v] != self.num_edges {
            return Err(DatasetError::RowPtrEndMismatch {
                last: self.row_ptr[v],
                num_edges: self.num_edges,
            });
        }
        if self.col_idx.len() != self.num_edges as usize {
            return Err(DatasetError::BadHeader("col_idx length != E".into()));
        }
        for (i, &c) in self.col_idx.iter().enumerate() {
            if c as u64 >= self.num_vertices {
                return Err(DatasetError::ColIdxOutOfRange {
                    index: i,
                    value: c as u64,
                    num_vertices: self.num_vertices,
                });
            }
        }
        if let Some(vals) = &self.values {
            if vals.len() != self.num_edges as usize {
                return Err(DatasetError::BadHeader("values length != E".into()));
            }
        }
        Ok(())
    }

    pub fn out_degree(&self, v: u64) -> u64 {
        self.row_ptr[v as usize + 1] - self.row_ptr[v as usize]
    }

    /// Total bytes of the three input arrays plus the output array of size V,
    /// at the configured element widths.
    pub fn footprint_bytes(&self, p: &DatasetParams) -> u64 {
        let mut total = (self.num_vertices + 1) * p.offset_width as u64
            + self.num_edges * p.index_width as u64
            + self.num_vertices * p.output_width as u64;
        if self.values.is_some() {
            total += self.num_edges * p.value_width as u64;
        }
        total
    }

    /// Add the reverse of every edge; used by workloads that treat the graph
    /// as undirected. Duplicates are kept as everywhere else.
    pub fn symmetrized(&self) -> CsrDataset {
        let mut edges = Vec::with_capacity(2 * self.num_edges as usize);
        let mut weights = self.values.as_ref().map(|_| Vec::with_capacity(2 * self.num_edges as usize));
        for v in 0..self.num_vertices as usize {
            for e in self.row_ptr[v] as usize..self.row_ptr[v + 1] as usize {
                let dst = self.col_idx[e];
                edges.push((v as u32, dst));
                edges.push((dst, v as u32));
                if let (Some(ws), Some(vals)) = (&mut weights, &self.values) {
                    ws.push(vals[e]);
                    ws.push(vals[e]);
                }
            }
        }
        let mut out = CsrDataset::from_edges(self.num_vertices, &edges, weights.as_deref());
        out.name = format!("{}+sym", self.name);
        out
    }

    /// Attach uniform integer-valued weights in [1, 255]; keeps arithmetic
    /// exactly representable so fixpoint results are order-independent.
    pub fn with_random_weights(mut self, seed: u64) -> CsrDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77ee);
        self.values = Some((0..self.num_edges).map(|_| rng.gen_range(1..=255) as f32).collect());
        self
    }

    // ---- binary format: magic, version, widths, V, E, then the arrays
    // little-endian ----

    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<(), DatasetError> {
        w.write_all(CSR_MAGIC)?;
        w.write_all(&CSR_VERSION.to_le_bytes())?;
        let widths = [8u8, 4, if self.values.is_some() { 4 } else { 0 }, 0];
        w.write_all(&widths)?;
        w.write_all(&self.num_vertices.to_le_bytes())?;
        w.write_all(&self.num_edges.to_le_bytes())?;
        for x in &self.row_ptr {
            w.write_all(&x.to_le_bytes())?;
        }
        for x in &self.col_idx {
            w.write_all(&x.to_le_bytes())?;
        }
        if let Some(vals) = &self.values {
            for x in vals {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut f)
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self, DatasetError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CSR_MAGIC {
            return Err(DatasetError::BadHeader(format!("bad magic {magic:?}")));
        }
        let mut buf4 = [0u8; 4];
        r.read_exact(&mut buf4)?;
        let version = u32::from_le_bytes(buf4);
        if version != CSR_VERSION {
            return Err(DatasetError::BadHeader(format!("unsupported version {version}")));
        }
        let mut widths = [0u8; 4];
        r.read_exact(&mut widths)?;
        if widths[0] != 8 || widths[1] != 4 || !(widths[2] == 0 || widths[2] == 4) {
            return Err(DatasetError::BadHeader(format!("unsupported widths {widths:?}")));
        }
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)?;
        let num_vertices = u64::from_le_bytes(buf8);
        r.read_exact(&mut buf8)?;
        let num_edges = u64::from_le_bytes(buf8);

        let mut row_ptr = vec![0u64; num_vertices as usize + 1];
        for x in &mut row_ptr {
            r.read_exact(&mut buf8)?;
            *x = u64::from_le_bytes(buf8);
        }
        let mut col_idx = vec![0u32; num_edges as usize];
        for x in &mut col_idx {
            r.read_exact(&mut buf4)?;
            *x = u32::from_le_bytes(buf4);
        }
        let values = if widths[2] == 4 {
            let mut vals = vec![0f32; num_edges as usize];
            for x in &mut vals {
                r.read_exact(&mut buf4)?;
                *x = f32::from_le_bytes(buf4);
            }
            Some(vals)
        } else {
            None
        };
        let ds = CsrDataset { num_vertices, num_edges, row_ptr, col_idx, values, name: String::new() };
        ds.check_invariants()?;
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut ds = Self::read_binary(&mut f)?;
        ds.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(ds)
    }

    /// Text importer for tests: one `src dst [weight]` per line, `#`
    /// comments, optional `vertices N` line to pad isolated vertices.
    pub fn from_edge_list_text(text: &str) -> Result<Self, DatasetError> {
        let mut edges: Vec<(u32, u32)> = Vec::new();
        let mut weights: Vec<f32> = Vec::new();
        let mut any_weight = false;
        let mut declared_v: Option<u64> = None;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let first = parts.next().unwrap();
            if first == "vertices" {
                let n = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| DatasetError::BadEdgeList(format!("line {}: bad vertices line", ln + 1)))?;
                declared_v = Some(n);
                continue;
            }
            let src: u32 = first
                .parse()
                .map_err(|_| DatasetError::BadEdgeList(format!("line {}: bad src", ln + 1)))?;
            let dst: u32 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| DatasetError::BadEdgeList(format!("line {}: bad dst", ln + 1)))?;
            let w = parts.next().map(|s| s.parse::<f32>());
            edges.push((src, dst));
            match w {
                Some(Ok(x)) => {
                    any_weight = true;
                    weights.push(x);
                }
                Some(Err(_)) => {
                    return Err(DatasetError::BadEdgeList(format!("line {}: bad weight", ln + 1)))
                }
                None => weights.push(1.0),
            }
        }
        let max_v = edges.iter().map(|&(s, d)| s.max(d) as u64 + 1).max().unwrap_or(0);
        let num_vertices = declared_v.unwrap_or(max_v).max(max_v);
        let ds = CsrDataset::from_edges(
            num_vertices,
            &edges,
            if any_weight { Some(&weights) } else { None },
        );
        ds.check_invariants()?;
        Ok(ds)
    }
}

/// Recursive Kronecker quadrant sampling; V = 2^scale, E = edgefactor * V
/// directed edges, duplicates retained. Deterministic for a fixed seed.
pub fn generate_rmat(scale: u32, edgefactor: u64, seed: u64, p: &DatasetParams) -> CsrDataset {
    assert!(scale <= 24, "scale {scale} too large for desk-scale generation");
    assert!(edgefactor >= 1);
    let num_vertices = 1u64 << scale;
    let num_edges = edgefactor * num_vertices;
    let (a, b, c) = (p.rmat_a, p.rmat_b, p.rmat_c);
    let ab = a + b;
    let abc = a + b + c;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(num_edges as usize);
    for _ in 0..num_edges {
        let mut src = 0u32;
        let mut dst = 0u32;
        for _ in 0..scale {
            src <<= 1;
            dst <<= 1;
            let r: f64 = rng.gen();
            if r < a {
                // top-left quadrant
            } else if r < ab {
                dst |= 1;
            } else if r < abc {
                src |= 1;
            } else {
                src |= 1;
                dst |= 1;
            }
        }
        edges.push((src, dst));
    }
    let mut ds = CsrDataset::from_edges(num_vertices, &edges, None);
    ds.name = format!("rmat{scale}x{edgefactor}s{seed}");
    ds
}

/// How edge-array elements map to tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeOwnership {
    /// Equal contiguous index blocks; owner is a pure function of the index.
    EvenSplit,
    /// Edges follow their source row's owner; whole rows never split.
    BySourceRow,
}

impl EdgeOwnership {
    pub fn from_config(name: &str) -> Option<Self> {
        match name {
            "even" => Some(EdgeOwnership::EvenSplit),
            "by_row" => Some(EdgeOwnership::BySourceRow),
            _ => None,
        }
    }
}

/// Static ownership map: each array element has exactly one owner tile,
/// computable from the index (plus, for by-row edges, the per-tile extent
/// fenceposts that the layout carries).
#[derive(Debug, Clone)]
pub struct PgasLayout {
    pub num_tiles: u32,
    pub num_vertices: u64,
    pub num_edges: u64,
    pub vertices_per_tile: u64,
    pub edges_per_tile: u64,
    pub edge_ownership: EdgeOwnership,
    /// First owned edge index per tile (num_tiles + 1 fenceposts).
    pub edge_base: Vec<u64>,
    /// Extent of the secondary vertex array (bins for histograms), if it
    /// differs from V.
    pub vertex_b_len: u64,
    pub vertex_b_per_tile: u64,
}

impl PgasLayout {
    pub fn partition(
        dataset: &CsrDataset,
        num_tiles: u32,
        ownership: EdgeOwnership,
    ) -> Result<PgasLayout, DatasetError> {
        if (num_tiles as u64) > dataset.num_vertices {
            return Err(DatasetError::TooManyTiles {
                num_tiles,
                num_vertices: dataset.num_vertices,
            });
        }
        let v = dataset.num_vertices;
        let e = dataset.num_edges;
        let n = num_tiles as u64;
        let vpt = v.div_ceil(n);
        let ept = e.div_ceil(n).max(1);
        let edge_base = match ownership {
            EdgeOwnership::EvenSplit => (0..=n).map(|t| (t * ept).min(e)).collect(),
            EdgeOwnership::BySourceRow => (0..=n)
                .map(|t| dataset.row_ptr[((t * vpt).min(v)) as usize])
                .collect(),
        };
        Ok(PgasLayout {
            num_tiles,
            num_vertices: v,
            num_edges: e,
            vertices_per_tile: vpt,
            edges_per_tile: ept,
            edge_ownership: ownership,
            edge_base,
            vertex_b_len: v,
            vertex_b_per_tile: vpt,
        })
    }

    /// Resize the secondary vertex array (histogram bins).
    pub fn with_vertex_b_len(mut self, len: u64) -> Self {
        self.vertex_b_len = len;
        self.vertex_b_per_tile = len.div_ceil(self.num_tiles as u64).max(1);
        self
    }

    pub fn array_len(&self, array: ArrayId) -> u64 {
        match array {
            ArrayId::RowPtr => self.num_vertices + 1,
            ArrayId::ColIdx | ArrayId::EdgeVal => self.num_edges,
            ArrayId::VertexA => self.num_vertices,
            ArrayId::VertexB => self.vertex_b_len,
        }
    }

    pub fn owner_of(&self, array: ArrayId, index: u64) -> Result<u32, String> {
        let len = self.array_len(array);
        if index >= len {
            return Err(format!(
                "index {index} out of range for {} (extent {len})",
                array.config_name()
            ));
        }
        Ok(match array {
            ArrayId::VertexA => (index / self.vertices_per_tile) as u32,
            ArrayId::VertexB => (index / self.vertex_b_per_tile) as u32,
            // The fencepost entry row_ptr[V] rides with the last vertex.
            ArrayId::RowPtr => {
                ((index.min(self.num_vertices - 1)) / self.vertices_per_tile) as u32
            }
            ArrayId::ColIdx | ArrayId::EdgeVal => match self.edge_ownership {
                EdgeOwnership::EvenSplit => {
                    ((index / self.edges_per_tile) as u32).min(self.num_tiles - 1)
                }
                EdgeOwnership::BySourceRow => {
                    (self.edge_base.partition_point(|&b| b <= index) - 1) as u32
                }
            },
        })
    }

    /// Owned index range of `array` on `tile`.
    pub fn extent_of(&self, array: ArrayId, tile: u32) -> (u64, u64) {
        let t = tile as u64;
        let len = self.array_len(array);
        match array {
            ArrayId::VertexA => block_extent(t, self.vertices_per_tile, len),
            ArrayId::VertexB => block_extent(t, self.vertex_b_per_tile, len),
            ArrayId::RowPtr => {
                // Owned vertices plus the shared fencepost; the last tile also
                // owns the final entry outright.
                let (lo, hi) = block_extent(t, self.vertices_per_tile, self.num_vertices);
                (lo, (hi + 1).min(len))
            }
            ArrayId::ColIdx | ArrayId::EdgeVal => {
                (self.edge_base[tile as usize], self.edge_base[tile as usize + 1])
            }
        }
    }

    pub fn owned_vertices(&self, tile: u32) -> (u64, u64) {
        block_extent(tile as u64, self.vertices_per_tile, self.num_vertices)
    }
}

fn block_extent(tile: u64, per_tile: u64, len: u64) -> (u64, u64) {
    let lo = (tile * per_tile).min(len);
    let hi = ((tile + 1) * per_tile).min(len);
    (lo, hi)
}
