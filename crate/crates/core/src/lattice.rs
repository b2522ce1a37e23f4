//! Parent-block lattice, integer cell boxes, and the block model.
//!
//! Block geometry is held as a parent index plus an integer cell box; floats
//! only appear when converting to and from model coordinates.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub type ParentIndex = [i64; 3];

/// Label used for blocks without a domain.
pub const UNLABELLED: i64 = -1;

const PARENT_SNAP: f64 = 1e-9;
const BLOCK_SNAP: f64 = 1e-6;

/// Sort key putting parents in raster order (z, then y, then x).
#[inline]
pub fn parent_key(p: ParentIndex) -> (i64, i64, i64) {
    (p[2], p[1], p[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub origin: Vec3,
    pub parent_dims: Vec3,
    pub min_dims: Vec3,
    pub counts: [u32; 3],
}

fn snapped_ratio(a: f64, b: f64, tol: f64) -> Option<f64> {
    let q = a / b;
    let r = q.round();
    ((q - r).abs() <= tol).then_some(r)
}

impl LatticeSpec {
    pub fn new(origin: Vec3, parent_dims: Vec3, min_dims: Vec3) -> Result<LatticeSpec> {
        if !origin.is_finite() || !parent_dims.is_finite() || !min_dims.is_finite() {
            return Err(Error::InvalidLattice("non-finite lattice parameter".into()));
        }
        let mut counts = [0u32; 3];
        for a in 0..3 {
            if parent_dims[a] <= 0.0 || min_dims[a] <= 0.0 {
                return Err(Error::InvalidLattice("dimensions must be positive".into()));
            }
            let k = snapped_ratio(parent_dims[a], min_dims[a], BLOCK_SNAP)
                .filter(|&k| k >= 1.0 && k <= u32::MAX as f64)
                .ok_or_else(|| {
                    Error::InvalidLattice(format!(
                        "parent size {} is not a whole multiple of min size {} on axis {a}",
                        parent_dims[a], min_dims[a]
                    ))
                })?;
            counts[a] = k as u32;
        }
        Ok(LatticeSpec { origin, parent_dims, min_dims, counts })
    }

    pub fn cell_count(&self) -> usize {
        self.counts.iter().map(|&k| k as usize).product()
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.counts)
    }

    pub fn parent_index_of(&self, p: Vec3) -> ParentIndex {
        let mut out = [0i64; 3];
        for a in 0..3 {
            let q = (p[a] - self.origin[a]) / self.parent_dims[a];
            let r = q.round();
            let q = if (q - r).abs() <= PARENT_SNAP { r } else { q };
            out[a] = q.floor() as i64;
        }
        out
    }

    pub fn parent_origin(&self, p: ParentIndex) -> Vec3 {
        Vec3::new(
            self.origin.x + p[0] as f64 * self.parent_dims.x,
            self.origin.y + p[1] as f64 * self.parent_dims.y,
            self.origin.z + p[2] as f64 * self.parent_dims.z,
        )
    }

    pub fn cell_min(&self, p: ParentIndex, n: [u32; 3]) -> Vec3 {
        let o = self.parent_origin(p);
        Vec3::new(
            o.x + n[0] as f64 * self.min_dims.x,
            o.y + n[1] as f64 * self.min_dims.y,
            o.z + n[2] as f64 * self.min_dims.z,
        )
    }

    pub fn cell_centroid(&self, p: ParentIndex, n: [u32; 3]) -> Vec3 {
        self.cell_min(p, n) + self.min_dims * 0.5
    }

    pub fn box_min(&self, p: ParentIndex, c: &CellBox) -> Vec3 {
        self.cell_min(p, c.min)
    }

    pub fn box_dims(&self, c: &CellBox) -> Vec3 {
        Vec3::new(c.size[0] as f64, c.size[1] as f64, c.size[2] as f64).mul_elem(self.min_dims)
    }

    /// Centroid as the mean of min and max corners.
    pub fn box_centroid(&self, p: ParentIndex, c: &CellBox) -> Vec3 {
        let lo = self.box_min(p, c);
        let hi = lo + self.box_dims(c);
        (lo + hi) * 0.5
    }

    pub fn cell_volume(&self) -> f64 {
        self.min_dims.x * self.min_dims.y * self.min_dims.z
    }
}

/// Raster addressing for a `Kx × Ky × Kz` cell grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    pub k: [u32; 3],
}

impl Grid {
    pub fn new(k: [u32; 3]) -> Grid {
        Grid { k }
    }

    pub fn len(&self) -> usize {
        self.k.iter().map(|&k| k as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// i = (nz·Ky + ny)·Kx + nx
    #[inline]
    pub fn raster(&self, n: [u32; 3]) -> usize {
        (n[2] as usize * self.k[1] as usize + n[1] as usize) * self.k[0] as usize + n[0] as usize
    }

    #[inline]
    pub fn subscript(&self, i: usize) -> [u32; 3] {
        let kx = self.k[0] as usize;
        let ky = self.k[1] as usize;
        [(i % kx) as u32, ((i / kx) % ky) as u32, (i / (kx * ky)) as u32]
    }

    pub fn full_box(&self) -> CellBox {
        CellBox { min: [0; 3], size: self.k }
    }
}

/// Half-open integer box `[min, min + size)` in cell units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellBox {
    pub min: [u32; 3],
    pub size: [u32; 3],
}

impl CellBox {
    pub fn new(min: [u32; 3], size: [u32; 3]) -> CellBox {
        CellBox { min, size }
    }

    pub fn unit(n: [u32; 3]) -> CellBox {
        CellBox { min: n, size: [1; 3] }
    }

    pub fn max(&self) -> [u32; 3] {
        [self.min[0] + self.size[0], self.min[1] + self.size[1], self.min[2] + self.size[2]]
    }

    pub fn volume(&self) -> u64 {
        self.size.iter().map(|&s| s as u64).product()
    }

    pub fn fits(&self, k: [u32; 3]) -> bool {
        (0..3).all(|a| self.size[a] >= 1 && self.min[a] + self.size[a] <= k[a])
    }

    pub fn contains_cell(&self, n: [u32; 3]) -> bool {
        (0..3).all(|a| n[a] >= self.min[a] && n[a] < self.min[a] + self.size[a])
    }

    pub fn contains_box(&self, o: &CellBox) -> bool {
        (0..3).all(|a| o.min[a] >= self.min[a] && o.min[a] + o.size[a] <= self.min[a] + self.size[a])
    }

    pub fn intersects(&self, o: &CellBox) -> bool {
        (0..3).all(|a| self.min[a] < o.min[a] + o.size[a] && o.min[a] < self.min[a] + self.size[a])
    }

    /// Cells in raster order.
    pub fn cells(&self) -> impl Iterator<Item = [u32; 3]> + '_ {
        let [x0, y0, z0] = self.min;
        let [x1, y1, z1] = self.max();
        (z0..z1).flat_map(move |z| (y0..y1).flat_map(move |y| (x0..x1).map(move |x| [x, y, z])))
    }

    /// Max over min of the real extents.
    pub fn aspect_ratio(&self, min_dims: Vec3) -> f64 {
        let d = Vec3::new(self.size[0] as f64, self.size[1] as f64, self.size[2] as f64).mul_elem(min_dims);
        d.max_component() / d.min_component()
    }
}

/// A block of the model in integer form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Block {
    pub parent: ParentIndex,
    pub cells: CellBox,
    pub label: i64,
}

impl Block {
    pub fn centroid(&self, spec: &LatticeSpec) -> Vec3 {
        spec.box_centroid(self.parent, &self.cells)
    }

    pub fn dims(&self, spec: &LatticeSpec) -> Vec3 {
        spec.box_dims(&self.cells)
    }

    pub fn to_float(&self, spec: &LatticeSpec) -> FloatBlock {
        FloatBlock { centroid: self.centroid(spec), dims: self.dims(spec), label: self.label }
    }

    fn sort_key(&self, grid: &Grid) -> ((i64, i64, i64), usize) {
        (parent_key(self.parent), grid.raster(self.cells.min))
    }
}

/// A block in model coordinates, as read from or written to CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloatBlock {
    pub centroid: Vec3,
    pub dims: Vec3,
    pub label: i64,
}

/// Snaps a float block onto the lattice.
pub fn block_from_float(spec: &LatticeSpec, b: &FloatBlock) -> Result<Block> {
    let bad = || Error::MisalignedBlock { centroid: b.centroid.to_array(), dims: b.dims.to_array() };
    if !b.centroid.is_finite() || !b.dims.is_finite() {
        return Err(bad());
    }
    let parent = spec.parent_index_of(b.centroid);
    let po = spec.parent_origin(parent);
    let lo = b.centroid - b.dims * 0.5;
    let mut min = [0u32; 3];
    let mut size = [0u32; 3];
    for a in 0..3 {
        let m = snapped_ratio(lo[a] - po[a], spec.min_dims[a], BLOCK_SNAP).ok_or_else(bad)?;
        let s = snapped_ratio(b.dims[a], spec.min_dims[a], BLOCK_SNAP).ok_or_else(bad)?;
        if m < 0.0 || s < 1.0 || m + s > spec.counts[a] as f64 {
            return Err(bad());
        }
        min[a] = m as u32;
        size[a] = s as u32;
    }
    Ok(Block { parent, cells: CellBox { min, size }, label: b.label })
}

/// The cell coordinates covered by a block, in raster order.
pub fn cells_of(spec: &LatticeSpec, b: &FloatBlock) -> Result<Vec<[u32; 3]>> {
    let blk = block_from_float(spec, b)?;
    Ok(blk.cells.cells().collect())
}

/// Per-cell local offsets of one parent's cells, raster-indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLut {
    pub grid: Grid,
    pub cell_dims: Vec3,
    pub offsets: Vec<Vec3>,
}

impl CellLut {
    pub fn new(spec: &LatticeSpec) -> CellLut {
        let grid = spec.grid();
        let offsets = (0..grid.len())
            .map(|i| {
                let n = grid.subscript(i);
                Vec3::new(n[0] as f64 + 0.5, n[1] as f64 + 0.5, n[2] as f64 + 0.5).mul_elem(spec.min_dims)
            })
            .collect();
        CellLut { grid, cell_dims: spec.min_dims, offsets }
    }
}

/// All cells of a parent, raster order.
pub fn decompose_parent(spec: &LatticeSpec, parent: ParentIndex, label: i64) -> Vec<Block> {
    let grid = spec.grid();
    (0..grid.len()).map(|i| Block { parent, cells: CellBox::unit(grid.subscript(i)), label }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockModel {
    pub spec: LatticeSpec,
    pub blocks: Vec<Block>,
}

impl BlockModel {
    pub fn new(spec: LatticeSpec, blocks: Vec<Block>) -> BlockModel {
        BlockModel { spec, blocks }
    }

    /// Builds from float blocks, rejecting duplicates, misalignment and overlap.
    pub fn from_float(spec: LatticeSpec, blocks: &[FloatBlock]) -> Result<BlockModel> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(blocks.len());
        for b in blocks {
            let blk = block_from_float(&spec, b)?;
            if !seen.insert((blk.parent, blk.cells)) {
                return Err(Error::DuplicateBlock(b.centroid.to_array()));
            }
            out.push(blk);
        }
        let m = BlockModel { spec, blocks: out };
        m.check_disjoint()?;
        Ok(m)
    }

    pub fn check_disjoint(&self) -> Result<()> {
        let grid = self.spec.grid();
        for (p, idx) in self.parents() {
            let mut owner = vec![false; grid.len()];
            for &i in &idx {
                for c in self.blocks[i].cells.cells() {
                    let r = grid.raster(c);
                    if owner[r] {
                        return Err(Error::OverlappingBlocks(p));
                    }
                    owner[r] = true;
                }
            }
        }
        Ok(())
    }

    /// Parents in raster order with their block indices.
    pub fn parents(&self) -> Vec<(ParentIndex, Vec<usize>)> {
        let mut keyed: BTreeMap<(i64, i64, i64), (ParentIndex, Vec<usize>)> = BTreeMap::new();
        for (i, b) in self.blocks.iter().enumerate() {
            keyed.entry(parent_key(b.parent)).or_insert_with(|| (b.parent, Vec::new())).1.push(i);
        }
        keyed.into_values().collect()
    }

    /// Export order: parent raster, then min-cell raster.
    pub fn sort_canonical(&mut self) {
        let grid = self.spec.grid();
        self.blocks.sort_by_key(|b| b.sort_key(&grid));
    }

    pub fn total_cells(&self) -> u64 {
        self.blocks.iter().map(|b| b.cells.volume()).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut m = self.clone();
        m.sort_canonical();
        let mut s = String::from("x,y,z,dx,dy,dz,label\n");
        for b in &m.blocks {
            let f = b.to_float(&self.spec);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                f.centroid.x, f.centroid.y, f.centroid.z, f.dims.x, f.dims.y, f.dims.z, f.label
            );
        }
        s
    }

    pub fn from_csv(spec: LatticeSpec, text: &str) -> Result<BlockModel> {
        BlockModel::from_float(spec, &parse_csv(text)?)
    }

    /// A full regular model: one block per parent.
    pub fn regular(spec: LatticeSpec, nparents: [i64; 3], label: i64) -> BlockModel {
        let mut blocks = Vec::new();
        for z in 0..nparents[2] {
            for y in 0..nparents[1] {
                for x in 0..nparents[0] {
                    blocks.push(Block { parent: [x, y, z], cells: spec.grid().full_box(), label });
                }
            }
        }
        BlockModel { spec, blocks }
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<FloatBlock>> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty model file".into() })?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols != ["x", "y", "z", "dx", "dy", "dz", "label"] {
        return Err(Error::Parse { line: 1, msg: format!("unexpected header '{head}'") });
    }
    let mut out = Vec::new();
    for (i, l) in lines {
        let ln = i + 1;
        if l.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() != 7 {
            return Err(Error::Parse { line: ln, msg: format!("expected 7 fields, got {}", f.len()) });
        }
        let mut v = [0f64; 6];
        for k in 0..6 {
            v[k] = f[k].parse().map_err(|_| Error::Parse { line: ln, msg: format!("bad number '{}'", f[k]) })?;
            if !v[k].is_finite() {
                return Err(Error::Parse { line: ln, msg: "non-finite value".into() });
            }
        }
        let label: i64 = f[6].parse().map_err(|_| Error::Parse { line: ln, msg: format!("bad label '{}'", f[6]) })?;
        out.push(FloatBlock { centroid: Vec3::new(v[0], v[1], v[2]), dims: Vec3::new(v[3], v[4], v[5]), label });
    }
    Ok(out)
}

/// Orthonormal frame rotation applied to point data entering or leaving the
/// axis-aligned modelling frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub m: [[f64; 3]; 3],
}

impl Rotation {
    pub fn new(m: [[f64; 3]; 3]) -> Result<Rotation> {
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3).map(|k| m[i][k] * m[j][k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if !d.is_finite() || (d - want).abs() > 1e-9 {
                    return Err(Error::NotOrthonormal);
                }
            }
        }
        Ok(Rotation { m })
    }

    pub fn identity() -> Rotation {
        Rotation { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    pub fn about_z(theta: f64) -> Rotation {
        let (s, c) = theta.sin_cos();
        Rotation { m: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]] }
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn inverse(&self) -> Rotation {
        let m = &self.m;
        Rotation { m: [[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]] }
    }
}

/// Rotates block centroids; dims are left as they are.
pub fn apply_frame_rotation(blocks: &[FloatBlock], r: &Rotation) -> Vec<FloatBlock> {
    blocks.iter().map(|b| FloatBlock { centroid: r.apply(b.centroid), ..*b }).collect()
}

pub fn invert_frame_rotation(blocks: &[FloatBlock], r: &Rotation) -> Vec<FloatBlock> {
    apply_frame_rotation(blocks, &r.inverse())
}
