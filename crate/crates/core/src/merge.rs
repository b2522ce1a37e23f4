//! Coordinate-ascent block merging.
//!
//! [`coalesce_binary`] works on a boolean occupancy map and ignores input
//! boundaries (dissolved convention). [`coalesce_persistent`] works on a map
//! of block indices and only ever absorbs whole input blocks (persistent
//! convention). [`merge_class`] runs either one under several scan patterns
//! and keeps the best result.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::lattice::{CellBox, Grid, ParentIndex};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Convention {
    Persistent,
    Dissolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    MinBlockCount,
    MinAspectRatio,
}

/// Signed axis order; bit `a` set means axis `a` is scanned in reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScanPattern(u8);

impl ScanPattern {
    pub const STANDARD: ScanPattern = ScanPattern(0);

    pub fn new(bits: u8) -> Option<ScanPattern> {
        (bits < 8).then_some(ScanPattern(bits))
    }

    pub fn all() -> Vec<ScanPattern> {
        (0..8).map(ScanPattern).collect()
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn reversed(self, axis: usize) -> bool {
        self.0 >> axis & 1 == 1
    }

    /// Signs per axis, +1 forward, -1 reversed.
    pub fn signs(self) -> [i8; 3] {
        [0, 1, 2].map(|a| if self.reversed(a) { -1 } else { 1 })
    }

    pub fn map_cell(self, k: [u32; 3], n: [u32; 3]) -> [u32; 3] {
        [0, 1, 2].map(|a| if self.reversed(a) { k[a] - 1 - n[a] } else { n[a] })
    }

    /// Reflection of a box; its own inverse.
    pub fn map_box(self, k: [u32; 3], b: &CellBox) -> CellBox {
        let mut min = b.min;
        for (a, m) in min.iter_mut().enumerate() {
            if self.reversed(a) {
                *m = k[a] - b.min[a] - b.size[a];
            }
        }
        CellBox { min, size: b.size }
    }

    pub fn map_boxes(self, k: [u32; 3], bs: &[CellBox]) -> Vec<CellBox> {
        bs.iter().map(|b| self.map_box(k, b)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeParams {
    /// Uninterrupted growth cycles per seed; `None` is unlimited.
    pub token: Option<u32>,
    /// Largest merged size in cells; `None` means the parent's cell counts.
    pub max_dims: Option<[u32; 3]>,
    pub convention: Convention,
    pub scans: Vec<ScanPattern>,
    pub objective: Objective,
}

impl Default for MergeParams {
    fn default() -> MergeParams {
        MergeParams {
            token: None,
            max_dims: None,
            convention: Convention::Dissolved,
            scans: ScanPattern::all(),
            objective: Objective::MinAspectRatio,
        }
    }
}

impl MergeParams {
    pub fn limits(&self, k: [u32; 3]) -> Result<Limits> {
        let max = self.max_dims.unwrap_or(k);
        if (0..3).any(|a| max[a] == 0 || max[a] > k[a]) {
            return Err(Error::InvalidLattice(format!("max merge dims {max:?} outside 1..={k:?}")));
        }
        if self.token == Some(0) {
            return Err(Error::InvalidLattice("token life span must be positive".into()));
        }
        if self.scans.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Limits { token: self.token, max })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub token: Option<u32>,
    pub max: [u32; 3],
}

impl Limits {
    pub fn unbounded(k: [u32; 3]) -> Limits {
        Limits { token: None, max: k }
    }
}

/// Dense per-cell map of a parent: 0/1 in binary mode, block index or −1
/// in index mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyMap {
    pub grid: Grid,
    pub values: Vec<i32>,
}

impl OccupancyMap {
    pub fn new(k: [u32; 3], fill: i32) -> OccupancyMap {
        let grid = Grid::new(k);
        OccupancyMap { grid, values: vec![fill; grid.len()] }
    }

    pub fn dims(&self) -> [u32; 3] {
        self.grid.k
    }

    #[inline]
    pub fn get(&self, n: [u32; 3]) -> i32 {
        self.values[self.grid.raster(n)]
    }

    #[inline]
    pub fn set(&mut self, n: [u32; 3], v: i32) {
        let i = self.grid.raster(n);
        self.values[i] = v;
    }

    pub fn fill_box(&mut self, b: &CellBox, v: i32) {
        for c in b.cells() {
            self.set(c, v);
        }
    }

    pub fn binary(k: [u32; 3], boxes: &[CellBox]) -> OccupancyMap {
        let mut m = OccupancyMap::new(k, 0);
        for b in boxes {
            m.fill_box(b, 1);
        }
        m
    }

    pub fn indexed(k: [u32; 3], boxes: &[CellBox]) -> OccupancyMap {
        let mut m = OccupancyMap::new(k, -1);
        for (i, b) in boxes.iter().enumerate() {
            m.fill_box(b, i as i32);
        }
        m
    }

    fn all_eq(&self, lo: [u32; 3], hi: [u32; 3], v: i32) -> bool {
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                let row = self.grid.raster([lo[0], y, z]);
                if self.values[row..row + (hi[0] - lo[0]) as usize].iter().any(|&c| c != v) {
                    return false;
                }
            }
        }
        true
    }
}

/// Count of cells equal to `v` in the box `[n, n + k)`.
pub fn pool(theta: &OccupancyMap, v: i32, n: [usize; 3], k: [usize; 3]) -> Result<usize> {
    let dims = theta.dims().map(|d| d as usize);
    if (0..3).any(|a| n[a] + k[a] > dims[a]) {
        return Err(Error::OutOfBounds { n, k, dims });
    }
    let mut c = 0;
    for z in n[2]..n[2] + k[2] {
        for y in n[1]..n[1] + k[1] {
            for x in n[0]..n[0] + k[0] {
                c += (theta.get([x as u32, y as u32, z as u32]) == v) as usize;
            }
        }
    }
    Ok(c)
}

/// Merged box plus the growth cycles it consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Traced {
    pub cells: CellBox,
    pub cycles: u32,
}

/// Dissolved-convention merge of the active (1) cells; consumes the map.
pub fn coalesce_binary(theta: &mut OccupancyMap, limits: Limits) -> Vec<CellBox> {
    coalesce_binary_traced(theta, limits).into_iter().map(|t| t.cells).collect()
}

pub fn coalesce_binary_traced(theta: &mut OccupancyMap, limits: Limits) -> Vec<Traced> {
    let k = theta.dims();
    let n_occupant = theta.values.iter().filter(|&&v| v == 1).count() as u64;
    let mut count = 0u64;
    let mut cursor = 0usize;
    let mut out = Vec::new();
    loop {
        // seed: first active cell in raster order
        while cursor < theta.values.len() && theta.values[cursor] != 1 {
            cursor += 1;
        }
        if cursor == theta.values.len() {
            break;
        }
        let n = theta.grid.subscript(cursor);
        if n_occupant - count == 1 {
            let b = CellBox::unit(n);
            theta.fill_box(&b, 0);
            out.push(Traced { cells: b, cycles: 0 });
            break;
        }
        let mut s = [1u32; 3];
        let mut left = limits.token;
        let mut cycles = 0;
        loop {
            let mut barriers = 0;
            for a in 0..3 {
                let mut d = s;
                d[a] = (s[a] + 1).min(k[a] - n[a]);
                let fits = (0..3).all(|j| d[j] <= limits.max[j]);
                let ok = fits && d[a] > s[a] && {
                    // the box n..n+s is active already; check the new slab
                    let mut lo = n;
                    lo[a] += s[a];
                    let hi = [n[0] + d[0], n[1] + d[1], n[2] + d[2]];
                    theta.all_eq(lo, hi, 1)
                };
                if ok {
                    s = d;
                } else {
                    barriers += 1;
                }
            }
            cycles += 1;
            if let Some(t) = left.as_mut() {
                *t -= 1;
            }
            let vol = s.iter().map(|&v| v as u64).product::<u64>();
            if count + vol == n_occupant || barriers == 3 || left == Some(0) {
                break;
            }
        }
        let b = CellBox { min: n, size: s };
        theta.fill_box(&b, 0);
        count += b.volume();
        out.push(Traced { cells: b, cycles });
    }
    out
}

/// Mutable merge state of one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedBlockRecord {
    pub min: [u32; 3],
    pub size: [u32; 3],
    pub label: i64,
    pub prev_cells: u64,
    pub curr_cells: u64,
    pub subsumed: bool,
    /// Position in the input list; final sort tie-break.
    pub ordinal: usize,
}

impl MergedBlockRecord {
    pub fn new(ordinal: usize, b: &CellBox, label: i64) -> MergedBlockRecord {
        MergedBlockRecord {
            min: b.min,
            size: b.size,
            label,
            prev_cells: 0,
            curr_cells: b.volume(),
            subsumed: false,
            ordinal,
        }
    }

    pub fn cells(&self) -> CellBox {
        CellBox { min: self.min, size: self.size }
    }
}

/// Tries to annex the one-cell-thick delta region `[n0, n1)` along `axis`
/// for block `b`. On success the absorbed blocks are marked subsumed,
/// repainted to `b`, and `b` grows by their common length.
pub fn feasible_cell_expansion(
    theta: &mut OccupancyMap,
    recs: &mut [MergedBlockRecord],
    b: usize,
    n0: [u32; 3],
    n1: [u32; 3],
    axis: usize,
    max: [u32; 3],
) -> bool {
    let k = theta.dims();
    if (0..3).any(|a| n0[a] >= k[a]) {
        return false;
    }
    let mut set = BTreeSet::new();
    for z in n0[2]..n1[2] {
        for y in n0[1]..n1[1] {
            for x in n0[0]..n1[0] {
                let v = theta.get([x, y, z]);
                if v == -1 {
                    return false;
                }
                set.insert(v as usize);
            }
        }
    }
    let mut lens = set.iter().map(|&i| recs[i].size[axis]);
    let Some(n_extend) = lens.next() else { return false };
    if lens.any(|l| l != n_extend) {
        return false;
    }
    let live: Vec<usize> = set.into_iter().filter(|&i| !recs[i].subsumed).collect();
    let mut grown = recs[b].size;
    grown[axis] += n_extend;
    if (0..3).any(|a| grown[a] > max[a]) {
        return false;
    }
    let n_cells: u64 = live.iter().map(|&i| recs[i].curr_cells).sum();
    let cross: u64 = (0..3).filter(|&a| a != axis).map(|a| recs[b].size[a] as u64).product();
    if n_cells != n_extend as u64 * cross {
        return false;
    }
    let mut gained = 0;
    for &i in &live {
        recs[i].subsumed = true;
        gained += recs[i].curr_cells;
        let cells = recs[i].cells();
        theta.fill_box(&cells, b as i32);
    }
    recs[b].prev_cells = recs[b].curr_cells;
    recs[b].curr_cells += gained;
    recs[b].size = grown;
    true
}

/// Persistent-convention merge. Returns the surviving records.
pub fn coalesce_persistent(
    mut recs: Vec<MergedBlockRecord>,
    theta: &mut OccupancyMap,
    limits: Limits,
) -> Vec<MergedBlockRecord> {
    let k = theta.dims();
    let grid = theta.grid;
    loop {
        let mut order: Vec<usize> = (0..recs.len()).filter(|&i| !recs[i].subsumed).collect();
        order.sort_by_key(|&i| (recs[i].curr_cells, grid.raster(recs[i].min), recs[i].ordinal));
        if order.len() <= 1 {
            break;
        }
        for &b in &order {
            recs[b].prev_cells = recs[b].curr_cells;
            if recs[b].subsumed {
                continue;
            }
            let n = recs[b].min;
            let mut left = limits.token;
            loop {
                let mut barriers = 0;
                for a in 0..3 {
                    let s = recs[b].size;
                    let d = (s[a] + 1).min(k[a] - n[a]);
                    let mut n0 = n;
                    n0[a] += s[a];
                    let mut n1 = [n[0] + s[0], n[1] + s[1], n[2] + s[2]];
                    n1[a] = n[a] + d;
                    if !(d > s[a] && feasible_cell_expansion(theta, &mut recs, b, n0, n1, a, limits.max)) {
                        barriers += 1;
                    }
                }
                if let Some(t) = left.as_mut() {
                    *t -= 1;
                }
                let s = recs[b].size;
                let full = (0..3).all(|a| s[a] == k[a] - n[a]);
                if full || barriers == 3 || left == Some(0) {
                    break;
                }
            }
        }
        if !recs.iter().any(|r| !r.subsumed && r.curr_cells != r.prev_cells) {
            break;
        }
    }
    recs.retain(|r| !r.subsumed);
    recs
}

/// Σ v·(maxΔ/minΔ) / Σ v with real extents.
pub fn aspect_ratio_objective(blocks: &[CellBox], min_dims: Vec3) -> Result<f64> {
    if blocks.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for b in blocks {
        let v = b.volume() as f64;
        num += v * b.aspect_ratio(min_dims);
        den += v;
    }
    Ok(num / den)
}

/// One class merged under the best scan pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMerge {
    pub blocks: Vec<CellBox>,
    pub aspect: f64,
    pub pattern: ScanPattern,
}

impl ClassMerge {
    fn score(&self, obj: Objective) -> (f64, f64) {
        match obj {
            Objective::MinAspectRatio => (self.aspect, 0.0),
            Objective::MinBlockCount => (self.blocks.len() as f64, self.aspect),
        }
    }

    pub fn objective(&self, obj: Objective) -> f64 {
        self.score(obj).0
    }
}

/// Merges under one scan pattern, result registered in the original frame.
pub fn merge_with_pattern(
    inputs: &[CellBox],
    k: [u32; 3],
    convention: Convention,
    limits: Limits,
    pattern: ScanPattern,
) -> Vec<CellBox> {
    let moved = pattern.map_boxes(k, inputs);
    let merged = match convention {
        Convention::Dissolved => {
            let mut theta = OccupancyMap::binary(k, &moved);
            coalesce_binary(&mut theta, limits)
        }
        Convention::Persistent => {
            let mut theta = OccupancyMap::indexed(k, &moved);
            let recs = moved.iter().enumerate().map(|(i, b)| MergedBlockRecord::new(i, b, 0)).collect();
            coalesce_persistent(recs, &mut theta, limits).iter().map(|r| r.cells()).collect()
        }
    };
    pattern.map_boxes(k, &merged)
}

/// Argmin over the configured scan patterns; ties keep the earlier pattern.
pub fn merge_class(inputs: &[CellBox], k: [u32; 3], min_dims: Vec3, params: &MergeParams) -> Result<ClassMerge> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let limits = params.limits(k)?;
    let mut best: Option<ClassMerge> = None;
    for &p in &params.scans {
        let blocks = merge_with_pattern(inputs, k, params.convention, limits, p);
        let aspect = aspect_ratio_objective(&blocks, min_dims)?;
        let cand = ClassMerge { blocks, aspect, pattern: p };
        let better = match &best {
            None => true,
            Some(b) => cand.score(params.objective) < b.score(params.objective),
        };
        if better {
            best = Some(cand);
        }
    }
    Ok(best.expect("at least one scan"))
}

/// Input blocks of one class inside one parent.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassInput {
    pub label: i64,
    pub boxes: Vec<CellBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParentInput {
    pub parent: ParentIndex,
    pub classes: Vec<ClassInput>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParentMerge {
    pub parent: ParentIndex,
    /// One entry per input class, same order.
    pub classes: Vec<(i64, ClassMerge)>,
}

/// Per-parent, per-class multi-scan merge. Workers take parents
/// `t, t + n, ...`; output is in input order whatever the thread count.
pub fn merge_driver(
    k: [u32; 3],
    min_dims: Vec3,
    parents: &[ParentInput],
    params: &MergeParams,
    threads: usize,
) -> Result<Vec<ParentMerge>> {
    params.limits(k)?;
    parallel::try_map_interleaved(parents, threads, |_, p| {
        let mut classes = Vec::with_capacity(p.classes.len());
        for c in &p.classes {
            let m = merge_class(&c.boxes, k, min_dims, params).map_err(|e| e.in_parent(p.parent))?;
            classes.push((c.label, m));
        }
        Ok(ParentMerge { parent: p.parent, classes })
    })
}
