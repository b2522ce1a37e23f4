//! Triangle/box separating-axis test and the model-wide overlap pass.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Triangle, Vec3};
use crate::lattice::{parent_key, BlockModel, LatticeSpec, ParentIndex};
use crate::mesh::Surface;
use crate::parallel;

const AXIS_EPS_SQ: f64 = 1e-18;

/// Closed triangle/box intersection by the 13-axis separating axis test.
///
/// Vertices are translated to the box centre first. The plane test uses the
/// unnormalised normal, so no division occurs anywhere.
pub fn sat_triangle_box(t: &Triangle, b: &Aabb) -> Result<bool> {
    if t.is_degenerate() {
        return Err(Error::DegenerateTriangle);
    }
    Ok(sat_unchecked(t, b))
}

/// As [`sat_triangle_box`] without the degeneracy check.
pub fn sat_unchecked(t: &Triangle, b: &Aabb) -> bool {
    let c = b.center;
    let h = b.half;
    let v = [t.v[0] - c, t.v[1] - c, t.v[2] - c];

    // box face normals
    for a in 0..3 {
        let lo = v[0][a].min(v[1][a]).min(v[2][a]);
        let hi = v[0][a].max(v[1][a]).max(v[2][a]);
        if lo > h[a] || hi < -h[a] {
            return false;
        }
    }

    // edge cross products e_i x f_j
    let f = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];
    for fj in f {
        for axis in [Vec3::new(0.0, -fj.z, fj.y), Vec3::new(fj.z, 0.0, -fj.x), Vec3::new(-fj.y, fj.x, 0.0)] {
            if axis.norm_sq() < AXIS_EPS_SQ {
                continue;
            }
            let p0 = axis.dot(v[0]);
            let p1 = axis.dot(v[1]);
            let p2 = axis.dot(v[2]);
            let r = h.x * axis.x.abs() + h.y * axis.y.abs() + h.z * axis.z.abs();
            if p0.min(p1).min(p2) > r || p0.max(p1).max(p2) < -r {
                return false;
            }
        }
    }

    // triangle plane against the box: p_min > 0 or p_max < 0 separates
    let n = f[0].cross(f[1]);
    let d = n.dot(v[0]);
    let r = h.x * n.x.abs() + h.y * n.y.abs() + h.z * n.z.abs();
    let (pmin, pmax) = (-r - d, r - d);
    !(pmin > 0.0 || pmax < 0.0)
}

/// Per-parent triangle hits of one overlap pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentOverlap {
    pub parent: ParentIndex,
    /// Sorted triangle ids per surface.
    pub per_surface: Vec<Vec<u32>>,
}

impl ParentOverlap {
    pub fn intersects(&self, s: usize) -> bool {
        self.per_surface.get(s).is_some_and(|v| !v.is_empty())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OverlapMap {
    entries: BTreeMap<(i64, i64, i64), ParentOverlap>,
}

impl OverlapMap {
    pub fn get(&self, p: ParentIndex) -> Option<&ParentOverlap> {
        self.entries.get(&parent_key(p))
    }

    pub fn contains(&self, p: ParentIndex) -> bool {
        self.entries.contains_key(&parent_key(p))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Parents in raster order.
    pub fn iter(&self) -> impl Iterator<Item = &ParentOverlap> {
        self.entries.values()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("parent_px,parent_py,parent_pz,surface_id,triangle_id\n");
        for e in self.iter() {
            for (sid, tris) in e.per_surface.iter().enumerate() {
                for t in tris {
                    let _ = writeln!(s, "{},{},{},{},{}", e.parent[0], e.parent[1], e.parent[2], sid, t);
                }
            }
        }
        s
    }
}

/// Closed box of an integer block.
pub fn block_aabb(spec: &LatticeSpec, parent: ParentIndex, cells: &crate::lattice::CellBox) -> Aabb {
    let lo = spec.box_min(parent, cells);
    Aabb::from_min_max(lo, lo + spec.box_dims(cells))
}

/// Triangles of `surface` among `candidates` that meet `b`.
pub fn sat_filter(surface: &Surface, candidates: &[u32], b: &Aabb) -> Vec<u32> {
    candidates.iter().copied().filter(|&t| sat_unchecked(&surface.mesh.triangle(t as usize), b)).collect()
}

/// Index candidates filtered by SAT, per block, unioned per parent.
pub fn detect_overlaps(model: &BlockModel, surfaces: &[Surface], threads: usize) -> OverlapMap {
    let parents = model.parents();
    let found = parallel::map_interleaved(&parents, threads, |_, (p, idx)| {
        let mut per_surface = vec![Vec::new(); surfaces.len()];
        for (sid, s) in surfaces.iter().enumerate() {
            let mut hits: Vec<u32> = Vec::new();
            for &i in idx {
                let b = block_aabb(&model.spec, *p, &model.blocks[i].cells);
                if !b.overlaps(&s.bounds()) {
                    continue;
                }
                hits.extend(sat_filter(s, &s.index.query(&b), &b));
            }
            hits.sort_unstable();
            hits.dedup();
            per_surface[sid] = hits;
        }
        let any = per_surface.iter().any(|v| !v.is_empty());
        any.then_some(ParentOverlap { parent: *p, per_surface })
    });
    let mut out = OverlapMap::default();
    for e in found.into_iter().flatten() {
        out.entries.insert(parent_key(e.parent), e);
    }
    out
}

/// All-pairs reference pass without the index.
pub fn detect_overlaps_brute(model: &BlockModel, surfaces: &[Surface]) -> OverlapMap {
    let mut out = OverlapMap::default();
    for (p, idx) in model.parents() {
        let mut per_surface = vec![Vec::new(); surfaces.len()];
        for (sid, s) in surfaces.iter().enumerate() {
            for t in 0..s.mesh.len() {
                let tri = s.mesh.triangle(t);
                if idx.iter().any(|&i| sat_unchecked(&tri, &block_aabb(&model.spec, p, &model.blocks[i].cells))) {
                    per_surface[sid].push(t as u32);
                }
            }
        }
        if per_surface.iter().any(|v| !v.is_empty()) {
            out.entries.insert(parent_key(p), ParentOverlap { parent: p, per_surface });
        }
    }
    out
}
