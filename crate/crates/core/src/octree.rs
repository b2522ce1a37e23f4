//! Dyadic octree decomposition of a labelled parent and intra-scale merging
//! inside each octant.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::{CellBox, Grid};

/// Face quads, tried first, in this order.
pub const QUADS: [[u8; 4]; 6] = [[0, 1, 2, 3], [4, 5, 6, 7], [0, 1, 4, 5], [2, 3, 6, 7], [0, 2, 4, 6], [1, 3, 5, 7]];

/// Edge pairs, tried after every quad.
pub const PAIRS: [[u8; 2]; 12] =
    [[0, 1], [0, 2], [1, 3], [2, 3], [4, 5], [4, 6], [5, 7], [6, 7], [2, 6], [3, 7], [0, 4], [1, 5]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OctLeaf {
    pub cells: CellBox,
    pub label: i64,
    pub depth: u32,
    /// Position inside the parent octant, x + 2y + 4z. Zero for the root.
    pub child: u8,
}

impl OctLeaf {
    /// Min cell of the octant this leaf belongs to.
    pub fn octant_origin(&self) -> [u32; 3] {
        let s = self.cells.size[0];
        [0, 1, 2].map(|a| self.cells.min[a] - ((self.child >> a) & 1) as u32 * s)
    }
}

fn check_dims(k: [u32; 3], depth: u32) -> Result<()> {
    let want = 1u64 << depth.min(31);
    if depth > 31 || k.iter().any(|&c| c as u64 != want) {
        return Err(Error::NonDyadicDims { dims: k, depth });
    }
    Ok(())
}

/// Splits while an octant carries more than one label, up to `depth` levels.
/// `labels` is raster-indexed over the parent's cells, which must number
/// exactly 2^depth per axis.
pub fn octree_decompose(labels: &[i64], k: [u32; 3], depth: u32) -> Result<Vec<OctLeaf>> {
    check_dims(k, depth)?;
    let grid = Grid::new(k);
    assert_eq!(labels.len(), grid.len(), "one label per cell");
    // homogeneity per level, finest first; level d has 2^d nodes per axis
    let mut levels: Vec<Vec<Option<i64>>> = vec![Vec::new(); depth as usize + 1];
    levels[depth as usize] = labels.iter().map(|&l| Some(l)).collect();
    for d in (0..depth as usize).rev() {
        let n = 1usize << d;
        let fine = &levels[d + 1];
        let mut coarse = vec![None; n * n * n];
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    let mut lab: Option<Option<i64>> = None;
                    for c in 0..8 {
                        let (cx, cy, cz) = (2 * x + (c & 1), 2 * y + (c >> 1 & 1), 2 * z + (c >> 2 & 1));
                        let v = fine[(cz * 2 * n + cy) * 2 * n + cx];
                        lab = Some(match lab {
                            None => v,
                            Some(prev) if prev == v => prev,
                            Some(_) => None,
                        });
                    }
                    coarse[(z * n + y) * n + x] = lab.flatten();
                }
            }
        }
        levels[d] = coarse;
    }
    let mut out = Vec::new();
    let mut stack = vec![(0u32, [0u32; 3], 0u8)];
    while let Some((d, node, child)) = stack.pop() {
        let n = 1usize << d;
        let size = 1u32 << (depth - d);
        let idx = (node[2] as usize * n + node[1] as usize) * n + node[0] as usize;
        if let Some(l) = levels[d as usize][idx] {
            let min = [node[0] * size, node[1] * size, node[2] * size];
            out.push(OctLeaf { cells: CellBox::new(min, [size; 3]), label: l, depth: d, child });
            continue;
        }
        for c in (0..8u8).rev() {
            let sub = [0, 1, 2].map(|a| 2 * node[a] + (c >> a & 1) as u32);
            stack.push((d + 1, sub, c));
        }
    }
    Ok(out)
}

/// Merges same-label leaves of one octant into face quads, then edge pairs.
/// Never crosses octants or scales.
pub fn octree_intra_scale_merge(leaves: &[OctLeaf]) -> Result<Vec<(CellBox, i64)>> {
    let mut groups: BTreeMap<(u32, [u32; 3]), [Option<OctLeaf>; 8]> = BTreeMap::new();
    let mut out = Vec::new();
    for l in leaves {
        if l.depth == 0 {
            out.push((l.cells, l.label));
            continue;
        }
        let g = groups.entry((l.depth, l.octant_origin())).or_insert([None; 8]);
        g[l.child as usize] = Some(*l);
    }
    for (_, slots) in groups {
        let present: Vec<&OctLeaf> = slots.iter().flatten().collect();
        if present.len() == 8 && present.iter().all(|l| l.label == present[0].label) {
            return Err(Error::HomogeneousOctant);
        }
        let mut free: [Option<i64>; 8] = slots.map(|s| s.map(|l| l.label));
        let size = present[0].cells.size[0];
        let origin = present[0].octant_origin();
        let span = |members: &[u8]| {
            let mut lo = [u32::MAX; 3];
            let mut hi = [0u32; 3];
            for &c in members {
                for a in 0..3 {
                    let m = origin[a] + (c >> a & 1) as u32 * size;
                    lo[a] = lo[a].min(m);
                    hi[a] = hi[a].max(m + size);
                }
            }
            CellBox::new(lo, [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]])
        };
        loop {
            let mut merged = false;
            let candidates = QUADS.iter().map(|q| &q[..]).chain(PAIRS.iter().map(|p| &p[..]));
            for cand in candidates {
                let Some(l) = free[cand[0] as usize] else { continue };
                if cand.iter().all(|&c| free[c as usize] == Some(l)) {
                    out.push((span(cand), l));
                    for &c in cand {
                        free[c as usize] = None;
                    }
                    merged = true;
                    break;
                }
            }
            if !merged {
                break;
            }
        }
        for (c, f) in free.iter().enumerate() {
            if let Some(l) = f {
                out.push((span(&[c as u8]), *l));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_parent_is_one_leaf() {
        let leaves = octree_decompose(&vec![3; 512], [8; 3], 3).unwrap();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].cells, CellBox::new([0; 3], [8; 3]));
    }

    #[test]
    fn mid_plane_split() {
        let labels: Vec<i64> = (0..8).map(|i| if i >= 4 { 1 } else { 2 }).collect();
        let leaves = octree_decompose(&labels, [2; 3], 1).unwrap();
        assert_eq!(leaves.len(), 8);
        let merged = octree_intra_scale_merge(&leaves).unwrap();
        assert_eq!(merged.len(), 2);
        assert!(merged.contains(&(CellBox::new([0, 0, 1], [2, 2, 1]), 1)));
        assert!(merged.contains(&(CellBox::new([0, 0, 0], [2, 2, 1]), 2)));
    }

    #[test]
    fn checkerboard_does_not_merge() {
        let labels: Vec<i64> = (0..8).map(|i: i64| (i & 1) ^ (i >> 1 & 1) ^ (i >> 2 & 1)).collect();
        let leaves = octree_decompose(&labels, [2; 3], 1).unwrap();
        assert_eq!(octree_intra_scale_merge(&leaves).unwrap().len(), 8);
    }

    #[test]
    fn uniform_octant_rejected() {
        let leaves: Vec<OctLeaf> = (0..8u8)
            .map(|c| OctLeaf {
                cells: CellBox::new([(c & 1) as u32, (c >> 1 & 1) as u32, (c >> 2 & 1) as u32], [1; 3]),
                label: 5,
                depth: 1,
                child: c,
            })
            .collect();
        assert_eq!(octree_intra_scale_merge(&leaves), Err(Error::HomogeneousOctant));
    }

    #[test]
    fn non_dyadic_rejected() {
        assert!(matches!(octree_decompose(&vec![0; 6 * 8 * 8], [6, 8, 8], 3), Err(Error::NonDyadicDims { .. })));
        assert!(matches!(octree_decompose(&vec![0; 512], [8; 3], 4), Err(Error::NonDyadicDims { .. })));
    }

    #[test]
    fn leaf_sizes_follow_depth() {
        let mut labels = vec![0i64; 64];
        labels[0] = 1;
        let leaves = octree_decompose(&labels, [4; 3], 2).unwrap();
        for l in &leaves {
            assert_eq!(l.cells.size, [4 >> l.depth; 3]);
        }
        assert_eq!(leaves.len(), 15);
    }
}
