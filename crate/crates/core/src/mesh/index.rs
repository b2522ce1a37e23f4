use crate::geometry::{Aabb, Vec3};

use super::TriangleMesh;

const MAX_LEAF: usize = 16;
const MAX_DEPTH: usize = 32;

#[derive(Debug, Clone)]
enum Kind {
    Leaf { start: u32, len: u32 },
    Split { left: u32, right: u32 },
}

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    kind: Kind,
}

/// kD-tree over triangle AABBs.
///
/// Every triangle lives in exactly one leaf; node bounds are the union of
/// their triangles' boxes, so a query visiting all nodes whose bounds touch
/// the query box reaches every triangle whose own box touches it.
#[derive(Debug, Clone)]
pub struct MeshIndex {
    nodes: Vec<Node>,
    order: Vec<u32>,
    lo: Vec<Vec3>,
    hi: Vec<Vec3>,
}

impl MeshIndex {
    pub fn build(mesh: &TriangleMesh) -> MeshIndex {
        let n = mesh.len();
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for t in mesh.iter() {
            let b = t.aabb();
            lo.push(b.min());
            hi.push(b.max());
        }
        let mut idx = MeshIndex { nodes: Vec::new(), order: (0..n as u32).collect(), lo, hi };
        if n > 0 {
            idx.build_node(0, n, 0);
        }
        idx
    }

    fn build_node(&mut self, start: usize, end: usize, depth: usize) -> u32 {
        let mut lo = Vec3::splat(f64::INFINITY);
        let mut hi = Vec3::splat(f64::NEG_INFINITY);
        for &t in &self.order[start..end] {
            lo = lo.min(self.lo[t as usize]);
            hi = hi.max(self.hi[t as usize]);
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node { lo, hi, kind: Kind::Leaf { start: start as u32, len: (end - start) as u32 } });
        if end - start <= MAX_LEAF || depth >= MAX_DEPTH {
            return id;
        }
        let ext = hi - lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = start + (end - start) / 2;
        {
            let (blo, bhi) = (&self.lo, &self.hi);
            let key = |t: u32| blo[t as usize][axis] + bhi[t as usize][axis];
            self.order[start..end]
                .select_nth_unstable_by(mid - start, |&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        }
        let left = self.build_node(start, mid, depth + 1);
        let right = self.build_node(mid, end, depth + 1);
        self.nodes[id as usize].kind = Kind::Split { left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Triangles whose AABB meets `b` (closed), ascending, without duplicates.
    pub fn query(&self, b: &Aabb) -> Vec<u32> {
        let (qlo, qhi) = (b.min(), b.max());
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if !boxes_touch(node.lo, node.hi, qlo, qhi) {
                continue;
            }
            match node.kind {
                Kind::Split { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
                Kind::Leaf { start, len } => {
                    for &t in &self.order[start as usize..(start + len) as usize] {
                        if boxes_touch(self.lo[t as usize], self.hi[t as usize], qlo, qhi) {
                            out.push(t);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Triangles whose AABB may meet the ray `o + λd`, λ in `[lmin, +inf)`.
    /// Pass `f64::NEG_INFINITY` for the full line. Ascending.
    pub fn query_ray(&self, o: Vec3, d: Vec3, lmin: f64) -> Vec<u32> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if !ray_touches(node.lo, node.hi, o, d, lmin) {
                continue;
            }
            match node.kind {
                Kind::Split { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
                Kind::Leaf { start, len } => {
                    for &t in &self.order[start as usize..(start + len) as usize] {
                        if ray_touches(self.lo[t as usize], self.hi[t as usize], o, d, lmin) {
                            out.push(t);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[inline]
fn boxes_touch(alo: Vec3, ahi: Vec3, blo: Vec3, bhi: Vec3) -> bool {
    alo.x <= bhi.x && blo.x <= ahi.x && alo.y <= bhi.y && blo.y <= ahi.y && alo.z <= bhi.z && blo.z <= ahi.z
}

/// Slab test, padded by a relative epsilon so rounding never drops a box.
fn ray_touches(lo: Vec3, hi: Vec3, o: Vec3, d: Vec3, lmin: f64) -> bool {
    let pad = 1e-9 * (hi - lo).max_component().max(1.0);
    let mut t0 = lmin;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        let (l, h) = (lo[a] - pad, hi[a] + pad);
        if d[a] == 0.0 {
            if o[a] < l || o[a] > h {
                return false;
            }
            continue;
        }
        let inv = 1.0 / d[a];
        let (mut ta, mut tb) = ((l - o[a]) * inv, (h - o[a]) * inv);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}
