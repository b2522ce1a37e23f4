use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::geometry::Triangle;

use super::TriangleMesh;

pub const DEFAULT_TRIANGLE_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    pub max_triangle_area: f64,
    pub max_edge_length: f64,
}

impl RefineParams {
    pub fn new(max_triangle_area: f64, max_edge_length: f64) -> Result<RefineParams> {
        if !(max_triangle_area > 0.0 && max_edge_length > 0.0) {
            return Err(Error::InvalidMesh("refinement thresholds must be positive".into()));
        }
        Ok(RefineParams { max_triangle_area, max_edge_length })
    }

    fn violated(&self, t: &Triangle) -> bool {
        t.area() > self.max_triangle_area || t.edge_lengths().iter().any(|&e| e > self.max_edge_length)
    }
}

pub fn refine_mesh(mesh: &TriangleMesh, p: RefineParams) -> Result<TriangleMesh> {
    refine_mesh_capped(mesh, p, DEFAULT_TRIANGLE_CAP)
}

fn key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Longest-edge bisection. Every triangle sharing a bisected edge is split
/// at the same midpoint so no hanging vertex appears.
pub fn refine_mesh_capped(mesh: &TriangleMesh, p: RefineParams, cap: usize) -> Result<TriangleMesh> {
    let mut verts = mesh.vertices.clone();
    let mut tris: Vec<Option<[u32; 3]>> = mesh.triangles.iter().copied().map(Some).collect();
    let mut live = tris.len();
    let mut edges: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (i, t) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            edges.entry(key(t[k], t[(k + 1) % 3])).or_default().push(i);
        }
    }
    let tri_of = |verts: &[crate::geometry::Vec3], t: [u32; 3]| {
        Triangle::new(verts[t[0] as usize], verts[t[1] as usize], verts[t[2] as usize])
    };
    let mut queue: VecDeque<usize> = (0..tris.len()).collect();
    while let Some(i) = queue.pop_front() {
        let Some(t) = tris[i] else { continue };
        let geo = tri_of(&verts, t);
        if !p.violated(&geo) {
            continue;
        }
        let len = geo.edge_lengths();
        let mut k = 0;
        for j in 1..3 {
            if len[j] > len[k] {
                k = j;
            }
        }
        let (a, b) = (t[k], t[(k + 1) % 3]);
        let m = verts.len() as u32;
        verts.push((verts[a as usize] + verts[b as usize]) * 0.5);
        let sharers = edges.remove(&key(a, b)).unwrap_or_default();
        for s in sharers {
            let Some(st) = tris[s].take() else { continue };
            for e in 0..3 {
                let ek = key(st[e], st[(e + 1) % 3]);
                if let Some(list) = edges.get_mut(&ek) {
                    list.retain(|&x| x != s);
                }
            }
            // rotate so the shared edge is (st[0], st[1])
            let r = (0..3).find(|&e| key(st[e], st[(e + 1) % 3]) == key(a, b)).expect("shared edge");
            let (u, v, w) = (st[r], st[(r + 1) % 3], st[(r + 2) % 3]);
            for nt in [[u, m, w], [m, v, w]] {
                let id = tris.len();
                tris.push(Some(nt));
                for e in 0..3 {
                    edges.entry(key(nt[e], nt[(e + 1) % 3])).or_default().push(id);
                }
                queue.push_back(id);
            }
            live += 1;
        }
        if live > cap {
            return Err(Error::RefinementOverflow { cap });
        }
    }
    let triangles = tris.into_iter().flatten().collect();
    Ok(TriangleMesh { name: mesh.name.clone(), vertices: verts, triangles })
}
