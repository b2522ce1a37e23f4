//! Triangle meshes, integrity checks, refinement and the candidate index.

mod index;
pub mod io;
mod refine;

pub use index::MeshIndex;
pub use refine::{refine_mesh, refine_mesh_capped, RefineParams, DEFAULT_TRIANGLE_CAP};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Triangle, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub name: String,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntegrityReport {
    /// Indices into the input triangle list.
    pub removed: Vec<usize>,
}

impl TriangleMesh {
    pub fn new(name: impl Into<String>, vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<TriangleMesh> {
        if let Some(v) = vertices.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {v:?}")));
        }
        let n = vertices.len() as u64;
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&k| k as u64 >= n) {
                return Err(Error::InvalidMesh(format!("triangle {i} indexes past {n} vertices")));
            }
        }
        Ok(TriangleMesh { name: name.into(), vertices, triangles })
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn triangle(&self, i: usize) -> Triangle {
        let [a, b, c] = self.triangles[i];
        Triangle::new(self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize])
    }

    pub fn iter(&self) -> impl Iterator<Item = Triangle> + '_ {
        (0..self.len()).map(|i| self.triangle(i))
    }

    pub fn aabb(&self) -> Option<Aabb> {
        self.iter().map(|t| t.aabb()).reduce(|a, b| a.union(&b))
    }

    pub fn total_area(&self) -> f64 {
        self.iter().map(|t| t.area()).sum()
    }

    pub fn mean_edge_length(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let s: f64 = self.iter().map(|t| t.edge_lengths().iter().sum::<f64>()).sum();
        s / (3 * self.len()) as f64
    }

    /// Area-weighted mean of triangle normals, normalised.
    pub fn mean_orientation(&self) -> Option<Vec3> {
        let mut acc = Vec3::ZERO;
        for t in self.iter() {
            acc += t.normal();
        }
        acc.normalized()
    }

    pub fn transformed(&self, f: impl Fn(Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            name: self.name.clone(),
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }
}

/// Drops triangles with a zero normal. Orphaned vertices are kept.
pub fn integrity_check(mesh: &TriangleMesh) -> Result<(TriangleMesh, IntegrityReport)> {
    let mut report = IntegrityReport::default();
    let mut kept = Vec::with_capacity(mesh.len());
    for (i, tri) in mesh.triangles.iter().enumerate() {
        if mesh.triangle(i).is_degenerate() {
            report.removed.push(i);
        } else {
            kept.push(*tri);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let out = TriangleMesh { name: mesh.name.clone(), vertices: mesh.vertices.clone(), triangles: kept };
    Ok((out, report))
}

/// A checked mesh bundled with its index.
#[derive(Debug, Clone)]
pub struct Surface {
    pub mesh: TriangleMesh,
    pub index: MeshIndex,
    bounds: Aabb,
}

impl Surface {
    pub fn new(mesh: TriangleMesh) -> Result<Surface> {
        let (mesh, _) = integrity_check(&mesh)?;
        let index = MeshIndex::build(&mesh);
        let bounds = mesh.aabb().ok_or(Error::EmptyMesh)?;
        Ok(Surface { mesh, index, bounds })
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }
}
