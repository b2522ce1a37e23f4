//! Which side of a surface a point lies on.
//!
//! The primary method casts a ray along the surface's positive direction and
//! counts crossings: even means above (or outside a closed surface), odd
//! means below (inside). The nearest-triangle projection method is kept for
//! comparison only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Triangle, Vec3};
use crate::intersection::{block_aabb, sat_unchecked, OverlapMap};
use crate::lattice::{CellBox, LatticeSpec, ParentIndex};
use crate::mesh::{Surface, TriangleMesh};

const PARALLEL_EPS: f64 = 1e-12;
const ON_PLANE_EPS: f64 = 1e-9;
const EDGE_EPS: f64 = 1e-9;
const DEDUP_REL: f64 = 1e-7;
const MAX_RETRIES: u32 = 8;
const MAX_TILT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3) -> Result<Ray> {
        let dir = dir.normalized().ok_or(Error::NonFinite)?;
        Ok(Ray { origin, dir })
    }

    /// Segment form `p0 -> p1`.
    pub fn through(p0: Vec3, p1: Vec3) -> Result<Ray> {
        Ray::new(p0, p1 - p0)
    }

    pub fn at(&self, lambda: f64) -> Vec3 {
        self.origin + self.dir * lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub lambda: f64,
    pub s: f64,
    pub t: f64,
    pub point: Vec3,
    pub triangle: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayOutcome {
    Miss,
    Hit(RayHit),
    /// The ray lies in the triangle's plane.
    ParallelOnPlane,
}

enum Raw {
    Parallel,
    OnPlane,
    Behind,
    Plane { lambda: f64, s: f64, t: f64, point: Vec3 },
}

fn raw_intersect(ray: &Ray, tri: &Triangle) -> Result<Raw> {
    let [va, vb, vc] = tri.v;
    let u = vb - va;
    let v = vc - va;
    let n = u.cross(v);
    let nn = n.norm();
    if nn == 0.0 {
        return Err(Error::DegenerateTriangle);
    }
    let denom = n.dot(ray.dir);
    let num = n.dot(va - ray.origin);
    if denom.abs() <= PARALLEL_EPS * nn {
        let scale = (va - ray.origin).norm().max(1.0);
        return Ok(if num.abs() <= ON_PLANE_EPS * nn * scale { Raw::OnPlane } else { Raw::Parallel });
    }
    let lambda = num / denom;
    if lambda < 0.0 {
        return Ok(Raw::Behind);
    }
    let point = ray.at(lambda);
    let w = point - va;
    let (uu, vv, uv) = (u.dot(u), v.dot(v), u.dot(v));
    let (wu, wv) = (w.dot(u), w.dot(v));
    let delta = uv * uv - uu * vv;
    if delta == 0.0 {
        return Err(Error::DegenerateTriangle);
    }
    let s = (uv * wv - vv * wu) / delta;
    let t = (uv * wu - uu * wv) / delta;
    Ok(Raw::Plane { lambda, s, t, point })
}

/// Plane intersection followed by barycentric containment.
pub fn ray_triangle(ray: &Ray, tri: &Triangle, id: u32) -> Result<RayOutcome> {
    Ok(match raw_intersect(ray, tri)? {
        Raw::Parallel | Raw::Behind => RayOutcome::Miss,
        Raw::OnPlane => RayOutcome::ParallelOnPlane,
        Raw::Plane { lambda, s, t, point } => {
            if s >= 0.0 && t >= 0.0 && s + t <= 1.0 {
                RayOutcome::Hit(RayHit { lambda, s, t, point, triangle: id })
            } else {
                RayOutcome::Miss
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// Even crossing count: above an open surface, outside a closed one.
    Above,
    /// Odd crossing count: below an open surface, inside a closed one.
    Below,
}

impl Side {
    pub fn sigma(self) -> i8 {
        match self {
            Side::Above => 1,
            Side::Below => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parity {
    pub count: usize,
    pub side: Side,
    /// The line through the point meets no triangle box at all.
    pub outside_support: bool,
    /// Re-casts performed.
    pub retries: u32,
}

impl Parity {
    pub fn inside(&self) -> bool {
        self.side == Side::Below
    }
}

fn perpendicular_basis(d: Vec3) -> (Vec3, Vec3) {
    let helper = if d.x.abs() <= d.y.abs() && d.x.abs() <= d.z.abs() {
        Vec3::X
    } else if d.y.abs() <= d.z.abs() {
        Vec3::Y
    } else {
        Vec3::Z
    };
    let p1 = d.cross(helper).normalized().expect("non-parallel helper");
    (p1, d.cross(p1))
}

enum Attempt {
    Count(usize),
    Retry,
}

fn attempt(point: Vec3, dir: Vec3, surface: &Surface, tol: f64) -> Result<Attempt> {
    let ray = Ray { origin: point, dir };
    let mut hits: Vec<Vec3> = Vec::new();
    for id in surface.index.query_ray(point, dir, 0.0) {
        let tri = surface.mesh.triangle(id as usize);
        match raw_intersect(&ray, &tri)? {
            Raw::Parallel | Raw::Behind => {}
            Raw::OnPlane => return Ok(Attempt::Retry),
            Raw::Plane { s, t, point: p, .. } => {
                let r = 1.0 - s - t;
                let inside = s >= 0.0 && t >= 0.0 && r >= 0.0;
                let near =
                    s > -EDGE_EPS && t > -EDGE_EPS && r > -EDGE_EPS && (s < EDGE_EPS || t < EDGE_EPS || r < EDGE_EPS);
                if near {
                    return Ok(Attempt::Retry);
                }
                if inside && !hits.iter().any(|h| (*h - p).norm() <= tol) {
                    hits.push(p);
                }
            }
        }
    }
    Ok(Attempt::Count(hits.len()))
}

/// Parity ray cast from `point` along `direction`.
///
/// Grazing and in-plane rays are re-cast with small deterministic tilts
/// drawn from `seed`.
pub fn cast_parity(point: Vec3, surface: &Surface, direction: Vec3, seed: u64) -> Result<Parity> {
    let base = direction.normalized().ok_or(Error::NonFinite)?;
    let tol = DEDUP_REL * surface.bounds().diagonal();
    let mut rng: Option<ChaCha8Rng> = None;
    let mut dir = base;
    for retry in 0..=MAX_RETRIES {
        if let Attempt::Count(count) = attempt(point, dir, surface, tol)? {
            let side = if count % 2 == 0 { Side::Above } else { Side::Below };
            let outside_support = count == 0 && surface.index.query_ray(point, base, f64::NEG_INFINITY).is_empty();
            return Ok(Parity { count, side, outside_support, retries: retry });
        }
        let rng = rng.get_or_insert_with(|| ChaCha8Rng::seed_from_u64(seed));
        let (p1, p2) = perpendicular_basis(base);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let theta: f64 = MAX_TILT * (1.0 - rng.gen::<f64>());
        let (st, ct) = theta.sin_cos();
        dir = (base * ct + (p1 * phi.cos() + p2 * phi.sin()) * st).normalized().expect("unit");
    }
    Err(Error::UnresolvableRay { point: point.to_array(), retries: MAX_RETRIES })
}

/// Legacy sign from the nearest triangle by centroid distance:
/// σ = −sign((c_t − c_b)·n_t) × polarity.
pub fn projection_sign(block_centroid: Vec3, surface: &TriangleMesh, polarity: i8) -> Result<i8> {
    let mut best: Option<(f64, usize)> = None;
    for (i, t) in surface.iter().enumerate() {
        let d = (t.centroid() - block_centroid).norm_sq();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    let (_, i) = best.ok_or(Error::EmptySurface)?;
    let t = surface.triangle(i);
    let dot = (t.centroid() - block_centroid).dot(t.normal());
    let s = if dot > 0.0 {
        -1
    } else if dot < 0.0 {
        1
    } else {
        0
    };
    Ok(s * polarity.signum())
}

/// Polarity of a mesh against a declared positive direction.
pub fn surface_polarity(surface: &TriangleMesh, positive: Vec3) -> i8 {
    match surface.mean_orientation() {
        Some(n) if n.dot(positive) < 0.0 => -1,
        _ => 1,
    }
}

/// Per-surface cell code; one of the three bits is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Code {
    Untested,
    Below,
    Above,
}

impl Code {
    /// Bit pattern `b2 b1 b0` = above / below / untested.
    pub fn bits(self) -> u8 {
        match self {
            Code::Untested => 0b001,
            Code::Below => 0b010,
            Code::Above => 0b100,
        }
    }

    pub fn from_side(s: Side) -> Code {
        match s {
            Side::Above => Code::Above,
            Side::Below => Code::Below,
        }
    }

    pub fn sigma(self) -> Option<i8> {
        match self {
            Code::Untested => None,
            Code::Below => Some(-1),
            Code::Above => Some(1),
        }
    }
}

/// Packs per-surface codes, three bits per surface.
pub fn pack_codes(codes: &[Code]) -> u128 {
    assert!(codes.len() <= 42, "at most 42 surfaces fit a packed key");
    codes.iter().enumerate().fold(0u128, |acc, (s, c)| acc | (c.bits() as u128) << (3 * s))
}

/// Classification of one parent's cells against every surface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellClasses {
    pub surfaces: usize,
    pub cells: usize,
    /// `codes[cell * surfaces + s]`
    pub codes: Vec<Code>,
    pub intersect: Vec<bool>,
    pub outside_support: Vec<bool>,
}

impl CellClasses {
    pub fn code(&self, cell: usize, s: usize) -> Code {
        self.codes[cell * self.surfaces + s]
    }

    pub fn intersects(&self, cell: usize, s: usize) -> bool {
        self.intersect[cell * self.surfaces + s]
    }

    pub fn cell_codes(&self, cell: usize) -> &[Code] {
        &self.codes[cell * self.surfaces..(cell + 1) * self.surfaces]
    }

    pub fn cell_intersect(&self, cell: usize) -> &[bool] {
        &self.intersect[cell * self.surfaces..(cell + 1) * self.surfaces]
    }
}

/// Deterministic per-cell seed.
pub fn cell_seed(parent: ParentIndex, raster: usize, surface: usize) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for v in [parent[0] as u64, parent[1] as u64, parent[2] as u64, raster as u64, surface as u64] {
        h ^= v.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    }
    h
}

/// Ray-casts every cell centroid of a surface-intersecting parent and flags
/// the cells that meet the parent's triangles. Surfaces that miss the parent
/// leave every cell untested.
pub fn classify_cells(
    spec: &LatticeSpec,
    parent: ParentIndex,
    surfaces: &[Surface],
    directions: &[Vec3],
    overlap: &OverlapMap,
) -> Result<CellClasses> {
    let grid = spec.grid();
    let ncell = grid.len();
    let ns = surfaces.len();
    let mut out = CellClasses {
        surfaces: ns,
        cells: ncell,
        codes: vec![Code::Untested; ncell * ns],
        intersect: vec![false; ncell * ns],
        outside_support: vec![false; ncell * ns],
    };
    let Some(entry) = overlap.get(parent) else { return Ok(out) };
    for (s, surface) in surfaces.iter().enumerate() {
        let tris = &entry.per_surface[s];
        if tris.is_empty() {
            continue;
        }
        let dir = directions.get(s).copied().unwrap_or(Vec3::Z);
        let local: Vec<(Aabb, Triangle)> =
            tris.iter().map(|&t| surface.mesh.triangle(t as usize)).map(|t| (t.aabb(), t)).collect();
        for i in 0..ncell {
            let n = grid.subscript(i);
            let cb = block_aabb(spec, parent, &CellBox::unit(n));
            let hit = local.iter().any(|(bb, t)| bb.overlaps(&cb) && sat_unchecked(t, &cb));
            let par = cast_parity(spec.cell_centroid(parent, n), surface, dir, cell_seed(parent, i, s))
                .map_err(|e| e.in_parent(parent))?;
            out.codes[i * ns + s] = Code::from_side(par.side);
            out.intersect[i * ns + s] = hit;
            out.outside_support[i * ns + s] = par.outside_support;
        }
    }
    Ok(out)
}

/// Ray-cast sidedness of an arbitrary point, used for blocks whose parent
/// never met a surface.
pub fn point_side(point: Vec3, surface: &Surface, direction: Vec3, seed: u64) -> Result<Side> {
    Ok(cast_parity(point, surface, direction, seed)?.side)
}
