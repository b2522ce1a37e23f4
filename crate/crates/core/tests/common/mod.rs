//! Independent oracles and scene builders shared by the test targets.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use blockshape::geometry::{Aabb, Triangle, Vec3};
use blockshape::lattice::CellBox;
use blockshape::mesh::TriangleMesh;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// exact triangle/box overlap by clipping

type Q = BigRational;

fn q(x: f64) -> Q {
    BigRational::from_float(x).expect("finite")
}

/// Closed triangle/box overlap by Sutherland–Hodgman clipping in exact
/// rationals. The box is `center ± half` taken exactly.
pub fn exact_overlap(t: &Triangle, b: &Aabb) -> bool {
    let mut poly: Vec<[Q; 3]> = t.v.iter().map(|p| [q(p.x), q(p.y), q(p.z)]).collect();
    for a in 0..3 {
        let c = q(b.center[a]);
        let h = q(b.half[a]);
        let lo = &c - &h;
        let hi = &c + &h;
        // keep x_a >= lo, then x_a <= hi
        poly = clip(&poly, a, &lo, true);
        poly = clip(&poly, a, &hi, false);
        if poly.is_empty() {
            return false;
        }
    }
    true
}

fn clip(poly: &[[Q; 3]], axis: usize, bound: &Q, keep_above: bool) -> Vec<[Q; 3]> {
    let inside = |p: &[Q; 3]| if keep_above { p[axis] >= *bound } else { p[axis] <= *bound };
    let mut out = Vec::new();
    let n = poly.len();
    for i in 0..n {
        let s = &poly[(i + n - 1) % n];
        let e = &poly[i];
        let (si, ei) = (inside(s), inside(e));
        if ei {
            if !si {
                out.push(cross_point(s, e, axis, bound));
            }
            out.push(e.clone());
        } else if si {
            out.push(cross_point(s, e, axis, bound));
        }
    }
    out
}

fn cross_point(s: &[Q; 3], e: &[Q; 3], axis: usize, bound: &Q) -> [Q; 3] {
    let t = (bound - &s[axis]) / (&e[axis] - &s[axis]);
    [0, 1, 2].map(|k| &s[k] + &t * (&e[k] - &s[k]))
}

/// Exact zero-area check.
pub fn exactly_degenerate(t: &Triangle) -> bool {
    let p: Vec<[Q; 3]> = t.v.iter().map(|p| [q(p.x), q(p.y), q(p.z)]).collect();
    let u = [0, 1, 2].map(|k| &p[1][k] - &p[0][k]);
    let v = [0, 1, 2].map(|k| &p[2][k] - &p[0][k]);
    let c = [&u[1] * &v[2] - &u[2] * &v[1], &u[2] * &v[0] - &u[0] * &v[2], &u[0] * &v[1] - &u[1] * &v[0]];
    c.iter().all(|x| x.is_zero())
}

pub fn is_dyadic(x: f64, bits: i32) -> bool {
    let s = x * 2f64.powi(bits);
    s == s.trunc() && s.abs() < 2f64.powi(52)
}

/// Multiples of 1/16 within ±32.
pub fn dyadic(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-512i32..=512) as f64 / 16.0
}

pub fn dyadic_vec(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(dyadic(rng), dyadic(rng), dyadic(rng))
}

/// Box with dyadic centre and positive dyadic half extents.
pub fn dyadic_box(rng: &mut ChaCha8Rng) -> Aabb {
    let h = Vec3::new(
        rng.gen_range(1..=160) as f64 / 16.0,
        rng.gen_range(1..=160) as f64 / 16.0,
        rng.gen_range(1..=160) as f64 / 16.0,
    );
    let c = Vec3::new(dyadic(rng) / 2.0, dyadic(rng) / 2.0, dyadic(rng) / 2.0);
    Aabb::new(c, h).unwrap()
}

/// Triangles placed so one vertex, edge or face lies exactly on the box.
pub fn grazing(rng: &mut ChaCha8Rng, b: &Aabb) -> Triangle {
    let lo = b.min();
    let hi = b.max();
    let pick = |rng: &mut ChaCha8Rng, a: usize| if rng.gen_bool(0.5) { lo[a] } else { hi[a] };
    let mut corner = Vec3::ZERO;
    for a in 0..3 {
        corner[a] = pick(rng, a);
    }
    let out = |rng: &mut ChaCha8Rng| {
        let mut p = corner;
        for a in 0..3 {
            let dir = if corner[a] == hi[a] { 1.0 } else { -1.0 };
            p[a] += dir * rng.gen_range(0..=64) as f64 / 16.0;
        }
        p
    };
    match rng.gen_range(0..3) {
        0 => Triangle::new(corner, out(rng), out(rng)),
        1 => {
            // in the face plane of one axis, sliding off the box
            let a = rng.gen_range(0..3);
            let mut p = out(rng);
            let mut q = out(rng);
            p[a] = corner[a];
            q[a] = corner[a];
            let shift = rng.gen_range(0..=2) as f64 / 16.0;
            let dir = if corner[a] == hi[a] { 1.0 } else { -1.0 };
            let mut c = corner;
            c[a] += dir * shift;
            p[a] += dir * shift;
            q[a] += dir * shift;
            Triangle::new(c, p, q)
        }
        _ => {
            let p = out(rng);
            let mut q = corner;
            let a = rng.gen_range(0..3);
            q[a] = if corner[a] == hi[a] { lo[a] } else { hi[a] };
            Triangle::new(corner, q, p)
        }
    }
}

// ---------------------------------------------------------------------------
// meshes

pub fn icosphere(subdiv: u32, centre: Vec3, radius: f64) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized().unwrap())
    .collect();
    let mut f: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdiv {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut m = |a: u32, b: u32, v: &mut Vec<Vec3>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                v.push(((v[a as usize] + v[b as usize]) * 0.5).normalized().unwrap());
                v.len() as u32 - 1
            })
        };
        let mut nf = Vec::with_capacity(f.len() * 4);
        for [a, b, c] in f {
            let ab = m(a, b, &mut v);
            let bc = m(b, c, &mut v);
            let ca = m(c, a, &mut v);
            nf.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        f = nf;
    }
    let verts = v.into_iter().map(|p| centre + p * radius).collect();
    TriangleMesh::new("icosphere", verts, f).unwrap()
}

/// Closed, outward-facing box.
pub fn box_mesh(lo: Vec3, hi: Vec3) -> TriangleMesh {
    let c = |i: u32| {
        Vec3::new(
            if i & 1 == 0 { lo.x } else { hi.x },
            if i & 2 == 0 { lo.y } else { hi.y },
            if i & 4 == 0 { lo.z } else { hi.z },
        )
    };
    let v = (0..8).map(c).collect();
    let f = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    TriangleMesh::new("box", v, f).unwrap()
}

/// Height field z = f(x, y) over an `n × n` grid spanning `[lo, hi]²`,
/// normals facing +z.
pub fn height_field(lo: f64, hi: f64, n: usize, f: impl Fn(f64, f64) -> f64) -> TriangleMesh {
    let step = (hi - lo) / n as f64;
    let mut v = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            let (x, y) = (lo + i as f64 * step, lo + j as f64 * step);
            v.push(Vec3::new(x, y, f(x, y)));
        }
    }
    let id = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    let mut t = Vec::new();
    for j in 0..n {
        for i in 0..n {
            t.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            t.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new("height", v, t).unwrap()
}

/// Inside test for a closed convex outward-facing mesh.
pub fn convex_inside(mesh: &TriangleMesh, p: Vec3) -> bool {
    mesh.iter().all(|t| (p - t.v[0]).dot(t.normal()) < 0.0)
}

/// Distance from a point to a triangle.
pub fn point_triangle_distance(p: Vec3, t: &Triangle) -> f64 {
    let n = t.normal().normalized().unwrap();
    let d = (p - t.v[0]).dot(n);
    let proj = p - n * d;
    let inside = (0..3).all(|i| {
        let a = t.v[i];
        let b = t.v[(i + 1) % 3];
        (b - a).cross(proj - a).dot(n) >= 0.0
    });
    if inside {
        return d.abs();
    }
    (0..3)
        .map(|i| {
            let a = t.v[i];
            let b = t.v[(i + 1) % 3];
            let ab = b - a;
            let s = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
            (p - (a + ab * s)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn mesh_distance(mesh: &TriangleMesh, p: Vec3) -> f64 {
    mesh.iter().map(|t| point_triangle_distance(p, &t)).fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// merge references

/// Literal greedy merge: the seed is the first active cell in the scan
/// order given by `signs`, growth runs x, y, z in the scan's direction,
/// every candidate box is checked cell by cell.
pub fn reference_coalesce(
    k: [u32; 3],
    active: &BTreeSet<[u32; 3]>,
    signs: [i8; 3],
    max: [u32; 3],
    token: Option<u32>,
) -> Vec<CellBox> {
    let mut act = active.clone();
    let n_occ = act.len() as u64;
    let mut count = 0u64;
    let mut out = Vec::new();
    let coord = |a: usize, i: u32| if signs[a] > 0 { i } else { k[a] - 1 - i };
    let scan: Vec<[u32; 3]> = (0..k[2])
        .flat_map(|z| (0..k[1]).flat_map(move |y| (0..k[0]).map(move |x| [x, y, z])))
        .map(|[x, y, z]| [coord(0, x), coord(1, y), coord(2, z)])
        .collect();
    while let Some(&seed) = scan.iter().find(|c| act.contains(*c)) {
        let room = |a: usize| if signs[a] > 0 { k[a] - seed[a] } else { seed[a] + 1 };
        let box_of = |s: [u32; 3]| {
            let min = [0, 1, 2].map(|a| if signs[a] > 0 { seed[a] } else { seed[a] + 1 - s[a] });
            CellBox::new(min, s)
        };
        if n_occ - count == 1 {
            act.remove(&seed);
            out.push(CellBox::unit(seed));
            break;
        }
        let mut s = [1u32; 3];
        let mut left = token;
        loop {
            let mut barriers = 0;
            for a in 0..3 {
                let mut d = s;
                d[a] = (s[a] + 1).min(room(a));
                let ok = d[a] > s[a] && (0..3).all(|j| d[j] <= max[j]) && box_of(d).cells().all(|c| act.contains(&c));
                if ok {
                    s = d;
                } else {
                    barriers += 1;
                }
            }
            if let Some(t) = left.as_mut() {
                *t -= 1;
            }
            let vol: u64 = s.iter().map(|&v| v as u64).product();
            if count + vol == n_occ || barriers == 3 || left == Some(0) {
                break;
            }
        }
        let b = box_of(s);
        for c in b.cells() {
            act.remove(&c);
        }
        count += b.volume();
        out.push(b);
    }
    out
}

/// Disjoint boxes inside `k`, within `max`, covering exactly `cells`.
pub fn check_partition(k: [u32; 3], cells: &BTreeSet<[u32; 3]>, out: &[CellBox], max: [u32; 3]) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for b in out {
        if !b.fits(k) {
            return Err(format!("{b:?} leaves the parent"));
        }
        if (0..3).any(|a| b.size[a] == 0 || b.size[a] > max[a]) {
            return Err(format!("{b:?} exceeds max {max:?}"));
        }
        for c in b.cells() {
            if !seen.insert(c) {
                return Err(format!("cell {c:?} covered twice"));
            }
        }
    }
    if &seen != cells {
        return Err(format!("union differs: {} cells vs {} expected", seen.len(), cells.len()));
    }
    Ok(())
}

/// Random labels on a `k` grid, grown from a few seeds so classes form
/// clumps as well as scattered cells.
pub fn random_class_field(rng: &mut ChaCha8Rng, k: [u32; 3], classes: u32) -> Vec<u32> {
    let n = (k[0] * k[1] * k[2]) as usize;
    let mut f: Vec<u32> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    let smooth = rng.gen_range(0..3);
    for _ in 0..smooth {
        let g = f.clone();
        for z in 0..k[2] {
            for y in 0..k[1] {
                for x in 0..k[0] {
                    let i = ((z * k[1] + y) * k[0] + x) as usize;
                    if x > 0 && rng.gen_bool(0.6) {
                        f[i] = g[i - 1];
                    } else if y > 0 && rng.gen_bool(0.5) {
                        f[i] = g[i - k[0] as usize];
                    }
                }
            }
        }
    }
    f
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
