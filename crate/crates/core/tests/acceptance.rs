//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p blockshape --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use blockshape::geometry::{Aabb, Triangle, Vec3};
use blockshape::intersection::sat_unchecked;
use blockshape::lattice::{Block, BlockModel, CellBox, Grid, LatticeSpec};
use blockshape::merge::{
    coalesce_binary, merge_class, merge_driver, merge_with_pattern, ClassInput, Convention, Limits, MergeParams,
    OccupancyMap, ParentInput, ScanPattern,
};
use blockshape::mesh::{refine_mesh, RefineParams, Surface};
use blockshape::metrics::compute_stats;
use blockshape::pipeline::{octree_model, restructure, ClassMode, PipelineConfig};
use blockshape::sidedness::cast_parity;
use blockshape::tagging::{abstract_label, TaggingInstruction};
use common::{
    box_mesh, check_partition, dyadic_box, dyadic_vec, exact_overlap, exactly_degenerate, grazing, height_field,
    icosphere, mesh_distance, random_class_field,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_MAX_S: f64 = 1e-3;
const SAT_PAIRS: usize = 100_000;
const SAT_MAX_S: f64 = 10.0;
const RAY_POINTS: usize = 10_000;
const RAY_BAND_EDGES: f64 = 2.0;
const RAY_MAX_S: f64 = 10.0;
const PARTITION_FIELDS: usize = 1_000;
const PARTITION_MAX_S: f64 = 60.0;
const OCTREE_MAX_S: f64 = 120.0;
const PD_TOLERANCE: f64 = 0.10;
const AR_TOLERANCE: f64 = 1e-12;
const GROWTH_RANGE: (f64, f64) = (3.0, 5.0);
const MULTISCAN_INSTANCES: usize = 500;
const MULTISCAN_MAX_S: f64 = 60.0;
const SCALING_PARENTS: usize = 10_000;
const SCALING_THREADS: usize = 4;
const SCALING_MAX_RATIO: f64 = 0.5;
const BOUNDARY_MAX_S: f64 = 1.0;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
    /// A failure that the host cannot satisfy; reported but not fatal.
    environmental: bool,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail, environmental: false }
}

fn class_cells(k: [u32; 3], field: &[u32], c: u32) -> BTreeSet<[u32; 3]> {
    let g = Grid::new(k);
    (0..g.len()).filter(|&i| field[i] == c).map(|i| g.subscript(i)).collect()
}

fn units(cells: &BTreeSet<[u32; 3]>) -> Vec<CellBox> {
    cells.iter().map(|&c| CellBox::unit(c)).collect()
}

fn golden() -> Outcome {
    let k = [5, 3, 3];
    let parts =
        [CellBox::new([0, 0, 0], [4, 2, 3]), CellBox::new([4, 0, 0], [1, 1, 3]), CellBox::new([2, 2, 1], [2, 1, 2])];
    let active: Vec<CellBox> = parts.iter().flat_map(|b| b.cells().map(CellBox::unit).collect::<Vec<_>>()).collect();
    let mut theta = OccupancyMap::binary(k, &active);
    let t0 = Instant::now();
    let out = coalesce_binary(&mut theta, Limits::unbounded(k));
    let dt = t0.elapsed().as_secs_f64();
    // centroids relative to the parent, as (numerator, denominator) per axis
    let want =
        [([4, 2, 3], [4, 2, 3], [10, 6, 6]), ([1, 1, 3], [9, 1, 3], [10, 6, 6]), ([2, 1, 2], [6, 5, 4], [10, 6, 6])];
    let got: Vec<([u32; 3], [u32; 3])> = out
        .iter()
        .map(|b| (b.size, [0, 1, 2].map(|a| (2 * b.min[a] + b.size[a]) * [10, 6, 6][a] / (2 * k[a]))))
        .collect();
    let exact = out.len() == 3
        && want.iter().zip(&got).all(|(w, g)| w.0 == g.0 && w.1 == g.1)
        && out.iter().all(|b| (0..3).all(|a| ((2 * b.min[a] + b.size[a]) * [10, 6, 6][a]) % (2 * k[a]) == 0));
    outcome(
        exact && active.len() == 31 && dt < GOLDEN_MAX_S,
        format!(
            "{} active cells -> {:?}, {:.1} us",
            active.len(),
            out.iter().map(|b| b.size).collect::<Vec<_>>(),
            dt * 1e6
        ),
    )
}

fn sat_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pairs: Vec<(Triangle, Aabb)> = Vec::with_capacity(SAT_PAIRS);
    while pairs.len() < SAT_PAIRS {
        let s = 2f64.powi(rng.gen_range(-6..=6));
        let b = dyadic_box(&mut rng);
        let t = match pairs.len() % 4 {
            0 => grazing(&mut rng, &b),
            1 => Triangle::new(dyadic_vec(&mut rng) / 4.0, dyadic_vec(&mut rng) / 4.0, dyadic_vec(&mut rng) / 4.0),
            2 => {
                let c = b.center;
                Triangle::new(
                    c + dyadic_vec(&mut rng) / 8.0,
                    c + dyadic_vec(&mut rng) / 8.0,
                    c + dyadic_vec(&mut rng) / 8.0,
                )
            }
            _ => {
                let r = |rng: &mut ChaCha8Rng| {
                    Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
                };
                Triangle::new(r(&mut rng), r(&mut rng), r(&mut rng))
            }
        };
        let t = Triangle::new(t.v[0] * s, t.v[1] * s, t.v[2] * s);
        let b = Aabb::new(b.center * s, b.half * s).unwrap();
        if exactly_degenerate(&t) {
            continue;
        }
        pairs.push((t, b));
    }
    let t0 = Instant::now();
    let ours: Vec<bool> = pairs.iter().map(|(t, b)| sat_unchecked(t, b)).collect();
    let dt = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let agree = pairs.iter().zip(&ours).filter(|((t, b), &o)| exact_overlap(t, b) == o).count();
    let dt_oracle = t1.elapsed().as_secs_f64();
    let hits = ours.iter().filter(|&&o| o).count();
    outcome(
        agree == SAT_PAIRS && dt < SAT_MAX_S,
        format!("{agree}/{SAT_PAIRS} agree ({hits} overlapping), sat {dt:.3} s, exact oracle {dt_oracle:.1} s"),
    )
}

fn ray_cast() -> Outcome {
    let centre = Vec3::new(0.3, -0.4, 0.2);
    let radius = 5.0;
    let sphere = icosphere(4, centre, radius);
    let (lo, hi) = (Vec3::new(-3.0, -2.0, -4.0), Vec3::new(4.0, 3.0, 2.5));
    // faces tessellated so the exclusion band stays thin
    let boxm = refine_mesh(&box_mesh(lo, hi), RefineParams::new(0.05, 0.4).unwrap()).unwrap();
    let mut report = Vec::new();
    let mut pass = sphere.vertices.len() == 2562;
    let mut total = 0.0;
    for (name, mesh, inside) in [
        ("sphere", &sphere, Box::new(move |p: Vec3| (p - centre).norm() < radius) as Box<dyn Fn(Vec3) -> bool>),
        ("box", &boxm, Box::new(move |p: Vec3| (0..3).all(|a| p[a] > lo[a] && p[a] < hi[a]))),
    ] {
        let s = Surface::new(mesh.clone()).unwrap();
        let band = RAY_BAND_EDGES * mesh.mean_edge_length();
        let bb = mesh.aabb().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pts: Vec<Vec3> = (0..RAY_POINTS)
            .map(|_| {
                let u = Vec3::new(rng.gen_range(-1.3..1.3), rng.gen_range(-1.3..1.3), rng.gen_range(-1.3..1.3));
                bb.center + u.mul_elem(bb.half)
            })
            .collect();
        let far: Vec<bool> = pts.iter().map(|&p| mesh_distance(mesh, p) > band).collect();
        let t0 = Instant::now();
        // a cast error counts as a mismatch
        let got: Vec<Option<bool>> = pts
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let d = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0));
                cast_parity(p, &s, d, i as u64).map(|r| r.inside()).ok()
            })
            .collect();
        total += t0.elapsed().as_secs_f64();
        let subset: Vec<usize> = (0..RAY_POINTS).filter(|&i| far[i]).collect();
        let ok = subset.iter().filter(|&&i| got[i] == Some(inside(pts[i]))).count();
        let inside_n = subset.iter().filter(|&&i| inside(pts[i])).count();
        pass &= ok == subset.len() && !subset.is_empty() && inside_n > 0;
        report.push(format!("{name} {ok}/{} ({inside_n} inside, {} triangles)", subset.len(), mesh.len()));
    }
    pass &= total < RAY_MAX_S;
    outcome(pass, format!("{}, casting {total:.2} s", report.join(", ")))
}

fn partitions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let t0 = Instant::now();
    let mut checked = 0usize;
    let mut failure = None;
    'fields: for f in 0..PARTITION_FIELDS {
        let k = [rng.gen_range(1..=16), rng.gen_range(1..=16), rng.gen_range(1..=16)];
        let classes = rng.gen_range(1..=4);
        let field = random_class_field(&mut rng, k, classes);
        let max = [rng.gen_range(1..=k[0]), rng.gen_range(1..=k[1]), rng.gen_range(1..=k[2])];
        let token = rng.gen_range(1..=3);
        for c in 0..classes {
            let cells = class_cells(k, &field, c);
            if cells.is_empty() {
                continue;
            }
            let fragments = merge_with_pattern(
                &units(&cells),
                k,
                Convention::Dissolved,
                Limits { token: Some(token), max },
                ScanPattern::STANDARD,
            );
            for p in ScanPattern::all() {
                for conv in [Convention::Dissolved, Convention::Persistent] {
                    let out = merge_with_pattern(&fragments, k, conv, Limits { token: None, max }, p);
                    let mut r = check_partition(k, &cells, &out, max);
                    if r.is_ok() && conv == Convention::Persistent {
                        if let Some(b) =
                            fragments.iter().find(|b| out.iter().filter(|o| o.contains_box(b)).count() != 1)
                        {
                            r = Err(format!("input {b:?} not inside exactly one output"));
                        }
                    }
                    if let Err(e) = r {
                        failure = Some(format!("field {f} class {c} {conv:?} {p:?}: {e}"));
                        break 'fields;
                    }
                    checked += 1;
                }
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    match failure {
        Some(e) => outcome(false, e),
        None => outcome(dt < PARTITION_MAX_S, format!("{checked} merges over {PARTITION_FIELDS} fields, {dt:.2} s")),
    }
}

struct Scene {
    model: BlockModel,
    surfaces: Vec<Surface>,
}

fn octree_scene(depth: u32) -> Scene {
    let n = (1u32 << depth) as f64;
    let spec =
        LatticeSpec::new(Vec3::ZERO, Vec3::new(50.0, 50.0, 20.0), Vec3::new(50.0 / n, 50.0 / n, 20.0 / n)).unwrap();
    let mut model = BlockModel::regular(spec, [10, 10, 4], 0);
    for b in &mut model.blocks {
        b.label = if b.parent[2] < 2 { 1 } else { 2 };
    }
    let surfaces = vec![
        Surface::new(height_field(-20.0, 520.0, 12, |x, y| 41.3 + 0.031 * x - 0.017 * y)).unwrap(),
        Surface::new(icosphere(3, Vec3::new(243.0, 262.0, 38.0), 31.7)).unwrap(),
    ];
    Scene { model, surfaces }
}

struct Methods {
    octree: BlockModel,
    octree_merge: BlockModel,
    prop_p: BlockModel,
    prop_d: BlockModel,
}

fn run_methods(s: &Scene, depth: u32) -> Methods {
    let dirs = [Vec3::Z, Vec3::Z];
    let proposed = |conv| {
        let mut cfg = PipelineConfig::new(s.surfaces.clone(), vec![]);
        cfg.merge.convention = conv;
        restructure(&s.model, &cfg).unwrap().model
    };
    Methods {
        octree: octree_model(&s.model, &s.surfaces, &dirs, depth, false, 1).unwrap(),
        octree_merge: octree_model(&s.model, &s.surfaces, &dirs, depth, true, 1).unwrap(),
        prop_p: proposed(Convention::Persistent),
        prop_d: proposed(Convention::Dissolved),
    }
}

fn octree_comparison() -> Outcome {
    let t0 = Instant::now();
    let s3 = octree_scene(3);
    let m3 = run_methods(&s3, 3);
    let s4 = octree_scene(4);
    let m4 = run_methods(&s4, 4);
    let dt = t0.elapsed().as_secs_f64();
    let n = |m: &BlockModel| m.blocks.len() as f64;
    let (o, om, p, d) = (n(&m3.octree), n(&m3.octree_merge), n(&m3.prop_p), n(&m3.prop_d));
    let order = o > om && om > p;
    let pd = (d - p).abs() / p <= PD_TOLERANCE;
    let ar = compute_stats(&m3.octree).total.vw_aspect;
    let parent_ar = 50.0 / 20.0;
    let ar_ok = (ar - parent_ar).abs() <= AR_TOLERANCE;
    let per_label =
        |m: &BlockModel| -> BTreeMap<i64, u64> { compute_stats(m).labels.iter().map(|l| (l.label, l.cells)).collect() };
    let base = per_label(&s3.model);
    let volumes = [&m3.octree, &m3.octree_merge, &m3.prop_p, &m3.prop_d].iter().all(|m| per_label(m) == base);
    let base4 = per_label(&s4.model);
    let volumes4 = [&m4.octree, &m4.octree_merge, &m4.prop_p, &m4.prop_d].iter().all(|m| per_label(m) == base4);
    let g = [n(&m4.octree) / o, n(&m4.octree_merge) / om, n(&m4.prop_p) / p, n(&m4.prop_d) / d];
    let growth = g.iter().all(|&r| r >= GROWTH_RANGE.0 && r <= GROWTH_RANGE.1);
    outcome(
        order && pd && ar_ok && volumes && volumes4 && growth && dt < OCTREE_MAX_S,
        format!(
            "D=3 counts octree {o} > octree+merge {om} > proposed-p {p}; proposed-d {d} ({:+.1}%); octree vw AR {ar:.12}; \
             label volumes equal {}; B4/B3 {:.2}/{:.2}/{:.2}/{:.2}; {dt:.1} s",
            100.0 * (d - p) / p,
            volumes && volumes4,
            g[0],
            g[1],
            g[2],
            g[3]
        ),
    )
}

fn multi_scan() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let t0 = Instant::now();
    let mut ok = 0;
    let mut strictly = 0;
    for _ in 0..MULTISCAN_INSTANCES {
        let k = [rng.gen_range(2..=12), rng.gen_range(2..=12), rng.gen_range(1..=8)];
        let field = random_class_field(&mut rng, k, 2);
        let cells = class_cells(k, &field, 1);
        if cells.is_empty() {
            ok += 1;
            continue;
        }
        let md = Vec3::new(rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0));
        let conv = if rng.gen_bool(0.5) { Convention::Dissolved } else { Convention::Persistent };
        let all = MergeParams { convention: conv, ..MergeParams::default() };
        let one = MergeParams { scans: vec![ScanPattern::STANDARD], ..all.clone() };
        let a = merge_class(&units(&cells), k, md, &all).unwrap().objective(all.objective);
        let b = merge_class(&units(&cells), k, md, &one).unwrap().objective(one.objective);
        if a <= b {
            ok += 1;
        }
        if a < b {
            strictly += 1;
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    outcome(
        ok == MULTISCAN_INSTANCES && dt < MULTISCAN_MAX_S,
        format!("{ok}/{MULTISCAN_INSTANCES} not worse, {strictly} strictly better, {dt:.2} s"),
    )
}

fn scaling_workload() -> (Vec<ParentInput>, [u32; 3]) {
    let k = [8, 8, 4];
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let parents = (0..SCALING_PARENTS)
        .map(|i| {
            let field = random_class_field(&mut rng, k, 3);
            let classes = (0..3)
                .map(|c| ClassInput { label: c as i64, boxes: units(&class_cells(k, &field, c)) })
                .filter(|c| !c.boxes.is_empty())
                .collect();
            ParentInput { parent: [(i % 100) as i64, (i / 100) as i64, 0], classes }
        })
        .collect();
    (parents, k)
}

fn determinism_and_scaling() -> Outcome {
    let s = octree_scene(3);
    let mut cfg = PipelineConfig::new(s.surfaces.clone(), vec![]);
    let mut outputs = Vec::new();
    for t in [1, 2, 8] {
        cfg.threads = t;
        outputs.push(restructure(&s.model, &cfg).unwrap().model.to_csv());
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);

    let (parents, k) = scaling_workload();
    let params = MergeParams::default();
    let md = Vec3::new(1.0, 1.0, 2.0);
    let t0 = Instant::now();
    let one = merge_driver(k, md, &parents, &params, 1).unwrap();
    let t1 = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let four = merge_driver(k, md, &parents, &params, SCALING_THREADS).unwrap();
    let t4 = t0.elapsed().as_secs_f64();
    let merged_same = one == four;
    let ratio = t4 / t1;
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let scaled = ratio <= SCALING_MAX_RATIO;
    let detail = format!(
        "outputs identical for threads 1/2/8: {identical}; merge workload {SCALING_PARENTS} parents: 1 thread {t1:.2} s, \
         {SCALING_THREADS} threads {t4:.2} s (ratio {ratio:.2}, need <= {SCALING_MAX_RATIO}); {cores} core(s) detected"
    );
    Outcome {
        pass: identical && merged_same && scaled,
        detail,
        environmental: identical && merged_same && !scaled && cores < SCALING_THREADS,
    }
}

fn boundary_contrast() -> Outcome {
    let t0 = Instant::now();
    let spec = LatticeSpec::new(Vec3::ZERO, Vec3::new(5.0, 1.0, 3.0), Vec3::splat(1.0)).unwrap();
    let model = BlockModel::regular(spec, [1, 1, 1], 1);
    let plane = Surface::new(height_field(-2.0, 7.0, 3, |x, _| 1.5 + 0.1 * (x - 2.2))).unwrap();
    let mixed = |m: &BlockModel| -> Vec<Block> {
        m.blocks
            .iter()
            .filter(|b| {
                let sides: BTreeSet<bool> = b
                    .cells
                    .cells()
                    .enumerate()
                    .map(|(i, n)| {
                        cast_parity(spec.cell_centroid(b.parent, n), &plane, Vec3::Z, i as u64).unwrap().inside()
                    })
                    .collect();
                sides.len() > 1
            })
            .copied()
            .collect()
    };
    let run = |mode| {
        let mut cfg = PipelineConfig::new(vec![plane.clone()], vec![]);
        cfg.mode = mode;
        restructure(&model, &cfg).unwrap().model
    };
    let legacy = run(ClassMode::LegacyTwoSet);
    let pre = run(ClassMode::Preclassified);
    let lm = mixed(&legacy);
    let pm = mixed(&pre);
    let dt = t0.elapsed().as_secs_f64();
    let legacy_ok = lm.iter().any(|b| b.cells.size == [5, 1, 1]);
    outcome(
        legacy_ok && pm.is_empty() && dt < BOUNDARY_MAX_S,
        format!(
            "legacy mixed blocks {:?}; preclassified {} blocks, {} mixed; {:.1} ms",
            lm.iter().map(|b| b.cells.size).collect::<Vec<_>>(),
            pre.blocks.len(),
            pm.len(),
            dt * 1e3
        ),
    )
}

fn tagging_semantics() -> Outcome {
    const A: i64 = 1;
    const B: i64 = 2;
    let top = |x: f64, y: f64| 7.3 + 0.1 * x - 0.04 * y;
    let bottom = |_x: f64, y: f64| 2.7 + 0.05 * y;
    let spec = LatticeSpec::new(Vec3::ZERO, Vec3::new(4.0, 4.0, 4.0), Vec3::splat(1.0)).unwrap();
    let model = BlockModel::regular(spec, [3, 3, 3], A);
    let surfaces = vec![
        Surface::new(height_field(-1.0, 13.0, 4, top)).unwrap(),
        Surface::new(height_field(-1.0, 13.0, 4, bottom)).unwrap(),
    ];
    let ins = vec![
        TaggingInstruction::new("top", Vec3::Z, -1, -1, B, true).unwrap(),
        TaggingInstruction::new("bottom", Vec3::Z, B, -1, -1, true).unwrap(),
    ];
    let r = restructure(&model, &PipelineConfig::new(surfaces, ins)).unwrap().model;
    let mut wrong = 0;
    let (mut cells_a, mut cells_b) = (0, 0);
    for b in &r.blocks {
        let majority = |f: &dyn Fn(f64, f64) -> f64| {
            let above = b.cells.cells().filter(|&n| {
                let c = spec.cell_centroid(b.parent, n);
                c.z > f(c.x, c.y)
            });
            let a = above.count() as u64;
            if 2 * a >= b.cells.volume() {
                1
            } else {
                -1
            }
        };
        let want = if majority(&top) == -1 && majority(&bottom) == 1 { B } else { A };
        if b.label != want {
            wrong += 1;
        }
        if b.label == B {
            cells_b += b.cells.volume();
        } else {
            cells_a += b.cells.volume();
        }
    }
    let mut formula = 0;
    for n in 0..3usize {
        for sigma in [-1i8, 0, 1] {
            if abstract_label(n, sigma) == 2 * (n as i64 + 1) - sigma as i64 {
                formula += 1;
            }
        }
    }
    outcome(
        wrong == 0 && cells_a > 0 && cells_b > 0 && formula == 9,
        format!(
            "{} blocks, {wrong} mislabelled ({cells_b} cells B, {cells_a} cells A); abstract labels {formula}/9",
            r.blocks.len()
        ),
    )
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let criteria: [Criterion; 9] = [
        ("1 golden occupancy example", golden),
        ("2 SAT vs exact clip", sat_oracle),
        ("3 ray-cast containment", ray_cast),
        ("4 partition invariants", partitions),
        ("5 octree comparison", octree_comparison),
        ("6 multi-scan dominance", multi_scan),
        ("7 determinism and scaling", determinism_and_scaling),
        ("8 boundary accuracy contrast", boundary_contrast),
        ("9 tagging semantics", tagging_semantics),
    ];
    let mut fatal = 0;
    for (name, f) in criteria {
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && o.environmental { " [host limitation, not fatal]" } else { "" };
        println!("{tag} criterion {name}: {}{note}", o.detail);
        if !o.pass && !o.environmental {
            fatal += 1;
        }
    }
    if fatal > 0 {
        std::process::exit(1);
    }
}
