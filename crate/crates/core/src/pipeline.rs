//! End-to-end restructuring: overlap, cell classification, per-class
//! merging, tagging. Stages run as barriers, each parallel over parents.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::intersection::{detect_overlaps, OverlapMap};
use crate::lattice::{parent_key, Block, BlockModel, CellBox, ParentIndex};
use crate::merge::{merge_driver, ClassInput, Convention, MergeParams, ParentInput};
use crate::mesh::{refine_mesh, RefineParams, Surface, TriangleMesh};
use crate::octree::{octree_decompose, octree_intra_scale_merge};
use crate::parallel;
use crate::sidedness::{cell_seed, classify_cells, point_side, CellClasses, Code};
use crate::tagging::{all_retain, tag_block, SurfaceSign, TagInput, TagMode, TaggingInstruction};

/// How cells of a surface-intersecting parent are grouped before merging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassMode {
    /// Intersect flags, ray-cast codes and inherited label.
    #[default]
    Preclassified,
    /// Intersect flags and inherited label only.
    LegacyTwoSet,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Top-down order.
    pub surfaces: Vec<Surface>,
    /// Empty, or one per surface.
    pub instructions: Vec<TaggingInstruction>,
    pub merge: MergeParams,
    pub mode: ClassMode,
    pub tagging: TagMode,
    pub threads: usize,
}

impl PipelineConfig {
    pub fn new(surfaces: Vec<Surface>, instructions: Vec<TaggingInstruction>) -> PipelineConfig {
        PipelineConfig {
            surfaces,
            instructions,
            merge: MergeParams::default(),
            mode: ClassMode::default(),
            tagging: TagMode::default(),
            threads: 1,
        }
    }

    fn direction(&self, s: usize) -> Vec3 {
        self.instructions.get(s).map_or(Vec3::Z, |i| i.positive)
    }
}

/// Integrity-checks, optionally refines, and indexes each mesh.
pub fn prepare_surfaces(meshes: Vec<TriangleMesh>, refine: Option<RefineParams>) -> Result<Vec<Surface>> {
    meshes
        .into_iter()
        .map(|m| match refine {
            Some(p) => Surface::new(refine_mesh(&m, p)?),
            None => Surface::new(m),
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub parents: usize,
    pub intersecting_parents: usize,
    /// Cells carrying at least one intersect flag.
    pub intersecting_cells: usize,
    /// Merged blocks carrying at least one intersect flag.
    pub intersecting_blocks: usize,
    pub classes: usize,
    pub blocks_in: usize,
    pub blocks_out: usize,
}

#[derive(Debug, Clone)]
pub struct Restructured {
    pub model: BlockModel,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct ClassKey {
    intersect: Vec<bool>,
    codes: Vec<Code>,
    label: i64,
}

struct Classified {
    parent: ParentIndex,
    cells: CellClasses,
    keys: Vec<ClassKey>,
    input: ParentInput,
}

fn classify_parent(
    model: &BlockModel,
    cfg: &PipelineConfig,
    parent: ParentIndex,
    idx: &[usize],
    overlap: &OverlapMap,
) -> Result<Classified> {
    let spec = &model.spec;
    let grid = spec.grid();
    let dirs: Vec<Vec3> = (0..cfg.surfaces.len()).map(|s| cfg.direction(s)).collect();
    let cells = classify_cells(spec, parent, &cfg.surfaces, &dirs, overlap)?;
    let mut label = vec![0i64; grid.len()];
    for &i in idx {
        let b = &model.blocks[i];
        for c in b.cells.cells() {
            label[grid.raster(c)] = b.label;
        }
    }
    let mut groups: BTreeMap<ClassKey, Vec<CellBox>> = BTreeMap::new();
    for (r, &l) in label.iter().enumerate() {
        let codes = match cfg.mode {
            ClassMode::Preclassified => cells.cell_codes(r).to_vec(),
            ClassMode::LegacyTwoSet => Vec::new(),
        };
        let key = ClassKey { intersect: cells.cell_intersect(r).to_vec(), codes, label: l };
        groups.entry(key).or_default().push(CellBox::unit(grid.subscript(r)));
    }
    let (keys, classes): (Vec<ClassKey>, Vec<ClassInput>) = groups
        .into_iter()
        .map(|(k, boxes)| {
            let label = k.label;
            (k, ClassInput { label, boxes })
        })
        .unzip();
    Ok(Classified { parent, cells, keys, input: ParentInput { parent, classes } })
}

/// Runs the full restructuring pass. Parents that meet no surface keep their
/// blocks; only their labels may change through tagging.
pub fn restructure(model: &BlockModel, cfg: &PipelineConfig) -> Result<Restructured> {
    let ns = cfg.surfaces.len();
    if !cfg.instructions.is_empty() && cfg.instructions.len() != ns {
        return Err(Error::InvalidMesh(format!("{} tagging instructions for {} surfaces", cfg.instructions.len(), ns)));
    }
    let parents = model.parents();
    let mut diag = Diagnostics { parents: parents.len(), blocks_in: model.blocks.len(), ..Diagnostics::default() };
    if ns == 0 {
        diag.blocks_out = model.blocks.len();
        return Ok(Restructured { model: model.clone(), diagnostics: diag });
    }
    let spec = &model.spec;
    let grid = spec.grid();
    let threads = cfg.threads.max(1);

    let overlap = detect_overlaps(model, &cfg.surfaces, threads);
    diag.intersecting_parents = overlap.len();

    let hit: Vec<&(ParentIndex, Vec<usize>)> = parents.iter().filter(|(p, _)| overlap.contains(*p)).collect();
    let classified =
        parallel::try_map_interleaved(&hit, threads, |_, (p, idx)| classify_parent(model, cfg, *p, idx, &overlap))?;

    let inputs: Vec<ParentInput> = classified.iter().map(|c| c.input.clone()).collect();
    let merged = merge_driver(grid.k, spec.min_dims, &inputs, &cfg.merge, threads)?;

    for c in &classified {
        diag.classes += c.keys.len();
        diag.intersecting_cells += (0..grid.len()).filter(|&r| c.cells.cell_intersect(r).iter().any(|&f| f)).count();
    }
    for (c, m) in classified.iter().zip(&merged) {
        for (k, (_, cm)) in c.keys.iter().zip(&m.classes) {
            if k.intersect.iter().any(|&f| f) {
                diag.intersecting_blocks += cm.blocks.len();
            }
        }
    }

    let tagging = !cfg.instructions.is_empty() && !all_retain(&cfg.instructions);
    let far_side = |parent: ParentIndex, b: &Block, s: usize| -> Result<SurfaceSign> {
        let c = spec.box_centroid(parent, &b.cells);
        let side = point_side(c, &cfg.surfaces[s], cfg.direction(s), cell_seed(parent, grid.raster(b.cells.min), s))
            .map_err(|e| e.in_parent(parent))?;
        Ok(SurfaceSign::side(side.sigma()))
    };
    let tag = |b: Block, signs: Vec<Option<SurfaceSign>>| -> Result<Block> {
        let label = tag_block(&TagInput { label: b.label, signs }, &cfg.instructions, cfg.tagging)
            .map_err(|e| e.in_parent(b.parent))?;
        Ok(Block { label, ..b })
    };

    // merged results are in the same order as `hit`
    let mut by_parent: BTreeMap<(i64, i64, i64), usize> = BTreeMap::new();
    for (i, c) in classified.iter().enumerate() {
        by_parent.insert(parent_key(c.parent), i);
    }
    let out = parallel::try_map_interleaved(&parents, threads, |_, (p, idx)| -> Result<Vec<Block>> {
        let mut blocks = Vec::new();
        match by_parent.get(&parent_key(*p)) {
            None => {
                for &i in idx {
                    let b = model.blocks[i];
                    if !tagging {
                        blocks.push(b);
                        continue;
                    }
                    let signs = (0..ns).map(|s| far_side(*p, &b, s).map(Some)).collect::<Result<Vec<_>>>()?;
                    blocks.push(tag(b, signs)?);
                }
            }
            Some(&ci) => {
                let c = &classified[ci];
                for (key, (_, cm)) in c.keys.iter().zip(&merged[ci].classes) {
                    for cells in &cm.blocks {
                        let b = Block { parent: *p, cells: *cells, label: key.label };
                        if !tagging {
                            blocks.push(b);
                            continue;
                        }
                        let mut signs = Vec::with_capacity(ns);
                        for s in 0..ns {
                            let sign = if key.intersect[s] {
                                let (mut a, mut d) = (0u64, 0u64);
                                for n in cells.cells() {
                                    match c.cells.code(grid.raster(n), s) {
                                        Code::Above => a += 1,
                                        Code::Below => d += 1,
                                        Code::Untested => {}
                                    }
                                }
                                SurfaceSign::across(a, d)
                            } else {
                                match key.codes.get(s).and_then(|c| c.sigma()) {
                                    Some(sg) => SurfaceSign::side(sg),
                                    None => far_side(*p, &b, s)?,
                                }
                            };
                            signs.push(Some(sign));
                        }
                        blocks.push(tag(b, signs)?);
                    }
                }
            }
        }
        Ok(blocks)
    })?;
    let blocks: Vec<Block> = out.into_iter().flatten().collect();
    diag.blocks_out = blocks.len();
    Ok(Restructured { model: BlockModel::new(*spec, blocks), diagnostics: diag })
}

/// Merges each (parent, label) group with the given parameters. A group
/// whose merge would need more blocks than it has keeps its input.
pub fn merge_model(model: &BlockModel, params: &MergeParams, threads: usize) -> Result<BlockModel> {
    let spec = &model.spec;
    let inputs: Vec<ParentInput> = model
        .parents()
        .into_iter()
        .map(|(parent, idx)| {
            let mut by_label: BTreeMap<i64, Vec<CellBox>> = BTreeMap::new();
            for i in idx {
                by_label.entry(model.blocks[i].label).or_default().push(model.blocks[i].cells);
            }
            let classes = by_label.into_iter().map(|(label, boxes)| ClassInput { label, boxes }).collect();
            ParentInput { parent, classes }
        })
        .collect();
    let merged = merge_driver(spec.grid().k, spec.min_dims, &inputs, params, threads.max(1))?;
    let mut blocks = Vec::with_capacity(model.blocks.len());
    for (inp, m) in inputs.iter().zip(&merged) {
        for (ci, (label, cm)) in inp.classes.iter().zip(&m.classes) {
            let chosen = if cm.blocks.len() <= ci.boxes.len() { &cm.blocks } else { &ci.boxes };
            blocks.extend(chosen.iter().map(|&cells| Block { parent: m.parent, cells, label: *label }));
        }
    }
    Ok(BlockModel::new(*spec, blocks))
}

/// [`merge_model`] under the dissolved convention, whatever `params` says.
pub fn heal_and_merge(model: &BlockModel, params: &MergeParams, threads: usize) -> Result<BlockModel> {
    merge_model(model, &MergeParams { convention: Convention::Dissolved, ..params.clone() }, threads)
}

/// Octree baseline over the same cell classes the pipeline would merge.
///
/// Cell classes come from the inherited label plus, in surface-intersecting
/// parents, intersect flags and ray-cast codes. Output blocks carry the
/// inherited label.
pub fn octree_model(
    model: &BlockModel,
    surfaces: &[Surface],
    directions: &[Vec3],
    depth: u32,
    intra_merge: bool,
    threads: usize,
) -> Result<BlockModel> {
    let spec = &model.spec;
    let grid = spec.grid();
    let threads = threads.max(1);
    let overlap = detect_overlaps(model, surfaces, threads);
    let parents = model.parents();
    let out = parallel::try_map_interleaved(&parents, threads, |_, (p, idx)| -> Result<Vec<Block>> {
        let mut label = vec![0i64; grid.len()];
        for &i in idx {
            let b = &model.blocks[i];
            for c in b.cells.cells() {
                label[grid.raster(c)] = b.label;
            }
        }
        let cells =
            if overlap.contains(*p) { Some(classify_cells(spec, *p, surfaces, directions, &overlap)?) } else { None };
        let mut ids: BTreeMap<ClassKey, i64> = BTreeMap::new();
        let mut id_label: Vec<i64> = Vec::new();
        let mut dense = Vec::with_capacity(grid.len());
        for (r, &l) in label.iter().enumerate() {
            let key = match &cells {
                Some(c) => {
                    ClassKey { intersect: c.cell_intersect(r).to_vec(), codes: c.cell_codes(r).to_vec(), label: l }
                }
                None => ClassKey { intersect: Vec::new(), codes: Vec::new(), label: l },
            };
            let next = id_label.len() as i64;
            let id = *ids.entry(key).or_insert_with(|| {
                id_label.push(l);
                next
            });
            dense.push(id);
        }
        let leaves = octree_decompose(&dense, grid.k, depth).map_err(|e| e.in_parent(*p))?;
        let boxes: Vec<(CellBox, i64)> = if intra_merge {
            octree_intra_scale_merge(&leaves).map_err(|e| e.in_parent(*p))?
        } else {
            leaves.iter().map(|l| (l.cells, l.label)).collect()
        };
        Ok(boxes.into_iter().map(|(cells, id)| Block { parent: *p, cells, label: id_label[id as usize] }).collect())
    })?;
    Ok(BlockModel::new(*spec, out.into_iter().flatten().collect()))
}
