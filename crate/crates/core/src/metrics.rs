//! Block counts, volumes, aspect ratios, growth factors and distribution
//! series, with CSV emitters.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::lattice::{parent_key, BlockModel, CellBox};

#[derive(Debug, Clone, PartialEq)]
pub struct LabelStats {
    pub label: i64,
    pub count: u64,
    pub cells: u64,
    pub volume: f64,
    pub pct_volume: f64,
    /// Volume-weighted mean aspect ratio.
    pub vw_aspect: f64,
    /// Unweighted mean aspect ratio.
    pub cw_aspect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelStats {
    pub labels: Vec<LabelStats>,
    pub total: LabelStats,
}

#[derive(Default)]
struct Acc {
    count: u64,
    cells: u64,
    vw: f64,
    cw: f64,
}

impl Acc {
    fn add(&mut self, b: &CellBox, ar: f64) {
        self.count += 1;
        self.cells += b.volume();
        self.vw += b.volume() as f64 * ar;
        self.cw += ar;
    }

    fn finish(&self, label: i64, cell_volume: f64, total_cells: u64) -> LabelStats {
        LabelStats {
            label,
            count: self.count,
            cells: self.cells,
            volume: self.cells as f64 * cell_volume,
            pct_volume: if total_cells == 0 { 0.0 } else { 100.0 * self.cells as f64 / total_cells as f64 },
            vw_aspect: if self.cells == 0 { 0.0 } else { self.vw / self.cells as f64 },
            cw_aspect: if self.count == 0 { 0.0 } else { self.cw / self.count as f64 },
        }
    }
}

pub fn compute_stats(model: &BlockModel) -> ModelStats {
    let md = model.spec.min_dims;
    let mut per: BTreeMap<i64, Acc> = BTreeMap::new();
    let mut all = Acc::default();
    for b in &model.blocks {
        let ar = b.cells.aspect_ratio(md);
        per.entry(b.label).or_default().add(&b.cells, ar);
        all.add(&b.cells, ar);
    }
    let cv = model.spec.cell_volume();
    ModelStats {
        labels: per.iter().map(|(&l, a)| a.finish(l, cv, all.cells)).collect(),
        total: all.finish(i64::MIN, cv, all.cells),
    }
}

impl ModelStats {
    pub fn label(&self, l: i64) -> Option<&LabelStats> {
        self.labels.iter().find(|s| s.label == l)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("label,count,volume,pct_volume,vw_aspect,cw_aspect\n");
        let row = |s: &mut String, name: String, r: &LabelStats| {
            let _ = writeln!(
                s,
                "{name},{},{:.6},{:.6},{:.6},{:.6}",
                r.count, r.volume, r.pct_volume, r.vw_aspect, r.cw_aspect
            );
        };
        for r in &self.labels {
            row(&mut s, r.label.to_string(), r);
        }
        row(&mut s, "all".into(), &self.total);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Growth {
    pub from: u32,
    pub to: u32,
    pub ratio: f64,
}

/// B_to / B_from for consecutive depths, plus first to last when more than
/// two depths are given.
pub fn growth_factors(counts: &BTreeMap<u32, u64>) -> Vec<Growth> {
    let d: Vec<(u32, u64)> = counts.iter().map(|(&k, &v)| (k, v)).collect();
    let mut out: Vec<Growth> =
        d.windows(2).map(|w| Growth { from: w[0].0, to: w[1].0, ratio: w[1].1 as f64 / w[0].1 as f64 }).collect();
    if d.len() > 2 {
        let (a, b) = (d[0], d[d.len() - 1]);
        out.push(Growth { from: a.0, to: b.0, ratio: b.1 as f64 / a.1 as f64 });
    }
    out
}

pub fn growth_csv(g: &[Growth]) -> String {
    let mut s = String::from("from_depth,to_depth,ratio\n");
    for r in g {
        let _ = writeln!(s, "{},{},{:.6}", r.from, r.to, r.ratio);
    }
    s
}

/// Per-parent volume-weighted aspect ratio, ascending.
pub fn aspect_ratio_icdf(model: &BlockModel) -> Vec<f64> {
    let md = model.spec.min_dims;
    let mut per: BTreeMap<(i64, i64, i64), (f64, f64)> = BTreeMap::new();
    for b in &model.blocks {
        let e = per.entry(parent_key(b.parent)).or_default();
        let v = b.cells.volume() as f64;
        e.0 += v * b.cells.aspect_ratio(md);
        e.1 += v;
    }
    let mut out: Vec<f64> = per.values().map(|(n, d)| n / d).collect();
    out.sort_by(f64::total_cmp);
    out
}

pub fn icdf_csv(series: &[f64]) -> String {
    let mut s = String::from("parent_rank,vw_aspect\n");
    for (i, v) in series.iter().enumerate() {
        let _ = writeln!(s, "{},{:.6}", i + 1, v);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfStep {
    pub dims: [u32; 3],
    pub volume: f64,
    pub aspect: f64,
    pub count: u64,
    /// Fraction of blocks at or before this step.
    pub cumulative: f64,
    /// Fraction strictly before plus half at this step.
    pub percentile: f64,
}

/// Block-size distribution ordered by volume, then aspect ratio.
pub fn block_dimension_cdf(model: &BlockModel) -> Vec<CdfStep> {
    let md = model.spec.min_dims;
    let cv = model.spec.cell_volume();
    let mut by_dims: BTreeMap<[u32; 3], u64> = BTreeMap::new();
    for b in &model.blocks {
        *by_dims.entry(b.cells.size).or_default() += 1;
    }
    let mut steps: Vec<CdfStep> = by_dims
        .into_iter()
        .map(|(dims, count)| {
            let c = CellBox::new([0; 3], dims);
            CdfStep {
                dims,
                volume: c.volume() as f64 * cv,
                aspect: c.aspect_ratio(md),
                count,
                cumulative: 0.0,
                percentile: 0.0,
            }
        })
        .collect();
    steps.sort_by(|a, b| a.volume.total_cmp(&b.volume).then(a.aspect.total_cmp(&b.aspect)).then(a.dims.cmp(&b.dims)));
    let total: u64 = steps.iter().map(|s| s.count).sum();
    let mut below = 0u64;
    for s in &mut steps {
        s.percentile = (below as f64 + 0.5 * s.count as f64) / total as f64;
        below += s.count;
        s.cumulative = below as f64 / total as f64;
    }
    steps
}

pub fn cdf_csv(steps: &[CdfStep]) -> String {
    let mut s = String::from("kx,ky,kz,volume,aspect,count,cumulative,percentile\n");
    for r in steps {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{},{:.6},{:.6}",
            r.dims[0], r.dims[1], r.dims[2], r.volume, r.aspect, r.count, r.cumulative, r.percentile
        );
    }
    s
}
