mod common;

use blockshape::geometry::Vec3;
use blockshape::lattice::{BlockModel, LatticeSpec};
use blockshape::mesh::Surface;
use blockshape::pipeline::{restructure, PipelineConfig};
use blockshape::tagging::{
    abstract_label, affiliated_surface, tag_block, SurfaceSign, TagInput, TagMode, TaggingInstruction,
};
use common::height_field;
use proptest::prelude::*;

const A: i64 = 1;
const B: i64 = 2;

fn top(x: f64, y: f64) -> f64 {
    7.3 + 0.1 * x - 0.04 * y
}

fn bottom(_x: f64, y: f64) -> f64 {
    2.7 + 0.05 * y
}

#[test]
fn dyke_between_surfaces() {
    let spec = LatticeSpec::new(Vec3::ZERO, Vec3::new(4.0, 4.0, 4.0), Vec3::splat(1.0)).unwrap();
    let m = BlockModel::regular(spec, [3, 3, 3], A);
    let surfaces = vec![
        Surface::new(height_field(-1.0, 13.0, 4, top)).unwrap(),
        Surface::new(height_field(-1.0, 13.0, 4, bottom)).unwrap(),
    ];
    let ins = vec![
        TaggingInstruction::new("top", Vec3::Z, -1, -1, B, true).unwrap(),
        TaggingInstruction::new("bottom", Vec3::Z, B, -1, -1, true).unwrap(),
    ];
    let r = restructure(&m, &PipelineConfig::new(surfaces, ins)).unwrap();
    assert_eq!(r.model.total_cells(), m.total_cells());
    let s = r.model.spec;
    let mut tagged = 0;
    for b in &r.model.blocks {
        // forced sides by majority of cell centroids, ties above
        let side = |f: fn(f64, f64) -> f64| {
            let (mut a, mut d) = (0, 0);
            for n in b.cells.cells() {
                let c = s.cell_centroid(b.parent, n);
                if c.z > f(c.x, c.y) {
                    a += 1
                } else {
                    d += 1
                }
            }
            if a >= d {
                1
            } else {
                -1
            }
        };
        let want = if side(top) == -1 && side(bottom) == 1 { B } else { A };
        assert_eq!(b.label, want, "block {:?} in {:?}", b.cells, b.parent);
        if b.label == B {
            tagged += b.cells.volume();
        }
    }
    assert!(tagged > 0 && tagged < r.model.total_cells());
}

#[test]
fn abstract_labels() {
    for n in 0..3usize {
        for sigma in [-1i8, 0, 1] {
            assert_eq!(abstract_label(n, sigma), 2 * (n as i64 + 1) - sigma as i64);
        }
    }
}

fn block(label: i64, s: &[i8]) -> TagInput {
    TagInput { label, signs: s.iter().map(|&x| Some(SurfaceSign::side(x))).collect() }
}

proptest! {
    #[test]
    fn monotone_stacks_are_consistent(below in 0usize..5, across in 0usize..3, above in 0usize..5) {
        let mut s = vec![-1i8; below];
        s.extend(std::iter::repeat_n(0, across));
        s.extend(std::iter::repeat_n(1, above));
        prop_assume!(!s.is_empty());
        let (k, sg) = affiliated_surface(&s).unwrap();
        if across > 0 {
            prop_assert_eq!((k, sg), (below, 0));
        } else if below == 0 {
            prop_assert_eq!((k, sg), (0, 1));
        } else {
            prop_assert_eq!((k, sg), (below - 1, -1));
        }
    }

    #[test]
    fn non_monotone_stacks_rejected(s in prop::collection::vec(prop_oneof![Just(-1i8), Just(0), Just(1)], 2..7)) {
        let rank = |x: i8| x + 1;
        let monotone = s.windows(2).all(|w| rank(w[0]) <= rank(w[1]));
        prop_assert_eq!(affiliated_surface(&s).is_ok(), monotone);
    }

    #[test]
    fn zero_lambda_gives_abstract_label(sig in prop_oneof![Just(-1i8), Just(1)], label in -5i64..5) {
        let ins = vec![TaggingInstruction::new("s", Vec3::Z, 0, 0, 0, false).unwrap()];
        let got = tag_block(&block(label, &[sig]), &ins, TagMode::Affiliated).unwrap();
        prop_assert_eq!(got, abstract_label(0, sig));
    }

    #[test]
    fn negative_lambda_retains(sig in prop_oneof![Just(-1i8), Just(0), Just(1)], label in -5i64..5) {
        let ins = vec![TaggingInstruction::new("s", Vec3::Z, -1, -2, -3, false).unwrap()];
        for mode in [TagMode::Affiliated, TagMode::Sequential] {
            prop_assert_eq!(tag_block(&block(label, &[sig]), &ins, mode).unwrap(), label);
        }
    }
}
