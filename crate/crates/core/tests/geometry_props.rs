mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use symmargin::prelude::*;

use common::rect;

fn grid_strategy() -> impl Strategy<Value = UniformGrid> {
    (1usize..12, 1usize..12, -5.0f64..5.0, -5.0f64..5.0, 0.5f64..8.0, 0.5f64..8.0).prop_map(
        |(n0, n1, x0, y0, w0, w1)| {
            UniformGrid::new(rect(&[x0, y0], &[x0 + w0, y0 + w1]), vec![n0, n1], vec![false, false]).unwrap()
        },
    )
}

/// A box given in domain-relative coordinates `t ∈ [-0.3, 1.3]`.
fn rel_box(grid: &UniformGrid, t: [f64; 4]) -> HyperRect {
    let dom = grid.domain();
    let at = |d: usize, s: f64| dom.lo()[d] + s * dom.width(d);
    let (a, b) = (t[0].min(t[1]), t[0].max(t[1]));
    let (c, e) = (t[2].min(t[3]), t[2].max(t[3]));
    rect(&[at(0, a), at(1, c)], &[at(0, b), at(1, e)])
}

fn brute_cover(grid: &UniformGrid, r: &HyperRect) -> (BTreeSet<usize>, bool) {
    let cells = (0..grid.num_cells())
        .filter(|&c| grid.cell_bounds(CellId::Cell(c)).unwrap().intersects(r))
        .collect();
    let dom = grid.domain();
    let interior = (0..2).all(|d| dom.lo()[d] < r.lo()[d] && r.hi()[d] < dom.hi()[d]);
    (cells, !interior)
}

fn block_set(grid: &UniformGrid, b: &CellBlock) -> BTreeSet<usize> {
    grid.block_cells(b).collect()
}

proptest! {
    #[test]
    fn quantize_partitions_the_domain(grid in grid_strategy(), s in 0.0f64..=1.0, t in 0.0f64..=1.0) {
        let dom = grid.domain();
        let x = [dom.lo()[0] + s * dom.width(0), dom.lo()[1] + t * dom.width(1)];
        let q = grid.quantize(&x);
        let bounds = grid.cell_bounds(q).unwrap();
        prop_assert!(bounds.contains(&x));
        // no other cell claims x in its half-open box
        let owners = (0..grid.num_cells())
            .filter(|&c| {
                let b = grid.cell_bounds(CellId::Cell(c)).unwrap();
                (0..2).all(|d| {
                    let top = grid.multi_index(c)[d] + 1 == grid.counts()[d];
                    b.lo()[d] <= x[d] && (x[d] < b.hi()[d] || (top && x[d] <= b.hi()[d]))
                })
            })
            .count();
        prop_assert_eq!(owners, 1);
    }

    #[test]
    fn outside_points_overflow(grid in grid_strategy(), s in 1.001f64..2.0, t in 0.0f64..1.0) {
        let dom = grid.domain();
        let x = [dom.lo()[0] + s * dom.width(0), dom.lo()[1] + t * dom.width(1)];
        prop_assert_eq!(grid.quantize(&x), CellId::Overflow);
    }

    #[test]
    fn covering_block_matches_closed_intersection(grid in grid_strategy(), t in prop::array::uniform4(-0.3f64..1.3)) {
        let r = rel_box(&grid, t);
        let block = grid.covering_block(&r);
        let (cells, overflow) = brute_cover(&grid, &r);
        prop_assert_eq!(block_set(&grid, &block), cells);
        prop_assert_eq!(block.overflow, overflow);
    }

    #[test]
    fn inflation_by_the_margin_is_tight(grid in grid_strategy(), t in prop::array::uniform4(-0.3f64..1.3)) {
        let r = rel_box(&grid, t);
        let block = grid.covering_block(&r);
        let m = grid.block_margin(&r, &block);
        prop_assert!(m >= 0.0);
        if m.is_finite() && m > 1e-6 {
            let inside = grid.covering_block(&r.inflate(0.99 * m).unwrap());
            prop_assert!(block_set(&grid, &inside).is_subset(&block_set(&grid, &block)));
            prop_assert!(!inside.overflow || block.overflow);
            let outside = grid.covering_block(&r.inflate(1.01 * m).unwrap());
            let escapes = !block_set(&grid, &outside).is_subset(&block_set(&grid, &block))
                || (outside.overflow && !block.overflow);
            prop_assert!(escapes);
        }
    }

    #[test]
    fn interior_boxes_have_positive_margin(grid in grid_strategy(), t in prop::array::uniform4(0.001f64..0.999)) {
        let r = rel_box(&grid, t);
        let block = grid.covering_block(&r);
        prop_assert!(!block.overflow);
        prop_assert!(grid.block_margin(&r, &block) > 0.0);
    }

    #[test]
    fn margin_grows_with_the_block(grid in grid_strategy(), t in prop::array::uniform4(-0.3f64..1.3), grow in prop::array::uniform4(0u32..3)) {
        let r = rel_box(&grid, t);
        let small = grid.covering_block(&r);
        prop_assume!(!small.has_no_cells());
        let mut big = small.clone();
        for d in 0..2 {
            let n = grid.counts()[d] as u32;
            let start = small.ranges[d].start.saturating_sub(grow[2 * d]);
            let end = (small.ranges[d].start + small.ranges[d].len + grow[2 * d + 1]).min(n);
            big.ranges[d].start = start;
            big.ranges[d].len = end - start;
        }
        prop_assert!(block_set(&grid, &small).is_subset(&block_set(&grid, &big)));
        prop_assert!(grid.block_margin(&r, &small) <= grid.block_margin(&r, &big));
        let mut with_overflow = big.clone();
        with_overflow.overflow = true;
        prop_assert!(grid.block_margin(&r, &big) <= grid.block_margin(&r, &with_overflow));
    }

    #[test]
    fn periodic_cover_wraps(n in 3usize..20, c in -10.0f64..10.0, w in 0.0f64..1.5) {
        let p = std::f64::consts::PI;
        let grid = UniformGrid::new(rect(&[0.0, -p], &[1.0, p]), vec![1, n], vec![false, true]).unwrap();
        let r = rect(&[0.2, c - w], &[0.8, c + w]);
        let block = grid.covering_block(&r);
        prop_assert!(!block.overflow);
        let h = 2.0 * p / n as f64;
        // a cell belongs to the block iff some translate of it meets r
        for j in 0..n {
            let lo = -p + j as f64 * h;
            let hit = (-4..=4).any(|k: i32| {
                let s = lo + k as f64 * 2.0 * p;
                s <= r.hi()[1] && r.lo()[1] <= s + h
            });
            let near_face = (-4..=4).any(|k: i32| {
                let s = lo + k as f64 * 2.0 * p;
                (s - r.hi()[1]).abs() < 1e-7 || (s + h - r.lo()[1]).abs() < 1e-7
            });
            if !near_face {
                prop_assert_eq!(grid.block_contains(&block, CellId::Cell(j)), hit);
            }
        }
        prop_assert!(grid.block_margin(&r, &block) > 0.0);
    }
}

#[test]
fn spec_margin_example() {
    // reach box [3.62375, 3.73875]x[2.645, 2.73] on 80x160 over [0,6]x[-6,6]
    let grid = UniformGrid::new(rect(&[0.0, -6.0], &[6.0, 6.0]), vec![80, 160], vec![false, false]).unwrap();
    let r = rect(&[3.62375, 2.645], &[3.73875, 2.73]);
    let block = grid.covering_block(&r);
    let m = grid.block_margin(&r, &block);
    // nearest faces: 3.6 and 3.75 on axis 0, 2.625 and 2.775 on axis 1
    let oracle = [3.62375 - 3.6, 3.75 - 3.73875, 2.645 - 2.625, 2.775 - 2.73]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    assert!((m - oracle).abs() < 1e-12, "{m} vs {oracle}");
}
