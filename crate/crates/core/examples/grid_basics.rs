//! Quantizing states, covering a box with cells, and measuring how far the
//! box can grow before it meets a cell outside its cover.

use symmargin::prelude::*;

fn main() -> Result<()> {
    let domain = HyperRect::new(vec![0.0, -6.0], vec![6.0, 6.0])?;
    let grid = UniformGrid::new(domain, vec![80, 160], vec![false, false])?;

    let x = [2.2, 3.2];
    let q = grid.quantize(&x);
    println!("{x:?} lies in {q:?} = {:?}", grid.cell_bounds(q)?);
    println!("[7.0, 0.0] lies in {:?}", grid.quantize(&[7.0, 0.0]));

    let r = HyperRect::new(vec![3.62375, 2.645], vec![3.73875, 2.73])?;
    let block = grid.covering_block(&r);
    println!(
        "box {:?}..{:?} meets {} cells (overflow: {})",
        r.lo(),
        r.hi(),
        grid.block_cell_count(&block),
        block.overflow
    );
    println!("margin of the box inside its cover: {:.6}", grid.block_margin(&r, &block));
    for (d, [lo, hi]) in grid.side_gaps(&r, &block).into_iter().enumerate() {
        println!("  axis {d}: gap {lo:.5} below, {hi:.5} above");
    }
    Ok(())
}
