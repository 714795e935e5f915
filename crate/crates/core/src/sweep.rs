//! Shared low-level machinery for applying stencils at grid cells.
//!
//! Torus lookups go through per-axis wrap tables so the inner loops stay
//! branch-free; box lookups add a precomputed linear delta, which is valid
//! exactly because admissible stencils never leave the grid. Both the fast
//! and the oracle operator modes run the same loops in the same order, so
//! their floating-point results are identical bit for bit.

use crate::grid::{Domain, Grid, Topology};
use crate::stencil::Stencil;

pub(crate) struct Indexer {
    dim: usize,
    torus: bool,
    pad: usize,
    /// Per axis: table[c + off + pad] = wrapped coordinate * stride.
    tables: [Vec<usize>; 3],
    strides: [usize; 3],
}

impl Indexer {
    pub fn new(grid: &Grid, max_offset_cells: usize) -> Indexer {
        let dim = grid.dim();
        let strides = grid.strides();
        let pad = max_offset_cells;
        let mut tables: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        if grid.topology() == Topology::Torus {
            for a in 0..dim {
                let n = grid.shape()[a] as i64;
                let table = (0..(grid.shape()[a] + 2 * pad))
                    .map(|j| ((j as i64 - pad as i64).rem_euclid(n) as usize) * strides[a])
                    .collect();
                tables[a] = table;
            }
        }
        Indexer {
            dim,
            torus: grid.topology() == Topology::Torus,
            pad,
            tables,
            strides,
        }
    }

    /// Linear index of `coords + off`. On a box the caller must have
    /// checked admissibility.
    #[inline]
    pub fn at(&self, coords: &[usize; 3], off: &[i32; 3]) -> usize {
        if self.torus {
            let mut idx = 0;
            for a in 0..self.dim {
                idx += self.tables[a][(coords[a] as i64 + off[a] as i64 + self.pad as i64) as usize];
            }
            idx
        } else {
            let mut idx = 0;
            for a in 0..self.dim {
                idx += (coords[a] as i64 + off[a] as i64) as usize * self.strides[a];
            }
            idx
        }
    }
}

/// Weighted sum of `map(values[...])` over a stencil anchored at `coords`.
#[inline]
pub(crate) fn stencil_sum(
    values: &[f64],
    indexer: &Indexer,
    coords: &[usize; 3],
    st: &Stencil,
    map: impl Fn(f64) -> f64,
) -> f64 {
    let mut acc = 0.0;
    for (off, &w) in st.offsets.iter().zip(&st.weights) {
        acc += w * map(values[indexer.at(coords, off)]);
    }
    acc
}

/// Weighted sum of |values[...] - c| over a stencil (oscillation pass).
#[inline]
pub(crate) fn stencil_osc(
    values: &[f64],
    indexer: &Indexer,
    coords: &[usize; 3],
    st: &Stencil,
    c: f64,
) -> f64 {
    let mut acc = 0.0;
    for (off, &w) in st.offsets.iter().zip(&st.weights) {
        acc += w * (values[indexer.at(coords, off)] - c).abs();
    }
    acc
}

/// A stencil may be used at a cell iff its farthest sample stays strictly
/// inside the domain. An infinite boundary distance (full torus) admits
/// everything; a masked-out cell (distance zero) admits nothing.
#[inline]
pub(crate) fn admissible(domain: &Domain, cell: usize, reach: f64) -> bool {
    reach < domain.boundary_distance(cell)
}
