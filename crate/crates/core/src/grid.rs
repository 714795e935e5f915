//! Uniform rectangular lattices and the domains carved out of them.
//!
//! A `Grid` is a 1-, 2- or 3-dimensional array of cells with one spacing `h`
//! for every axis. Cells are indexed row-major, last axis fastest, and the
//! cell with multi-index i has its center at (i + 1/2) h per axis. A
//! `Domain` adds an open-set mask and, for every cell, the distance to the
//! nearest cell outside the set. All stencil admissibility questions reduce
//! to comparisons against that distance.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Periodic in every axis.
    Torus,
    /// Bounded box; everything beyond the grid counts as outside the domain.
    Box,
}

impl Topology {
    pub fn name(&self) -> &'static str {
        match self {
            Topology::Torus => "torus",
            Topology::Box => "box",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    shape: Vec<usize>,
    spacing: f64,
    topology: Topology,
}

impl Grid {
    pub fn new(shape: &[usize], spacing: f64, topology: Topology) -> Result<Grid> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(Error::Parameter(format!(
                "grid dimension must be 1..=3, got {}",
                shape.len()
            )));
        }
        if shape.iter().any(|&n| n < 4) {
            return Err(Error::Parameter(format!(
                "every axis needs at least 4 cells, got {:?}",
                shape
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Parameter(format!("spacing must be positive, got {spacing}")));
        }
        Ok(Grid {
            shape: shape.to_vec(),
            spacing,
            topology,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn topology(&self) -> Topology {
        self.topology
    }

    #[inline]
    pub fn ncells(&self) -> usize {
        self.shape.iter().product()
    }

    /// Physical side length per axis.
    pub fn side(&self, axis: usize) -> f64 {
        self.shape[axis] as f64 * self.spacing
    }

    pub fn min_shape(&self) -> usize {
        *self.shape.iter().min().unwrap()
    }

    /// Row-major strides, padded to three entries.
    pub fn strides(&self) -> [usize; 3] {
        let mut s = [0usize; 3];
        let d = self.dim();
        s[d - 1] = 1;
        for a in (0..d - 1).rev() {
            s[a] = s[a + 1] * self.shape[a + 1];
        }
        s
    }

    /// Multi-index of a linear cell index, padded to three entries.
    #[inline]
    pub fn coords_of(&self, mut idx: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        for a in (0..self.dim()).rev() {
            c[a] = idx % self.shape[a];
            idx /= self.shape[a];
        }
        c
    }

    #[inline]
    pub fn index_of(&self, coords: &[usize; 3]) -> usize {
        let mut idx = 0;
        for a in 0..self.dim() {
            idx = idx * self.shape[a] + coords[a];
        }
        idx
    }

    /// Cell reached from `coords` by the integer offset `delta`. Wraps on a
    /// torus; `None` when the target leaves a box grid.
    pub fn offset_index(&self, coords: &[usize; 3], delta: &[i32; 3]) -> Option<usize> {
        let mut target = [0usize; 3];
        for a in 0..self.dim() {
            let t = coords[a] as i64 + delta[a] as i64;
            let n = self.shape[a] as i64;
            match self.topology {
                Topology::Torus => target[a] = t.rem_euclid(n) as usize,
                Topology::Box => {
                    if t < 0 || t >= n {
                        return None;
                    }
                    target[a] = t as usize;
                }
            }
        }
        Some(self.index_of(&target))
    }

    pub fn cell_center(&self, idx: usize) -> [f64; 3] {
        let c = self.coords_of(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim() {
            x[a] = (c[a] as f64 + 0.5) * self.spacing;
        }
        x
    }

    /// Signed displacement (in cells) from cell `from` to cell `to`, taking
    /// the minimal image on a torus.
    pub fn displacement(&self, from: usize, to: usize) -> [i32; 3] {
        let cf = self.coords_of(from);
        let ct = self.coords_of(to);
        let mut d = [0i32; 3];
        for a in 0..self.dim() {
            let mut delta = ct[a] as i64 - cf[a] as i64;
            if self.topology == Topology::Torus {
                let n = self.shape[a] as i64;
                delta = (delta + n / 2).rem_euclid(n) - n / 2;
            }
            d[a] = delta as i32;
        }
        d
    }
}

/// Open subset of a grid: a mask plus the distance from every cell center to
/// the nearest center outside the set. On a box, the lattice continues
/// virtually beyond the walls and counts as outside, so a full-mask box cell
/// adjacent to the wall has distance h. A full torus has no outside at all
/// and reports infinity.
#[derive(Debug, Clone)]
pub struct Domain {
    grid: Grid,
    mask: Vec<bool>,
    boundary_distance: Vec<f64>,
    active: usize,
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.mask == other.mask
    }
}

impl Domain {
    pub fn full(grid: Grid) -> Result<Domain> {
        let n = grid.ncells();
        Domain::with_mask(grid, vec![true; n])
    }

    pub fn with_mask(grid: Grid, mask: Vec<bool>) -> Result<Domain> {
        if mask.len() != grid.ncells() {
            return Err(Error::Domain(format!(
                "mask has {} cells, grid has {}",
                mask.len(),
                grid.ncells()
            )));
        }
        let active = mask.iter().filter(|&&m| m).count();
        if active == 0 {
            return Err(Error::Domain("mask is empty".into()));
        }
        let boundary_distance = compute_boundary_distance(&grid, &mask);
        let h = grid.spacing();
        let deep = boundary_distance
            .iter()
            .zip(&mask)
            .any(|(&d, &m)| m && d >= 2.0 * h - 1e-12 * h);
        if !deep {
            return Err(Error::Domain(
                "mask has no interior cell (need boundary distance >= 2h somewhere)".into(),
            ));
        }
        Ok(Domain {
            grid,
            mask,
            boundary_distance,
            active,
        })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn is_in(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    #[inline]
    pub fn boundary_distance(&self, idx: usize) -> f64 {
        self.boundary_distance[idx]
    }

    pub fn boundary_distances(&self) -> &[f64] {
        &self.boundary_distance
    }

    /// Number of cells inside the mask.
    #[inline]
    pub fn active_cells(&self) -> usize {
        self.active
    }

    pub fn max_boundary_distance(&self) -> f64 {
        self.boundary_distance
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(&d, _)| d)
            .fold(0.0, f64::max)
    }

    /// Iterator over the linear indices of masked-in cells.
    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| if m { Some(i) } else { None })
    }

    /// Restriction of this domain to the discrete ball of `radius_cells`
    /// around `center` (intersected with the current mask).
    pub fn ball_subdomain(&self, center: usize, radius_cells: usize) -> Result<Domain> {
        let r2 = (radius_cells * radius_cells) as i64;
        let mut mask = vec![false; self.grid.ncells()];
        for idx in 0..self.grid.ncells() {
            if !self.mask[idx] {
                continue;
            }
            let d = self.grid.displacement(center, idx);
            let n2: i64 = (0..self.grid.dim()).map(|a| (d[a] as i64).pow(2)).sum();
            if n2 <= r2 {
                mask[idx] = true;
            }
        }
        Domain::with_mask(self.grid.clone(), mask)
    }
}

/// Distance from each cell center to the nearest complement cell center,
/// exact Euclidean, via the separable squared-distance transform. Periodic
/// axes are handled by tiling the line three times and reading the middle
/// copy, which is exact for any distance up to one period.
fn compute_boundary_distance(grid: &Grid, mask: &[bool]) -> Vec<f64> {
    const FAR: f64 = 1e30;
    let h = grid.spacing();
    let n = grid.ncells();
    let dim = grid.dim();
    let has_outside_cells = mask.iter().any(|&m| !m);

    let mut inside = vec![f64::INFINITY; n];
    if has_outside_cells {
        let mut d: Vec<f64> = mask.iter().map(|&m| if m { FAR } else { 0.0 }).collect();
        for axis in 0..dim {
            transform_axis(grid, &mut d, axis);
        }
        for i in 0..n {
            inside[i] = if d[i] >= FAR { f64::INFINITY } else { d[i].sqrt() * h };
        }
    }

    (0..n)
        .map(|i| {
            if !mask[i] {
                return 0.0;
            }
            let wall = match grid.topology() {
                Topology::Torus => f64::INFINITY,
                Topology::Box => {
                    let c = grid.coords_of(i);
                    let cells = (0..dim)
                        .map(|a| (c[a] + 1).min(grid.shape()[a] - c[a]))
                        .min()
                        .unwrap();
                    cells as f64 * h
                }
            };
            inside[i].min(wall)
        })
        .collect()
}

fn transform_axis(grid: &Grid, d: &mut [f64], axis: usize) {
    let n_axis = grid.shape()[axis];
    let stride = grid.strides()[axis];
    let periodic = grid.topology() == Topology::Torus;
    let line_len = if periodic { 3 * n_axis } else { n_axis };

    let mut f = vec![0.0; line_len];
    let mut out = vec![0.0; line_len];
    let mut v = vec![0usize; line_len];
    let mut z = vec![0.0; line_len + 1];

    // Enumerate all lines along `axis`: iterate cells whose coordinate on
    // the axis is zero, then walk the stride.
    let ncells = grid.ncells();
    for start in 0..ncells {
        if grid.coords_of(start)[axis] != 0 {
            continue;
        }
        for j in 0..n_axis {
            let val = d[start + j * stride];
            if periodic {
                f[j] = val;
                f[j + n_axis] = val;
                f[j + 2 * n_axis] = val;
            } else {
                f[j] = val;
            }
        }
        dt1d(&f, &mut out, &mut v, &mut z);
        for j in 0..n_axis {
            let o = if periodic { out[j + n_axis] } else { out[j] };
            d[start + j * stride] = o;
        }
    }
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
fn dt1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                v[k + 1] = q;
                z[k + 1] = s;
                z[k + 2] = f64::INFINITY;
                k += 1;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        d[q] = dq * dq + f[v[k]];
    }
}
