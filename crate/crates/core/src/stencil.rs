//! Radius ladder and the ball / shell stencils hanging off it.
//!
//! Radii are integer multiples of the grid spacing, so membership tests are
//! exact integer arithmetic: a cell offset d belongs to the ball of radius
//! m*h iff |d|^2 <= m^2, and to the shell (half-open annulus of width h)
//! iff m^2 - m + 1 <= |d|^2 <= m^2 + m. The ladder is geometric with ratio
//! 1.25, rounded up to whole cells, always contains 0 and h, and always
//! contains the cap radius itself so the largest admissible scale is not
//! missed by the geometric gaps.

use crate::error::{Error, Result};
use crate::grid::{Domain, Topology};

/// One averaging stencil: integer cell offsets with uniform weights.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub radius: f64,
    pub offsets: Vec<[i32; 3]>,
    pub weights: Vec<f64>,
    /// Largest |offset| * h over the stencil; admissibility at a cell x
    /// requires this to stay strictly below boundary_distance(x).
    pub reach: f64,
}

impl Stencil {
    fn uniform(radius: f64, spacing: f64, offsets: Vec<[i32; 3]>) -> Stencil {
        let w = 1.0 / offsets.len() as f64;
        let reach = offsets
            .iter()
            .map(|d| {
                let n2: i64 = d.iter().map(|&x| (x as i64) * (x as i64)).sum();
                (n2 as f64).sqrt() * spacing
            })
            .fold(0.0, f64::max);
        let weights = vec![w; offsets.len()];
        Stencil {
            radius,
            offsets,
            weights,
            reach,
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Ball and shell stencils for every ladder radius of a domain.
#[derive(Debug, Clone)]
pub struct StencilSet {
    radii: Vec<f64>,
    radii_cells: Vec<usize>,
    balls: Vec<Stencil>,
    /// Indexed like `radii`; entry 0 (radius zero) has no shell.
    shells: Vec<Option<Stencil>>,
    spacing: f64,
}

impl StencilSet {
    pub fn build(domain: &Domain) -> Result<StencilSet> {
        let grid = domain.grid();
        let h = grid.spacing();
        let cap = cap_cells(domain);
        if cap < 1 {
            return Err(Error::Domain("domain too thin for any positive radius".into()));
        }
        let radii_cells = ladder_cells(cap);
        let dim = grid.dim();

        // Canonical residue range per axis keeps torus stencils free of
        // double counting when a ball wraps around: delta in (-N/2, N/2].
        let lo = |axis: usize| -> i64 {
            match grid.topology() {
                Topology::Torus => -((grid.shape()[axis] as i64 - 1) / 2),
                Topology::Box => i64::MIN / 2,
            }
        };
        let hi = |axis: usize| -> i64 {
            match grid.topology() {
                Topology::Torus => grid.shape()[axis] as i64 / 2,
                Topology::Box => i64::MAX / 2,
            }
        };

        let mut balls = Vec::with_capacity(radii_cells.len());
        let mut shells = Vec::with_capacity(radii_cells.len());
        for &m in &radii_cells {
            let mi = m as i64;
            let ball_max = mi * mi;
            let shell_min = mi * mi - mi + 1;
            let shell_max = mi * mi + mi;
            let mut ball = Vec::new();
            let mut shell = Vec::new();
            let bound = |axis: usize| -> (i64, i64) {
                // Shell cells reach just past m, so scan one cell further.
                let b = mi + 1;
                ((-b).max(lo(axis)), b.min(hi(axis)))
            };
            let (x0, x1) = bound(0);
            for dx in x0..=x1 {
                let (y0, y1) = if dim > 1 { bound(1) } else { (0, 0) };
                for dy in y0..=y1 {
                    let (z0, z1) = if dim > 2 { bound(2) } else { (0, 0) };
                    for dz in z0..=z1 {
                        let n2 = dx * dx + dy * dy + dz * dz;
                        let off = [dx as i32, dy as i32, dz as i32];
                        if n2 <= ball_max {
                            ball.push(off);
                        }
                        if m > 0 && n2 >= shell_min && n2 <= shell_max {
                            shell.push(off);
                        }
                    }
                }
            }
            balls.push(Stencil::uniform(m as f64 * h, h, ball));
            if m == 0 {
                shells.push(None);
            } else {
                debug_assert!(!shell.is_empty(), "empty shell at radius {m}");
                shells.push(Some(Stencil::uniform(m as f64 * h, h, shell)));
            }
        }

        Ok(StencilSet {
            radii: radii_cells.iter().map(|&m| m as f64 * h).collect(),
            radii_cells,
            balls,
            shells,
            spacing: h,
        })
    }

    #[inline]
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    #[inline]
    pub fn radii_cells(&self) -> &[usize] {
        &self.radii_cells
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    #[inline]
    pub fn ball(&self, k: usize) -> &Stencil {
        &self.balls[k]
    }

    #[inline]
    pub fn shell(&self, k: usize) -> Option<&Stencil> {
        self.shells[k].as_ref()
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Ladder index whose radius matches `r` (integer multiple of h).
    pub fn index_of_radius(&self, r: f64) -> Result<usize> {
        let m = (r / self.spacing).round();
        if (m * self.spacing - r).abs() > 1e-9 * self.spacing {
            return Err(Error::Parameter(format!(
                "radius {r} is not a whole number of cells"
            )));
        }
        self.radii_cells
            .iter()
            .position(|&mc| mc == m as usize)
            .ok_or_else(|| Error::Parameter(format!("radius {r} is not on the ladder")))
    }
}

/// Largest radius (in cells) any stencil may use. Half the shortest axis on
/// a torus; on a box, the largest whole-cell radius strictly below the
/// deepest boundary distance.
fn cap_cells(domain: &Domain) -> usize {
    let grid = domain.grid();
    match grid.topology() {
        Topology::Torus => grid.min_shape() / 2,
        Topology::Box => {
            let bd = domain.max_boundary_distance() / grid.spacing();
            let mut m = bd.ceil() as usize;
            while m > 0 && m as f64 >= bd - 1e-9 {
                m -= 1;
            }
            m
        }
    }
}

/// Geometric ladder {0, 1, ceil(1.25^k), ..., cap} in cells, deduplicated.
fn ladder_cells(cap: usize) -> Vec<usize> {
    let mut out = vec![0usize];
    let mut x: f64 = 1.0;
    loop {
        let m = x.ceil() as usize;
        if m >= cap {
            break;
        }
        if *out.last().unwrap() != m {
            out.push(m);
        }
        x *= 1.25;
    }
    if cap > 0 {
        out.push(cap);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_abs_diff_eq;

    fn torus(shape: &[usize]) -> Domain {
        Domain::full(Grid::new(shape, 1.0 / shape[0] as f64, Topology::Torus).unwrap()).unwrap()
    }

    #[test]
    fn ladder_shape() {
        assert_eq!(ladder_cells(32), vec![0, 1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 19, 23, 29, 32]);
        assert_eq!(ladder_cells(4), vec![0, 1, 2, 3, 4]);
        assert_eq!(ladder_cells(1), vec![0, 1]);
    }

    #[test]
    fn zero_radius_ball_is_the_cell() {
        let dom = torus(&[16, 16]);
        let s = StencilSet::build(&dom).unwrap();
        assert_eq!(s.radii()[0], 0.0);
        assert_eq!(s.ball(0).offsets, vec![[0, 0, 0]]);
        assert_eq!(s.ball(0).weights, vec![1.0]);
        assert!(s.shell(0).is_none());
    }

    #[test]
    fn weights_are_uniform_and_sum_to_one() {
        let dom = torus(&[32, 32]);
        let s = StencilSet::build(&dom).unwrap();
        for k in 0..s.len() {
            let total: f64 = s.ball(k).weights.iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            if let Some(sh) = s.shell(k) {
                let total: f64 = sh.weights.iter().sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
                assert!(!sh.is_empty());
            }
        }
    }

    #[test]
    fn shell_window_in_1d() {
        let grid = Grid::new(&[64], 0.5, Topology::Torus).unwrap();
        let dom = Domain::full(grid).unwrap();
        let s = StencilSet::build(&dom).unwrap();
        let k = s.index_of_radius(1.5).unwrap(); // 3 cells
        let sh = s.shell(k).unwrap();
        let mut xs: Vec<i32> = sh.offsets.iter().map(|d| d[0]).collect();
        xs.sort();
        assert_eq!(xs, vec![-3, 3]);
    }

    #[test]
    fn ball_counts_2d() {
        let dom = torus(&[64, 64]);
        let s = StencilSet::build(&dom).unwrap();
        let k = s.index_of_radius(s.spacing() * 5.0).unwrap();
        assert_eq!(s.ball(k).len(), 81);
    }

    #[test]
    fn torus_cap_ball_covers_grid_once_in_1d() {
        let grid = Grid::new(&[16], 1.0, Topology::Torus).unwrap();
        let dom = Domain::full(grid).unwrap();
        let s = StencilSet::build(&dom).unwrap();
        let last = s.len() - 1;
        assert_eq!(s.radii_cells()[last], 8);
        // Canonical residues: exactly one offset per cell of the circle.
        assert_eq!(s.ball(last).len(), 16);
    }

    #[test]
    fn box_cap_stays_inside() {
        let grid = Grid::new(&[512], 1.0 / 512.0, Topology::Box).unwrap();
        let dom = Domain::full(grid).unwrap();
        let s = StencilSet::build(&dom).unwrap();
        let cap = *s.radii_cells().last().unwrap();
        // Deepest cell has boundary distance 256 h; the cap must sit
        // strictly below it.
        assert_eq!(cap, 255);
    }

    #[test]
    fn reach_exceeds_radius_on_shells() {
        let dom = torus(&[64, 64]);
        let s = StencilSet::build(&dom).unwrap();
        let k = s.index_of_radius(s.spacing() * 4.0).unwrap();
        let sh = s.shell(k).unwrap();
        assert!(sh.reach > sh.radius);
        assert!(sh.reach < sh.radius + s.spacing());
        let b = s.ball(k);
        assert!(b.reach <= b.radius + 1e-12);
    }
}
