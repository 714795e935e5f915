//! Radial smoothing kernel used by the smoothed maximal operator.
//!
//! Profile: phi(s) = (1 - s^2)^4 on [0, 1), zero outside. Each dilation is
//! sampled on the lattice and renormalized so the discrete weights sum to
//! exactly one; the continuum normalization constant is kept only as a
//! reported figure.

use crate::error::{Error, Result};
use crate::grid::{Domain, Topology};
use crate::stencil::{Stencil, StencilSet};

pub fn profile(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        let t = 1.0 - s * s;
        t * t * t * t
    }
}

pub fn profile_derivative(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        let t = 1.0 - s * s;
        -8.0 * s * t * t * t
    }
}

#[derive(Debug, Clone)]
pub struct Mollifier {
    /// Kernel stencil per ladder radius, aligned with `StencilSet::radii`;
    /// entry 0 (radius zero) stays `None`.
    kernels: Vec<Option<Stencil>>,
    /// sup |phi'| over [0, 1); enters the layer-cake bound on convolutions.
    pub c_phi: f64,
    /// Continuum normalization 1 / integral(phi(|x|) dx) for this dimension.
    pub continuum_norm: f64,
}

impl Mollifier {
    pub fn build(domain: &Domain, stencils: &StencilSet) -> Result<Mollifier> {
        let grid = domain.grid();
        let dim = grid.dim();
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

        let mut kernels = Vec::with_capacity(stencils.len());
        for (k, &m) in stencils.radii_cells().iter().enumerate() {
            if k == 0 {
                kernels.push(None);
                continue;
            }
            let mi = m as i64;
            // Support is the open ball |d| < m.
            let sup2 = mi * mi - 1;
            let mut offsets = Vec::new();
            let mut weights = Vec::new();
            let b = |axis: usize| ((-mi).max(lo(axis)), mi.min(hi(axis)));
            let (x0, x1) = b(0);
            for dx in x0..=x1 {
                let (y0, y1) = if dim > 1 { b(1) } else { (0, 0) };
                for dy in y0..=y1 {
                    let (z0, z1) = if dim > 2 { b(2) } else { (0, 0) };
                    for dz in z0..=z1 {
                        let n2 = dx * dx + dy * dy + dz * dz;
                        if n2 > sup2 {
                            continue;
                        }
                        let s = (n2 as f64).sqrt() / m as f64;
                        offsets.push([dx as i32, dy as i32, dz as i32]);
                        weights.push(profile(s));
                    }
                }
            }
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Domain(format!("degenerate kernel at radius {m}")));
            }
            for w in weights.iter_mut() {
                *w /= total;
            }
            let reach = offsets
                .iter()
                .map(|d| {
                    let n2: i64 = d.iter().map(|&x| (x as i64) * (x as i64)).sum();
                    (n2 as f64).sqrt() * grid.spacing()
                })
                .fold(0.0, f64::max);
            kernels.push(Some(Stencil {
                radius: m as f64 * grid.spacing(),
                offsets,
                weights,
                reach,
            }));
        }

        Ok(Mollifier {
            kernels,
            c_phi: sup_abs_derivative(),
            continuum_norm: continuum_normalization(dim),
        })
    }

    #[inline]
    pub fn kernel(&self, k: usize) -> Option<&Stencil> {
        self.kernels.get(k).and_then(|s| s.as_ref())
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }
}

/// max |phi'| on [0, 1), attained at s = 1/sqrt(7).
fn sup_abs_derivative() -> f64 {
    let s = 1.0 / 7.0f64.sqrt();
    profile_derivative(s).abs()
}

/// 1 / (sigma_{n-1} * int_0^1 phi(s) s^(n-1) ds) by Simpson quadrature.
fn continuum_normalization(dim: usize) -> f64 {
    let sigma = match dim {
        1 => 2.0,
        2 => std::f64::consts::TAU,
        _ => 4.0 * std::f64::consts::PI,
    };
    let n = 4096;
    let dt = 1.0 / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let a = i as f64 * dt;
        let m = a + 0.5 * dt;
        let b = a + dt;
        let g = |s: f64| profile(s) * s.powi(dim as i32 - 1);
        acc += dt / 6.0 * (g(a) + 4.0 * g(m) + g(b));
    }
    1.0 / (sigma * acc)
}
