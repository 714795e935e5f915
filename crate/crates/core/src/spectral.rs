//! Fourier analysis on the full torus: transforms, derivative symbols and
//! the spectral Poisson solve.
//!
//! Frequencies are signed integers in the symmetric range; for even axis
//! length the Nyquist bucket is represented by its positive value. Any
//! operator that behaves like a derivative (odd symbol) must send Nyquist
//! to zero or real inputs stop producing real outputs, so those symbols go
//! through [`FourierTransform::kappa_deriv`], which does exactly that. Even
//! nonnegative symbols may use the raw [`FourierTransform::kappa`].
//!
//! Transforms are unnormalized going forward; the inverse divides by the
//! cell count, so `inverse(forward(f)) == f` up to roundoff.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{Domain, Topology};

pub struct FourierTransform {
    domain: Arc<Domain>,
    shape: Vec<usize>,
    strides: [usize; 3],
    ncells: usize,
    dim: usize,
    plans_fwd: Vec<Arc<dyn Fft<f64>>>,
    plans_inv: Vec<Arc<dyn Fft<f64>>>,
}

impl FourierTransform {
    pub fn new(domain: &Arc<Domain>) -> Result<FourierTransform> {
        let grid = domain.grid();
        if grid.topology() != Topology::Torus {
            return Err(Error::Unsupported(
                "spectral operators need a periodic grid".into(),
            ));
        }
        if domain.active_cells() != grid.ncells() {
            return Err(Error::Unsupported(
                "spectral operators need the full torus, not a masked subset".into(),
            ));
        }
        let mut planner = FftPlanner::new();
        let mut plans_fwd = Vec::new();
        let mut plans_inv = Vec::new();
        for &n in grid.shape() {
            plans_fwd.push(planner.plan_fft_forward(n));
            plans_inv.push(planner.plan_fft_inverse(n));
        }
        Ok(FourierTransform {
            domain: domain.clone(),
            shape: grid.shape().to_vec(),
            strides: grid.strides(),
            ncells: grid.ncells(),
            dim: grid.dim(),
            plans_fwd,
            plans_inv,
        })
    }

    #[inline]
    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn ncells(&self) -> usize {
        self.ncells
    }

    /// Mode multi-index of a linear spectrum slot (same layout as cells).
    #[inline]
    pub fn mode_coords(&self, mut idx: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        for a in (0..self.dim).rev() {
            c[a] = idx % self.shape[a];
            idx /= self.shape[a];
        }
        c
    }

    /// Signed integer frequency of mode bucket `j` on `axis`; the Nyquist
    /// bucket of an even axis maps to +N/2.
    #[inline]
    pub fn freq(&self, axis: usize, j: usize) -> i64 {
        let n = self.shape[axis];
        if j <= n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    /// Physical wavenumber 2π·freq / side.
    #[inline]
    pub fn kappa(&self, axis: usize, j: usize) -> f64 {
        let side = self.shape[axis] as f64 * self.domain.grid().spacing();
        2.0 * PI * self.freq(axis, j) as f64 / side
    }

    /// Wavenumber for derivative symbols: as `kappa`, except the Nyquist
    /// bucket of an even axis is zeroed to keep real fields real.
    #[inline]
    pub fn kappa_deriv(&self, axis: usize, j: usize) -> f64 {
        let n = self.shape[axis];
        if n % 2 == 0 && j == n / 2 {
            0.0
        } else {
            self.kappa(axis, j)
        }
    }

    fn transform_axis(&self, data: &mut [Complex<f64>], axis: usize, inverse: bool) {
        let n = self.shape[axis];
        let stride = self.strides[axis];
        let plan = if inverse {
            &self.plans_inv[axis]
        } else {
            &self.plans_fwd[axis]
        };
        let mut line = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for start in 0..self.ncells {
            if (start / stride) % n != 0 {
                continue;
            }
            for j in 0..n {
                line[j] = data[start + j * stride];
            }
            plan.process_with_scratch(&mut line, &mut scratch);
            for j in 0..n {
                data[start + j * stride] = line[j];
            }
        }
    }

    /// Unnormalized forward transform of a real array.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let mut data: Vec<Complex<f64>> =
            values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        for axis in 0..self.dim {
            self.transform_axis(&mut data, axis, false);
        }
        data
    }

    /// Normalized inverse transform; returns the real part and the largest
    /// imaginary residue left behind (should be roundoff for any symbol
    /// with the proper conjugate symmetry).
    pub fn inverse(&self, mut data: Vec<Complex<f64>>) -> (Vec<f64>, f64) {
        for axis in 0..self.dim {
            self.transform_axis(&mut data, axis, true);
        }
        let scale = 1.0 / self.ncells as f64;
        let mut residue = 0.0f64;
        let values = data
            .iter()
            .map(|z| {
                residue = residue.max((z.im * scale).abs());
                z.re * scale
            })
            .collect();
        (values, residue)
    }

    fn realize(&self, data: Vec<Complex<f64>>, scale: f64, what: &str) -> Result<Vec<f64>> {
        let (values, residue) = self.inverse(data);
        if residue > 1e-12 * scale.max(1e-300) {
            return Err(Error::Domain(format!(
                "{what}: imaginary residue {residue:.3e} exceeds 1e-12 of scale {scale:.3e}"
            )));
        }
        Ok(values)
    }

    /// Spectral gradient (derivative symbols, Nyquist zeroed).
    pub fn gradient(&self, u: &ScalarField) -> Result<VectorField> {
        let spectrum = self.forward(u.values());
        let scale = u.max_abs();
        let mut comps = Vec::with_capacity(self.dim);
        for axis in 0..self.dim {
            let data: Vec<Complex<f64>> = spectrum
                .iter()
                .enumerate()
                .map(|(idx, &z)| {
                    let j = self.mode_coords(idx)[axis];
                    let k = self.kappa_deriv(axis, j);
                    Complex::new(0.0, k) * z
                })
                .collect();
            let values = self.realize(data, scale, "gradient")?;
            comps.push(ScalarField::from_values(self.domain.clone(), values)?);
        }
        VectorField::from_components(&comps)
    }

    /// Spectral divergence (derivative symbols, Nyquist zeroed).
    pub fn divergence(&self, v: &VectorField) -> Result<ScalarField> {
        let mut acc: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); self.ncells];
        let mut scale = 0.0f64;
        for axis in 0..self.dim {
            let comp = v.component(axis);
            scale = scale.max(comp.max_abs());
            let spectrum = self.forward(comp.values());
            for (idx, z) in spectrum.into_iter().enumerate() {
                let j = self.mode_coords(idx)[axis];
                let k = self.kappa_deriv(axis, j);
                acc[idx] += Complex::new(0.0, k) * z;
            }
        }
        let values = self.realize(acc, scale, "divergence")?;
        ScalarField::from_values(self.domain.clone(), values)
    }

    /// Mean-zero solution of Δu = rhs (modes the Laplacian cannot see are
    /// dropped, which includes the mean of rhs).
    pub fn poisson(&self, rhs: &ScalarField) -> Result<ScalarField> {
        let mut spectrum = self.forward(rhs.values());
        for (idx, z) in spectrum.iter_mut().enumerate() {
            let c = self.mode_coords(idx);
            let mut k2 = 0.0;
            for axis in 0..self.dim {
                let k = self.kappa_deriv(axis, c[axis]);
                k2 += k * k;
            }
            *z = if k2 > 0.0 {
                -*z / k2
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        let values = self.realize(spectrum, rhs.max_abs(), "poisson")?;
        ScalarField::from_values(self.domain.clone(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::rng::SplitMix64;
    use approx::assert_relative_eq;

    fn torus(shape: &[usize]) -> Arc<Domain> {
        let n = shape[0] as f64;
        let grid = Grid::new(shape, 1.0 / n, Topology::Torus).unwrap();
        Arc::new(Domain::full(grid).unwrap())
    }

    #[test]
    fn forward_inverse_round_trip() {
        for shape in [vec![16usize], vec![12, 20], vec![8, 6, 10]] {
            let dom = torus(&shape);
            let mut rng = SplitMix64::new(7);
            let f: Vec<f64> = (0..dom.grid().ncells()).map(|_| rng.normal()).collect();
            let ft = FourierTransform::new(&dom).unwrap();
            let (back, residue) = ft.inverse(ft.forward(&f));
            assert!(residue < 1e-12);
            for (a, b) in f.iter().zip(&back) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn parseval_holds() {
        let dom = torus(&[24, 24]);
        let mut rng = SplitMix64::new(8);
        let f: Vec<f64> = (0..dom.grid().ncells()).map(|_| rng.normal()).collect();
        let ft = FourierTransform::new(&dom).unwrap();
        let spec = ft.forward(&f);
        let direct: f64 = f.iter().map(|v| v * v).sum();
        let fourier: f64 =
            spec.iter().map(|z| z.norm_sqr()).sum::<f64>() / dom.grid().ncells() as f64;
        assert_relative_eq!(direct, fourier, max_relative = 1e-12);
    }

    #[test]
    fn gradient_of_single_mode_is_exact() {
        let dom = torus(&[32, 32]);
        let ft = FourierTransform::new(&dom).unwrap();
        let u = ScalarField::from_fn(dom.clone(), |x| (2.0 * PI * 3.0 * x[0]).sin()).unwrap();
        let g = ft.gradient(&u).unwrap();
        let want = ScalarField::from_fn(dom.clone(), |x| {
            2.0 * PI * 3.0 * (2.0 * PI * 3.0 * x[0]).cos()
        })
        .unwrap();
        for i in 0..dom.grid().ncells() {
            assert_relative_eq!(g.get(i, 0), want.get(i), epsilon = 1e-9);
            assert_relative_eq!(g.get(i, 1), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn divergence_is_adjoint_like_to_gradient() {
        // sum(div v * u) == -sum(<v, grad u>) on the torus.
        let dom = torus(&[16, 16]);
        let ft = FourierTransform::new(&dom).unwrap();
        let mut rng = SplitMix64::new(15);
        let n = dom.grid().ncells();
        let u = ScalarField::from_values(dom.clone(), (0..n).map(|_| rng.normal()).collect())
            .unwrap();
        let v = VectorField::from_values(
            dom.clone(),
            (0..2 * n).map(|_| rng.normal()).collect(),
        )
        .unwrap();
        let div_v = ft.divergence(&v).unwrap();
        let grad_u = ft.gradient(&u).unwrap();
        let lhs: f64 = (0..n).map(|i| div_v.get(i) * u.get(i)).sum();
        let rhs: f64 = -(0..n)
            .map(|i| (0..2).map(|a| v.get(i, a) * grad_u.get(i, a)).sum::<f64>())
            .sum::<f64>();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }

    #[test]
    fn poisson_inverts_laplacian_on_mean_zero_data() {
        let dom = torus(&[20, 20]);
        let ft = FourierTransform::new(&dom).unwrap();
        let u = ScalarField::from_fn(dom.clone(), |x| {
            (2.0 * PI * x[0]).sin() * (2.0 * PI * 2.0 * x[1]).cos()
        })
        .unwrap();
        // rhs = Δu for the known u.
        let k2 = (2.0 * PI).powi(2) * (1.0 + 4.0);
        let rhs = u.map(|v| -k2 * v).unwrap();
        let got = ft.poisson(&rhs).unwrap();
        for i in 0..dom.grid().ncells() {
            assert_relative_eq!(got.get(i), u.get(i), epsilon = 1e-10);
        }
    }

    #[test]
    fn derivative_symbols_kill_nyquist_and_mean() {
        let dom = torus(&[8]);
        let ft = FourierTransform::new(&dom).unwrap();
        // Nyquist oscillation on an even grid plus a constant.
        let u = ScalarField::from_values(
            dom.clone(),
            (0..8).map(|i| 3.0 + if i % 2 == 0 { 1.0 } else { -1.0 }).collect(),
        )
        .unwrap();
        let g = ft.gradient(&u).unwrap();
        for i in 0..8 {
            assert_relative_eq!(g.get(i, 0), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_box_and_masked_domains() {
        let grid = Grid::new(&[8, 8], 0.125, Topology::Box).unwrap();
        let dom = Arc::new(Domain::full(grid).unwrap());
        assert!(FourierTransform::new(&dom).is_err());

        let grid = Grid::new(&[8, 8], 0.125, Topology::Torus).unwrap();
        let mut mask = vec![true; 64];
        mask[0] = false;
        let dom = Arc::new(Domain::with_mask(grid, mask).unwrap());
        assert!(FourierTransform::new(&dom).is_err());
    }
}
