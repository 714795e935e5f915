//! Scalar, vector, matrix and mapping fields over a shared domain.
//!
//! Values are stored flat, one slot (or n, or n^2) per grid cell, row-major
//! cell order with the per-cell components contiguous. Every constructor
//! rejects non-finite entries; downstream numerics rely on that.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Domain;
use crate::linalg::SmallMat;

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Parameter(format!(
            "{what} contains a non-finite value at slot {pos}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    domain: Arc<Domain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: Arc<Domain>) -> ScalarField {
        let n = domain.grid().ncells();
        ScalarField {
            domain,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(domain: Arc<Domain>, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != domain.grid().ncells() {
            return Err(Error::Parameter(format!(
                "expected {} values, got {}",
                domain.grid().ncells(),
                values.len()
            )));
        }
        check_finite(&values, "scalar field")?;
        Ok(ScalarField { domain, values })
    }

    /// Evaluate `f` at every cell center. Masked-out cells get zero.
    pub fn from_fn(domain: Arc<Domain>, f: impl Fn(&[f64]) -> f64) -> Result<ScalarField> {
        let grid = domain.grid();
        let dim = grid.dim();
        let values: Vec<f64> = (0..grid.ncells())
            .map(|i| {
                if domain.is_in(i) {
                    f(&grid.cell_center(i)[..dim])
                } else {
                    0.0
                }
            })
            .collect();
        ScalarField::from_values(domain, values)
    }

    #[inline]
    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ScalarField> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        ScalarField::from_values(self.domain.clone(), values)
    }

    /// Copy with all values outside `sub`'s mask zeroed, attached to `sub`.
    /// `sub` must live on the same grid.
    pub fn restricted(&self, sub: Arc<Domain>) -> Result<ScalarField> {
        if sub.grid() != self.domain.grid() {
            return Err(Error::Domain("restriction to a different grid".into()));
        }
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if sub.is_in(i) { v } else { 0.0 })
            .collect();
        ScalarField::from_values(sub, values)
    }

    /// Mean over masked-in cells.
    pub fn mean(&self) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in self.domain.cells() {
            sum += self.values[i];
            count += 1;
        }
        sum / count as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.domain
            .cells()
            .map(|i| self.values[i].abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    domain: Arc<Domain>,
    values: Vec<f64>, // dim entries per cell
}

impl VectorField {
    pub fn zeros(domain: Arc<Domain>) -> VectorField {
        let n = domain.grid().ncells() * domain.grid().dim();
        VectorField {
            domain,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(domain: Arc<Domain>, values: Vec<f64>) -> Result<VectorField> {
        let want = domain.grid().ncells() * domain.grid().dim();
        if values.len() != want {
            return Err(Error::Parameter(format!(
                "expected {} vector slots, got {}",
                want,
                values.len()
            )));
        }
        check_finite(&values, "vector field")?;
        Ok(VectorField { domain, values })
    }

    pub fn from_fn(domain: Arc<Domain>, f: impl Fn(&[f64], usize) -> f64) -> Result<VectorField> {
        let grid = domain.grid();
        let dim = grid.dim();
        let mut values = vec![0.0; grid.ncells() * dim];
        for i in 0..grid.ncells() {
            if !domain.is_in(i) {
                continue;
            }
            let x = grid.cell_center(i);
            for a in 0..dim {
                values[i * dim + a] = f(&x[..dim], a);
            }
        }
        VectorField::from_values(domain, values)
    }

    pub fn from_components(components: &[ScalarField]) -> Result<VectorField> {
        if components.is_empty() {
            return Err(Error::Parameter("no components".into()));
        }
        let domain = components[0].domain().clone();
        let dim = domain.grid().dim();
        if components.len() != dim {
            return Err(Error::Parameter(format!(
                "need {dim} components, got {}",
                components.len()
            )));
        }
        if components.iter().any(|c| c.domain().as_ref() != domain.as_ref()) {
            return Err(Error::Domain("components live on different domains".into()));
        }
        let n = domain.grid().ncells();
        let mut values = vec![0.0; n * dim];
        for (a, c) in components.iter().enumerate() {
            for i in 0..n {
                values[i * dim + a] = c.get(i);
            }
        }
        VectorField::from_values(domain, values)
    }

    #[inline]
    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.domain.grid().dim()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, idx: usize, axis: usize) -> f64 {
        self.values[idx * self.dim() + axis]
    }

    /// Euclidean length of the vector at one cell.
    #[inline]
    pub fn norm_at(&self, idx: usize) -> f64 {
        let d = self.dim();
        let base = idx * d;
        let mut s = 0.0;
        for a in 0..d {
            s += self.values[base + a] * self.values[base + a];
        }
        s.sqrt()
    }

    pub fn component(&self, axis: usize) -> ScalarField {
        let d = self.dim();
        let values = (0..self.domain.grid().ncells())
            .map(|i| self.values[i * d + axis])
            .collect();
        ScalarField::from_values(self.domain.clone(), values).unwrap()
    }

    /// Pointwise Euclidean norm as a scalar field.
    pub fn norm_field(&self) -> ScalarField {
        let values = (0..self.domain.grid().ncells())
            .map(|i| self.norm_at(i))
            .collect();
        ScalarField::from_values(self.domain.clone(), values).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    domain: Arc<Domain>,
    values: Vec<f64>, // dim^2 entries per cell, row-major
}

impl MatrixField {
    pub fn zeros(domain: Arc<Domain>) -> MatrixField {
        let d = domain.grid().dim();
        let n = domain.grid().ncells() * d * d;
        MatrixField {
            domain,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(domain: Arc<Domain>, values: Vec<f64>) -> Result<MatrixField> {
        let d = domain.grid().dim();
        let want = domain.grid().ncells() * d * d;
        if values.len() != want {
            return Err(Error::Parameter(format!(
                "expected {} matrix slots, got {}",
                want,
                values.len()
            )));
        }
        check_finite(&values, "matrix field")?;
        Ok(MatrixField { domain, values })
    }

    #[inline]
    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.domain.grid().dim()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, idx: usize) -> SmallMat {
        let d = self.dim();
        let base = idx * d * d;
        SmallMat::from_rows(d, &self.values[base..base + d * d])
    }

    pub fn set(&mut self, idx: usize, m: &SmallMat) {
        let d = self.dim();
        let base = idx * d * d;
        for i in 0..d {
            for j in 0..d {
                self.values[base + i * d + j] = m.get(i, j);
            }
        }
    }

    /// Pointwise map over cell matrices.
    pub fn map_cells(&self, f: impl Fn(&SmallMat) -> SmallMat) -> MatrixField {
        let mut out = MatrixField::zeros(self.domain.clone());
        for i in 0..self.domain.grid().ncells() {
            out.set(i, &f(&self.get(i)));
        }
        out
    }

    /// Pointwise spectral norm as a scalar field.
    pub fn spectral_norm_field(&self) -> ScalarField {
        let values = (0..self.domain.grid().ncells())
            .map(|i| self.get(i).spectral_norm())
            .collect();
        ScalarField::from_values(self.domain.clone(), values).unwrap()
    }
}

/// Discrete map f: domain -> R^n, stored as an explicit linear part plus a
/// cellwise displacement. The split keeps torus maps honest: the linear part
/// is differentiated symbolically, the displacement by finite differences
/// with wrap, so maps like "identity plus periodic perturbation" never see a
/// seam.
#[derive(Debug, Clone)]
pub struct MappingField {
    linear: SmallMat,
    displacement: VectorField,
}

impl MappingField {
    pub fn new(linear: SmallMat, displacement: VectorField) -> Result<MappingField> {
        if linear.n() != displacement.dim() {
            return Err(Error::Parameter(
                "linear part and displacement dimension mismatch".into(),
            ));
        }
        Ok(MappingField {
            linear,
            displacement,
        })
    }

    pub fn identity(domain: Arc<Domain>) -> MappingField {
        let d = domain.grid().dim();
        MappingField {
            linear: SmallMat::identity(d),
            displacement: VectorField::zeros(domain),
        }
    }

    pub fn from_linear(domain: Arc<Domain>, linear: SmallMat) -> Result<MappingField> {
        if linear.n() != domain.grid().dim() {
            return Err(Error::Parameter("linear part has wrong dimension".into()));
        }
        Ok(MappingField {
            linear,
            displacement: VectorField::zeros(domain),
        })
    }

    #[inline]
    pub fn domain(&self) -> &Arc<Domain> {
        self.displacement.domain()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.displacement.dim()
    }

    #[inline]
    pub fn linear(&self) -> &SmallMat {
        &self.linear
    }

    #[inline]
    pub fn displacement(&self) -> &VectorField {
        &self.displacement
    }

    /// Map value at a cell center.
    pub fn value_at(&self, idx: usize) -> [f64; 3] {
        let grid = self.domain().grid();
        let x = grid.cell_center(idx);
        let d = self.dim();
        let mut y = [0.0; 3];
        for i in 0..d {
            for j in 0..d {
                y[i] += self.linear.get(i, j) * x[j];
            }
            y[i] += self.displacement.get(idx, i);
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Topology};

    fn unit_domain() -> Arc<Domain> {
        let grid = Grid::new(&[8, 8], 1.0 / 8.0, Topology::Box).unwrap();
        Arc::new(Domain::full(grid).unwrap())
    }

    #[test]
    fn rejects_nan() {
        let dom = unit_domain();
        let mut values = vec![0.0; 64];
        values[10] = f64::NAN;
        assert!(ScalarField::from_values(dom, values).is_err());
    }

    #[test]
    fn from_fn_evaluates_centers() {
        let dom = unit_domain();
        let f = ScalarField::from_fn(dom.clone(), |x| x[0]).unwrap();
        // First cell center is at h/2.
        assert_eq!(f.get(0), 1.0 / 16.0);
    }

    #[test]
    fn vector_component_round_trip() {
        let dom = unit_domain();
        let v = VectorField::from_fn(dom.clone(), |x, a| x[a] + a as f64).unwrap();
        let c1 = v.component(1);
        let back = VectorField::from_components(&[v.component(0), c1]).unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn matrix_field_get_set() {
        let dom = unit_domain();
        let mut m = MatrixField::zeros(dom);
        let cell = SmallMat::from_rows(2, &[1.0, 2.0, 3.0, 4.0]);
        m.set(5, &cell);
        assert_eq!(m.get(5), cell);
        assert_eq!(m.get(6), SmallMat::zeros(2));
    }

    #[test]
    fn restriction_zeroes_outside() {
        let dom = unit_domain();
        let f = ScalarField::from_fn(dom.clone(), |_| 1.0).unwrap();
        let center = dom.grid().index_of(&[4, 4, 0]);
        let sub = Arc::new(dom.ball_subdomain(center, 2).unwrap());
        let g = f.restricted(sub.clone()).unwrap();
        assert_eq!(g.get(center), 1.0);
        assert_eq!(g.get(0), 0.0);
        assert_eq!(g.domain().as_ref(), sub.as_ref());
    }
}
