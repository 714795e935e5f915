//! Integral norms and local averages on grid fields.
//!
//! All integrals are cell sums weighted by the cell volume `h^n`; averages
//! over balls and spheres use the uniform stencil weights, so an average is
//! independent of `h`. On a box domain a ball or sphere may only be queried
//! where it fits strictly inside, mirroring the admissibility rule used by
//! the maximal operators.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::stencil::StencilSet;
use crate::sweep::{self, Indexer};

/// Lebesgue norm `(sum |f|^q h^n)^(1/q)` over the active cells, `1 <= q < infinity`.
pub fn lq_norm(f: &ScalarField, q: f64) -> Result<f64> {
    if !q.is_finite() || q < 1.0 {
        return Err(Error::Parameter(format!(
            "Lebesgue exponent must satisfy 1 <= q < infinity, got {q}"
        )));
    }
    let dom = f.domain();
    let cellvol = dom.grid().spacing().powi(dom.grid().dim() as i32);
    let mut acc = 0.0;
    if q == 1.0 {
        for cell in dom.cells() {
            acc += f.values()[cell].abs();
        }
        return Ok(acc * cellvol);
    }
    if q == 2.0 {
        for cell in dom.cells() {
            let v = f.values()[cell];
            acc += v * v;
        }
        return Ok((acc * cellvol).sqrt());
    }
    for cell in dom.cells() {
        acc += f.values()[cell].abs().powf(q);
    }
    Ok((acc * cellvol).powf(1.0 / q))
}

/// Largest |f| over the active cells.
pub fn linf_norm(f: &ScalarField) -> f64 {
    f.max_abs()
}

fn check_anchor(
    f: &ScalarField,
    center: usize,
    radius_index: usize,
    stencils: &StencilSet,
) -> Result<()> {
    let dom = f.domain();
    if stencils.spacing() != dom.grid().spacing() {
        return Err(Error::Parameter(
            "stencil set was built for a different grid spacing".into(),
        ));
    }
    if center >= dom.grid().ncells() {
        return Err(Error::Parameter(format!(
            "cell index {center} out of range for grid with {} cells",
            dom.grid().ncells()
        )));
    }
    if radius_index >= stencils.len() {
        return Err(Error::Parameter(format!(
            "radius index {radius_index} out of range for ladder of length {}",
            stencils.len()
        )));
    }
    Ok(())
}

/// Average of `f` over the ball of ladder radius `radius_index` centred at
/// `center`. Fails if the ball is not admissible at that cell.
pub fn ball_average(
    f: &ScalarField,
    center: usize,
    radius_index: usize,
    stencils: &StencilSet,
) -> Result<f64> {
    check_anchor(f, center, radius_index, stencils)?;
    let dom = f.domain();
    let st = stencils.ball(radius_index);
    if !sweep::admissible(dom, center, st.reach) {
        return Err(Error::Domain(format!(
            "ball of radius {} cells is not admissible at cell {center}",
            stencils.radii_cells()[radius_index]
        )));
    }
    let indexer = Indexer::new(dom.grid(), stencils.radii_cells()[radius_index]);
    let coords = dom.grid().coords_of(center);
    Ok(sweep::stencil_sum(
        f.values(),
        &indexer,
        &coords,
        st,
        |v| v,
    ))
}

/// Average of `f` over the sphere (shell of lattice points) of ladder radius
/// `radius_index` centred at `center`. The zero radius degenerates to the
/// point value. Fails when the shell is empty or not admissible.
pub fn sphere_average(
    f: &ScalarField,
    center: usize,
    radius_index: usize,
    stencils: &StencilSet,
) -> Result<f64> {
    check_anchor(f, center, radius_index, stencils)?;
    let dom = f.domain();
    if radius_index == 0 {
        if !sweep::admissible(dom, center, 0.0) {
            return Err(Error::Domain(format!("cell {center} is outside the domain")));
        }
        return Ok(f.values()[center]);
    }
    let st = stencils.shell(radius_index).ok_or_else(|| {
        Error::Domain(format!(
            "no lattice points on the sphere of radius {} cells",
            stencils.radii_cells()[radius_index]
        ))
    })?;
    if !sweep::admissible(dom, center, st.reach) {
        return Err(Error::Domain(format!(
            "sphere of radius {} cells is not admissible at cell {center}",
            stencils.radii_cells()[radius_index]
        )));
    }
    let indexer = Indexer::new(dom.grid(), stencils.radii_cells()[radius_index] + 1);
    let coords = dom.grid().coords_of(center);
    Ok(sweep::stencil_sum(
        f.values(),
        &indexer,
        &coords,
        st,
        |v| v,
    ))
}

/// Bounded-mean-oscillation seminorm: the largest, over all active cells and
/// all admissible ladder balls anchored there, of the mean deviation of `f`
/// from its ball average. Constants score zero.
pub fn bmo_seminorm(f: &ScalarField, stencils: &StencilSet) -> Result<f64> {
    let dom = f.domain();
    if stencils.spacing() != dom.grid().spacing() {
        return Err(Error::Parameter(
            "stencil set was built for a different grid spacing".into(),
        ));
    }
    let max_cells = *stencils.radii_cells().last().unwrap_or(&0);
    let indexer = Indexer::new(dom.grid(), max_cells);
    let mut best = 0.0f64;
    for cell in dom.cells() {
        let coords = dom.grid().coords_of(cell);
        let bd = dom.boundary_distance(cell);
        // Summing deviations from the anchor value instead of raw values
        // makes constant fields score exactly zero.
        let anchor = f.values()[cell];
        for k in 1..stencils.len() {
            let st = stencils.ball(k);
            if st.reach >= bd {
                break;
            }
            let mean =
                anchor + sweep::stencil_sum(f.values(), &indexer, &coords, st, |v| v - anchor);
            let osc = sweep::stencil_osc(f.values(), &indexer, &coords, st, mean);
            if osc > best {
                best = osc;
            }
        }
    }
    Ok(best)
}

/// Local Zygmund-class integral `sum_B F log(e + F / avg_B F) h^n` over the
/// ball at `center` with ladder radius `radius_index`. Requires `F >= 0` up
/// to roundoff; tiny negative values are clamped to zero.
pub fn llogl_norm(
    f: &ScalarField,
    center: usize,
    radius_index: usize,
    stencils: &StencilSet,
) -> Result<f64> {
    check_anchor(f, center, radius_index, stencils)?;
    let dom = f.domain();
    let st = stencils.ball(radius_index);
    if !sweep::admissible(dom, center, st.reach) {
        return Err(Error::Domain(format!(
            "ball of radius {} cells is not admissible at cell {center}",
            stencils.radii_cells()[radius_index]
        )));
    }
    let indexer = Indexer::new(dom.grid(), stencils.radii_cells()[radius_index]);
    let coords = dom.grid().coords_of(center);
    let scale = f.max_abs();
    let tol = 1e-12 * scale.max(1.0);

    let mut mean = 0.0;
    let mut samples = Vec::with_capacity(st.offsets.len());
    for (off, &w) in st.offsets.iter().zip(&st.weights) {
        let mut v = f.values()[indexer.at(&coords, off)];
        if v < 0.0 {
            if v < -tol {
                return Err(Error::Parameter(format!(
                    "integrand must be nonnegative, found {v} at offset {off:?}"
                )));
            }
            v = 0.0;
        }
        samples.push(v);
        mean += w * v;
    }
    if mean <= 0.0 {
        return Ok(0.0);
    }
    let cellvol = dom.grid().spacing().powi(dom.grid().dim() as i32);
    let mut acc = 0.0;
    for &v in &samples {
        if v > 0.0 {
            acc += v * (std::f64::consts::E + v / mean).ln();
        }
    }
    Ok(acc * cellvol)
}
