//! Differentials, cofactors and Jacobian determinants of discrete
//! mappings, and the inequality chain tying the Jacobian to Hardy,
//! Zygmund and BMO quantities over balls.
//!
//! The differencing scheme is centered in the interior and one-sided at
//! box walls. Centered differences are exact on affine maps, which
//! anchors the linear-map tests: their reports hold with equality up to
//! roundoff rather than up to discretization error.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{MappingField, MatrixField, ScalarField};
use crate::grid::Topology;
use crate::maximal::{h1_norm, MaximalConfig};
use crate::norms::{ball_average, llogl_norm, lq_norm, sphere_average};
use crate::report::InequalityReport;
use crate::stencil::StencilSet;
use crate::sweep::{admissible, stencil_sum, Indexer};

fn conjugate_exponent(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Parameter(
            "Jacobian estimates need dimension at least 2".into(),
        ));
    }
    Ok(n as f64 / (n as f64 - 1.0))
}

/// Differential matrix field: row i, column j holds the difference
/// quotient of component i along axis j. The linear part of the mapping
/// enters exactly; only the displacement is differenced.
pub fn differential(f: &MappingField) -> MatrixField {
    let domain = f.domain();
    let grid = domain.grid();
    let n = grid.dim();
    let h = grid.spacing();
    let disp = f.displacement();
    let mut out = MatrixField::zeros(domain.clone());
    for idx in 0..grid.ncells() {
        if !domain.is_in(idx) {
            continue;
        }
        let coords = grid.coords_of(idx);
        let mut m = *f.linear();
        for j in 0..n {
            let mut fwd = [0i32; 3];
            fwd[j] = 1;
            let mut bwd = [0i32; 3];
            bwd[j] = -1;
            let up = grid
                .offset_index(&coords, &fwd)
                .filter(|&t| domain.is_in(t));
            let dn = grid
                .offset_index(&coords, &bwd)
                .filter(|&t| domain.is_in(t));
            for i in 0..n {
                let d = match (up, dn) {
                    (Some(u), Some(l)) => (disp.get(u, i) - disp.get(l, i)) / (2.0 * h),
                    (Some(u), None) => (disp.get(u, i) - disp.get(idx, i)) / h,
                    (None, Some(l)) => (disp.get(idx, i) - disp.get(l, i)) / h,
                    (None, None) => 0.0,
                };
                m.set(i, j, m.get(i, j) + d);
            }
        }
        out.set(idx, &m);
    }
    out
}

/// Pointwise cofactor matrix, in the convention (Df)ᵀ·D♯f = det(Df)·I.
pub fn cofactor(df: &MatrixField) -> MatrixField {
    df.map_cells(|m| m.cofactor())
}

/// Pointwise determinant of the differential.
pub fn jacobian_det(f: &MappingField) -> Result<ScalarField> {
    let df = differential(f);
    let values = (0..f.domain().grid().ncells())
        .map(|i| df.get(i).det())
        .collect();
    ScalarField::from_values(f.domain().clone(), values)
}

fn shape_param(report: InequalityReport, f: &MappingField) -> InequalityReport {
    let grid = f.domain().grid();
    let shape: Vec<String> = grid.shape().iter().map(|s| s.to_string()).collect();
    report.with_param("shape", shape.join("x"))
}

/// Ball average of the Jacobian against the sphere average of the
/// cofactor norm, raised to n/(n−1): the quantitative degenerate
/// isoperimetric comparison on the ball of physical radius `r`.
pub fn check_isoperimetric(
    f: &MappingField,
    center: usize,
    r: f64,
) -> Result<InequalityReport> {
    let n = f.dim();
    let q = conjugate_exponent(n)?;
    let stencils = StencilSet::build(f.domain())?;
    let k = stencils.index_of_radius(r)?;
    let jac = jacobian_det(f)?;
    let lhs = ball_average(&jac, center, k, &stencils)?.abs();
    let cof_norm = cofactor(&differential(f)).spectral_norm_field();
    let rhs = sphere_average(&cof_norm, center, k, &stencils)?.powf(q);
    Ok(shape_param(
        InequalityReport::new("isoperimetric", lhs, rhs)
            .with_param("n", n)
            .with_param("r", r)
            .with_param("center", center),
        f,
    ))
}

/// Hardy-space norm of the Jacobian against the integral of the cofactor
/// norm to the power n/(n−1), on a box domain.
pub fn check_hardy_bound(f: &MappingField) -> Result<InequalityReport> {
    let n = f.dim();
    let q = conjugate_exponent(n)?;
    if f.domain().grid().topology() != Topology::Box {
        return Err(Error::Parameter(
            "the Hardy bound is a statement about box domains".into(),
        ));
    }
    let jac = jacobian_det(f)?;
    let lhs = h1_norm(&jac)?;
    let cof_norm = cofactor(&differential(f)).spectral_norm_field();
    let rhs = lq_norm(&cof_norm, q)?.powf(q);
    Ok(shape_param(
        InequalityReport::new("hardy_jacobian", lhs, rhs).with_param("n", n),
        f,
    ))
}

fn orientation_guard(jac: &ScalarField, cells: &[usize]) -> Result<()> {
    let tol = 1e-10 * jac.max_abs();
    for &i in cells {
        if jac.get(i) < -tol {
            return Err(Error::Parameter(format!(
                "orientation-reversing map: J = {} at cell {i}",
                jac.get(i)
            )));
        }
    }
    Ok(())
}

fn ball_cells(f: &MappingField, center: usize, radius_cells: usize) -> Result<Vec<usize>> {
    let sub = f.domain().ball_subdomain(center, radius_cells)?;
    Ok(sub.cells().collect())
}

fn require_double_ball(f: &MappingField, center: usize, radius_cells: usize) -> Result<()> {
    let h = f.domain().grid().spacing();
    let reach = 2.0 * radius_cells as f64 * h;
    if !admissible(f.domain(), center, reach) {
        return Err(Error::Domain(format!(
            "the doubled ball of radius {radius_cells} cells leaves the domain at cell {center}"
        )));
    }
    Ok(())
}

/// The Zygmund-to-Hardy-to-gradient chain on a ball B and its double:
/// the L log L mass of the Jacobian on B against the Hardy norm on 2B,
/// and that against the n-th power integral of |Df| on 2B. Requires the
/// Jacobian to be nonnegative on B up to roundoff.
pub fn check_llogl(
    f: &MappingField,
    center: usize,
    radius_index: usize,
) -> Result<(InequalityReport, InequalityReport)> {
    let n = f.dim();
    conjugate_exponent(n)?;
    let stencils = StencilSet::build(f.domain())?;
    let m = stencils.radii_cells()[radius_index];
    require_double_ball(f, center, m)?;
    let jac = jacobian_det(f)?;
    orientation_guard(&jac, &ball_cells(f, center, m)?)?;

    let llogl = llogl_norm(&jac, center, radius_index, &stencils)?;
    let double = Arc::new(f.domain().ball_subdomain(center, 2 * m)?);
    let hardy = h1_norm(&jac.restricted(double.clone())?)?;
    let grad_norm = differential(f).spectral_norm_field();
    let grad_term = lq_norm(&grad_norm.restricted(double)?, n as f64)?.powi(n as i32);

    let first = shape_param(
        InequalityReport::new("llogl_vs_hardy", llogl, hardy)
            .with_param("n", n)
            .with_param("ball_cells", m)
            .with_param("center", center),
        f,
    );
    let second = shape_param(
        InequalityReport::new("hardy_vs_gradient", hardy, grad_term)
            .with_param("n", n)
            .with_param("ball_cells", m)
            .with_param("center", center),
        f,
    );
    Ok((first, second))
}

/// Log-damped integral of |field|^q over the given cells, with the log
/// normalized by the mean of |field| over the same cells. Zero mean means
/// the field vanishes there and the integral is zero.
fn log_damped_integral(field: &ScalarField, cells: &[usize], q: f64, cellvol: f64) -> f64 {
    let mut mean = 0.0;
    for &i in cells {
        mean += field.get(i).abs();
    }
    mean /= cells.len() as f64;
    if mean == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for &i in cells {
        let v = field.get(i).abs();
        acc += v.powf(q) / (std::f64::consts::E + v / mean).ln();
    }
    acc * cellvol
}

/// The dual chain below the natural exponent: the Jacobian mass on B
/// against log-damped integrals of the cofactor norm (power n/(n−1)) and
/// of |Df| (power n) on 2B. The log arguments are normalized by ball
/// means, which makes every term scale like |c|ⁿ under f ↦ c·f.
pub fn check_dual_log(
    f: &MappingField,
    center: usize,
    radius_index: usize,
) -> Result<(InequalityReport, InequalityReport)> {
    let n = f.dim();
    let q = conjugate_exponent(n)?;
    let stencils = StencilSet::build(f.domain())?;
    let m = stencils.radii_cells()[radius_index];
    require_double_ball(f, center, m)?;
    let jac = jacobian_det(f)?;
    let inner_cells = ball_cells(f, center, m)?;
    orientation_guard(&jac, &inner_cells)?;

    let grid = f.domain().grid();
    let cellvol = grid.spacing().powi(grid.dim() as i32);
    let jac_mass: f64 = inner_cells.iter().map(|&i| jac.get(i)).sum::<f64>() * cellvol;

    let outer_cells = ball_cells(f, center, 2 * m)?;
    let df = differential(f);
    let cof_term = log_damped_integral(&cofactor(&df).spectral_norm_field(), &outer_cells, q, cellvol);
    let grad_term = log_damped_integral(&df.spectral_norm_field(), &outer_cells, n as f64, cellvol);

    let first = shape_param(
        InequalityReport::new("jacobian_vs_damped_cofactor", jac_mass.abs(), cof_term)
            .with_param("n", n)
            .with_param("ball_cells", m)
            .with_param("center", center),
        f,
    );
    let second = shape_param(
        InequalityReport::new("damped_cofactor_vs_damped_gradient", cof_term, grad_term)
            .with_param("n", n)
            .with_param("ball_cells", m)
            .with_param("center", center),
        f,
    );
    Ok((first, second))
}

/// Global duality pairing on the torus: the integral of φ·J against the
/// BMO seminorm of φ times the cofactor-norm integral.
pub fn check_bmo_pairing(f: &MappingField, phi: &ScalarField) -> Result<InequalityReport> {
    let n = f.dim();
    let q = conjugate_exponent(n)?;
    if f.domain().grid().topology() != Topology::Torus {
        return Err(Error::Parameter(
            "the BMO pairing is a global statement and needs a torus".into(),
        ));
    }
    if phi.domain().as_ref() != f.domain().as_ref() {
        return Err(Error::Domain("pairing fields live on different domains".into()));
    }
    let grid = f.domain().grid();
    let cellvol = grid.spacing().powi(grid.dim() as i32);
    let jac = jacobian_det(f)?;
    let mut pairing = 0.0;
    for i in f.domain().cells() {
        pairing += phi.get(i) * jac.get(i);
    }
    let lhs = (pairing * cellvol).abs();
    let stencils = StencilSet::build(f.domain())?;
    let bmo = crate::norms::bmo_seminorm(phi, &stencils)?;
    let cof_norm = cofactor(&differential(f)).spectral_norm_field();
    let rhs = bmo * lq_norm(&cof_norm, q)?.powf(q);
    Ok(shape_param(
        InequalityReport::new("bmo_pairing", lhs, rhs).with_param("n", n),
        f,
    ))
}

/// Layer-cake bound on one smoothed value: |F ∗ kernel_t|(x) is dominated
/// by the maximum kernel slope times the integrated absolute ball masses
/// of F through radius t. The masses are signed sums — the absolute value
/// lands only after each ball is integrated.
pub fn check_convolution_bound(
    field: &ScalarField,
    center: usize,
    t_index: usize,
) -> Result<InequalityReport> {
    let domain = field.domain();
    let grid = domain.grid();
    let n = grid.dim();
    let h = grid.spacing();
    let cfg = MaximalConfig::build(domain)?;
    let kernel = cfg
        .mollifier
        .kernel(t_index)
        .ok_or_else(|| Error::Parameter(format!("no kernel at ladder index {t_index}")))?;
    if !admissible(domain, center, kernel.reach) {
        return Err(Error::Domain(format!(
            "kernel at ladder index {t_index} is not admissible at cell {center}"
        )));
    }
    let m = cfg.stencils.radii_cells()[t_index];
    let t = m as f64 * h;
    let idx = Indexer::new(grid, m);
    let coords = grid.coords_of(center);
    let lhs = stencil_sum(field.values(), &idx, &coords, kernel, |v| v).abs();

    // Ball masses for every integer radius up to m, via one sweep of the
    // widest ball bucketed by ceil(|delta|).
    let ball = cfg.stencils.ball(t_index);
    let mut by_radius = vec![0.0f64; m + 1];
    for off in &ball.offsets {
        let d2: i64 = off.iter().map(|&x| (x as i64) * (x as i64)).sum();
        let mut r = (d2 as f64).sqrt().floor() as i64;
        while r * r > d2 {
            r -= 1;
        }
        while r * r < d2 {
            r += 1;
        }
        by_radius[r as usize] += field.values()[idx.at(&coords, off)];
    }
    let cellvol = h.powi(n as i32);
    let mut running = 0.0;
    let mut integral = 0.0;
    for mass in &by_radius {
        running += mass;
        integral += (running * cellvol).abs() * h;
    }
    let slope = cfg.mollifier.c_phi * cfg.mollifier.continuum_norm;
    let rhs = slope / t.powi(n as i32 + 1) * integral;
    Ok(InequalityReport::new("convolution_layer_cake", lhs, rhs)
        .with_param("t", t)
        .with_param("center", center)
        .with_param("n", n))
}
