//! Singular integrals as Fourier multipliers, and the commutators built
//! from them.
//!
//! The vector-valued projection `riesz2_apply` and its complement
//! `t_apply` implement the Hodge split: the symbol k kᵀ/|k|² projects each
//! Fourier mode onto its radial direction, which in physical space is the
//! projection onto gradient fields. The scalar operator behind the
//! commutator estimates is selected by [`MultiplierOp`].

use rustfft::num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::norms::{bmo_seminorm, lq_norm};
use crate::spectral::FourierTransform;
use crate::stencil::StencilSet;

/// Scalar convolution operator, named by its symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplierOp {
    /// Symbol κ₁κ₂/|κ|²: the product of the first two Riesz transforms.
    /// Needs at least two dimensions. Evaluated on derivative frequencies,
    /// so Nyquist buckets act like the zero frequency; anything else breaks
    /// the Hermitian symmetry of the spectrum at rows where only one axis
    /// sits at Nyquist, and the output stops being real.
    RieszProduct,
    /// Symbol −i·sign(k), one dimension only. The Nyquist bucket is zeroed:
    /// an odd symbol there would leak an imaginary part into the output.
    Hilbert,
    /// Symbol identically 1 (including the zero mode). Applied as a plain
    /// copy, no transform, so commutators with it vanish exactly; exists as
    /// a guard for the commutator assembly.
    Identity,
}

impl MultiplierOp {
    pub fn parse(name: &str) -> Result<MultiplierOp> {
        match name {
            "riesz12" => Ok(MultiplierOp::RieszProduct),
            "hilbert" => Ok(MultiplierOp::Hilbert),
            "identity" => Ok(MultiplierOp::Identity),
            _ => Err(Error::Parameter(format!(
                "unknown operator {name:?}, expected riesz12, hilbert or identity"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MultiplierOp::RieszProduct => "riesz12",
            MultiplierOp::Hilbert => "hilbert",
            MultiplierOp::Identity => "identity",
        }
    }
}

/// Apply the scalar multiplier to a field on the full torus.
pub fn czo_apply(f: &ScalarField, op: MultiplierOp) -> Result<ScalarField> {
    if op == MultiplierOp::Identity {
        return Ok(f.clone());
    }
    let ft = FourierTransform::new(f.domain())?;
    let dim = ft.dim();
    let mut spectrum = ft.forward(f.values());
    match op {
        MultiplierOp::RieszProduct => {
            if dim < 2 {
                return Err(Error::Parameter(
                    "the riesz12 operator needs at least two dimensions".into(),
                ));
            }
            for (idx, z) in spectrum.iter_mut().enumerate() {
                let c = ft.mode_coords(idx);
                let mut k2 = 0.0;
                for a in 0..dim {
                    let k = ft.kappa_deriv(a, c[a]);
                    k2 += k * k;
                }
                let sym = if k2 > 0.0 {
                    ft.kappa_deriv(0, c[0]) * ft.kappa_deriv(1, c[1]) / k2
                } else {
                    0.0
                };
                *z *= sym;
            }
        }
        MultiplierOp::Hilbert => {
            if dim != 1 {
                return Err(Error::Parameter(
                    "the hilbert operator is one-dimensional".into(),
                ));
            }
            for (idx, z) in spectrum.iter_mut().enumerate() {
                let j = ft.mode_coords(idx)[0];
                // kappa_deriv is zero exactly on the mean and Nyquist rows.
                let k = ft.kappa_deriv(0, j);
                let sym = Complex::new(0.0, -k.signum());
                *z *= sym;
            }
        }
        MultiplierOp::Identity => unreachable!(),
    }
    let (values, residue) = ft.inverse(spectrum);
    let scale = f.max_abs().max(1e-300);
    if residue > 1e-12 * scale {
        return Err(Error::Domain(format!(
            "multiplier output not real: residue {residue:.3e}"
        )));
    }
    ScalarField::from_values(f.domain().clone(), values)
}

/// Projection onto gradient fields: mode κ is sent to (κ κᵀ/|κ|²) v̂(κ),
/// with κ the derivative frequency (zero at Nyquist), the same convention
/// the spectral Poisson solver uses. That keeps the output real and the
/// operator exactly idempotent.
pub fn riesz2_apply(v: &VectorField) -> Result<VectorField> {
    let ft = FourierTransform::new(v.domain())?;
    let dim = ft.dim();
    let spectra: Vec<Vec<Complex<f64>>> = (0..dim)
        .map(|a| ft.forward(v.component(a).values()))
        .collect();
    let mut scale = 0.0f64;
    for i in 0..v.domain().grid().ncells() {
        scale = scale.max(v.norm_at(i));
    }
    let mut comps = Vec::with_capacity(dim);
    for a in 0..dim {
        let data: Vec<Complex<f64>> = (0..ft.ncells())
            .map(|idx| {
                let c = ft.mode_coords(idx);
                let mut k2 = 0.0;
                for b in 0..dim {
                    let k = ft.kappa_deriv(b, c[b]);
                    k2 += k * k;
                }
                if k2 == 0.0 {
                    return Complex::new(0.0, 0.0);
                }
                let ka = ft.kappa_deriv(a, c[a]);
                let mut acc = Complex::new(0.0, 0.0);
                for b in 0..dim {
                    let kb = ft.kappa_deriv(b, c[b]);
                    acc += spectra[b][idx] * (ka * kb / k2);
                }
                acc
            })
            .collect();
        let (values, residue) = ft.inverse(data);
        if residue > 1e-12 * scale.max(1e-300) {
            return Err(Error::Domain(format!(
                "projection output not real: residue {residue:.3e}"
            )));
        }
        comps.push(ScalarField::from_values(v.domain().clone(), values)?);
    }
    VectorField::from_components(&comps)
}

/// Complement projection T = I − R₂; vanishes on gradient fields.
pub fn t_apply(v: &VectorField) -> Result<VectorField> {
    let r = riesz2_apply(v)?;
    let values = v
        .values()
        .iter()
        .zip(r.values())
        .map(|(a, b)| a - b)
        .collect();
    VectorField::from_values(v.domain().clone(), values)
}

/// Split v into gradient part, divergence-free part, and the mean-zero
/// potential of the gradient part.
pub fn hodge_decompose(
    v: &VectorField,
) -> Result<(VectorField, VectorField, ScalarField)> {
    let grad_part = riesz2_apply(v)?;
    let sol_part_values: Vec<f64> = v
        .values()
        .iter()
        .zip(grad_part.values())
        .map(|(a, b)| a - b)
        .collect();
    let sol_part = VectorField::from_values(v.domain().clone(), sol_part_values)?;

    // Potential: solve Δφ = div v spectrally; its spectral gradient equals
    // the projection on every mode a derivative can represent.
    let ft = FourierTransform::new(v.domain())?;
    let div = ft.divergence(v)?;
    let phi = ft.poisson(&div)?;
    Ok((grad_part, sol_part, phi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CommutatorKind {
    Crw,
    Rw,
    Power,
}

/// Whether the power operation raises or lowers the exponent: |f|^{+ε}f
/// versus |f|^{−ε}f.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerSign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutatorReport {
    pub kind: CommutatorKind,
    pub op: String,
    pub s: f64,
    pub epsilon: Option<f64>,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    pub ratio: Option<f64>,
    pub degenerate: bool,
}

impl CommutatorReport {
    fn new(
        kind: CommutatorKind,
        op: MultiplierOp,
        s: f64,
        epsilon: Option<f64>,
        lhs: f64,
        rhs: f64,
    ) -> CommutatorReport {
        let degenerate = rhs == 0.0;
        CommutatorReport {
            kind,
            op: op.name().to_string(),
            s,
            epsilon,
            lhs_norm: lhs,
            rhs_norm: rhs,
            ratio: if degenerate { None } else { Some(lhs / rhs) },
            degenerate,
        }
    }
}

fn check_exponent(s: f64) -> Result<()> {
    if !(s.is_finite() && s > 1.0) {
        return Err(Error::Parameter(format!(
            "commutator norms need s > 1, got {s}"
        )));
    }
    Ok(())
}

fn same_domain(a: &ScalarField, b: &ScalarField) -> Result<()> {
    if a.domain().as_ref() != b.domain().as_ref() {
        return Err(Error::Domain(
            "commutator arguments live on different domains".into(),
        ));
    }
    Ok(())
}

/// Linear commutator [λ, T]f = T(λf) − λ(Tf), measured in L^s against
/// ‖λ‖_BMO ‖f‖_s.
pub fn commutator_crw(
    lambda: &ScalarField,
    f: &ScalarField,
    op: MultiplierOp,
    s: f64,
) -> Result<CommutatorReport> {
    check_exponent(s)?;
    same_domain(lambda, f)?;
    let product = ScalarField::from_values(
        f.domain().clone(),
        lambda
            .values()
            .iter()
            .zip(f.values())
            .map(|(l, v)| l * v)
            .collect(),
    )?;
    let t_of_product = czo_apply(&product, op)?;
    let t_of_f = czo_apply(f, op)?;
    let diff = ScalarField::from_values(
        f.domain().clone(),
        t_of_product
            .values()
            .iter()
            .zip(lambda.values().iter().zip(t_of_f.values()))
            .map(|(tp, (l, tf))| tp - l * tf)
            .collect(),
    )?;
    let lhs = lq_norm(&diff, s)?;
    let stencils = StencilSet::build(f.domain())?;
    let rhs = bmo_seminorm(lambda, &stencils)? * lq_norm(f, s)?;
    Ok(CommutatorReport::new(
        CommutatorKind::Crw,
        op,
        s,
        None,
        lhs,
        rhs,
    ))
}

/// Pointwise Rochberg–Weiss commutator field T(f log|f|) − (Tf) log|Tf|,
/// with the conventions 0·log 0 = 0 and |Tf| clamped at 1e-300 under the
/// log (the factor in front kills the clamp's effect).
pub fn rochberg_weiss_field(f: &ScalarField, op: MultiplierOp) -> Result<ScalarField> {
    let entropy = f.map(|v| if v == 0.0 { 0.0 } else { v * v.abs().ln() })?;
    let t_entropy = czo_apply(&entropy, op)?;
    let tf = czo_apply(f, op)?;
    ScalarField::from_values(
        f.domain().clone(),
        t_entropy
            .values()
            .iter()
            .zip(tf.values())
            .map(|(te, &t)| {
                if t == 0.0 {
                    *te
                } else {
                    te - t * t.abs().max(1e-300).ln()
                }
            })
            .collect(),
    )
}

pub fn commutator_rw(f: &ScalarField, op: MultiplierOp, s: f64) -> Result<CommutatorReport> {
    check_exponent(s)?;
    let field = rochberg_weiss_field(f, op)?;
    let lhs = lq_norm(&field, s)?;
    let rhs = lq_norm(f, s)?;
    Ok(CommutatorReport::new(
        CommutatorKind::Rw,
        op,
        s,
        None,
        lhs,
        rhs,
    ))
}

fn power_map(v: f64, exponent: f64) -> f64 {
    if exponent == 1.0 {
        // Keep the ε = 0 case bit-exact.
        v
    } else if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(exponent)
    }
}

/// Pointwise power commutator field T(|f|^{±ε}f) − |Tf|^{±ε}(Tf).
pub fn power_commutator_field(
    f: &ScalarField,
    op: MultiplierOp,
    epsilon: f64,
    sign: PowerSign,
) -> Result<ScalarField> {
    let e = match sign {
        PowerSign::Plus => 1.0 + epsilon,
        PowerSign::Minus => 1.0 - epsilon,
    };
    let powered = f.map(|v| power_map(v, e))?;
    let t_powered = czo_apply(&powered, op)?;
    let tf = czo_apply(f, op)?;
    ScalarField::from_values(
        f.domain().clone(),
        t_powered
            .values()
            .iter()
            .zip(tf.values())
            .map(|(tp, &t)| tp - power_map(t, e))
            .collect(),
    )
}

pub fn commutator_power(
    f: &ScalarField,
    op: MultiplierOp,
    s: f64,
    epsilon: f64,
    sign: PowerSign,
) -> Result<CommutatorReport> {
    check_exponent(s)?;
    if !(0.0..1.0 - 1.0 / s).contains(&epsilon) {
        return Err(Error::Parameter(format!(
            "power commutator needs 0 <= eps < 1 - 1/s = {}, got {epsilon}",
            1.0 - 1.0 / s
        )));
    }
    let field = power_commutator_field(f, op, epsilon, sign)?;
    let lhs = lq_norm(&field, s)?;
    let e = match sign {
        PowerSign::Plus => 1.0 + epsilon,
        PowerSign::Minus => 1.0 - epsilon,
    };
    let powered_abs = f.map(|v| v.abs().powf(e))?;
    let rhs = epsilon * lq_norm(&powered_abs, s)?;
    Ok(CommutatorReport::new(
        CommutatorKind::Power,
        op,
        s,
        Some(epsilon),
        lhs,
        rhs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Domain, Grid, Topology};
    use crate::rng::SplitMix64;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn torus2(n: usize) -> Arc<Domain> {
        let grid = Grid::new(&[n, n], 1.0 / n as f64, Topology::Torus).unwrap();
        Arc::new(Domain::full(grid).unwrap())
    }

    fn torus1(n: usize) -> Arc<Domain> {
        let grid = Grid::new(&[n], 1.0 / n as f64, Topology::Torus).unwrap();
        Arc::new(Domain::full(grid).unwrap())
    }

    fn random_scalar(dom: &Arc<Domain>, seed: u64) -> ScalarField {
        let mut rng = SplitMix64::new(seed);
        ScalarField::from_values(
            dom.clone(),
            (0..dom.grid().ncells()).map(|_| rng.normal()).collect(),
        )
        .unwrap()
    }

    fn random_vector(dom: &Arc<Domain>, seed: u64) -> VectorField {
        let mut rng = SplitMix64::new(seed);
        VectorField::from_values(
            dom.clone(),
            (0..dom.grid().ncells() * dom.grid().dim())
                .map(|_| rng.normal())
                .collect(),
        )
        .unwrap()
    }

    fn l2(values: &[f64]) -> f64 {
        values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn projection_fixes_gradients() {
        let dom = torus2(32);
        let grad = VectorField::from_fn(dom.clone(), |x, a| {
            let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
            let (sy, cy) = (2.0 * PI * x[1]).sin_cos();
            // gradient of sin(2pi x) sin(2pi y)
            match a {
                0 => 2.0 * PI * cx * sy,
                _ => 2.0 * PI * sx * cy,
            }
        })
        .unwrap();
        let out = riesz2_apply(&grad).unwrap();
        let err = l2(&out
            .values()
            .iter()
            .zip(grad.values())
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>());
        assert!(err <= 1e-10 * l2(grad.values()), "err {err:e}");
    }

    #[test]
    fn projection_annihilates_divergence_free_fields() {
        let dom = torus2(32);
        // Perpendicular gradient of a stream function is divergence-free.
        let field = VectorField::from_fn(dom.clone(), |x, a| {
            let (sx, cx) = (2.0 * PI * 2.0 * x[0]).sin_cos();
            let (sy, cy) = (2.0 * PI * x[1]).sin_cos();
            match a {
                0 => -2.0 * PI * sx * cy,
                _ => 2.0 * PI * 2.0 * cx * sy,
            }
        })
        .unwrap();
        let out = riesz2_apply(&field).unwrap();
        assert!(l2(out.values()) <= 1e-10 * l2(field.values()));
    }

    #[test]
    fn single_mode_orthogonal_component_is_killed() {
        let dom = torus2(16);
        // Mode k = (1, 0) carrying the vector (0, 1): kk^T/|k|^2 kills it.
        let field = VectorField::from_fn(dom.clone(), |x, a| match a {
            0 => 0.0,
            _ => (2.0 * PI * x[0]).cos(),
        })
        .unwrap();
        let out = riesz2_apply(&field).unwrap();
        assert!(l2(out.values()) <= 1e-12 * l2(field.values()));
    }

    #[test]
    fn complement_and_idempotence() {
        let dom = torus2(24);
        let v = random_vector(&dom, 3);
        let r = riesz2_apply(&v).unwrap();
        let t = t_apply(&v).unwrap();
        let scale = l2(v.values());
        // r + t == v by construction.
        for i in 0..v.values().len() {
            assert_relative_eq!(r.values()[i] + t.values()[i], v.values()[i], epsilon = 1e-12);
        }
        let rr = riesz2_apply(&r).unwrap();
        let tt = t_apply(&t).unwrap();
        let rt = riesz2_apply(&t).unwrap();
        let err_rr = l2(&rr.values().iter().zip(r.values()).map(|(a, b)| a - b).collect::<Vec<_>>());
        let err_tt = l2(&tt.values().iter().zip(t.values()).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(err_rr <= 1e-10 * scale);
        assert!(err_tt <= 1e-10 * scale);
        assert!(l2(rt.values()) <= 1e-10 * scale);
    }

    #[test]
    fn hodge_orthogonality_and_pythagoras() {
        let dom = torus2(20);
        let v = random_vector(&dom, 11);
        let (g, h, _phi) = hodge_decompose(&v).unwrap();
        let inner: f64 = g.values().iter().zip(h.values()).map(|(a, b)| a * b).sum();
        let n_v = l2(v.values());
        assert!(inner.abs() <= 1e-10 * n_v * n_v);
        let lhs = l2(g.values()).powi(2) + l2(h.values()).powi(2);
        assert_relative_eq!(lhs, n_v * n_v, max_relative = 1e-10);
    }

    #[test]
    fn hodge_recovers_potential() {
        let dom = torus2(32);
        let want = ScalarField::from_fn(dom.clone(), |x| {
            (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()
        })
        .unwrap();
        let grad = VectorField::from_fn(dom.clone(), |x, a| {
            let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
            let (sy, cy) = (2.0 * PI * x[1]).sin_cos();
            match a {
                0 => 2.0 * PI * cx * sy,
                _ => 2.0 * PI * sx * cy,
            }
        })
        .unwrap();
        let (_g, h, phi) = hodge_decompose(&grad).unwrap();
        assert!(l2(h.values()) <= 1e-10 * l2(grad.values()));
        for i in 0..dom.grid().ncells() {
            assert_relative_eq!(phi.get(i), want.get(i), epsilon = 1e-9);
        }
    }

    #[test]
    fn czo_single_mode_scaling() {
        let dom = torus2(16);
        // cos(2pi(x+y)) lives on k = ±(1,1); symbol value 1*1/2 there.
        let f = ScalarField::from_fn(dom.clone(), |x| (2.0 * PI * (x[0] + x[1])).cos()).unwrap();
        let out = czo_apply(&f, MultiplierOp::RieszProduct).unwrap();
        for i in 0..dom.grid().ncells() {
            assert_relative_eq!(out.get(i), 0.5 * f.get(i), epsilon = 1e-10);
        }
    }

    #[test]
    fn czo_kills_constants_and_respects_parseval() {
        let dom = torus2(16);
        let c = ScalarField::from_fn(dom.clone(), |_| 5.0).unwrap();
        let out = czo_apply(&c, MultiplierOp::RieszProduct).unwrap();
        assert!(l2(out.values()) <= 1e-12);
        for seed in 0..5 {
            let f = random_scalar(&dom, seed);
            let tf = czo_apply(&f, MultiplierOp::RieszProduct).unwrap();
            assert!(l2(tf.values()) <= l2(f.values()) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn czo_is_linear_and_translation_equivariant() {
        let dom = torus2(16);
        let f = random_scalar(&dom, 21);
        let g = random_scalar(&dom, 22);
        let combo = ScalarField::from_values(
            dom.clone(),
            f.values().iter().zip(g.values()).map(|(a, b)| 2.0 * a - 3.0 * b).collect(),
        )
        .unwrap();
        let t_combo = czo_apply(&combo, MultiplierOp::RieszProduct).unwrap();
        let tf = czo_apply(&f, MultiplierOp::RieszProduct).unwrap();
        let tg = czo_apply(&g, MultiplierOp::RieszProduct).unwrap();
        for i in 0..dom.grid().ncells() {
            assert_relative_eq!(
                t_combo.get(i),
                2.0 * tf.get(i) - 3.0 * tg.get(i),
                epsilon = 1e-12 * 10.0
            );
        }

        // Cyclic shift by (3, 5) cells.
        let grid = dom.grid();
        let shift = |field: &ScalarField| -> ScalarField {
            let values = (0..grid.ncells())
                .map(|i| {
                    let c = grid.coords_of(i);
                    let j = grid
                        .offset_index(&c, &[-3, -5, 0])
                        .unwrap();
                    field.values()[j]
                })
                .collect();
            ScalarField::from_values(dom.clone(), values).unwrap()
        };
        let shifted_then_t = czo_apply(&shift(&f), MultiplierOp::RieszProduct).unwrap();
        let t_then_shifted = shift(&tf);
        for i in 0..grid.ncells() {
            assert_relative_eq!(shifted_then_t.get(i), t_then_shifted.get(i), epsilon = 1e-12 * 10.0);
        }
    }

    #[test]
    fn hilbert_maps_cos_to_sin() {
        let dom = torus1(64);
        let f = ScalarField::from_fn(dom.clone(), |x| (2.0 * PI * x[0]).cos()).unwrap();
        let want = ScalarField::from_fn(dom.clone(), |x| (2.0 * PI * x[0]).sin()).unwrap();
        let out = czo_apply(&f, MultiplierOp::Hilbert).unwrap();
        for i in 0..64 {
            assert_relative_eq!(out.get(i), want.get(i), epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_guards() {
        let dom1 = torus1(16);
        let f1 = random_scalar(&dom1, 1);
        assert!(czo_apply(&f1, MultiplierOp::RieszProduct).is_err());
        let dom2 = torus2(8);
        let f2 = random_scalar(&dom2, 1);
        assert!(czo_apply(&f2, MultiplierOp::Hilbert).is_err());
    }

    #[test]
    fn identity_operator_zeroes_every_commutator_exactly() {
        let dom = torus2(16);
        let f = random_scalar(&dom, 40);
        let lambda = random_scalar(&dom, 41);
        let crw = commutator_crw(&lambda, &f, MultiplierOp::Identity, 2.0).unwrap();
        assert_eq!(crw.lhs_norm, 0.0);
        let rw = commutator_rw(&f, MultiplierOp::Identity, 2.0).unwrap();
        assert_eq!(rw.lhs_norm, 0.0);
        let pw = commutator_power(&f, MultiplierOp::Identity, 2.0, 0.3, PowerSign::Plus).unwrap();
        assert_eq!(pw.lhs_norm, 0.0);
    }

    #[test]
    fn crw_vanishes_for_constant_symbol() {
        let dom = torus2(16);
        let f = random_scalar(&dom, 50);
        let lambda = ScalarField::from_fn(dom.clone(), |_| 3.7).unwrap();
        let rep = commutator_crw(&lambda, &f, MultiplierOp::RieszProduct, 2.0).unwrap();
        let scale = lq_norm(&f, 2.0).unwrap() * 3.7;
        assert!(rep.lhs_norm <= 1e-12 * scale, "lhs {}", rep.lhs_norm);
        assert!(rep.degenerate, "constant symbol has zero oscillation");
    }

    #[test]
    fn crw_is_invariant_under_symbol_shifts() {
        let dom = torus2(16);
        let f = random_scalar(&dom, 60);
        let lambda = random_scalar(&dom, 61);
        let shifted = lambda.map(|v| v + 7.0).unwrap();
        let a = commutator_crw(&lambda, &f, MultiplierOp::RieszProduct, 2.0).unwrap();
        let b = commutator_crw(&shifted, &f, MultiplierOp::RieszProduct, 2.0).unwrap();
        assert_relative_eq!(a.lhs_norm, b.lhs_norm, max_relative = 1e-10);
    }

    #[test]
    fn rw_scaling_covariance() {
        let dom = torus2(16);
        let f = random_scalar(&dom, 70);
        let scaled = f.map(|v| 4.0 * v).unwrap();
        let base = rochberg_weiss_field(&f, MultiplierOp::RieszProduct).unwrap();
        let big = rochberg_weiss_field(&scaled, MultiplierOp::RieszProduct).unwrap();
        let scale = l2(big.values()).max(1e-300);
        let err = l2(&big
            .values()
            .iter()
            .zip(base.values())
            .map(|(b, a)| b - 4.0 * a)
            .collect::<Vec<_>>());
        assert!(err <= 1e-10 * scale.max(4.0 * l2(f.values())), "err {err:e}");
    }

    #[test]
    fn power_commutator_at_zero_eps_is_exactly_zero() {
        let dom = torus2(16);
        let f = random_scalar(&dom, 80);
        let rep = commutator_power(&f, MultiplierOp::RieszProduct, 2.0, 0.0, PowerSign::Plus)
            .unwrap();
        assert_eq!(rep.lhs_norm, 0.0);
        assert!(rep.degenerate);
        let rep = commutator_power(&f, MultiplierOp::RieszProduct, 2.0, 0.0, PowerSign::Minus)
            .unwrap();
        assert_eq!(rep.lhs_norm, 0.0);
    }

    #[test]
    fn power_eps_range_is_enforced() {
        let dom = torus2(8);
        let f = random_scalar(&dom, 81);
        // s = 2 allows eps < 1/2.
        assert!(commutator_power(&f, MultiplierOp::RieszProduct, 2.0, 0.5, PowerSign::Plus).is_err());
        assert!(commutator_power(&f, MultiplierOp::RieszProduct, 2.0, -0.1, PowerSign::Plus).is_err());
        assert!(commutator_power(&f, MultiplierOp::RieszProduct, 2.0, 0.49, PowerSign::Plus).is_ok());
    }

    #[test]
    fn lhopital_link_to_rochberg_weiss() {
        let dom = torus2(32);
        // Smooth and bounded away from zero.
        let f = ScalarField::from_fn(dom.clone(), |x| {
            2.0 + (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
        })
        .unwrap();
        let eps = 0.01;
        let p = power_commutator_field(&f, MultiplierOp::RieszProduct, eps, PowerSign::Plus)
            .unwrap();
        let rw = rochberg_weiss_field(&f, MultiplierOp::RieszProduct).unwrap();
        let scaled: Vec<f64> = p.values().iter().map(|v| v / eps).collect();
        let err = l2(&scaled
            .iter()
            .zip(rw.values())
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>());
        let scale = l2(rw.values());
        assert!(err <= 0.05 * scale, "relative error {}", err / scale);
    }

    #[test]
    fn reports_serialize() {
        let dom = torus2(8);
        let f = random_scalar(&dom, 90);
        let rep = commutator_rw(&f, MultiplierOp::RieszProduct, 2.0).unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"kind\":\"Rw\""));
    }

    #[test]
    fn op_names_round_trip() {
        for op in [
            MultiplierOp::RieszProduct,
            MultiplierOp::Hilbert,
            MultiplierOp::Identity,
        ] {
            assert_eq!(MultiplierOp::parse(op.name()).unwrap(), op);
        }
        assert!(MultiplierOp::parse("nope").is_err());
    }
}
