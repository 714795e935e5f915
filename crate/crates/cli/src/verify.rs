//! The acceptance suite: ten criteria, one pass/fail line each.
//!
//! Each criterion pins down one slice of the laboratory: oracle agreement,
//! analytic values, norm inequalities, identities of the spectral
//! operators, solver fixed points, local estimates, the Jacobian chain,
//! commutators, the below-natural-exponent estimate, and the plumbing.
//! Failures carry a diagnostic string; infrastructure errors inside a
//! criterion are reported as failures of that criterion, never a crash.

use crate::config::Config;
use crate::corpus::{self, CorpusSpec, Generator};
use crate::experiment::{
    parallel_map, report_csv, run_experiment, stream_is_stable, ExperimentSpec, GridSpec,
    Inequality, PharmonicParams,
};
use crate::pins;
use maxharm_core::field::{MappingField, MatrixField, ScalarField, VectorField};
use maxharm_core::grid::Topology;
use maxharm_core::io::{load_field, save_field, StoredField};
use maxharm_core::jacobian::{check_hardy_bound, check_isoperimetric, check_llogl, cofactor};
use maxharm_core::linalg::SmallMat;
use maxharm_core::maximal::{max_hl, max_interp, max_sharp, max_spherical, EvalMode, MaximalConfig};
use maxharm_core::norms::lq_norm;
use maxharm_core::pharmonic::{
    check_local_estimates, check_very_weak, rp_potential, rp_transform, PHarmonicProblem,
    SolveReport,
};
use maxharm_core::rng::SplitMix64;
use maxharm_core::singular::{
    commutator_crw, commutator_power, hodge_decompose, power_commutator_field, riesz2_apply,
    rochberg_weiss_field, t_apply, MultiplierOp, PowerSign,
};
use maxharm_core::spectral::FourierTransform;
use maxharm_core::{Domain, Error, Grid, Result, StencilSet};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Module {
    Maximal,
    Singular,
    Pharmonic,
    Jacobian,
    Plumbing,
}

impl Module {
    pub fn parse(name: &str) -> Result<Module> {
        match name {
            "maximal" => Ok(Module::Maximal),
            "singular" => Ok(Module::Singular),
            "pharmonic" => Ok(Module::Pharmonic),
            "jacobian" => Ok(Module::Jacobian),
            "plumbing" => Ok(Module::Plumbing),
            other => Err(Error::Format(format!(
                "unknown module `{other}` (expected maximal, singular, pharmonic, jacobian or plumbing)"
            ))),
        }
    }

    pub const ALL: [Module; 5] = [
        Module::Maximal,
        Module::Singular,
        Module::Pharmonic,
        Module::Jacobian,
        Module::Plumbing,
    ];
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub modules: Vec<Module>,
    pub seed: u64,
    /// Solver settings for the heavier p-harmonic criteria. The tolerance
    /// applies to the local-estimate solves; fixed-point and oracle checks
    /// use their own tighter targets.
    pub ph: PharmonicParams,
}

impl VerifyOptions {
    pub fn from_config(cfg: &Config) -> Result<VerifyOptions> {
        let sec = cfg.section("verify")?;
        let seed = sec.u64("seed")?;
        let modules = match sec.get("modules")? {
            "all" => Module::ALL.to_vec(),
            list => list
                .split(',')
                .map(|s| Module::parse(s.trim()))
                .collect::<Result<Vec<_>>>()?,
        };
        let mut ph = PharmonicParams {
            tol: 1e-8,
            ..PharmonicParams::default()
        };
        if let Some(sec) = cfg.section_opt("pharmonic") {
            ph = PharmonicParams::from_section(sec)?;
            if sec.get_opt("tol").is_none() {
                ph.tol = 1e-8;
            }
        }
        Ok(VerifyOptions { modules, seed, ph })
    }
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub index: usize,
    pub name: &'static str,
    pub module: Module,
    pub passed: bool,
    pub detail: String,
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn pass(detail: String) -> Result<Outcome> {
    Ok(Outcome {
        passed: true,
        detail,
    })
}

fn fail(detail: String) -> Result<Outcome> {
    Ok(Outcome {
        passed: false,
        detail,
    })
}

type Criterion = fn(&VerifyOptions) -> Result<Outcome>;

const CRITERIA: [(usize, &str, Module, Criterion); 10] = [
    (1, "oracle_equivalence", Module::Maximal, criterion_1),
    (2, "analytic_values", Module::Maximal, criterion_2),
    (3, "maximal_norm_bound", Module::Maximal, criterion_3),
    (4, "riesz_identities", Module::Singular, criterion_4),
    (5, "pharmonic_transform", Module::Pharmonic, criterion_5),
    (6, "local_estimates", Module::Pharmonic, criterion_6),
    (7, "jacobian_chain", Module::Jacobian, criterion_7),
    (8, "commutators", Module::Singular, criterion_8),
    (9, "very_weak_estimate", Module::Pharmonic, criterion_9),
    (10, "plumbing", Module::Plumbing, criterion_10),
];

/// Run the selected criteria. Every entry in the result carries its own
/// pass/fail; an `Err` inside a criterion becomes a failed entry.
pub fn verify_all(opts: &VerifyOptions) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter(|(_, _, module, _)| opts.modules.contains(module))
        .map(|&(index, name, module, run)| {
            let (passed, detail) = match run(opts) {
                Ok(out) => (out.passed, out.detail),
                Err(e) => (false, format!("error: {e}")),
            };
            CriterionResult {
                index,
                name,
                module,
                passed,
                detail,
            }
        })
        .collect()
}

fn torus(shape: &[usize], h: f64) -> Result<Arc<Domain>> {
    Ok(Arc::new(Domain::full(Grid::new(shape, h, Topology::Torus)?)?))
}

fn boxdom(shape: &[usize], h: f64) -> Result<Arc<Domain>> {
    Ok(Arc::new(Domain::full(Grid::new(shape, h, Topology::Box)?)?))
}

fn normal_scalar(dom: &Arc<Domain>, seed: u64, index: u64) -> Result<ScalarField> {
    let mut rng = SplitMix64::for_instance(seed, index);
    let values = (0..dom.grid().ncells()).map(|_| rng.normal()).collect();
    ScalarField::from_values(dom.clone(), values)
}

fn normal_vector(dom: &Arc<Domain>, seed: u64, index: u64) -> Result<VectorField> {
    let mut rng = SplitMix64::for_instance(seed, index);
    let n = dom.grid().ncells() * dom.grid().dim();
    let values = (0..n).map(|_| rng.normal()).collect();
    VectorField::from_values(dom.clone(), values)
}

fn l2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2(&diff) / l2(b).max(f64::MIN_POSITIVE)
}

fn center_cell(domain: &Domain) -> usize {
    let grid = domain.grid();
    let mut coords = [0usize; 3];
    for (axis, c) in coords.iter_mut().enumerate().take(grid.dim()) {
        *c = grid.shape()[axis] / 2;
    }
    grid.index_of(&coords)
}

fn energy_monotone(report: &SolveReport) -> bool {
    let trace = &report.energy_trace;
    let slack = 1e-12 * (1.0 + trace.first().map_or(0.0, |e| e.abs()));
    trace.windows(2).all(|w| w[1] <= w[0] + slack)
}

fn radius_index_at_least(stencils: &StencilSet, cells: usize) -> Result<usize> {
    stencils
        .radii_cells()
        .iter()
        .position(|&m| m >= cells)
        .ok_or_else(|| Error::Parameter(format!("no ladder radius of at least {cells} cells")))
}

/// Criterion 1: pruned and brute-force evaluation agree bit for bit for
/// all four maximal operators on random 16^2 fields.
fn criterion_1(opts: &VerifyOptions) -> Result<Outcome> {
    let dom = torus(&[16, 16], 1.0 / 16.0)?;
    let fast = MaximalConfig::build(&dom)?.with_mode(EvalMode::Fast).with_s(2.5);
    let brute = MaximalConfig::build(&dom)?
        .with_mode(EvalMode::BruteForce)
        .with_s(2.5);
    let ops: [(&str, fn(&ScalarField, &MaximalConfig) -> Result<ScalarField>); 4] = [
        ("max_hl", max_hl),
        ("max_sharp", max_sharp),
        ("max_spherical", max_spherical),
        ("max_interp", max_interp),
    ];
    let instances = 20;
    for i in 0..instances {
        let f = normal_scalar(&dom, opts.seed, i)?;
        for (name, op) in &ops {
            let a = op(&f, &fast)?;
            let b = op(&f, &brute)?;
            let same = a
                .values()
                .iter()
                .zip(b.values())
                .all(|(x, y)| x.to_bits() == y.to_bits());
            if !same {
                return fail(format!("instance {i}: {name} fast and brute-force differ"));
            }
        }
    }
    pass(format!("{instances} instances, 4 operators, bit-identical"))
}

/// Criterion 2: the two closed-form values at h = 1/512.
fn criterion_2(_opts: &VerifyOptions) -> Result<Outcome> {
    let h = 1.0 / 512.0;

    // Indicator of a unit ball on a circle of circumference 8: at distance
    // 2 from the support the best average is the whole-circle one, 1/4.
    let dom = torus(&[4096], h)?;
    let f = ScalarField::from_fn(dom.clone(), |x| {
        if x[0].min(8.0 - x[0]) <= 1.0 {
            1.0
        } else {
            0.0
        }
    })?;
    let cfg = MaximalConfig::build(&dom)?;
    let mf = max_hl(&f, &cfg)?;
    let at3 = mf.get((3.0 / h) as usize);
    if (at3 - 0.25).abs() > 0.03 * 0.25 {
        return fail(format!("Mf(3) = {at3}, expected 1/4 within 3%"));
    }

    // Oscillation of the identity map on [0,1] at the midpoint: the unit
    // interval itself gives mean oscillation 1/4.
    let dom = boxdom(&[512], h)?;
    let lin = ScalarField::from_fn(dom.clone(), |x| x[0])?;
    let cfg = MaximalConfig::build(&dom)?;
    let sf = max_sharp(&lin, &cfg)?;
    let at_half = sf.get((0.5 / h) as usize);
    if (at_half - 0.25).abs() > 0.03 * 0.25 {
        return fail(format!("M#f(1/2) = {at_half}, expected 1/4 within 3%"));
    }
    pass(format!("Mf(3) = {at3:.6}, M#f(1/2) = {at_half:.6}"))
}

/// Criterion 3: ‖f‖_q never exceeds ‖Mf‖_q, and the rescaled ratio
/// (q−1)‖Mf‖_q/‖f‖_q stays inside a pinned interval of spread ≤ 20 as q
/// walks from 1.0625 to 4.
fn criterion_3(opts: &VerifyOptions) -> Result<Outcome> {
    let dom = torus(&[4096], 1.0 / 512.0)?;
    let cfg = MaximalConfig::build(&dom)?;
    let qs = [1.0625, 1.125, 1.25, 1.5, 2.0, 3.0, 4.0];

    let indicator = CorpusSpec::new(Generator::Indicator, opts.seed, 6);
    let trig = CorpusSpec::new(Generator::Trig, opts.seed.wrapping_add(1), 6);
    let mut fields = Vec::new();
    for i in 0..6 {
        fields.push(corpus::scalar_instance(&indicator, &dom, i)?);
        fields.push(corpus::scalar_instance(&trig, &dom, i)?);
    }

    let mut amax = vec![f64::NEG_INFINITY; qs.len()];
    for (fi, f) in fields.iter().enumerate() {
        let mf = max_hl(f, &cfg)?;
        for (qi, &q) in qs.iter().enumerate() {
            let nf = lq_norm(f, q)?;
            let nmf = lq_norm(&mf, q)?;
            if nf > nmf {
                return fail(format!(
                    "instance {fi}, q = {q}: ‖f‖_q = {nf} exceeds ‖Mf‖_q = {nmf}"
                ));
            }
            if nf > 0.0 {
                amax[qi] = amax[qi].max((q - 1.0) * nmf / nf);
            }
        }
    }

    let lo = amax.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = amax.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi / lo;
    if !(lo > 0.0 && spread <= pins::MAXIMAL_SPREAD_CAP) {
        return fail(format!("interval [{lo:.4}, {hi:.4}], spread {spread:.2} > 20"));
    }
    if !pins::within_drift(lo, pins::MAXIMAL_A_LOW) || !pins::within_drift(hi, pins::MAXIMAL_A_HIGH)
    {
        return fail(format!(
            "interval [{lo:.4}, {hi:.4}] drifted from pinned [{}, {}]",
            pins::MAXIMAL_A_LOW,
            pins::MAXIMAL_A_HIGH
        ));
    }
    pass(format!("interval [{lo:.4}, {hi:.4}], spread {spread:.2}"))
}

/// Criterion 4: the annihilation, orthogonality, Pythagoras and
/// idempotence identities of the Riesz projectors at 1e-10.
fn criterion_4(opts: &VerifyOptions) -> Result<Outcome> {
    let dom = torus(&[64, 64], 1.0 / 64.0)?;
    let ft = FourierTransform::new(&dom)?;
    let trig = CorpusSpec::new(Generator::Trig, opts.seed.wrapping_add(4), 3);

    let mut worst: f64 = 0.0;
    for i in 0..3 {
        let phi = corpus::scalar_instance(&trig, &dom, i)?;
        let grad = ft.gradient(&phi)?;
        let t = t_apply(&grad)?;
        let rel = l2(t.values()) / l2(grad.values()).max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        if rel > 1e-10 {
            return fail(format!("instance {i}: ‖T(∇φ)‖ = {rel:.3e} relative"));
        }
    }

    for i in 0..5 {
        let v = normal_vector(&dom, opts.seed.wrapping_add(5), i)?;
        let (g, s, _) = hodge_decompose(&v)?;
        let vv = dot(v.values(), v.values());
        let ortho = dot(g.values(), s.values()).abs() / vv;
        let pyth =
            (vv - dot(g.values(), g.values()) - dot(s.values(), s.values())).abs() / vv;
        let rg = riesz2_apply(&g)?;
        let idem = rel_diff(rg.values(), g.values());
        worst = worst.max(ortho).max(pyth).max(idem);
        if ortho > 1e-10 || pyth > 1e-10 || idem > 1e-10 {
            return fail(format!(
                "instance {i}: orthogonality {ortho:.3e}, pythagoras {pyth:.3e}, idempotence {idem:.3e}"
            ));
        }
    }
    pass(format!("worst identity residual {worst:.3e}"))
}

/// Criterion 5: the p-harmonic transform against its three oracles, plus
/// monotone energy traces.
fn criterion_5(opts: &VerifyOptions) -> Result<Outcome> {
    let dom = torus(&[32, 32], 1.0 / 32.0)?;
    let ft = FourierTransform::new(&dom)?;
    let trig = CorpusSpec::new(Generator::Trig, opts.seed.wrapping_add(50), 2);
    let mut traces: Vec<SolveReport> = Vec::new();

    // p = 2 must reproduce the spectral projection.
    for i in 0..2 {
        let load = corpus::vector_instance(&trig, &dom, i)?;
        let spectral = riesz2_apply(&load)?;
        let prob = PHarmonicProblem::new(2.0, load)?
            .with_tol(1e-10)?
            .with_max_iter(opts.ph.max_iter);
        let (grad, report) = rp_transform(&prob)?;
        let rel = rel_diff(grad.values(), spectral.values());
        traces.push(report);
        if rel > 1e-6 {
            return fail(format!("p = 2 instance {i}: {rel:.3e} from spectral projection"));
        }
    }

    // Gradient loads are fixed points for every p.
    for i in 0..2 {
        let phi = corpus::scalar_instance(&trig, &dom, i + 10)?;
        let g = ft.gradient(&phi)?;
        for p in [2.0, 3.0, 4.0] {
            let prob = PHarmonicProblem::new(p, g.clone())?
                .with_tol(1e-10)?
                .with_max_iter(opts.ph.max_iter);
            let (grad, report) = rp_transform(&prob)?;
            let rel = rel_diff(grad.values(), g.values());
            traces.push(report);
            if rel > 1e-6 {
                return fail(format!("fixed point p = {p}, instance {i}: drift {rel:.3e}"));
            }
        }
    }

    // One dimension, p = 3: the flux differs from the driving field by the
    // constant that makes u' mean-free, solvable by bisection.
    let n = 255;
    let dom1 = torus(&[n], 1.0 / n as f64)?;
    let load = VectorField::from_fn(dom1.clone(), |x, _| {
        (2.0 * PI * x[0]).sin() + 0.3 * (6.0 * PI * x[0]).cos()
    })?;
    let g: Vec<f64> = (0..n)
        .map(|i| {
            let f = load.get(i, 0);
            f.abs() * f
        })
        .collect();
    let u_prime_mean = |c: f64| -> f64 {
        g.iter()
            .map(|&gi| {
                let t = gi + c;
                t.signum() * t.abs().sqrt()
            })
            .sum::<f64>()
            / n as f64
    };
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if u_prime_mean(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let oracle: Vec<f64> = g
        .iter()
        .map(|&gi| {
            let t = gi + c;
            t.signum() * t.abs().sqrt()
        })
        .collect();
    let prob = PHarmonicProblem::new(3.0, load)?
        .with_tol(1e-11)?
        .with_max_iter(opts.ph.max_iter);
    let (grad, report) = rp_transform(&prob)?;
    let oracle_err = rel_diff(grad.values(), &oracle);
    traces.push(report);
    if oracle_err > 1e-5 {
        return fail(format!("1D p = 3 oracle mismatch {oracle_err:.3e}"));
    }

    for (i, report) in traces.iter().enumerate() {
        if !energy_monotone(report) {
            return fail(format!("solve {i}: energy trace increased"));
        }
    }
    pass(format!(
        "spectral, fixed-point and 1D oracles hold; oracle error {oracle_err:.3e}, {} monotone traces",
        traces.len()
    ))
}

/// Criterion 6: the Dirichlet comparison stays bounded with positive
/// oscillation-decay exponent on every ball instance, stably across a
/// refinement.
fn criterion_6(opts: &VerifyOptions) -> Result<Outcome> {
    let instances = 20;
    let trig = CorpusSpec::new(Generator::Trig, opts.seed.wrapping_add(6), instances);

    let run_grid = |shape: usize| -> Result<Vec<(f64, f64)>> {
        let dom = torus(&[shape, shape], 1.0 / shape as f64)?;
        let center = center_cell(&dom);
        let radius = shape / 4;
        let results = parallel_map(instances as usize, |i| -> Result<(f64, f64)> {
            let p = [2.0, 3.0, 4.0][i % 3];
            let load = corpus::vector_instance(&trig, &dom, i as u64)?;
            let prob = PHarmonicProblem::new(p, load)?
                .with_tol(opts.ph.tol)?
                .with_max_iter(opts.ph.max_iter);
            let (u, _, _) = rp_potential(&prob)?;
            let (reports, alpha) = check_local_estimates(&prob, &u, center, radius, 0.5)?;
            for rep in &reports {
                if !rep.constant().is_finite() {
                    return Err(Error::Parameter(format!(
                        "instance {i}: {} ratio not finite",
                        rep.name
                    )));
                }
            }
            let locest = reports
                .iter()
                .find(|r| r.name == "dirichlet_comparison")
                .map(|r| r.constant())
                .ok_or_else(|| Error::Parameter("missing dirichlet_comparison".into()))?;
            let alpha = alpha
                .ok_or_else(|| Error::Parameter(format!("instance {i}: no decay exponent")))?;
            Ok((locest, alpha))
        });
        results.into_iter().collect()
    };

    let coarse = run_grid(64)?;
    for (i, &(ratio, alpha)) in coarse.iter().enumerate() {
        if !(alpha > 0.0) {
            return fail(format!("64^2 instance {i}: fitted alpha = {alpha}"));
        }
        if !ratio.is_finite() {
            return fail(format!("64^2 instance {i}: ratio = {ratio}"));
        }
    }
    let fine = run_grid(128)?;
    for (i, &(_, alpha)) in fine.iter().enumerate() {
        if !(alpha > 0.0) {
            return fail(format!("128^2 instance {i}: fitted alpha = {alpha}"));
        }
    }
    let max_coarse = coarse.iter().map(|&(r, _)| r).fold(f64::NEG_INFINITY, f64::max);
    let max_fine = fine.iter().map(|&(r, _)| r).fold(f64::NEG_INFINITY, f64::max);
    if !pins::within_drift(max_coarse, pins::LOCEST_MAX) {
        return fail(format!(
            "corpus max {max_coarse:.4} drifted from pinned {}",
            pins::LOCEST_MAX
        ));
    }
    if (max_fine - max_coarse).abs() > pins::PIN_DRIFT * max_coarse {
        return fail(format!(
            "corpus max moved {max_coarse:.4} -> {max_fine:.4} under refinement"
        ));
    }
    pass(format!(
        "max ratio {max_coarse:.4} (64^2), {max_fine:.4} (128^2), all alpha > 0"
    ))
}

/// Criterion 7: the cofactor identity, the isoperimetric ceiling, the
/// pinned Hardy and L log L ratios, and the orientation guard.
fn criterion_7(opts: &VerifyOptions) -> Result<Outcome> {
    // Cofactor identity on random matrices, hosted one per cell of a tiny
    // field whose dimension matches the matrix.
    let tiny2 = torus(&[4, 4], 0.25)?;
    let tiny3 = torus(&[4, 4, 4], 0.25)?;
    let mut rng = SplitMix64::for_instance(opts.seed.wrapping_add(7), 0);
    for i in 0..100 {
        let n = 2 + (i % 2);
        let mut m = SmallMat::zeros(n);
        for r in 0..n {
            for c in 0..n {
                m.set(r, c, rng.normal());
            }
        }
        let host = if n == 2 { &tiny2 } else { &tiny3 };
        let mut mf = MatrixField::zeros(host.clone());
        mf.set(0, &m);
        let cof = cofactor(&mf).get(0);
        let det = m.det();
        let mut frob = 0.0;
        for r in 0..n {
            for c in 0..n {
                frob += m.get(r, c) * m.get(r, c);
            }
        }
        let scale = 1.0 + frob.powf(n as f64 / 2.0);
        // The library's convention is (Df)ᵀ · D♯f = det(Df) · I.
        for r in 0..n {
            for c in 0..n {
                let mut entry = 0.0;
                for k in 0..n {
                    entry += m.get(k, r) * cof.get(k, c);
                }
                let target = if r == c { det } else { 0.0 };
                if (entry - target).abs() > 1e-12 * scale {
                    return fail(format!(
                        "matrix {i}: cofactor identity residual {:.3e}",
                        (entry - target).abs() / scale
                    ));
                }
            }
        }
    }

    // Isoperimetric ceiling over 100 mixed instances.
    let dom = torus(&[64, 64], 1.0 / 64.0)?;
    let stencils = StencilSet::build(&dom)?;
    let k = radius_index_at_least(&stencils, 8)?;
    let r = stencils.radii()[k];
    let center = center_cell(&dom);
    let linmap = CorpusSpec::new(Generator::LinMap, opts.seed.wrapping_add(70), 50);
    let diffeo = CorpusSpec::new(Generator::Diffeo, opts.seed.wrapping_add(71), 50);
    let mut iso_max: f64 = 0.0;
    for i in 0..100u64 {
        let spec = if i % 2 == 0 { &linmap } else { &diffeo };
        let f = corpus::mapping_instance(spec, &dom, i / 2)?;
        let rep = check_isoperimetric(&f, center, r)?;
        let ratio = rep.constant();
        if !ratio.is_finite() {
            return fail(format!("isoperimetric instance {i}: ratio {ratio}"));
        }
        iso_max = iso_max.max(ratio);
    }
    if iso_max > pins::ISOPERIMETRIC_CEILING {
        return fail(format!(
            "isoperimetric max {iso_max:.4} above pinned ceiling {}",
            pins::ISOPERIMETRIC_CEILING
        ));
    }

    // Hardy bound on a box, coarse and refined.
    let hardy_max = |shape: usize| -> Result<f64> {
        let dom = boxdom(&[shape, shape], 1.0 / shape as f64)?;
        let diffeo = CorpusSpec::new(Generator::Diffeo, opts.seed.wrapping_add(72), 20);
        let mut best: f64 = 0.0;
        for i in 0..20 {
            let f = corpus::mapping_instance(&diffeo, &dom, i)?;
            let ratio = check_hardy_bound(&f)?.constant();
            if !ratio.is_finite() {
                return Err(Error::Parameter(format!("hardy instance {i} not finite")));
            }
            best = best.max(ratio);
        }
        Ok(best)
    };
    let hardy_coarse = hardy_max(64)?;
    let hardy_fine = hardy_max(128)?;
    if !pins::within_drift(hardy_coarse, pins::HARDY_MAX) {
        return fail(format!(
            "hardy max {hardy_coarse:.4} drifted from pinned {}",
            pins::HARDY_MAX
        ));
    }
    if (hardy_fine - hardy_coarse).abs() > pins::PIN_DRIFT * hardy_coarse {
        return fail(format!(
            "hardy max moved {hardy_coarse:.4} -> {hardy_fine:.4} under refinement"
        ));
    }

    // L log L chain on the torus, coarse and refined.
    let llogl_max = |shape: usize, cells: usize| -> Result<(f64, f64)> {
        let dom = torus(&[shape, shape], 1.0 / shape as f64)?;
        let stencils = StencilSet::build(&dom)?;
        let k = radius_index_at_least(&stencils, cells)?;
        let center = center_cell(&dom);
        let diffeo = CorpusSpec::new(Generator::Diffeo, opts.seed.wrapping_add(73), 20);
        let (mut first, mut second): (f64, f64) = (0.0, 0.0);
        for i in 0..20 {
            let f = corpus::mapping_instance(&diffeo, &dom, i)?;
            let (a, b) = check_llogl(&f, center, k)?;
            first = first.max(a.constant());
            second = second.max(b.constant());
        }
        Ok((first, second))
    };
    let (llogl_coarse, chain_coarse) = llogl_max(64, 8)?;
    let (llogl_fine, chain_fine) = llogl_max(128, 16)?;
    if !pins::within_drift(llogl_coarse, pins::LLOGL_MAX)
        || !pins::within_drift(chain_coarse, pins::LLOGL_HARDY_MAX)
    {
        return fail(format!(
            "llogl maxima ({llogl_coarse:.4}, {chain_coarse:.4}) drifted from pins ({}, {})",
            pins::LLOGL_MAX,
            pins::LLOGL_HARDY_MAX
        ));
    }
    if (llogl_fine - llogl_coarse).abs() > pins::PIN_DRIFT * llogl_coarse
        || (chain_fine - chain_coarse).abs() > pins::PIN_DRIFT * chain_coarse
    {
        return fail(format!(
            "llogl maxima moved ({llogl_coarse:.4}, {chain_coarse:.4}) -> ({llogl_fine:.4}, {chain_fine:.4})"
        ));
    }

    // A reversed map must trip the orientation guard.
    let mut reversed = SmallMat::identity(2);
    reversed.set(0, 0, -1.0);
    let flipped = MappingField::from_linear(dom.clone(), reversed)?;
    if check_llogl(&flipped, center, k).is_ok() {
        return fail("orientation guard stayed silent on a reversed map".to_string());
    }

    pass(format!(
        "cofactor exact, iso max {iso_max:.4}, hardy max {hardy_coarse:.4}, llogl maxima ({llogl_coarse:.4}, {chain_coarse:.4})"
    ))
}

/// Criterion 8: commutator identities and the ε-sweep.
fn criterion_8(opts: &VerifyOptions) -> Result<Outcome> {
    let dom = torus(&[64, 64], 1.0 / 64.0)?;
    let op = MultiplierOp::RieszProduct;
    let s = 2.0;
    let trig = CorpusSpec::new(Generator::Trig, opts.seed.wrapping_add(8), 1);
    let f = corpus::scalar_instance(&trig, &dom, 0)?;
    let smooth = ScalarField::from_fn(dom.clone(), |x| {
        2.0 + (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
    })?;

    // Constant symbols commute exactly (up to roundoff of the transform).
    let lambda = ScalarField::from_fn(dom.clone(), |_| 0.7)?;
    let crw = commutator_crw(&lambda, &f, op, s)?;
    let crw_scale = lq_norm(&f, s)?;
    if crw.lhs_norm > 1e-12 * crw_scale {
        return fail(format!(
            "CRW commutator with constant symbol: {:.3e} of scale",
            crw.lhs_norm / crw_scale
        ));
    }

    // Power commutator vanishes identically at ε = 0.
    for sign in [PowerSign::Plus, PowerSign::Minus] {
        let rep = commutator_power(&f, op, s, 0.0, sign)?;
        if rep.lhs_norm != 0.0 {
            return fail(format!("power commutator at eps = 0: lhs = {}", rep.lhs_norm));
        }
    }

    // The Rochberg-Weiss field scales linearly: the log splits off a
    // constant, and constants commute.
    let c = 4.0;
    let scaled = f.map(|v| c * v)?;
    let base = rochberg_weiss_field(&f, op)?;
    let big = rochberg_weiss_field(&scaled, op)?;
    let err: Vec<f64> = big
        .values()
        .iter()
        .zip(base.values())
        .map(|(b, a)| b - c * a)
        .collect();
    let scale = l2(big.values()).max(c * l2(f.values()));
    let rw_rel = l2(&err) / scale;
    if rw_rel > 1e-10 {
        return fail(format!("RW scaling covariance broke: {rw_rel:.3e}"));
    }

    // Small ε links the power commutator to the RW field.
    let eps = 0.01;
    let p_field = power_commutator_field(&smooth, op, eps, PowerSign::Plus)?;
    let rw = rochberg_weiss_field(&smooth, op)?;
    let lh: Vec<f64> = p_field
        .values()
        .iter()
        .zip(rw.values())
        .map(|(a, b)| a / eps - b)
        .collect();
    let lh_rel = l2(&lh) / l2(rw.values());
    if lh_rel > 0.05 {
        return fail(format!("L'Hopital link off by {lh_rel:.3e} relative"));
    }

    // ε-sweep: the per-ε normalized ratios stay within a 2x band.
    let mut ratios = Vec::new();
    for eps in [0.2, 0.1, 0.05, 0.025] {
        let rep = commutator_power(&smooth, op, s, eps, PowerSign::Minus)?;
        match rep.ratio {
            Some(r) if r.is_finite() && r > 0.0 => ratios.push(r),
            _ => return fail(format!("eps = {eps}: degenerate sweep ratio")),
        }
    }
    let sweep_lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let sweep_hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if sweep_hi / sweep_lo > pins::SWEEP_SPREAD_CAP {
        return fail(format!(
            "eps-sweep spread {:.2} exceeds {}",
            sweep_hi / sweep_lo,
            pins::SWEEP_SPREAD_CAP
        ));
    }

    pass(format!(
        "identities hold; L'Hopital residual {lh_rel:.3e}, sweep spread {:.2}",
        sweep_hi / sweep_lo
    ))
}

/// Criterion 9: the below-natural-exponent transform is exact on gradient
/// loads and the solenoidal defect scales linearly in ε.
///
/// The smallness report compares raw integrals, ∫|𝔥|^{(p−ε)/(1−ε)} against
/// ε·∫|∇u|^{p−ε}, so its ratio decays like a power of ε and is not the
/// object with an ε-uniform constant.  Taking the (p−ε)/(1−ε) root of the
/// integral quotient and dividing by ε measures the defect's norm per unit
/// ε, which is the quantity expected to stay within a fixed band across
/// the ladder.
fn criterion_9(opts: &VerifyOptions) -> Result<Outcome> {
    let dom = torus(&[64, 64], 1.0 / 64.0)?;
    let ft = FourierTransform::new(&dom)?;
    let eps_ladder = [0.05, 0.1, 0.2];
    let trig = CorpusSpec::new(Generator::Trig, opts.seed.wrapping_add(9), 4);

    for i in 0..2 {
        let phi = corpus::scalar_instance(&trig, &dom, i)?;
        let g = ft.gradient(&phi)?;
        let prob = PHarmonicProblem::new(3.0, g)?
            .with_tol(1e-10)?
            .with_max_iter(opts.ph.max_iter);
        let reports = check_very_weak(&prob, &eps_ladder)?;
        for rep in reports.iter().filter(|r| r.name == "very_weak_transform") {
            let ratio = rep.ratio.unwrap_or(f64::NAN);
            if !((ratio - 1.0).abs() <= 1e-4) {
                return fail(format!(
                    "gradient load {i}: transform ratio {ratio} is not 1 within 1e-4"
                ));
            }
        }
    }

    let mut per_eps_max = vec![f64::NEG_INFINITY; eps_ladder.len()];
    for i in 0..2 {
        let load = corpus::vector_instance(&trig, &dom, i + 2)?;
        let prob = PHarmonicProblem::new(3.0, load)?
            .with_tol(1e-10)?
            .with_max_iter(opts.ph.max_iter);
        let reports = check_very_weak(&prob, &eps_ladder)?;
        let smallness: Vec<&maxharm_core::InequalityReport> = reports
            .iter()
            .filter(|r| r.name == "very_weak_smallness")
            .collect();
        for (ei, rep) in smallness.iter().enumerate() {
            let eps = eps_ladder[ei];
            let r_exp = (3.0 - eps) / (1.0 - eps);
            let raw_energy = rep.rhs / eps;
            let per_unit_eps = if rep.lhs > 0.0 && raw_energy > 0.0 {
                (rep.lhs / raw_energy).powf(1.0 / r_exp) / eps
            } else {
                f64::NAN
            };
            if !(per_unit_eps.is_finite() && per_unit_eps > 0.0) {
                return fail(format!(
                    "random load {i}, eps = {eps}: degenerate smallness defect"
                ));
            }
            per_eps_max[ei] = per_eps_max[ei].max(per_unit_eps);
        }
    }
    let lo = per_eps_max.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = per_eps_max.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi / lo > pins::SWEEP_SPREAD_CAP {
        return fail(format!(
            "smallness spread {:.2} exceeds {} over the eps ladder",
            hi / lo,
            pins::SWEEP_SPREAD_CAP
        ));
    }
    pass(format!(
        "gradient loads exact to 1e-4, smallness spread {:.2}",
        hi / lo
    ))
}

/// Criterion 10: bit-exact field round-trips and bit-exact experiment
/// reruns.
fn criterion_10(opts: &VerifyOptions) -> Result<Outcome> {
    let tmp = std::env::temp_dir().join(format!("maxharm-verify-{}", std::process::id()));
    std::fs::create_dir_all(&tmp)
        .map_err(|e| Error::Format(format!("cannot create {}: {e}", tmp.display())))?;

    // Masked box scalar, torus vector, torus matrix.
    let grid = Grid::new(&[8, 8], 0.125, Topology::Box)?;
    let mask: Vec<bool> = (0..64).map(|i| (i % 7) != 0).collect();
    let masked = Arc::new(Domain::with_mask(grid, mask)?);
    let scalar = normal_scalar(&masked, opts.seed.wrapping_add(10), 0)?;
    let dom = torus(&[8, 8], 0.125)?;
    let vector = normal_vector(&dom, opts.seed.wrapping_add(10), 1)?;
    let mut matrix = MatrixField::zeros(dom.clone());
    let mut rng = SplitMix64::for_instance(opts.seed.wrapping_add(10), 2);
    for idx in 0..dom.grid().ncells() {
        let mut m = SmallMat::zeros(2);
        for r in 0..2 {
            for c in 0..2 {
                m.set(r, c, rng.normal());
            }
        }
        matrix.set(idx, &m);
    }

    let fields = [
        StoredField::Scalar(scalar),
        StoredField::Vector(vector),
        StoredField::Matrix(matrix),
    ];
    for (i, field) in fields.iter().enumerate() {
        let path = tmp.join(format!("roundtrip-{i}.field"));
        save_field(field, &path)?;
        let back = load_field(&path)?;
        let same = match (field, &back) {
            (StoredField::Scalar(a), StoredField::Scalar(b)) => {
                bits_equal(a.values(), b.values()) && a.domain().as_ref() == b.domain().as_ref()
            }
            (StoredField::Vector(a), StoredField::Vector(b)) => {
                bits_equal(a.values(), b.values()) && a.domain().as_ref() == b.domain().as_ref()
            }
            (StoredField::Matrix(a), StoredField::Matrix(b)) => {
                bits_equal(a.values(), b.values()) && a.domain().as_ref() == b.domain().as_ref()
            }
            _ => false,
        };
        if !same {
            let _ = std::fs::remove_dir_all(&tmp);
            return fail(format!("round-trip changed the {} field", field.kind_name()));
        }
    }
    let _ = std::fs::remove_dir_all(&tmp);

    // Rerunning an experiment reproduces the report byte for byte.
    let spec = ExperimentSpec {
        name: "determinism-probe".to_string(),
        inequality: Inequality::MaximalNorm,
        grid: GridSpec {
            shape: vec![16, 16],
            h: 1.0 / 16.0,
            topology: Topology::Torus,
        },
        corpus: CorpusSpec::new(Generator::Indicator, opts.seed.wrapping_add(100), 3),
        ladder: vec![1.5, 2.0],
        op: None,
        s: 2.0,
        pharmonic: PharmonicParams::default(),
        refine: false,
        output_dir: None,
    };
    let a = run_experiment(&spec)?;
    let b = run_experiment(&spec)?;
    let csv_a = report_csv(&a);
    let csv_b = report_csv(&b);
    let json_a = serde_json::to_string(&a)
        .map_err(|e| Error::Format(format!("serialization failed: {e}")))?;
    let json_b = serde_json::to_string(&b)
        .map_err(|e| Error::Format(format!("serialization failed: {e}")))?;
    if csv_a != csv_b || json_a != json_b {
        return fail("experiment rerun produced different bytes".to_string());
    }
    if !stream_is_stable(opts.seed, 7) {
        return fail("instance stream is not reproducible".to_string());
    }
    pass("round-trips and reruns are bit-exact".to_string())
}

fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Observed constants for the pins, printed by the hidden calibrate verb.
pub fn calibrate(opts: &VerifyOptions) -> Result<String> {
    let mut out = String::new();

    // Criterion 3 interval.
    {
        let dom = torus(&[4096], 1.0 / 512.0)?;
        let cfg = MaximalConfig::build(&dom)?;
        let qs = [1.0625, 1.125, 1.25, 1.5, 2.0, 3.0, 4.0];
        let indicator = CorpusSpec::new(Generator::Indicator, opts.seed, 6);
        let trig = CorpusSpec::new(Generator::Trig, opts.seed.wrapping_add(1), 6);
        let mut amax = vec![f64::NEG_INFINITY; qs.len()];
        for i in 0..6 {
            for f in [
                corpus::scalar_instance(&indicator, &dom, i)?,
                corpus::scalar_instance(&trig, &dom, i)?,
            ] {
                let mf = max_hl(&f, &cfg)?;
                for (qi, &q) in qs.iter().enumerate() {
                    let nf = lq_norm(&f, q)?;
                    if nf > 0.0 {
                        amax[qi] = amax[qi].max((q - 1.0) * lq_norm(&mf, q)? / nf);
                    }
                }
            }
        }
        let lo = amax.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = amax.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.push_str(&format!("pub const MAXIMAL_A_LOW: f64 = {lo};\n"));
        out.push_str(&format!("pub const MAXIMAL_A_HIGH: f64 = {hi};\n"));
    }

    // Criterion 6 corpus max at 64^2.
    {
        let instances = 20;
        let trig = CorpusSpec::new(Generator::Trig, opts.seed.wrapping_add(6), instances);
        let dom = torus(&[64, 64], 1.0 / 64.0)?;
        let center = center_cell(&dom);
        let results = parallel_map(instances as usize, |i| -> Result<f64> {
            let p = [2.0, 3.0, 4.0][i % 3];
            let load = corpus::vector_instance(&trig, &dom, i as u64)?;
            let prob = PHarmonicProblem::new(p, load)?
                .with_tol(opts.ph.tol)?
                .with_max_iter(opts.ph.max_iter);
            let (u, _, _) = rp_potential(&prob)?;
            let (reports, _) = check_local_estimates(&prob, &u, center, 16, 0.5)?;
            Ok(reports
                .iter()
                .find(|r| r.name == "dirichlet_comparison")
                .map(|r| r.constant())
                .unwrap_or(f64::NAN))
        });
        let mut best: f64 = 0.0;
        for r in results {
            best = best.max(r?);
        }
        out.push_str(&format!("pub const LOCEST_MAX: f64 = {best};\n"));
    }

    // Criterion 7 pins.
    {
        let dom = torus(&[64, 64], 1.0 / 64.0)?;
        let stencils = StencilSet::build(&dom)?;
        let k = radius_index_at_least(&stencils, 8)?;
        let r = stencils.radii()[k];
        let center = center_cell(&dom);
        let linmap = CorpusSpec::new(Generator::LinMap, opts.seed.wrapping_add(70), 50);
        let diffeo = CorpusSpec::new(Generator::Diffeo, opts.seed.wrapping_add(71), 50);
        let mut iso_max: f64 = 0.0;
        for i in 0..100u64 {
            let spec = if i % 2 == 0 { &linmap } else { &diffeo };
            let f = corpus::mapping_instance(spec, &dom, i / 2)?;
            iso_max = iso_max.max(check_isoperimetric(&f, center, r)?.constant());
        }
        out.push_str(&format!(
            "pub const ISOPERIMETRIC_CEILING: f64 = {}; // observed max {iso_max}\n",
            iso_max * 1.1
        ));

        let hdom = boxdom(&[64, 64], 1.0 / 64.0)?;
        let hspec = CorpusSpec::new(Generator::Diffeo, opts.seed.wrapping_add(72), 20);
        let mut hardy: f64 = 0.0;
        for i in 0..20 {
            let f = corpus::mapping_instance(&hspec, &hdom, i)?;
            hardy = hardy.max(check_hardy_bound(&f)?.constant());
        }
        out.push_str(&format!("pub const HARDY_MAX: f64 = {hardy};\n"));

        let lspec = CorpusSpec::new(Generator::Diffeo, opts.seed.wrapping_add(73), 20);
        let (mut first, mut second): (f64, f64) = (0.0, 0.0);
        for i in 0..20 {
            let f = corpus::mapping_instance(&lspec, &dom, i)?;
            let (a, b) = check_llogl(&f, center, k)?;
            first = first.max(a.constant());
            second = second.max(b.constant());
        }
        out.push_str(&format!("pub const LLOGL_MAX: f64 = {first};\n"));
        out.push_str(&format!("pub const LLOGL_HARDY_MAX: f64 = {second};\n"));
    }

    Ok(out)
}
