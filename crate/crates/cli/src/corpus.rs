//! Seeded test-field corpora.
//!
//! Every instance is a pure function of `(seed, index)` through the
//! counter-based generator in `maxharm_core::rng`, so corpora are
//! reproducible across runs and machines without storing any fields.
//! Generators sample in continuum coordinates (cell centers), which means
//! regenerating the same instance on a refined grid samples the same
//! underlying function; refinement studies rely on this.

use crate::config::Section;
use maxharm_core::field::{MappingField, ScalarField, VectorField};
use maxharm_core::grid::Topology;
use maxharm_core::linalg::SmallMat;
use maxharm_core::rng::SplitMix64;
use maxharm_core::{Domain, Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// Random trigonometric polynomial, band-limited to `degree`.
    Trig,
    /// Sum of a few Gaussians, clipped to compact support at three sigma.
    Bump,
    /// Union of one to three axis-aligned rectangles, log-uniform widths.
    Indicator,
    /// Truncated `-ln|x - x0|` with a random off-grid pole.
    LogBmo,
    /// Random linear map with determinant bounded away from zero.
    LinMap,
    /// Identity plus a trig displacement with gradient norm below 0.45.
    Diffeo,
}

impl Generator {
    pub fn parse(name: &str) -> Result<Generator> {
        match name {
            "trig" => Ok(Generator::Trig),
            "bump" => Ok(Generator::Bump),
            "indicator" => Ok(Generator::Indicator),
            "logbmo" => Ok(Generator::LogBmo),
            "linmap" => Ok(Generator::LinMap),
            "diffeo" => Ok(Generator::Diffeo),
            other => Err(Error::Format(format!(
                "unknown generator `{other}` (expected trig, bump, indicator, logbmo, linmap or diffeo)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Generator::Trig => "trig",
            Generator::Bump => "bump",
            Generator::Indicator => "indicator",
            Generator::LogBmo => "logbmo",
            Generator::LinMap => "linmap",
            Generator::Diffeo => "diffeo",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub generator: Generator,
    pub seed: u64,
    pub count: usize,
    /// Band limit for trig-based generators.
    pub degree: usize,
}

impl CorpusSpec {
    pub fn new(generator: Generator, seed: u64, count: usize) -> CorpusSpec {
        CorpusSpec {
            generator,
            seed,
            count,
            degree: 4,
        }
    }

    pub fn from_section(sec: &Section) -> Result<CorpusSpec> {
        let generator = Generator::parse(sec.get("generator")?)?;
        let seed = sec.u64("seed")?;
        let count = sec.usize("count")?;
        let degree = sec.usize_opt("degree")?.unwrap_or(4);
        if degree == 0 {
            return Err(Error::Format(format!(
                "key `degree` in section [{}] must be at least 1",
                sec.name()
            )));
        }
        Ok(CorpusSpec {
            generator,
            seed,
            count,
            degree,
        })
    }
}

/// Distance from `x` to `y` respecting the torus identification.
fn point_distance(x: &[f64; 3], y: &[f64; 3], sides: &[f64], topology: Topology) -> f64 {
    let mut acc = 0.0;
    for (axis, &side) in sides.iter().enumerate() {
        let mut d = (x[axis] - y[axis]).abs();
        if topology == Topology::Torus {
            d = d.min(side - d);
        }
        acc += d * d;
    }
    acc.sqrt()
}

/// One random wave: amplitude, integer mode per axis and a phase. The
/// mode is nonzero and bounded by `degree` and a quarter of the smallest
/// axis, so waves stay comfortably below the Nyquist frequency on every
/// grid they are evaluated on.
struct Wave {
    amp: f64,
    mode: [i64; 3],
    phase: f64,
}

impl Wave {
    fn draw(rng: &mut SplitMix64, dim: usize, band: i64) -> Wave {
        let mut mode = [0i64; 3];
        loop {
            for m in mode.iter_mut().take(dim) {
                *m = rng.uniform_usize((2 * band + 1) as usize) as i64 - band;
            }
            if mode.iter().any(|&m| m != 0) {
                break;
            }
        }
        Wave {
            amp: rng.normal(),
            mode,
            phase: rng.uniform(0.0, 2.0 * PI),
        }
    }

    fn eval(&self, x: &[f64; 3], sides: &[f64]) -> f64 {
        let mut arg = self.phase;
        for (axis, &side) in sides.iter().enumerate() {
            arg += 2.0 * PI * self.mode[axis] as f64 * x[axis] / side;
        }
        self.amp * arg.cos()
    }

    /// Euclidean norm of the gradient amplitude vector `2π a k / L`.
    fn gradient_budget(&self, sides: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (axis, &side) in sides.iter().enumerate() {
            let g = 2.0 * PI * self.mode[axis] as f64 / side;
            acc += g * g;
        }
        self.amp.abs() * acc.sqrt()
    }
}

fn sides_of(domain: &Domain) -> Vec<f64> {
    let grid = domain.grid();
    (0..grid.dim()).map(|a| grid.side(a)).collect()
}

fn band_limit(domain: &Domain, degree: usize) -> i64 {
    let cap = (domain.grid().min_shape() / 4).max(1);
    degree.min(cap) as i64
}

fn trig_scalar(spec: &CorpusSpec, domain: &Arc<Domain>, rng: &mut SplitMix64) -> Result<ScalarField> {
    let grid = domain.grid();
    let sides = sides_of(domain);
    let band = band_limit(domain, spec.degree);
    let nterms = 2 * grid.dim() + 2;
    let waves: Vec<Wave> = (0..nterms).map(|_| Wave::draw(rng, grid.dim(), band)).collect();
    let scale = 1.0 / (nterms as f64).sqrt();
    ScalarField::from_fn(domain.clone(), |x| {
        let p = [x[0], *x.get(1).unwrap_or(&0.0), *x.get(2).unwrap_or(&0.0)];
        scale * waves.iter().map(|w| w.eval(&p, &sides)).sum::<f64>()
    })
}

fn bump_scalar(spec: &CorpusSpec, domain: &Arc<Domain>, rng: &mut SplitMix64) -> Result<ScalarField> {
    let _ = spec;
    let grid = domain.grid();
    let sides = sides_of(domain);
    let topology = grid.topology();
    let min_side = sides.iter().cloned().fold(f64::INFINITY, f64::min);
    let nbumps = 1 + rng.uniform_usize(3);
    struct Bump {
        center: [f64; 3],
        sigma: f64,
        amp: f64,
    }
    let bumps: Vec<Bump> = (0..nbumps)
        .map(|_| {
            let mut center = [0.0; 3];
            for (axis, &side) in sides.iter().enumerate() {
                center[axis] = rng.uniform(0.0, side);
            }
            Bump {
                center,
                sigma: min_side * rng.uniform(0.04, 0.12),
                amp: rng.normal(),
            }
        })
        .collect();
    let cut = (-4.5f64).exp();
    ScalarField::from_fn(domain.clone(), |x| {
        let p = [x[0], *x.get(1).unwrap_or(&0.0), *x.get(2).unwrap_or(&0.0)];
        bumps
            .iter()
            .map(|b| {
                let d = point_distance(&p, &b.center, &sides, topology);
                let v = (-d * d / (2.0 * b.sigma * b.sigma)).exp() - cut;
                b.amp * v.max(0.0)
            })
            .sum()
    })
}

fn indicator_scalar(
    spec: &CorpusSpec,
    domain: &Arc<Domain>,
    rng: &mut SplitMix64,
) -> Result<ScalarField> {
    let _ = spec;
    let grid = domain.grid();
    let sides = sides_of(domain);
    let h = grid.spacing();
    let topology = grid.topology();
    let dim = grid.dim();
    struct Rect {
        lo: [f64; 3],
        width: [f64; 3],
    }
    let nrects = 1 + rng.uniform_usize(3);
    let rects: Vec<Rect> = (0..nrects)
        .map(|_| {
            let mut lo = [0.0; 3];
            let mut width = [0.0; 3];
            for (axis, &side) in sides.iter().enumerate() {
                // Log-uniform widths between four cells and a quarter of the
                // side, so the corpus mixes thin spikes with fat blocks.
                let wmin = 4.0 * h;
                let wmax = (0.25 * side).max(wmin);
                let w = wmin * (wmax / wmin).powf(rng.next_f64());
                width[axis] = w;
                lo[axis] = match topology {
                    Topology::Torus => rng.uniform(0.0, side),
                    Topology::Box => rng.uniform(0.0, (side - w).max(0.0)),
                };
            }
            Rect { lo, width }
        })
        .collect();
    ScalarField::from_fn(domain.clone(), |x| {
        let p = [x[0], *x.get(1).unwrap_or(&0.0), *x.get(2).unwrap_or(&0.0)];
        let covered = rects.iter().any(|r| {
            (0..dim).all(|axis| {
                let rel = match topology {
                    Topology::Torus => (p[axis] - r.lo[axis]).rem_euclid(sides[axis]),
                    Topology::Box => p[axis] - r.lo[axis],
                };
                (0.0..r.width[axis]).contains(&rel)
            })
        });
        if covered {
            1.0
        } else {
            0.0
        }
    })
}

fn logbmo_scalar(
    spec: &CorpusSpec,
    domain: &Arc<Domain>,
    rng: &mut SplitMix64,
) -> Result<ScalarField> {
    let _ = spec;
    let grid = domain.grid();
    let sides = sides_of(domain);
    let h = grid.spacing();
    let topology = grid.topology();
    let cell = rng.uniform_usize(grid.ncells());
    let mut pole = grid.cell_center(cell);
    // Nudge the pole off cell centers so no sample lands exactly on it.
    for axis in 0..grid.dim() {
        pole[axis] = (pole[axis] + h / 3.0).rem_euclid(sides[axis]);
    }
    ScalarField::from_fn(domain.clone(), |x| {
        let p = [x[0], *x.get(1).unwrap_or(&0.0), *x.get(2).unwrap_or(&0.0)];
        -point_distance(&p, &pole, &sides, topology).max(h).ln()
    })
}

fn linmap_matrix(dim: usize, rng: &mut SplitMix64) -> Result<SmallMat> {
    // Rejection keeps the determinant away from zero; the retries consume
    // the same stream, so the draw stays a pure function of (seed, index).
    for _ in 0..64 {
        let mut m = SmallMat::identity(dim);
        let spread = 0.35 / (dim as f64).sqrt();
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, m.get(i, j) + spread * rng.normal());
            }
        }
        if m.det() > 0.1 {
            return Ok(m);
        }
    }
    Err(Error::Parameter(
        "linmap rejection sampling failed to find a well-oriented map".into(),
    ))
}

fn diffeo_mapping(
    spec: &CorpusSpec,
    domain: &Arc<Domain>,
    rng: &mut SplitMix64,
) -> Result<MappingField> {
    let grid = domain.grid();
    let dim = grid.dim();
    let sides = sides_of(domain);
    let band = band_limit(domain, spec.degree.min(3));
    let nterms = 3;
    let mut waves: Vec<Vec<Wave>> = (0..dim)
        .map(|_| (0..nterms).map(|_| Wave::draw(rng, dim, band)).collect())
        .collect();
    // Budget the displacement gradient: each wave contributes a rank-one
    // term of spectral norm |a| |2π k / L|, so scaling the sum of those
    // norms to 0.45 keeps every eigenvalue of I + Du away from zero and
    // the map orientation-preserving.
    let budget: f64 = waves
        .iter()
        .flatten()
        .map(|w| w.gradient_budget(&sides))
        .sum();
    let target = 0.45 * rng.uniform(0.5, 1.0);
    if budget > 0.0 {
        let s = target / budget;
        for w in waves.iter_mut().flatten() {
            w.amp *= s;
        }
    }
    let displacement = VectorField::from_fn(domain.clone(), |x, axis| {
        let p = [x[0], *x.get(1).unwrap_or(&0.0), *x.get(2).unwrap_or(&0.0)];
        waves[axis].iter().map(|w| w.eval(&p, &sides)).sum()
    })?;
    MappingField::new(SmallMat::identity(dim), displacement)
}

/// The `index`-th scalar field of the corpus.
pub fn scalar_instance(spec: &CorpusSpec, domain: &Arc<Domain>, index: u64) -> Result<ScalarField> {
    let mut rng = SplitMix64::for_instance(spec.seed, index);
    match spec.generator {
        Generator::Trig => trig_scalar(spec, domain, &mut rng),
        Generator::Bump => bump_scalar(spec, domain, &mut rng),
        Generator::Indicator => indicator_scalar(spec, domain, &mut rng),
        Generator::LogBmo => logbmo_scalar(spec, domain, &mut rng),
        Generator::LinMap | Generator::Diffeo => Err(Error::Parameter(format!(
            "generator `{}` produces mappings, not scalar fields",
            spec.generator.name()
        ))),
    }
}

/// The `index`-th vector field. Components draw from the same stream in
/// axis order, so they are independent but jointly deterministic.
pub fn vector_instance(spec: &CorpusSpec, domain: &Arc<Domain>, index: u64) -> Result<VectorField> {
    let mut rng = SplitMix64::for_instance(spec.seed, index);
    let dim = domain.grid().dim();
    let mut components = Vec::with_capacity(dim);
    for _ in 0..dim {
        let c = match spec.generator {
            Generator::Trig => trig_scalar(spec, domain, &mut rng)?,
            Generator::Bump => bump_scalar(spec, domain, &mut rng)?,
            _ => {
                return Err(Error::Parameter(format!(
                    "generator `{}` does not produce vector fields (use trig or bump)",
                    spec.generator.name()
                )))
            }
        };
        components.push(c);
    }
    VectorField::from_components(&components)
}

/// The `index`-th mapping. Only `linmap` and `diffeo` apply.
pub fn mapping_instance(
    spec: &CorpusSpec,
    domain: &Arc<Domain>,
    index: u64,
) -> Result<MappingField> {
    let mut rng = SplitMix64::for_instance(spec.seed, index);
    match spec.generator {
        Generator::LinMap => {
            let m = linmap_matrix(domain.grid().dim(), &mut rng)?;
            MappingField::from_linear(domain.clone(), m)
        }
        Generator::Diffeo => diffeo_mapping(spec, domain, &mut rng),
        other => Err(Error::Parameter(format!(
            "generator `{}` does not produce mappings (use linmap or diffeo)",
            other.name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use maxharm_core::jacobian;
    use maxharm_core::norms::lq_norm;
    use maxharm_core::Grid;

    fn torus(n: usize) -> Arc<Domain> {
        let grid = Grid::new(&[n, n], 1.0 / n as f64, Topology::Torus).unwrap();
        Arc::new(Domain::full(grid).unwrap())
    }

    #[test]
    fn instances_are_deterministic() {
        let dom = torus(16);
        for gen in [Generator::Trig, Generator::Bump, Generator::Indicator, Generator::LogBmo] {
            let spec = CorpusSpec::new(gen, 11, 4);
            for idx in 0..4 {
                let a = scalar_instance(&spec, &dom, idx).unwrap();
                let b = scalar_instance(&spec, &dom, idx).unwrap();
                assert_eq!(a.values(), b.values(), "{} instance {idx}", gen.name());
            }
        }
    }

    #[test]
    fn different_indices_differ() {
        let dom = torus(16);
        let spec = CorpusSpec::new(Generator::Trig, 11, 2);
        let a = scalar_instance(&spec, &dom, 0).unwrap();
        let b = scalar_instance(&spec, &dom, 1).unwrap();
        assert_ne!(a.values(), b.values());
    }

    #[test]
    fn diffeo_jacobian_is_positive_everywhere() {
        let dom = torus(32);
        let spec = CorpusSpec::new(Generator::Diffeo, 5, 6);
        for idx in 0..6 {
            let f = mapping_instance(&spec, &dom, idx).unwrap();
            let det = jacobian::jacobian_det(&f).unwrap();
            let min = det.values().iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > 0.0, "instance {idx}: min J = {min}");
        }
    }

    #[test]
    fn linmap_jacobian_is_positive() {
        let dom = torus(8);
        let spec = CorpusSpec::new(Generator::LinMap, 5, 8);
        for idx in 0..8 {
            let f = mapping_instance(&spec, &dom, idx).unwrap();
            assert!(f.linear().det() > 0.1, "instance {idx}");
        }
    }

    #[test]
    fn indicator_norms_match_the_covered_area() {
        let dom = torus(64);
        let cellvol = dom.grid().spacing().powi(2);
        let spec = CorpusSpec::new(Generator::Indicator, 3, 5);
        for idx in 0..5 {
            let f = scalar_instance(&spec, &dom, idx).unwrap();
            let area = f.values().iter().filter(|&&v| v == 1.0).count() as f64 * cellvol;
            assert!(area > 0.0, "instance {idx} is empty");
            for q in [1.0, 2.0, 3.0] {
                let norm = lq_norm(&f, q).unwrap();
                let expected = area.powf(1.0 / q);
                assert!(
                    (norm - expected).abs() <= 1e-12 * expected,
                    "instance {idx} q={q}: {norm} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn indicator_corpus_mixes_thin_and_fat_supports() {
        let dom = torus(64);
        let spec = CorpusSpec::new(Generator::Indicator, 3, 24);
        let mut fractions: Vec<f64> = (0..24)
            .map(|idx| {
                let f = scalar_instance(&spec, &dom, idx).unwrap();
                f.values().iter().filter(|&&v| v == 1.0).count() as f64 / f.values().len() as f64
            })
            .collect();
        fractions.sort_by(f64::total_cmp);
        assert!(fractions[0] < 0.02, "thinnest support {}", fractions[0]);
        assert!(fractions[23] > 0.02, "fattest support {}", fractions[23]);
    }

    #[test]
    fn vector_instances_are_band_limited_and_deterministic() {
        let dom = torus(16);
        let spec = CorpusSpec::new(Generator::Trig, 9, 2);
        let a = vector_instance(&spec, &dom, 1).unwrap();
        let b = vector_instance(&spec, &dom, 1).unwrap();
        assert_eq!(a.values(), b.values());
        let fine = torus(32);
        assert!(vector_instance(&spec, &fine, 1).is_ok());
    }

    #[test]
    fn wrong_kind_requests_error() {
        let dom = torus(8);
        let spec = CorpusSpec::new(Generator::LinMap, 1, 1);
        assert!(scalar_instance(&spec, &dom, 0).is_err());
        let spec = CorpusSpec::new(Generator::Indicator, 1, 1);
        assert!(mapping_instance(&spec, &dom, 0).is_err());
        assert!(vector_instance(&spec, &dom, 0).is_err());
    }
}
