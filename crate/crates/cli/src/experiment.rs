//! Inequality sweeps over seeded corpora.
//!
//! An experiment names one inequality check, a corpus, a grid and a
//! parameter ladder. Running it evaluates the check on every instance at
//! every ladder point, collects (lhs, rhs, ratio) rows, and summarizes the
//! observed constants per ladder point. Instances run in parallel; the
//! merge is an index-ordered single-threaded pass so reports are stable
//! bit for bit regardless of thread count.

use crate::config::{Config, Section};
use crate::corpus::{self, CorpusSpec, Generator};
use maxharm_core::field::{ScalarField, VectorField};
use maxharm_core::grid::Topology;
use maxharm_core::jacobian;
use maxharm_core::maximal::{max_hl, max_sharp, MaximalConfig};
use maxharm_core::norms::lq_norm;
use maxharm_core::pharmonic::{
    check_local_estimates, check_rp_bound_with, check_very_weak, rp_transform, PHarmonicProblem,
};
use maxharm_core::rng::SplitMix64;
use maxharm_core::singular::{commutator_crw, commutator_power, commutator_rw, MultiplierOp, PowerSign};
use maxharm_core::{Domain, Error, Grid, InequalityReport, Result, StencilSet};
use serde::Serialize;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::sync::Arc;

/// Salt for companion streams (BMO symbols, pairing functions) so they
/// never collide with the main corpus draws at the same (seed, index).
const COMPANION_SALT: u64 = 0x9e3779b97f4a7c15;

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub shape: Vec<usize>,
    pub h: f64,
    pub topology: Topology,
}

impl GridSpec {
    pub fn from_section(sec: &Section) -> Result<GridSpec> {
        Ok(GridSpec {
            shape: sec.usize_list("shape")?,
            h: sec.f64("h")?,
            topology: sec.topology("topology")?,
        })
    }

    pub fn build(&self) -> Result<Arc<Domain>> {
        let grid = Grid::new(&self.shape, self.h, self.topology)?;
        Ok(Arc::new(Domain::full(grid)?))
    }

    /// The same physical domain with twice the resolution.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            shape: self.shape.iter().map(|&n| 2 * n).collect(),
            h: self.h / 2.0,
            topology: self.topology,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    MaximalNorm,
    SharpVsMaximal,
    Isoperimetric,
    HardyJacobian,
    LloglChain,
    DualLog,
    BmoPairing,
    ConvolutionBound,
    CommutatorCrw,
    CommutatorRw,
    CommutatorPower,
    TransformBound,
    VeryWeak,
    LocalEstimates,
}

impl Inequality {
    pub fn parse(name: &str) -> Result<Inequality> {
        use Inequality::*;
        Ok(match name {
            "maximal_norm" => MaximalNorm,
            "sharp_vs_maximal" => SharpVsMaximal,
            "isoperimetric" => Isoperimetric,
            "hardy_jacobian" => HardyJacobian,
            "llogl_chain" => LloglChain,
            "dual_log" => DualLog,
            "bmo_pairing" => BmoPairing,
            "convolution_bound" => ConvolutionBound,
            "commutator_crw" => CommutatorCrw,
            "commutator_rw" => CommutatorRw,
            "commutator_power" => CommutatorPower,
            "transform_bound" => TransformBound,
            "very_weak" => VeryWeak,
            "local_estimates" => LocalEstimates,
            other => {
                return Err(Error::Format(format!("unknown inequality `{other}`")));
            }
        })
    }

    pub fn name(&self) -> &'static str {
        use Inequality::*;
        match self {
            MaximalNorm => "maximal_norm",
            SharpVsMaximal => "sharp_vs_maximal",
            Isoperimetric => "isoperimetric",
            HardyJacobian => "hardy_jacobian",
            LloglChain => "llogl_chain",
            DualLog => "dual_log",
            BmoPairing => "bmo_pairing",
            ConvolutionBound => "convolution_bound",
            CommutatorCrw => "commutator_crw",
            CommutatorRw => "commutator_rw",
            CommutatorPower => "commutator_power",
            TransformBound => "transform_bound",
            VeryWeak => "very_weak",
            LocalEstimates => "local_estimates",
        }
    }

    /// Which `[ladders]` key this inequality sweeps over, if any. Ball
    /// checks take indices into the grid's radius ladder; the rest take
    /// the parameter named.
    pub fn ladder_key(&self) -> Option<&'static str> {
        use Inequality::*;
        match self {
            MaximalNorm | SharpVsMaximal => Some("q"),
            Isoperimetric | LloglChain | DualLog | ConvolutionBound => Some("radius"),
            CommutatorCrw | CommutatorRw | TransformBound => Some("s"),
            CommutatorPower | VeryWeak => Some("eps"),
            LocalEstimates => Some("tau"),
            HardyJacobian | BmoPairing => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PharmonicParams {
    pub p: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub delta: Option<f64>,
}

impl Default for PharmonicParams {
    fn default() -> Self {
        PharmonicParams {
            p: 3.0,
            tol: 1e-9,
            max_iter: 200,
            delta: None,
        }
    }
}

impl PharmonicParams {
    pub fn from_section(sec: &Section) -> Result<PharmonicParams> {
        let d = PharmonicParams::default();
        Ok(PharmonicParams {
            p: sec.f64_opt("p")?.unwrap_or(d.p),
            tol: sec.f64_opt("tol")?.unwrap_or(d.tol),
            max_iter: sec.usize_opt("max_iter")?.unwrap_or(d.max_iter),
            delta: sec.f64_opt("delta")?,
        })
    }

    pub fn problem(&self, load: VectorField) -> Result<PHarmonicProblem> {
        let mut prob = PHarmonicProblem::new(self.p, load)?
            .with_tol(self.tol)?
            .with_max_iter(self.max_iter);
        if let Some(d) = self.delta {
            prob = prob.with_delta(d)?;
        }
        Ok(prob)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub inequality: Inequality,
    pub grid: GridSpec,
    pub corpus: CorpusSpec,
    pub ladder: Vec<f64>,
    pub op: Option<MultiplierOp>,
    /// Fixed Lebesgue exponent for checks that sweep something else.
    pub s: f64,
    pub pharmonic: PharmonicParams,
    pub refine: bool,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn from_config(cfg: &Config) -> Result<ExperimentSpec> {
        let exp = cfg.section("experiment")?;
        let inequality = Inequality::parse(exp.get("inequality")?)?;
        let grid = GridSpec::from_section(cfg.section("grid")?)?;
        let corpus = CorpusSpec::from_section(cfg.section("corpus")?)?;
        let ladder = match inequality.ladder_key() {
            Some(key) => cfg.section("ladders")?.f64_list(key)?,
            None => Vec::new(),
        };
        let op = match exp.get_opt("op") {
            Some(name) => Some(MultiplierOp::parse(name)?),
            None => None,
        };
        let pharmonic = match cfg.section_opt("pharmonic") {
            Some(sec) => PharmonicParams::from_section(sec)?,
            None => PharmonicParams::default(),
        };
        let output_dir = cfg
            .section_opt("output")
            .and_then(|s| s.get_opt("dir"))
            .map(PathBuf::from);
        Ok(ExperimentSpec {
            name: exp.get("name")?.to_string(),
            inequality,
            grid,
            corpus,
            ladder,
            op,
            s: exp.f64_opt("s")?.unwrap_or(2.0),
            pharmonic,
            refine: exp.bool_opt("refine")?.unwrap_or(false),
            output_dir,
        })
    }

    fn op_for(&self, domain: &Domain) -> MultiplierOp {
        self.op.unwrap_or(if domain.grid().dim() == 1 {
            MultiplierOp::Hilbert
        } else {
            MultiplierOp::RieszProduct
        })
    }
}

/// One evaluated comparison: `ratio` is `lhs / rhs`, empty when the right
/// side is zero.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub instance: usize,
    pub ladder: f64,
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
}

impl Row {
    fn from_report(instance: usize, ladder: f64, rep: &InequalityReport) -> Row {
        Row {
            instance,
            ladder,
            name: rep.name.clone(),
            lhs: rep.lhs,
            rhs: rep.rhs,
            ratio: rep.ratio,
        }
    }

    fn new(instance: usize, ladder: f64, name: &str, lhs: f64, rhs: f64) -> Row {
        Row {
            instance,
            ladder,
            name: name.to_string(),
            lhs,
            rhs,
            ratio: if rhs == 0.0 { None } else { Some(lhs / rhs) },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceError {
    pub instance: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderSummary {
    pub ladder: f64,
    pub rows: usize,
    pub max_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementPair {
    pub coarse_shape: Vec<usize>,
    pub coarse_max: Option<f64>,
    pub fine_shape: Vec<usize>,
    pub fine_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantReport {
    pub experiment: String,
    pub inequality: String,
    pub generator: String,
    pub seed: u64,
    pub instances: usize,
    pub summary: Vec<LadderSummary>,
    pub refinement_pair: Option<RefinementPair>,
    pub rows: Vec<Row>,
    pub errors: Vec<InstanceError>,
}

impl ConstantReport {
    /// Largest finite ratio over all rows; `None` when every row is
    /// degenerate or the report is empty.
    pub fn max_ratio(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for row in &self.rows {
            if let Some(r) = row.ratio {
                if r.is_finite() {
                    best = Some(best.map_or(r, |b: f64| b.max(r)));
                }
            }
        }
        best
    }
}

/// Thread cap: `MAXHARM_THREADS` when set, otherwise the machine's
/// available parallelism.
pub fn thread_cap() -> usize {
    if let Ok(raw) = std::env::var("MAXHARM_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Run `f` for indices `0..n` on up to `thread_cap()` workers and return
/// the results in index order.
pub fn parallel_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = thread_cap().min(n.max(1));
    if workers <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                slots.lock().unwrap()[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("worker filled every slot"))
        .collect()
}

fn center_cell(domain: &Domain) -> usize {
    let grid = domain.grid();
    let mut coords = [0usize; 3];
    for (axis, c) in coords.iter_mut().enumerate().take(grid.dim()) {
        *c = grid.shape()[axis] / 2;
    }
    grid.index_of(&coords)
}

fn companion_spec(spec: &ExperimentSpec, generator: Generator) -> CorpusSpec {
    CorpusSpec {
        generator,
        seed: spec.corpus.seed ^ COMPANION_SALT,
        count: spec.corpus.count,
        degree: spec.corpus.degree,
    }
}

/// The scalar field a ball-based Jacobian check runs on: the Jacobian of
/// a mapping instance for mapping generators, the instance itself
/// otherwise.
fn ball_check_field(spec: &ExperimentSpec, domain: &Arc<Domain>, index: u64) -> Result<ScalarField> {
    match spec.corpus.generator {
        Generator::LinMap | Generator::Diffeo => {
            let f = corpus::mapping_instance(&spec.corpus, domain, index)?;
            jacobian::jacobian_det(&f)
        }
        _ => corpus::scalar_instance(&spec.corpus, domain, index),
    }
}

fn radius_indices(spec: &ExperimentSpec, stencils: &StencilSet) -> Result<Vec<usize>> {
    spec.ladder
        .iter()
        .map(|&v| {
            let k = v.round() as usize;
            if v < 0.0 || (v - k as f64).abs() > 1e-9 || k >= stencils.len() {
                return Err(Error::Parameter(format!(
                    "radius ladder entry {v} is not an index below {}",
                    stencils.len()
                )));
            }
            Ok(k)
        })
        .collect()
}

fn run_instance(spec: &ExperimentSpec, domain: &Arc<Domain>, index: usize) -> Result<Vec<Row>> {
    let idx = index as u64;
    let mut rows = Vec::new();
    match spec.inequality {
        Inequality::MaximalNorm => {
            let f = corpus::scalar_instance(&spec.corpus, domain, idx)?;
            let cfg = MaximalConfig::build(domain)?;
            let mf = max_hl(&f, &cfg)?;
            for &q in &spec.ladder {
                rows.push(Row::new(
                    index,
                    q,
                    "maximal_norm",
                    lq_norm(&f, q)?,
                    lq_norm(&mf, q)?,
                ));
            }
        }
        Inequality::SharpVsMaximal => {
            let f = corpus::scalar_instance(&spec.corpus, domain, idx)?;
            let cfg = MaximalConfig::build(domain)?;
            let mf = max_hl(&f, &cfg)?;
            let sf = max_sharp(&f, &cfg)?;
            for &q in &spec.ladder {
                rows.push(Row::new(
                    index,
                    q,
                    "sharp_vs_maximal",
                    lq_norm(&sf, q)?,
                    lq_norm(&mf, q)?,
                ));
            }
        }
        Inequality::Isoperimetric => {
            let f = corpus::mapping_instance(&spec.corpus, domain, idx)?;
            let stencils = StencilSet::build(domain)?;
            let center = center_cell(domain);
            for &k in &radius_indices(spec, &stencils)? {
                let r = stencils.radii()[k];
                let rep = jacobian::check_isoperimetric(&f, center, r)?;
                rows.push(Row::from_report(index, k as f64, &rep));
            }
        }
        Inequality::HardyJacobian => {
            let f = corpus::mapping_instance(&spec.corpus, domain, idx)?;
            let rep = jacobian::check_hardy_bound(&f)?;
            rows.push(Row::from_report(index, 0.0, &rep));
        }
        Inequality::LloglChain => {
            let f = corpus::mapping_instance(&spec.corpus, domain, idx)?;
            let stencils = StencilSet::build(domain)?;
            let center = center_cell(domain);
            for &k in &radius_indices(spec, &stencils)? {
                let (a, b) = jacobian::check_llogl(&f, center, k)?;
                rows.push(Row::from_report(index, k as f64, &a));
                rows.push(Row::from_report(index, k as f64, &b));
            }
        }
        Inequality::DualLog => {
            let f = corpus::mapping_instance(&spec.corpus, domain, idx)?;
            let stencils = StencilSet::build(domain)?;
            let center = center_cell(domain);
            for &k in &radius_indices(spec, &stencils)? {
                let (a, b) = jacobian::check_dual_log(&f, center, k)?;
                rows.push(Row::from_report(index, k as f64, &a));
                rows.push(Row::from_report(index, k as f64, &b));
            }
        }
        Inequality::BmoPairing => {
            let f = corpus::mapping_instance(&spec.corpus, domain, idx)?;
            let phi = corpus::scalar_instance(
                &companion_spec(spec, Generator::LogBmo),
                domain,
                idx,
            )?;
            let rep = jacobian::check_bmo_pairing(&f, &phi)?;
            rows.push(Row::from_report(index, 0.0, &rep));
        }
        Inequality::ConvolutionBound => {
            let f = ball_check_field(spec, domain, idx)?;
            let stencils = StencilSet::build(domain)?;
            let center = center_cell(domain);
            for &k in &radius_indices(spec, &stencils)? {
                let rep = jacobian::check_convolution_bound(&f, center, k)?;
                rows.push(Row::from_report(index, k as f64, &rep));
            }
        }
        Inequality::CommutatorCrw => {
            let f = corpus::scalar_instance(&spec.corpus, domain, idx)?;
            let lambda = corpus::scalar_instance(
                &companion_spec(spec, Generator::LogBmo),
                domain,
                idx,
            )?;
            let op = spec.op_for(domain);
            for &s in &spec.ladder {
                let rep = commutator_crw(&lambda, &f, op, s)?;
                rows.push(Row::new(index, s, "commutator_crw", rep.lhs_norm, rep.rhs_norm));
            }
        }
        Inequality::CommutatorRw => {
            let f = corpus::scalar_instance(&spec.corpus, domain, idx)?;
            let op = spec.op_for(domain);
            for &s in &spec.ladder {
                let rep = commutator_rw(&f, op, s)?;
                rows.push(Row::new(index, s, "commutator_rw", rep.lhs_norm, rep.rhs_norm));
            }
        }
        Inequality::CommutatorPower => {
            let f = corpus::scalar_instance(&spec.corpus, domain, idx)?;
            let op = spec.op_for(domain);
            for &eps in &spec.ladder {
                let rep = commutator_power(&f, op, spec.s, eps, PowerSign::Minus)?;
                rows.push(Row::new(index, eps, "commutator_power", rep.lhs_norm, rep.rhs_norm));
            }
        }
        Inequality::TransformBound => {
            let load = corpus::vector_instance(&spec.corpus, domain, idx)?;
            let prob = spec.pharmonic.problem(load)?;
            let (grad, _) = rp_transform(&prob)?;
            for &s in &spec.ladder {
                let rep = check_rp_bound_with(&prob, &grad, s)?;
                rows.push(Row::from_report(index, s, &rep));
            }
        }
        Inequality::VeryWeak => {
            let load = corpus::vector_instance(&spec.corpus, domain, idx)?;
            let prob = spec.pharmonic.problem(load)?;
            let reports = check_very_weak(&prob, &spec.ladder)?;
            for (i, rep) in reports.iter().enumerate() {
                rows.push(Row::from_report(index, spec.ladder[i / 2], rep));
            }
        }
        Inequality::LocalEstimates => {
            let load = corpus::vector_instance(&spec.corpus, domain, idx)?;
            let prob = spec.pharmonic.problem(load)?;
            let (u, _, _) = maxharm_core::pharmonic::rp_potential(&prob)?;
            let center = center_cell(domain);
            let radius = domain.grid().min_shape() / 4;
            for &tau in &spec.ladder {
                let (reports, alpha) = check_local_estimates(&prob, &u, center, radius, tau)?;
                for rep in &reports {
                    rows.push(Row::from_report(index, tau, rep));
                }
                if let Some(a) = alpha {
                    rows.push(Row::new(index, tau, "fitted_alpha", a, 1.0));
                }
            }
        }
    }
    Ok(rows)
}

fn summarize(ladder: &[f64], rows: &[Row]) -> Vec<LadderSummary> {
    let points: Vec<f64> = if ladder.is_empty() { vec![0.0] } else { ladder.to_vec() };
    points
        .iter()
        .map(|&point| {
            let mut ratios: Vec<f64> = rows
                .iter()
                .filter(|r| r.ladder == point)
                .filter_map(|r| r.ratio)
                .filter(|r| r.is_finite())
                .collect();
            ratios.sort_by(f64::total_cmp);
            let count = rows.iter().filter(|r| r.ladder == point).count();
            LadderSummary {
                ladder: point,
                rows: count,
                max_ratio: ratios.last().copied(),
                median_ratio: if ratios.is_empty() {
                    None
                } else {
                    Some(ratios[ratios.len() / 2])
                },
            }
        })
        .collect()
}

fn collect_rows(
    spec: &ExperimentSpec,
    domain: &Arc<Domain>,
) -> (Vec<Row>, Vec<InstanceError>) {
    let results = parallel_map(spec.corpus.count, |i| run_instance(spec, domain, i));
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => errors.push(InstanceError {
                instance: i,
                message: e.to_string(),
            }),
        }
    }
    (rows, errors)
}

/// Run the experiment and, when an output directory is configured, write
/// `<name>.json` and `<name>.csv` into it.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ConstantReport> {
    let domain = spec.grid.build()?;
    let (rows, errors) = collect_rows(spec, &domain);
    let summary = summarize(&spec.ladder, &rows);

    let refinement_pair = if spec.refine {
        let fine_grid = spec.grid.refined();
        let fine_spec = ExperimentSpec {
            grid: fine_grid.clone(),
            refine: false,
            ..spec.clone()
        };
        let fine_domain = fine_spec.grid.build()?;
        let (fine_rows, _) = collect_rows(&fine_spec, &fine_domain);
        let coarse_max = rows
            .iter()
            .filter_map(|r| r.ratio)
            .filter(|r| r.is_finite())
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
        let fine_max = fine_rows
            .iter()
            .filter_map(|r| r.ratio)
            .filter(|r| r.is_finite())
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
        Some(RefinementPair {
            coarse_shape: spec.grid.shape.clone(),
            coarse_max,
            fine_shape: fine_grid.shape,
            fine_max,
        })
    } else {
        None
    };

    let report = ConstantReport {
        experiment: spec.name.clone(),
        inequality: spec.inequality.name().to_string(),
        generator: spec.corpus.generator.name().to_string(),
        seed: spec.corpus.seed,
        instances: spec.corpus.count,
        summary,
        refinement_pair,
        rows,
        errors,
    };

    if let Some(dir) = &spec.output_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

fn format_f64(v: f64) -> String {
    // Shortest representation that round-trips, so reruns are
    // byte-identical and parsing recovers the exact double.
    format!("{v}")
}

pub fn report_csv(report: &ConstantReport) -> String {
    let mut out = String::from("instance,ladder,lhs,rhs,ratio\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.instance,
            format_f64(row.ladder),
            format_f64(row.lhs),
            format_f64(row.rhs),
            row.ratio.map(format_f64).unwrap_or_default(),
        ));
    }
    out
}

pub fn write_report(report: &ConstantReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Format(format!("cannot create {}: {e}", dir.display())))?;
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Format(format!("report serialization failed: {e}")))?;
    let mut path = dir.join(&report.experiment);
    path.set_extension("json");
    write_atomic(&path, json.as_bytes())?;
    path.set_extension("csv");
    write_atomic(&path, report_csv(report).as_bytes())?;
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path)
        .map_err(|e| Error::Format(format!("cannot write {}: {e}", path.display())))?;
    file.write_all(bytes)
        .map_err(|e| Error::Format(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Deterministic stream check used by the self-test: two draws from the
/// same instance stream must agree exactly.
pub fn stream_is_stable(seed: u64, index: u64) -> bool {
    let mut a = SplitMix64::for_instance(seed, index);
    let mut b = SplitMix64::for_instance(seed, index);
    (0..16).all(|_| a.next_u64() == b.next_u64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;

    fn demo_config(dir: &str) -> String {
        format!(
            "[experiment]\nname = demo\ninequality = maximal_norm\n\n\
             [grid]\nshape = 16, 16\nh = 0.0625\ntopology = torus\n\n\
             [corpus]\ngenerator = indicator\nseed = 7\ncount = 3\n\n\
             [ladders]\nq = 1.5, 2, 3\n\n\
             [output]\ndir = {dir}\n"
        )
    }

    #[test]
    fn spec_parses_and_runs() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = Config::parse(&demo_config(tmp.path().to_str().unwrap())).unwrap();
        let spec = ExperimentSpec::from_config(&cfg).unwrap();
        let report = run_experiment(&spec).unwrap();
        assert_eq!(report.rows.len(), 9);
        assert!(report.errors.is_empty());
        assert!(tmp.path().join("demo.json").exists());
        assert!(tmp.path().join("demo.csv").exists());
        for row in &report.rows {
            assert!(row.lhs <= row.rhs, "norm of maximal dominates");
        }
    }

    #[test]
    fn summary_max_equals_row_max() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = Config::parse(&demo_config(tmp.path().to_str().unwrap())).unwrap();
        let spec = ExperimentSpec::from_config(&cfg).unwrap();
        let report = run_experiment(&spec).unwrap();
        for s in &report.summary {
            let max = report
                .rows
                .iter()
                .filter(|r| r.ladder == s.ladder)
                .filter_map(|r| r.ratio)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(s.max_ratio, Some(max), "ladder {}", s.ladder);
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let cfg = Config::parse(&demo_config("unused")).unwrap();
        let mut spec = ExperimentSpec::from_config(&cfg).unwrap();
        spec.output_dir = None;
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(report_csv(&a), report_csv(&b));
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn empty_corpus_is_a_clean_no_op() {
        let cfg = Config::parse(&demo_config("unused")).unwrap();
        let mut spec = ExperimentSpec::from_config(&cfg).unwrap();
        spec.output_dir = None;
        spec.corpus.count = 0;
        let report = run_experiment(&spec).unwrap();
        assert!(report.rows.is_empty());
        assert!(report.errors.is_empty());
    }

    #[test]
    fn missing_ladder_error_names_the_key() {
        let text = "[experiment]\nname = x\ninequality = maximal_norm\n\n\
                    [grid]\nshape = 16\nh = 0.0625\ntopology = torus\n\n\
                    [corpus]\ngenerator = trig\nseed = 1\ncount = 1\n\n[ladders]\ns = 2\n";
        let cfg = Config::parse(text).unwrap();
        let err = ExperimentSpec::from_config(&cfg).unwrap_err().to_string();
        assert!(err.contains("`q`"), "{err}");
    }

    #[test]
    fn instance_errors_are_recorded_not_fatal() {
        let cfg = Config::parse(&demo_config("unused")).unwrap();
        let mut spec = ExperimentSpec::from_config(&cfg).unwrap();
        spec.output_dir = None;
        // Mapping check on a scalar generator: every instance errors out.
        spec.inequality = Inequality::HardyJacobian;
        let report = run_experiment(&spec).unwrap();
        assert_eq!(report.errors.len(), spec.corpus.count);
        assert!(report.rows.is_empty());
    }

    #[test]
    fn parallel_map_matches_serial_order() {
        let serial: Vec<usize> = (0..40).map(|i| i * i).collect();
        let parallel = parallel_map(40, |i| i * i);
        assert_eq!(serial, parallel);
    }

    #[test]
    fn ratio_column_is_lhs_over_rhs() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = Config::parse(&demo_config(tmp.path().to_str().unwrap())).unwrap();
        let spec = ExperimentSpec::from_config(&cfg).unwrap();
        let report = run_experiment(&spec).unwrap();
        let csv = report_csv(&report);
        for line in csv.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            let lhs: f64 = cols[2].parse().unwrap();
            let rhs: f64 = cols[3].parse().unwrap();
            if cols[4].is_empty() {
                assert_eq!(rhs, 0.0);
            } else {
                let ratio: f64 = cols[4].parse().unwrap();
                assert!((ratio - lhs / rhs).abs() <= 1e-15 * ratio.abs().max(1.0));
            }
        }
    }
}
