//! The `maxharm` binary: corpus generation, inequality sweeps, single
//! operator application and the acceptance suite.
//!
//! Exit codes: 0 on success, 1 when a criterion or hard invariant failed
//! or an operation could not run, 2 for usage and configuration errors.

use maxharm::config::Config;
use maxharm::corpus::{self, CorpusSpec, Generator};
use maxharm::experiment::{run_experiment, thread_cap, ExperimentSpec, GridSpec, Inequality};
use maxharm::verify::{calibrate, verify_all, VerifyOptions};
use maxharm_core::field::VectorField;
use maxharm_core::io::{load_field, save_field, StoredField};
use maxharm_core::maximal::{max_hl, max_interp, max_sharp, max_spherical, EvalMode, MaximalConfig};
use maxharm_core::pharmonic::{rp_transform, PHarmonicProblem};
use maxharm_core::singular::{czo_apply, riesz2_apply, t_apply, MultiplierOp};
use maxharm_core::spectral::FourierTransform;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const USAGE: &str = "\
maxharm - numerical laboratory for maximal, singular and p-harmonic inequalities

USAGE:
  maxharm gen <CONFIG>                      Write the corpus described by the config to disk
  maxharm run <CONFIG>                      Run an inequality experiment, write JSON + CSV reports
  maxharm verify <CONFIG>                   Run the acceptance suite, one pass/fail line per criterion
  maxharm op <NAME> --in <FIELD> --out <FIELD> [OPTIONS]
                                            Apply a single operator to a stored field

OP NAMES:
  max_hl, max_sharp, max_spherical, max_interp    scalar -> scalar maximal operators
  hilbert, riesz12, identity                      scalar -> scalar multipliers
  riesz2, t                                       vector -> vector projections
  gradient (scalar -> vector), divergence (vector -> scalar), poisson (scalar -> scalar)
  rp                                              vector -> vector p-harmonic transform

OP OPTIONS:
  --s <S>        exponent for max_interp (default 2)
  --p <P>        exponent for rp (default 3)
  --mode <M>     fast or brute (default fast)

Config files are flat key-value text with [section] headers; see the
configs directory for commented examples. MAXHARM_THREADS caps worker
threads. Exit codes: 0 pass, 1 failed criterion or operation, 2 bad
usage or config.";

enum Failure {
    Usage(String),
    Run(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Run(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Run(m) => m,
        }
    }
}

fn usage_err<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("maxharm: {}", f.message());
            if matches!(f, Failure::Usage(_)) {
                eprintln!("\n{USAGE}");
            }
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(args: &[String]) -> Result<u8, Failure> {
    let Some(verb) = args.first() else {
        return usage_err("missing subcommand");
    };
    match verb.as_str() {
        "gen" => cmd_gen(&args[1..]),
        "run" => cmd_run(&args[1..]),
        "verify" => cmd_verify(&args[1..]),
        "op" => cmd_op(&args[1..]),
        "calibrate" => cmd_calibrate(&args[1..]),
        "-h" | "--help" | "help" => {
            println!("{USAGE}");
            Ok(0)
        }
        other => usage_err(format!("unknown subcommand `{other}`")),
    }
}

fn load_config(args: &[String]) -> Result<Config, Failure> {
    let [path] = args else {
        return usage_err("expected exactly one config path");
    };
    Config::load(Path::new(path)).map_err(|e| Failure::Usage(e.to_string()))
}

fn cmd_gen(args: &[String]) -> Result<u8, Failure> {
    let cfg = load_config(args)?;
    let grid = GridSpec::from_section(cfg.section("grid").map_err(usage)?).map_err(usage)?;
    let spec = CorpusSpec::from_section(cfg.section("corpus").map_err(usage)?).map_err(usage)?;
    let dir = PathBuf::from(
        cfg.section("output")
            .and_then(|s| s.get("dir"))
            .map_err(usage)?,
    );
    let domain = grid.build().map_err(run)?;
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Run(format!("cannot create {}: {e}", dir.display())))?;

    for index in 0..spec.count as u64 {
        let field = match spec.generator {
            Generator::LinMap | Generator::Diffeo => {
                // A mapping is stored as its displacement from the
                // identity, sampled at cell centers.
                let f = corpus::mapping_instance(&spec, &domain, index).map_err(run)?;
                let grid = domain.grid();
                let dim = grid.dim();
                let mut values = vec![0.0; grid.ncells() * dim];
                for idx in 0..grid.ncells() {
                    let y = f.value_at(idx);
                    let x = grid.cell_center(idx);
                    for axis in 0..dim {
                        values[idx * dim + axis] = y[axis] - x[axis];
                    }
                }
                StoredField::Vector(VectorField::from_values(domain.clone(), values).map_err(run)?)
            }
            _ => StoredField::Scalar(corpus::scalar_instance(&spec, &domain, index).map_err(run)?),
        };
        let path = dir.join(format!("{}-{index:04}.field", spec.generator.name()));
        save_field(&field, &path).map_err(run)?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_run(args: &[String]) -> Result<u8, Failure> {
    let cfg = load_config(args)?;
    let spec = ExperimentSpec::from_config(&cfg).map_err(usage)?;
    if spec.corpus.count == 0 {
        eprintln!("warning: empty corpus, nothing to run");
    }
    let report = run_experiment(&spec).map_err(run)?;

    println!(
        "experiment {} ({} on {} instances, {} threads)",
        report.experiment,
        report.inequality,
        report.instances,
        thread_cap()
    );
    for s in &report.summary {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        println!(
            "  ladder {:>10}: rows {:>4}, max ratio {:>12}, median {:>12}",
            s.ladder,
            s.rows,
            fmt(s.max_ratio),
            fmt(s.median_ratio)
        );
    }
    if let Some(pair) = &report.refinement_pair {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        println!(
            "  refinement {:?} -> {:?}: max ratio {} -> {}",
            pair.coarse_shape,
            pair.fine_shape,
            fmt(pair.coarse_max),
            fmt(pair.fine_max)
        );
    }
    for e in &report.errors {
        eprintln!("  instance {}: {}", e.instance, e.message);
    }
    if let Some(dir) = &spec.output_dir {
        println!("reports in {}", dir.display());
    }

    let mut violations = Vec::new();
    if spec.inequality == Inequality::MaximalNorm {
        for row in &report.rows {
            if row.lhs > row.rhs {
                violations.push(format!(
                    "instance {}, ladder {}: lhs {} exceeds rhs {}",
                    row.instance, row.ladder, row.lhs, row.rhs
                ));
            }
        }
    }
    for row in &report.rows {
        if row.ratio.is_some_and(|r| !r.is_finite()) {
            violations.push(format!(
                "instance {}, ladder {}: ratio is not finite",
                row.instance, row.ladder
            ));
        }
    }
    for v in &violations {
        eprintln!("violation: {v}");
    }
    if violations.is_empty() && report.errors.is_empty() {
        Ok(0)
    } else {
        Ok(1)
    }
}

fn cmd_verify(args: &[String]) -> Result<u8, Failure> {
    let cfg = load_config(args)?;
    let opts = VerifyOptions::from_config(&cfg).map_err(usage)?;
    let results = verify_all(&opts);
    let mut failed = 0;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {:<22} {status}  {}", r.index, r.name, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    Ok(if failed == 0 { 0 } else { 1 })
}

fn cmd_calibrate(args: &[String]) -> Result<u8, Failure> {
    let cfg = load_config(args)?;
    let opts = VerifyOptions::from_config(&cfg).map_err(usage)?;
    let pins = calibrate(&opts).map_err(run)?;
    print!("{pins}");
    Ok(0)
}

struct OpArgs {
    input: PathBuf,
    output: PathBuf,
    s: f64,
    p: f64,
    mode: EvalMode,
}

fn parse_op_args(args: &[String]) -> Result<OpArgs, Failure> {
    let mut input = None;
    let mut output = None;
    let mut s = 2.0;
    let mut p = 3.0;
    let mut mode = EvalMode::Fast;
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let mut value = || {
            it.next()
                .cloned()
                .ok_or_else(|| Failure::Usage(format!("flag {flag} needs a value")))
        };
        match flag.as_str() {
            "--in" => input = Some(PathBuf::from(value()?)),
            "--out" => output = Some(PathBuf::from(value()?)),
            "--s" => {
                s = value()?
                    .parse()
                    .map_err(|_| Failure::Usage("--s expects a number".into()))?
            }
            "--p" => {
                p = value()?
                    .parse()
                    .map_err(|_| Failure::Usage("--p expects a number".into()))?
            }
            "--mode" => {
                mode = match value()?.as_str() {
                    "fast" => EvalMode::Fast,
                    "brute" => EvalMode::BruteForce,
                    other => {
                        return usage_err(format!("unknown mode `{other}` (fast or brute)"));
                    }
                }
            }
            other => return usage_err(format!("unknown flag `{other}`")),
        }
    }
    let Some(input) = input else {
        return usage_err("op needs --in <FIELD>");
    };
    let Some(output) = output else {
        return usage_err("op needs --out <FIELD>");
    };
    Ok(OpArgs {
        input,
        output,
        s,
        p,
        mode,
    })
}

fn cmd_op(args: &[String]) -> Result<u8, Failure> {
    let Some(name) = args.first() else {
        return usage_err("op needs an operator name");
    };
    let op_args = parse_op_args(&args[1..])?;
    let stored = load_field(&op_args.input).map_err(run)?;

    let scalar_in = |stored: &StoredField| match stored {
        StoredField::Scalar(f) => Ok(f.clone()),
        _ => Err(Failure::Run(format!(
            "{name} expects a scalar field, got {}",
            stored.kind_name()
        ))),
    };
    let vector_in = |stored: &StoredField| match stored {
        StoredField::Vector(f) => Ok(f.clone()),
        _ => Err(Failure::Run(format!(
            "{name} expects a vector field, got {}",
            stored.kind_name()
        ))),
    };

    let result = match name.as_str() {
        "max_hl" | "max_sharp" | "max_spherical" | "max_interp" => {
            let f = scalar_in(&stored)?;
            let cfg = MaximalConfig::build(f.domain())
                .map_err(run)?
                .with_mode(op_args.mode)
                .with_s(op_args.s);
            let out = match name.as_str() {
                "max_hl" => max_hl(&f, &cfg),
                "max_sharp" => max_sharp(&f, &cfg),
                "max_spherical" => max_spherical(&f, &cfg),
                _ => max_interp(&f, &cfg),
            }
            .map_err(run)?;
            StoredField::Scalar(out)
        }
        "hilbert" | "riesz12" | "identity" => {
            let f = scalar_in(&stored)?;
            let op = MultiplierOp::parse(name).map_err(run)?;
            StoredField::Scalar(czo_apply(&f, op).map_err(run)?)
        }
        "riesz2" => StoredField::Vector(riesz2_apply(&vector_in(&stored)?).map_err(run)?),
        "t" => StoredField::Vector(t_apply(&vector_in(&stored)?).map_err(run)?),
        "gradient" => {
            let f = scalar_in(&stored)?;
            let ft = FourierTransform::new(f.domain()).map_err(run)?;
            StoredField::Vector(ft.gradient(&f).map_err(run)?)
        }
        "divergence" => {
            let v = vector_in(&stored)?;
            let ft = FourierTransform::new(v.domain()).map_err(run)?;
            StoredField::Scalar(ft.divergence(&v).map_err(run)?)
        }
        "poisson" => {
            let f = scalar_in(&stored)?;
            let ft = FourierTransform::new(f.domain()).map_err(run)?;
            StoredField::Scalar(ft.poisson(&f).map_err(run)?)
        }
        "rp" => {
            let v = vector_in(&stored)?;
            let prob = PHarmonicProblem::new(op_args.p, v).map_err(run)?;
            let (grad, _) = rp_transform(&prob).map_err(run)?;
            StoredField::Vector(grad)
        }
        other => return usage_err(format!("unknown operator `{other}`")),
    };

    save_field(&result, &op_args.output).map_err(run)?;
    println!(
        "applied {name}, wrote {} field to {}",
        result.kind_name(),
        op_args.output.display()
    );
    Ok(0)
}

fn usage(e: maxharm_core::Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn run(e: maxharm_core::Error) -> Failure {
    Failure::Run(e.to_string())
}
