//! `specdeg`: compute equivariant gradient degrees from problem files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use specdeg::corpus::normalization_map;
use specdeg::findim::DegreeError;
use specdeg::galerkin::{deg_infinite_with, DegreeResult, GalerkinError, GalerkinOptions, GraphDomain, LocalMapSpec};
use specdeg::hamiltonian::{periodic_existence_with, HamiltonianError, Verdict};
use specdeg::selftest::{run_suite, SUITES};

use specdeg_cli::problem::{ProblemBody, ProblemFile, TruncationSpec};
use specdeg_cli::report::*;

#[derive(Parser)]
#[command(name = "specdeg", version, about = "Equivariant gradient degree of S1-equivariant local maps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the degree of the map described by a problem file.
    Compute {
        file: PathBuf,
        /// Truncation level N, or "auto".
        #[arg(long)]
        truncation: Option<String>,
        /// Override the domain radius.
        #[arg(long)]
        radius: Option<f64>,
        /// Write the JSON report here ("-" for stdout).
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Include wall-clock timings in the report.
        #[arg(long)]
        timing: bool,
    },
    /// Run the embedded property suites.
    Selftest {
        /// One of: ring, invertibility, oracle, normalization, stabilization.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match cli.cmd {
        Cmd::Compute {
            file,
            truncation,
            radius,
            json,
            seed,
            timing,
        } => compute(&file, truncation.as_deref(), radius, json.as_deref(), seed, timing),
        Cmd::Selftest { suite, seed, json } => selftest(suite.as_deref(), seed, json.as_deref()),
    };
    ExitCode::from(code as u8)
}

fn emit(text: &str, json: &str, target: Option<&Path>) -> Result<(), String> {
    match target {
        Some(p) if p == Path::new("-") => println!("{json}"),
        Some(p) => {
            print!("{text}");
            std::fs::write(p, format!("{json}\n")).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn input_error(msg: String) -> i32 {
    eprintln!("error: {msg}");
    EXIT_INPUT
}

fn load(path: &Path, truncation: Option<&str>, radius: Option<f64>) -> Result<ProblemFile, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut p = ProblemFile::parse(&text)?;
    if let Some(t) = truncation {
        p.truncation = TruncationSpec::parse(t)?;
    }
    if let Some(r) = radius {
        p.radius = r;
    }
    Ok(p)
}

/// Which check an error stems from, and whether it is an input problem.
fn classify(e: &GalerkinError) -> (&'static str, bool) {
    match e {
        GalerkinError::MarginFailure { .. } => ("tail", false),
        GalerkinError::BoundaryZero { .. } | GalerkinError::Degree(DegreeError::BoundaryZero { .. }) => ("margin", false),
        GalerkinError::StabilizationFailure { .. } => ("stabilization", false),
        GalerkinError::NoCertifiedLevel { last, .. } => classify(last),
        GalerkinError::Degree(
            DegreeError::DegenerateZero { .. }
            | DegreeError::ZeroOutsideFixedSpace { .. }
            | DegreeError::UnresolvedZeroCluster(_),
        ) => ("zero_set", false),
        GalerkinError::NotEquivariant { .. }
        | GalerkinError::InvalidDomain(_)
        | GalerkinError::Rep(_)
        | GalerkinError::Degree(DegreeError::NotEquivariant { .. } | DegreeError::InvalidDomain(_) | DegreeError::Rep(_)) => {
            ("input", true)
        }
        _ => ("pipeline", false),
    }
}

fn classify_hamiltonian(e: &HamiltonianError) -> (&'static str, bool) {
    match e {
        HamiltonianError::InvalidSpec(_) => ("input", true),
        HamiltonianError::NoncompactZeroSet(_) => ("margin", false),
        HamiltonianError::Galerkin(g) => classify(g),
        _ => ("pipeline", false),
    }
}

struct Outcome {
    result: Result<DegreeResult, (Failure, bool)>,
    verdict: Option<Verdict>,
}

fn run(p: &ProblemFile, f: &LocalMapSpec<f64>, opts: &GalerkinOptions) -> Outcome {
    let fail = |check: &str, input: bool, message: String| {
        (
            Failure {
                check: check.into(),
                message,
            },
            input,
        )
    };
    match p.hamiltonian() {
        Some(spec) => match periodic_existence_with(&spec, p.radius, opts) {
            Ok(r) => Outcome {
                verdict: Some(r.verdict),
                result: Ok(r.result),
            },
            Err(e) => {
                let (check, input) = classify_hamiltonian(&e);
                Outcome {
                    result: Err(fail(check, input, e.to_string())),
                    verdict: None,
                }
            }
        },
        None => Outcome {
            result: deg_infinite_with(f, opts).map_err(|e| {
                let (check, input) = classify(&e);
                fail(check, input, e.to_string())
            }),
            verdict: None,
        },
    }
}

fn run_checks(p: &ProblemFile, f: &LocalMapSpec<f64>, d: &DegreeResult, opts: &GalerkinOptions) -> Checks {
    let normalization = match deg_infinite_with(&normalization_map(f.operator.clone(), 1.0), opts) {
        Ok(r) if r.value.is_unit() && r.value.terms().count() == 1 => Check::new(CheckStatus::Passed, "Deg(A + P0) = 1"),
        Ok(r) => Check::new(CheckStatus::Failed, format!("Deg(A + P0) = {}", r.value)),
        Err(e) => Check::new(CheckStatus::Inconclusive, e.to_string()),
    };
    let stable = d.levels.iter().all(|l| l.normalized == d.value);
    let levels: Vec<String> = d.levels.iter().map(|l| l.level.to_string()).collect();
    let stabilization = Check::new(
        if stable { CheckStatus::Passed } else { CheckStatus::Failed },
        format!("m_n deg(f_n) at n = {}", levels.join(", ")),
    );
    let restriction = match &p.body {
        ProblemBody::Abstract { center, .. } => {
            let wider = f.with_domain(GraphDomain::ball(center.clone(), 1.1 * p.radius));
            compare_wider(&wider, d, opts)
        }
        ProblemBody::Hamiltonian { .. } => {
            compare_wider(&f.with_domain(GraphDomain::centered_ball(1.1 * p.radius)), d, opts)
        }
    };
    Checks {
        normalization,
        stabilization,
        restriction,
    }
}

fn compare_wider(wider: &LocalMapSpec<f64>, d: &DegreeResult, opts: &GalerkinOptions) -> Check {
    match deg_infinite_with(wider, opts) {
        Ok(r) if r.value == d.value => Check::new(CheckStatus::Passed, "same degree on the ball of radius 1.1 R"),
        Ok(r) => Check::new(
            CheckStatus::Failed,
            format!("degree {} on the ball of radius 1.1 R: zeros close to the boundary of U", r.value),
        ),
        Err(e) => Check::new(CheckStatus::Inconclusive, format!("radius 1.1 R: {e}")),
    }
}

fn compute(path: &Path, truncation: Option<&str>, radius: Option<f64>, json: Option<&Path>, seed: u64, timing: bool) -> i32 {
    let start = Instant::now();
    let p = match load(path, truncation, radius) {
        Ok(p) => p,
        Err(e) => return input_error(e),
    };
    let f = match p.build() {
        Ok(f) => f,
        Err(e) => return input_error(e),
    };
    let mut opts = GalerkinOptions::default()
        .with_seed(seed)
        .with_truncation(p.truncation.policy());
    if let Some(s) = p.samples_per_dim {
        opts.boundary_samples_per_dim = s;
    }

    let outcome = run(&p, &f, &opts);
    let degree_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut report = Report {
        kind: p.kind().into(),
        group: p.group.to_string(),
        seed,
        result: None,
        degree: None,
        verdict: String::new(),
        checks: None,
        failure: None,
        exit_code: EXIT_CERTIFICATION,
        timing: None,
    };
    match outcome.result {
        Err((failure, input)) => {
            if input {
                return input_error(failure.message);
            }
            report.verdict = format!("no certificate: {} check failed", failure.check);
            report.failure = Some(failure);
        }
        Ok(d) => {
            let checks = run_checks(&p, &f, &d, &opts);
            let failed = [&checks.normalization, &checks.stabilization, &checks.restriction]
                .iter()
                .any(|c| c.status == CheckStatus::Failed);
            report.exit_code = if failed {
                EXIT_CERTIFICATION
            } else if d.value.is_zero() {
                EXIT_ZERO
            } else {
                EXIT_NONZERO
            };
            report.verdict = match (failed, outcome.verdict) {
                (true, _) => "no certificate: a consistency check failed".into(),
                (false, Some(v)) => v.describe(p.hamiltonian().map_or(0.0, |s| s.lambda)),
                (false, None) if d.value.is_zero() => "no certificate: the degree vanishes".into(),
                (false, None) => "nonzero degree: f has a zero in U".into(),
            };
            report.degree = Some(d.value.to_string());
            report.result = Some(d.to_record());
            report.checks = Some(checks);
        }
    }
    if timing {
        let total_ms = start.elapsed().as_secs_f64() * 1e3;
        report.timing = Some(Timing {
            degree_ms,
            checks_ms: total_ms - degree_ms,
            total_ms,
        });
    }
    if let Err(e) = emit(&report.render(), &report.to_json(), json) {
        return input_error(e);
    }
    report.exit_code
}

fn selftest(suite: Option<&str>, seed: u64, json: Option<&Path>) -> i32 {
    let names: Vec<&str> = match suite {
        Some(s) if SUITES.contains(&s) => vec![s],
        Some(s) => return input_error(format!("unknown suite {s:?}; expected one of {}", SUITES.join(", "))),
        None => SUITES.to_vec(),
    };
    let suites: Vec<_> = names.iter().filter_map(|s| run_suite(s, seed)).collect();
    let passed = suites.iter().all(|s| s.passed);
    let report = SelftestReport { seed, suites, passed };
    let text = report.render();
    let json_text = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Err(e) = emit(&text, &json_text, json) {
        return input_error(e);
    }
    if passed {
        0
    } else {
        1
    }
}
