use std::path::PathBuf;
use std::process::{Command, Output};

use specdeg::euler_ring::{RingElement, SerializedTerm};
use specdeg::galerkin::DegreeRecord;
use specdeg::GroupDescriptor;
use specdeg_cli::problem::ProblemFile;
use specdeg_cli::report::{CheckStatus, Report, SelftestReport};

fn problem(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

fn specdeg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specdeg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_report(args: &[&str]) -> (Report, String, i32) {
    let mut all = args.to_vec();
    all.extend(["--json", "-"]);
    let out = specdeg(&all);
    let text = String::from_utf8(out.stdout).unwrap();
    let report: Report = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"));
    (report, text, out.status.code().unwrap())
}

fn value(terms: &[SerializedTerm]) -> RingElement {
    RingElement::from_serialized(GroupDescriptor::Circle, terms).unwrap()
}

fn temp_file(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("specdeg-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn normalization_problem_is_unit() {
    let p = problem("normalization.json");
    let (r, _, code) = json_report(&["compute", p.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r.exit_code, 0);
    assert!(value(&r.result.unwrap().value).is_unit());
    let checks = r.checks.unwrap();
    assert_eq!(checks.normalization.status, CheckStatus::Passed);
    assert_eq!(checks.stabilization.status, CheckStatus::Passed);
    assert_eq!(checks.restriction.status, CheckStatus::Passed);
}

#[test]
fn harmonic_half_is_certified() {
    let p = problem("harmonic_half.json");
    let (r, _, code) = json_report(&["compute", p.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r.degree.as_deref(), Some("1"));
    assert!(r.verdict.starts_with("periodic solution certified"));
}

#[test]
fn zero_degree_exits_two() {
    let p = problem("shifted.json");
    let (r, _, code) = json_report(&["compute", p.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(value(&r.result.unwrap().value).is_zero());
}

#[test]
fn resonance_is_a_certification_failure() {
    let p = problem("harmonic_resonant.json");
    let (r, _, code) = json_report(&["compute", p.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(r.result.is_none());
    assert_eq!(r.failure.unwrap().check, "margin");
}

#[test]
fn double_well_degree() {
    let p = problem("double_well.json");
    let (r, _, code) = json_report(&["compute", p.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r.degree.as_deref(), Some("-1 + [S1/Z1]"));
}

#[test]
fn input_errors_exit_four() {
    let bad = problem("bad_shell.json");
    assert_eq!(specdeg(&["compute", bad.to_str().unwrap()]).status.code(), Some(4));
    let missing = problem("does_not_exist.json");
    assert_eq!(specdeg(&["compute", missing.to_str().unwrap()]).status.code(), Some(4));
    let garbage = temp_file("garbage.json", "{\"kind\": \"abstract\", ");
    assert_eq!(specdeg(&["compute", garbage.to_str().unwrap()]).status.code(), Some(4));
    let good = problem("harmonic_half.json");
    assert_eq!(
        specdeg(&["compute", good.to_str().unwrap(), "--truncation", "many"]).status.code(),
        Some(4)
    );
    assert_eq!(specdeg(&["compute", good.to_str().unwrap(), "--radius", "-1"]).status.code(), Some(4));
    assert_eq!(specdeg(&["frobnicate"]).status.code(), Some(4));
    assert_eq!(specdeg(&["selftest", "--suite", "nope"]).status.code(), Some(4));
}

#[test]
fn cyclic_group_and_bad_potentials_are_rejected() {
    let cyclic = temp_file(
        "cyclic.json",
        r#"{"kind": "abstract", "group": {"cyclic": 4}, "radius": 1.0,
            "spectrum": [{"eigenvalue": 0.5, "rep": {"trivial": 1, "modes": []}}]}"#,
    );
    assert_eq!(specdeg(&["compute", cyclic.to_str().unwrap()]).status.code(), Some(4));
    let out_of_range = temp_file(
        "range.json",
        r#"{"kind": "abstract", "radius": 1.0,
            "spectrum": [{"eigenvalue": 0.5, "rep": {"trivial": 1, "modes": []}}],
            "potential": [{"vars": [[3, 2]], "coeff": 1.0}]}"#,
    );
    assert_eq!(specdeg(&["compute", out_of_range.to_str().unwrap()]).status.code(), Some(4));
    // x₁³ on a mode coordinate is not invariant
    let not_invariant = temp_file(
        "invariant.json",
        r#"{"kind": "abstract", "radius": 1.0,
            "spectrum": [{"eigenvalue": 0.5, "rep": {"trivial": 0, "modes": [[1, 1]]}}],
            "potential": [{"vars": [[0, 3]], "coeff": 1.0}]}"#,
    );
    assert_eq!(specdeg(&["compute", not_invariant.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn overrides_apply() {
    let p = problem("harmonic_half.json");
    let (r, _, _) = json_report(&["compute", p.to_str().unwrap(), "--truncation", "3"]);
    assert_eq!(r.result.unwrap().level, 3);
    let (r, _, code) = json_report(&["compute", p.to_str().unwrap(), "--radius", "0.5", "--truncation", "auto"]);
    assert_eq!(code, 0);
    assert_eq!(r.result.unwrap().level, 1);
}

#[test]
fn report_json_is_deterministic_and_round_trips() {
    let p = problem("double_well.json");
    let (r1, t1, _) = json_report(&["compute", p.to_str().unwrap(), "--seed", "7"]);
    let (_, t2, _) = json_report(&["compute", p.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(t1, t2);
    assert!(r1.timing.is_none());
    let again = serde_json::to_string_pretty(&r1).unwrap();
    assert_eq!(again.trim_end(), t1.trim_end());
    let rec: DegreeRecord = serde_json::from_str(&serde_json::to_string(&r1.result).unwrap()).unwrap();
    assert_eq!(Some(rec), r1.result);
}

#[test]
fn timing_only_on_request() {
    let p = problem("normalization.json");
    let (r, _, _) = json_report(&["compute", p.to_str().unwrap(), "--timing"]);
    let t = r.timing.unwrap();
    assert!(t.total_ms >= t.degree_ms);
}

#[test]
fn json_file_output() {
    let p = problem("normalization.json");
    let out = std::env::temp_dir().join(format!("specdeg-report-{}.json", std::process::id()));
    let o = specdeg(&["compute", p.to_str().unwrap(), "--json", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stdout).unwrap().contains("degree: 1"));
    let r: Report = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r.degree.as_deref(), Some("1"));
}

#[test]
fn selftest_ring_is_deterministic() {
    let a = specdeg(&["selftest", "--suite", "ring", "--seed", "5", "--json", "-"]);
    let b = specdeg(&["selftest", "--suite", "ring", "--seed", "5", "--json", "-"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let r: SelftestReport = serde_json::from_slice(&a.stdout).unwrap();
    assert!(r.passed);
    assert_eq!(r.suites.len(), 1);
    assert_eq!(r.suites[0].suite, "ring");
}

#[test]
fn selftest_default_runs_every_suite() {
    let out = specdeg(&["selftest"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    for s in ["ring", "invertibility", "oracle", "normalization", "stabilization"] {
        assert!(text.contains(&format!("PASS {s}")), "{text}");
    }
}

#[test]
fn problem_files_parse() {
    for name in ["harmonic_half.json", "quartic.json", "double_well.json", "normalization.json"] {
        let text = std::fs::read_to_string(problem(name)).unwrap();
        let p = ProblemFile::parse(&text).unwrap();
        p.build().unwrap();
    }
}
