//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use rand::Rng;
use specdeg::corpus::{corpus, double_well, ladder, normalization_instances, quartic_hamiltonian, well};
use specdeg::euler_ring::{limit_class_equal, GroupDescriptor, RingElement, SubgroupClass};
use specdeg::findim::{brouwer_oracle, grad_degree, linear_degree, GradientField};
use specdeg::galerkin::{
    deg_along_otopy, deg_infinite, deg_infinite_with, GalerkinError, GalerkinOptions, GraphDomain, OtopyPath,
    SharedNonlinearity, SpectralMultiplier,
};
use specdeg::hamiltonian::{
    action, grad_H, loop_operator, periodic_existence, HamiltonianError, HamiltonianNonlinearity, HamiltonianSpec,
    HamiltonianTerm, LoopState, Verdict,
};
use specdeg::region::Region;
use specdeg::selftest::{random_element, random_nonlinear_field, random_rep, random_sym_op, ring_groups, rng, RandomPotential};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn unit() -> RingElement {
    RingElement::unit(GroupDescriptor::Circle)
}

fn ring_axioms() -> Outcome {
    let mut g = rng(1);
    let mut checked = 0;
    for group in ring_groups() {
        let one = RingElement::unit(group);
        let zero = RingElement::zero(group);
        for _ in 0..1000 {
            let a = random_element(group, &mut g);
            let b = random_element(group, &mut g);
            let c = random_element(group, &mut g);
            ensure(&(&a * &b) * &c == &a * &(&b * &c), || format!("{group}: associativity {a} {b} {c}"))?;
            ensure(&a * &(&b + &c) == &(&a * &b) + &(&a * &c), || format!("{group}: distributivity {a} {b} {c}"))?;
            ensure(&a * &b == &b * &a, || format!("{group}: commutativity {a} {b}"))?;
            ensure(&a * &one == a && &a + &zero == a, || format!("{group}: identities {a}"))?;
            // marks are ring homomorphisms U(Z_m) → Z
            if let GroupDescriptor::Cyclic(_) = group {
                let ab = &a * &b;
                for e in group.divisors() {
                    ensure(ab.mark(e).unwrap() == a.mark(e).unwrap() * b.mark(e).unwrap(), || {
                        format!("{group}: mark {e} of {a}·{b}")
                    })?;
                }
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} triples over S1, Z2, Z3, Z4, Z6, Z8"))
}

fn invertibility() -> Outcome {
    let mut g = rng(2);
    for i in 0..200 {
        let rep = random_rep(&mut g);
        let b = random_sym_op(&rep, &mut g);
        let d = linear_degree(&b).map_err(|e| format!("#{i}: {e}"))?;
        let inv = d.invert().ok_or_else(|| format!("#{i}: {d} not invertible"))?;
        ensure(&d * &inv == unit(), || format!("#{i}: {d}·{inv} ≠ 1"))?;
    }
    Ok("200 random isomorphisms".into())
}

fn oracle_agreement() -> Outcome {
    let mut g = rng(3);
    let (mut accepted, mut redrawn) = (0, 0);
    let mut nonzero = 0;
    while accepted < 25 {
        let d = 1 + accepted % 3;
        let f = RandomPotential::sample(d, &mut g).field(2.5);
        let deg = match grad_degree(&f) {
            Ok(v) => v,
            Err(_) => {
                redrawn += 1;
                ensure(redrawn < 100, || "too many inadmissible draws".into())?;
                continue;
            }
        };
        accepted += 1;
        let o = brouwer_oracle(&f).map_err(|e| format!("oracle: {e}"))?;
        ensure(deg.full_coeff() == BigInt::from(o), || format!("d={d}: degree {deg}, oracle {o}"))?;
        if o != 0 {
            nonzero += 1;
        }
    }
    Ok(format!("25 fields agree ({nonzero} with nonzero degree, {redrawn} degenerate draws redrawn)"))
}

fn product_property() -> Outcome {
    let mut g = rng(4);
    for i in 0..100 {
        let (r1, r2) = (random_rep(&mut g), random_rep(&mut g));
        let (b1, b2) = (random_sym_op(&r1, &mut g), random_sym_op(&r2, &mut g));
        let f1 = GradientField::linear(&b1, Region::centered_ball(r1.dim(), 1.0)).unwrap();
        let f2 = GradientField::linear(&b2, Region::centered_ball(r2.dim(), 1.0)).unwrap();
        let lhs = grad_degree(&f1.product(&f2)).map_err(|e| format!("linear #{i}: {e}"))?;
        let rhs = &linear_degree(&b1).unwrap() * &linear_degree(&b2).unwrap();
        let sum = linear_degree(&b1.direct_sum(&b2)).unwrap();
        ensure(lhs == rhs && sum == rhs, || format!("linear #{i}: {lhs} vs {rhs} vs {sum}"))?;
    }
    let mut pairs = 0;
    let mut draws = 0;
    while pairs < 10 {
        draws += 1;
        ensure(draws < 200, || "too many inadmissible draws".into())?;
        let (f1, f2) = (random_nonlinear_field(&mut g), random_nonlinear_field(&mut g));
        let (Ok(d1), Ok(d2)) = (grad_degree(&f1), grad_degree(&f2)) else { continue };
        let lhs = grad_degree(&f1.product(&f2)).map_err(|e| format!("nonlinear: {e}"))?;
        ensure(lhs == &d1 * &d2, || format!("nonlinear: {lhs} vs {d1}·{d2}"))?;
        pairs += 1;
    }
    let maps = corpus();
    let pick = |name: &str| maps.iter().find(|c| c.name == name).unwrap().map.clone();
    for (a, b) in [("double well +1", "harmonic dof=1 lambda=1.5"), ("A-I/2 offset", "quartic dof=1 lambda=0.3")] {
        let (fa, fb) = (pick(a), pick(b));
        let lhs = deg_infinite(&fa.product(&fb)).map_err(|e| format!("{a} × {b}: {e}"))?.value;
        let rhs = &deg_infinite(&fa).unwrap().value * &deg_infinite(&fb).unwrap().value;
        ensure(lhs == rhs, || format!("{a} × {b}: {lhs} vs {rhs}"))?;
    }
    Ok("100 linear + 10 nonlinear pairs, 2 infinite-dimensional pairs".into())
}

fn normalization() -> Outcome {
    let insts = normalization_instances();
    for (name, map) in &insts {
        let d = deg_infinite(map).map_err(|e| format!("{name}: {e}"))?;
        ensure(d.value == unit(), || format!("{name}: {}", d.value))?;
    }
    Ok(format!("{} operators give Deg(A + P0) = 1", insts.len()))
}

fn stabilization() -> Outcome {
    let opts = GalerkinOptions::default().with_depth(2);
    let all = corpus();
    for c in &all {
        let d = deg_infinite_with(&c.map, &opts).map_err(|e| format!("{}: {e}", c.name))?;
        ensure(d.levels.len() == 3, || format!("{}: {} levels", c.name, d.levels.len()))?;
        for l in &d.levels {
            ensure(l.normalized == d.value, || format!("{}: level {} gives {}", c.name, l.level, l.normalized))?;
        }
        if let Some(e) = &c.expected {
            ensure(&d.value == e, || format!("{}: {} but expected {e}", c.name, d.value))?;
        }
    }
    Ok(format!("{} corpus instances stable over N, N+1, N+2", all.len()))
}

fn domain_independence() -> Outcome {
    let mut groups = 0;
    for c in corpus() {
        let base = deg_infinite(&c.map).map_err(|e| format!("{}: {e}", c.name))?.value;
        for group in &c.domain_checks {
            for dom in group {
                let v = deg_infinite(&c.map.with_domain(dom.clone())).map_err(|e| format!("{}: {e}", c.name))?;
                ensure(v.value == base, || format!("{}: {} vs {base} on {dom:?}", c.name, v.value))?;
            }
            groups += 1;
        }
    }
    Ok(format!("{groups} domain groups"))
}

fn otopy() -> Outcome {
    let scalar = |c: f64| -> SharedNonlinearity<f64> { Arc::new(SpectralMultiplier::scalar(c)) };
    let paths: Vec<(&str, OtopyPath<f64>)> = vec![
        (
            "A - cI, c in [0.3, 0.7]",
            OtopyPath::linear(ladder(), 10, scalar(0.3), scalar(0.7), GraphDomain::centered_ball(1.0)),
        ),
        (
            "quartic, lambda in [0.2, 0.45]",
            OtopyPath::new(loop_operator(1), 10, |t| {
                let f: SharedNonlinearity<f64> =
                    Arc::new(HamiltonianNonlinearity::new(quartic_hamiltonian(1, 0.2 + 0.25 * t)));
                (f, GraphDomain::centered_ball(1.0))
            }),
        ),
        (
            "double well, mu in [0.6, 0.9], moving ball",
            OtopyPath::new(well(), 10, |t| (double_well(0.6 + 0.3 * t), GraphDomain::ball(vec![1.0], 0.3 + 0.1 * t))),
        ),
    ];
    for (name, p) in &paths {
        let r = deg_along_otopy(p).map_err(|e| format!("{name}: {e}"))?;
        ensure(r.len() == 11, || format!("{name}: {} slices", r.len()))?;
        ensure(r.windows(2).all(|w| w[0].value == w[1].value), || format!("{name}: degree changes"))?;
    }
    let crossing = OtopyPath::linear(ladder(), 10, scalar(0.5), scalar(1.5), GraphDomain::centered_ball(1.0));
    match deg_along_otopy(&crossing) {
        Err(GalerkinError::SliceMarginFailure { t, .. }) => Ok(format!("3 paths constant; crossing path fails at t = {t}")),
        Err(e) => Err(format!("crossing path: unexpected error {e}")),
        Ok(_) => Err("crossing path was certified".into()),
    }
}

/// (−1)^{m₀}(1 − Σ_k (m_k − n)[S¹/ℤ_k]) from eigenvalue counts of the
/// real mode blocks of A − λS on (a_k, b_k).
fn quadratic_closed_form(s: &DMatrix<f64>, lambda: f64) -> RingElement {
    let d = s.nrows();
    let n = d / 2;
    let mut j = DMatrix::zeros(d, d);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    let negatives = |m: DMatrix<f64>| m.symmetric_eigen().eigenvalues.iter().filter(|&&v| v < 0.0).count();
    let m0 = negatives(-lambda * s);
    let mut terms = vec![(SubgroupClass::Full, if m0 % 2 == 0 { 1i64 } else { -1 })];
    let kmax = (lambda * s.norm()).ceil() as usize + 2;
    for k in 1..=kmax {
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        let kj = &j * (k as f64);
        m.view_mut((0, d), (d, d)).copy_from(&(-&kj));
        m.view_mut((d, 0), (d, d)).copy_from(&kj);
        m.view_mut((0, 0), (d, d)).copy_from(&(-lambda * s));
        m.view_mut((d, d), (d, d)).copy_from(&(-lambda * s));
        let mk = negatives(m) as i64 / 2;
        let sign = terms[0].1;
        terms.push((SubgroupClass::FiniteCyclic(k as u64), -sign * (mk - n as i64)));
    }
    RingElement::from_terms(GroupDescriptor::Circle, terms).unwrap()
}

fn hamiltonian_end_to_end() -> Outcome {
    let r = periodic_existence(&HamiltonianSpec::harmonic(1, 0.5), 1.0).map_err(|e| e.to_string())?;
    ensure(r.result.value == unit() && r.verdict == Verdict::PeriodicSolutionCertified, || {
        format!("lambda = 1/2: {}", r.result.value)
    })?;
    match periodic_existence(&HamiltonianSpec::harmonic(1, 1.0), 1.0) {
        Err(HamiltonianError::NoncompactZeroSet(_)) => {}
        other => return Err(format!("lambda = 1 not rejected: {:?}", other.map(|r| r.result.value))),
    }
    let coupled = DMatrix::from_row_slice(4, 4, &[
        2.0, 0.3, 0.1, 0.0, //
        0.3, 1.0, 0.0, 0.2, //
        0.1, 0.0, 1.5, 0.4, //
        0.0, 0.2, 0.4, 0.8,
    ]);
    let cases = [
        (DMatrix::<f64>::identity(2, 2), 0.5),
        (DMatrix::<f64>::identity(2, 2), 1.5),
        (DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0]), 0.8),
        (DMatrix::from_diagonal(&nalgebra::dvector![1.0, -1.0]), 0.7),
        (coupled, 0.9),
    ];
    for (s, lambda) in &cases {
        let spec = HamiltonianSpec::quadratic(s, *lambda);
        let got = periodic_existence(&spec, 1.0).map_err(|e| format!("S = {s}, lambda = {lambda}: {e}"))?;
        let want = quadratic_closed_form(s, *lambda);
        ensure(got.result.value == want, || format!("lambda = {lambda}: {} vs closed form {want}", got.result.value))?;
    }
    Ok("lambda = 1/2 certified, lambda = 1 rejected, 5 quadratic cases match".into())
}

fn limit_classes() -> Outcome {
    let all = corpus();
    for c in &all {
        let d = deg_infinite(&c.map).map_err(|e| format!("{}: {e}", c.name))?;
        let ok = limit_class_equal(&d.limit_class, &d.normalized_class()).map_err(|e| e.to_string())?;
        ensure(ok, || format!("{}: limit class differs", c.name))?;
        let lifted = d.limit_class.push_to(d.level + 2).map_err(|e| e.to_string())?;
        let direct = d.normalized_class().push_to(d.level + 2).map_err(|e| e.to_string())?;
        ensure(lifted == direct, || format!("{}: pushforward differs", c.name))?;
    }
    Ok(format!("{} results", all.len()))
}

fn random_hamiltonian<R: Rng>(dof: usize, g: &mut R) -> HamiltonianSpec {
    let d = 2 * dof;
    let mut terms = Vec::new();
    for _ in 0..6 {
        let mut exps = vec![0u32; d];
        let deg = g.random_range(1..=4);
        for _ in 0..deg {
            exps[g.random_range(0..d)] += 1;
        }
        terms.push(HamiltonianTerm { exps, coeff: g.random_range(-1.0..1.0) });
    }
    HamiltonianSpec::new(dof, terms, 1.0).unwrap()
}

fn random_loop<R: Rng>(dof: usize, modes: usize, g: &mut R) -> LoopState<f64> {
    let mut x = vec![0.0; 2 * dof * (2 * modes + 1)];
    for v in x.iter_mut() {
        *v = g.random_range(-0.8..0.8);
    }
    LoopState::from_coords(dof, &x)
}

fn gradient_consistency() -> Outcome {
    let mut g = rng(11);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let dof = 1 + i % 2;
        let modes = 1 + i % 3;
        let spec = random_hamiltonian(dof, &mut g);
        let z = random_loop(dof, modes, &mut g);
        let h = random_loop(dof, modes, &mut g);
        let grad = grad_H(&spec, &z, 64).map_err(|e| e.to_string())?;
        let analytic = grad.l2_inner(&h);
        let eps = 1e-5;
        let fd = (action(&spec, &z.axpy(eps, &h), 256) - action(&spec, &z.axpy(-eps, &h), 256)) / (2.0 * eps);
        let scale = grad.l2_inner(&grad).sqrt() * h.l2_inner(&h).sqrt();
        let rel = (fd - analytic).abs() / scale.max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        ensure(rel <= 1e-6, || format!("#{i}: relative error {rel:.2e}"))?;
    }
    Ok(format!("50 pairs, worst relative error {worst:.1e}"))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "ring axioms", limit: Duration::from_secs(5), run: ring_axioms },
        Criterion { id: 2, name: "invertibility of linear degrees", limit: Duration::from_secs(10), run: invertibility },
        Criterion { id: 3, name: "Brouwer oracle agreement", limit: Duration::from_secs(60), run: oracle_agreement },
        Criterion { id: 4, name: "product property", limit: Duration::from_secs(60), run: product_property },
        Criterion { id: 5, name: "normalization", limit: Duration::from_secs(30), run: normalization },
        Criterion { id: 6, name: "stabilization", limit: Duration::from_secs(120), run: stabilization },
        Criterion { id: 7, name: "domain independence", limit: Duration::from_secs(60), run: domain_independence },
        Criterion { id: 8, name: "otopy invariance", limit: Duration::from_secs(60), run: otopy },
        Criterion { id: 9, name: "Hamiltonian end to end", limit: Duration::from_secs(120), run: hamiltonian_end_to_end },
        Criterion { id: 10, name: "limit class consistency", limit: Duration::from_secs(10), run: limit_classes },
        Criterion { id: 11, name: "gradient consistency", limit: Duration::from_secs(30), run: gradient_consistency },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str()) || *f == c.id.to_string()) {
            continue;
        }
        let t = Instant::now();
        let outcome = (c.run)();
        let elapsed = t.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:2} {:32} {} ({:.2} s / {} s) {detail}",
            c.id,
            c.name,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
