//! A fixed corpus of local maps with known degrees, shared by the self-test
//! suites and the integration tests.

use std::sync::Arc;

use crate::euler_ring::{GroupDescriptor, RingElement, SubgroupClass};
use crate::galerkin::{GraphDomain, LocalMapSpec, Monomial, PolynomialGradient, SharedNonlinearity, SpectralMultiplier};
use crate::hamiltonian::{hamiltonian_map, loop_operator, HamiltonianSpec, HamiltonianTerm};
use crate::srep::{Eigenspace, Rep, SpectralOperator};

pub struct CorpusInstance {
    pub name: String,
    pub map: LocalMapSpec<f64>,
    pub expected: Option<RingElement>,
    /// Groups of admissible domains that must all give the same degree.
    pub domain_checks: Vec<Vec<GraphDomain<f64>>>,
}

fn s1(terms: &[(SubgroupClass, i64)]) -> RingElement {
    RingElement::from_terms(GroupDescriptor::Circle, terms.iter().copied()).expect("S¹ classes")
}

/// Kernel ℝ², eigenvalues ±k on ℂ(k).
pub fn ladder() -> SpectralOperator<f64> {
    SpectralOperator::from_generator("ladder", |n| {
        if n == 0 {
            vec![Eigenspace::new(0.0, Rep::trivial(2))]
        } else {
            let k = n as f64;
            vec![
                Eigenspace::new(-k, Rep::mode(n as u32, 1)),
                Eigenspace::new(k, Rep::mode(n as u32, 1)),
            ]
        }
    })
}

/// Non-integer eigenvalues, trivial parts outside the kernel and a kernel
/// carrying a mode.
pub fn offset() -> SpectralOperator<f64> {
    SpectralOperator::from_generator("offset", |n| {
        if n == 0 {
            vec![Eigenspace::new(0.0, Rep::new(1, [(2, 1)]))]
        } else {
            let k = n as f64;
            let n = n as u32;
            vec![
                Eigenspace::new(-(k - 0.5), Rep::new(1, [(n, 1)])),
                Eigenspace::new(k - 0.25, Rep::new(0, [(n, 1), (n + 1, 1)])),
            ]
        }
    })
}

/// Positive spectrum: every shell operator has degree 1.
pub fn positive() -> SpectralOperator<f64> {
    SpectralOperator::from_generator("positive", |n| {
        if n == 0 {
            vec![Eigenspace::new(0.0, Rep::mode(1, 1))]
        } else {
            let k = n as f64;
            vec![
                Eigenspace::new(k - 0.5, Rep::new(1, [(2 * n as u32, 1)])),
                Eigenspace::new(k, Rep::mode(1, 1)),
            ]
        }
    })
}

/// Kernel ℝ (coordinate 0); shells ±k on ℂ(k). The +1 eigenspace sits at
/// coordinates 3 and 4.
pub fn well() -> SpectralOperator<f64> {
    SpectralOperator::from_generator("well", |n| {
        if n == 0 {
            vec![Eigenspace::new(0.0, Rep::trivial(1))]
        } else {
            let k = n as f64;
            vec![
                Eigenspace::new(-k, Rep::mode(n as u32, 1)),
                Eigenspace::new(k, Rep::mode(n as u32, 1)),
            ]
        }
    })
}

pub fn synthetic_spectra() -> Vec<SpectralOperator<f64>> {
    vec![ladder(), offset(), positive()]
}

/// φ = ¼x₀⁴ − ½x₀² + μ·x₀·|w|², w the +1 eigenspace of [`well`].
/// Zeros: (±1, 0), (0, 0), and a circle at x₀ = 1/(2μ).
pub fn double_well(mu: f64) -> SharedNonlinearity<f64> {
    Arc::new(PolynomialGradient::new(vec![
        Monomial { vars: vec![(0, 4)], coeff: 0.25 },
        Monomial { vars: vec![(0, 2)], coeff: -0.5 },
        Monomial { vars: vec![(0, 1), (3, 2)], coeff: mu },
        Monomial { vars: vec![(0, 1), (4, 2)], coeff: mu },
    ]))
}

pub const WELL_MU: f64 = 0.75;

/// f = A + P₀ on a centred ball.
pub fn normalization_map(op: SpectralOperator<f64>, radius: f64) -> LocalMapSpec<f64> {
    LocalMapSpec::new(
        op,
        Arc::new(SpectralMultiplier::minus_kernel_projection()),
        GraphDomain::centered_ball(radius),
    )
}

pub fn normalization_instances() -> Vec<(String, LocalMapSpec<f64>)> {
    let mut out: Vec<(String, LocalMapSpec<f64>)> = (1..=3)
        .map(|dof| (format!("A+P0 loop dof={dof}"), normalization_map(loop_operator(dof), 2.0)))
        .collect();
    for op in synthetic_spectra() {
        out.push((format!("A+P0 {}", op.label()), normalization_map(op, 2.0)));
    }
    out
}

/// H = ½|z|² + ¼|z|⁴.
pub fn quartic_hamiltonian(dof: usize, lambda: f64) -> HamiltonianSpec {
    let d = 2 * dof;
    let mut terms = Vec::new();
    for i in 0..d {
        let mut e = vec![0; d];
        e[i] = 2;
        terms.push(HamiltonianTerm { exps: e.clone(), coeff: 0.5 });
        e[i] = 4;
        terms.push(HamiltonianTerm { exps: e, coeff: 0.25 });
        for j in i + 1..d {
            let mut e = vec![0; d];
            e[i] = 2;
            e[j] = 2;
            terms.push(HamiltonianTerm { exps: e, coeff: 0.5 });
        }
    }
    HamiltonianSpec { dof, terms, lambda }
}

/// H = ½|z|² + c·p₁: the only zero is the constant loop −c·e_{p₁}.
pub fn shifted_harmonic(c: f64, lambda: f64) -> HamiltonianSpec {
    let mut spec = HamiltonianSpec::harmonic(1, lambda);
    spec.terms.push(HamiltonianTerm { exps: vec![1, 0], coeff: c });
    spec
}

fn balls(center: Vec<f64>, radii: &[f64]) -> Vec<GraphDomain<f64>> {
    radii.iter().map(|&r| GraphDomain::ball(center.clone(), r)).collect()
}

fn overlapping(a: GraphDomain<f64>, b: GraphDomain<f64>) -> Vec<GraphDomain<f64>> {
    vec![a.clone(), b.clone(), GraphDomain::Intersection(vec![a, b])]
}

/// Standard domain checks for a map whose zeros lie near the origin.
fn centred_checks(r: f64, shift: Vec<f64>) -> Vec<Vec<GraphDomain<f64>>> {
    vec![
        balls(Vec::new(), &[r, 2.0 * r]),
        balls(Vec::new(), &[r, 0.5 * r]),
        overlapping(GraphDomain::centered_ball(r), GraphDomain::ball(shift, r)),
    ]
}

pub fn corpus() -> Vec<CorpusInstance> {
    let unit = RingElement::unit(GroupDescriptor::Circle);
    let zero = RingElement::zero(GroupDescriptor::Circle);
    let mut out = Vec::new();

    for (name, map) in normalization_instances() {
        out.push(CorpusInstance {
            name,
            map,
            expected: Some(unit.clone()),
            domain_checks: Vec::new(),
        });
    }
    for inst in out.iter_mut() {
        let kernel_dim = inst.map.operator.kernel_rep().expect("valid").trivial;
        let shift = if kernel_dim > 0 { vec![0.8] } else { Vec::new() };
        inst.domain_checks = centred_checks(2.0, shift);
    }

    let half = |op: SpectralOperator<f64>| {
        LocalMapSpec::new(op, Arc::new(SpectralMultiplier::scalar(0.5)), GraphDomain::centered_ball(1.0))
    };
    out.push(CorpusInstance {
        name: "A-I/2 ladder".into(),
        map: half(ladder()),
        expected: Some(unit.clone()),
        domain_checks: centred_checks(1.0, vec![0.5, 0.3]),
    });
    out.push(CorpusInstance {
        name: "A-I/2 offset".into(),
        map: half(offset()),
        expected: Some(s1(&[(SubgroupClass::Full, -1), (SubgroupClass::FiniteCyclic(2), 1)])),
        domain_checks: centred_checks(1.0, vec![0.6]),
    });

    let mu = WELL_MU;
    let well_map = |center: f64, r: f64| LocalMapSpec::new(well(), double_well(mu), GraphDomain::ball(vec![center], r));
    out.push(CorpusInstance {
        name: "double well +1".into(),
        map: well_map(1.0, 0.3),
        expected: Some(s1(&[(SubgroupClass::Full, -1), (SubgroupClass::FiniteCyclic(1), 1)])),
        domain_checks: vec![
            balls(vec![1.0], &[0.3, 0.6]),
            balls(vec![1.0], &[0.3, 0.15]),
            overlapping(GraphDomain::ball(vec![1.0], 0.5), GraphDomain::ball(vec![1.3], 0.5)),
        ],
    });
    out.push(CorpusInstance {
        name: "double well -1".into(),
        map: well_map(-1.0, 0.3),
        expected: Some(s1(&[(SubgroupClass::Full, -1)])),
        domain_checks: vec![
            balls(vec![-1.0], &[0.3, 0.6]),
            balls(vec![-1.0], &[0.3, 0.15]),
            overlapping(GraphDomain::ball(vec![-1.0], 0.5), GraphDomain::ball(vec![-1.4], 0.6)),
        ],
    });
    out.push(CorpusInstance {
        name: "double well union".into(),
        map: LocalMapSpec::new(
            well(),
            double_well(mu),
            GraphDomain::Union(vec![GraphDomain::ball(vec![1.0], 0.3), GraphDomain::ball(vec![-1.0], 0.3)]),
        ),
        expected: Some(s1(&[(SubgroupClass::Full, -2), (SubgroupClass::FiniteCyclic(1), 1)])),
        domain_checks: vec![vec![
            GraphDomain::Union(vec![GraphDomain::ball(vec![1.0], 0.3), GraphDomain::ball(vec![-1.0], 0.3)]),
            GraphDomain::Union(vec![GraphDomain::ball(vec![1.0], 0.5), GraphDomain::ball(vec![-1.0], 0.5)]),
        ]],
    });

    let ham = |spec: HamiltonianSpec, r: f64| hamiltonian_map(&spec, r).expect("valid Hamiltonian");
    out.push(CorpusInstance {
        name: "harmonic dof=1 lambda=0.5".into(),
        map: ham(HamiltonianSpec::harmonic(1, 0.5), 1.0),
        expected: Some(unit.clone()),
        domain_checks: centred_checks(1.0, vec![0.5]),
    });
    out.push(CorpusInstance {
        name: "harmonic dof=1 lambda=1.5".into(),
        map: ham(HamiltonianSpec::harmonic(1, 1.5), 1.0),
        expected: Some(s1(&[(SubgroupClass::Full, 1), (SubgroupClass::FiniteCyclic(1), -1)])),
        domain_checks: centred_checks(1.0, vec![0.0, 0.5]),
    });
    out.push(CorpusInstance {
        name: "quartic dof=1 lambda=0.3".into(),
        map: ham(quartic_hamiltonian(1, 0.3), 1.0),
        expected: Some(unit.clone()),
        domain_checks: vec![
            balls(Vec::new(), &[1.0, 2.0]),
            balls(Vec::new(), &[1.0, 0.5]),
            overlapping(GraphDomain::centered_ball(1.0), GraphDomain::ball(vec![0.5], 1.0)),
        ],
    });
    out.push(CorpusInstance {
        name: "shifted harmonic".into(),
        map: ham(shifted_harmonic(2.0, 0.5), 1.0),
        expected: Some(zero),
        domain_checks: centred_checks(1.0, vec![0.5]),
    });
    out
}
