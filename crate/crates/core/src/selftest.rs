//! Embedded property suites and the seeded random generators they share
//! with the integration tests.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{corpus, normalization_instances};
use crate::euler_ring::{limit_class_equal, GroupDescriptor, RingElement, SubgroupClass};
use crate::findim::{brouwer_oracle, grad_degree, linear_degree, GradientField};
use crate::galerkin::{deg_infinite_with, GalerkinOptions};
use crate::region::Region;
use crate::srep::{EquivariantSymOp, Layout, Rep};

pub const SUITES: [&str; 5] = ["ring", "invertibility", "oracle", "normalization", "stabilization"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Groups exercised by the ring suite.
pub fn ring_groups() -> Vec<GroupDescriptor> {
    let mut g = vec![GroupDescriptor::Circle];
    g.extend([2, 3, 4, 6, 8].map(GroupDescriptor::Cyclic));
    g
}

pub fn random_element<R: Rng>(group: GroupDescriptor, rng: &mut R) -> RingElement {
    let classes: Vec<SubgroupClass> = match group {
        GroupDescriptor::Circle => {
            let mut c = vec![SubgroupClass::Full];
            c.extend((1..=8).map(SubgroupClass::FiniteCyclic));
            c
        }
        GroupDescriptor::Cyclic(_) => group.divisors().into_iter().map(SubgroupClass::Divisor).collect(),
    };
    let terms: Vec<(SubgroupClass, i64)> = classes
        .into_iter()
        .filter(|_| rng.random_bool(0.6))
        .collect::<Vec<_>>()
        .into_iter()
        .map(|c| (c, rng.random_range(-6..=6)))
        .collect();
    RingElement::from_terms(group, terms).expect("classes of the group")
}

pub fn random_rep<R: Rng>(rng: &mut R) -> Rep {
    loop {
        let trivial = rng.random_range(0..=2);
        let modes: Vec<(u32, usize)> = (1..=4).map(|k| (k, rng.random_range(0..=2))).collect();
        let rep = Rep::new(trivial, modes);
        if !rep.is_zero() {
            return rep;
        }
    }
}

fn random_spectrum<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m: f64 = rng.random_range(0.3..2.5);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

/// Q·diag(λ)·Qᵀ with Q orthogonal and |λ| ≥ 0.3.
fn random_real_block<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(random_spectrum(rng, n)));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

fn random_hermitian_block<R: Rng>(rng: &mut R, n: usize) -> DMatrix<Complex<f64>> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let q = g.qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
        random_spectrum(rng, n).into_iter().map(|x| Complex::new(x, 0.0)).collect(),
    ));
    let m = &q * d * q.adjoint();
    (&m + m.adjoint()) * Complex::new(0.5, 0.0)
}

/// A random equivariant self-adjoint isomorphism on `rep`, spectrum bounded
/// away from zero.
pub fn random_sym_op<R: Rng>(rep: &Rep, rng: &mut R) -> EquivariantSymOp<f64> {
    let trivial = random_real_block(rng, rep.trivial);
    let modes: BTreeMap<u32, DMatrix<Complex<f64>>> = rep
        .modes()
        .iter()
        .filter(|(_, &n)| n > 0)
        .map(|(&k, &n)| (k, random_hermitian_block(rng, n)))
        .collect();
    EquivariantSymOp::new(rep.clone(), trivial, modes).expect("Hermitian blocks")
}

/// Coefficients of ∇φ for
/// φ(x) = Σ ¼xᵢ⁴ + ⅓sᵢxᵢ³ − ½aᵢxᵢ² + bᵢxᵢ + Σ_{i<j} cᵢⱼxᵢxⱼ on ℝ^d.
#[derive(Debug, Clone)]
pub struct RandomPotential {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: DMatrix<f64>,
}

impl RandomPotential {
    pub fn sample<R: Rng>(d: usize, rng: &mut R) -> Self {
        let mut c = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i + 1..d {
                let v = rng.random_range(-0.3..0.3);
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        RandomPotential {
            s: (0..d).map(|_| rng.random_range(-0.5..0.5)).collect(),
            a: (0..d).map(|_| rng.random_range(-1.0..2.0)).collect(),
            b: (0..d).map(|_| rng.random_range(-0.3..0.3)).collect(),
            c,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let xi = x[i];
                let coupling: f64 = x.iter().enumerate().map(|(j, &xj)| self.c[(i, j)] * xj).sum();
                xi * xi * xi + self.s[i] * xi * xi - self.a[i] * xi + self.b[i] + coupling
            })
            .collect()
    }

    pub fn field(&self, radius: f64) -> GradientField<f64> {
        let p = self.clone();
        GradientField::new(
            Layout::single(Rep::trivial(self.dim())),
            Region::centered_ball(self.dim(), radius),
            move |x: &[f64]| p.gradient(x),
        )
        .expect("invariant ball")
    }
}

/// ψ(x, w) = φ(x) + ½⟨Bw, w⟩ + κ·x₀|w|² on ℝ^d ⊕ W, W a sum of modes.
/// Zeros on the fixed space are those of ∇φ; their normal block is
/// B + 2κx₀.
pub fn random_nonlinear_field<R: Rng>(rng: &mut R) -> GradientField<f64> {
    let d = rng.random_range(1..=2);
    let pot = RandomPotential::sample(d, rng);
    let w_rep = Rep::new(0, [(rng.random_range(1..=3), 1), (rng.random_range(1..=3), 1)]);
    let b = random_sym_op(&w_rep, rng).to_real_matrix();
    let kappa: f64 = rng.random_range(-0.2..0.2);
    let layout = Layout::new(vec![Rep::trivial(d), w_rep]);
    GradientField::new(layout, Region::centered_ball(d + b.nrows(), 2.5), move |z: &[f64]| {
        let (x, w) = z.split_at(d);
        let w2: f64 = w.iter().map(|v| v * v).sum();
        let mut out = pot.gradient(x);
        out[0] += kappa * w2;
        let bw = &b * nalgebra::DVector::from_column_slice(w);
        out.extend(bw.iter().zip(w).map(|(v, wi)| v + 2.0 * kappa * x[0] * wi));
        out
    })
    .expect("invariant ball")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: String,
    pub passed: bool,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SuiteResult {
    fn new(suite: &str) -> Self {
        SuiteResult {
            suite: suite.into(),
            passed: true,
            checks: 0,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.passed = false;
            self.failures.push(what());
        }
    }
}

pub fn ring_suite(seed: u64, triples: usize) -> SuiteResult {
    let mut r = SuiteResult::new("ring");
    let mut g = rng(seed);
    for group in ring_groups() {
        let one = RingElement::unit(group);
        for _ in 0..triples {
            let (a, b, c) = (
                random_element(group, &mut g),
                random_element(group, &mut g),
                random_element(group, &mut g),
            );
            r.check((&(&a * &b) * &c) == (&a * &(&b * &c)), || format!("{group}: associativity at {a}, {b}, {c}"));
            r.check(&a * &(&b + &c) == &(&a * &b) + &(&a * &c), || format!("{group}: distributivity at {a}, {b}, {c}"));
            r.check(&a * &b == &b * &a, || format!("{group}: commutativity at {a}, {b}"));
            r.check(&a * &one == a, || format!("{group}: unit at {a}"));
        }
    }
    r
}

pub fn invertibility_suite(seed: u64, count: usize) -> SuiteResult {
    let mut r = SuiteResult::new("invertibility");
    let mut g = rng(seed);
    for _ in 0..count {
        let rep = random_rep(&mut g);
        let b = random_sym_op(&rep, &mut g);
        match linear_degree(&b) {
            Ok(d) => {
                let inv = d.invert();
                r.check(inv.as_ref().is_some_and(|i| &d * i == RingElement::unit(GroupDescriptor::Circle)), || {
                    format!("degree {d} of an isomorphism on {rep:?} is not invertible")
                })
            }
            Err(e) => r.check(false, || format!("linear_degree failed: {e}")),
        }
    }
    r
}

/// Random potentials on ℝ^d, d ≤ 3; draws whose zeros are degenerate or near
/// the boundary are redrawn (they are outside both methods' preconditions).
pub fn oracle_suite(seed: u64, count: usize) -> SuiteResult {
    let mut r = SuiteResult::new("oracle");
    let mut g = rng(seed);
    let mut accepted = 0;
    let mut draws = 0;
    while accepted < count && draws < 20 * count {
        draws += 1;
        let d = 1 + accepted % 3;
        let f = RandomPotential::sample(d, &mut g).field(2.5);
        let Ok(deg) = grad_degree(&f) else { continue };
        accepted += 1;
        match brouwer_oracle(&f) {
            Ok(o) => r.check(deg.full_coeff() == o.into(), || format!("d={d}: degree {deg}, oracle {o}")),
            Err(e) => r.check(false, || format!("oracle failed: {e}")),
        }
    }
    r.check(accepted == count, || format!("only {accepted} admissible draws"));
    r
}

pub fn normalization_suite(seed: u64) -> SuiteResult {
    let mut r = SuiteResult::new("normalization");
    let opts = GalerkinOptions::default().with_seed(seed);
    for (name, map) in normalization_instances() {
        match deg_infinite_with(&map, &opts) {
            Ok(d) => r.check(d.value.is_unit() && d.value == RingElement::unit(GroupDescriptor::Circle), || {
                format!("{name}: {}", d.value)
            }),
            Err(e) => r.check(false, || format!("{name}: {e}")),
        }
    }
    r
}

/// Every corpus instance at levels N, N+1, N+2, plus expected values and
/// limit-class consistency.
pub fn stabilization_suite(seed: u64) -> SuiteResult {
    let mut r = SuiteResult::new("stabilization");
    let opts = GalerkinOptions::default().with_seed(seed).with_depth(2);
    for inst in corpus() {
        match deg_infinite_with(&inst.map, &opts) {
            Ok(d) => {
                if let Some(e) = &inst.expected {
                    r.check(&d.value == e, || format!("{}: expected {e}, got {}", inst.name, d.value));
                }
                r.check(d.stabilization.0 == d.value && d.stabilization.1 == d.value, || {
                    format!("{}: levels disagree", inst.name)
                });
                let ok = limit_class_equal(&d.limit_class, &d.normalized_class()).unwrap_or(false);
                r.check(ok, || format!("{}: limit class mismatch", inst.name));
            }
            Err(e) => r.check(false, || format!("{}: {e}", inst.name)),
        }
    }
    r
}

pub fn run_suite(name: &str, seed: u64) -> Option<SuiteResult> {
    Some(match name {
        "ring" => ring_suite(seed, 200),
        "invertibility" => invertibility_suite(seed, 50),
        "oracle" => oracle_suite(seed, 6),
        "normalization" => normalization_suite(seed),
        "stabilization" => stabilization_suite(seed),
        _ => return None,
    })
}

pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    SUITES.iter().filter_map(|s| run_suite(s, seed)).collect()
}
