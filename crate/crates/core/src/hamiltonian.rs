//! Periodic orbits of autonomous Hamiltonian systems ż = 𝒥∇H(z) on ℝ^{2n}.
//!
//! Loops have length 2π and the period parameter λ is folded into the
//! nonlinearity: zeros of f_λ(z) = −𝒥ż − λ∇H(z) are 2π-periodic loops that
//! rescale to 2πλ-periodic solutions. Phase variables are ordered
//! z = (p₁, …, p_n, q₁, …, q_n) and 𝒥(p, q) = (−q, p).
//!
//! Coordinates of V_N follow the eigenbasis of A = −𝒥 d/dt, orthonormal in
//! L²(0, 2π): the kernel carries √(2π)·c₀; the ±k eigenspaces carry
//! √(π/2)·(a·u + b·v) for the basis loops (u cos kt + v sin kt)/√(2π), with
//! time shift acting as rotation by kθ in every (re, im) pair.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::euler_ring::{GroupDescriptor, RingElement, SubgroupClass};
use crate::galerkin::{
    deg_infinite_with, DegreeResult, GalerkinError, GalerkinOptions, GraphDomain, Levels, LocalMapSpec,
    Nonlinearity, SharedNonlinearity,
};
use crate::scalar::Scalar;
use crate::srep::{Eigenspace, Rep, RepError, SpectralOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("invalid Hamiltonian: {0}")]
    InvalidSpec(String),
    #[error("quadrature size {size} is below the alias-free bound {required}")]
    AliasingRisk { size: usize, required: usize },
    #[error("zero set is not compact in the domain: {0}")]
    NoncompactZeroSet(String),
    #[error("degree changes inside the crossing-free segment {lo}..{hi}: {a} vs {b}")]
    SegmentMismatch { lo: f64, hi: f64, a: String, b: String },
    #[error(transparent)]
    Galerkin(#[from] GalerkinError),
}

/// c · Π z_i^{e_i}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTerm {
    pub exps: Vec<u32>,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub dof: usize,
    pub terms: Vec<HamiltonianTerm>,
    pub lambda: f64,
}

impl HamiltonianSpec {
    pub fn new(dof: usize, terms: Vec<HamiltonianTerm>, lambda: f64) -> Result<Self, HamiltonianError> {
        let spec = HamiltonianSpec { dof, terms, lambda };
        spec.validate()?;
        Ok(spec)
    }

    /// H = ½|z|².
    pub fn harmonic(dof: usize, lambda: f64) -> Self {
        Self::quadratic(&DMatrix::identity(2 * dof, 2 * dof), lambda)
    }

    /// H = ½⟨Sz, z⟩ for symmetric S.
    pub fn quadratic(s: &DMatrix<f64>, lambda: f64) -> Self {
        let d = s.nrows();
        let mut terms = Vec::new();
        for i in 0..d {
            for j in i..d {
                let c = if i == j { 0.5 * s[(i, i)] } else { 0.5 * (s[(i, j)] + s[(j, i)]) };
                if c != 0.0 {
                    let mut exps = vec![0; d];
                    exps[i] += 1;
                    exps[j] += 1;
                    terms.push(HamiltonianTerm { exps, coeff: c });
                }
            }
        }
        HamiltonianSpec {
            dof: d / 2,
            terms,
            lambda,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        HamiltonianSpec {
            lambda,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), HamiltonianError> {
        if self.dof == 0 {
            return Err(HamiltonianError::InvalidSpec("dof must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(HamiltonianError::InvalidSpec(format!("lambda must be positive, got {}", self.lambda)));
        }
        for t in &self.terms {
            if t.exps.len() != 2 * self.dof {
                return Err(HamiltonianError::InvalidSpec(format!(
                    "term exponents have length {}, expected {}",
                    t.exps.len(),
                    2 * self.dof
                )));
            }
            if !t.coeff.is_finite() {
                return Err(HamiltonianError::InvalidSpec("non-finite coefficient".into()));
            }
        }
        Ok(())
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .filter(|t| t.coeff != 0.0)
            .map(|t| t.exps.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn value<T: Scalar>(&self, z: &[T]) -> T {
        self.terms.iter().fold(T::zero(), |acc, t| {
            acc + t
                .exps
                .iter()
                .zip(z)
                .fold(T::lit(t.coeff), |v, (&e, &x)| v * x.powi(e as i32))
        })
    }

    pub fn gradient<T: Scalar>(&self, z: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); z.len()];
        for t in &self.terms {
            for (i, &ei) in t.exps.iter().enumerate() {
                if ei == 0 {
                    continue;
                }
                let mut v = T::lit(t.coeff * ei as f64);
                for (j, (&e, &x)) in t.exps.iter().zip(z).enumerate() {
                    let p = if j == i { e - 1 } else { e };
                    if p > 0 {
                        v *= x.powi(p as i32);
                    }
                }
                g[i] += v;
            }
        }
        g
    }

    pub fn hessian<T: Scalar>(&self, z: &[T]) -> DMatrix<T> {
        let d = z.len();
        let mut h = DMatrix::zeros(d, d);
        for t in &self.terms {
            for i in 0..d {
                for j in 0..d {
                    let (ei, ej) = (t.exps[i], t.exps[j]);
                    let c = if i == j {
                        if ei < 2 {
                            continue;
                        }
                        (ei * (ei - 1)) as f64
                    } else {
                        if ei == 0 || ej == 0 {
                            continue;
                        }
                        (ei * ej) as f64
                    };
                    let mut v = T::lit(t.coeff * c);
                    for (k, (&e, &x)) in t.exps.iter().zip(z).enumerate() {
                        let p = if k == i && k == j {
                            e - 2
                        } else if k == i || k == j {
                            e - 1
                        } else {
                            e
                        };
                        if p > 0 {
                            v *= x.powi(p as i32);
                        }
                    }
                    h[(i, j)] += v;
                }
            }
        }
        h
    }
}

/// The loop z(t) = c₀ + Σ_{k=1}^{N} (a_k cos kt + b_k sin kt) in ℝ^{2n}.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopState<T: Scalar> {
    pub c0: Vec<T>,
    pub a: Vec<Vec<T>>,
    pub b: Vec<Vec<T>>,
}

impl<T: Scalar> LoopState<T> {
    pub fn zero(dof: usize, modes: usize) -> Self {
        LoopState {
            c0: vec![T::zero(); 2 * dof],
            a: vec![vec![T::zero(); 2 * dof]; modes],
            b: vec![vec![T::zero(); 2 * dof]; modes],
        }
    }

    pub fn constant(c: Vec<T>) -> Self {
        LoopState {
            c0: c,
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    pub fn dof(&self) -> usize {
        self.c0.len() / 2
    }

    pub fn modes(&self) -> usize {
        self.a.len()
    }

    pub fn eval(&self, t: T) -> Vec<T> {
        let mut z = self.c0.clone();
        for (k, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            let kt = T::of_usize(k + 1) * t;
            let (s, c) = (kt.sin(), kt.cos());
            for i in 0..z.len() {
                z[i] += a[i] * c + b[i] * s;
            }
        }
        z
    }

    /// ∫₀^{2π} ⟨u, v⟩ dt.
    pub fn l2_inner(&self, other: &Self) -> T {
        let dot = |x: &[T], y: &[T]| x.iter().zip(y).fold(T::zero(), |s, (&p, &q)| s + p * q);
        let mut s = T::lit(TAU) * dot(&self.c0, &other.c0);
        for k in 0..self.modes().min(other.modes()) {
            s += T::lit(PI) * (dot(&self.a[k], &other.a[k]) + dot(&self.b[k], &other.b[k]));
        }
        s
    }

    /// (∫|z|² + ∫|ż|²)^{1/2}, the H¹ norm, equal to the graph norm of A.
    pub fn graph_norm(&self) -> T {
        let sq = |x: &[T]| x.iter().fold(T::zero(), |s, &p| s + p * p);
        let mut s = T::lit(TAU) * sq(&self.c0);
        for k in 0..self.modes() {
            let w = T::one() + T::of_usize((k + 1) * (k + 1));
            s += T::lit(PI) * w * (sq(&self.a[k]) + sq(&self.b[k]));
        }
        s.sqrt()
    }

    /// t ↦ z(t + θ).
    pub fn shift(&self, theta: T) -> Self {
        let mut out = self.clone();
        for k in 0..self.modes() {
            let kt = T::of_usize(k + 1) * theta;
            let (s, c) = (kt.sin(), kt.cos());
            for i in 0..self.c0.len() {
                let (a, b) = (self.a[k][i], self.b[k][i]);
                out.a[k][i] = a * c + b * s;
                out.b[k][i] = -a * s + b * c;
            }
        }
        out
    }

    pub fn axpy(&self, h: T, other: &Self) -> Self {
        let add = |x: &[T], y: &[T]| -> Vec<T> { x.iter().zip(y).map(|(&p, &q)| p + h * q).collect() };
        LoopState {
            c0: add(&self.c0, &other.c0),
            a: self.a.iter().zip(&other.a).map(|(x, y)| add(x, y)).collect(),
            b: self.b.iter().zip(&other.b).map(|(x, y)| add(x, y)).collect(),
        }
    }

    /// Coordinates in V_N of the loop operator, N = modes().
    pub fn to_coords(&self) -> Vec<T> {
        let n = self.dof();
        let r0 = T::lit(TAU.sqrt());
        let rk = T::lit((PI / 2.0).sqrt());
        let mut x: Vec<T> = self.c0.iter().map(|&c| r0 * c).collect();
        for (a, b) in self.a.iter().zip(&self.b) {
            let (ap, aq, bp, bq) = (&a[..n], &a[n..], &b[..n], &b[n..]);
            // −k: re ↦ (e_p, −e_q), im ↦ (−e_q, −e_p)
            for j in 0..n {
                x.push(rk * (ap[j] - bq[j]));
                x.push(rk * (-aq[j] - bp[j]));
            }
            // +k: re ↦ (e_p, e_q), im ↦ (e_q, −e_p)
            for j in 0..n {
                x.push(rk * (ap[j] + bq[j]));
                x.push(rk * (aq[j] - bp[j]));
            }
        }
        x
    }

    pub fn from_coords(dof: usize, x: &[T]) -> Self {
        let n = dof;
        let per = 4 * n;
        assert!(x.len() >= 2 * n && (x.len() - 2 * n).is_multiple_of(per), "coordinate vector length");
        let modes = (x.len() - 2 * n) / per;
        let r0 = T::one() / T::lit(TAU.sqrt());
        let rk = T::one() / T::lit(TAU.sqrt());
        let mut s = LoopState::zero(dof, modes);
        for i in 0..2 * n {
            s.c0[i] = r0 * x[i];
        }
        for k in 0..modes {
            let base = 2 * n + k * per;
            let (a, b) = (&mut s.a[k], &mut s.b[k]);
            for j in 0..n {
                let (re, im) = (x[base + 2 * j], x[base + 2 * j + 1]);
                a[j] += rk * re;
                b[n + j] -= rk * re;
                a[n + j] -= rk * im;
                b[j] -= rk * im;
                let (re, im) = (x[base + 2 * n + 2 * j], x[base + 2 * n + 2 * j + 1]);
                a[j] += rk * re;
                b[n + j] += rk * re;
                a[n + j] += rk * im;
                b[j] -= rk * im;
            }
        }
        s
    }
}

/// A = −𝒥 d/dt on L²(S¹, ℝ^{2n}): kernel ℝ^{2n}, eigenvalues ±k on (0, {k: n}).
pub fn loop_operator<T: Scalar>(dof: usize) -> SpectralOperator<T> {
    assert!(dof >= 1, "dof must be at least 1");
    SpectralOperator::from_generator(format!("loop(dof={dof})"), move |k| {
        if k == 0 {
            vec![Eigenspace::new(T::zero(), Rep::trivial(2 * dof))]
        } else {
            let rep = Rep::mode(k as u32, dof);
            let v = T::of_usize(k);
            vec![Eigenspace::new(-v, rep.clone()), Eigenspace::new(v, rep)]
        }
    })
}

/// Smallest alias-free quadrature size for projecting ∇H∘z (z with `modes`
/// modes) onto modes ≤ `out`.
pub fn quadrature_bound(degree: u32, modes: usize, out: usize) -> usize {
    (degree.saturating_sub(1) as usize) * modes + out + 1
}

/// The bound rounded up to a power of two.
pub fn quadrature_size(degree: u32, modes: usize, out: usize) -> usize {
    quadrature_bound(degree, modes, out).next_power_of_two()
}

/// P_N ∇φ(z) for φ(z) = ∫₀^{2π} H(z(t)) dt, with N the number of modes of z.
#[allow(non_snake_case)]
pub fn grad_H<T: Scalar>(
    spec: &HamiltonianSpec,
    state: &LoopState<T>,
    quadrature_size: usize,
) -> Result<LoopState<T>, HamiltonianError> {
    grad_h_to(spec, state, state.modes(), quadrature_size)
}

/// P_out ∇φ(z).
pub fn grad_h_to<T: Scalar>(
    spec: &HamiltonianSpec,
    state: &LoopState<T>,
    out: usize,
    m: usize,
) -> Result<LoopState<T>, HamiltonianError> {
    let required = quadrature_bound(spec.degree(), state.modes(), out);
    if m < required {
        return Err(HamiltonianError::AliasingRisk { size: m, required });
    }
    let d = state.c0.len();
    let times: Vec<T> = (0..m).map(|j| T::lit(TAU * j as f64 / m as f64)).collect();
    let grads: Vec<Vec<T>> = times.iter().map(|&t| spec.gradient(&state.eval(t))).collect();
    let inv = T::one() / T::of_usize(m);
    let mut res = LoopState::zero(d / 2, out);
    for (g, &t) in grads.iter().zip(&times) {
        for i in 0..d {
            res.c0[i] += g[i] * inv;
        }
        for k in 0..out {
            let kt = T::of_usize(k + 1) * t;
            let (s, c) = (kt.sin(), kt.cos());
            for i in 0..d {
                res.a[k][i] += T::lit(2.0) * inv * g[i] * c;
                res.b[k][i] += T::lit(2.0) * inv * g[i] * s;
            }
        }
    }
    Ok(res)
}

/// Quadrature of φ(z) = ∫₀^{2π} H(z(t)) dt on m points.
pub fn action<T: Scalar>(spec: &HamiltonianSpec, state: &LoopState<T>, m: usize) -> T {
    let h = T::lit(TAU / m as f64);
    (0..m).fold(T::zero(), |acc, j| {
        acc + h * spec.value(&state.eval(T::lit(TAU * j as f64 / m as f64)))
    })
}

/// F = λ·∇φ in loop-operator coordinates.
#[derive(Debug, Clone)]
pub struct HamiltonianNonlinearity {
    spec: HamiltonianSpec,
}

impl HamiltonianNonlinearity {
    pub fn new(spec: HamiltonianSpec) -> Self {
        HamiltonianNonlinearity { spec }
    }
}

impl<T: Scalar> Nonlinearity<T> for HamiltonianNonlinearity {
    fn eval(&self, _lv: &Levels<T>, x: &[T], level: usize, out: usize) -> Vec<T> {
        let state = LoopState::from_coords(self.spec.dof, x);
        let m = quadrature_size(self.spec.degree(), level, out);
        let g = grad_h_to(&self.spec, &state, out, m).expect("alias-free quadrature");
        let lam = T::lit(self.spec.lambda);
        g.to_coords().into_iter().map(|v| lam * v).collect()
    }

    fn is_affine(&self) -> bool {
        self.spec.degree() <= 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    PeriodicSolutionCertified,
    NoCertificate,
}

impl Verdict {
    pub fn describe(&self, lambda: f64) -> String {
        match self {
            Verdict::PeriodicSolutionCertified => format!(
                "periodic solution certified: nonzero degree gives a {:.6}-periodic solution (period 2π·λ, λ = {lambda})",
                TAU * lambda
            ),
            Verdict::NoCertificate => "no certificate: the degree vanishes".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExistenceReport {
    pub result: DegreeResult,
    pub verdict: Verdict,
}

/// The local map f_λ = A − λ∇φ on the graph-norm ball of radius R.
pub fn hamiltonian_map(spec: &HamiltonianSpec, radius: f64) -> Result<LocalMapSpec<f64>, HamiltonianError> {
    spec.validate()?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(HamiltonianError::InvalidSpec(format!("radius must be positive, got {radius}")));
    }
    let f: SharedNonlinearity<f64> = Arc::new(HamiltonianNonlinearity::new(spec.clone()));
    Ok(LocalMapSpec::new(loop_operator(spec.dof), f, GraphDomain::centered_ball(radius)))
}

pub fn periodic_existence(spec: &HamiltonianSpec, radius: f64) -> Result<ExistenceReport, HamiltonianError> {
    periodic_existence_with(spec, radius, &GalerkinOptions::default())
}

pub fn periodic_existence_with(
    spec: &HamiltonianSpec,
    radius: f64,
    opts: &GalerkinOptions,
) -> Result<ExistenceReport, HamiltonianError> {
    let f = hamiltonian_map(spec, radius)?;
    let result = deg_infinite_with(&f, opts).map_err(noncompact)?;
    let verdict = if result.value.is_zero() {
        Verdict::NoCertificate
    } else {
        Verdict::PeriodicSolutionCertified
    };
    Ok(ExistenceReport { result, verdict })
}

fn noncompact(e: GalerkinError) -> HamiltonianError {
    use crate::findim::DegreeError;
    match e {
        GalerkinError::BoundaryZero { .. } | GalerkinError::Degree(DegreeError::BoundaryZero { .. }) => {
            HamiltonianError::NoncompactZeroSet(e.to_string())
        }
        e => HamiltonianError::Galerkin(e),
    }
}

/// Negative part of the linearization A − λ·∇²H(0) on each mode 0..=k_max,
/// as a representation (mode k counted in complex dimension).
pub fn linearized_negative_part(spec: &HamiltonianSpec, k_max: usize) -> Result<Rep, RepError> {
    let d = 2 * spec.dof;
    let n = spec.dof;
    let s: DMatrix<f64> = spec.hessian(&vec![0.0; d]) * spec.lambda;
    let count = |m: &DMatrix<f64>| -> Result<usize, RepError> {
        let eig = m.clone().symmetric_eigenvalues();
        let scale = m.norm().max(1.0);
        let mut neg = 0;
        for &e in eig.iter() {
            if e.abs() <= crate::srep::SINGULAR_TOL * scale {
                return Err(RepError::NearSingular {
                    what: "linearization".into(),
                    eigenvalue: e,
                    norm: scale,
                });
            }
            if e < 0.0 {
                neg += 1;
            }
        }
        Ok(neg)
    };
    let m0 = count(&(-&s))?;
    let mut modes = Vec::new();
    for k in 1..=k_max {
        let kf = k as f64;
        let mut b = DMatrix::zeros(2 * d, 2 * d);
        // A on (a, b): k·[[0, −𝒥], [𝒥, 0]]
        for j in 0..n {
            // 𝒥 e_p = e_q, 𝒥 e_q = −e_p
            b[(n + j, d + j)] = -kf; // a' = −k𝒥b: e_p-part of b ↦ −k e_q in a
            b[(j, d + n + j)] = kf;
            b[(d + n + j, j)] = kf; // b' = k𝒥a
            b[(d + j, n + j)] = -kf;
        }
        b.view_mut((0, 0), (d, d)).zip_apply(&s, |x, y| *x -= y);
        b.view_mut((d, d), (d, d)).zip_apply(&s, |x, y| *x -= y);
        let neg = count(&b)?;
        modes.push((k as u32, neg / 2));
    }
    Ok(Rep::new(m0, modes))
}

/// Modes at which A − λ∇²H(0) can lose or gain negative directions.
pub fn relevant_modes(spec: &HamiltonianSpec) -> usize {
    let s: DMatrix<f64> = spec.hessian(&vec![0.0; 2 * spec.dof]);
    (spec.lambda * s.norm()).ceil() as usize + 1
}

/// Closed-form degree of A − λ∇²H(0) when H is quadratic:
/// (−1)^{m₀}(1 − Σ_k (m_k − n)[S¹/ℤ_k]), m the negative part per mode.
pub fn quadratic_degree(spec: &HamiltonianSpec) -> Result<RingElement, RepError> {
    let k_max = relevant_modes(spec);
    let neg = linearized_negative_part(spec, k_max)?;
    let n = spec.dof as i64;
    let mut terms = vec![(SubgroupClass::Full, 1i64)];
    for (&k, &m) in neg.modes() {
        if m as i64 != n {
            terms.push((SubgroupClass::FiniteCyclic(k as u64), n - m as i64));
        }
    }
    let v = RingElement::from_terms(GroupDescriptor::Circle, terms).expect("S¹ classes");
    Ok(if neg.trivial % 2 == 1 { -v } else { v })
}

#[derive(Debug, Clone)]
pub struct JumpRow {
    pub lambda: f64,
    pub value: RingElement,
    pub segment: usize,
}

#[derive(Debug, Clone)]
pub struct DegreeJumpTable {
    pub rows: Vec<JumpRow>,
    /// (λ before, λ after, value before, value after) at each crossing.
    pub jumps: Vec<(f64, f64, RingElement, RingElement)>,
}

/// Degrees over a λ grid; constant between crossings of the linearization.
pub fn degree_jump(
    spec: &HamiltonianSpec,
    lambdas: &[f64],
    radius: f64,
    opts: &GalerkinOptions,
) -> Result<DegreeJumpTable, HamiltonianError> {
    let mut grid = lambdas.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite λ"));
    let values: Vec<RingElement> = grid
        .par_iter()
        .map(|&l| periodic_existence_with(&spec.with_lambda(l), radius, opts).map(|r| r.result.value))
        .collect::<Result<_, _>>()?;
    let k_max = grid.iter().map(|&l| relevant_modes(&spec.with_lambda(l))).max().unwrap_or(1);
    let parts: Vec<Rep> = grid
        .iter()
        .map(|&l| linearized_negative_part(&spec.with_lambda(l), k_max))
        .collect::<Result<_, _>>()
        .map_err(|e| HamiltonianError::Galerkin(e.into()))?;
    let mut rows = Vec::new();
    let mut jumps = Vec::new();
    let mut segment = 0;
    for i in 0..grid.len() {
        if i > 0 {
            if parts[i] != parts[i - 1] {
                segment += 1;
                if values[i] != values[i - 1] {
                    jumps.push((grid[i - 1], grid[i], values[i - 1].clone(), values[i].clone()));
                }
            } else if values[i] != values[i - 1] {
                return Err(HamiltonianError::SegmentMismatch {
                    lo: grid[i - 1],
                    hi: grid[i],
                    a: values[i - 1].to_string(),
                    b: values[i].to_string(),
                });
            }
        }
        rows.push(JumpRow {
            lambda: grid[i],
            value: values[i].clone(),
            segment,
        });
    }
    Ok(DegreeJumpTable { rows, jumps })
}
