//! Galerkin truncation over spectral shells and the degree of
//! f = A − F, F = ∇φ, on a bounded invariant domain of E₁.
//!
//! At level n the map f_n(x) = Ax − P_nF(x) lives on V_n = V⁰ ⊕ … ⊕ Vⁿ and
//!
//! ```text
//!     Deg(f) = m_n · deg(f_n, U_n),   m_n = a₁⁻¹ ⋯ a_n⁻¹,   a_i = deg(A_i)
//! ```
//!
//! for every n past a certified level N. The margin ε and the tail of F are
//! estimated by boundary sampling, not proved: compactness of the zero set
//! and the size of the tail beyond the reference level are assumptions.

use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::euler_ring::{
    DirectLimitClass, GroupDescriptor, RingElement, RingError, SerializedTerm,
};
use crate::findim::{grad_degree_detailed, linear_degree, DegreeError, GradientField, SearchOptions};
use crate::numeric::levenberg_marquardt;
use crate::region::Region;
use crate::scalar::{norm, Scalar};
use crate::srep::{direct_sum_index_maps, Layout, RepError, SpectralOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GalerkinError {
    #[error(transparent)]
    Rep(#[from] RepError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Degree(#[from] DegreeError),
    #[error("shell degree a_{level} = {value} is not invertible")]
    NotInvertible { level: usize, value: String },
    #[error("margin failure at level {level}: tail bound {tail_bound:.3e} >= epsilon {epsilon:.3e}")]
    MarginFailure {
        level: usize,
        epsilon: f64,
        tail_bound: f64,
    },
    #[error("boundary zero at level {level}: |f| = {norm:.3e} on the domain boundary")]
    BoundaryZero { level: usize, norm: f64, at: Vec<f64> },
    #[error("stabilization failure at level {level}: values {values:?} differ")]
    StabilizationFailure { level: usize, values: Vec<String> },
    #[error("no certified level in {start}..={max}: {last}")]
    NoCertifiedLevel {
        start: usize,
        max: usize,
        last: Box<GalerkinError>,
    },
    #[error("otopy slice at t = {t} failed: {reason}")]
    SliceMarginFailure { t: f64, reason: String },
    #[error("nonlinearity is not equivariant: defect {defect:.3e}")]
    NotEquivariant { defect: f64 },
    #[error("nonlinearity returned non-finite values at level {level}")]
    NonFinite { level: usize },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
}

/// Per-level data of a spectral operator up to a maximal level: V_n is a
/// coordinate prefix of V_{n+1}, so one eigenvalue list serves every level.
#[derive(Debug, Clone)]
pub struct Levels<T: Scalar> {
    op: SpectralOperator<T>,
    dims: Vec<usize>,
    diag: Vec<T>,
    layouts: Vec<Layout>,
}

impl<T: Scalar> Levels<T> {
    pub fn new(op: &SpectralOperator<T>, max_level: usize) -> Result<Self, RepError> {
        let mut dims = Vec::with_capacity(max_level + 1);
        let mut diag = Vec::new();
        let mut layouts = Vec::with_capacity(max_level + 1);
        let mut blocks = Vec::new();
        for n in 0..=max_level {
            for e in op.shell(n)? {
                diag.extend(std::iter::repeat_n(e.value, e.layout.dim()));
                blocks.extend(e.layout.blocks().iter().cloned());
            }
            dims.push(diag.len());
            layouts.push(Layout::new(blocks.clone()));
        }
        Ok(Levels {
            op: op.clone(),
            dims,
            diag,
            layouts,
        })
    }

    pub fn operator(&self) -> &SpectralOperator<T> {
        &self.op
    }

    pub fn max_level(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn dim(&self, n: usize) -> usize {
        self.dims[n]
    }

    /// Eigenvalue at each coordinate of V_n.
    pub fn diag(&self, n: usize) -> &[T] {
        &self.diag[..self.dims[n]]
    }

    pub fn layout(&self, n: usize) -> &Layout {
        &self.layouts[n]
    }
}

/// The gradient F = ∇φ of an invariant functional, seen through its Galerkin
/// projections. Coordinates are those of the operator's eigenbasis.
pub trait Nonlinearity<T: Scalar>: Send + Sync {
    /// P_out F(x) for x ∈ V_level, `out ≥ level`.
    fn eval(&self, lv: &Levels<T>, x: &[T], level: usize, out: usize) -> Vec<T>;

    /// D(P_level F)(x) on V_level, when known in closed form.
    fn jacobian(&self, _lv: &Levels<T>, _x: &[T], _level: usize) -> Option<DMatrix<T>> {
        None
    }

    /// F(x) = Lx + c with L linear.
    fn is_affine(&self) -> bool {
        false
    }
}

pub type SharedNonlinearity<T> = Arc<dyn Nonlinearity<T>>;

/// F acting on each eigenspace V(λ) as multiplication by g(λ), plus an
/// optional constant S¹-fixed vector.
#[derive(Clone)]
pub struct SpectralMultiplier<T: Scalar> {
    g: Arc<dyn Fn(T) -> T + Send + Sync>,
    constant: Vec<T>,
}

impl<T: Scalar> SpectralMultiplier<T> {
    pub fn new<G: Fn(T) -> T + Send + Sync + 'static>(g: G) -> Self {
        SpectralMultiplier {
            g: Arc::new(g),
            constant: Vec::new(),
        }
    }

    /// F = c·I, so f = A − c·I.
    pub fn scalar(c: T) -> Self {
        Self::new(move |_| c)
    }

    /// F = −P₀, so f = A + P₀.
    pub fn minus_kernel_projection() -> Self {
        Self::new(|l: T| if l == T::zero() { -T::one() } else { T::zero() })
    }

    pub fn zero() -> Self {
        Self::new(|_| T::zero())
    }

    /// Adds a constant vector (global coordinates, zero-padded).
    pub fn with_constant(mut self, c: Vec<T>) -> Self {
        self.constant = c;
        self
    }
}

impl<T: Scalar> Nonlinearity<T> for SpectralMultiplier<T> {
    fn eval(&self, lv: &Levels<T>, x: &[T], _level: usize, out: usize) -> Vec<T> {
        let d = lv.diag(out);
        let mut y: Vec<T> = d.iter().zip(x).map(|(&l, &v)| (self.g)(l) * v).collect();
        y.resize(d.len(), T::zero());
        for (yi, &c) in y.iter_mut().zip(&self.constant) {
            *yi += c;
        }
        y
    }

    fn jacobian(&self, lv: &Levels<T>, _x: &[T], level: usize) -> Option<DMatrix<T>> {
        let d: Vec<T> = lv.diag(level).iter().map(|&l| (self.g)(l)).collect();
        Some(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)))
    }

    fn is_affine(&self) -> bool {
        true
    }
}

/// One term c·Π x_i^{p_i} of a polynomial potential in global coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub vars: Vec<(usize, u32)>,
    pub coeff: f64,
}

/// F = ∇φ for a polynomial potential φ in the global eigen-coordinates.
/// Invariance of φ is the caller's responsibility (checked on samples).
#[derive(Debug, Clone)]
pub struct PolynomialGradient {
    terms: Vec<Monomial>,
}

impl PolynomialGradient {
    pub fn new(terms: Vec<Monomial>) -> Self {
        let terms = terms
            .into_iter()
            .map(|mut m| {
                // merge repeated variables so each index appears once
                let mut merged: std::collections::BTreeMap<usize, u32> = Default::default();
                for &(i, p) in &m.vars {
                    *merged.entry(i).or_default() += p;
                }
                m.vars = merged.into_iter().filter(|&(_, p)| p > 0).collect();
                m
            })
            .filter(|m| m.coeff != 0.0)
            .collect();
        PolynomialGradient { terms }
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|m| m.vars.iter().map(|&(_, p)| p).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.iter().flat_map(|m| m.vars.iter().map(|&(i, _)| i)).max()
    }

    fn value_at<T: Scalar>(x: &[T], i: usize) -> T {
        x.get(i).copied().unwrap_or(T::zero())
    }

    /// Π_{j≠skip} x_j^{p_j}, with x_skip raised to p_skip − dec.
    fn partial<T: Scalar>(m: &Monomial, x: &[T], skip: usize, dec: u32) -> T {
        let mut v = T::lit(m.coeff);
        for (j, &(i, p)) in m.vars.iter().enumerate() {
            let e = if j == skip { p - dec } else { p };
            if e > 0 {
                v *= Self::value_at(x, i).powi(e as i32);
            }
        }
        v
    }
}

impl<T: Scalar> Nonlinearity<T> for PolynomialGradient {
    fn eval(&self, lv: &Levels<T>, x: &[T], _level: usize, out: usize) -> Vec<T> {
        let mut y = vec![T::zero(); lv.dim(out)];
        for m in &self.terms {
            for (j, &(i, p)) in m.vars.iter().enumerate() {
                if i < y.len() {
                    y[i] += T::lit(p as f64) * Self::partial(m, x, j, 1);
                }
            }
        }
        y
    }

    fn jacobian(&self, lv: &Levels<T>, x: &[T], level: usize) -> Option<DMatrix<T>> {
        let n = lv.dim(level);
        let mut h = DMatrix::zeros(n, n);
        for m in &self.terms {
            for (a, &(i, p)) in m.vars.iter().enumerate() {
                if i >= n {
                    continue;
                }
                for (b, &(k, q)) in m.vars.iter().enumerate() {
                    if k >= n {
                        continue;
                    }
                    let v = if a == b {
                        if p < 2 {
                            continue;
                        }
                        T::lit((p * (p - 1)) as f64) * Self::partial(m, x, a, 2)
                    } else {
                        let mut v = T::lit(m.coeff * (p * q) as f64);
                        for (c, &(l, r)) in m.vars.iter().enumerate() {
                            let e = if c == a {
                                p - 1
                            } else if c == b {
                                q - 1
                            } else {
                                r
                            };
                            if e > 0 {
                                v *= Self::value_at(x, l).powi(e as i32);
                            }
                        }
                        v
                    };
                    h[(i, k)] += v;
                }
            }
        }
        Some(h)
    }

    fn is_affine(&self) -> bool {
        self.degree() <= 2
    }
}

pub type NonlinearityFn<T> = Arc<dyn Fn(&Levels<T>, &[T], usize, usize) -> Vec<T> + Send + Sync>;

/// A nonlinearity given by a closure (lv, x, level, out) ↦ P_out F(x).
#[derive(Clone)]
pub struct FnNonlinearity<T: Scalar> {
    f: NonlinearityFn<T>,
    affine: bool,
}

impl<T: Scalar> FnNonlinearity<T> {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&Levels<T>, &[T], usize, usize) -> Vec<T> + Send + Sync + 'static,
    {
        FnNonlinearity {
            f: Arc::new(f),
            affine: false,
        }
    }

    pub fn affine(mut self) -> Self {
        self.affine = true;
        self
    }
}

impl<T: Scalar> Nonlinearity<T> for FnNonlinearity<T> {
    fn eval(&self, lv: &Levels<T>, x: &[T], level: usize, out: usize) -> Vec<T> {
        (self.f)(lv, x, level, out)
    }

    fn is_affine(&self) -> bool {
        self.affine
    }
}

/// Σ c_j F_j.
#[derive(Clone)]
pub struct LinearCombination<T: Scalar> {
    parts: Vec<(T, SharedNonlinearity<T>)>,
}

impl<T: Scalar> LinearCombination<T> {
    pub fn new(parts: Vec<(T, SharedNonlinearity<T>)>) -> Self {
        LinearCombination { parts }
    }

    /// (1 − t)·F + t·G.
    pub fn interpolate(f: SharedNonlinearity<T>, g: SharedNonlinearity<T>, t: T) -> Self {
        Self::new(vec![(T::one() - t, f), (t, g)])
    }
}

impl<T: Scalar> Nonlinearity<T> for LinearCombination<T> {
    fn eval(&self, lv: &Levels<T>, x: &[T], level: usize, out: usize) -> Vec<T> {
        let mut y = vec![T::zero(); lv.dim(out)];
        for (c, f) in &self.parts {
            if *c == T::zero() {
                continue;
            }
            for (yi, v) in y.iter_mut().zip(f.eval(lv, x, level, out)) {
                *yi += *c * v;
            }
        }
        y
    }

    fn jacobian(&self, lv: &Levels<T>, x: &[T], level: usize) -> Option<DMatrix<T>> {
        let n = lv.dim(level);
        let mut h = DMatrix::zeros(n, n);
        for (c, f) in &self.parts {
            if *c != T::zero() {
                h += f.jacobian(lv, x, level)? * *c;
            }
        }
        Some(h)
    }

    fn is_affine(&self) -> bool {
        self.parts.iter().all(|(_, f)| f.is_affine())
    }
}

struct ProductCache<T: Scalar> {
    left: Levels<T>,
    right: Levels<T>,
    maps: Vec<(Vec<usize>, Vec<usize>)>,
}

/// F × F' on E ⊕ E', in the coordinates of the direct-sum operator.
pub struct ProductNonlinearity<T: Scalar> {
    left: (SpectralOperator<T>, SharedNonlinearity<T>),
    right: (SpectralOperator<T>, SharedNonlinearity<T>),
    cache: RwLock<Option<Arc<ProductCache<T>>>>,
}

impl<T: Scalar> ProductNonlinearity<T> {
    pub fn new(
        left: (SpectralOperator<T>, SharedNonlinearity<T>),
        right: (SpectralOperator<T>, SharedNonlinearity<T>),
    ) -> Self {
        ProductNonlinearity {
            left,
            right,
            cache: RwLock::new(None),
        }
    }

    fn cache(&self, level: usize) -> Arc<ProductCache<T>> {
        if let Some(c) = self.cache.read().expect("cache lock").as_ref() {
            if c.maps.len() > level {
                return c.clone();
            }
        }
        let top = level.max(8);
        let left = Levels::new(&self.left.0, top).expect("validated operator");
        let right = Levels::new(&self.right.0, top).expect("validated operator");
        let maps = (0..=top)
            .map(|n| direct_sum_index_maps(&self.left.0, &self.right.0, n).expect("validated operator"))
            .collect();
        let c = Arc::new(ProductCache { left, right, maps });
        *self.cache.write().expect("cache lock") = Some(c.clone());
        c
    }
}

impl<T: Scalar> Nonlinearity<T> for ProductNonlinearity<T> {
    fn eval(&self, _lv: &Levels<T>, x: &[T], level: usize, out: usize) -> Vec<T> {
        let c = self.cache(out);
        let (ma, mb) = &c.maps[level];
        let xa: Vec<T> = ma.iter().map(|&p| x[p]).collect();
        let xb: Vec<T> = mb.iter().map(|&p| x[p]).collect();
        let ya = self.left.1.eval(&c.left, &xa, level, out);
        let yb = self.right.1.eval(&c.right, &xb, level, out);
        let (oa, ob) = &c.maps[out];
        let mut y = vec![T::zero(); oa.len() + ob.len()];
        for (&p, v) in oa.iter().zip(ya) {
            y[p] = v;
        }
        for (&p, v) in ob.iter().zip(yb) {
            y[p] = v;
        }
        y
    }

    fn jacobian(&self, _lv: &Levels<T>, x: &[T], level: usize) -> Option<DMatrix<T>> {
        let c = self.cache(level);
        let (ma, mb) = &c.maps[level];
        let xa: Vec<T> = ma.iter().map(|&p| x[p]).collect();
        let xb: Vec<T> = mb.iter().map(|&p| x[p]).collect();
        let ja = self.left.1.jacobian(&c.left, &xa, level)?;
        let jb = self.right.1.jacobian(&c.right, &xb, level)?;
        let n = ma.len() + mb.len();
        let mut h = DMatrix::zeros(n, n);
        for (i, &p) in ma.iter().enumerate() {
            for (j, &q) in ma.iter().enumerate() {
                h[(p, q)] = ja[(i, j)];
            }
        }
        for (i, &p) in mb.iter().enumerate() {
            for (j, &q) in mb.iter().enumerate() {
                h[(p, q)] = jb[(i, j)];
            }
        }
        Some(h)
    }

    fn is_affine(&self) -> bool {
        self.left.1.is_affine() && self.right.1.is_affine()
    }
}

/// Bounded invariant domain U ⊂ E₁, described by graph-norm balls
/// |x − c|²_{E₁} = Σ (1 + λ²)(x − c)² < R² with S¹-fixed centres.
#[derive(Debug, Clone)]
pub enum GraphDomain<T: Scalar> {
    Empty,
    /// `center` in global coordinates, zero-padded.
    Ball { center: Vec<T>, radius: T },
    Intersection(Vec<GraphDomain<T>>),
    /// Union of pairwise disjoint domains.
    Union(Vec<GraphDomain<T>>),
    /// U × U' ⊂ E ⊕ E' for the direct sum of the two operators.
    Product {
        left: (SpectralOperator<T>, Box<GraphDomain<T>>),
        right: (SpectralOperator<T>, Box<GraphDomain<T>>),
    },
}

impl<T: Scalar> GraphDomain<T> {
    pub fn centered_ball(radius: T) -> Self {
        GraphDomain::Ball {
            center: Vec::new(),
            radius,
        }
    }

    pub fn ball(center: Vec<T>, radius: T) -> Self {
        GraphDomain::Ball { center, radius }
    }

    /// U_n = U ∩ V_n as a region in the coordinates of V_n.
    pub fn restrict(&self, op: &SpectralOperator<T>, n: usize) -> Result<Region<T>, GalerkinError> {
        Ok(match self {
            GraphDomain::Empty => Region::Empty,
            GraphDomain::Ball { center, radius } => {
                if *radius <= T::zero() {
                    return Err(GalerkinError::InvalidDomain("radius must be positive".into()));
                }
                let dn = op.dim(n)?;
                let mut top = n;
                while op.dim(top)? < center.len() {
                    top += 1;
                    if top > n + 1000 {
                        return Err(GalerkinError::InvalidDomain("centre longer than the spectrum".into()));
                    }
                }
                let w = op.graph_weights(top)?;
                let tail = center
                    .iter()
                    .enumerate()
                    .skip(dn)
                    .fold(T::zero(), |a, (i, &c)| a + w[i] * c * c);
                let r2 = *radius * *radius - tail;
                if r2 <= T::zero() {
                    Region::Empty
                } else {
                    let mut c = center.clone();
                    c.resize(dn, T::zero());
                    c.truncate(dn);
                    Region::weighted_ball(c, r2.sqrt(), w[..dn].to_vec())
                }
            }
            GraphDomain::Intersection(parts) => {
                let rs: Vec<Region<T>> = parts.iter().map(|p| p.restrict(op, n)).collect::<Result<_, _>>()?;
                if rs.iter().any(|r| matches!(r, Region::Empty)) {
                    Region::Empty
                } else {
                    Region::Intersection(rs)
                }
            }
            GraphDomain::Union(parts) => {
                let rs: Vec<Region<T>> = parts
                    .iter()
                    .map(|p| p.restrict(op, n))
                    .collect::<Result<Vec<_>, _>>()?
                    .into_iter()
                    .filter(|r| !matches!(r, Region::Empty))
                    .collect();
                match rs.len() {
                    0 => Region::Empty,
                    1 => rs.into_iter().next().expect("one part"),
                    _ => Region::Union(rs),
                }
            }
            GraphDomain::Product { left, right } => {
                let ra = left.1.restrict(&left.0, n)?;
                let rb = right.1.restrict(&right.0, n)?;
                if matches!(ra, Region::Empty) || matches!(rb, Region::Empty) {
                    Region::Empty
                } else {
                    let (ma, mb) = direct_sum_index_maps(&left.0, &right.0, n)?;
                    Region::Product(vec![ra, rb]).permuted(ma.into_iter().chain(mb).collect())
                }
            }
        })
    }
}

/// A local map f = A − F on the domain U.
#[derive(Clone)]
pub struct LocalMapSpec<T: Scalar> {
    pub operator: SpectralOperator<T>,
    pub nonlinearity: SharedNonlinearity<T>,
    pub domain: GraphDomain<T>,
}

impl<T: Scalar> std::fmt::Debug for LocalMapSpec<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocalMapSpec")
            .field("operator", &self.operator)
            .field("domain", &self.domain)
            .finish()
    }
}

impl<T: Scalar> LocalMapSpec<T> {
    pub fn new(operator: SpectralOperator<T>, nonlinearity: SharedNonlinearity<T>, domain: GraphDomain<T>) -> Self {
        LocalMapSpec {
            operator,
            nonlinearity,
            domain,
        }
    }

    pub fn with_domain(&self, domain: GraphDomain<T>) -> Self {
        LocalMapSpec {
            domain,
            ..self.clone()
        }
    }

    /// f × f' on E ⊕ E' with the product domain.
    pub fn product(&self, other: &Self) -> Self {
        let operator = self.operator.direct_sum(&other.operator);
        let nonlinearity: SharedNonlinearity<T> = Arc::new(ProductNonlinearity::new(
            (self.operator.clone(), self.nonlinearity.clone()),
            (other.operator.clone(), other.nonlinearity.clone()),
        ));
        let domain = GraphDomain::Product {
            left: (self.operator.clone(), Box::new(self.domain.clone())),
            right: (other.operator.clone(), Box::new(other.domain.clone())),
        };
        LocalMapSpec {
            operator,
            nonlinearity,
            domain,
        }
    }

    /// f_n = A − P_nF on U_n, as an equivariant gradient field on V_n.
    pub fn truncated(&self, lv: &Arc<Levels<T>>, n: usize) -> Result<GradientField<T>, GalerkinError> {
        let region = self.domain.restrict(&self.operator, n)?;
        let layout = lv.layout(n).clone();
        let (lv1, f1) = (lv.clone(), self.nonlinearity.clone());
        let field = GradientField::new(layout, region, move |x: &[T]| {
            let fx = f1.eval(&lv1, x, n, n);
            lv1.diag(n)
                .iter()
                .zip(x)
                .zip(fx)
                .map(|((&l, &v), w)| l * v - w)
                .collect()
        })?;
        let (lv2, f2) = (lv.clone(), self.nonlinearity.clone());
        let field = if f2.jacobian(lv, &vec![T::zero(); lv.dim(n)], n).is_some() {
            field.with_hessian(move |x: &[T]| {
                let j = f2.jacobian(&lv2, x, n).expect("closed-form jacobian");
                DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(lv2.diag(n))) - j
            })
        } else {
            field
        };
        Ok(if self.nonlinearity.is_affine() {
            field.mark_affine()
        } else {
            field
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    Fixed(usize),
    /// Raise N from `start` until margin and stabilization certify.
    Auto { start: usize, max: usize },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Auto { start: 1, max: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct GalerkinOptions {
    pub seed: u64,
    pub truncation: Truncation,
    /// Boundary samples per real dimension of V_n.
    pub boundary_samples_per_dim: usize,
    /// Reference level m = n + offset for the margin.
    pub reference_offset: usize,
    /// Extra levels N+1, …, N+depth recomputed for stabilization.
    pub stabilization_depth: usize,
    /// Boundary samples refined by local minimization of |f̃_m|.
    pub refine: usize,
    pub equivariance_samples: usize,
    pub search: SearchOptions,
}

impl Default for GalerkinOptions {
    fn default() -> Self {
        GalerkinOptions {
            seed: 0,
            truncation: Truncation::default(),
            boundary_samples_per_dim: 64,
            reference_offset: 4,
            stabilization_depth: 1,
            refine: 3,
            equivariance_samples: 8,
            search: SearchOptions::default(),
        }
    }
}

impl GalerkinOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.search.seed = seed;
        self
    }

    pub fn with_truncation(mut self, t: Truncation) -> Self {
        self.truncation = t;
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.stabilization_depth = depth;
        self
    }
}

/// Sampled boundary margin at level n against reference level m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub level: usize,
    pub reference_level: usize,
    /// ½·min |f̃_m| on the sampled boundary (None for an empty domain).
    pub epsilon: Option<f64>,
    pub tail_bound: f64,
    pub samples: usize,
}

impl Margin {
    pub fn certified(&self) -> bool {
        self.epsilon.is_none_or(|e| self.tail_bound < e)
    }
}

/// ε and the tail of F at level n with default options.
pub fn certify_margin<T: Scalar>(f: &LocalMapSpec<T>, n: usize) -> Result<Margin, GalerkinError> {
    certify_margin_with(f, n, &GalerkinOptions::default())
}

pub fn certify_margin_with<T: Scalar>(
    f: &LocalMapSpec<T>,
    n: usize,
    opts: &GalerkinOptions,
) -> Result<Margin, GalerkinError> {
    let m = n + opts.reference_offset;
    let lv = Levels::new(&f.operator, m)?;
    margin_at(f, &lv, n, opts)
}

fn margin_at<T: Scalar>(
    f: &LocalMapSpec<T>,
    lv: &Levels<T>,
    n: usize,
    opts: &GalerkinOptions,
) -> Result<Margin, GalerkinError> {
    let m = n + opts.reference_offset;
    let region = f.domain.restrict(&f.operator, n)?;
    let (dn, dm) = (lv.dim(n), lv.dim(m));
    if region.is_empty() || dn == 0 {
        return Ok(Margin {
            level: n,
            reference_level: m,
            epsilon: None,
            tail_bound: 0.0,
            samples: 0,
        });
    }
    // f̃_m(x) = Ax − P_mF(x) for x ∈ V_n, and the tail (P_m − P_n)F(x)
    let eval = |x: &[T]| -> (Vec<T>, T) {
        let y = f.nonlinearity.eval(lv, x, n, m);
        let d = lv.diag(m);
        let full: Vec<T> = (0..dm)
            .map(|i| if i < dn { d[i] * x[i] - y[i] } else { -y[i] })
            .collect();
        let tail = norm(&y[dn..]);
        (full, tail)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6a1e_4c1d);
    let count = opts.boundary_samples_per_dim * dn;
    let pts = region.sample_boundary(&mut rng, count);
    let vals: Vec<(T, T)> = pts
        .par_iter()
        .map(|x| {
            let (v, t) = eval(x);
            (norm(&v), t)
        })
        .collect();
    if vals.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(GalerkinError::NonFinite { level: n });
    }
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].0.partial_cmp(&vals[b].0).expect("finite"));
    let scale = vals.iter().fold(T::one(), |a, v| a.max(v.0));
    let mut min = vals.get(order[0]).map_or(T::lit(f64::MAX), |v| v.0);
    let mut arg = pts[order[0]].clone();
    let mut tail = vals.iter().fold(T::zero(), |a, v| a.max(v.1));

    let refined: Vec<(T, T, Vec<T>)> = order
        .iter()
        .take(opts.refine)
        .collect::<Vec<_>>()
        .par_iter()
        .filter_map(|&&i| {
            let retract = region.boundary_retraction(&pts[i])?;
            let r = |y: &[T]| eval(&retract(y)).0;
            let out = levenberg_marquardt(&r, &pts[i], 60, 1e-7);
            let x = retract(&out.x);
            let (v, t) = eval(&x);
            Some((norm(&v), t, x))
        })
        .collect();
    for (v, t, x) in refined {
        tail = tail.max(t);
        if v < min {
            min = v;
            arg = x;
        }
    }
    if min <= T::tol(1e-10) * scale {
        return Err(GalerkinError::BoundaryZero {
            level: n,
            norm: min.as_f64(),
            at: arg.iter().map(|v| v.as_f64()).collect(),
        });
    }
    let epsilon = (min * T::lit(0.5)).as_f64();
    let margin = Margin {
        level: n,
        reference_level: m,
        epsilon: Some(epsilon),
        tail_bound: tail.as_f64(),
        samples: pts.len() + opts.refine.min(pts.len()),
    };
    if !margin.certified() {
        return Err(GalerkinError::MarginFailure {
            level: n,
            epsilon,
            tail_bound: margin.tail_bound,
        });
    }
    Ok(margin)
}

/// a_i = deg(A_i) for i = 1..=n.
pub fn shell_degrees<T: Scalar>(op: &SpectralOperator<T>, n: usize) -> Result<Vec<RingElement>, GalerkinError> {
    (1..=n)
        .map(|i| Ok(linear_degree(&op.shell_operator(i)?)?))
        .collect()
}

/// m_n = a₁⁻¹ ⋯ a_n⁻¹.
pub fn correction_factor<T: Scalar>(op: &SpectralOperator<T>, n: usize) -> Result<RingElement, GalerkinError> {
    product_of_inverses(&shell_degrees(op, n)?)
}

fn product_of_inverses(a: &[RingElement]) -> Result<RingElement, GalerkinError> {
    let mut m = RingElement::unit(GroupDescriptor::Circle);
    for (i, ai) in a.iter().enumerate() {
        let inv = ai.invert().ok_or_else(|| GalerkinError::NotInvertible {
            level: i + 1,
            value: ai.to_string(),
        })?;
        m = m.checked_mul(&inv)?;
    }
    Ok(m)
}

/// deg(f_n, U_n) together with m_n·deg(f_n, U_n).
#[derive(Debug, Clone)]
pub struct LevelDegree {
    pub level: usize,
    pub local: RingElement,
    pub normalized: RingElement,
    pub zeros: usize,
}

pub fn level_degree<T: Scalar>(
    f: &LocalMapSpec<T>,
    n: usize,
    opts: &GalerkinOptions,
) -> Result<LevelDegree, GalerkinError> {
    let lv = Arc::new(Levels::new(&f.operator, n)?);
    let mult = shell_degrees(&f.operator, n)?;
    level_degree_with(f, &lv, &mult, n, opts)
}

fn level_degree_with<T: Scalar>(
    f: &LocalMapSpec<T>,
    lv: &Arc<Levels<T>>,
    mult: &[RingElement],
    n: usize,
    opts: &GalerkinOptions,
) -> Result<LevelDegree, GalerkinError> {
    let field = f.truncated(lv, n)?;
    let d = grad_degree_detailed(&field, &opts.search)?;
    let normalized = product_of_inverses(&mult[..n])?.checked_mul(&d.value)?;
    Ok(LevelDegree {
        level: n,
        local: d.value,
        normalized,
        zeros: d.zeros.len(),
    })
}

/// Spot check of F's equivariance on samples of U_n, relative tolerance 1e−8.
pub fn check_equivariance<T: Scalar>(
    f: &LocalMapSpec<T>,
    lv: &Levels<T>,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<(), GalerkinError> {
    use rand::Rng;
    let region = f.domain.restrict(&f.operator, n)?;
    let out = lv.max_level().min(n + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe9_u64);
    let pts = region.sample_interior(&mut rng, samples);
    let (ln, lo) = (lv.layout(n), lv.layout(out));
    let mut worst = 0.0f64;
    for x in pts {
        let theta = T::lit(rng.random::<f64>() * std::f64::consts::TAU);
        let fx = f.nonlinearity.eval(lv, &x, n, out);
        if fx.iter().any(|v| !v.is_finite()) {
            return Err(GalerkinError::NonFinite { level: n });
        }
        let lhs = lo.act(theta, &fx);
        let rhs = f.nonlinearity.eval(lv, &ln.act(theta, &x), n, out);
        let scale = norm(&lhs).as_f64().max(1.0);
        let defect = lhs
            .iter()
            .zip(&rhs)
            .fold(0.0f64, |a, (&p, &q)| a.max((p - q).abs().as_f64()));
        worst = worst.max(defect / scale);
    }
    if worst > T::tol(1e-8).as_f64() {
        return Err(GalerkinError::NotEquivariant { defect: worst });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub boundary_samples: usize,
    pub reference_level: usize,
    /// tail_bound / epsilon.
    pub margin_ratio: Option<f64>,
    pub zeros_at_level: usize,
    pub correction_factor: Vec<SerializedTerm>,
    /// Levels tried before certification, with the reason each was rejected.
    pub rejected_levels: Vec<(usize, String)>,
    /// m_n·deg(f_n) for n = N, N+1, ….
    pub stabilization_values: Vec<Vec<SerializedTerm>>,
}

/// Deg(f) with the evidence behind it.
#[derive(Debug, Clone)]
pub struct DegreeResult {
    pub value: RingElement,
    pub level: usize,
    pub epsilon: Option<f64>,
    pub tail_bound: f64,
    pub stabilization: (RingElement, RingElement),
    pub limit_class: DirectLimitClass,
    pub zeros_at_level: usize,
    pub margin: Margin,
    pub levels: Vec<LevelDegree>,
    pub rejected_levels: Vec<(usize, String)>,
    pub correction_factor: RingElement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitClassRecord {
    pub level: usize,
    pub value: Vec<SerializedTerm>,
}

/// JSON form of a [`DegreeResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeRecord {
    pub value: Vec<SerializedTerm>,
    pub level: usize,
    pub epsilon: Option<f64>,
    pub tail_bound: f64,
    pub stabilization: [Vec<SerializedTerm>; 2],
    pub limit_class: LimitClassRecord,
    pub diagnostics: Diagnostics,
}

impl DegreeResult {
    /// The normalized value as a level-0 representative of the direct limit.
    pub fn normalized_class(&self) -> DirectLimitClass {
        DirectLimitClass::new(0, self.value.clone(), self.limit_class.multipliers.clone())
    }

    pub fn to_record(&self) -> DegreeRecord {
        DegreeRecord {
            value: self.value.to_serialized(),
            level: self.level,
            epsilon: self.epsilon,
            tail_bound: self.tail_bound,
            stabilization: [self.stabilization.0.to_serialized(), self.stabilization.1.to_serialized()],
            limit_class: LimitClassRecord {
                level: self.limit_class.level,
                value: self.limit_class.value.to_serialized(),
            },
            diagnostics: Diagnostics {
                boundary_samples: self.margin.samples,
                reference_level: self.margin.reference_level,
                margin_ratio: self.epsilon.map(|e| self.tail_bound / e),
                zeros_at_level: self.zeros_at_level,
                correction_factor: self.correction_factor.to_serialized(),
                rejected_levels: self.rejected_levels.clone(),
                stabilization_values: self.levels.iter().map(|l| l.normalized.to_serialized()).collect(),
            },
        }
    }
}

impl Serialize for DegreeResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

pub fn deg_infinite<T: Scalar>(f: &LocalMapSpec<T>) -> Result<DegreeResult, GalerkinError> {
    deg_infinite_with(f, &GalerkinOptions::default())
}

/// Deg(f) = m_N·deg(f_N, U_N) at the first certified level N, with the
/// values at N+1, …, N+depth required to agree.
pub fn deg_infinite_with<T: Scalar>(
    f: &LocalMapSpec<T>,
    opts: &GalerkinOptions,
) -> Result<DegreeResult, GalerkinError> {
    let (start, max, auto) = match opts.truncation {
        Truncation::Fixed(n) => (n, n, false),
        Truncation::Auto { start, max } => (start, max.max(start), true),
    };
    let depth = opts.stabilization_depth.max(1);
    let top = max + depth.max(opts.reference_offset);
    let lv = Arc::new(Levels::new(&f.operator, top)?);
    let mult = shell_degrees(&f.operator, max + depth)?;
    let mut rejected = Vec::new();
    let mut last = None;
    for n in start..=max {
        match attempt_level(f, &lv, &mult, n, depth, opts) {
            Ok(mut r) => {
                r.rejected_levels = rejected;
                return Ok(r);
            }
            Err(e @ (GalerkinError::MarginFailure { .. } | GalerkinError::StabilizationFailure { .. })) if auto => {
                rejected.push((n, e.to_string()));
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(match last {
        Some(e) if auto => GalerkinError::NoCertifiedLevel {
            start,
            max,
            last: Box::new(e),
        },
        Some(e) => e,
        None => GalerkinError::InvalidDomain("empty truncation range".into()),
    })
}

fn attempt_level<T: Scalar>(
    f: &LocalMapSpec<T>,
    lv: &Arc<Levels<T>>,
    mult: &[RingElement],
    n: usize,
    depth: usize,
    opts: &GalerkinOptions,
) -> Result<DegreeResult, GalerkinError> {
    let margin = margin_at(f, lv, n, opts)?;
    if opts.equivariance_samples > 0 {
        check_equivariance(f, lv, n, opts.equivariance_samples, opts.seed)?;
    }
    let levels: Vec<LevelDegree> = (n..=n + depth)
        .into_par_iter()
        .map(|k| level_degree_with(f, lv, mult, k, opts))
        .collect::<Result<_, _>>()?;
    let value = levels[0].normalized.clone();
    if levels.iter().any(|l| l.normalized != value) {
        return Err(GalerkinError::StabilizationFailure {
            level: n,
            values: levels.iter().map(|l| l.normalized.to_string()).collect(),
        });
    }
    Ok(DegreeResult {
        value: value.clone(),
        level: n,
        epsilon: margin.epsilon,
        tail_bound: margin.tail_bound,
        stabilization: (value, levels[1].normalized.clone()),
        limit_class: DirectLimitClass::new(n, levels[0].local.clone(), mult.to_vec()),
        zeros_at_level: levels[0].zeros,
        margin,
        correction_factor: product_of_inverses(&mult[..n])?,
        levels,
        rejected_levels: Vec::new(),
    })
}

/// A family t ↦ f_t = A − F_t on U_t over a uniform grid of [0, 1].
#[derive(Clone)]
pub struct OtopyPath<T: Scalar> {
    pub operator: SpectralOperator<T>,
    pub steps: usize,
    #[allow(clippy::type_complexity)]
    pub family: Arc<dyn Fn(T) -> (SharedNonlinearity<T>, GraphDomain<T>) + Send + Sync>,
}

impl<T: Scalar> OtopyPath<T> {
    pub fn new<F>(operator: SpectralOperator<T>, steps: usize, family: F) -> Self
    where
        F: Fn(T) -> (SharedNonlinearity<T>, GraphDomain<T>) + Send + Sync + 'static,
    {
        OtopyPath {
            operator,
            steps: steps.max(1),
            family: Arc::new(family),
        }
    }

    /// The straight-line path (1 − t)F + tF' on a fixed domain.
    pub fn linear(
        operator: SpectralOperator<T>,
        steps: usize,
        f0: SharedNonlinearity<T>,
        f1: SharedNonlinearity<T>,
        domain: GraphDomain<T>,
    ) -> Self {
        Self::new(operator, steps, move |t| {
            let g: SharedNonlinearity<T> = Arc::new(LinearCombination::interpolate(f0.clone(), f1.clone(), t));
            (g, domain.clone())
        })
    }

    pub fn grid(&self) -> Vec<T> {
        (0..=self.steps)
            .map(|i| T::of_usize(i) / T::of_usize(self.steps))
            .collect()
    }

    pub fn slice(&self, t: T) -> LocalMapSpec<T> {
        let (g, d) = (self.family)(t);
        LocalMapSpec::new(self.operator.clone(), g, d)
    }
}

/// Degrees along an otopy at a common certified level; all must agree.
pub fn deg_along_otopy<T: Scalar>(path: &OtopyPath<T>) -> Result<Vec<DegreeResult>, GalerkinError> {
    deg_along_otopy_with(path, &GalerkinOptions::default())
}

pub fn deg_along_otopy_with<T: Scalar>(
    path: &OtopyPath<T>,
    opts: &GalerkinOptions,
) -> Result<Vec<DegreeResult>, GalerkinError> {
    let (start, max) = match opts.truncation {
        Truncation::Fixed(n) => (n, n),
        Truncation::Auto { start, max } => (start, max.max(start)),
    };
    let grid = path.grid();
    let slices: Vec<LocalMapSpec<T>> = grid.iter().map(|&t| path.slice(t)).collect();
    let top = max + opts.stabilization_depth.max(opts.reference_offset).max(1);
    let lv = Levels::new(&path.operator, top)?;
    let slice_failure = |i: usize, e: &GalerkinError| GalerkinError::SliceMarginFailure {
        t: grid[i].as_f64(),
        reason: e.to_string(),
    };

    let mut common = None;
    let mut worst: Option<(usize, GalerkinError)> = None;
    for n in start..=max {
        let margins: Vec<Result<Margin, GalerkinError>> =
            slices.par_iter().map(|s| margin_at(s, &lv, n, opts)).collect();
        let mut ok = true;
        for (i, m) in margins.iter().enumerate() {
            match m {
                Ok(_) => {}
                Err(e @ GalerkinError::MarginFailure { .. }) => {
                    ok = false;
                    worst = Some((i, e.clone()));
                }
                Err(e) => return Err(slice_failure(i, e)),
            }
        }
        if ok {
            common = Some(n);
            break;
        }
    }
    let Some(n) = common else {
        let (i, e) = worst.expect("some slice failed");
        return Err(slice_failure(i, &e));
    };
    let fixed = GalerkinOptions {
        truncation: Truncation::Fixed(n),
        ..opts.clone()
    };
    let results: Vec<DegreeResult> = slices
        .par_iter()
        .enumerate()
        .map(|(i, s)| deg_infinite_with(s, &fixed).map_err(|e| slice_failure(i, &e)))
        .collect::<Result<_, _>>()?;
    for (i, w) in results.windows(2).enumerate() {
        if w[0].value != w[1].value {
            // the degree can only change where the margin collapses in between
            let mid = (grid[i] + grid[i + 1]) * T::lit(0.5);
            return Err(GalerkinError::SliceMarginFailure {
                t: mid.as_f64(),
                reason: format!(
                    "degree changes from {} at t = {} to {} at t = {}",
                    w[0].value,
                    grid[i],
                    w[1].value,
                    grid[i + 1]
                ),
            });
        }
    }
    Ok(results)
}

/// Deg(f|U1) = Deg(f|U2) for two admissible domains.
pub fn restriction_consistency<T: Scalar>(
    f: &LocalMapSpec<T>,
    u1: &GraphDomain<T>,
    u2: &GraphDomain<T>,
) -> Result<bool, GalerkinError> {
    restriction_consistency_with(f, &[u1.clone(), u2.clone()], &GalerkinOptions::default())
}

/// All domains give the same degree.
pub fn restriction_consistency_with<T: Scalar>(
    f: &LocalMapSpec<T>,
    domains: &[GraphDomain<T>],
    opts: &GalerkinOptions,
) -> Result<bool, GalerkinError> {
    let values: Vec<RingElement> = domains
        .par_iter()
        .map(|d| deg_infinite_with(&f.with_domain(d.clone()), opts).map(|r| r.value))
        .collect::<Result<_, _>>()?;
    Ok(values.windows(2).all(|w| w[0] == w[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler_ring::{limit_class_equal, SubgroupClass};
    use crate::srep::Rep;

    fn integers(n_modes: u32) -> SpectralOperator<f64> {
        // kernel ℝ², shells k with ±k on ℂ(k)
        SpectralOperator::from_generator("integers", move |n| {
            if n == 0 {
                vec![crate::srep::Eigenspace::new(0.0, Rep::trivial(2))]
            } else if n as u32 <= n_modes {
                vec![
                    crate::srep::Eigenspace::new(-(n as f64), Rep::mode(n as u32, 1)),
                    crate::srep::Eigenspace::new(n as f64, Rep::mode(n as u32, 1)),
                ]
            } else {
                Vec::new()
            }
        })
    }

    fn s1(terms: &[(SubgroupClass, i64)]) -> RingElement {
        RingElement::from_terms(GroupDescriptor::Circle, terms.iter().map(|&(c, v)| (c, v))).unwrap()
    }

    #[test]
    fn correction_factor_examples() {
        let op = integers(6);
        assert!(correction_factor(&op, 0).unwrap().is_unit());
        let m1 = correction_factor(&op, 1).unwrap();
        assert_eq!(m1, s1(&[(SubgroupClass::Full, 1), (SubgroupClass::FiniteCyclic(1), 1)]));
        let a2 = linear_degree(&op.shell_operator(2).unwrap()).unwrap();
        assert_eq!(
            correction_factor(&op, 2).unwrap(),
            &m1 * &a2.invert().unwrap()
        );
    }

    #[test]
    fn linear_map_has_zero_tail() {
        let f = LocalMapSpec::new(
            integers(8),
            Arc::new(SpectralMultiplier::scalar(0.5)),
            GraphDomain::centered_ball(1.0),
        );
        let m = certify_margin(&f, 1).unwrap();
        assert_eq!(m.tail_bound, 0.0);
        assert!(m.epsilon.unwrap() > 0.0);
    }

    #[test]
    fn half_shift_has_unit_degree() {
        let f = LocalMapSpec::new(
            integers(8),
            Arc::new(SpectralMultiplier::scalar(0.5)),
            GraphDomain::centered_ball(1.0),
        );
        let r = deg_infinite(&f).unwrap();
        assert!(r.value.is_unit());
        assert_eq!(r.level, 1);
        assert_eq!(r.stabilization.0, r.stabilization.1);
        assert!(limit_class_equal(&r.limit_class, &r.normalized_class()).unwrap());
    }

    #[test]
    fn normalization() {
        let f = LocalMapSpec::new(
            integers(8),
            Arc::new(SpectralMultiplier::minus_kernel_projection()),
            GraphDomain::centered_ball(2.0),
        );
        assert!(deg_infinite(&f).unwrap().value.is_unit());
    }

    #[test]
    fn empty_domain_has_zero_degree() {
        let f = LocalMapSpec::new(
            integers(4),
            Arc::new(SpectralMultiplier::minus_kernel_projection()),
            GraphDomain::Empty,
        );
        assert!(deg_infinite(&f).unwrap().value.is_zero());
    }

    #[test]
    fn crossing_path_fails() {
        let op = integers(6);
        let path = OtopyPath::new(op, 10, |t: f64| {
            let g: SharedNonlinearity<f64> = Arc::new(SpectralMultiplier::scalar(0.5 + t));
            (g, GraphDomain::centered_ball(1.0))
        });
        assert!(matches!(
            deg_along_otopy(&path),
            Err(GalerkinError::SliceMarginFailure { .. })
        ));
    }

    #[test]
    fn polynomial_gradient_jacobian_matches_differences() {
        let lv = Levels::new(&integers(3), 2).unwrap();
        let p = PolynomialGradient::new(vec![
            Monomial { vars: vec![(0, 4)], coeff: 0.25 },
            Monomial { vars: vec![(0, 1), (2, 2)], coeff: 0.7 },
            Monomial { vars: vec![(0, 1), (3, 2)], coeff: 0.7 },
            Monomial { vars: vec![(1, 2), (4, 1)], coeff: -0.3 },
        ]);
        let x = [0.3, -0.2, 0.5, 0.1, 0.4, -0.6, 0.2, 0.0, -0.1, 0.3];
        let j = Nonlinearity::<f64>::jacobian(&p, &lv, &x, 2).unwrap();
        let fd = crate::numeric::fd_jacobian(&|y: &[f64]| p.eval(&lv, y, 2, 2), &x, 1e-6);
        assert!((j - fd).amax() < 1e-8);
        assert!(!Nonlinearity::<f64>::is_affine(&p));
    }
}
