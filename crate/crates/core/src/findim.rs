//! The finite-dimensional S¹-equivariant gradient degree.
//!
//! For a linear equivariant self-adjoint isomorphism B with negative
//! eigenspace ℝ^{m₀} ⊕ ⊕_k ℂ^{m_k}(k) the degree is
//!
//! ```text
//!     (−1)^{m₀} · ( [S¹/S¹] − Σ_k m_k·[S¹/ℤ_k] )
//! ```
//!
//! Nonlinear fields are handled when all zeros lie in the fixed subspace
//! V^{S¹}: each isolated nondegenerate zero contributes the linear degree of
//! its Hessian, and contributions add up.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::euler_ring::{GroupDescriptor, RingElement, SubgroupClass};
use crate::numeric::{damped_newton, fd_jacobian, levenberg_marquardt, NewtonOptions};
use crate::region::Region;
use crate::scalar::{dist, norm, Scalar};
use crate::srep::{EquivariantSymOp, Layout, Rep, RepError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DegreeError {
    #[error(transparent)]
    Rep(#[from] RepError),
    #[error("degenerate zero at {at:?}: {source}")]
    DegenerateZero { at: Vec<f64>, source: RepError },
    #[error("field nearly vanishes on the domain boundary: |f| = {norm:.3e} at {at:?}")]
    BoundaryZero { at: Vec<f64>, norm: f64 },
    #[error("zero at {at:?} lies outside the fixed subspace (normal component {normal:.3e})")]
    ZeroOutsideFixedSpace { at: Vec<f64>, normal: f64 },
    #[error("zero set could not be resolved: {0}")]
    UnresolvedZeroCluster(String),
    #[error("Brouwer oracle supports fixed subspaces of dimension at most 4, got {0}")]
    OracleDimension(usize),
    #[error("field is not equivariant: defect {defect:.3e}")]
    NotEquivariant { defect: f64 },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
}

pub type FieldFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
pub type HessianFn<T> = Arc<dyn Fn(&[T]) -> DMatrix<T> + Send + Sync>;

/// An equivariant gradient field x ↦ ∇ψ(x) on an invariant region of a
/// representation, in the coordinates of `layout`.
#[derive(Clone)]
pub struct GradientField<T: Scalar> {
    layout: Layout,
    value: FieldFn<T>,
    hessian: Option<HessianFn<T>>,
    domain: Region<T>,
    affine: bool,
}

impl<T: Scalar> std::fmt::Debug for GradientField<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GradientField")
            .field("layout", &self.layout)
            .field("domain", &self.domain)
            .field("affine", &self.affine)
            .finish()
    }
}

fn to_f64<T: Scalar>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}

impl<T: Scalar> GradientField<T> {
    pub fn new<F>(layout: Layout, domain: Region<T>, value: F) -> Result<Self, DegreeError>
    where
        F: Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    {
        Self::from_arc(layout, domain, Arc::new(value))
    }

    pub fn from_arc(layout: Layout, domain: Region<T>, value: FieldFn<T>) -> Result<Self, DegreeError> {
        check_domain(&layout, &domain)?;
        Ok(GradientField {
            layout,
            value,
            hessian: None,
            domain,
            affine: false,
        })
    }

    /// The linear field x ↦ Bx on the standard coordinates of B's rep.
    pub fn linear(op: &EquivariantSymOp<T>, domain: Region<T>) -> Result<Self, DegreeError> {
        let m = op.to_real_matrix();
        let mv = m.clone();
        let f = Self::new(Layout::single(op.rep().clone()), domain, move |x: &[T]| {
            (&mv * nalgebra::DVector::from_column_slice(x)).iter().copied().collect()
        })?;
        Ok(f.with_hessian(move |_| m.clone()).mark_affine())
    }

    pub fn with_hessian<H>(mut self, h: H) -> Self
    where
        H: Fn(&[T]) -> DMatrix<T> + Send + Sync + 'static,
    {
        self.hessian = Some(Arc::new(h));
        self
    }

    /// Declare the field affine (x ↦ Bx + c); the zero search then needs a
    /// single Newton solve.
    pub fn mark_affine(mut self) -> Self {
        self.affine = true;
        self
    }

    pub fn is_affine(&self) -> bool {
        self.affine
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn domain(&self) -> &Region<T> {
        &self.domain
    }

    pub fn with_domain(&self, domain: Region<T>) -> Result<Self, DegreeError> {
        check_domain(&self.layout, &domain)?;
        Ok(GradientField {
            domain,
            ..self.clone()
        })
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        (self.value)(x)
    }

    pub fn jacobian(&self, x: &[T]) -> DMatrix<T> {
        match &self.hessian {
            Some(h) => h(x),
            None => fd_jacobian(&*self.value, x, 1e-6),
        }
    }

    /// Spot check |g·f(x) − f(g·x)| on random points and group elements.
    pub fn check_equivariance(&self, samples: usize, seed: u64) -> Result<(), DegreeError> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = self.domain.sample_interior(&mut rng, samples);
        let mut worst = 0.0f64;
        for x in pts {
            let theta = T::lit(rng.random::<f64>() * std::f64::consts::TAU);
            let lhs = self.layout.act(theta, &self.eval(&x));
            let rhs = self.eval(&self.layout.act(theta, &x));
            let scale = 1.0f64.max(norm(&lhs).as_f64());
            worst = worst.max(dist(&lhs, &rhs).as_f64() / scale);
        }
        if worst > T::tol(1e-8).as_f64() {
            return Err(DegreeError::NotEquivariant { defect: worst });
        }
        Ok(())
    }

    /// f × g on the direct sum, with the product domain.
    pub fn product(&self, other: &Self) -> Self {
        let split = self.layout.dim();
        let (f, g) = (self.value.clone(), other.value.clone());
        let value: FieldFn<T> = Arc::new(move |x: &[T]| {
            let mut out = f(&x[..split]);
            out.extend(g(&x[split..]));
            out
        });
        let hessian = match (&self.hessian, &other.hessian) {
            (Some(hf), Some(hg)) => {
                let (hf, hg) = (hf.clone(), hg.clone());
                let h: HessianFn<T> = Arc::new(move |x: &[T]| {
                    let (a, b) = (hf(&x[..split]), hg(&x[split..]));
                    let n = a.nrows() + b.nrows();
                    let mut m = DMatrix::zeros(n, n);
                    m.view_mut((0, 0), a.shape()).copy_from(&a);
                    m.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(&b);
                    m
                });
                Some(h)
            }
            _ => None,
        };
        GradientField {
            layout: self.layout.concat(&other.layout),
            value,
            hessian,
            domain: Region::Product(vec![self.domain.clone(), other.domain.clone()]),
            affine: self.affine && other.affine,
        }
    }

    /// f ⊔ f' on the union of two disjoint domains of the same representation.
    pub fn disjoint_union(&self, other: &Self) -> Result<Self, DegreeError> {
        if self.layout != other.layout {
            return Err(DegreeError::InvalidDomain("disjoint union of fields on different layouts".into()));
        }
        let (da, f, g) = (self.domain.clone(), self.value.clone(), other.value.clone());
        let db = other.domain.clone();
        let value: FieldFn<T> = Arc::new(move |x: &[T]| {
            if da.gauge(x) <= db.gauge(x) {
                f(x)
            } else {
                g(x)
            }
        });
        let domain = Region::Union(vec![self.domain.clone(), other.domain.clone()]);
        check_domain(&self.layout, &domain)?;
        Ok(GradientField {
            layout: self.layout.clone(),
            value,
            hessian: None,
            domain,
            affine: false,
        })
    }

    /// x ↦ f(x − c) on the domain translated by c, for c ∈ V^{S¹}.
    pub fn translated(&self, shift: &[T]) -> Result<Self, DegreeError> {
        if self.layout.normal_norm(shift) != T::zero() {
            return Err(DegreeError::InvalidDomain("translation must be S¹-fixed".into()));
        }
        let s = shift.to_vec();
        let f = self.value.clone();
        let sub = move |x: &[T]| -> Vec<T> { x.iter().zip(&s).map(|(&a, &b)| a - b).collect() };
        let sub2 = sub.clone();
        let value: FieldFn<T> = Arc::new(move |x: &[T]| f(&sub(x)));
        let hessian = self.hessian.clone().map(|h| {
            let h: HessianFn<T> = Arc::new(move |x: &[T]| h(&sub2(x)));
            h
        });
        Ok(GradientField {
            layout: self.layout.clone(),
            value,
            hessian,
            domain: translate_region(&self.domain, shift),
            affine: self.affine,
        })
    }
}

fn translate_region<T: Scalar>(r: &Region<T>, c: &[T]) -> Region<T> {
    let add = |v: &[T]| -> Vec<T> { v.iter().zip(c).map(|(&a, &b)| a + b).collect() };
    match r {
        Region::Empty => Region::Empty,
        Region::Ball {
            center,
            radius,
            weights,
        } => Region::Ball {
            center: add(center),
            radius: *radius,
            weights: weights.clone(),
        },
        Region::Box { lo, hi } => Region::Box {
            lo: add(lo),
            hi: add(hi),
        },
        Region::Intersection(p) => Region::Intersection(p.iter().map(|q| translate_region(q, c)).collect()),
        Region::Union(p) => Region::Union(p.iter().map(|q| translate_region(q, c)).collect()),
        Region::Product(parts) => {
            let mut off = 0;
            let mut out = Vec::new();
            for q in parts {
                let d = q.dim().unwrap_or(0);
                out.push(translate_region(q, &c[off..off + d]));
                off += d;
            }
            Region::Product(out)
        }
        Region::Permuted { positions, inner } => Region::Permuted {
            positions: positions.clone(),
            inner: Box::new(translate_region(inner, &positions.iter().map(|&p| c[p]).collect::<Vec<T>>())),
        },
    }
}

/// Regions must be S¹-invariant: balls centred in V^{S¹}, boxes only on
/// representations without modes.
fn check_domain<T: Scalar>(layout: &Layout, domain: &Region<T>) -> Result<(), DegreeError> {
    if let Some(d) = domain.dim() {
        if d != layout.dim() {
            return Err(DegreeError::InvalidDomain(format!(
                "domain has dimension {d}, representation {}",
                layout.dim()
            )));
        }
    }
    fn walk<T: Scalar>(freq: &[u32], r: &Region<T>) -> Result<(), DegreeError> {
        match r {
            Region::Empty => Ok(()),
            Region::Ball {
                center, weights, ..
            } => {
                if center.iter().zip(freq).any(|(&c, &k)| k != 0 && c != T::zero()) {
                    return Err(DegreeError::InvalidDomain("ball centre must be S¹-fixed".into()));
                }
                if let Some(w) = weights {
                    // weights must be constant on each rotation pair
                    let mut i = 0;
                    while i < freq.len() {
                        if freq[i] != 0 {
                            if w[i] != w[i + 1] {
                                return Err(DegreeError::InvalidDomain("ball weights break invariance".into()));
                            }
                            i += 2;
                        } else {
                            i += 1;
                        }
                    }
                }
                Ok(())
            }
            Region::Box { .. } => {
                if freq.iter().any(|&k| k != 0) {
                    return Err(DegreeError::InvalidDomain(
                        "boxes are invariant only on the trivial representation".into(),
                    ));
                }
                Ok(())
            }
            Region::Intersection(p) | Region::Union(p) => {
                p.iter().try_for_each(|q| walk(freq, q))
            }
            Region::Product(parts) => {
                let mut off = 0;
                for q in parts {
                    let d = q.dim().unwrap_or(0);
                    walk(&freq[off..off + d], q)?;
                    off += d;
                }
                Ok(())
            }
            Region::Permuted { positions, inner } => {
                let f: Vec<u32> = positions.iter().map(|&p| freq[p]).collect();
                walk(&f, inner)
            }
        }
    }
    walk(&layout.frequencies(), domain)
}

/// Degree of a linear equivariant self-adjoint isomorphism.
pub fn linear_degree<T: Scalar>(b: &EquivariantSymOp<T>) -> Result<RingElement, RepError> {
    let neg = b.negative_part()?;
    Ok(degree_of_negative_part(&neg))
}

/// (−1)^{m₀}·(1 − Σ m_k [S¹/ℤ_k]) for the negative part m.
pub fn degree_of_negative_part(neg: &Rep) -> RingElement {
    let g = GroupDescriptor::Circle;
    let mut terms: Vec<(SubgroupClass, BigInt)> = vec![(SubgroupClass::Full, BigInt::from(1))];
    for (&k, &m) in neg.modes() {
        terms.push((SubgroupClass::FiniteCyclic(k as u64), -BigInt::from(m)));
    }
    let v = RingElement::from_terms(g, terms).expect("S¹ classes");
    if neg.trivial.is_odd() {
        -v
    } else {
        v
    }
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub seed: u64,
    /// Boundary samples per real dimension.
    pub boundary_samples_per_dim: usize,
    /// Grid points per axis of the fixed subspace (spacing = radius/8 for 17).
    pub grid_per_axis: usize,
    /// Upper bound on the number of grid seeds.
    pub seed_budget: usize,
    pub newton: NewtonOptions,
    pub merge_tol: f64,
    /// Seeds placed off the fixed subspace to detect zeros with finite isotropy.
    pub off_fixed_seeds: usize,
    pub boundary_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            seed: 0,
            boundary_samples_per_dim: 64,
            grid_per_axis: 17,
            seed_budget: 20_000,
            newton: NewtonOptions::default(),
            merge_tol: 1e-7,
            off_fixed_seeds: 16,
            boundary_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ZeroRecord<T> {
    pub point: Vec<T>,
    pub contribution: RingElement,
}

#[derive(Debug, Clone)]
pub struct GradDegree<T> {
    pub value: RingElement,
    pub zeros: Vec<ZeroRecord<T>>,
    /// Smallest |f| over the boundary samples.
    pub boundary_min: T,
    pub boundary_samples: usize,
}

/// Degree of an equivariant gradient field, default search options.
pub fn grad_degree<T: Scalar>(f: &GradientField<T>) -> Result<RingElement, DegreeError> {
    Ok(grad_degree_detailed(f, &SearchOptions::default())?.value)
}

fn merge_points<T: Scalar>(mut pts: Vec<Vec<T>>, tol: T) -> Vec<Vec<T>> {
    pts.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<Vec<T>> = Vec::new();
    for p in pts {
        if !out.iter().any(|q| dist(q, &p) <= tol) {
            out.push(p);
        }
    }
    out
}

fn grid_axis_count(d: usize, per_axis: usize, budget: usize) -> usize {
    let mut p = per_axis.max(2);
    while p > 2 && (p as f64).powi(d as i32) > budget as f64 {
        p -= 1;
    }
    p
}

/// Boundary margin check: smallest |f| over boundary samples.
fn boundary_scan<T: Scalar>(
    f: &GradientField<T>,
    opts: &SearchOptions,
) -> Result<(T, usize), DegreeError> {
    let dim = f.layout.dim();
    let count = (opts.boundary_samples_per_dim * dim).max(64);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_b0da);
    let pts = f.domain.sample_boundary(&mut rng, count);
    let vals: Vec<(T, &Vec<T>)> = pts.par_iter().map(|x| (norm(&f.eval(x)), x)).collect();
    let max = vals.iter().fold(T::zero(), |a, (v, _)| a.max(*v));
    let mut min = T::lit(f64::MAX);
    let mut arg = None;
    for (v, x) in &vals {
        if *v < min {
            min = *v;
            arg = Some(*x);
        }
    }
    if let Some(x) = arg {
        if min <= T::tol(opts.boundary_tol) * max.max(T::one()) {
            return Err(DegreeError::BoundaryZero {
                at: to_f64(x),
                norm: min.as_f64(),
            });
        }
    }
    Ok((min, pts.len()))
}

/// Degree of an equivariant gradient field whose zeros lie in V^{S¹}.
pub fn grad_degree_detailed<T: Scalar>(
    f: &GradientField<T>,
    opts: &SearchOptions,
) -> Result<GradDegree<T>, DegreeError> {
    let zero = RingElement::zero(GroupDescriptor::Circle);
    if f.domain.is_empty() {
        return Ok(GradDegree {
            value: zero,
            zeros: Vec::new(),
            boundary_min: T::lit(f64::INFINITY),
            boundary_samples: 0,
        });
    }
    let dim = f.layout.dim();
    let (boundary_min, boundary_samples) = if dim > 0 {
        boundary_scan(f, opts)?
    } else {
        (T::lit(f64::INFINITY), 0)
    };

    let zeros = locate_fixed_zeros(f, opts)?;

    let mut value = zero;
    let mut records = Vec::with_capacity(zeros.len());
    for z in zeros {
        let jac = f.jacobian(&z);
        check_nondegenerate(&jac, &z)?;
        let hess = EquivariantSymOp::from_real_matrix(&f.layout, &jac)?;
        let contribution = linear_degree(&hess).map_err(|source| DegreeError::DegenerateZero {
            at: to_f64(&z),
            source,
        })?;
        value = &value + &contribution;
        records.push(ZeroRecord {
            point: z,
            contribution,
        });
    }

    if !f.affine && !f.layout.rep().modes().is_empty() {
        detect_off_fixed_zeros(f, opts)?;
    }

    Ok(GradDegree {
        value,
        zeros: records,
        boundary_min,
        boundary_samples,
    })
}

/// Hessians at zeros are also compared against an absolute floor: a 1×1
/// block is never singular relative to its own norm.
fn check_nondegenerate<T: Scalar>(jac: &DMatrix<T>, z: &[T]) -> Result<(), DegreeError> {
    if jac.is_empty() {
        return Ok(());
    }
    let sym = (jac + jac.transpose()) * T::lit(0.5);
    let scale = sym.norm().max(T::one());
    let thresh = T::tol(crate::srep::SINGULAR_TOL) * scale;
    if let Some(&e) = sym
        .symmetric_eigenvalues()
        .iter()
        .min_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap_or(std::cmp::Ordering::Equal))
    {
        if e.abs() <= thresh {
            return Err(DegreeError::DegenerateZero {
                at: to_f64(z),
                source: RepError::NearSingular {
                    what: "Hessian at zero".into(),
                    eigenvalue: e.as_f64(),
                    norm: scale.as_f64(),
                },
            });
        }
    }
    Ok(())
}

fn locate_fixed_zeros<T: Scalar>(
    f: &GradientField<T>,
    opts: &SearchOptions,
) -> Result<Vec<Vec<T>>, DegreeError> {
    let dim = f.layout.dim();
    let triv = f.layout.trivial_indices();
    let d = triv.len();
    let embed = {
        let triv = triv.clone();
        move |y: &[T]| -> Vec<T> {
            let mut x = vec![T::zero(); dim];
            for (&i, &v) in triv.iter().zip(y) {
                x[i] = v;
            }
            x
        }
    };
    if d == 0 {
        // V^{S¹} = {0}; equivariance forces f(0) = 0.
        let origin = vec![T::zero(); dim];
        return Ok(if f.domain.contains(&origin) { vec![origin] } else { Vec::new() });
    }
    let restricted = |y: &[T]| -> Vec<T> {
        let fx = f.eval(&embed(y));
        triv.iter().map(|&i| fx[i]).collect()
    };
    let (lo, hi) = f
        .domain
        .bounding_box()
        .ok_or_else(|| DegreeError::InvalidDomain("unbounded domain".into()))?;
    let lo: Vec<T> = triv.iter().map(|&i| lo[i]).collect();
    let hi: Vec<T> = triv.iter().map(|&i| hi[i]).collect();

    let seeds: Vec<Vec<T>> = if f.affine {
        let p = f.domain.interior_point().unwrap_or_else(|| vec![T::zero(); dim]);
        vec![triv.iter().map(|&i| p[i]).collect()]
    } else {
        let p = grid_axis_count(d, opts.grid_per_axis, opts.seed_budget);
        let total = p.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                (0..d)
                    .map(|a| {
                        let i = idx % p;
                        idx /= p;
                        lo[a] + (hi[a] - lo[a]) * T::of_usize(i) / T::of_usize(p - 1)
                    })
                    .collect::<Vec<T>>()
            })
            .filter(|y| f.domain.contains(&embed(y)))
            .collect()
    };

    if f.affine {
        let y0 = &seeds[0];
        let jac = fd_jacobian(&restricted, y0, opts.newton.fd_step);
        if jac.clone().lu().solve(&nalgebra::DVector::zeros(d)).is_none() {
            let full = f.jacobian(&embed(y0));
            let hess = EquivariantSymOp::from_real_matrix(&f.layout, &full)?;
            return Err(match hess.negative_part() {
                Err(source) => DegreeError::DegenerateZero { at: to_f64(&embed(y0)), source },
                Ok(_) => DegreeError::UnresolvedZeroCluster("singular affine field".into()),
            });
        }
    }

    let found: Vec<Vec<T>> = seeds
        .par_iter()
        .filter_map(|y| damped_newton(&restricted, y, opts.newton))
        .map(|y| embed(&y))
        .filter(|x| f.domain.contains(x))
        .collect();
    let merged = merge_points(found, T::lit(opts.merge_tol));
    let scale = T::one();
    Ok(merged
        .into_iter()
        .filter(|x| norm(&f.eval(x)) <= T::tol(1e-8) * scale)
        .collect())
}

fn detect_off_fixed_zeros<T: Scalar>(f: &GradientField<T>, opts: &SearchOptions) -> Result<(), DegreeError> {
    let dim = f.layout.dim();
    let count = opts.off_fixed_seeds.min(dim.max(1));
    if count == 0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x0ff_f1ed);
    let seeds = f.domain.sample_interior(&mut rng, count);
    let value = |x: &[T]| f.eval(x);
    let hits: Vec<Vec<T>> = seeds
        .par_iter()
        .filter_map(|x0| {
            let out = levenberg_marquardt(&value, x0, 30, opts.newton.fd_step);
            let normal = f.layout.normal_norm(&out.x);
            (out.residual <= T::tol(1e-9)
                && normal > T::lit(opts.merge_tol)
                && f.domain.contains(&out.x))
            .then_some(out.x)
        })
        .collect();
    if let Some(x) = hits.first() {
        return Err(DegreeError::ZeroOutsideFixedSpace {
            at: to_f64(x),
            normal: f.layout.normal_norm(x).as_f64(),
        });
    }
    Ok(())
}

/// Degree of f × g on the product domain. Equals the product of the degrees.
pub fn product_degree<T: Scalar>(
    f: &GradientField<T>,
    g: &GradientField<T>,
) -> Result<RingElement, DegreeError> {
    grad_degree(&f.product(g))
}

/// The local model around a single orbit G·x₀ (normal form (A + P₀) on the
/// slice); only its isotropy class matters for the degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitNormalForm {
    pub rep: Rep,
    pub isotropy: SubgroupClass,
}

impl OrbitNormalForm {
    /// Normal form through x₀: the isotropy is ℤ_g with g the gcd of the
    /// modes on which x₀ has a nonzero component (S¹ when x₀ is fixed).
    pub fn through_point<T: Scalar>(layout: &Layout, x0: &[T]) -> Self {
        let tol = T::tol(1e-12);
        let mut g = 0u64;
        for (&k, &v) in layout.frequencies().iter().zip(x0) {
            if k != 0 && v.abs() > tol {
                g = g.gcd(&(k as u64));
            }
        }
        OrbitNormalForm {
            rep: layout.rep(),
            isotropy: if g == 0 {
                SubgroupClass::Full
            } else {
                SubgroupClass::FiniteCyclic(g)
            },
        }
    }

    /// Orbits with finite isotropy use the general normalization
    /// Deg = [G/G_{x₀}], which is stated without proof in the literature.
    pub fn uses_general_normalization(&self) -> bool {
        self.isotropy != SubgroupClass::Full
    }
}

/// [G/G_{x₀}].
pub fn orbit_normal_form_degree(o: &OrbitNormalForm) -> RingElement {
    RingElement::basis(GroupDescriptor::Circle, o.isotropy).expect("S¹ isotropy class")
}

#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub seed: u64,
    /// Initial cells per axis by fixed-space dimension 1..=4.
    pub initial_cells: [usize; 4],
    pub refinements: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            seed: 0,
            initial_cells: [64, 24, 12, 6],
            refinements: 3,
        }
    }
}

/// Brouwer degree of f restricted to V^{S¹} on the domain's fixed slice,
/// by cell-wise Newton search and summation of sign det Df at the zeros.
///
/// Uses its own undamped Newton iteration with forward differences and LU
/// determinants, so it shares no code path with [`grad_degree`] beyond the
/// field callback.
pub fn brouwer_oracle<T: Scalar>(f: &GradientField<T>) -> Result<i64, DegreeError> {
    brouwer_oracle_with(f, &OracleOptions::default())
}

pub fn brouwer_oracle_with<T: Scalar>(
    f: &GradientField<T>,
    opts: &OracleOptions,
) -> Result<i64, DegreeError> {
    let dim = f.layout.dim();
    let triv = f.layout.trivial_indices();
    let d = triv.len();
    if d > 4 {
        return Err(DegreeError::OracleDimension(d));
    }
    let embed = |y: &[f64]| -> Vec<T> {
        let mut x = vec![T::zero(); dim];
        for (&i, &v) in triv.iter().zip(y) {
            x[i] = T::lit(v);
        }
        x
    };
    let inside = |y: &[f64]| f.domain.contains(&embed(y));
    if d == 0 {
        return Ok(if inside(&[]) { 1 } else { 0 });
    }
    let g = |y: &[f64]| -> Vec<f64> {
        let fx = f.eval(&embed(y));
        triv.iter().map(|&i| fx[i].as_f64()).collect()
    };
    let Some((lo, hi)) = f.domain.bounding_box() else {
        return Ok(0);
    };
    let lo: Vec<f64> = triv.iter().map(|&i| lo[i].as_f64()).collect();
    let hi: Vec<f64> = triv.iter().map(|&i| hi[i].as_f64()).collect();
    let width: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);

    // boundary
    {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xb0);
        let slice = fixed_slice(&f.domain, &triv);
        let pts = slice.sample_boundary(&mut rng, 64 * d);
        let mut min = f64::MAX;
        let mut max = 0.0f64;
        let mut arg = Vec::new();
        for y in pts {
            let n = g(&y).iter().map(|v| v * v).sum::<f64>().sqrt();
            max = max.max(n);
            if n < min {
                min = n;
                arg = y;
            }
        }
        if min <= 1e-9 * max.max(1.0) {
            return Err(DegreeError::BoundaryZero { at: arg, norm: min });
        }
    }

    let jac = |y: &[f64]| -> DMatrix<f64> {
        let h = 1e-7 * width.max(1.0);
        let f0 = g(y);
        let mut m = DMatrix::zeros(d, d);
        let mut yp = y.to_vec();
        for j in 0..d {
            yp[j] += h;
            let f1 = g(&yp);
            yp[j] = y[j];
            for i in 0..d {
                m[(i, j)] = (f1[i] - f0[i]) / h;
            }
        }
        m
    };
    let newton = |y0: Vec<f64>| -> Option<Vec<f64>> {
        let mut y = y0;
        for _ in 0..60 {
            let r = g(&y);
            let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rn < 1e-12 * (1.0 + width) {
                return Some(y);
            }
            let step = jac(&y).lu().solve(&nalgebra::DVector::from_vec(r))?;
            let sn = step.norm();
            // cap steps at a quarter of the domain width
            let cap = 0.25 * width;
            let s = if sn > cap { cap / sn } else { 1.0 };
            for (yi, di) in y.iter_mut().zip(step.iter()) {
                *yi -= s * di;
            }
            if !y.iter().all(|v| v.is_finite()) {
                return None;
            }
        }
        let rn = g(&y).iter().map(|v| v * v).sum::<f64>().sqrt();
        (rn < 1e-9 * (1.0 + width)).then_some(y)
    };

    let zero_set = |cells: usize| -> Vec<Vec<f64>> {
        let total = cells.pow(d as u32);
        let found: Vec<Vec<f64>> = (0..total)
            .into_par_iter()
            .filter_map(|mut idx| {
                let c: Vec<f64> = (0..d)
                    .map(|a| {
                        let i = idx % cells;
                        idx /= cells;
                        lo[a] + (hi[a] - lo[a]) * (i as f64 + 0.5) / cells as f64
                    })
                    .collect();
                newton(c)
            })
            .filter(|y| inside(y))
            .collect();
        let tol = 1e-7 * width.max(1.0);
        let mut uniq: Vec<Vec<f64>> = Vec::new();
        let mut sorted = found;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        for p in sorted {
            if !uniq
                .iter()
                .any(|q| q.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() < tol)
            {
                uniq.push(p);
            }
        }
        uniq
    };

    let same = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        a.len() == b.len()
            && a.iter().all(|p| {
                b.iter().any(|q| {
                    p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
                        < 1e-6 * width.max(1.0)
                })
            })
    };

    let mut cells = opts.initial_cells[d - 1];
    let mut prev = zero_set(cells);
    let mut stable = None;
    for _ in 0..opts.refinements {
        cells *= 2;
        let next = zero_set(cells);
        if same(&prev, &next) {
            stable = Some(next);
            break;
        }
        prev = next;
    }
    let zeros = stable.ok_or_else(|| {
        DegreeError::UnresolvedZeroCluster(format!("zero count not stable up to {cells} cells per axis"))
    })?;

    let mut degree = 0i64;
    for z in zeros {
        let j = jac(&z);
        let scale = j.norm().max(1e-300);
        let det = j.determinant();
        if det.abs() <= 1e-10 * scale.powi(d as i32) {
            return Err(DegreeError::UnresolvedZeroCluster(format!("degenerate zero at {z:?}")));
        }
        degree += if det > 0.0 { 1 } else { -1 };
    }
    Ok(degree)
}

/// The region's intersection with V^{S¹}, in fixed coordinates (f64).
fn fixed_slice<T: Scalar>(r: &Region<T>, triv: &[usize]) -> Region<f64> {
    let pick = |v: &[T]| -> Vec<f64> { triv.iter().map(|&i| v[i].as_f64()).collect() };
    match r {
        Region::Empty => Region::Empty,
        Region::Ball {
            center,
            radius,
            weights,
        } => Region::Ball {
            center: pick(center),
            radius: radius.as_f64(),
            weights: weights.as_ref().map(|w| pick(w)),
        },
        Region::Box { lo, hi } => Region::Box {
            lo: pick(lo),
            hi: pick(hi),
        },
        Region::Intersection(p) => Region::Intersection(p.iter().map(|q| fixed_slice(q, triv)).collect()),
        Region::Union(p) => Region::Union(p.iter().map(|q| fixed_slice(q, triv)).collect()),
        Region::Product(parts) => {
            let mut off = 0;
            let mut out = Vec::new();
            for q in parts {
                let d = q.dim().unwrap_or(0);
                let local: Vec<usize> = triv
                    .iter()
                    .filter(|&&i| i >= off && i < off + d)
                    .map(|&i| i - off)
                    .collect();
                if !local.is_empty() {
                    out.push(fixed_slice(q, &local));
                }
                off += d;
            }
            Region::Product(out)
        }
        Region::Permuted { positions, inner } => {
            // fixed inner coordinates and their rank among the outer fixed ones
            let mut local = Vec::new();
            let mut order = Vec::new();
            for (j, &p) in positions.iter().enumerate() {
                if let Ok(r) = triv.binary_search(&p) {
                    local.push(j);
                    order.push(r);
                }
            }
            fixed_slice(inner, &local).permuted(order)
        }
    }
}
