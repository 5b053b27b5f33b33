//! Bounded invariant regions in coordinate space and boundary sampling.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::{weighted_norm, Scalar};

/// A bounded open region. Balls may carry per-coordinate weights, giving
/// ellipsoids { x : Σ w_i (x_i − c_i)² < r² } (graph-norm balls).
#[derive(Debug, Clone, PartialEq)]
pub enum Region<T: Scalar> {
    Empty,
    Ball {
        center: Vec<T>,
        radius: T,
        weights: Option<Vec<T>>,
    },
    Box {
        lo: Vec<T>,
        hi: Vec<T>,
    },
    Intersection(Vec<Region<T>>),
    /// Union of pairwise disjoint regions.
    Union(Vec<Region<T>>),
    /// Cartesian product; coordinates are concatenated.
    Product(Vec<Region<T>>),
    /// `inner` with its coordinate j placed at position `positions[j]`.
    Permuted {
        positions: Vec<usize>,
        inner: Box<Region<T>>,
    },
}

const BOUNDARY_SLACK: f64 = 1e-9;

impl<T: Scalar> Region<T> {
    pub fn ball(center: Vec<T>, radius: T) -> Self {
        Region::Ball {
            center,
            radius,
            weights: None,
        }
    }

    pub fn centered_ball(dim: usize, radius: T) -> Self {
        Self::ball(vec![T::zero(); dim], radius)
    }

    pub fn weighted_ball(center: Vec<T>, radius: T, weights: Vec<T>) -> Self {
        Region::Ball {
            center,
            radius,
            weights: Some(weights),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Region::Empty => None,
            Region::Ball { center, .. } => Some(center.len()),
            Region::Box { lo, .. } => Some(lo.len()),
            Region::Intersection(parts) | Region::Union(parts) => {
                parts.iter().find_map(Region::dim)
            }
            Region::Product(parts) => parts.iter().map(Region::dim).sum(),
            Region::Permuted { positions, .. } => Some(positions.len()),
        }
    }

    /// Reorder coordinates: coordinate j of `self` lands at `positions[j]`.
    pub fn permuted(self, positions: Vec<usize>) -> Self {
        match self {
            Region::Empty => Region::Empty,
            r => Region::Permuted {
                positions,
                inner: Box::new(r),
            },
        }
    }

    fn gather(positions: &[usize], x: &[T]) -> Vec<T> {
        positions.iter().map(|&p| x[p]).collect()
    }

    fn scatter(positions: &[usize], y: Vec<T>) -> Vec<T> {
        let mut x = vec![T::zero(); positions.len()];
        for (&p, v) in positions.iter().zip(y) {
            x[p] = v;
        }
        x
    }

    /// Gauge function: < 1 inside, = 1 on the boundary, > 1 outside.
    pub fn gauge(&self, x: &[T]) -> T {
        let big = T::lit(f64::MAX);
        match self {
            Region::Empty => big,
            Region::Ball {
                center,
                radius,
                weights,
            } => {
                let d: Vec<T> = x.iter().zip(center).map(|(&a, &c)| a - c).collect();
                let n = match weights {
                    Some(w) => weighted_norm(&d, w),
                    None => crate::scalar::norm(&d),
                };
                n / *radius
            }
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&v, (&l, &h))| {
                    let mid = (l + h) * T::lit(0.5);
                    (v - mid).abs() / ((h - l) * T::lit(0.5))
                })
                .fold(T::zero(), |a, b| a.max(b)),
            Region::Intersection(parts) => parts
                .iter()
                .map(|p| p.gauge(x))
                .fold(T::zero(), |a, b| a.max(b)),
            Region::Union(parts) => parts.iter().map(|p| p.gauge(x)).fold(big, |a, b| a.min(b)),
            Region::Product(parts) => {
                let mut off = 0;
                let mut g = T::zero();
                for p in parts {
                    let d = p.dim().unwrap_or(0);
                    g = g.max(p.gauge(&x[off..off + d]));
                    off += d;
                }
                g
            }
            Region::Permuted { positions, inner } => inner.gauge(&Self::gather(positions, x)),
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        self.gauge(x) < T::one()
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Region::Empty => true,
            Region::Intersection(p) => p.iter().any(Region::is_empty) || self.interior_point().is_none(),
            Region::Union(p) => p.iter().all(Region::is_empty),
            Region::Product(p) => p.iter().any(Region::is_empty),
            Region::Permuted { inner, .. } => inner.is_empty(),
            _ => false,
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounding_box(&self) -> Option<(Vec<T>, Vec<T>)> {
        match self {
            Region::Empty => None,
            Region::Ball {
                center,
                radius,
                weights,
            } => {
                let half: Vec<T> = (0..center.len())
                    .map(|i| match weights {
                        Some(w) => *radius / w[i].sqrt(),
                        None => *radius,
                    })
                    .collect();
                Some((
                    center.iter().zip(&half).map(|(&c, &h)| c - h).collect(),
                    center.iter().zip(&half).map(|(&c, &h)| c + h).collect(),
                ))
            }
            Region::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            Region::Intersection(parts) => {
                let mut acc: Option<(Vec<T>, Vec<T>)> = None;
                for p in parts {
                    let (l, h) = p.bounding_box()?;
                    acc = Some(match acc {
                        None => (l, h),
                        Some((al, ah)) => (
                            al.iter().zip(&l).map(|(&a, &b)| a.max(b)).collect(),
                            ah.iter().zip(&h).map(|(&a, &b)| a.min(b)).collect(),
                        ),
                    });
                }
                acc
            }
            Region::Union(parts) => {
                let mut acc: Option<(Vec<T>, Vec<T>)> = None;
                for p in parts {
                    let Some((l, h)) = p.bounding_box() else { continue };
                    acc = Some(match acc {
                        None => (l, h),
                        Some((al, ah)) => (
                            al.iter().zip(&l).map(|(&a, &b)| a.min(b)).collect(),
                            ah.iter().zip(&h).map(|(&a, &b)| a.max(b)).collect(),
                        ),
                    });
                }
                acc
            }
            Region::Product(parts) => {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for p in parts {
                    let (l, h) = p.bounding_box()?;
                    lo.extend(l);
                    hi.extend(h);
                }
                Some((lo, hi))
            }
            Region::Permuted { positions, inner } => {
                let (l, h) = inner.bounding_box()?;
                Some((Self::scatter(positions, l), Self::scatter(positions, h)))
            }
        }
    }

    /// Some point of the region, when one is easily found.
    pub fn interior_point(&self) -> Option<Vec<T>> {
        match self {
            Region::Empty => None,
            Region::Ball { center, .. } => Some(center.clone()),
            Region::Box { lo, hi } => Some(
                lo.iter()
                    .zip(hi)
                    .map(|(&l, &h)| (l + h) * T::lit(0.5))
                    .collect(),
            ),
            Region::Intersection(parts) => {
                let pts: Vec<Vec<T>> = parts.iter().filter_map(Region::interior_point).collect();
                let mut candidates = pts.clone();
                for i in 0..pts.len() {
                    for j in i + 1..pts.len() {
                        candidates.push(
                            pts[i]
                                .iter()
                                .zip(&pts[j])
                                .map(|(&a, &b)| (a + b) * T::lit(0.5))
                                .collect(),
                        );
                    }
                }
                if !pts.is_empty() {
                    let n = T::of_usize(pts.len());
                    let mut mean = vec![T::zero(); pts[0].len()];
                    for p in &pts {
                        for (m, &v) in mean.iter_mut().zip(p) {
                            *m += v / n;
                        }
                    }
                    candidates.push(mean);
                }
                candidates.into_iter().find(|c| self.contains(c))
            }
            Region::Union(parts) => parts.iter().find_map(Region::interior_point),
            Region::Product(parts) => {
                let mut out = Vec::new();
                for p in parts {
                    out.extend(p.interior_point()?);
                }
                Some(out)
            }
            Region::Permuted { positions, inner } => Some(Self::scatter(positions, inner.interior_point()?)),
        }
    }

    fn sample_ball_boundary<R: Rng>(
        rng: &mut R,
        center: &[T],
        radius: T,
        weights: &Option<Vec<T>>,
    ) -> Vec<T> {
        loop {
            let u: Vec<T> = (0..center.len())
                .map(|_| T::lit(StandardNormal.sample(rng)))
                .collect();
            let n = match weights {
                Some(w) => weighted_norm(&u, w),
                None => crate::scalar::norm(&u),
            };
            if n > T::zero() {
                return center
                    .iter()
                    .zip(&u)
                    .map(|(&c, &v)| c + radius * v / n)
                    .collect();
            }
        }
    }

    /// One point on the boundary, or `None` when a rejection step failed.
    fn try_boundary<R: Rng>(&self, rng: &mut R) -> Option<Vec<T>> {
        let slack = T::one() + T::tol(BOUNDARY_SLACK);
        match self {
            Region::Empty => None,
            Region::Ball {
                center,
                radius,
                weights,
            } => Some(Self::sample_ball_boundary(rng, center, *radius, weights)),
            Region::Box { lo, hi } => {
                let d = lo.len();
                let face = rng.random_range(0..d);
                let side = rng.random_bool(0.5);
                Some(
                    (0..d)
                        .map(|i| {
                            if i == face {
                                if side {
                                    hi[i]
                                } else {
                                    lo[i]
                                }
                            } else {
                                lo[i] + (hi[i] - lo[i]) * T::lit(rng.random::<f64>())
                            }
                        })
                        .collect(),
                )
            }
            Region::Intersection(parts) => {
                let i = rng.random_range(0..parts.len());
                let x = parts[i].try_boundary(rng)?;
                parts
                    .iter()
                    .enumerate()
                    .all(|(j, p)| j == i || p.gauge(&x) <= slack)
                    .then_some(x)
            }
            Region::Union(parts) => {
                let i = rng.random_range(0..parts.len());
                let x = parts[i].try_boundary(rng)?;
                let inv = T::one() / slack;
                parts
                    .iter()
                    .enumerate()
                    .all(|(j, p)| j == i || p.gauge(&x) >= inv)
                    .then_some(x)
            }
            Region::Product(parts) => {
                let i = rng.random_range(0..parts.len());
                let mut out = Vec::new();
                for (j, p) in parts.iter().enumerate() {
                    if j == i {
                        out.extend(p.try_boundary(rng)?);
                    } else {
                        out.extend(p.try_interior(rng)?);
                    }
                }
                Some(out)
            }
            Region::Permuted { positions, inner } => Some(Self::scatter(positions, inner.try_boundary(rng)?)),
        }
    }

    fn try_interior<R: Rng>(&self, rng: &mut R) -> Option<Vec<T>> {
        match self {
            Region::Empty => None,
            Region::Ball {
                center,
                radius,
                weights,
            } => {
                let b = Self::sample_ball_boundary(rng, center, *radius, weights);
                let d = center.len().max(1) as f64;
                let s = T::lit(rng.random::<f64>().powf(1.0 / d) * 0.999);
                Some(center.iter().zip(&b).map(|(&c, &v)| c + s * (v - c)).collect())
            }
            Region::Box { lo, hi } => Some(
                lo.iter()
                    .zip(hi)
                    .map(|(&l, &h)| l + (h - l) * T::lit(rng.random::<f64>()))
                    .collect(),
            ),
            Region::Intersection(parts) => {
                let x = parts.first()?.try_interior(rng)?;
                self.contains(&x).then_some(x)
            }
            Region::Union(parts) => {
                let i = rng.random_range(0..parts.len());
                parts[i].try_interior(rng)
            }
            Region::Product(parts) => {
                let mut out = Vec::new();
                for p in parts {
                    out.extend(p.try_interior(rng)?);
                }
                Some(out)
            }
            Region::Permuted { positions, inner } => Some(Self::scatter(positions, inner.try_interior(rng)?)),
        }
    }

    /// `count` boundary points (fewer if rejection sampling keeps failing).
    pub fn sample_boundary<R: Rng>(&self, rng: &mut R, count: usize) -> Vec<Vec<T>> {
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count && attempts < 200 * count.max(1) {
            attempts += 1;
            if let Some(x) = self.try_boundary(rng) {
                out.push(x);
            }
        }
        out
    }

    pub fn sample_interior<R: Rng>(&self, rng: &mut R, count: usize) -> Vec<Vec<T>> {
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count && attempts < 200 * count.max(1) {
            attempts += 1;
            if let Some(x) = self.try_interior(rng) {
                out.push(x);
            }
        }
        out
    }

    /// The convex piece whose boundary passes through `x` (for unions, the
    /// member closest in gauge; otherwise the region itself).
    fn convex_piece(&self, x: &[T]) -> &Region<T> {
        match self {
            Region::Union(parts) => {
                let mut best = &parts[0];
                let mut best_gap = T::lit(f64::MAX);
                for p in parts {
                    let gap = (p.gauge(x) - T::one()).abs();
                    if gap < best_gap {
                        best_gap = gap;
                        best = p;
                    }
                }
                best.convex_piece(x)
            }
            _ => self,
        }
    }

    /// Radial retraction onto the boundary of the convex piece through
    /// `anchor`, centred at an interior point of that piece.
    pub fn boundary_retraction(&self, anchor: &[T]) -> Option<impl Fn(&[T]) -> Vec<T> + '_> {
        let piece = self.convex_piece(anchor);
        let p = piece.interior_point()?;
        Some(move |y: &[T]| piece.radial_boundary_point(&p, y))
    }

    fn radial_boundary_point(&self, p: &[T], y: &[T]) -> Vec<T> {
        let d: Vec<T> = y.iter().zip(p).map(|(&a, &b)| a - b).collect();
        let at = |s: T| -> Vec<T> { p.iter().zip(&d).map(|(&a, &v)| a + s * v).collect() };
        if let Region::Ball {
            radius, weights, ..
        } = self
        {
            let n = match weights {
                Some(w) => weighted_norm(&d, w),
                None => crate::scalar::norm(&d),
            };
            if n > T::zero() {
                return at(*radius / n);
            }
            return y.to_vec();
        }
        let mut hi = T::one();
        let mut guard = 0;
        while self.gauge(&at(hi)) < T::one() && guard < 200 {
            hi *= T::lit(2.0);
            guard += 1;
        }
        let mut lo = T::zero();
        for _ in 0..60 {
            let mid = (lo + hi) * T::lit(0.5);
            if self.gauge(&at(mid)) < T::one() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at((lo + hi) * T::lit(0.5))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ball_boundary_samples_have_unit_gauge() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = Region::<f64>::weighted_ball(vec![1.0, 0.0, 0.0], 2.0, vec![1.0, 4.0, 9.0]);
        for x in r.sample_boundary(&mut rng, 50) {
            assert!((r.gauge(&x) - 1.0).abs() < 1e-12);
        }
        let (lo, hi) = r.bounding_box().unwrap();
        assert_eq!(lo, vec![-1.0, -1.0, -2.0 / 3.0]);
        assert_eq!(hi, vec![3.0, 1.0, 2.0 / 3.0]);
    }

    #[test]
    fn composite_regions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Region::<f64>::ball(vec![-1.0], 0.5);
        let b = Region::ball(vec![1.0], 0.5);
        let u = Region::Union(vec![a.clone(), b.clone()]);
        assert!(u.contains(&[1.2]) && u.contains(&[-0.7]) && !u.contains(&[0.0]));
        let pts = u.sample_boundary(&mut rng, 40);
        assert_eq!(pts.len(), 40);
        for x in &pts {
            assert!([-1.5, -0.5, 0.5, 1.5].iter().any(|e| (x[0] - *e).abs() < 1e-12));
        }
        let i = Region::<f64>::Intersection(vec![Region::ball(vec![0.0, 0.0], 1.0), Region::ball(vec![1.0, 0.0], 1.0)]);
        let p = i.interior_point().unwrap();
        assert!(i.contains(&p));
        for x in i.sample_boundary(&mut rng, 30) {
            assert!((i.gauge(&x) - 1.0).abs() < 1e-8);
        }
        let prod = Region::<f64>::Product(vec![Region::ball(vec![0.0], 1.0), Region::ball(vec![0.0, 0.0], 2.0)]);
        assert_eq!(prod.dim(), Some(3));
        for x in prod.sample_boundary(&mut rng, 30) {
            assert!((prod.gauge(&x) - 1.0).abs() < 1e-12);
        }
        assert!(Region::Intersection(vec![a, b]).is_empty());
    }

    #[test]
    fn retraction_lands_on_boundary() {
        let i = Region::<f64>::Intersection(vec![Region::ball(vec![0.0, 0.0], 1.0), Region::ball(vec![1.0, 0.0], 1.0)]);
        let anchor = vec![0.5, 0.8];
        let retract = i.boundary_retraction(&anchor).unwrap();
        let y = retract(&[3.0, 1.0]);
        assert!((i.gauge(&y) - 1.0).abs() < 1e-9);
        let b = Region::<f64>::Box { lo: vec![-1.0, -2.0], hi: vec![1.0, 2.0] };
        let retract = b.boundary_retraction(&[1.0, 0.0]).unwrap();
        let y = retract(&[0.1, 0.1]);
        assert!((b.gauge(&y) - 1.0).abs() < 1e-9);
    }
}
