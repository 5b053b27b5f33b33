//! Dense numerical kernels: finite-difference Jacobians, damped Newton and
//! Levenberg–Marquardt iterations.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{norm, Scalar};

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian<T, F>(f: &F, x: &[T], rel_step: f64) -> DMatrix<T>
where
    T: Scalar,
    F: Fn(&[T]) -> Vec<T> + ?Sized,
{
    let n = x.len();
    let scale = T::one().max(norm(x));
    let h = T::lit(rel_step.max(T::EPS.cbrt())) * scale;
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let orig = xp[j];
        xp[j] = orig + h;
        let fp = f(&xp);
        xp[j] = orig - h;
        let fm = f(&xp);
        xp[j] = orig;
        cols.push(fp.iter().zip(&fm).map(|(&a, &b)| (a - b) / (h + h)).collect());
    }
    let m = cols.first().map_or(0, Vec::len);
    DMatrix::from_fn(m, n, |i, j| cols[j][i])
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Convergence threshold on the residual norm and on the step norm.
    pub tol: f64,
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iter: 50,
            tol: 1e-10,
            fd_step: 1e-6,
        }
    }
}

/// Damped Newton iteration for a square system. Returns the converged point,
/// or `None` when the iteration stalls, diverges or meets a singular Jacobian.
pub fn damped_newton<T, F>(f: &F, x0: &[T], opts: NewtonOptions) -> Option<Vec<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> Vec<T> + ?Sized,
{
    let tol = T::tol(opts.tol);
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut r = norm(&fx);
    for _ in 0..opts.max_iter {
        if !r.is_finite() {
            return None;
        }
        if r <= tol {
            return Some(x);
        }
        let jac = fd_jacobian(f, &x, opts.fd_step);
        let rhs = DVector::from_iterator(fx.len(), fx.iter().map(|&v| -v));
        let step = jac.lu().solve(&rhs)?;
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<T> = x.iter().zip(step.iter()).map(|(&a, &d)| a + alpha * d).collect();
            let ft = f(&trial);
            let rt = norm(&ft);
            if rt.is_finite() && rt < r {
                x = trial;
                fx = ft;
                r = rt;
                accepted = true;
                break;
            }
            alpha *= T::lit(0.5);
        }
        let step_norm = alpha * step.norm();
        if !accepted {
            // no decrease: only accept a point already at roundoff level
            return (r <= T::tol(opts.tol * 1e3)).then_some(x);
        }
        if step_norm <= tol * (T::one() + norm(&x)) && r <= T::tol(1e-7) {
            return Some(x);
        }
    }
    (r <= tol).then_some(x)
}

#[derive(Debug, Clone)]
pub struct LmOutcome<T> {
    pub x: Vec<T>,
    pub residual: T,
}

/// Levenberg–Marquardt minimization of |r(y)|² from `y0`.
pub fn levenberg_marquardt<T, F>(r: &F, y0: &[T], max_iter: usize, fd_step: f64) -> LmOutcome<T>
where
    T: Scalar,
    F: Fn(&[T]) -> Vec<T> + ?Sized,
{
    let mut y = y0.to_vec();
    let mut ry = r(&y);
    let mut cost = norm(&ry);
    let mut mu = T::lit(1e-3);
    let floor = T::tol(1e-15);
    for _ in 0..max_iter {
        if cost <= floor {
            break;
        }
        let jac = fd_jacobian(r, &y, fd_step);
        let jt = jac.transpose();
        let g = &jt * DVector::from_column_slice(&ry);
        let jtj = &jt * &jac;
        let scale = jtj.diagonal().iter().fold(T::zero(), |a, &b| a.max(b)).max(T::tol(1e-300));
        let mut improved = false;
        for _ in 0..10 {
            let mut lhs = jtj.clone();
            for i in 0..lhs.nrows() {
                lhs[(i, i)] += mu * scale;
            }
            let Some(step) = lhs.cholesky().map(|c| c.solve(&(-&g))) else {
                mu *= T::lit(10.0);
                continue;
            };
            let trial: Vec<T> = y.iter().zip(step.iter()).map(|(&a, &d)| a + d).collect();
            let rt = r(&trial);
            let ct = norm(&rt);
            if ct.is_finite() && ct < cost {
                y = trial;
                ry = rt;
                cost = ct;
                mu = (mu * T::lit(0.3)).max(T::lit(1e-12));
                improved = true;
                break;
            }
            mu *= T::lit(10.0);
        }
        if !improved {
            break;
        }
    }
    LmOutcome { x: y, residual: cost }
}
