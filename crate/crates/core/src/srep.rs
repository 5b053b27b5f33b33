//! Orthogonal S¹-representations, their coordinate layouts, equivariant
//! self-adjoint operators given per isotypic block, and spectral operators
//! enumerated shell by shell.
//!
//! Coordinates of a single [`Rep`] are ordered as: the `trivial` real
//! coordinates, then for each mode k (ascending) `n_k` complex coordinates
//! stored as (re, im) pairs. The circle element θ rotates each mode-k pair
//! by the angle kθ.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Relative Frobenius tolerance for symmetric/Hermitian blocks.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative threshold below which an eigenvalue counts as zero.
pub const SINGULAR_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepError {
    #[error("block for {what} has size {got}, representation requires {expected}")]
    BlockSize {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("block for {what} is not self-adjoint (relative asymmetry {asymmetry:.3e})")]
    NotSelfAdjoint { what: String, asymmetry: f64 },
    #[error("operator is near-singular: eigenvalue {eigenvalue:.3e} in block {what} (block norm {norm:.3e})")]
    NearSingular {
        what: String,
        eigenvalue: f64,
        norm: f64,
    },
    #[error("malformed spectrum: {0}")]
    MalformedSpectrum(String),
}

/// A finite-dimensional orthogonal S¹-representation ℝ^{n₀} ⊕ ⊕_k ℂ^{n_k}(k).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Rep {
    pub trivial: usize,
    modes: BTreeMap<u32, usize>,
}

impl Rep {
    pub fn zero() -> Self {
        Rep::default()
    }

    pub fn new<I: IntoIterator<Item = (u32, usize)>>(trivial: usize, modes: I) -> Self {
        let mut m = BTreeMap::new();
        for (k, n) in modes {
            assert!(k >= 1, "mode index must be positive");
            *m.entry(k).or_insert(0) += n;
        }
        m.retain(|_, n| *n > 0);
        Rep { trivial, modes: m }
    }

    pub fn trivial(n: usize) -> Self {
        Rep::new(n, [])
    }

    pub fn mode(k: u32, n: usize) -> Self {
        Rep::new(0, [(k, n)])
    }

    pub fn modes(&self) -> &BTreeMap<u32, usize> {
        &self.modes
    }

    pub fn mult(&self, k: u32) -> usize {
        self.modes.get(&k).copied().unwrap_or(0)
    }

    /// Real dimension n₀ + 2·Σ n_k.
    pub fn dim(&self) -> usize {
        self.trivial + 2 * self.modes.values().sum::<usize>()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn direct_sum(&self, other: &Rep) -> Rep {
        Rep::new(
            self.trivial + other.trivial,
            self.modes.iter().chain(other.modes.iter()).map(|(&k, &n)| (k, n)),
        )
    }
}

impl fmt::Display for Rep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(ℝ^{}", self.trivial)?;
        for (k, n) in &self.modes {
            write!(f, " ⊕ ℂ^{n}[{k}]")?;
        }
        write!(f, ")")
    }
}

#[derive(Serialize, Deserialize)]
struct RepRepr {
    trivial: usize,
    modes: Vec<[u64; 2]>,
}

impl Serialize for Rep {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RepRepr {
            trivial: self.trivial,
            modes: self.modes.iter().map(|(&k, &n)| [k as u64, n as u64]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rep {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = RepRepr::deserialize(d)?;
        let mut modes = Vec::with_capacity(r.modes.len());
        for [k, n] in r.modes {
            if k == 0 || k > u32::MAX as u64 {
                return Err(serde::de::Error::custom(format!("invalid mode index {k}")));
            }
            modes.push((k as u32, n as usize));
        }
        Ok(Rep::new(r.trivial, modes))
    }
}

/// An ordered concatenation of representation blocks, each stored in the
/// standard coordinate order of its [`Rep`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Layout {
    blocks: Vec<Rep>,
}

impl Layout {
    pub fn new(blocks: Vec<Rep>) -> Self {
        Layout { blocks }
    }

    pub fn single(rep: Rep) -> Self {
        Layout { blocks: vec![rep] }
    }

    pub fn blocks(&self) -> &[Rep] {
        &self.blocks
    }

    pub fn concat(&self, other: &Layout) -> Layout {
        Layout {
            blocks: self.blocks.iter().chain(&other.blocks).cloned().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Rep::dim).sum()
    }

    pub fn rep(&self) -> Rep {
        self.blocks.iter().fold(Rep::zero(), |acc, r| acc.direct_sum(r))
    }

    /// Indices of coordinates spanning the fixed subspace V^{S¹}.
    pub fn trivial_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut offset = 0;
        for b in &self.blocks {
            out.extend(offset..offset + b.trivial);
            offset += b.dim();
        }
        out
    }

    /// Index of the real part of every mode-k complex coordinate.
    pub fn mode_pairs(&self, k: u32) -> Vec<usize> {
        let mut out = Vec::new();
        let mut offset = 0;
        for b in &self.blocks {
            let mut pos = offset + b.trivial;
            for (&kk, &n) in b.modes() {
                if kk == k {
                    out.extend((0..n).map(|j| pos + 2 * j));
                }
                pos += 2 * n;
            }
            offset += b.dim();
        }
        out
    }

    /// Rotation frequency of each coordinate (0 for trivial ones).
    pub fn frequencies(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.dim());
        for b in &self.blocks {
            out.extend(std::iter::repeat_n(0, b.trivial));
            for (&k, &n) in b.modes() {
                out.extend(std::iter::repeat_n(k, 2 * n));
            }
        }
        out
    }

    /// Action of the circle element θ on a coordinate vector.
    pub fn act<T: Scalar>(&self, theta: T, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.dim());
        let freq = self.frequencies();
        let mut out = x.to_vec();
        let mut i = 0;
        while i < out.len() {
            if freq[i] == 0 {
                i += 1;
                continue;
            }
            let angle = theta * T::lit(freq[i] as f64);
            let (s, c) = (angle.sin(), angle.cos());
            let (re, im) = (x[i], x[i + 1]);
            out[i] = c * re - s * im;
            out[i + 1] = s * re + c * im;
            i += 2;
        }
        out
    }

    /// Euclidean norm of the mode part: the distance of x from V^{S¹}.
    pub fn normal_norm<T: Scalar>(&self, x: &[T]) -> T {
        self.frequencies()
            .iter()
            .zip(x)
            .filter(|(k, _)| **k != 0)
            .fold(T::zero(), |acc, (_, &v)| acc + v * v)
            .sqrt()
    }
}

/// An equivariant self-adjoint operator on a [`Rep`], given by its
/// isotypic blocks: a real symmetric block on the trivial part and one
/// Hermitian block per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivariantSymOp<T: Scalar> {
    rep: Rep,
    trivial: DMatrix<T>,
    modes: BTreeMap<u32, DMatrix<Complex<T>>>,
}

fn rel_asymmetry<T: Scalar>(m: &DMatrix<Complex<T>>) -> f64 {
    let diff = m - m.adjoint();
    let n = m.norm().as_f64();
    if n == 0.0 {
        0.0
    } else {
        diff.norm().as_f64() / n
    }
}

impl<T: Scalar> EquivariantSymOp<T> {
    pub fn new(
        rep: Rep,
        trivial: DMatrix<T>,
        modes: BTreeMap<u32, DMatrix<Complex<T>>>,
    ) -> Result<Self, RepError> {
        if trivial.nrows() != rep.trivial || trivial.ncols() != rep.trivial {
            return Err(RepError::BlockSize {
                what: "trivial part".into(),
                expected: rep.trivial,
                got: trivial.nrows().max(trivial.ncols()),
            });
        }
        for (&k, &n) in rep.modes() {
            let got = modes.get(&k).map(|b| b.nrows().max(b.ncols())).unwrap_or(0);
            let square = modes.get(&k).is_some_and(|b| b.is_square());
            if got != n || !square {
                return Err(RepError::BlockSize {
                    what: format!("mode {k}"),
                    expected: n,
                    got,
                });
            }
        }
        if let Some((&k, b)) = modes.iter().find(|(k, _)| rep.mult(**k) == 0) {
            return Err(RepError::BlockSize {
                what: format!("mode {k}"),
                expected: 0,
                got: b.nrows(),
            });
        }
        let tol = T::tol(SYMMETRY_TOL).as_f64();
        let t_asym = rel_asymmetry(&trivial.map(|x| Complex::new(x, T::zero())));
        if t_asym > tol {
            return Err(RepError::NotSelfAdjoint {
                what: "trivial part".into(),
                asymmetry: t_asym,
            });
        }
        for (k, b) in &modes {
            let a = rel_asymmetry(b);
            if a > tol {
                return Err(RepError::NotSelfAdjoint {
                    what: format!("mode {k}"),
                    asymmetry: a,
                });
            }
        }
        Ok(EquivariantSymOp { rep, trivial, modes })
    }

    /// Block-diagonal operator: real diagonal on the trivial part, real
    /// diagonal per mode.
    pub fn diagonal(trivial: &[T], modes: &BTreeMap<u32, Vec<T>>) -> Self {
        let rep = Rep::new(trivial.len(), modes.iter().map(|(&k, v)| (k, v.len())));
        let t = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(trivial));
        let m = modes
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(&k, v)| {
                let d: Vec<Complex<T>> = v.iter().map(|&x| Complex::new(x, T::zero())).collect();
                (k, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)))
            })
            .collect();
        EquivariantSymOp {
            rep,
            trivial: t,
            modes: m,
        }
    }

    pub fn scalar(rep: &Rep, value: T) -> Self {
        let modes = rep
            .modes()
            .iter()
            .map(|(&k, &n)| (k, vec![value; n]))
            .collect();
        Self::diagonal(&vec![value; rep.trivial], &modes)
    }

    pub fn identity(rep: &Rep) -> Self {
        Self::scalar(rep, T::one())
    }

    pub fn rep(&self) -> &Rep {
        &self.rep
    }

    pub fn trivial_block(&self) -> &DMatrix<T> {
        &self.trivial
    }

    pub fn mode_block(&self, k: u32) -> Option<&DMatrix<Complex<T>>> {
        self.modes.get(&k)
    }

    pub fn scaled(&self, c: T) -> Self {
        EquivariantSymOp {
            rep: self.rep.clone(),
            trivial: &self.trivial * c,
            modes: self
                .modes
                .iter()
                .map(|(&k, b)| (k, b.map(|z| z * c)))
                .collect(),
        }
    }

    /// Block-diagonal join B ⊕ B'.
    pub fn direct_sum(&self, other: &Self) -> Self {
        fn join<S: nalgebra::Scalar + num_traits::Zero>(a: &DMatrix<S>, b: &DMatrix<S>) -> DMatrix<S> {
            let n = a.nrows() + b.nrows();
            let mut out = DMatrix::from_element(n, n, S::zero());
            out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
            out.view_mut((a.nrows(), a.ncols()), (b.nrows(), b.ncols()))
                .copy_from(b);
            out
        }
        let mut modes = self.modes.clone();
        for (&k, b) in &other.modes {
            let joined = match modes.get(&k) {
                Some(a) => join(a, b),
                None => b.clone(),
            };
            modes.insert(k, joined);
        }
        EquivariantSymOp {
            rep: self.rep.direct_sum(&other.rep),
            trivial: join(&self.trivial, &other.trivial),
            modes,
        }
    }

    /// Project a full real matrix on the coordinates of `layout` onto its
    /// equivariant part and split it into isotypic blocks. The input is
    /// symmetrized first.
    pub fn from_real_matrix(layout: &Layout, m: &DMatrix<T>) -> Result<Self, RepError> {
        let n = layout.dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(RepError::BlockSize {
                what: "full matrix".into(),
                expected: n,
                got: m.nrows(),
            });
        }
        let half = T::lit(0.5);
        let sym = (m + m.transpose()) * half;
        let triv = layout.trivial_indices();
        let trivial = DMatrix::from_fn(triv.len(), triv.len(), |i, j| sym[(triv[i], triv[j])]);
        let rep = layout.rep();
        let mut modes = BTreeMap::new();
        for &k in rep.modes().keys() {
            let p = layout.mode_pairs(k);
            // A real block commuting with rotation has the form [[X, -Y], [Y, X]];
            // X + iY is the Hermitian block (in the convention z = re + i·im).
            let block = DMatrix::from_fn(p.len(), p.len(), |i, j| {
                let (a, b) = (p[i], p[j]);
                let x = (sym[(a, b)] + sym[(a + 1, b + 1)]) * half;
                let y = (sym[(a + 1, b)] - sym[(a, b + 1)]) * half;
                Complex::new(x, y)
            });
            let block = (&block + block.adjoint()).map(|z| z * half);
            modes.insert(k, block);
        }
        Ok(EquivariantSymOp { rep, trivial, modes })
    }

    /// The operator as a real matrix in the standard coordinates of its rep.
    pub fn to_real_matrix(&self) -> DMatrix<T> {
        let n = self.rep.dim();
        let mut m = DMatrix::zeros(n, n);
        let t = self.rep.trivial;
        m.view_mut((0, 0), (t, t)).copy_from(&self.trivial);
        let mut off = t;
        for (&k, &mult) in self.rep.modes() {
            let b = &self.modes[&k];
            for i in 0..mult {
                for j in 0..mult {
                    let (x, y) = (b[(i, j)].re, b[(i, j)].im);
                    let (r, c) = (off + 2 * i, off + 2 * j);
                    m[(r, c)] = x;
                    m[(r, c + 1)] = -y;
                    m[(r + 1, c)] = y;
                    m[(r + 1, c + 1)] = x;
                }
            }
            off += 2 * mult;
        }
        m
    }

    /// Eigenvalues of the trivial block, ascending.
    pub fn trivial_eigenvalues(&self) -> Vec<T> {
        if self.trivial.is_empty() {
            return Vec::new();
        }
        sorted(self.trivial.clone().symmetric_eigenvalues().iter().copied().collect())
    }

    /// Eigenvalues of the mode-k Hermitian block, ascending.
    pub fn mode_eigenvalues(&self, k: u32) -> Vec<T> {
        match self.modes.get(&k) {
            Some(b) if !b.is_empty() => sorted(b.clone().symmetric_eigenvalues().iter().copied().collect()),
            _ => Vec::new(),
        }
    }

    fn count_negative(eigs: &[T], norm: T, what: String) -> Result<usize, RepError> {
        let thresh = T::tol(SINGULAR_TOL) * norm;
        let mut neg = 0;
        for &e in eigs {
            if e.abs() <= thresh {
                return Err(RepError::NearSingular {
                    what,
                    eigenvalue: e.as_f64(),
                    norm: norm.as_f64(),
                });
            }
            if e < T::zero() {
                neg += 1;
            }
        }
        Ok(neg)
    }

    /// The negative eigenspace as a representation. Fails when some block
    /// has an eigenvalue within the relative singularity threshold of 0.
    pub fn negative_part(&self) -> Result<Rep, RepError> {
        let trivial = Self::count_negative(
            &self.trivial_eigenvalues(),
            self.trivial.norm(),
            "trivial part".into(),
        )?;
        let mut modes = Vec::new();
        for (&k, b) in &self.modes {
            let n = Self::count_negative(&self.mode_eigenvalues(k), b.norm(), format!("mode {k}"))?;
            modes.push((k, n));
        }
        Ok(Rep::new(trivial, modes))
    }
}

fn sorted<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    v
}

/// One eigenspace V(λ) of a spectral operator, with its coordinate layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenspace<T: Scalar> {
    pub value: T,
    pub layout: Layout,
}

impl<T: Scalar> Eigenspace<T> {
    pub fn new(value: T, rep: Rep) -> Self {
        Eigenspace {
            value,
            layout: Layout::single(rep),
        }
    }

    pub fn rep(&self) -> Rep {
        self.layout.rep()
    }
}

type ShellFn<T> = dyn Fn(usize) -> Vec<Eigenspace<T>> + Send + Sync;

/// A self-adjoint operator with purely discrete spectrum, enumerated shell
/// by shell: shell 0 is the kernel, shell n ≥ 1 holds the eigenvalues with
/// n−1 < |λ| ≤ n in ascending order.
#[derive(Clone)]
pub struct SpectralOperator<T: Scalar> {
    shells: Arc<ShellFn<T>>,
    label: String,
}

impl<T: Scalar> fmt::Debug for SpectralOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralOperator")
            .field("label", &self.label)
            .finish()
    }
}

/// Shell index of an eigenvalue under the unit-width convention (n−1, n].
pub fn shell_of<T: Scalar>(value: T) -> usize {
    let a = value.abs().as_f64();
    if a == 0.0 {
        0
    } else {
        a.ceil() as usize
    }
}

fn validate_shell<T: Scalar>(n: usize, entries: &[Eigenspace<T>]) -> Result<(), RepError> {
    for (i, e) in entries.iter().enumerate() {
        if !e.value.is_finite() {
            return Err(RepError::MalformedSpectrum(format!("non-finite eigenvalue in shell {n}")));
        }
        if shell_of(e.value) != n {
            return Err(RepError::MalformedSpectrum(format!(
                "eigenvalue {} listed in shell {n} but belongs to shell {}",
                e.value,
                shell_of(e.value)
            )));
        }
        if e.layout.dim() == 0 {
            return Err(RepError::MalformedSpectrum(format!(
                "eigenvalue {} has a zero-dimensional eigenspace",
                e.value
            )));
        }
        if i > 0 && entries[i - 1].value >= e.value {
            return Err(RepError::MalformedSpectrum(format!(
                "eigenvalues of shell {n} must be distinct and ascending"
            )));
        }
    }
    Ok(())
}

impl<T: Scalar> SpectralOperator<T> {
    /// Operator whose shells are produced on demand. The generator must
    /// return, for every n, the eigenspaces of shell n in ascending order.
    pub fn from_generator<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(usize) -> Vec<Eigenspace<T>> + Send + Sync + 'static,
    {
        SpectralOperator {
            shells: Arc::new(f),
            label: label.into(),
        }
    }

    /// Operator with finitely many eigenvalues (all later shells empty),
    /// binned into unit-width shells.
    pub fn from_eigenvalues(
        label: impl Into<String>,
        entries: Vec<(T, Rep)>,
    ) -> Result<Self, RepError> {
        let mut table: Vec<Vec<Eigenspace<T>>> = Vec::new();
        for (value, rep) in entries {
            let n = shell_of(value);
            if table.len() <= n {
                table.resize(n + 1, Vec::new());
            }
            table[n].push(Eigenspace::new(value, rep));
        }
        for shell in &mut table {
            shell.sort_by(|a, b| a.value.partial_cmp(&b.value).expect("finite eigenvalues"));
        }
        Self::from_table(label, table)
    }

    /// Operator from an explicit shell table (index = shell level).
    pub fn from_table(
        label: impl Into<String>,
        table: Vec<Vec<Eigenspace<T>>>,
    ) -> Result<Self, RepError> {
        for (n, shell) in table.iter().enumerate() {
            validate_shell(n, shell)?;
        }
        let table = Arc::new(table);
        Ok(Self::from_generator(label, move |n| {
            table.get(n).cloned().unwrap_or_default()
        }))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Eigenspaces of shell n, validated against the shell invariant.
    pub fn shell(&self, n: usize) -> Result<Vec<Eigenspace<T>>, RepError> {
        let s = (self.shells)(n);
        validate_shell(n, &s)?;
        Ok(s)
    }

    /// V(λ), or the zero representation when λ is not an eigenvalue.
    pub fn eigenspace(&self, value: T) -> Result<Rep, RepError> {
        Ok(self
            .shell(shell_of(value))?
            .into_iter()
            .find(|e| e.value == value)
            .map(|e| e.rep())
            .unwrap_or_default())
    }

    pub fn kernel_rep(&self) -> Result<Rep, RepError> {
        Ok(self
            .shell(0)?
            .iter()
            .fold(Rep::zero(), |acc, e| acc.direct_sum(&e.rep())))
    }

    /// V^n as a representation.
    pub fn shell_rep(&self, n: usize) -> Result<Rep, RepError> {
        Ok(self
            .shell(n)?
            .iter()
            .fold(Rep::zero(), |acc, e| acc.direct_sum(&e.rep())))
    }

    /// Coordinate layout of V_n = V^0 ⊕ … ⊕ V^n.
    pub fn layout(&self, n: usize) -> Result<Layout, RepError> {
        let mut blocks = Vec::new();
        for s in 0..=n {
            for e in self.shell(s)? {
                blocks.extend(e.layout.blocks().iter().cloned());
            }
        }
        Ok(Layout::new(blocks))
    }

    pub fn dim(&self, n: usize) -> Result<usize, RepError> {
        let mut d = 0;
        for s in 0..=n {
            d += self.shell(s)?.iter().map(|e| e.layout.dim()).sum::<usize>();
        }
        Ok(d)
    }

    /// Eigenvalue of A at each coordinate of V_n.
    pub fn diag(&self, n: usize) -> Result<Vec<T>, RepError> {
        let mut out = Vec::new();
        for s in 0..=n {
            for e in self.shell(s)? {
                out.extend(std::iter::repeat_n(e.value, e.layout.dim()));
            }
        }
        Ok(out)
    }

    /// Weights 1 + λ² of the graph inner product ⟨x|y⟩ + ⟨Ax|Ay⟩ on V_n.
    pub fn graph_weights(&self, n: usize) -> Result<Vec<T>, RepError> {
        Ok(self
            .diag(n)?
            .into_iter()
            .map(|l| T::one() + l * l)
            .collect())
    }

    /// A_n = A restricted to V^n, as an equivariant operator on the shell rep.
    pub fn shell_operator(&self, n: usize) -> Result<EquivariantSymOp<T>, RepError> {
        let mut trivial = Vec::new();
        let mut modes: BTreeMap<u32, Vec<T>> = BTreeMap::new();
        for e in self.shell(n)? {
            let rep = e.rep();
            trivial.extend(std::iter::repeat_n(e.value, rep.trivial));
            for (&k, &m) in rep.modes() {
                modes.entry(k).or_default().extend(std::iter::repeat_n(e.value, m));
            }
        }
        Ok(EquivariantSymOp::diagonal(&trivial, &modes))
    }

    /// A ⊕ A' on E ⊕ E'. Equal eigenvalues are merged; the merged eigenspace
    /// keeps the coordinates of A's eigenspace first.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let label = format!("{} ⊕ {}", self.label, other.label);
        Self::from_generator(label, move |n| merge_shells((a.shells)(n), (b.shells)(n)).0)
    }
}

/// Merge two ascending shells; also returns, for each entry of the merged
/// list, which inputs contributed (index into a, index into b).
#[allow(clippy::type_complexity)]
fn merge_shells<T: Scalar>(
    a: Vec<Eigenspace<T>>,
    b: Vec<Eigenspace<T>>,
) -> (Vec<Eigenspace<T>>, Vec<(Option<usize>, Option<usize>)>) {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    let mut src = Vec::new();
    while i < a.len() || j < b.len() {
        let take_a = j >= b.len() || (i < a.len() && a[i].value < b[j].value);
        let take_b = i >= a.len() || (j < b.len() && b[j].value < a[i].value);
        if take_a {
            out.push(a[i].clone());
            src.push((Some(i), None));
            i += 1;
        } else if take_b {
            out.push(b[j].clone());
            src.push((None, Some(j)));
            j += 1;
        } else {
            out.push(Eigenspace {
                value: a[i].value,
                layout: a[i].layout.concat(&b[j].layout),
            });
            src.push((Some(i), Some(j)));
            i += 1;
            j += 1;
        }
    }
    (out, src)
}

/// Positions of the V_n(A) and V_n(A') coordinates inside V_n(A ⊕ A').
pub fn direct_sum_index_maps<T: Scalar>(
    a: &SpectralOperator<T>,
    b: &SpectralOperator<T>,
    n: usize,
) -> Result<(Vec<usize>, Vec<usize>), RepError> {
    let mut map_a = Vec::new();
    let mut map_b = Vec::new();
    let mut pos = 0;
    for s in 0..=n {
        let sa = a.shell(s)?;
        let sb = b.shell(s)?;
        let (merged, src) = merge_shells(sa.clone(), sb.clone());
        for (entry, (ia, ib)) in merged.iter().zip(src) {
            if let Some(ia) = ia {
                let d = sa[ia].layout.dim();
                map_a.extend(pos..pos + d);
                pos += d;
            }
            if let Some(ib) = ib {
                let d = sb[ib].layout.dim();
                map_b.extend(pos..pos + d);
                pos += d;
            }
            debug_assert!(entry.layout.dim() > 0);
        }
    }
    Ok((map_a, map_b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims() {
        assert_eq!(Rep::zero().dim(), 0);
        assert_eq!(Rep::new(2, [(1, 1)]).dim(), 4);
        assert_eq!(Rep::new(1, [(2, 3), (5, 1)]).dim(), 9);
    }

    #[test]
    fn direct_sums() {
        let r = Rep::new(1, [(1, 1)]);
        assert_eq!(r.direct_sum(&Rep::zero()), r);
        assert_eq!(r.direct_sum(&Rep::new(0, [(1, 2)])), Rep::new(1, [(1, 3)]));
    }

    #[test]
    fn negative_parts() {
        let r = Rep::new(2, [(1, 2), (3, 1)]);
        let id = EquivariantSymOp::<f64>::identity(&r);
        assert_eq!(id.negative_part().unwrap(), Rep::zero());
        assert_eq!(id.scaled(-1.0).negative_part().unwrap(), r);

        let mut modes = BTreeMap::new();
        modes.insert(1, vec![-1.0]);
        let b = EquivariantSymOp::diagonal(&[2.0, -3.0], &modes);
        assert_eq!(b.negative_part().unwrap(), Rep::new(1, [(1, 1)]));
    }

    #[test]
    fn near_singular_is_rejected() {
        let b = EquivariantSymOp::diagonal(&[1.0, 1e-13], &BTreeMap::new());
        assert!(matches!(b.negative_part(), Err(RepError::NearSingular { .. })));
    }

    #[test]
    fn block_validation() {
        let rep = Rep::new(1, [(1, 1)]);
        let bad = EquivariantSymOp::<f64>::new(rep.clone(), DMatrix::identity(1, 1), BTreeMap::new());
        assert!(matches!(bad, Err(RepError::BlockSize { .. })));
        let mut modes = BTreeMap::new();
        modes.insert(
            1,
            DMatrix::from_row_slice(1, 1, &[Complex::new(1.0, 0.5)]),
        );
        let bad = EquivariantSymOp::<f64>::new(rep, DMatrix::identity(1, 1), modes);
        assert!(matches!(bad, Err(RepError::NotSelfAdjoint { .. })));
    }

    #[test]
    fn hermitian_block_counts_complex_multiplicity() {
        // [[0, i], [-i, 0]] has eigenvalues ±1.
        let mut modes = BTreeMap::new();
        let z = Complex::new(0.0, 0.0);
        modes.insert(
            2,
            DMatrix::from_row_slice(2, 2, &[z, Complex::new(0.0, 1.0), Complex::new(0.0, -1.0), z]),
        );
        let b = EquivariantSymOp::<f64>::new(Rep::mode(2, 2), DMatrix::zeros(0, 0), modes).unwrap();
        assert_eq!(b.negative_part().unwrap(), Rep::mode(2, 1));
    }

    #[test]
    fn real_matrix_round_trip_through_blocks() {
        // rotation-commuting 2x2 block [[x, -y], [y, x]] with y = 0 symmetric part,
        // plus a coupling between two mode-1 pairs
        let layout = Layout::new(vec![Rep::new(1, [(1, 1)]), Rep::mode(1, 1)]);
        let mut m = DMatrix::<f64>::zeros(5, 5);
        m[(0, 0)] = -2.0;
        for i in 1..5 {
            m[(i, i)] = 1.0;
        }
        // couple the pairs with 3·I
        m[(1, 3)] = 3.0;
        m[(3, 1)] = 3.0;
        m[(2, 4)] = 3.0;
        m[(4, 2)] = 3.0;
        let b = EquivariantSymOp::from_real_matrix(&layout, &m).unwrap();
        assert_eq!(b.rep(), &Rep::new(1, [(1, 2)]));
        let eig = b.mode_eigenvalues(1);
        assert!((eig[0] + 2.0).abs() < 1e-12 && (eig[1] - 4.0).abs() < 1e-12);
        assert_eq!(b.negative_part().unwrap(), Rep::new(1, [(1, 1)]));
    }

    #[test]
    fn layout_action_rotates_pairs() {
        let layout = Layout::single(Rep::new(1, [(2, 1)]));
        let x = [5.0f64, 1.0, 0.0];
        let y = layout.act(std::f64::consts::FRAC_PI_4, &x);
        assert!((y[0] - 5.0).abs() < 1e-15);
        assert!(y[1].abs() < 1e-15 && (y[2] - 1.0).abs() < 1e-15);
        assert_eq!(layout.trivial_indices(), vec![0]);
        assert_eq!(layout.mode_pairs(2), vec![1]);
        assert!((layout.normal_norm(&x) - 1.0).abs() < 1e-15);
    }

    fn sample_spectrum() -> SpectralOperator<f64> {
        SpectralOperator::from_eigenvalues(
            "sample",
            vec![
                (0.0, Rep::trivial(2)),
                (1.5, Rep::mode(1, 1)),
                (-1.2, Rep::new(1, [(2, 1)])),
                (2.0, Rep::mode(3, 2)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn shell_operator_examples() {
        let s = SpectralOperator::<f64>::from_eigenvalues("one", vec![(1.5, Rep::mode(1, 1))]).unwrap();
        let a2 = s.shell_operator(2).unwrap();
        assert_eq!(a2.rep(), &Rep::mode(1, 1));
        assert_eq!(a2.mode_block(1).unwrap()[(0, 0)], Complex::new(1.5, 0.0));
        let empty = s.shell_operator(1).unwrap();
        assert!(empty.rep().is_zero());

        let s = sample_spectrum();
        let a2 = s.shell_operator(2).unwrap();
        // shell 2 holds -1.2, 1.5 and 2.0; only -1.2 is negative
        assert_eq!(a2.negative_part().unwrap(), Rep::new(1, [(2, 1)]));
        assert_eq!(s.dim(2).unwrap(), 2 + 3 + 2 + 4);
        assert_eq!(s.diag(1).unwrap(), vec![0.0, 0.0]);
        assert_eq!(s.eigenspace(2.0).unwrap(), Rep::mode(3, 2));
        assert_eq!(s.eigenspace(7.0).unwrap(), Rep::zero());
    }

    #[test]
    fn malformed_spectra_are_rejected() {
        let bad = SpectralOperator::<f64>::from_table(
            "bad",
            vec![vec![], vec![Eigenspace::new(1.5, Rep::trivial(1))]],
        );
        assert!(matches!(bad, Err(RepError::MalformedSpectrum(_))));
        let gen = SpectralOperator::<f64>::from_generator("gen", |n| {
            vec![Eigenspace::new(n as f64 + 0.5, Rep::trivial(1))]
        });
        assert!(gen.shell(2).is_err());
    }

    #[test]
    fn direct_sum_merges_equal_eigenvalues() {
        let a = sample_spectrum();
        let b = SpectralOperator::from_eigenvalues(
            "b",
            vec![(0.0, Rep::trivial(1)), (1.5, Rep::trivial(1)), (1.7, Rep::mode(1, 1))],
        )
        .unwrap();
        let s = a.direct_sum(&b);
        let shell2 = s.shell(2).unwrap();
        assert_eq!(shell2.len(), 4);
        assert_eq!(shell2[1].rep(), Rep::new(1, [(1, 1)]));
        let (ma, mb) = direct_sum_index_maps(&a, &b, 2).unwrap();
        assert_eq!(ma.len() + mb.len(), s.dim(2).unwrap());
        let da = a.diag(2).unwrap();
        let db = b.diag(2).unwrap();
        let ds = s.diag(2).unwrap();
        for (i, &p) in ma.iter().enumerate() {
            assert_eq!(ds[p], da[i]);
        }
        for (i, &p) in mb.iter().enumerate() {
            assert_eq!(ds[p], db[i]);
        }
        let mut all: Vec<usize> = ma.into_iter().chain(mb).collect();
        all.sort();
        assert_eq!(all, (0..s.dim(2).unwrap()).collect::<Vec<_>>());
    }

    #[test]
    fn rep_serialization() {
        let r = Rep::new(1, [(5, 1), (2, 3)]);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"{"trivial":1,"modes":[[2,3],[5,1]]}"#);
        assert_eq!(serde_json::from_str::<Rep>(&json).unwrap(), r);
        assert!(serde_json::from_str::<Rep>(r#"{"trivial":0,"modes":[[0,1]]}"#).is_err());
    }

    #[test]
    fn single_precision_blocks() {
        let r = Rep::new(1, [(1, 1)]);
        let b = EquivariantSymOp::<f32>::scalar(&r, -2.0);
        assert_eq!(b.negative_part().unwrap(), r);
    }
}
