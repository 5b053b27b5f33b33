//! Exact arithmetic in the Euler–tom Dieck ring U(G) for G = S¹ and G = ℤ_m.
//!
//! Elements are finite integer combinations of orbit-type classes [G/H].
//! For S¹ the closed subgroups are S¹ itself and the finite cyclic groups
//! ℤ_k; all products [S¹/ℤ_k]·[S¹/ℤ_l] vanish because every fixed set of
//! such a product is a disjoint union of circles (Euler characteristic 0).
//! For ℤ_m the ring is the Burnside ring, with subgroups indexed by their
//! order d | m.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("group mismatch: {0} vs {1}")]
    GroupMismatch(GroupDescriptor, GroupDescriptor),
    #[error("subgroup class {class:?} does not belong to {group}")]
    InvalidClass {
        group: GroupDescriptor,
        class: SubgroupClass,
    },
    #[error("invalid group: cyclic order must be positive")]
    InvalidGroup,
    #[error("direct-limit classes are built over different multiplier sequences")]
    MultiplierMismatch,
    #[error("direct-limit level {level} exceeds the {available} available multipliers")]
    MissingMultiplier { level: usize, available: usize },
    #[error("malformed serialized term: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupDescriptor {
    #[serde(rename = "S1")]
    Circle,
    #[serde(rename = "cyclic")]
    Cyclic(u64),
}

impl GroupDescriptor {
    pub fn cyclic(order: u64) -> Result<Self, RingError> {
        if order == 0 {
            return Err(RingError::InvalidGroup);
        }
        Ok(GroupDescriptor::Cyclic(order))
    }

    /// The class of the whole group, [G/G].
    pub fn full_class(self) -> SubgroupClass {
        match self {
            GroupDescriptor::Circle => SubgroupClass::Full,
            GroupDescriptor::Cyclic(m) => SubgroupClass::Divisor(m),
        }
    }

    pub fn contains(self, class: SubgroupClass) -> bool {
        match (self, class) {
            (GroupDescriptor::Circle, SubgroupClass::Full) => true,
            (GroupDescriptor::Circle, SubgroupClass::FiniteCyclic(k)) => k >= 1,
            (GroupDescriptor::Cyclic(m), SubgroupClass::Divisor(d)) => d >= 1 && m % d == 0,
            _ => false,
        }
    }

    /// Subgroup orders of ℤ_m, in canonical (descending) order.
    pub fn divisors(self) -> Vec<u64> {
        match self {
            GroupDescriptor::Circle => Vec::new(),
            GroupDescriptor::Cyclic(m) => (1..=m).rev().filter(|d| m % d == 0).collect(),
        }
    }
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupDescriptor::Circle => write!(f, "S1"),
            GroupDescriptor::Cyclic(m) => write!(f, "Z{m}"),
        }
    }
}

/// Conjugacy class of a closed subgroup H, labelling the basis element [G/H].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubgroupClass {
    /// H = S¹.
    Full,
    /// H = ℤ_k ⊂ S¹; k = 1 is the trivial subgroup.
    FiniteCyclic(u64),
    /// The subgroup of order d in ℤ_m.
    Divisor(u64),
}

impl SubgroupClass {
    fn rank(&self) -> (u8, i128) {
        match *self {
            SubgroupClass::Full => (0, 0),
            SubgroupClass::FiniteCyclic(k) => (1, k as i128),
            SubgroupClass::Divisor(d) => (2, -(d as i128)),
        }
    }
}

// Full first, then k ascending, divisors descending.
impl Ord for SubgroupClass {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl PartialOrd for SubgroupClass {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SubgroupClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubgroupClass::Full => write!(f, "S1"),
            SubgroupClass::FiniteCyclic(k) => write!(f, "Z{k}"),
            SubgroupClass::Divisor(d) => write!(f, "d{d}"),
        }
    }
}

/// An element Σ d_(H)·[G/H] of U(G) in canonical form (no zero coefficients).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RingElement {
    group: GroupDescriptor,
    coeffs: BTreeMap<SubgroupClass, BigInt>,
}

impl RingElement {
    pub fn zero(group: GroupDescriptor) -> Self {
        RingElement {
            group,
            coeffs: BTreeMap::new(),
        }
    }

    /// The ring unit [G/G].
    pub fn unit(group: GroupDescriptor) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(group.full_class(), BigInt::one());
        RingElement { group, coeffs }
    }

    pub fn basis(group: GroupDescriptor, class: SubgroupClass) -> Result<Self, RingError> {
        Self::from_terms(group, [(class, BigInt::one())])
    }

    pub fn from_terms<I, C>(group: GroupDescriptor, terms: I) -> Result<Self, RingError>
    where
        I: IntoIterator<Item = (SubgroupClass, C)>,
        C: Into<BigInt>,
    {
        let mut coeffs: BTreeMap<SubgroupClass, BigInt> = BTreeMap::new();
        for (class, c) in terms {
            if !group.contains(class) {
                return Err(RingError::InvalidClass { group, class });
            }
            *coeffs.entry(class).or_default() += c.into();
        }
        coeffs.retain(|_, c| !c.is_zero());
        Ok(RingElement { group, coeffs })
    }

    pub fn group(&self) -> GroupDescriptor {
        self.group
    }

    pub fn coeff(&self, class: SubgroupClass) -> BigInt {
        self.coeffs.get(&class).cloned().unwrap_or_default()
    }

    /// Coefficient of [G/G].
    pub fn full_coeff(&self) -> BigInt {
        self.coeff(self.group.full_class())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&SubgroupClass, &BigInt)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_unit(&self) -> bool {
        *self == Self::unit(self.group)
    }

    fn same_group(&self, other: &Self) -> Result<(), RingError> {
        if self.group == other.group {
            Ok(())
        } else {
            Err(RingError::GroupMismatch(self.group, other.group))
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, RingError> {
        self.same_group(other)?;
        let mut coeffs = self.coeffs.clone();
        for (class, c) in &other.coeffs {
            *coeffs.entry(*class).or_default() += c;
        }
        coeffs.retain(|_, c| !c.is_zero());
        Ok(RingElement {
            group: self.group,
            coeffs,
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, RingError> {
        self.checked_add(&-other)
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, RingError> {
        self.same_group(other)?;
        let mut out: BTreeMap<SubgroupClass, BigInt> = BTreeMap::new();
        match self.group {
            GroupDescriptor::Circle => {
                let a_full = self.coeff(SubgroupClass::Full);
                let b_full = other.coeff(SubgroupClass::Full);
                out.insert(SubgroupClass::Full, &a_full * &b_full);
                for (class, c) in &self.coeffs {
                    if *class != SubgroupClass::Full {
                        *out.entry(*class).or_default() += &b_full * c;
                    }
                }
                for (class, c) in &other.coeffs {
                    if *class != SubgroupClass::Full {
                        *out.entry(*class).or_default() += &a_full * c;
                    }
                }
            }
            GroupDescriptor::Cyclic(m) => {
                for (ca, a) in &self.coeffs {
                    for (cb, b) in &other.coeffs {
                        let (SubgroupClass::Divisor(d1), SubgroupClass::Divisor(d2)) = (ca, cb)
                        else {
                            unreachable!("cyclic elements carry divisor classes only")
                        };
                        let g = d1.gcd(d2);
                        // |G|·|H∩K| / (|H|·|K|) orbits of type G/(H∩K)
                        let orbits = BigInt::from(m) * g / (BigInt::from(*d1) * *d2);
                        *out.entry(SubgroupClass::Divisor(g)).or_default() += orbits * a * b;
                    }
                }
            }
        }
        out.retain(|_, c| !c.is_zero());
        Ok(RingElement {
            group: self.group,
            coeffs: out,
        })
    }

    pub fn scale(&self, factor: &BigInt) -> Self {
        let mut coeffs: BTreeMap<_, _> = self
            .coeffs
            .iter()
            .map(|(k, c)| (*k, c * factor))
            .collect();
        coeffs.retain(|_, c: &mut BigInt| !c.is_zero());
        RingElement {
            group: self.group,
            coeffs,
        }
    }

    pub fn pow(&self, mut exp: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::unit(self.group);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            exp >>= 1;
        }
        acc
    }

    /// Mark of the element at the subgroup of order `e` in ℤ_m: the number of
    /// points fixed by that subgroup, extended linearly.
    pub fn mark(&self, e: u64) -> Option<BigInt> {
        let GroupDescriptor::Cyclic(m) = self.group else {
            return None;
        };
        let mut total = BigInt::zero();
        for (class, c) in &self.coeffs {
            if let SubgroupClass::Divisor(d) = class {
                if d % e == 0 {
                    total += c * BigInt::from(m / d);
                }
            }
        }
        Some(total)
    }

    /// Multiplicative inverse, or `None` when the element is not a unit.
    pub fn invert(&self) -> Option<Self> {
        match self.group {
            GroupDescriptor::Circle => {
                let a_full = self.coeff(SubgroupClass::Full);
                if a_full.abs() != BigInt::one() {
                    return None;
                }
                let terms = self.coeffs.iter().map(|(class, c)| {
                    if *class == SubgroupClass::Full {
                        (*class, c.clone())
                    } else {
                        (*class, -c)
                    }
                });
                Self::from_terms(self.group, terms).ok()
            }
            GroupDescriptor::Cyclic(m) => {
                // A unit has marks ±1 everywhere; its inverse has the same marks.
                // Recover coefficients from marks top-down through the
                // triangular mark table.
                let divisors = self.group.divisors();
                let marks: Vec<BigInt> = divisors.iter().map(|&e| self.mark(e).unwrap()).collect();
                if marks.iter().any(|x| x.abs() != BigInt::one()) {
                    return None;
                }
                let mut solved: Vec<(u64, BigInt)> = Vec::new();
                for (&e, target) in divisors.iter().zip(&marks) {
                    let mut rest = target.clone();
                    for (d, b) in &solved {
                        if d % e == 0 {
                            rest -= b * BigInt::from(m / d);
                        }
                    }
                    let (q, r) = rest.div_rem(&BigInt::from(m / e));
                    if !r.is_zero() {
                        return None;
                    }
                    solved.push((e, q));
                }
                Self::from_terms(
                    self.group,
                    solved.into_iter().map(|(d, b)| (SubgroupClass::Divisor(d), b)),
                )
                .ok()
            }
        }
    }

    pub fn to_serialized(&self) -> Vec<SerializedTerm> {
        self.coeffs
            .iter()
            .map(|(class, c)| SerializedTerm {
                subgroup: match *class {
                    SubgroupClass::Full => SubgroupRepr::Full(FullTag::S1),
                    SubgroupClass::FiniteCyclic(k) => SubgroupRepr::Cyclic { zk: k },
                    SubgroupClass::Divisor(d) => SubgroupRepr::Divisor { divisor: d },
                },
                coeff: Coefficient(c.clone()),
            })
            .collect()
    }

    pub fn from_serialized(
        group: GroupDescriptor,
        terms: &[SerializedTerm],
    ) -> Result<Self, RingError> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::with_capacity(terms.len());
        for t in terms {
            let class = match t.subgroup {
                SubgroupRepr::Full(_) => group.full_class(),
                SubgroupRepr::Cyclic { zk } => SubgroupClass::FiniteCyclic(zk),
                SubgroupRepr::Divisor { divisor } => SubgroupClass::Divisor(divisor),
            };
            if !seen.insert(class) {
                return Err(RingError::Malformed(format!("duplicate class {class}")));
            }
            out.push((class, t.coeff.0.clone()));
        }
        Self::from_terms(group, out)
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let full = self.group.full_class();
        for (i, (class, c)) in self.coeffs.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if *class == full {
                write!(f, "{mag}")?;
            } else {
                if !mag.is_one() {
                    write!(f, "{mag}·")?;
                }
                let g = self.group;
                write!(f, "[{g}/{class}]")?;
            }
        }
        Ok(())
    }
}

impl Add for &RingElement {
    type Output = RingElement;
    fn add(self, rhs: &RingElement) -> RingElement {
        self.checked_add(rhs).expect("ring elements over the same group")
    }
}

impl Sub for &RingElement {
    type Output = RingElement;
    fn sub(self, rhs: &RingElement) -> RingElement {
        self.checked_sub(rhs).expect("ring elements over the same group")
    }
}

impl Mul for &RingElement {
    type Output = RingElement;
    fn mul(self, rhs: &RingElement) -> RingElement {
        self.checked_mul(rhs).expect("ring elements over the same group")
    }
}

impl Neg for &RingElement {
    type Output = RingElement;
    fn neg(self) -> RingElement {
        RingElement {
            group: self.group,
            coeffs: self.coeffs.iter().map(|(k, c)| (*k, -c)).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for RingElement {
            type Output = RingElement;
            fn $m(self, rhs: RingElement) -> RingElement {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for RingElement {
    type Output = RingElement;
    fn neg(self) -> RingElement {
        -&self
    }
}

impl Serialize for RingElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_serialized().serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FullTag {
    S1,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubgroupRepr {
    Full(FullTag),
    Cyclic {
        #[serde(rename = "Zk")]
        zk: u64,
    },
    Divisor {
        divisor: u64,
    },
}

/// Arbitrary-precision coefficient; a JSON integer when it fits in 64 bits,
/// otherwise a decimal string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coefficient(pub BigInt);

impl Serialize for Coefficient {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0.to_i64() {
            Some(v) => s.serialize_i64(v),
            None => s.serialize_str(&self.0.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Coefficient {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Coefficient(BigInt::from(v))),
            Raw::Text(t) => t
                .parse::<BigInt>()
                .map(Coefficient)
                .map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerializedTerm {
    pub subgroup: SubgroupRepr,
    pub coeff: Coefficient,
}

/// A representative (level, value) of an element of the direct limit of
/// U(G) → U(G) → … whose i-th bonding map is multiplication by a_{i+1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectLimitClass {
    pub level: usize,
    pub value: RingElement,
    /// a₁, a₂, … (index 0 holds a₁).
    pub multipliers: Vec<RingElement>,
}

impl DirectLimitClass {
    pub fn new(level: usize, value: RingElement, multipliers: Vec<RingElement>) -> Self {
        DirectLimitClass {
            level,
            value,
            multipliers,
        }
    }

    /// Image of the representative at a higher level.
    pub fn push_to(&self, level: usize) -> Result<RingElement, RingError> {
        if level < self.level {
            return Err(RingError::MissingMultiplier {
                level,
                available: self.multipliers.len(),
            });
        }
        if level > self.multipliers.len() {
            return Err(RingError::MissingMultiplier {
                level,
                available: self.multipliers.len(),
            });
        }
        let mut v = self.value.clone();
        for a in &self.multipliers[self.level..level] {
            v = v.checked_mul(a)?;
        }
        Ok(v)
    }
}

/// Equality in the direct limit: push the lower representative up to the
/// higher level and compare.
pub fn limit_class_equal(c1: &DirectLimitClass, c2: &DirectLimitClass) -> Result<bool, RingError> {
    let common = c1.multipliers.len().min(c2.multipliers.len());
    if c1.multipliers[..common] != c2.multipliers[..common] {
        return Err(RingError::MultiplierMismatch);
    }
    c1.value.same_group(&c2.value)?;
    let (lo, hi) = if c1.level <= c2.level { (c1, c2) } else { (c2, c1) };
    Ok(lo.push_to(hi.level)? == hi.value)
}
