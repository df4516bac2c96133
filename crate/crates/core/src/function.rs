//! The truncated function algebra `Γ(Λ•L^∨ ⊗ ŜB^∨)` of the Fedosov manifold.
//!
//! Exterior generators `ξ^u` are indexed by the adapted frame of `L`: indices
//! `0..r` are the B-type coframe `ξ^i` and `r..r+r′` the A-type coframe `ζ^α`.
//! Fiber coordinates `η^1..η^r` are encoded by a [`SymIndex`] of width `r`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde_json::{json, Value};
use smallvec::SmallVec;

use crate::coeff::{Base, Coeff};
use crate::error::{Error, Result};
use crate::scalar::{factorial, Scalar};

/// Multi-index `J ∈ ℕ₀^r` over the fiber coordinates.
pub type SymIndex = SmallVec<[u8; 4]>;

pub fn sym_degree(j: &[u8]) -> usize {
    j.iter().map(|&k| k as usize).sum()
}

/// `J! = Π j_i!`.
pub fn sym_factorial<S: Scalar>(j: &[u8]) -> S {
    j.iter()
        .fold(S::one(), |acc, &k| acc * factorial::<S>(k as usize))
}

pub fn sym_unit(width: usize, i: usize) -> SymIndex {
    let mut j: SymIndex = SmallVec::from_elem(0, width);
    j[i] = 1;
    j
}

pub fn sym_add(a: &[u8], b: &[u8]) -> SymIndex {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `a - b` when `b ≤ a` componentwise.
pub fn sym_sub(a: &[u8], b: &[u8]) -> Option<SymIndex> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.checked_sub(*y))
        .collect()
}

/// All multi-indices of width `width` and total degree exactly `deg`, in
/// lexicographically decreasing order of the first entry.
pub fn sym_basis(width: usize, deg: usize) -> Vec<SymIndex> {
    fn go(width: usize, deg: usize, prefix: &mut SymIndex, out: &mut Vec<SymIndex>) {
        if prefix.len() + 1 == width {
            prefix.push(deg as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=deg).rev() {
            prefix.push(k as u8);
            go(width, deg - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if width == 0 {
        if deg == 0 {
            out.push(SmallVec::new());
        }
        return out;
    }
    go(width, deg, &mut SmallVec::new(), &mut out);
    out
}

/// All multi-indices of width `width` with degree at most `max`.
pub fn sym_basis_upto(width: usize, max: usize) -> Vec<SymIndex> {
    (0..=max).flat_map(|d| sym_basis(width, d)).collect()
}

/// A squarefree exterior monomial `ξ^{u_1} ∧ … ∧ ξ^{u_p}`, `u_1 < … < u_p`,
/// stored as a bitmask over the frame of `L`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExteriorIndex(pub u32);

impl ExteriorIndex {
    pub const EMPTY: ExteriorIndex = ExteriorIndex(0);

    pub fn single(u: usize) -> Self {
        ExteriorIndex(1 << u)
    }

    /// Builds `ξ^{u_1} ∧ … ∧ ξ^{u_p}` from an arbitrary ordering, returning the
    /// sorted index and the sign of the sorting permutation; `None` when an
    /// index repeats.
    pub fn from_indices(indices: &[usize]) -> Option<(Self, bool)> {
        let mut acc = ExteriorIndex::EMPTY;
        let mut negative = false;
        for &u in indices {
            let (next, neg) = acc.wedge(ExteriorIndex::single(u))?;
            acc = next;
            negative ^= neg;
        }
        Some((acc, negative))
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, u: usize) -> bool {
        self.0 & (1 << u) != 0
    }

    /// Number of B-type indices (those below `rank_b`).
    pub fn b_degree(self, rank_b: usize) -> usize {
        (self.0 & ((1u32 << rank_b) - 1)).count_ones() as usize
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&u| self.0 & (1 << u) != 0)
    }

    /// `ξ^I ∧ ξ^K = ±ξ^{I∪K}`; the flag is true for a minus sign.
    pub fn wedge(self, other: Self) -> Option<(Self, bool)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        let mut swaps = 0u32;
        let mut rest = other.0;
        while rest != 0 {
            let j = rest.trailing_zeros();
            rest &= rest - 1;
            swaps += (self.0 >> j).count_ones();
        }
        Some((ExteriorIndex(self.0 | other.0), swaps % 2 == 1))
    }

    /// Left derivative `∂/∂ξ^u`: `ξ^I = ±ξ^u ∧ ξ^{I∖u}`.
    pub fn remove(self, u: usize) -> Option<(Self, bool)> {
        if !self.contains(u) {
            return None;
        }
        let below = (self.0 & ((1u32 << u) - 1)).count_ones();
        Some((ExteriorIndex(self.0 & !(1 << u)), below % 2 == 1))
    }
}

/// Frame sizes, base and truncation order shared by every element of one
/// function algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub rank_b: usize,
    pub rank_a: usize,
    pub base: Base,
    pub order: usize,
}

impl Shape {
    pub fn new(rank_b: usize, rank_a: usize, base: Base, order: usize) -> Self {
        assert!(rank_b + rank_a <= 31, "frame too large");
        Shape {
            rank_b,
            rank_a,
            base,
            order,
        }
    }

    pub fn frame(&self) -> usize {
        self.rank_b + self.rank_a
    }

    pub fn with_order(self, order: usize) -> Self {
        Shape { order, ..self }
    }

    pub(crate) fn check(&self, other: &Shape) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }

    /// All exterior monomials of the frame, ordered by bitmask.
    pub fn exterior_basis(&self) -> Vec<ExteriorIndex> {
        (0..1u32 << self.frame()).map(ExteriorIndex).collect()
    }

    pub fn zero_sym(&self) -> SymIndex {
        SmallVec::from_elem(0, self.rank_b)
    }
}

/// Truncated element of `Γ(Λ•L^∨ ⊗ ŜB^∨)`.
///
/// Products discard fiber degrees above the truncation order. Linear maps
/// (`k`, `ĥ`, `h`, contractions, …) are applied exactly and may produce one
/// degree beyond it, so that the homotopy identities hold on the nose for
/// every input of degree at most `N`.
#[derive(Clone, PartialEq)]
pub struct FormalFunction<S: Scalar> {
    shape: Shape,
    terms: BTreeMap<(ExteriorIndex, SymIndex), Coeff<S>>,
}

impl<S: Scalar> FormalFunction<S> {
    pub fn zero(shape: Shape) -> Self {
        FormalFunction {
            shape,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(shape: Shape, c: Coeff<S>) -> Self {
        Self::monomial(shape, ExteriorIndex::EMPTY, shape.zero_sym(), c)
    }

    pub fn one(shape: Shape) -> Self {
        Self::constant(shape, Coeff::one(shape.base))
    }

    pub fn monomial(shape: Shape, ext: ExteriorIndex, sym: SymIndex, c: Coeff<S>) -> Self {
        let mut f = Self::zero(shape);
        f.add_term(ext, sym, c);
        f
    }

    /// The coframe generator `ξ^u` (B-type for `u < r`, A-type `ζ^{u-r}` otherwise).
    pub fn xi(shape: Shape, u: usize) -> Self {
        Self::monomial(
            shape,
            ExteriorIndex::single(u),
            shape.zero_sym(),
            Coeff::one(shape.base),
        )
    }

    /// The fiber coordinate `η^i`.
    pub fn eta(shape: Shape, i: usize) -> Self {
        Self::monomial(
            shape,
            ExteriorIndex::EMPTY,
            sym_unit(shape.rank_b, i),
            Coeff::one(shape.base),
        )
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.order
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(ExteriorIndex, SymIndex), &Coeff<S>)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, ext: ExteriorIndex, sym: &[u8]) -> Coeff<S> {
        self.terms
            .get(&(ext, SmallVec::from_slice(sym)))
            .cloned()
            .unwrap_or_else(|| Coeff::zero(self.shape.base))
    }

    /// Adds `c·ξ^I η^J` in place, dropping entries that cancel.
    pub fn add_term(&mut self, ext: ExteriorIndex, sym: SymIndex, c: Coeff<S>) {
        if c.is_zero() {
            return;
        }
        debug_assert_eq!(sym.len(), self.shape.rank_b);
        match self.terms.entry((ext, sym)) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                o.get_mut().add_assign_ref(&c);
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub(crate) fn add_signed(&mut self, ext: ExteriorIndex, sym: SymIndex, c: Coeff<S>, negative: bool) {
        if negative {
            self.add_term(ext, sym, -&c);
        } else {
            self.add_term(ext, sym, c);
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.shape.check(&other.shape)?;
        let mut out = self.clone();
        out.add_assign(other);
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.shape.check(&other.shape)?;
        let mut out = self.clone();
        for ((e, j), c) in &other.terms {
            out.add_term(*e, j.clone(), -c);
        }
        Ok(out)
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        for ((e, j), c) in &other.terms {
            self.add_term(*e, j.clone(), c.clone());
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        self.map_coeffs(|c| c.scale(s))
    }

    /// Multiplies every coefficient by a base function.
    pub fn mul_coeff(&self, c: &Coeff<S>) -> Self {
        self.map_coeffs(|x| x * c)
    }

    pub fn map_coeffs(&self, mut f: impl FnMut(&Coeff<S>) -> Coeff<S>) -> Self {
        let mut out = Self::zero(self.shape);
        for ((e, j), c) in &self.terms {
            out.add_term(*e, j.clone(), f(c));
        }
        out
    }

    /// Keeps the terms satisfying `keep`.
    pub fn filter(&self, mut keep: impl FnMut(ExteriorIndex, &SymIndex) -> bool) -> Self {
        FormalFunction {
            shape: self.shape,
            terms: self
                .terms
                .iter()
                .filter(|((e, j), _)| keep(*e, j))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Graded-commutative product, truncated at the shape's order.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.shape.check(&other.shape)?;
        Ok(self.mul_truncated(other, self.shape.order))
    }

    pub(crate) fn mul_truncated(&self, other: &Self, order: usize) -> Self {
        let mut out = Self::zero(self.shape);
        for ((e1, j1), c1) in &self.terms {
            let d1 = sym_degree(j1);
            if d1 > order {
                continue;
            }
            for ((e2, j2), c2) in &other.terms {
                if d1 + sym_degree(j2) > order {
                    continue;
                }
                let Some((e, neg)) = e1.wedge(*e2) else {
                    continue;
                };
                out.add_signed(e, sym_add(j1, j2), c1 * c2, neg);
            }
        }
        out
    }

    /// Drops every term of fiber degree above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        self.filter(|_, j| sym_degree(j) <= order)
    }

    /// Reinterprets the function at another truncation order, discarding
    /// terms that do not fit.
    pub fn with_order(&self, order: usize) -> Self {
        let mut out = self.truncate(order);
        out.shape.order = order;
        out
    }

    /// Largest fiber degree present (`None` for zero).
    pub fn max_sym_degree(&self) -> Option<usize> {
        self.terms.keys().map(|(_, j)| sym_degree(j)).max()
    }

    /// Minimal fiber degree over nonzero terms; `None` stands for `∞`.
    pub fn filtration_order(&self) -> Option<usize> {
        self.terms.keys().map(|(_, j)| sym_degree(j)).min()
    }

    /// Form degrees that occur.
    pub fn form_degrees(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.terms.keys().map(|(e, _)| e.degree()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    pub fn form_part(&self, degree: usize) -> Self {
        self.filter(|e, _| e.degree() == degree)
    }

    /// The contraction `ι_{b_i}`, i.e. `∂/∂η^i`.
    pub fn contract(&self, i: usize) -> Self {
        let mut out = Self::zero(self.shape);
        for ((e, j), c) in &self.terms {
            if j[i] == 0 {
                continue;
            }
            let mut j2 = j.clone();
            j2[i] -= 1;
            out.add_term(*e, j2, c.scale(&S::from_int(j[i] as i64)));
        }
        out
    }

    /// Contraction with a degree-one section `Σ b^i b_i`.
    pub fn contract_section(&self, b: &PolySection<S>) -> Result<Self> {
        if b.rank() != self.shape.rank_b {
            return Err(Error::ShapeMismatch("section width".into()));
        }
        let mut out = Self::zero(self.shape);
        for (k, c) in b.terms() {
            if sym_degree(k) != 1 {
                return Err(Error::Precondition(
                    "contraction needs a degree-one section".into(),
                ));
            }
            let i = k.iter().position(|&x| x == 1).unwrap();
            out.add_assign(&self.contract(i).mul_coeff(c));
        }
        Ok(out)
    }

    /// `∂^J = ∂_{η^1}^{j_1} ⋯ ∂_{η^r}^{j_r}` applied to the fiber part.
    pub fn differentiate(&self, jd: &[u8]) -> Self {
        let mut out = Self::zero(self.shape);
        for ((e, j), c) in &self.terms {
            let Some(rest) = sym_sub(j, jd) else { continue };
            let mut w = S::one();
            for (a, b) in j.iter().zip(jd) {
                for t in 0..*b {
                    w = w * S::from_int((*a - t) as i64);
                }
            }
            out.add_term(*e, rest, c.scale(&w));
        }
        out
    }

    /// Multiplies by `c·ξ^I η^K` on the left, without truncation.
    pub(crate) fn left_mul_monomial(&self, ext: ExteriorIndex, sym: &[u8], c: &Coeff<S>) -> Self {
        let mut out = Self::zero(self.shape);
        for ((e, j), v) in &self.terms {
            let Some((e2, neg)) = ext.wedge(*e) else { continue };
            out.add_signed(e2, sym_add(sym, j), c * v, neg);
        }
        out
    }

    /// Evaluates chart coefficients at a point, producing a point-base function.
    pub fn evaluate_at(&self, point: &[S]) -> FormalFunction<S> {
        let shape = Shape {
            base: Base::Point,
            ..self.shape
        };
        let mut out = FormalFunction::zero(shape);
        for ((e, j), c) in &self.terms {
            out.add_term(*e, j.clone(), Coeff::Point(c.evaluate(point)));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|((e, j), c)| {
                    json!({
                        "xi": e.indices().map(|u| u + 1).collect::<Vec<_>>(),
                        "eta": j.to_vec(),
                        "coeff": c.to_json(),
                    })
                })
                .collect(),
        )
    }

    pub fn from_json(shape: Shape, value: &Value) -> Result<Self> {
        let items = value
            .as_array()
            .ok_or_else(|| Error::Parse("function must be an array of terms".into()))?;
        let mut out = Self::zero(shape);
        for item in items {
            let xi = parse_index_list(item.get("xi"))?;
            if xi.iter().any(|&u| u == 0 || u > shape.frame()) {
                return Err(Error::Parse(format!("xi index out of range in {item}")));
            }
            let xi: Vec<usize> = xi.iter().map(|u| u - 1).collect();
            let (e, neg) = ExteriorIndex::from_indices(&xi)
                .ok_or_else(|| Error::Parse(format!("repeated xi index in {item}")))?;
            let eta: SymIndex = parse_index_list(item.get("eta"))?
                .into_iter()
                .map(|k| k as u8)
                .collect();
            if eta.len() != shape.rank_b {
                return Err(Error::Parse(format!("eta width mismatch in {item}")));
            }
            let c = Coeff::from_json(
                item.get("coeff")
                    .ok_or_else(|| Error::Parse(format!("missing coeff in {item}")))?,
                shape.base,
            )?;
            out.add_signed(e, eta, c, neg);
        }
        Ok(out)
    }
}

fn parse_index_list(v: Option<&Value>) -> Result<Vec<usize>> {
    v.and_then(|v| v.as_array())
        .ok_or_else(|| Error::Parse("expected an index array".into()))?
        .iter()
        .map(|k| {
            k.as_u64()
                .map(|k| k as usize)
                .ok_or_else(|| Error::Parse(format!("bad index {k}")))
        })
        .collect()
}

impl<S: Scalar> fmt::Debug for FormalFunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl<S: Scalar> fmt::Display for FormalFunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let r = self.shape.rank_b;
        for (n, ((e, j), c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for u in e.indices() {
                if u < r {
                    write!(f, "·ξ{}", u + 1)?;
                } else {
                    write!(f, "·ζ{}", u - r + 1)?;
                }
            }
            for (i, &k) in j.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "·η{}", i + 1)?,
                    k => write!(f, "·η{}^{k}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

impl<S: Scalar> Add for &FormalFunction<S> {
    type Output = FormalFunction<S>;
    fn add(self, rhs: Self) -> FormalFunction<S> {
        self.try_add(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<S: Scalar> Sub for &FormalFunction<S> {
    type Output = FormalFunction<S>;
    fn sub(self, rhs: Self) -> FormalFunction<S> {
        self.try_sub(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<S: Scalar> Mul for &FormalFunction<S> {
    type Output = FormalFunction<S>;
    fn mul(self, rhs: Self) -> FormalFunction<S> {
        self.try_mul(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<S: Scalar> Neg for &FormalFunction<S> {
    type Output = FormalFunction<S>;
    fn neg(self) -> FormalFunction<S> {
        self.map_coeffs(|c| -c)
    }
}

/// Element of `Γ(SB)` in the monomial basis `∂_J = b^{⊙J}`.
#[derive(Clone, PartialEq)]
pub struct PolySection<S: Scalar> {
    rank: usize,
    base: Base,
    terms: BTreeMap<SymIndex, Coeff<S>>,
}

impl<S: Scalar> PolySection<S> {
    pub fn zero(rank: usize, base: Base) -> Self {
        PolySection {
            rank,
            base,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(rank: usize, base: Base) -> Self {
        Self::monomial(rank, base, SmallVec::from_elem(0, rank), Coeff::one(base))
    }

    pub fn monomial(rank: usize, base: Base, j: SymIndex, c: Coeff<S>) -> Self {
        let mut s = Self::zero(rank, base);
        s.add_term(j, c);
        s
    }

    /// The frame section `b_i`.
    pub fn basis(rank: usize, base: Base, i: usize) -> Self {
        Self::monomial(rank, base, sym_unit(rank, i), Coeff::one(base))
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&SymIndex, &Coeff<S>)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, j: &[u8]) -> Coeff<S> {
        self.terms
            .get(j)
            .cloned()
            .unwrap_or_else(|| Coeff::zero(self.base))
    }

    pub fn add_term(&mut self, j: SymIndex, c: Coeff<S>) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(j) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                o.get_mut().add_assign_ref(&c);
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (j, c) in &other.terms {
            self.add_term(j.clone(), c.clone());
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        self.map_coeffs(|c| c.scale(s))
    }

    pub fn mul_coeff(&self, c: &Coeff<S>) -> Self {
        self.map_coeffs(|x| x * c)
    }

    pub fn map_coeffs(&self, mut f: impl FnMut(&Coeff<S>) -> Coeff<S>) -> Self {
        let mut out = Self::zero(self.rank, self.base);
        for (j, c) in &self.terms {
            out.add_term(j.clone(), f(c));
        }
        out
    }

    /// Largest symmetric degree present.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(|j| sym_degree(j)).max()
    }

    pub fn homogeneous_part(&self, deg: usize) -> Self {
        PolySection {
            rank: self.rank,
            base: self.base,
            terms: self
                .terms
                .iter()
                .filter(|(j, _)| sym_degree(j) == deg)
                .map(|(j, c)| (j.clone(), c.clone()))
                .collect(),
        }
    }

    /// Symmetric product `b^{⊙J} ⊙ b^{⊙K} = b^{⊙(J+K)}`.
    pub fn sym_mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.rank, self.base);
        for (j, a) in &self.terms {
            for (k, b) in &other.terms {
                out.add_term(sym_add(j, k), a * b);
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|(j, c)| json!({"d": j.to_vec(), "coeff": c.to_json()}))
                .collect(),
        )
    }
}

impl<S: Scalar> fmt::Debug for PolySection<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (j, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})·∂{:?}", j.as_slice())?;
        }
        Ok(())
    }
}

impl<S: Scalar> Add for &PolySection<S> {
    type Output = PolySection<S>;
    fn add(self, rhs: Self) -> PolySection<S> {
        let mut out = self.clone();
        out.add_assign(rhs);
        out
    }
}

impl<S: Scalar> Sub for &PolySection<S> {
    type Output = PolySection<S>;
    fn sub(self, rhs: Self) -> PolySection<S> {
        let mut out = self.clone();
        out.add_assign(&rhs.map_coeffs(|c| -c));
        out
    }
}

/// The pairing `⟨∂_J, η^K⟩ = J! δ_{JK}` of a section with a form-degree-zero
/// function.
pub fn pair<S: Scalar>(theta: &PolySection<S>, f: &FormalFunction<S>) -> Result<Coeff<S>> {
    if theta.rank != f.shape.rank_b {
        return Err(Error::ShapeMismatch(format!(
            "section width {} vs fiber rank {}",
            theta.rank, f.shape.rank_b
        )));
    }
    let mut acc = Coeff::zero(f.shape.base);
    for ((e, j), c) in &f.terms {
        if *e != ExteriorIndex::EMPTY {
            return Err(Error::Precondition(
                "scalar pairing needs a function of form degree zero".into(),
            ));
        }
        if let Some(t) = theta.terms.get(j) {
            acc.add_assign_ref(&(t * c).scale(&sym_factorial(j)));
        }
    }
    Ok(acc)
}

/// The pairing taken per exterior monomial; the result has fiber degree zero.
pub fn pair_forms<S: Scalar>(
    theta: &PolySection<S>,
    f: &FormalFunction<S>,
) -> Result<FormalFunction<S>> {
    if theta.rank != f.shape.rank_b {
        return Err(Error::ShapeMismatch("section width".into()));
    }
    let mut out = FormalFunction::zero(f.shape);
    for ((e, j), c) in &f.terms {
        if let Some(t) = theta.terms.get(j) {
            out.add_term(*e, f.shape.zero_sym(), (t * c).scale(&sym_factorial(j)));
        }
    }
    Ok(out)
}
