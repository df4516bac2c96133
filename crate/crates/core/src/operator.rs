//! Vertical differential operators `Γ(Λ•L^∨ ⊗ ŜB^∨ ⊗ SB)`, filtration-shifting
//! operators, the intertwiner iteration, and `exp`/`log` between `φ` and `Y`.
//!
//! A term `(I, K, J) ↦ c` is the operator `f ↦ c ξ^I ∧ η^K ∂^J f` with
//! `∂^J = ∂_{η^1}^{j_1} ⋯ ∂_{η^r}^{j_r}`.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value};
use smallvec::SmallVec;

use crate::coeff::Coeff;
use crate::error::{Error, Result};
use crate::fedosov::{basis_functions, Contraction, FedosovField};
use crate::function::{
    sym_add, sym_basis, sym_basis_upto, sym_degree, sym_factorial, sym_sub, ExteriorIndex,
    FormalFunction, PolySection, Shape, SymIndex,
};
use crate::scalar::{binomial, factorial, Scalar};
use crate::vector_field::VerticalField;

type OpKey = (ExteriorIndex, SymIndex, SymIndex);

/// `K!/(K−J)!`, the factor of `∂^J η^K = K!/(K−J)! η^{K−J}`.
fn falling<S: Scalar>(k: &[u8], j: &[u8]) -> S {
    let mut w = S::one();
    for (a, b) in k.iter().zip(j) {
        for t in 0..*b {
            w = w * S::from_int((*a - t) as i64);
        }
    }
    w
}

fn multi_binomial<S: Scalar>(j: &[u8], l: &[u8]) -> S {
    j.iter()
        .zip(l)
        .fold(S::one(), |acc, (a, b)| acc * binomial::<S>(*a as usize, *b as usize))
}

/// All `L ≤ J` componentwise.
fn sub_indices(j: &[u8]) -> Vec<SymIndex> {
    let mut out: Vec<SymIndex> = vec![SmallVec::new()];
    for &ji in j {
        let mut next = Vec::with_capacity(out.len() * (ji as usize + 1));
        for prefix in &out {
            for t in 0..=ji {
                let mut p = prefix.clone();
                p.push(t);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// A vertical differential operator of finite order.
#[derive(Clone, PartialEq)]
pub struct DiffOp<S: Scalar> {
    shape: Shape,
    terms: BTreeMap<OpKey, Coeff<S>>,
}

impl<S: Scalar> DiffOp<S> {
    pub fn zero(shape: Shape) -> Self {
        DiffOp {
            shape,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(shape: Shape) -> Self {
        let mut d = Self::zero(shape);
        d.add_term(
            ExteriorIndex::EMPTY,
            shape.zero_sym(),
            shape.zero_sym(),
            Coeff::one(shape.base),
        );
        d
    }

    /// `c ξ^I η^K ∂^J`.
    pub fn monomial(shape: Shape, ext: ExteriorIndex, k: SymIndex, j: SymIndex, c: Coeff<S>) -> Self {
        let mut d = Self::zero(shape);
        d.add_term(ext, k, j, c);
        d
    }

    /// The derivation `Σ_k f_k ∂/∂η^k`.
    pub fn from_field(x: &VerticalField<S>) -> Self {
        let shape = x.shape();
        let mut d = Self::zero(shape);
        for (k, f) in x.components().iter().enumerate() {
            let j = crate::function::sym_unit(shape.rank_b, k);
            for ((e, kk), c) in f.terms() {
                d.add_term(*e, kk.clone(), j.clone(), c.clone());
            }
        }
        d
    }

    /// Reads a pure derivation back as a vertical field.
    pub fn to_field(&self) -> Result<VerticalField<S>> {
        let mut x = VerticalField::zero(self.shape);
        for ((e, k, j), c) in &self.terms {
            if sym_degree(j) != 1 {
                return Err(Error::IdentityFailure(format!(
                    "operator has a component of order {} at η^{:?}∂^{:?}",
                    sym_degree(j),
                    k.as_slice(),
                    j.as_slice()
                )));
            }
            let i = j.iter().position(|&t| t == 1).unwrap();
            x.component_mut(i).add_term(*e, k.clone(), c.clone());
        }
        Ok(x)
    }

    pub fn shape(&self) -> Shape {
        self.shape
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

    pub fn terms(&self) -> impl Iterator<Item = (&OpKey, &Coeff<S>)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, ext: ExteriorIndex, k: SymIndex, j: SymIndex, c: Coeff<S>) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry((ext, k, j)) {
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

    fn add_signed(&mut self, ext: ExteriorIndex, k: SymIndex, j: SymIndex, c: Coeff<S>, neg: bool) {
        if neg {
            self.add_term(ext, k, j, -&c);
        } else {
            self.add_term(ext, k, j, c);
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for ((e, k, j), c) in &other.terms {
            self.add_term(*e, k.clone(), j.clone(), c.clone());
        }
    }

    pub fn sub_assign(&mut self, other: &Self) {
        for ((e, k, j), c) in &other.terms {
            self.add_term(*e, k.clone(), j.clone(), -c);
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
        out.sub_assign(other);
        Ok(out)
    }

    pub fn scale(&self, s: &S) -> Self {
        let mut out = Self::zero(self.shape);
        for ((e, k, j), c) in &self.terms {
            out.add_term(*e, k.clone(), j.clone(), c.scale(s));
        }
        out
    }

    /// The order-`q` component `D_q`.
    pub fn component(&self, q: usize) -> Self {
        self.filter(|_, _, j| sym_degree(j) == q)
    }

    pub fn filter(&self, mut keep: impl FnMut(ExteriorIndex, &SymIndex, &SymIndex) -> bool) -> Self {
        DiffOp {
            shape: self.shape,
            terms: self
                .terms
                .iter()
                .filter(|((e, k, j), _)| keep(*e, k, j))
                .map(|(key, c)| (key.clone(), c.clone()))
                .collect(),
        }
    }

    /// Drops terms whose coefficient degree exceeds `order`.
    pub fn truncate(&self, order: usize) -> Self {
        self.filter(|_, k, _| sym_degree(k) <= order)
    }

    /// Largest differential order present.
    pub fn max_order(&self) -> Option<usize> {
        self.terms.keys().map(|(_, _, j)| sym_degree(j)).max()
    }

    /// `min (|K| − |J|)` over the terms; `None` for zero.
    pub fn shift(&self) -> Option<i64> {
        self.terms
            .keys()
            .map(|(_, k, j)| sym_degree(k) as i64 - sym_degree(j) as i64)
            .min()
    }

    /// Form degrees that occur.
    pub fn form_degrees(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.terms.keys().map(|(e, _, _)| e.degree()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    fn parity_part(&self, odd: bool) -> Self {
        self.filter(|e, _, _| (e.degree() % 2 == 1) == odd)
    }

    /// Applies the operator, truncating the result at the shape's order.
    pub fn apply(&self, f: &FormalFunction<S>) -> FormalFunction<S> {
        let order = self.shape.order;
        let mut out = FormalFunction::zero(f.shape());
        for ((e, k, j), c) in &self.terms {
            let dk = sym_degree(k);
            if dk > order {
                continue;
            }
            for ((e2, k2), c2) in f.terms() {
                let Some(rest) = sym_sub(k2, j) else { continue };
                if dk + sym_degree(&rest) > order {
                    continue;
                }
                let Some((e3, neg)) = e.wedge(*e2) else { continue };
                let w = falling::<S>(k2, j);
                out.add_signed(e3, sym_add(k, &rest), (c * c2).scale(&w), neg);
            }
        }
        out
    }

    /// `self ∘ other`, dropping coefficient degrees above the order. Exact
    /// whenever `self` does not lower the fiber degree.
    pub fn compose(&self, other: &Self) -> Self {
        let order = self.shape.order;
        let mut out = Self::zero(self.shape);
        for ((ea, ka, ja), ca) in &self.terms {
            let dka = sym_degree(ka);
            if dka > order {
                continue;
            }
            let subs = sub_indices(ja);
            for ((eb, kb, jb), cb) in &other.terms {
                let Some((e, neg)) = ea.wedge(*eb) else { continue };
                let cab = ca * cb;
                for l in &subs {
                    let Some(kb_rest) = sym_sub(kb, l) else { continue };
                    if dka + sym_degree(&kb_rest) > order {
                        continue;
                    }
                    let w = multi_binomial::<S>(ja, l) * falling::<S>(kb, l);
                    let k = sym_add(ka, &kb_rest);
                    let j = sym_add(&sym_sub(ja, l).unwrap(), jb);
                    out.add_signed(e, k, j, cab.scale(&w), neg);
                }
            }
        }
        out
    }

    /// Graded commutator by form degree.
    pub fn commutator(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.shape);
        for a_odd in [false, true] {
            let a = self.parity_part(a_odd);
            if a.is_zero() {
                continue;
            }
            for b_odd in [false, true] {
                let b = other.parity_part(b_odd);
                if b.is_zero() {
                    continue;
                }
                out.add_assign(&a.compose(&b));
                let ba = b.compose(&a);
                if a_odd && b_odd {
                    out.add_assign(&ba);
                } else {
                    out.sub_assign(&ba);
                }
            }
        }
        out
    }

    /// Applies a map to the `Γ(Λ•L^∨ ⊗ ŜB^∨)` factor, identity on `SB`.
    pub fn map_coefficients(&self, mut f: impl FnMut(&FormalFunction<S>) -> FormalFunction<S>) -> Self {
        let mut slices: BTreeMap<SymIndex, FormalFunction<S>> = BTreeMap::new();
        for ((e, k, j), c) in &self.terms {
            slices
                .entry(j.clone())
                .or_insert_with(|| FormalFunction::zero(self.shape))
                .add_term(*e, k.clone(), c.clone());
        }
        let mut out = Self::zero(self.shape);
        for (j, slice) in slices {
            for ((e, k), c) in f(&slice).terms() {
                out.add_term(*e, k.clone(), j.clone(), c.clone());
            }
        }
        out
    }

    /// `δ = [k, −]`, which is `k ⊗ id_{SB}`.
    pub fn delta(&self) -> Self {
        self.map_coefficients(crate::fedosov::koszul)
    }

    /// `h_♮ = h ⊗ id_{SB}`.
    pub fn h_natural(&self, contraction: &Contraction<S>) -> Self {
        self.map_coefficients(|f| contraction.h(f))
    }

    /// `σ₀ ⊗ id_{SB}`.
    pub fn sigma0(&self, contraction: &Contraction<S>) -> Self {
        self.map_coefficients(|f| contraction.sigma0(f))
    }

    /// Reinterprets at another truncation order.
    pub fn with_order(&self, order: usize) -> Self {
        let mut out = self.truncate(order);
        out.shape.order = order;
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|((e, k, j), c)| {
                    json!({
                        "xi": e.indices().map(|u| u + 1).collect::<Vec<_>>(),
                        "eta": k.to_vec(),
                        "d": j.to_vec(),
                        "coeff": c.to_json(),
                    })
                })
                .collect(),
        )
    }
}

impl<S: Scalar> fmt::Debug for DiffOp<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, ((e, k, j), c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for u in e.indices() {
                write!(f, "·ξ{}", u + 1)?;
            }
            write!(f, "·η{:?}∂{:?}", k.as_slice(), j.as_slice())?;
        }
        Ok(())
    }
}

/// An operator `Σ_q D_q` with `D_q ∈ Γ(Λ•L^∨ ⊗ Ŝ^{≥q+N}B^∨ ⊗ S^qB)`.
#[derive(Clone, PartialEq, Debug)]
pub struct ShiftingOperator<S: Scalar> {
    shift: i64,
    op: DiffOp<S>,
}

impl<S: Scalar> ShiftingOperator<S> {
    /// Wraps `op`, checking the componentwise shift bound.
    pub fn new(op: DiffOp<S>, shift: i64) -> Result<Self> {
        for (e, k, j) in op.terms.keys() {
            if (sym_degree(k) as i64) < sym_degree(j) as i64 + shift {
                return Err(Error::ShiftViolation {
                    witness: format!("ξ{:?}η^{:?}∂^{:?}", e.indices().map(|u| u + 1).collect::<Vec<_>>(), k.as_slice(), j.as_slice()),
                    detail: format!("component of order {} has coefficient degree {} < {}", sym_degree(j), sym_degree(k), sym_degree(j) as i64 + shift),
                });
            }
        }
        Ok(ShiftingOperator { shift, op })
    }

    pub fn identity(shape: Shape) -> Self {
        ShiftingOperator {
            shift: 0,
            op: DiffOp::identity(shape),
        }
    }

    pub fn shift(&self) -> i64 {
        self.shift
    }

    pub fn op(&self) -> &DiffOp<S> {
        &self.op
    }

    pub fn into_op(self) -> DiffOp<S> {
        self.op
    }

    pub fn shape(&self) -> Shape {
        self.op.shape
    }

    /// `D_q`.
    pub fn component(&self, q: usize) -> DiffOp<S> {
        self.op.component(q)
    }

    /// The components `D_0, …, D_N`.
    pub fn components(&self) -> Vec<DiffOp<S>> {
        (0..=self.shape().order).map(|q| self.component(q)).collect()
    }

    pub fn apply(&self, f: &FormalFunction<S>) -> FormalFunction<S> {
        self.op.apply(f)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "shift": self.shift,
            "components": self.components().iter().map(|d| d.to_json()).collect::<Vec<_>>(),
        })
    }
}

/// Rebuilds `(D_q)` from an operator known only through its values on the
/// fiber monomials: `D_q|_{S^q} = φ^q − Σ_{i<q} D_i|_{S^q}`, so the
/// coefficient of `∂^J` is `(φ(η^J) − Σ_{i<|J|} D_i(η^J))/J!`.
pub fn decompose<S: Scalar>(
    shape: Shape,
    shift: i64,
    phi: impl Fn(&FormalFunction<S>) -> FormalFunction<S>,
) -> Result<ShiftingOperator<S>> {
    let mut acc = DiffOp::zero(shape);
    for q in 0..=shape.order {
        let mut layer = DiffOp::zero(shape);
        for j in sym_basis(shape.rank_b, q) {
            let eta = FormalFunction::monomial(shape, ExteriorIndex::EMPTY, j.clone(), Coeff::one(shape.base));
            let value = phi(&eta).truncate(shape.order);
            let residual = &value - &acc.apply(&eta);
            let inv = S::one() / sym_factorial::<S>(&j);
            for ((e, k), c) in residual.terms() {
                if (sym_degree(k) as i64) < q as i64 + shift {
                    return Err(Error::ShiftViolation {
                        witness: format!("η^{:?}", j.as_slice()),
                        detail: format!(
                            "image has a term of fiber degree {} below {}",
                            sym_degree(k),
                            q as i64 + shift
                        ),
                    });
                }
                layer.add_term(*e, k.clone(), j.clone(), c.scale(&inv));
            }
        }
        acc.add_assign(&layer);
    }
    ShiftingOperator::new(acc, shift)
}

/// `∂(φ) = ΔQ∘φ + [k + Q₂, φ]` with `k + Q₂ = d^{∇₂} + X₂`.
pub fn eth<S: Scalar>(
    phi: &DiffOp<S>,
    delta_q: &DiffOp<S>,
    q2: &FedosovField<S>,
) -> Result<DiffOp<S>> {
    if let Some(s) = phi.shift() {
        if s < 0 {
            return Err(Error::Precondition(format!(
                "∂ is restricted to operators of shift ≥ 0, got {s}"
            )));
        }
    }
    let w = DiffOp::from_field(&q2.vertical_part());
    let mut out = delta_q.compose(phi);
    out.add_assign(&phi.map_coefficients(|f| q2.covariant().d0(f)));
    out.add_assign(&w.commutator(phi));
    Ok(out)
}

/// `ΔQ = Q₁ − Q₂ = V_{Γ₁} − V_{Γ₂} + X₁ − X₂` as an operator.
pub fn delta_q<S: Scalar>(q1: &FedosovField<S>, q2: &FedosovField<S>) -> Result<DiffOp<S>> {
    q1.shape().check(&q2.shape())?;
    Ok(DiffOp::from_field(&(&q1.vertical_part() - &q2.vertical_part())))
}

/// Output of [`solve_phi`]: the intertwiner and the terms `(h_♮∂)ⁿ(1)`.
#[derive(Clone, Debug)]
pub struct PhiSolution<S: Scalar> {
    pub phi: ShiftingOperator<S>,
    pub terms: Vec<DiffOp<S>>,
}

/// `φ = Σ_n (h_♮∂)ⁿ(1)`, accumulated as `φ_n = 1 + h_♮∂(φ_{n−1})` until it
/// stabilises (at most `N + 1` steps).
pub fn solve_phi<S: Scalar>(
    q1: &FedosovField<S>,
    q2: &FedosovField<S>,
    contraction: &Contraction<S>,
) -> Result<PhiSolution<S>> {
    let shape = q1.shape();
    let dq = delta_q(q1, q2)?;
    let one = DiffOp::identity(shape);
    let mut phi = one.clone();
    let mut terms = Vec::new();
    for _ in 0..=shape.order + 1 {
        let next = &eth(&phi, &dq, q2)?.h_natural(contraction).truncate(shape.order);
        let next = one.try_add(next)?;
        let t = next.try_sub(&phi)?;
        if t.is_zero() {
            return Ok(PhiSolution {
                phi: ShiftingOperator::new(phi, 0)?,
                terms,
            });
        }
        terms.push(t);
        phi = next;
    }
    Err(Error::IdentityFailure(
        "intertwiner iteration did not stabilise within N + 2 steps".into(),
    ))
}

/// `φ − 1 − h_♮∂(φ)`, zero exactly for the fixed point.
pub fn fixed_point_residual<S: Scalar>(
    phi: &DiffOp<S>,
    q1: &FedosovField<S>,
    q2: &FedosovField<S>,
    contraction: &Contraction<S>,
) -> Result<DiffOp<S>> {
    let dq = delta_q(q1, q2)?;
    let image = eth(phi, &dq, q2)?.h_natural(contraction).truncate(phi.shape().order);
    let mut r = phi.clone();
    r.sub_assign(&DiffOp::identity(phi.shape()));
    r.sub_assign(&image);
    Ok(r)
}

/// Checks `φ(Q₂ f) = Q₁(φ f)` through fiber degree `N − 1` on every basis
/// function of degree at most `N − 1`; returns the first failure.
pub fn verify_intertwining<S: Scalar>(
    phi: &ShiftingOperator<S>,
    q1: &FedosovField<S>,
    q2: &FedosovField<S>,
) -> (usize, Option<(FormalFunction<S>, FormalFunction<S>)>) {
    let shape = q1.shape();
    let top = shape.order.saturating_sub(1);
    let mut checked = 0;
    for f in basis_functions::<S>(shape, top) {
        let lhs = phi.apply(&q2.apply(&f)).truncate(top);
        let rhs = q1.apply(&phi.apply(&f)).truncate(top);
        checked += 1;
        if lhs != rhs {
            return (checked, Some((f, &lhs - &rhs)));
        }
    }
    (checked, None)
}

fn require_admissible_field<S: Scalar>(y: &VerticalField<S>) -> Result<()> {
    if y.form_degrees().iter().any(|&d| d != 0) {
        return Err(Error::Precondition(
            "exponential needs a vector field of form degree zero".into(),
        ));
    }
    if let Some(o) = y.filtration_order() {
        if o < 2 {
            return Err(Error::Precondition(format!(
                "exponential needs filtration order at least 2, got {o}"
            )));
        }
    }
    Ok(())
}

/// `e^Y = Σ Yⁿ/n!`, finite at the truncation order.
pub fn exp_field<S: Scalar>(y: &VerticalField<S>) -> Result<ShiftingOperator<S>> {
    require_admissible_field(y)?;
    let shape = y.shape();
    let yop = DiffOp::from_field(y);
    let mut acc = DiffOp::identity(shape);
    let mut term = DiffOp::identity(shape);
    for n in 1..=shape.order + 1 {
        term = yop.compose(&term).scale(&S::ratio(1, n as i64));
        if term.is_zero() {
            break;
        }
        acc.add_assign(&term);
    }
    ShiftingOperator::new(acc, 0)
}

fn check_log_preconditions<S: Scalar>(phi: &DiffOp<S>) -> Result<()> {
    let shape = phi.shape();
    if phi.form_degrees().iter().any(|&d| d != 0) {
        return Err(Error::Precondition(
            "log needs an operator of form degree zero".into(),
        ));
    }
    for l in 0..shape.rank_b {
        let img = phi.apply(&FormalFunction::eta(shape, l));
        let constant = img.filter(|_, k| sym_degree(k) == 0);
        if !constant.is_zero() {
            return Err(Error::Precondition(format!(
                "φ₀ ≠ 0: φ(η^{}) has constant part {constant}",
                l + 1
            )));
        }
        let linear = img.filter(|_, k| sym_degree(k) == 1);
        if linear != FormalFunction::eta(shape, l) {
            return Err(Error::Precondition(format!(
                "φ₁ ≠ id: φ(η^{}) has linear part {linear}; factor out χ first",
                l + 1
            )));
        }
    }
    Ok(())
}

/// Compositions `(i_1, …, i_k)`, `k ≥ 2`, `i_m ≥ 2`, `Σ i_m − (k−1) = q`.
fn compositions(q: usize) -> Vec<Vec<usize>> {
    fn go(remaining: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            if prefix.len() >= 2 {
                out.push(prefix.clone());
            }
            return;
        }
        for i in 2..=remaining + 1 {
            if i - 1 > remaining {
                break;
            }
            prefix.push(i);
            go(remaining - (i - 1), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(q - 1, &mut Vec::new(), &mut out);
    out
}

/// Degreewise recursion `Y_q∘j = φ_q∘j − Σ_{k≥2} (1/k!) Σ Y_{i_1}∘⋯∘Y_{i_k}∘j`.
pub fn log_phi_iteration<S: Scalar>(phi: &DiffOp<S>) -> Result<VerticalField<S>> {
    check_log_preconditions(phi)?;
    let shape = phi.shape();
    let r = shape.rank_b;
    let images: Vec<FormalFunction<S>> = (0..r)
        .map(|l| phi.apply(&FormalFunction::eta(shape, l)))
        .collect();
    let mut pieces: BTreeMap<usize, VerticalField<S>> = BTreeMap::new();
    for q in 2..=shape.order {
        let mut comps = Vec::with_capacity(r);
        for (l, img) in images.iter().enumerate() {
            let mut y = img.filter(|_, k| sym_degree(k) == q);
            for comp in compositions(q) {
                let mut g = FormalFunction::eta(shape, l);
                for i in comp.iter().rev() {
                    g = pieces[i].apply(&g);
                }
                let g = g.filter(|_, k| sym_degree(k) == q);
                y = &y - &g.scale(&(S::one() / factorial::<S>(comp.len())));
            }
            comps.push(y);
        }
        pieces.insert(q, VerticalField::from_components(comps)?);
    }
    Ok(pieces
        .values()
        .fold(VerticalField::zero(shape), |acc, y| &acc + y))
}

/// Operator series `Y = Σ_j (−1)^{j+1}/j (Σ_n T_n)^j`, keeping
/// `j ≤ N` and `n_1 + ⋯ + n_j ≤ N`; everything dropped has filtration order
/// above `N`. `terms[n−1]` is `T_n`, which must raise the filtration by `n`.
pub fn log_phi_series<S: Scalar>(terms: &[DiffOp<S>], shape: Shape) -> Result<VerticalField<S>> {
    let order = shape.order;
    let mut total = DiffOp::zero(shape);
    let mut power: BTreeMap<usize, DiffOp<S>> = BTreeMap::new();
    for (n, t) in terms.iter().enumerate() {
        if n < order {
            power.insert(n + 1, t.clone());
        }
    }
    for j in 1..=order {
        if power.is_empty() {
            break;
        }
        let sign = if j % 2 == 1 { S::one() } else { -S::one() };
        let w = sign / S::from_int(j as i64);
        for p in power.values() {
            total.add_assign(&p.scale(&w));
        }
        let mut next: BTreeMap<usize, DiffOp<S>> = BTreeMap::new();
        for (n, t) in terms.iter().enumerate() {
            for (s, p) in &power {
                let idx = s + n + 1;
                if idx > order {
                    continue;
                }
                let prod = t.compose(p);
                if prod.is_zero() {
                    continue;
                }
                next.entry(idx)
                    .or_insert_with(|| DiffOp::zero(shape))
                    .add_assign(&prod);
            }
        }
        power = next;
    }
    total.to_field()
}

/// `Y = log φ` by both backends, which must agree.
pub fn log_phi<S: Scalar>(phi: &ShiftingOperator<S>) -> Result<VerticalField<S>> {
    let op = phi.op();
    let a = log_phi_iteration(op)?;
    let mut minus_one = op.clone();
    minus_one.sub_assign(&DiffOp::identity(op.shape()));
    let b = log_phi_series(&[minus_one], op.shape())?;
    if a != b {
        return Err(Error::IdentityFailure(format!(
            "log backends disagree: iteration {a:?} vs series {b:?}"
        )));
    }
    Ok(a)
}

/// `log φ` for an intertwiner from [`solve_phi`], feeding the terms
/// `(h_♮∂)ⁿ(1)` into the series and cross-checking with the recursion.
pub fn log_of_solution<S: Scalar>(sol: &PhiSolution<S>) -> Result<VerticalField<S>> {
    let a = log_phi_iteration(sol.phi.op())?;
    let b = log_phi_series(&sol.terms, sol.phi.shape())?;
    if a != b {
        return Err(Error::IdentityFailure(format!(
            "log backends disagree: iteration {a:?} vs series {b:?}"
        )));
    }
    Ok(a)
}

/// The transpose `φ` of a filtered coalgebra map `ψ` under the pairing,
/// `⟨φ(f), θ⟩ = ⟨f, ψ(θ)⟩`, i.e. `φ(η^K) = Σ_J [ψ(∂_J)]_K (K!/J!) η^J`.
pub fn dual_of_coalgebra_map<S: Scalar>(
    shape: Shape,
    psi: impl Fn(&SymIndex) -> Result<PolySection<S>>,
) -> Result<ShiftingOperator<S>> {
    let r = shape.rank_b;
    let mut images: BTreeMap<SymIndex, FormalFunction<S>> = sym_basis_upto(r, shape.order)
        .into_iter()
        .map(|k| (k, FormalFunction::zero(shape)))
        .collect();
    for j in sym_basis_upto(r, shape.order) {
        let s = psi(&j)?;
        let top = sym_degree(&j);
        for (k, c) in s.terms() {
            let dk = sym_degree(k);
            if dk > top || (dk == top && (k != &j || *c != Coeff::one(shape.base))) {
                return Err(Error::Precondition(format!(
                    "ψ is not unitriangular at ∂{:?}",
                    j.as_slice()
                )));
            }
            let w = sym_factorial::<S>(k) / sym_factorial::<S>(&j);
            images
                .get_mut(k)
                .unwrap()
                .add_term(ExteriorIndex::EMPTY, j.clone(), c.scale(&w));
        }
        if s.coefficient(&j) != Coeff::one(shape.base) {
            return Err(Error::Precondition(format!(
                "ψ is not unitriangular at ∂{:?}",
                j.as_slice()
            )));
        }
    }
    decompose(shape, 0, |f| {
        let mut out = FormalFunction::zero(shape);
        for ((e, k), c) in f.terms() {
            let img = &images[k];
            out.add_assign(&img.left_mul_monomial(*e, &shape.zero_sym(), c));
        }
        out
    })
}

/// A polydifferential operator `(f_0, …, f_k) ↦ Σ c_{J_0…J_k} ∂^{J_0}f_0 ⋯ ∂^{J_k}f_k`
/// with coefficients in `ŜB^∨` (form degree zero).
#[derive(Clone, PartialEq, Debug)]
pub struct PolyDiffOp<S: Scalar> {
    shape: Shape,
    arity: usize,
    terms: BTreeMap<Vec<SymIndex>, FormalFunction<S>>,
}

impl<S: Scalar> PolyDiffOp<S> {
    pub fn zero(shape: Shape, arity: usize) -> Self {
        PolyDiffOp {
            shape,
            arity,
            terms: BTreeMap::new(),
        }
    }

    /// `η^I ⊗ ∂_{J_0} ⊗ ⋯ ⊗ ∂_{J_k}` with a base coefficient.
    pub fn monomial(shape: Shape, i: SymIndex, js: Vec<SymIndex>, c: Coeff<S>) -> Self {
        let mut p = Self::zero(shape, js.len());
        p.add(js, &FormalFunction::monomial(shape, ExteriorIndex::EMPTY, i, c));
        p
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<SymIndex>, &FormalFunction<S>)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&mut self, js: Vec<SymIndex>, c: &FormalFunction<S>) {
        let slot = self
            .terms
            .entry(js.clone())
            .or_insert_with(|| FormalFunction::zero(self.shape));
        slot.add_assign(c);
        if slot.is_zero() {
            self.terms.remove(&js);
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (js, c) in &other.terms {
            out.add(js.clone(), &-c);
        }
        out
    }

    /// Minimal fiber degree of the coefficients (`None` for zero).
    pub fn filtration_order(&self) -> Option<usize> {
        self.terms.values().filter_map(|c| c.filtration_order()).min()
    }

    pub fn evaluate(&self, args: &[FormalFunction<S>]) -> Result<FormalFunction<S>> {
        if args.len() != self.arity {
            return Err(Error::ShapeMismatch(format!(
                "operator takes {} arguments, got {}",
                self.arity,
                args.len()
            )));
        }
        let mut out = FormalFunction::zero(self.shape);
        for (js, c) in &self.terms {
            let mut acc = c.clone();
            for (j, f) in js.iter().zip(args) {
                acc = acc.mul_truncated(&f.differentiate(j), self.shape.order);
                if acc.is_zero() {
                    break;
                }
            }
            out.add_assign(&acc);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|(js, c)| {
                    json!({
                        "d": js.iter().map(|j| j.to_vec()).collect::<Vec<_>>(),
                        "coeff": c.to_json(),
                    })
                })
                .collect(),
        )
    }
}

/// Tuples of multi-indices with total degree at most `max`.
fn index_tuples(width: usize, arity: usize, max: usize) -> Vec<Vec<SymIndex>> {
    let mut out: Vec<(Vec<SymIndex>, usize)> = vec![(Vec::new(), 0)];
    for _ in 0..arity {
        let mut next = Vec::new();
        for (prefix, used) in &out {
            for j in sym_basis_upto(width, max - used) {
                let d = sym_degree(&j);
                let mut p = prefix.clone();
                p.push(j);
                next.push((p, used + d));
            }
        }
        out = next;
    }
    let mut tuples: Vec<Vec<SymIndex>> = out.into_iter().map(|(p, _)| p).collect();
    tuples.sort_by_key(|t| t.iter().map(|j| sym_degree(j)).sum::<usize>());
    tuples
}

/// Recovers a polydifferential operator from a black box by triangular
/// recursion on the total derivative order, up to total order `max`.
pub fn decompose_polydiff<S: Scalar>(
    shape: Shape,
    arity: usize,
    max: usize,
    black_box: impl Fn(&[FormalFunction<S>]) -> Result<FormalFunction<S>>,
) -> Result<PolyDiffOp<S>> {
    let mut out = PolyDiffOp::zero(shape, arity);
    for m in index_tuples(shape.rank_b, arity, max) {
        let args: Vec<FormalFunction<S>> = m
            .iter()
            .map(|j| FormalFunction::monomial(shape, ExteriorIndex::EMPTY, j.clone(), Coeff::one(shape.base)))
            .collect();
        let value = black_box(&args)?;
        let known = out.evaluate(&args)?;
        let residual = &value - &known;
        if residual.is_zero() {
            continue;
        }
        let fact = m
            .iter()
            .fold(S::one(), |acc, j| acc * sym_factorial::<S>(j));
        out.add(m, &residual.scale(&(S::one() / fact)));
    }
    Ok(out)
}

/// Result of [`pushforward_polydiff`].
#[derive(Clone, Debug)]
pub struct Pushforward<S: Scalar> {
    pub full: PolyDiffOp<S>,
    pub leading: PolyDiffOp<S>,
    pub remainder: PolyDiffOp<S>,
}

/// `ψ⁻¹(∂_J) = Σ_{J′} [φ⁻¹(η^{J′})]_J (J!/J′!) ∂_{J′}`, as a section.
pub fn inverse_transition<S: Scalar>(phi_inv: &ShiftingOperator<S>, j: &[u8]) -> PolySection<S> {
    let shape = phi_inv.shape();
    let base = shape.base;
    let mut out = PolySection::zero(shape.rank_b, base);
    for jp in sym_basis_upto(shape.rank_b, sym_degree(j)) {
        let img = phi_inv.apply(&FormalFunction::monomial(
            shape,
            ExteriorIndex::EMPTY,
            jp.clone(),
            Coeff::one(base),
        ));
        let c = img.coefficient(ExteriorIndex::EMPTY, j);
        if c.is_zero() {
            continue;
        }
        let w = sym_factorial::<S>(j) / sym_factorial::<S>(&jp);
        out.add_term(jp, c.scale(&w));
    }
    out
}

/// `φ_*(P)(f_0, …, f_k) = φ(P(φ⁻¹f_0, …, φ⁻¹f_k))` for `φ = e^Y`, split as
/// `η^I ⊗ ψ⁻¹(∂_{J_0}) ⊗ ⋯ ⊗ ψ⁻¹(∂_{J_k})` plus a remainder.
pub fn pushforward_polydiff<S: Scalar>(
    y: &VerticalField<S>,
    i: &SymIndex,
    js: &[SymIndex],
    c: &Coeff<S>,
) -> Result<Pushforward<S>> {
    let shape = y.shape();
    let order = shape.order;
    let extra: usize = js.iter().map(|j| sym_degree(j)).max().unwrap_or(0);
    let work = shape.with_order(order + extra);
    let y_work = VerticalField::from_components(
        y.components()
            .iter()
            .map(|f| {
                let mut g = FormalFunction::zero(work);
                for ((e, k), v) in f.terms() {
                    g.add_term(*e, k.clone(), v.clone());
                }
                g
            })
            .collect(),
    )?;
    let phi = exp_field(&y_work)?;
    let phi_inv = exp_field(&y_work.scale(&-S::one()))?;
    let p_work = PolyDiffOp::monomial(work, i.clone(), js.to_vec(), c.clone());
    let total: usize = js.iter().map(|j| sym_degree(j)).sum();
    let full_work = decompose_polydiff(work, js.len(), order + total, |args| {
        let pulled: Vec<FormalFunction<S>> = args.iter().map(|f| phi_inv.apply(f)).collect();
        Ok(phi.apply(&p_work.evaluate(&pulled)?).truncate(order))
    })?;
    let to_shape = |p: &PolyDiffOp<S>| {
        let mut out = PolyDiffOp::zero(shape, p.arity);
        for (m, f) in &p.terms {
            let mut g = FormalFunction::zero(shape);
            for ((e, k), v) in f.truncate(order).terms() {
                g.add_term(*e, k.clone(), v.clone());
            }
            if !g.is_zero() {
                out.terms.insert(m.clone(), g);
            }
        }
        out
    };
    let full = to_shape(&full_work);
    let inv_sections: Vec<PolySection<S>> = js.iter().map(|j| inverse_transition(&phi_inv, j)).collect();
    let mut leading = PolyDiffOp::zero(shape, js.len());
    let eta_i = FormalFunction::monomial(shape, ExteriorIndex::EMPTY, i.clone(), c.clone());
    let mut tuples: Vec<(Vec<SymIndex>, Coeff<S>)> = vec![(Vec::new(), Coeff::one(shape.base))];
    for s in &inv_sections {
        let mut next = Vec::new();
        for (prefix, acc) in &tuples {
            for (jp, v) in s.terms() {
                let mut p = prefix.clone();
                p.push(jp.clone());
                next.push((p, acc * v));
            }
        }
        tuples = next;
    }
    for (m, v) in tuples {
        leading.add(m, &eta_i.mul_coeff(&v));
    }
    let remainder = full.sub(&leading);
    Ok(Pushforward {
        full,
        leading,
        remainder,
    })
}

/// Checks the operator-level homotopy identities on `D`:
/// `δ² = 0`, `h_♮² = 0`, `h_♮δh_♮ = h_♮`, `δh_♮ + h_♮δ = id − σ₀`.
pub fn operator_homotopy_failures<S: Scalar>(d: &DiffOp<S>, contraction: &Contraction<S>) -> Vec<&'static str> {
    let mut out = Vec::new();
    let h = |x: &DiffOp<S>| x.h_natural(contraction);
    if !d.delta().delta().is_zero() {
        out.push("δ² = 0");
    }
    let hd = h(d);
    if !h(&hd).is_zero() {
        out.push("h_♮² = 0");
    }
    if h(&hd.delta()) != hd {
        out.push("h_♮δh_♮ = h_♮");
    }
    let mut lhs = h(d).delta();
    lhs.add_assign(&h(&d.delta()));
    let mut rhs = d.clone();
    rhs.sub_assign(&d.sigma0(contraction));
    if lhs != rhs {
        out.push("δh_♮ + h_♮δ = id − σ₀");
    }
    out
}

/// Evaluates `φ` on `f·g` and on each factor; true when multiplicative
/// through the truncation order.
pub fn is_multiplicative_on<S: Scalar>(phi: &ShiftingOperator<S>, f: &FormalFunction<S>, g: &FormalFunction<S>) -> bool {
    phi.apply(&(f * g)) == &phi.apply(f) * &phi.apply(g)
}
