//! Exact coefficient rings: scalars over a point, polynomials over a chart.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde_json::Value;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::scalar::{is_zero, parse_scalar, Scalar};
use crate::Rational;

/// The base manifold: a single point, or a coordinate chart of dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Base {
    Point,
    Chart(usize),
}

impl Base {
    pub fn dim(self) -> usize {
        match self {
            Base::Point => 0,
            Base::Chart(n) => n,
        }
    }
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Base::Point => write!(f, "POINT"),
            Base::Chart(n) => write!(f, "CHART({n})"),
        }
    }
}

/// Exponent vector of a monomial in the chart coordinates `x^1..x^n`.
pub type XMonomial = SmallVec<[u16; 3]>;

/// A coefficient: a scalar (point base) or a polynomial in chart coordinates.
///
/// Chart polynomials never store zero entries, so structural equality is
/// mathematical equality.
#[derive(Clone, Debug, PartialEq)]
pub enum Coeff<S = Rational> {
    Point(S),
    Chart {
        dim: usize,
        terms: BTreeMap<XMonomial, S>,
    },
}

impl<S: Scalar> Coeff<S> {
    pub fn zero(base: Base) -> Self {
        match base {
            Base::Point => Coeff::Point(S::zero()),
            Base::Chart(dim) => Coeff::Chart {
                dim,
                terms: BTreeMap::new(),
            },
        }
    }

    pub fn one(base: Base) -> Self {
        Self::constant(base, S::one())
    }

    pub fn constant(base: Base, value: S) -> Self {
        match base {
            Base::Point => Coeff::Point(value),
            Base::Chart(dim) => Self::monomial(dim, SmallVec::from_elem(0, dim), value),
        }
    }

    pub fn from_int(base: Base, n: i64) -> Self {
        Self::constant(base, S::from_int(n))
    }

    /// `value * x^exps` on an `dim`-dimensional chart.
    pub fn monomial(dim: usize, exps: XMonomial, value: S) -> Self {
        assert_eq!(exps.len(), dim, "exponent width must equal chart dimension");
        let mut terms = BTreeMap::new();
        if !is_zero(&value) {
            terms.insert(exps, value);
        }
        Coeff::Chart { dim, terms }
    }

    /// The coordinate function `x^axis` (0-based axis).
    pub fn coordinate(dim: usize, axis: usize) -> Self {
        let mut e: XMonomial = SmallVec::from_elem(0, dim);
        e[axis] = 1;
        Self::monomial(dim, e, S::one())
    }

    pub fn base(&self) -> Base {
        match self {
            Coeff::Point(_) => Base::Point,
            Coeff::Chart { dim, .. } => Base::Chart(*dim),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coeff::Point(s) => is_zero(s),
            Coeff::Chart { terms, .. } => terms.is_empty(),
        }
    }

    /// The scalar value when the coefficient is constant.
    pub fn as_constant(&self) -> Option<S> {
        match self {
            Coeff::Point(s) => Some(s.clone()),
            Coeff::Chart { terms, .. } => match terms.len() {
                0 => Some(S::zero()),
                1 => {
                    let (e, v) = terms.iter().next().unwrap();
                    e.iter().all(|&k| k == 0).then(|| v.clone())
                }
                _ => None,
            },
        }
    }

    /// Number of stored terms (1 for a nonzero point scalar).
    pub fn len(&self) -> usize {
        match self {
            Coeff::Point(s) => usize::from(!is_zero(s)),
            Coeff::Chart { terms, .. } => terms.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.base() != other.base() {
            return Err(Error::BaseMismatch(self.base(), other.base()));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        out.add_assign_ref(other);
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        out.sub_assign_ref(other);
        Ok(out)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(self.mul_unchecked(other))
    }

    /// Partial derivative along `axis` (0-based). Fails over a point, where
    /// there are no coordinates to differentiate.
    pub fn partial(&self, axis: usize) -> Result<Self> {
        match self {
            Coeff::Point(_) => Err(Error::Structural(
                "partial derivative requested over a point base".into(),
            )),
            Coeff::Chart { dim, terms } => {
                if axis >= *dim {
                    return Err(Error::Structural(format!(
                        "axis {axis} out of range for chart of dimension {dim}"
                    )));
                }
                let mut out = BTreeMap::new();
                for (e, v) in terms {
                    if e[axis] == 0 {
                        continue;
                    }
                    let mut e2 = e.clone();
                    let k = e2[axis];
                    e2[axis] -= 1;
                    out.insert(e2, v.clone() * S::from_int(k as i64));
                }
                Ok(Coeff::Chart {
                    dim: *dim,
                    terms: out,
                })
            }
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        if is_zero(s) {
            return Self::zero(self.base());
        }
        match self {
            Coeff::Point(v) => Coeff::Point(v.clone() * s.clone()),
            Coeff::Chart { dim, terms } => Coeff::Chart {
                dim: *dim,
                terms: terms
                    .iter()
                    .map(|(e, v)| (e.clone(), v.clone() * s.clone()))
                    .collect(),
            },
        }
    }

    /// Evaluates chart polynomials at `point`, yielding a point coefficient.
    pub fn evaluate(&self, point: &[S]) -> S {
        match self {
            Coeff::Point(s) => s.clone(),
            Coeff::Chart { terms, .. } => {
                let mut acc = S::zero();
                for (e, v) in terms {
                    let mut t = v.clone();
                    for (x, &k) in point.iter().zip(e.iter()) {
                        for _ in 0..k {
                            t = t * x.clone();
                        }
                    }
                    acc = acc + t;
                }
                acc
            }
        }
    }

    pub fn evaluate_f64(&self, point: &[f64]) -> f64 {
        match self {
            Coeff::Point(s) => s.to_f64(),
            Coeff::Chart { terms, .. } => terms
                .iter()
                .map(|(e, v)| {
                    e.iter()
                        .zip(point)
                        .fold(v.to_f64(), |acc, (&k, x)| acc * x.powi(k as i32))
                })
                .sum(),
        }
    }

    /// Total degree in the chart coordinates (0 for point scalars, `None` for zero).
    pub fn degree(&self) -> Option<usize> {
        match self {
            Coeff::Point(s) => (!is_zero(s)).then_some(0),
            Coeff::Chart { terms, .. } => terms
                .keys()
                .map(|e| e.iter().map(|&k| k as usize).sum())
                .max(),
        }
    }

    pub fn terms(&self) -> Box<dyn Iterator<Item = (XMonomial, &S)> + '_> {
        match self {
            Coeff::Point(s) => {
                if is_zero(s) {
                    Box::new(std::iter::empty())
                } else {
                    Box::new(std::iter::once((SmallVec::new(), s)))
                }
            }
            Coeff::Chart { terms, .. } => Box::new(terms.iter().map(|(e, v)| (e.clone(), v))),
        }
    }

    pub(crate) fn add_assign_ref(&mut self, other: &Self) {
        match (self, other) {
            (Coeff::Point(a), Coeff::Point(b)) => *a = a.clone() + b.clone(),
            (Coeff::Chart { terms: a, .. }, Coeff::Chart { terms: b, .. }) => {
                for (e, v) in b {
                    merge_term(a, e, v.clone());
                }
            }
            (a, b) => panic!("{}", Error::BaseMismatch(a.base(), b.base())),
        }
    }

    pub(crate) fn sub_assign_ref(&mut self, other: &Self) {
        match (self, other) {
            (Coeff::Point(a), Coeff::Point(b)) => *a = a.clone() - b.clone(),
            (Coeff::Chart { terms: a, .. }, Coeff::Chart { terms: b, .. }) => {
                for (e, v) in b {
                    merge_term(a, e, -v.clone());
                }
            }
            (a, b) => panic!("{}", Error::BaseMismatch(a.base(), b.base())),
        }
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        match (self, other) {
            (Coeff::Point(a), Coeff::Point(b)) => Coeff::Point(a.clone() * b.clone()),
            (Coeff::Chart { dim, terms: a }, Coeff::Chart { terms: b, .. }) => {
                let mut out = BTreeMap::new();
                for (ea, va) in a {
                    for (eb, vb) in b {
                        let e: XMonomial = ea.iter().zip(eb.iter()).map(|(x, y)| x + y).collect();
                        merge_term(&mut out, &e, va.clone() * vb.clone());
                    }
                }
                Coeff::Chart {
                    dim: *dim,
                    terms: out,
                }
            }
            (a, b) => panic!("{}", Error::BaseMismatch(a.base(), b.base())),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Coeff::Point(s) => Value::String(s.to_string()),
            Coeff::Chart { terms, .. } => Value::Array(
                terms
                    .iter()
                    .map(|(e, v)| {
                        Value::Array(vec![
                            Value::Array(e.iter().map(|&k| Value::from(k)).collect()),
                            Value::String(v.to_string()),
                        ])
                    })
                    .collect(),
            ),
        }
    }

    /// Reads a coefficient: a rational string, or (chart only) an array of
    /// `[exponents, "p/q"]` pairs.
    pub fn from_json(value: &Value, base: Base) -> Result<Self> {
        match value {
            Value::String(s) => {
                let v = parse_scalar::<S>(s)
                    .ok_or_else(|| Error::Parse(format!("bad rational string {s:?}")))?;
                Ok(Self::constant(base, v))
            }
            Value::Number(n) => {
                let v = parse_scalar::<S>(&n.to_string())
                    .ok_or_else(|| Error::Parse(format!("bad number {n}")))?;
                Ok(Self::constant(base, v))
            }
            Value::Array(items) => {
                let Base::Chart(dim) = base else {
                    return Err(Error::Parse(
                        "polynomial coefficient given for a point base".into(),
                    ));
                };
                let mut out = Self::zero(base);
                for item in items {
                    let pair = item
                        .as_array()
                        .filter(|p| p.len() == 2)
                        .ok_or_else(|| Error::Parse(format!("bad polynomial term {item}")))?;
                    let exps: XMonomial = pair[0]
                        .as_array()
                        .ok_or_else(|| Error::Parse(format!("bad exponent list {}", pair[0])))?
                        .iter()
                        .map(|k| k.as_u64().map(|k| k as u16))
                        .collect::<Option<_>>()
                        .ok_or_else(|| Error::Parse(format!("bad exponent list {}", pair[0])))?;
                    if exps.len() != dim {
                        return Err(Error::Parse(format!(
                            "exponent list {} has width {} but chart dimension is {dim}",
                            pair[0],
                            exps.len()
                        )));
                    }
                    let c = Self::from_json(&pair[1], Base::Point)?;
                    let Coeff::Point(c) = c else { unreachable!() };
                    out.add_assign_ref(&Self::monomial(dim, exps, c));
                }
                Ok(out)
            }
            other => Err(Error::Parse(format!("bad coefficient {other}"))),
        }
    }
}

fn merge_term<S: Scalar>(map: &mut BTreeMap<XMonomial, S>, e: &XMonomial, v: S) {
    if is_zero(&v) {
        return;
    }
    match map.get_mut(e) {
        Some(slot) => {
            let sum = slot.clone() + v;
            if is_zero(&sum) {
                map.remove(e);
            } else {
                *slot = sum;
            }
        }
        None => {
            map.insert(e.clone(), v);
        }
    }
}

impl<S: Scalar> fmt::Display for Coeff<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeff::Point(s) => write!(f, "{s}"),
            Coeff::Chart { terms, .. } => {
                if terms.is_empty() {
                    return write!(f, "0");
                }
                let mut first = true;
                for (e, v) in terms {
                    if !first {
                        write!(f, " + ")?;
                    }
                    first = false;
                    write!(f, "{v}")?;
                    for (i, &k) in e.iter().enumerate() {
                        match k {
                            0 => {}
                            1 => write!(f, "*x{}", i + 1)?,
                            k => write!(f, "*x{}^{k}", i + 1)?,
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

impl<S: Scalar> Add for &Coeff<S> {
    type Output = Coeff<S>;
    fn add(self, rhs: Self) -> Coeff<S> {
        self.try_add(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<S: Scalar> Sub for &Coeff<S> {
    type Output = Coeff<S>;
    fn sub(self, rhs: Self) -> Coeff<S> {
        self.try_sub(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<S: Scalar> Mul for &Coeff<S> {
    type Output = Coeff<S>;
    fn mul(self, rhs: Self) -> Coeff<S> {
        self.try_mul(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<S: Scalar> Neg for &Coeff<S> {
    type Output = Coeff<S>;
    fn neg(self) -> Coeff<S> {
        self.scale(&-S::one())
    }
}

impl<S: Scalar> AddAssign<&Coeff<S>> for Coeff<S> {
    fn add_assign(&mut self, rhs: &Coeff<S>) {
        self.add_assign_ref(rhs);
    }
}

impl<S: Scalar> SubAssign<&Coeff<S>> for Coeff<S> {
    fn sub_assign(&mut self, rhs: &Coeff<S>) {
        self.sub_assign_ref(rhs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Coefficient;
    use proptest::prelude::*;
    use smallvec::smallvec;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn x(dim: usize, axis: usize) -> Coefficient {
        Coefficient::coordinate(dim, axis)
    }

    #[test]
    fn point_arithmetic() {
        let a = Coefficient::Point(q(1, 2));
        let b = Coefficient::Point(q(1, 3));
        assert_eq!(&a + &b, Coefficient::Point(q(5, 6)));
        assert_eq!(
            &Coefficient::Point(q(1, 2)) * &Coefficient::Point(q(2, 3)),
            Coefficient::Point(q(1, 3))
        );
    }

    #[test]
    fn chart_cancellation_and_merge() {
        let two_x = x(1, 0).scale(&q(2, 1));
        let sum = &two_x + &two_x.scale(&q(-1, 1));
        assert!(sum.is_zero());
        assert_eq!(sum, Coefficient::zero(Base::Chart(1)));

        let x2 = &x(1, 0) * &x(1, 0);
        let three = Coefficient::from_int(Base::Chart(1), 3);
        let got = &x2 + &(&three + &x2);
        let mut want = Coefficient::from_int(Base::Chart(1), 3);
        want += &x2.scale(&q(2, 1));
        assert_eq!(got, want);
        assert_eq!(&x(1, 0) * &x(1, 0), Coefficient::monomial(1, smallvec![2], q(1, 1)));
    }

    #[test]
    fn annihilator() {
        let zero = Coefficient::zero(Base::Chart(1));
        let p = &x(1, 0) + &Coefficient::one(Base::Chart(1));
        assert!((&zero * &p).is_zero());
    }

    #[test]
    fn partials() {
        let x3 = &(&x(1, 0) * &x(1, 0)) * &x(1, 0);
        assert_eq!(
            x3.partial(0).unwrap(),
            Coefficient::monomial(1, smallvec![2], q(3, 1))
        );
        assert!(Coefficient::from_int(Base::Chart(1), 5).partial(0).unwrap().is_zero());
        let xy = &x(2, 0) * &x(2, 1);
        assert_eq!(xy.partial(1).unwrap(), x(2, 0));
    }

    #[test]
    fn errors() {
        let p = Coefficient::Point(q(1, 1));
        let c = Coefficient::one(Base::Chart(1));
        assert!(matches!(p.try_add(&c), Err(Error::BaseMismatch(..))));
        assert!(matches!(p.try_mul(&c), Err(Error::BaseMismatch(..))));
        assert!(matches!(p.partial(0), Err(Error::Structural(_))));
        assert!(matches!(c.partial(3), Err(Error::Structural(_))));
    }

    #[test]
    fn json_round_trip() {
        let c = &(&x(2, 0) * &x(2, 1)).scale(&q(3, 2)) + &Coefficient::from_int(Base::Chart(2), -1);
        let v = c.to_json();
        assert_eq!(Coefficient::from_json(&v, Base::Chart(2)).unwrap(), c);
        assert_eq!(Coefficient::Point(q(-7, 3)).to_json(), Value::String("-7/3".into()));
        assert_eq!(Coefficient::Point(q(4, 1)).to_json(), Value::String("4".into()));
    }

    fn arb_poly() -> impl Strategy<Value = Coefficient> {
        prop::collection::vec(((0u16..3, 0u16..3), -4i64..5, 1i64..4), 0..5).prop_map(|ts| {
            let mut c = Coefficient::zero(Base::Chart(2));
            for ((a, b), n, d) in ts {
                c += &Coefficient::monomial(2, smallvec![a, b], q(n, d));
            }
            c
        })
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_poly(), b in arb_poly(), c in arb_poly()) {
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert!((&a - &a).is_zero());
        }

        #[test]
        fn leibniz(a in arb_poly(), b in arb_poly(), axis in 0usize..2) {
            let lhs = (&a * &b).partial(axis).unwrap();
            let rhs = &(&a.partial(axis).unwrap() * &b) + &(&a * &b.partial(axis).unwrap());
            prop_assert_eq!(lhs, rhs);
        }
    }
}
