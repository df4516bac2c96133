//! Vertical vector fields and B-valued forms, `Γ(Λ•L^∨ ⊗ ŜB^∨ ⊗ B)`.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::function::{sym_degree, FormalFunction, Shape};
use crate::scalar::Scalar;

/// `Σ_k f_k ⊗ b_k`, read as the derivation `Σ_k f_k ∂/∂η^k` when used as a
/// vector field.
#[derive(Clone, PartialEq)]
pub struct VerticalField<S: Scalar> {
    shape: Shape,
    comps: Vec<FormalFunction<S>>,
}

impl<S: Scalar> VerticalField<S> {
    pub fn zero(shape: Shape) -> Self {
        VerticalField {
            shape,
            comps: vec![FormalFunction::zero(shape); shape.rank_b],
        }
    }

    pub fn from_components(comps: Vec<FormalFunction<S>>) -> Result<Self> {
        let shape = comps
            .first()
            .map(|c| c.shape())
            .ok_or_else(|| Error::ShapeMismatch("vector field needs rank_b ≥ 1".into()))?;
        if comps.len() != shape.rank_b || comps.iter().any(|c| c.shape() != shape) {
            return Err(Error::ShapeMismatch(
                "component count or shapes disagree".into(),
            ));
        }
        Ok(VerticalField { shape, comps })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn components(&self) -> &[FormalFunction<S>] {
        &self.comps
    }

    pub fn component(&self, k: usize) -> &FormalFunction<S> {
        &self.comps[k]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut FormalFunction<S> {
        &mut self.comps[k]
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.is_zero())
    }

    /// Applies `φ` to every component.
    pub fn map(&self, f: impl FnMut(&FormalFunction<S>) -> FormalFunction<S>) -> Self {
        VerticalField {
            shape: self.shape,
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        self.map(|c| c.scale(s))
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.shape.check(&other.shape)?;
        Ok(VerticalField {
            shape: self.shape,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.shape.check(&other.shape)?;
        Ok(VerticalField {
            shape: self.shape,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Minimal fiber degree of the coefficients (`None` for zero).
    pub fn filtration_order(&self) -> Option<usize> {
        self.comps.iter().filter_map(|c| c.filtration_order()).min()
    }

    pub fn form_degrees(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.comps.iter().flat_map(|c| c.form_degrees()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Keeps the coefficients of fiber degree exactly `k`.
    pub fn sym_part(&self, k: usize) -> Self {
        self.map(|c| c.filter(|_, j| sym_degree(j) == k))
    }

    pub fn truncate(&self, order: usize) -> Self {
        self.map(|c| c.truncate(order))
    }

    fn parity_part(&self, odd: bool) -> Self {
        self.map(|c| c.filter(|e, _| (e.degree() % 2 == 1) == odd))
    }

    /// `X(g) = Σ_k f_k ∧ ∂g/∂η^k`, truncated at the shape's order.
    pub fn apply(&self, g: &FormalFunction<S>) -> FormalFunction<S> {
        let mut out = FormalFunction::zero(self.shape);
        for (k, f) in self.comps.iter().enumerate() {
            if f.is_zero() {
                continue;
            }
            let dg = g.contract(k);
            if dg.is_zero() {
                continue;
            }
            out.add_assign(&f.mul_truncated(&dg, self.shape.order));
        }
        out
    }

    /// Graded commutator `[V, W]_k = V(g_k) − (−1)^{|V||W|} W(f_k)`.
    pub fn bracket(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.shape);
        for v_odd in [false, true] {
            let v = self.parity_part(v_odd);
            if v.is_zero() {
                continue;
            }
            for w_odd in [false, true] {
                let w = other.parity_part(w_odd);
                if w.is_zero() {
                    continue;
                }
                let both_odd = v_odd && w_odd;
                for k in 0..self.shape.rank_b {
                    let a = v.apply(&w.comps[k]);
                    let b = w.apply(&v.comps[k]);
                    out.comps[k].add_assign(&a);
                    if both_odd {
                        out.comps[k].add_assign(&b);
                    } else {
                        out.comps[k].add_assign(&-&b);
                    }
                }
            }
        }
        out
    }

    /// Records `{xi, eta, b, coeff}` with 1-based frame indices.
    pub fn to_json(&self) -> Value {
        let mut out = Vec::new();
        for (k, c) in self.comps.iter().enumerate() {
            for ((e, j), v) in c.terms() {
                out.push(json!({
                    "xi": e.indices().map(|u| u + 1).collect::<Vec<_>>(),
                    "eta": j.to_vec(),
                    "b": k + 1,
                    "coeff": v.to_json(),
                }));
            }
        }
        Value::Array(out)
    }
}

impl<S: Scalar> fmt::Debug for VerticalField<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.comps.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "[{c}]∂η{}", k + 1)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl<S: Scalar> Add for &VerticalField<S> {
    type Output = VerticalField<S>;
    fn add(self, rhs: Self) -> VerticalField<S> {
        self.try_add(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<S: Scalar> Sub for &VerticalField<S> {
    type Output = VerticalField<S>;
    fn sub(self, rhs: Self) -> VerticalField<S> {
        self.try_sub(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}

impl<S: Scalar> Neg for &VerticalField<S> {
    type Output = VerticalField<S>;
    fn neg(self) -> VerticalField<S> {
        self.map(|c| -c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::Base;
    use crate::{FormalFunction as F, Rational, VerticalVectorField as V};

    #[test]
    fn bracket_of_even_fields_is_antisymmetric_and_jacobi() {
        let s = Shape::new(2, 0, Base::Point, 5);
        let e1 = F::eta(s, 0);
        let e2 = F::eta(s, 1);
        let x = V::from_components(vec![&e1 * &e2, F::zero(s)]).unwrap();
        let y = V::from_components(vec![F::zero(s), &e1 * &e1]).unwrap();
        let z = V::from_components(vec![e2.clone(), e1.scale(&Rational::from_int(3))]).unwrap();
        assert_eq!(x.bracket(&y), -&y.bracket(&x));
        let jac = &(&x.bracket(&y.bracket(&z)) + &y.bracket(&z.bracket(&x))) + &z.bracket(&x.bracket(&y));
        assert!(jac.truncate(3).is_zero());
    }

    #[test]
    fn bracket_acts_as_commutator() {
        let s = Shape::new(1, 1, Base::Point, 6);
        let e = F::eta(s, 0);
        let x = V::from_components(vec![&F::xi(s, 1) * &(&e * &e)]).unwrap();
        let y = V::from_components(vec![&F::xi(s, 0) * &e]).unwrap();
        let g = &e * &(&e * &e);
        let lhs = x.bracket(&y).apply(&g);
        let rhs = &x.apply(&y.apply(&g)) + &y.apply(&x.apply(&g));
        assert_eq!(lhs, rhs);
    }
}
