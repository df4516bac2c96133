//! Lie pairs `(L, A)` presented in a frame adapted to a splitting, their
//! connections on `B = L/A`, and the Chevalley–Eilenberg calculus.

use std::fmt;

use crate::coeff::{Base, Coeff};
use crate::error::{Error, Result};
use crate::function::{sym_unit, ExteriorIndex, FormalFunction, Shape};
use crate::scalar::Scalar;
use crate::vector_field::VerticalField;

/// A Lie algebroid `L` with subalgebroid `A`, given by structure functions
/// `[e_u, e_v] = c_{uv}^w e_w` and anchor `ρ(e_u) = ρ_u^μ ∂_μ` in the frame
/// `(b̃_1, …, b̃_r, a_1, …, a_{r′})`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiePair<S: Scalar> {
    base: Base,
    rank_b: usize,
    rank_a: usize,
    bracket: Vec<Coeff<S>>,
    anchor: Vec<Coeff<S>>,
}

/// A failed identity in [`LiePair::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub identity: &'static str,
    pub frame: Vec<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_based: Vec<usize> = self.frame.iter().map(|u| u + 1).collect();
        write!(f, "{} fails at frame {:?}: {}", self.identity, one_based, self.detail)
    }
}

impl<S: Scalar> LiePair<S> {
    /// The abelian pair with zero brackets (and, over a chart, zero anchor).
    pub fn new(base: Base, rank_b: usize, rank_a: usize) -> Self {
        let n = rank_b + rank_a;
        LiePair {
            base,
            rank_b,
            rank_a,
            bracket: vec![Coeff::zero(base); n * n * n],
            anchor: vec![Coeff::zero(base); n * base.dim()],
        }
    }

    /// The tangent algebroid of an `n`-dimensional chart with `A = 0`.
    pub fn tangent(dim: usize) -> Self {
        let mut p = Self::new(Base::Chart(dim), dim, 0);
        for u in 0..dim {
            p.set_anchor(u, u, Coeff::one(p.base));
        }
        p
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn rank_b(&self) -> usize {
        self.rank_b
    }

    pub fn rank_a(&self) -> usize {
        self.rank_a
    }

    pub fn frame(&self) -> usize {
        self.rank_b + self.rank_a
    }

    pub fn is_b(&self, u: usize) -> bool {
        u < self.rank_b
    }

    pub fn shape(&self, order: usize) -> Shape {
        Shape::new(self.rank_b, self.rank_a, self.base, order)
    }

    pub fn c(&self, u: usize, v: usize, w: usize) -> &Coeff<S> {
        let n = self.frame();
        &self.bracket[(u * n + v) * n + w]
    }

    /// Sets `c_{uv}^w` without touching `c_{vu}^w`.
    pub fn set_c_raw(&mut self, u: usize, v: usize, w: usize, c: Coeff<S>) {
        let n = self.frame();
        self.bracket[(u * n + v) * n + w] = c;
    }

    /// Sets `c_{uv}^w = c` and `c_{vu}^w = −c`.
    pub fn set_bracket(&mut self, u: usize, v: usize, w: usize, c: Coeff<S>) {
        let neg = -&c;
        self.set_c_raw(u, v, w, c);
        self.set_c_raw(v, u, w, neg);
    }

    pub fn rho(&self, u: usize, mu: usize) -> &Coeff<S> {
        &self.anchor[u * self.base.dim() + mu]
    }

    pub fn set_anchor(&mut self, u: usize, mu: usize, c: Coeff<S>) {
        let d = self.base.dim();
        self.anchor[u * d + mu] = c;
    }

    /// `ρ(e_u)(g)`; zero over a point.
    pub fn anchor_apply(&self, u: usize, g: &Coeff<S>) -> Coeff<S> {
        let mut acc = Coeff::zero(self.base);
        for mu in 0..self.base.dim() {
            let r = self.rho(u, mu);
            if r.is_zero() {
                continue;
            }
            acc += &(r * &g.partial(mu).expect("chart base"));
        }
        acc
    }

    /// Checks antisymmetry, Jacobi (with anchor terms), closure of `A`, and
    /// compatibility of the anchor with brackets.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.frame();
        let r = self.rank_b;
        let mut out = Vec::new();
        for u in 0..n {
            for v in 0..n {
                for w in 0..n {
                    let s = self.c(u, v, w) + self.c(v, u, w);
                    if !s.is_zero() {
                        out.push(Violation {
                            identity: "antisymmetry",
                            frame: vec![u, v, w],
                            detail: format!("c_uv^w + c_vu^w = {s}"),
                        });
                    }
                }
            }
        }
        for u in r..n {
            for v in r..n {
                for i in 0..r {
                    if !self.c(u, v, i).is_zero() {
                        out.push(Violation {
                            identity: "A-closure",
                            frame: vec![u, v, i],
                            detail: format!("[a, a′] has B-component {}", self.c(u, v, i)),
                        });
                    }
                }
            }
        }
        for u in 0..n {
            for v in u + 1..n {
                for w in v + 1..n {
                    for k in 0..n {
                        let j = self.jacobiator(u, v, w, k);
                        if !j.is_zero() {
                            out.push(Violation {
                                identity: "Jacobi",
                                frame: vec![u, v, w],
                                detail: format!("component {} of the Jacobiator is {j}", k + 1),
                            });
                        }
                    }
                }
            }
        }
        for u in 0..n {
            for v in u + 1..n {
                for mu in 0..self.base.dim() {
                    let mut lhs = Coeff::zero(self.base);
                    for m in 0..n {
                        lhs += &(self.c(u, v, m) * self.rho(m, mu));
                    }
                    let rhs = &self.anchor_apply(u, self.rho(v, mu))
                        - &self.anchor_apply(v, self.rho(u, mu));
                    if lhs != rhs {
                        out.push(Violation {
                            identity: "anchor compatibility",
                            frame: vec![u, v],
                            detail: format!("ρ([u,v])^{} = {lhs} but [ρu,ρv] gives {rhs}", mu + 1),
                        });
                    }
                }
            }
        }
        out
    }

    /// `k`-component of `Σ_cyc [[e_u, e_v], e_w]`.
    fn jacobiator(&self, u: usize, v: usize, w: usize, k: usize) -> Coeff<S> {
        let n = self.frame();
        let mut acc = Coeff::zero(self.base);
        for (a, b, c) in [(u, v, w), (v, w, u), (w, u, v)] {
            for m in 0..n {
                acc += &(self.c(a, b, m) * self.c(m, c, k));
            }
            acc -= &self.anchor_apply(c, self.c(a, b, k));
        }
        acc
    }

    pub fn validated(self) -> Result<Self> {
        let v = self.validate();
        if let Some(first) = v.first() {
            return Err(Error::InvalidPresentation(first.to_string()));
        }
        Ok(self)
    }

    /// `dξ^w = −Σ_{u<v} c_{uv}^w ξ^u ∧ ξ^v`, extended to every exterior
    /// monomial as an odd derivation. Indexed by bitmask.
    pub fn d_xi_table(&self, shape: Shape) -> Vec<FormalFunction<S>> {
        let n = self.frame();
        let z = shape.zero_sym();
        let mut gens = Vec::with_capacity(n);
        for w in 0..n {
            let mut f = FormalFunction::zero(shape);
            for u in 0..n {
                for v in u + 1..n {
                    let c = self.c(u, v, w);
                    if !c.is_zero() {
                        let (e, _) = ExteriorIndex::from_indices(&[u, v]).unwrap();
                        f.add_term(e, z.clone(), -c);
                    }
                }
            }
            gens.push(f);
        }
        let mut table: Vec<FormalFunction<S>> = vec![FormalFunction::zero(shape); 1 << n];
        for mask in 1u32..(1 << n) {
            let i = mask.trailing_zeros() as usize;
            let rest = ExteriorIndex(mask & (mask - 1));
            let rest_f = FormalFunction::monomial(shape, rest, z.clone(), Coeff::one(shape.base));
            let first = gens[i].mul_truncated(&rest_f, usize::MAX);
            let second = table[rest.0 as usize].left_mul_monomial(
                ExteriorIndex::single(i),
                &z,
                &Coeff::one(shape.base),
            );
            table[mask as usize] = &first - &second;
        }
        table
    }

    /// The Chevalley–Eilenberg differential acting on the `Λ•L^∨` factor,
    /// with the fiber coordinates held constant.
    pub fn ce_differential(&self, f: &FormalFunction<S>) -> FormalFunction<S> {
        let table = self.d_xi_table(f.shape());
        self.ce_differential_with(&table, f)
    }

    pub fn ce_differential_with(
        &self,
        table: &[FormalFunction<S>],
        f: &FormalFunction<S>,
    ) -> FormalFunction<S> {
        let shape = f.shape();
        let mut out = FormalFunction::zero(shape);
        let chart = matches!(self.base, Base::Chart(_));
        for ((e, j), g) in f.terms() {
            if chart {
                for u in 0..self.frame() {
                    let dg = self.anchor_apply(u, g);
                    if dg.is_zero() {
                        continue;
                    }
                    if let Some((e2, neg)) = ExteriorIndex::single(u).wedge(*e) {
                        out.add_signed(e2, j.clone(), dg, neg);
                    }
                }
            }
            for ((e2, _), c) in table[e.0 as usize].terms() {
                out.add_term(*e2, j.clone(), c * g);
            }
        }
        out
    }
}

/// Christoffel data `∇_{e_u} b_i = Γ_{u,i}^j b_j`, `u` over the whole frame of `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct Connection<S: Scalar> {
    frame: usize,
    rank_b: usize,
    gamma: Vec<Coeff<S>>,
}

/// One entry of a torsion or Bott-check failure.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorEntry<S: Scalar> {
    pub u: usize,
    pub v: usize,
    pub k: usize,
    pub value: Coeff<S>,
}

impl<S: Scalar> Connection<S> {
    pub fn zero(pair: &LiePair<S>) -> Self {
        Connection {
            frame: pair.frame(),
            rank_b: pair.rank_b,
            gamma: vec![Coeff::zero(pair.base); pair.frame() * pair.rank_b * pair.rank_b],
        }
    }

    pub fn get(&self, u: usize, i: usize, j: usize) -> &Coeff<S> {
        &self.gamma[(u * self.rank_b + i) * self.rank_b + j]
    }

    pub fn set(&mut self, u: usize, i: usize, j: usize, c: Coeff<S>) {
        let r = self.rank_b;
        self.gamma[(u * r + i) * r + j] = c;
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn rank_b(&self) -> usize {
        self.rank_b
    }

    fn check(&self, pair: &LiePair<S>) -> Result<()> {
        if self.frame != pair.frame() || self.rank_b != pair.rank_b {
            return Err(Error::ShapeMismatch(
                "connection dimensions do not match the Lie pair".into(),
            ));
        }
        Ok(())
    }

    /// `∇_{e_u} b_i` expressed as `Γ_{u,i}^j`.
    pub fn covariant(&self, u: usize, i: usize) -> Vec<Coeff<S>> {
        (0..self.rank_b).map(|j| self.get(u, i, j).clone()).collect()
    }

    /// `T(e_u, e_v)^k = ∇_u p(e_v)^k − ∇_v p(e_u)^k − c_{uv}^k`.
    pub fn torsion_component(&self, pair: &LiePair<S>, u: usize, v: usize, k: usize) -> Coeff<S> {
        let mut t = -pair.c(u, v, k);
        if pair.is_b(v) {
            t += self.get(u, v, k);
        }
        if pair.is_b(u) {
            t -= self.get(v, u, k);
        }
        t
    }

    /// Nonzero entries of the torsion tensor, `u < v`.
    pub fn torsion_entries(&self, pair: &LiePair<S>) -> Vec<TensorEntry<S>> {
        let mut out = Vec::new();
        for u in 0..pair.frame() {
            for v in u + 1..pair.frame() {
                for k in 0..pair.rank_b {
                    let value = self.torsion_component(pair, u, v, k);
                    if !value.is_zero() {
                        out.push(TensorEntry { u, v, k, value });
                    }
                }
            }
        }
        out
    }

    /// The torsion as the B-valued 2-form `Σ_{u<v} T(e_u, e_v)^k ξ^u∧ξ^v ⊗ b_k`.
    pub fn torsion(&self, pair: &LiePair<S>, shape: Shape) -> Result<VerticalField<S>> {
        self.check(pair)?;
        let mut t = VerticalField::zero(shape);
        for e in self.torsion_entries(pair) {
            let (ext, _) = ExteriorIndex::from_indices(&[e.u, e.v]).unwrap();
            t.component_mut(e.k).add_term(ext, shape.zero_sym(), e.value);
        }
        Ok(t)
    }

    pub fn is_torsion_free(&self, pair: &LiePair<S>) -> bool {
        self.torsion_entries(pair).is_empty()
    }

    /// Rejects connections with torsion, attaching the tensor.
    pub fn require_torsion_free(&self, pair: &LiePair<S>) -> Result<()> {
        self.check(pair)?;
        let t = self.torsion_entries(pair);
        if t.is_empty() {
            return Ok(());
        }
        let listing: Vec<String> = t
            .iter()
            .map(|e| format!("T(e{}, e{})^{} = {}", e.u + 1, e.v + 1, e.k + 1, e.value))
            .collect();
        Err(Error::Torsion(listing.join(", ")))
    }

    /// Entries where `∇_a p(l) ≠ p([a, l])` for `a` in `A`.
    pub fn bott_check(&self, pair: &LiePair<S>) -> Vec<TensorEntry<S>> {
        let mut out = Vec::new();
        for a in pair.rank_b..pair.frame() {
            for l in 0..pair.frame() {
                for k in 0..pair.rank_b {
                    let lhs = if pair.is_b(l) {
                        self.get(a, l, k).clone()
                    } else {
                        Coeff::zero(pair.base)
                    };
                    let value = &lhs - pair.c(a, l, k);
                    if !value.is_zero() {
                        out.push(TensorEntry { u: a, v: l, k, value });
                        return out;
                    }
                }
            }
        }
        out
    }

    /// `R(e_u, e_v) b_i = Σ_k R[u][v][i][k] b_k`, computed from
    /// `∇_u∇_v − ∇_v∇_u − ∇_{[u,v]}`.
    pub fn curvature(&self, pair: &LiePair<S>) -> Curvature<S> {
        let n = pair.frame();
        let r = pair.rank_b;
        let mut data = vec![Coeff::zero(pair.base); n * n * r * r];
        for u in 0..n {
            for v in 0..n {
                for i in 0..r {
                    for k in 0..r {
                        let mut acc = &pair.anchor_apply(u, self.get(v, i, k))
                            - &pair.anchor_apply(v, self.get(u, i, k));
                        for j in 0..r {
                            acc += &(self.get(v, i, j) * self.get(u, j, k));
                            acc -= &(self.get(u, i, j) * self.get(v, j, k));
                        }
                        for w in 0..n {
                            acc -= &(pair.c(u, v, w) * self.get(w, i, k));
                        }
                        data[((u * n + v) * r + i) * r + k] = acc;
                    }
                }
            }
        }
        Curvature {
            frame: n,
            rank_b: r,
            data,
        }
    }

    /// The vertical field `V_Γ` with `d^∇ = d_L + V_Γ` on `Γ(Λ•L^∨ ⊗ ŜB^∨)`:
    /// `∇_u η^i = −Γ_{u,j}^i η^j` extended as a derivation.
    pub fn connection_field(&self, shape: Shape) -> VerticalField<S> {
        let mut v = VerticalField::zero(shape);
        for i in 0..self.rank_b {
            let comp = v.component_mut(i);
            for u in 0..self.frame {
                for j in 0..self.rank_b {
                    let g = self.get(u, j, i);
                    if !g.is_zero() {
                        comp.add_term(ExteriorIndex::single(u), sym_unit(shape.rank_b, j), -g);
                    }
                }
            }
        }
        v
    }

    /// Covariant derivative of a B-valued form, fiber coordinates held
    /// constant: `d^∇(ω ⊗ b_i) = d_L ω ⊗ b_i + Σ_u ξ^u ∧ ω ⊗ ∇_u b_i`.
    pub fn covariant_derivative(
        &self,
        pair: &LiePair<S>,
        omega: &VerticalField<S>,
    ) -> Result<VerticalField<S>> {
        self.check(pair)?;
        let shape = omega.shape();
        let table = pair.d_xi_table(shape);
        let one = Coeff::one(shape.base);
        let z = shape.zero_sym();
        let mut out = omega.map(|w| pair.ce_differential_with(&table, w));
        for i in 0..self.rank_b {
            for u in 0..self.frame {
                let lifted = omega.component(i).left_mul_monomial(ExteriorIndex::single(u), &z, &one);
                if lifted.is_zero() {
                    continue;
                }
                for j in 0..self.rank_b {
                    let g = self.get(u, i, j);
                    if !g.is_zero() {
                        out.component_mut(j).add_assign(&lifted.mul_coeff(g));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Torsion-free connection with the same symmetric part on `B × B`,
    /// Bott values on `A × B`. Test-data helper; validate the output.
    pub fn symmetrized(&self, pair: &LiePair<S>) -> Self {
        let r = pair.rank_b;
        let half = S::ratio(1, 2);
        let mut out = self.clone();
        for a in r..pair.frame() {
            for i in 0..r {
                for k in 0..r {
                    out.set(a, i, k, pair.c(a, i, k).clone());
                }
            }
        }
        for i in 0..r {
            for j in 0..r {
                for k in 0..r {
                    let sym = (self.get(i, j, k) + self.get(j, i, k)).scale(&half);
                    let c = pair.c(i, j, k).scale(&half);
                    out.set(i, j, k, &sym + &c);
                }
            }
        }
        out
    }
}

/// Curvature tensor of a connection.
#[derive(Clone, Debug, PartialEq)]
pub struct Curvature<S: Scalar> {
    frame: usize,
    rank_b: usize,
    data: Vec<Coeff<S>>,
}

impl<S: Scalar> Curvature<S> {
    /// Component `k` of `R(e_u, e_v) b_i`.
    pub fn get(&self, u: usize, v: usize, i: usize, k: usize) -> &Coeff<S> {
        let r = self.rank_b;
        &self.data[((u * self.frame + v) * r + i) * r + k]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|c| c.is_zero())
    }

    /// The vertical field of `(d^∇)²` on `Γ(Λ•L^∨ ⊗ ŜB^∨)`:
    /// `Σ_{u<v} ξ^u∧ξ^v (−R(e_u,e_v)_i^k) η^i ∂/∂η^k`.
    pub fn as_vertical_field(&self, shape: Shape) -> VerticalField<S> {
        let mut x = VerticalField::zero(shape);
        for u in 0..self.frame {
            for v in u + 1..self.frame {
                let (e, _) = ExteriorIndex::from_indices(&[u, v]).unwrap();
                for i in 0..self.rank_b {
                    for k in 0..self.rank_b {
                        let c = self.get(u, v, i, k);
                        if !c.is_zero() {
                            x.component_mut(k).add_term(e, sym_unit(shape.rank_b, i), -c);
                        }
                    }
                }
            }
        }
        x
    }

    /// The B⊗B^∨-valued 2-form `Σ_{u<v} ξ^u∧ξ^v R(e_u,e_v)_i^k`, applied to
    /// the frame vector `b_i`.
    pub fn apply_to_frame(&self, shape: Shape, i: usize) -> VerticalField<S> {
        let mut x = VerticalField::zero(shape);
        for u in 0..self.frame {
            for v in u + 1..self.frame {
                let (e, _) = ExteriorIndex::from_indices(&[u, v]).unwrap();
                for k in 0..self.rank_b {
                    let c = self.get(u, v, i, k);
                    if !c.is_zero() {
                        x.component_mut(k).add_term(e, shape.zero_sym(), c.clone());
                    }
                }
            }
        }
        x
    }
}

/// Offsets `s_i^α` of a second splitting, `ι_B^{(2)}(b_i) = b̃_i + s_i^α a_α`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplittingOffset<S: Scalar> {
    rank_b: usize,
    rank_a: usize,
    s: Vec<Coeff<S>>,
}

impl<S: Scalar> SplittingOffset<S> {
    pub fn zero(pair: &LiePair<S>) -> Self {
        SplittingOffset {
            rank_b: pair.rank_b,
            rank_a: pair.rank_a,
            s: vec![Coeff::zero(pair.base); pair.rank_b * pair.rank_a],
        }
    }

    pub fn get(&self, i: usize, alpha: usize) -> &Coeff<S> {
        &self.s[i * self.rank_a + alpha]
    }

    pub fn set(&mut self, i: usize, alpha: usize, c: Coeff<S>) {
        self.s[i * self.rank_a + alpha] = c;
    }

    pub fn is_zero(&self) -> bool {
        self.s.iter().all(|c| c.is_zero())
    }

    pub fn negated(&self) -> Self {
        SplittingOffset {
            s: self.s.iter().map(|c| -c).collect(),
            ..self.clone()
        }
    }

    /// Frame components of `ι_B^{(2)}(b_i)` in the reference frame.
    pub fn lift(&self, base: Base, i: usize) -> Vec<Coeff<S>> {
        let mut v = vec![Coeff::zero(base); self.rank_b + self.rank_a];
        v[i] = Coeff::one(base);
        for a in 0..self.rank_a {
            v[self.rank_b + a] = self.get(i, a).clone();
        }
        v
    }
}

/// The coframe change from a splitting-2 adapted coframe to the reference one,
/// `ξ^i ↦ ξ^i`, `ζ^α ↦ ζ^α − s_i^α ξ^i`, as an algebra automorphism.
#[derive(Clone, Debug)]
pub struct FrameChange<S: Scalar> {
    images: Vec<FormalFunction<S>>,
    identity: bool,
}

impl<S: Scalar> FrameChange<S> {
    pub fn new(offset: &SplittingOffset<S>, shape: Shape) -> Self {
        let r = offset.rank_b;
        let n = r + offset.rank_a;
        let z = shape.zero_sym();
        let gens: Vec<FormalFunction<S>> = (0..n)
            .map(|u| {
                let mut f = FormalFunction::xi(shape, u);
                if u >= r {
                    for i in 0..r {
                        let s = offset.get(i, u - r);
                        if !s.is_zero() {
                            f.add_term(ExteriorIndex::single(i), z.clone(), -s);
                        }
                    }
                }
                f
            })
            .collect();
        let mut images = vec![FormalFunction::one(shape); 1 << n];
        for mask in 1u32..(1 << n) {
            let top = 31 - mask.leading_zeros() as usize;
            let rest = mask & !(1 << top);
            images[mask as usize] = images[rest as usize].mul_truncated(&gens[top], usize::MAX);
        }
        FrameChange {
            images,
            identity: offset.is_zero(),
        }
    }

    pub fn apply(&self, f: &FormalFunction<S>) -> FormalFunction<S> {
        if self.identity {
            return f.clone();
        }
        let mut out = FormalFunction::zero(f.shape());
        for ((e, j), c) in f.terms() {
            for ((e2, _), c2) in self.images[e.0 as usize].terms() {
                out.add_term(*e2, j.clone(), c * c2);
            }
        }
        out
    }
}

/// One-shot `frame_change(s, f)`.
pub fn frame_change<S: Scalar>(
    offset: &SplittingOffset<S>,
    f: &FormalFunction<S>,
) -> FormalFunction<S> {
    FrameChange::new(offset, f.shape()).apply(f)
}
