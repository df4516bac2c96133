//! Koszul contraction data and the Fedosov iteration.

use smallvec::SmallVec;

use crate::coeff::{Base, Coeff};
use crate::error::{Error, Result};
use crate::function::{sym_basis_upto, sym_degree, ExteriorIndex, FormalFunction, Shape};
use crate::lie_pair::{Connection, FrameChange, LiePair, SplittingOffset};
use crate::scalar::Scalar;
use crate::vector_field::VerticalField;

/// `k = Σ ξ^i ∂/∂η^i`.
pub fn koszul<S: Scalar>(f: &FormalFunction<S>) -> FormalFunction<S> {
    let shape = f.shape();
    let mut out = FormalFunction::zero(shape);
    for ((e, j), c) in f.terms() {
        for i in 0..shape.rank_b {
            if j[i] == 0 {
                continue;
            }
            let Some((e2, neg)) = ExteriorIndex::single(i).wedge(*e) else {
                continue;
            };
            let mut j2 = j.clone();
            j2[i] -= 1;
            out.add_signed(e2, j2, c.scale(&S::from_int(j[i] as i64)), neg);
        }
    }
    out
}

/// `ĥ = Σ η^i ∂/∂ξ^i` over the B-type exterior generators.
pub fn hat_koszul<S: Scalar>(f: &FormalFunction<S>) -> FormalFunction<S> {
    let shape = f.shape();
    let mut out = FormalFunction::zero(shape);
    for ((e, j), c) in f.terms() {
        for i in 0..shape.rank_b {
            let Some((e2, neg)) = e.remove(i) else { continue };
            let mut j2 = j.clone();
            j2[i] += 1;
            out.add_signed(e2, j2, c.clone(), neg);
        }
    }
    out
}

/// `ε = [k, ĥ]`, which scales `ξ^I η^J` by `|I_B| + |J|`.
pub fn euler<S: Scalar>(f: &FormalFunction<S>) -> FormalFunction<S> {
    let r = f.shape().rank_b;
    let mut out = FormalFunction::zero(f.shape());
    for ((e, j), c) in f.terms() {
        let w = e.b_degree(r) + sym_degree(j);
        out.add_term(*e, j.clone(), c.scale(&S::from_int(w as i64)));
    }
    out
}

/// `h = ĥ/(p₂+q)` on monomials with `p₂+q > 0`, zero otherwise.
pub fn homotopy_h<S: Scalar>(f: &FormalFunction<S>) -> FormalFunction<S> {
    let shape = f.shape();
    let r = shape.rank_b;
    let mut out = FormalFunction::zero(shape);
    for ((e, j), c) in f.terms() {
        let w = e.b_degree(r) + sym_degree(j);
        if w == 0 {
            continue;
        }
        let c = c.scale(&S::ratio(1, w as i64));
        for i in 0..r {
            let Some((e2, neg)) = e.remove(i) else { continue };
            let mut j2 = j.clone();
            j2[i] += 1;
            out.add_signed(e2, j2, c.clone(), neg);
        }
    }
    out
}

/// Projection onto `Γ(Λ•A^∨ ⊗ S⁰B^∨)`.
pub fn sigma0<S: Scalar>(f: &FormalFunction<S>) -> FormalFunction<S> {
    let r = f.shape().rank_b;
    f.filter(|e, j| e.b_degree(r) == 0 && sym_degree(j) == 0)
}

/// The contraction `(k, h, σ₀)` attached to a splitting. The reference
/// splitting uses the formulas above directly; a second splitting conjugates
/// them through the coframe change.
#[derive(Clone, Debug)]
pub struct Contraction<S: Scalar> {
    change: Option<(FrameChange<S>, FrameChange<S>)>,
}

impl<S: Scalar> Contraction<S> {
    pub fn reference() -> Self {
        Contraction { change: None }
    }

    pub fn for_offset(offset: &SplittingOffset<S>, shape: Shape) -> Self {
        if offset.is_zero() {
            return Self::reference();
        }
        Contraction {
            change: Some((
                FrameChange::new(offset, shape),
                FrameChange::new(&offset.negated(), shape),
            )),
        }
    }

    pub fn h(&self, f: &FormalFunction<S>) -> FormalFunction<S> {
        match &self.change {
            None => homotopy_h(f),
            Some((to_ref, from_ref)) => to_ref.apply(&homotopy_h(&from_ref.apply(f))),
        }
    }

    pub fn sigma0(&self, f: &FormalFunction<S>) -> FormalFunction<S> {
        match &self.change {
            None => sigma0(f),
            Some((to_ref, from_ref)) => to_ref.apply(&sigma0(&from_ref.apply(f))),
        }
    }

    /// `h_♮ = h ⊗ id_B` on vertical fields.
    pub fn h_natural(&self, x: &VerticalField<S>) -> VerticalField<S> {
        x.map(|c| self.h(c))
    }

    pub fn sigma0_natural(&self, x: &VerticalField<S>) -> VerticalField<S> {
        x.map(|c| self.sigma0(c))
    }
}

/// `δ = [k, −]` on vertical fields, which is `k ⊗ id_B`.
pub fn delta_field<S: Scalar>(x: &VerticalField<S>) -> VerticalField<S> {
    x.map(koszul)
}

/// The Koszul field itself as a vertical field (components `ξ^i`).
pub fn koszul_field<S: Scalar>(shape: Shape) -> VerticalField<S> {
    let comps = (0..shape.rank_b).map(|i| FormalFunction::xi(shape, i)).collect();
    VerticalField::from_components(comps).expect("rank_b ≥ 1")
}

/// `d^∇ = d_L + V_Γ` acting on functions, with the CE table cached.
#[derive(Clone, Debug)]
pub struct CovariantDifferential<S: Scalar> {
    pair: LiePair<S>,
    table: Vec<FormalFunction<S>>,
    v: VerticalField<S>,
}

impl<S: Scalar> CovariantDifferential<S> {
    pub fn new(pair: &LiePair<S>, conn: &Connection<S>, shape: Shape) -> Self {
        CovariantDifferential {
            pair: pair.clone(),
            table: pair.d_xi_table(shape),
            v: conn.connection_field(shape),
        }
    }

    pub fn d0(&self, f: &FormalFunction<S>) -> FormalFunction<S> {
        self.pair.ce_differential_with(&self.table, f)
    }

    pub fn connection_field(&self) -> &VerticalField<S> {
        &self.v
    }

    pub fn apply(&self, f: &FormalFunction<S>) -> FormalFunction<S> {
        &self.d0(f) + &self.v.apply(f)
    }

    /// `[d^∇, X]` for a vertical field `X`.
    pub fn bracket(&self, x: &VerticalField<S>) -> VerticalField<S> {
        &x.map(|c| self.d0(c)) + &self.v.bracket(x)
    }

    /// `(d^∇)²` as a vertical field: `d_L(f_k) + V(f_k)` on the components of `V_Γ`.
    pub fn square(&self) -> VerticalField<S> {
        self.v.map(|c| self.apply(c))
    }
}

/// `X^∇ = Σ_{k=2}^N X_k` from `X₂ = h_♮(R)` and
/// `X_{k+1} = h_♮([d^∇, X_k] + ½ Σ_{p+q=k+1} [X_p, X_q])`. Returns the pieces
/// `X_2, …, X_N`.
pub fn fedosov_pieces<S: Scalar>(
    pair: &LiePair<S>,
    conn: &Connection<S>,
    order: usize,
    contraction: &Contraction<S>,
) -> Result<Vec<VerticalField<S>>> {
    conn.require_torsion_free(pair)?;
    let shape = pair.shape(order);
    let d = CovariantDifferential::new(pair, conn, shape);
    fedosov_pieces_with(&d, shape, contraction)
}

fn fedosov_pieces_with<S: Scalar>(
    d: &CovariantDifferential<S>,
    shape: Shape,
    contraction: &Contraction<S>,
) -> Result<Vec<VerticalField<S>>> {
    let order = shape.order;
    let mut pieces: Vec<VerticalField<S>> = Vec::new();
    if order < 2 {
        return Ok(pieces);
    }
    let curvature = d.square();
    pieces.push(contraction.h_natural(&curvature).sym_part(2));
    let half = S::ratio(1, 2);
    for k in 2..order {
        let xk = &pieces[k - 2];
        let mut rhs = d.bracket(xk);
        for p in 2..=k - 1 {
            let q = k + 1 - p;
            if q < 2 {
                continue;
            }
            let term = pieces[p - 2].bracket(&pieces[q - 2]).scale(&half);
            rhs = &rhs + &term;
        }
        pieces.push(contraction.h_natural(&rhs.sym_part(k)));
    }
    Ok(pieces)
}

pub fn fedosov_x<S: Scalar>(
    pair: &LiePair<S>,
    conn: &Connection<S>,
    order: usize,
    contraction: &Contraction<S>,
) -> Result<VerticalField<S>> {
    let pieces = fedosov_pieces(pair, conn, order, contraction)?;
    Ok(sum_fields(pair.shape(order), &pieces))
}

pub(crate) fn sum_fields<S: Scalar>(shape: Shape, pieces: &[VerticalField<S>]) -> VerticalField<S> {
    pieces
        .iter()
        .fold(VerticalField::zero(shape), |acc, x| &acc + x)
}

/// `Q = −k + d^∇ + X^∇`.
#[derive(Clone, Debug)]
pub struct FedosovField<S: Scalar> {
    shape: Shape,
    d: CovariantDifferential<S>,
    pieces: Vec<VerticalField<S>>,
    x: VerticalField<S>,
}

impl<S: Scalar> FedosovField<S> {
    /// Runs the iteration with the given contraction. Rejects connections
    /// with torsion.
    pub fn new(
        pair: &LiePair<S>,
        conn: &Connection<S>,
        order: usize,
        contraction: &Contraction<S>,
    ) -> Result<Self> {
        conn.require_torsion_free(pair)?;
        let shape = pair.shape(order);
        let d = CovariantDifferential::new(pair, conn, shape);
        let pieces = fedosov_pieces_with(&d, shape, contraction)?;
        let x = sum_fields(shape, &pieces);
        Ok(FedosovField {
            shape,
            d,
            pieces,
            x,
        })
    }

    /// Assembles `Q` from a given `X` (no gauge condition imposed).
    pub fn assemble(pair: &LiePair<S>, conn: &Connection<S>, x: VerticalField<S>) -> Result<Self> {
        conn.require_torsion_free(pair)?;
        let shape = x.shape();
        let d = CovariantDifferential::new(pair, conn, shape);
        Ok(FedosovField {
            shape,
            d,
            pieces: Vec::new(),
            x,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn x(&self) -> &VerticalField<S> {
        &self.x
    }

    /// `X_2, …, X_N` (empty when assembled from a given `X`).
    pub fn pieces(&self) -> &[VerticalField<S>] {
        &self.pieces
    }

    pub fn covariant(&self) -> &CovariantDifferential<S> {
        &self.d
    }

    /// `V_Γ + X`, the vertical part of `Q + k`.
    pub fn vertical_part(&self) -> VerticalField<S> {
        self.d.connection_field() + &self.x
    }

    pub fn apply(&self, f: &FormalFunction<S>) -> FormalFunction<S> {
        let mut out = -&koszul(f);
        out.add_assign(&self.apply_without_koszul(f));
        out
    }

    /// `(Q + k)(f) = d^∇ f + X f`.
    pub fn apply_without_koszul(&self, f: &FormalFunction<S>) -> FormalFunction<S> {
        let mut out = self.d.d0(f);
        out.add_assign(&self.d.connection_field().apply(f));
        out.add_assign(&self.x.apply(f));
        out
    }

    /// Checks `Q(Q(f)) = 0` through fiber degree `N − 1` on every basis
    /// monomial of fiber degree at most `N − 1` (over a chart, also times each
    /// coordinate). Returns the first failing monomial and residual.
    pub fn verify_q_squared(&self) -> QSquaredReport<S> {
        let mut report = QSquaredReport {
            checked: 0,
            failure: None,
        };
        let top = self.shape.order.saturating_sub(1);
        for f in basis_functions(self.shape, top) {
            let qq = self.apply(&self.apply(&f)).truncate(top);
            report.checked += 1;
            if !qq.is_zero() {
                report.failure = Some((f, qq));
                return report;
            }
        }
        report
    }
}

/// Outcome of [`FedosovField::verify_q_squared`].
#[derive(Clone, Debug)]
pub struct QSquaredReport<S: Scalar> {
    pub checked: usize,
    pub failure: Option<(FormalFunction<S>, FormalFunction<S>)>,
}

impl<S: Scalar> QSquaredReport<S> {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Basis monomials `ξ^I η^J`, `|J| ≤ max_degree`; over a chart each appears
/// with coefficient `1` and with each coordinate `x^μ`.
pub fn basis_functions<S: Scalar>(shape: Shape, max_degree: usize) -> Vec<FormalFunction<S>> {
    let coeffs: Vec<Coeff<S>> = match shape.base {
        Base::Point => vec![Coeff::one(shape.base)],
        Base::Chart(n) => std::iter::once(Coeff::one(shape.base))
            .chain((0..n).map(|mu| Coeff::coordinate(n, mu)))
            .collect(),
    };
    let mut out = Vec::new();
    for e in shape.exterior_basis() {
        for j in sym_basis_upto(shape.rank_b, max_degree) {
            for c in &coeffs {
                out.push(FormalFunction::monomial(shape, e, j.clone(), c.clone()));
            }
        }
    }
    out
}

/// Exterior-and-fiber basis monomials without coefficient variation.
pub fn basis_monomials<S: Scalar>(shape: Shape, max_degree: usize) -> Vec<FormalFunction<S>> {
    let mut out = Vec::new();
    for e in shape.exterior_basis() {
        for j in sym_basis_upto(shape.rank_b, max_degree) {
            out.push(FormalFunction::monomial(shape, e, j, Coeff::one(shape.base)));
        }
    }
    out
}

/// Checks `kh + hk = id − σ₀` on every basis monomial of fiber degree at
/// most the shape's order; returns the first failure.
pub fn verify_homotopy<S: Scalar>(
    shape: Shape,
    contraction: &Contraction<S>,
) -> Option<(FormalFunction<S>, FormalFunction<S>)> {
    for f in basis_monomials::<S>(shape, shape.order) {
        let lhs = &koszul(&contraction.h(&f)) + &contraction.h(&koszul(&f));
        let rhs = &f - &contraction.sigma0(&f);
        if lhs != rhs {
            return Some((f, &lhs - &rhs));
        }
    }
    None
}

/// `η^J` as a function.
pub fn eta_power<S: Scalar>(shape: Shape, j: &[u8]) -> FormalFunction<S> {
    FormalFunction::monomial(
        shape,
        ExteriorIndex::EMPTY,
        SmallVec::from_slice(j),
        Coeff::one(shape.base),
    )
}

/// Rejects truncation orders below `min`.
pub fn require_order(order: usize, min: usize, what: &str) -> Result<()> {
    if order < min {
        return Err(Error::Precondition(format!(
            "{what} needs truncation order at least {min}, got {order}"
        )));
    }
    Ok(())
}
