//! Geodesic exponential maps of polynomial connections on a chart, as exact
//! jets and as a floating-point RK4 cross-check, compared with
//! `pbw₂⁻¹ ∘ pbw₁` and with `e^Y`.
//!
//! A jet is a vector of polynomials in `v = (v^1, …, v^n)`, stored as chart
//! coefficients on an `n`-dimensional chart.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use smallvec::SmallVec;

use crate::coeff::{Base, Coeff, XMonomial};
use crate::enveloping::{transition, Pbw};
use crate::error::{Error, Result};
use crate::fedosov::{Contraction, FedosovField};
use crate::function::{sym_basis_upto, sym_factorial, ExteriorIndex, FormalFunction, SymIndex};
use crate::lie_pair::{Connection, LiePair, SplittingOffset};
use crate::operator::{exp_field, log_of_solution, solve_phi};
use crate::scalar::Scalar;

type Poly<S> = Coeff<S>;

fn truncate<S: Scalar>(p: &Poly<S>, order: usize) -> Poly<S> {
    match p {
        Coeff::Chart { dim, terms } => Coeff::Chart {
            dim: *dim,
            terms: terms
                .iter()
                .filter(|(e, _)| e.iter().map(|&k| k as usize).sum::<usize>() <= order)
                .map(|(e, v)| (e.clone(), v.clone()))
                .collect(),
        },
        other => other.clone(),
    }
}

fn mul_trunc<S: Scalar>(a: &Poly<S>, b: &Poly<S>, order: usize) -> Poly<S> {
    truncate(&(a * b), order)
}

/// Substitutes `args` into the polynomial `g` (over a chart of the same
/// width), keeping total degree `≤ order` in the variables of `args`.
fn substitute<S: Scalar>(g: &Coeff<S>, args: &[Poly<S>], order: usize) -> Poly<S> {
    let dim = args.len();
    let base = Base::Chart(dim);
    let mut out = Poly::zero(base);
    let mut powers: Vec<Vec<Poly<S>>> = args.iter().map(|a| vec![Poly::one(base), a.clone()]).collect();
    for (e, c) in g.terms() {
        let mut t = Poly::constant(base, c.clone());
        for (axis, &k) in e.iter().enumerate() {
            while powers[axis].len() <= k as usize {
                let next = mul_trunc(powers[axis].last().unwrap(), &args[axis], order);
                powers[axis].push(next);
            }
            t = mul_trunc(&t, &powers[axis][k as usize], order);
        }
        out.add_assign_ref(&t);
    }
    out
}

fn homogeneous<S: Scalar>(p: &Poly<S>, degree: usize) -> Poly<S> {
    match p {
        Coeff::Chart { dim, terms } => Coeff::Chart {
            dim: *dim,
            terms: terms
                .iter()
                .filter(|(e, _)| e.iter().map(|&k| k as usize).sum::<usize>() == degree)
                .map(|(e, v)| (e.clone(), v.clone()))
                .collect(),
        },
        other => other.clone(),
    }
}

fn coefficient_at<S: Scalar>(p: &Poly<S>, k: &[u8]) -> S {
    let e: XMonomial = k.iter().map(|&t| t as u16).collect();
    match p {
        Coeff::Chart { terms, .. } => terms.get(&e).cloned().unwrap_or_else(S::zero),
        Coeff::Point(s) => {
            if k.iter().all(|&t| t == 0) {
                s.clone()
            } else {
                S::zero()
            }
        }
    }
}

/// Taylor data of a map `v ↦ F(v)` of `ℚⁿ` around `v = 0`, exact to `order`.
#[derive(Clone, Debug, PartialEq)]
pub struct JetMap<S: Scalar> {
    pub point: Vec<S>,
    pub order: usize,
    /// `F^k(v)` as polynomials in `v`; includes the constant term.
    pub comps: Vec<Poly<S>>,
}

impl<S: Scalar> JetMap<S> {
    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    /// `F(v) − F(0)`.
    pub fn displacement(&self) -> Vec<Poly<S>> {
        self.comps
            .iter()
            .map(|c| {
                let mut d = c.clone();
                d.sub_assign_ref(&homogeneous(c, 0));
                d
            })
            .collect()
    }

    /// Degree-`m` homogeneous part of each component.
    pub fn homogeneous_part(&self, m: usize) -> Vec<Poly<S>> {
        self.comps.iter().map(|c| homogeneous(c, m)).collect()
    }

    /// Coefficient of `v^K` in component `k`.
    pub fn coefficient(&self, k: usize, multi: &[u8]) -> S {
        coefficient_at(&self.comps[k], multi)
    }

    pub fn evaluate_f64(&self, v: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|c| c.evaluate_f64(v)).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "point": self.point.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "order": self.order,
            "components": self.comps.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        })
    }
}

fn require_chart_connection<S: Scalar>(conn: &Connection<S>) -> Result<usize> {
    let n = conn.rank_b();
    if conn.frame() != n {
        return Err(Error::Precondition(
            "geodesics need a connection on T_M (no A part)".into(),
        ));
    }
    for i in 0..n {
        for j in 0..i {
            for k in 0..n {
                if conn.get(i, j, k) != conn.get(j, i, k) {
                    return Err(Error::Torsion(format!(
                        "Γ^{k1}_{{{i1}{j1}}} ≠ Γ^{k1}_{{{j1}{i1}}}",
                        k1 = k + 1,
                        i1 = i + 1,
                        j1 = j + 1
                    )));
                }
            }
        }
    }
    Ok(n)
}

/// `exp_p(v)` for the geodesic flow `ẍ^k + Γ^k_{ij}(x) ẋ^i ẋ^j = 0`, by the
/// coefficient recursion `(m+2)(m+1) a_{m+2} = −[t^m] Γ(x) ẋ ẋ`, then `t = 1`.
/// The `t^m` coefficient is homogeneous of degree `m` in `v`.
pub fn geodesic_jet<S: Scalar>(conn: &Connection<S>, point: &[S], order: usize) -> Result<JetMap<S>> {
    let n = require_chart_connection(conn)?;
    if point.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "point has {} coordinates, chart has {n}",
            point.len()
        )));
    }
    let base = Base::Chart(n);
    let mut a: Vec<Vec<Poly<S>>> = (0..n)
        .map(|k| {
            let mut e: XMonomial = SmallVec::from_elem(0, n);
            e[k] = 1;
            vec![
                Poly::constant(base, point[k].clone()),
                Poly::monomial(n, e, S::one()),
            ]
        })
        .collect();
    for m in 0..order.saturating_sub(1) {
        let x: Vec<Poly<S>> = (0..n)
            .map(|k| a[k].iter().fold(Poly::zero(base), |acc, t| &acc + t))
            .collect();
        let xdot: Vec<Poly<S>> = (0..n)
            .map(|k| {
                a[k].iter()
                    .enumerate()
                    .skip(1)
                    .fold(Poly::zero(base), |acc, (d, t)| &acc + &t.scale(&S::from_int(d as i64)))
            })
            .collect();
        // ẋ lowers t-degree by one, so [t^m] of Γ(x)ẋẋ sits in v-degree m + 2.
        let mut next = Vec::with_capacity(n);
        for k in 0..n {
            let mut s = Poly::zero(base);
            for i in 0..n {
                for j in 0..n {
                    let g = conn.get(i, j, k);
                    if g.is_zero() {
                        continue;
                    }
                    let gx = substitute(g, &x, m + 2);
                    let t = mul_trunc(&mul_trunc(&gx, &xdot[i], m + 2), &xdot[j], m + 2);
                    s.add_assign_ref(&t);
                }
            }
            let w = -S::one() / S::from_int(((m + 2) * (m + 1)) as i64);
            next.push(homogeneous(&s, m + 2).scale(&w));
        }
        for (k, t) in next.into_iter().enumerate() {
            a[k].push(t);
        }
    }
    let comps = a
        .into_iter()
        .map(|terms| truncate(&terms.iter().fold(Poly::zero(base), |acc, t| &acc + t), order))
        .collect();
    Ok(JetMap {
        point: point.to_vec(),
        order,
        comps,
    })
}

/// `ψ = exp₂⁻¹ ∘ exp₁` around the common base point, as the fixed point of
/// `ψ = E₁(v) − H₂(ψ)` where `E₂ = id + H₂`.
pub fn transition_jet<S: Scalar>(
    conn1: &Connection<S>,
    conn2: &Connection<S>,
    point: &[S],
    order: usize,
) -> Result<JetMap<S>> {
    let e1 = geodesic_jet(conn1, point, order)?.displacement();
    let e2 = geodesic_jet(conn2, point, order)?.displacement();
    let h2: Vec<Poly<S>> = e2
        .iter()
        .map(|c| {
            let mut h = c.clone();
            h.sub_assign_ref(&homogeneous(c, 1));
            h
        })
        .collect();
    let mut psi = e1.clone();
    for _ in 0..order {
        psi = e1
            .iter()
            .zip(&h2)
            .map(|(e, h)| {
                let mut p = e.clone();
                p.sub_assign_ref(&substitute(h, &psi, order));
                p
            })
            .collect();
    }
    Ok(JetMap {
        point: vec![S::zero(); point.len()],
        order,
        comps: psi,
    })
}

/// Exact coefficients of `ln(1 + cv)/c = Σ (−1)^{m+1} c^{m−1} v^m / m`.
pub fn closed_form_exp_1d<S: Scalar>(c: &S, order: usize) -> Vec<S> {
    let mut out = vec![S::zero(); order + 1];
    let mut cp = S::one();
    for (m, slot) in out.iter_mut().enumerate().skip(1) {
        let sign = if m % 2 == 1 { S::one() } else { -S::one() };
        *slot = sign * cp.clone() / S::from_int(m as i64);
        cp = cp * c.clone();
    }
    out
}

/// Exact coefficients of `(e^{cv} − 1)/c = Σ c^{m−1} v^m / m!`.
pub fn closed_form_transition_1d<S: Scalar>(c: &S, order: usize) -> Vec<S> {
    let mut out = vec![S::zero(); order + 1];
    let mut cp = S::one();
    let mut fact = S::one();
    for (m, slot) in out.iter_mut().enumerate().skip(1) {
        fact = fact * S::from_int(m as i64);
        *slot = cp.clone() / fact.clone();
        cp = cp * c.clone();
    }
    out
}

fn acceleration<S: Scalar>(conn: &Connection<S>, x: &[f64], xd: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let g = conn.get(i, j, k);
                    if !g.is_zero() {
                        s += g.evaluate_f64(x) * xd[i] * xd[j];
                    }
                }
            }
            -s
        })
        .collect()
}

/// `exp_p(v)` by fixed-step RK4 on the geodesic equation over `t ∈ [0, 1]`.
pub fn rk4_exp<S: Scalar>(conn: &Connection<S>, point: &[f64], v: &[f64], step: f64) -> Vec<f64> {
    let n = point.len();
    let steps = (1.0 / step).round() as usize;
    let h = 1.0 / steps as f64;
    let mut x = point.to_vec();
    let mut xd = v.to_vec();
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + s * q).collect() };
    for _ in 0..steps {
        let k1x = xd.clone();
        let k1v = acceleration(conn, &x, &xd);
        let x2 = axpy(&x, h / 2.0, &k1x);
        let v2 = axpy(&xd, h / 2.0, &k1v);
        let k2x = v2.clone();
        let k2v = acceleration(conn, &x2, &v2);
        let x3 = axpy(&x, h / 2.0, &k2x);
        let v3 = axpy(&xd, h / 2.0, &k2v);
        let k3x = v3.clone();
        let k3v = acceleration(conn, &x3, &v3);
        let x4 = axpy(&x, h, &k3x);
        let v4 = axpy(&xd, h, &k3v);
        let k4x = v4.clone();
        let k4v = acceleration(conn, &x4, &v4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            xd[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
    }
    x
}

/// Solves `exp₂,p(w) = target` by Newton's method with a central-difference
/// Jacobian, starting from `w = target − p`.
pub fn rk4_inverse_exp<S: Scalar>(
    conn: &Connection<S>,
    point: &[f64],
    target: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    let n = point.len();
    let mut w: Vec<f64> = target.iter().zip(point).map(|(t, p)| t - p).collect();
    for _ in 0..50 {
        let f = rk4_exp(conn, point, &w, step);
        let r: Vec<f64> = f.iter().zip(target).map(|(a, b)| a - b).collect();
        let scale = target.iter().map(|t| t.abs()).fold(1.0, f64::max);
        if r.iter().all(|e| e.abs() <= 1e-15 * scale) {
            return Ok(w);
        }
        let eps = 1e-6;
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += eps;
            wm[j] -= eps;
            let fp = rk4_exp(conn, point, &wp, step);
            let fm = rk4_exp(conn, point, &wm, step);
            for i in 0..n {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * eps);
            }
        }
        let dw = solve_linear(jac, r).ok_or_else(|| {
            Error::IdentityFailure("singular Jacobian while inverting the exponential map".into())
        })?;
        let small = dw.iter().all(|d| d.abs() <= 1e-16 * scale);
        for (wi, d) in w.iter_mut().zip(&dw) {
            *wi -= d;
        }
        if small {
            return Ok(w);
        }
    }
    Ok(w)
}

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Derivatives `d^m/ds^m F(s)` at `s = 0` for `m = 1, 2, 3` by central
/// differences with spacing `h`.
pub fn central_differences(f: impl Fn(f64) -> Vec<f64>, h: f64) -> [Vec<f64>; 3] {
    let f0 = f(0.0);
    let fp = f(h);
    let fm = f(-h);
    let fp2 = f(2.0 * h);
    let fm2 = f(-2.0 * h);
    let n = f0.len();
    let d1 = (0..n).map(|i| (fp[i] - fm[i]) / (2.0 * h)).collect();
    let d2 = (0..n).map(|i| (fp[i] - 2.0 * f0[i] + fm[i]) / (h * h)).collect();
    let d3 = (0..n)
        .map(|i| (fp2[i] - 2.0 * fp[i] + 2.0 * fm[i] - fm2[i]) / (2.0 * h * h * h))
        .collect();
    [d1, d2, d3]
}

/// `d^m/ds^m F(s·dir)` at `s = 0` from the exact jet: `m!` times the degree-`m`
/// part evaluated at `dir`.
pub fn directional_derivative<S: Scalar>(jet: &JetMap<S>, dir: &[f64], m: usize) -> Vec<f64> {
    let fact: f64 = (1..=m).map(|k| k as f64).product();
    jet.homogeneous_part(m)
        .iter()
        .map(|c| fact * c.evaluate_f64(dir))
        .collect()
}

/// Matrix of a filtered endomorphism `∂_K ↦ Σ_J M[K][J] ∂_J` of `Γ(SB)` at the
/// base point; zero entries are omitted.
pub type TransitionMatrix<S> = BTreeMap<(SymIndex, SymIndex), S>;

/// From the jet: `M[K][J] = (K!/J!) [v^K] ψ(v)^J`, since
/// `∂_v^K (g∘ψ)(0) = Σ_J M[K][J] ∂^J g(0)`.
pub fn matrix_from_jet<S: Scalar>(psi: &JetMap<S>) -> TransitionMatrix<S> {
    let n = psi.dim();
    let order = psi.order;
    let base = Base::Chart(n);
    let mut out = BTreeMap::new();
    for j in sym_basis_upto(n, order) {
        let mut pj = Poly::one(base);
        for (axis, &e) in j.iter().enumerate() {
            for _ in 0..e {
                pj = mul_trunc(&pj, &psi.comps[axis], order);
            }
        }
        let wj = sym_factorial::<S>(&j);
        for (e, c) in pj.terms() {
            let k: SymIndex = e.iter().map(|&t| t as u8).collect();
            let w = sym_factorial::<S>(&k) / wj.clone();
            out.insert((k, j.clone()), c.clone() * w);
        }
    }
    out
}

/// From `pbw₂⁻¹ ∘ pbw₁`, evaluated at the base point.
pub fn matrix_from_pbw<S: Scalar>(pbw1: &Pbw<S>, pbw2: &Pbw<S>, point: &[S], order: usize) -> Result<TransitionMatrix<S>> {
    let n = pbw1.pair().rank_b();
    let mut out = BTreeMap::new();
    for k in sym_basis_upto(n, order) {
        let image = transition(pbw1, pbw2, &k)?;
        for (j, c) in image.terms() {
            let v = c.evaluate(point);
            if !v.is_zero() {
                out.insert((k.clone(), j.clone()), v);
            }
        }
    }
    Ok(out)
}

/// From an automorphism `φ` through `⟨φ(η^J), ∂_K⟩ = ⟨η^J, ψ(∂_K)⟩`:
/// `M[K][J] = [φ(η^J)]_K K!/J!` at the base point.
pub fn matrix_from_phi<S: Scalar>(
    phi: impl Fn(&FormalFunction<S>) -> FormalFunction<S>,
    shape: crate::function::Shape,
    point: &[S],
) -> TransitionMatrix<S> {
    let mut out = BTreeMap::new();
    for j in sym_basis_upto(shape.rank_b, shape.order) {
        let img = phi(&FormalFunction::monomial(
            shape,
            ExteriorIndex::EMPTY,
            j.clone(),
            Coeff::one(shape.base),
        ));
        let wj = sym_factorial::<S>(&j);
        for ((e, k), c) in img.terms() {
            if *e != ExteriorIndex::EMPTY {
                continue;
            }
            let v = c.evaluate(point) * sym_factorial::<S>(k) / wj.clone();
            if !v.is_zero() {
                out.insert((k.clone(), j.clone()), v);
            }
        }
    }
    out
}

/// First entry where two matrices differ.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixMismatch<S> {
    pub row: SymIndex,
    pub col: SymIndex,
    pub left: S,
    pub right: S,
}

pub fn first_mismatch<S: Scalar>(a: &TransitionMatrix<S>, b: &TransitionMatrix<S>) -> Option<MatrixMismatch<S>> {
    let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).collect();
    for key in keys {
        let x = a.get(key).cloned().unwrap_or_else(S::zero);
        let y = b.get(key).cloned().unwrap_or_else(S::zero);
        if x != y {
            return Some(MatrixMismatch {
                row: key.0.clone(),
                col: key.1.clone(),
                left: x,
                right: y,
            });
        }
    }
    None
}

/// The three-way comparison of [`compare_with_pbw`].
#[derive(Clone, Debug)]
pub struct GeodesicReport<S: Scalar> {
    pub order: usize,
    pub jet: TransitionMatrix<S>,
    pub pbw: TransitionMatrix<S>,
    pub phi: TransitionMatrix<S>,
    pub jet_vs_pbw: Option<MatrixMismatch<S>>,
    pub jet_vs_phi: Option<MatrixMismatch<S>>,
    pub pbw_vs_phi: Option<MatrixMismatch<S>>,
}

impl<S: Scalar> GeodesicReport<S> {
    pub fn passed(&self) -> bool {
        self.jet_vs_pbw.is_none() && self.jet_vs_phi.is_none() && self.pbw_vs_phi.is_none()
    }

    pub fn entries(&self) -> usize {
        self.jet.len()
    }
}

/// Compares (i) the transition jet `exp₂⁻¹∘exp₁`, (ii) `pbw₂⁻¹∘pbw₁` and
/// (iii) `e^Y` with `Y = log φ`, `φ` the intertwiner of the two Fedosov fields,
/// at `point` through order `order`.
pub fn compare_with_pbw<S: Scalar>(
    pair: &LiePair<S>,
    conn1: &Connection<S>,
    conn2: &Connection<S>,
    point: &[S],
    order: usize,
) -> Result<GeodesicReport<S>> {
    if pair.rank_a() != 0 || !matches!(pair.base(), Base::Chart(n) if n == pair.rank_b()) {
        return Err(Error::Precondition(
            "geodesic comparison needs the tangent pair (T_M, 0) on a chart".into(),
        ));
    }
    let psi = transition_jet(conn1, conn2, point, order)?;
    let jet = matrix_from_jet(&psi);

    let offset = SplittingOffset::zero(pair);
    let pbw1 = Pbw::new(pair, conn1, &offset, order)?;
    let pbw2 = Pbw::new(pair, conn2, &offset, order)?;
    let pbw = matrix_from_pbw(&pbw1, &pbw2, point, order)?;

    let ctr = Contraction::reference();
    let q1 = FedosovField::new(pair, conn1, order, &ctr)?;
    let q2 = FedosovField::new(pair, conn2, order, &ctr)?;
    let sol = solve_phi(&q1, &q2, &ctr)?;
    let y = log_of_solution(&sol)?;
    let e_y = exp_field(&y)?;
    let phi = matrix_from_phi(|f| e_y.apply(f), pair.shape(order), point);

    Ok(GeodesicReport {
        order,
        jet_vs_pbw: first_mismatch(&jet, &pbw),
        jet_vs_phi: first_mismatch(&jet, &phi),
        pbw_vs_phi: first_mismatch(&pbw, &phi),
        jet,
        pbw,
        phi,
    })
}

/// Quadratic part of a geodesic jet predicted by `−½ Γ^k_{ij}(p) v^i v^j`.
pub fn expected_quadratic<S: Scalar>(conn: &Connection<S>, point: &[S]) -> Vec<Poly<S>> {
    let n = point.len();
    let half = S::ratio(-1, 2);
    (0..n)
        .map(|k| {
            let mut out = Poly::zero(Base::Chart(n));
            for i in 0..n {
                for j in 0..n {
                    let g = conn.get(i, j, k).evaluate(point);
                    if g.is_zero() {
                        continue;
                    }
                    let mut e: XMonomial = SmallVec::from_elem(0, n);
                    e[i] += 1;
                    e[j] += 1;
                    out.add_assign_ref(&Poly::monomial(n, e, g * half.clone()));
                }
            }
            out
        })
        .collect()
}
