//! Normal-ordered `U(L)`, the quotient `U(L)/U(L)Γ(A)`, the PBW map, the flat
//! connection `∇⚡` and the Kapranov action.
//!
//! A normal word is `e_0^{k_0} ⋯ e_{n-1}^{k_{n-1}}` in the reference frame,
//! B-letters first and A-letters rightmost, with its coefficient written on
//! the left. Over a chart the letters are the frame derivations and the
//! coefficients polynomials.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Mutex;

use serde_json::{json, Value};
use smallvec::SmallVec;

use crate::coeff::{Base, Coeff};
use crate::error::{Error, Result};
use crate::fedosov::{basis_functions, FedosovField};
use crate::function::{
    sym_basis, sym_basis_upto, sym_degree, sym_factorial, ExteriorIndex, FormalFunction, PolySection,
    SymIndex,
};
use crate::lie_pair::{Connection, LiePair, SplittingOffset};
use crate::scalar::{binomial, Scalar};

/// Letter multiplicities of a normal word over the frame of `L`.
pub type Word = SmallVec<[u8; 4]>;

fn word_len(w: &[u8]) -> usize {
    w.iter().map(|&k| k as usize).sum()
}

/// Element of `U(L)` (or of the quotient) in normal order.
#[derive(Clone, PartialEq)]
pub struct EnvelopingElement<S: Scalar> {
    rank_b: usize,
    frame: usize,
    base: Base,
    terms: BTreeMap<Word, Coeff<S>>,
}

impl<S: Scalar> EnvelopingElement<S> {
    pub fn zero(pair: &LiePair<S>) -> Self {
        EnvelopingElement {
            rank_b: pair.rank_b(),
            frame: pair.frame(),
            base: pair.base(),
            terms: BTreeMap::new(),
        }
    }

    pub fn one(pair: &LiePair<S>) -> Self {
        let mut e = Self::zero(pair);
        e.add_term(SmallVec::from_elem(0, pair.frame()), Coeff::one(pair.base()));
        e
    }

    /// The single word with the given multiplicities.
    pub fn word(pair: &LiePair<S>, w: Word, c: Coeff<S>) -> Self {
        let mut e = Self::zero(pair);
        e.add_term(w, c);
        e
    }

    pub fn letter(pair: &LiePair<S>, u: usize) -> Self {
        let mut w: Word = SmallVec::from_elem(0, pair.frame());
        w[u] = 1;
        Self::word(pair, w, Coeff::one(pair.base()))
    }

    /// The B-word `b̃^K` (in the reference frame).
    pub fn b_word(pair: &LiePair<S>, k: &[u8]) -> Self {
        let mut w: Word = SmallVec::from_elem(0, pair.frame());
        w[..k.len()].copy_from_slice(k);
        Self::word(pair, w, Coeff::one(pair.base()))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Coeff<S>)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, w: &[u8]) -> Coeff<S> {
        self.terms.get(w).cloned().unwrap_or_else(|| Coeff::zero(self.base))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, w: Word, c: Coeff<S>) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(w) {
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
        for (w, c) in &other.terms {
            self.add_term(w.clone(), c.clone());
        }
    }

    pub fn sub_assign(&mut self, other: &Self) {
        for (w, c) in &other.terms {
            self.add_term(w.clone(), -c);
        }
    }

    /// Left multiplication by a function.
    pub fn mul_coeff(&self, g: &Coeff<S>) -> Self {
        let mut out = Self {
            terms: BTreeMap::new(),
            ..self.clone()
        };
        for (w, c) in &self.terms {
            out.add_term(w.clone(), g * c);
        }
        out
    }

    pub fn scale(&self, s: &S) -> Self {
        self.mul_coeff(&Coeff::constant(self.base, s.clone()))
    }

    /// Longest word length present.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(|w| word_len(w)).max()
    }

    /// Drops every word containing an A-letter, i.e. projects onto
    /// `U(L)/U(L)Γ(A)`.
    pub fn quotient_project(&self) -> Self {
        let r = self.rank_b;
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(w, _)| w[r..].iter().all(|&k| k == 0))
                .map(|(w, c)| (w.clone(), c.clone()))
                .collect(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Value {
        let r = self.rank_b;
        Value::Array(
            self.terms
                .iter()
                .map(|(w, c)| json!({"coeff": c.to_json(), "b_word": w[..r].to_vec(), "a_word": w[r..].to_vec()}))
                .collect(),
        )
    }
}

impl<S: Scalar> fmt::Debug for EnvelopingElement<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (w, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (u, &k) in w.iter().enumerate() {
                let name = if u < self.rank_b {
                    format!("b{}", u + 1)
                } else {
                    format!("a{}", u - self.rank_b + 1)
                };
                match k {
                    0 => {}
                    1 => write!(f, "·{name}")?,
                    k => write!(f, "·{name}^{k}")?,
                }
            }
        }
        Ok(())
    }
}

/// A letter of an unordered word: a frame element or a function.
#[derive(Clone, Debug)]
pub enum Letter<S: Scalar> {
    Frame(usize),
    Function(Coeff<S>),
}

/// Multiplication in `U(L)` with a memo table for `e_u · w`.
#[derive(Debug)]
pub struct Enveloping<S: Scalar> {
    pair: LiePair<S>,
    memo: Mutex<HashMap<(usize, Word), EnvelopingElement<S>>>,
}

impl<S: Scalar> Clone for Enveloping<S> {
    fn clone(&self) -> Self {
        Enveloping::new(&self.pair)
    }
}

impl<S: Scalar> Enveloping<S> {
    pub fn new(pair: &LiePair<S>) -> Self {
        Enveloping {
            pair: pair.clone(),
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn pair(&self) -> &LiePair<S> {
        &self.pair
    }

    /// `e_u · x`.
    pub fn left_mul_letter(&self, u: usize, x: &EnvelopingElement<S>) -> EnvelopingElement<S> {
        let mut out = EnvelopingElement::zero(&self.pair);
        for (w, g) in &x.terms {
            out.add_assign(&self.letter_times_word(u, w).mul_coeff(g));
            let dg = self.pair.anchor_apply(u, g);
            if !dg.is_zero() {
                out.add_term(w.clone(), dg);
            }
        }
        out
    }

    fn letter_times_word(&self, u: usize, w: &Word) -> EnvelopingElement<S> {
        let key = (u, w.clone());
        if let Some(hit) = self.memo.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let min = w.iter().position(|&k| k > 0);
        let result = match min {
            Some(m) if m < u => {
                let mut rest = w.clone();
                rest[m] -= 1;
                let inner = self.letter_times_word(u, &rest);
                let mut out = self.left_mul_letter(m, &inner);
                for k in 0..self.pair.frame() {
                    let c = self.pair.c(u, m, k);
                    if c.is_zero() {
                        continue;
                    }
                    out.add_assign(&self.letter_times_word(k, &rest).mul_coeff(c));
                }
                out
            }
            _ => {
                let mut w2 = w.clone();
                w2[u] += 1;
                EnvelopingElement::word(&self.pair, w2, Coeff::one(self.pair.base()))
            }
        };
        self.memo.lock().unwrap().insert(key, result.clone());
        result
    }

    /// `x · y`.
    pub fn mul(&self, x: &EnvelopingElement<S>, y: &EnvelopingElement<S>) -> EnvelopingElement<S> {
        let mut out = EnvelopingElement::zero(&self.pair);
        for (w, g) in &x.terms {
            let mut acc = y.clone();
            for u in (0..w.len()).rev() {
                for _ in 0..w[u] {
                    acc = self.left_mul_letter(u, &acc);
                }
            }
            out.add_assign(&acc.mul_coeff(g));
        }
        out
    }

    /// Rewrites an arbitrary product of letters into normal order.
    pub fn normal_form(&self, letters: &[Letter<S>]) -> EnvelopingElement<S> {
        let mut acc = EnvelopingElement::one(&self.pair);
        for l in letters.iter().rev() {
            acc = match l {
                Letter::Frame(u) => self.left_mul_letter(*u, &acc),
                Letter::Function(g) => acc.mul_coeff(g),
            };
        }
        acc
    }

    /// `(Σ_u l^u e_u) · x`.
    pub fn left_mul_vector(&self, l: &[Coeff<S>], x: &EnvelopingElement<S>) -> EnvelopingElement<S> {
        let mut out = EnvelopingElement::zero(&self.pair);
        for (u, c) in l.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            out.add_assign(&self.left_mul_letter(u, x).mul_coeff(c));
        }
        out
    }
}

/// The PBW map `Γ(SB) → U(L)/U(L)Γ(A)` of a splitting and a torsion-free
/// connection, with cached values on the monomial basis `∂_K`.
#[derive(Debug)]
pub struct Pbw<S: Scalar> {
    env: Enveloping<S>,
    conn: Connection<S>,
    offset: SplittingOffset<S>,
    order: usize,
    cache: Mutex<BTreeMap<SymIndex, EnvelopingElement<S>>>,
}

impl<S: Scalar> Pbw<S> {
    pub fn new(
        pair: &LiePair<S>,
        conn: &Connection<S>,
        offset: &SplittingOffset<S>,
        order: usize,
    ) -> Result<Self> {
        conn.require_torsion_free(pair)?;
        Ok(Pbw {
            env: Enveloping::new(pair),
            conn: conn.clone(),
            offset: offset.clone(),
            order,
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn enveloping(&self) -> &Enveloping<S> {
        &self.env
    }

    pub fn pair(&self) -> &LiePair<S> {
        self.env.pair()
    }

    fn rank(&self) -> usize {
        self.pair().rank_b()
    }

    fn base(&self) -> Base {
        self.pair().base()
    }

    /// Frame components of `ι_B(b_i)` for this splitting.
    pub fn lift(&self, i: usize) -> Vec<Coeff<S>> {
        self.offset.lift(self.base(), i)
    }

    /// `∇_l s` on `Γ(SB)` for `l = Σ l^u e_u`.
    pub fn nabla_section(&self, l: &[Coeff<S>], s: &PolySection<S>) -> PolySection<S> {
        let pair = self.pair();
        let r = self.rank();
        let mut out = PolySection::zero(r, self.base());
        for (k, g) in s.terms() {
            let mut dg = Coeff::zero(self.base());
            for (u, lu) in l.iter().enumerate() {
                if !lu.is_zero() {
                    dg += &(lu * &pair.anchor_apply(u, g));
                }
            }
            out.add_term(k.clone(), dg);
            for i in 0..r {
                if k[i] == 0 {
                    continue;
                }
                let mut rest = k.clone();
                rest[i] -= 1;
                let mult = S::from_int(k[i] as i64);
                for t in 0..r {
                    let mut gam = Coeff::zero(self.base());
                    for (u, lu) in l.iter().enumerate() {
                        if !lu.is_zero() {
                            gam += &(lu * self.conn.get(u, i, t));
                        }
                    }
                    if gam.is_zero() {
                        continue;
                    }
                    let mut kk = rest.clone();
                    kk[t] += 1;
                    out.add_term(kk, (&gam * g).scale(&mult));
                }
            }
        }
        out
    }

    /// `pbw(∂_K)` via `pbw(∂_K) = (1/|K|) Σ_j k_j (ι(b_j)·pbw(∂_{K−e_j}) − pbw(∇_{ι(b_j)} ∂_{K−e_j}))`.
    pub fn basis_image(&self, k: &[u8]) -> EnvelopingElement<S> {
        let key: SymIndex = SmallVec::from_slice(k);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let pair = self.pair().clone();
        let n = sym_degree(k);
        let result = if n == 0 {
            EnvelopingElement::one(&pair)
        } else {
            let mut acc = EnvelopingElement::zero(&pair);
            for j in 0..self.rank() {
                if k[j] == 0 {
                    continue;
                }
                let mut rest = key.clone();
                rest[j] -= 1;
                let lift = self.lift(j);
                let lower = self.basis_image(&rest);
                let mut term = self.env.left_mul_vector(&lift, &lower).quotient_project();
                let rest_section =
                    PolySection::monomial(self.rank(), self.base(), rest.clone(), Coeff::one(self.base()));
                let nab = self.nabla_section(&lift, &rest_section);
                term.sub_assign(&self.apply(&nab));
                acc.add_assign(&term.scale(&S::from_int(k[j] as i64)));
            }
            acc.scale(&S::ratio(1, n as i64))
        };
        self.cache.lock().unwrap().insert(key, result.clone());
        result
    }

    /// `pbw(s)`, extended `R`-linearly.
    pub fn apply(&self, s: &PolySection<S>) -> EnvelopingElement<S> {
        let mut out = EnvelopingElement::zero(self.pair());
        for (k, g) in s.terms() {
            out.add_assign(&self.basis_image(k).mul_coeff(g));
        }
        out
    }

    /// Checked `pbw(s)` for `deg s ≤ N`.
    pub fn pbw(&self, s: &PolySection<S>) -> Result<EnvelopingElement<S>> {
        self.check_degree(s.degree().unwrap_or(0), self.order)?;
        Ok(self.apply(s))
    }

    fn check_degree(&self, deg: usize, max: usize) -> Result<()> {
        if deg > max {
            return Err(Error::Truncation(format!(
                "degree {deg} exceeds the available order {max}"
            )));
        }
        Ok(())
    }

    /// Inverse by back-substitution on word length.
    pub fn pbw_inverse(&self, u: &EnvelopingElement<S>) -> Result<PolySection<S>> {
        let r = self.rank();
        let mut rest = u.quotient_project();
        let mut out = PolySection::zero(r, self.base());
        while let Some(top) = rest.degree() {
            let (w, g) = rest
                .terms()
                .find(|(w, _)| word_len(w) == top)
                .map(|(w, g)| (w.clone(), g.clone()))
                .unwrap();
            let k: SymIndex = SmallVec::from_slice(&w[..r]);
            let image = self.basis_image(&k);
            let lead = image.coefficient(&w);
            if lead != Coeff::one(self.base()) {
                return Err(Error::IdentityFailure(format!(
                    "pbw(∂{:?}) has leading coefficient {lead}",
                    k.as_slice()
                )));
            }
            rest.sub_assign(&image.mul_coeff(&g));
            out.add_term(k, g);
        }
        Ok(out)
    }

    /// `∇⚡_u(s) = pbw⁻¹(e_u · pbw(s))` for a frame letter `u`.
    pub fn nabla_lightning(&self, u: usize, s: &PolySection<S>) -> Result<PolySection<S>> {
        self.check_degree(s.degree().unwrap_or(0) + 1, self.order)?;
        let image = self.apply(s);
        self.pbw_inverse(&self.env.left_mul_letter(u, &image))
    }

    /// `ϱ_α(s) = pbw⁻¹(a_α · pbw(s))`, `α` indexing the A-frame.
    pub fn kapranov_action(&self, alpha: usize, s: &PolySection<S>) -> Result<PolySection<S>> {
        if alpha >= self.pair().rank_a() {
            return Err(Error::ShapeMismatch(format!("no A-frame letter {}", alpha + 1)));
        }
        self.nabla_lightning(self.rank() + alpha, s)
    }
}

/// Tensor-square element of `Γ(SB) ⊗_R Γ(SB)`.
pub type SectionTensor<S> = BTreeMap<(SymIndex, SymIndex), Coeff<S>>;

/// Tensor-square element of the quotient coalgebra.
pub type WordTensor<S> = BTreeMap<(Word, Word), Coeff<S>>;

fn tensor_add<K: Ord, S: Scalar>(t: &mut BTreeMap<K, Coeff<S>>, key: K, c: Coeff<S>) {
    if c.is_zero() {
        return;
    }
    match t.entry(key) {
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

/// All splittings `K = K₁ + K₂` with weight `Π binom(k_i, k1_i)`.
fn splittings<S: Scalar>(k: &[u8]) -> Vec<(SymIndex, SymIndex, S)> {
    let mut out = vec![(SmallVec::new(), SmallVec::new(), S::one())];
    for &ki in k {
        let mut next = Vec::new();
        for (a, b, w) in &out {
            for t in 0..=ki {
                let mut a2: SymIndex = a.clone();
                let mut b2: SymIndex = b.clone();
                a2.push(t);
                b2.push(ki - t);
                next.push((a2, b2, w.clone() * binomial::<S>(ki as usize, t as usize)));
            }
        }
        out = next;
    }
    out
}

/// Shuffle comultiplication on `Γ(SB)`.
pub fn comultiply_section<S: Scalar>(s: &PolySection<S>) -> SectionTensor<S> {
    let mut t = BTreeMap::new();
    for (k, g) in s.terms() {
        for (a, b, w) in splittings::<S>(k) {
            tensor_add(&mut t, (a, b), g.scale(&w));
        }
    }
    t
}

/// Comultiplication on quotient classes (B-words), where every `b̃_i` is primitive.
pub fn comultiply_quotient<S: Scalar>(x: &EnvelopingElement<S>) -> Result<WordTensor<S>> {
    let r = x.rank_b;
    let mut t = BTreeMap::new();
    for (w, g) in &x.terms {
        if w[r..].iter().any(|&k| k > 0) {
            return Err(Error::Precondition(
                "comultiplication is taken on quotient classes".into(),
            ));
        }
        for (a, b, c) in splittings::<S>(&w[..r]) {
            let mut wa: Word = SmallVec::from_elem(0, x.frame);
            let mut wb: Word = SmallVec::from_elem(0, x.frame);
            wa[..r].copy_from_slice(&a);
            wb[..r].copy_from_slice(&b);
            tensor_add(&mut t, (wa, wb), g.scale(&c));
        }
    }
    Ok(t)
}

/// `(pbw ⊗ pbw)` applied to a section tensor.
pub fn pbw_tensor<S: Scalar>(pbw: &Pbw<S>, t: &SectionTensor<S>) -> WordTensor<S> {
    let mut out = BTreeMap::new();
    for ((a, b), g) in t {
        let pa = pbw.basis_image(a);
        let pb = pbw.basis_image(b);
        for (wa, ca) in pa.terms() {
            for (wb, cb) in pb.terms() {
                tensor_add(&mut out, (wa.clone(), wb.clone()), &(g * ca) * cb);
            }
        }
    }
    out
}

/// Checks `Δ∘pbw = (pbw⊗pbw)∘Δ` on every `∂_K`, `|K| ≤ max_degree`.
pub fn verify_coalgebra_morphism<S: Scalar>(pbw: &Pbw<S>, max_degree: usize) -> Result<usize> {
    let r = pbw.rank();
    let mut checked = 0;
    for k in sym_basis_upto(r, max_degree) {
        let s = PolySection::monomial(r, pbw.base(), k.clone(), Coeff::one(pbw.base()));
        let lhs = comultiply_quotient(&pbw.apply(&s))?;
        let rhs = pbw_tensor(pbw, &comultiply_section(&s));
        if lhs != rhs {
            return Err(Error::IdentityFailure(format!(
                "Δ∘pbw ≠ (pbw⊗pbw)∘Δ on ∂{:?}",
                k.as_slice()
            )));
        }
        checked += 1;
    }
    Ok(checked)
}

/// Checks `[ϱ_α, ϱ_β] = ϱ_{[a_α, a_β]}` and the coderivation law
/// `Δ∘ϱ_α = (ϱ_α⊗1 + 1⊗ϱ_α)∘Δ` on every `∂_K` with `|K| ≤ max_degree`.
pub fn verify_kapranov<S: Scalar>(pbw: &Pbw<S>, max_degree: usize) -> Result<usize> {
    let pair = pbw.pair().clone();
    let r = pair.rank_b();
    let ra = pair.rank_a();
    let base = pair.base();
    let mut checked = 0;
    for k in sym_basis_upto(r, max_degree) {
        let s = PolySection::monomial(r, base, k.clone(), Coeff::one(base));
        for a in 0..ra {
            let ra_s = pbw.kapranov_action(a, &s)?;
            let lhs = comultiply_section(&ra_s);
            let mut rhs = BTreeMap::new();
            for ((x, y), g) in comultiply_section(&s) {
                let left = PolySection::monomial(r, base, x.clone(), Coeff::one(base));
                for (kx, c) in pbw.kapranov_action(a, &left)?.terms() {
                    tensor_add(&mut rhs, (kx.clone(), y.clone()), &g * c);
                }
                let right = PolySection::monomial(r, base, y.clone(), Coeff::one(base));
                for (ky, c) in pbw.kapranov_action(a, &right)?.terms() {
                    tensor_add(&mut rhs, (x.clone(), ky.clone()), &g * c);
                }
            }
            if lhs != rhs {
                return Err(Error::IdentityFailure(format!(
                    "ϱ_{} is not a coderivation on ∂{:?}",
                    a + 1,
                    k.as_slice()
                )));
            }
            checked += 1;
            if sym_degree(&k) + 2 > pbw.order() {
                continue;
            }
            for b in a + 1..ra {
                let ab = pbw.kapranov_action(a, &pbw.kapranov_action(b, &s)?)?;
                let ba = pbw.kapranov_action(b, &pbw.kapranov_action(a, &s)?)?;
                let mut bracket = PolySection::zero(r, base);
                for w in 0..ra {
                    let c = pair.c(r + a, r + b, r + w);
                    if !c.is_zero() {
                        bracket.add_assign(&pbw.kapranov_action(w, &s)?.mul_coeff(c));
                    }
                }
                if &ab - &ba != bracket {
                    return Err(Error::IdentityFailure(format!(
                        "[ϱ_{}, ϱ_{}] ≠ ϱ of the bracket on ∂{:?}",
                        a + 1,
                        b + 1,
                        k.as_slice()
                    )));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// Checks `[∇⚡_u, ∇⚡_v] = ∇⚡_{[e_u, e_v]}` on every `∂_K`, `|K| ≤ order − 2`.
pub fn verify_lightning_flat<S: Scalar>(pbw: &Pbw<S>) -> Result<usize> {
    let pair = pbw.pair().clone();
    let r = pair.rank_b();
    let n = pair.frame();
    let base = pair.base();
    let mut checked = 0;
    for k in sym_basis_upto(r, pbw.order().saturating_sub(2)) {
        let s = PolySection::monomial(r, base, k.clone(), Coeff::one(base));
        for u in 0..n {
            for v in u + 1..n {
                let uv = pbw.nabla_lightning(u, &pbw.nabla_lightning(v, &s)?)?;
                let vu = pbw.nabla_lightning(v, &pbw.nabla_lightning(u, &s)?)?;
                let mut bracket = PolySection::zero(r, base);
                for w in 0..n {
                    let c = pair.c(u, v, w);
                    if !c.is_zero() {
                        bracket.add_assign(&pbw.nabla_lightning(w, &s)?.mul_coeff(c));
                    }
                }
                if &uv - &vu != bracket {
                    return Err(Error::IdentityFailure(format!(
                        "∇⚡ is not flat on (e{}, e{}) at ∂{:?}",
                        u + 1,
                        v + 1,
                        k.as_slice()
                    )));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// `d_L^{∇⚡}` on `Γ(Λ•L^∨ ⊗ ŜB^∨)` through fiber degree `N`, built from the
/// dual of `∇⚡` under the pairing `⟨∂_J, η^K⟩ = J! δ_{JK}`:
/// `∇⚡_u(η^K) = −Σ_J [∇⚡_u ∂_J]_K (K!/J!) η^J`.
#[derive(Clone, Debug)]
pub struct LightningDifferential<S: Scalar> {
    pair: LiePair<S>,
    table: Vec<FormalFunction<S>>,
    dual: BTreeMap<(usize, SymIndex), FormalFunction<S>>,
}

impl<S: Scalar> LightningDifferential<S> {
    /// Needs `pbw` available through order `N + 1`.
    pub fn new(pbw: &Pbw<S>, order: usize) -> Result<Self> {
        let pair = pbw.pair().clone();
        let shape = pair.shape(order);
        let r = pair.rank_b();
        let base = pair.base();
        let mut dual: BTreeMap<(usize, SymIndex), FormalFunction<S>> = BTreeMap::new();
        for u in 0..pair.frame() {
            for k in sym_basis_upto(r, order) {
                dual.insert((u, k), FormalFunction::zero(shape));
            }
            for j in sym_basis_upto(r, order) {
                let s = PolySection::monomial(r, base, j.clone(), Coeff::one(base));
                let img = pbw.nabla_lightning(u, &s)?;
                let jf = sym_factorial::<S>(&j);
                for (k, c) in img.terms() {
                    if sym_degree(k) > order {
                        continue;
                    }
                    let w = sym_factorial::<S>(k) / jf.clone();
                    dual.get_mut(&(u, k.clone()))
                        .unwrap()
                        .add_term(ExteriorIndex::EMPTY, j.clone(), -&c.scale(&w));
                }
            }
        }
        Ok(LightningDifferential {
            table: pair.d_xi_table(shape),
            pair,
            dual,
        })
    }

    pub fn apply(&self, f: &FormalFunction<S>) -> FormalFunction<S> {
        let shape = f.shape();
        let z = shape.zero_sym();
        let mut out = FormalFunction::zero(shape);
        for ((e, k), g) in f.terms() {
            let omega = FormalFunction::monomial(shape, *e, z.clone(), g.clone());
            let d_omega = self.pair.ce_differential_with(&self.table, &omega);
            for ((e2, _), c) in d_omega.terms() {
                out.add_term(*e2, k.clone(), c.clone());
            }
            for u in 0..self.pair.frame() {
                let Some(dual) = self.dual.get(&(u, k.clone())) else {
                    continue;
                };
                let Some((e2, neg)) = ExteriorIndex::single(u).wedge(*e) else {
                    continue;
                };
                for ((_, j), c) in dual.terms() {
                    out.add_signed(e2, j.clone(), g * c, neg);
                }
            }
        }
        out
    }
}

/// Outcome of [`verify_q_equals_lightning`].
#[derive(Clone, Debug)]
pub struct LightningReport<S: Scalar> {
    pub checked: usize,
    pub failure: Option<(FormalFunction<S>, FormalFunction<S>)>,
}

impl<S: Scalar> LightningReport<S> {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Compares `Q` with `d_L^{∇⚡}` on every basis function of fiber degree at
/// most `N − 1`, through output degree `N`. `pbw` must reach order `N + 1`.
pub fn verify_q_equals_lightning<S: Scalar>(
    q: &FedosovField<S>,
    pbw: &Pbw<S>,
) -> Result<LightningReport<S>> {
    let shape = q.shape();
    let order = shape.order;
    if pbw.order() < order + 1 {
        return Err(Error::Precondition(format!(
            "PBW order {} too small for comparison at order {order}",
            pbw.order()
        )));
    }
    let dl = LightningDifferential::new(pbw, order)?;
    let mut report = LightningReport {
        checked: 0,
        failure: None,
    };
    for f in basis_functions::<S>(shape, order.saturating_sub(1)) {
        let a = q.apply(&f).truncate(order);
        let b = dl.apply(&f).truncate(order);
        report.checked += 1;
        if a != b {
            report.failure = Some((f, &a - &b));
            return Ok(report);
        }
    }
    Ok(report)
}

/// `Σ_{|K|=n} [s]_K` coefficients of a homogeneous piece, listed in basis order.
pub fn homogeneous_coefficients<S: Scalar>(s: &PolySection<S>, n: usize) -> Vec<(SymIndex, Coeff<S>)> {
    sym_basis(s.rank(), n)
        .into_iter()
        .map(|k| {
            let c = s.coefficient(&k);
            (k, c)
        })
        .collect()
}

/// `pbw₂⁻¹ ∘ pbw₁` on `∂_K`.
pub fn transition<S: Scalar>(pbw1: &Pbw<S>, pbw2: &Pbw<S>, k: &[u8]) -> Result<PolySection<S>> {
    pbw2.pbw_inverse(&pbw1.basis_image(k))
}
