#![allow(dead_code)]

use std::path::PathBuf;

use fedosov_core::fedosov::Contraction;
use fedosov_core::function::{sym_basis_upto, sym_degree};
use fedosov_core::operator::DiffOp;
use fedosov_core::{
    Base, Coefficient, ExteriorIndex, FedosovField, FormalFunction, Presentation, Rational, Shape,
    SymIndex, VerticalVectorField,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const SHIPPED: [&str; 7] = [
    "abelian", "solvable", "borel", "sl2", "chart1d", "chart1d_x", "chart2d",
];

pub fn presentation_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../presentations")
        .join(format!("{name}.json"))
}

pub fn load(name: &str) -> Presentation {
    let p = Presentation::load(presentation_path(name)).expect("shipped presentation parses");
    p.validate().expect("shipped presentation validates");
    p
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn contraction(p: &Presentation, splitting: u8, order: usize) -> Contraction<Rational> {
    match splitting {
        1 => Contraction::reference(),
        _ => Contraction::for_offset(&p.offset, p.pair.shape(order)),
    }
}

/// Fedosov fields for both connections, built with the given splitting.
pub fn fields(p: &Presentation, splitting: u8, order: usize) -> (FedosovField, FedosovField) {
    let ctr = contraction(p, splitting, order);
    let q1 = FedosovField::new(&p.pair, &p.connection1, order, &ctr).unwrap();
    let q2 = FedosovField::new(&p.pair, p.connection2_or_first(), order, &ctr).unwrap();
    (q1, q2)
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn small_rational(rng: &mut StdRng) -> Rational {
    let n = rng.gen_range(-4i64..=4);
    let d = rng.gen_range(1i64..=3);
    rat(if n == 0 { 1 } else { n }, d)
}

pub fn random_coeff(rng: &mut StdRng, base: Base) -> Coefficient {
    match base {
        Base::Point => Coefficient::constant(base, small_rational(rng)),
        Base::Chart(n) => {
            let mut c = Coefficient::constant(base, small_rational(rng));
            if rng.gen_bool(0.5) {
                let mu = rng.gen_range(0..n);
                c = &c + &Coefficient::coordinate(n, mu).scale(&small_rational(rng));
            }
            c
        }
    }
}

pub fn random_sym(rng: &mut StdRng, width: usize, lo: usize, hi: usize) -> SymIndex {
    let choices: Vec<SymIndex> = sym_basis_upto(width, hi)
        .into_iter()
        .filter(|k| sym_degree(k) >= lo)
        .collect();
    choices[rng.gen_range(0..choices.len())].clone()
}

pub fn random_ext(rng: &mut StdRng, frame: usize, max_degree: usize) -> ExteriorIndex {
    let mut idx: Vec<usize> = Vec::new();
    for u in 0..frame {
        if idx.len() < max_degree && rng.gen_bool(0.3) {
            idx.push(u);
        }
    }
    ExteriorIndex::from_indices(&idx).unwrap().0
}

pub fn random_shape(rng: &mut StdRng, order: usize) -> Shape {
    let rb = rng.gen_range(1..=2);
    let ra = rng.gen_range(0..=2);
    Shape::new(rb, ra, Base::Point, order)
}

/// A random operator with `n_terms` terms, each satisfying `|K| ≥ |J| + shift`.
pub fn random_op(rng: &mut StdRng, shape: Shape, n_terms: usize, shift: i64) -> DiffOp<Rational> {
    let mut d = DiffOp::zero(shape);
    let n = shape.order;
    for _ in 0..n_terms {
        let q = rng.gen_range(0..=n);
        let lo = (q as i64 + shift).max(0) as usize;
        if lo > n {
            continue;
        }
        let j = random_sym(rng, shape.rank_b, q, q);
        let k = random_sym(rng, shape.rank_b, lo, n);
        let e = random_ext(rng, shape.frame(), 3);
        d.add_term(e, k, j, random_coeff(rng, shape.base));
    }
    d
}

/// A random form-degree-zero vertical field with fiber degrees in `2..=order`.
pub fn random_admissible_field(rng: &mut StdRng, shape: Shape, n_terms: usize) -> VerticalVectorField {
    let mut y = VerticalVectorField::zero(shape);
    for _ in 0..n_terms {
        let b = rng.gen_range(0..shape.rank_b);
        let k = random_sym(rng, shape.rank_b, 2, shape.order);
        y.component_mut(b)
            .add_term(ExteriorIndex::EMPTY, k, random_coeff(rng, shape.base));
    }
    y
}

/// The automorphism `f(η) ↦ f(η + g(η))` with `g` of fiber degree ≥ 2.
pub fn substitution(images: &[FormalFunction], f: &FormalFunction) -> FormalFunction {
    let shape = f.shape();
    let targets: Vec<FormalFunction> = images
        .iter()
        .enumerate()
        .map(|(l, g)| &FormalFunction::eta(shape, l) + g)
        .collect();
    let mut out = FormalFunction::zero(shape);
    for ((e, k), c) in f.terms() {
        let mut t = FormalFunction::monomial(shape, *e, shape.zero_sym(), c.clone());
        for (l, &p) in k.iter().enumerate() {
            for _ in 0..p {
                t = &t * &targets[l];
            }
        }
        out = &out + &t;
    }
    out
}

pub fn random_images(rng: &mut StdRng, shape: Shape, n_terms: usize) -> Vec<FormalFunction> {
    (0..shape.rank_b)
        .map(|_| {
            let mut g = FormalFunction::zero(shape);
            for _ in 0..n_terms {
                let k = random_sym(rng, shape.rank_b, 2, shape.order);
                g.add_term(ExteriorIndex::EMPTY, k, Coefficient::constant(shape.base, small_rational(rng)));
            }
            g
        })
        .collect()
}

/// A random function with `n_terms` monomials of form degree ≤ `max_form`.
pub fn random_function(rng: &mut StdRng, shape: Shape, n_terms: usize, max_form: usize) -> FormalFunction {
    let mut f = FormalFunction::zero(shape);
    for _ in 0..n_terms {
        let e = random_ext(rng, shape.frame(), max_form);
        let k = random_sym(rng, shape.rank_b, 0, shape.order);
        f.add_term(e, k, random_coeff(rng, shape.base));
    }
    f
}

/// Agreement of `f` and `g` through fiber degree `upto`.
pub fn agree_through(f: &FormalFunction, g: &FormalFunction, upto: usize) -> bool {
    let d = f.try_sub(g).unwrap();
    let ok = d.terms().all(|((_, k), _)| sym_degree(k) > upto);
    ok
}
