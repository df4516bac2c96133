mod common;

use common::*;
use fedosov_core::enveloping::{comultiply_quotient, comultiply_section, pbw_tensor, verify_lightning_flat, Pbw};
use fedosov_core::fedosov::{euler, hat_koszul, koszul, Contraction};
use fedosov_core::function::{pair, sym_basis, sym_factorial};
use fedosov_core::lie_pair::FrameChange;
use fedosov_core::{
    Base, Coefficient, EnvelopingElement, ExteriorIndex, FormalFunction, PolySection, Presentation, Rational, Shape,
    SplittingOffset, VerticalVectorField,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::Rng;

fn pick(rng: &mut StdRng) -> Presentation {
    load(SHIPPED[rng.gen_range(0..SHIPPED.len())])
}

fn random_section(rng: &mut StdRng, rank: usize, base: Base, max_degree: usize, n_terms: usize) -> PolySection {
    let mut s = PolySection::zero(rank, base);
    for _ in 0..n_terms {
        let k = random_sym(rng, rank, 0, max_degree);
        s.add_term(k, random_coeff(rng, base));
    }
    s
}

fn sign(p: usize, q: usize) -> Rational {
    rat(if p * q % 2 == 1 { -1 } else { 1 }, 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn product_is_graded_commutative_and_associative(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let shape = Shape::new(rng.gen_range(1..=2), rng.gen_range(0..=2), Base::Chart(1), rng.gen_range(2..=5));
        let f = random_function(&mut rng, shape, 4, 3);
        let g = random_function(&mut rng, shape, 4, 3);
        let h = random_function(&mut rng, shape, 3, 3);
        prop_assert_eq!(&(&f * &g) * &h, &f * &(&g * &h));
        for p in f.form_degrees() {
            for q in g.form_degrees() {
                let fp = f.form_part(p);
                let gq = g.form_part(q);
                prop_assert_eq!(&fp * &gq, (&gq * &fp).scale(&sign(p, q)));
            }
        }
    }

    #[test]
    fn filtration_order_is_additive(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let shape = random_shape(&mut rng, 5);
        let f = random_function(&mut rng, shape, 3, 2);
        let g = random_function(&mut rng, shape, 3, 2);
        let fg = &f * &g;
        if let (Some(a), Some(b), Some(c)) = (f.filtration_order(), g.filtration_order(), fg.filtration_order()) {
            prop_assert!(c >= a + b);
        }
    }

    #[test]
    fn contraction_is_an_even_derivation(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let shape = random_shape(&mut rng, 4);
        let f = random_function(&mut rng, shape, 4, 2);
        let g = random_function(&mut rng, shape, 4, 2);
        let i = rng.gen_range(0..shape.rank_b);
        let lhs = (&f * &g).contract(i);
        let rhs = &(&f.contract(i) * &g) + &(&f * &g.contract(i));
        prop_assert!(agree_through(&lhs, &rhs, shape.order - 1));
        let u = rng.gen_range(0..shape.frame());
        let xi = FormalFunction::xi(shape, u);
        prop_assert_eq!((&xi * &f).contract(i), &xi * &f.contract(i));
    }

    #[test]
    fn ce_differential_squares_to_zero(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let p = pick(&mut rng);
        let shape = p.pair.shape(3);
        let f = random_function(&mut rng, shape, 5, 2);
        prop_assert!(p.pair.ce_differential(&p.pair.ce_differential(&f)).is_zero());
    }

    #[test]
    fn curvature_is_covariant_derivative_squared(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let p = pick(&mut rng);
        let shape = p.pair.shape(2);
        let conn = if rng.gen_bool(0.5) { &p.connection1 } else { p.connection2_or_first() };
        let mut omega = VerticalVectorField::zero(shape);
        for i in 0..shape.rank_b {
            omega.component_mut(i).add_term(ExteriorIndex::EMPTY, shape.zero_sym(), random_coeff(&mut rng, shape.base));
        }
        let twice = conn.covariant_derivative(&p.pair, &conn.covariant_derivative(&p.pair, &omega).unwrap()).unwrap();
        let curv = conn.curvature(&p.pair);
        let mut want = VerticalVectorField::zero(shape);
        for i in 0..shape.rank_b {
            let fi = omega.component(i).clone();
            want = want.try_add(&curv.apply_to_frame(shape, i).map(|c| &fi * c)).unwrap();
        }
        prop_assert_eq!(twice, want);
        prop_assert!(conn.bott_check(&p.pair).is_empty());
    }

    #[test]
    fn frame_change_is_an_algebra_isomorphism(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let p = pick(&mut rng);
        let shape = p.pair.shape(4);
        let mut offset = SplittingOffset::zero(&p.pair);
        for i in 0..shape.rank_b {
            for a in 0..shape.rank_a {
                offset.set(i, a, random_coeff(&mut rng, shape.base));
            }
        }
        let fc = FrameChange::new(&offset, shape);
        let back = FrameChange::new(&offset.negated(), shape);
        let f = random_function(&mut rng, shape, 4, 3);
        let g = random_function(&mut rng, shape, 4, 3);
        prop_assert_eq!(fc.apply(&(&f * &g)), &fc.apply(&f) * &fc.apply(&g));
        prop_assert_eq!(fc.apply(&f).filtration_order(), f.filtration_order());
        prop_assert_eq!(back.apply(&fc.apply(&f)), f);
    }

    #[test]
    fn function_homotopy_identities(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let p = pick(&mut rng);
        let shape = p.pair.shape(4);
        let f = random_function(&mut rng, shape, 6, 3);
        for ctr in [Contraction::reference(), Contraction::for_offset(&p.offset, shape)] {
            let lhs = &koszul(&ctr.h(&f)) + &ctr.h(&koszul(&f));
            prop_assert_eq!(lhs, &f - &ctr.sigma0(&f));
            prop_assert!(ctr.h(&ctr.h(&f)).is_zero());
            prop_assert_eq!(ctr.h(&koszul(&ctr.h(&f))), ctr.h(&f));
        }
        let e = &koszul(&hat_koszul(&f)) + &hat_koszul(&koszul(&f));
        prop_assert!(agree_through(&e, &euler(&f), shape.order - 1));
    }

    #[test]
    fn pbw_is_invertible_and_comultiplicative(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let p = pick(&mut rng);
        let n = 4;
        let offset = if rng.gen_bool(0.5) { p.offset.clone() } else { SplittingOffset::zero(&p.pair) };
        let pbw = Pbw::new(&p.pair, p.connection2_or_first(), &offset, n).unwrap();
        let s = random_section(&mut rng, p.pair.rank_b(), p.pair.base(), n, 4);
        let u = pbw.pbw(&s).unwrap();
        prop_assert_eq!(pbw.pbw_inverse(&u).unwrap(), s.clone());
        let k = random_sym(&mut rng, p.pair.rank_b(), 0, n);
        let w = EnvelopingElement::b_word(&p.pair, &k);
        prop_assert_eq!(pbw.pbw(&pbw.pbw_inverse(&w).unwrap()).unwrap(), w);
        prop_assert_eq!(comultiply_quotient(&u).unwrap(), pbw_tensor(&pbw, &comultiply_section(&s)));
    }

    #[test]
    fn pbw_recursion_on_powers(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let p = pick(&mut rng);
        let r = p.pair.rank_b();
        let base = p.pair.base();
        let pbw = Pbw::new(&p.pair, &p.connection1, &p.offset, 4).unwrap();
        let b = random_section(&mut rng, r, base, 1, 3).homogeneous_part(1);
        let mut l = vec![Coefficient::zero(base); p.pair.frame()];
        for i in 0..r {
            let bi = b.coefficient(&fedosov_core::function::sym_unit(r, i));
            for (u, c) in pbw.lift(i).iter().enumerate() {
                l[u] = &l[u] + &(&bi * c);
            }
        }
        let mut power = PolySection::one(r, base);
        for _ in 0..3 {
            let next = power.sym_mul(&b);
            let mut rhs = pbw.enveloping().left_mul_vector(&l, &pbw.apply(&power)).quotient_project();
            rhs.sub_assign(&pbw.apply(&pbw.nabla_section(&l, &power)));
            prop_assert_eq!(pbw.apply(&next), rhs);
            power = next;
        }
    }
}

#[test]
fn pairing_is_diagonal_with_factorials() {
    for r in 1..=3 {
        let shape = Shape::new(r, 0, Base::Point, 4);
        for k in 0..=4 {
            for j in sym_basis(r, k) {
                let theta = PolySection::monomial(r, Base::Point, j.clone(), Coefficient::from_int(Base::Point, 1));
                for jp in sym_basis(r, k) {
                    let f = FormalFunction::monomial(shape, ExteriorIndex::EMPTY, jp.clone(), Coefficient::from_int(Base::Point, 1));
                    let want = if j == jp { sym_factorial::<Rational>(&j) } else { rat(0, 1) };
                    assert_eq!(pair(&theta, &f).unwrap(), Coefficient::constant(Base::Point, want));
                }
            }
        }
    }
}

#[test]
fn lightning_connection_is_flat() {
    let mut checked = 0;
    for name in SHIPPED {
        let p = load(name);
        for offset in [SplittingOffset::zero(&p.pair), p.offset.clone()] {
            let pbw = Pbw::new(&p.pair, &p.connection1, &offset, 4).unwrap();
            checked += verify_lightning_flat(&pbw).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
    assert!(checked > 0);
}

#[test]
fn fedosov_x_is_normalized() {
    for name in SHIPPED {
        let p = load(name);
        for splitting in [1u8, 2] {
            let (q1, q2) = fields(&p, splitting, 5);
            let ctr = contraction(&p, splitting, 5);
            for q in [&q1, &q2] {
                assert!(ctr.h_natural(q.x()).is_zero(), "{name}");
                assert!(q.x().filtration_order().is_none_or(|o| o >= 2), "{name}");
            }
        }
    }
}
